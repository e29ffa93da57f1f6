//! Hyperboloid model ℍ^d_α, geodesic polar coordinates about the base point
//! o = (0, …, 0, α⁻¹), dilations, and the Euclidean comparison distance.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{norm, DenseMatrix};
use crate::numerics::{integrate, ln_sinh, log_add_exp, sphere_volume};

/// Dimension and curvature scale. `alpha = 0` is the flat limit.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricParams {
    pub d: usize,
    pub alpha: f64,
}

impl MetricParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::input("dimension must be at least 1"));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::input(format!(
                "curvature scale must be finite and >= 0, got {alpha}"
            )));
        }
        Ok(Self { d, alpha })
    }

    pub fn euclidean(d: usize) -> Self {
        Self { d, alpha: 0.0 }
    }

    /// Angular metric coefficient: α⁻² sinh²(αρ), or ρ² when α = 0.
    pub fn metric_coefficient(&self, rho: f64) -> f64 {
        let s = radial_sinh(self.alpha, rho);
        s * s
    }

    /// Volume density α^{−(d−1)} sinh^{d−1}(αρ) with respect to dρ dσ.
    pub fn volume_density(&self, rho: f64) -> f64 {
        radial_sinh(self.alpha, rho).powi(self.d as i32 - 1)
    }
}

/// α⁻¹ sinh(αρ), continuous at α = 0.
#[inline]
pub fn radial_sinh(alpha: f64, rho: f64) -> f64 {
    if alpha == 0.0 {
        rho
    } else {
        let x = alpha * rho;
        if x.abs() < 1e-8 {
            rho * (1.0 + x * x / 6.0)
        } else {
            x.sinh() / alpha
        }
    }
}

/// Geodesic polar coordinates (ρ, σ) about o.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polar {
    pub rho: f64,
    pub sigma: Vec<f64>,
}

impl Polar {
    /// Normalizes `sigma`; rejects negative radii and zero directions.
    pub fn new(rho: f64, sigma: Vec<f64>) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::input(format!(
                "radius must be finite and >= 0, got {rho}"
            )));
        }
        let n = norm(&sigma);
        if sigma.is_empty() || !(n > 0.0) || !n.is_finite() {
            return Err(Error::input("direction must be a nonzero finite vector"));
        }
        Ok(Self {
            rho,
            sigma: sigma.into_iter().map(|s| s / n).collect(),
        })
    }

    /// A point on the plane, angle `phi` (d = 2 shorthand).
    pub fn planar(rho: f64, phi: f64) -> Self {
        Self {
            rho,
            sigma: vec![phi.cos(), phi.sin()],
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Euclidean position ρσ in the flat limit.
    pub fn euclidean(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| self.rho * s).collect()
    }
}

/// Squared chordal distance |σ₁ − σ₂|² between unit vectors.
#[inline]
pub fn chord_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Geodesic distance on the unit sphere.
#[inline]
pub fn sphere_distance(a: &[f64], b: &[f64]) -> f64 {
    let c = chord_sq(a, b).sqrt();
    2.0 * (0.5 * c).min(1.0).asin()
}

/// A point of ℍ^d_α carried in both ambient and polar form.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(into = "PointRecord", try_from = "PointRecord")
)]
pub struct HyperPoint {
    ambient: Vec<f64>,
    alpha: f64,
    polar: Polar,
}

/// Serialized form `{alpha, rho, sigma[]}`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointRecord {
    pub alpha: f64,
    pub rho: f64,
    pub sigma: Vec<f64>,
}

impl From<HyperPoint> for PointRecord {
    fn from(p: HyperPoint) -> Self {
        PointRecord {
            alpha: p.alpha,
            rho: p.polar.rho,
            sigma: p.polar.sigma,
        }
    }
}

impl TryFrom<PointRecord> for HyperPoint {
    type Error = Error;
    fn try_from(r: PointRecord) -> Result<Self> {
        HyperPoint::from_polar(r.alpha, Polar::new(r.rho, r.sigma)?)
    }
}

impl HyperPoint {
    pub fn from_polar(alpha: f64, polar: Polar) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::input("hyperboloid points need alpha > 0"));
        }
        let x = alpha * polar.rho;
        if x > 700.0 {
            return Err(Error::input("alpha*rho too large for ambient coordinates"));
        }
        let s = x.sinh() / alpha;
        let mut ambient: Vec<f64> = polar.sigma.iter().map(|c| s * c).collect();
        ambient.push(x.cosh() / alpha);
        Ok(Self {
            ambient,
            alpha,
            polar,
        })
    }

    /// Builds a point from hyperboloid coordinates, checking x*x = −α⁻² and x_{d+1} > 0.
    pub fn from_ambient(alpha: f64, ambient: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::input("hyperboloid points need alpha > 0"));
        }
        if ambient.len() < 3 {
            return Err(Error::input("ambient vector needs length d+1 >= 3"));
        }
        let last = *ambient.last().unwrap();
        let q = lorentz_inner(&ambient, &ambient)?;
        let scale = (last * last).max(alpha.powi(-2));
        if !(last > 0.0) || (q + alpha.powi(-2)).abs() > 1e-9 * scale {
            return Err(Error::domain(
                "vector is not on the upper hyperboloid sheet",
            ));
        }
        let spatial = &ambient[..ambient.len() - 1];
        let s = norm(spatial);
        let rho = (alpha * s).asinh() / alpha;
        let sigma = if s > 0.0 {
            spatial.iter().map(|v| v / s).collect()
        } else {
            let mut e = vec![0.0; spatial.len()];
            e[0] = 1.0;
            e
        };
        Ok(Self {
            ambient,
            alpha,
            polar: Polar { rho, sigma },
        })
    }

    pub fn origin(alpha: f64, d: usize) -> Result<Self> {
        let mut sigma = vec![0.0; d];
        sigma[0] = 1.0;
        Self::from_polar(alpha, Polar { rho: 0.0, sigma })
    }

    pub fn ambient(&self) -> &[f64] {
        &self.ambient
    }

    pub fn polar(&self) -> &Polar {
        &self.polar
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.polar.dim()
    }
}

/// x*y = Σ_{i≤d} x_i y_i − x_{d+1} y_{d+1}.
pub fn lorentz_inner(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::input("lorentz_inner needs equal lengths d+1 >= 3"));
    }
    let n = x.len() - 1;
    let spatial: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| a * b).sum();
    Ok(spatial - x[n] * y[n])
}

/// Hyperbolic distance in ℍ^d_α from polar coordinates, without cancellation:
/// cosh(αd) − 1 = 2 sinh²(α(ρ₁−ρ₂)/2) + sinh(αρ₁) sinh(αρ₂) |σ₁−σ₂|²/2.
/// `alpha = 0` gives the Euclidean distance.
pub fn polar_distance(alpha: f64, a: &Polar, b: &Polar) -> f64 {
    if alpha == 0.0 {
        return euclidean_polar_distance(a, b);
    }
    let x = alpha * a.rho;
    let y = alpha * b.rho;
    let c2 = chord_sq(&a.sigma, &b.sigma);
    let half = 0.5 * (x - y).abs();
    if x + y < 600.0 {
        let sh = half.sinh();
        let big = 2.0 * sh * sh + x.sinh() * y.sinh() * 0.5 * c2;
        (2.0 / alpha) * (0.5 * big).sqrt().asinh()
    } else {
        let t1 = if half > 0.0 {
            core::f64::consts::LN_2 + 2.0 * ln_sinh(half)
        } else {
            f64::NEG_INFINITY
        };
        let t2 = if c2 > 0.0 && x > 0.0 && y > 0.0 {
            ln_sinh(x) + ln_sinh(y) + c2.ln() - core::f64::consts::LN_2
        } else {
            f64::NEG_INFINITY
        };
        let ln_big = log_add_exp(t1, t2);
        (2.0 / alpha) * (0.5 * ln_big + 0.5 * core::f64::consts::LN_2)
    }
}

/// d^α(x, y) = α⁻¹ arccosh(−α² x*y).
pub fn hyper_distance(x: &HyperPoint, y: &HyperPoint) -> Result<f64> {
    if x.alpha != y.alpha {
        return Err(Error::input("points have different curvature scales"));
    }
    if x.dim() != y.dim() {
        return Err(Error::input("points have different dimensions"));
    }
    let a = x.alpha;
    let c = -a * a * lorentz_inner(&x.ambient, &y.ambient)?;
    let n = x.ambient.len() - 1;
    let slack = 1e-9 * (a * a * x.ambient[n] * y.ambient[n]).max(1.0);
    if c < 1.0 - slack {
        return Err(Error::domain(format!(
            "-alpha^2 x*y = {c} < 1: points off the hyperboloid"
        )));
    }
    Ok(polar_distance(a, &x.polar, &y.polar))
}

/// (ρ, σ) ↦ (λρ, σ).
pub fn dilate(x: &HyperPoint, lambda: f64) -> Result<HyperPoint> {
    if !(lambda > 0.0) {
        return Err(Error::input("dilation factor must be positive"));
    }
    HyperPoint::from_polar(x.alpha, dilate_polar(&x.polar, lambda))
}

pub fn dilate_polar(z: &Polar, lambda: f64) -> Polar {
    Polar {
        rho: lambda * z.rho,
        sigma: z.sigma.clone(),
    }
}

/// d_eu(z, w) = √(ρ₁² + ρ₂² − 2ρ₁ρ₂⟨σ₁,σ₂⟩), evaluated as √((ρ₁−ρ₂)² + ρ₁ρ₂|σ₁−σ₂|²).
pub fn euclidean_polar_distance(z: &Polar, w: &Polar) -> f64 {
    let dr = z.rho - w.rho;
    (dr * dr + z.rho * w.rho * chord_sq(&z.sigma, &w.sigma)).sqrt()
}

/// |d(α·z, α·w) − α d_eu(z, w)| for z, w read as polar points of ℍ^d (curvature −1).
pub fn distance_expansion_residual(z: &Polar, w: &Polar, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::input("alpha must lie in (0, 1]"));
    }
    let a = HyperPoint::from_polar(1.0, dilate_polar(z, alpha))?;
    let b = HyperPoint::from_polar(1.0, dilate_polar(w, alpha))?;
    let d = hyper_distance(&a, &b)?;
    if chord_sq(&z.sigma, &w.sigma) == 0.0 {
        // radial geodesic: both sides are α|ρ₁ − ρ₂| exactly
        return Ok(0.0);
    }
    Ok((d - alpha * euclidean_polar_distance(z, w)).abs())
}

/// Volume of the geodesic ball of radius R in (Σ, g^α).
pub fn volume_ball(radius: f64, params: MetricParams) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let d = params.d;
    let omega = sphere_volume(d - 1);
    if params.alpha == 0.0 {
        return omega * radius.powi(d as i32) / d as f64;
    }
    let scale = params.volume_density(radius).max(1.0) * radius;
    omega * integrate(|r| params.volume_density(r), 0.0, radius, 1e-14 * scale)
}

/// An element of SO⁺(d,1) acting linearly on ambient coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzTransform {
    pub matrix: DenseMatrix,
}

impl LorentzTransform {
    /// Boost of rapidity `eta` mixing spatial axis `axis` with the time axis.
    pub fn boost(d: usize, axis: usize, eta: f64) -> Self {
        let mut m = DenseMatrix::identity(d + 1);
        m.set(axis, axis, eta.cosh());
        m.set(d, d, eta.cosh());
        m.set(axis, d, eta.sinh());
        m.set(d, axis, eta.sinh());
        Self { matrix: m }
    }

    /// A rotation of the spatial block built from random Givens rotations.
    pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let mut m = DenseMatrix::identity(d + 1);
        for i in 0..d {
            for j in (i + 1)..d {
                let th: f64 = rng.random::<f64>() * 2.0 * core::f64::consts::PI;
                let mut g = DenseMatrix::identity(d + 1);
                g.set(i, i, th.cos());
                g.set(j, j, th.cos());
                g.set(i, j, -th.sin());
                g.set(j, i, th.sin());
                m = g.mul(&m);
            }
        }
        Self { matrix: m }
    }

    /// K·boost·K with independent rotations and rapidity uniform in [−max, max].
    pub fn random<R: Rng + ?Sized>(d: usize, max_rapidity: f64, rng: &mut R) -> Self {
        let k1 = Self::random_rotation(d, rng);
        let eta = (2.0 * rng.random::<f64>() - 1.0) * max_rapidity;
        let b = Self::boost(d, 0, eta);
        let k2 = Self::random_rotation(d, rng);
        Self {
            matrix: k1.matrix.mul(&b.matrix).mul(&k2.matrix),
        }
    }

    pub fn apply(&self, x: &HyperPoint) -> Result<HyperPoint> {
        if self.matrix.n != x.ambient.len() {
            return Err(Error::input("transform and point dimensions differ"));
        }
        HyperPoint::from_ambient(x.alpha, self.matrix.apply(&x.ambient))
    }
}

/// Uniform direction on 𝕊^{d−1}.
pub fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// A point uniform (Euclidean volume) in the flat ball of radius R.
pub fn random_polar_in_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Polar {
    let u: f64 = rng.random();
    Polar {
        rho: radius * u.powf(1.0 / d as f64),
        sigma: random_direction(d, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn lorentz_inner_examples() {
        assert_eq!(
            lorentz_inner(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap(),
            -1.0
        );
        let v = lorentz_inner(&[0.0, 0.0, 1.0], &[1f64.sinh(), 0.0, 1f64.cosh()]).unwrap();
        assert!((v + 1.543_080_634_815_243_7).abs() < 1e-15);
        assert_eq!(
            lorentz_inner(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(),
            1.0
        );
        assert!(lorentz_inner(&[1.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn distance_examples() {
        let o = HyperPoint::origin(1.0, 2).unwrap();
        let y = HyperPoint::from_polar(1.0, Polar::planar(1.0, 0.7)).unwrap();
        assert!((hyper_distance(&o, &y).unwrap() - 1.0).abs() < 1e-15);
        let a = HyperPoint::from_polar(1.0, Polar::planar(0.1, 0.0)).unwrap();
        let b =
            HyperPoint::from_polar(1.0, Polar::planar(0.1, core::f64::consts::FRAC_PI_2)).unwrap();
        let oracle = (0.1f64.cosh().powi(2)).acosh();
        assert!((hyper_distance(&a, &b).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.141_539).abs() < 1e-6);
        let c = HyperPoint::from_polar(1.0, Polar::planar(0.1, core::f64::consts::PI)).unwrap();
        assert!((hyper_distance(&a, &c).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn off_sheet_is_domain_error() {
        let a = HyperPoint::origin(1.0, 2).unwrap();
        let mut b = a.clone();
        b.ambient = vec![0.0, 0.0, 0.5];
        assert!(matches!(
            hyper_distance(&a, &b),
            Err(Error::NumericDomain(_))
        ));
        assert!(HyperPoint::from_ambient(1.0, vec![0.0, 0.0, 0.5]).is_err());
    }

    #[test]
    fn dilation_examples() {
        let x = HyperPoint::from_polar(1.0, Polar::planar(1.5, 0.3)).unwrap();
        let y = dilate(&x, 2.0).unwrap();
        assert_eq!(y.polar().rho, 3.0);
        assert_eq!(y.polar().sigma, x.polar().sigma);
        assert_eq!(dilate(&x, 1.0).unwrap(), x);
        let o = HyperPoint::origin(1.0, 3).unwrap();
        assert_eq!(dilate(&o, 7.0).unwrap(), o);
    }

    #[test]
    fn euclidean_distance_examples() {
        let z = Polar::planar(1.0, 0.0);
        assert_eq!(euclidean_polar_distance(&z, &z), 0.0);
        assert!(
            (euclidean_polar_distance(&z, &Polar::planar(1.0, core::f64::consts::PI)) - 2.0).abs()
                < 1e-15
        );
        let w = Polar::planar(1.0, core::f64::consts::FRAC_PI_2);
        assert!((euclidean_polar_distance(&z, &w) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn residual_examples() {
        let z = Polar::planar(1.0, 0.0);
        let w = Polar::planar(1.0, core::f64::consts::FRAC_PI_2);
        let oracle = (0.1f64.cosh().powi(2)).acosh() - 0.1 * 2f64.sqrt();
        let r = distance_expansion_residual(&z, &w, 0.1).unwrap();
        assert!((r - oracle).abs() < 1e-14);
        assert!((r - 1.18e-4).abs() < 0.01e-4);
        let u = Polar::planar(2.5, 0.0);
        assert_eq!(distance_expansion_residual(&z, &u, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn volume_examples() {
        let v = volume_ball(1.0, MetricParams::new(2, 1.0).unwrap());
        let oracle = 2.0 * core::f64::consts::PI * (1f64.cosh() - 1.0);
        assert!((v - oracle).abs() < 1e-11);
        assert!((v - 3.41228).abs() < 1e-5);
        assert!(
            (volume_ball(1.0, MetricParams::euclidean(2)) - core::f64::consts::PI).abs() < 1e-15
        );
        assert_eq!(volume_ball(0.0, MetricParams::new(3, 0.5).unwrap()), 0.0);
    }

    #[test]
    fn isometry_preserves_distance() {
        let mut rng = stream(7, 0);
        for d in 2..=4 {
            let g = LorentzTransform::random(d, 1.5, &mut rng);
            for _ in 0..20 {
                let x =
                    HyperPoint::from_polar(0.7, random_polar_in_ball(d, 4.0, &mut rng)).unwrap();
                let y =
                    HyperPoint::from_polar(0.7, random_polar_in_ball(d, 4.0, &mut rng)).unwrap();
                let d0 = hyper_distance(&x, &y).unwrap();
                let d1 = hyper_distance(&g.apply(&x).unwrap(), &g.apply(&y).unwrap()).unwrap();
                assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0), "{d0} vs {d1}");
            }
        }
    }

    #[test]
    fn far_points_do_not_overflow() {
        let a = Polar::planar(400.0, 0.0);
        let b = Polar::planar(400.0, 1.0);
        let dist = polar_distance(1.0, &a, &b);
        // cosh d ≈ sinh²(400)(1 − cos 1) for far points
        let expected = 2.0 * (400.0 - core::f64::consts::LN_2)
            + (1.0 - 1f64.cos()).ln()
            + core::f64::consts::LN_2;
        assert!((dist - expected).abs() < 1e-9, "{dist} vs {expected}");
    }
}
