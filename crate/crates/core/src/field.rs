//! Stationary Gaussian fields with radial covariance Q(d(x, y)), the scaling
//! triple (H, α, β), and the functionals J_t and J.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{
    dilate_polar, euclidean_polar_distance, hyper_distance, polar_distance, random_polar_in_ball,
    HyperPoint, Polar,
};
use crate::linalg::{pivoted_cholesky, symmetric_eigen, DenseMatrix};
use crate::rng::stream;

/// Covariance families.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum ProfileKind {
    /// Q(r) = σ² exp(−r²/(2ℓ²)).
    GaussianBump { sigma2: f64, ell: f64 },
    /// Q(r) = σ² (1 − r/a)⁴₊ (4r/a + 1), a C² compactly supported bump.
    CompactBump { sigma2: f64, support: f64 },
    /// Q ≡ σ².
    Constant { sigma2: f64 },
}

/// A validated radial covariance with analytic derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovarianceProfile {
    pub kind: ProfileKind,
}

impl CovarianceProfile {
    pub fn sigma2(&self) -> f64 {
        match self.kind {
            ProfileKind::GaussianBump { sigma2, .. }
            | ProfileKind::CompactBump { sigma2, .. }
            | ProfileKind::Constant { sigma2 } => sigma2,
        }
    }

    pub fn q(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::GaussianBump { sigma2, ell } => {
                sigma2 * (-r * r / (2.0 * ell * ell)).exp()
            }
            ProfileKind::CompactBump { sigma2, support } => {
                let u = r / support;
                if u >= 1.0 {
                    0.0
                } else {
                    sigma2 * (1.0 - u).powi(4) * (4.0 * u + 1.0)
                }
            }
            ProfileKind::Constant { sigma2 } => sigma2,
        }
    }

    pub fn q1(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::GaussianBump { ell, .. } => -r / (ell * ell) * self.q(r),
            ProfileKind::CompactBump { sigma2, support } => {
                let u = r / support;
                if u >= 1.0 {
                    0.0
                } else {
                    -20.0 * sigma2 / support * u * (1.0 - u).powi(3)
                }
            }
            ProfileKind::Constant { .. } => 0.0,
        }
    }

    pub fn q2(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::GaussianBump { ell, .. } => {
                let l2 = ell * ell;
                (r * r / (l2 * l2) - 1.0 / l2) * self.q(r)
            }
            ProfileKind::CompactBump { sigma2, support } => {
                let u = r / support;
                if u >= 1.0 {
                    0.0
                } else {
                    20.0 * sigma2 / (support * support) * (1.0 - u).powi(2) * (4.0 * u - 1.0)
                }
            }
            ProfileKind::Constant { .. } => 0.0,
        }
    }

    /// Q″(0).
    pub fn qpp0(&self) -> f64 {
        self.q2(0.0)
    }

    /// Range of r covered by the grid checks.
    fn check_range(&self) -> f64 {
        match self.kind {
            ProfileKind::GaussianBump { ell, .. } => 10.0 * ell,
            ProfileKind::CompactBump { support, .. } => 1.5 * support,
            ProfileKind::Constant { .. } => 10.0,
        }
    }

    /// Grid checks of |Q| ≤ Q(0), Q′(0) = 0, Q″(0) ≤ 0 and derivative consistency.
    pub fn validate(&self) -> Result<()> {
        let q0 = self.q(0.0);
        if self.q1(0.0) != 0.0 || self.qpp0() > 0.0 {
            return Err(Error::construction("need Q'(0) = 0 and Q''(0) <= 0"));
        }
        let top = self.check_range();
        let len = top / 10.0;
        let h = 1e-3 * len;
        let n = 2000;
        for i in 0..=n {
            let r = top * i as f64 / n as f64;
            if self.q(r).abs() > q0 * (1.0 + 1e-14) {
                return Err(Error::construction(format!("|Q({r})| exceeds Q(0)")));
            }
            if r > h {
                let d1 = (self.q(r + h) - self.q(r - h)) / (2.0 * h);
                let d2 = (self.q1(r + h) - self.q1(r - h)) / (2.0 * h);
                if (d1 - self.q1(r)).abs() > 1e-6 * q0 / len
                    || (d2 - self.q2(r)).abs() > 1e-6 * q0 / (len * len)
                {
                    return Err(Error::construction(format!(
                        "supplied derivatives inconsistent at r = {r}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds and validates a profile.
pub fn make_profile(kind: ProfileKind) -> Result<CovarianceProfile> {
    let ok = match kind {
        ProfileKind::GaussianBump { sigma2, ell } => sigma2 > 0.0 && ell > 0.0,
        ProfileKind::CompactBump { sigma2, support } => sigma2 > 0.0 && support > 0.0,
        ProfileKind::Constant { sigma2 } => sigma2 > 0.0,
    };
    if !ok {
        return Err(Error::input("profile parameters must be positive"));
    }
    let p = CovarianceProfile { kind };
    p.validate()?;
    Ok(p)
}

/// (t, α = t^{−1/4}, β = t/α² = t^{3/2}, H = σ²t²/2).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingTriple {
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub h: f64,
}

impl ScalingTriple {
    pub fn new(t: f64, sigma2: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::input("t must be positive"));
        }
        let alpha = t.powf(-0.25);
        Ok(Self {
            t,
            alpha,
            beta: t / (alpha * alpha),
            h: 0.5 * sigma2 * t * t,
        })
    }
}

/// One Gaussian draw at a list of points.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldSample {
    pub points: Vec<HyperPoint>,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Factorized covariance C_ij = Q(d(x_i, x_j)), reusable for many draws.
#[derive(Clone, Debug)]
pub struct FieldSampler {
    points: Vec<HyperPoint>,
    factor: Vec<Vec<f64>>,
    deficit: f64,
}

impl FieldSampler {
    pub fn new(points: &[HyperPoint], profile: &CovarianceProfile) -> Result<Self> {
        Self::with_deficit(points, profile, 1e-8)
    }

    /// Like [`FieldSampler::new`], but accepts a covariance matrix whose negative part
    /// is at most `max_deficit`·σ² on the diagonal after truncation. The geodesic
    /// Gaussian bump is not a positive definite kernel on ℍ^d, so dense clouds at
    /// α ≈ 1 carry a small negative part; the draw then comes from the truncated factor.
    pub fn with_deficit(
        points: &[HyperPoint],
        profile: &CovarianceProfile,
        max_deficit: f64,
    ) -> Result<Self> {
        let n = points.len();
        if let Some(first) = points.first() {
            if points
                .iter()
                .any(|p| p.alpha() != first.alpha() || p.dim() != first.dim())
            {
                return Err(Error::input(
                    "field points must share curvature scale and dimension",
                ));
            }
            // one representative pair exercises the hyperboloid domain check
            if n > 1 {
                hyper_distance(&points[0], &points[n - 1])?;
            }
        }
        let alpha = points.first().map(|p| p.alpha()).unwrap_or(1.0);
        let entry = |i: usize, j: usize| {
            if i == j {
                profile.q(0.0)
            } else {
                profile.q(polar_distance(alpha, points[i].polar(), points[j].polar()))
            }
        };
        let tol = 1e-10 * profile.sigma2();
        match pivoted_cholesky(n, entry, tol, max_deficit * profile.sigma2()) {
            Ok((factor, deficit)) => Ok(Self {
                points: points.to_vec(),
                factor,
                deficit,
            }),
            Err(Error::Conditioning {
                smallest_eigenvalue,
            }) if n > 800 => Err(Error::Conditioning {
                smallest_eigenvalue,
            }),
            Err(_) => {
                let mut c = DenseMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        c.set(i, j, entry(i, j));
                    }
                }
                let (vals, _) = symmetric_eigen(&c);
                Err(Error::Conditioning {
                    smallest_eigenvalue: vals[0],
                })
            }
        }
    }

    /// Largest negative diagonal left by the truncated factorization (0 for a
    /// semidefinite matrix).
    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn rank(&self) -> usize {
        self.factor.len()
    }

    /// Raw values of the draw keyed by (seed, stream).
    pub fn draw_values(&self, seed: u64, stream_id: u64) -> Vec<f64> {
        let mut rng = stream(seed, stream_id);
        let mut out = alloc::vec![0.0; self.points.len()];
        for col in &self.factor {
            let z: f64 = StandardNormal.sample(&mut rng);
            for (o, c) in out.iter_mut().zip(col) {
                *o += z * c;
            }
        }
        out
    }

    pub fn draw(&self, seed: u64) -> FieldSample {
        FieldSample {
            points: self.points.clone(),
            values: self.draw_values(seed, 0),
            seed,
        }
    }
}

/// Exact Gaussian draw at `points`.
pub fn sample_field(
    points: &[HyperPoint],
    profile: &CovarianceProfile,
    seed: u64,
) -> Result<FieldSample> {
    Ok(FieldSampler::new(points, profile)?.draw(seed))
}

/// α²(t)(ξ(α(t)·x_i) − H(t)/t) from values sampled at the dilated points.
pub fn rescaled_field_values(values: &[f64], triple: &ScalingTriple) -> Vec<f64> {
    let a2 = triple.alpha * triple.alpha;
    let c = triple.h / triple.t;
    values.iter().map(|v| a2 * (v - c)).collect()
}

/// Finitely supported probability measure on Σ_R (polar atoms).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteMeasure {
    pub atoms: Vec<(Polar, f64)>,
    pub radius: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(Polar, f64)>, radius: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::input("measure needs at least one atom"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.iter().any(|a| !(a.1 >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!(
                "weights must be nonnegative and sum to 1 (sum {total})"
            )));
        }
        if atoms.iter().any(|a| a.0.rho > radius * (1.0 + 1e-12)) {
            return Err(Error::input("atom outside the declared ball"));
        }
        Ok(Self { atoms, radius })
    }

    pub fn point_mass(z: Polar) -> Self {
        let radius = z.rho;
        Self {
            atoms: alloc::vec![(z, 1.0)],
            radius,
        }
    }

    /// θμ + (1 − θ)ν.
    pub fn mix(&self, other: &DiscreteMeasure, theta: f64) -> DiscreteMeasure {
        let mut atoms: Vec<(Polar, f64)> = self
            .atoms
            .iter()
            .map(|(z, w)| (z.clone(), theta * w))
            .collect();
        atoms.extend(
            other
                .atoms
                .iter()
                .map(|(z, w)| (z.clone(), (1.0 - theta) * w)),
        );
        DiscreteMeasure {
            atoms,
            radius: self.radius.max(other.radius),
        }
    }
}

/// Measure with `n_atoms` atoms uniform (in the flat chart) on Σ_R and flat Dirichlet weights.
pub fn random_measure(
    d: usize,
    radius: f64,
    n_atoms: usize,
    rng: &mut crate::rng::Rng,
) -> Result<DiscreteMeasure> {
    use rand::Rng as _;
    if n_atoms == 0 {
        return Err(Error::input("measure needs at least one atom"));
    }
    let mut atoms: Vec<(Polar, f64)> = (0..n_atoms)
        .map(|_| {
            let z = random_polar_in_ball(d, radius, rng);
            (z, -(1.0 - rng.random::<f64>()).ln())
        })
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    atoms.iter_mut().for_each(|a| a.1 /= total);
    DiscreteMeasure::new(atoms, radius)
}

/// max over the family of |J_t − J| / max(J, 0.01).
pub fn jt_max_relative_error(
    measures: &[DiscreteMeasure],
    t: f64,
    profile: &CovarianceProfile,
) -> Result<f64> {
    let triple = ScalingTriple::new(t, profile.sigma2())?;
    Ok(measures
        .iter()
        .map(|mu| {
            let limit = j_limit(mu, profile.qpp0());
            (j_t(mu, &triple, profile) - limit).abs() / limit.max(0.01)
        })
        .fold(0.0, f64::max))
}

/// −(1/β)(t²/2) ΣΣ w_i w_j (Q(d(α·z_i, α·z_j)) − Q(0)), exact.
pub fn j_t(mu: &DiscreteMeasure, triple: &ScalingTriple, profile: &CovarianceProfile) -> f64 {
    let q0 = profile.q(0.0);
    let pts: Vec<Polar> = mu
        .atoms
        .iter()
        .map(|(z, _)| dilate_polar(z, triple.alpha))
        .collect();
    let mut s = 0.0;
    for (i, (_, wi)) in mu.atoms.iter().enumerate() {
        for (j, (_, wj)) in mu.atoms.iter().enumerate().skip(i + 1) {
            let d = polar_distance(1.0, &pts[i], &pts[j]);
            s += 2.0 * wi * wj * (profile.q(d) - q0);
        }
    }
    -(0.5 * triple.t * triple.t / triple.beta) * s
}

/// −(Q″(0)/4) ΣΣ w_i w_j d_eu(z_i, z_j)².
pub fn j_limit(mu: &DiscreteMeasure, qpp0: f64) -> f64 {
    let mut s = 0.0;
    for (i, (zi, wi)) in mu.atoms.iter().enumerate() {
        for (zj, wj) in mu.atoms.iter().skip(i + 1) {
            let d = euclidean_polar_distance(zi, zj);
            s += 2.0 * wi * wj * d * d;
        }
    }
    -0.25 * qpp0 * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::log_mean_exp_jackknife;

    fn bump() -> CovarianceProfile {
        make_profile(ProfileKind::GaussianBump {
            sigma2: 1.0,
            ell: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn profile_examples() {
        let g = bump();
        assert!((g.qpp0() + 1.0).abs() < 1e-15);
        assert_eq!(g.q(0.0), 1.0);
        assert!((g.q(3.0) - (-4.5f64).exp()).abs() < 1e-15);
        assert!((g.q(3.0) - 0.0111).abs() < 1e-4);
        let c = make_profile(ProfileKind::Constant { sigma2: 2.0 }).unwrap();
        assert_eq!(c.qpp0(), 0.0);
        assert_eq!(c.q(5.0), 2.0);
        let w = make_profile(ProfileKind::CompactBump {
            sigma2: 1.5,
            support: 2.0,
        })
        .unwrap();
        assert!((w.qpp0() + 20.0 * 1.5 / 4.0).abs() < 1e-12);
        assert_eq!(w.q(2.5), 0.0);
        assert!(make_profile(ProfileKind::GaussianBump {
            sigma2: -1.0,
            ell: 1.0
        })
        .is_err());
    }

    #[test]
    fn triple_identities() {
        let tr = ScalingTriple::new(16.0, 1.0).unwrap();
        assert_eq!(tr.beta, tr.t / (tr.alpha * tr.alpha));
        assert!((tr.alpha - 0.5).abs() < 1e-15);
        assert!((tr.h / tr.t - 8.0).abs() < 1e-12);
        let out = rescaled_field_values(&[8.0, 9.0], &tr);
        assert!(out[0].abs() < 1e-15 && (out[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_profile_gives_equal_values() {
        let c = make_profile(ProfileKind::Constant { sigma2: 1.0 }).unwrap();
        let pts: Vec<HyperPoint> = (0..6)
            .map(|i| HyperPoint::from_polar(1.0, Polar::planar(0.3 * i as f64, i as f64)).unwrap())
            .collect();
        let s = sample_field(&pts, &c, 3).unwrap();
        for v in &s.values {
            assert!((v - s.values[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn j_examples() {
        let g = bump();
        let o = Polar::planar(0.0, 0.0);
        let tr = ScalingTriple::new(3.0, 1.0).unwrap();
        assert_eq!(j_t(&DiscreteMeasure::point_mass(o.clone()), &tr, &g), 0.0);
        let z = Polar::planar(1.0, 0.0);
        let w = Polar::planar(1.0, core::f64::consts::FRAC_PI_2);
        let mu =
            DiscreteMeasure::new(alloc::vec![(z.clone(), 0.5), (w.clone(), 0.5)], 1.0).unwrap();
        let c = make_profile(ProfileKind::Constant { sigma2: 1.0 }).unwrap();
        assert_eq!(j_t(&mu, &tr, &c), 0.0);
        // d_eu² = 2, Q''(0) = −1: (1/4)·2·(1/4)·2 = 0.25
        assert!((j_limit(&mu, -1.0) - 0.25).abs() < 1e-15);
        let big = ScalingTriple::new(1e4, 1.0).unwrap();
        let jt = j_t(&mu, &big, &g);
        // closed form: √t/2 · ½ (1 − exp(−d²/2)) with d = arccosh(cosh²(0.1))
        let dd = (0.1f64.cosh().powi(2)).acosh();
        let oracle = 0.5 * 100.0 * 0.5 * (1.0 - (-dd * dd / 2.0).exp());
        assert!((jt - oracle).abs() < 1e-12);
        assert!((jt - 0.25).abs() / 0.25 < 0.05);
        let zz = Polar::planar(1.0, core::f64::consts::PI);
        let m2 = DiscreteMeasure::new(alloc::vec![(z, 0.5), (zz, 0.5)], 1.0).unwrap();
        assert!((j_limit(&m2, -2.0) - 1.0).abs() < 1e-15);
        assert!((j_limit(&m2, -6.0) - 3.0 * j_limit(&m2, -2.0)).abs() < 1e-14);
    }

    #[test]
    fn exact_j_t_matches_sampled_moment_generating_function() {
        let g = bump();
        let tr = ScalingTriple::new(0.5, 1.0).unwrap();
        let atoms = alloc::vec![
            (Polar::planar(0.4, 0.0), 0.3),
            (Polar::planar(1.0, 2.0), 0.5),
            (Polar::planar(1.5, 4.0), 0.2)
        ];
        let mu = DiscreteMeasure::new(atoms, 2.0).unwrap();
        let pts: Vec<HyperPoint> = mu
            .atoms
            .iter()
            .map(|(z, _)| HyperPoint::from_polar(1.0, dilate_polar(z, tr.alpha)).unwrap())
            .collect();
        let sampler = FieldSampler::new(&pts, &g).unwrap();
        let n = 200_000;
        let logs: Vec<f64> = (0..n)
            .map(|k| {
                let xi = rescaled_field_values(&sampler.draw_values(11, k), &tr);
                tr.beta
                    * mu.atoms
                        .iter()
                        .zip(&xi)
                        .map(|((_, w), x)| w * x)
                        .sum::<f64>()
            })
            .collect();
        let (lme, se) = log_mean_exp_jackknife(&logs);
        let empirical = -lme / tr.beta;
        let exact = j_t(&mu, &tr, &g);
        assert!(
            (empirical - exact).abs() <= 3.0 * se / tr.beta + 1e-12,
            "{empirical} vs {exact}"
        );
    }
}
