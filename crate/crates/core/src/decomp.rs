//! Decomposition of a geodesic ball Q_R̃ into annuli of width r, each covered by
//! volume-matched angular caps taken from a maximal sphere packing, and the
//! product partition of unity φ_{k,i} = η_k(ρ) ζ_{k,i}(σ) built on it.
//!
//! Supported sphere dimensions: 𝕊¹ (d = 2) and 𝕊² (d = 3).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::geometry::{
    polar_distance, radial_sinh, random_direction, random_polar_in_ball, sphere_distance, Polar,
};
use crate::numerics::{bisect_increasing, integrate, rem_euclid, sphere_volume};
use crate::rng::stream;
use crate::spectral::{Grid, GridPartition};

const MAX_CANDIDATES: usize = 4_000_000;

fn check_dim(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::input(format!(
            "angular packings are available for d = 2 and d = 3, got d = {d}"
        )))
    }
}

fn circle_dist(a: f64, b: f64) -> f64 {
    let x = rem_euclid((a - b).abs(), 2.0 * PI);
    x.min(2.0 * PI - x)
}

/// Centres on 𝕊^{d−1} with pairwise spherical distance ≥ θ.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpherePacking {
    /// Ambient dimension d of 𝕊^{d−1} ⊂ ℝ^d.
    pub d: usize,
    pub theta: f64,
    pub centers: Vec<Vec<f64>>,
    /// Size of the candidate set used by the greedy pass.
    pub candidates: usize,
}

impl SpherePacking {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// N(θ)·θ^{d−1}, the constant in the count bound.
    pub fn count_constant(&self) -> f64 {
        self.len() as f64 * self.theta.powi(self.d as i32 - 1)
    }

    /// Smallest pairwise spherical distance (π for a single centre).
    pub fn min_separation(&self) -> f64 {
        let mut m = PI;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                m = m.min(sphere_distance(&self.centers[i], &self.centers[j]));
            }
        }
        m
    }
}

/// Greedy maximal packing over a shuffled dense candidate set.
pub fn maximal_packing(theta: f64, d: usize, seed: u64) -> Result<SpherePacking> {
    check_dim(d)?;
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::input("theta must lie in (0, pi)"));
    }
    let mut rng = stream(seed, 0x9ac);
    if d == 2 {
        let m = ((64.0 * 2.0 * PI / theta).ceil() as usize).max(4096);
        if m > MAX_CANDIDATES {
            return Err(Error::input(format!(
                "theta {theta} needs {m} candidates (limit {MAX_CANDIDATES})"
            )));
        }
        let mut cand: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
        cand.shuffle(&mut rng);
        let mut accepted: Vec<f64> = Vec::new();
        for &a in &cand {
            if accepted.iter().all(|&b| circle_dist(a, b) >= theta) {
                accepted.push(a);
            }
        }
        // any arc gap ≥ 2θ still admits a centre at distance ≥ θ from both ends
        loop {
            accepted.sort_by(f64::total_cmp);
            let n = accepted.len();
            let mut insert = None;
            for i in 0..n {
                let a = accepted[i];
                let b = if i + 1 < n {
                    accepted[i + 1]
                } else {
                    accepted[0] + 2.0 * PI
                };
                if b - a >= 2.0 * theta && n > 1 || n == 1 && 2.0 * PI >= 2.0 * theta {
                    insert = Some(rem_euclid(a + theta, 2.0 * PI));
                    break;
                }
            }
            match insert {
                Some(x) => accepted.push(x),
                None => break,
            }
        }
        let centers = accepted.iter().map(|&a| vec![a.cos(), a.sin()]).collect();
        return Ok(SpherePacking {
            d,
            theta,
            centers,
            candidates: m,
        });
    }
    let m = ((400.0 / (theta * theta)).ceil() as usize).max(20_000);
    if m > MAX_CANDIDATES {
        return Err(Error::input(format!(
            "theta {theta} needs {m} candidates (limit {MAX_CANDIDATES})"
        )));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut cand: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            vec![s * phi.cos(), s * phi.sin(), z]
        })
        .collect();
    cand.shuffle(&mut rng);
    let mut index = CellIndex::new(theta);
    let cos_t = theta.cos();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let try_add = |x: Vec<f64>, centers: &mut Vec<Vec<f64>>, index: &mut CellIndex| -> bool {
        if index.near(&x, centers, cos_t) {
            return false;
        }
        index.insert(&x, centers.len());
        centers.push(x);
        true
    };
    for x in cand {
        try_add(x, &mut centers, &mut index);
    }
    // The farthest point from the centres is a spherical Voronoi vertex, i.e. the
    // circumcentre of three centres. The candidate mesh leaves holes of radius at most
    // θ + 0.12θ, so triples with pairwise distance ≤ 2.3θ reach every vertex; adding each
    // vertex that is still ≥ θ from all centres until none is left makes the packing maximal.
    let reach = (2.3 * theta).min(PI).cos();
    loop {
        let mut added = 0;
        let mut a = 0;
        while a < centers.len() {
            let near = index.within(&centers[a], &centers, reach, 3);
            for (u, &b) in near.iter().enumerate() {
                for &c in &near[u + 1..] {
                    if b <= a || c <= a {
                        continue;
                    }
                    let pa = [centers[a][0], centers[a][1], centers[a][2]];
                    let (e1, e2) = (sub3(&centers[b], &pa), sub3(&centers[c], &pa));
                    let n = cross3(&e1, &e2);
                    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                    if len < 1e-14 {
                        continue;
                    }
                    for sign in [1.0, -1.0] {
                        let v: Vec<f64> = n.iter().map(|x| sign * x / len).collect();
                        if pa[0] * v[0] + pa[1] * v[1] + pa[2] * v[2] < reach {
                            continue;
                        }
                        if try_add(v, &mut centers, &mut index) {
                            added += 1;
                        }
                    }
                }
            }
            a += 1;
        }
        if added == 0 {
            break;
        }
    }
    Ok(SpherePacking {
        d,
        theta,
        centers,
        candidates: m,
    })
}

fn sub3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Uniform cube hash on the unit sphere with cell size ≥ the chord of θ.
struct CellIndex {
    size: f64,
    cells: BTreeMap<(i64, i64, i64), Vec<usize>>,
}

impl CellIndex {
    fn new(theta: f64) -> Self {
        Self {
            size: theta.max(1e-6),
            cells: BTreeMap::new(),
        }
    }

    fn key(&self, x: &[f64]) -> (i64, i64, i64) {
        let f = |v: f64| ((v + 1.0) / self.size).floor() as i64;
        (f(x[0]), f(x[1]), f(x[2]))
    }

    fn insert(&mut self, x: &[f64], i: usize) {
        let k = self.key(x);
        self.cells.entry(k).or_default().push(i);
    }

    /// Indices of stored centres with ⟨x, c⟩ ≥ `cos_r`, searching `span` cells each way.
    fn within(&self, x: &[f64], centers: &[Vec<f64>], cos_r: f64, span: i64) -> Vec<usize> {
        let (a, b, c) = self.key(x);
        let mut out = Vec::new();
        for i in a - span..=a + span {
            for j in b - span..=b + span {
                for k in c - span..=c + span {
                    if let Some(list) = self.cells.get(&(i, j, k)) {
                        for &m in list {
                            let y = &centers[m];
                            if x[0] * y[0] + x[1] * y[1] + x[2] * y[2] >= cos_r {
                                out.push(m);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// True when some stored centre has ⟨x, c⟩ > cos θ (distance < θ).
    fn near(&self, x: &[f64], centers: &[Vec<f64>], cos_t: f64) -> bool {
        let (a, b, c) = self.key(x);
        for i in a - 1..=a + 1 {
            for j in b - 1..=b + 1 {
                for k in c - 1..=c + 1 {
                    if let Some(list) = self.cells.get(&(i, j, k)) {
                        for &m in list {
                            let y = &centers[m];
                            if x[0] * y[0] + x[1] * y[1] + x[2] * y[2] > cos_t {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverReport {
    pub probes: usize,
    /// Probes farther than θ from every centre.
    pub uncovered: usize,
    /// Largest number of 2θ-balls containing a probe.
    pub max_multiplicity: usize,
    pub min_separation: f64,
    pub separated: bool,
}

/// Cover by θ-balls and multiplicity of 2θ-balls on a probe set
/// (equispaced for 𝕊¹, seeded uniform for 𝕊²).
pub fn cover_and_multiplicity_check(
    packing: &SpherePacking,
    n_probes: usize,
    seed: u64,
) -> Result<CoverReport> {
    check_dim(packing.d)?;
    let theta = packing.theta;
    let mut rng = stream(seed, 0xc0e);
    let mut uncovered = 0;
    let mut max_multiplicity = 0;
    for p in 0..n_probes {
        let x = if packing.d == 2 {
            let a = 2.0 * PI * (p as f64 + 0.5) / n_probes as f64;
            vec![a.cos(), a.sin()]
        } else {
            random_direction(3, &mut rng)
        };
        let mut nearest = f64::INFINITY;
        let mut mult = 0;
        for c in &packing.centers {
            let dist = sphere_distance(&x, c);
            nearest = nearest.min(dist);
            if dist < 2.0 * theta {
                mult += 1;
            }
        }
        if nearest > theta {
            uncovered += 1;
        }
        max_multiplicity = max_multiplicity.max(mult);
    }
    let min_separation = packing.min_separation();
    Ok(CoverReport {
        probes: n_probes,
        uncovered,
        max_multiplicity,
        min_separation,
        separated: min_separation >= theta * (1.0 - 1e-12),
    })
}

/// ∫_a^b sinh^{d−1}(αρ) α^{−(d−1)} dρ.
fn shell_integral(a: f64, b: f64, alpha: f64, d: usize) -> f64 {
    let x = |r: f64| alpha * r;
    match d {
        2 if alpha > 0.0 => ((x(b)).cosh() - (x(a)).cosh()) / (alpha * alpha),
        2 => 0.5 * (b * b - a * a),
        3 if alpha > 0.0 => {
            let f = |r: f64| (0.25 * (2.0 * x(r)).sinh() - 0.5 * x(r)) / alpha.powi(3);
            f(b) - f(a)
        }
        3 => (b.powi(3) - a.powi(3)) / 3.0,
        _ => integrate(
            |r| radial_sinh(alpha, r).powi(d as i32 - 1),
            a,
            b,
            1e-13 * (b - a),
        ),
    }
}

/// ∫_0^θ sin^{d−2}u du.
fn cap_integral(theta: f64, d: usize) -> f64 {
    match d {
        2 => theta,
        3 => 1.0 - theta.cos(),
        _ => integrate(|u| u.sin().powi(d as i32 - 2), 0.0, theta, 1e-14),
    }
}

/// Volume-matched angular radius θ_k of annulus k, capped at π/2.
/// Returns (θ_k, capped).
pub fn angular_radius(k: usize, r: f64, alpha: f64, d: usize) -> Result<(f64, bool)> {
    if k == 0 || !(r > 0.0) || !(alpha >= 0.0) || d < 2 {
        return Err(Error::input("need k >= 1, r > 0, alpha >= 0, d >= 2"));
    }
    if alpha * k as f64 * r > 300.0 {
        return Err(Error::domain("alpha k r too large for the volume ratio"));
    }
    let rhs = sphere_volume(d - 1) / sphere_volume(d - 2) * shell_integral(0.0, r, alpha, d)
        / shell_integral((k - 1) as f64 * r, k as f64 * r, alpha, d);
    if rhs >= cap_integral(FRAC_PI_2, d) {
        return Ok((FRAC_PI_2, true));
    }
    Ok((
        bisect_increasing(|th| cap_integral(th, d), rhs, 0.0, FRAC_PI_2),
        false,
    ))
}

/// Fitted constants of the bracket C₁ sinh(αr/2)/sinh(kαr) ≤ θ_k ≤ C₂ sinh(αr)/sinh((k−1)αr), k ≥ 2.
pub fn angular_bracket_constants(r: f64, alpha: f64, d: usize, ks: &[usize]) -> Result<(f64, f64)> {
    let x = alpha * r;
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    for &k in ks.iter().filter(|&&k| k >= 2) {
        let (th, _) = angular_radius(k, r, alpha, d)?;
        c1 = c1.min(th * (k as f64 * x).sinh() / (0.5 * x).sinh());
        c2 = c2.max(th * ((k - 1) as f64 * x).sinh() / x.sinh());
    }
    Ok((c1, c2))
}

/// F_k(x) = x sinh(kx) / (sinh((k−1−ε)x) sinh(x/2)).
pub fn f_k(k: usize, x: f64, epsilon: f64) -> f64 {
    if x == 0.0 {
        return 2.0 * k as f64 / (k as f64 - 1.0 - epsilon);
    }
    x * (k as f64 * x).sinh() / (((k as f64 - 1.0 - epsilon) * x).sinh() * (0.5 * x).sinh())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Annulus {
    pub k: usize,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub theta: f64,
    pub capped: bool,
    /// Volume of one cell P_k(i).
    pub cell_volume: f64,
    /// cell_volume / vol(Q_r); 1 when θ_k is not capped.
    pub volume_ratio: f64,
}

/// Annuli [(k−1)r, kr] of Q_R̃ with their angular radii.
pub fn annuli(outer: f64, r: f64, alpha: f64, d: usize) -> Result<Vec<Annulus>> {
    let n = (outer / r - 1e-9).ceil().max(1.0) as usize;
    let q_r = sphere_volume(d - 1) * shell_integral(0.0, r, alpha, d);
    (1..=n)
        .map(|k| {
            let (theta, capped) = angular_radius(k, r, alpha, d)?;
            let (lo, hi) = ((k - 1) as f64 * r, k as f64 * r);
            let cell_volume =
                sphere_volume(d - 2) * cap_integral(theta, d) * shell_integral(lo, hi, alpha, d);
            Ok(Annulus {
                k,
                rho_lo: lo,
                rho_hi: hi,
                theta,
                capped,
                cell_volume,
                volume_ratio: cell_volume / q_r,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BallDecomposition {
    pub requested_radius: f64,
    /// R̃ padded up to a multiple of r.
    pub outer_radius: f64,
    pub padded: bool,
    pub r: f64,
    pub alpha: f64,
    pub d: usize,
    pub annuli: Vec<Annulus>,
    pub packings: Vec<SpherePacking>,
}

/// Cell P_k(i) = [(k−1)r, kr] × B(σ_i, θ_k).
#[derive(Clone, Debug, PartialEq)]
pub struct Cell<'a> {
    pub k: usize,
    pub i: usize,
    pub center: &'a [f64],
    pub theta: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

impl BallDecomposition {
    pub fn cell_count(&self) -> usize {
        self.packings.iter().map(|p| p.len()).sum()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell<'_>> {
        self.annuli.iter().zip(&self.packings).flat_map(|(a, p)| {
            p.centers.iter().enumerate().map(move |(i, c)| Cell {
                k: a.k,
                i,
                center: c,
                theta: a.theta,
                rho_lo: a.rho_lo,
                rho_hi: a.rho_hi,
            })
        })
    }

    /// N / [(R̃/r)(sinh(R̃α)/sinh(αr/2))^{d−1}].
    pub fn count_constant(&self) -> f64 {
        let a = self.alpha;
        let ratio = if a > 0.0 {
            (self.outer_radius * a).sinh() / (0.5 * a * self.r).sinh()
        } else {
            2.0 * self.outer_radius / self.r
        };
        self.cell_count() as f64 / (self.outer_radius / self.r * ratio.powi(self.d as i32 - 1))
    }

    /// Annulus index (0-based) containing radius ρ, boundary radii belonging to the inner one.
    pub fn annulus_of(&self, rho: f64) -> usize {
        (((rho / self.r).ceil() as usize).max(1) - 1).min(self.annuli.len() - 1)
    }

    /// Fraction of `n` probes (uniform in the flat ball of radius R̃) lying in no cell.
    pub fn uncovered_fraction(&self, n: usize, seed: u64) -> f64 {
        let mut rng = stream(seed, 0xb0b);
        let mut miss = 0;
        for _ in 0..n {
            let p = random_polar_in_ball(self.d, self.outer_radius, &mut rng);
            let k = self.annulus_of(p.rho);
            let th = self.annuli[k].theta;
            let inside = self.packings[k]
                .centers
                .iter()
                .any(|c| sphere_distance(&p.sigma, c) <= th * (1.0 + 1e-12));
            // points on an annulus boundary may also be served by the outer annulus
            let edge = (p.rho / self.r).fract() == 0.0 && k + 1 < self.annuli.len() && {
                let th2 = self.annuli[k + 1].theta;
                self.packings[k + 1]
                    .centers
                    .iter()
                    .any(|c| sphere_distance(&p.sigma, c) <= th2)
            };
            if !(inside || edge) {
                miss += 1;
            }
        }
        miss as f64 / n as f64
    }
}

pub fn decompose_ball(
    outer: f64,
    r: f64,
    alpha: f64,
    d: usize,
    seed: u64,
) -> Result<BallDecomposition> {
    check_dim(d)?;
    if !(outer > 0.0) || !(r > 0.0) {
        return Err(Error::input("need R > 0 and r > 0"));
    }
    let ann = annuli(outer, r, alpha, d)?;
    let padded_radius = ann.len() as f64 * r;
    let packings = ann
        .iter()
        .map(|a| maximal_packing(a.theta, d, seed.wrapping_add(a.k as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BallDecomposition {
        requested_radius: outer,
        outer_radius: padded_radius,
        padded: (padded_radius - outer).abs() > 1e-9 * outer,
        r,
        alpha,
        d,
        annuli: ann,
        packings,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiameterReport {
    /// (k, diameter, diameter / r) per annulus; all cells of an annulus are congruent
    /// under rotations about o, so one representative is measured.
    pub per_annulus: Vec<(usize, f64, f64)>,
    pub max_ratio: f64,
}

/// Largest distance between sampled boundary points of each cell, exact hyperbolic distance.
pub fn cell_diameter_certificate(
    annuli: &[Annulus],
    r: f64,
    alpha: f64,
    d: usize,
) -> Result<DiameterReport> {
    check_dim(d)?;
    if alpha * r > 1.0 {
        return Err(Error::precondition(format!(
            "alpha r = {} exceeds 1",
            alpha * r
        )));
    }
    let mut per_annulus = Vec::with_capacity(annuli.len());
    let mut max_ratio: f64 = 0.0;
    for a in annuli {
        let th = a.theta.min(PI);
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        if d == 2 {
            for j in 0..=8 {
                let phi = -th + 2.0 * th * j as f64 / 8.0;
                dirs.push(vec![phi.cos(), phi.sin()]);
            }
        } else {
            dirs.push(vec![0.0, 0.0, 1.0]);
            for ring in [0.5, 1.0] {
                for j in 0..16 {
                    let az = 2.0 * PI * j as f64 / 16.0;
                    let pol = ring * th;
                    dirs.push(vec![pol.sin() * az.cos(), pol.sin() * az.sin(), pol.cos()]);
                }
            }
        }
        let pts: Vec<Polar> = (0..=4)
            .flat_map(|j| {
                let rho = a.rho_lo + (a.rho_hi - a.rho_lo) * j as f64 / 4.0;
                dirs.iter().map(move |s| Polar {
                    rho,
                    sigma: s.clone(),
                })
            })
            .collect();
        let mut diam: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                diam = diam.max(polar_distance(alpha, &pts[i], &pts[j]));
            }
        }
        max_ratio = max_ratio.max(diam / r);
        per_annulus.push((a.k, diam, diam / r));
    }
    Ok(DiameterReport {
        per_annulus,
        max_ratio,
    })
}

/// Product partition of unity φ_{k,i} = η_k(ρ) ζ_{k,i}(σ) over a decomposition.
/// The innermost annulus carries the single angular function ζ_{1,1} ≡ 1.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionOfUnity {
    pub decomposition: BallDecomposition,
    pub epsilon: f64,
    /// Sorted centre angles per annulus (d = 2 lookups).
    angles: Vec<Vec<(f64, usize)>>,
}

/// Value and gradient of one φ_{k,i} at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct PouValue {
    pub k: usize,
    pub i: usize,
    pub value: f64,
    pub d_rho: f64,
    /// Tangential gradient of φ on the unit sphere (∇_σ).
    pub grad_sigma: Vec<f64>,
}

pub fn build_pou(decomposition: BallDecomposition, epsilon: f64) -> Result<PartitionOfUnity> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::input("epsilon must lie in (0, 1/2)"));
    }
    if decomposition.packings.iter().any(|p| p.is_empty()) {
        return Err(Error::construction("empty cover on an annulus"));
    }
    let angles = if decomposition.d == 2 {
        decomposition
            .packings
            .iter()
            .map(|p| {
                let mut v: Vec<(f64, usize)> = p
                    .centers
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (rem_euclid(c[1].atan2(c[0]), 2.0 * PI), i))
                    .collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                v
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(PartitionOfUnity {
        decomposition,
        epsilon,
        angles,
    })
}

impl PartitionOfUnity {
    pub fn n_annuli(&self) -> usize {
        self.decomposition.annuli.len()
    }

    /// Number of functions φ_{k,i}.
    pub fn len(&self) -> usize {
        1 + self.decomposition.packings[1..]
            .iter()
            .map(|p| p.len())
            .sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of (k, i).
    pub fn index(&self, k: usize, i: usize) -> usize {
        if k == 1 {
            return 0;
        }
        1 + self.decomposition.packings[1..k - 1]
            .iter()
            .map(|p| p.len())
            .sum::<usize>()
            + i
    }

    /// (η_k(ρ), η′_k(ρ)) for k = 1..=K.
    pub fn eta(&self, k: usize, rho: f64) -> (f64, f64) {
        let r = self.decomposition.r;
        let w = self.epsilon * r;
        let n = self.n_annuli();
        let slope = FRAC_PI_2 / (2.0 * w);
        // rising edge at (k−1)r (absent for k = 1), falling edge at kr (absent for k = K)
        let (mut v, mut dv) = (1.0, 0.0);
        if k > 1 {
            let b = (k - 1) as f64 * r;
            if rho <= b - w {
                return (0.0, 0.0);
            }
            if rho < b + w {
                let psi = slope * (rho - (b - w));
                v = psi.sin();
                dv = slope * psi.cos();
            }
        }
        if k < n {
            let b = k as f64 * r;
            if rho >= b + w {
                return (0.0, 0.0);
            }
            if rho > b - w {
                let psi = slope * (rho - (b - w));
                let (c, s) = (psi.cos(), psi.sin());
                dv = dv * c - v * slope * s;
                v *= c;
            }
        }
        (v, dv)
    }

    /// Σ_k η′_k(ρ)².
    pub fn radial_sacrifice(&self, rho: f64) -> f64 {
        (1..=self.n_annuli())
            .map(|k| self.eta(k, rho).1.powi(2))
            .sum()
    }

    /// Indices of centres of annulus k within 2θ_k of σ.
    fn neighbours(&self, k: usize, sigma: &[f64]) -> Vec<usize> {
        let pk = &self.decomposition.packings[k - 1];
        let reach = 2.0 * self.decomposition.annuli[k - 1].theta;
        if self.decomposition.d == 2 {
            let list = &self.angles[k - 1];
            let a = rem_euclid(sigma[1].atan2(sigma[0]), 2.0 * PI);
            if list.len() < 16 {
                return list
                    .iter()
                    .filter(|(b, _)| circle_dist(a, *b) < reach)
                    .map(|x| x.1)
                    .collect();
            }
            let mut out = Vec::new();
            for shift in [-2.0 * PI, 0.0, 2.0 * PI] {
                let lo = a - reach - shift;
                let hi = a + reach - shift;
                let start = list.partition_point(|x| x.0 <= lo);
                for x in &list[start..] {
                    if x.0 >= hi {
                        break;
                    }
                    if !out.contains(&x.1) {
                        out.push(x.1);
                    }
                }
            }
            return out;
        }
        (0..pk.len())
            .filter(|&i| sphere_distance(sigma, &pk.centers[i]) < reach)
            .collect()
    }

    /// χ and its tangential gradient for centre c with plateau θ.
    fn chi(&self, sigma: &[f64], c: &[f64], theta: f64) -> (f64, Vec<f64>) {
        let dist = sphere_distance(sigma, c);
        let d = sigma.len();
        if dist <= theta {
            return (1.0, vec![0.0; d]);
        }
        if dist >= 2.0 * theta {
            return (0.0, vec![0.0; d]);
        }
        let u = FRAC_PI_2 * (dist - theta) / theta;
        let val = u.cos().powi(2);
        let dval = -(FRAC_PI_2 / theta) * (2.0 * u).sin();
        // ∇_σ dist = −(c − ⟨c,σ⟩σ)/|c − ⟨c,σ⟩σ|
        let cs: f64 = c.iter().zip(sigma).map(|(a, b)| a * b).sum();
        let t: Vec<f64> = c.iter().zip(sigma).map(|(ci, si)| ci - cs * si).collect();
        let tn = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if tn < 1e-300 {
            return (val, vec![0.0; d]);
        }
        (val, t.iter().map(|x| -dval * x / tn).collect())
    }

    /// All nonzero φ_{k,i} at p with their gradients.
    pub fn eval(&self, p: &Polar) -> Vec<PouValue> {
        let d = self.decomposition.d;
        let mut out = Vec::new();
        for k in 1..=self.n_annuli() {
            let (eta, deta) = self.eta(k, p.rho);
            if eta == 0.0 && deta == 0.0 {
                continue;
            }
            if k == 1 {
                out.push(PouValue {
                    k,
                    i: 0,
                    value: eta,
                    d_rho: deta,
                    grad_sigma: vec![0.0; d],
                });
                continue;
            }
            let theta = self.decomposition.annuli[k - 1].theta;
            let centers = &self.decomposition.packings[k - 1].centers;
            let near = self.neighbours(k, &p.sigma);
            let chis: Vec<(usize, f64, Vec<f64>)> = near
                .iter()
                .map(|&i| {
                    let (v, g) = self.chi(&p.sigma, &centers[i], theta);
                    (i, v, g)
                })
                .filter(|x| x.1 > 0.0)
                .collect();
            let z2: f64 = chis.iter().map(|x| x.1 * x.1).sum();
            let z = z2.sqrt();
            let mut s = vec![0.0; d];
            for (_, v, g) in &chis {
                for (sj, gj) in s.iter_mut().zip(g) {
                    *sj += v * gj;
                }
            }
            for (i, v, g) in &chis {
                let zeta = v / z;
                let gz: Vec<f64> = g
                    .iter()
                    .zip(&s)
                    .map(|(gj, sj)| gj / z - v * sj / (z2 * z))
                    .collect();
                out.push(PouValue {
                    k,
                    i: *i,
                    value: eta * zeta,
                    d_rho: deta * zeta,
                    grad_sigma: gz.iter().map(|x| eta * x).collect(),
                });
            }
        }
        out
    }

    pub fn sum_of_squares(&self, p: &Polar) -> f64 {
        self.eval(p).iter().map(|v| v.value * v.value).sum()
    }

    /// Φ = Σ |∇φ_{k,i}|² = Σ (∂_ρφ)² + α² sinh^{−2}(αρ)|∇_σφ|².
    pub fn sacrifice(&self, p: &Polar) -> f64 {
        let s = radial_sinh(self.decomposition.alpha, p.rho);
        self.eval(p)
            .iter()
            .map(|v| v.d_rho * v.d_rho + v.grad_sigma.iter().map(|g| g * g).sum::<f64>() / (s * s))
            .sum()
    }

    /// Checks that φ_{k,i} vanishes outside [(k−1−ε)r, (k+ε)r] × B(σ_i, 2θ_k); returns the
    /// number of violating (probe, function) pairs.
    pub fn support_violations(&self, p: &Polar) -> usize {
        let r = self.decomposition.r;
        self.eval(p)
            .iter()
            .filter(|v| {
                let lo = (v.k as f64 - 1.0 - self.epsilon) * r;
                let hi = (v.k as f64 + self.epsilon) * r;
                let radial_ok = p.rho >= lo && p.rho <= hi;
                let angular_ok = v.k == 1 || {
                    let c = &self.decomposition.packings[v.k - 1].centers[v.i];
                    sphere_distance(&p.sigma, c) <= 2.0 * self.decomposition.annuli[v.k - 1].theta
                };
                v.value > 0.0 && !(radial_ok && angular_ok)
                    || !(0.0..=1.0 + 1e-12).contains(&v.value)
            })
            .count()
    }
}

/// Φ sampled at every node of a grid.
pub fn phi_field(pou: &PartitionOfUnity, grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| pou.sacrifice(&grid.polar_point(i)))
        .collect()
}

/// The partition restricted to a grid, for the decomposition inequality.
pub fn grid_partition(pou: &PartitionOfUnity, grid: &Grid) -> GridPartition {
    let n = grid.len();
    let mut phi = vec![vec![0.0; n]; pou.len()];
    let mut gradient_sum = vec![0.0; n];
    let alpha = pou.decomposition.alpha;
    for node in 0..n {
        let p = grid.polar_point(node);
        let s = radial_sinh(alpha, p.rho);
        for v in pou.eval(&p) {
            phi[pou.index(v.k, v.i)][node] = v.value;
            gradient_sum[node] +=
                v.d_rho * v.d_rho + v.grad_sigma.iter().map(|g| g * g).sum::<f64>() / (s * s);
        }
    }
    phi.retain(|col| col.iter().any(|&v| v > 0.0));
    GridPartition { phi, gradient_sum }
}

/// sup Φ·r² over `n` probes uniform in the flat ball of radius R̃ plus a structured radial sweep.
pub fn sup_sacrifice(pou: &PartitionOfUnity, n: usize, seed: u64) -> f64 {
    let dec = &pou.decomposition;
    let mut rng = stream(seed, 0x5ac);
    let mut best: f64 = 0.0;
    for _ in 0..n {
        let p = random_polar_in_ball(dec.d, dec.outer_radius, &mut rng);
        best = best.max(pou.sacrifice(&p));
    }
    for j in 0..=400 {
        let rho = dec.outer_radius * j as f64 / 400.0;
        let sigma = random_direction(dec.d, &mut rng);
        best = best.max(pou.sacrifice(&Polar { rho, sigma }));
    }
    best * dec.r * dec.r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_packing_examples() {
        let p = maximal_packing(FRAC_PI_2, 2, 1).unwrap();
        assert!(p.len() >= 3 && p.len() <= 4);
        let rep = cover_and_multiplicity_check(&p, 100_000, 1).unwrap();
        assert_eq!(rep.uncovered, 0);
        assert!(rep.separated);
        let q = maximal_packing(PI - 1e-3, 2, 5).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(
            cover_and_multiplicity_check(&q, 10_000, 0)
                .unwrap()
                .uncovered,
            0
        );
        assert!(maximal_packing(0.0, 2, 1).is_err());
        assert!(maximal_packing(0.5, 4, 1).is_err());
    }

    #[test]
    fn even_circle_multiplicity() {
        // 2θ-balls around evenly spaced centres overlap at most 4 times
        let n = 20;
        let theta = 2.0 * PI / n as f64;
        let centers = (0..n).map(|i| {
            let a = theta * i as f64;
            vec![a.cos(), a.sin()]
        });
        let p = SpherePacking {
            d: 2,
            theta,
            centers: centers.collect(),
            candidates: 0,
        };
        assert!(
            cover_and_multiplicity_check(&p, 50_000, 0)
                .unwrap()
                .max_multiplicity
                <= 4
        );
    }

    #[test]
    fn sphere_packing_covers() {
        let p = maximal_packing(0.3, 3, 2).unwrap();
        let rep = cover_and_multiplicity_check(&p, 100_000, 77).unwrap();
        assert_eq!(rep.uncovered, 0);
        assert!(rep.separated);
    }

    #[test]
    fn angular_radius_examples() {
        for d in [2, 3] {
            assert_eq!(angular_radius(1, 0.7, 0.3, d).unwrap(), (FRAC_PI_2, true));
        }
        let (th, capped) = angular_radius(2, 1.0, 0.5, 2).unwrap();
        let exact = PI * (0.5f64.cosh() - 1.0) / (1f64.cosh() - 0.5f64.cosh());
        assert!(!capped && (th - exact).abs() < 1e-12);
        assert!((th - 0.965_084).abs() < 1e-6);
        let mut prev = PI;
        for k in 1..40 {
            let t = angular_radius(k, 1.0, 0.1, 3).unwrap().0;
            assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn f_k_bounded() {
        let mut m: f64 = 0.0;
        for k in 2..=100 {
            for j in 1..=200 {
                m = m.max(f_k(k, j as f64 / 200.0, 1.0 / 3.0));
            }
        }
        assert!(m < 20.0);
    }

    #[test]
    fn sinh_quotient_on_unit_interval() {
        // sinh x ≤ 2x on (0, 1], the sufficient condition behind αr ≤ 1
        assert!((1..=1000).all(|j| {
            let x = j as f64 / 1000.0;
            x.sinh() <= 2.0 * x
        }));
    }

    #[test]
    fn pou_partition_identity_and_support() {
        let dec = decompose_ball(6.0, 1.0, 0.2, 2, 3).unwrap();
        assert!(!dec.padded);
        let pou = build_pou(dec, 1.0 / 3.0).unwrap();
        let mut rng = stream(9, 0);
        for _ in 0..5000 {
            let p = random_polar_in_ball(2, 6.0, &mut rng);
            assert!((pou.sum_of_squares(&p) - 1.0).abs() < 1e-10);
            assert_eq!(pou.support_violations(&p), 0);
        }
        // plateau of the innermost function
        assert_eq!(pou.sacrifice(&Polar::planar(0.3, 1.0)), 0.0);
        let bound = PI * PI / (16.0 / 9.0);
        for j in 0..600 {
            let rho = 6.0 * j as f64 / 600.0;
            assert!(pou.radial_sacrifice(rho) <= bound * (1.0 + 1e-12));
            for k in 1..=6 {
                assert!(pou.eta(k, rho).1.abs() <= PI / (4.0 / 3.0) + 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dec = decompose_ball(4.0, 1.0, 0.3, 2, 11).unwrap();
        let pou = build_pou(dec, 1.0 / 3.0).unwrap();
        let (rho, phi) = (2.1, 0.37);
        let vals = pou.eval(&Polar::planar(rho, phi));
        let h = 1e-6;
        for v in &vals {
            let at = |r: f64, a: f64| {
                pou.eval(&Polar::planar(r, a))
                    .iter()
                    .find(|w| w.k == v.k && w.i == v.i)
                    .map_or(0.0, |w| w.value)
            };
            let fd_r = (at(rho + h, phi) - at(rho - h, phi)) / (2.0 * h);
            let fd_a = (at(rho, phi + h) - at(rho, phi - h)) / (2.0 * h);
            let ga = -phi.sin() * v.grad_sigma[0] + phi.cos() * v.grad_sigma[1];
            assert!((fd_r - v.d_rho).abs() < 1e-6 && (fd_a - ga).abs() < 1e-6);
        }
    }

    #[test]
    fn decomposition_covers_and_counts() {
        let dec = decompose_ball(10.0, 1.0, 0.1, 2, 4).unwrap();
        assert_eq!(dec.uncovered_fraction(20_000, 1), 0.0);
        assert!(dec.count_constant().is_finite() && dec.count_constant() > 0.0);
        for a in dec.annuli.iter().filter(|a| !a.capped) {
            assert!((a.volume_ratio - 1.0).abs() < 1e-9);
        }
        let single = decompose_ball(1.0, 1.0, 0.1, 2, 4).unwrap();
        assert_eq!(single.annuli.len(), 1);
        assert!(single.annuli[0].capped && single.cell_count() >= 3);
        let padded = decompose_ball(2.5, 1.0, 0.1, 2, 4).unwrap();
        assert!(padded.padded && padded.outer_radius == 3.0);
    }

    #[test]
    fn diameter_certificate_examples() {
        let ann = annuli(40.0, 1.0, 0.05, 2).unwrap();
        let rep = cell_diameter_certificate(&ann, 1.0, 0.05, 2).unwrap();
        assert!((rep.per_annulus[0].2 - 2.0).abs() < 1e-9);
        assert!(rep.max_ratio < 10.0);
        assert!(cell_diameter_certificate(&ann, 1.0, 2.0, 2).is_err());
    }
}
