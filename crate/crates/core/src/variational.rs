//! The Euclidean Donsker–Varadhan functional 𝒮_eu(φ) = ∫|∇φ|², the quadratic
//! interaction J, and the fluctuation exponent χ = inf{J + 𝒮_eu} computed by
//! projected gradient descent over square-root densities φ.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::geometry::MetricParams;
use crate::rng::stream;
use crate::spectral::{assemble, principal_eig, Grid, GridKind, GridSpec};
use crate::stochastic::DriftConvention;

/// Flat grid on the ball Σ_R: the interval [−R, R] for d = 1, a radial grid otherwise.
pub fn euclidean_grid(d: usize, radius: f64, n: usize) -> Result<Grid> {
    if d == 0 {
        return Err(Error::input("dimension must be positive"));
    }
    if d == 1 {
        GridSpec::interval(radius, n).build()
    } else {
        GridSpec::radial(
            MetricParams::euclidean(d),
            radius,
            n,
            DriftConvention::Riemannian,
        )
        .build()
    }
}

/// A square-root density φ on a flat grid; φ vanishes at ρ = R through the grid's
/// Dirichlet ghost nodes.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    pub grid: Grid,
    pub phi: Vec<f64>,
}

fn check_flat(grid: &Grid) -> Result<()> {
    if grid.spec.params.alpha != 0.0 {
        return Err(Error::input(
            "density profiles live on flat grids (alpha = 0)",
        ));
    }
    if grid.spec.kind == GridKind::Radial
        && grid.spec.params.d != 2
        && grid.spec.convention != DriftConvention::Riemannian
    {
        return Err(Error::input(
            "flat radial grids need the volume weight rho^(d-1)",
        ));
    }
    Ok(())
}

impl DensityProfile {
    pub fn new(grid: Grid, phi: Vec<f64>) -> Result<Self> {
        check_flat(&grid)?;
        if phi.len() != grid.len() {
            return Err(Error::input("profile length does not match the grid"));
        }
        if phi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::precondition(
                "profile must be finite and nonnegative",
            ));
        }
        let norm = grid.inner(&phi, &phi);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::precondition("profile is not normalized"));
        }
        Ok(Self { grid, phi })
    }

    /// Samples `f` at the node positions and normalizes. `f` must vanish on the sphere ρ = R.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Result<Self> {
        check_flat(&grid)?;
        let vals: Vec<f64> = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let r = grid.spec.radius;
        let boundary: Vec<Vec<f64>> = match grid.spec.kind {
            GridKind::Interval => vec![vec![-r], vec![r]],
            GridKind::Radial => vec![vec![r]],
            GridKind::Polar => (0..16)
                .map(|j| {
                    let a = j as f64 * core::f64::consts::PI / 8.0;
                    vec![r * a.cos(), r * a.sin()]
                })
                .collect(),
        };
        if boundary
            .iter()
            .any(|p| f(p).abs() > 1e-8 * peak.max(1e-300))
        {
            return Err(Error::precondition(
                "profile does not vanish on the boundary",
            ));
        }
        Self::normalized(grid, vals)
    }

    /// Clips at zero and rescales to Σ W φ² = 1.
    pub fn normalized(grid: Grid, mut phi: Vec<f64>) -> Result<Self> {
        for v in phi.iter_mut() {
            *v = v.max(0.0);
        }
        let norm = grid.inner(&phi, &phi).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::precondition("profile has zero or infinite mass"));
        }
        phi.iter_mut().for_each(|v| *v /= norm);
        Self::new(grid, phi)
    }

    /// Centered Gaussian density with per-coordinate variance s²: φ ∝ exp(−|x|²/(4s²)),
    /// truncated to zero at the boundary.
    pub fn gaussian(grid: Grid, s2: f64) -> Result<Self> {
        let vals = (0..grid.len())
            .map(|i| gaussian_value(&grid, i, s2))
            .collect();
        Self::normalized(grid, vals)
    }

    /// Density values φ² at the nodes.
    pub fn density(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p * p).collect()
    }
}

fn gaussian_value(grid: &Grid, i: usize, s2: f64) -> f64 {
    let x2: f64 = grid.position(i).iter().map(|x| x * x).sum();
    (-x2 / (4.0 * s2)).exp()
}

/// 𝒮_eu(φ) = ∫|∇φ|² in the grid's stiffness quadrature.
pub fn s_eu(profile: &DensityProfile) -> f64 {
    profile.grid.dirichlet_energy(&profile.phi)
}

/// First and second moments of ν = φ² dx: (Σ W|x|²φ², Σ W x φ²). On radial grids the
/// mean vanishes by symmetry and is returned empty.
fn moments_of(grid: &Grid, phi: &[f64]) -> (f64, Vec<f64>) {
    let dim = match grid.spec.kind {
        GridKind::Radial => 0,
        GridKind::Interval => 1,
        GridKind::Polar => 2,
    };
    let mut m2 = 0.0;
    let mut m1 = vec![0.0; dim];
    for i in 0..grid.len() {
        let x = grid.position(i);
        let w = grid.mass[i] * phi[i] * phi[i];
        m2 += w * x.iter().map(|v| v * v).sum::<f64>();
        for (m, v) in m1.iter_mut().zip(&x) {
            *m += w * v;
        }
    }
    (m2, m1)
}

/// J(ν) = −(Q″(0)/4) ∫∫|z − w|² dν dν = (γ/2)(∫|x|² dν − |∫x dν|²), γ = −Q″(0).
pub fn j_of_density(profile: &DensityProfile, qpp0: f64) -> f64 {
    let (m2, m1) = moments_of(&profile.grid, &profile.phi);
    -0.5 * qpp0 * (m2 - m1.iter().map(|v| v * v).sum::<f64>())
}

/// J + 𝒮_eu for one candidate.
pub fn chi_objective(profile: &DensityProfile, qpp0: f64) -> f64 {
    j_of_density(profile, qpp0) + s_eu(profile)
}

/// How χ is reduced to a one-dimensional search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ChiMode {
    /// Radially symmetric φ on the d-ball (d = 1 uses the interval).
    Radial,
    /// Product φ(x) = Π φ₁(x_k); J and 𝒮_eu split, so χ_d = d·χ₁.
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChiSettings {
    pub n_nodes: usize,
    pub random_starts: usize,
    pub max_iter: usize,
    /// Stop when the projected gradient's W-norm falls below this.
    pub grad_tol: f64,
    pub seed: u64,
    pub mode: ChiMode,
}

impl Default for ChiSettings {
    fn default() -> Self {
        Self {
            n_nodes: 400,
            random_starts: 3,
            max_iter: 200_000,
            grad_tol: 1e-7,
            seed: 0,
            mode: ChiMode::Radial,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChiResult {
    pub value: f64,
    pub j: f64,
    pub s: f64,
    /// Optimizer of the one-dimensional search (per coordinate in product mode).
    pub profile: DensityProfile,
    pub iterations: usize,
    pub converged: bool,
    /// Final projected gradient norm of the best start.
    pub residual: f64,
    /// Best value reached from each start, Gaussian ansatz first.
    pub start_values: Vec<f64>,
    pub mode: ChiMode,
}

struct Objective<'a> {
    grid: &'a Grid,
    gamma: f64,
    x2: Vec<f64>,
    x: Vec<f64>,
    centered: bool,
}

impl Objective<'_> {
    /// Value, J, 𝒮 and W-metric gradient 2W⁻¹Kφ + γφ(|x|² − 2M·x).
    fn eval(&self, phi: &[f64]) -> (f64, f64, f64, Vec<f64>) {
        let g = self.grid;
        let n = g.len();
        let mut kphi: Vec<f64> = (0..n).map(|i| g.stiff_diag[i] * phi[i]).collect();
        for &(a, b, w) in &g.edges {
            kphi[a] -= w * phi[b];
            kphi[b] -= w * phi[a];
        }
        let s: f64 = kphi.iter().zip(phi).map(|(k, p)| k * p).sum();
        let mut m2 = 0.0;
        let mut m1 = 0.0;
        for i in 0..n {
            let w = g.mass[i] * phi[i] * phi[i];
            m2 += w * self.x2[i];
            m1 += w * self.x[i];
        }
        if !self.centered {
            m1 = 0.0;
        }
        let j = 0.5 * self.gamma * (m2 - m1 * m1);
        let grad = (0..n)
            .map(|i| {
                2.0 * kphi[i] / g.mass[i]
                    + self.gamma * phi[i] * (self.x2[i] - 2.0 * m1 * self.x[i])
            })
            .collect();
        (j + s, j, s, grad)
    }
}

fn project(grid: &Grid, phi: &mut [f64]) -> bool {
    for v in phi.iter_mut() {
        *v = v.max(0.0);
    }
    let norm = grid.inner(phi, phi).sqrt();
    if !(norm > 0.0) {
        return false;
    }
    phi.iter_mut().for_each(|v| *v /= norm);
    true
}

struct Descent {
    phi: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
}

/// Projected Barzilai–Borwein descent on {φ ≥ 0, Σ W φ² = 1} with a nonmonotone safeguard.
fn descend(obj: &Objective, mut phi: Vec<f64>, max_iter: usize, tol: f64) -> Descent {
    let grid = obj.grid;
    let n = grid.len();
    project(grid, &mut phi);
    let tangent = |phi: &[f64], g: &[f64]| -> Vec<f64> {
        let c = grid.inner(g, phi);
        g.iter().zip(phi).map(|(gi, p)| gi - c * p).collect()
    };
    let residual = |phi: &[f64], gt: &[f64]| -> f64 {
        let r: Vec<f64> = phi
            .iter()
            .zip(gt)
            .map(|(&p, &g)| if p > 0.0 { g } else { g.min(0.0) })
            .collect();
        grid.inner(&r, &r).sqrt()
    };
    let lmax = (0..n)
        .map(|i| grid.stiff_diag[i] / grid.mass[i])
        .fold(0.0, f64::max);
    let tau_min = 1e-3 / (2.0 * lmax + 1.0);
    let mut tau = 0.5 / (2.0 * lmax + 1.0);
    let (mut f, _, _, g) = obj.eval(&phi);
    let mut gt = tangent(&phi, &g);
    let mut history = vec![f];
    let mut res = residual(&phi, &gt);
    let mut it = 0;
    while it < max_iter && res > tol {
        it += 1;
        let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut step = tau;
        let (new_phi, new_f, new_gt) = loop {
            let mut trial: Vec<f64> = phi.iter().zip(&gt).map(|(p, g)| p - step * g).collect();
            if project(grid, &mut trial) {
                let (ft, _, _, g) = obj.eval(&trial);
                if ft <= reference || step <= tau_min {
                    let gt = tangent(&trial, &g);
                    break (trial, ft, gt);
                }
            } else if step <= tau_min {
                break (phi.clone(), f, gt.clone());
            }
            step *= 0.5;
        };
        let sv: Vec<f64> = new_phi.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_gt.iter().zip(&gt).map(|(a, b)| a - b).collect();
        let sy = grid.inner(&sv, &yv);
        let ss = grid.inner(&sv, &sv);
        tau = if sy > 0.0 {
            (ss / sy).clamp(tau_min, 1e6)
        } else {
            2.0 * step
        };
        phi = new_phi;
        f = new_f;
        gt = new_gt;
        res = residual(&phi, &gt);
        history.push(f);
        if history.len() > 10 {
            history.remove(0);
        }
        if ss == 0.0 {
            break;
        }
    }
    Descent {
        phi,
        value: f,
        iterations: it,
        converged: res <= tol,
        residual: res,
    }
}

/// χ_R = inf{J + 𝒮_eu} over profiles on Σ_R, multi-start (Gaussian ansatz first).
pub fn chi_optimize(qpp0: f64, d: usize, radius: f64, settings: &ChiSettings) -> Result<ChiResult> {
    let gamma = -qpp0;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::input("need Q''(0) < 0"));
    }
    if d == 0 || !(radius > 0.0) {
        return Err(Error::input("need d >= 1 and R > 0"));
    }
    let (search_d, factor) = match settings.mode {
        ChiMode::Radial => (d, 1.0),
        ChiMode::Product => (1, d as f64),
    };
    let grid = euclidean_grid(search_d, radius, settings.n_nodes)?;
    let n = grid.len();
    let centered = grid.spec.kind == GridKind::Interval;
    let x: Vec<f64> = (0..n)
        .map(|i| if centered { grid.coord[i] } else { 0.0 })
        .collect();
    let x2: Vec<f64> = (0..n).map(|i| grid.coord[i] * grid.coord[i]).collect();
    let obj = Objective {
        grid: &grid,
        gamma,
        x2,
        x,
        centered,
    };

    let s2 = 1.0 / (2.0 * gamma).sqrt();
    let mut starts: Vec<Vec<f64>> = vec![(0..n).map(|i| gaussian_value(&grid, i, s2)).collect()];
    for k in 0..settings.random_starts {
        let mut rng = stream(settings.seed, k as u64);
        let shift = if centered {
            radius * (rng.random::<f64>() - 0.5)
        } else {
            0.0
        };
        let width = radius * (0.1 + 0.6 * rng.random::<f64>());
        starts.push(
            (0..n)
                .map(|i| {
                    let y = (grid.coord[i] - shift) / width;
                    (1.0 + 0.5 * rng.random::<f64>())
                        * (-y * y).exp()
                        * (1.0 - (grid.coord[i] / radius).powi(2))
                })
                .collect(),
        );
    }
    let mut best: Option<Descent> = None;
    let mut start_values = Vec::with_capacity(starts.len());
    let mut iterations = 0;
    for s in starts {
        let run = descend(&obj, s, settings.max_iter, settings.grad_tol);
        iterations += run.iterations;
        start_values.push(factor * run.value);
        if best.as_ref().map_or(true, |b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let (value, j, s, _) = obj.eval(&best.phi);
    let profile = DensityProfile::normalized(grid.clone(), best.phi)?;
    Ok(ChiResult {
        value: factor * value,
        j: factor * j,
        s: factor * s,
        profile,
        iterations,
        converged: best.converged,
        residual: best.residual,
        start_values,
        mode: settings.mode,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChiCurve {
    /// (R, χ_R, converged).
    pub points: Vec<(f64, f64, bool)>,
    pub non_increasing: bool,
}

/// χ_R along increasing radii at a fixed node spacing (the largest R gets `n_nodes`).
pub fn chi_r_monotonicity(
    qpp0: f64,
    d: usize,
    radii: &[f64],
    settings: &ChiSettings,
) -> Result<ChiCurve> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::input("radii must be strictly increasing"));
    }
    let r_max = *radii.last().unwrap();
    let mut points = Vec::with_capacity(radii.len());
    for &r in radii {
        let n = (((settings.n_nodes as f64 + 1.0) * r / r_max).round() as usize).max(3) - 1;
        let res = chi_optimize(
            qpp0,
            d,
            r,
            &ChiSettings {
                n_nodes: n,
                ..*settings
            },
        )?;
        points.push((r, res.value, res.converged));
    }
    let non_increasing = points.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-6));
    Ok(ChiCurve {
        points,
        non_increasing,
    })
}

/// A test potential f for the Legendre lower bound.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TestPotential {
    Constant(f64),
    /// −a|x|² + b.
    Well {
        a: f64,
        b: f64,
    },
    /// amp·exp(−|x − center|²/(2 width²)).
    Bump {
        amp: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Node values given directly.
    Values(Vec<f64>),
}

impl TestPotential {
    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        if let TestPotential::Values(v) = self {
            return v.clone();
        }
        (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                match self {
                    TestPotential::Constant(c) => *c,
                    TestPotential::Well { a, b } => -a * x.iter().map(|v| v * v).sum::<f64>() + b,
                    TestPotential::Bump { amp, center, width } => {
                        let r2: f64 = x
                            .iter()
                            .zip(center.iter().chain(core::iter::repeat(&0.0)))
                            .map(|(a, c)| (a - c) * (a - c))
                            .sum();
                        amp * (-r2 / (2.0 * width * width)).exp()
                    }
                    TestPotential::Values(_) => unreachable!(),
                }
            })
            .collect()
    }

    pub fn label(&self) -> String {
        use alloc::format;
        match self {
            TestPotential::Constant(c) => format!("constant c={c}"),
            TestPotential::Well { a, b } => format!("well a={a} b={b}"),
            TestPotential::Bump { amp, center, width } => {
                format!("bump amp={amp} center={center:?} width={width}")
            }
            TestPotential::Values(_) => String::from("grid values"),
        }
    }
}

/// Quadratic wells over a log grid of curvatures plus bumps of a few sizes and offsets.
pub fn default_family(radius: f64) -> Vec<TestPotential> {
    let mut fam = Vec::new();
    for k in 0..41 {
        let a = 10f64.powf(-2.0 + 4.0 * k as f64 / 40.0);
        for b in [0.0, 1.0] {
            fam.push(TestPotential::Well { a, b });
        }
    }
    for amp in [0.5, 2.0, 8.0] {
        for width in [0.25 * radius, 0.5 * radius] {
            for c in [0.0, radius / 3.0, -radius / 3.0] {
                fam.push(TestPotential::Bump {
                    amp,
                    center: vec![c],
                    width,
                });
            }
        }
    }
    fam
}

/// The potential that makes φ the ground state with eigenvalue 0: f = Kφ/(Wφ).
/// Then ∫f dν + λ₀^{f} = 𝒮_eu(φ) exactly, which is the sup in the Legendre identity.
pub fn euler_lagrange_potential(profile: &DensityProfile) -> Result<Vec<f64>> {
    let g = &profile.grid;
    let phi = &profile.phi;
    if phi.iter().any(|p| *p <= 0.0) {
        return Err(Error::precondition(
            "Euler-Lagrange potential needs a strictly positive profile",
        ));
    }
    let mut kphi: Vec<f64> = (0..g.len()).map(|i| g.stiff_diag[i] * phi[i]).collect();
    for &(a, b, w) in &g.edges {
        kphi[a] -= w * phi[b];
        kphi[b] -= w * phi[a];
    }
    Ok((0..g.len())
        .map(|i| kphi[i] / (g.mass[i] * phi[i]))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LegendreEntry {
    pub label: String,
    pub integral: f64,
    pub lambda0: f64,
    /// ∫f dμ + λ₀^{eu;f,R}.
    pub lower_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LegendreReport {
    pub s_eu: f64,
    pub entries: Vec<LegendreEntry>,
    pub best: f64,
    /// s_eu − best (≥ −1e−6 when no violation).
    pub gap: f64,
    pub violations: usize,
}

/// λ₀^{eu;f,R} (smallest eigenvalue of −(Δ + f), Dirichlet) for each potential of a family.
/// These do not depend on μ, so one solve serves every profile on the same grid.
pub fn family_lambdas(grid: &Grid, family: &[TestPotential]) -> Result<Vec<f64>> {
    family
        .iter()
        .map(|f| {
            let v = f.on_grid(grid);
            if v.len() != grid.len() {
                return Err(Error::input("potential length does not match the grid"));
            }
            Ok(principal_eig(&assemble(grid, &v, None)?)?.lambda0)
        })
        .collect()
}

/// Legendre lower bounds ∫f dμ + λ₀^{eu;f,R} for a profile, given precomputed eigenvalues.
pub fn legendre_report(
    profile: &DensityProfile,
    family: &[TestPotential],
    lambdas: &[f64],
) -> Result<LegendreReport> {
    if family.len() != lambdas.len() || family.is_empty() {
        return Err(Error::input(
            "need one eigenvalue per potential and a nonempty family",
        ));
    }
    let grid = &profile.grid;
    let s = s_eu(profile);
    let entries: Vec<LegendreEntry> = family
        .iter()
        .zip(lambdas)
        .map(|(f, &lambda0)| {
            let v = f.on_grid(grid);
            let integral: f64 = grid
                .mass
                .iter()
                .zip(&v)
                .zip(&profile.phi)
                .map(|((w, f), p)| w * f * p * p)
                .sum();
            LegendreEntry {
                label: f.label(),
                integral,
                lambda0,
                lower_bound: integral + lambda0,
            }
        })
        .collect();
    let best = entries
        .iter()
        .map(|e| e.lower_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let violations = entries.iter().filter(|e| e.lower_bound > s + 1e-6).count();
    Ok(LegendreReport {
        s_eu: s,
        entries,
        best,
        gap: s - best,
        violations,
    })
}

/// Checks ∫f dμ + λ₀^{eu;f,R} ≤ 𝒮_eu(μ) + 1e−6 over a family, where λ₀^{eu;f,R} is the
/// smallest eigenvalue of −(Δ + f) with Dirichlet conditions on the profile's grid.
pub fn legendre_inequality_check(
    profile: &DensityProfile,
    family: &[TestPotential],
) -> Result<LegendreReport> {
    let lambdas = family_lambdas(&profile.grid, family)?;
    legendre_report(profile, family, &lambdas)
}

/// F(ρ) = 𝒮_eu(√ρ) for a nonnegative density on the grid (not normalized).
pub fn dv_of_density(grid: &Grid, rho: &[f64]) -> f64 {
    let phi: Vec<f64> = rho.iter().map(|r| r.max(0.0).sqrt()).collect();
    grid.dirichlet_energy(&phi)
}

/// Largest convexity defect F(θρ₁ + (1−θ)ρ₂) − θF(ρ₁) − (1−θ)F(ρ₂) over the given θ.
pub fn convexity_defect(grid: &Grid, rho1: &[f64], rho2: &[f64], thetas: &[f64]) -> f64 {
    let (f1, f2) = (dv_of_density(grid, rho1), dv_of_density(grid, rho2));
    thetas
        .iter()
        .map(|&t| {
            let mix: Vec<f64> = rho1
                .iter()
                .zip(rho2)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect();
            dv_of_density(grid, &mix) - t * f1 - (1.0 - t) * f2
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(n: usize) -> ChiSettings {
        ChiSettings {
            n_nodes: n,
            ..ChiSettings::default()
        }
    }

    #[test]
    fn ground_state_energy_is_the_eigenvalue() {
        let grid = euclidean_grid(2, 2.0, 400).unwrap();
        let eig = principal_eig(&assemble(&grid, &vec![0.0; grid.len()], None).unwrap()).unwrap();
        let p = DensityProfile::normalized(grid, eig.phi0.clone()).unwrap();
        assert!((s_eu(&p) - eig.lambda0).abs() < 1e-8);
        assert!((s_eu(&p) - 1.44580).abs() / 1.44580 < 5e-3);
    }

    #[test]
    fn gaussian_energy_and_interaction() {
        let grid = euclidean_grid(1, 6.0, 400).unwrap();
        let p = DensityProfile::gaussian(grid, 0.5).unwrap();
        assert!((s_eu(&p) - 0.5).abs() < 5e-3);
        assert!((j_of_density(&p, -2.0) - 0.5).abs() < 5e-3);
    }

    #[test]
    fn interaction_is_translation_invariant() {
        let grid = euclidean_grid(1, 6.0, 400).unwrap();
        let a = DensityProfile::from_fn(grid.clone(), |x| {
            (-(x[0] - 1.0).powi(2)).exp() * (36.0 - x[0] * x[0])
        })
        .unwrap();
        let b = DensityProfile::from_fn(grid, |x| {
            (-(x[0] + 0.5).powi(2)).exp() * (36.0 - x[0] * x[0])
        })
        .unwrap();
        // both are (nearly) the same Gaussian shape, far from the wall
        assert!((j_of_density(&a, -2.0) - j_of_density(&b, -2.0)).abs() < 1e-3);
    }

    #[test]
    fn boundary_violation_rejected() {
        let grid = euclidean_grid(1, 2.0, 50).unwrap();
        assert!(DensityProfile::from_fn(grid, |_| 1.0).is_err());
    }

    #[test]
    fn chi_matches_oscillator_ground_state() {
        // with the centre fixed at 0, J + S is the Rayleigh quotient of −Δ + (γ/2)|x|²
        let res = chi_optimize(-2.0, 1, 6.0, &settings(400)).unwrap();
        assert!(res.converged);
        let grid = euclidean_grid(1, 6.0, 400).unwrap();
        let v: Vec<f64> = grid.coord.iter().map(|x| -x * x).collect();
        let oracle = principal_eig(&assemble(&grid, &v, None).unwrap())
            .unwrap()
            .lambda0;
        assert!(
            (res.value - oracle).abs() < 1e-6,
            "{} vs {}",
            res.value,
            oracle
        );
        assert!((res.value - 1.0).abs() < 0.02);
    }

    #[test]
    fn chi_scaling_and_dimension() {
        let a = chi_optimize(-1.0, 1, 6.0, &settings(300)).unwrap().value;
        let b = chi_optimize(-4.0, 1, 6.0, &settings(300)).unwrap().value;
        assert!((b / a - 2.0).abs() < 0.02);
        let r = chi_optimize(-1.0, 3, 6.0, &settings(300)).unwrap();
        let p = chi_optimize(
            -1.0,
            3,
            6.0,
            &ChiSettings {
                mode: ChiMode::Product,
                ..settings(300)
            },
        )
        .unwrap();
        let target = 3.0 / 2f64.sqrt();
        assert!((r.value - target).abs() / target < 0.02);
        assert!((p.value - target).abs() / target < 0.02);
    }

    #[test]
    fn chi_below_random_candidates() {
        let res = chi_optimize(-2.0, 1, 4.0, &settings(200)).unwrap();
        let grid = euclidean_grid(1, 4.0, 200).unwrap();
        let mut rng = stream(9, 0);
        for _ in 0..100 {
            let c = 2.0 * (rng.random::<f64>() - 0.5);
            let w = 0.2 + 2.0 * rng.random::<f64>();
            let p = DensityProfile::from_fn(grid.clone(), |x| {
                (-((x[0] - c) / w).powi(2)).exp() * (16.0 - x[0] * x[0])
            })
            .unwrap();
            assert!(res.value <= chi_objective(&p, -2.0) + 1e-9);
        }
    }

    #[test]
    fn chi_r_decreases() {
        let curve = chi_r_monotonicity(-2.0, 1, &[1.0, 3.0, 6.0], &settings(300)).unwrap();
        assert!(curve.non_increasing);
        assert!(curve.points[0].1 > 1.1);
        assert!((curve.points[2].1 - 1.0).abs() < 0.02);
    }

    #[test]
    fn legendre_direction_and_equality() {
        let grid = euclidean_grid(1, 6.0, 300).unwrap();
        let p = DensityProfile::gaussian(grid, 0.5).unwrap();
        let mut fam = default_family(6.0);
        fam.push(TestPotential::Constant(3.0));
        let rep = legendre_inequality_check(&p, &fam).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.gap / rep.s_eu < 0.05);
        let f = euler_lagrange_potential(&p).unwrap();
        let eq = legendre_inequality_check(&p, &[TestPotential::Values(f)]).unwrap();
        assert!(eq.gap.abs() < 1e-3);
    }

    #[test]
    fn dv_functional_is_convex() {
        let grid = euclidean_grid(1, 3.0, 100).unwrap();
        let mut rng = stream(5, 0);
        let thetas: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
        for _ in 0..20 {
            let r1: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
            let r2: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
            assert!(convexity_defect(&grid, &r1, &r2, &thetas) <= 1e-8);
        }
    }
}
