//! Brownian motion on (Σ, g^α) in geodesic polar coordinates, occupation
//! measures, exit times and hyperbolic heat-kernel formulas.

/// Coefficient in front of the α coth(αρ) ∂_ρ drift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DriftConvention {
    /// Coefficient 1, as the generator is printed.
    Paper,
    /// Coefficient d − 1 (Laplace–Beltrami operator of ℍ^d).
    #[default]
    Riemannian,
}

impl DriftConvention {
    pub fn coefficient(self, d: usize) -> f64 {
        match self {
            DriftConvention::Paper => 1.0,
            DriftConvention::Riemannian => d as f64 - 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DriftConvention::Paper => "paper",
            DriftConvention::Riemannian => "riemannian",
        }
    }
}

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::DiscreteMeasure;
use crate::geometry::{radial_sinh, random_direction, MetricParams, Polar};
use crate::numerics::{linear_fit, rem_euclid, LinearFit};
use crate::rng::{stream, Rng};

/// α coth(αρ) − 1/ρ: the part of the radial drift not produced by the Bessel step.
fn drift_excess(alpha: f64, rho: f64) -> f64 {
    let x = alpha * rho;
    if x < 1e-4 {
        alpha * x / 3.0
    } else {
        alpha / x.tanh() - 1.0 / rho
    }
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// One step of the radial SDE dρ = √2 dB + c α coth(αρ) ds: an exact Bessel step
/// of dimension c + 1 followed by the bounded hyperbolic drift correction.
/// The result is never negative.
pub fn radial_step(rho: f64, alpha: f64, c: usize, dt: f64, rng: &mut Rng) -> f64 {
    let sq = (2.0 * dt).sqrt();
    let mut s = rho + sq * normal(rng);
    s *= s;
    for _ in 0..c {
        let z = sq * normal(rng);
        s += z * z;
    }
    s.sqrt() + c as f64 * drift_excess(alpha, rho) * dt
}

/// Probability that a Brownian bridge with generator ∂² crosses `r` between
/// endpoints `a`, `b` < r over a step `dt`.
pub fn bridge_crossing(a: f64, b: f64, r: f64, dt: f64) -> f64 {
    let e = (r - a) * (r - b) / dt;
    if e > 40.0 {
        0.0
    } else {
        (-e).exp()
    }
}

/// Brownian motion on (ℍ^d_α, g) in geodesic polar coordinates, advanced in place.
#[derive(Clone, Debug)]
pub struct BmStepper {
    pub params: MetricParams,
    pub convention: DriftConvention,
    pub dt: f64,
    pub state: Polar,
    /// Signed coordinate for d = 1 (the line is flat for every α).
    line: f64,
    c: usize,
    /// Steps whose angular variance was too large to resolve; the direction was redrawn uniformly.
    pub saturated_steps: u64,
}

impl BmStepper {
    pub fn new(
        start: Polar,
        params: MetricParams,
        convention: DriftConvention,
        dt: f64,
    ) -> Result<Self> {
        if start.dim() != params.d {
            return Err(Error::input("start point dimension differs from d"));
        }
        if !(dt > 0.0) {
            return Err(Error::input("dt must be positive"));
        }
        let line = if params.d == 1 {
            start.rho * start.sigma[0].signum()
        } else {
            0.0
        };
        let c = convention.coefficient(params.d) as usize;
        Ok(Self {
            params,
            convention,
            dt,
            state: start,
            line,
            c,
            saturated_steps: 0,
        })
    }

    pub fn step(&mut self, rng: &mut Rng) {
        let d = self.params.d;
        if d == 1 {
            self.line += (2.0 * self.dt).sqrt() * normal(rng);
            self.state.rho = self.line.abs();
            self.state.sigma[0] = if self.line < 0.0 { -1.0 } else { 1.0 };
            return;
        }
        let rho = self.state.rho;
        let var = 2.0 * self.dt / radial_sinh(self.params.alpha, rho).powi(2);
        self.state.rho = radial_step(rho, self.params.alpha, self.c, self.dt, rng);
        if !(var < 0.25) {
            self.saturated_steps += 1;
            self.state.sigma = random_direction(d, rng);
            return;
        }
        let sd = var.sqrt();
        let z: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let proj: f64 = z.iter().zip(&self.state.sigma).map(|(a, b)| a * b).sum();
        let mut n2 = 0.0;
        for (s, zi) in self.state.sigma.iter_mut().zip(&z) {
            *s += sd * (zi - proj * *s);
            n2 += *s * *s;
        }
        let n = n2.sqrt();
        for s in self.state.sigma.iter_mut() {
            *s /= n;
        }
    }
}

/// A sampled path on the uniform grid s_k = k·dt.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathSample {
    pub dt: f64,
    pub alpha: f64,
    pub convention: DriftConvention,
    pub states: Vec<Polar>,
    pub saturated_steps: u64,
}

impl PathSample {
    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn duration(&self) -> f64 {
        (self.states.len().saturating_sub(1)) as f64 * self.dt
    }
}

pub fn simulate_bm(
    start: Polar,
    params: MetricParams,
    duration: f64,
    dt: f64,
    convention: DriftConvention,
    seed: u64,
) -> Result<PathSample> {
    if duration == 0.0 {
        return Ok(PathSample {
            dt,
            alpha: params.alpha,
            convention,
            states: vec![start],
            saturated_steps: 0,
        });
    }
    if !(duration > 0.0) || !(dt > 0.0) || dt > duration / 10.0 {
        return Err(Error::input("need duration > 0 and 0 < dt <= duration/10"));
    }
    let n = (duration / dt).round() as usize;
    let mut stepper = BmStepper::new(start, params, convention, dt)?;
    let mut rng = stream(seed, 0);
    let mut states = Vec::with_capacity(n + 1);
    states.push(stepper.state.clone());
    for _ in 0..n {
        stepper.step(&mut rng);
        states.push(stepper.state.clone());
    }
    Ok(PathSample {
        dt,
        alpha: params.alpha,
        convention,
        states,
        saturated_steps: stepper.saturated_steps,
    })
}

/// First grid time with ρ ≥ R, or `None`.
pub fn exit_time(path: &PathSample, radius: f64) -> Option<f64> {
    path.states
        .iter()
        .position(|p| p.rho >= radius)
        .map(|k| k as f64 * path.dt)
}

/// Radial × angular bins of Σ_R; points beyond R are counted in the outermost ring.
/// Angular bins are used only for d = 2.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bins {
    pub radius: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl Bins {
    pub fn radial(radius: f64, n_r: usize) -> Self {
        Self {
            radius,
            n_r,
            n_theta: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, p: &Polar) -> usize {
        let i = ((p.rho / self.radius * self.n_r as f64) as usize).min(self.n_r - 1);
        if self.n_theta == 1 || p.dim() != 2 {
            return i * self.n_theta;
        }
        let phi = rem_euclid(p.sigma[1].atan2(p.sigma[0]), 2.0 * core::f64::consts::PI);
        let j = ((phi / (2.0 * core::f64::consts::PI) * self.n_theta as f64) as usize)
            .min(self.n_theta - 1);
        i * self.n_theta + j
    }

    /// Centre of bin `k` as a polar point of dimension `d`.
    pub fn centre(&self, k: usize, d: usize) -> Polar {
        let (i, j) = (k / self.n_theta, k % self.n_theta);
        let rho = (i as f64 + 0.5) * self.radius / self.n_r as f64;
        if d == 2 {
            Polar::planar(
                rho,
                (j as f64 + 0.5) * 2.0 * core::f64::consts::PI / self.n_theta as f64,
            )
        } else {
            let mut sigma = vec![0.0; d];
            sigma[0] = 1.0;
            Polar { rho, sigma }
        }
    }
}

/// Time-normalized occupation of a path.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OccupationMeasure {
    pub bins: Bins,
    pub weights: Vec<f64>,
    pub total_time: f64,
}

impl OccupationMeasure {
    pub fn to_discrete_measure(&self, d: usize) -> Result<DiscreteMeasure> {
        let atoms = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(k, &w)| (self.bins.centre(k, d), w))
            .collect();
        DiscreteMeasure::new(atoms, self.bins.radius)
    }

    /// Radial marginal (sum over angular bins).
    pub fn radial_marginal(&self) -> Vec<f64> {
        self.weights
            .chunks(self.bins.n_theta)
            .map(|c| c.iter().sum())
            .collect()
    }
}

/// Left-point rule: each interval [s_k, s_{k+1}) is charged to the bin of state k.
/// A single-state path is a point mass on its bin.
pub fn occupation_measure(path: &PathSample, bins: Bins) -> Result<OccupationMeasure> {
    if path.states.is_empty() || bins.is_empty() {
        return Err(Error::input("empty path or bin set"));
    }
    let mut weights = vec![0.0; bins.len()];
    let used = if path.states.len() == 1 {
        &path.states[..]
    } else {
        &path.states[..path.states.len() - 1]
    };
    for p in used {
        weights[bins.index(p)] += 1.0;
    }
    let n = used.len() as f64;
    for w in weights.iter_mut() {
        *w /= n;
    }
    Ok(OccupationMeasure {
        bins,
        weights,
        total_time: path.duration(),
    })
}

/// Monte Carlo estimate of P(τ_R ≤ t) from o.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExitEstimate {
    pub radius: f64,
    pub t: f64,
    /// Hit fraction, or the 95% upper bound 1 − 0.05^{1/n} when there are no hits.
    pub probability: f64,
    pub std_error: f64,
    pub hits: u64,
    pub n_paths: u64,
    pub upper_bound_only: bool,
}

/// Exit counts from o for several radii at once, for paths with indices in `paths`.
/// Path k uses the stream (seed, k), so counts over disjoint ranges add up exactly.
/// Only the radial process is simulated; crossings between grid times are caught
/// with the Brownian-bridge probability.
pub fn exit_hit_counts(
    radii: &[f64],
    t: f64,
    params: MetricParams,
    convention: DriftConvention,
    dt: f64,
    seed: u64,
    paths: Range<u64>,
) -> Vec<u64> {
    let steps = (t / dt).round().max(1.0) as usize;
    let dt = t / steps as f64;
    let c = convention.coefficient(params.d) as usize;
    let mut counts = vec![0u64; radii.len()];
    let mut exited = vec![false; radii.len()];
    for k in paths {
        let mut rng = stream(seed, k);
        exited.iter_mut().for_each(|e| *e = false);
        let mut rho = 0.0;
        let mut line = 0.0;
        for _ in 0..steps {
            let next = if params.d == 1 {
                line += (2.0 * dt).sqrt() * normal(&mut rng);
                line.abs()
            } else {
                radial_step(rho, params.alpha, c, dt, &mut rng)
            };
            for (r, e) in radii.iter().zip(exited.iter_mut()) {
                if *e {
                    continue;
                }
                if next >= *r {
                    *e = true;
                } else {
                    let p = bridge_crossing(rho, next, *r, dt);
                    if p > 0.0 && rng.random::<f64>() < p {
                        *e = true;
                    }
                }
            }
            rho = next;
            if exited.iter().all(|&e| e) {
                break;
            }
        }
        for (cnt, e) in counts.iter_mut().zip(&exited) {
            *cnt += *e as u64;
        }
    }
    counts
}

pub fn exit_estimate(radius: f64, t: f64, hits: u64, n_paths: u64) -> ExitEstimate {
    let n = n_paths as f64;
    if hits == 0 {
        let ub = 1.0 - 0.05f64.powf(1.0 / n);
        return ExitEstimate {
            radius,
            t,
            probability: ub,
            std_error: ub,
            hits,
            n_paths,
            upper_bound_only: true,
        };
    }
    let p = hits as f64 / n;
    ExitEstimate {
        radius,
        t,
        probability: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
        hits,
        n_paths,
        upper_bound_only: false,
    }
}

pub fn exit_probability(
    radius: f64,
    t: f64,
    n_paths: u64,
    params: MetricParams,
    convention: DriftConvention,
    dt: f64,
    seed: u64,
) -> Result<ExitEstimate> {
    if !(radius > 0.0) || !(t > 0.0) || n_paths == 0 {
        return Err(Error::input("need R > 0, t > 0 and at least one path"));
    }
    let hits = exit_hit_counts(&[radius], t, params, convention, dt, seed, 0..n_paths)[0];
    Ok(exit_estimate(radius, t, hits, n_paths))
}

/// Affine fit of log P̂(τ_R ≤ t) against R²/t.
pub fn exit_shape_fit(estimates: &[ExitEstimate]) -> LinearFit {
    let xs: Vec<f64> = estimates
        .iter()
        .map(|e| e.radius * e.radius / e.t)
        .collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.probability.ln()).collect();
    linear_fit(&xs, &ys)
}

/// ρ at time `s` for paths `paths` started at o (radial process only).
pub fn radial_endpoints(
    params: MetricParams,
    convention: DriftConvention,
    s: f64,
    dt: f64,
    seed: u64,
    paths: Range<u64>,
) -> Vec<f64> {
    let steps = (s / dt).round().max(1.0) as usize;
    let dt = s / steps as f64;
    let c = convention.coefficient(params.d) as usize;
    paths
        .map(|k| {
            let mut rng = stream(seed, k);
            let mut rho = 0.0;
            for _ in 0..steps {
                rho = radial_step(rho, params.alpha, c, dt, &mut rng);
            }
            rho
        })
        .collect()
}

/// Mean and standard error of ρ_s² from o at each requested time.
pub fn mean_square_displacement(
    params: MetricParams,
    convention: DriftConvention,
    times: &[f64],
    dt: f64,
    n_paths: u64,
    seed: u64,
) -> Vec<(f64, f64)> {
    times
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let r2: Vec<f64> = radial_endpoints(
                params,
                convention,
                s,
                dt,
                seed ^ (i as u64) << 32,
                0..n_paths,
            )
            .into_iter()
            .map(|r| r * r)
            .collect();
            crate::numerics::mean_and_se(&r2)
        })
        .collect()
}

/// Survival curve log P(τ_R > s) from a Fleming–Viot particle system.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub log_survival: Vec<f64>,
}

struct FlemingViot {
    alpha: f64,
    c: usize,
    line: bool,
    radius: f64,
    dt: f64,
    rho: Vec<f64>,
    killed: Vec<usize>,
    alive: Vec<bool>,
}

impl FlemingViot {
    fn new(
        params: MetricParams,
        convention: DriftConvention,
        radius: f64,
        dt: f64,
        n: usize,
    ) -> Self {
        Self {
            alpha: params.alpha,
            c: convention.coefficient(params.d) as usize,
            line: params.d == 1,
            radius,
            dt,
            rho: vec![0.0; n],
            killed: Vec::new(),
            alive: vec![true; n],
        }
    }

    /// Advances every particle; returns the killed fraction, and records the
    /// (child, parent) resampling pairs in `killed` order.
    fn step(&mut self, rng: &mut Rng, parents: &mut Vec<(usize, usize)>) -> Result<f64> {
        let n = self.rho.len();
        self.killed.clear();
        parents.clear();
        for i in 0..n {
            let a = self.rho[i];
            let b = if self.line {
                // signed position is irrelevant for |x|: reflect
                (a + (2.0 * self.dt).sqrt() * normal(rng)).abs()
            } else {
                radial_step(a, self.alpha, self.c, self.dt, rng)
            };
            let dead = b >= self.radius || {
                let p = bridge_crossing(a, b, self.radius, self.dt);
                p > 0.0 && rng.random::<f64>() < p
            };
            self.rho[i] = b;
            self.alive[i] = !dead;
            if dead {
                self.killed.push(i);
            }
        }
        let k = self.killed.len();
        if k == n {
            return Err(Error::precondition(
                "all Fleming-Viot particles exited in one step; reduce dt",
            ));
        }
        for idx in 0..k {
            let child = self.killed[idx];
            let parent = loop {
                let j = rng.random_range(0..n);
                if self.alive[j] {
                    break j;
                }
            };
            self.rho[child] = self.rho[parent];
            parents.push((child, parent));
        }
        for idx in 0..k {
            self.alive[self.killed[idx]] = true;
        }
        Ok(k as f64 / n as f64)
    }
}

/// Fleming–Viot estimate of log P(τ_R > s) from o, recorded every `record_every` steps.
#[allow(clippy::too_many_arguments)]
pub fn fleming_viot_survival(
    params: MetricParams,
    convention: DriftConvention,
    radius: f64,
    duration: f64,
    dt: f64,
    n_particles: usize,
    record_every: usize,
    seed: u64,
) -> Result<SurvivalCurve> {
    if n_particles < 2 || !(duration > 0.0) || !(dt > 0.0) || record_every == 0 {
        return Err(Error::input("need >= 2 particles, duration > 0, dt > 0"));
    }
    let steps = (duration / dt).round() as usize;
    let mut fv = FlemingViot::new(params, convention, radius, dt, n_particles);
    let mut rng = stream(seed, 0);
    let mut parents = Vec::new();
    let mut log_s = 0.0;
    let mut times = vec![0.0];
    let mut log_survival = vec![0.0];
    for k in 1..=steps {
        let frac = fv.step(&mut rng, &mut parents)?;
        log_s += (-frac).ln_1p();
        if k % record_every == 0 {
            times.push(k as f64 * dt);
            log_survival.push(log_s);
        }
    }
    Ok(SurvivalCurve {
        times,
        log_survival,
    })
}

/// Decay rate −d/ds log P(τ_R > s) fitted on [t_lo, t_hi].
pub fn survival_rate(curve: &SurvivalCurve, t_lo: f64, t_hi: f64) -> Result<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .times
        .iter()
        .zip(&curve.log_survival)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .map(|(t, l)| (*t, *l))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::input("too few survival records in the fit window"));
    }
    let mut fit = linear_fit(&xs, &ys);
    fit.slope = -fit.slope;
    Ok(fit)
}

/// Radial occupation profile of paths conditioned to stay in Σ_R, normalized to 1.
/// Each Fleming–Viot particle carries the occupation histogram of its ancestry,
/// which is copied on resampling, so the average converges to the φ₀² law.
#[allow(clippy::too_many_arguments)]
pub fn confined_occupation(
    params: MetricParams,
    convention: DriftConvention,
    radius: f64,
    duration: f64,
    dt: f64,
    n_particles: usize,
    n_bins: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_bins == 0 {
        return Err(Error::input("need at least one bin"));
    }
    let steps = (duration / dt).round() as usize;
    let mut fv = FlemingViot::new(params, convention, radius, dt, n_particles);
    let mut hist = vec![vec![0.0; n_bins]; n_particles];
    let mut rng = stream(seed, 0);
    let mut parents = Vec::new();
    let bin = |r: f64| ((r / radius * n_bins as f64) as usize).min(n_bins - 1);
    for _ in 0..steps {
        for (i, h) in hist.iter_mut().enumerate() {
            h[bin(fv.rho[i])] += 1.0;
        }
        fv.step(&mut rng, &mut parents)?;
        for &(child, parent) in &parents {
            let src = hist[parent].clone();
            hist[child] = src;
        }
    }
    let mut out = vec![0.0; n_bins];
    for h in &hist {
        let total: f64 = h.iter().sum();
        for (o, v) in out.iter_mut().zip(h) {
            *o += v / total / n_particles as f64;
        }
    }
    Ok(out)
}

/// Heat kernel of ∂_s = Δ on ℍ³ (curvature −1).
pub fn h3_heat_kernel(s: f64, rho: f64) -> f64 {
    let ratio = if rho < 1e-8 { 1.0 } else { rho / rho.sinh() };
    (4.0 * core::f64::consts::PI * s).powf(-1.5) * ratio * (-s - rho * rho / (4.0 * s)).exp()
}

/// Heat kernel of ℍ³ with curvature −κ, by scaling the unit-curvature kernel.
pub fn h3_heat_kernel_kappa(s: f64, rho: f64, kappa: f64) -> f64 {
    kappa.powf(1.5) * h3_heat_kernel(kappa * s, kappa.sqrt() * rho)
}

/// Davies–Mandouvalos type upper envelope for the heat kernel of ℍ^d with curvature −κ.
pub fn dm_upper_bound(s: f64, rho: f64, kappa: f64, d: usize, c_d: f64) -> f64 {
    let dm1 = d as f64 - 1.0;
    let sk = kappa.sqrt();
    c_d * s.powf(-(d as f64) / 2.0)
        * (-dm1 * dm1 * kappa * s / 4.0 - rho * rho / (4.0 * s) - dm1 * sk * rho / 2.0).exp()
        * (1.0 + sk * rho + kappa * s).powf((d as f64 - 3.0) / 2.0)
        * (1.0 + sk * rho)
}

/// Smallest C₃ with h3_heat_kernel ≤ dm_upper_bound on the sweep, times (1 + 1e−9).
pub fn fit_dm_constant(ss: &[f64], rhos: &[f64]) -> f64 {
    let mut c: f64 = 0.0;
    for &s in ss {
        for &r in rhos {
            c = c.max(h3_heat_kernel(s, r) / dm_upper_bound(s, r, 1.0, 3, 1.0));
        }
    }
    c * (1.0 + 1e-9)
}

/// Number of points of `ss × rhos` where the bound falls below the ℍ³ kernel.
pub fn dm_violations(ss: &[f64], rhos: &[f64], c3: f64) -> usize {
    ss.iter()
        .flat_map(|&s| rhos.iter().map(move |&r| (s, r)))
        .filter(|&(s, r)| dm_upper_bound(s, r, 1.0, 3, c3) < h3_heat_kernel(s, r))
        .count()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeatKernelReport {
    pub s: f64,
    pub kappa: f64,
    pub bandwidth: f64,
    pub n_paths: usize,
    pub radii: Vec<f64>,
    pub estimate: Vec<f64>,
    pub reference: Vec<f64>,
    /// Predicted KDE error (bias + one standard deviation) in kernel units.
    pub kde_error: Vec<f64>,
    pub sup_discrepancy: f64,
    /// max |estimate − reference| / kde_error; the check passes at ≤ 3.
    pub sup_ratio: f64,
    /// Set when fewer than 10⁴ paths were supplied.
    pub widened: bool,
    pub passed: bool,
}

/// Compares a reflected Gaussian KDE of simulated radii at time `s` (d = 3,
/// α = √κ) with κ^{3/2} p₁(κs, √κ ρ), on radii where the reference radial
/// density exceeds 5% of its maximum.
pub fn heat_kernel_scaling_check(
    s: f64,
    kappa: f64,
    endpoints: &[f64],
) -> Result<HeatKernelReport> {
    let n = endpoints.len();
    if n < 100 || !(kappa > 0.0) || !(s > 0.0) {
        return Err(Error::input(
            "need at least 100 endpoints, kappa > 0, s > 0",
        ));
    }
    let alpha = kappa.sqrt();
    let shell = |r: f64| 4.0 * core::f64::consts::PI * radial_sinh(alpha, r).powi(2);
    let f_ref = |r: f64| h3_heat_kernel_kappa(s, r, kappa) * shell(r);
    let mean = endpoints.iter().sum::<f64>() / n as f64;
    let sd = (endpoints.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let h = 1.06 * sd * (n as f64).powf(-0.2);
    let r_max = endpoints.iter().cloned().fold(0.0, f64::max);
    let probe: Vec<f64> = (1..=400).map(|i| r_max * i as f64 / 400.0).collect();
    let f_max = probe.iter().map(|&r| f_ref(r)).fold(0.0, f64::max);
    let radii: Vec<f64> = probe
        .into_iter()
        .filter(|&r| f_ref(r) >= 0.05 * f_max)
        .step_by(8)
        .collect();
    let norm_k = 1.0 / ((2.0 * core::f64::consts::PI).sqrt() * n as f64 * h);
    let roughness = 1.0 / (2.0 * core::f64::consts::PI.sqrt());
    let mut estimate = Vec::with_capacity(radii.len());
    let mut reference = Vec::with_capacity(radii.len());
    let mut kde_error = Vec::with_capacity(radii.len());
    let mut sup_discrepancy: f64 = 0.0;
    let mut sup_ratio: f64 = 0.0;
    for &r in &radii {
        let mut f = 0.0;
        for &x in endpoints {
            let a = (r - x) / h;
            let b = (r + x) / h;
            f += (-0.5 * a * a).exp() + (-0.5 * b * b).exp();
        }
        f *= norm_k;
        let fr = f_ref(r);
        let e = 1e-3 * h.max(1e-3);
        let f2 = (f_ref(r + e) - 2.0 * fr + f_ref((r - e).max(0.0))) / (e * e);
        let err = 0.5 * h * h * f2.abs() + (fr * roughness / (n as f64 * h)).sqrt();
        let sh = shell(r);
        estimate.push(f / sh);
        reference.push(fr / sh);
        kde_error.push(err / sh);
        sup_discrepancy = sup_discrepancy.max((f - fr).abs() / sh);
        sup_ratio = sup_ratio.max((f - fr).abs() / err);
    }
    let widened = n < 10_000;
    let limit = if widened { 6.0 } else { 3.0 };
    Ok(HeatKernelReport {
        s,
        kappa,
        bandwidth: h,
        n_paths: n,
        radii,
        estimate,
        reference,
        kde_error,
        sup_discrepancy,
        sup_ratio,
        widened,
        passed: sup_ratio <= limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duration_and_no_exit() {
        let p = simulate_bm(
            Polar::planar(0.3, 0.0),
            MetricParams::euclidean(2),
            0.0,
            1e-3,
            DriftConvention::Paper,
            1,
        )
        .unwrap();
        assert_eq!(p.states.len(), 1);
        assert_eq!(exit_time(&p, f64::INFINITY), None);
        let q = simulate_bm(
            Polar::planar(0.0, 0.0),
            MetricParams::new(2, 1.0).unwrap(),
            1.0,
            1e-3,
            DriftConvention::Riemannian,
            2,
        )
        .unwrap();
        assert_eq!(exit_time(&q, f64::INFINITY), None);
        assert!(q.states.iter().all(|s| s.rho >= 0.0));
        assert!(simulate_bm(
            Polar::planar(0.0, 0.0),
            MetricParams::euclidean(2),
            1.0,
            0.2,
            DriftConvention::Paper,
            1
        )
        .is_err());
    }

    #[test]
    fn euclidean_msd_paper_convention() {
        // generator Δ in d = 2: E ρ_t² = 4t
        let p = MetricParams::new(2, 1e-6).unwrap();
        let r = mean_square_displacement(p, DriftConvention::Paper, &[0.5], 1e-3, 10_000, 7);
        let (m, se) = r[0];
        assert!(
            (m - 2.0).abs() < 0.1 && (m - 2.0).abs() < 4.0 * se,
            "{m} ± {se}"
        );
    }

    #[test]
    fn occupation_examples() {
        let still = PathSample {
            dt: 0.1,
            alpha: 1.0,
            convention: DriftConvention::Riemannian,
            states: vec![Polar::planar(0.5, 0.0); 5],
            saturated_steps: 0,
        };
        let bins = Bins::radial(1.0, 4);
        let occ = occupation_measure(&still, bins).unwrap();
        assert_eq!(occ.weights, vec![0.0, 0.0, 1.0, 0.0]);
        let mut states = vec![Polar::planar(0.1, 0.0); 2];
        states.extend(vec![Polar::planar(0.9, 0.0); 2]);
        states.push(Polar::planar(0.9, 0.0));
        let two = PathSample { states, ..still };
        let occ = occupation_measure(&two, bins).unwrap();
        assert_eq!(occ.weights, vec![0.5, 0.0, 0.0, 0.5]);
        let m = occ.to_discrete_measure(2).unwrap();
        assert!((m.atoms.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exit_probability_limits_and_monotonicity() {
        let p = MetricParams::new(2, 1.0).unwrap();
        let c = DriftConvention::Riemannian;
        let tiny = exit_probability(1e-3, 0.1, 200, p, c, 1e-3, 3).unwrap();
        assert_eq!(tiny.probability, 1.0);
        let far = exit_probability(50.0, 0.1, 200, p, c, 1e-3, 3).unwrap();
        assert!(far.upper_bound_only && far.probability < 0.02);
        let counts = exit_hit_counts(&[1.0, 1.5, 2.0], 0.5, p, c, 1e-3, 9, 0..2000);
        assert!(counts[0] >= counts[1] && counts[1] >= counts[2]);
        let split: Vec<u64> = exit_hit_counts(&[1.0], 0.5, p, c, 1e-3, 9, 0..700)
            .iter()
            .zip(exit_hit_counts(&[1.0], 0.5, p, c, 1e-3, 9, 700..2000))
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(split[0], counts[0]);
    }

    #[test]
    fn radial_marginal_matches_full_simulation() {
        // two-sample Kolmogorov–Smirnov test at 1%
        let p = MetricParams::new(3, 0.8).unwrap();
        let c = DriftConvention::Riemannian;
        let mut a = radial_endpoints(p, c, 0.5, 1e-3, 11, 0..1500);
        let mut b: Vec<f64> = (0..1500)
            .map(|k| {
                let start = Polar {
                    rho: 0.0,
                    sigma: vec![1.0, 0.0, 0.0],
                };
                let mut st = BmStepper::new(start, p, c, 1e-3).unwrap();
                let mut rng = stream(12, k);
                for _ in 0..500 {
                    st.step(&mut rng);
                }
                st.state.rho
            })
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut dmax) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            dmax = dmax.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        assert!(
            dmax < 1.63 * (2.0 / 1500.0f64).sqrt(),
            "KS statistic {dmax}"
        );
    }

    #[test]
    fn dm_bound_examples() {
        let g = dm_upper_bound(2.0, 1.5, 0.0, 3, 1.0);
        assert!((g - 2f64.powf(-1.5) * (-1.5f64 * 1.5 / 8.0).exp()).abs() < 1e-15);
        assert!((dm_upper_bound(1.0, 0.0, 1.0, 3, 2.0) - 2.0 / core::f64::consts::E).abs() < 1e-15);
        for &(s, r, k) in &[(0.3, 1.2, 2.5), (2.0, 0.4, 0.3)] {
            let lhs = dm_upper_bound(s, r, k, 3, 1.7);
            let rhs = k.powf(1.5) * dm_upper_bound(k * s, k.sqrt() * r, 1.0, 3, 1.7);
            assert!((lhs - rhs).abs() < 1e-12 * lhs);
        }
    }

    #[test]
    fn h3_kernel_is_a_probability_density() {
        // ∫ p₁(s, ρ) 4π sinh²ρ dρ = 1
        let s = 0.7;
        let v = crate::numerics::integrate(
            |r| h3_heat_kernel(s, r) * 4.0 * core::f64::consts::PI * r.sinh().powi(2),
            0.0,
            30.0,
            1e-12,
        );
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fleming_viot_rate_matches_flat_interval() {
        // d = 1 on [−R, R]: λ₀ = (π/2R)²
        let p = MetricParams::euclidean(1);
        let curve =
            fleming_viot_survival(p, DriftConvention::Riemannian, 1.0, 4.0, 1e-3, 2000, 50, 5)
                .unwrap();
        let fit = survival_rate(&curve, 1.0, 4.0).unwrap();
        let exact = (core::f64::consts::PI / 2.0).powi(2);
        assert!((fit.slope - exact).abs() / exact < 0.04, "{}", fit.slope);
    }
}
