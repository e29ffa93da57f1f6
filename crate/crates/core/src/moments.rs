//! Annealed moments m_p(t) = ⟨u(t,o)^p⟩ of the parabolic Anderson model through the
//! Gaussian path functional: the field is integrated out exactly, so each replicate
//! only needs p Brownian paths and the double time integral
//! ½ Σ_{i,j} ∫∫ Q(d(W^i_u, W^j_v)) du dv (trapezoid rule on the dt grid).

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::{CovarianceProfile, ProfileKind};
use crate::geometry::{chord_sq, polar_distance, radial_sinh, MetricParams, Polar};
use crate::numerics::{integrate, log_mean_exp_jackknife, sphere_volume};
use crate::rng::stream;
use crate::stochastic::{BmStepper, DriftConvention};

/// Monte Carlo settings shared by the estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McSettings {
    pub params: MetricParams,
    pub convention: DriftConvention,
    pub n_paths: u64,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentEstimate {
    pub p: usize,
    pub t: f64,
    /// Localization radius; `None` for the global moment.
    pub radius: Option<f64>,
    pub log_moment: f64,
    pub std_error: f64,
    pub n_paths: u64,
    /// Replicates removed by the confinement indicator.
    pub killed: u64,
    pub dt: f64,
    pub seed: u64,
    pub convention: DriftConvention,
    /// Set when every replicate was killed; `log_moment` is then a 95% upper bound.
    pub upper_bound_only: bool,
}

/// Trapezoid weights on k·dt, k = 0..n (n = 0 gives the empty rule).
fn trapezoid(n: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; n + 1];
    w[0] = 0.5 * dt;
    w[n] = 0.5 * dt;
    if n == 0 {
        w[0] = 0.0;
    }
    w
}

/// ½ Σ_{i,j} ∫∫ Q(d(W^i_u, W^j_v)) du dv for paths sampled on a common dt grid.
pub fn path_exponent(
    paths: &[Vec<Polar>],
    profile: &CovarianceProfile,
    alpha: f64,
    dt: f64,
) -> f64 {
    let n = paths.first().map_or(0, |p| p.len().saturating_sub(1));
    let w = trapezoid(n, dt);
    let constant = matches!(profile.kind, ProfileKind::Constant { .. });
    // sinh(αρ) once per node instead of once per pair
    let sh: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| p.iter().map(|z| (alpha * z.rho).sinh()).collect())
        .collect();
    let pair = |a: &Polar, sa: f64, b: &Polar, sb: f64| -> f64 {
        if constant {
            return profile.q(0.0);
        }
        let (x, y) = (alpha * a.rho, alpha * b.rho);
        if alpha == 0.0 || x + y >= 600.0 {
            return profile.q(polar_distance(alpha, a, b));
        }
        let half = (0.5 * (x - y)).sinh();
        let big = 2.0 * half * half + sa * sb * 0.5 * chord_sq(&a.sigma, &b.sigma);
        profile.q((2.0 / alpha) * (0.5 * big).sqrt().asinh())
    };
    let mut total = 0.0;
    for (i, a) in paths.iter().enumerate() {
        for (j, b) in paths.iter().enumerate().skip(i) {
            let mut s = 0.0;
            for (u, pa) in a.iter().enumerate() {
                let su = sh[i][u];
                let mut row = 0.0;
                if i == j {
                    // symmetric block: diagonal plus twice the strict upper triangle
                    row += 0.5 * w[u] * profile.q(0.0);
                    for (v, pb) in b.iter().enumerate().skip(u + 1) {
                        row += w[v] * pair(pa, su, pb, sh[j][v]);
                    }
                } else {
                    for (v, pb) in b.iter().enumerate() {
                        row += w[v] * pair(pa, su, pb, sh[j][v]);
                    }
                }
                s += 2.0 * w[u] * row;
            }
            total += s;
        }
    }
    0.5 * total
}

fn simulate_paths(
    start: &Polar,
    p: usize,
    t: f64,
    mc: &McSettings,
    replicate: u64,
) -> Result<Vec<Vec<Polar>>> {
    let steps = (t / mc.dt).round() as usize;
    let dt = if steps == 0 { mc.dt } else { t / steps as f64 };
    let mut rng = stream(mc.seed, replicate);
    (0..p)
        .map(|_| {
            let mut st = BmStepper::new(start.clone(), mc.params, mc.convention, dt)?;
            let mut path = Vec::with_capacity(steps + 1);
            path.push(st.state.clone());
            for _ in 0..steps {
                st.step(&mut rng);
                path.push(st.state.clone());
            }
            Ok(path)
        })
        .collect()
}

fn origin(d: usize) -> Polar {
    let mut sigma = vec![0.0; d];
    sigma[0] = 1.0;
    Polar { rho: 0.0, sigma }
}

/// Pathwise exponents for replicates `replicates` (−∞ when a path leaves Q_R).
/// Replicate k uses the stream (seed, k), so disjoint ranges can run anywhere.
#[allow(clippy::too_many_arguments)]
pub fn moment_exponents(
    start: &Polar,
    p: usize,
    t: f64,
    radius: Option<f64>,
    profile: &CovarianceProfile,
    mc: &McSettings,
    replicates: core::ops::Range<u64>,
) -> Result<Vec<f64>> {
    if p == 0 || !(t >= 0.0) {
        return Err(Error::input("need p >= 1 and t >= 0"));
    }
    if t > 0.0 && (t / mc.dt).round() > 4000.0 {
        return Err(Error::input("t/dt exceeds 4000 grid points per path"));
    }
    let steps = (t / mc.dt).round() as usize;
    let dt = if steps == 0 { 0.0 } else { t / steps as f64 };
    replicates
        .map(|k| {
            let paths = simulate_paths(start, p, t, mc, k)?;
            if let Some(r) = radius {
                if paths.iter().flatten().any(|s| s.rho >= r) {
                    return Ok(f64::NEG_INFINITY);
                }
            }
            Ok(path_exponent(&paths, profile, mc.params.alpha, dt))
        })
        .collect()
}

/// Aggregates exponents by log-mean-exp with a jackknife standard error.
#[allow(clippy::too_many_arguments)]
pub fn aggregate_moment(
    exponents: &[f64],
    p: usize,
    t: f64,
    radius: Option<f64>,
    profile: &CovarianceProfile,
    mc: &McSettings,
) -> MomentEstimate {
    let n = exponents.len() as u64;
    let killed = exponents
        .iter()
        .filter(|e| **e == f64::NEG_INFINITY)
        .count() as u64;
    let mut est = MomentEstimate {
        p,
        t,
        radius,
        log_moment: 0.0,
        std_error: 0.0,
        n_paths: n,
        killed,
        dt: mc.dt,
        seed: mc.seed,
        convention: mc.convention,
        upper_bound_only: false,
    };
    if killed == n {
        // m_R ≤ P(confined) e^{H(pt)} with the zero-hit bound on P(confined)
        let pt = p as f64 * t;
        est.log_moment =
            (1.0 - 0.05f64.powf(1.0 / n as f64)).ln() + 0.5 * profile.sigma2() * pt * pt;
        est.std_error = f64::INFINITY;
        est.upper_bound_only = true;
        return est;
    }
    let (v, se) = log_mean_exp_jackknife(exponents);
    est.log_moment = v;
    est.std_error = se;
    est
}

/// log m_p(t) (global when `radius` is `None`, localized to Q_R otherwise), started at o.
pub fn annealed_moment(
    p: usize,
    t: f64,
    radius: Option<f64>,
    profile: &CovarianceProfile,
    mc: &McSettings,
) -> Result<MomentEstimate> {
    let start = origin(mc.params.d);
    let e = moment_exponents(&start, p, t, radius, profile, mc, 0..mc.n_paths)?;
    Ok(aggregate_moment(&e, p, t, radius, profile, mc))
}

/// H(t) = σ² t² / 2.
pub fn h_of(t: f64, sigma2: f64) -> f64 {
    0.5 * sigma2 * t * t
}

/// One point of a ratio or probe curve.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub t: f64,
    pub value: f64,
    pub std_error: f64,
    pub log_moment: f64,
}

/// (t, log m_p / H(pt)).
pub fn first_order_point(est: &MomentEstimate, sigma2: f64) -> CurvePoint {
    let h = h_of(est.p as f64 * est.t, sigma2);
    CurvePoint {
        t: est.t,
        value: est.log_moment / h,
        std_error: est.std_error / h,
        log_moment: est.log_moment,
    }
}

/// (t, [log m_p − H(pt)] / β(pt)) with β(s) = s^{3/2}. A constant c added to the field
/// enters as `shift`: log m_p gains p c t and H gains c p t, which cancel.
pub fn second_order_point(est: &MomentEstimate, sigma2: f64, shift: f64) -> CurvePoint {
    let pt = est.p as f64 * est.t;
    let log_m = est.log_moment + shift * pt;
    let h = h_of(pt, sigma2) + shift * pt;
    let beta = pt.powf(1.5);
    CurvePoint {
        t: est.t,
        value: (log_m - h) / beta,
        std_error: est.std_error / beta,
        log_moment: log_m,
    }
}

pub fn first_order_ratio_curve(
    p: usize,
    t_grid: &[f64],
    profile: &CovarianceProfile,
    mc: &McSettings,
) -> Result<Vec<CurvePoint>> {
    check_increasing(t_grid)?;
    t_grid
        .iter()
        .map(|&t| {
            Ok(first_order_point(
                &annealed_moment(p, t, None, profile, mc)?,
                profile.sigma2(),
            ))
        })
        .collect()
}

pub fn second_order_probe(
    p: usize,
    t_grid: &[f64],
    profile: &CovarianceProfile,
    mc: &McSettings,
) -> Result<Vec<CurvePoint>> {
    check_increasing(t_grid)?;
    t_grid
        .iter()
        .map(|&t| {
            Ok(second_order_point(
                &annealed_moment(p, t, None, profile, mc)?,
                profile.sigma2(),
                0.0,
            ))
        })
        .collect()
}

fn check_increasing(ts: &[f64]) -> Result<()> {
    if ts.is_empty() || ts.windows(2).any(|w| !(w[1] > w[0])) || ts[0] <= 0.0 {
        return Err(Error::input(
            "t grid must be positive and strictly increasing",
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapEstimate {
    pub p: usize,
    pub q: usize,
    pub t: f64,
    pub gap: f64,
    pub std_error: f64,
}

/// (1/p) log m_p − (1/q) log m_q from two estimates with independent seeds.
pub fn gap_from(mp: &MomentEstimate, mq: &MomentEstimate) -> GapEstimate {
    let (p, q) = (mp.p as f64, mq.p as f64);
    GapEstimate {
        p: mp.p,
        q: mq.p,
        t: mp.t,
        gap: mp.log_moment / p - mq.log_moment / q,
        std_error: ((mp.std_error / p).powi(2) + (mq.std_error / q).powi(2)).sqrt(),
    }
}

pub fn intermittency_gap(
    p: usize,
    q: usize,
    t: f64,
    profile: &CovarianceProfile,
    mc: &McSettings,
) -> Result<GapEstimate> {
    if p < q || q == 0 {
        return Err(Error::input("need p >= q >= 1"));
    }
    let mp = annealed_moment(p, t, None, profile, mc)?;
    let other = McSettings {
        seed: mc.seed.wrapping_add(0x1000_0000),
        ..*mc
    };
    let mq = if p == q {
        mp.clone()
    } else {
        annealed_moment(q, t, None, profile, &other)?
    };
    Ok(gap_from(&mp, &mq))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointwiseReport {
    pub t: f64,
    pub radius: f64,
    /// log ⟨u_R(t,o)⟩.
    pub log_pointwise: f64,
    /// ⟨(u_R(t,·), 1)⟩, volume-weighted over radial strata.
    pub average: f64,
    pub volume: f64,
    /// Smallest C with ⟨u_R(t,o)⟩ ≤ C(2+R)^{1/2}(average + |Q_R|) + e^{−1}e^{H(t+1)}.
    pub minimal_c: f64,
}

/// Pointwise moment at o against the spatial integral over Q_R. By isotropy of the
/// field and of Q_R, ⟨u_R(t,x)⟩ depends on ρ(x) only, so `n_strata` radial shells
/// with one start each (at the shell midpoint) stratify the integral.
pub fn pointwise_vs_average_check(
    t: f64,
    radius: f64,
    profile: &CovarianceProfile,
    mc: &McSettings,
    n_strata: usize,
) -> Result<PointwiseReport> {
    if !(radius > 0.0) || n_strata == 0 {
        return Err(Error::input("need R > 0 and at least one stratum"));
    }
    let d = mc.params.d;
    let alpha = mc.params.alpha;
    let shell = |a: f64, b: f64| {
        sphere_volume(d - 1)
            * integrate(
                |r| radial_sinh(alpha, r).powi(d as i32 - 1),
                a,
                b,
                1e-12 * (b - a).max(1e-300),
            )
    };
    let pointwise = annealed_moment(1, t, Some(radius), profile, mc)?;
    let mut average = 0.0;
    for j in 0..n_strata {
        let (a, b) = (
            radius * j as f64 / n_strata as f64,
            radius * (j + 1) as f64 / n_strata as f64,
        );
        let mut start = origin(d);
        start.rho = 0.5 * (a + b);
        let sub = McSettings {
            seed: mc.seed.wrapping_add(1 + j as u64),
            ..*mc
        };
        let e = moment_exponents(&start, 1, t, Some(radius), profile, &sub, 0..mc.n_paths)?;
        let est = aggregate_moment(&e, 1, t, Some(radius), profile, &sub);
        if !est.upper_bound_only {
            average += shell(a, b) * est.log_moment.exp();
        }
    }
    let volume = shell(0.0, radius);
    let tail = (-1.0 + h_of(t + 1.0, profile.sigma2())).exp();
    let minimal_c = ((pointwise.log_moment.exp() - tail)
        / ((2.0 + radius).sqrt() * (average + volume)))
        .max(0.0);
    Ok(PointwiseReport {
        t,
        radius,
        log_pointwise: pointwise.log_moment,
        average,
        volume,
        minimal_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_profile, ProfileKind};

    fn mc(n: u64, dt: f64) -> McSettings {
        McSettings {
            params: MetricParams::new(2, 1.0).unwrap(),
            convention: DriftConvention::Riemannian,
            n_paths: n,
            dt,
            seed: 42,
        }
    }

    #[test]
    fn constant_profile_collapses() {
        let q = make_profile(ProfileKind::Constant { sigma2: 1.0 }).unwrap();
        let m = annealed_moment(2, 2.0, None, &q, &mc(20, 0.02)).unwrap();
        assert!((m.log_moment - 8.0).abs() < 1e-9);
        assert!(m.std_error < 1e-9);
        let g = intermittency_gap(2, 1, 2.0, &q, &mc(10, 0.02)).unwrap();
        assert!((g.gap - 2.0).abs() < 1e-9);
        let same = intermittency_gap(2, 2, 2.0, &q, &mc(10, 0.02)).unwrap();
        assert_eq!(same.gap, 0.0);
        let probe = second_order_point(&m, 1.0, 0.0);
        assert!(probe.value.abs() < 1e-9);
    }

    #[test]
    fn small_time_moment_vanishes() {
        let q = make_profile(ProfileKind::GaussianBump {
            sigma2: 1.0,
            ell: 1.0,
        })
        .unwrap();
        let m = annealed_moment(1, 0.01, None, &q, &mc(50, 0.001)).unwrap();
        assert!(m.log_moment.abs() < 1e-4);
    }

    #[test]
    fn localization_is_monotone_and_below_global() {
        let q = make_profile(ProfileKind::GaussianBump {
            sigma2: 1.0,
            ell: 1.0,
        })
        .unwrap();
        let s = mc(400, 0.02);
        let a = annealed_moment(1, 1.0, Some(1.0), &q, &s).unwrap();
        let b = annealed_moment(1, 1.0, Some(2.0), &q, &s).unwrap();
        let g = annealed_moment(1, 1.0, None, &q, &s).unwrap();
        assert!(a.log_moment <= b.log_moment && b.log_moment <= g.log_moment);
        assert!(a.killed >= b.killed);
    }

    #[test]
    fn exponent_is_exchangeable() {
        let q = make_profile(ProfileKind::GaussianBump {
            sigma2: 1.0,
            ell: 1.0,
        })
        .unwrap();
        let s = mc(1, 0.05);
        let paths = simulate_paths(&origin(2), 3, 1.0, &s, 7).unwrap();
        let e1 = path_exponent(&paths, &q, 1.0, 0.05);
        let perm = vec![paths[2].clone(), paths[0].clone(), paths[1].clone()];
        let e2 = path_exponent(&perm, &q, 1.0, 0.05);
        assert!((e1 - e2).abs() < 1e-12 * e1.abs());
        // Q ≥ 0 pointwise, so the exponent is nonnegative
        assert!(e1 >= 0.0);
    }

    #[test]
    fn trapezoid_double_integral_of_constant() {
        let q = make_profile(ProfileKind::Constant { sigma2: 2.0 }).unwrap();
        let paths = simulate_paths(&origin(2), 1, 0.7, &mc(1, 0.01), 0).unwrap();
        let e = path_exponent(&paths, &q, 1.0, 0.01);
        assert!((e - 0.5 * 2.0 * 0.49).abs() < 1e-12);
    }

    #[test]
    fn shift_bookkeeping_cancels() {
        let q = make_profile(ProfileKind::GaussianBump {
            sigma2: 1.0,
            ell: 1.0,
        })
        .unwrap();
        let m = annealed_moment(1, 1.0, None, &q, &mc(50, 0.05)).unwrap();
        let a = second_order_point(&m, 1.0, 0.0);
        let b = second_order_point(&m, 1.0, 3.7);
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn all_killed_reports_bound() {
        let q = make_profile(ProfileKind::Constant { sigma2: 1.0 }).unwrap();
        let m = annealed_moment(1, 1.0, Some(1e-6), &q, &mc(20, 0.05)).unwrap();
        assert!(m.upper_bound_only && m.log_moment.is_finite());
    }
}
