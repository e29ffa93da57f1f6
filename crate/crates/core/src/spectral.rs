//! Dirichlet eigenproblems for 𝓛^α + V on geodesic balls Σ_R.
//!
//! Second-order finite differences on cell-centred radial nodes
//! ρ_i = (i − ½)h with h = R/(n + ½), so the Dirichlet ghost sits exactly at
//! ρ = R and the zero-flux face at ρ = 0 encodes regularity at the origin.
//! The stiffness form ∫|∇u|² is assembled edge by edge with volume weights,
//! which makes the discrete operator symmetric in the weighted inner product
//! by construction. Eigenvalues are computed for the pencil (K − WV, W),
//! symmetrized with W^{−1/2}, by block shift-invert subspace iteration with a
//! banded Cholesky factor. Cholesky success certifies that a shift lies below
//! the spectrum, which is how shifts are tightened.
//!
//! Sign conventions: [`EigenSolveResult::lambda0`] is the smallest eigenvalue
//! of −(𝓛 + V) (increasing order); [`spectrum_head`] and the decomposition
//! check report eigenvalues of 𝓛 + V (decreasing order, maximizing).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{radial_sinh, MetricParams, Polar};
use crate::linalg::{
    dot, norm, orthonormalize, symmetric_eigen, tridiagonal_eigen, DenseMatrix, SymBand,
};
use crate::numerics::sphere_volume;
use crate::rng::stream;
use crate::stochastic::DriftConvention;

/// Grid families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GridKind {
    /// d = 1: the full interval [−R, R].
    Interval,
    /// Radially symmetric reduction, any d ≥ 2.
    Radial,
    /// d = 2: radial × equispaced periodic angular nodes.
    Polar,
}

/// Everything needed to rebuild a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub kind: GridKind,
    pub params: MetricParams,
    pub convention: DriftConvention,
    pub radius: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl GridSpec {
    pub fn interval(radius: f64, n: usize) -> Self {
        Self {
            kind: GridKind::Interval,
            params: MetricParams::euclidean(1),
            convention: DriftConvention::Riemannian,
            radius,
            n_r: n,
            n_theta: 1,
        }
    }

    pub fn radial(
        params: MetricParams,
        radius: f64,
        n: usize,
        convention: DriftConvention,
    ) -> Self {
        Self {
            kind: GridKind::Radial,
            params,
            convention,
            radius,
            n_r: n,
            n_theta: 1,
        }
    }

    pub fn polar(alpha: f64, radius: f64, n_r: usize, n_theta: usize) -> Self {
        Self {
            kind: GridKind::Polar,
            params: MetricParams { d: 2, alpha },
            convention: DriftConvention::Riemannian,
            radius,
            n_r,
            n_theta,
        }
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(*self)
    }
}

/// Nodes, quadrature weights and stiffness edges.
#[derive(Clone, Debug)]
pub struct Grid {
    pub spec: GridSpec,
    pub h: f64,
    /// ρ for radial/polar nodes, signed x for interval nodes.
    pub coord: Vec<f64>,
    /// Angle φ for polar nodes, 0 otherwise.
    pub angle: Vec<f64>,
    /// Quadrature weight W_i (∫u² ≈ Σ W_i u_i²).
    pub mass: Vec<f64>,
    /// Stiffness diagonal (sum of incident edge weights, Dirichlet ghosts included).
    pub stiff_diag: Vec<f64>,
    /// Edges (a, b, w) with a < b: contribution w (u_a − u_b)² to ∫|∇u|².
    pub edges: Vec<(usize, usize, f64)>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        if !(spec.radius > 0.0) || spec.n_r < 2 {
            return Err(Error::input("grid needs R > 0 and at least 2 radial nodes"));
        }
        match spec.kind {
            GridKind::Interval => Ok(Self::interval(spec)),
            GridKind::Radial => {
                if spec.params.d < 2 {
                    return Err(Error::input(
                        "radial grids need d >= 2; use an interval for d = 1",
                    ));
                }
                Ok(Self::radial(spec))
            }
            GridKind::Polar => {
                if spec.params.d != 2 || spec.n_theta < 4 {
                    return Err(Error::input(
                        "polar grids need d = 2 and at least 4 angular nodes",
                    ));
                }
                Ok(Self::polar(spec))
            }
        }
    }

    fn interval(spec: GridSpec) -> Self {
        let n = spec.n_r;
        let h = 2.0 * spec.radius / (n as f64 + 1.0);
        let coord: Vec<f64> = (0..n)
            .map(|i| -spec.radius + (i as f64 + 1.0) * h)
            .collect();
        let mut stiff_diag = vec![0.0; n];
        let mut edges = Vec::with_capacity(n);
        for i in 0..n - 1 {
            edges.push((i, i + 1, 1.0 / h));
            stiff_diag[i] += 1.0 / h;
            stiff_diag[i + 1] += 1.0 / h;
        }
        stiff_diag[0] += 1.0 / h;
        stiff_diag[n - 1] += 1.0 / h;
        Self {
            spec,
            h,
            coord,
            angle: vec![0.0; n],
            mass: vec![h; n],
            stiff_diag,
            edges,
        }
    }

    /// Radial weight J(ρ) = (α⁻¹ sinh αρ)^c with c from the drift convention.
    fn weight(spec: &GridSpec, rho: f64) -> f64 {
        let c = spec.convention.coefficient(spec.params.d);
        let s = radial_sinh(spec.params.alpha, rho);
        if c == 1.0 {
            s
        } else {
            s.powf(c)
        }
    }

    fn radial(spec: GridSpec) -> Self {
        let n = spec.n_r;
        let h = spec.radius / (n as f64 + 0.5);
        let omega = sphere_volume(spec.params.d - 1);
        let coord: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let mass: Vec<f64> = coord
            .iter()
            .map(|&r| omega * Self::weight(&spec, r) * h)
            .collect();
        let mut stiff_diag = vec![0.0; n];
        let mut edges = Vec::with_capacity(n);
        for i in 0..n {
            let w = omega * Self::weight(&spec, (i as f64 + 1.0) * h) / h;
            stiff_diag[i] += w;
            if i + 1 < n {
                stiff_diag[i + 1] += w;
                edges.push((i, i + 1, w));
            }
        }
        Self {
            spec,
            h,
            coord,
            angle: vec![0.0; n],
            mass,
            stiff_diag,
            edges,
        }
    }

    fn polar(spec: GridSpec) -> Self {
        let (nr, nt) = (spec.n_r, spec.n_theta);
        let h = spec.radius / (nr as f64 + 0.5);
        let dphi = 2.0 * core::f64::consts::PI / nt as f64;
        let total = nr * nt;
        let mut coord = vec![0.0; total];
        let mut angle = vec![0.0; total];
        let mut mass = vec![0.0; total];
        let mut stiff_diag = vec![0.0; total];
        let mut edges = Vec::with_capacity(2 * total);
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * h;
            let j_node = Self::weight(&spec, rho);
            let w_rad = Self::weight(&spec, (i as f64 + 1.0) * h) * dphi / h;
            let w_ang = h / (j_node * dphi);
            for j in 0..nt {
                let a = i * nt + j;
                coord[a] = rho;
                angle[a] = j as f64 * dphi;
                mass[a] = j_node * h * dphi;
                stiff_diag[a] += w_rad;
                if i + 1 < nr {
                    let b = a + nt;
                    stiff_diag[b] += w_rad;
                    edges.push((a, b, w_rad));
                }
                let b = i * nt + (j + 1) % nt;
                stiff_diag[a] += w_ang;
                stiff_diag[b] += w_ang;
                edges.push((a.min(b), a.max(b), w_ang));
            }
        }
        Self {
            spec,
            h,
            coord,
            angle,
            mass,
            stiff_diag,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Radial index and angular index of a node.
    pub fn indices(&self, node: usize) -> (usize, usize) {
        (node / self.spec.n_theta, node % self.spec.n_theta)
    }

    /// Polar coordinates of a node (interval nodes map to ρ = |x|, σ = sign).
    pub fn polar_point(&self, node: usize) -> Polar {
        match self.spec.kind {
            GridKind::Interval => {
                let x = self.coord[node];
                Polar {
                    rho: x.abs(),
                    sigma: vec![if x < 0.0 { -1.0 } else { 1.0 }],
                }
            }
            GridKind::Radial => {
                let mut sigma = vec![0.0; self.spec.params.d];
                sigma[0] = 1.0;
                Polar {
                    rho: self.coord[node],
                    sigma,
                }
            }
            GridKind::Polar => Polar::planar(self.coord[node], self.angle[node]),
        }
    }

    /// Euclidean position of a node in the flat chart (x for intervals, ρ for radial grids).
    pub fn position(&self, node: usize) -> Vec<f64> {
        match self.spec.kind {
            GridKind::Interval => vec![self.coord[node]],
            GridKind::Radial => vec![self.coord[node]],
            GridKind::Polar => {
                let (r, p) = (self.coord[node], self.angle[node]);
                vec![r * p.cos(), r * p.sin()]
            }
        }
    }

    /// ∫|∇u|² = Σ_edges w (u_a − u_b)² + boundary terms.
    pub fn dirichlet_energy(&self, u: &[f64]) -> f64 {
        let mut offsum = vec![0.0; self.len()];
        let mut s = 0.0;
        for &(a, b, w) in &self.edges {
            s += w * (u[a] - u[b]) * (u[a] - u[b]);
            offsum[a] += w;
            offsum[b] += w;
        }
        for i in 0..self.len() {
            s += (self.stiff_diag[i] - offsum[i]) * u[i] * u[i];
        }
        s
    }

    /// Σ W u v.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(u)
            .zip(v)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }
}

/// A grid plus a potential, serializable.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenProblem {
    pub spec: GridSpec,
    pub potential: Vec<f64>,
}

impl EigenProblem {
    pub fn new(spec: GridSpec, potential: Vec<f64>) -> Result<Self> {
        let grid = spec.build()?;
        if potential.len() != grid.len() {
            return Err(Error::input(format!(
                "potential has {} values for {} grid nodes",
                potential.len(),
                grid.len()
            )));
        }
        Ok(Self { spec, potential })
    }

    pub fn zero_potential(spec: GridSpec) -> Result<Self> {
        let n = spec.build()?.len();
        Ok(Self {
            spec,
            potential: vec![0.0; n],
        })
    }

    pub fn assemble(&self) -> Result<(Grid, Operator)> {
        let grid = self.spec.build()?;
        let op = assemble(&grid, &self.potential, None)?;
        Ok((grid, op))
    }
}

/// Discrete −(𝓛 + V) restricted to the active nodes, as the symmetrized matrix
/// B = W^{−1/2}(K − WV)W^{−1/2}.
#[derive(Clone, Debug)]
pub struct Operator {
    pub n_grid: usize,
    /// Grid node of each active index.
    pub nodes: Vec<usize>,
    pub mass: Vec<f64>,
    pub diag: Vec<f64>,
    /// (a, b, B_ab) for active indices a < b.
    pub off: Vec<(usize, usize, f64)>,
    pub bandwidth: usize,
}

/// Assembles −(𝓛 + V) on the nodes selected by `mask` (all nodes if `None`),
/// with Dirichlet conditions on every removed neighbour.
pub fn assemble(grid: &Grid, potential: &[f64], mask: Option<&[bool]>) -> Result<Operator> {
    let n_grid = grid.len();
    if potential.len() != n_grid || mask.is_some_and(|m| m.len() != n_grid) {
        return Err(Error::input("potential/mask length differs from the grid"));
    }
    let active = |i: usize| mask.map_or(true, |m| m[i]);
    let nt = grid.spec.n_theta;
    // angular offset: start each ring after the emptiest column so masked arcs stay contiguous
    let j0 = if mask.is_some() && grid.spec.kind == GridKind::Polar {
        let mut count = vec![0usize; nt];
        for i in 0..n_grid {
            if active(i) {
                count[i % nt] += 1;
            }
        }
        let jmin = (0..nt).min_by_key(|&j| count[j]).unwrap_or(0);
        (jmin + 1) % nt
    } else {
        0
    };
    let mut nodes: Vec<usize> = (0..n_grid).filter(|&i| active(i)).collect();
    if grid.spec.kind == GridKind::Polar {
        nodes.sort_by_key(|&a| (a / nt, (a % nt + nt - j0) % nt));
    }
    if nodes.is_empty() {
        return Err(Error::input("empty subdomain"));
    }
    let mut index = vec![usize::MAX; n_grid];
    for (k, &a) in nodes.iter().enumerate() {
        index[a] = k;
    }
    let mass: Vec<f64> = nodes.iter().map(|&a| grid.mass[a]).collect();
    let diag: Vec<f64> = nodes
        .iter()
        .map(|&a| (grid.stiff_diag[a] - grid.mass[a] * potential[a]) / grid.mass[a])
        .collect();
    let mut off = Vec::with_capacity(grid.edges.len());
    let mut bandwidth = 0;
    for &(a, b, w) in &grid.edges {
        let (ia, ib) = (index[a], index[b]);
        if ia == usize::MAX || ib == usize::MAX {
            continue;
        }
        let v = -w / (grid.mass[a] * grid.mass[b]).sqrt();
        let (lo, hi) = (ia.min(ib), ia.max(ib));
        bandwidth = bandwidth.max(hi - lo);
        off.push((lo, hi, v));
    }
    let op = Operator {
        n_grid,
        nodes,
        mass,
        diag,
        off,
        bandwidth,
    };
    let defect = op.symmetry_defect();
    if defect > 1e-10 {
        return Err(Error::construction(format!(
            "assembled operator not symmetric (defect {defect:e})"
        )));
    }
    Ok(op)
}

impl Operator {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// y = B x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(a, b, v) in &self.off {
            y[a] += v * x[b];
            y[b] += v * x[a];
        }
        y
    }

    /// Transposed product with the edge roles swapped, used to audit symmetry.
    fn apply_transposed(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(a, b, v) in self.off.iter().rev() {
            y[b] += v * x[a];
            y[a] += v * x[b];
        }
        y
    }

    /// |⟨x, By⟩ − ⟨Bᵀx, y⟩| / (‖B‖ ‖x‖ ‖y‖) on two fixed probe vectors.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.len();
        let x: Vec<f64> = (0..n)
            .map(|i| ((i as f64) * 0.618_033_988_7).fract() - 0.5)
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| ((i as f64) * 0.414_213_562_4 + 0.1).fract() - 0.5)
            .collect();
        let by = self.apply(&y);
        let btx = self.apply_transposed(&x);
        let scale = self.norm_bound() * norm(&x) * norm(&y) + 1e-300;
        (dot(&x, &by) - dot(&btx, &y)).abs() / scale
    }

    /// Gershgorin bounds (lower, upper) on the spectrum of B.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut radius = vec![0.0; self.len()];
        for &(a, b, v) in &self.off {
            radius[a] += v.abs();
            radius[b] += v.abs();
        }
        let lo = self
            .diag
            .iter()
            .zip(&radius)
            .map(|(d, r)| d - r)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .diag
            .iter()
            .zip(&radius)
            .map(|(d, r)| d + r)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    fn shifted_band(&self, sigma: f64) -> SymBand {
        let mut band = SymBand::zeros(self.len(), self.bandwidth.max(1));
        for (i, d) in self.diag.iter().enumerate() {
            band.add(i, i, d - sigma);
        }
        for &(a, b, v) in &self.off {
            band.add(b, a, v);
        }
        band
    }

    fn dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, d) in self.diag.iter().enumerate() {
            m.set(i, i, *d);
        }
        for &(a, b, v) in &self.off {
            m.set(a, b, m.get(a, b) + v);
            m.set(b, a, m.get(b, a) + v);
        }
        m
    }

    /// Maps a symmetrized vector x to the grid function u = W^{−1/2}x (zero off the mask).
    pub fn to_grid(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_grid];
        for (k, &a) in self.nodes.iter().enumerate() {
            u[a] = x[k] / self.mass[k].sqrt();
        }
        u
    }

    /// Tridiagonal form (diag, off) when the active nodes form a chain.
    fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.bandwidth > 1 {
            return None;
        }
        let mut off = vec![0.0; self.len().saturating_sub(1)];
        for &(a, b, v) in &self.off {
            if b != a + 1 {
                return None;
            }
            off[a] += v;
        }
        Some((self.diag.clone(), off))
    }
}

/// Lowest eigenpairs of an operator (ascending), eigenvectors in symmetrized form.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// ‖Bx − θx‖ / max(|θ|, 1) per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// The k lowest eigenpairs of B by block shift-invert subspace iteration.
pub fn lowest_pairs(op: &Operator, k: usize) -> Result<EigenPairs> {
    let n = op.len();
    if k == 0 || k > n {
        return Err(Error::input("requested number of eigenpairs out of range"));
    }
    if n <= 64 {
        return dense_pairs(op, k);
    }
    let p = n.min((2 * k + 2).max(k + 6));
    let bnorm = op.norm_bound();
    let floor = 50.0 * f64::EPSILON * bnorm;
    let tol = |theta: f64| (1e-11 * theta.abs().max(1.0)).max(floor);

    // deterministic start block: u ≡ 1 first, then a fixed pseudo-random stream
    let mut rng = stream(0x5eed_0001, n as u64);
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(p);
    x.push(op.mass.iter().map(|w| w.sqrt()).collect());
    for _ in 1..p {
        x.push((0..n).map(|_| rng.random::<f64>() - 0.5).collect());
    }
    orthonormalize(&mut x);

    let (glo, _) = op.gershgorin();
    let mut sigma = glo - 1.0 - 1e-6 * glo.abs();
    let mut factor = None;
    for _ in 0..20 {
        match op.shifted_band(sigma).cholesky() {
            Ok(f) => {
                factor = Some(f);
                break;
            }
            Err(_) => sigma -= 2.0 * (sigma.abs() + 1.0),
        }
    }
    let mut factor =
        factor.ok_or_else(|| Error::construction("no positive definite shift found"))?;

    let mut history = Vec::new();
    let mut reshifts = 0;
    let max_iter = 600;
    for it in 1..=max_iter {
        for col in x.iter_mut() {
            factor.solve_in_place(col);
        }
        orthonormalize(&mut x);
        let bx: Vec<Vec<f64>> = x.iter().map(|c| op.apply(c)).collect();
        let mut h = DenseMatrix::zeros(p);
        for i in 0..p {
            for j in i..p {
                let v = 0.5 * (dot(&x[i], &bx[j]) + dot(&x[j], &bx[i]));
                h.set(i, j, v);
                h.set(j, i, v);
            }
        }
        let (theta, s) = symmetric_eigen(&h);
        let rotate = |cols: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..p)
                .map(|c| {
                    let mut out = vec![0.0; n];
                    for (q, col) in cols.iter().enumerate() {
                        let coef = s[c][q];
                        if coef != 0.0 {
                            for (o, v) in out.iter_mut().zip(col) {
                                *o += coef * v;
                            }
                        }
                    }
                    out
                })
                .collect()
        };
        x = rotate(&x);
        let bxr = rotate(&bx);
        let res: Vec<f64> = (0..p)
            .map(|c| {
                let r: f64 = bxr[c]
                    .iter()
                    .zip(&x[c])
                    .map(|(a, b)| (a - theta[c] * b) * (a - theta[c] * b))
                    .sum();
                r.sqrt()
            })
            .collect();
        history.push(res[0]);
        if (0..k).all(|c| res[c] <= tol(theta[c])) {
            let residuals = (0..k).map(|c| res[c] / theta[c].abs().max(1.0)).collect();
            let vectors = (0..k).map(|c| normalize_sign(x[c].clone())).collect();
            return Ok(EigenPairs {
                values: theta[..k].to_vec(),
                vectors,
                residuals,
                iterations: it,
            });
        }
        // tighten the shift toward θ₀ when that clearly speeds convergence
        if reshifts < 8 && it >= 2 {
            let top = theta[p - 1];
            let cand = theta[0] - (2.0 * res[0]).max(0.02 * (top - theta[0]));
            let q_old = (theta[0] - sigma) / (top - sigma);
            let q_new = (theta[0] - cand) / (top - cand);
            if cand > sigma && q_new < 0.5 * q_old {
                if let Ok(f) = op.shifted_band(cand).cholesky() {
                    factor = f;
                    sigma = cand;
                    reshifts += 1;
                }
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residuals: history,
    })
}

fn dense_pairs(op: &Operator, k: usize) -> Result<EigenPairs> {
    let m = op.dense();
    let (vals, vecs) = symmetric_eigen(&m);
    let residuals = (0..k)
        .map(|c| {
            let bx = m.apply(&vecs[c]);
            let r: f64 = bx
                .iter()
                .zip(&vecs[c])
                .map(|(a, b)| (a - vals[c] * b).powi(2))
                .sum();
            r.sqrt() / vals[c].abs().max(1.0)
        })
        .collect();
    let vectors = vecs.into_iter().take(k).map(normalize_sign).collect();
    Ok(EigenPairs {
        values: vals[..k].to_vec(),
        vectors,
        residuals,
        iterations: 1,
    })
}

/// Fixes the sign so the coordinate sum is positive (largest entry if the sum vanishes).
fn normalize_sign(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    let flip = if s.abs() > 1e-8 * norm(&v) * (v.len() as f64).sqrt() {
        s < 0.0
    } else {
        let big = v
            .iter()
            .cloned()
            .fold(0.0, |acc: f64, x| if x.abs() > acc.abs() { x } else { acc });
        big < 0.0
    };
    if flip {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    v
}

/// Principal pair of −(𝓛 + V).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenSolveResult {
    /// Smallest eigenvalue of −(𝓛 + V).
    pub lambda0: f64,
    /// Second eigenvalue, for the spectral gap.
    pub lambda1: f64,
    /// Ground state on the full grid, positive, Σ W φ₀² = 1.
    pub phi0: Vec<f64>,
    pub spectrum_head: Option<Vec<f64>>,
    pub residual: f64,
    pub phi0_positive: bool,
    /// Always "-(L+V), increasing" for this type.
    pub convention: &'static str,
}

pub fn principal_eig(op: &Operator) -> Result<EigenSolveResult> {
    let k = if op.len() >= 2 { 2 } else { 1 };
    let pairs = lowest_pairs(op, k)?;
    let phi0 = op.to_grid(&pairs.vectors[0]);
    let phi0_positive = pairs.vectors[0].iter().all(|&v| v > 0.0);
    Ok(EigenSolveResult {
        lambda0: pairs.values[0],
        lambda1: *pairs.values.get(1).unwrap_or(&f64::INFINITY),
        phi0,
        spectrum_head: None,
        residual: pairs.residuals[0],
        phi0_positive,
        convention: "-(L+V), increasing",
    })
}

/// The k largest eigenvalues of 𝓛 + V (decreasing), i.e. minus the k smallest of the operator.
pub fn spectrum_head(op: &Operator, k: usize) -> Result<Vec<f64>> {
    if k > op.len() / 10 + 1 {
        return Err(Error::input("spectrum head needs k <= grid size / 10"));
    }
    Ok(lowest_pairs(op, k)?.values.iter().map(|v| -v).collect())
}

/// Per-probe output of [`log_asymptotic_slope`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopeProbe {
    pub beta: f64,
    pub position: f64,
    /// (1/β) log v(β, x).
    pub value: f64,
    /// value + λ₀.
    pub deviation: f64,
    /// ∂_β log v(β, x).
    pub slope: f64,
    /// slope + λ₀.
    pub slope_deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopeReport {
    pub lambda0: f64,
    pub lambda1: f64,
    pub probes: Vec<SlopeProbe>,
    /// e^{−(λ₁−λ₀)β} ≤ 1e−6 for every β.
    pub horizon_ok: bool,
}

/// Solves ∂_s v = (𝓛 + V)v, v(0) = 1, by the full discrete spectral expansion
/// and evaluates (1/β) log v at nodes with coordinate ≤ `probe_max` (1-D grids only).
pub fn log_asymptotic_slope(
    problem: &EigenProblem,
    betas: &[f64],
    probe_max: f64,
) -> Result<SlopeReport> {
    let (grid, op) = problem.assemble()?;
    if grid.spec.kind == GridKind::Polar {
        return Err(Error::input(
            "log_asymptotic_slope needs a 1-D (radial or interval) problem",
        ));
    }
    let (d, e) = op
        .tridiagonal()
        .ok_or_else(|| Error::construction("expected a tridiagonal operator"))?;
    let (vals, vecs) = tridiagonal_eigen(&d, &e)?;
    let sqrt_w: Vec<f64> = op.mass.iter().map(|w| w.sqrt()).collect();
    // c_n = ⟨φ_n, 1⟩_W with φ_n = W^{−1/2} y_n
    let coef: Vec<f64> = vecs.iter().map(|y| dot(y, &sqrt_w)).collect();
    let l0 = vals[0];
    let l1 = vals[1];
    let mut probes = Vec::new();
    let mut horizon_ok = true;
    for &beta in betas {
        if (-(l1 - l0) * beta).exp() > 1e-6 {
            horizon_ok = false;
        }
        for (i, &x) in grid.coord.iter().enumerate() {
            if x.abs() > probe_max {
                continue;
            }
            let mut s = 0.0;
            let mut ds = 0.0;
            for (n, y) in vecs.iter().enumerate() {
                let decay = (-(vals[n] - l0) * beta).exp();
                if decay == 0.0 {
                    continue;
                }
                let term = decay * coef[n] * y[i] / sqrt_w[i];
                s += term;
                ds -= vals[n] * term;
            }
            let value = -l0 + s.ln() / beta;
            let slope = ds / s;
            probes.push(SlopeProbe {
                beta,
                position: x,
                value,
                deviation: value + l0,
                slope,
                slope_deviation: slope + l0,
            });
        }
    }
    Ok(SlopeReport {
        lambda0: l0,
        lambda1: l1,
        probes,
        horizon_ok,
    })
}

/// Λ(f) = λ₀^{eu;R} − λ₀^{eu;f,R} on a flat grid.
pub fn lambda_functional(grid: &Grid, f: &[f64]) -> Result<f64> {
    if grid.spec.params.alpha != 0.0 {
        return Err(Error::input("lambda_functional needs a Euclidean grid"));
    }
    let zero = vec![0.0; grid.len()];
    let l0 = principal_eig(&assemble(grid, &zero, None)?)?.lambda0;
    let lf = principal_eig(&assemble(grid, f, None)?)?.lambda0;
    Ok(l0 - lf)
}

/// −Σ W g u², the derivative of δ ↦ λ₀^{eu; f+δg, R} at δ = 0.
pub fn eig_derivative(grid: &Grid, f: &[f64], g: &[f64]) -> Result<f64> {
    let res = principal_eig(&assemble(grid, f, None)?)?;
    Ok(-grid
        .mass
        .iter()
        .zip(g)
        .zip(&res.phi0)
        .map(|((w, gi), u)| w * gi * u * u)
        .sum::<f64>())
}

/// Rayleigh quotient (∫|∇ψ|² − ∫Vψ²)/∫ψ² of −(𝓛+V) for a grid function.
pub fn rayleigh_quotient(grid: &Grid, potential: &[f64], psi: &[f64]) -> f64 {
    let e = grid.dirichlet_energy(psi);
    let pv: f64 = grid
        .mass
        .iter()
        .zip(potential)
        .zip(psi)
        .map(|((w, v), p)| w * v * p * p)
        .sum();
    (e - pv) / grid.inner(psi, psi)
}

/// A partition of unity sampled on a grid.
#[derive(Clone, Debug)]
pub struct GridPartition {
    /// φ_m at every grid node, one vector per cell.
    pub phi: Vec<Vec<f64>>,
    /// Φ = Σ_m |∇φ_m|² at every grid node.
    pub gradient_sum: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecompositionReport {
    /// λ^{V−Φ}(D) (eigenvalue of 𝓛 + V − Φ, maximizing convention).
    pub lhs: f64,
    /// sup_m λ^V(D_m).
    pub rhs: f64,
    /// lhs − rhs; the inequality holds when ≤ 1e−6.
    pub gap: f64,
    pub cells: usize,
    pub holds: bool,
}

/// Checks λ^{V−Φ}(D) ≤ sup_m λ^V(D_m) with D_m = {φ_m > 0}.
pub fn decomposition_inequality_check(
    grid: &Grid,
    potential: &[f64],
    partition: &GridPartition,
) -> Result<DecompositionReport> {
    let n = grid.len();
    if potential.len() != n
        || partition.gradient_sum.len() != n
        || partition.phi.iter().any(|p| p.len() != n)
    {
        return Err(Error::input(
            "partition or potential does not match the grid",
        ));
    }
    for i in 0..n {
        let s: f64 = partition.phi.iter().map(|p| p[i] * p[i]).sum();
        if (s - 1.0).abs() > 1e-8 || partition.gradient_sum[i] < 0.0 {
            return Err(Error::input(format!(
                "partition invariant violated at node {i} (sum of squares {s})"
            )));
        }
    }
    if partition
        .phi
        .iter()
        .flatten()
        .any(|&v| !(0.0..=1.0 + 1e-12).contains(&v))
    {
        return Err(Error::input("partition values must lie in [0, 1]"));
    }
    // Edge form of the sacrifice: Σ_m E(φ_m ψ) = E(ψ) + Σ_edges w ψ_a ψ_b Σ_m (φ_m(a) − φ_m(b))²,
    // and ψ_a ψ_b ≤ (ψ_a² + ψ_b²)/2 bounds the last term by a nodal potential. Subtracting the
    // larger of this and the sampled Φ keeps the discrete inequality exact.
    let mut discrete = vec![0.0; n];
    for &(a, b, w) in &grid.edges {
        let jump: f64 = partition
            .phi
            .iter()
            .map(|p| (p[a] - p[b]) * (p[a] - p[b]))
            .sum();
        discrete[a] += 0.5 * w * jump;
        discrete[b] += 0.5 * w * jump;
    }
    let shifted: Vec<f64> = (0..n)
        .map(|i| potential[i] - partition.gradient_sum[i].max(discrete[i] / grid.mass[i]))
        .collect();
    let lhs = -principal_eig(&assemble(grid, &shifted, None)?)?.lambda0;
    let mut rhs = f64::NEG_INFINITY;
    for phi in &partition.phi {
        let mask: Vec<bool> = phi.iter().map(|&v| v > 0.0).collect();
        if !mask.iter().any(|&m| m) {
            continue;
        }
        let val = -principal_eig(&assemble(grid, potential, Some(&mask))?)?.lambda0;
        rhs = rhs.max(val);
    }
    let gap = lhs - rhs;
    Ok(DecompositionReport {
        lhs,
        rhs,
        gap,
        cells: partition.phi.len(),
        holds: gap <= 1e-6,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingReport {
    /// β(t) λ_k^{ξ_t}(Σ_R) for k = 0, 1, 2.
    pub scaled: Vec<f64>,
    /// t λ_k(Σ_{Rα}) − H(t).
    pub reference: Vec<f64>,
    /// max_k |scaled − reference| / max(|reference|, 1).
    pub max_relative_deviation: f64,
}

/// Compares β λ_k^{ξ_t}(Σ_R, g^t) with t λ_k(Σ_{Rα}, g¹) − H on matched grids.
/// `unit_grid` is a polar grid of Σ_{Rα(t)} at α = 1 carrying the raw field values;
/// `scaled_grid` is its dilated image on Σ_R at α(t) carrying ξ_t.
pub fn eigen_scaling_check(
    unit_grid: &Grid,
    raw_values: &[f64],
    scaled_grid: &Grid,
    rescaled_values: &[f64],
    t: f64,
    h: f64,
    k: usize,
) -> Result<ScalingReport> {
    let alpha = t.powf(-0.25);
    let beta = t / (alpha * alpha);
    if unit_grid.len() != scaled_grid.len()
        || unit_grid.spec.kind != scaled_grid.spec.kind
        || (unit_grid.spec.params.alpha - 1.0).abs() > 1e-15
        || (scaled_grid.spec.params.alpha - alpha).abs() > 1e-12 * alpha
    {
        return Err(Error::input(
            "grid mismatch between the unit and rescaled problems",
        ));
    }
    for i in 0..unit_grid.len() {
        let expect = unit_grid.coord[i] / alpha;
        if (scaled_grid.coord[i] - expect).abs() > 1e-10 * expect.max(1.0)
            || (scaled_grid.angle[i] - unit_grid.angle[i]).abs() > 1e-12
        {
            return Err(Error::input("grid mismatch: nodes are not dilated images"));
        }
    }
    let unit = spectrum_head(&assemble(unit_grid, raw_values, None)?, k)?;
    let scaled = spectrum_head(&assemble(scaled_grid, rescaled_values, None)?, k)?;
    let scaled: Vec<f64> = scaled.iter().map(|l| beta * l).collect();
    let reference: Vec<f64> = unit.iter().map(|l| t * l - h).collect();
    let max_relative_deviation = scaled
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    Ok(ScalingReport {
        scaled,
        reference,
        max_relative_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BESSEL_J0_FIRST_ZERO;

    fn solve(spec: GridSpec) -> EigenSolveResult {
        let (_, op) = EigenProblem::zero_potential(spec)
            .unwrap()
            .assemble()
            .unwrap();
        principal_eig(&op).unwrap()
    }

    #[test]
    fn disk_ground_state_matches_bessel_zero() {
        let r = solve(GridSpec::polar(0.0, 2.0, 400, 64));
        let exact = (BESSEL_J0_FIRST_ZERO / 2.0).powi(2);
        assert!((r.lambda0 - exact).abs() / exact < 0.005, "{}", r.lambda0);
        assert!(r.phi0_positive);
        assert!(r.lambda1 > r.lambda0);
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn interval_spectrum() {
        let spec = GridSpec::interval(2.0, 400);
        let r = solve(spec);
        assert!((r.lambda0 - 0.61685).abs() / 0.61685 < 0.005);
        let (_, op) = EigenProblem::zero_potential(spec)
            .unwrap()
            .assemble()
            .unwrap();
        let head = spectrum_head(&op, 5).unwrap();
        for (k, l) in head.iter().enumerate() {
            let exact = -((k as f64 + 1.0) * core::f64::consts::PI / 4.0).powi(2);
            assert!(
                (l - exact).abs() / exact.abs() < 0.01,
                "{k}: {l} vs {exact}"
            );
        }
        assert!((head[0] + r.lambda0).abs() < 1e-10);
    }

    #[test]
    fn constant_potential_shifts_exactly() {
        let spec = GridSpec::polar(0.3, 1.5, 60, 24);
        let base = solve(spec);
        let n = spec.build().unwrap().len();
        let p = EigenProblem::new(spec, vec![0.7; n]).unwrap();
        let r = principal_eig(&p.assemble().unwrap().1).unwrap();
        assert!((r.lambda0 - (base.lambda0 - 0.7)).abs() < 1e-9);
    }

    #[test]
    fn radial_oracles() {
        // flat 3-ball: (π/R)²
        let r = solve(GridSpec::radial(
            MetricParams::euclidean(3),
            1.0,
            800,
            DriftConvention::Riemannian,
        ));
        assert!((r.lambda0 - core::f64::consts::PI.powi(2)).abs() / 9.87 < 1e-4);
        // ℍ³ ball: 1 + (π/R)²
        let h = solve(GridSpec::radial(
            MetricParams::new(3, 1.0).unwrap(),
            2.0,
            800,
            DriftConvention::Riemannian,
        ));
        let exact = 1.0 + (core::f64::consts::PI / 2.0).powi(2);
        assert!((h.lambda0 - exact).abs() / exact < 1e-4, "{}", h.lambda0);
        // radial reduction agrees with the polar grid in d = 2
        let p = solve(GridSpec::polar(0.5, 2.0, 200, 32));
        let q = solve(GridSpec::radial(
            MetricParams::new(2, 0.5).unwrap(),
            2.0,
            200,
            DriftConvention::Riemannian,
        ));
        assert!((p.lambda0 - q.lambda0).abs() < 1e-9);
    }

    #[test]
    fn weighted_normalization_and_rayleigh() {
        let spec = GridSpec::polar(0.2, 2.0, 80, 32);
        let grid = spec.build().unwrap();
        let r = solve(spec);
        assert!((grid.inner(&r.phi0, &r.phi0) - 1.0).abs() < 1e-12);
        let zero = vec![0.0; grid.len()];
        assert!((rayleigh_quotient(&grid, &zero, &r.phi0) - r.lambda0).abs() < 1e-9);
    }

    #[test]
    fn lambda_functional_shift_and_zero() {
        let grid = GridSpec::polar(0.0, 1.0, 40, 16).build().unwrap();
        let zero = vec![0.0; grid.len()];
        assert!(lambda_functional(&grid, &zero).unwrap().abs() < 1e-12);
        let c = vec![0.4; grid.len()];
        assert!((lambda_functional(&grid, &c).unwrap() - 0.4).abs() < 1e-9);
        let one = vec![1.0; grid.len()];
        assert!((eig_derivative(&grid, &zero, &one).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(eig_derivative(&grid, &zero, &zero).unwrap(), 0.0);
    }

    #[test]
    fn slope_reproduces_initial_condition_and_limit() {
        let p = EigenProblem::zero_potential(GridSpec::radial(
            MetricParams::euclidean(2),
            2.0,
            200,
            DriftConvention::Riemannian,
        ))
        .unwrap();
        let early = log_asymptotic_slope(&p, &[1e-9], 1.8).unwrap();
        assert!(!early.horizon_ok);
        for q in &early.probes {
            assert!((q.value * q.beta).abs() < 1e-6, "v(0) should be 1");
        }
        let rep = log_asymptotic_slope(&p, &[40.0], 1.8).unwrap();
        for q in &rep.probes {
            assert!(q.slope_deviation.abs() < 1e-10);
        }
        assert!(rep.horizon_ok);
    }

    #[test]
    fn masked_subdomain_is_dirichlet_restriction() {
        let grid = GridSpec::polar(0.0, 2.0, 60, 32).build().unwrap();
        let zero = vec![0.0; grid.len()];
        let inner: Vec<bool> = grid.coord.iter().map(|&r| r < 1.0).collect();
        let full = principal_eig(&assemble(&grid, &zero, None).unwrap())
            .unwrap()
            .lambda0;
        let sub = principal_eig(&assemble(&grid, &zero, Some(&inner)).unwrap())
            .unwrap()
            .lambda0;
        assert!(sub > 3.0 * full);
        let arc: Vec<bool> = (0..grid.len())
            .map(|i| grid.angle[i] > 5.0 || grid.angle[i] < 1.0)
            .collect();
        let op = assemble(&grid, &zero, Some(&arc)).unwrap();
        assert!(
            op.bandwidth < 20,
            "arc ordering should keep the band narrow"
        );
    }
}
