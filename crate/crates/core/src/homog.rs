//! Effective Hamiltonians of periodic Hamilton–Jacobi equations: the 1D
//! action-integral formula, a discounted cell-problem solver, inf-sup upper
//! bounds and the certificates attached to sampled tables.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::dynamics::{compose_hamiltonian, symplectic_defect, SymplecticMap};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::io::{fmt_e12, Csv};
use crate::quad;
use crate::symbol::PhaseSpaceFunction;
use crate::torus::{default_extrema, FourierPotential};

/// Slack accepted by the table certificates.
pub const CERT_TOL: f64 = 1e-6;

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `J(E) = (2π)^{-1} ∫ √(2(E − V(x))) dx` for a 1D potential, `E ≥ max V`.
#[derive(Clone, Debug)]
pub struct ActionIntegral {
    pot: FourierPotential,
    max_v: f64,
    /// Refined local maxima of V, sorted, the global one first.
    maxima: Vec<f64>,
}

impl ActionIntegral {
    pub fn new(pot: &FourierPotential) -> Result<Self> {
        if pot.dim() != 1 {
            return Err(Error::invalid("the action integral is defined for 1D potentials"));
        }
        let res = (64 * pot.bandwidth()).max(256);
        let h = TAU / res as f64;
        let vals = pot.grid_values(res);
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mut maxima: Vec<(f64, f64)> = Vec::new();
        if hi - lo > 0.0 {
            for i in 0..res {
                let (l, c, r) = (vals[(i + res - 1) % res], vals[i], vals[(i + 1) % res]);
                if c >= l && c >= r && c > lo + 0.5 * (hi - lo) {
                    let xc = i as f64 * h;
                    let xm = golden_max(|x| pot.eval(&[x]), xc - h, xc + h);
                    maxima.push((crate::torus::wrap_angle(xm), pot.eval(&[xm])));
                }
            }
        }
        maxima.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        maxima.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9);
        let max_v = maxima.first().map_or(hi, |m| m.1.max(hi));
        Ok(ActionIntegral {
            pot: pot.clone(),
            max_v,
            maxima: maxima.into_iter().map(|m| m.0).collect(),
        })
    }

    /// `max V`, refined beyond the grid by golden-section search.
    pub fn max_v(&self) -> f64 {
        self.max_v
    }

    pub fn eval(&self, e: f64) -> Result<f64> {
        if e < self.max_v - 1e-12 {
            return Err(Error::BelowMaxPotential { energy: e, max_v: self.max_v });
        }
        let e = e.max(self.max_v);
        let x0 = self.maxima.first().copied().unwrap_or(0.0);
        let mut breaks: Vec<f64> = self
            .maxima
            .iter()
            .map(|&m| x0 + (m - x0).rem_euclid(TAU))
            .collect();
        breaks.push(x0);
        breaks.push(x0 + TAU);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let f = |x: f64| (2.0 * (e - self.pot.eval(&[x])).max(0.0)).sqrt();
        Ok(quad::integrate_with_breaks(f, &breaks, 1e-13) / TAU)
    }

    /// Plateau half-width `J(max V)`.
    pub fn threshold(&self) -> f64 {
        self.eval(self.max_v).expect("max V is admissible")
    }

    /// `H̄(P)`: `max V` on `|P| ≤ J(max V)`, otherwise `J^{-1}(|P|)`.
    pub fn effective(&self, p: f64) -> f64 {
        if self.pot.bandwidth() == 0 {
            return self.max_v + 0.5 * p * p;
        }
        let target = p.abs();
        if target <= self.threshold() + 1e-12 {
            return self.max_v;
        }
        // J(E) ≥ √(2(E − max V)) bounds the root by max V + P²/2
        let mut lo = self.max_v;
        let mut hi = self.max_v + 0.5 * target * target;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let j = self.eval(mid).expect("above max V");
            if (j - target).abs() <= 1e-12 * (1.0 + target) || hi - lo <= 1e-15 * (1.0 + hi.abs()) {
                return mid;
            }
            if j < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub fn action_j(pot: &FourierPotential, e: f64) -> Result<f64> {
    ActionIntegral::new(pot)?.eval(e)
}

/// Closed-form 1D effective Hamiltonian.
pub fn effective_1d(pot: &FourierPotential, p: f64) -> Result<f64> {
    Ok(ActionIntegral::new(pot)?.effective(p))
}

/// Monotone numerical Hamiltonian of the cell-problem discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellScheme {
    /// Exact Riemann-problem flux for Hamiltonians convex in p.
    Godunov,
    /// Central flux with artificial viscosity.
    LaxFriedrichs,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellParams {
    /// Nodes per axis.
    pub grid: usize,
    /// Discount factors, extrapolated linearly to zero.
    pub deltas: Vec<f64>,
    /// Target for `sup |F|` of the discounted scheme.
    pub tol: f64,
    pub max_sweeps: usize,
    pub scheme: CellScheme,
    /// Momentum step used to tabulate non-mechanical 1D symbols.
    pub p_step: f64,
    /// Seed of the inf-sup pattern search.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

impl Default for CellParams {
    fn default() -> Self {
        CellParams {
            grid: 64,
            deltas: vec![4e-4, 2e-4, 1e-4],
            tol: 1e-11,
            max_sweeps: 100_000,
            scheme: CellScheme::Godunov,
            p_step: 0.02,
            seed: default_seed(),
        }
    }
}

/// Newton iterations per discount factor before falling back to sweeps.
const NEWTON_MAX_ITER: usize = 200;
/// First discount factor of the continuation ladder.
const CONTINUATION_START: f64 = 0.1;
/// Newton residual accepted when the iteration stalls at roundoff level.
const NEWTON_STALL: f64 = 1e-8;

/// Residual above which the cell iteration counts as failed at the sweep cap.
pub const CELL_FAIL_RESIDUAL: f64 = 1e-6;

/// Discrete corrector `u` on the uniform grid, mean zero.
#[derive(Clone, Debug, Serialize)]
pub struct Corrector {
    pub p: Vec<f64>,
    pub grid: usize,
    pub values: Vec<f64>,
    /// `sup |Ĥ(x, P + Du) − H̄|` of the undiscounted scheme.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSolution {
    pub hbar_eff: f64,
    pub corrector: Corrector,
    /// `(δ, −δ·mean u_δ)` for each discount.
    pub discounted: Vec<(f64, f64)>,
    /// Newton steps plus any fallback Gauss–Seidel sweeps.
    pub iterations: usize,
}

/// Per-node Hamiltonian data for the scheme.
enum NodeModel {
    Mechanical { v: Vec<f64> },
    Tabulated(Box<Table1d>),
    General { sym: PhaseSpaceFunction, xs: Vec<Vec<f64>> },
}

struct Table1d {
    sym: PhaseSpaceFunction,
    xs: Vec<f64>,
    p0: f64,
    dp: f64,
    vals: Vec<Vec<f64>>,
    pstar: Vec<f64>,
}

impl Table1d {
    /// Catmull–Rom value and derivative; direct evaluation off the table.
    fn eval(&self, node: usize, p: f64) -> (f64, f64) {
        let row = &self.vals[node];
        let s = (p - self.p0) / self.dp;
        let k = s.floor() as isize;
        if k < 1 || k as usize + 2 >= row.len() {
            let e = 1e-6;
            let x = [self.xs[node]];
            let f = self.sym.eval(&x, &[p]);
            let d = (self.sym.eval(&x, &[p + e]) - self.sym.eval(&x, &[p - e])) / (2.0 * e);
            return (f, d);
        }
        let k = k as usize;
        let t = s - k as f64;
        let (y0, y1, y2, y3) = (row[k - 1], row[k], row[k + 1], row[k + 2]);
        let m1 = 0.5 * (y2 - y0);
        let m2 = 0.5 * (y3 - y1);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y1 + (t3 - 2.0 * t2 + t) * m1 + (-2.0 * t3 + 3.0 * t2) * y2 + (t3 - t2) * m2;
        let dv = (6.0 * t2 - 6.0 * t) * y1 + (3.0 * t2 - 4.0 * t + 1.0) * m1 + (-6.0 * t2 + 6.0 * t) * y2 + (3.0 * t2 - 2.0 * t) * m2;
        (v, dv / self.dp)
    }
}

struct Lattice {
    n: usize,
    g: usize,
    dx: f64,
    strides: Vec<usize>,
    /// `[left, right]` neighbour per node and axis.
    nbr: Vec<usize>,
    /// Visiting order of each sweep direction (bit a reverses axis a).
    orders: Vec<Vec<usize>>,
}

impl Lattice {
    fn new(n: usize, g: usize) -> Self {
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * g;
        }
        let total = g.pow(n as u32);
        let coord = |node: usize, a: usize| (node / strides[a]) % g;
        let mut nbr = Vec::with_capacity(total * 2 * n);
        for node in 0..total {
            for a in 0..n {
                let c = coord(node, a);
                let base = node - c * strides[a];
                nbr.push(base + (c + g - 1) % g * strides[a]);
                nbr.push(base + (c + 1) % g * strides[a]);
            }
        }
        let orders = (0..1usize << n)
            .map(|o| {
                (0..total)
                    .map(|t| {
                        (0..n)
                            .map(|a| {
                                let c = coord(t, a);
                                let c = if o >> a & 1 == 1 { g - 1 - c } else { c };
                                c * strides[a]
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Lattice {
            n,
            g,
            dx: TAU / g as f64,
            strides,
            nbr,
            orders,
        }
    }

    fn len(&self) -> usize {
        self.g.pow(self.n as u32)
    }

    #[inline]
    fn left(&self, node: usize, axis: usize) -> usize {
        self.nbr[(node * self.n + axis) * 2]
    }

    #[inline]
    fn right(&self, node: usize, axis: usize) -> usize {
        self.nbr[(node * self.n + axis) * 2 + 1]
    }

    fn point(&self, node: usize) -> Vec<f64> {
        (0..self.n)
            .map(|a| ((node / self.strides[a]) % self.g) as f64 * self.dx)
            .collect()
    }
}

struct Scheme<'a> {
    lat: &'a Lattice,
    model: &'a NodeModel,
    p: &'a [f64],
    kind: CellScheme,
    sigma: Vec<f64>,
    /// Level `c` in `δw + Ĥ(w) = c`, so that `u = w − c/δ` keeps `w` small.
    target: f64,
}

impl Scheme<'_> {
    /// Numerical Hamiltonian at `node` with `u_node = u` and neighbours from
    /// `field`; returns the value and its derivative in `u`. With `jac`, the
    /// derivatives in the neighbour values are appended as `(node, ∂Ĥ)`.
    fn node_h(&self, field: &[f64], node: usize, u: f64) -> (f64, f64) {
        self.node_h_jac(field, node, u, None)
    }

    fn node_h_jac(&self, field: &[f64], node: usize, u: f64, mut jac: Option<&mut Vec<(usize, f64)>>) -> (f64, f64) {
        let lat = self.lat;
        let n = lat.n;
        let dx = lat.dx;
        let mut push = |j: usize, d: f64| {
            if let Some(out) = jac.as_deref_mut() {
                out.push((j, d));
            }
        };
        match self.kind {
            CellScheme::Godunov => match self.model {
                NodeModel::Mechanical { v } => {
                    let mut h = v[node];
                    let mut dh = 0.0;
                    for a in 0..n {
                        let (li, ri) = (lat.left(node, a), lat.right(node, a));
                        let pa = self.p[a] + (u - field[li]) / dx;
                        let pb = self.p[a] + (field[ri] - u) / dx;
                        let left = pa.max(0.0);
                        let right = pb.min(0.0);
                        if left * left >= right * right {
                            h += 0.5 * left * left;
                            dh += left / dx;
                            push(li, -left / dx);
                        } else {
                            h += 0.5 * right * right;
                            dh -= right / dx;
                            push(ri, right / dx);
                        }
                    }
                    (h, dh)
                }
                NodeModel::Tabulated(t) => {
                    let (li, ri) = (lat.left(node, 0), lat.right(node, 0));
                    let pa = self.p[0] + (u - field[li]) / dx;
                    let pb = self.p[0] + (field[ri] - u) / dx;
                    let ps = t.pstar[node];
                    let (h1, d1) = if pa > ps { t.eval(node, pa) } else { (t.eval(node, ps).0, 0.0) };
                    let (h2, d2) = if pb < ps { t.eval(node, pb) } else { (t.eval(node, ps).0, 0.0) };
                    if h1 >= h2 {
                        push(li, -d1 / dx);
                        (h1, d1 / dx)
                    } else {
                        push(ri, d2 / dx);
                        (h2, -d2 / dx)
                    }
                }
                NodeModel::General { .. } => unreachable!("Godunov needs a mechanical or 1D symbol"),
            },
            CellScheme::LaxFriedrichs => {
                let mut pc = vec![0.0; n];
                let mut visc = 0.0;
                let mut dvisc = 0.0;
                for a in 0..n {
                    let l = field[lat.left(node, a)];
                    let r = field[lat.right(node, a)];
                    pc[a] = self.p[a] + (r - l) / (2.0 * dx);
                    visc += 0.5 * self.sigma[a] * (r - 2.0 * u + l) / dx;
                    dvisc -= self.sigma[a] / dx;
                }
                let mut hp = vec![0.0; n];
                let h = match self.model {
                    NodeModel::Mechanical { v } => {
                        hp.copy_from_slice(&pc);
                        v[node] + 0.5 * pc.iter().map(|q| q * q).sum::<f64>()
                    }
                    NodeModel::Tabulated(t) => {
                        let (f, d) = t.eval(node, pc[0]);
                        hp[0] = d;
                        f
                    }
                    NodeModel::General { sym, xs } => {
                        let mut gx = vec![0.0; n];
                        sym.gradient(&xs[node], &pc, &mut gx, &mut hp);
                        sym.eval(&xs[node], &pc)
                    }
                };
                for a in 0..n {
                    push(lat.right(node, a), (hp[a] - self.sigma[a]) / (2.0 * dx));
                    push(lat.left(node, a), (-hp[a] - self.sigma[a]) / (2.0 * dx));
                }
                (h - visc, -dvisc)
            }
        }
    }

    /// Semismooth Newton (policy iteration) on `F(u) = δu + Ĥ(u)`. `F` is a
    /// convex M-function, so full steps from a supersolution decrease
    /// monotonically. Returns the iteration count and final residual, `None`
    /// if the iteration stalls far from a solution.
    fn newton(&self, field: &mut [f64], delta: f64, tol: f64) -> Option<(usize, f64)> {
        let total = self.lat.len();
        let mut res = vec![0.0; total];
        self.residuals(field, delta, &mut res);
        let lift = res.iter().copied().fold(f64::INFINITY, f64::min).min(0.0) / delta;
        field.iter_mut().for_each(|u| *u -= lift);
        let mut trip = Vec::with_capacity(total * (2 * self.lat.n + 1));
        let mut row = Vec::with_capacity(2 * self.lat.n);
        let mut last = f64::INFINITY;
        for it in 0..NEWTON_MAX_ITER {
            trip.clear();
            for node in 0..total {
                row.clear();
                let (h, dh) = self.node_h_jac(field, node, field[node], Some(&mut row));
                res[node] = delta * field[node] + h - self.target;
                trip.push(Triplet::new(node, node, delta + dh));
                trip.extend(row.iter().map(|&(j, d)| Triplet::new(node, j, d)));
            }
            let norm = res.iter().map(|r| r.abs()).fold(0.0, f64::max);
            if !norm.is_finite() {
                return None;
            }
            if norm <= tol {
                return Some((it, norm));
            }
            if norm <= NEWTON_STALL && norm > 0.5 * last {
                // roundoff floor of the current level
                return Some((it, norm));
            }
            last = norm;
            let jac = SparseColMat::<usize, f64>::try_new_from_triplets(total, total, &trip).ok()?;
            let lu = jac.sp_lu().ok()?;
            let rhs = Mat::<f64>::from_fn(total, 1, |i, _| -res[i]);
            let step = lu.solve(&rhs);
            let start = field.to_vec();
            let mut scale = 1.0;
            loop {
                for (i, u) in field.iter_mut().enumerate() {
                    *u = start[i] + scale * step[(i, 0)];
                }
                self.residuals(field, delta, &mut res);
                if res.iter().all(|r| r.is_finite()) {
                    break;
                }
                // symbols built from flows are NaN where the flow escapes
                scale *= 0.5;
                if scale < 1e-6 {
                    return None;
                }
            }
        }
        None
    }

    /// Solve `δu + Ĥ(u) = 0` at one node; Ĥ is non-decreasing, so the root
    /// lies within `|F(u0)|/δ` of `u0`.
    fn solve_node(&self, field: &[f64], node: usize, delta: f64) -> f64 {
        match (self.kind, self.model) {
            (CellScheme::Godunov, NodeModel::Mechanical { v }) => return self.eikonal_update(field, node, delta, v[node] - self.target),
            (CellScheme::LaxFriedrichs, _) => {
                // Ĥ is affine in u: central momenta ignore the node itself
                let (h0, slope) = self.node_h(field, node, 0.0);
                return (self.target - h0) / (delta + slope);
            }
            _ => {}
        }
        let u0 = field[node];
        let f = |u: f64| {
            let (h, dh) = self.node_h(field, node, u);
            (delta * u + h - self.target, delta + dh)
        };
        let (f0, _) = f(u0);
        if f0 == 0.0 {
            return u0;
        }
        let span = f0.abs() / delta;
        let (mut lo, mut hi) = if f0 > 0.0 { (u0 - span, u0) } else { (u0, u0 + span) };
        let mut u = u0;
        for _ in 0..100 {
            let (fu, du) = f(u);
            if fu.abs() <= 1e-15 * (1.0 + (delta * u).abs()) {
                return u;
            }
            if fu > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let newton = u - fu / du;
            u = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        u
    }

    /// Mechanical Godunov node equation `δu + V + Σ((u − m_a)⁺)²/(2Δx²) = 0`
    /// with `m_a = min(L_a − P_aΔx, R_a + P_aΔx)`, solved exactly.
    fn eikonal_update(&self, field: &[f64], node: usize, delta: f64, v: f64) -> f64 {
        let lat = self.lat;
        let dx = lat.dx;
        let mut m = [0.0f64; 8];
        let n = lat.n;
        let mut ms: Vec<f64>;
        let m = if n <= 8 {
            &mut m[..n]
        } else {
            ms = vec![0.0; n];
            &mut ms[..]
        };
        for a in 0..n {
            let l = field[lat.left(node, a)];
            let r = field[lat.right(node, a)];
            m[a] = (l - self.p[a] * dx).min(r + self.p[a] * dx);
        }
        m.sort_by(f64::total_cmp);
        let free = -v / delta;
        if free <= m[0] {
            return free;
        }
        // in y = u − m_0 the constant term δm_0 + V stays O(residual)
        let w = 1.0 / (dx * dx);
        let base = delta * m[0] + v;
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut y = 0.0;
        for k in 0..n {
            let d = m[k] - m[0];
            s1 += d;
            s2 += d * d;
            let a = 0.5 * w * (k + 1) as f64;
            let b = delta - w * s1;
            let c = base + 0.5 * w * s2;
            let disc = (b * b - 4.0 * a * c).max(0.0);
            y = if b <= 0.0 { (-b + disc.sqrt()) / (2.0 * a) } else { -2.0 * c / (b + disc.sqrt()) };
            if k + 1 == n || y <= m[k + 1] - m[0] {
                break;
            }
        }
        m[0] + y
    }

    fn residuals(&self, field: &[f64], delta: f64, out: &mut [f64]) {
        for (node, r) in out.iter_mut().enumerate() {
            *r = delta * field[node] + self.node_h(field, node, field[node]).0 - self.target;
        }
    }

    /// Discounted solve by alternating Gauss–Seidel sweeps. Only the
    /// non-constant part of the residual is iterated to tolerance; since
    /// `F(u + c) = F(u) + δc`, one final shift removes its mean.
    fn discounted(&self, field: &mut [f64], delta: f64, tol: f64, max_sweeps: usize) -> Result<usize> {
        let total = self.lat.len();
        let orderings = self.lat.orders.len();
        let mut res = vec![0.0; total];
        let mut last = f64::INFINITY;
        let mut done = max_sweeps;
        for sweep in 0..max_sweeps {
            for &node in &self.lat.orders[sweep % orderings] {
                field[node] = self.solve_node(field, node, delta);
            }
            if (sweep + 1) % orderings != 0 && sweep + 1 != max_sweeps {
                continue;
            }
            self.residuals(field, delta, &mut res);
            let mean = res.iter().sum::<f64>() / total as f64;
            last = res.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max);
            if !last.is_finite() {
                return Err(Error::NotConverged {
                    residual: last,
                    iterations: sweep + 1,
                });
            }
            if last <= tol {
                done = sweep + 1;
                break;
            }
        }
        if last > tol && last > CELL_FAIL_RESIDUAL {
            return Err(Error::NotConverged {
                residual: last,
                iterations: max_sweeps,
            });
        }
        let mean = res.iter().sum::<f64>() / total as f64;
        field.iter_mut().for_each(|u| *u -= mean / delta);
        Ok(done)
    }
}

fn build_model(h: &PhaseSpaceFunction, ps: &[Vec<f64>], lat: &Lattice, params: &CellParams) -> Result<NodeModel> {
    if let Some(v) = h.mechanical_potential() {
        let vals = (0..lat.len()).map(|i| v.eval(&lat.point(i))).collect();
        return Ok(NodeModel::Mechanical { v: vals });
    }
    let xs: Vec<Vec<f64>> = (0..lat.len()).map(|i| lat.point(i)).collect();
    if lat.n == 1 {
        // momenta reached by P + Du stay inside the probe box
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in ps {
            let radius = probe_radius(h, p, &xs);
            lo = lo.min(p[0] - radius);
            hi = hi.max(p[0] + radius);
        }
        let p0 = lo;
        let count = ((hi - lo) / params.p_step).ceil() as usize + 1;
        let rows: Vec<(Vec<f64>, f64)> = xs
            .par_iter()
            .map(|x| {
                let vals: Vec<f64> = (0..count).map(|k| h.eval(x, &[p0 + k as f64 * params.p_step])).collect();
                if vals.iter().any(|v| !v.is_finite()) {
                    return (vals, f64::NAN);
                }
                let kmin = (1..count - 1)
                    .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
                    .expect("table has interior points");
                (vals, p0 + kmin as f64 * params.p_step)
            })
            .collect();
        let mut table = Table1d {
            sym: h.clone(),
            xs: xs.iter().map(|x| x[0]).collect(),
            p0,
            dp: params.p_step,
            vals: Vec::with_capacity(rows.len()),
            pstar: Vec::with_capacity(rows.len()),
        };
        for (vals, ps) in rows {
            if !ps.is_finite() {
                return Err(Error::invalid("symbol is not finite on the tabulation box"));
            }
            table.vals.push(vals);
            table.pstar.push(ps);
        }
        for node in 0..table.pstar.len() {
            let ps = table.pstar[node];
            let dp = table.dp;
            table.pstar[node] = golden_max(|q| -table.eval(node, q).0, ps - dp, ps + dp);
        }
        return Ok(NodeModel::Tabulated(Box::new(table)));
    }
    if params.scheme == CellScheme::Godunov {
        return Err(Error::invalid(
            "the Godunov scheme supports mechanical symbols in any dimension and general symbols in 1D only",
        ));
    }
    Ok(NodeModel::General { sym: h.clone(), xs })
}

/// Radius of the momentum box `|P| + √(2(E_up − H_lo)) + 1`, with `E_up`
/// the value of the inf-sup objective at `v = 0` and `H_lo` a sampled lower
/// bound of the symbol.
fn probe_radius(h: &PhaseSpaceFunction, p: &[f64], xs: &[Vec<f64>]) -> f64 {
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let e_up = xs.iter().map(|x| h.eval(x, p)).fold(f64::NEG_INFINITY, f64::max);
    let span = pn + 6.0;
    let mut h_lo = f64::INFINITY;
    for x in xs.iter().step_by((xs.len() / 32).max(1)) {
        for k in 0..=120 {
            let q: Vec<f64> = p.iter().map(|_| -span + 2.0 * span * k as f64 / 120.0).collect();
            h_lo = h_lo.min(h.eval(x, &q));
        }
    }
    pn + (2.0 * (e_up - h_lo).max(0.0)).sqrt() + 1.0
}

fn lf_sigma(h: &PhaseSpaceFunction, p: &[f64], lat: &Lattice) -> Vec<f64> {
    let xs: Vec<Vec<f64>> = (0..lat.len()).step_by((lat.len() / 256).max(1)).map(|i| lat.point(i)).collect();
    let radius = probe_radius(h, p, &xs);
    if h.mechanical_potential().is_some() {
        return vec![radius; p.len()];
    }
    let n = p.len();
    let mut sigma = vec![0.0f64; n];
    let (mut gx, mut ge) = (vec![0.0; n], vec![0.0; n]);
    for x in &xs {
        for k in 0..=64 {
            let q: Vec<f64> = (0..n).map(|_| -radius + 2.0 * radius * k as f64 / 64.0).collect();
            h.gradient(x, &q, &mut gx, &mut ge);
            for a in 0..n {
                sigma[a] = sigma[a].max(ge[a].abs());
            }
        }
    }
    sigma
}

/// Cell-problem solver with the node data prepared once for a set of P.
pub struct CellSolver {
    h: PhaseSpaceFunction,
    params: CellParams,
    lat: Lattice,
    model: NodeModel,
}

impl CellSolver {
    /// `ps` lists the slopes to be solved; non-mechanical 1D symbols are
    /// tabulated on a momentum range covering all of them.
    pub fn new(h: &PhaseSpaceFunction, params: &CellParams, ps: &[Vec<f64>]) -> Result<Self> {
        if let Some(p) = ps.iter().find(|p| p.len() != h.dim()) {
            return Err(Error::DimensionMismatch { expected: h.dim(), got: p.len() });
        }
        if params.grid < 32 {
            return Err(Error::invalid("cell problem grid needs at least 32 nodes per axis"));
        }
        if params.deltas.len() < 2 || params.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::invalid("need at least two positive discount factors"));
        }
        if !(params.tol > 0.0 && params.p_step > 0.0) {
            return Err(Error::invalid("tolerance and momentum step must be positive"));
        }
        let lat = Lattice::new(h.dim(), params.grid);
        let model = build_model(h, ps, &lat, params)?;
        Ok(CellSolver {
            h: h.clone(),
            params: params.clone(),
            lat,
            model,
        })
    }

    /// `H̄(P)` from the vanishing-discount limit of `δu_δ + Ĥ(x, P + Du_δ) = 0`.
    pub fn solve(&self, p: &[f64]) -> Result<CellSolution> {
        if p.len() != self.h.dim() {
            return Err(Error::DimensionMismatch { expected: self.h.dim(), got: p.len() });
        }
        let params = &self.params;
        let sigma = if params.scheme == CellScheme::LaxFriedrichs {
            lf_sigma(&self.h, p, &self.lat)
        } else {
            vec![0.0; p.len()]
        };
        let total = self.lat.len();
        let mut scheme = Scheme {
            lat: &self.lat,
            model: &self.model,
            p,
            kind: params.scheme,
            sigma,
            target: 0.0,
        };
        let zero = vec![0.0; total];
        let (lo, hi) = (0..total)
            .map(|node| scheme.node_h(&zero, node, 0.0).0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), h| (a.min(h), b.max(h)));
        scheme.target = 0.5 * (lo + hi);
        let mut deltas = params.deltas.clone();
        deltas.sort_by(|a, b| b.total_cmp(a));
        // continuation from a strongly discounted problem keeps Newton steps
        // of order one
        let mut ladder = Vec::new();
        let mut d = CONTINUATION_START;
        while d > deltas[0] * 1.5 {
            ladder.push((d, false));
            d *= 0.25;
        }
        ladder.extend(deltas.iter().map(|&d| (d, true)));
        let mut field = vec![0.0; total];
        let mut discounted = Vec::new();
        let mut sweeps = 0;
        for &(delta, keep) in &ladder {
            let mut c = scheme.target;
            for round in 0..4 {
                // re-centre: the level moves into the target
                let mean = field.iter().sum::<f64>() / total as f64;
                field.iter_mut().for_each(|w| *w -= mean);
                let backup = field.clone();
                let mut reached = true;
                match scheme.newton(&mut field, delta, params.tol) {
                    Some((it, norm)) => {
                        sweeps += it;
                        reached = norm <= params.tol;
                    }
                    None => {
                        field = backup;
                        sweeps += scheme.discounted(&mut field, delta, params.tol, params.max_sweeps)?;
                    }
                }
                let mean = field.iter().sum::<f64>() / total as f64;
                c = scheme.target - delta * mean;
                if (reached && (delta * mean).abs() <= 1e-3) || round == 3 {
                    break;
                }
                scheme.target = c;
            }
            if keep {
                discounted.push((delta, c));
            }
            scheme.target = c;
        }
        let xs: Vec<f64> = discounted.iter().map(|d| d.0).collect();
        let ys: Vec<f64> = discounted.iter().map(|d| d.1).collect();
        let hbar_eff = linear_fit(&xs, &ys).1;
        let mean = field.iter().sum::<f64>() / total as f64;
        field.iter_mut().for_each(|u| *u -= mean);
        let residual = (0..total)
            .map(|node| (scheme.node_h(&field, node, field[node]).0 - hbar_eff).abs())
            .fold(0.0, f64::max);
        Ok(CellSolution {
            hbar_eff,
            corrector: Corrector {
                p: p.to_vec(),
                grid: params.grid,
                values: field,
                residual,
            },
            discounted,
            iterations: sweeps,
        })
    }
}

/// One-shot [`CellSolver`].
pub fn cell_problem_solve(h: &PhaseSpaceFunction, p: &[f64], params: &CellParams) -> Result<CellSolution> {
    CellSolver::new(h, params, &[p.to_vec()])?.solve(p)
}

/// Uniform momentum grid `−pmax, −pmax + ΔP, …, pmax` on every axis.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PGrid {
    pub pmax: f64,
    pub dp: f64,
}

impl PGrid {
    pub fn axis(&self) -> Result<Vec<f64>> {
        if !(self.pmax >= 0.0 && self.dp > 0.0) {
            return Err(Error::invalid("P grid needs pmax ≥ 0 and dp > 0"));
        }
        let steps = (self.pmax / self.dp + 1e-9).floor() as i64;
        if (steps as f64 * self.dp - self.pmax).abs() > 1e-9 * (1.0 + self.pmax) {
            return Err(Error::invalid("pmax must be a multiple of dp so that the grid is symmetric"));
        }
        Ok((-steps..=steps).map(|i| i as f64 * self.dp).collect())
    }

    /// Tensor grid points, last axis fastest.
    pub fn points(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        let axis = self.axis()?;
        let m = axis.len();
        Ok((0..m.pow(dim as u32))
            .map(|flat| {
                let mut rem = flat;
                let mut pt = vec![0.0; dim];
                for v in pt.iter_mut().rev() {
                    *v = axis[rem % m];
                    rem /= m;
                }
                pt
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectiveMethod {
    ClosedForm,
    CellProblem,
    InfSupUpper,
}

impl EffectiveMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            EffectiveMethod::ClosedForm => "closed-form",
            EffectiveMethod::CellProblem => "cell-problem",
            EffectiveMethod::InfSupUpper => "inf-sup-upper",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificates {
    pub convex: bool,
    pub convexity_defect: f64,
    pub even_defect: f64,
    /// Violation of `max V ≤ H̄ ≤ ½|P|² + max V`; zero when `max V` is unknown.
    pub bound_defect: f64,
}

impl Certificates {
    pub fn hold(&self) -> bool {
        self.convex && self.even_defect <= 1e-8 && self.bound_defect <= CERT_TOL
    }
}

/// Sampled effective Hamiltonian.
#[derive(Clone, Debug, Serialize)]
pub struct EffectiveTable {
    pub dim: usize,
    pub grid: PGrid,
    pub axis: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub method: EffectiveMethod,
    pub max_v: Option<f64>,
    pub certificates: Certificates,
    /// False when any node failed; such nodes hold NaN.
    pub valid: bool,
}

impl EffectiveTable {
    fn index(&self, idx: &[isize]) -> Option<usize> {
        let m = self.axis.len() as isize;
        let mut flat = 0isize;
        for &i in idx {
            if i < 0 || i >= m {
                return None;
            }
            flat = flat * m + i;
        }
        Some(flat as usize)
    }

    fn multi(&self, flat: usize) -> Vec<isize> {
        let m = self.axis.len();
        let mut rem = flat;
        let mut out = vec![0isize; self.dim];
        for v in out.iter_mut().rev() {
            *v = (rem % m) as isize;
            rem /= m;
        }
        out
    }

    /// Value at a grid point given by its coordinates.
    pub fn value_at(&self, p: &[f64]) -> Option<f64> {
        let idx: Vec<isize> = p
            .iter()
            .map(|&v| ((v - self.axis[0]) / self.grid.dp).round() as isize)
            .collect();
        self.index(&idx).map(|i| self.values[i])
    }

    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = if self.dim == 1 {
            vec!["P".into()]
        } else {
            (1..=self.dim).map(|i| format!("P_{i}")).collect()
        };
        header.extend(["Hbar".into(), "method".into(), "residual".into()]);
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&refs);
        for ((p, v), r) in self.points.iter().zip(&self.values).zip(&self.residuals) {
            let mut row: Vec<String> = p.iter().map(|x| fmt_e12(*x)).collect();
            row.push(fmt_e12(*v));
            row.push(self.method.tag().into());
            row.push(fmt_e12(*r));
            csv.row(row);
        }
        csv.finish()
    }

    /// `{"convex": bool, "even_defect": x, "bound_defect": y}`.
    pub fn certificates_json(&self) -> serde_json::Value {
        serde_json::json!({
            "convex": self.certificates.convex,
            "convexity_defect": self.certificates.convexity_defect,
            "even_defect": self.certificates.even_defect,
            "bound_defect": self.certificates.bound_defect,
        })
    }
}

fn directions(dim: usize) -> Vec<Vec<isize>> {
    let mut dirs: Vec<Vec<isize>> = (0..dim)
        .map(|a| (0..dim).map(|b| isize::from(a == b)).collect())
        .collect();
    if dim == 2 {
        dirs.push(vec![1, 1]);
        dirs.push(vec![1, -1]);
    }
    dirs
}

fn certify(t: &EffectiveTable) -> Certificates {
    let mut convexity_defect = 0.0f64;
    let mut even_defect = 0.0f64;
    let mut bound_defect = 0.0f64;
    for flat in 0..t.values.len() {
        let v = t.values[flat];
        let idx = t.multi(flat);
        for d in directions(t.dim) {
            let lo: Vec<isize> = idx.iter().zip(&d).map(|(a, b)| a - b).collect();
            let hi: Vec<isize> = idx.iter().zip(&d).map(|(a, b)| a + b).collect();
            if let (Some(a), Some(b)) = (t.index(&lo), t.index(&hi)) {
                convexity_defect = convexity_defect.max(v - 0.5 * (t.values[a] + t.values[b]));
            }
        }
        let m = t.axis.len() as isize;
        let mirror: Vec<isize> = idx.iter().map(|i| m - 1 - i).collect();
        if let Some(j) = t.index(&mirror) {
            even_defect = even_defect.max((v - t.values[j]).abs());
        }
        if let Some(max_v) = t.max_v {
            let p2: f64 = t.points[flat].iter().map(|x| x * x).sum();
            bound_defect = bound_defect.max(max_v - v).max(v - 0.5 * p2 - max_v);
        }
    }
    if t.values.iter().any(|v| !v.is_finite()) {
        convexity_defect = f64::NAN;
    }
    Certificates {
        convex: convexity_defect <= CERT_TOL,
        convexity_defect,
        even_defect,
        bound_defect: bound_defect.max(0.0),
    }
}

/// `H̄` over a symmetric P grid with convexity, evenness and bound
/// certificates. Grid points are evaluated in parallel.
pub fn effective_grid(h: &PhaseSpaceFunction, grid: PGrid, method: EffectiveMethod, params: &CellParams) -> Result<EffectiveTable> {
    let dim = h.dim();
    let points = grid.points(dim)?;
    let axis = grid.axis()?;
    let max_v = h.mechanical_potential().map(|v| match v.dim() {
        1 => ActionIntegral::new(v).map(|a| a.max_v()).unwrap_or(f64::NAN),
        _ => default_extrema(v).max_v,
    });
    let results: Vec<Result<(f64, f64)>> = match method {
        EffectiveMethod::ClosedForm => {
            let pot = h
                .mechanical_potential()
                .filter(|v| v.dim() == 1)
                .ok_or_else(|| Error::invalid("the closed form needs a 1D mechanical Hamiltonian"))?;
            let action = ActionIntegral::new(pot)?;
            points
                .par_iter()
                .map(|p| {
                    let e = action.effective(p[0]);
                    let r = if e > action.max_v() { (action.eval(e)? - p[0].abs()).abs() } else { 0.0 };
                    Ok((e, r))
                })
                .collect()
        }
        EffectiveMethod::CellProblem => {
            let solver = CellSolver::new(h, params, &points)?;
            points
                .par_iter()
                .map(|p| solver.solve(p).map(|s| (s.hbar_eff, s.corrector.residual)))
                .collect()
        }
        EffectiveMethod::InfSupUpper => points
            .par_iter()
            .map(|p| infsup_upper(h, p, 3, 400, params.seed).map(|v| (v, 0.0)))
            .collect(),
    };
    let mut values = Vec::with_capacity(points.len());
    let mut residuals = Vec::with_capacity(points.len());
    let mut valid = true;
    for r in results {
        match r {
            Ok((v, res)) => {
                values.push(v);
                residuals.push(res);
            }
            Err(e) if e.is_numerical() => {
                valid = false;
                values.push(f64::NAN);
                residuals.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
    }
    let mut table = EffectiveTable {
        dim,
        grid,
        axis,
        points,
        values,
        residuals,
        method,
        max_v,
        certificates: Certificates {
            convex: true,
            convexity_defect: 0.0,
            even_defect: 0.0,
            bound_defect: 0.0,
        },
        valid,
    };
    table.certificates = certify(&table);
    Ok(table)
}

/// Result of [`sublevel_set`].
#[derive(Clone, Debug, Serialize)]
pub struct SublevelSet {
    pub points: Vec<Vec<f64>>,
    /// Set when `E` lies below every table value.
    pub empty: bool,
    /// No grid point outside the set is the midpoint of two points inside.
    pub convex: bool,
}

/// `{P on the grid : H̄(P) ≤ E}`.
pub fn sublevel_set(table: &EffectiveTable, e: f64) -> SublevelSet {
    let inside: Vec<bool> = table.values.iter().map(|&v| v <= e + 1e-12).collect();
    let points: Vec<Vec<f64>> = table
        .points
        .iter()
        .zip(&inside)
        .filter(|(_, &i)| i)
        .map(|(p, _)| p.clone())
        .collect();
    let m = table.axis.len() as isize;
    let mut convex = true;
    let mut dirs = directions(table.dim);
    if table.dim == 2 {
        dirs.extend([vec![1, 2], vec![2, 1], vec![1, -2], vec![2, -1]]);
    }
    'outer: for flat in 0..inside.len() {
        if inside[flat] {
            continue;
        }
        let idx = table.multi(flat);
        for d in &dirs {
            for s in 1..m {
                let lo: Vec<isize> = idx.iter().zip(d).map(|(a, b)| a - s * b).collect();
                let hi: Vec<isize> = idx.iter().zip(d).map(|(a, b)| a + s * b).collect();
                match (table.index(&lo), table.index(&hi)) {
                    (Some(a), Some(b)) => {
                        if inside[a] && inside[b] {
                            convex = false;
                            break 'outer;
                        }
                    }
                    _ => break,
                }
            }
        }
    }
    SublevelSet {
        empty: points.is_empty(),
        points,
        convex,
    }
}

/// Real trigonometric basis of bandwidth `m`: one cosine and one sine per
/// frequency in the positive half-lattice.
fn half_lattice(dim: usize, m: usize) -> Vec<Vec<i64>> {
    crate::planewave::PlaneWaveBasis::new(dim, m)
        .freqs()
        .iter()
        .filter(|k| k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0))
        .cloned()
        .collect()
}

/// Grid points per axis of the inf-sup objective.
pub const INFSUP_GRID: usize = 128;

/// Upper bound `sup_x H(x, P + ∇v(x))` minimized over trigonometric `v` of
/// bandwidth `m` by a seeded pattern search (coordinate polls plus random
/// directions, halving the step when nothing improves).
pub fn infsup_upper(h: &PhaseSpaceFunction, p: &[f64], m: usize, iterations: usize, seed: u64) -> Result<f64> {
    if m > 4 {
        return Err(Error::invalid("inf-sup bandwidth m must be at most 4"));
    }
    if p.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: p.len() });
    }
    let n = h.dim();
    let g = if n == 1 { INFSUP_GRID } else { INFSUP_GRID.min(64) };
    let lat = Lattice::new(n, g);
    let xs: Vec<Vec<f64>> = (0..lat.len()).map(|i| lat.point(i)).collect();
    let freqs = half_lattice(n, m);
    // gradient fields of each basis function, component-major
    let mut fields: Vec<Vec<f64>> = Vec::new();
    for k in &freqs {
        for trig in 0..2 {
            let mut f = vec![0.0; xs.len() * n];
            for (i, x) in xs.iter().enumerate() {
                let th: f64 = k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum();
                let d = if trig == 0 { -th.sin() } else { th.cos() };
                for a in 0..n {
                    f[i * n + a] = k[a] as f64 * d;
                }
            }
            fields.push(f);
        }
    }
    let mech: Option<Vec<f64>> = h
        .mechanical_potential()
        .map(|v| xs.iter().map(|x| v.eval(x)).collect());
    let objective = |c: &[f64]| -> f64 {
        let mut worst = f64::NEG_INFINITY;
        let mut q = vec![0.0; n];
        for (i, x) in xs.iter().enumerate() {
            q.copy_from_slice(&p[..n]);
            for (ci, f) in c.iter().zip(&fields) {
                if *ci != 0.0 {
                    for a in 0..n {
                        q[a] += ci * f[i * n + a];
                    }
                }
            }
            let val = match &mech {
                Some(v) => v[i] + 0.5 * q.iter().map(|t| t * t).sum::<f64>(),
                None => h.eval(x, &q),
            };
            worst = worst.max(val);
        }
        worst
    };
    let dims = fields.len();
    let mut c = vec![0.0; dims];
    let mut best = objective(&c);
    if dims == 0 {
        return Ok(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = 0.5;
    let mut trial = vec![0.0; dims];
    for _ in 0..iterations {
        let mut improved = false;
        for i in 0..dims {
            for sign in [1.0, -1.0] {
                trial.copy_from_slice(&c);
                trial[i] += sign * step;
                let f = objective(&trial);
                if f < best {
                    best = f;
                    c.copy_from_slice(&trial);
                    improved = true;
                    break;
                }
            }
        }
        for _ in 0..2 * dims {
            let dir: Vec<f64> = (0..dims).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (t, (ci, di)) in trial.iter_mut().zip(c.iter().zip(&dir)) {
                *t = ci + step * di / norm;
            }
            let f = objective(&trial);
            if f < best {
                best = f;
                c.copy_from_slice(&trial);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-9 {
                break;
            }
        }
    }
    Ok(best)
}

/// `H̄` of `H` and of `H∘φ` over a list of P, with the defect of φ.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub p: Vec<Vec<f64>>,
    pub hbar_original: Vec<f64>,
    pub hbar_mapped: Vec<f64>,
    pub max_diff: f64,
    pub symplectic_defect: f64,
}

pub fn invariance_check(h: &PhaseSpaceFunction, phi: &SymplecticMap, ps: &[Vec<f64>], params: &CellParams) -> Result<InvarianceReport> {
    let mapped = compose_hamiltonian(h, phi)?;
    let defect = symplectic_defect(phi, 20)?;
    let solve_all = |sym: &PhaseSpaceFunction| -> Result<Vec<f64>> {
        let solver = CellSolver::new(sym, params, ps)?;
        ps.par_iter().map(|p| solver.solve(p).map(|s| s.hbar_eff)).collect()
    };
    let orig = solve_all(h)?;
    let comp = solve_all(&mapped)?;
    let max_diff = orig.iter().zip(&comp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(InvarianceReport {
        p: ps.to_vec(),
        hbar_original: orig,
        hbar_mapped: comp,
        max_diff,
        symplectic_defect: defect,
    })
}

/// Half-width of the flat piece `{H̄ = H̄(0)}` along the first axis from the
/// cell-problem solver: bisection on `H̄(P) − H̄(0) > threshold`. The
/// threshold should exceed the solver error, which is largest at `P = 0`.
pub fn plateau_halfwidth(h: &PhaseSpaceFunction, params: &CellParams, threshold: f64, p_hi: f64) -> Result<f64> {
    let dir = |s: f64| {
        let mut p = vec![0.0; h.dim()];
        p[0] = s;
        p
    };
    let solver = CellSolver::new(h, params, &[dir(0.0), dir(p_hi)])?;
    let base = solver.solve(&dir(0.0))?.hbar_eff;
    let above = |s: f64| -> Result<bool> { Ok(solver.solve(&dir(s))?.hbar_eff - base > threshold) };
    if !above(p_hi)? {
        return Err(Error::invalid("plateau extends beyond the search interval"));
    }
    let (mut lo, mut hi) = (0.0, p_hi);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if above(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
