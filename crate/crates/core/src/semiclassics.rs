//! Quantum propagators of truncated operators and the numerical Egorov
//! residual `‖U* Op(a) U − Op(a∘φ^t)‖`.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::flow_map;
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::linalg::{hermitian_eigh, operator_norm, CMatrix};
use crate::planewave::{check_hbar, HamiltonianMatrix, PlaneWaveBasis};
use crate::symbol::PhaseSpaceFunction;
use crate::weyl::{weyl_matrix, weyl_matrix_sampled, WeylMatrix};

/// Residuals at or below this level count as exact.
pub const EGOROV_EXACT_TOL: f64 = 1e-8;

/// `U = exp(−i t M/ħ)` on a plane-wave basis.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub hbar: f64,
    pub t: f64,
    pub basis: PlaneWaveBasis,
    pub unitary: CMatrix,
}

impl Propagator {
    /// `max |U*U − I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.unitary.adjoint() * &self.unitary;
        let n = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// `max |UM − MU|`.
    pub fn commutator_defect(&self, m: &CMatrix) -> f64 {
        let c = &self.unitary * m - m * &self.unitary;
        c.iter().fold(0.0f64, |w, v| w.max(v.norm()))
    }

    /// Heisenberg picture `U* A U`.
    pub fn conjugate(&self, a: &CMatrix) -> CMatrix {
        self.unitary.adjoint() * a * &self.unitary
    }
}

fn exp_unitary(m: &CMatrix, hbar: f64, t: f64) -> Result<CMatrix> {
    let (values, v) = hermitian_eigh(m)?;
    let n = values.len();
    let mut scaled = v.clone();
    for (c, lam) in values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -t * lam / hbar);
        for r in 0..n {
            scaled[(r, c)] *= phase;
        }
    }
    Ok(scaled * v.adjoint())
}

/// `V e^{−itΛ/ħ} V*` from the eigendecomposition of `M`.
pub fn propagate(m: &HamiltonianMatrix, t: f64) -> Result<Propagator> {
    check_hbar(m.hbar)?;
    Ok(Propagator {
        hbar: m.hbar,
        t,
        basis: m.basis.clone(),
        unitary: exp_unitary(&m.entries, m.hbar, t)?,
    })
}

/// Same as [`propagate`] for the Weyl matrix of a general real generator.
pub fn propagate_weyl(m: &WeylMatrix, t: f64) -> Result<Propagator> {
    check_hbar(m.hbar)?;
    Ok(Propagator {
        hbar: m.hbar,
        t,
        basis: m.basis.clone(),
        unitary: exp_unitary(&m.entries, m.hbar, t)?,
    })
}

/// Quadrature points per axis for the flowed symbol at cutoff `K`.
pub fn egorov_grid(cutoff: usize) -> usize {
    (4 * cutoff).max(32)
}

/// Numeric symbol `z ↦ a(φ_b^t(z))`. The first escape is recorded in `escaped`.
fn flowed_symbol(
    a: &PhaseSpaceFunction,
    b: &PhaseSpaceFunction,
    t: f64,
    h: f64,
    escaped: Arc<OnceLock<(f64, f64)>>,
) -> Result<PhaseSpaceFunction> {
    let map = flow_map(b, t, h)?;
    let a = a.clone();
    Ok(PhaseSpaceFunction::new(
        a.dim(),
        None,
        a.is_real(),
        Arc::new(move |x, p| match map.apply_unwrapped(x, p) {
            Ok((y, q)) => a.eval_complex(&y, &q),
            Err(Error::FlowEscape { momentum, time }) => {
                let _ = escaped.set((momentum, time));
                Complex64::new(f64::NAN, 0.0)
            }
            Err(_) => Complex64::new(f64::NAN, 0.0),
        }),
    ))
}

/// `‖U* Op(a) U − Op(a∘φ^t)‖` on the interior block `|k|_∞ ≤ K/2`, where
/// `U = exp(−itOp(b)/ħ)` is built on `|k|_∞ ≤ K`.
pub fn egorov_residual(
    a: &PhaseSpaceFunction,
    b: &PhaseSpaceFunction,
    t: f64,
    hbar: f64,
    cutoff: usize,
    h: f64,
) -> Result<f64> {
    check_hbar(hbar)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: b.dim(), got: a.dim() });
    }
    if !b.is_real() {
        return Err(Error::invalid("the generator must be real"));
    }
    if cutoff < 2 {
        return Err(Error::invalid("Egorov residual needs K >= 2"));
    }
    let opb = weyl_matrix(b, hbar, cutoff)?;
    let u = propagate_weyl(&opb, t)?;
    let grid = egorov_grid(cutoff);
    let opa = match a.bandwidth() {
        Some(q) if q <= cutoff => weyl_matrix(a, hbar, cutoff)?,
        _ => weyl_matrix_sampled(a, hbar, &opb.basis, grid)?,
    };
    let heis = u.conjugate(&opa.entries);

    let interior = PlaneWaveBasis::new(a.dim(), cutoff / 2);
    let escaped = Arc::new(OnceLock::new());
    let flowed = flowed_symbol(a, b, t, h, escaped.clone())?;
    let opf = weyl_matrix_sampled(&flowed, hbar, &interior, grid)?;
    if let Some(&(momentum, time)) = escaped.get() {
        return Err(Error::FlowEscape { momentum, time });
    }
    if opf.entries.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::invalid("flowed symbol is not finite on the quadrature grid"));
    }
    let idx: Vec<usize> = interior
        .freqs()
        .iter()
        .map(|k| opb.basis.index_of(k).expect("nested bases"))
        .collect();
    let s = interior.len();
    let diff = CMatrix::from_fn(s, s, |r, c| heis[(idx[r], idx[c])] - opf.entries[(r, c)]);
    Ok(operator_norm(&diff))
}

/// How `K` is chosen per ħ in [`egorov_scaling`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EgorovCutoff {
    Fixed(usize),
    /// `⌈8/√ħ⌉·4`, capped.
    Scaled { cap: usize },
}

impl EgorovCutoff {
    pub fn cutoff(&self, hbar: f64) -> usize {
        match *self {
            EgorovCutoff::Fixed(k) => k,
            EgorovCutoff::Scaled { cap } => (((8.0 / hbar.sqrt()).ceil() as usize) * 4).min(cap),
        }
    }
}

impl Default for EgorovCutoff {
    fn default() -> Self {
        EgorovCutoff::Scaled { cap: 64 }
    }
}

/// Egorov residuals over a decreasing ħ list with the fit `log r ≈ s log ħ + log C`.
#[derive(Clone, Debug, Serialize)]
pub struct EgorovReport {
    pub t: f64,
    pub hbar: Vec<f64>,
    pub cutoffs: Vec<usize>,
    pub residual: Vec<f64>,
    /// `None` when every residual is at rounding level.
    pub slope: Option<f64>,
    pub constant: Option<f64>,
    pub exact: bool,
    /// `sup b` over the support of `a` on the probe grid.
    pub probe_energy: f64,
    /// `½ħ²K²` per ħ; the cutoff covers the probe only where this exceeds `probe_energy`.
    pub kinetic: Vec<f64>,
}

impl EgorovReport {
    /// ħ values where `½ħ²K² ≤ probe_energy`.
    pub fn under_resolved(&self) -> Vec<f64> {
        self.hbar
            .iter()
            .zip(&self.kinetic)
            .filter(|(_, &k)| k <= self.probe_energy)
            .map(|(&h, _)| h)
            .collect()
    }
}

/// `sup b` where `|a| > 0`, sampled with `|η_i| ≤ pmax`.
fn probe_energy(a: &PhaseSpaceFunction, b: &PhaseSpaceFunction, pmax: f64) -> f64 {
    let n = a.dim();
    let res: usize = if n == 1 { 128 } else { 24 };
    let total = (res * res).pow(n as u32);
    let mut x = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut best = f64::NEG_INFINITY;
    for flat in 0..total {
        let mut rem = flat;
        for i in 0..n {
            x[i] = (rem % res) as f64 * std::f64::consts::TAU / res as f64;
            rem /= res;
            p[i] = -pmax + 2.0 * pmax * (rem % res) as f64 / (res - 1) as f64;
            rem /= res;
        }
        if a.eval_complex(&x, &p).norm() > 1e-12 {
            best = best.max(b.eval(&x, &p));
        }
    }
    best
}

pub fn egorov_scaling(
    a: &PhaseSpaceFunction,
    b: &PhaseSpaceFunction,
    t: f64,
    hbars: &[f64],
    rule: EgorovCutoff,
    h: f64,
) -> Result<EgorovReport> {
    if hbars.len() < 4 {
        return Err(Error::invalid("Egorov scaling needs at least 4 values of hbar"));
    }
    if hbars.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("the hbar list must be strictly decreasing"));
    }
    let cutoffs: Vec<usize> = hbars.iter().map(|&hb| rule.cutoff(hb)).collect();
    let residual = hbars
        .par_iter()
        .zip(&cutoffs)
        .map(|(&hb, &k)| egorov_residual(a, b, t, hb, k, h))
        .collect::<Result<Vec<f64>>>()?;
    let exact = residual.iter().all(|&r| r <= EGOROV_EXACT_TOL);
    let (slope, constant) = if exact {
        (None, None)
    } else {
        let lx: Vec<f64> = hbars.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = residual.iter().map(|r| r.max(1e-300).ln()).collect();
        let (s, c) = linear_fit(&lx, &ly);
        (Some(s), Some(c.exp()))
    };
    let pmax = hbars
        .iter()
        .zip(&cutoffs)
        .map(|(hb, &k)| hb * k as f64)
        .fold(0.0, f64::max);
    Ok(EgorovReport {
        t,
        hbar: hbars.to_vec(),
        kinetic: hbars
            .iter()
            .zip(&cutoffs)
            .map(|(hb, &k)| 0.5 * hb * hb * (k * k) as f64)
            .collect(),
        cutoffs,
        residual,
        slope,
        constant,
        exact,
        probe_energy: probe_energy(a, b, pmax.max(1.0)),
    })
}
