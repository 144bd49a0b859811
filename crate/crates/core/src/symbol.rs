//! Phase-space symbols `b(x, η)` on `T^n × R^n`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::FourierPotential;

pub type EvalFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;
/// `(q, η) ↦ b̂(q, η) = (2π)^{-n} ∫ e^{-iq·y} b(y, η) dy`.
pub type FourierFn = Arc<dyn Fn(&[i64], &[f64]) -> Complex64 + Send + Sync>;
/// Writes `(∂_x b, ∂_η b)` (real parts) into the two output slices.
pub type GradFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64], &mut [f64]) + Send + Sync>;

/// Step of the central-difference gradient used when no closed form exists.
pub const FD_STEP: f64 = 1e-6;

/// A symbol on `T^n × R^n`.
#[derive(Clone)]
pub struct PhaseSpaceFunction {
    dim: usize,
    bandwidth: Option<usize>,
    real: bool,
    separable: bool,
    eval: EvalFn,
    fourier: Option<FourierFn>,
    grad: Option<GradFn>,
    mechanical: Option<FourierPotential>,
}

impl fmt::Debug for PhaseSpaceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseSpaceFunction")
            .field("dim", &self.dim)
            .field("bandwidth", &self.bandwidth)
            .field("real", &self.real)
            .field("separable", &self.separable)
            .field("closed_fourier", &self.fourier.is_some())
            .field("closed_gradient", &self.grad.is_some())
            .finish()
    }
}

/// Smooth bump `exp(1 − 1/(1 − s²))` on `|s| < 1`, equal to 1 at 0.
pub fn bump(s: f64) -> f64 {
    let t = 1.0 - s * s;
    if t <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / t).exp()
    }
}

/// Derivative of [`bump`].
pub fn bump_prime(s: f64) -> f64 {
    let t = 1.0 - s * s;
    if t <= 0.0 {
        0.0
    } else {
        bump(s) * (-2.0 * s / (t * t))
    }
}

impl PhaseSpaceFunction {
    /// Fully general constructor. `bandwidth = None` marks a numeric symbol
    /// whose x-Fourier transform has no declared support.
    pub fn new(dim: usize, bandwidth: Option<usize>, real: bool, eval: EvalFn) -> Self {
        PhaseSpaceFunction {
            dim,
            bandwidth,
            real,
            separable: false,
            eval,
            fourier: None,
            grad: None,
            mechanical: None,
        }
    }

    /// Real numeric symbol given only by point evaluation.
    pub fn numeric(dim: usize, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(dim, None, true, Arc::new(move |x, e| Complex64::new(f(x, e), 0.0)))
    }

    pub fn with_fourier(mut self, f: FourierFn) -> Self {
        self.fourier = Some(f);
        self
    }

    pub fn with_gradient(mut self, g: GradFn) -> Self {
        self.grad = Some(g);
        self
    }

    /// Declare `b = T(η) + U(x)`, enabling the splitting integrator.
    pub fn with_separable(mut self, separable: bool) -> Self {
        self.separable = separable;
        self
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, Some(0), true, Arc::new(move |_, _| Complex64::new(c, 0.0)))
            .with_fourier(Arc::new(move |q, _| {
                if q.iter().all(|&v| v == 0) {
                    Complex64::new(c, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }))
            .with_gradient(Arc::new(|_, _, gx, ge| {
                gx.fill(0.0);
                ge.fill(0.0);
            }))
            .with_separable(true)
    }

    /// `½|η|²`.
    pub fn kinetic(dim: usize) -> Self {
        let half_sq = |e: &[f64]| 0.5 * e.iter().map(|v| v * v).sum::<f64>();
        Self::new(dim, Some(0), true, Arc::new(move |_, e| Complex64::new(half_sq(e), 0.0)))
            .with_fourier(Arc::new(move |q, e| {
                if q.iter().all(|&v| v == 0) {
                    Complex64::new(half_sq(e), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }))
            .with_gradient(Arc::new(|_, e, gx, ge| {
                gx.fill(0.0);
                ge.copy_from_slice(e);
            }))
            .with_separable(true)
    }

    /// `V(x)`, independent of η.
    pub fn potential(pot: &FourierPotential) -> Self {
        let p1 = pot.clone();
        let p2 = pot.clone();
        let p3 = pot.clone();
        Self::new(pot.dim(), Some(pot.bandwidth()), true, Arc::new(move |x, _| Complex64::new(p1.eval(x), 0.0)))
            .with_fourier(Arc::new(move |q, _| p2.coeff(q)))
            .with_gradient(Arc::new(move |x, _, gx, ge| {
                gx.copy_from_slice(&p3.gradient(x));
                ge.fill(0.0);
            }))
            .with_separable(true)
    }

    /// `H = ½|η|² + V(x)`.
    pub fn mechanical(pot: &FourierPotential) -> Self {
        let mut h = Self::kinetic(pot.dim()).add(&Self::potential(pot)).expect("dims agree");
        h.mechanical = Some(pot.clone());
        h
    }

    /// `⟨c, η⟩`.
    pub fn linear_momentum(c: &[f64]) -> Self {
        let c1 = c.to_vec();
        let c2 = c.to_vec();
        let c3 = c.to_vec();
        let dot = |c: &[f64], e: &[f64]| c.iter().zip(e).map(|(a, b)| a * b).sum::<f64>();
        Self::new(c.len(), Some(0), true, Arc::new(move |_, e| Complex64::new(dot(&c1, e), 0.0)))
            .with_fourier(Arc::new(move |q, e| {
                if q.iter().all(|&v| v == 0) {
                    Complex64::new(dot(&c2, e), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }))
            .with_gradient(Arc::new(move |_, _, gx, ge| {
                gx.fill(0.0);
                ge.copy_from_slice(&c3);
            }))
            .with_separable(true)
    }

    /// `a(x)·χ(|η|/radius)` with `a` a trigonometric polynomial and χ the
    /// smooth [`bump`].
    pub fn trig_bump(a: &FourierPotential, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("bump radius must be positive"));
        }
        let chi = move |e: &[f64]| bump(e.iter().map(|v| v * v).sum::<f64>().sqrt() / radius);
        let (a1, a2, a3) = (a.clone(), a.clone(), a.clone());
        Ok(Self::new(
            a.dim(),
            Some(a.bandwidth()),
            true,
            Arc::new(move |x, e| Complex64::new(a1.eval(x) * chi(e), 0.0)),
        )
        .with_fourier(Arc::new(move |q, e| a2.coeff(q) * chi(e)))
        .with_gradient(Arc::new(move |x, e, gx, ge| {
            let r = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            let c = bump(r / radius);
            let v = a3.eval(x);
            for (g, d) in gx.iter_mut().zip(a3.gradient(x)) {
                *g = d * c;
            }
            let dc = if r > 0.0 { bump_prime(r / radius) / (radius * r) } else { 0.0 };
            for (g, ei) in ge.iter_mut().zip(e) {
                *g = v * dc * ei;
            }
        })))
    }

    /// `Σ_t c_t e^{i q_t·x} η^{p_t}`.
    pub fn polynomial(dim: usize, terms: &[PolyTerm]) -> Result<Self> {
        let mut merged: Vec<(Vec<i64>, Vec<u32>, Complex64)> = Vec::new();
        for t in terms {
            if t.q.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: t.q.len() });
            }
            if t.eta_powers.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: t.eta_powers.len() });
            }
            if !(t.re.is_finite() && t.im.is_finite()) {
                return Err(Error::invalid("non-finite symbol coefficient"));
            }
            let c = Complex64::new(t.re, t.im);
            match merged.iter_mut().find(|(q, p, _)| *q == t.q && *p == t.eta_powers) {
                Some(entry) => entry.2 += c,
                None => merged.push((t.q.clone(), t.eta_powers.clone(), c)),
            }
        }
        merged.retain(|t| t.2 != Complex64::new(0.0, 0.0));
        merged.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        let real = merged.iter().all(|(q, p, c)| {
            let neg: Vec<i64> = q.iter().map(|v| -v).collect();
            let partner = merged
                .iter()
                .find(|(q2, p2, _)| *q2 == neg && p2 == p)
                .map_or(Complex64::new(0.0, 0.0), |t| t.2);
            (partner - c.conj()).norm() <= 1e-12
        });
        let separable = merged
            .iter()
            .all(|(q, p, _)| q.iter().all(|&v| v == 0) || p.iter().all(|&v| v == 0));
        let bandwidth = merged
            .iter()
            .flat_map(|(q, _, _)| q.iter().map(|v| v.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        let terms = Arc::new(merged);
        let (t1, t2, t3) = (terms.clone(), terms.clone(), terms);
        let mono = |e: &[f64], p: &[u32]| e.iter().zip(p).map(|(v, &k)| v.powi(k as i32)).product::<f64>();
        let phase = |q: &[i64], x: &[f64]| {
            let th: f64 = q.iter().zip(x).map(|(&a, b)| a as f64 * b).sum();
            Complex64::from_polar(1.0, th)
        };
        let eval: EvalFn = Arc::new(move |x, e| {
            t1.iter().map(|(q, p, c)| c * phase(q, x) * mono(e, p)).sum()
        });
        let fourier: FourierFn = Arc::new(move |qq, e| {
            t2.iter()
                .filter(|(q, _, _)| q.as_slice() == qq)
                .map(|(_, p, c)| c * mono(e, p))
                .sum()
        });
        let grad: GradFn = Arc::new(move |x, e, gx, ge| {
            gx.fill(0.0);
            ge.fill(0.0);
            for (q, p, c) in t3.iter() {
                let base = c * phase(q, x);
                let m = mono(e, p);
                for i in 0..gx.len() {
                    gx[i] += (base * Complex64::new(0.0, q[i] as f64) * m).re;
                    if p[i] > 0 {
                        let mut d = p[i] as f64 * e[i].powi(p[i] as i32 - 1);
                        for (j, (&ej, &pj)) in e.iter().zip(p.iter()).enumerate() {
                            if j != i {
                                d *= ej.powi(pj as i32);
                            }
                        }
                        ge[i] += (base * d).re;
                    }
                }
            }
        });
        Ok(Self::new(dim, Some(bandwidth), real, eval)
            .with_fourier(fourier)
            .with_gradient(grad)
            .with_separable(separable))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: SymbolFile = serde_json::from_str(s)?;
        let dim = spec
            .terms
            .first()
            .map(|t| t.q.len())
            .ok_or_else(|| Error::invalid("symbol needs at least one term"))?;
        Self::polynomial(dim, &spec.terms)
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let (e1, e2) = (self.eval.clone(), other.eval.clone());
        let mut out = Self::new(
            self.dim,
            self.bandwidth.zip(other.bandwidth).map(|(a, b)| a.max(b)),
            self.real && other.real,
            Arc::new(move |x, e| e1(x, e) + e2(x, e)),
        )
        .with_separable(self.separable && other.separable);
        if let (Some(f1), Some(f2)) = (self.fourier.clone(), other.fourier.clone()) {
            out.fourier = Some(Arc::new(move |q, e| f1(q, e) + f2(q, e)));
        }
        if let (Some(g1), Some(g2)) = (self.grad.clone(), other.grad.clone()) {
            let n = self.dim;
            out.grad = Some(Arc::new(move |x, e, gx, ge| {
                g1(x, e, gx, ge);
                let mut hx = vec![0.0; n];
                let mut he = vec![0.0; n];
                g2(x, e, &mut hx, &mut he);
                for (a, b) in gx.iter_mut().zip(&hx) {
                    *a += b;
                }
                for (a, b) in ge.iter_mut().zip(&he) {
                    *a += b;
                }
            }));
        }
        Ok(out)
    }

    /// `s·b`.
    pub fn scale(&self, s: f64) -> Self {
        let e1 = self.eval.clone();
        let mut out = Self::new(self.dim, self.bandwidth, self.real, Arc::new(move |x, e| e1(x, e) * s))
            .with_separable(self.separable);
        if let Some(f) = self.fourier.clone() {
            out.fourier = Some(Arc::new(move |q, e| f(q, e) * s));
        }
        if let Some(g) = self.grad.clone() {
            out.grad = Some(Arc::new(move |x, e, gx, ge| {
                g(x, e, gx, ge);
                gx.iter_mut().chain(ge.iter_mut()).for_each(|v| *v *= s);
            }));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared x-bandwidth `Q`; `None` for numeric symbols.
    pub fn bandwidth(&self) -> Option<usize> {
        self.bandwidth
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn is_separable(&self) -> bool {
        self.separable
    }

    pub fn has_closed_fourier(&self) -> bool {
        self.fourier.is_some()
    }

    /// The potential when the symbol was built by [`Self::mechanical`].
    pub fn mechanical_potential(&self) -> Option<&FourierPotential> {
        self.mechanical.as_ref()
    }

    pub fn eval_complex(&self, x: &[f64], eta: &[f64]) -> Complex64 {
        (self.eval)(x, eta)
    }

    /// Real part of the symbol.
    pub fn eval(&self, x: &[f64], eta: &[f64]) -> f64 {
        (self.eval)(x, eta).re
    }

    /// `(∂_x b, ∂_η b)` of the real part, closed form when available, else
    /// central differences with step [`FD_STEP`].
    pub fn gradient(&self, x: &[f64], eta: &[f64], gx: &mut [f64], ge: &mut [f64]) {
        if let Some(g) = &self.grad {
            g(x, eta, gx, ge);
            return;
        }
        let mut xs = x.to_vec();
        for i in 0..self.dim {
            xs[i] = x[i] + FD_STEP;
            let fp = self.eval(&xs, eta);
            xs[i] = x[i] - FD_STEP;
            let fm = self.eval(&xs, eta);
            xs[i] = x[i];
            gx[i] = (fp - fm) / (2.0 * FD_STEP);
        }
        let mut es = eta.to_vec();
        for i in 0..self.dim {
            es[i] = eta[i] + FD_STEP;
            let fp = self.eval(x, &es);
            es[i] = eta[i] - FD_STEP;
            let fm = self.eval(x, &es);
            es[i] = eta[i];
            ge[i] = (fp - fm) / (2.0 * FD_STEP);
        }
    }

    /// `b̂(q, η)`: closed form when provided, otherwise the trapezoid rule on
    /// `grid` points per axis (exact for bandwidth below `grid/2`).
    pub fn fourier_coeff(&self, q: &[i64], eta: &[f64], grid: usize) -> Complex64 {
        if let Some(f) = &self.fourier {
            return f(q, eta);
        }
        let n = self.dim;
        let h = TAU / grid as f64;
        let total = grid.pow(n as u32);
        let mut x = vec![0.0; n];
        let mut acc = Complex64::new(0.0, 0.0);
        for flat in 0..total {
            let mut rem = flat;
            let mut th = 0.0;
            for i in (0..n).rev() {
                x[i] = (rem % grid) as f64 * h;
                rem /= grid;
                th -= q[i] as f64 * x[i];
            }
            acc += self.eval_complex(&x, eta) * Complex64::from_polar(1.0, th);
        }
        acc / total as f64
    }

    /// Poisson bracket `{self, other} = ∂_η self·∂_x other − ∂_x self·∂_η other`,
    /// with bandwidth the sum of the two.
    pub fn poisson(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let (a, b) = (self.clone(), other.clone());
        let n = self.dim;
        let eval: EvalFn = Arc::new(move |x, e| {
            let (mut ax, mut ae, mut bx, mut be) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            a.gradient(x, e, &mut ax, &mut ae);
            b.gradient(x, e, &mut bx, &mut be);
            let v: f64 = (0..n).map(|i| ae[i] * bx[i] - ax[i] * be[i]).sum();
            Complex64::new(v, 0.0)
        });
        Ok(Self::new(
            n,
            self.bandwidth.zip(other.bandwidth).map(|(p, q)| p + q),
            true,
            eval,
        ))
    }
}

/// One term `c·e^{iq·x}·η^p` of a polynomial symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub q: Vec<i64>,
    pub eta_powers: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Serialize, Deserialize)]
struct SymbolFile {
    terms: Vec<PolyTerm>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(q: i64, p: u32, re: f64, im: f64) -> PolyTerm {
        PolyTerm { q: vec![q], eta_powers: vec![p], re, im }
    }

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-1.5), 0.0);
        let s = 0.4;
        let fd = (bump(s + 1e-6) - bump(s - 1e-6)) / 2e-6;
        assert!((fd - bump_prime(s)).abs() < 1e-8);
    }

    #[test]
    fn mechanical_symbol_values() {
        let h = PhaseSpaceFunction::mechanical(&FourierPotential::cosine(1, 0, 1.0));
        assert!((h.eval(&[0.0], &[2.0]) - 3.0).abs() < 1e-15);
        assert_eq!(h.bandwidth(), Some(1));
        assert!(h.is_separable() && h.is_real());
        assert!(h.mechanical_potential().is_some());
        assert!((h.fourier_coeff(&[1], &[2.0], 8) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((h.fourier_coeff(&[0], &[2.0], 8) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn polynomial_matches_closed_forms() {
        // η²/2 + cos x
        let p = PhaseSpaceFunction::polynomial(1, &[term(0, 2, 0.5, 0.0), term(1, 0, 0.5, 0.0), term(-1, 0, 0.5, 0.0)])
            .unwrap();
        let h = PhaseSpaceFunction::mechanical(&FourierPotential::cosine(1, 0, 1.0));
        for (x, e) in [(0.3, -1.2), (2.0, 0.7)] {
            assert!((p.eval(&[x], &[e]) - h.eval(&[x], &[e])).abs() < 1e-14);
        }
        assert!(p.is_real() && p.is_separable());
        let mixed = PhaseSpaceFunction::polynomial(1, &[term(1, 1, 0.0, 1.0)]).unwrap();
        assert!(!mixed.is_real() && !mixed.is_separable());
    }

    #[test]
    fn closed_gradients_match_differences() {
        let syms = [
            PhaseSpaceFunction::polynomial(1, &[term(1, 3, 0.2, -0.1), term(-1, 3, 0.2, 0.1), term(0, 2, 0.5, 0.0)])
                .unwrap(),
            PhaseSpaceFunction::trig_bump(&FourierPotential::sine(1, 0, 0.1), 2.0).unwrap(),
            PhaseSpaceFunction::mechanical(&FourierPotential::harmonic(1, 0, 2, 0.3, 0.4)),
        ];
        for s in &syms {
            let numeric = {
                let c = s.clone();
                PhaseSpaceFunction::numeric(1, move |x, e| c.eval(x, e))
            };
            let (mut ax, mut ae, mut bx, mut be) = ([0.0], [0.0], [0.0], [0.0]);
            s.gradient(&[0.7], &[0.9], &mut ax, &mut ae);
            numeric.gradient(&[0.7], &[0.9], &mut bx, &mut be);
            assert!((ax[0] - bx[0]).abs() < 1e-7 && (ae[0] - be[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn quadrature_fourier_exact_for_bandlimited() {
        let v = FourierPotential::harmonic(1, 0, 2, 0.3, -0.7);
        let sym = PhaseSpaceFunction::potential(&v);
        let numeric = PhaseSpaceFunction::numeric(1, move |x, _| v.eval(x));
        for q in -3..=3 {
            let a = sym.fourier_coeff(&[q], &[0.0], 12);
            let b = numeric.fourier_coeff(&[q], &[0.0], 12);
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn symbol_json() {
        let s = PhaseSpaceFunction::from_json_str(
            r#"{"terms": [{"q": [0], "eta_powers": [2], "re": 0.5, "im": 0.0}]}"#,
        )
        .unwrap();
        assert!((s.eval(&[1.0], &[3.0]) - 4.5).abs() < 1e-15);
        assert!(PhaseSpaceFunction::from_json_str(r#"{"terms": []}"#).is_err());
    }

    #[test]
    fn periodic_in_x() {
        let s = PhaseSpaceFunction::trig_bump(&FourierPotential::cosine(1, 0, 1.0), 1.5).unwrap();
        for x in [0.1, 1.3, 4.0] {
            assert!((s.eval(&[x], &[0.4]) - s.eval(&[x + TAU], &[0.4])).abs() < 1e-12);
        }
    }
}
