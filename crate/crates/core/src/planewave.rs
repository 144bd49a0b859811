//! Plane-wave Galerkin discretization of `−½ħ²Δ + V` on `T^n`, its spectrum,
//! eigenvalue counting and the phase-space volumes of the Weyl law.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigh, CMatrix};
use crate::quad;
use crate::torus::{default_extrema, FourierPotential};

/// Eigenpairs whose out-of-basis residual exceeds this (relative to `1+|λ|`)
/// fall outside the trusted window.
pub const TRUST_TOL: f64 = 1e-9;

/// Ordered frequency vectors `k ∈ Z^n` with `|k|_∞ ≤ K`, lexicographic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneWaveBasis {
    dim: usize,
    cutoff: usize,
    freqs: Vec<Vec<i64>>,
}

impl PlaneWaveBasis {
    pub fn new(dim: usize, cutoff: usize) -> Self {
        assert!(dim >= 1);
        let side = 2 * cutoff + 1;
        let total = side.pow(dim as u32);
        let freqs = (0..total)
            .map(|flat| {
                let mut k = vec![0i64; dim];
                let mut rem = flat;
                for ki in k.iter_mut().rev() {
                    *ki = (rem % side) as i64 - cutoff as i64;
                    rem /= side;
                }
                k
            })
            .collect();
        PlaneWaveBasis { dim, cutoff, freqs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn freqs(&self) -> &[Vec<i64>] {
        &self.freqs
    }

    pub fn freq(&self, i: usize) -> &[i64] {
        &self.freqs[i]
    }

    /// Position of `k` in the ordering, if it lies in the basis.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let side = 2 * self.cutoff as i64 + 1;
        let mut idx = 0i64;
        for &ki in k {
            if ki.unsigned_abs() as usize > self.cutoff {
                return None;
            }
            idx = idx * side + ki + self.cutoff as i64;
        }
        Some(idx as usize)
    }
}

/// Truncated matrix of `−½ħ²Δ + V` in the plane-wave basis.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    pub hbar: f64,
    pub basis: PlaneWaveBasis,
    pub entries: CMatrix,
    pub potential: FourierPotential,
}

pub(crate) fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar <= 1.0) {
        return Err(Error::invalid(format!("hbar must lie in (0, 1], got {hbar}")));
    }
    Ok(())
}

/// `entry(k, μ) = ½ħ²|μ|² δ_{kμ} + V̂(k − μ)`, exact for trigonometric potentials.
pub fn assemble_hamiltonian(pot: &FourierPotential, hbar: f64, cutoff: usize) -> Result<HamiltonianMatrix> {
    check_hbar(hbar)?;
    if cutoff < pot.bandwidth() {
        return Err(Error::CutoffBelowBandwidth {
            cutoff,
            bandwidth: pot.bandwidth(),
        });
    }
    let basis = PlaneWaveBasis::new(pot.dim(), cutoff);
    let n = basis.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, k) in basis.freqs().iter().enumerate() {
        let k2: i64 = k.iter().map(|v| v * v).sum();
        m[(i, i)] = Complex64::new(0.5 * hbar * hbar * k2 as f64, 0.0);
    }
    let mut shifted = vec![0i64; pot.dim()];
    for (j, k) in basis.freqs().iter().enumerate() {
        for (q, c) in pot.coeffs() {
            // V̂(k − μ) = c  ⇔  μ = k − q
            for ((s, &ki), &qi) in shifted.iter_mut().zip(k).zip(q) {
                *s = ki - qi;
            }
            if let Some(mu) = basis.index_of(&shifted) {
                m[(j, mu)] += c;
            }
        }
    }
    Ok(HamiltonianMatrix {
        hbar,
        basis,
        entries: m,
        potential: pot.clone(),
    })
}

/// Sorted spectrum of a truncated operator with its trust diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub hbar: f64,
    pub dim: usize,
    pub cutoff: usize,
    pub eigenvalues: Vec<f64>,
    /// `‖(H − λ)v‖` of each eigenvector extended by zero outside the basis;
    /// bounds the distance from `λ` to the spectrum of the full operator.
    pub residuals: Vec<f64>,
    /// Largest energy below which every eigenpair passes [`TRUST_TOL`].
    pub trusted_energy: f64,
    /// Fourier-tail bound evaluated at `trusted_energy` (`NaN` when unresolved).
    pub tail_bound: f64,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Eigenvectors (columns, ascending eigenvalue order) of a [`HamiltonianMatrix`].
pub struct Eigenpairs {
    pub spectrum: SpectrumResult,
    pub vectors: CMatrix,
}

/// Residual of basis eigenvectors against the untruncated operator: only
/// frequencies just outside the basis receive a contribution, through `V̂`.
fn outside_residuals(m: &HamiltonianMatrix, vectors: &CMatrix) -> Vec<f64> {
    let pot = &m.potential;
    let cutoff = m.basis.cutoff() as i64;
    let band = pot.bandwidth() as i64;
    let dim = m.basis.dim();
    if band == 0 {
        return vec![0.0; vectors.ncols()];
    }
    // all k with K < |k|_∞ ≤ K + band, and the basis couplings reaching them
    let outer = PlaneWaveBasis::new(dim, (cutoff + band) as usize);
    let mut couplings: Vec<Vec<(usize, Complex64)>> = Vec::new();
    let mut mu = vec![0i64; dim];
    for k in outer.freqs() {
        if k.iter().all(|v| v.abs() <= cutoff) {
            continue;
        }
        let mut row = Vec::new();
        for (q, c) in pot.coeffs() {
            for ((s, &ki), &qi) in mu.iter_mut().zip(k).zip(q) {
                *s = ki - qi;
            }
            if let Some(j) = m.basis.index_of(&mu) {
                row.push((j, c));
            }
        }
        if !row.is_empty() {
            couplings.push(row);
        }
    }
    (0..vectors.ncols())
        .map(|col| {
            couplings
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&(j, c)| c * vectors[(j, col)])
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Full eigendecomposition with trust diagnostics.
pub fn eigen_decompose(m: &HamiltonianMatrix) -> Result<Eigenpairs> {
    let (values, vectors) = hermitian_eigh(&m.entries)?;
    let residuals = outside_residuals(m, &vectors);
    let mut trusted_energy = f64::NEG_INFINITY;
    for (lam, r) in values.iter().zip(&residuals) {
        if *r > TRUST_TOL * (1.0 + lam.abs()) {
            break;
        }
        trusted_energy = *lam;
    }
    // the Fourier-tail bound needs ½ħ²K² above the energy
    let kinetic = 0.5 * m.hbar * m.hbar * (m.basis.cutoff() as f64).powi(2);
    let tail_bound = if trusted_energy.is_finite() && trusted_energy < kinetic {
        truncation_tail_bound(&m.potential, m.hbar, m.basis.cutoff(), trusted_energy)
            .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok(Eigenpairs {
        spectrum: SpectrumResult {
            hbar: m.hbar,
            dim: m.basis.dim(),
            cutoff: m.basis.cutoff(),
            eigenvalues: values,
            residuals,
            trusted_energy,
            tail_bound,
        },
        vectors,
    })
}

/// Ascending spectrum of the truncated operator.
pub fn eigen_spectrum(m: &HamiltonianMatrix) -> Result<SpectrumResult> {
    Ok(eigen_decompose(m)?.spectrum)
}

/// Assemble and diagonalize in one call.
pub fn spectrum(pot: &FourierPotential, hbar: f64, cutoff: usize) -> Result<SpectrumResult> {
    eigen_spectrum(&assemble_hamiltonian(pot, hbar, cutoff)?)
}

/// `sup |V − V̂(0)|` on the internal extrema grid.
pub fn centered_sup_norm(pot: &FourierPotential) -> f64 {
    if pot.is_zero() {
        return 0.0;
    }
    let ext = default_extrema(pot);
    let mean = pot.mean();
    (ext.max_v - mean).abs().max((ext.min_v - mean).abs())
}

/// Shells `|k|_∞ = r` summed exactly up to this distance past the cutoff;
/// beyond it an integral bound takes over.
fn tail_shells(dim: usize) -> usize {
    match dim {
        1 => 20_000,
        2 => 400,
        _ => 40,
    }
}

/// Fourier-tail bound `Σ_{|k|_∞ > K} (‖V − V̂(0)‖_∞ / (½ħ²|k|² − E))²` on the
/// eigenfunction mass outside the basis, from the coefficient inequality
/// `|⟨φ, e_k⟩| ≤ ‖V‖ / |½ħ²|k|² − E|`.
pub fn truncation_tail_bound(pot: &FourierPotential, hbar: f64, cutoff: usize, energy: f64) -> Result<f64> {
    check_hbar(hbar)?;
    let kinetic = 0.5 * hbar * hbar * (cutoff as f64).powi(2);
    if kinetic <= energy {
        return Err(Error::CutoffInsufficient { energy, kinetic });
    }
    let c = centered_sup_norm(pot);
    if c == 0.0 {
        return Ok(0.0);
    }
    let dim = pot.dim();
    let h2 = 0.5 * hbar * hbar;
    let last = cutoff + tail_shells(dim);
    let mut sum = 0.0;
    for r in cutoff + 1..=last {
        sum += shell_sum(dim, r as i64, |k2| (c / (h2 * k2 as f64 - energy)).powi(2));
    }
    // remaining shells: |k|² ≥ r², shell size 2n(2r+1)^{n-1}
    let rr = last as f64 + 0.5;
    let integrand = |r: f64| {
        2.0 * dim as f64 * (2.0 * r + 1.0).powi(dim as i32 - 1) * (c / (h2 * r * r - energy)).powi(2)
    };
    let tail = quad::integrate(|t| integrand(rr / t) * rr / (t * t), 1e-9, 1.0, 1e-14 + 1e-10 * sum);
    Ok(sum + tail)
}

/// `Σ f(|k|²)` over the shell `|k|_∞ = r` in `Z^dim`.
fn shell_sum(dim: usize, r: i64, f: impl Fn(i64) -> f64) -> f64 {
    match dim {
        1 => 2.0 * f(r * r),
        2 => {
            let mut s = 0.0;
            // four edges, corners counted once
            for t in -r..r {
                s += 4.0 * f(r * r + t * t);
            }
            s
        }
        _ => {
            let mut s = 0.0;
            let side = 2 * r + 1;
            let total = (side as usize).pow(dim as u32);
            for flat in 0..total {
                let mut rem = flat;
                let mut on_shell = false;
                let mut k2 = 0;
                for _ in 0..dim {
                    let v = (rem % side as usize) as i64 - r;
                    rem /= side as usize;
                    on_shell |= v.abs() == r;
                    k2 += v * v;
                }
                if on_shell {
                    s += f(k2);
                }
            }
            s
        }
    }
}

/// `Σ_{k ∈ Z^n, k ≠ 0} |k|^{-3}` for n = 1, 2.
pub fn lattice_zeta3(dim: usize) -> Option<f64> {
    match dim {
        // 2ζ(3)
        1 => Some(2.0 * 1.202_056_903_159_594_3),
        // 4ζ(3/2)β(3/2)
        2 => Some(4.0 * 2.612_375_348_685_488_3 * 0.864_502_751_454_837_6),
        _ => None,
    }
}

/// Constants of the Fourier cutoff estimate for eigenfunctions with energy
/// below `b`: the cutoff `g(ħ) = 2bħ^{-2}e^{1/ħ}` on `|k|²` and the remainder
/// bound `C(b) e^{−1/(4ħ)}`.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffLemma {
    pub g: f64,
    pub c_bar: f64,
    pub c_b: f64,
    pub remainder_bound: f64,
}

/// `sup_{0<ħ≤1} ħ^{-2} e^{−1/(2ħ)}`, attained at `ħ = 1/4`.
pub fn lemma_sup() -> f64 {
    16.0 * (-2.0f64).exp()
}

pub fn cutoff_lemma(pot: &FourierPotential, b: f64, hbar: f64) -> Result<CutoffLemma> {
    check_hbar(hbar)?;
    if b <= 0.0 {
        return Err(Error::invalid("upper energy b must be positive"));
    }
    let zeta = lattice_zeta3(pot.dim())
        .ok_or_else(|| Error::invalid("lattice sum Σ|k|^-3 diverges for n ≥ 3"))?;
    let vnorm = {
        let ext = default_extrema(pot);
        ext.max_v.abs().max(ext.min_v.abs())
    };
    let c_bar = 4.0 * (2.0 * b).powf(-0.5) * lemma_sup();
    let c_b = vnorm * c_bar * zeta.sqrt();
    Ok(CutoffLemma {
        g: 2.0 * b * hbar.powi(-2) * (1.0 / hbar).exp(),
        c_bar,
        c_b,
        remainder_bound: c_b * (-0.25 / hbar).exp(),
    })
}

/// Result of counting eigenvalues in a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EigenCount {
    pub count: usize,
    /// False when the window reaches above the trusted energy.
    pub trusted: bool,
}

/// Number of eigenvalues in the open window `(a, b)`, with multiplicity.
pub fn count_eigenvalues(spec: &SpectrumResult, a: f64, b: f64) -> Result<EigenCount> {
    if !(a < b) {
        return Err(Error::invalid(format!("empty window ({a}, {b})")));
    }
    let count = spec.eigenvalues.iter().filter(|&&e| e > a && e < b).count();
    Ok(EigenCount {
        count,
        trusted: b <= spec.trusted_energy,
    })
}

/// `#{λ : lo ≤ λ ≤ e}` for the closed counting function, with a relative
/// slack of `1e-12` at the upper end.
pub fn count_below(spec: &SpectrumResult, e: f64) -> usize {
    let top = e + 1e-12 * (1.0 + e.abs());
    spec.eigenvalues.iter().filter(|&&v| v <= top).count()
}

/// Phase-space volume estimate `Vol{a < ½|p|² + V(x) < b}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VolumeEstimate {
    pub value: f64,
    /// Zero for the exact 1D quadrature.
    pub std_error: f64,
    pub empty: bool,
}

/// Roots of `V − level` on `[0, 2π]`, located on a fine grid then bisected.
fn level_crossings(pot: &FourierPotential, level: f64) -> Vec<f64> {
    let n = 4096 * pot.bandwidth().max(1);
    let h = TAU / n as f64;
    let f = |x: f64| pot.eval(&[x]) - level;
    let mut roots = Vec::new();
    let mut x0 = 0.0;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = i as f64 * h;
        let f1 = f(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi) = (x0, x1);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if f(mid) * f0 > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Unit-ball volume in `R^n`.
pub(crate) fn unit_ball_volume(n: usize) -> f64 {
    let nf = n as f64;
    PI.powf(0.5 * nf) / gamma(0.5 * nf + 1.0)
}

/// Lanczos approximation to Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Volume of `{a < H < b}` for `H = ½|p|² + V`. In 1D this is the exact slice
/// integral `∫ 2√(2(b−V))₊ − 2√(2(a−V))₊ dx`; in higher dimension a stratified
/// Monte Carlo estimate over the box `|p|_∞ ≤ √(2(b − min V))`.
pub fn weyl_volume(pot: &FourierPotential, a: f64, b: f64, samples: usize, seed: u64) -> Result<VolumeEstimate> {
    if samples < 10_000 {
        return Err(Error::invalid("weyl_volume needs at least 1e4 samples"));
    }
    let ext = default_extrema(pot);
    if b <= ext.min_v || b <= a {
        return Ok(VolumeEstimate {
            value: 0.0,
            std_error: 0.0,
            empty: true,
        });
    }
    if pot.dim() == 1 {
        let value = slice_volume_1d(pot, a, b);
        return Ok(VolumeEstimate {
            value,
            std_error: 0.0,
            empty: value == 0.0,
        });
    }
    Ok(stratified_volume(pot, a, b, ext.min_v, samples, seed))
}

fn slice_volume_1d(pot: &FourierPotential, a: f64, b: f64) -> f64 {
    let mut breaks = vec![0.0, TAU];
    breaks.extend(level_crossings(pot, a));
    breaks.extend(level_crossings(pot, b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let f = |x: f64| {
        let v = pot.eval(&[x]);
        2.0 * (2.0 * (b - v).max(0.0)).sqrt() - 2.0 * (2.0 * (a - v).max(0.0)).sqrt()
    };
    quad::integrate_with_breaks(f, &breaks, 1e-11)
}

fn stratified_volume(pot: &FourierPotential, a: f64, b: f64, min_v: f64, samples: usize, seed: u64) -> VolumeEstimate {
    let n = pot.dim();
    let d = 2 * n;
    let pmax = (2.0 * (b - min_v)).sqrt();
    // m^d strata with two samples each
    let m = (((samples / 2) as f64).powf(1.0 / d as f64)).floor().max(1.0) as usize;
    let strata = m.pow(d as u32);
    let widths: Vec<f64> = (0..d)
        .map(|i| if i < n { TAU } else { 2.0 * pmax } / m as f64)
        .collect();
    let cell_volume: f64 = widths.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut var = 0.0;
    let mut z = vec![0.0; d];
    for s in 0..strata {
        let mut vals = [0.0; 2];
        for val in vals.iter_mut() {
            let mut rem = s;
            for (i, zi) in z.iter_mut().enumerate() {
                let cell = rem % m;
                rem /= m;
                let lo = if i < n { 0.0 } else { -pmax };
                *zi = lo + (cell as f64 + rng.random::<f64>()) * widths[i];
            }
            let p2: f64 = z[n..].iter().map(|p| p * p).sum();
            let h = 0.5 * p2 + pot.eval(&z[..n]);
            *val = if h > a && h < b { 1.0 } else { 0.0 };
        }
        total += 0.5 * (vals[0] + vals[1]) * cell_volume;
        // per-stratum variance of the two-sample mean
        var += 0.25 * (vals[0] - vals[1]).powi(2) * cell_volume * cell_volume * 0.5;
    }
    VolumeEstimate {
        value: total,
        std_error: var.sqrt(),
        empty: total == 0.0,
    }
}

/// Exact `Vol{a < H < b}` through the ball-volume slice formula
/// `∫ ω_n[(2(b−V))₊^{n/2} − (2(a−V))₊^{n/2}] dx`, by tensor trapezoid in x.
/// Used as the reference for the Monte Carlo estimator.
pub fn weyl_volume_slices(pot: &FourierPotential, a: f64, b: f64, res: usize) -> f64 {
    let n = pot.dim();
    let omega = unit_ball_volume(n);
    let h = TAU / res as f64;
    let half = 0.5 * n as f64;
    pot.grid_values(res)
        .iter()
        .map(|&v| omega * ((2.0 * (b - v)).max(0.0).powf(half) - (2.0 * (a - v)).max(0.0).powf(half)))
        .sum::<f64>()
        * h.powi(n as i32)
}

/// How the plane-wave cutoff is chosen for each ħ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CutoffRule {
    Fixed(usize),
    /// Large enough to resolve eigenpairs up to the given energy.
    Auto { energy: f64 },
}

impl CutoffRule {
    pub fn cutoff(&self, pot: &FourierPotential, hbar: f64) -> usize {
        match *self {
            CutoffRule::Fixed(k) => k,
            CutoffRule::Auto { energy } => auto_cutoff(pot, hbar, energy),
        }
    }
}

/// Cutoff resolving eigenfunctions with energy up to `energy`: 30% beyond the
/// classically allowed momentum, plus a margin for the evanescent decay.
pub fn auto_cutoff(pot: &FourierPotential, hbar: f64, energy: f64) -> usize {
    let ext = default_extrema(pot);
    let band = pot.bandwidth().max(1);
    let pmax = (2.0 * (energy - ext.min_v + pot.l1_norm()).max(0.5)).sqrt();
    let margin = if pot.dim() == 1 { 40 * band } else { 6 * band };
    ((1.3 * pmax / hbar).ceil() as usize + margin).max(pot.bandwidth())
}

/// Eigenvalue counts against the Weyl law over a list of ħ.
#[derive(Clone, Debug, Serialize)]
pub struct WeylCountReport {
    pub hbar: Vec<f64>,
    pub window: (f64, f64),
    pub cutoffs: Vec<usize>,
    pub counts: Vec<usize>,
    pub trusted: Vec<bool>,
    pub volume: f64,
    pub volume_std_error: f64,
    /// `N · (2πħ)^n`.
    pub scaled_counts: Vec<f64>,
}

impl WeylCountReport {
    /// Smallest `C` with `|N(2πħ)^n − Vol| ≤ C ħ` on every sample.
    pub fn remainder_constant(&self) -> f64 {
        self.hbar
            .iter()
            .zip(&self.scaled_counts)
            .map(|(h, s)| (s - self.volume).abs() / h)
            .fold(0.0, f64::max)
    }
}

pub fn weyl_count(
    pot: &FourierPotential,
    hbars: &[f64],
    window: (f64, f64),
    rule: CutoffRule,
    samples: usize,
    seed: u64,
) -> Result<WeylCountReport> {
    use rayon::prelude::*;
    let (a, b) = window;
    let vol = weyl_volume(pot, a, b, samples, seed)?;
    let n = pot.dim() as i32;
    let per_hbar: Vec<Result<(usize, EigenCount)>> = hbars
        .par_iter()
        .map(|&h| {
            let k = rule.cutoff(pot, h);
            let spec = spectrum(pot, h, k)?;
            Ok((k, count_eigenvalues(&spec, a, b)?))
        })
        .collect();
    let mut cutoffs = Vec::new();
    let mut counts = Vec::new();
    let mut trusted = Vec::new();
    let mut scaled = Vec::new();
    for (r, &h) in per_hbar.into_iter().zip(hbars) {
        let (k, c) = r?;
        cutoffs.push(k);
        counts.push(c.count);
        trusted.push(c.trusted);
        scaled.push(c.count as f64 * (TAU * h).powi(n));
    }
    Ok(WeylCountReport {
        hbar: hbars.to_vec(),
        window,
        cutoffs,
        counts,
        trusted,
        volume: vol.value,
        volume_std_error: vol.std_error,
        scaled_counts: scaled,
    })
}

/// Dense lookup from frequency to basis index, for callers working with
/// arbitrary frequency sets.
pub fn index_map(basis: &PlaneWaveBasis) -> HashMap<Vec<i64>, usize> {
    basis
        .freqs()
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), i))
        .collect()
}
