//! Toroidal Weyl quantization in the plane-wave basis, the Wigner transform,
//! and the Calderón–Vaillancourt bound.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::io::{fmt_e12, Csv};
use crate::linalg::{operator_norm, CMatrix, CVector};
use crate::planewave::{check_hbar, gamma, PlaneWaveBasis};
use crate::symbol::PhaseSpaceFunction;

/// `Op_ħ^w(b)` restricted to a plane-wave basis.
#[derive(Clone, Debug)]
pub struct WeylMatrix {
    pub hbar: f64,
    pub basis: PlaneWaveBasis,
    pub entries: CMatrix,
}

/// Quadrature points per axis for a bandwidth-`Q` symbol.
pub fn quadrature_grid(bandwidth: usize) -> usize {
    4 * bandwidth + 4
}

/// `entry(j, m) = b̂(j − m, ħ(j + m)/2)` on the basis `|k|_∞ ≤ K`.
pub fn weyl_matrix(b: &PhaseSpaceFunction, hbar: f64, cutoff: usize) -> Result<WeylMatrix> {
    check_hbar(hbar)?;
    let q = b
        .bandwidth()
        .ok_or_else(|| Error::invalid("numeric symbol has no bandwidth; use weyl_matrix_sampled"))?;
    if cutoff < q {
        return Err(Error::CutoffBelowBandwidth { cutoff, bandwidth: q });
    }
    let basis = PlaneWaveBasis::new(b.dim(), cutoff);
    let entries = assemble(b, hbar, &basis, Some(q), quadrature_grid(q));
    Ok(WeylMatrix { hbar, basis, entries })
}

/// Weyl matrix of an arbitrary (possibly numeric) symbol on `basis`, with
/// the x-Fourier coefficients taken by the trapezoid rule on `grid` points
/// per axis whenever no closed form is available.
pub fn weyl_matrix_sampled(b: &PhaseSpaceFunction, hbar: f64, basis: &PlaneWaveBasis, grid: usize) -> Result<WeylMatrix> {
    check_hbar(hbar)?;
    if b.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: b.dim() });
    }
    if grid < 2 {
        return Err(Error::invalid("quadrature grid needs at least 2 points"));
    }
    Ok(WeylMatrix {
        hbar,
        basis: basis.clone(),
        entries: assemble(b, hbar, basis, b.bandwidth(), grid),
    })
}

fn assemble(b: &PhaseSpaceFunction, hbar: f64, basis: &PlaneWaveBasis, band: Option<usize>, grid: usize) -> CMatrix {
    let n = basis.dim();
    let size = basis.len();
    let freqs = basis.freqs();
    let within = |j: &[i64], m: &[i64]| match band {
        Some(q) => j.iter().zip(m).all(|(a, c)| (a - c).unsigned_abs() as usize <= q),
        None => true,
    };
    let mut out = CMatrix::zeros(size, size);
    if b.has_closed_fourier() {
        let rows: Vec<Vec<(usize, Complex64)>> = (0..size)
            .into_par_iter()
            .map(|j| {
                let mut q = vec![0i64; n];
                let mut eta = vec![0.0; n];
                (0..size)
                    .filter(|&m| within(&freqs[j], &freqs[m]))
                    .map(|m| {
                        for i in 0..n {
                            q[i] = freqs[j][i] - freqs[m][i];
                            eta[i] = 0.5 * hbar * (freqs[j][i] + freqs[m][i]) as f64;
                        }
                        (m, b.fourier_coeff(&q, &eta, grid))
                    })
                    .collect()
            })
            .collect();
        for (j, row) in rows.into_iter().enumerate() {
            for (m, v) in row {
                out[(j, m)] = v;
            }
        }
        return out;
    }
    // group the pairs by κ = j + m; sample b(·, ħκ/2) once per κ
    let mut by_kappa: BTreeMap<Vec<i64>, Vec<(usize, usize)>> = BTreeMap::new();
    for j in 0..size {
        for m in 0..size {
            if within(&freqs[j], &freqs[m]) {
                let kappa: Vec<i64> = freqs[j].iter().zip(&freqs[m]).map(|(a, c)| a + c).collect();
                by_kappa.entry(kappa).or_default().push((j, m));
            }
        }
    }
    let h = TAU / grid as f64;
    let total = grid.pow(n as u32);
    let groups: Vec<(Vec<i64>, Vec<(usize, usize)>)> = by_kappa.into_iter().collect();
    let filled: Vec<Vec<(usize, usize, Complex64)>> = groups
        .par_iter()
        .map(|(kappa, pairs)| {
            let eta: Vec<f64> = kappa.iter().map(|&k| 0.5 * hbar * k as f64).collect();
            let mut x = vec![0.0; n];
            let mut idx = vec![0usize; n];
            let samples: Vec<Complex64> = (0..total)
                .map(|flat| {
                    unflatten(flat, grid, &mut idx);
                    for i in 0..n {
                        x[i] = idx[i] as f64 * h;
                    }
                    b.eval_complex(&x, &eta)
                })
                .collect();
            pairs
                .iter()
                .map(|&(j, m)| {
                    let q: Vec<i64> = freqs[j].iter().zip(&freqs[m]).map(|(a, c)| a - c).collect();
                    (j, m, dft_at(&samples, grid, n, &q))
                })
                .collect()
        })
        .collect();
    for group in filled {
        for (j, m, v) in group {
            out[(j, m)] = v;
        }
    }
    out
}

fn unflatten(flat: usize, res: usize, idx: &mut [usize]) {
    let mut rem = flat;
    for v in idx.iter_mut().rev() {
        *v = rem % res;
        rem /= res;
    }
}

/// `res^{-n} Σ_g f(x_g) e^{-iq·x_g}` on the uniform grid, row-major samples.
fn dft_at(samples: &[Complex64], res: usize, n: usize, q: &[i64]) -> Complex64 {
    // per-axis twiddles, reduced mod res so large |q| stays exact
    let tw: Vec<Vec<Complex64>> = q
        .iter()
        .map(|&qi| {
            (0..res)
                .map(|g| {
                    let r = (qi * g as i64).rem_euclid(res as i64);
                    Complex64::from_polar(1.0, -TAU * r as f64 / res as f64)
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; n];
    let mut acc = Complex64::new(0.0, 0.0);
    for (flat, s) in samples.iter().enumerate() {
        unflatten(flat, res, &mut idx);
        let mut w = Complex64::new(1.0, 0.0);
        for i in 0..n {
            w *= tw[i][idx[i]];
        }
        acc += s * w;
    }
    acc / samples.len() as f64
}

/// Wigner transform sampled on `x ∈ (2π/res)Z^n` and `η = ħκ/2`, `|κ|_∞ ≤ 2K`.
#[derive(Clone, Debug)]
pub struct WignerTable {
    pub hbar: f64,
    pub dim: usize,
    pub cutoff: usize,
    pub res: usize,
    pub kappas: Vec<Vec<i64>>,
    /// κ-major, then x-grid in row-major order.
    pub values: Vec<f64>,
    /// Largest discarded imaginary part.
    pub max_imag: f64,
}

impl WignerTable {
    pub fn grid_len(&self) -> usize {
        self.res.pow(self.dim as u32)
    }

    pub fn slice(&self, kappa_index: usize) -> &[f64] {
        let g = self.grid_len();
        &self.values[kappa_index * g..(kappa_index + 1) * g]
    }

    /// `Σ_η ∫ W dx`, which equals `‖ψ‖²`.
    pub fn total_mass(&self) -> f64 {
        let w = (TAU / self.res as f64).powi(self.dim as i32);
        self.values.iter().sum::<f64>() * w
    }

    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = Vec::new();
        if self.dim == 1 {
            header.push("x_index".into());
            header.push("kappa".into());
        } else {
            header.extend((1..=self.dim).map(|i| format!("x_index_{i}")));
            header.extend((1..=self.dim).map(|i| format!("kappa_{i}")));
        }
        header.push("value".into());
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&refs);
        let mut idx = vec![0usize; self.dim];
        for (ki, kappa) in self.kappas.iter().enumerate() {
            for (flat, v) in self.slice(ki).iter().enumerate() {
                unflatten(flat, self.res, &mut idx);
                let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                row.extend(kappa.iter().map(|k| k.to_string()));
                row.push(fmt_e12(*v));
                csv.row(row);
            }
        }
        csv.finish()
    }
}

fn check_state(basis: &PlaneWaveBasis, psi: &CVector) -> Result<()> {
    if psi.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: psi.len() });
    }
    if psi.norm() > 1.0 + 1e-12 {
        return Err(Error::invalid(format!("state norm {} exceeds 1", psi.norm())));
    }
    Ok(())
}

/// `W(x, ħκ/2) = (2π)^{-n} Σ_{k+m=κ} c_k c̄_m e^{i(k−m)·x}` for
/// `ψ = Σ c_k (2π)^{-n/2} e^{ik·x}`.
pub fn wigner_transform(basis: &PlaneWaveBasis, psi: &CVector, hbar: f64, res: usize) -> Result<WignerTable> {
    check_hbar(hbar)?;
    check_state(basis, psi)?;
    if res == 0 {
        return Err(Error::invalid("Wigner grid resolution must be positive"));
    }
    let n = basis.dim();
    let cutoff = basis.cutoff();
    let lattice = PlaneWaveBasis::new(n, 2 * cutoff);
    let g = res.pow(n as u32);
    let norm = TAU.powi(-(n as i32));
    // e^{i d x_g} for d ∈ [−2K, 2K] per grid index
    let span = 2 * cutoff as i64;
    let table: Vec<Vec<Complex64>> = (-span..=span)
        .map(|d| {
            (0..res)
                .map(|gi| {
                    let r = (d * gi as i64).rem_euclid(res as i64);
                    Complex64::from_polar(1.0, TAU * r as f64 / res as f64)
                })
                .collect()
        })
        .collect();
    let slices: Vec<(Vec<f64>, f64)> = lattice
        .freqs()
        .par_iter()
        .map(|kappa| {
            // terms (q = k − m, c_k c̄_m) with k + m = κ
            let mut terms: Vec<(Vec<i64>, Complex64)> = Vec::new();
            let mut k = vec![0i64; n];
            let mut m = vec![0i64; n];
            for (ki, kf) in basis.freqs().iter().enumerate() {
                for i in 0..n {
                    k[i] = kf[i];
                    m[i] = kappa[i] - kf[i];
                }
                if let Some(mi) = basis.index_of(&m) {
                    let c = psi[ki] * psi[mi].conj();
                    if c != Complex64::new(0.0, 0.0) {
                        terms.push((k.iter().zip(&m).map(|(a, b)| a - b).collect(), c));
                    }
                }
            }
            let mut vals = vec![0.0; g];
            let mut imag = 0.0f64;
            let mut idx = vec![0usize; n];
            for (flat, v) in vals.iter_mut().enumerate() {
                unflatten(flat, res, &mut idx);
                let mut s = Complex64::new(0.0, 0.0);
                for (q, c) in &terms {
                    let mut w = *c;
                    for i in 0..n {
                        w *= table[(q[i] + span) as usize][idx[i]];
                    }
                    s += w;
                }
                s *= norm;
                imag = imag.max(s.im.abs());
                *v = s.re;
            }
            (vals, imag)
        })
        .collect();
    let mut values = Vec::with_capacity(g * lattice.len());
    let mut max_imag = 0.0f64;
    for (v, im) in slices {
        values.extend(v);
        max_imag = max_imag.max(im);
    }
    Ok(WignerTable {
        hbar,
        dim: n,
        cutoff,
        res,
        kappas: lattice.freqs().to_vec(),
        values,
        max_imag,
    })
}

/// `Σ_η ∫ b(x, η) W(x, η) dx` by the trapezoid rule on the table grid.
pub fn wigner_pairing(b: &PhaseSpaceFunction, w: &WignerTable, hbar: f64) -> Result<f64> {
    if (hbar - w.hbar).abs() > 1e-15 * hbar {
        return Err(Error::invalid(format!(
            "Wigner table built at hbar={} but pairing requested at hbar={hbar}",
            w.hbar
        )));
    }
    if b.dim() != w.dim {
        return Err(Error::DimensionMismatch { expected: w.dim, got: b.dim() });
    }
    if let Some(q) = b.bandwidth() {
        if w.res <= 2 * w.cutoff + q {
            return Err(Error::invalid(format!(
                "grid resolution {} cannot integrate bandwidth {} exactly (needs > {})",
                w.res,
                q,
                2 * w.cutoff + q
            )));
        }
    }
    let n = w.dim;
    let h = TAU / w.res as f64;
    let total: f64 = w
        .kappas
        .par_iter()
        .enumerate()
        .map(|(ki, kappa)| {
            let eta: Vec<f64> = kappa.iter().map(|&k| 0.5 * hbar * k as f64).collect();
            let mut idx = vec![0usize; n];
            let mut x = vec![0.0; n];
            w.slice(ki)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(flat, v)| {
                    unflatten(flat, w.res, &mut idx);
                    for i in 0..n {
                        x[i] = idx[i] as f64 * h;
                    }
                    b.eval(&x, &eta) * v
                })
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(total * h.powi(n as i32))
}

/// Weyl matrix whose symbol is a sampled Wigner table, Fourier coefficients
/// by the discrete transform of each κ-slice.
pub fn weyl_matrix_from_table(w: &WignerTable) -> Result<WeylMatrix> {
    if w.res <= 4 * w.cutoff {
        return Err(Error::invalid("Wigner grid too coarse to resolve its own bandwidth"));
    }
    let basis = PlaneWaveBasis::new(w.dim, w.cutoff);
    let size = basis.len();
    let lattice = PlaneWaveBasis::new(w.dim, 2 * w.cutoff);
    let mut m = CMatrix::zeros(size, size);
    let samples: Vec<Vec<Complex64>> = (0..w.kappas.len())
        .map(|ki| w.slice(ki).iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    for j in 0..size {
        for k in 0..size {
            let (fj, fk) = (basis.freq(j), basis.freq(k));
            let kappa: Vec<i64> = fj.iter().zip(fk).map(|(a, b)| a + b).collect();
            let q: Vec<i64> = fj.iter().zip(fk).map(|(a, b)| a - b).collect();
            let ki = lattice.index_of(&kappa).expect("κ within 2K");
            m[(j, k)] = dft_at(&samples[ki], w.res, w.dim, &q);
        }
    }
    Ok(WeylMatrix { hbar: w.hbar, basis, entries: m })
}

/// `‖(2π)^n Op(W_φ)ψ − ⟨φ, ψ⟩φ‖`: the Weyl operator of the Wigner transform
/// of φ acts as the rank-one projector, up to the `(2π)^{-n}` normalization
/// of the transform.
pub fn projector_check(basis: &PlaneWaveBasis, phi: &CVector, psi: &CVector, hbar: f64) -> Result<f64> {
    check_state(basis, phi)?;
    if psi.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: psi.len() });
    }
    let w = wigner_transform(basis, phi, hbar, 4 * basis.cutoff() + 2)?;
    let op = weyl_matrix_from_table(&w)?;
    let scale = Complex64::new(TAU.powi(basis.dim() as i32), 0.0);
    let lhs = &op.entries * psi * scale;
    let rhs = phi * phi.dotc(psi);
    Ok((lhs - rhs).norm())
}

/// Order `M(n)` in the Calderón–Vaillancourt sum `Σ_{|α| ≤ 2M}`.
pub fn cv_order(n: usize) -> usize {
    if n % 2 == 0 {
        n / 2 + 1
    } else {
        (n + 1) / 2 + 1
    }
}

/// `2^{n+1}/(n+2) · π^{(3n−1)/2} / Γ((n+1)/2)`.
pub fn cv_constant(n: usize) -> f64 {
    let nf = n as f64;
    2f64.powi(n as i32 + 1) / (nf + 2.0) * PI.powf(0.5 * (3.0 * nf - 1.0)) / gamma(0.5 * (nf + 1.0))
}

/// Multi-indices `α ∈ N^n` with `|α| ≤ order`, graded then lexicographic.
pub fn multi_indices(n: usize, order: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; n]];
    let mut frontier = vec![vec![0u32; n]];
    for _ in 0..order {
        let mut next: Vec<Vec<u32>> = Vec::new();
        for a in &frontier {
            for i in 0..n {
                let mut b = a.clone();
                b[i] += 1;
                if !next.contains(&b) {
                    next.push(b);
                }
            }
        }
        next.sort();
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Calderón–Vaillancourt bound from the sup norms `‖∂_x^α b‖_∞`, which must
/// cover every `|α| ≤ 2M(n)`.
pub fn cv_bound(sup_norms: &BTreeMap<Vec<u32>, f64>, n: usize) -> Result<f64> {
    let mut sum = 0.0;
    for alpha in multi_indices(n, 2 * cv_order(n)) {
        let v = sup_norms
            .get(&alpha)
            .ok_or_else(|| Error::invalid(format!("missing sup norm for multi-index {alpha:?}")))?;
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::invalid(format!("invalid sup norm {v} for {alpha:?}")));
        }
        sum += v;
    }
    Ok(cv_constant(n) * sum)
}

/// Sup norms of `∂_x^α b` for a band-limited symbol, by Fourier
/// differentiation, over an x-grid of `res` points per axis and the given
/// momentum samples.
pub fn symbol_sup_norms(b: &PhaseSpaceFunction, res: usize, etas: &[Vec<f64>]) -> Result<BTreeMap<Vec<u32>, f64>> {
    let q = b
        .bandwidth()
        .ok_or_else(|| Error::invalid("sup norms need a band-limited symbol"))?;
    let n = b.dim();
    let grid = quadrature_grid(q);
    let freqs = PlaneWaveBasis::new(n, q);
    let h = TAU / res as f64;
    let mut out = BTreeMap::new();
    let alphas = multi_indices(n, 2 * cv_order(n));
    for alpha in &alphas {
        out.insert(alpha.clone(), 0.0f64);
    }
    let mut idx = vec![0usize; n];
    for eta in etas {
        let coeffs: Vec<Complex64> = freqs.freqs().iter().map(|k| b.fourier_coeff(k, eta, grid)).collect();
        for flat in 0..res.pow(n as u32) {
            unflatten(flat, res, &mut idx);
            for alpha in &alphas {
                let mut v = Complex64::new(0.0, 0.0);
                for (k, c) in freqs.freqs().iter().zip(&coeffs) {
                    let mut factor = Complex64::new(1.0, 0.0);
                    let mut th = 0.0;
                    for i in 0..n {
                        factor *= Complex64::new(0.0, k[i] as f64).powu(alpha[i]);
                        th += k[i] as f64 * idx[i] as f64 * h;
                    }
                    v += c * factor * Complex64::from_polar(1.0, th);
                }
                let e = out.get_mut(alpha).expect("inserted");
                *e = e.max(v.norm());
            }
        }
    }
    Ok(out)
}

/// `‖(i/ħ)[Op(b), Op(a)] − Op({b, a})‖` on the basis `|k|_∞ ≤ K`. The products
/// are formed in a basis wide enough that no intermediate frequency is lost.
pub fn moyal_residual(a: &PhaseSpaceFunction, b: &PhaseSpaceFunction, hbar: f64, cutoff: usize) -> Result<f64> {
    let (qa, qb) = match (a.bandwidth(), b.bandwidth()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::invalid("Moyal check needs band-limited symbols")),
    };
    let wide = cutoff + qa.max(qb);
    let opa = weyl_matrix(a, hbar, wide)?;
    let opb = weyl_matrix(b, hbar, wide)?;
    let comm = &opb.entries * &opa.entries - &opa.entries * &opb.entries;
    let bracket = b.poisson(a)?;
    let opc = weyl_matrix(&bracket, hbar, cutoff.max(qa + qb))?;
    let inner = PlaneWaveBasis::new(a.dim(), cutoff);
    let wide_idx: Vec<usize> = inner
        .freqs()
        .iter()
        .map(|k| opa.basis.index_of(k).expect("nested bases"))
        .collect();
    let c_idx: Vec<usize> = inner
        .freqs()
        .iter()
        .map(|k| opc.basis.index_of(k).expect("nested bases"))
        .collect();
    let s = inner.len();
    let scale = Complex64::new(0.0, 1.0 / hbar);
    let diff = CMatrix::from_fn(s, s, |r, c| {
        comm[(wide_idx[r], wide_idx[c])] * scale - opc.entries[(c_idx[r], c_idx[c])]
    });
    Ok(operator_norm(&diff))
}

/// Moyal residuals over a list of ħ with the fitted log-log slope.
#[derive(Clone, Debug, Serialize)]
pub struct MoyalReport {
    pub hbar: Vec<f64>,
    pub residual: Vec<f64>,
    /// `None` when every residual is at rounding level.
    pub slope: Option<f64>,
    pub exact: bool,
}

pub fn moyal_scaling(a: &PhaseSpaceFunction, b: &PhaseSpaceFunction, hbars: &[f64], cutoff: usize) -> Result<MoyalReport> {
    let residual = hbars
        .iter()
        .map(|&h| moyal_residual(a, b, h, cutoff))
        .collect::<Result<Vec<f64>>>()?;
    let exact = residual.iter().all(|&r| r <= 1e-10);
    let slope = if exact {
        None
    } else {
        let lx: Vec<f64> = hbars.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = residual.iter().map(|r| r.max(1e-300).ln()).collect();
        Some(linear_fit(&lx, &ly).0)
    };
    Ok(MoyalReport {
        hbar: hbars.to_vec(),
        residual,
        slope,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planewave::{assemble_hamiltonian, eigen_decompose};
    use crate::symbol::PolyTerm;
    use crate::torus::FourierPotential;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn unit(basis: &PlaneWaveBasis, k: &[i64]) -> CVector {
        let mut v = CVector::zeros(basis.len());
        v[basis.index_of(k).unwrap()] = c(1.0);
        v
    }

    /// `⟨e_j, Op(b) e_m⟩` from the defining sum-integral
    /// `(2π)^{-1} Σ_κ ∫ e^{i(x−y)κ} b(y, ħκ/2) e_m(2y − x) dy`, 1D, by the
    /// trapezoid rule in both x and y. Only κ with `|κ − 2m| ≤ Q` contribute.
    fn defining_entry(b: &PhaseSpaceFunction, hbar: f64, j: i64, m: i64, q: usize) -> Complex64 {
        let res = 8 * (j.abs() + m.abs()) as usize + 4 * q + 16;
        let h = TAU / res as f64;
        let norm = 1.0 / TAU.sqrt();
        let mut total = Complex64::new(0.0, 0.0);
        for kappa in (2 * m - q as i64)..=(2 * m + q as i64) {
            let eta = [0.5 * hbar * kappa as f64];
            for ix in 0..res {
                let x = ix as f64 * h;
                let ej = Complex64::from_polar(norm, -(j as f64) * x);
                let mut inner = Complex64::new(0.0, 0.0);
                for iy in 0..res {
                    let y = iy as f64 * h;
                    let em = Complex64::from_polar(norm, m as f64 * (2.0 * y - x));
                    inner += Complex64::from_polar(1.0, (x - y) * kappa as f64) * b.eval_complex(&[y], &eta) * em;
                }
                total += ej * inner * h / TAU;
            }
        }
        total * h
    }

    #[test]
    fn midpoint_rule_matches_defining_integral() {
        let b = PhaseSpaceFunction::polynomial(
            1,
            &[
                PolyTerm { q: vec![1], eta_powers: vec![1], re: 0.3, im: 0.2 },
                PolyTerm { q: vec![-1], eta_powers: vec![1], re: 0.3, im: -0.2 },
                PolyTerm { q: vec![0], eta_powers: vec![2], re: 0.5, im: 0.0 },
                PolyTerm { q: vec![2], eta_powers: vec![0], re: 0.1, im: 0.0 },
                PolyTerm { q: vec![-2], eta_powers: vec![0], re: 0.1, im: 0.0 },
            ],
        )
        .unwrap();
        let hbar = 0.7;
        let w = weyl_matrix(&b, hbar, 3).unwrap();
        for j in -3..=3i64 {
            for m in -3..=3i64 {
                let direct = defining_entry(&b, hbar, j, m, 2);
                let mid = w.entries[(w.basis.index_of(&[j]).unwrap(), w.basis.index_of(&[m]).unwrap())];
                assert!((direct - mid).norm() < 1e-10, "({j},{m}): {direct} vs {mid}");
            }
        }
    }

    #[test]
    fn weyl_examples() {
        let kin = weyl_matrix(&PhaseSpaceFunction::kinetic(1), 0.5, 3).unwrap();
        for (i, k) in kin.basis.freqs().iter().enumerate() {
            assert!((kin.entries[(i, i)] - c(0.125 * (k[0] * k[0]) as f64)).norm() < 1e-15);
        }
        let one = weyl_matrix(&PhaseSpaceFunction::constant(2, 1.0), 0.5, 2).unwrap();
        assert!((one.entries - CMatrix::identity(25, 25)).norm() < 1e-15);
        assert!(weyl_matrix(&PhaseSpaceFunction::potential(&FourierPotential::harmonic(1, 0, 3, 1.0, 0.0)), 1.0, 2).is_err());
    }

    #[test]
    fn weyl_of_hamiltonian_matches_assembly() {
        let v = FourierPotential::cosine(2, 0, 1.0)
            .add(&FourierPotential::harmonic(2, 1, 1, 0.2, 0.5))
            .unwrap();
        let h = assemble_hamiltonian(&v, 0.4, 4).unwrap();
        let w = weyl_matrix(&PhaseSpaceFunction::mechanical(&v), 0.4, 4).unwrap();
        assert!((h.entries - &w.entries).iter().all(|z| z.norm() <= 1e-12));
        // same through quadrature instead of the closed form
        let vv = v.clone();
        let numeric = PhaseSpaceFunction::numeric(2, move |x, e| 0.5 * (e[0] * e[0] + e[1] * e[1]) + vv.eval(x));
        // grid must exceed 2K + Q so that no frequency aliases
        let s = weyl_matrix_sampled(&numeric, 0.4, &w.basis, 12).unwrap();
        assert!((s.entries - &w.entries).iter().all(|z| z.norm() <= 1e-12));
    }

    #[test]
    fn wigner_examples() {
        let basis = PlaneWaveBasis::new(1, 2);
        let hbar = 0.5;
        // ψ = e_1: W = (2π)^{-1} at κ = 2 (η = ħ)
        let w = wigner_transform(&basis, &unit(&basis, &[1]), hbar, 16).unwrap();
        for (ki, kappa) in w.kappas.iter().enumerate() {
            let expect = if kappa[0] == 2 { 1.0 / TAU } else { 0.0 };
            assert!(w.slice(ki).iter().all(|v| (v - expect).abs() < 1e-15));
        }
        let zero = wigner_transform(&basis, &CVector::zeros(5), hbar, 16).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        // cross term of (e_0 + e_1)/√2 at κ = 1
        let mut psi = unit(&basis, &[0]) + unit(&basis, &[1]);
        psi /= c(2f64.sqrt());
        let w = wigner_transform(&basis, &psi, hbar, 16).unwrap();
        let k1 = w.kappas.iter().position(|k| k[0] == 1).unwrap();
        for (g, v) in w.slice(k1).iter().enumerate() {
            let x = g as f64 * TAU / 16.0;
            assert!((v - x.cos() / TAU).abs() < 1e-15);
        }
        assert!((w.total_mass() - 1.0).abs() < 1e-12);
        assert!(wigner_transform(&basis, &(psi * c(2.0)), hbar, 16).is_err());
    }

    #[test]
    fn pairing_examples() {
        let basis = PlaneWaveBasis::new(1, 4);
        let hbar = 0.3;
        let psi = unit(&basis, &[3]);
        let w = wigner_transform(&basis, &psi, hbar, 20).unwrap();
        let one = wigner_pairing(&PhaseSpaceFunction::constant(1, 1.0), &w, hbar).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let kin = wigner_pairing(&PhaseSpaceFunction::kinetic(1), &w, hbar).unwrap();
        assert!((kin - 0.5 * hbar * hbar * 9.0).abs() < 1e-12);
        assert!(wigner_pairing(&PhaseSpaceFunction::kinetic(1), &w, 0.31).is_err());

        let v = FourierPotential::cosine(1, 0, 1.0);
        let m = assemble_hamiltonian(&v, 1.0, 16).unwrap();
        let e = eigen_decompose(&m).unwrap();
        let ground = e.vectors.column(0).into_owned();
        let w = wigner_transform(&m.basis, &ground, 1.0, 4 * 16 + 2).unwrap();
        let p = wigner_pairing(&PhaseSpaceFunction::mechanical(&v), &w, 1.0).unwrap();
        assert!((p - e.spectrum.eigenvalues[0]).abs() < 1e-8);
    }

    #[test]
    fn projector_examples() {
        let basis = PlaneWaveBasis::new(1, 3);
        let e0 = unit(&basis, &[0]);
        let e1 = unit(&basis, &[1]);
        let e2 = unit(&basis, &[2]);
        assert!(projector_check(&basis, &e0, &e0, 1.0).unwrap() < 1e-12);
        assert!(projector_check(&basis, &e1, &e2, 0.5).unwrap() < 1e-12);
        let phi = (&e0 + &e1) / c(2f64.sqrt());
        assert!(projector_check(&basis, &phi, &e0, 0.5).unwrap() < 1e-9);
    }

    #[test]
    fn cv_constants_and_examples() {
        assert_eq!(cv_order(1), 2);
        assert_eq!(cv_order(2), 2);
        assert_eq!(cv_order(3), 3);
        assert!((cv_constant(1) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert_eq!(multi_indices(2, 2).len(), 6);

        let c1 = PhaseSpaceFunction::constant(1, 2.5);
        let norms = symbol_sup_norms(&c1, 16, &[vec![0.0]]).unwrap();
        let bound = cv_bound(&norms, 1).unwrap();
        assert!((bound - 4.0 * PI / 3.0 * 2.5).abs() < 1e-12);
        let w = weyl_matrix(&c1, 1.0, 4).unwrap();
        assert!(bound >= operator_norm(&w.entries));

        let zero = symbol_sup_norms(&PhaseSpaceFunction::constant(1, 0.0), 16, &[vec![0.0]]).unwrap();
        assert_eq!(cv_bound(&zero, 1).unwrap(), 0.0);

        let cosx = PhaseSpaceFunction::potential(&FourierPotential::cosine(1, 0, 1.0));
        let norms = symbol_sup_norms(&cosx, 64, &[vec![0.0]]).unwrap();
        let w = weyl_matrix(&cosx, 1.0, 8).unwrap();
        assert!(cv_bound(&norms, 1).unwrap() >= operator_norm(&w.entries));

        let mut partial = norms.clone();
        partial.remove(&vec![4]);
        assert!(cv_bound(&partial, 1).is_err());
    }

    #[test]
    fn moyal_quadratic_generator_is_exact() {
        let a = PhaseSpaceFunction::potential(&FourierPotential::harmonic(1, 0, 1, 0.7, 0.3));
        let b = PhaseSpaceFunction::kinetic(1);
        let r = moyal_scaling(&a, &b, &[0.2, 0.1, 0.05], 12).unwrap();
        assert!(r.exact && r.slope.is_none());
    }

    #[test]
    fn moyal_cubic_generator_is_second_order() {
        // b = η³/3: residual is ħ²(j−m)³â/12 entrywise
        let a = PhaseSpaceFunction::potential(&FourierPotential::cosine(1, 0, 1.0));
        let b = PhaseSpaceFunction::polynomial(
            1,
            &[PolyTerm { q: vec![0], eta_powers: vec![3], re: 1.0 / 3.0, im: 0.0 }],
        )
        .unwrap();
        let r = moyal_scaling(&a, &b, &[0.2, 0.1, 0.05], 12).unwrap();
        let slope = r.slope.unwrap();
        assert!((slope - 2.0).abs() < 1e-6, "{slope}");
        // ħ²/24 times the ±1 antisymmetric tridiagonal matrix of size 25
        assert!((r.residual[0] - 0.04 / 12.0 * (PI / 26.0).cos()).abs() < 1e-9);
    }
}
