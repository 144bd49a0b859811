//! Isospectral pairs, the spectral-to-effective comparison, Bohr–Sommerfeld
//! reconstruction of H̄ and the Weyl first invariant.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::homog::{effective_grid, sublevel_set, ActionIntegral, CellParams, EffectiveMethod, EffectiveTable, PGrid};
use crate::io::{fmt_e12, Csv};
use crate::planewave::{count_below, spectrum, CutoffRule, SpectrumResult};
use crate::symbol::PhaseSpaceFunction;
use crate::torus::{reflect, translate, FourierPotential, TorusPoint};

/// Relative eigenvalue tolerance for isospectrality: `|ΔE| ≤ SPEC_TOL·(1 + |E|)`.
pub const SPEC_TOL: f64 = 1e-8;
/// H̄ tolerance when both sides come from the 1D closed form.
pub const EFF_TOL_CLOSED_FORM: f64 = 2e-3;
/// H̄ tolerance when the cell-problem solver is involved.
pub const EFF_TOL_CELL: f64 = 5e-3;
/// Default sample of the hypothesis "for all 0 < ħ ≤ 1".
pub const DEFAULT_HBARS: [f64; 5] = [1.0, 0.5, 0.25, 0.1, 0.05];

/// One step of a symmetry transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    Translate(Vec<f64>),
    Reflect,
}

fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    let bad = || Error::invalid(format!("cannot parse angle '{s}'"));
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t.strip_prefix('+').unwrap_or(t)),
    };
    let Some(at) = body.find("pi") else {
        return body.parse::<f64>().map(|v| sign * v).map_err(|_| bad());
    };
    let coeff = body[..at].trim_end_matches('*');
    let coeff = if coeff.is_empty() { 1.0 } else { coeff.parse::<f64>().map_err(|_| bad())? };
    let rest = &body[at + 2..];
    let div = match rest.strip_prefix('/') {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(sign * coeff * PI / div)
}

/// A composition of steps, applied left to right: `translate=pi`,
/// `translate=pi/2,0`, `reflect`, `translate=1+reflect`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec(pub Vec<Transform>);

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for part in s.split('+').map(str::trim) {
            if part == "reflect" {
                steps.push(Transform::Reflect);
            } else if let Some(v) = part.strip_prefix("translate=") {
                let a = v.split(',').map(parse_angle).collect::<Result<Vec<f64>>>()?;
                steps.push(Transform::Translate(a));
            } else {
                return Err(Error::invalid(format!("unknown transform '{part}'")));
            }
        }
        if steps.is_empty() {
            return Err(Error::invalid("empty transform"));
        }
        Ok(TransformSpec(steps))
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|t| match t {
                Transform::Reflect => "reflect".to_string(),
                Transform::Translate(a) => {
                    let v: Vec<String> = a.iter().map(|x| format!("{x}")).collect();
                    format!("translate={}", v.join(","))
                }
            })
            .collect();
        f.write_str(&parts.join("+"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Symmetry(TransformSpec),
    UserSupplied,
}

#[derive(Clone, Debug)]
pub struct IsospectralPair {
    pub pot1: FourierPotential,
    pub pot2: FourierPotential,
    pub provenance: Provenance,
    /// Eigenvalue gap at the construction probe.
    pub probe_distance: f64,
    /// False for a user pair whose probe gap exceeds `1e-8`.
    pub hypothesis_verified: bool,
}

fn probe_cutoff(pot: &FourierPotential) -> usize {
    let base = if pot.dim() == 1 { 16 } else { 4 };
    base.max(pot.bandwidth())
}

/// Gap over the whole truncated spectrum at `ħ = 1`.
fn probe(pot1: &FourierPotential, pot2: &FourierPotential) -> Result<f64> {
    let k = probe_cutoff(pot1).max(probe_cutoff(pot2));
    let s1 = spectrum(pot1, 1.0, k)?;
    let s2 = spectrum(pot2, 1.0, k)?;
    let top = s1.trusted_energy.min(s2.trusted_energy);
    Ok(window_distance(&s1, &s2, f64::NEG_INFINITY, top))
}

pub fn make_pair(pot: &FourierPotential, spec: &TransformSpec) -> Result<IsospectralPair> {
    let mut out = pot.clone();
    for step in &spec.0 {
        out = match step {
            Transform::Reflect => reflect(&out),
            Transform::Translate(a) => translate(&out, &TorusPoint::new(a.clone()))?,
        };
    }
    let k = probe_cutoff(pot);
    let s1 = spectrum(pot, 1.0, k)?;
    let s2 = spectrum(&out, 1.0, k)?;
    let d = s1
        .eigenvalues
        .iter()
        .zip(&s2.eigenvalues)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if d > 1e-10 {
        return Err(Error::invalid(format!("symmetry pair probe gap {d:.3e} exceeds 1e-10")));
    }
    Ok(IsospectralPair {
        pot1: pot.clone(),
        pot2: out,
        provenance: Provenance::Symmetry(spec.clone()),
        probe_distance: d,
        hypothesis_verified: true,
    })
}

/// A pair whose isospectrality is only probed, never assumed.
pub fn user_pair(pot1: &FourierPotential, pot2: &FourierPotential) -> Result<IsospectralPair> {
    if pot1.dim() != pot2.dim() {
        return Err(Error::DimensionMismatch { expected: pot1.dim(), got: pot2.dim() });
    }
    let d = probe(pot1, pot2)?;
    Ok(IsospectralPair {
        pot1: pot1.clone(),
        pot2: pot2.clone(),
        provenance: Provenance::UserSupplied,
        probe_distance: d,
        hypothesis_verified: d <= 1e-8,
    })
}

/// Index-paired eigenvalues where either spectrum lies in `[a, b]`. A pair
/// straddling an edge is kept when its gap is within the spectral tolerance,
/// so rounding at the edge does not read as a count mismatch. `None` when the
/// bases differ or the counts genuinely differ.
fn window_pairs(s1: &SpectrumResult, s2: &SpectrumResult, a: f64, b: f64) -> Option<Vec<(f64, f64)>> {
    if s1.len() != s2.len() {
        return None;
    }
    let inside = |e: f64| e >= a && e <= b;
    let mut pairs = Vec::new();
    for (&x, &y) in s1.eigenvalues.iter().zip(&s2.eigenvalues) {
        match (inside(x), inside(y)) {
            (false, false) => {}
            (true, true) => pairs.push((x, y)),
            _ if (x - y).abs() <= SPEC_TOL * (1.0 + x.abs()) => pairs.push((x, y)),
            _ => return None,
        }
    }
    Some(pairs)
}

/// Largest index-paired gap over `[a, b]`; infinite when the counts differ.
fn window_distance(s1: &SpectrumResult, s2: &SpectrumResult, a: f64, b: f64) -> f64 {
    match window_pairs(s1, s2, a, b) {
        Some(pairs) => pairs.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// Largest element-wise gap of the two spectra in `window`.
pub fn spectra_compare(pair: &IsospectralPair, hbar: f64, cutoff: usize, window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    if !(a <= b) {
        return Err(Error::invalid("window must satisfy a <= b"));
    }
    let s1 = spectrum(&pair.pot1, hbar, cutoff)?;
    let s2 = spectrum(&pair.pot2, hbar, cutoff)?;
    let trusted = s1.trusted_energy.min(s2.trusted_energy);
    if b > trusted {
        return Err(Error::UntrustedWindow { lo: a, hi: b, trusted });
    }
    Ok(window_distance(&s1, &s2, a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem2Report {
    pub hbar: Vec<f64>,
    pub cutoffs: Vec<usize>,
    /// Upper end of the trusted window per ħ.
    pub window_top: Vec<f64>,
    pub spec_dist: Vec<f64>,
    /// Eigenvalues compared per ħ; zero when the trusted window is empty.
    pub compared: Vec<usize>,
    /// Every gap within tolerance and at least one eigenvalue compared.
    pub spectra_pass: bool,
    pub eff_dist: f64,
    pub eff_tol: f64,
    pub method: String,
    /// `{H̄₁ ≤ E_max}` and `{H̄₂ ≤ E_max}` coincide on the P grid.
    pub sublevel_match: bool,
    pub verdict: Verdict,
    pub sampling_note: String,
}

/// Compares spectra over `hbars` and the effective Hamiltonians on `grid`.
pub fn theorem2_check(
    pair: &IsospectralPair,
    hbars: &[f64],
    rule: CutoffRule,
    grid: PGrid,
    e_max: f64,
    params: &CellParams,
) -> Result<Theorem2Report> {
    if hbars.is_empty() {
        return Err(Error::invalid("theorem2_check needs at least one hbar"));
    }
    if !pair.hypothesis_verified {
        return Err(Error::invalid("pair hypothesis unverified: the probe spectra differ"));
    }
    let per_hbar: Vec<Result<(usize, f64, f64, bool, usize)>> = hbars
        .par_iter()
        .map(|&h| {
            let k = rule.cutoff(&pair.pot1, h).max(rule.cutoff(&pair.pot2, h));
            let s1 = spectrum(&pair.pot1, h, k)?;
            let s2 = spectrum(&pair.pot2, h, k)?;
            let top = s1.trusted_energy.min(s2.trusted_energy);
            let Some(pairs) = window_pairs(&s1, &s2, f64::NEG_INFINITY, top) else {
                return Ok((k, top, f64::INFINITY, false, 0));
            };
            let mut dist = 0.0f64;
            let mut ok = true;
            for (x, y) in &pairs {
                let d = (x - y).abs();
                dist = dist.max(d);
                ok &= d <= SPEC_TOL * (1.0 + x.abs());
            }
            Ok((k, top, dist, ok, pairs.len()))
        })
        .collect();
    let mut cutoffs = Vec::new();
    let mut window_top = Vec::new();
    let mut spec_dist = Vec::new();
    let mut compared = Vec::new();
    let mut spectra_pass = true;
    for r in per_hbar {
        let (k, top, d, ok, n) = r?;
        cutoffs.push(k);
        window_top.push(top);
        spec_dist.push(d);
        compared.push(n);
        spectra_pass &= ok;
    }
    spectra_pass &= compared.iter().any(|&n| n > 0);

    let dim = pair.pot1.dim();
    let method = if dim == 1 { EffectiveMethod::ClosedForm } else { EffectiveMethod::CellProblem };
    let eff_tol = if dim == 1 { EFF_TOL_CLOSED_FORM } else { EFF_TOL_CELL };
    let table = |pot: &FourierPotential| -> Result<EffectiveTable> {
        let t = effective_grid(&PhaseSpaceFunction::mechanical(pot), grid, method, params)?;
        if !t.valid {
            return Err(Error::NotConverged { residual: f64::NAN, iterations: 0 });
        }
        if let Some(v) = t.values.iter().find(|&&v| v > e_max) {
            return Err(Error::invalid(format!("P grid leaves the sublevel set: H̄ = {v} > E_max = {e_max}")));
        }
        Ok(t)
    };
    let t1 = table(&pair.pot1)?;
    let t2 = table(&pair.pot2)?;
    let eff_dist = t1
        .values
        .iter()
        .zip(&t2.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let sublevel_match = sublevel_set(&t1, e_max).points == sublevel_set(&t2, e_max).points;
    let verdict = if spectra_pass && eff_dist <= eff_tol { Verdict::Pass } else { Verdict::Fail };
    let list: Vec<String> = hbars.iter().map(|h| format!("{h}")).collect();
    let mut sampling_note = format!(
        "isospectrality sampled at hbar in {{{}}} only, on each trusted window; H̄ compared on {} P points (pmax {}, dp {}) by {}",
        list.join(", "),
        t1.points.len(),
        grid.pmax,
        grid.dp,
        method.tag()
    );
    let empty: Vec<String> = hbars
        .iter()
        .zip(&compared)
        .filter(|(_, &n)| n == 0)
        .map(|(h, _)| format!("{h}"))
        .collect();
    if !empty.is_empty() {
        sampling_note.push_str(&format!("; trusted window empty at hbar in {{{}}}, raise K", empty.join(", ")));
    }
    Ok(Theorem2Report {
        hbar: hbars.to_vec(),
        cutoffs,
        window_top,
        spec_dist,
        compared,
        spectra_pass,
        eff_dist,
        eff_tol,
        method: method.tag().to_string(),
        sublevel_match,
        verdict,
        sampling_note,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BsPoint {
    pub ell: i64,
    pub p: f64,
    pub e: f64,
    pub hbar_closed_form: f64,
    pub misfit: f64,
}

/// `E_ℓ ≈ H̄(ℓħ − sign(ℓ)μħ/4)` read off a 1D spectrum.
#[derive(Clone, Debug, Serialize)]
pub struct BsReconstruction {
    pub hbar: f64,
    pub mu: i64,
    /// Sorted by `ℓ`, so `P` increases strictly; `E` is non-decreasing on each branch.
    pub points: Vec<BsPoint>,
}

impl BsReconstruction {
    /// Largest misfit over points with `E` in `[lo, hi]`.
    pub fn max_misfit(&self, lo: f64, hi: f64) -> f64 {
        self.points
            .iter()
            .filter(|q| q.e >= lo && q.e <= hi)
            .map(|q| q.misfit)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["ell", "P", "E", "Hbar_closed_form", "misfit"]);
        for q in &self.points {
            csv.row([
                q.ell.to_string(),
                fmt_e12(q.p),
                fmt_e12(q.e),
                fmt_e12(q.hbar_closed_form),
                fmt_e12(q.misfit),
            ]);
        }
        csv.finish()
    }
}

/// Labels the trusted eigenvalues above `max V` by `±ℓ`: the sorted pair
/// `(E_{2ℓ−1}, E_{2ℓ})` of the whole spectrum gets `(−ℓ, +ℓ)`.
pub fn bs_reconstruct(pot: &FourierPotential, spec: &SpectrumResult, mu: i64) -> Result<BsReconstruction> {
    if pot.dim() != 1 || spec.dim != 1 {
        return Err(Error::invalid("Bohr–Sommerfeld reconstruction is one-dimensional"));
    }
    let hbar = spec.hbar;
    let action = ActionIntegral::new(pot)?;
    let max_v = action.max_v();
    let ev: Vec<f64> = spec
        .eigenvalues
        .iter()
        .copied()
        .take_while(|&e| e <= spec.trusted_energy)
        .collect();
    // at most two-fold degeneracy on the circle
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * hbar * (1.0 + a.abs());
    for w in ev.windows(3) {
        if close(w[0], w[1]) && close(w[1], w[2]) {
            return Err(Error::invalid(format!("degenerate cluster of multiplicity > 2 near E = {}", w[1])));
        }
    }
    let mut points = Vec::new();
    let mut i = 1;
    while i + 1 < ev.len() {
        let (lo, hi) = (ev[i], ev[i + 1]);
        if lo > max_v {
            let ell = (i as i64 + 1) / 2;
            for (l, e) in [(-ell, lo), (ell, hi)] {
                let p = l as f64 * hbar - l.signum() as f64 * mu as f64 * hbar / 4.0;
                let hb = action.effective(p);
                points.push(BsPoint { ell: l, p, e, hbar_closed_form: hb, misfit: (e - hb).abs() });
            }
        }
        i += 2;
    }
    points.sort_by_key(|q| q.ell);
    Ok(BsReconstruction { hbar, mu, points })
}

/// Intercept at `ħ → 0` of `N(ħ, E)·ħ/2` fitted linearly in ħ, which tends
/// to `Vol{H ≤ E}/(4π)`, i.e. to `J(E)` above `max V`.
pub fn weyl_first_invariant(specs: &[SpectrumResult], e: f64) -> Result<f64> {
    if specs.len() < 3 {
        return Err(Error::invalid("weyl_first_invariant needs at least 3 values of hbar"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in specs {
        if s.dim != 1 {
            return Err(Error::invalid("weyl_first_invariant is one-dimensional"));
        }
        if e > s.trusted_energy {
            return Err(Error::UntrustedWindow { lo: f64::NEG_INFINITY, hi: e, trusted: s.trusted_energy });
        }
        xs.push(s.hbar);
        ys.push(count_below(s, e) as f64 * s.hbar / 2.0);
    }
    Ok(linear_fit(&xs, &ys).1)
}
