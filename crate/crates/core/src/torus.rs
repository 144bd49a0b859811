//! Torus geometry and trigonometric-polynomial potentials on the flat torus
//! `T^n = (R / 2πZ)^n`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest frequency accepted when loading a potential from disk.
pub const MAX_FILE_FREQUENCY: i64 = 64;

const HERMITIAN_TOL: f64 = 1e-12;

/// Reduce a real coordinate to `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A point of the torus with every coordinate in `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let mut c: Vec<f64> = coords.into();
        assert!(!c.is_empty(), "torus dimension must be at least 1");
        c.iter_mut().for_each(|x| *x = wrap_angle(*x));
        TorusPoint(c)
    }

    pub fn origin(dim: usize) -> Self {
        TorusPoint::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        TorusPoint::new(self.0.iter().map(|x| -x).collect::<Vec<_>>())
    }
}

/// A real trigonometric polynomial `V(x) = Σ_q V̂(q) e^{i q·x}` on `T^n`.
///
/// Coefficients are kept in a sorted map so iteration order, and therefore
/// every derived quantity, is deterministic. Hermitian symmetry
/// `V̂(−q) = conj V̂(q)` is checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierPotential {
    dim: usize,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

impl FourierPotential {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1, "torus dimension must be at least 1");
        FourierPotential {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    /// Build from `(q, V̂(q))` pairs. Repeated frequencies are summed; exact zeros
    /// are dropped.
    pub fn from_coeffs<I>(dim: usize, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, Complex64)>,
    {
        if dim == 0 {
            return Err(Error::invalid("torus dimension must be at least 1"));
        }
        let mut map: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (q, c) in coeffs {
            if q.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: q.len(),
                });
            }
            *map.entry(q).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| c.norm() != 0.0);
        for (q, c) in &map {
            let neg: Vec<i64> = q.iter().map(|v| -v).collect();
            let partner = map.get(&neg).copied().unwrap_or_default();
            if (partner - c.conj()).norm() > HERMITIAN_TOL {
                return Err(Error::invalid(format!(
                    "coefficients are not Hermitian symmetric at q={q:?}"
                )));
            }
        }
        Ok(FourierPotential { dim, coeffs: map })
    }

    /// `amplitude · cos(x_axis)`.
    pub fn cosine(dim: usize, axis: usize, amplitude: f64) -> Self {
        Self::harmonic(dim, axis, 1, amplitude, 0.0)
    }

    /// `amplitude · sin(x_axis)`.
    pub fn sine(dim: usize, axis: usize, amplitude: f64) -> Self {
        Self::harmonic(dim, axis, 1, 0.0, amplitude)
    }

    /// `c · cos(m x_axis) + s · sin(m x_axis)`.
    pub fn harmonic(dim: usize, axis: usize, m: i64, c: f64, s: f64) -> Self {
        assert!(axis < dim && m != 0);
        let mut q = vec![0; dim];
        q[axis] = m;
        let mut nq = vec![0; dim];
        nq[axis] = -m;
        // c cos + s sin = (c - i s)/2 e^{imx} + (c + i s)/2 e^{-imx}
        let a = Complex64::new(0.5 * c, -0.5 * s);
        Self::from_coeffs(dim, [(q, a), (nq, a.conj())]).expect("harmonic is Hermitian")
    }

    /// The constant potential `c`.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_coeffs(dim, [(vec![0; dim], Complex64::new(c, 0.0))])
            .expect("constant is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&[i64], Complex64)> {
        self.coeffs.iter().map(|(q, c)| (q.as_slice(), *c))
    }

    pub fn coeff(&self, q: &[i64]) -> Complex64 {
        self.coeffs.get(q).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|q|_∞` with a nonzero coefficient (0 for constants).
    pub fn bandwidth(&self) -> usize {
        self.coeffs
            .keys()
            .map(|q| q.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Mean value `V̂(0)`.
    pub fn mean(&self) -> f64 {
        self.coeff(&vec![0; self.dim]).re
    }

    /// `Σ |V̂(q)|`, an upper bound for `sup |V|`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.coeffs
            .iter()
            .map(|(q, c)| {
                let phase: f64 = q.iter().zip(x).map(|(&qi, &xi)| qi as f64 * xi).sum();
                c.re * phase.cos() - c.im * phase.sin()
            })
            .sum()
    }

    pub fn eval_at(&self, x: &TorusPoint) -> f64 {
        self.eval(x.coords())
    }

    /// Complex evaluation, used to check reality.
    pub fn eval_complex(&self, x: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(q, c)| {
                let phase: f64 = q.iter().zip(x).map(|(&qi, &xi)| qi as f64 * xi).sum();
                c * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// Gradient `∇V(x)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (q, c) in &self.coeffs {
            let phase: f64 = q.iter().zip(x).map(|(&qi, &xi)| qi as f64 * xi).sum();
            // d/dx_j Re(c e^{iφ}) = -q_j (c.re sin φ + c.im cos φ)
            let d = -(c.re * phase.sin() + c.im * phase.cos());
            for (gj, &qj) in g.iter_mut().zip(q) {
                *gj += qj as f64 * d;
            }
        }
        g
    }

    pub fn scaled(&self, s: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|(q, c)| (q.clone(), c * s));
        Self::from_coeffs(self.dim, coeffs).expect("scaling preserves symmetry")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .chain(other.coeffs.iter())
            .map(|(q, c)| (q.clone(), *c));
        Self::from_coeffs(self.dim, coeffs)
    }

    /// Values on the uniform grid with `res` points per axis, in row-major
    /// order (last axis fastest).
    pub fn grid_values(&self, res: usize) -> Vec<f64> {
        let total = res.pow(self.dim as u32);
        let h = TAU / res as f64;
        let mut x = vec![0.0; self.dim];
        (0..total)
            .map(|flat| {
                grid_point(flat, res, h, &mut x);
                self.eval(&x)
            })
            .collect()
    }
}

/// Fill `x` with the coordinates of grid node `flat` (row-major, last axis fastest).
pub(crate) fn grid_point(flat: usize, res: usize, h: f64, x: &mut [f64]) {
    let mut rem = flat;
    for xi in x.iter_mut().rev() {
        *xi = (rem % res) as f64 * h;
        rem /= res;
    }
}

/// Minimum and maximum of a potential over a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremaReport {
    pub min_v: f64,
    pub max_v: f64,
    pub argmin: TorusPoint,
    pub argmax: TorusPoint,
    pub grid_resolution: usize,
}

/// Scan the uniform `res`-per-axis grid for the extrema of `pot`.
pub fn potential_extrema(pot: &FourierPotential, res: usize) -> Result<ExtremaReport> {
    if res < 8 {
        return Err(Error::invalid(format!(
            "extrema grid resolution must be at least 8, got {res}"
        )));
    }
    let values = pot.grid_values(res);
    let (mut imin, mut imax) = (0, 0);
    for (i, &v) in values.iter().enumerate() {
        if v < values[imin] {
            imin = i;
        }
        if v > values[imax] {
            imax = i;
        }
    }
    let h = TAU / res as f64;
    let mut xmin = vec![0.0; pot.dim()];
    let mut xmax = vec![0.0; pot.dim()];
    grid_point(imin, res, h, &mut xmin);
    grid_point(imax, res, h, &mut xmax);
    Ok(ExtremaReport {
        min_v: values[imin],
        max_v: values[imax],
        argmin: TorusPoint::new(xmin),
        argmax: TorusPoint::new(xmax),
        grid_resolution: res,
    })
}

/// Grid resolution used internally when a potential's extrema are needed.
pub(crate) fn default_extrema(pot: &FourierPotential) -> ExtremaReport {
    let res = (16 * pot.bandwidth().max(1)).max(64);
    let res = if pot.dim() >= 3 { res.min(48) } else { res };
    potential_extrema(pot, res).expect("resolution is at least 8")
}

/// `V'(x) = V(x + a)`.
pub fn translate(pot: &FourierPotential, a: &TorusPoint) -> Result<FourierPotential> {
    if a.dim() != pot.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: a.dim(),
        });
    }
    let coeffs = pot.coeffs.iter().map(|(q, c)| {
        let phase: f64 = q.iter().zip(a.coords()).map(|(&qi, &ai)| qi as f64 * ai).sum();
        (q.clone(), c * Complex64::from_polar(1.0, phase))
    });
    FourierPotential::from_coeffs(pot.dim(), coeffs)
}

/// `V'(x) = V(−x)`.
pub fn reflect(pot: &FourierPotential) -> FourierPotential {
    let coeffs = pot
        .coeffs
        .iter()
        .map(|(q, c)| (q.iter().map(|v| -v).collect(), *c));
    FourierPotential::from_coeffs(pot.dim(), coeffs).expect("reflection preserves symmetry")
}

#[derive(Serialize, Deserialize)]
struct CoeffRecord {
    q: Vec<i64>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct PotentialFile {
    dim: usize,
    coeffs: Vec<CoeffRecord>,
}

impl FourierPotential {
    /// Parse the JSON potential format `{"dim": n, "coeffs": [{"q": [..], "re": r, "im": s}]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: PotentialFile = serde_json::from_str(s)?;
        for rec in &file.coeffs {
            if let Some(big) = rec.q.iter().find(|v| v.abs() > MAX_FILE_FREQUENCY) {
                return Err(Error::invalid(format!(
                    "frequency {big} exceeds the file limit {MAX_FILE_FREQUENCY}"
                )));
            }
            if !rec.re.is_finite() || !rec.im.is_finite() {
                return Err(Error::invalid("non-finite coefficient"));
            }
        }
        Self::from_coeffs(
            file.dim,
            file.coeffs
                .into_iter()
                .map(|r| (r.q, Complex64::new(r.re, r.im))),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let file = PotentialFile {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(q, c)| CoeffRecord {
                    q: q.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("potential serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cosx() -> FourierPotential {
        FourierPotential::cosine(1, 0, 1.0)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(FourierPotential::zero(1).eval(&[1.3]), 0.0);
        assert!((cosx().eval(&[0.0]) - 1.0).abs() < 1e-15);
        assert!(cosx().eval(&[FRAC_PI_2]).abs() <= 1e-12);
        let c = cosx().coeff(&[1]);
        assert_eq!(c, Complex64::new(0.5, 0.0));
    }

    #[test]
    fn extrema_examples() {
        let r = potential_extrema(&FourierPotential::zero(1), 16).unwrap();
        assert_eq!((r.min_v, r.max_v), (0.0, 0.0));
        let r = potential_extrema(&cosx(), 64).unwrap();
        assert!((r.min_v + 1.0).abs() < 1e-3 && (r.max_v - 1.0).abs() < 1e-3);
        let v2 = FourierPotential::cosine(2, 0, 1.0)
            .add(&FourierPotential::cosine(2, 1, 1.0))
            .unwrap();
        let r = potential_extrema(&v2, 64).unwrap();
        assert!((r.min_v + 2.0).abs() < 1e-3 && (r.max_v - 2.0).abs() < 1e-3);
        assert!((v2.eval_at(&r.argmax) - r.max_v).abs() < 1e-15);
        assert!(potential_extrema(&cosx(), 4).is_err());
    }

    #[test]
    fn extrema_monotone_in_resolution() {
        let v = FourierPotential::harmonic(1, 0, 1, 0.7, 0.3)
            .add(&FourierPotential::harmonic(1, 0, 3, -0.2, 0.5))
            .unwrap();
        let mut prev = potential_extrema(&v, 8).unwrap();
        for res in [16, 32, 64, 128] {
            let r = potential_extrema(&v, res).unwrap();
            assert!(r.max_v >= prev.max_v && r.min_v <= prev.min_v);
            prev = r;
        }
    }

    #[test]
    fn translate_examples() {
        let t = translate(&cosx(), &TorusPoint::new(vec![PI])).unwrap();
        assert!((t.coeff(&[1]) - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        assert!((t.coeff(&[-1]) - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        assert!(translate(&FourierPotential::zero(1), &TorusPoint::new(vec![2.0]))
            .unwrap()
            .is_zero());
        let s = translate(&cosx(), &TorusPoint::new(vec![FRAC_PI_2])).unwrap();
        for i in 0..16 {
            let x = i as f64 * TAU / 16.0;
            assert!((s.eval(&[x]) + x.sin()).abs() < 1e-14);
        }
        assert!(translate(&cosx(), &TorusPoint::new(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(&cosx()), cosx());
        let sin = FourierPotential::sine(1, 0, 1.0);
        assert_eq!(reflect(&sin), sin.scaled(-1.0));
        let v = cosx().add(&FourierPotential::harmonic(1, 0, 2, 0.0, 1.0)).unwrap();
        let r = reflect(&v);
        for i in 0..16 {
            let x = i as f64 * TAU / 16.0;
            assert!((r.eval(&[x]) - (x.cos() - (2.0 * x).sin())).abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let v = cosx().add(&FourierPotential::sine(1, 0, 0.3)).unwrap();
        let back = FourierPotential::from_json_str(&v.to_json_string()).unwrap();
        assert_eq!(back, v);
        let asym = r#"{"dim":1,"coeffs":[{"q":[1],"re":0.5,"im":0.0}]}"#;
        assert!(FourierPotential::from_json_str(asym).is_err());
        let big = r#"{"dim":1,"coeffs":[{"q":[65],"re":0.5,"im":0.0},{"q":[-65],"re":0.5,"im":0.0}]}"#;
        assert!(FourierPotential::from_json_str(big).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let v = FourierPotential::harmonic(2, 0, 1, 0.4, -0.3)
            .add(&FourierPotential::harmonic(2, 1, 2, 0.1, 0.6))
            .unwrap();
        let x = [0.7, 2.1];
        let g = v.gradient(&x);
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += 1e-6;
            xm[j] -= 1e-6;
            let fd = (v.eval(&xp) - v.eval(&xm)) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn wrap_angle_stays_in_range() {
        assert_eq!(wrap_angle(-1e-18), 0.0);
        assert!((wrap_angle(-FRAC_PI_2) - 1.5 * PI).abs() < 1e-15);
        assert!(wrap_angle(TAU) < TAU);
    }
}
