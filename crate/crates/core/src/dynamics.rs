//! Hamiltonian flows on `T^n × R^n` and their time-one maps.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{fmt_e12, Csv};
use crate::symbol::PhaseSpaceFunction;
use crate::torus::wrap_angle;

/// Momentum magnitude at which a trajectory counts as escaped.
pub const ESCAPE_MOMENTUM: f64 = 1e3;

/// Step for the central-difference Jacobian in [`symplectic_defect`].
pub const JACOBIAN_STEP: f64 = 1e-5;

/// A point `(x, p)` with `x` reduced to `[0, 2π)^n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(x.len(), p.len(), "x and p must have equal length");
        PhasePoint {
            x: x.into_iter().map(wrap_angle).collect(),
            p,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Integration scheme chosen for a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// Kick-drift-kick splitting, for `b = T(η) + U(x)`.
    KickDriftKick,
    /// Classical fourth-order Runge–Kutta.
    RungeKutta4,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct FlowDiagnostics {
    /// `max_t |b(z(t)) − b(z(0))|`.
    pub energy_drift: f64,
    /// `max |det Dφ − 1|` over probes, when measured.
    pub symplectic_defect: f64,
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::invalid(format!("flow step must lie in (0, 1e-2], got {h}")));
    }
    Ok(())
}

fn scheme_for(b: &PhaseSpaceFunction) -> Scheme {
    if b.is_separable() {
        Scheme::KickDriftKick
    } else {
        Scheme::RungeKutta4
    }
}

/// Integrates without reducing x, so that the map stays differentiable.
/// Calls `observe(t, x, p)` after every step.
fn integrate(
    b: &PhaseSpaceFunction,
    scheme: Scheme,
    x: &mut [f64],
    p: &mut [f64],
    t: f64,
    h: f64,
    mut observe: impl FnMut(f64, &[f64], &[f64]),
) -> Result<()> {
    let n = x.len();
    if t == 0.0 {
        return Ok(());
    }
    let steps = (t.abs() / h).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut gx = vec![0.0; n];
    let mut ge = vec![0.0; n];
    match scheme {
        Scheme::KickDriftKick => {
            b.gradient(x, p, &mut gx, &mut ge);
            for s in 0..steps {
                for i in 0..n {
                    p[i] -= 0.5 * dt * gx[i];
                }
                b.gradient(x, p, &mut gx, &mut ge);
                for i in 0..n {
                    x[i] += dt * ge[i];
                }
                b.gradient(x, p, &mut gx, &mut ge);
                for i in 0..n {
                    p[i] -= 0.5 * dt * gx[i];
                }
                escape_guard(p, (s + 1) as f64 * dt)?;
                observe((s + 1) as f64 * dt, x, p);
            }
        }
        Scheme::RungeKutta4 => {
            let mut k = [vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n]];
            let mut xs = vec![0.0; n];
            let mut ps = vec![0.0; n];
            for s in 0..steps {
                for stage in 0..4 {
                    let c = match stage {
                        0 => 0.0,
                        3 => dt,
                        _ => 0.5 * dt,
                    };
                    for i in 0..n {
                        let (dx, dp) = if stage == 0 { (0.0, 0.0) } else { (k[stage - 1][i], k[stage - 1][n + i]) };
                        xs[i] = x[i] + c * dx;
                        ps[i] = p[i] + c * dp;
                    }
                    b.gradient(&xs, &ps, &mut gx, &mut ge);
                    for i in 0..n {
                        k[stage][i] = ge[i];
                        k[stage][n + i] = -gx[i];
                    }
                }
                for i in 0..n {
                    x[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                    p[i] += dt / 6.0 * (k[0][n + i] + 2.0 * k[1][n + i] + 2.0 * k[2][n + i] + k[3][n + i]);
                }
                escape_guard(p, (s + 1) as f64 * dt)?;
                observe((s + 1) as f64 * dt, x, p);
            }
        }
    }
    Ok(())
}

fn escape_guard(p: &[f64], time: f64) -> Result<()> {
    let momentum = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(momentum <= ESCAPE_MOMENTUM) {
        return Err(Error::FlowEscape { momentum, time });
    }
    Ok(())
}

/// `z(t)` under the Hamiltonian flow of `b`, with its energy drift.
pub fn flow(b: &PhaseSpaceFunction, z0: &PhasePoint, t: f64, h: f64) -> Result<(PhasePoint, FlowDiagnostics)> {
    check_step(h)?;
    if z0.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: b.dim(), got: z0.dim() });
    }
    let mut x = z0.x.clone();
    let mut p = z0.p.clone();
    let e0 = b.eval(&x, &p);
    let mut drift = 0.0f64;
    integrate(b, scheme_for(b), &mut x, &mut p, t, h, |_, x, p| {
        drift = drift.max((b.eval(x, p) - e0).abs());
    })?;
    Ok((
        PhasePoint::new(x, p),
        FlowDiagnostics {
            energy_drift: drift,
            symplectic_defect: 0.0,
        },
    ))
}

/// Rows `(t, x, p, b(x, p))` sampled every `every` steps, x reduced mod 2π.
pub fn trajectory(b: &PhaseSpaceFunction, z0: &PhasePoint, t: f64, h: f64, every: usize) -> Result<Vec<(f64, PhasePoint, f64)>> {
    check_step(h)?;
    let every = every.max(1);
    let mut rows = vec![(0.0, z0.clone(), b.eval(&z0.x, &z0.p))];
    let mut x = z0.x.clone();
    let mut p = z0.p.clone();
    let mut count = 0usize;
    integrate(b, scheme_for(b), &mut x, &mut p, t, h, |s, x, p| {
        count += 1;
        if count % every == 0 {
            rows.push((s, PhasePoint::new(x.to_vec(), p.to_vec()), b.eval(x, p)));
        }
    })?;
    Ok(rows)
}

/// Trajectory export with columns `t,x...,p...,energy`.
pub fn trajectory_csv(rows: &[(f64, PhasePoint, f64)]) -> String {
    let n = rows.first().map_or(1, |r| r.1.dim());
    let mut header = vec!["t".to_string()];
    if n == 1 {
        header.push("x".into());
        header.push("p".into());
    } else {
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("p_{i}")));
    }
    header.push("energy".into());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&refs);
    for (t, z, e) in rows {
        let mut row = vec![fmt_e12(*t)];
        row.extend(z.x.iter().chain(&z.p).map(|v| fmt_e12(*v)));
        row.push(fmt_e12(*e));
        csv.row(row);
    }
    csv.finish()
}

/// The time-`±1` map of a generator.
#[derive(Clone, Debug)]
pub struct SymplecticMap {
    pub generator: PhaseSpaceFunction,
    pub scheme: Scheme,
    pub step: f64,
    /// `1.0` for φ, `-1.0` for φ⁻¹; other values give `φ_b^t`.
    pub time: f64,
}

impl SymplecticMap {
    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    /// `φ⁻¹` by time reversal.
    pub fn inverse(&self) -> Self {
        SymplecticMap {
            time: -self.time,
            ..self.clone()
        }
    }

    /// Image with x left unreduced.
    pub fn apply_unwrapped(&self, x: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut x = x.to_vec();
        let mut p = p.to_vec();
        integrate(&self.generator, self.scheme, &mut x, &mut p, self.time, self.step, |_, _, _| {})?;
        Ok((x, p))
    }

    pub fn apply(&self, z: &PhasePoint) -> Result<PhasePoint> {
        if z.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.dim() });
        }
        let (x, p) = self.apply_unwrapped(&z.x, &z.p)?;
        Ok(PhasePoint::new(x, p))
    }
}

/// `φ = φ_b^1`.
pub fn time_one_map(b: &PhaseSpaceFunction, h: f64) -> Result<SymplecticMap> {
    check_step(h)?;
    Ok(SymplecticMap {
        generator: b.clone(),
        scheme: scheme_for(b),
        step: h,
        time: 1.0,
    })
}

/// `φ_b^t` for an arbitrary time `t`.
pub fn flow_map(b: &PhaseSpaceFunction, t: f64, h: f64) -> Result<SymplecticMap> {
    check_step(h)?;
    if !t.is_finite() {
        return Err(Error::invalid("flow time must be finite"));
    }
    Ok(SymplecticMap {
        generator: b.clone(),
        scheme: scheme_for(b),
        step: h,
        time: t,
    })
}

/// Numeric symbol `z ↦ H(φ(z))`. Points where the flow escapes evaluate to NaN.
pub fn compose_hamiltonian(hamiltonian: &PhaseSpaceFunction, phi: &SymplecticMap) -> Result<PhaseSpaceFunction> {
    if hamiltonian.dim() != phi.dim() {
        return Err(Error::DimensionMismatch { expected: hamiltonian.dim(), got: phi.dim() });
    }
    let h = hamiltonian.clone();
    let map = phi.clone();
    Ok(PhaseSpaceFunction::new(
        h.dim(),
        None,
        true,
        Arc::new(move |x, p| match map.apply_unwrapped(x, p) {
            Ok((y, q)) => Complex64::new(h.eval(&y, &q), 0.0),
            Err(_) => Complex64::new(f64::NAN, 0.0),
        }),
    ))
}

/// Seed for the probe points of [`symplectic_defect`].
pub const PROBE_SEED: u64 = 17;

/// `max |det Dφ(z) − 1|` over seeded probes with `x ∈ T^n`, `|p_i| ≤ 3`.
pub fn symplectic_defect(phi: &SymplecticMap, probes: usize) -> Result<f64> {
    if probes < 10 {
        return Err(Error::invalid("symplectic_defect needs at least 10 probes"));
    }
    let n = phi.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let p: Vec<f64> = (0..n).map(|_| 6.0 * rng.random::<f64>() - 3.0).collect();
        let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let mut z = [x, p].concat();
        for col in 0..2 * n {
            let orig = z[col];
            z[col] = orig + JACOBIAN_STEP;
            let (xp, pp) = phi.apply_unwrapped(&z[..n], &z[n..])?;
            z[col] = orig - JACOBIAN_STEP;
            let (xm, pm) = phi.apply_unwrapped(&z[..n], &z[n..])?;
            z[col] = orig;
            for row in 0..n {
                jac[(row, col)] = (xp[row] - xm[row]) / (2.0 * JACOBIAN_STEP);
                jac[(n + row, col)] = (pp[row] - pm[row]) / (2.0 * JACOBIAN_STEP);
            }
        }
        worst = worst.max((jac.determinant() - 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::FourierPotential;
    use std::f64::consts::PI;

    fn pendulum() -> PhaseSpaceFunction {
        PhaseSpaceFunction::mechanical(&FourierPotential::cosine(1, 0, 1.0))
    }

    fn bump_generator() -> PhaseSpaceFunction {
        PhaseSpaceFunction::trig_bump(&FourierPotential::sine(1, 0, 0.1), 1.0).unwrap()
    }

    #[test]
    fn flow_examples() {
        let (z, d) = flow(&PhaseSpaceFunction::kinetic(1), &PhasePoint::new(vec![0.0], vec![1.0]), 1.0, 1e-3).unwrap();
        assert!((z.x[0] - 1.0).abs() < 1e-12 && z.p[0] == 1.0 && d.energy_drift == 0.0);
        let (z, _) = flow(&pendulum(), &PhasePoint::new(vec![PI], vec![0.0]), 1.0, 1e-3).unwrap();
        assert!((z.x[0] - PI).abs() < 1e-12 && z.p[0].abs() < 1e-12);
        let z0 = PhasePoint::new(vec![0.0], vec![2.0]);
        let (a, _) = flow(&pendulum(), &z0, 1.0, 1e-3).unwrap();
        let (b, _) = flow(&pendulum(), &z0, 1.0, 1e-4).unwrap();
        assert!((a.x[0] - b.x[0]).abs() < 1e-6 && (a.p[0] - b.p[0]).abs() < 1e-6);
        assert!(flow(&pendulum(), &z0, 1.0, 0.1).is_err());
    }

    #[test]
    fn rk4_for_non_separable_generators() {
        let g = bump_generator();
        assert_eq!(scheme_for(&g), Scheme::RungeKutta4);
        let z0 = PhasePoint::new(vec![1.0], vec![0.3]);
        let (a, d) = flow(&g, &z0, 1.0, 1e-2).unwrap();
        let (b, _) = flow(&g, &z0, 1.0, 1e-3).unwrap();
        assert!((a.x[0] - b.x[0]).abs() < 1e-9 && (a.p[0] - b.p[0]).abs() < 1e-9);
        assert!(d.energy_drift < 1e-9);
    }

    #[test]
    fn escape_is_reported() {
        // a huge potential kicks p past the guard
        let v = FourierPotential::cosine(1, 0, 5e6);
        let b = PhaseSpaceFunction::mechanical(&v);
        let r = flow(&b, &PhasePoint::new(vec![1.0], vec![0.0]), 1.0, 1e-3);
        assert!(matches!(r, Err(Error::FlowEscape { .. })));
    }

    #[test]
    fn time_one_examples() {
        let id = time_one_map(&PhaseSpaceFunction::constant(1, 0.0), 1e-3).unwrap();
        let z = PhasePoint::new(vec![2.0], vec![-0.5]);
        assert_eq!(id.apply(&z).unwrap(), z);
        let tr = time_one_map(&PhaseSpaceFunction::linear_momentum(&[0.7]), 1e-3).unwrap();
        let w = tr.apply(&z).unwrap();
        assert!((w.x[0] - 2.7).abs() < 1e-12 && w.p[0] == -0.5);
        // bump generator: identity where |p| ≥ 1
        let g = time_one_map(&bump_generator(), 1e-3).unwrap();
        for i in 0..100 {
            let x = i as f64 * 0.0628;
            let p = if i % 2 == 0 { 1.0 + 0.02 * i as f64 } else { -1.0 - 0.01 * i as f64 };
            let z = PhasePoint::new(vec![x], vec![p]);
            let w = g.apply(&z).unwrap();
            assert!((w.x[0] - z.x[0]).abs() < 1e-14 && (w.p[0] - z.p[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_and_defect() {
        let phi = time_one_map(&pendulum(), 1e-3).unwrap();
        let inv = phi.inverse();
        let z = PhasePoint::new(vec![0.4], vec![1.7]);
        let back = inv.apply(&phi.apply(&z).unwrap()).unwrap();
        assert!((back.x[0] - z.x[0]).abs() < 1e-5 && (back.p[0] - z.p[0]).abs() < 1e-5);
        assert!(symplectic_defect(&phi, 20).unwrap() <= 1e-5);
        let id = time_one_map(&PhaseSpaceFunction::constant(1, 0.0), 1e-3).unwrap();
        assert!(symplectic_defect(&id, 10).unwrap() < 1e-8);
        let tr = time_one_map(&PhaseSpaceFunction::linear_momentum(&[0.3]), 1e-3).unwrap();
        assert!(symplectic_defect(&tr, 10).unwrap() < 1e-8);
        assert!(symplectic_defect(&tr, 5).is_err());
    }

    #[test]
    fn composition_examples() {
        let h = pendulum();
        let id = time_one_map(&PhaseSpaceFunction::constant(1, 0.0), 1e-3).unwrap();
        let hc = compose_hamiltonian(&h, &id).unwrap();
        assert_eq!(hc.eval(&[1.0], &[0.5]), h.eval(&[1.0], &[0.5]));
        assert!(hc.bandwidth().is_none());
        let tr = time_one_map(&PhaseSpaceFunction::linear_momentum(&[0.4]), 1e-3).unwrap();
        let ht = compose_hamiltonian(&h, &tr).unwrap();
        assert!((ht.eval(&[1.0], &[0.5]) - h.eval(&[1.4], &[0.5])).abs() < 1e-12);
        let phi = time_one_map(&bump_generator(), 1e-3).unwrap();
        let hp = compose_hamiltonian(&h, &phi).unwrap();
        let z = PhasePoint::new(vec![2.2], vec![0.3]);
        let w = phi.apply(&z).unwrap();
        assert!((hp.eval(&z.x, &z.p) - h.eval(&w.x, &w.p)).abs() < 1e-6);
    }

    #[test]
    fn trajectory_export() {
        let rows = trajectory(&pendulum(), &PhasePoint::new(vec![0.5], vec![0.5]), 0.01, 1e-3, 5).unwrap();
        assert_eq!(rows.len(), 3);
        let csv = trajectory_csv(&rows);
        assert!(csv.starts_with("t,x,p,energy\n0.000000000000e+00,"));
    }
}
