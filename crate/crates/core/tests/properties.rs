use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use torhom::dynamics::flow;
use torhom::homog::{effective_grid, sublevel_set, ActionIntegral, CellParams, EffectiveMethod, PGrid};
use torhom::inverse::{bs_reconstruct, make_pair, TransformSpec};
use torhom::linalg::{hermitian_eigvals, quadratic_form, CVector};
use torhom::planewave::{assemble_hamiltonian, count_eigenvalues, spectrum, PlaneWaveBasis};
use torhom::semiclassics::propagate;
use torhom::weyl::{weyl_matrix, wigner_pairing, wigner_transform};
use torhom::{reflect, time_one_map, translate, FourierPotential, PhasePoint, PhaseSpaceFunction, TorusPoint};

fn pot1d(harm: &[(f64, f64)], mean: f64) -> FourierPotential {
    let mut v = FourierPotential::constant(1, mean);
    for (m, &(c, s)) in harm.iter().enumerate() {
        v = v.add(&FourierPotential::harmonic(1, 0, m as i64 + 1, c, s)).unwrap();
    }
    v
}

fn pot2d(a: (f64, f64), b: (f64, f64), mixed: f64) -> FourierPotential {
    let half = Complex64::new(0.5 * mixed, 0.0);
    let m = FourierPotential::from_coeffs(2, [(vec![1, 1], half), (vec![-1, -1], half)]).unwrap();
    FourierPotential::harmonic(2, 0, 1, a.0, a.1)
        .add(&FourierPotential::harmonic(2, 1, 1, b.0, b.1))
        .unwrap()
        .add(&m)
        .unwrap()
}

fn harmonics(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..=max)
}

fn unit_vector(re: &[f64], im: &[f64]) -> CVector {
    let mut v = CVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i]));
    let n = v.norm();
    v /= Complex64::new(n.max(1e-300), 0.0);
    v
}

fn coeff_gap(a: &FourierPotential, b: &FourierPotential) -> f64 {
    let mut worst = 0.0f64;
    for (q, _) in a.coeffs().chain(b.coeffs()) {
        worst = worst.max((a.coeff(q) - b.coeff(q)).norm());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn potentials_are_real(h in harmonics(4), mean in -2.0..2.0f64, xs in prop::collection::vec(0.0..TAU, 50)) {
        let v = pot1d(&h, mean);
        for x in xs {
            prop_assert!(v.eval_complex(&[x]).im.abs() <= 1e-12);
        }
    }

    #[test]
    fn translate_and_reflect_round_trip(h in harmonics(4), a in -10.0..10.0f64) {
        let v = pot1d(&h, 0.3);
        let back = translate(&translate(&v, &TorusPoint::new(vec![a])).unwrap(), &TorusPoint::new(vec![-a])).unwrap();
        prop_assert!(coeff_gap(&v, &back) <= 1e-14);
        prop_assert_eq!(reflect(&reflect(&v)), v);
    }

    #[test]
    fn symmetry_pairs_are_isospectral_1d(h in harmonics(3), a in 0.0..TAU, hbar in 0.1..1.0f64, k in 4usize..20) {
        let v = pot1d(&h, 0.0);
        let s = spectrum(&v, hbar, k).unwrap();
        for w in [translate(&v, &TorusPoint::new(vec![a])).unwrap(), reflect(&v)] {
            let t = spectrum(&w, hbar, k).unwrap();
            for (x, y) in s.eigenvalues.iter().zip(&t.eigenvalues) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn symmetry_pairs_are_isospectral_2d(a in (-1.0..1.0f64, -1.0..1.0f64), b in (-1.0..1.0f64, -1.0..1.0f64),
                                         mixed in -0.5..0.5f64, shift in (0.0..TAU, 0.0..TAU), hbar in 0.2..1.0f64) {
        let v = pot2d(a, b, mixed);
        let s = spectrum(&v, hbar, 4).unwrap();
        for w in [translate(&v, &TorusPoint::new(vec![shift.0, shift.1])).unwrap(), reflect(&v)] {
            let t = spectrum(&w, hbar, 4).unwrap();
            for (x, y) in s.eigenvalues.iter().zip(&t.eigenvalues) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn spectrum_shape_and_variational_monotonicity(h in harmonics(3), hbar in 0.2..1.0f64, k in 3usize..14) {
        let v = pot1d(&h, 0.0);
        let s = spectrum(&v, hbar, k).unwrap();
        let t = spectrum(&v, hbar, k + 1).unwrap();
        prop_assert_eq!(s.len(), 2 * k + 1);
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let min_v = v.grid_values(4096).into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(s.eigenvalues[0] >= min_v - 1e-10);
        for (a, b) in s.eigenvalues.iter().zip(&t.eigenvalues).take(5) {
            prop_assert!(b <= &(a + 1e-10));
        }
        let c1 = count_eigenvalues(&s, -10.0, 1.0).unwrap().count;
        let c2 = count_eigenvalues(&s, -10.0, 2.0).unwrap().count;
        prop_assert!(c1 <= c2);
    }

    #[test]
    fn weyl_quantization_of_hamiltonian_is_the_galerkin_matrix(h in harmonics(3), hbar in 0.1..1.0f64, k in 3usize..10) {
        let v = pot1d(&h, 0.2);
        let w = weyl_matrix(&PhaseSpaceFunction::mechanical(&v), hbar, k).unwrap();
        let m = assemble_hamiltonian(&v, hbar, k).unwrap();
        prop_assert!((w.entries - m.entries).iter().all(|z| z.norm() <= 1e-12));
    }

    #[test]
    fn wigner_is_real_and_pairs_with_the_quadratic_form(
        re in prop::collection::vec(-1.0..1.0f64, 9), im in prop::collection::vec(-1.0..1.0f64, 9),
        h in harmonics(2), hbar in 0.2..1.0f64,
    ) {
        let basis = PlaneWaveBasis::new(1, 4);
        let psi = unit_vector(&re, &im);
        let w = wigner_transform(&basis, &psi, hbar, 4 * 4 + 2).unwrap();
        prop_assert!(w.max_imag <= 1e-12);
        prop_assert!((w.total_mass() - 1.0).abs() <= 1e-10);
        let b = PhaseSpaceFunction::mechanical(&pot1d(&h, 0.0));
        let op = weyl_matrix(&b, hbar, 4).unwrap();
        let direct = quadratic_form(&op.entries, &psi).re;
        prop_assert!((wigner_pairing(&b, &w, hbar).unwrap() - direct).abs() <= 1e-8);
    }

    #[test]
    fn flow_is_reversible_and_conserves_energy(x in 0.0..TAU, p in -3.0..3.0f64, h in harmonics(2)) {
        let b = PhaseSpaceFunction::mechanical(&pot1d(&h, 0.0));
        let step = 1e-2;
        let phi = time_one_map(&b, step).unwrap();
        let z = PhasePoint::new(vec![x], vec![p]);
        let back = phi.inverse().apply(&phi.apply(&z).unwrap()).unwrap();
        let dx = (back.x[0] - z.x[0]).abs();
        prop_assert!(dx.min(TAU - dx) <= 10.0 * step * step);
        prop_assert!((back.p[0] - z.p[0]).abs() <= 10.0 * step * step);
        let (_, diag) = flow(&b, &z, 1.0, step).unwrap();
        prop_assert!(diag.energy_drift <= 100.0 * step * step);
    }

    #[test]
    fn action_is_increasing_and_effective_even(h in harmonics(3), e1 in 0.0..5.0f64, de in 0.01..3.0f64, p in 0.0..4.0f64) {
        let v = pot1d(&h, 0.0);
        let act = ActionIntegral::new(&v).unwrap();
        let lo = act.max_v() + e1;
        prop_assert!(act.eval(lo + de).unwrap() > act.eval(lo).unwrap());
        let a = act.effective(p);
        prop_assert!((a - act.effective(-p)).abs() <= 1e-8);
        prop_assert!(a >= act.max_v() - 1e-9 && a <= 0.5 * p * p + act.max_v() + 1e-9);
    }

    #[test]
    fn propagator_is_unitary_and_preserves_spectra(h in harmonics(2), hbar in 0.2..1.0f64, t in -2.0..2.0f64) {
        let v = pot1d(&h, 0.0);
        let m = assemble_hamiltonian(&v, hbar, 10).unwrap();
        let u = propagate(&m, t).unwrap();
        prop_assert!(u.unitarity_defect() <= 1e-10);
        prop_assert!(u.commutator_defect(&m.entries) <= 1e-9);
        let a = weyl_matrix(&PhaseSpaceFunction::trig_bump(&FourierPotential::cosine(1, 0, 1.0), 1.0).unwrap(), hbar, 10).unwrap();
        let c = u.conjugate(&a.entries);
        let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
        let before = hermitian_eigvals(&a.entries).unwrap();
        let after = hermitian_eigvals(&c).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn free_bohr_sommerfeld_is_exact(hbar in 0.05..1.0f64) {
        let zero = FourierPotential::zero(1);
        let spec = spectrum(&zero, hbar, 12).unwrap();
        let bs = bs_reconstruct(&zero, &spec, 0).unwrap();
        prop_assert!(bs.points.windows(2).all(|w| w[0].p < w[1].p));
        for q in &bs.points {
            prop_assert!((q.e - 0.5 * q.p * q.p).abs() <= 1e-14 * (1.0 + q.e));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn closed_form_tables_are_certified_and_pairs_share_sublevel_sets(h in harmonics(2), a in 0.0..TAU, e in 0.5..4.0f64) {
        let v = pot1d(&h, 0.0);
        let spec: TransformSpec = format!("translate={a}+reflect").parse().unwrap();
        let pair = make_pair(&v, &spec).unwrap();
        let grid = PGrid { pmax: 2.0, dp: 0.25 };
        let params = CellParams::default();
        let t1 = effective_grid(&PhaseSpaceFunction::mechanical(&pair.pot1), grid, EffectiveMethod::ClosedForm, &params).unwrap();
        let t2 = effective_grid(&PhaseSpaceFunction::mechanical(&pair.pot2), grid, EffectiveMethod::ClosedForm, &params).unwrap();
        prop_assert!(t1.certificates.hold());
        prop_assert!(t2.certificates.hold());
        let top = t1.max_v.unwrap() + e;
        prop_assert_eq!(sublevel_set(&t1, top).points, sublevel_set(&t2, top).points);
    }
}
