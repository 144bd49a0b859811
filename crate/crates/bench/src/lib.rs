//! Shared fixtures for the benchmarks.

use torhom::{FourierPotential, PhaseSpaceFunction};

/// `cos x` on the circle.
pub fn pendulum_potential() -> FourierPotential {
    FourierPotential::cosine(1, 0, 1.0)
}

/// `cos x₁ + cos x₂`.
pub fn separable_potential() -> FourierPotential {
    FourierPotential::cosine(2, 0, 1.0)
        .add(&FourierPotential::cosine(2, 1, 1.0))
        .expect("matching dimensions")
}

/// `½|η|² + V`.
pub fn hamiltonian(pot: &FourierPotential) -> PhaseSpaceFunction {
    PhaseSpaceFunction::mechanical(pot)
}

/// The observable `cos x · χ(|η|)` used for Egorov residuals.
pub fn egorov_observable() -> PhaseSpaceFunction {
    PhaseSpaceFunction::trig_bump(&pendulum_potential(), 1.0).expect("positive radius")
}
