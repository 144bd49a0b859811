//! Periodic Schrödinger spectra on the flat torus, toroidal Weyl quantization
//! and effective Hamiltonians of Hamilton–Jacobi homogenization.

pub mod dynamics;
pub mod error;
pub mod fit;
pub mod homog;
pub mod inverse;
pub mod io;
pub mod linalg;
pub mod planewave;
pub mod quad;
pub mod semiclassics;
pub mod symbol;
pub mod torus;
pub mod weyl;

pub use error::{Error, Result};
pub use planewave::{
    assemble_hamiltonian, count_eigenvalues, eigen_spectrum, spectrum, truncation_tail_bound, weyl_volume,
    CutoffRule, HamiltonianMatrix, PlaneWaveBasis, SpectrumResult, WeylCountReport,
};
pub use symbol::PhaseSpaceFunction;
pub use torus::{potential_extrema, reflect, translate, ExtremaReport, FourierPotential, TorusPoint};
pub use weyl::{projector_check, weyl_matrix, wigner_pairing, wigner_transform, WeylMatrix, WignerTable};
pub use dynamics::{compose_hamiltonian, flow, flow_map, symplectic_defect, time_one_map, PhasePoint, SymplecticMap};
pub use homog::{
    action_j, cell_problem_solve, effective_1d, effective_grid, infsup_upper, invariance_check, sublevel_set,
    ActionIntegral, CellParams, CellScheme, EffectiveMethod, EffectiveTable, PGrid,
};
pub use semiclassics::{egorov_residual, egorov_scaling, propagate, EgorovCutoff, EgorovReport, Propagator};
pub use inverse::{
    bs_reconstruct, make_pair, spectra_compare, theorem2_check, user_pair, weyl_first_invariant, BsReconstruction,
    IsospectralPair, Theorem2Report, TransformSpec, Verdict,
};
