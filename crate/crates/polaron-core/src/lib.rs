//! Numerical toolkit for polaron models with regular (UV-finite) form factors.
//!
//! A model is a spatial dimension `d`, a particle mass `m`, a coupling `alpha`,
//! a radial form factor `v(|k|)` and a radial phonon dispersion `eps(|k|)`.
//! On top of such a model the crate computes:
//!
//! * the derived kernel norms and scales ([`model::ModelConstants`]) by
//!   d-dimensional radial quadrature,
//! * closed-form upper/lower bounds on the ground state energy and on the
//!   fixed-momentum energy `E(P)`, together with a bracketed effective-mass
//!   quotient window ([`bounds`]),
//! * the Pekar (semiclassical) minimizer, its energy and finite-coupling
//!   semiclassical mass ([`pekar`]),
//! * a divergence certificate for the effective mass at strong coupling
//!   ([`bounds::mass_divergence_certificate`]),
//! * a genuine variational upper bound on `E(P)` from a coherent-fiber trial
//!   state ([`trialstate`]),
//! * a brute-force cross check: the ground energy of the fiber Hamiltonian on
//!   a discretized-mode, boson-number-truncated Fock space ([`oracle`]).
//!
//! Momentum-space convention: every k-integral is taken with the plain `dk`
//! measure and position-space kernels are the corresponding inverse transforms
//! without `(2*pi)` prefactors, so e.g. `g(0)` equals the squared kernel norm
//! directly. All quantities are isotropic; momenta enter as magnitudes.
//!
//! With the default `parallel` feature the grid sweeps, tabulations and sparse
//! matvecs fan out over rayon; results are reduced in input order, so parallel
//! and sequential runs produce bitwise-identical numbers.

pub mod bounds;
mod eig;
pub mod exec;
pub mod model;
pub mod oracle;
pub mod pekar;
pub mod quad;
pub mod special;
pub mod trialstate;

pub use model::{
    compute_constants, interaction_kernel, mass_kernel, radial_integral, validate_regularity,
    ModelConstants, ModelError, PolaronModel, RadialProfile, RegularityReport,
};
pub use quad::{QuadError, QuadratureSpec, ValueWithError};
