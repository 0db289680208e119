//! Stationary state of the incoherently pumped single-atom laser.
//!
//! The field, ground and excited blocks of the stationary density matrix
//! are phase-averaged nonlinear coherent states. Their deformation
//! functions follow from the deviation `d(n)`, obtained by a backward
//! sweep of a contracting recurrence. The crate also provides the
//! intensity-dependent transition probabilities, s-parametrized
//! quasiprobabilities with the nonclassicality order `s0`, and a
//! brute-force master-equation oracle.
//!
//! ```
//! use ncs_laser::{build_solution, NormalizedParams, SolveOptions};
//!
//! let p = NormalizedParams::<f64>::new(1.0, 1.0, 3.0, 5.0).unwrap();
//! let sol = build_solution(&p, &SolveOptions::default()).unwrap();
//! assert!((sol.rhof.mass() - 1.0).abs() < 1e-12);
//! ```
//!
//! Everything except the oracle is generic over `f32` and `f64`; the
//! aliases at the crate root fix `f64`.

// `!(x > 0)` style guards are meant to catch NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deviation;
pub mod error;
pub mod fock;
pub mod liouville_oracle;
pub mod ncs_state;
pub mod observables;
pub mod params;
pub mod phasespace;
pub mod scalar;

pub use deviation::{DeviationTable, SeedPolicy, SolveConfig};
pub use error::{Error, Result};
pub use fock::{FockDistribution, Label};
pub use liouville_oracle::{OracleSolution, TruncatedLiouvillian};
pub use ncs_state::{
    build_solution, strong_coupling_blocks, strong_coupling_solution, BalanceDiagnostics, DeformationKind,
    DeformationTable, NmaxPolicy, SolveOptions, SteadyStateSolution, StrongCoupling,
};
pub use observables::{BalanceResiduals, TransitionProfile};
pub use params::{normalize, LaserRates, NormalizedParams};
pub use phasespace::{NonclassicalityReport, RadialGrid};
pub use scalar::Real;

pub type Rates = LaserRates<f64>;
pub type Params = NormalizedParams<f64>;
pub type Deviation = DeviationTable<f64>;
pub type Distribution = FockDistribution<f64>;
pub type Solution = SteadyStateSolution<f64>;
pub type Options = SolveOptions<f64>;
pub type Profile = TransitionProfile<f64>;
pub type Report = NonclassicalityReport<f64>;

pub type RatesF32 = LaserRates<f32>;
pub type ParamsF32 = NormalizedParams<f32>;
pub type SolutionF32 = SteadyStateSolution<f32>;
