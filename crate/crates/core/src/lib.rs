//! Symbolic construction and mechanical verification of Lagrangian 2-form
//! multiforms for Lax systems.
//!
//! The crate provides, in dependency order:
//!
//! * [`scalar`]: exact coefficients: Gaussian rationals and multivariate
//!   rational functions in the spectral parameters;
//! * [`workspace`]: symbol tables for coordinates, parameters, fields;
//! * [`expr`]: canonical noncommutative expressions over jet coordinates;
//! * [`calculus`]: total/partial/variational derivatives, Lagrangian
//!   2-forms, and the multiform Euler-Lagrange system;
//! * [`rewrite`]: oriented rewriting modulo equations of motion with
//!   prolongation;
//! * [`numeric`]: seeded randomized evaluation as a zero-test backstop;
//! * [`integrate`]: formal antiderivatives of differential polynomials;
//! * [`zm`]: pole-ansatz Lax multiplets: Lagrangian construction and the
//!   full verification battery (variational derivatives, compatibility,
//!   consistency, closure, ghost reduction);
//! * [`akns`]: the pole-expanded hierarchy: Q-recursion, hierarchy
//!   equations, and the scalar three-flow multiform.

pub mod akns;
pub mod calculus;
pub mod check;
pub mod error;
pub mod expr;
pub mod integrate;
pub mod numeric;
pub mod rewrite;
pub mod scalar;
pub mod selftest;
pub mod workspace;
pub mod zm;

pub use calculus::{
    classify_label, multiform_el_system, partial_jet, total_derivative, variational_derivative, ElClass,
    ElRecord, ElSystem, Lagrangian2Form,
};
pub use check::{CheckResult, CheckStatus};
pub use error::{Error, Result};
pub use expr::{Atom, Expr, Jet, MonoKey, MultiIndex, Word};
pub use integrate::{formal_integrate, formal_integrate_pair, is_total_divergence};
pub use numeric::{
    derive_seed, is_zero_mod, numeric_eval, numeric_eval_on_shell, NumericAssignment, Value, Verdict,
};
pub use rewrite::{delta_d_check, reduce, reduce_auto, DeltaDReport, Rule, RuleSet};
pub use scalar::{GaussRat, ParamScalar, Poly};
pub use workspace::{CoordId, FieldId, ParamId, Shape, Workspace, WorkspaceBuilder};
