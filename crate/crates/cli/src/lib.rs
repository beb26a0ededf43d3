//! Command-line frontend for the verification engine: the declarative input
//! format, the execution planner, and the report emitters.

pub mod report;
pub mod runner;
pub mod spec;

/// The bundled verification suite: every claim the engine checks, as
/// ordinary input documents.
pub const PAPER_SUITE: &[(&str, &str)] = &[
    ("zm_pair_11", include_str!("../assets/zm_pair_11.lax")),
    ("zm_pair_gauge_11", include_str!("../assets/zm_pair_gauge_11.lax")),
    ("zm_pair_21", include_str!("../assets/zm_pair_21.lax")),
    ("triplet_111", include_str!("../assets/triplet_111.lax")),
    ("triplet_221", include_str!("../assets/triplet_221.lax")),
    ("laxpair_11", include_str!("../assets/laxpair_11.lax")),
    ("akns", include_str!("../assets/akns.lax")),
];

/// Fault-injection fixture: one corrupted coefficient in the derived
/// component, so the closure check must fail.
pub const CORRUPTED_FIXTURE: &str = include_str!("../assets/corrupted_l23.lax");
