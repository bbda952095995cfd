//! Composable vaccine supply chain optimization.
//!
//! Models are assembled from builders that append tagged constraints and
//! named objectives to a [`model::Model`]. The crate ships its own exact
//! solver (bounded simplex plus branch-and-bound), an enumeration oracle,
//! and an auditor, so every formulation can be checked end to end.
//!
//! ```ignore
//! use vaxopt::data::Instance;
//! use vaxopt::model::Model;
//! use vaxopt::scm::{self, DemandMode, ScmConfig};
//! use vaxopt::solve::{audit, solve};
//!
//! let inst = Instance::load("fixtures/toy.json").unwrap();
//! let cfg = ScmConfig::default();
//! let mut m = Model::new();
//! scm::build_dc_flow(&mut m, &inst, &cfg).unwrap();
//! scm::build_vc_flow(&mut m, &inst, &cfg, DemandMode::Shortage).unwrap();
//! let sol = solve(&m).unwrap();
//! assert!(audit(&m, &sol).is_clean());
//! ```
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example NAME`.

pub mod cli;
pub mod data;
pub mod epi;
pub mod equity;
pub mod location;
pub mod model;
pub mod routing;
pub mod scm;
pub mod solve;
pub mod uncertainty;

mod rng;

pub use rng::{rng_from_env, seed_from_env, SEED_ENV};
