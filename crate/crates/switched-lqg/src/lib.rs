//! Switching supervision for partially observed linear-Gaussian (LQG) systems.
//!
//! The library simulates a discrete-time plant driven by Gaussian process and
//! measurement noise, controlled by a pair of dynamic output-feedback
//! controllers: a *primary* controller that may be high-performance but
//! uncertified (possibly destabilizing), and a *fallback* controller that is
//! guaranteed stabilizing. A supervisor applies the primary input while the
//! two candidate inputs agree, and falls back for a fixed dwell time whenever
//! `‖u1 - u0‖` reaches a threshold `M`.
//!
//! On top of the closed-loop simulator the crate computes the certificates
//! that make the strategy trustworthy:
//!
//! * a **safety certificate** bounding the LQ cost for *any* primary
//!   controller (Lyapunov solution `P0`, contraction factor `rho0`, and the
//!   resulting cost bound as a function of `M`);
//! * a **dwell certificate**: a common Lyapunov pair `(P, rho)` for the two
//!   closed-loop modes and the smallest admissible dwell time `t_min`;
//! * an **efficiency certificate**: moment and escape bounds for the switched
//!   loop, the switching-probability bound, and the bound on the extra LQ
//!   cost `J - J1` incurred by switching, which decays super-exponentially in
//!   the threshold `M`.
//!
//! Every bound can be validated empirically by seeded Monte Carlo rollouts;
//! see [`simulate`] and the `check` subcommand of the bundled CLI. The
//! `examples/` directory contains one runnable example per capability.
//!
//! Entry points:
//!
//! * [`model`] — plant/controller types, controller synthesis, generation of
//!   random test systems and the `lqg-model v1` file format;
//! * [`supervisor`] — the switching state machine;
//! * [`simulate`] — seeded rollouts, Monte Carlo aggregation and diagnostics;
//! * [`certify`] — certificate computation and text reports;
//! * [`matops`] — the dense-matrix primitives (Lyapunov/Riccati solvers,
//!   weighted norms) the rest of the crate is built on;
//! * [`cli`] — the experiment commands behind the `switched-lqg` binary.

pub mod certify;
pub mod cli;
mod error;
pub mod matops;
pub mod model;
pub mod simulate;
pub mod supervisor;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;
