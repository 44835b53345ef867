//! Resource allocation for full-duplex ambient-backscatter OFDM networks.
//!
//! An access point transmits downlink OFDM to a legacy user while a set of
//! wireless-powered backscatter devices reflect portions of that same signal
//! back to it, one device per TDMA slot. Each device harvests the energy it
//! does not reflect. This crate models that physical layer and solves the
//! joint resource-allocation problem over
//!
//! * per-device backscatter time fractions,
//! * per-device power reflection coefficients, and
//! * per-subcarrier transmit powers,
//!
//! maximizing the minimum device throughput subject to a legacy-user rate
//! floor, per-device harvested-energy floors, and total/peak power limits.
//!
//! The single-device problem is solved to optimality by Lagrangian dual
//! ascent with closed-form subcarrier powers ([`single_bd`]). The general
//! case runs block coordinate descent over the three variable blocks with a
//! successive-convex surrogate for the non-concave legacy-user rate
//! ([`multi_bd`]). [`region`] traces Pareto throughput trade-offs between
//! devices, and [`benchmarks`] implements the equal-allocation and
//! half-duplex comparison schemes. [`experiments`] drives all of the above
//! from configuration files and emits CSV/JSON tables; the `ambc` binary
//! exposes it as a CLI.
//!
//! See the `book/` directory for a guided tour; its code snippets compile
//! and run as part of `cargo test`.

pub mod benchmarks;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod multi_bd;
pub mod region;
pub mod single_bd;
pub mod solvers;
pub mod system;

pub use channel::{ChannelGenConfig, ChannelSet, LinkGains, MultipathChannel};
pub use error::Error;
pub use solvers::{SolveReport, SolverOptions, Status};
pub use system::{Allocation, SystemConfig};

// Book chapters double as doc-tests so the guide can never drift from the
// API. Hidden from rendered docs; `cargo test --doc` still runs them.
#[cfg(doctest)]
mod guide {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(channel_model, "../../../book/src/channel-model.md");
    chapter!(link_formulas, "../../../book/src/link-formulas.md");
    chapter!(single_device, "../../../book/src/single-device.md");
    chapter!(multi_device, "../../../book/src/multi-device.md");
    chapter!(throughput_region, "../../../book/src/throughput-region.md");
    chapter!(benchmarks, "../../../book/src/benchmarks.md");
    chapter!(solver_toolbox, "../../../book/src/solver-toolbox.md");
}
