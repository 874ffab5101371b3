//! Zero-day arrival processes, tracking experiments and a synthetic record world.

pub mod arrivals;
pub mod experiment;
pub mod world;

pub use self::arrivals::{
    arrivals, expected_moment_curve, generate_arrivals, seeded_rng, shifted_arrivals, write_moment_curve,
    ArrivalConfig, Arrivals,
};
pub use self::experiment::{default_monitor, run_tracking_experiment, track_values, write_tracking_csv};
pub use self::world::{generate_synthetic_records, SyntheticWorld, SyntheticWorldConfig};
