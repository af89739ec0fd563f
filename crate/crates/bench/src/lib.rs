//! Fixtures shared by the benchmarks.

use trackhhl_core::hamiltonian::{build_system, enumerate_segments};
use trackhhl_core::toy_model::generate_event;
use trackhhl_core::{DetectorConfig, Event, HamiltonianParams, LinearSystem};

pub fn event(layers: usize, particles: usize) -> Event {
    generate_event(&DetectorConfig::new(layers, particles).with_seed(11)).expect("valid config")
}

/// Event with three vertices, for clustering.
pub fn vertex_event(particles: usize) -> Event {
    generate_event(&DetectorConfig::new(5, particles).with_vertices(3, 30.0).with_seed(11)).expect("valid config")
}

pub fn system(event: &Event) -> LinearSystem {
    build_system(&enumerate_segments(event, None), &HamiltonianParams::default()).expect("non-empty event")
}
