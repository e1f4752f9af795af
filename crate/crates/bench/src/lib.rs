//! Fixtures shared by the benchmarks in `benches/`.

use helmdd_core::medium::{builtin_medium, BuiltinMedium};
use helmdd_core::mesh::build_grid;
use helmdd_core::{Bounds, FilterStrategy, MediumField, Mesh, Setup, SetupConfig};

/// Layered medium on `[0, 2] x [0, 1]` with `nx x ny` cells.
pub fn strip_problem(nx: usize, ny: usize) -> (Mesh, MediumField) {
    let mesh = build_grid(nx, ny, Bounds::new(0.0, 2.0, 0.0, 1.0)).expect("valid grid");
    let med = builtin_medium(BuiltinMedium::Layers { bands: 3, contrast: 2.0 }, &mesh).expect("valid medium");
    (mesh, med)
}

pub fn strip_config(jx: usize, strategy: Option<FilterStrategy>) -> SetupConfig {
    SetupConfig { jx, jy: 1, overlap: 1, oversample: 1, strategy, parallel: true }
}

pub fn strip_setup(nx: usize, ny: usize, jx: usize, omega: f64, strategy: Option<FilterStrategy>) -> Setup {
    let (mesh, med) = strip_problem(nx, ny);
    Setup::build(&mesh, &med, omega, &strip_config(jx, strategy)).expect("setup")
}
