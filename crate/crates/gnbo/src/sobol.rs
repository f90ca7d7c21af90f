//! Seeded Owen-scrambled Sobol points over arbitrary boxes.

use ndarray::Array1;

use crate::domain::Bounds;

/// Point `index` of the scrambled Sobol sequence for `seed`, in the unit cube.
pub fn unit_point(index: u32, dim: usize, seed: u32) -> Vec<f64> {
    (0..dim as u32)
        .map(|k| f64::from(sobol_burley::sample(index, k, seed)))
        .collect()
}

/// `n` consecutive scrambled Sobol points starting at `start_index`, mapped
/// into `bounds`.
pub fn points_in(bounds: &Bounds, n: usize, start_index: u32, seed: u32) -> Vec<Array1<f64>> {
    (0..n as u32)
        .map(|i| bounds.from_unit(&unit_point(start_index + i, bounds.dim(), seed)))
        .collect()
}
