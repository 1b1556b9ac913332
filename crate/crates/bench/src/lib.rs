//! Input generators shared by the benchmarks.

use filterlab::rng::stream_raw;
use filterlab::DiscreteMeasure;
use rand::Rng;

/// `n` uniformly weighted atoms with coordinates uniform on `[shift − 2, shift + 2]`.
pub fn cloud(dim: usize, n: usize, shift: f64, seed: u64) -> DiscreteMeasure {
    let mut rng = stream_raw(seed, 0);
    let atoms = (0..n * dim).map(|_| shift + rng.random_range(-2.0..2.0)).collect();
    DiscreteMeasure::uniform(dim, atoms).expect("atoms are finite")
}

#[cfg(test)]
mod tests {
    #[test]
    fn cloud_shape() {
        let c = super::cloud(2, 10, 1.0, 0);
        assert_eq!((c.dim(), c.len()), (2, 10));
        assert!(c.atoms_flat().iter().all(|v| (-1.0..=3.0).contains(v)));
    }
}
