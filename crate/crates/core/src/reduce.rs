//! Order-fixed floating point reductions.
//!
//! Parallel stages in this crate collect per-item contributions into a
//! vector in index order and then reduce with [`pairwise_sum`], so totals do
//! not depend on how rayon splits the work.

const LEAF: usize = 32;

/// Pairwise (cascade) summation with a fixed split pattern.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sums `f(i)` for `i in 0..n` in parallel with a thread-count independent result.
pub fn par_sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    let terms: Vec<f64> = (0..n).into_par_iter().map(f).collect();
    pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_exact_sum_of_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn parallel_sum_is_bitwise_reproducible() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let a = par_sum_by(100_000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| par_sum_by(100_000, f));
        let serial: Vec<f64> = (0..100_000).map(f).collect();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), pairwise_sum(&serial).to_bits());
    }
}
