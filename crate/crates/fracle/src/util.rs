use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Sum of `f` over a slice with a fixed chunked reduction order, so the
/// result does not depend on the thread count.
pub(crate) fn det_sum(values: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = values
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|&x| f(x)).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub(crate) fn det_sum2(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
    assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(&x, &y)| f(x, y)).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub(crate) fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
