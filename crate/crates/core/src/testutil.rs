use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::Tensor3;

pub(crate) fn random_tensor(rng: &mut ChaCha8Rng, m: usize, l: usize, n: usize) -> Tensor3 {
    Tensor3::from_fn(m, l, n, |_, _, _| rng.sample(StandardNormal))
}

/// O(n^2) DFT with kernel `exp(-2 pi i jk / n)`.
pub(crate) fn direct_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| Complex64::from_polar(v, -2.0 * PI * (j * k) as f64 / n as f64))
                .sum()
        })
        .collect()
}
