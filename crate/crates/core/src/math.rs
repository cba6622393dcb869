//! Small numeric helpers shared by the HMM and emission code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Numerically stable `ln Σ exp(x_i)`. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln(exp(a) + exp(b))`.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-density of the standard normal `N(0, I)` at `z`.
pub fn std_normal_log_density(z: &[f64]) -> f64 {
    -0.5 * (z.len() as f64 * LN_2PI + z.iter().map(|v| v * v).sum::<f64>())
}

/// Normalizes a vector of log-weights in place so that `Σ exp = 1`.
pub fn log_normalize(xs: &mut [f64]) {
    let z = logsumexp(xs);
    for x in xs.iter_mut() {
        *x -= z;
    }
}

/// Converts non-negative masses into log-probabilities. Returns `None` when the
/// total mass is zero (or not finite).
pub fn log_probs_from_masses(masses: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    Some(
        masses
            .iter()
            .map(|&m| if m > 0.0 { (m / total).ln() } else { f64::NEG_INFINITY })
            .collect(),
    )
}

/// The seeded generator used everywhere randomness is needed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from a parent seed and a stream index (splitmix64).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_direct_sum() {
        let xs = [0.1, -2.0, 3.5, 1.0];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_handles_neg_infinity() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((logsumexp(&[f64::NEG_INFINITY, 0.0]) - 0.0).abs() < 1e-15);
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn logaddexp_agrees_with_logsumexp() {
        for &(a, b) in &[(0.0, 0.0), (-3.0, 2.0), (f64::NEG_INFINITY, 1.5), (700.0, 699.0)] {
            assert!((logaddexp(a, b) - logsumexp(&[a, b])).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_normal_at_mode() {
        assert!((std_normal_log_density(&[0.0]) + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn masses_to_log_probs() {
        let lp = log_probs_from_masses(&[9.0, 1.0]).unwrap();
        assert!((lp[0].exp() - 0.9).abs() < 1e-15);
        assert!((lp[1].exp() - 0.1).abs() < 1e-15);
        assert!(log_probs_from_masses(&[0.0, 0.0]).is_none());
        assert_eq!(log_probs_from_masses(&[1.0, 0.0]).unwrap()[1], f64::NEG_INFINITY);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
