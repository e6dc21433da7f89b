/// Minimum gain that counts as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarlyStop {
    Continue,
    Stop,
}

/// Stops once `patience` consecutive entries fail to beat the running best
/// by more than [`MIN_IMPROVEMENT`].
pub fn early_stop_check(history: &[(usize, f64)], patience: usize) -> EarlyStop {
    let Some(&(_, first)) = history.first() else { return EarlyStop::Continue };
    let mut best = first;
    let mut since = 0;
    for &(_, v) in &history[1..] {
        if v > best + MIN_IMPROVEMENT {
            best = v;
            since = 0;
        } else {
            since += 1;
        }
    }
    if since >= patience {
        EarlyStop::Stop
    } else {
        EarlyStop::Continue
    }
}

/// Seed for one epoch's shuffles and sampling, independent of earlier epochs.
pub fn epoch_seed(seed: u64, epoch: usize, stream: u64) -> u64 {
    let mut z = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: &[f64]) -> Vec<(usize, f64)> {
        v.iter().enumerate().map(|(i, x)| (i + 1, *x)).collect()
    }

    #[test]
    fn rule_examples() {
        assert_eq!(early_stop_check(&h(&[0.1, 0.2, 0.3, 0.4]), 1), EarlyStop::Continue);
        assert_eq!(early_stop_check(&h(&[0.5; 4]), 3), EarlyStop::Stop);
        assert_eq!(early_stop_check(&h(&[0.5; 3]), 3), EarlyStop::Continue);
        assert_eq!(early_stop_check(&h(&[0.70, 0.72, 0.71, 0.72, 0.715]), 3), EarlyStop::Stop);
        assert_eq!(early_stop_check(&h(&[0.70, 0.72, 0.71, 0.72]), 3), EarlyStop::Continue);
        // gains at or below the threshold do not reset the counter
        assert_eq!(early_stop_check(&h(&[0.5, 0.50005, 0.5001]), 2), EarlyStop::Stop);
    }

    #[test]
    fn epoch_seeds_differ() {
        assert_ne!(epoch_seed(1, 1, 0), epoch_seed(1, 2, 0));
        assert_ne!(epoch_seed(1, 1, 0), epoch_seed(1, 1, 1));
        assert_eq!(epoch_seed(5, 3, 2), epoch_seed(5, 3, 2));
    }
}
