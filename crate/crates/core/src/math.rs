//! Small numeric helpers shared across modules.

/// Cascade (pairwise) summation with O(1) extra memory.
///
/// Accumulates a binary counter of partial sums so that each element
/// participates in a balanced reduction tree, keeping rounding error at
/// O(log n) independent of input order.
pub fn pairwise_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut levels = [0.0f64; 64];
    let mut count: u64 = 0;
    for x in values {
        let mut v = x;
        let mut i = 0;
        let mut m = count;
        while m & 1 == 1 {
            v += levels[i];
            i += 1;
            m >>= 1;
        }
        levels[i] = v;
        count += 1;
    }
    let mut total = 0.0;
    for (i, lv) in levels.iter().enumerate() {
        if (count >> i) & 1 == 1 {
            total += lv;
        }
    }
    total
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two points.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    pairwise_sum(xs.iter().map(|&x| (x - m) * (x - m))) / (xs.len() - 1) as f64
}

pub fn sd(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (1..=17).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(xs.iter().copied()), 153.0);
    }

    #[test]
    fn mean_and_variance() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert!((mean(&xs) - 5.0).abs() < 1e-15);
        assert!((variance(&xs) - 32.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(pairwise_sum(std::iter::empty()), 0.0);
    }
}
