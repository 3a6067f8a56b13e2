/// Unweighted least-squares nondecreasing fit by pool-adjacent-violators.
///
/// Already-monotone input is returned unchanged, bit for bit.
pub fn pava(values: &[f64]) -> Vec<f64> {
    // (block mean, block size)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (last_mean, last_len) = blocks[blocks.len() - 1];
            let (prev_mean, prev_len) = blocks[blocks.len() - 2];
            if prev_mean <= last_mean {
                break;
            }
            let len = prev_len + last_len;
            let mean = (prev_mean * prev_len as f64 + last_mean * last_len as f64) / len as f64;
            blocks.pop();
            *blocks.last_mut().unwrap() = (mean, len);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(mean, len)| std::iter::repeat_n(mean, len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Closed-form isotonic regression: y_i = max_{j<=i} min_{k>=i} mean(x_j..=x_k).
    fn minmax_oracle(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        (i..n)
                            .map(|k| x[j..=k].iter().sum::<f64>() / (k - j + 1) as f64)
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    #[test]
    fn pools_a_single_violation() {
        assert_eq!(pava(&[0.8, 0.3]), vec![0.55, 0.55]);
        assert_eq!(pava(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn monotone_input_unchanged() {
        let x = [0.1, 0.2, 0.2, 0.9];
        assert_eq!(pava(&x), x.to_vec());
        assert!(pava(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn matches_minmax_formula(x in prop::collection::vec(-10.0f64..10.0, 1..12)) {
            let fit = pava(&x);
            let oracle = minmax_oracle(&x);
            for (a, b) in fit.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!(fit.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
