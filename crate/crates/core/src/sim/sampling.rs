//! Heterodyne outcomes of an honest run over a Gaussian channel.

use rand_distr::{Distribution, StandardNormal};

use crate::channel::{expected_covariance, ChannelModel, Modulation};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Draws `4n` i.i.d. coordinate pairs `(x, y)`.
///
/// Heterodyne detection splits each mode, so every real coordinate carries half
/// the mode variance: `Var x = (V+1)/2`, `Var y = (b+1)/2`, `Cov = c/2` with
/// `(V, b, c)` the expected covariance. Alice's `p` coordinates are taken in the
/// conjugated frame so that all pairs are positively correlated.
pub fn sample_outcomes(
    ch: &ChannelModel,
    m: &Modulation,
    n: u64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let e = expected_covariance(ch, m);
    let (sx, sy, cxy) = ((e.a + 1.0) / 2.0, (e.b + 1.0) / 2.0, e.c / 2.0);
    let ax = sx.sqrt();
    let ay1 = cxy / ax;
    let ay2 = (sy - ay1 * ay1).max(0.0).sqrt();

    let count = 4 * n as usize;
    let mut rng = rng_from_seed(seed);
    let mut x = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    for _ in 0..count {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        x.push(ax * z1);
        y.push(ay1 * z1 + ay2 * z2);
    }
    (x, y)
}

/// Subtracts the mean of the `q` coordinates (even positions) and of the `p`
/// coordinates (odd positions) separately.
pub fn center(values: &[f64]) -> Result<Vec<f64>> {
    if !values.len().is_multiple_of(2) {
        return Err(Error::InputShape {
            len: values.len(),
            multiple: 2,
        });
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let half = (values.len() / 2) as f64;
    let (mut sq, mut sp) = (0.0, 0.0);
    for pair in values.chunks_exact(2) {
        sq += pair[0];
        sp += pair[1];
    }
    let (mq, mp) = (sq / half, sp / half);
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, &v)| if i % 2 == 0 { v - mq } else { v - mp })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
        let k = x.len() as f64;
        let mx = x.iter().sum::<f64>() / k;
        let vx = x.iter().map(|v| v * v).sum::<f64>() / k;
        let vy = y.iter().map(|v| v * v).sum::<f64>() / k;
        let cxy = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / k;
        (mx, vx, vy, cxy)
    }

    #[test]
    fn sample_moments_match_model() {
        let ch = ChannelModel::new(0.5, 0.02).unwrap();
        let m = Modulation::new(4.0).unwrap();
        let n = 100_000;
        let (x, y) = sample_outcomes(&ch, &m, n, 11);
        assert_eq!(x.len(), 400_000);
        let (mx, vx, vy, cxy) = moments(&x, &y);
        let e = expected_covariance(&ch, &m);
        let k = x.len() as f64;
        let sx = (e.a + 1.0) / 2.0;
        let sy = (e.b + 1.0) / 2.0;
        assert!(mx.abs() < 5.0 * sx.sqrt() / k.sqrt());
        // Var of a sample variance of a normal is 2σ⁴/k.
        assert!((vx - sx).abs() < 5.0 * sx * (2.0 / k).sqrt());
        assert!((vy - sy).abs() < 5.0 * sy * (2.0 / k).sqrt());
        let corr = cxy / (vx * vy).sqrt();
        let expected = e.c / ((e.a + 1.0) * (e.b + 1.0)).sqrt();
        assert!((corr - expected).abs() < 5.0 / k.sqrt());
    }

    #[test]
    fn sampling_is_seeded() {
        let ch = ChannelModel::new(0.9, 0.01).unwrap();
        let m = Modulation::new(3.0).unwrap();
        assert_eq!(
            sample_outcomes(&ch, &m, 10, 5),
            sample_outcomes(&ch, &m, 10, 5)
        );
        assert_ne!(
            sample_outcomes(&ch, &m, 10, 5),
            sample_outcomes(&ch, &m, 10, 6)
        );
    }

    #[test]
    fn center_examples() {
        assert_eq!(
            center(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![-1.0, -1.0, 1.0, 1.0]
        );
        assert_eq!(center(&[2.5; 6]).unwrap(), vec![0.0; 6]);
        let c = vec![-1.0, 2.0, 1.0, -2.0];
        assert_eq!(center(&c).unwrap(), c);
        assert!(center(&[1.0, 2.0, 3.0]).is_err());
    }
}
