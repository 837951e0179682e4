use serde::Serialize;

use crate::error::{domain, Result};

/// Completed batches are coarsened pairwise when this many accumulate.
const MAX_BATCHES: usize = 64;

/// Streaming mean and variance (Welford) plus batch means for
/// autocorrelation-aware standard errors.
///
/// Batches start at size 1 and double whenever [`MAX_BATCHES`] are complete,
/// so between 32 and 63 batch means are available once the stream is long.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentAccumulator {
    id: String,
    count: u64,
    mean: f64,
    m2: f64,
    batch_size: u64,
    batches: Vec<f64>,
    partial_sum: f64,
    partial_len: u64,
}

/// Serializable snapshot of an accumulator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccumulatorSummary {
    pub id: String,
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub batches: usize,
    pub batch_size: u64,
}

impl MomentAccumulator {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            count: 0,
            mean: 0.0,
            m2: 0.0,
            batch_size: 1,
            batches: Vec::new(),
            partial_sum: 0.0,
            partial_len: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
        self.partial_sum += x;
        self.partial_len += 1;
        if self.partial_len == self.batch_size {
            self.batches.push(self.partial_sum / self.batch_size as f64);
            self.partial_sum = 0.0;
            self.partial_len = 0;
            if self.batches.len() == MAX_BATCHES {
                self.coarsen();
            }
        }
    }

    fn coarsen(&mut self) {
        self.batches = self
            .batches
            .chunks_exact(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect();
        self.batch_size *= 2;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean ignoring correlations.
    pub fn naive_stderr(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Batch-means standard error of the mean.
    pub fn stderr(&self) -> f64 {
        let n = self.batches.len();
        if n < 2 {
            return f64::NAN;
        }
        let m = self.batches.iter().sum::<f64>() / n as f64;
        let v = self.batches.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (v / n as f64).sqrt()
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    pub fn batch_size(&self) -> u64 {
        self.batch_size
    }

    /// Combines two streams of the same functional. Moments combine exactly;
    /// batch lists are brought to a common batch size and concatenated, and
    /// incomplete batches are not carried over.
    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if self.id != other.id {
            return Err(domain(format!(
                "cannot merge accumulators `{}` and `{}`",
                self.id, other.id
            )));
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let n = n1 + n2;
        let d = other.mean - self.mean;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.count += other.count;

        let mut theirs = other.batches.clone();
        let mut size = other.batch_size;
        while size < self.batch_size {
            theirs = theirs.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
            size *= 2;
        }
        while self.batch_size < size {
            self.coarsen();
        }
        self.batches.extend(theirs);
        self.partial_sum = 0.0;
        self.partial_len = 0;
        while self.batches.len() >= MAX_BATCHES {
            self.coarsen();
        }
        Ok(())
    }

    pub fn summary(&self) -> AccumulatorSummary {
        AccumulatorSummary {
            id: self.id.clone(),
            count: self.count,
            mean: self.mean(),
            variance: self.variance(),
            stderr: self.stderr(),
            batches: self.batches.len(),
            batch_size: self.batch_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    proptest! {
        #[test]
        fn matches_two_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..500)) {
            let mut a = MomentAccumulator::new("x");
            xs.iter().for_each(|&x| a.push(x));
            let (m, v) = two_pass(&xs);
            prop_assert!((a.mean() - m).abs() <= 1e-10 * m.abs().max(1.0));
            prop_assert!((a.variance() - v).abs() <= 1e-10 * (v + m * m + 1e-300));
        }

        #[test]
        fn merge_is_exact_for_moments(
            xs in prop::collection::vec(-10f64..10.0, 2..300),
            ys in prop::collection::vec(-10f64..10.0, 2..300),
        ) {
            let mut a = MomentAccumulator::new("x");
            let mut b = MomentAccumulator::new("x");
            xs.iter().for_each(|&x| a.push(x));
            ys.iter().for_each(|&y| b.push(y));
            let mut ab = a.clone();
            ab.merge(&b).unwrap();
            let mut ba = b.clone();
            ba.merge(&a).unwrap();
            let all: Vec<f64> = xs.iter().chain(&ys).copied().collect();
            let (m, v) = two_pass(&all);
            prop_assert_eq!(ab.count(), all.len() as u64);
            prop_assert!((ab.mean() - m).abs() <= 1e-10 * m.abs().max(1.0));
            prop_assert!((ab.variance() - v).abs() <= 1e-10 * (v + m * m + 1e-300));
            prop_assert!((ab.mean() - ba.mean()).abs() <= 1e-12 * m.abs().max(1.0));
            prop_assert!((ab.variance() - ba.variance()).abs() <= 1e-10 * (v + m * m + 1e-300));
        }
    }

    #[test]
    fn batch_count_stays_bounded() {
        let mut a = MomentAccumulator::new("x");
        for i in 0..100_000 {
            a.push(i as f64);
            assert!(a.batch_count() < MAX_BATCHES);
        }
        assert!(a.batch_count() >= MAX_BATCHES / 2);
        assert!(a.batch_size() * a.batch_count() as u64 <= 100_000);
    }

    #[test]
    fn iid_stderr_is_close_to_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = MomentAccumulator::new("x");
        for _ in 0..200_000 {
            a.push(rng.random::<f64>());
        }
        let r = a.stderr() / a.naive_stderr();
        assert!(r > 0.6 && r < 1.4, "{r}");
    }

    #[test]
    fn correlated_stream_has_larger_stderr() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = MomentAccumulator::new("ar1");
        let mut x = 0.0;
        for _ in 0..200_000 {
            x = 0.99 * x + rng.random::<f64>() - 0.5;
            a.push(x);
        }
        // AR(1) inflation factor sqrt((1+ρ)/(1−ρ)) ≈ 14
        assert!(a.stderr() > 5.0 * a.naive_stderr());
    }

    #[test]
    fn merge_rejects_other_ids() {
        let mut a = MomentAccumulator::new("x");
        assert!(a.merge(&MomentAccumulator::new("y")).is_err());
    }
}
