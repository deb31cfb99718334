//! Streaming mean / standard-error accumulators.
//!
//! Trajectory farming reduces per-trajectory samples with an associative,
//! commutative merge (count, mean, M2), so partial sums from workers can be
//! combined in any order and a resumed run reproduces an uninterrupted one.

/// Welford accumulator for a single scalar observable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Parallel merge (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2 / (self.n as f64 - 1.0)).max(0.0))
    }

    /// Standard error of the mean; `None` below two samples (a single
    /// trajectory carries no scatter information).
    pub fn std_err(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.n as f64).sqrt())
    }
}

/// One accumulator per bin (displacement, momentum, strip width, ...).
#[derive(Debug, Clone, Default)]
pub struct VecAccumulator {
    bins: Vec<Accumulator>,
}

impl VecAccumulator {
    pub fn with_len(len: usize) -> Self {
        Self {
            bins: vec![Accumulator::new(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.bins.len(), "sample length mismatch");
        for (acc, &x) in self.bins.iter_mut().zip(sample) {
            acc.push(x);
        }
    }

    pub fn merge(&mut self, other: &VecAccumulator) {
        if self.bins.is_empty() {
            self.bins = other.bins.clone();
            return;
        }
        assert_eq!(self.bins.len(), other.bins.len(), "bin count mismatch");
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.merge(b);
        }
    }

    pub fn bin(&self, i: usize) -> &Accumulator {
        &self.bins[i]
    }

    pub fn means(&self) -> Vec<f64> {
        self.bins.iter().map(Accumulator::mean).collect()
    }

    pub fn std_errs(&self) -> Vec<Option<f64>> {
        self.bins.iter().map(Accumulator::std_err).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_and_err_match_direct_formulas() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let mut acc = Accumulator::new();
        for &x in &xs {
            acc.push(x);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert_abs_diff_eq!(acc.mean(), mean, epsilon = 1e-12);
        assert_abs_diff_eq!(
            acc.std_err().unwrap(),
            (var / xs.len() as f64).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn merge_is_order_independent() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64).sin() * 3.0 + 0.1).collect();
        let mut whole = Accumulator::new();
        for &x in &xs {
            whole.push(x);
        }
        // split 3 ways, merge in a scrambled order
        let mut parts = [Accumulator::new(), Accumulator::new(), Accumulator::new()];
        for (i, &x) in xs.iter().enumerate() {
            parts[i % 3].push(x);
        }
        let mut merged = Accumulator::new();
        for idx in [2, 0, 1] {
            merged.merge(&parts[idx]);
        }
        assert_abs_diff_eq!(merged.mean(), whole.mean(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            merged.std_err().unwrap(),
            whole.std_err().unwrap(),
            epsilon = 1e-12
        );
        assert_eq!(merged.count(), whole.count());
    }

    #[test]
    fn single_sample_reports_no_error_bar() {
        let mut acc = Accumulator::new();
        acc.push(3.5);
        assert_eq!(acc.mean(), 3.5);
        assert!(acc.std_err().is_none());
    }

    #[test]
    fn identical_samples_give_zero_err() {
        let mut acc = Accumulator::new();
        acc.push(0.7);
        acc.push(0.7);
        assert_eq!(acc.std_err(), Some(0.0));
    }
}
