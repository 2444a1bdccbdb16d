//! Compensated floating-point accumulation.
//!
//! Metric sums must be bit-stable across thread counts, so parallel
//! reductions accumulate per-chunk with this Neumaier-style summator and
//! combine chunk results in a fixed order.

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator into this one. Combining chunk results in
    /// chunk order yields identical bits regardless of worker scheduling.
    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancellation() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        acc.add(1e100);
        acc.add(1.0);
        acc.add(-1e100);
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn chunked_merge_matches_sequential() {
        let values: Vec<f64> = (0..1000).map(|i| ((i * 2654435761_u64) % 97) as f64 * 0.01 - 0.3).collect();
        let mut seq = CompensatedSum::new();
        for &v in &values {
            seq.add(v);
        }
        let mut merged = CompensatedSum::new();
        for chunk in values.chunks(64) {
            let mut part = CompensatedSum::new();
            for &v in chunk {
                part.add(v);
            }
            merged.merge(part);
        }
        assert!((seq.value() - merged.value()).abs() <= 1e-12);
    }
}
