//! Compensated (Neumaier) summation.
//!
//! The realised legs are long sums of small increments; naive summation loses
//! enough precision to blur the pathwise identities the test-suite asserts at
//! the 1e-10 level, so every per-path accumulation goes through this.

/// Running Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of terms.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_beats_naive_summation() {
        // 1 + 1e16 * eps-sized terms: naive summation drops them all.
        let terms = std::iter::once(1.0e16).chain(std::iter::repeat(1.0).take(4000));
        let total = compensated_sum(terms);
        assert_eq!(total, 1.0e16 + 4000.0);
    }

    #[test]
    fn matches_simple_sum_for_benign_inputs() {
        let xs = [0.1, 0.25, -0.5, 1.75];
        assert_eq!(compensated_sum(xs.iter().copied()), 1.6);
    }
}
