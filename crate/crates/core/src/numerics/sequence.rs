//! Halton low-discrepancy points.

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension limited to {}", PRIMES.len());
        // skip the origin
        Self { dim, index: 1 }
    }

    fn radical_inverse(mut i: u64, base: u32) -> f64 {
        let b = base as u64;
        let mut inv = 1.0 / base as f64;
        let mut r = 0.0;
        while i > 0 {
            r += (i % b) as f64 * inv;
            i /= b;
            inv /= base as f64;
        }
        r
    }

    /// Next point in [0,1)^dim.
    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        PRIMES[..self.dim].iter().map(|&b| Self::radical_inverse(i, b)).collect()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;
    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.next_point())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        let pts: Vec<_> = Halton::new(2).take(3).collect();
        assert_eq!(pts[0], vec![0.5, 1.0 / 3.0]);
        assert_eq!(pts[1], vec![0.25, 2.0 / 3.0]);
        assert_eq!(pts[2], vec![0.75, 1.0 / 9.0]);
    }
}
