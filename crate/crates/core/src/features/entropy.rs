/// Byte-value histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteHistogram {
    counts: [u64; 256],
    total: u64,
}

impl Default for ByteHistogram {
    fn default() -> Self {
        Self {
            counts: [0; 256],
            total: 0,
        }
    }
}

impl ByteHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut h = Self::new();
        h.add(bytes);
        h
    }

    pub fn add(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.counts[usize::from(b)] += 1;
        }
        self.total += bytes.len() as u64;
    }

    /// Removes bytes previously added. Counts saturate at zero.
    pub fn subtract(&mut self, bytes: &[u8]) {
        for &b in bytes {
            let c = &mut self.counts[usize::from(b)];
            if *c > 0 {
                *c -= 1;
                self.total -= 1;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Shannon entropy in bits per byte, in `[0, 8]`.
    pub fn entropy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let h: f64 = self
            .counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum();
        h.clamp(0.0, 8.0)
    }
}

/// Shannon entropy of `bytes` in bits per byte; 0 for empty input.
pub fn shannon_entropy(bytes: &[u8]) -> f64 {
    ByteHistogram::from_bytes(bytes).entropy()
}
