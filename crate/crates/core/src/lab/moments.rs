/// Streaming first and second moments of a vector-valued sample.
///
/// Tracks the component means and the summed squared deviation
/// `M2 = Σ‖z − z̄‖²`, so `variance()` is the trace of the (population)
/// covariance, `E‖Z − E Z‖²`. Per-component Welford updates; partial
/// accumulators combine with Chan's pairwise rule.
#[derive(Debug, Clone, PartialEq)]
pub struct VecMoments {
    n: u64,
    mean: Vec<f64>,
    m2: f64,
}

impl VecMoments {
    pub fn new(dim: usize) -> Self {
        VecMoments {
            n: 0,
            mean: vec![0.0; dim],
            m2: 0.0,
        }
    }

    pub fn push(&mut self, z: &[f64]) {
        debug_assert_eq!(z.len(), self.mean.len());
        self.n += 1;
        let n = self.n as f64;
        for (m, &x) in self.mean.iter_mut().zip(z) {
            let d = x - *m;
            *m += d / n;
            self.m2 += d * (x - *m);
        }
    }

    pub fn merge(&mut self, other: &VecMoments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let mut delta_sq = 0.0;
        for (m, &mb) in self.mean.iter_mut().zip(&other.mean) {
            let d = mb - *m;
            delta_sq += d * d;
            *m += d * nb / n;
        }
        self.m2 += other.m2 + delta_sq * na * nb / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn mean_norm_sq(&self) -> f64 {
        self.mean.iter().map(|m| m * m).sum()
    }

    /// `E‖Z − E Z‖²` with the 1/n normalization.
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }
}
