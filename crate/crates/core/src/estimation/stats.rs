use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Problem dimensions shared by statistics and radii.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub contexts: usize,
    pub recommendations: usize,
    pub treatments: usize,
}

impl Dims {
    pub fn of(env: &crate::model::Environment) -> Self {
        Dims {
            contexts: env.num_contexts(),
            recommendations: env.num_recommendations(),
            treatments: env.num_treatments(),
        }
    }
}

/// Running sums over all rounds observed so far. Single writer per run.
#[derive(Clone, Debug)]
pub struct StatsAccumulator {
    dims: Dims,
    t: u64,
    context_counts: Vec<u64>,
    counts: Vec<Vec<u64>>,
    reward_sums: Vec<Vec<f64>>,
    reward_sq_sums: Vec<Vec<f64>>,
    transitions: Vec<Vec<Vec<u64>>>,
}

impl StatsAccumulator {
    pub fn new(dims: Dims) -> Self {
        let (s, kz, kx) = (dims.contexts, dims.recommendations, dims.treatments);
        StatsAccumulator {
            dims,
            t: 0,
            context_counts: vec![0; s],
            counts: vec![vec![0; kz]; s],
            reward_sums: vec![vec![0.0; kz]; s],
            reward_sq_sums: vec![vec![0.0; kz]; s],
            transitions: vec![vec![vec![0; kx]; kz]; s],
        }
    }

    pub fn record(&mut self, w: usize, z: usize, x: usize, y: f64) {
        self.t += 1;
        self.context_counts[w] += 1;
        self.counts[w][z] += 1;
        self.reward_sums[w][z] += y;
        self.reward_sq_sums[w][z] += y * y;
        self.transitions[w][z][x] += 1;
    }

    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn count(&self, w: usize, z: usize) -> u64 {
        self.counts[w][z]
    }

    /// Freeze the current sums as the statistics of phase `r`.
    pub fn snapshot(&self, r: u32) -> PhaseStats {
        PhaseStats {
            r,
            t: self.t,
            dims: self.dims,
            context_counts: self.context_counts.clone(),
            counts: self.counts.clone(),
            reward_sums: self.reward_sums.clone(),
            reward_sq_sums: self.reward_sq_sums.clone(),
            transitions: self.transitions.clone(),
        }
    }
}

/// Sufficient statistics at a phase endpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseStats {
    pub r: u32,
    pub t: u64,
    pub dims: Dims,
    pub context_counts: Vec<u64>,
    pub counts: Vec<Vec<u64>>,
    pub reward_sums: Vec<Vec<f64>>,
    pub reward_sq_sums: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<u64>>>,
}

impl PhaseStats {
    pub fn nu_hat(&self) -> Vec<f64> {
        let t = self.t.max(1) as f64;
        self.context_counts.iter().map(|&c| c as f64 / t).collect()
    }

    pub fn count(&self, w: usize, z: usize) -> u64 {
        self.counts[w][z]
    }

    /// Empirical ITT mean; `None` when the cell is unsampled.
    pub fn g_hat(&self, w: usize, z: usize) -> Option<f64> {
        let n = self.counts[w][z];
        (n > 0).then(|| self.reward_sums[w][z] / n as f64)
    }

    /// Unbiased sample variance of the rewards in cell `(w, z)`; needs two draws.
    pub fn reward_variance(&self, w: usize, z: usize) -> Option<f64> {
        let n = self.counts[w][z];
        if n < 2 {
            return None;
        }
        let n = n as f64;
        let mean = self.reward_sums[w][z] / n;
        Some(((self.reward_sq_sums[w][z] - n * mean * mean) / (n - 1.0)).max(0.0))
    }

    pub fn p_hat_row(&self, w: usize, z: usize) -> Option<DVector<f64>> {
        let n = self.counts[w][z];
        (n > 0).then(|| {
            DVector::from_iterator(
                self.dims.treatments,
                self.transitions[w][z].iter().map(|&c| c as f64 / n as f64),
            )
        })
    }

    /// Full empirical compliance matrix; `None` if any row is undefined.
    pub fn p_hat(&self, w: usize) -> Option<DMatrix<f64>> {
        let (kz, kx) = (self.dims.recommendations, self.dims.treatments);
        let mut p = DMatrix::zeros(kz, kx);
        for z in 0..kz {
            let row = self.p_hat_row(w, z)?;
            p.set_row(z, &row.transpose());
        }
        Some(p)
    }

    pub fn g_hat_vec(&self, w: usize) -> Option<DVector<f64>> {
        let g: Option<Vec<f64>> = (0..self.dims.recommendations).map(|z| self.g_hat(w, z)).collect();
        g.map(DVector::from_vec)
    }
}
