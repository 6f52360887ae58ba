use serde::{Deserialize, Serialize};

/// Shared knobs for the restart-based optimizers.
///
/// Restart `i` is seeded with `seed + i`, so results do not depend on how the
/// restarts are scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Largest matrix side an optimizer is allowed to build.
    pub size_cap: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            restarts: 64,
            max_iter: 500,
            tol: 1e-10,
            size_cap: 4096,
        }
    }
}

impl OptConfig {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// Default tolerance for Hermiticity checks on entries of `A - A^dagger`.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Default relative singular-value cutoff for pseudo-inverses.
pub const PINV_TOL: f64 = 1e-12;
