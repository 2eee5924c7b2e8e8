//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! stream number `4 * trial + component`. Streams never overlap, so trials
//! and arms can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Features = 0,
    Test = 1,
    Cas = 2,
    Nas = 3,
}

pub const COMPONENTS: [Component; 4] = [Component::Features, Component::Test, Component::Cas, Component::Nas];

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Features => "features",
            Component::Test => "test",
            Component::Cas => "cas",
            Component::Nas => "nas",
        }
    }
}

pub fn stream_id(trial: usize, component: Component) -> u64 {
    4 * trial as u64 + component as u64
}

pub fn stream_rng(master: u64, trial: usize, component: Component) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream_id(trial, component));
    rng
}

/// Seed layout written to `results.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub generator: &'static str,
    pub scheme: &'static str,
    pub trials: Vec<TrialSeeds>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSeeds {
    pub trial: usize,
    pub features: u64,
    pub test: u64,
    pub cas: u64,
    pub nas: u64,
}

impl SeedInfo {
    pub fn new(master: u64, trials: usize) -> Self {
        Self {
            master_seed: master,
            generator: "ChaCha8Rng::seed_from_u64(master_seed)",
            scheme: "stream = 4 * trial + component (features 0, test 1, cas 2, nas 3)",
            trials: (0..trials)
                .map(|t| TrialSeeds {
                    trial: t,
                    features: stream_id(t, Component::Features),
                    test: stream_id(t, Component::Test),
                    cas: stream_id(t, Component::Cas),
                    nas: stream_id(t, Component::Nas),
                })
                .collect(),
        }
    }
}
