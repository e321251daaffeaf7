use serde::{Deserialize, Serialize};

use super::{ActionBin, ProbDist};
use crate::error::{Error, Result};

/// Rows whose accumulated mass decays below this keep their last
/// normalized estimate; dividing subnormal values would return noise.
const MIN_ROW_MASS: f64 = 1e-280;

/// Recursive estimate of one action's transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ActionTransitions {
    /// Exponentially weighted joint mass of (source, successor) pairs.
    joint: Vec<Vec<f64>>,
    /// Exponentially weighted source mass; row sums of `joint`.
    source: Vec<f64>,
    /// Row-stochastic transition matrix, `diag(source)^-1 joint`.
    tpm: Vec<Vec<f64>>,
}

impl ActionTransitions {
    fn empty() -> Self {
        ActionTransitions {
            joint: Vec::new(),
            source: Vec::new(),
            tpm: Vec::new(),
        }
    }

    fn refresh_row(&mut self, i: usize) {
        let mass = self.source[i];
        if mass < MIN_ROW_MASS {
            return;
        }
        let row = &mut self.tpm[i];
        row.clear();
        row.extend(self.joint[i].iter().map(|f| f / mass));
    }

    fn expand(&mut self, init_mass: f64) {
        for (row, mass) in self.joint.iter_mut().zip(self.source.iter_mut()) {
            row.push(init_mass);
            *mass += init_mass;
        }
        let n = self.joint.len() + 1;
        self.joint.push(vec![init_mass; n]);
        self.source.push(n as f64 * init_mass);
        self.tpm.push(Vec::with_capacity(n));
        for i in 0..n {
            self.refresh_row(i);
        }
    }
}

/// One transition probability matrix per discrete action over a growing
/// state set. Rows index the source state: `tpm[i][j]` is the probability of
/// moving from state `i` to state `j` under the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    states: usize,
    learning_rate: f64,
    init_mass: f64,
    actions: Vec<ActionTransitions>,
}

impl TransitionModel {
    pub fn new(actions: usize, learning_rate: f64, init_mass: f64) -> Self {
        assert!(actions > 0);
        TransitionModel {
            states: 0,
            learning_rate,
            init_mass,
            actions: (0..actions).map(|_| ActionTransitions::empty()).collect(),
        }
    }

    /// Builds a model from explicit row-stochastic matrices, one per action.
    /// Accumulators start equal to the matrices themselves.
    pub fn from_matrices(matrices: Vec<Vec<Vec<f64>>>, learning_rate: f64, init_mass: f64) -> Result<Self> {
        let n = matrices.first().map(Vec::len).unwrap_or(0);
        if matrices.is_empty() || n == 0 {
            return Err(Error::InvalidConfig("at least one non-empty matrix required".into()));
        }
        let mut actions = Vec::with_capacity(matrices.len());
        for m in matrices {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidConfig("matrices must share one square shape".into()));
            }
            for row in &m {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| *p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig("matrix rows must be stochastic".into()));
                }
            }
            let source = m.iter().map(|row| row.iter().sum()).collect();
            actions.push(ActionTransitions {
                joint: m.clone(),
                source,
                tpm: m,
            });
        }
        Ok(TransitionModel {
            states: n,
            learning_rate,
            init_mass,
            actions,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    fn slot(&self, action: ActionBin) -> Result<&ActionTransitions> {
        self.actions.get(action.offset()).ok_or(Error::ActionOutOfRange {
            bin: action.get(),
            bins: self.actions.len(),
        })
    }

    pub fn tpm(&self, action: ActionBin) -> Result<&[Vec<f64>]> {
        Ok(&self.slot(action)?.tpm)
    }

    /// Joint and source accumulators for one action.
    pub fn accumulators(&self, action: ActionBin) -> Result<(&[Vec<f64>], &[f64])> {
        let slot = self.slot(action)?;
        Ok((&slot.joint, &slot.source))
    }

    /// Adds one state: a new accumulator row and column filled with the
    /// initial mass. Existing source masses grow by the same amount so each
    /// stays equal to its row sum.
    pub fn expand(&mut self) {
        let init_mass = self.init_mass;
        for slot in &mut self.actions {
            slot.expand(init_mass);
        }
        self.states += 1;
    }

    /// One recursive identification step for `action` from the distribution
    /// one step ago (`previous`) to the current one. Other actions are left
    /// untouched.
    ///
    /// Panics if either distribution does not cover the current state set.
    pub fn identify(&mut self, previous: &ProbDist, current: &ProbDist, action: ActionBin) -> Result<()> {
        assert_eq!(previous.len(), self.states, "previous distribution has wrong dimension");
        assert_eq!(current.len(), self.states, "current distribution has wrong dimension");
        let phi = self.learning_rate;
        let bins = self.actions.len();
        let slot = self
            .actions
            .get_mut(action.offset())
            .ok_or(Error::ActionOutOfRange { bin: action.get(), bins })?;
        let gamma = current.as_slice();
        for (i, &tau) in previous.as_slice().iter().enumerate() {
            let row = &mut slot.joint[i];
            let mut outer_row_sum = 0.0;
            for (f, &g) in row.iter_mut().zip(gamma) {
                let outer = tau * g;
                outer_row_sum += outer;
                *f += phi * (outer - *f);
            }
            slot.source[i] += phi * (outer_row_sum - slot.source[i]);
            slot.refresh_row(i);
        }
        Ok(())
    }

    /// One-step prediction: `next(j) = sum_i dist(i) * tpm(i, j)`.
    pub fn predict_next(&self, dist: &ProbDist, action: ActionBin) -> Result<ProbDist> {
        if self.states == 0 {
            return Err(Error::EmptyModel);
        }
        let tpm = &self.slot(action)?.tpm;
        Ok(propagate(dist, tpm))
    }

    /// Action-averaged transition matrix under a uniform action prior.
    pub fn marginal(&self) -> Vec<Vec<f64>> {
        let n = self.states;
        let weight = 1.0 / self.actions.len() as f64;
        let mut out = vec![vec![0.0; n]; n];
        for slot in &self.actions {
            for (acc, row) in out.iter_mut().zip(&slot.tpm) {
                for (a, p) in acc.iter_mut().zip(row) {
                    *a += weight * p;
                }
            }
        }
        out
    }

    /// Prediction `horizon` steps ahead: one step under `action`, then
    /// `horizon - 1` steps under the marginal matrix.
    pub fn predict_k(&self, dist: &ProbDist, action: ActionBin, horizon: usize) -> Result<ProbDist> {
        if horizon < 2 {
            return Err(Error::HorizonTooShort(horizon));
        }
        let mut pred = self.predict_next(dist, action)?;
        let marginal = self.marginal();
        for _ in 1..horizon {
            pred = propagate(&pred, &marginal);
        }
        Ok(pred)
    }
}

fn propagate(dist: &ProbDist, tpm: &[Vec<f64>]) -> ProbDist {
    assert_eq!(dist.len(), tpm.len(), "distribution/matrix dimension mismatch");
    let mut next = vec![0.0; tpm.len()];
    for (&p, row) in dist.as_slice().iter().zip(tpm) {
        if p == 0.0 {
            continue;
        }
        for (n, t) in next.iter_mut().zip(row) {
            *n += p * t;
        }
    }
    ProbDist::from_weights(next).expect("row-stochastic propagation keeps positive mass")
}
