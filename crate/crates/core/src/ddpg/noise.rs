use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Ornstein-Uhlenbeck process reverting to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
    pub state: f64,
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64, dt: f64) -> Self {
        OuNoise {
            theta,
            sigma,
            dt,
            state: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.state = 0.0;
    }

    /// `x <- x + theta (0 - x) dt + sigma sqrt(dt) n`, `n ~ N(0, 1)`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let draw: f64 = rng.sample(StandardNormal);
        self.state = ou_step(self.state, self.theta, self.sigma, self.dt, draw);
        self.state
    }

    /// Stationary variance `sigma^2 / (2 theta)` of the continuous process.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }
}

/// One Euler-Maruyama step with an explicit standard normal draw.
pub fn ou_step(state: f64, theta: f64, sigma: f64, dt: f64, draw: f64) -> f64 {
    state + theta * (0.0 - state) * dt + sigma * dt.sqrt() * draw
}
