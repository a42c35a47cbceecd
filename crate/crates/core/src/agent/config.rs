use serde::{Deserialize, Serialize};

use crate::contrast::{ContrastConfig, MarginConfig, Objective, DEFAULT_BANK_CAPACITY};
use crate::env_graph::HopThresholds;
use crate::scalar::Scalar;

use super::TrainError;

/// Training hyperparameters.
///
/// The three contrastive weights multiply the trajectory, instruction and
/// sub-instruction losses. The first weight's term is written `L_C^P` in the
/// published objective, a symbol defined nowhere else; it is read here as the
/// coarse trajectory loss, hence the field name `lambda_traj_cp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda_traj_cp: f64,
    pub lambda_instr: f64,
    pub lambda_sub: f64,
    pub margin: f64,
    pub gamma: f64,
    pub objective: Objective,
    pub use_bank: bool,
    pub use_mining: bool,
    pub bank_capacity: usize,
    pub alpha_p: f64,
    pub alpha_n: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub rl_discount: f64,
    pub value_coef: f64,
    pub grad_clip: f64,
    pub d: usize,
    pub success_radius_m: f64,
    /// Cap on enumerated alternative trajectories per episode.
    pub max_alternatives: usize,
    /// Trajectory positives / negatives drawn per anchor per step.
    pub traj_positives: usize,
    pub traj_negatives: usize,
    /// Shuffled/repeated instruction negatives generated per episode.
    pub instr_negatives: usize,
    /// SGD steps per training run.
    pub steps: usize,
    /// Evaluate every this many steps (0 disables periodic evaluation).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_traj_cp: 0.1,
            lambda_instr: 0.01,
            lambda_sub: 0.01,
            margin: 0.25,
            gamma: 32.0,
            objective: Objective::Circle,
            use_bank: true,
            use_mining: true,
            bank_capacity: DEFAULT_BANK_CAPACITY,
            alpha_p: 1.2,
            alpha_n: 1.4,
            learning_rate: 0.2,
            batch_size: 8,
            max_steps: 10,
            rl_discount: 0.9,
            value_coef: 0.5,
            grad_clip: 5.0,
            d: 32,
            success_radius_m: 3.0,
            max_alternatives: 64,
            traj_positives: 4,
            traj_negatives: 4,
            instr_negatives: 2,
            steps: 1000,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        for (name, v) in [
            ("lambda_traj_cp", self.lambda_traj_cp),
            ("lambda_instr", self.lambda_instr),
            ("lambda_sub", self.lambda_sub),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative weight"));
            }
        }
        if !(self.rl_discount > 0.0 && self.rl_discount <= 1.0) {
            return bad("rl_discount must lie in (0, 1]".into());
        }
        if self.batch_size == 0 || self.max_steps == 0 || self.d == 0 {
            return bad("batch_size, max_steps and d must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.grad_clip > 0.0 && self.success_radius_m > 0.0) {
            return bad("learning_rate, grad_clip and success_radius_m must be positive".into());
        }
        if let Objective::InfoNce { temperature } = self.objective {
            if !(temperature > 0.0) {
                return bad("InfoNCE temperature must be positive".into());
            }
        }
        self.thresholds()?;
        self.contrast::<f64>()?;
        Ok(())
    }

    pub fn thresholds(&self) -> Result<HopThresholds, TrainError> {
        HopThresholds::new(self.alpha_p, self.alpha_n).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn contrast<F: Scalar>(&self) -> Result<ContrastConfig<F>, TrainError> {
        let margins =
            MarginConfig::new(F::of(self.margin), F::of(self.gamma)).map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(ContrastConfig {
            margins,
            objective: self.objective,
            use_bank: self.use_bank,
            use_mining: self.use_mining,
        })
    }

    /// Weights `(λ1, λ2, λ3)`.
    pub fn lambdas(&self) -> (f64, f64, f64) {
        (self.lambda_traj_cp, self.lambda_instr, self.lambda_sub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.lambdas(), (0.1, 0.01, 0.01));
        assert_eq!((c.margin, c.bank_capacity, c.alpha_p, c.alpha_n), (0.25, 240, 1.2, 1.4));
        assert_eq!(c.rl_discount, 0.9);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = TrainConfig {
            lambda_instr: -1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        c.lambda_instr = 0.0;
        c.alpha_n = 1.1;
        assert!(c.validate().is_err());
        c.alpha_n = 1.4;
        c.rl_discount = 0.0;
        assert!(c.validate().is_err());
    }
}
