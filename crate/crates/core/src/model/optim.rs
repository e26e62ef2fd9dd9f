use serde::{Deserialize, Serialize};

use super::ModelError;

/// Step schedule: the rate is multiplied by `factor` at each milestone epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub milestones: Vec<usize>,
    pub factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule { milestones: vec![20, 40], factor: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { lr: 1e-2, momentum: 0.9, weight_decay: 5e-4, epochs: 60, batch_size: 8, schedule: LrSchedule::default() }
    }
}

impl OptimizerConfig {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.schedule.milestones.iter().filter(|&&m| epoch >= m).count();
        self.lr * self.schedule.factor.powi(drops as i32)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(format!("learning rate must be finite and non-negative, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(format!("weight decay must be finite and non-negative, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return Err("batch size must be positive".into());
        }
        if !(self.schedule.factor > 0.0 && self.schedule.factor.is_finite()) {
            return Err(format!("schedule factor must be positive, got {}", self.schedule.factor));
        }
        Ok(())
    }
}

/// Momentum SGD with L2 regularization added to the gradient:
/// `v = momentum * v + (g + wd * p)`, `p -= lr * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    pub velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(momentum: f64, weight_decay: f64, len: usize) -> Self {
        Sgd { momentum, weight_decay, velocity: vec![0.0; len] }
    }

    pub fn from_config(cfg: &OptimizerConfig, len: usize) -> Self {
        Self::new(cfg.momentum, cfg.weight_decay, len)
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<(), ModelError> {
        if params.len() != grad.len() || params.len() != self.velocity.len() {
            return Err(ModelError::ShapeMismatch {
                expected: format!("{} parameters", self.velocity.len()),
                got: format!("{} parameters, {} gradients", params.len(), grad.len()),
            });
        }
        for ((p, g), v) in params.iter_mut().zip(grad).zip(&mut self.velocity) {
            *v = self.momentum * *v + (g + self.weight_decay * *p);
            if lr != 0.0 {
                *p -= lr * *v;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_drops_by_ten() {
        let cfg = OptimizerConfig::default();
        assert_eq!(cfg.lr_at(0), 1e-2);
        assert_eq!(cfg.lr_at(19), 1e-2);
        assert!((cfg.lr_at(20) - 1e-3).abs() < 1e-18);
        assert!((cfg.lr_at(59) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn momentum_update_by_hand() {
        let mut opt = Sgd::new(0.9, 0.5, 1);
        let mut p = [2.0];
        opt.step(&mut p, &[1.0], 0.1).unwrap();
        // v = 1 + 0.5 * 2 = 2, p = 2 - 0.2
        assert!((p[0] - 1.8).abs() < 1e-15);
        opt.step(&mut p, &[1.0], 0.1).unwrap();
        // v = 0.9 * 2 + 1 + 0.9 = 3.7
        assert!((opt.velocity[0] - 3.7).abs() < 1e-15);
        assert!((p[0] - 1.43).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_keeps_parameters() {
        let mut opt = Sgd::new(0.9, 5e-4, 3);
        let mut p = [1.5, -0.25, 3.0];
        let before = p;
        for _ in 0..5 {
            opt.step(&mut p, &[0.3, -7.0, 1e3], 0.0).unwrap();
        }
        assert_eq!(p.map(f64::to_bits), before.map(f64::to_bits));
    }

    #[test]
    fn validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig { lr: -1.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(Sgd::new(0.9, 0.0, 2).step(&mut [0.0], &[0.0], 0.1).is_err());
    }
}
