//! Step learning-rate schedules with an optional warmup phase.

use crate::error::{config_err, Result};

/// `warmup_lr` for the first `warmup_epochs`, then `base_lr * decay_factor^s`
/// where `s = (epoch - 1) / decay_every`. Training stops after the segment
/// whose rate reaches `stop_lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_lr: f64,
    pub warmup_epochs: usize,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub stop_lr: f64,
}

impl LrSchedule {
    pub fn constant_decay(
        base_lr: f64,
        decay_factor: f64,
        decay_every: usize,
        stop_lr: f64,
    ) -> Self {
        LrSchedule {
            base_lr,
            warmup_lr: base_lr,
            warmup_epochs: 0,
            decay_factor,
            decay_every,
            stop_lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.stop_lr > 0.0 && self.stop_lr <= self.base_lr) {
            return Err(config_err!("need 0 < stop_lr <= base_lr"));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(config_err!("decay factor must lie in (0, 1)"));
        }
        if self.decay_every == 0 {
            return Err(config_err!("decay interval must be at least one epoch"));
        }
        if self.warmup_epochs > 0 && !(self.warmup_lr > 0.0) {
            return Err(config_err!("warmup learning rate must be positive"));
        }
        Ok(())
    }

    /// Number of decays needed to go from `base_lr` to `stop_lr`.
    pub fn decay_steps(&self) -> usize {
        let ratio = libm::log(self.base_lr / self.stop_lr) / libm::log(1.0 / self.decay_factor);
        libm::round(ratio).max(0.0) as usize
    }

    pub fn total_epochs(&self) -> usize {
        (self.decay_steps() + 1) * self.decay_every
    }

    /// Learning rate for a 1-based epoch, or `None` once training is over.
    pub fn lr_at(&self, epoch: usize) -> Option<f64> {
        if epoch == 0 || epoch > self.total_epochs() {
            return None;
        }
        if epoch <= self.warmup_epochs {
            return Some(self.warmup_lr);
        }
        let segment = (epoch - 1) / self.decay_every;
        Some(self.base_lr * libm::pow(self.decay_factor, segment as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Option<f64>, b: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() <= 1e-12 * b)
    }

    #[test]
    fn segmentation_trace() {
        let s = LrSchedule::constant_decay(1e-2, 0.1, 500, 1e-6);
        assert!(close(s.lr_at(1), 1e-2) && close(s.lr_at(500), 1e-2));
        assert!(close(s.lr_at(501), 1e-3) && close(s.lr_at(1000), 1e-3));
        assert!(close(s.lr_at(2001), 1e-6) && close(s.lr_at(2500), 1e-6));
        assert_eq!(s.lr_at(2501), None);
        assert_eq!(s.total_epochs(), 2500);
    }

    #[test]
    fn warmup_overrides_first_epochs() {
        let s = LrSchedule {
            warmup_lr: 1e-4,
            warmup_epochs: 10,
            ..LrSchedule::constant_decay(1e-3, 0.1, 500, 1e-6)
        };
        assert!(close(s.lr_at(10), 1e-4));
        assert!(close(s.lr_at(11), 1e-3));
        assert!(close(s.lr_at(501), 1e-4));
    }

    #[test]
    fn invalid_schedules() {
        assert!(LrSchedule::constant_decay(1e-2, 1.5, 10, 1e-6)
            .validate()
            .is_err());
        assert!(LrSchedule::constant_decay(1e-2, 0.1, 0, 1e-6)
            .validate()
            .is_err());
        assert!(LrSchedule::constant_decay(1e-6, 0.1, 10, 1e-2)
            .validate()
            .is_err());
    }
}
