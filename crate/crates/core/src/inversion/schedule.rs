use ndarray::Zip;

use super::InversionError;
use crate::guidance::{NoiseTensor, Real};

/// Noise schedule: `alphas_bar[0] = 1`, `alphas_bar[t] = ∏_{i≤t} (1 − β_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    betas: Vec<f64>,
    alphas_bar: Vec<f64>,
}

/// Linear betas from `beta_start` to `beta_end` over `steps`.
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<Schedule, InversionError> {
    if steps == 0 {
        return Err(InversionError::InvalidRange("step count must be at least 1".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(InversionError::InvalidRange(format!(
            "need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )));
    }
    let betas: Vec<f64> = if steps == 1 {
        vec![beta_start]
    } else {
        (0..steps)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    let mut alphas_bar = Vec::with_capacity(steps + 1);
    alphas_bar.push(1.0);
    for b in &betas {
        let last = *alphas_bar.last().unwrap();
        alphas_bar.push(last * (1.0 - b));
    }
    Ok(Schedule { betas, alphas_bar })
}

impl Schedule {
    /// Build directly from cumulative products (`alphas_bar[0]` must be 1).
    /// Flat stretches are allowed here; `make_schedule` never produces them.
    pub fn from_alphas_bar(alphas_bar: Vec<f64>) -> Result<Self, InversionError> {
        if alphas_bar.len() < 2 || alphas_bar[0] != 1.0 {
            return Err(InversionError::InvalidRange("alphas_bar must start at 1 and have T+1 entries".into()));
        }
        if alphas_bar.iter().any(|&a| !(a > 0.0 && a <= 1.0)) || alphas_bar.windows(2).any(|w| w[1] > w[0]) {
            return Err(InversionError::InvalidRange("alphas_bar must be non-increasing in (0, 1]".into()));
        }
        let betas = alphas_bar.windows(2).map(|w| 1.0 - w[1] / w[0]).collect();
        Ok(Self { betas, alphas_bar })
    }

    /// Number of steps T.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas_bar(&self) -> &[f64] {
        &self.alphas_bar
    }

    fn check_step(&self, t: usize) -> Result<(), InversionError> {
        if t == 0 || t > self.steps() {
            Err(InversionError::StepOutOfRange { t, steps: self.steps() })
        } else {
            Ok(())
        }
    }

    /// Coefficients `(a, c)` with `z_{t−1} = a·z_t + c·ε`.
    pub fn step_coeffs(&self, t: usize) -> Result<(f64, f64), InversionError> {
        self.check_step(t)?;
        let (prev, cur) = (self.alphas_bar[t - 1], self.alphas_bar[t]);
        let a = (prev / cur).sqrt();
        let c = (1.0 / prev - 1.0).sqrt() - (1.0 / cur - 1.0).sqrt();
        Ok((a, c))
    }
}

/// One deterministic reverse step:
/// `z_{t−1} = √(ᾱ_{t−1}/ᾱ_t)·z_t + (√(1/ᾱ_{t−1} − 1) − √(1/ᾱ_t − 1))·ε`.
pub fn ddim_step<T: Real>(
    z_t: &NoiseTensor<T>,
    t: usize,
    eps: &NoiseTensor<T>,
    schedule: &Schedule,
) -> Result<NoiseTensor<T>, InversionError> {
    let (a, c) = schedule.step_coeffs(t)?;
    z_t.ensure_same_shape(eps)?;
    let (a, c) = (T::lit(a), T::lit(c));
    let out = Zip::from(z_t.array()).and(eps.array()).map_collect(|&z, &e| a * z + c * e);
    Ok(NoiseTensor::from_array_unchecked(out))
}

/// Algebraic inverse of `ddim_step`: `z_t = √(ᾱ_t/ᾱ_{t−1})·(z_{t−1} − c_t·ε)`.
pub fn ddim_invert_step<T: Real>(
    z_prev: &NoiseTensor<T>,
    t: usize,
    eps: &NoiseTensor<T>,
    schedule: &Schedule,
) -> Result<NoiseTensor<T>, InversionError> {
    let (a, c) = schedule.step_coeffs(t)?;
    z_prev.ensure_same_shape(eps)?;
    let (inv_a, c) = (T::lit(1.0 / a), T::lit(c));
    let out = Zip::from(z_prev.array()).and(eps.array()).map_collect(|&z, &e| inv_a * (z - c * e));
    Ok(NoiseTensor::from_array_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_step_schedule() {
        let s = make_schedule(1, 0.1, 0.1).unwrap();
        assert_eq!(s.alphas_bar(), &[1.0, 0.9]);
    }

    #[test]
    fn two_step_schedule() {
        let s = make_schedule(2, 0.1, 0.2).unwrap();
        assert_eq!(s.alphas_bar()[1], 0.9);
        assert!((s.alphas_bar()[2] - 0.72).abs() < 1e-15);
    }

    #[test]
    fn invalid_ranges() {
        for (t, a, b) in [(0, 0.1, 0.2), (3, 0.0, 0.2), (3, 0.3, 0.2), (3, 0.1, 1.0)] {
            assert!(matches!(make_schedule(t, a, b), Err(InversionError::InvalidRange(_))));
        }
    }

    #[test]
    fn zero_eps_is_pure_drift() {
        let s = make_schedule(10, 1e-4, 0.02).unwrap();
        let z = NoiseTensor::<f64>::from_vec((1, 1, 1, 2), vec![0.5, -2.0]).unwrap();
        let out = ddim_step(&z, 4, &NoiseTensor::zeros((1, 1, 1, 2)).unwrap(), &s).unwrap();
        let k = (s.alphas_bar()[3] / s.alphas_bar()[4]).sqrt();
        assert_eq!(out.to_vec(), vec![0.5 * k, -2.0 * k]);
    }

    #[test]
    fn flat_schedule_is_identity() {
        let s = Schedule::from_alphas_bar(vec![1.0, 0.8, 0.8]).unwrap();
        let z = NoiseTensor::<f64>::from_vec((1, 1, 1, 2), vec![0.25, 3.0]).unwrap();
        let eps = NoiseTensor::<f64>::from_vec((1, 1, 1, 2), vec![9.0, -9.0]).unwrap();
        assert_eq!(ddim_step(&z, 2, &eps, &s).unwrap(), z);
    }

    #[test]
    fn step_bounds() {
        let s = make_schedule(3, 1e-4, 0.02).unwrap();
        let z = NoiseTensor::<f64>::zeros((1, 1, 1, 1)).unwrap();
        assert!(matches!(ddim_step(&z, 0, &z, &s), Err(InversionError::StepOutOfRange { t: 0, steps: 3 })));
        assert!(matches!(ddim_step(&z, 4, &z, &s), Err(InversionError::StepOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn alphas_bar_strictly_decrease(steps in 1usize..200, lo in 1e-5f64..0.5, span in 0.0f64..0.49) {
            let s = make_schedule(steps, lo, lo + span).unwrap();
            prop_assert_eq!(s.alphas_bar().len(), steps + 1);
            prop_assert!(s.alphas_bar().windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        }

        #[test]
        fn invert_step_undoes_step(vals in prop::collection::vec(-3.0f64..3.0, 4), eps in prop::collection::vec(-3.0f64..3.0, 4), t in 1usize..=50) {
            let s = make_schedule(50, 1e-4, 0.02).unwrap();
            let z = NoiseTensor::from_vec((1, 1, 2, 2), vals).unwrap();
            let e = NoiseTensor::from_vec((1, 1, 2, 2), eps).unwrap();
            let back = ddim_step(&ddim_invert_step(&z, t, &e, &s).unwrap(), t, &e, &s).unwrap();
            prop_assert!(back.rms_diff(&z).unwrap() < 1e-12);
        }
    }
}
