use crate::error::{Error, Result};

/// Moment estimates for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// A non-finite gradient aborts the step before anything is modified.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::shape(
            "adam_step",
            params.len(),
            format!("grads {}, m {}, v {}", grads.len(), state.m.len(), state.v.len()),
        ));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence("adam_step"));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_lr_times_sign() {
        for g in [1e-6, 0.3, -7.0, 1234.5] {
            let mut p = [0.5];
            let mut st = AdamState::new(1, 0.001);
            adam_step(&mut p, &[g], &mut st).unwrap();
            let step = p[0] - 0.5;
            // m_hat / sqrt(v_hat) = g/|g| up to eps
            let expected = -0.001 * g.signum() * g.abs() / (g.abs() + 1e-8);
            assert!((step - expected).abs() < 1e-15, "g={g} step={step}");
            assert!((step.abs() - 0.001).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut p = [1.0, -2.0];
        let mut st = AdamState::new(2, 0.01);
        adam_step(&mut p, &[0.0, 0.0], &mut st).unwrap();
        assert_eq!(p, [1.0, -2.0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn two_steps_follow_textbook_recurrence() {
        let (lr, g, b1, b2, eps) = (0.01f64, 0.4f64, 0.9f64, 0.999f64, 1e-8f64);
        let mut p = [2.0];
        let mut st = AdamState::new(1, lr);
        adam_step(&mut p, &[g], &mut st).unwrap();
        adam_step(&mut p, &[g], &mut st).unwrap();

        // hand recurrence
        let m1 = 0.1 * g;
        let v1 = 0.001 * g * g;
        let p1 = 2.0 - lr * (m1 / 0.1) / ((v1 / 0.001).sqrt() + eps);
        let m2 = b1 * m1 + 0.1 * g;
        let v2 = b2 * v1 + 0.001 * g * g;
        let p2 = p1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((p[0] - p2).abs() < 1e-14);
        assert_eq!(st.t, 2);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = [1.0];
        let mut st = AdamState::new(1, 0.1);
        let err = adam_step(&mut p, &[f64::NAN], &mut st).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
        assert_eq!(p, [1.0]);
        assert_eq!(st.t, 0);
    }
}
