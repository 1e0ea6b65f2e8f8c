use ndarray::{Array2, Zip};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(shape: (usize, usize)) -> Self {
        AdamState { m: Array2::zeros(shape), v: Array2::zeros(shape), t: 0 }
    }
}

/// Per-step multiplier on the learning rate, computed from the parameters and
/// the raw Adam update (the hook a layer-wise trust ratio plugs into).
pub trait StepScale {
    fn scale(&self, theta: &Array2<f64>, update: &Array2<f64>) -> f64;
}

pub struct Unscaled;

impl StepScale for Unscaled {
    fn scale(&self, _: &Array2<f64>, _: &Array2<f64>) -> f64 {
        1.0
    }
}

/// One Adam update with bias correction.
pub fn adam_step(theta: &mut Array2<f64>, grad: &Array2<f64>, state: &mut AdamState, lr: f64) {
    adam_step_scaled(theta, grad, state, lr, &Unscaled)
}

pub fn adam_step_scaled(
    theta: &mut Array2<f64>,
    grad: &Array2<f64>,
    state: &mut AdamState,
    lr: f64,
    scaling: &dyn StepScale,
) {
    assert_eq!(theta.dim(), grad.dim(), "gradient shape");
    assert_eq!(theta.dim(), state.m.dim(), "optimizer state shape");
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    Zip::from(&mut state.m).and(&mut state.v).and(grad).for_each(|m, v, &g| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
    });
    let mut update = Array2::zeros(theta.dim());
    Zip::from(&mut update).and(&state.m).and(&state.v).for_each(|u, &m, &v| {
        *u = (m / bc1) / ((v / bc2).sqrt() + ADAM_EPS);
    });
    let step = lr * scaling.scale(theta, &update);
    Zip::from(theta).and(&update).for_each(|t, &u| *t -= step * u);
}
