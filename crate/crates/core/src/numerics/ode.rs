//! Adaptive Dormand–Prince 5(4) integrator.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}, state = {state:?}")]
    StepUnderflow { t: f64, state: Vec<f64> },
    #[error("maximum number of steps exceeded at t = {t}")]
    TooManySteps { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    /// Mixed absolute/relative local error bound.
    pub tol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Clamp negative components to zero after every accepted step.
    pub clamp_nonneg: bool,
}

impl OdeOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            h_init: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            clamp_nonneg: false,
        }
    }

    pub fn nonneg(mut self) -> Self {
        self.clamp_nonneg = true;
        self
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// True when the integration was ended by the stop predicate.
    pub stopped: bool,
}

impl OdeSolution {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("solution holds the initial state")
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t_end`, emitting every accepted
/// step. `stop` is checked after each step and ends the integration early.
pub fn dopri5<F, S>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut stop: S,
) -> Result<OdeSolution, OdeError>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    let mut sol = OdeSolution {
        times: vec![t0],
        states: vec![y0.to_vec()],
        stopped: false,
    };
    if t_end <= t0 {
        return Ok(sol);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = f(t, &y);
    let span = t_end - t0;
    let mut h = opts.h_init.unwrap_or_else(|| {
        let scale = crate::numerics::max_abs(&k[0]).max(1e-8);
        (0.01 * (1.0 + crate::numerics::max_abs(&y)) / scale).min(span).min(0.1 * span.max(1e-3))
    });
    h = h.min(opts.h_max);
    let mut steps = 0usize;
    let mut ytmp = vec![0.0; n];
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(OdeError::TooManySteps { t });
        }
        if t + h > t_end {
            h = t_end - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += h * A[s][r] * kr[i];
                }
                ytmp[i] = acc;
            }
            k[s] = f(t + C[s] * h, &ytmp);
        }
        // ytmp now holds the 5th-order solution (stage 7 is evaluated there).
        let mut err = 0.0_f64;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B5[s] - B4[s]) * k[s][i];
            }
            e *= h;
            let sc = opts.tol * (1.0 + y[i].abs().max(ytmp[i].abs()));
            let r = e.abs() / sc;
            err = if r.is_nan() { f64::INFINITY } else { err.max(r) };
        }
        if !err.is_finite() || ytmp.iter().any(|v| !v.is_finite()) {
            if h <= opts.h_min {
                return Err(OdeError::NonFinite { t });
            }
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&ytmp);
            if opts.clamp_nonneg {
                let mut clamped = false;
                for v in y.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                        clamped = true;
                    }
                }
                k[0] = if clamped { f(t, &y) } else { k[6].clone() };
            } else {
                k[0] = k[6].clone();
            }
            sol.times.push(t);
            sol.states.push(y.clone());
            if stop(t, &y) {
                sol.stopped = true;
                return Ok(sol);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < opts.h_min {
                return Err(OdeError::StepUnderflow { t, state: y });
            }
        }
    }
    Ok(sol)
}
