//! Adaptive Dormand–Prince 5(4) integration with dense output on a fixed
//! sampling grid.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riccati_lqt::LinearSystem;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Spacing of the sampling grid passed to observers.
    pub output_dt: f64,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-8,
            max_step: 0.1,
            output_dt: 0.01,
            initial_step: None,
        }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("max_step", self.max_step)?;
        positive("output_dt", self.output_dt)?;
        if let Some(h) = self.initial_step {
            positive("initial_step", h)?;
        }
        Ok(())
    }
}

/// Returned by observers to continue or end the integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOutcome {
    /// Time of the last observed grid point.
    pub time: f64,
    /// State at that time.
    pub state: Vec<f64>,
    /// Grid index at which an observer stopped the run.
    pub stopped_at: Option<usize>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Last accepted step size, useful to warm-start a continuation.
    pub last_step: f64,
}

/// Integrates `ẏ = f(t, y)` from `t0` to `t_end`, calling `observer(k, t, y)`
/// at the grid points `t0 + k·output_dt` (`k = 0, 1, …`) and at `t_end` if it
/// is not itself on the grid.
pub fn integrate_grid<F, O>(mut rhs: F, t0: f64, y0: &[f64], t_end: f64, config: &OdeConfig, mut observer: O) -> Result<OdeOutcome>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]) -> Flow,
{
    config.validate()?;
    if !(t_end >= t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_span",
            reason: format!("need finite t0 <= t_end, got [{t0}, {t_end}]"),
        });
    }
    let n = y0.len();
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: t0 });
    }

    let dt = config.output_dt;
    // Last grid index inside the span, tolerant to rounding of t_end.
    let span = t_end - t0;
    let last_k = ((span / dt) * (1.0 + 1e-12) + 1e-9).floor() as usize;
    let grid_time = |k: usize| if k == last_k && ((t0 + k as f64 * dt) - t_end).abs() <= 1e-9 * dt { t_end } else { t0 + k as f64 * dt };
    let extra_end = (grid_time(last_k) - t_end).abs() > 0.0;

    let mut y = y0.to_vec();
    let mut outcome = OdeOutcome {
        time: t0,
        state: y.clone(),
        stopped_at: None,
        accepted_steps: 0,
        rejected_steps: 0,
        last_step: 0.0,
    };
    if observer(0, t0, &y) == Flow::Stop {
        outcome.stopped_at = Some(0);
        return Ok(outcome);
    }
    if span == 0.0 {
        return Ok(outcome);
    }

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut sample = vec![0.0; n];
    let mut rcont = vec![vec![0.0; n]; 5];

    rhs(t0, &y, &mut k1);
    let mut h = config
        .initial_step
        .unwrap_or_else(|| initial_step(&mut rhs, t0, &y, &k1, config, &mut ytmp, &mut k2))
        .min(config.max_step)
        .min(span);
    let mut t = t0;
    let mut next_k = 1usize;
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut last_nonfinite = false;

    loop {
        if outcome.accepted_steps + outcome.rejected_steps > MAX_STEPS {
            return Err(Error::NoConvergence("ODE integration"));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(if last_nonfinite {
                Error::NonFiniteState { t }
            } else {
                Error::StepSizeUnderflow { t }
            });
        }
        let remaining = t_end - t;
        let final_step = h >= remaining * (1.0 - 1e-12);
        if final_step {
            h = remaining;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if final_step { t_end } else { t + h };
        rhs(t_new, &ytmp, &mut k6);
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t_new, &y1, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = config.abs_tol + config.rel_tol * y[i].abs().max(y1[i].abs());
            err += (e / sk) * (e / sk);
        }
        let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };

        if !err.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            last_nonfinite = true;
            outcome.rejected_steps += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        last_nonfinite = false;

        let fac11 = err.powf(EXPO);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (h / fac).min(config.max_step);
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);
            outcome.accepted_steps += 1;
            outcome.last_step = h;

            // Dense output coefficients
            for i in 0..n {
                let dy = y1[i] - y[i];
                let bspl = h * k1[i] - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - h * k7[i] - bspl;
                rcont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            while next_k <= last_k {
                let tk = grid_time(next_k);
                if tk > t_new {
                    break;
                }
                let state: &[f64] = if tk == t_new {
                    &y1
                } else {
                    let theta = (tk - t) / h;
                    let theta1 = 1.0 - theta;
                    for i in 0..n {
                        sample[i] = rcont[0][i]
                            + theta
                                * (rcont[1][i]
                                    + theta1 * (rcont[2][i] + theta * (rcont[3][i] + theta1 * rcont[4][i])));
                    }
                    &sample
                };
                outcome.time = tk;
                outcome.state.copy_from_slice(state);
                if observer(next_k, tk, state) == Flow::Stop {
                    outcome.stopped_at = Some(next_k);
                    return Ok(outcome);
                }
                next_k += 1;
            }

            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if final_step {
                if extra_end {
                    outcome.time = t;
                    outcome.state.copy_from_slice(&y);
                    if observer(last_k + 1, t, &y) == Flow::Stop {
                        outcome.stopped_at = Some(last_k + 1);
                    }
                }
                return Ok(outcome);
            }
            h = h_new;
            last_rejected = false;
        } else {
            outcome.rejected_steps += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[f64], f0: &[f64], config: &OdeConfig, y1: &mut [f64], f1: &mut [f64]) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len().max(1) as f64;
    let sk = |i: usize| config.abs_tol + config.rel_tol * y0[i].abs();
    let dnf = (0..y0.len()).map(|i| (f0[i] / sk(i)).powi(2)).sum::<f64>() / n;
    let dny = (0..y0.len()).map(|i| (y0[i] / sk(i)).powi(2)).sum::<f64>() / n;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(config.max_step);
    for i in 0..y0.len() {
        y1[i] = y0[i] + h * f0[i];
    }
    rhs(t0 + h, y1, f1);
    let der2 = ((0..y0.len()).map(|i| ((f1[i] - f0[i]) / sk(i)).powi(2)).sum::<f64>() / n).sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(config.max_step)
}

/// Sampled closed-loop trajectory of a controlled system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    /// Integral of the cost integrand from the start.
    pub cumulative_cost: Vec<f64>,
}

/// Integrates `ẋ = Ax + Bu(t, x) + c` on the output grid, carrying the
/// integral of `cost_integrand(x, u)` as an augmented state.
pub fn integrate<U, L>(
    system: &LinearSystem,
    control_law: U,
    x0: &DVector<f64>,
    t_span: (f64, f64),
    cost_integrand: Option<L>,
    config: &OdeConfig,
) -> Result<Trajectory>
where
    U: Fn(f64, &DVector<f64>) -> DVector<f64>,
    L: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let d = system.state_dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, system has {d}",
            x0.len()
        )));
    }
    let mut z0 = x0.as_slice().to_vec();
    z0.push(0.0);
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        controls: Vec::new(),
        cumulative_cost: Vec::new(),
    };
    let mut x = DVector::zeros(d);
    let rhs = |t: f64, z: &[f64], dz: &mut [f64]| {
        x.copy_from_slice(&z[..d]);
        let u = control_law(t, &x);
        let xd = system.derivative(&x, &u);
        dz[..d].copy_from_slice(xd.as_slice());
        dz[d] = cost_integrand.as_ref().map_or(0.0, |l| l(&x, &u));
    };
    integrate_grid(rhs, t_span.0, &z0, t_span.1, config, |_, t, z| {
        let xs = DVector::from_column_slice(&z[..d]);
        traj.controls.push(control_law(t, &xs));
        traj.states.push(xs);
        traj.times.push(t);
        traj.cumulative_cost.push(z[d]);
        Flow::Continue
    })?;
    Ok(traj)
}
