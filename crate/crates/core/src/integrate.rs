//! Adaptive Dormand-Prince RK4(5) integration of the poverty-trap ODE.
//!
//! Embedded 5th/4th-order pair with FSAL, per-component error scaling
//! `sc_i = abs_tol + rel_tol * max(|y_i|, |y_new_i|)` and the standard step
//! controller `h <- h * clamp(0.9 * err^(-1/5), 0.2, 5)`. Observed
//! convergence order on the logistic closed-form case is >= 4 (the 4th-order
//! embedded estimate governs step selection).
//!
//! Forward invariance of the nonnegative octant is preserved numerically:
//! internal stage evaluations clamp sub-zero components to zero (projection),
//! tiny terminal undershoots (> -1e-12) are clamped on acceptance, and larger
//! violations reject the step. The public [`crate::model::rhs`] keeps its
//! strict domain check; only the stepper's private evaluator projects.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrapError};
use crate::model::{rhs, ParameterSet, StateVector};

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationSettings {
    /// Relative tolerance on each component.
    pub rel_tol: f64,
    /// Absolute tolerance on each component.
    pub abs_tol: f64,
    /// Largest step size the controller may choose.
    pub max_step: f64,
    /// Smallest step size before the run aborts with a convergence error.
    pub min_step: f64,
    /// Model-time budget for attractor searches.
    pub t_max: f64,
    /// `integrate_to_attractor` stops when the rhs infinity norm drops below
    /// this. Local integration error keeps the reachable rhs norm above
    /// roughly rel_tol * ||J||, so this must sit a safe factor above that
    /// floor (1e-5 vs ~1e-6 at the default tolerances).
    pub convergence_tol: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_step: 5.0,
            min_step: 1e-12,
            t_max: 1e4,
            convergence_tol: 1e-5,
        }
    }
}

impl IntegrationSettings {
    /// Checks tolerance/limit sanity; Err(Domain) describes the violation.
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.min_step > 0.0
            && self.min_step < self.max_step
            && self.t_max > 0.0
            && self.convergence_tol > 0.0
            && [self.rel_tol, self.abs_tol, self.max_step, self.min_step, self.t_max, self.convergence_tol]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(TrapError::Domain(format!("invalid integration settings {self:?}")))
        }
    }
}

/// Time series of accepted steps: `times[j]` holds the time of `states[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Accepted step times, starting at t0 and ending exactly at t_end.
    pub times: Vec<f64>,
    /// States at the accepted times.
    pub states: Vec<StateVector>,
}

impl Trajectory {
    /// Number of stored points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// True when no points are stored.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last stored state.
    pub fn final_state(&self) -> StateVector {
        *self.states.last().expect("trajectory has at least the initial point")
    }
}

/// Result of running the integrator until the flow stalls or time runs out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorRun {
    /// State at the stopping time.
    pub state: StateVector,
    /// True when the rhs norm dropped below `convergence_tol` before `t_max`.
    pub converged: bool,
    /// Model time elapsed when the run stopped.
    pub elapsed: f64,
}

// Dormand-Prince 5(4) stage coefficients (the rhs is autonomous, so the
// stage times c_i never enter).
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// b - b_hat: weights of the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// Undershoots no larger than this are clamped to zero on acceptance.
const CLAMP_TOL: f64 = 1e-12;
// Hard cap on accepted + rejected steps per run.
const MAX_STEPS: u64 = 50_000_000;

// Evaluates the rhs with sub-zero components projected to the octant face.
// Stage points of an accepted step may poke marginally below zero even when
// the solution stays positive; projection keeps the evaluation defined
// without distorting the order of the method.
fn eval(state: StateVector, params: &ParameterSet) -> StateVector {
    let clamped = StateVector::new(state.k_a.max(0.0), state.k_s.max(0.0), state.k_i.max(0.0));
    rhs(clamped, params).expect("projected state is in the rhs domain")
}

// Scaled RMS norm of the embedded error estimate.
fn error_norm(delta: [f64; 3], y: StateVector, y_new: StateVector, s: &IntegrationSettings) -> f64 {
    let ya = y.to_array();
    let yn = y_new.to_array();
    let mut acc = 0.0;
    for i in 0..3 {
        let sc = s.abs_tol + s.rel_tol * ya[i].abs().max(yn[i].abs());
        let q = delta[i] / sc;
        acc += q * q;
    }
    (acc / 3.0).sqrt()
}

// Initial step heuristic (Hairer, Norsett, Wanner II.4): balance the scaled
// sizes of y0 and f(y0), then refine with one explicit Euler probe.
fn initial_step(y0: StateVector, f0: StateVector, params: &ParameterSet, s: &IntegrationSettings) -> f64 {
    let scale = |y: StateVector, v: StateVector| -> f64 {
        let ya = y.to_array();
        let va = v.to_array();
        let mut acc = 0.0;
        for i in 0..3 {
            let sc = s.abs_tol + s.rel_tol * ya[i].abs();
            let q = va[i] / sc;
            acc += q * q;
        }
        (acc / 3.0).sqrt()
    };
    let d0 = scale(y0, y0);
    let d1 = scale(y0, f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = y0 + f0 * h0;
    let f1 = eval(y1, params);
    let d2 = scale(y0, f1 - f0) / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    (100.0 * h0).min(h1).min(s.max_step)
}

// One adaptive driver shared by both public entry points. `record` collects
// accepted steps; `stop` may end the run early after an accepted step.
fn drive(
    state0: StateVector,
    params: &ParameterSet,
    t0: f64,
    t_end: f64,
    settings: &IntegrationSettings,
    mut record: impl FnMut(f64, StateVector),
    mut stop: impl FnMut(f64, StateVector, StateVector) -> bool,
) -> Result<(f64, StateVector, bool)> {
    params.validate()?;
    settings.validate()?;
    if !t0.is_finite() || !t_end.is_finite() || t_end < t0 {
        return Err(TrapError::Domain(format!(
            "invalid time span [{t0}, {t_end}]"
        )));
    }
    // Strict domain check on the caller-supplied initial state.
    let mut k1 = rhs(state0, params)?;
    let mut y = state0;
    let mut t = t0;
    record(t, y);
    if stop(t, y, k1) {
        return Ok((t, y, true));
    }
    if t_end == t0 {
        return Ok((t, y, false));
    }

    let mut h = initial_step(y, k1, params, settings).min(t_end - t0);
    let mut n_steps: u64 = 0;
    let mut k = [StateVector::new(0.0, 0.0, 0.0); 7];

    loop {
        n_steps += 1;
        if n_steps > MAX_STEPS {
            return Err(TrapError::Convergence(format!(
                "step budget exhausted after {MAX_STEPS} steps at t = {t}"
            )));
        }
        if h < settings.min_step {
            return Err(TrapError::Convergence(format!(
                "step size underflow (h = {h:.3e}) at t = {t}"
            )));
        }
        let final_step = t_end - t <= h;
        let h_eff = if final_step { t_end - t } else { h };
        k[0] = k1;
        for stage in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(stage) {
                ys = ys + *kj * (h_eff * A[stage][j]);
            }
            k[stage] = eval(ys, params);
        }
        // Stage 7's abscissa is t + h with the 5th-order weights: k[6] is
        // f(t + h, y_new) and y_new comes from the same combination (FSAL).
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            y_new = y_new + *kj * (h_eff * A[6][j]);
        }
        let mut delta = [0.0; 3];
        for (j, kj) in k.iter().enumerate() {
            let w = h_eff * E[j];
            delta[0] += w * kj.k_a;
            delta[1] += w * kj.k_s;
            delta[2] += w * kj.k_i;
        }
        let err = error_norm(delta, y, y_new, settings);

        let min_component = y_new.k_a.min(y_new.k_s).min(y_new.k_i);
        if err <= 1.0 && min_component > -CLAMP_TOL {
            // Accept.
            let mut fsal = k[6];
            if min_component < 0.0 {
                y_new = StateVector::new(
                    y_new.k_a.max(0.0),
                    y_new.k_s.max(0.0),
                    y_new.k_i.max(0.0),
                );
                fsal = eval(y_new, params);
            }
            t = if final_step { t_end } else { t + h_eff };
            y = y_new;
            k1 = fsal;
            record(t, y);
            if stop(t, y, k1) {
                return Ok((t, y, true));
            }
            if t >= t_end {
                return Ok((t, y, false));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h_eff * factor).min(settings.max_step);
        } else if err > 1.0 {
            h = h_eff * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        } else {
            // Octant violation beyond the clamp tolerance: retry shorter.
            h = h_eff * 0.5;
        }
    }
}

/// Integrates from `state0` over [t0, t_end], recording every accepted step.
///
/// The returned trajectory starts at (t0, state0) and ends exactly at t_end.
pub fn integrate(
    state0: StateVector,
    params: &ParameterSet,
    t0: f64,
    t_end: f64,
    settings: &IntegrationSettings,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    drive(
        state0,
        params,
        t0,
        t_end,
        settings,
        |t, y| {
            times.push(t);
            states.push(y);
        },
        |_, _, _| false,
    )?;
    Ok(Trajectory { times, states })
}

/// Runs the flow from `state0` until `||rhs||_inf < convergence_tol` or
/// `t_max` elapses; reports the stop state, whether it converged, and the
/// elapsed model time.
pub fn integrate_to_attractor(
    state0: StateVector,
    params: &ParameterSet,
    settings: &IntegrationSettings,
) -> Result<AttractorRun> {
    let tol = settings.convergence_tol;
    let (elapsed, state, stopped_early) = drive(
        state0,
        params,
        0.0,
        settings.t_max,
        settings,
        |_, _| {},
        |_, _, f| f.norm_inf() < tol,
    )?;
    Ok(AttractorRun { state, converged: stopped_early, elapsed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // With k_a = k_i = 0 the soil equation decouples into a pure logistic
    // with closed form k_s(t) = K / (1 + ((K - k_s0)/k_s0) exp(-r_s K t)).
    fn logistic_exact(k_s0: f64, t: f64, p: &ParameterSet) -> f64 {
        let k = p.k_cap;
        k / (1.0 + ((k - k_s0) / k_s0) * (-p.r_s * k * t).exp())
    }

    #[test]
    fn logistic_matches_closed_form_at_default_tolerances() {
        let p = ParameterSet::baseline();
        let s = IntegrationSettings::default();
        let traj = integrate(StateVector::new(0.0, 0.1, 0.0), &p, 0.0, 6.0, &s).unwrap();
        assert_eq!(*traj.times.first().unwrap(), 0.0);
        assert_eq!(*traj.times.last().unwrap(), 6.0);
        let got = traj.final_state().k_s;
        let want = logistic_exact(0.1, 6.0, &p);
        assert_relative_eq!(got, want, max_relative = 1e-6);
    }

    #[test]
    fn tighter_tolerance_reduces_logistic_error() {
        let p = ParameterSet::baseline();
        let want = logistic_exact(0.1, 6.0, &p);
        let err_at = |rel: f64| {
            let s = IntegrationSettings { rel_tol: rel, abs_tol: rel * 1e-3, ..Default::default() };
            let traj = integrate(StateVector::new(0.0, 0.1, 0.0), &p, 0.0, 6.0, &s).unwrap();
            (traj.final_state().k_s - want).abs() / want
        };
        let coarse = err_at(1e-4);
        let fine = err_at(1e-8);
        assert!(fine < coarse * 1e-2, "coarse {coarse:.3e} fine {fine:.3e}");
    }

    #[test]
    fn trajectory_stays_in_octant() {
        let p = ParameterSet::baseline();
        let s = IntegrationSettings::default();
        let traj = integrate(StateVector::new(3.0, 0.05, 1e-6), &p, 0.0, 50.0, &s).unwrap();
        for st in &traj.states {
            assert!(st.is_nonnegative(), "left octant: {st:?}");
        }
    }

    #[test]
    fn attractor_run_from_near_poor_equilibrium() {
        // Oracle equilibrium (mpmath): the poor attractor of the baseline.
        let e_p = StateVector::new(0.14906321831709115, 0.97000746218237974, 0.35807965240977854);
        let p = ParameterSet::baseline();
        let s = IntegrationSettings::default();
        let run =
            integrate_to_attractor(e_p + StateVector::new(0.01, -0.01, 0.01), &p, &s).unwrap();
        assert!(run.converged);
        assert!(run.elapsed < s.t_max);
        // |rhs| < 1e-5 at the stop bounds the distance by ||J^-1|| * 1e-5,
        // comfortably inside the 10 * convergence_tol matching radius.
        assert!(run.state.dist_inf(e_p) < 1e-4, "stopped at {:?}", run.state);
    }

    #[test]
    fn rejects_reversed_time_span_and_bad_state() {
        let p = ParameterSet::baseline();
        let s = IntegrationSettings::default();
        assert!(integrate(StateVector::new(1.0, 1.0, 1.0), &p, 1.0, 0.0, &s).is_err());
        assert!(integrate(StateVector::new(-1.0, 1.0, 1.0), &p, 0.0, 1.0, &s).is_err());
    }

    #[test]
    fn zero_span_returns_single_point() {
        let p = ParameterSet::baseline();
        let s = IntegrationSettings::default();
        let traj = integrate(StateVector::new(1.0, 1.0, 1.0), &p, 2.0, 2.0, &s).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.times[0], 2.0);
    }
}

