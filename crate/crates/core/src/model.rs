//! Three-state dynamical systems model of a coupled social-ecological
//! poverty trap.
//!
//! State (all stocks, nonnegative):
//! - `k_a` — household assets,
//! - `k_s` — soil fertility,
//! - `k_i` — innovation resources.
//!
//! Dynamics:
//!
//! ```text
//! dk_a/dt = sigma(k_a) * f(k_a, k_s, k_i) - delta_a * k_a
//! dk_s/dt = r_s * k_s * (K - k_s) - D(k_i) * k_a * k_s
//! dk_i/dt = A(k_a) * k_i / (1 + k_i) - delta_i * k_i
//! ```
//!
//! with savings rate `sigma(k_a) = s0 + s1 k_a^m / (s2 + k_a^m)`, crop
//! production `f = (a0 + a1 k_i^n / (a2 + k_i^n)) * k_a^alpha_a * k_s^alpha_s`,
//! innovation-driven soil damage `D(k_i) = d1 k_i^p / (d2 + k_i^p)`, and
//! innovation productivity `A(k_a) = (c1 + c2/(c3 + k_a)) * c4 k_a/(c5 + k_a)`.
//!
//! The nonnegative octant is forward invariant: each rate vanishes (or is
//! nonnegative) on its own zero face, so trajectories starting in the octant
//! stay in it. The Jacobian is analytic; note `d(dk_i/dt)/dk_s = 0` — soil
//! feeds back on innovation only through assets.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrapError};

/// Alias for the 3x3 Jacobian matrix type.
pub type Mat3 = Matrix3<f64>;

/// Point in state space: assets, soil fertility, innovation resources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    /// Household assets k_a.
    pub k_a: f64,
    /// Soil fertility k_s.
    pub k_s: f64,
    /// Innovation resources k_i.
    pub k_i: f64,
}

impl StateVector {
    /// Builds a state from components.
    pub fn new(k_a: f64, k_s: f64, k_i: f64) -> Self {
        Self { k_a, k_s, k_i }
    }

    /// Components as an array in (k_a, k_s, k_i) order.
    pub fn to_array(self) -> [f64; 3] {
        [self.k_a, self.k_s, self.k_i]
    }

    /// Builds a state from an array in (k_a, k_s, k_i) order.
    pub fn from_array(a: [f64; 3]) -> Self {
        Self { k_a: a[0], k_s: a[1], k_i: a[2] }
    }

    /// True when every component is finite.
    pub fn is_finite(self) -> bool {
        self.k_a.is_finite() && self.k_s.is_finite() && self.k_i.is_finite()
    }

    /// True when every component is >= 0.
    pub fn is_nonnegative(self) -> bool {
        self.k_a >= 0.0 && self.k_s >= 0.0 && self.k_i >= 0.0
    }

    /// Infinity norm max(|k_a|, |k_s|, |k_i|).
    pub fn norm_inf(self) -> f64 {
        self.k_a.abs().max(self.k_s.abs()).max(self.k_i.abs())
    }

    /// Infinity-norm distance to another state.
    pub fn dist_inf(self, other: StateVector) -> f64 {
        (self.k_a - other.k_a)
            .abs()
            .max((self.k_s - other.k_s).abs())
            .max((self.k_i - other.k_i).abs())
    }
}

impl std::ops::Add for StateVector {
    type Output = StateVector;
    fn add(self, o: StateVector) -> StateVector {
        StateVector::new(self.k_a + o.k_a, self.k_s + o.k_s, self.k_i + o.k_i)
    }
}

impl std::ops::Sub for StateVector {
    type Output = StateVector;
    fn sub(self, o: StateVector) -> StateVector {
        StateVector::new(self.k_a - o.k_a, self.k_s - o.k_s, self.k_i - o.k_i)
    }
}

impl std::ops::Mul<f64> for StateVector {
    type Output = StateVector;
    fn mul(self, c: f64) -> StateVector {
        StateVector::new(self.k_a * c, self.k_s * c, self.k_i * c)
    }
}

/// Full parameter set of the dynamical system.
///
/// `baseline()` is the calibrated reference configuration: bistable with a
/// poor attractor (low assets, high soil, low innovation) and a well-being
/// attractor (high assets, degraded soil, high innovation), a fold in `d1`
/// near 0.8, and two tipping points in `a1` within [0.3, 4.0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterSet {
    /// Autonomous savings rate floor.
    pub s0: f64,
    /// Savings rate gain at high assets.
    pub s1: f64,
    /// Half-saturation of the savings sigmoid (in k_a^m units).
    pub s2: f64,
    /// Savings sigmoid steepness exponent.
    pub m: f64,
    /// Baseline total-factor productivity.
    pub a0: f64,
    /// Productivity gain from adopted innovation.
    pub a1: f64,
    /// Half-saturation of the innovation-productivity sigmoid (k_i^n units).
    pub a2: f64,
    /// Innovation-productivity sigmoid exponent.
    pub n: f64,
    /// Asset elasticity of crop production.
    pub alpha_a: f64,
    /// Soil elasticity of crop production.
    pub alpha_s: f64,
    /// Asset depreciation rate.
    pub delta_a: f64,
    /// Intrinsic soil regeneration rate.
    pub r_s: f64,
    /// Soil carrying capacity K.
    #[serde(rename = "K")]
    pub k_cap: f64,
    /// Maximum innovation-driven soil damage rate.
    pub d1: f64,
    /// Half-saturation of the damage sigmoid (k_i^p units).
    pub d2: f64,
    /// Damage sigmoid exponent.
    pub p: f64,
    /// Innovation productivity plateau coefficient.
    pub c1: f64,
    /// Low-asset innovation productivity boost.
    pub c2: f64,
    /// Scale of the low-asset boost decay.
    pub c3: f64,
    /// Asset-gating gain of innovation productivity.
    pub c4: f64,
    /// Half-saturation of the asset gate.
    pub c5: f64,
    /// Innovation resource depreciation rate.
    pub delta_i: f64,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::baseline()
    }
}

/// Names of all sweepable parameters, in declaration order.
pub const PARAM_NAMES: [&str; 22] = [
    "s0", "s1", "s2", "m", "a0", "a1", "a2", "n", "alpha_a", "alpha_s", "delta_a", "r_s", "K",
    "d1", "d2", "p", "c1", "c2", "c3", "c4", "c5", "delta_i",
];

impl ParameterSet {
    /// Calibrated baseline: bistable, fold in d1 at ~0.80, a1 tipping points
    /// T_p ~ 0.95 and T_w ~ 3.2.
    pub fn baseline() -> Self {
        Self {
            s0: 0.1054,
            s1: 0.346,
            s2: 0.6105,
            m: 2.0,
            a0: 1.464,
            a1: 1.5,
            a2: 7.5663,
            n: 2.0,
            alpha_a: 0.5,
            alpha_s: 0.5,
            delta_a: 0.4465,
            r_s: 1.09,
            k_cap: 1.0,
            d1: 0.5,
            d2: 0.1641,
            p: 2.0,
            c1: 2.2633,
            c2: 0.15,
            c3: 1.0,
            c4: 2.0,
            c5: 0.3733,
            delta_i: 1.006,
        }
    }

    /// Checks positivity/range constraints; Err(Domain) describes the first violation.
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, f64, bool); 22] = [
            ("s0", self.s0, self.s0 > 0.0),
            ("s1", self.s1, self.s1 >= 0.0),
            ("s2", self.s2, self.s2 > 0.0),
            ("m", self.m, self.m >= 1.0),
            ("a0", self.a0, self.a0 > 0.0),
            ("a1", self.a1, self.a1 >= 0.0),
            ("a2", self.a2, self.a2 > 0.0),
            ("n", self.n, self.n >= 1.0),
            ("alpha_a", self.alpha_a, self.alpha_a > 0.0 && self.alpha_a < 1.0),
            ("alpha_s", self.alpha_s, self.alpha_s > 0.0 && self.alpha_s < 1.0),
            ("delta_a", self.delta_a, self.delta_a > 0.0),
            ("r_s", self.r_s, self.r_s > 0.0),
            ("K", self.k_cap, self.k_cap > 0.0),
            ("d1", self.d1, self.d1 >= 0.0),
            ("d2", self.d2, self.d2 > 0.0),
            ("p", self.p, self.p >= 1.0),
            ("c1", self.c1, self.c1 >= 0.0),
            ("c2", self.c2, self.c2 >= 0.0),
            ("c3", self.c3, self.c3 > 0.0),
            ("c4", self.c4, self.c4 >= 0.0),
            ("c5", self.c5, self.c5 > 0.0),
            ("delta_i", self.delta_i, self.delta_i > 0.0),
        ];
        for (name, value, ok) in checks {
            if !value.is_finite() || !ok {
                return Err(TrapError::Domain(format!(
                    "parameter {name} = {value} violates its range constraint"
                )));
            }
        }
        Ok(())
    }

    /// Reads a parameter by name; None for unknown names.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "s0" => self.s0,
            "s1" => self.s1,
            "s2" => self.s2,
            "m" => self.m,
            "a0" => self.a0,
            "a1" => self.a1,
            "a2" => self.a2,
            "n" => self.n,
            "alpha_a" => self.alpha_a,
            "alpha_s" => self.alpha_s,
            "delta_a" => self.delta_a,
            "r_s" => self.r_s,
            "K" => self.k_cap,
            "d1" => self.d1,
            "d2" => self.d2,
            "p" => self.p,
            "c1" => self.c1,
            "c2" => self.c2,
            "c3" => self.c3,
            "c4" => self.c4,
            "c5" => self.c5,
            "delta_i" => self.delta_i,
            _ => return None,
        })
    }

    /// Returns a copy with `name` set to `value`; Err(Domain) on unknown name
    /// or a value violating the parameter's range.
    pub fn with(&self, name: &str, value: f64) -> Result<ParameterSet> {
        let mut out = *self;
        match name {
            "s0" => out.s0 = value,
            "s1" => out.s1 = value,
            "s2" => out.s2 = value,
            "m" => out.m = value,
            "a0" => out.a0 = value,
            "a1" => out.a1 = value,
            "a2" => out.a2 = value,
            "n" => out.n = value,
            "alpha_a" => out.alpha_a = value,
            "alpha_s" => out.alpha_s = value,
            "delta_a" => out.delta_a = value,
            "r_s" => out.r_s = value,
            "K" => out.k_cap = value,
            "d1" => out.d1 = value,
            "d2" => out.d2 = value,
            "p" => out.p = value,
            "c1" => out.c1 = value,
            "c2" => out.c2 = value,
            "c3" => out.c3 = value,
            "c4" => out.c4 = value,
            "c5" => out.c5 = value,
            "delta_i" => out.delta_i = value,
            _ => {
                return Err(TrapError::Domain(format!("unknown parameter name: {name}")));
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Savings rate sigma(k_a).
    pub fn savings_rate(&self, k_a: f64) -> f64 {
        let kam = k_a.powf(self.m);
        self.s0 + self.s1 * kam / (self.s2 + kam)
    }

    /// Technology multiplier a0 + a1 k_i^n / (a2 + k_i^n).
    pub fn tech_multiplier(&self, k_i: f64) -> f64 {
        let kin = k_i.powf(self.n);
        self.a0 + self.a1 * kin / (self.a2 + kin)
    }

    /// Innovation-driven soil damage rate D(k_i).
    pub fn soil_damage_rate(&self, k_i: f64) -> f64 {
        let kip = k_i.powf(self.p);
        self.d1 * kip / (self.d2 + kip)
    }

    /// Innovation productivity A(k_a).
    pub fn innovation_productivity(&self, k_a: f64) -> f64 {
        (self.c1 + self.c2 / (self.c3 + k_a)) * (self.c4 * k_a / (self.c5 + k_a))
    }
}

/// Fractional one-off losses applied to each stock; all fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockFractions {
    /// Fraction of assets destroyed.
    pub assets: f64,
    /// Fraction of soil fertility destroyed.
    pub soil: f64,
    /// Fraction of innovation resources destroyed.
    pub innovation: f64,
}

/// Rejects non-finite or negative states with Err(Domain).
pub fn check_state(state: StateVector) -> Result<()> {
    if !state.is_finite() {
        return Err(TrapError::Domain(format!("non-finite state {state:?}")));
    }
    if !state.is_nonnegative() {
        return Err(TrapError::Domain(format!("negative component in state {state:?}")));
    }
    Ok(())
}

/// Crop production f(k_a, k_s, k_i) = tech_multiplier * k_a^alpha_a * k_s^alpha_s.
pub fn crop_production(state: StateVector, params: &ParameterSet) -> Result<f64> {
    check_state(state)?;
    Ok(params.tech_multiplier(state.k_i)
        * state.k_a.powf(params.alpha_a)
        * state.k_s.powf(params.alpha_s))
}

/// Right-hand side of the ODE system at `state`.
///
/// Err(Domain) when any component is negative or non-finite.
pub fn rhs(state: StateVector, params: &ParameterSet) -> Result<StateVector> {
    check_state(state)?;
    let StateVector { k_a, k_s, k_i } = state;
    let f = params.tech_multiplier(k_i) * k_a.powf(params.alpha_a) * k_s.powf(params.alpha_s);
    let dk_a = params.savings_rate(k_a) * f - params.delta_a * k_a;
    let dk_s = params.r_s * k_s * (params.k_cap - k_s) - params.soil_damage_rate(k_i) * k_a * k_s;
    let dk_i = params.innovation_productivity(k_a) * k_i / (1.0 + k_i) - params.delta_i * k_i;
    Ok(StateVector::new(dk_a, dk_s, dk_i))
}

/// Analytic Jacobian of [`rhs`] at `state`.
///
/// Requires k_a > 0 and k_s > 0: the production term's partial derivatives
/// contain k_a^(alpha_a - 1) and k_s^(alpha_s - 1), which diverge on those
/// faces (Err(Singular) there). k_i = 0 is fine.
pub fn jacobian(state: StateVector, params: &ParameterSet) -> Result<Mat3> {
    check_state(state)?;
    if state.k_a <= 0.0 || state.k_s <= 0.0 {
        return Err(TrapError::Singular(format!(
            "Jacobian undefined at k_a = {}, k_s = {}: production derivative diverges on the boundary",
            state.k_a, state.k_s
        )));
    }
    let StateVector { k_a, k_s, k_i } = state;
    let p = params;

    let kam = k_a.powf(p.m);
    let sigma = p.s0 + p.s1 * kam / (p.s2 + kam);
    // d sigma / d k_a = s1 m k_a^(m-1) s2 / (s2 + k_a^m)^2
    let dsigma = p.s1 * p.m * k_a.powf(p.m - 1.0) * p.s2 / (p.s2 + kam).powi(2);

    let kin = k_i.powf(p.n);
    let tech = p.a0 + p.a1 * kin / (p.a2 + kin);
    let dtech = p.a1 * p.n * k_i.powf(p.n - 1.0) * p.a2 / (p.a2 + kin).powi(2);

    let ka_pow = k_a.powf(p.alpha_a);
    let ks_pow = k_s.powf(p.alpha_s);
    let f = tech * ka_pow * ks_pow;
    let df_dka = tech * p.alpha_a * k_a.powf(p.alpha_a - 1.0) * ks_pow;
    let df_dks = tech * p.alpha_s * ka_pow * k_s.powf(p.alpha_s - 1.0);
    let df_dki = dtech * ka_pow * ks_pow;

    let kip = k_i.powf(p.p);
    let dmg = p.d1 * kip / (p.d2 + kip);
    let ddmg = p.d1 * p.p * k_i.powf(p.p - 1.0) * p.d2 / (p.d2 + kip).powi(2);

    let gate = p.c4 * k_a / (p.c5 + k_a);
    let boost = p.c1 + p.c2 / (p.c3 + k_a);
    let a_prod = boost * gate;
    let da_prod = -p.c2 / (p.c3 + k_a).powi(2) * gate + boost * p.c4 * p.c5 / (p.c5 + k_a).powi(2);

    Ok(Mat3::new(
        dsigma * f + sigma * df_dka - p.delta_a,
        sigma * df_dks,
        sigma * df_dki,
        -dmg * k_s,
        p.r_s * (p.k_cap - 2.0 * k_s) - dmg * k_a,
        -ddmg * k_a * k_s,
        da_prod * k_i / (1.0 + k_i),
        0.0,
        a_prod / (1.0 + k_i).powi(2) - p.delta_i,
    ))
}

/// Applies fractional losses to each stock: k <- (1 - fraction) * k.
///
/// Err(Domain) when a fraction is outside [0, 1] or the state is invalid.
pub fn apply_shock(state: StateVector, shock: ShockFractions) -> Result<StateVector> {
    check_state(state)?;
    for (name, frac) in [
        ("assets", shock.assets),
        ("soil", shock.soil),
        ("innovation", shock.innovation),
    ] {
        if !frac.is_finite() || !(0.0..=1.0).contains(&frac) {
            return Err(TrapError::Domain(format!(
                "shock fraction {name} = {frac} outside [0, 1]"
            )));
        }
    }
    Ok(StateVector::new(
        state.k_a * (1.0 - shock.assets),
        state.k_s * (1.0 - shock.soil),
        state.k_i * (1.0 - shock.innovation),
    ))
}
