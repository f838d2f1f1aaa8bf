//! One-parameter bifurcation sweeps, regime classification, and tipping-point
//! detection.
//!
//! A sweep samples `n_values` evenly spaced parameter values, finds the full
//! equilibrium set at each (fresh Halton multistart, then a bidirectional
//! warm-start continuation pass that seeds Newton from neighboring values'
//! roots so folds are tracked right up to their turning point), and reports
//! regime membership per value. Regime boundaries are refined by bisection on
//! the regime classifier to 1e-4 of the sweep width.
//!
//! Regimes follow the attractor labels: monostable-poor (all attractors
//! poor), bistable (poor and well-being attractors coexist), and
//! monostable-well-being. The boundary between monostable-poor and bistable
//! is the trap tipping point T_p; between bistable and monostable-well-being
//! the escape tipping point T_w.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{classify, find_equilibria, BranchLabel, Equilibrium, SearchBox, DEDUP_TOL};
use crate::error::{Result, TrapError};
use crate::model::{ParameterSet, StateVector};

/// Attractor structure of one parameter configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeClass {
    /// Only poor attractors exist.
    MonostablePoor,
    /// Poor and well-being attractors coexist.
    Bistable,
    /// Only well-being attractors exist.
    MonostableWellbeing,
}

impl RegimeClass {
    /// Short lowercase name used in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            RegimeClass::MonostablePoor => "monostable-poor",
            RegimeClass::Bistable => "bistable",
            RegimeClass::MonostableWellbeing => "monostable-wellbeing",
        }
    }
}

/// Which pair of regimes a tipping point separates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TippingKind {
    /// Boundary between monostable-poor and bistable (T_p).
    Tp,
    /// Boundary between bistable and monostable-well-being (T_w).
    Tw,
    /// Direct monostable-poor to monostable-well-being transition.
    Degenerate,
}

impl TippingKind {
    /// Short name used in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            TippingKind::Tp => "T_p",
            TippingKind::Tw => "T_w",
            TippingKind::Degenerate => "degenerate",
        }
    }
}

/// A refined regime boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TippingPoint {
    /// Parameter value at the boundary (bracket midpoint).
    pub value: f64,
    /// Which regimes it separates.
    pub kind: TippingKind,
    /// Final bisection bracket (width <= 1e-4 of the sweep span).
    pub bracket: (f64, f64),
}

/// A maximal parameter interval with a constant regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpan {
    /// Left edge (sweep start or a tipping point).
    pub lo: f64,
    /// Right edge (a tipping point or the sweep end).
    pub hi: f64,
    /// Regime on the interval.
    pub regime: RegimeClass,
}

/// Result of [`detect_tipping`] on a sweep branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// Regime intervals in sweep order.
    pub regimes: Vec<RegimeSpan>,
    /// Refined boundaries between them.
    pub tipping_points: Vec<TippingPoint>,
    /// Hull of the bistable interval(s), when any value is bistable.
    pub bistable_interval: Option<(f64, f64)>,
}

impl RegimeReport {
    /// First tipping point of the given kind, if any.
    pub fn tipping(&self, kind: TippingKind) -> Option<&TippingPoint> {
        self.tipping_points.iter().find(|t| t.kind == kind)
    }
}

/// Equilibrium sets along one swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationBranch {
    /// Name of the swept parameter.
    pub param_name: String,
    /// Sampled parameter values, ascending.
    pub values: Vec<f64>,
    /// Equilibria at each value, sorted by assets.
    pub equilibria: Vec<Vec<Equilibrium>>,
    /// Parameter set the sweep varied around.
    pub base: ParameterSet,
    /// Search box used for root finding.
    pub search_box: SearchBox,
    /// Multistart count per value.
    pub n_starts: usize,
    /// Seed for the multistart rotation.
    pub seed: u64,
}

/// Classifies the attractor structure of one configuration.
///
/// Err(Analysis) when no attractor exists in the search box.
pub fn classify_regime(
    params: &ParameterSet,
    search_box: &SearchBox,
    n_starts: usize,
    seed: u64,
) -> Result<RegimeClass> {
    let eqs = find_equilibria(params, search_box, n_starts, seed)?;
    regime_of(&eqs)
}

// Regime from an equilibrium list; Err(Analysis) when no attractor exists.
fn regime_of(eqs: &[Equilibrium]) -> Result<RegimeClass> {
    let mut poor = false;
    let mut well = false;
    for eq in eqs.iter().filter(|e| e.is_attractor()) {
        match eq.label {
            BranchLabel::Poor => poor = true,
            BranchLabel::WellBeing => well = true,
            BranchLabel::Other => {}
        }
    }
    match (poor, well) {
        (true, true) => Ok(RegimeClass::Bistable),
        (true, false) => Ok(RegimeClass::MonostablePoor),
        (false, true) => Ok(RegimeClass::MonostableWellbeing),
        (false, false) => Err(TrapError::Analysis(
            "configuration has no attractor in the search box".into(),
        )),
    }
}

/// Sweeps `param_name` over [lo, hi] with `n_values` evenly spaced samples.
///
/// Every value gets a fresh multistart search plus warm starts continued from
/// both neighbors. Err(Domain) on unknown names, reversed bounds, or values
/// that violate the parameter's range.
pub fn sweep(
    params: &ParameterSet,
    param_name: &str,
    lo: f64,
    hi: f64,
    n_values: usize,
    seed: u64,
) -> Result<BifurcationBranch> {
    params.validate()?;
    if params.get(param_name).is_none() {
        return Err(TrapError::Domain(format!("unknown parameter name: {param_name}")));
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(TrapError::Domain(format!(
            "sweep bounds must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    if n_values < 2 {
        return Err(TrapError::Domain("sweep needs at least 2 values".into()));
    }
    let search_box = SearchBox::default_for(params);
    let n_starts = 200;
    let values: Vec<f64> =
        (0..n_values).map(|i| lo + (hi - lo) * i as f64 / (n_values - 1) as f64).collect();

    // Fresh multistart at every value, in parallel.
    let mut equilibria: Vec<Vec<Equilibrium>> = values
        .par_iter()
        .map(|v| find_equilibria(&params.with(param_name, *v)?, &search_box, n_starts, seed))
        .collect::<Result<_>>()?;

    // Bidirectional warm-start continuation: seed Newton from each neighbor's
    // roots so branch segments missed by the multistart near folds are found.
    for dir in [1i64, -1] {
        let order: Vec<usize> = if dir == 1 {
            (0..n_values).collect()
        } else {
            (0..n_values).rev().collect()
        };
        for w in order.windows(2) {
            let (prev, cur) = (w[0], w[1]);
            let p_cur = params.with(param_name, values[cur])?;
            let seeds: Vec<StateVector> = equilibria[prev].iter().map(|e| e.state).collect();
            for s in seeds {
                if let Some(root) = crate::equilibria::newton_from(s, &p_cur) {
                    let known = equilibria[cur].iter().any(|e| e.state.dist_inf(root) <= DEDUP_TOL);
                    let hi_arr = search_box.hi.to_array();
                    let inside = root
                        .to_array()
                        .iter()
                        .zip(hi_arr.iter())
                        .all(|(v, h)| *v >= 0.0 && *v <= h * (1.0 + 1e-9) + 1e-9);
                    if !known && inside && root.k_a >= 1e-8 && root.k_s >= 1e-8 {
                        equilibria[cur].push(classify(root, &p_cur)?);
                        equilibria[cur].sort_by(|a, b| {
                            a.state.k_a.partial_cmp(&b.state.k_a).expect("finite coordinates")
                        });
                    }
                }
            }
        }
    }

    Ok(BifurcationBranch {
        param_name: param_name.to_string(),
        values,
        equilibria,
        base: *params,
        search_box,
        n_starts,
        seed,
    })
}

/// Locates regime boundaries along a sweep branch and refines each by
/// bisection to 1e-4 of the sweep span.
pub fn detect_tipping(branch: &BifurcationBranch) -> Result<RegimeReport> {
    let regimes_at: Vec<RegimeClass> =
        branch.equilibria.iter().map(|eqs| regime_of(eqs)).collect::<Result<_>>()?;
    let span = branch.values.last().unwrap() - branch.values[0];
    let target = 1e-4 * span;

    let mut tipping_points = Vec::new();
    for i in 1..branch.values.len() {
        if regimes_at[i] == regimes_at[i - 1] {
            continue;
        }
        let (mut blo, mut bhi) = (branch.values[i - 1], branch.values[i]);
        let r_lo = regimes_at[i - 1];
        while bhi - blo > target {
            let mid = 0.5 * (blo + bhi);
            let r_mid = classify_regime(
                &branch.base.with(&branch.param_name, mid)?,
                &branch.search_box,
                branch.n_starts,
                branch.seed,
            )?;
            if r_mid == r_lo {
                blo = mid;
            } else {
                bhi = mid;
            }
        }
        let pair = (regimes_at[i - 1], regimes_at[i]);
        let kind = match pair {
            (RegimeClass::MonostablePoor, RegimeClass::Bistable)
            | (RegimeClass::Bistable, RegimeClass::MonostablePoor) => TippingKind::Tp,
            (RegimeClass::Bistable, RegimeClass::MonostableWellbeing)
            | (RegimeClass::MonostableWellbeing, RegimeClass::Bistable) => TippingKind::Tw,
            _ => TippingKind::Degenerate,
        };
        tipping_points.push(TippingPoint { value: 0.5 * (blo + bhi), kind, bracket: (blo, bhi) });
    }

    // Regime spans between refined boundaries.
    let mut regimes = Vec::new();
    let mut edge = branch.values[0];
    let mut current = regimes_at[0];
    let mut tp_iter = tipping_points.iter().peekable();
    for (i, r) in regimes_at.iter().enumerate().skip(1) {
        if *r != current {
            let t = tp_iter.next().expect("one tipping point per regime change");
            regimes.push(RegimeSpan { lo: edge, hi: t.value, regime: current });
            edge = t.value;
            current = *r;
        }
        if i == regimes_at.len() - 1 {
            regimes.push(RegimeSpan { lo: edge, hi: *branch.values.last().unwrap(), regime: current });
        }
    }

    let bistable_interval = {
        let spans: Vec<&RegimeSpan> =
            regimes.iter().filter(|s| s.regime == RegimeClass::Bistable).collect();
        if spans.is_empty() {
            None
        } else {
            Some((
                spans.iter().map(|s| s.lo).fold(f64::INFINITY, f64::min),
                spans.iter().map(|s| s.hi).fold(f64::NEG_INFINITY, f64::max),
            ))
        }
    };

    Ok(RegimeReport { regimes, tipping_points, bistable_interval })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline_box() -> SearchBox {
        SearchBox::default_for(&ParameterSet::baseline())
    }

    #[test]
    fn regime_classification_across_d1() {
        let p = ParameterSet::baseline();
        let b = baseline_box();
        assert_eq!(classify_regime(&p, &b, 200, 42).unwrap(), RegimeClass::Bistable);
        let high = p.with("d1", 1.2).unwrap();
        assert_eq!(classify_regime(&high, &b, 200, 42).unwrap(), RegimeClass::MonostablePoor);
    }

    #[test]
    fn regime_classification_across_a1() {
        let p = ParameterSet::baseline();
        let b = baseline_box();
        let low = p.with("a1", 0.3).unwrap();
        assert_eq!(classify_regime(&low, &b, 200, 42).unwrap(), RegimeClass::MonostablePoor);
        let high = p.with("a1", 3.5).unwrap();
        assert_eq!(
            classify_regime(&high, &b, 200, 42).unwrap(),
            RegimeClass::MonostableWellbeing
        );
    }

    #[test]
    fn d1_fold_lands_near_oracle_value() {
        // Independent bisection oracle: fold at d1 ~ 0.8001.
        let p = ParameterSet::baseline();
        let branch = sweep(&p, "d1", 0.7, 0.9, 11, 42).unwrap();
        let report = detect_tipping(&branch).unwrap();
        assert_eq!(report.tipping_points.len(), 1);
        let t = &report.tipping_points[0];
        assert_eq!(t.kind, TippingKind::Tp);
        assert!((t.value - 0.8001).abs() < 2e-3, "fold at {}", t.value);
        assert!(t.bracket.1 - t.bracket.0 <= 1e-4 * 0.2 + 1e-12);
    }

    #[test]
    fn a1_sweep_shows_three_ordered_regimes() {
        let p = ParameterSet::baseline();
        let branch = sweep(&p, "a1", 0.3, 4.0, 16, 42).unwrap();
        let report = detect_tipping(&branch).unwrap();
        let seq: Vec<RegimeClass> = report.regimes.iter().map(|s| s.regime).collect();
        assert_eq!(
            seq,
            vec![
                RegimeClass::MonostablePoor,
                RegimeClass::Bistable,
                RegimeClass::MonostableWellbeing
            ]
        );
        let tp = report.tipping(TippingKind::Tp).unwrap().value;
        let tw = report.tipping(TippingKind::Tw).unwrap().value;
        assert!(tp < tw);
        let (blo, bhi) = report.bistable_interval.unwrap();
        assert!((blo - tp).abs() < 1e-12 && (bhi - tw).abs() < 1e-12);
    }

    #[test]
    fn sweep_rejects_bad_arguments() {
        let p = ParameterSet::baseline();
        assert!(sweep(&p, "nope", 0.1, 1.0, 5, 42).is_err());
        assert!(sweep(&p, "d1", 1.0, 0.1, 5, 42).is_err());
        assert!(sweep(&p, "d1", 0.1, 1.0, 1, 42).is_err());
    }
}
