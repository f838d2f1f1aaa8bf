//! Inequality and food-security metrics, innovator tercile summaries, and
//! intervention assessment.
//!
//! Interventions come in three types: a type-1 intervention perturbs the
//! state (asset/soil/knowledge transfers) to move a system into the
//! well-being basin; type-2 and type-3 interventions change a parameter,
//! either to enlarge the well-being basin (type 2) or to move the system out
//! of a monostable-poor regime altogether (type 3). Infeasibility is a
//! result, not an error: when no qualifying plan exists the functions return
//! [`InterventionPlan::Infeasible`] with the reason; `Err` is reserved for
//! precondition and domain violations.

use serde::{Deserialize, Serialize};

use crate::abm::{innovation_efficiency, SimOutput, World};
use crate::bifurcation::{classify_regime, RegimeClass};
use crate::equilibria::{match_attractor, BasinGrid, BasinSpec, BranchLabel, SearchBox};
use crate::error::{Result, TrapError};
use crate::integrate::{integrate_to_attractor, IntegrationSettings};
use crate::model::{ParameterSet, StateVector};

/// Gini coefficient of a nonnegative sample; 0 is perfect equality.
///
/// Uses the sorted form sum_i (2i - n + 1) x_(i) / (n^2 mean), equal to the
/// mean absolute pairwise difference over 2 * mean. Err(Domain) for an empty
/// sample, any negative or non-finite value, or an all-zero sample.
pub fn gini(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(TrapError::Domain("gini of an empty sample".into()));
    }
    if xs.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(TrapError::Domain("gini requires finite nonnegative values".into()));
    }
    let n = xs.len() as f64;
    let total: f64 = xs.iter().sum();
    if total <= 0.0 {
        return Err(TrapError::Domain("gini undefined for an all-zero sample".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted: f64 =
        sorted.iter().enumerate().map(|(i, x)| (2.0 * i as f64 - n + 1.0) * x).sum();
    Ok(weighted / (n * total))
}

/// Fraction of producers whose income plus assets fall short of the
/// consumption need. Err(Domain) when there are no producers.
pub fn food_insecurity(world: &World) -> Result<f64> {
    if world.producers.is_empty() {
        return Err(TrapError::Domain("food insecurity of an empty population".into()));
    }
    let need = world.config.consumption_need;
    let short =
        world.producers.iter().filter(|p| p.income + p.assets < need).count();
    Ok(short as f64 / world.producers.len() as f64)
}

/// Gini of cumulative producer income over a completed run.
pub fn cumulative_income_gini(out: &SimOutput) -> Result<f64> {
    let mut totals = vec![0.0; out.world.config.n_producers];
    for row in &out.rows {
        if row.agent_type == "producer" {
            totals[row.agent_id] += row.income.unwrap_or(0.0);
        }
    }
    gini(&totals)
}

/// Five-number summary plus mean, quantiles by linear interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    /// Smallest value.
    pub min: f64,
    /// Lower quartile.
    pub q1: f64,
    /// Median.
    pub median: f64,
    /// Upper quartile.
    pub q3: f64,
    /// Largest value.
    pub max: f64,
    /// Arithmetic mean.
    pub mean: f64,
    /// Sample size.
    pub n: usize,
}

// Quantile of a sorted sample at h = (n - 1) p with linear interpolation.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    /// Computes the summary; Err(Domain) for an empty or non-finite sample.
    pub fn from_sample(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(TrapError::Domain("box stats of an empty sample".into()));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(TrapError::Domain("box stats require finite values".into()));
        }
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            n: xs.len(),
        })
    }
}

/// One innovator observation for tercile analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovatorObs {
    /// Mean developed productivity gain (the ranking variable).
    pub efficiency: f64,
    /// Innovation capital.
    pub innovation_capital: f64,
    /// Capital efficiency.
    pub capital_efficiency: f64,
    /// Knowledge efficiency.
    pub knowledge_efficiency: f64,
    /// Innovation demand.
    pub innovation_demand: f64,
}

/// All innovator observations of a world's final state.
pub fn innovator_observations(world: &World) -> Vec<InnovatorObs> {
    world
        .innovators
        .iter()
        .map(|inn| InnovatorObs {
            efficiency: innovation_efficiency(inn, world),
            innovation_capital: inn.innovation_capital,
            capital_efficiency: inn.capital_efficiency,
            knowledge_efficiency: inn.knowledge_efficiency,
            innovation_demand: inn.innovation_demand,
        })
        .collect()
}

/// Summary of one efficiency tercile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TercileStats {
    /// Observations in this tercile.
    pub n: usize,
    /// Ranking variable summary.
    pub efficiency: BoxStats,
    /// Innovation capital summary.
    pub innovation_capital: BoxStats,
    /// Capital efficiency summary.
    pub capital_efficiency: BoxStats,
    /// Knowledge efficiency summary.
    pub knowledge_efficiency: BoxStats,
    /// Innovation demand summary.
    pub innovation_demand: BoxStats,
}

/// Innovator attributes grouped into efficiency terciles (low, mid, high).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TercileReport {
    /// Low, middle, and high efficiency terciles, in that order.
    pub terciles: [TercileStats; 3],
}

/// Ranks observations by innovation efficiency and summarizes each tercile.
///
/// Terciles are rank-based: sorted observations are cut into three contiguous
/// groups whose sizes differ by at most one (remainders go to the lowest
/// groups). Err(Analysis) with fewer than 3 observations or fewer than 3
/// distinct efficiency values, since the ranking would be degenerate.
pub fn tercile_report(obs: &[InnovatorObs]) -> Result<TercileReport> {
    if obs.len() < 3 {
        return Err(TrapError::Analysis(format!(
            "tercile report needs >= 3 observations, got {}",
            obs.len()
        )));
    }
    let mut effs: Vec<f64> = obs.iter().map(|o| o.efficiency).collect();
    effs.sort_by(f64::total_cmp);
    effs.dedup();
    if effs.len() < 3 {
        return Err(TrapError::Analysis(format!(
            "tercile binning needs >= 3 distinct efficiency values, got {}",
            effs.len()
        )));
    }
    let mut sorted = obs.to_vec();
    sorted.sort_by(|a, b| a.efficiency.total_cmp(&b.efficiency));

    let n = sorted.len();
    let base = n / 3;
    let rem = n % 3;
    let sizes = [base + usize::from(rem > 0), base + usize::from(rem > 1), base];
    let mut start = 0;
    let mut terciles = Vec::with_capacity(3);
    for size in sizes {
        let group = &sorted[start..start + size];
        start += size;
        let col = |f: fn(&InnovatorObs) -> f64| -> Vec<f64> { group.iter().map(f).collect() };
        terciles.push(TercileStats {
            n: size,
            efficiency: BoxStats::from_sample(&col(|o| o.efficiency))?,
            innovation_capital: BoxStats::from_sample(&col(|o| o.innovation_capital))?,
            capital_efficiency: BoxStats::from_sample(&col(|o| o.capital_efficiency))?,
            knowledge_efficiency: BoxStats::from_sample(&col(|o| o.knowledge_efficiency))?,
            innovation_demand: BoxStats::from_sample(&col(|o| o.innovation_demand))?,
        });
    }
    Ok(TercileReport { terciles: [terciles[0], terciles[1], terciles[2]] })
}

/// Resolution of the fixed basin grid used by type-2 assessment.
pub const TYPE2_GRID_RESOLUTION: usize = 21;
/// Minimum well-being basin-fraction gain a type-2 plan must deliver.
pub const TYPE2_FRACTION_GAIN: f64 = 0.10;
// Fraction of the bound span a type-3 value sits inside the qualifying regime.
const TYPE3_MARGIN: f64 = 0.01;
// Candidate values scanned per direction before refining.
const PARAM_SCAN_POINTS: usize = 9;

/// Outcome of an intervention assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InterventionPlan {
    /// State perturbation into the well-being basin.
    Type1 {
        /// Componentwise nonnegative addition to the current state.
        perturbation: StateVector,
        /// State after the perturbation (a basin-grid node).
        target: StateVector,
        /// The well-being attractor the target converges to.
        attractor: StateVector,
    },
    /// Parameter change enlarging the well-being basin.
    Type2 {
        /// Parameter name.
        param: String,
        /// Current value.
        from: f64,
        /// Proposed value.
        to: f64,
        /// Well-being basin fraction before.
        fraction_before: f64,
        /// Verified well-being basin fraction after.
        fraction_after: f64,
    },
    /// Parameter change leaving the monostable-poor regime.
    Type3 {
        /// Parameter name.
        param: String,
        /// Current value.
        from: f64,
        /// Proposed value (just inside the qualifying regime).
        to: f64,
        /// Refined regime boundary.
        boundary: f64,
        /// Verified regime at the proposed value.
        regime_after: RegimeClass,
    },
    /// No qualifying plan exists; the reason is part of the result.
    Infeasible {
        /// Why no plan qualifies.
        reason: String,
    },
}

/// Smallest nonnegative state perturbation that lands in the well-being basin.
///
/// Candidate targets are the grid nodes labeled well-being that dominate the
/// state componentwise (transfers cannot take assets, soil, or knowledge
/// away); among them the smallest max-norm perturbation whose trajectory is
/// verified (by direct integration) to reach a well-being attractor wins. A
/// state already in the well-being basin gets a zero perturbation. Returns
/// `Infeasible` when the landscape has no well-being attractor or no
/// dominating node converges.
pub fn intervention_type1(
    state: StateVector,
    grid: &BasinGrid,
    params: &ParameterSet,
    settings: &IntegrationSettings,
) -> Result<InterventionPlan> {
    crate::model::check_state(state)?;
    let well: Vec<usize> = (0..grid.equilibria.len())
        .filter(|i| grid.equilibria[*i].label == BranchLabel::WellBeing)
        .collect();
    if well.is_empty() {
        return Ok(InterventionPlan::Infeasible {
            reason: "no well-being attractor exists at these parameters (monostable-poor \
                     landscape); a type-1 state transfer cannot help"
                .into(),
        });
    }

    // Verify a candidate target actually converges to a well-being attractor.
    let verify = |target: StateVector| -> Result<Option<StateVector>> {
        let run = integrate_to_attractor(target, params, settings)?;
        if !run.converged {
            return Ok(None);
        }
        Ok(match_attractor(run.state, &grid.equilibria, settings)
            .filter(|i| grid.equilibria[*i].label == BranchLabel::WellBeing)
            .map(|i| grid.equilibria[i].state))
    };

    if let Some(attractor) = verify(state)? {
        return Ok(InterventionPlan::Type1 {
            perturbation: StateVector::new(0.0, 0.0, 0.0),
            target: state,
            attractor,
        });
    }

    // Dominating well-being nodes, nearest (max-norm) first.
    let mut candidates: Vec<(f64, StateVector)> = (0..grid.spec.n_nodes())
        .filter_map(|idx| {
            let label = grid.labels[idx]?;
            if grid.equilibria[label].label != BranchLabel::WellBeing {
                return None;
            }
            let node = grid.spec.node(idx);
            let dominates = node.k_a >= state.k_a && node.k_s >= state.k_s && node.k_i >= state.k_i;
            dominates.then(|| (node.dist_inf(state), node))
        })
        .collect();
    if candidates.is_empty() {
        return Ok(InterventionPlan::Infeasible {
            reason: "no grid node in the well-being basin dominates the state componentwise; \
                     a nonnegative transfer cannot reach the basin on this grid"
                .into(),
        });
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    const MAX_VERIFY: usize = 64;
    for (_, node) in candidates.iter().take(MAX_VERIFY) {
        if let Some(attractor) = verify(*node)? {
            return Ok(InterventionPlan::Type1 {
                perturbation: *node - state,
                target: *node,
                attractor,
            });
        }
    }
    Ok(InterventionPlan::Infeasible {
        reason: format!(
            "none of the {} nearest dominating candidates was verified to converge to a \
             well-being attractor",
            candidates.len().min(MAX_VERIFY)
        ),
    })
}

// Well-being basin fraction on the fixed assessment grid.
fn well_being_fraction(
    params: &ParameterSet,
    settings: &IntegrationSettings,
    seed: u64,
) -> Result<f64> {
    let mut spec = BasinSpec::default_for(params);
    spec.resolution = [TYPE2_GRID_RESOLUTION; 3];
    let grid = crate::equilibria::compute_basins(params, &spec, settings, seed)?;
    let fractions = grid.fractions();
    Ok(grid
        .equilibria
        .iter()
        .zip(fractions.iter())
        .filter(|(eq, _)| eq.label == BranchLabel::WellBeing)
        .map(|(_, f)| f)
        .sum())
}

/// Parameter intervention: type 3 out of a monostable-poor regime, type 2 to
/// grow the well-being basin of a bistable one.
///
/// The current regime selects the plan type. Monostable-poor: find the
/// nearest regime boundary inside `bounds` by scanning and bisection (to
/// 1e-4 of the span) and propose a value a small documented margin past it;
/// the proposal is re-classified to verify. Bistable: find the smallest
/// parameter change within `bounds` that raises the well-being basin fraction
/// on a fixed 21^3 grid by at least 10 absolute points, verified by
/// recomputation at the proposed value. Monostable-wellbeing input is a
/// precondition violation (Err(Domain)): there is nothing to escape.
pub fn intervention_type23(
    params: &ParameterSet,
    name: &str,
    bounds: (f64, f64),
    settings: &IntegrationSettings,
    seed: u64,
) -> Result<InterventionPlan> {
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(TrapError::Config(format!("invalid bounds ({lo}, {hi}) for {name}")));
    }
    let current = params
        .get(name)
        .ok_or_else(|| TrapError::Config(format!("unknown parameter name: {name}")))?;
    if current < lo || current > hi {
        return Err(TrapError::Config(format!(
            "current {name} = {current} lies outside the bounds ({lo}, {hi})"
        )));
    }
    let sbox = SearchBox::default_for(params);
    let n_starts = 200;
    let regime_at = |v: f64| -> Result<RegimeClass> {
        classify_regime(&params.with(name, v)?, &sbox, n_starts, seed)
    };
    let span = hi - lo;

    match regime_at(current)? {
        RegimeClass::MonostableWellbeing => Err(TrapError::Domain(
            "the system is already monostable well-being; no parameter intervention needed"
                .into(),
        )),
        RegimeClass::MonostablePoor => {
            // Type 3: nearest parameter value whose regime is not monostable-poor.
            let mut nearest: Option<f64> = None;
            for k in 0..PARAM_SCAN_POINTS {
                let v = lo + span * k as f64 / (PARAM_SCAN_POINTS - 1) as f64;
                if regime_at(v)? != RegimeClass::MonostablePoor
                    && nearest.is_none_or(|b| (v - current).abs() < (b - current).abs())
                {
                    nearest = Some(v);
                }
            }
            let Some(target) = nearest else {
                return Ok(InterventionPlan::Infeasible {
                    reason: format!(
                        "{name} stays monostable-poor across [{lo}, {hi}]; no escape value \
                         exists within the allowed range"
                    ),
                });
            };
            // Bisect the boundary between the current value and the target.
            let (mut a, mut b) = (current, target);
            while (b - a).abs() > 1e-4 * span {
                let mid = 0.5 * (a + b);
                if regime_at(mid)? == RegimeClass::MonostablePoor {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let to = (b + TYPE3_MARGIN * span * (b - a).signum()).clamp(lo, hi);
            let regime_after = regime_at(to)?;
            if regime_after == RegimeClass::MonostablePoor {
                return Ok(InterventionPlan::Infeasible {
                    reason: format!(
                        "boundary refinement near {name} = {b:.6} did not verify: the margin \
                         value still classifies monostable-poor"
                    ),
                });
            }
            Ok(InterventionPlan::Type3 {
                param: name.to_string(),
                from: current,
                to,
                boundary: b,
                regime_after,
            })
        }
        RegimeClass::Bistable => {
            // Type 2: smallest change gaining >= 10 points of basin fraction.
            let before = well_being_fraction(params, settings, seed)?;
            let target_fraction = before + TYPE2_FRACTION_GAIN;
            let fraction_at = |v: f64| -> Result<f64> {
                well_being_fraction(&params.with(name, v)?, settings, seed)
            };
            let mut nearest: Option<f64> = None;
            for k in 0..PARAM_SCAN_POINTS {
                let v = lo + span * k as f64 / (PARAM_SCAN_POINTS - 1) as f64;
                if (v - current).abs() < 1e-12 * span {
                    continue;
                }
                if fraction_at(v)? >= target_fraction
                    && nearest.is_none_or(|b| (v - current).abs() < (b - current).abs())
                {
                    nearest = Some(v);
                }
            }
            let Some(far) = nearest else {
                return Ok(InterventionPlan::Infeasible {
                    reason: format!(
                        "no {name} value in [{lo}, {hi}] raises the well-being basin fraction \
                         by {TYPE2_FRACTION_GAIN:.2} (current fraction {before:.3})"
                    ),
                });
            };
            // Shrink toward the current value while the gain persists.
            let (mut a, mut b) = (current, far);
            for _ in 0..12 {
                if (b - a).abs() <= 1e-3 * span {
                    break;
                }
                let mid = 0.5 * (a + b);
                if fraction_at(mid)? >= target_fraction {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let after = fraction_at(b)?;
            if after < target_fraction {
                return Ok(InterventionPlan::Infeasible {
                    reason: format!(
                        "refined {name} value {b:.6} failed recomputation: fraction {after:.3} \
                         vs required {target_fraction:.3}"
                    ),
                });
            }
            Ok(InterventionPlan::Type2 {
                param: name.to_string(),
                from: current,
                to: b,
                fraction_before: before,
                fraction_after: after,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abm::{init_world, run, WorldConfig};
    use crate::equilibria::compute_basins;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // O(n^2) reference implementation: mean absolute difference / (2 mean).
    fn gini_brute(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mu = xs.iter().sum::<f64>() / n;
        let mut acc = 0.0;
        for a in xs {
            for b in xs {
                acc += (a - b).abs();
            }
        }
        acc / (2.0 * n * n * mu)
    }

    #[test]
    fn gini_known_values() {
        assert!(gini(&[3.0, 3.0, 3.0, 3.0]).unwrap().abs() < 1e-15);
        assert!((gini(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        // One person holds everything among n: G = (n - 1) / n.
        assert!((gini(&[0.0, 0.0, 0.0, 10.0]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gini_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let xs: Vec<f64> = (0..37).map(|_| rng.gen_range(0.0..10.0)).collect();
            assert!((gini(&xs).unwrap() - gini_brute(&xs)).abs() < 1e-12);
        }
    }

    #[test]
    fn gini_invariances() {
        let xs = vec![1.0, 5.0, 2.0, 8.0, 3.0];
        let g = gini(&xs).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| 7.3 * x).collect();
        assert!((gini(&scaled).unwrap() - g).abs() < 1e-14);
        let permuted = vec![8.0, 1.0, 3.0, 5.0, 2.0];
        assert!((gini(&permuted).unwrap() - g).abs() < 1e-15);
    }

    #[test]
    fn gini_domain_errors() {
        assert!(gini(&[]).is_err());
        assert!(gini(&[0.0, 0.0]).is_err());
        assert!(gini(&[1.0, -0.5]).is_err());
        assert!(gini(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn food_insecurity_counts_shortfalls() {
        let cfg = WorldConfig { n_producers: 4, ..Default::default() };
        let mut w = init_world(&cfg).unwrap();
        let need = cfg.consumption_need;
        for (i, p) in w.producers.iter_mut().enumerate() {
            p.income = 0.0;
            p.assets = if i < 3 { need - 0.01 } else { need + 0.01 };
        }
        assert!((food_insecurity(&w).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn box_stats_interpolated_quartiles() {
        let xs: Vec<f64> = (1..=7).map(|i| i as f64).collect();
        let b = BoxStats::from_sample(&xs).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 2.5, 4.0, 5.5, 7.0));
        assert!((b.mean - 4.0).abs() < 1e-15);
        assert_eq!(b.n, 7);
        let single = BoxStats::from_sample(&[2.5]).unwrap();
        assert_eq!((single.min, single.median, single.max), (2.5, 2.5, 2.5));
        assert!(BoxStats::from_sample(&[]).is_err());
    }

    fn obs(e: f64) -> InnovatorObs {
        InnovatorObs {
            efficiency: e,
            innovation_capital: 10.0 * e,
            capital_efficiency: e / 10.0,
            knowledge_efficiency: e / 20.0,
            innovation_demand: e + 1.0,
        }
    }

    #[test]
    fn terciles_split_by_rank_with_remainder_low() {
        let observations: Vec<InnovatorObs> = [3.0, 1.0, 7.0, 5.0, 2.0, 6.0, 4.0]
            .iter()
            .map(|e| obs(*e))
            .collect();
        let report = tercile_report(&observations).unwrap();
        assert_eq!([report.terciles[0].n, report.terciles[1].n, report.terciles[2].n], [3, 2, 2]);
        // Sorted efficiencies 1..7: groups {1,2,3}, {4,5}, {6,7}.
        assert_eq!(report.terciles[0].efficiency.median, 2.0);
        assert_eq!(report.terciles[1].efficiency.median, 4.5);
        assert_eq!(report.terciles[2].efficiency.median, 6.5);
        assert_eq!(report.terciles[2].innovation_capital.max, 70.0);
        // Attributes monotone in efficiency here, so medians are ordered.
        for f in [
            |t: &TercileStats| t.innovation_capital.median,
            |t: &TercileStats| t.capital_efficiency.median,
            |t: &TercileStats| t.knowledge_efficiency.median,
            |t: &TercileStats| t.innovation_demand.median,
        ] {
            assert!(f(&report.terciles[0]) <= f(&report.terciles[1]));
            assert!(f(&report.terciles[1]) <= f(&report.terciles[2]));
        }
    }

    #[test]
    fn terciles_reject_degenerate_inputs() {
        assert!(tercile_report(&[obs(1.0), obs(2.0)]).is_err());
        let tied: Vec<InnovatorObs> = vec![obs(1.0), obs(1.0), obs(2.0), obs(2.0)];
        assert!(tercile_report(&tied).is_err());
    }

    #[test]
    fn cumulative_income_gini_is_positive_for_default_run() {
        let cfg = WorldConfig { steps: 30, ..Default::default() };
        let out = run(&cfg).unwrap();
        let g = cumulative_income_gini(&out).unwrap();
        assert!((0.0..1.0).contains(&g), "gini {g}");
    }

    fn coarse_grid(params: &ParameterSet) -> BasinGrid {
        let mut spec = BasinSpec::default_for(params);
        spec.resolution = [9, 9, 9];
        compute_basins(params, &spec, &IntegrationSettings::default(), 11).unwrap()
    }

    #[test]
    fn type1_plans_verify_or_report() {
        let params = ParameterSet::baseline();
        let settings = IntegrationSettings::default();
        let grid = coarse_grid(&params);

        // A state deep in the poor basin gets a verified nonnegative push.
        let poor_state = StateVector::new(0.15, 0.95, 0.35);
        match intervention_type1(poor_state, &grid, &params, &settings).unwrap() {
            InterventionPlan::Type1 { perturbation, target, .. } => {
                assert!(perturbation.k_a >= 0.0 && perturbation.k_s >= 0.0);
                assert!(perturbation.k_i >= 0.0);
                assert!(perturbation.norm_inf() > 0.0);
                let run = integrate_to_attractor(target, &params, &settings).unwrap();
                assert!(run.converged);
            }
            other => panic!("expected a feasible type-1 plan, got {other:?}"),
        }

        // A state already in the well-being basin needs no perturbation.
        let well_state = StateVector::new(1.3, 0.4, 2.6);
        match intervention_type1(well_state, &grid, &params, &settings).unwrap() {
            InterventionPlan::Type1 { perturbation, .. } => {
                assert_eq!(perturbation.norm_inf(), 0.0);
            }
            other => panic!("expected a zero-perturbation plan, got {other:?}"),
        }
    }

    #[test]
    fn type1_reports_infeasible_when_monostable_poor() {
        // d1 = 1.2 collapses the well-being attractor.
        let params = ParameterSet::baseline().with("d1", 1.2).unwrap();
        let grid = coarse_grid(&params);
        let plan = intervention_type1(
            StateVector::new(0.2, 0.9, 0.4),
            &grid,
            &params,
            &IntegrationSettings::default(),
        )
        .unwrap();
        assert!(matches!(plan, InterventionPlan::Infeasible { .. }), "got {plan:?}");
    }

    #[test]
    fn type3_escapes_monostable_poor() {
        let params = ParameterSet::baseline().with("d1", 1.2).unwrap();
        let settings = IntegrationSettings::default();
        let plan =
            intervention_type23(&params, "d1", (0.1, 1.5), &settings, 23).unwrap();
        match plan {
            InterventionPlan::Type3 { to, boundary, regime_after, .. } => {
                assert!(regime_after != RegimeClass::MonostablePoor);
                // The d1 fold sits near 0.8; the tipping threshold must too.
                assert!((boundary - 0.80).abs() < 0.06, "boundary {boundary}");
                assert!(to < boundary);
            }
            other => panic!("expected a type-3 plan, got {other:?}"),
        }
    }

    #[test]
    fn type23_rejects_monostable_wellbeing() {
        let params = ParameterSet::baseline().with("a1", 3.5).unwrap();
        let err = intervention_type23(&params, "a1", (0.3, 4.0), &IntegrationSettings::default(), 2);
        assert!(matches!(err, Err(TrapError::Domain(_))));
    }

    #[test]
    fn type2_grows_the_well_being_basin() {
        let params = ParameterSet::baseline();
        let settings = IntegrationSettings::default();
        let plan =
            intervention_type23(&params, "a1", (0.3, 4.0), &settings, 7).unwrap();
        match plan {
            InterventionPlan::Type2 { from, to, fraction_before, fraction_after, .. } => {
                assert!((fraction_after - fraction_before) >= TYPE2_FRACTION_GAIN - 1e-12);
                assert!(to > from, "higher a1 should grow the basin ({from} -> {to})");
            }
            other => panic!("expected a type-2 plan, got {other:?}"),
        }
    }
}
