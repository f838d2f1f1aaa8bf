//! Equilibrium finding, linear stability classification, and basins of
//! attraction.
//!
//! Roots of the rhs are located by damped (backtracking) Newton iteration
//! from a low-discrepancy Halton multistart over a search box; duplicates
//! are merged and every survivor is classified by the eigenvalues of the
//! analytic Jacobian. Basins are computed by integrating every node of a
//! rectilinear grid to convergence and matching the stop state against the
//! attractor list; nodes that stall elsewhere (saddle stable manifolds,
//! non-convergence within t_max) stay unresolved rather than guessed.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrapError};
use crate::integrate::{integrate_to_attractor, IntegrationSettings};
use crate::model::{jacobian, rhs, ParameterSet, StateVector};

/// Assets below this label a stable equilibrium "poor"; at or above,
/// "well-being". The calibrated branches sit at k_a <= 0.20 and k_a >= 0.60
/// across the default sweeps, so the boundary is far from both.
pub const POOR_ASSET_THRESHOLD: f64 = 0.4;

/// Residual norm below which Newton accepts a root.
pub const NEWTON_TOL: f64 = 1e-9;

/// |Re lambda| below this makes an eigenvalue (and the equilibrium) nonhyperbolic.
pub const EIG_TOL: f64 = 1e-8;

/// Infinity-norm radius for merging duplicate roots.
pub const DEDUP_TOL: f64 = 1e-6;

const MAX_NEWTON_ITERS: usize = 80;

/// Axis-aligned box in state space for multistart root searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    /// Lower corner (componentwise).
    pub lo: StateVector,
    /// Upper corner (componentwise).
    pub hi: StateVector,
}

impl SearchBox {
    /// Default box: [1e-6, 5] for assets and innovation, [1e-6, K] for soil.
    pub fn default_for(params: &ParameterSet) -> Self {
        Self {
            lo: StateVector::new(1e-6, 1e-6, 1e-6),
            hi: StateVector::new(5.0, params.k_cap, 5.0),
        }
    }

    /// Checks corner ordering and positivity; Err(Domain) on violation.
    pub fn validate(&self) -> Result<()> {
        let lo = self.lo.to_array();
        let hi = self.hi.to_array();
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && lo.iter().zip(hi.iter()).all(|(l, h)| *l > 0.0 && h > l);
        if ok {
            Ok(())
        } else {
            Err(TrapError::Domain(format!("invalid search box {self:?}")))
        }
    }
}

/// Linear stability class from the Jacobian eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumClass {
    /// All eigenvalues real with negative real part.
    StableNode,
    /// Complex pair, all real parts negative.
    StableFocus,
    /// Real parts of both signs.
    Saddle,
    /// All eigenvalues real with positive real part.
    UnstableNode,
    /// Complex pair, all real parts positive.
    UnstableFocus,
    /// Some |Re lambda| below the hyperbolicity tolerance.
    Nonhyperbolic,
}

impl EquilibriumClass {
    /// Kebab-case name used in CSV and SVG output.
    pub fn name(self) -> &'static str {
        match self {
            EquilibriumClass::StableNode => "stable-node",
            EquilibriumClass::StableFocus => "stable-focus",
            EquilibriumClass::Saddle => "saddle",
            EquilibriumClass::UnstableNode => "unstable-node",
            EquilibriumClass::UnstableFocus => "unstable-focus",
            EquilibriumClass::Nonhyperbolic => "nonhyperbolic",
        }
    }
}

/// Which branch of the equilibrium structure a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchLabel {
    /// Attractor with assets below [`POOR_ASSET_THRESHOLD`].
    Poor,
    /// Attractor with assets at or above the threshold.
    WellBeing,
    /// Everything that is not an attractor.
    Other,
}

impl BranchLabel {
    /// Kebab-case name used in CSV and SVG output.
    pub fn name(self) -> &'static str {
        match self {
            BranchLabel::Poor => "poor",
            BranchLabel::WellBeing => "well-being",
            BranchLabel::Other => "other",
        }
    }
}

/// A classified equilibrium point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// Location in state space.
    pub state: StateVector,
    /// Jacobian eigenvalues, sorted by (Re, Im).
    pub eigenvalues: [Complex64; 3],
    /// Linear stability class.
    pub class: EquilibriumClass,
    /// Poor / well-being / other branch label.
    pub label: BranchLabel,
}

impl Equilibrium {
    /// True for stable nodes and stable foci.
    pub fn is_attractor(&self) -> bool {
        matches!(self.class, EquilibriumClass::StableNode | EquilibriumClass::StableFocus)
    }
}

// Van der Corput radical inverse of index i in the given base.
fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn project(x: StateVector) -> StateVector {
    StateVector::new(x.k_a.max(1e-9), x.k_s.max(1e-9), x.k_i.max(0.0))
}

fn norm2(v: StateVector) -> f64 {
    (v.k_a * v.k_a + v.k_s * v.k_s + v.k_i * v.k_i).sqrt()
}

// Damped Newton from one start; None when it leaves the basin of any root.
fn newton(start: StateVector, params: &ParameterSet) -> Option<StateVector> {
    let mut x = project(start);
    let mut f = rhs(x, params).ok()?;
    for _ in 0..MAX_NEWTON_ITERS {
        if f.norm_inf() < 1e-13 {
            break;
        }
        let j = jacobian(x, params).ok()?;
        let delta = j.lu().solve(&Vector3::new(-f.k_a, -f.k_s, -f.k_i))?;
        let step = StateVector::new(delta[0], delta[1], delta[2]);
        // Backtracking line search with a sufficient-decrease condition.
        let f_norm = norm2(f);
        let mut t = 1.0;
        loop {
            let xt = project(x + step * t);
            if let Ok(ft) = rhs(xt, params) {
                if norm2(ft) <= (1.0 - 1e-4 * t) * f_norm {
                    x = xt;
                    f = ft;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-7 {
                return None;
            }
        }
    }
    if f.norm_inf() < NEWTON_TOL {
        Some(x)
    } else {
        None
    }
}

/// Runs damped Newton from a single start; Some(root) on convergence.
///
/// Used by continuation to track roots from a neighboring configuration.
pub fn newton_from(start: StateVector, params: &ParameterSet) -> Option<StateVector> {
    newton(start, params)
}

/// Classifies a presumed equilibrium state by its Jacobian eigenvalues.
///
/// Err(Domain) when the residual is too large for an equilibrium.
pub fn classify(eq_state: StateVector, params: &ParameterSet) -> Result<Equilibrium> {
    let residual = rhs(eq_state, params)?.norm_inf();
    if residual > 1e-6 * (1.0 + eq_state.norm_inf()) {
        return Err(TrapError::Domain(format!(
            "state {eq_state:?} is not an equilibrium (|rhs| = {residual:.3e})"
        )));
    }
    let j = jacobian(eq_state, params)?;
    let eig = j.complex_eigenvalues();
    let mut eigenvalues = [eig[0], eig[1], eig[2]];
    eigenvalues.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite eigenvalues"));

    let any_nonhyperbolic = eigenvalues.iter().any(|l| l.re.abs() < EIG_TOL);
    let any_complex = eigenvalues.iter().any(|l| l.im.abs() > EIG_TOL);
    let all_neg = eigenvalues.iter().all(|l| l.re < 0.0);
    let all_pos = eigenvalues.iter().all(|l| l.re > 0.0);
    let class = if any_nonhyperbolic {
        EquilibriumClass::Nonhyperbolic
    } else if all_neg {
        if any_complex { EquilibriumClass::StableFocus } else { EquilibriumClass::StableNode }
    } else if all_pos {
        if any_complex { EquilibriumClass::UnstableFocus } else { EquilibriumClass::UnstableNode }
    } else {
        EquilibriumClass::Saddle
    };
    let stable = matches!(class, EquilibriumClass::StableNode | EquilibriumClass::StableFocus);
    let label = if stable && eq_state.k_a < POOR_ASSET_THRESHOLD {
        BranchLabel::Poor
    } else if stable {
        BranchLabel::WellBeing
    } else {
        BranchLabel::Other
    };
    Ok(Equilibrium { state: eq_state, eigenvalues, class, label })
}

// Equilibria on the invariant k_i = 0 plane: dk_i/dt vanishes identically
// there, dk_s/dt = 0 forces k_s = K, and k_a solves the scalar equation
// sigma(k_a) a0 k_a^alpha_a K^alpha_s = delta_a k_a. A deterministic
// bracketing scan finds every such root, which the Halton multistart cannot
// be relied on to reach (the plane has measure zero).
fn plane_roots(params: &ParameterSet, search_box: &SearchBox) -> Vec<StateVector> {
    let g = |ka: f64| {
        params.savings_rate(ka)
            * params.tech_multiplier(0.0)
            * ka.powf(params.alpha_a)
            * params.k_cap.powf(params.alpha_s)
            - params.delta_a * ka
    };
    let lo = search_box.lo.k_a.max(1e-8);
    let hi = search_box.hi.k_a;
    const SAMPLES: usize = 1024;
    let mut roots = Vec::new();
    let mut prev_x = lo;
    let mut prev_g = g(lo);
    for i in 1..=SAMPLES {
        let x = lo + (hi - lo) * i as f64 / SAMPLES as f64;
        let gx = g(x);
        if prev_g == 0.0 {
            roots.push(prev_x);
        } else if prev_g * gx < 0.0 {
            let (mut a, mut b, mut ga) = (prev_x, x, prev_g);
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                let gm = g(mid);
                if ga * gm <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    ga = gm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_x = x;
        prev_g = gx;
    }
    roots.into_iter().map(|r| StateVector::new(r, params.k_cap, 0.0)).collect()
}

/// Finds and classifies all equilibria in `search_box`: a deterministic scan
/// of the invariant k_i = 0 plane plus Halton-multistart damped Newton for
/// the interior; results are deduplicated and sorted by assets.
///
/// The seed applies a Cranley-Patterson rotation to the Halton points, so
/// different seeds probe different (still low-discrepancy) start sets.
pub fn find_equilibria(
    params: &ParameterSet,
    search_box: &SearchBox,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<Equilibrium>> {
    params.validate()?;
    search_box.validate()?;
    if n_starts == 0 {
        return Err(TrapError::Domain("n_starts must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let lo = search_box.lo.to_array();
    let hi = search_box.hi.to_array();

    let mut roots: Vec<StateVector> = Vec::new();
    // Keep roots inside the box closure; k_i may legitimately sit at 0.
    let admit = |roots: &mut Vec<StateVector>, root: StateVector| {
        let r = root.to_array();
        let inside =
            r.iter().zip(hi.iter()).all(|(v, h)| *v >= 0.0 && *v <= h * (1.0 + 1e-9) + 1e-9);
        if inside
            && root.k_a >= 1e-8
            && root.k_s >= 1e-8
            && roots.iter().all(|q| q.dist_inf(root) > DEDUP_TOL)
        {
            roots.push(root);
        }
    };
    for root in plane_roots(params, search_box) {
        admit(&mut roots, root);
    }
    for i in 0..n_starts {
        let mut coords = [0.0; 3];
        for (d, base) in [2u64, 3, 5].into_iter().enumerate() {
            let u = (halton(i as u64 + 1, base) + offset[d]).fract();
            coords[d] = lo[d] + u * (hi[d] - lo[d]);
        }
        let Some(root) = newton(StateVector::from_array(coords), params) else {
            continue;
        };
        admit(&mut roots, root);
    }
    let mut out: Vec<Equilibrium> =
        roots.into_iter().map(|r| classify(r, params)).collect::<Result<_>>()?;
    out.sort_by(|a, b| a.state.k_a.partial_cmp(&b.state.k_a).expect("finite coordinates"));
    Ok(out)
}

/// Rectilinear grid specification for basin computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinSpec {
    /// Lower corner of the grid.
    pub lo: StateVector,
    /// Upper corner of the grid.
    pub hi: StateVector,
    /// Nodes per axis (k_a, k_s, k_i), each >= 2.
    pub resolution: [usize; 3],
}

impl BasinSpec {
    /// Default grid: 41x41x41 over the default search box.
    pub fn default_for(params: &ParameterSet) -> Self {
        let sb = SearchBox::default_for(params);
        Self { lo: sb.lo, hi: sb.hi, resolution: [41, 41, 41] }
    }

    /// Checks corners and resolutions; Err(Domain) on violation.
    pub fn validate(&self) -> Result<()> {
        SearchBox { lo: self.lo, hi: self.hi }.validate()?;
        if self.resolution.iter().any(|r| *r < 2) {
            return Err(TrapError::Domain(format!(
                "grid resolution {:?} must be >= 2 per axis",
                self.resolution
            )));
        }
        Ok(())
    }

    /// Total node count.
    pub fn n_nodes(&self) -> usize {
        self.resolution.iter().product()
    }

    /// State at flat index `idx` (k_a slowest, k_i fastest).
    pub fn node(&self, idx: usize) -> StateVector {
        let [ra, rs, ri] = self.resolution;
        let ii = idx % ri;
        let is = (idx / ri) % rs;
        let ia = idx / (ri * rs);
        debug_assert!(ia < ra);
        let frac = |j: usize, r: usize, lo: f64, hi: f64| lo + (hi - lo) * j as f64 / (r - 1) as f64;
        StateVector::new(
            frac(ia, ra, self.lo.k_a, self.hi.k_a),
            frac(is, rs, self.lo.k_s, self.hi.k_s),
            frac(ii, ri, self.lo.k_i, self.hi.k_i),
        )
    }
}

/// Basin-of-attraction labels over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    /// The grid that was labeled.
    pub spec: BasinSpec,
    /// Equilibria of the configuration, sorted by assets; labels index here.
    pub equilibria: Vec<Equilibrium>,
    /// Per-node attractor index (into `equilibria`); None = unresolved.
    pub labels: Vec<Option<usize>>,
}

impl BasinGrid {
    /// Fraction of all grid nodes labeled to each equilibrium index.
    pub fn fractions(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.equilibria.len()];
        for l in self.labels.iter().flatten() {
            counts[*l] += 1;
        }
        let n = self.labels.len() as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }

    /// Fraction of grid nodes with no resolved label.
    pub fn unresolved_fraction(&self) -> f64 {
        self.labels.iter().filter(|l| l.is_none()).count() as f64 / self.labels.len() as f64
    }
}

/// Matches a converged stop state against the attractors in `equilibria`.
///
/// Returns the index of the unique attractor within the acceptance radius;
/// None when none (or more than one) matches.
pub fn match_attractor(
    state: StateVector,
    equilibria: &[Equilibrium],
    settings: &IntegrationSettings,
) -> Option<usize> {
    let radius = 10.0 * settings.convergence_tol;
    let mut hit = None;
    for (i, eq) in equilibria.iter().enumerate() {
        if eq.is_attractor() && state.dist_inf(eq.state) < radius {
            if hit.is_some() {
                return None;
            }
            hit = Some(i);
        }
    }
    hit
}

/// Labels every grid node with the attractor its trajectory reaches.
///
/// Nodes are integrated independently (in parallel; the labeling is
/// worker-count invariant). `seed` feeds the equilibrium multistart.
pub fn compute_basins(
    params: &ParameterSet,
    grid: &BasinSpec,
    settings: &IntegrationSettings,
    seed: u64,
) -> Result<BasinGrid> {
    grid.validate()?;
    settings.validate()?;
    let search_box = SearchBox { lo: grid.lo, hi: grid.hi };
    let equilibria = find_equilibria(params, &search_box, 200, seed)?;
    let labels: Vec<Option<usize>> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|idx| -> Result<Option<usize>> {
            let run = integrate_to_attractor(grid.node(idx), params, settings)?;
            if !run.converged {
                return Ok(None);
            }
            Ok(match_attractor(run.state, &equilibria, settings))
        })
        .collect::<Result<_>>()?;
    Ok(BasinGrid { spec: *grid, equilibria, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Oracle equilibria of the baseline set (mpmath, 40 digits).
    const E_POOR: [f64; 3] = [0.14906321831709115, 0.97000746218237974, 0.35807965240977854];
    const E_MID: [f64; 3] = [0.36708549413165876, 0.84573045602477942, 1.33906983187251981];
    const E_WELL: [f64; 3] = [1.28393920150833979, 0.42513046840851751, 2.58720577455173502];
    // k_i = 0 plane roots (soil at carrying capacity).
    const PLANE_KA: [f64; 3] = [0.14822309948729309, 0.63510332015645902, 1.58095351082564461];

    #[test]
    fn baseline_has_six_equilibria_with_oracle_coordinates() {
        let p = ParameterSet::baseline();
        let eqs = find_equilibria(&p, &SearchBox::default_for(&p), 200, 42).unwrap();
        assert_eq!(eqs.len(), 6, "got {:#?}", eqs);
        // Sorted by k_a: plane r1, interior poor, interior mid, plane r2,
        // interior well-being, plane r3.
        let states: Vec<[f64; 3]> = eqs.iter().map(|e| e.state.to_array()).collect();
        let expect = [
            [PLANE_KA[0], 1.0, 0.0],
            E_POOR,
            E_MID,
            [PLANE_KA[1], 1.0, 0.0],
            E_WELL,
            [PLANE_KA[2], 1.0, 0.0],
        ];
        for (got, want) in states.iter().zip(expect.iter()) {
            for c in 0..3 {
                assert_relative_eq!(got[c], want[c], max_relative = 1e-7, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn baseline_classification_and_labels() {
        let p = ParameterSet::baseline();
        let eqs = find_equilibria(&p, &SearchBox::default_for(&p), 200, 42).unwrap();
        use BranchLabel::*;
        use EquilibriumClass::*;
        let classes: Vec<_> = eqs.iter().map(|e| e.class).collect();
        assert_eq!(classes, vec![Saddle, StableNode, Saddle, Saddle, StableFocus, Saddle]);
        let labels: Vec<_> = eqs.iter().map(|e| e.label).collect();
        assert_eq!(labels, vec![Other, Poor, Other, Other, WellBeing, Other]);
    }

    #[test]
    fn poor_attractor_eigenvalues_match_oracle() {
        let p = ParameterSet::baseline();
        let eq = classify(StateVector::from_array(E_POOR), &p).unwrap();
        let want = [-1.0573794453637373, -0.2858643524551737, -0.11349779154218181];
        for (l, w) in eq.eigenvalues.iter().zip(want.iter()) {
            assert_relative_eq!(l.re, w, max_relative = 1e-8);
            assert!(l.im.abs() < 1e-10);
        }
    }

    #[test]
    fn wellbeing_attractor_is_focus_with_oracle_eigenvalues() {
        let p = ParameterSet::baseline();
        let eq = classify(StateVector::from_array(E_WELL), &p).unwrap();
        assert_eq!(eq.class, EquilibriumClass::StableFocus);
        // Sorted by (Re, Im): real -0.757, then the conjugate pair.
        assert_relative_eq!(eq.eigenvalues[0].re, -0.7570881293172035, max_relative = 1e-8);
        assert_relative_eq!(eq.eigenvalues[1].re, -0.24242564370715614, max_relative = 1e-8);
        assert_relative_eq!(eq.eigenvalues[1].im, -0.28433837915326915, max_relative = 1e-8);
        assert_relative_eq!(eq.eigenvalues[2].im, 0.28433837915326915, max_relative = 1e-8);
    }

    #[test]
    fn middle_equilibrium_is_a_saddle_with_oracle_unstable_rate() {
        let p = ParameterSet::baseline();
        let eq = classify(StateVector::from_array(E_MID), &p).unwrap();
        assert_eq!(eq.class, EquilibriumClass::Saddle);
        assert_relative_eq!(eq.eigenvalues[2].re, 0.09508688108964569, max_relative = 1e-8);
    }

    #[test]
    fn classify_rejects_non_equilibrium() {
        let p = ParameterSet::baseline();
        assert!(classify(StateVector::new(1.0, 1.0, 1.0), &p).is_err());
    }

    #[test]
    fn seeds_probe_different_starts_but_agree_on_roots() {
        let p = ParameterSet::baseline();
        let a = find_equilibria(&p, &SearchBox::default_for(&p), 200, 1).unwrap();
        let b = find_equilibria(&p, &SearchBox::default_for(&p), 200, 99).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(x.state.dist_inf(y.state) < 1e-7);
        }
    }

    #[test]
    fn coarse_basin_grid_labels_both_attractors() {
        let p = ParameterSet::baseline();
        let spec = BasinSpec { resolution: [7, 7, 7], ..BasinSpec::default_for(&p) };
        let grid = compute_basins(&p, &spec, &IntegrationSettings::default(), 42).unwrap();
        let fr = grid.fractions();
        let poor_idx = grid.equilibria.iter().position(|e| e.label == BranchLabel::Poor).unwrap();
        let well_idx =
            grid.equilibria.iter().position(|e| e.label == BranchLabel::WellBeing).unwrap();
        assert!(fr[poor_idx] > 0.0, "poor basin empty: {fr:?}");
        assert!(fr[well_idx] > 0.0, "well-being basin empty: {fr:?}");
        // Node indexing round-trips.
        let idx = 3 * (7 * 7) + 2 * 7 + 5;
        let node = spec.node(idx);
        assert!(node.k_a > 0.0 && node.k_s <= 1.0 && node.k_i <= 5.0);
    }
}
