//! Search over criterion parameters for the strongest violation: dense grid
//! sampling, derivative-free simplex refinement, and error-tolerant scans
//! that produce dense tables.
//!
//! Criteria are addressed through named scalar parameters (`re_a2`,
//! `sigma1`, ...). A search fixes some of them and explores the rest inside
//! finite bounds; every run is deterministic given its seed.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhasePoint;
use crate::state::DensityMatrix;
use crate::witness::{
    chebyshev_criterion, nonlinear_pair_criterion, pair_criterion, qq_multi, qq_pair,
    three_by_three, wigner_husimi_two_mode, wq_criterion,
};

/// Default per-axis resolution for grids and figure datasets.
pub const DEFAULT_GRID_RESOLUTION: usize = 81;

/// Default half-width of amplitude search boxes.
pub const DEFAULT_AMPLITUDE_RADIUS: f64 = 4.0;

/// Hard cap on the number of grid cells in one search or scan.
const MAX_CELLS: usize = 2_000_000;

// ---------------------------------------------------------------------------
// Criterion addressing
// ---------------------------------------------------------------------------

/// A named witness criterion together with any structural choices it needs.
/// Each criterion exposes a fixed list of scalar parameters; see
/// [`CriterionSpec::param_names`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CriterionSpec {
    /// Husimi pair criterion: `re_a1, im_a1, re_a2, im_a2`.
    QqPair,
    /// Multimode Husimi pair criterion: `re_a1_<m>, im_a1_<m>, re_a2_<m>,
    /// im_a2_<m>` for every mode `m` of the state.
    QqMulti,
    /// Multimode Husimi pair criterion with the same amplitude on every
    /// mode: `re_a1, im_a1, re_a2, im_a2`.
    QqMultiUniform,
    /// Same-point two-width criterion: `re_alpha, im_alpha, sigma`.
    Wq,
    /// Two-point two-width criterion: `re_a1, im_a1, sigma1, re_a2, im_a2,
    /// sigma2`.
    Pair,
    /// Third-order criterion over the same parameters as `Pair`.
    ThreeByThree,
    /// Same-point product criterion with `widths` factors: `re_alpha,
    /// im_alpha, sigma_0 .. sigma_<widths-1>`.
    Chebyshev { widths: usize },
    /// Quartic-kernel pair criterion: `re_a1, im_a1, re_a2, im_a2, eta,
    /// chi`.
    NonlinearPair,
    /// Two-mode marginal/joint criterion: `re_a1, im_a1, re_a2, im_a2`.
    WignerHusimiTwoMode,
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl CriterionSpec {
    /// The exact set of scalar parameters the criterion consumes for the
    /// given state.
    pub fn param_names(&self, state: &DensityMatrix) -> Result<Vec<String>> {
        Ok(match self {
            CriterionSpec::QqPair => names(&["re_a1", "im_a1", "re_a2", "im_a2"]),
            CriterionSpec::QqMulti => {
                let mut v = Vec::new();
                for side in ["a1", "a2"] {
                    for m in 0..state.mode_count() {
                        v.push(format!("re_{side}_{m}"));
                        v.push(format!("im_{side}_{m}"));
                    }
                }
                v
            }
            CriterionSpec::Wq => names(&["re_alpha", "im_alpha", "sigma"]),
            CriterionSpec::Pair | CriterionSpec::ThreeByThree => {
                names(&["re_a1", "im_a1", "sigma1", "re_a2", "im_a2", "sigma2"])
            }
            CriterionSpec::Chebyshev { widths } => {
                if *widths < 2 {
                    return Err(Error::invalid(
                        "criterion",
                        format!("the product criterion needs >= 2 widths, got {widths}"),
                    ));
                }
                let mut v = names(&["re_alpha", "im_alpha"]);
                for i in 0..*widths {
                    v.push(format!("sigma_{i}"));
                }
                v
            }
            CriterionSpec::NonlinearPair => {
                names(&["re_a1", "im_a1", "re_a2", "im_a2", "eta", "chi"])
            }
            CriterionSpec::WignerHusimiTwoMode | CriterionSpec::QqMultiUniform => {
                names(&["re_a1", "im_a1", "re_a2", "im_a2"])
            }
        })
    }
}

fn get(params: &BTreeMap<String, f64>, name: &str) -> Result<f64> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| Error::invalid("criterion parameters", format!("missing `{name}`")))
}

fn get_c(params: &BTreeMap<String, f64>, re: &str, im: &str) -> Result<C64> {
    Ok(C64::new(get(params, re)?, get(params, im)?))
}

/// Evaluates a named criterion from a full scalar-parameter assignment.
/// The assignment must contain exactly the names from
/// [`CriterionSpec::param_names`].
pub fn evaluate_criterion(
    state: &DensityMatrix,
    criterion: &CriterionSpec,
    params: &BTreeMap<String, f64>,
) -> Result<f64> {
    let expected = criterion.param_names(state)?;
    if params.len() != expected.len() {
        let extras: Vec<_> = params
            .keys()
            .filter(|k| !expected.iter().any(|e| e == *k))
            .cloned()
            .collect();
        if !extras.is_empty() {
            return Err(Error::invalid(
                "criterion parameters",
                format!("unknown parameters: {}", extras.join(", ")),
            ));
        }
    }
    match criterion {
        CriterionSpec::QqPair => {
            let a1 = get_c(params, "re_a1", "im_a1")?;
            let a2 = get_c(params, "re_a2", "im_a2")?;
            qq_pair(state, a1, a2)
        }
        CriterionSpec::QqMulti => {
            let mut p1 = Vec::with_capacity(state.mode_count());
            let mut p2 = Vec::with_capacity(state.mode_count());
            for m in 0..state.mode_count() {
                p1.push(get_c(params, &format!("re_a1_{m}"), &format!("im_a1_{m}"))?);
                p2.push(get_c(params, &format!("re_a2_{m}"), &format!("im_a2_{m}"))?);
            }
            qq_multi(state, &p1, &p2)
        }
        CriterionSpec::QqMultiUniform => {
            let a1 = get_c(params, "re_a1", "im_a1")?;
            let a2 = get_c(params, "re_a2", "im_a2")?;
            qq_multi(
                state,
                &vec![a1; state.mode_count()],
                &vec![a2; state.mode_count()],
            )
        }
        CriterionSpec::Wq => {
            let alpha = get_c(params, "re_alpha", "im_alpha")?;
            wq_criterion(state, alpha, get(params, "sigma")?)
        }
        CriterionSpec::Pair | CriterionSpec::ThreeByThree => {
            let a1 = get_c(params, "re_a1", "im_a1")?;
            let a2 = get_c(params, "re_a2", "im_a2")?;
            let p1 = PhasePoint::single(a1, get(params, "sigma1")?)?;
            let p2 = PhasePoint::single(a2, get(params, "sigma2")?)?;
            match criterion {
                CriterionSpec::Pair => pair_criterion(state, &p1, &p2),
                _ => three_by_three(state, &p1, &p2),
            }
        }
        CriterionSpec::Chebyshev { widths } => {
            let alpha = get_c(params, "re_alpha", "im_alpha")?;
            let mut sigmas = Vec::with_capacity(*widths);
            for i in 0..*widths {
                sigmas.push(get(params, &format!("sigma_{i}"))?);
            }
            chebyshev_criterion(state, alpha, &sigmas)
        }
        CriterionSpec::NonlinearPair => {
            let a1 = get_c(params, "re_a1", "im_a1")?;
            let a2 = get_c(params, "re_a2", "im_a2")?;
            nonlinear_pair_criterion(state, a1, a2, get(params, "eta")?, get(params, "chi")?)
        }
        CriterionSpec::WignerHusimiTwoMode => {
            let a1 = get_c(params, "re_a1", "im_a1")?;
            let a2 = get_c(params, "re_a2", "im_a2")?;
            wigner_husimi_two_mode(state, a1, a2)
        }
    }
}

// ---------------------------------------------------------------------------
// Search specification
// ---------------------------------------------------------------------------

/// One searched scalar parameter and its finite bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParam {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl FreeParam {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        FreeParam { name: name.into(), lo, hi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    Simplex,
    GridThenSimplex,
}

fn default_resolution() -> usize {
    DEFAULT_GRID_RESOLUTION
}

fn default_max_iters() -> usize {
    200
}

/// Full description of one minimization: which criterion, which parameters
/// are fixed, which are searched inside which bounds, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub criterion: CriterionSpec,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    pub free: Vec<FreeParam>,
    pub strategy: Strategy,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Outcome of a minimization. `trace` records the incumbent each time it
/// improves, as (free-parameter vector, value) in `free` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_value: f64,
    pub best_params: BTreeMap<String, f64>,
    pub evaluations: usize,
    pub trace: Option<Vec<(Vec<f64>, f64)>>,
}

struct Objective<'a> {
    state: &'a DensityMatrix,
    criterion: &'a CriterionSpec,
    fixed: &'a BTreeMap<String, f64>,
    free: &'a [FreeParam],
}

impl Objective<'_> {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut params = self.fixed.clone();
        for (p, &v) in self.free.iter().zip(x) {
            params.insert(p.name.clone(), v);
        }
        evaluate_criterion(self.state, self.criterion, &params)
    }

    fn clamp(&self, x: &mut [f64]) {
        for (p, v) in self.free.iter().zip(x.iter_mut()) {
            *v = v.clamp(p.lo, p.hi);
        }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// `(value, params)` ordering: lowest value first, ties broken by
/// lexicographically smallest parameter vector.
fn better(cand: (f64, &[f64]), incumbent: (f64, &[f64])) -> bool {
    cand.0 < incumbent.0 || (cand.0 == incumbent.0 && lex_less(cand.1, incumbent.1))
}

fn validate_spec(state: &DensityMatrix, spec: &SearchSpec) -> Result<()> {
    if spec.free.is_empty() {
        return Err(Error::invalid("search", "need at least one free parameter"));
    }
    if spec.grid_resolution < 3 {
        return Err(Error::invalid(
            "search",
            format!("grid resolution must be >= 3, got {}", spec.grid_resolution),
        ));
    }
    for p in &spec.free {
        if !p.lo.is_finite() || !p.hi.is_finite() || p.lo > p.hi {
            return Err(Error::invalid(
                "search",
                format!("bounds for `{}` must be finite with lo <= hi, got [{}, {}]", p.name, p.lo, p.hi),
            ));
        }
        if spec.fixed.contains_key(&p.name) {
            return Err(Error::invalid(
                "search",
                format!("`{}` is both fixed and free", p.name),
            ));
        }
    }
    let expected = spec.criterion.param_names(state)?;
    let mut covered: Vec<&str> = spec.fixed.keys().map(|s| s.as_str()).collect();
    covered.extend(spec.free.iter().map(|p| p.name.as_str()));
    covered.sort_unstable();
    covered.dedup();
    let mut wanted: Vec<&str> = expected.iter().map(|s| s.as_str()).collect();
    wanted.sort_unstable();
    if covered != wanted {
        return Err(Error::invalid(
            "search",
            format!(
                "parameters must cover exactly {{{}}}, got {{{}}}",
                wanted.join(", "),
                covered.join(", ")
            ),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Minimization
// ---------------------------------------------------------------------------

/// Minimizes the criterion over the free parameters.
///
/// `Grid` samples the bounds at the requested resolution. `Simplex` refines
/// from the box center. `GridThenSimplex` refines from the best grid cell
/// and never returns a value worse than the best grid sample. The simplex
/// phase restarts three extra times from seed-perturbed starting points;
/// results are merged by lowest value, then lexicographic parameters, so a
/// run is fully reproducible from its spec.
///
/// Rotation-invariant states admit a reduced search: fix the imaginary
/// parts to zero and bound amplitudes to `[0, radius]`.
pub fn minimize(state: &DensityMatrix, spec: &SearchSpec) -> Result<SearchResult> {
    validate_spec(state, spec)?;
    let obj = Objective {
        state,
        criterion: &spec.criterion,
        fixed: &spec.fixed,
        free: &spec.free,
    };
    let d = spec.free.len();
    let mut evaluations = 0usize;
    let mut trace: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let push_best = |best: &mut Option<(f64, Vec<f64>)>,
                         trace: &mut Vec<(Vec<f64>, f64)>,
                         x: &[f64],
                         v: f64| {
        let replace = match best {
            None => true,
            Some((bv, bx)) => better((v, x), (*bv, bx)),
        };
        if replace {
            *best = Some((v, x.to_vec()));
            trace.push((x.to_vec(), v));
        }
    };

    // Grid phase.
    let mut grid_best: Option<(f64, Vec<f64>)> = None;
    if matches!(spec.strategy, Strategy::Grid | Strategy::GridThenSimplex) {
        let res = spec.grid_resolution;
        let cells = res.checked_pow(d as u32).filter(|&c| c <= MAX_CELLS).ok_or_else(|| {
            Error::invalid(
                "search",
                format!("grid of {res}^{d} cells exceeds the {MAX_CELLS} cell cap"),
            )
        })?;
        let coords = |idx: usize| -> Vec<f64> {
            let mut x = Vec::with_capacity(d);
            let mut rest = idx;
            for k in (0..d).rev() {
                let i = rest / res.pow(k as u32);
                rest %= res.pow(k as u32);
                let p = &spec.free[d - 1 - k];
                let t = i as f64 / (res - 1) as f64;
                x.push(p.lo + t * (p.hi - p.lo));
            }
            x
        };
        let values: Vec<Result<f64>> = (0..cells)
            .into_par_iter()
            .map(|idx| obj.eval(&coords(idx)))
            .collect();
        evaluations += cells;
        for (idx, value) in values.into_iter().enumerate() {
            let v = value?;
            let x = coords(idx);
            push_best(&mut grid_best, &mut trace, &x, v);
        }
        best = grid_best.clone();
    }

    // Simplex phase.
    if matches!(spec.strategy, Strategy::Simplex | Strategy::GridThenSimplex) {
        let x0 = match &grid_best {
            Some((_, x)) => x.clone(),
            None => spec.free.iter().map(|p| 0.5 * (p.lo + p.hi)).collect(),
        };
        let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
        let mut starts = vec![x0.clone()];
        for _ in 0..3 {
            let mut s = x0.clone();
            for (p, v) in spec.free.iter().zip(s.iter_mut()) {
                let span = p.hi - p.lo;
                *v += rng.random_range(-0.05..=0.05) * span;
            }
            obj.clamp(&mut s);
            starts.push(s);
        }
        for start in starts {
            let (v, x, used) = nelder_mead(&obj, &start, spec.max_iters)?;
            evaluations += used;
            push_best(&mut best, &mut trace, &x, v);
        }
    }

    let (cached, x) = best.expect("strategies always produce a candidate");
    // Re-verify the incumbent by evaluating it afresh.
    let verified = obj.eval(&x)?;
    evaluations += 1;
    if (verified - cached).abs() > 1e-12 * cached.abs().max(1.0) {
        return Err(Error::invalid(
            "search result",
            format!("re-evaluated best {verified:.17e} drifted from cached {cached:.17e}"),
        ));
    }
    let mut best_params = spec.fixed.clone();
    for (p, &v) in spec.free.iter().zip(&x) {
        best_params.insert(p.name.clone(), v);
    }
    Ok(SearchResult {
        best_value: verified,
        best_params,
        evaluations,
        trace: Some(trace),
    })
}

/// Bounded Nelder-Mead from one starting point. Returns the best vertex, its
/// value, and the number of evaluations used.
fn nelder_mead(obj: &Objective<'_>, start: &[f64], max_iters: usize) -> Result<(f64, Vec<f64>, usize)> {
    let d = start.len();
    let mut used = 0usize;
    let mut eval = |x: &[f64]| -> Result<f64> {
        used += 1;
        obj.eval(x)
    };

    // Initial simplex: offset each coordinate by 5% of its range, flipping
    // direction when that would leave the box.
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(d + 1);
    let v0 = eval(start)?;
    simplex.push((v0, start.to_vec()));
    for i in 0..d {
        let p = &obj.free[i];
        let span = (p.hi - p.lo).max(1e-12);
        let step = 0.05 * span;
        let mut x = start.to_vec();
        x[i] = if x[i] + step <= p.hi { x[i] + step } else { x[i] - step };
        x[i] = x[i].clamp(p.lo, p.hi);
        let v = eval(&x)?;
        simplex.push((v, x));
    }

    let order = |s: &mut Vec<(f64, Vec<f64>)>| {
        s.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then_with(|| if lex_less(&a.1, &b.1) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater })
        });
    };

    for _ in 0..max_iters {
        order(&mut simplex);
        // Convergence: simplex collapsed in both value and extent.
        let spread = simplex[d].0 - simplex[0].0;
        let diam: f64 = (0..d)
            .map(|i| {
                simplex
                    .iter()
                    .map(|(_, x)| x[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max);
        if spread.abs() < 1e-14 && diam < 1e-10 {
            break;
        }

        let mut centroid = vec![0.0f64; d];
        for (_, x) in simplex.iter().take(d) {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let blend = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&worst.1)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            obj.clamp(&mut x);
            x
        };

        let xr = blend(1.0);
        let vr = eval(&xr)?;
        if vr < simplex[0].0 {
            let xe = blend(2.0);
            let ve = eval(&xe)?;
            simplex[d] = if ve < vr { (ve, xe) } else { (vr, xr) };
        } else if vr < simplex[d - 1].0 {
            simplex[d] = (vr, xr);
        } else {
            let xc = if vr < worst.0 { blend(0.5) } else { blend(-0.5) };
            let vc = eval(&xc)?;
            if vc < vr.min(worst.0) {
                simplex[d] = (vc, xc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].1.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut x: Vec<f64> = best
                        .iter()
                        .zip(&entry.1)
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    obj.clamp(&mut x);
                    let v = eval(&x)?;
                    *entry = (v, x);
                }
            }
        }
    }
    order(&mut simplex);
    let (v, x) = simplex.swap_remove(0);
    Ok((v, x, used))
}

// ---------------------------------------------------------------------------
// Scanning
// ---------------------------------------------------------------------------

/// One scan axis: a named criterion parameter and its sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl ScanAxis {
    /// Inclusive linear spacing with `n >= 2` points.
    pub fn linspace(name: impl Into<String>, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(
                "scan axis",
                format!("need n >= 2 finite endpoints, got n = {n}, [{lo}, {hi}]"),
            ));
        }
        let values = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        Ok(ScanAxis { name: name.into(), values })
    }
}

/// One scan cell: the axis coordinates and either a value or the error text
/// for that cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub coords: Vec<f64>,
    pub value: Option<f64>,
    pub error: Option<String>,
}

/// Dense criterion table over one or two axes, row-major in axis order
/// (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub axes: Vec<ScanAxis>,
    pub fixed: BTreeMap<String, f64>,
    pub cells: Vec<ScanCell>,
}

/// Evaluates the criterion on a dense axis grid. Cells whose evaluation
/// fails carry the error text instead of a value; the scan always completes.
pub fn scan(
    state: &DensityMatrix,
    criterion: &CriterionSpec,
    fixed: &BTreeMap<String, f64>,
    axes: &[ScanAxis],
) -> Result<ScanTable> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::invalid(
            "scan",
            format!("need one or two axes, got {}", axes.len()),
        ));
    }
    let expected = criterion.param_names(state)?;
    let mut covered: Vec<&str> = fixed.keys().map(|s| s.as_str()).collect();
    covered.extend(axes.iter().map(|a| a.name.as_str()));
    covered.sort_unstable();
    covered.dedup();
    let mut wanted: Vec<&str> = expected.iter().map(|s| s.as_str()).collect();
    wanted.sort_unstable();
    if covered != wanted {
        return Err(Error::invalid(
            "scan",
            format!(
                "axes plus fixed parameters must cover exactly {{{}}}, got {{{}}}",
                wanted.join(", "),
                covered.join(", ")
            ),
        ));
    }
    let cells_total: usize = axes.iter().map(|a| a.values.len()).product();
    if cells_total == 0 || cells_total > MAX_CELLS {
        return Err(Error::invalid(
            "scan",
            format!("scan of {cells_total} cells outside 1..={MAX_CELLS}"),
        ));
    }
    let inner = if axes.len() == 2 { axes[1].values.len() } else { 1 };
    let cells: Vec<ScanCell> = (0..cells_total)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / inner, idx % inner);
            let mut coords = vec![axes[0].values[i]];
            let mut params = fixed.clone();
            params.insert(axes[0].name.clone(), axes[0].values[i]);
            if axes.len() == 2 {
                coords.push(axes[1].values[j]);
                params.insert(axes[1].name.clone(), axes[1].values[j]);
            }
            match evaluate_criterion(state, criterion, &params) {
                Ok(v) => ScanCell { coords, value: Some(v), error: None },
                Err(e) => ScanCell { coords, value: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(ScanTable {
        axes: axes.to_vec(),
        fixed: fixed.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_state, optimal_point, StateKind, StateSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn fock(n: usize) -> DensityMatrix {
        make_state(&StateSpec::new(StateKind::Fock { n })).unwrap()
    }

    fn fixed(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    fn qq_radial_spec(strategy: Strategy, resolution: usize) -> SearchSpec {
        SearchSpec {
            criterion: CriterionSpec::QqPair,
            fixed: fixed(&[("re_a1", 0.0), ("im_a1", 0.0), ("im_a2", 0.0)]),
            free: vec![FreeParam::new("re_a2", 0.0, 4.0)],
            strategy,
            grid_resolution: resolution,
            max_iters: 200,
            seed: 7,
        }
    }

    #[test]
    fn fock_minimum_location_and_value() {
        for n in [1usize, 2, 4] {
            let state = fock(n);
            let r = minimize(&state, &qq_radial_spec(Strategy::GridThenSimplex, 81)).unwrap();
            let loc = r.best_params["re_a2"];
            assert!((loc - (2.0 * n as f64).sqrt()).abs() < 1e-3, "n = {n}: loc = {loc}");
            let nf: f64 = (1..=n).product::<usize>() as f64;
            let expect = -(-2.0 * n as f64).exp() * (n as f64 / 2.0).powi(2 * n as i32)
                / (PI * nf).powi(2);
            assert_relative_eq!(r.best_value, expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn refinement_never_loses_to_the_grid() {
        let state = fock(1);
        let grid = minimize(&state, &qq_radial_spec(Strategy::Grid, 7)).unwrap();
        let refined = minimize(&state, &qq_radial_spec(Strategy::GridThenSimplex, 7)).unwrap();
        assert!(refined.best_value <= grid.best_value);
        // The coarse grid cannot sit on the optimum; refinement must win.
        assert!(refined.best_value < grid.best_value);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let state = fock(2);
        let spec = qq_radial_spec(Strategy::GridThenSimplex, 21);
        let a = minimize(&state, &spec).unwrap();
        let b = minimize(&state, &spec).unwrap();
        assert_eq!(a, b);
        let json_a = serde_json::to_string(&a).unwrap();
        let json_b = serde_json::to_string(&b).unwrap();
        assert_eq!(json_a, json_b);
    }

    #[test]
    fn coherent_states_admit_no_violation() {
        let state =
            make_state(&StateSpec::with_cutoff(StateKind::Coherent { beta: C64::new(0.6, 0.3) }, 32))
                .unwrap();
        let mut spec = qq_radial_spec(Strategy::GridThenSimplex, 41);
        spec.free = vec![
            FreeParam::new("re_a2", -2.0, 2.0),
            FreeParam::new("im_a2", -2.0, 2.0),
        ];
        spec.fixed = fixed(&[("re_a1", 0.0), ("im_a1", 0.0)]);
        let r = minimize(&state, &spec).unwrap();
        assert!(r.best_value >= -1e-9, "coherent violation: {:.3e}", r.best_value);
    }

    #[test]
    fn squeezed_optimum_matches_closed_form() {
        let spec_state = StateSpec::new(StateKind::SqueezedVacuum { r: 0.57, phi: 0.0 });
        let state = make_state(&spec_state).unwrap();
        let expect = optimal_point(&spec_state).unwrap();
        let r = minimize(&state, &qq_radial_spec(Strategy::GridThenSimplex, 81)).unwrap();
        assert!(r.best_value < 0.0);
        assert!(
            (r.best_params["re_a2"] - expect.re).abs() < 1e-3,
            "got {}, want {}",
            r.best_params["re_a2"],
            expect.re
        );
    }

    #[test]
    fn trace_is_monotone_and_ends_at_the_best() {
        let state = fock(1);
        let r = minimize(&state, &qq_radial_spec(Strategy::GridThenSimplex, 21)).unwrap();
        let trace = r.trace.as_ref().unwrap();
        assert!(!trace.is_empty());
        for w in trace.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        assert_eq!(trace.last().unwrap().1, r.best_value);
    }

    #[test]
    fn uniform_multimode_criterion_reduces_and_detects() {
        // One mode: identical to the plain pair criterion.
        let state = fock(1);
        let params = fixed(&[("re_a1", 0.0), ("im_a1", 0.0), ("re_a2", 1.1), ("im_a2", -0.3)]);
        let uni = evaluate_criterion(&state, &CriterionSpec::QqMultiUniform, &params).unwrap();
        let pair = evaluate_criterion(&state, &CriterionSpec::QqPair, &params).unwrap();
        assert_eq!(uni, pair);

        // Tripartite odd cat: searching the shared first amplitude against
        // the origin certifies nonclassicality.
        let cat = make_state(&StateSpec::new(StateKind::Cat {
            gamma: C64::new(1.0, 0.0),
            modes: 3,
            parity: -1,
        }))
        .unwrap();
        let spec = SearchSpec {
            criterion: CriterionSpec::QqMultiUniform,
            fixed: fixed(&[("im_a1", 0.0), ("re_a2", 0.0), ("im_a2", 0.0)]),
            free: vec![FreeParam::new("re_a1", 0.0, 3.0)],
            strategy: Strategy::GridThenSimplex,
            grid_resolution: 81,
            max_iters: 200,
            seed: 0,
        };
        let r = minimize(&cat, &spec).unwrap();
        assert!(r.best_value < -1e-5, "best = {:.3e}", r.best_value);
    }

    #[test]
    fn spec_validation_catches_mistakes() {
        let state = fock(1);
        let mut spec = qq_radial_spec(Strategy::Grid, 21);
        spec.grid_resolution = 2;
        assert!(minimize(&state, &spec).is_err());

        let mut spec = qq_radial_spec(Strategy::Grid, 21);
        spec.free[0].name = "re_a9".into();
        assert!(minimize(&state, &spec).is_err());

        let mut spec = qq_radial_spec(Strategy::Grid, 21);
        spec.fixed.insert("re_a2".into(), 1.0);
        assert!(minimize(&state, &spec).is_err());

        let mut spec = qq_radial_spec(Strategy::Grid, 21);
        spec.free[0].hi = f64::INFINITY;
        assert!(minimize(&state, &spec).is_err());
    }

    #[test]
    fn scan_matches_direct_evaluation_and_tolerates_bad_cells() {
        let state = fock(1);
        // Width 0 in the first cell is invalid for this criterion; the scan
        // must keep going.
        let axes = [
            ScanAxis { name: "sigma".into(), values: vec![0.0, 0.5, 1.0] },
            ScanAxis::linspace("re_alpha", 0.0, 1.0, 3).unwrap(),
        ];
        let fx = fixed(&[("im_alpha", 0.0)]);
        let table = scan(&state, &CriterionSpec::Wq, &fx, &axes).unwrap();
        assert_eq!(table.cells.len(), 9);
        for (idx, cell) in table.cells.iter().enumerate() {
            let (i, j) = (idx / 3, idx % 3);
            assert_eq!(cell.coords, vec![axes[0].values[i], axes[1].values[j]]);
            if i == 0 {
                assert!(cell.value.is_none() && cell.error.is_some());
            } else {
                let direct = wq_criterion(
                    &state,
                    C64::new(axes[1].values[j], 0.0),
                    axes[0].values[i],
                )
                .unwrap();
                assert_eq!(cell.value, Some(direct));
                assert!(cell.error.is_none());
            }
        }

        // Axis/fixed mismatch is a structural error, not a cell error.
        assert!(scan(&state, &CriterionSpec::Wq, &BTreeMap::new(), &axes).is_err());
    }
}
