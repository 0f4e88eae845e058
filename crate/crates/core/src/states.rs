//! Named state families: truncated Fock-basis construction, closed-form
//! Husimi Q functions, and known optimal witness points.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhasePoint;
use crate::special::{bessel_i0, ln_factorials};
use crate::state::{coherent_vector, DensityMatrix};

/// Truncation tail allowed when the library picks the cutoff itself.
const AUTO_TAIL: f64 = 1e-12;
/// Truncation tail allowed for a user-supplied cutoff.
const USER_TAIL: f64 = 1e-11;
/// Sanity ceiling on per-mode dimensions.
const MAX_CUTOFF: usize = 2048;

/// The supported state families and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateKind {
    /// Number state `|n>`.
    Fock { n: usize },
    /// Coherent state `|beta>`.
    Coherent { beta: C64 },
    /// Thermal state with mean photon number `nbar`.
    Thermal { nbar: f64 },
    /// Squeezed vacuum with squeezing `r >= 0` and phase `phi`.
    SqueezedVacuum {
        r: f64,
        #[serde(default)]
        phi: f64,
    },
    /// N-mode superposition `|gamma>^(xN) + parity |-gamma>^(xN)`,
    /// `parity = +1` (even) or `-1` (odd).
    Cat { gamma: C64, modes: usize, parity: i8 },
    /// Two-mode squeezed vacuum with fully diffused pump phase: the diagonal
    /// mixture `(1-|lambda|^2) sum_n |lambda|^(2n) |n,n><n,n|`.
    PhaseDiffusedTmsv { lambda: C64 },
}

impl StateKind {
    pub fn mode_count(&self) -> usize {
        match self {
            StateKind::Cat { modes, .. } => *modes,
            StateKind::PhaseDiffusedTmsv { .. } => 2,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            StateKind::Fock { .. } => Ok(()),
            StateKind::Coherent { beta } => {
                if !beta.re.is_finite() || !beta.im.is_finite() {
                    return Err(Error::invalid("state spec", "beta must be finite"));
                }
                Ok(())
            }
            StateKind::Thermal { nbar } => {
                if !nbar.is_finite() || *nbar < 0.0 {
                    return Err(Error::invalid("state spec", format!("nbar must be >= 0, got {nbar}")));
                }
                Ok(())
            }
            StateKind::SqueezedVacuum { r, phi } => {
                if !r.is_finite() || *r < 0.0 {
                    return Err(Error::invalid("state spec", format!("r must be >= 0, got {r}")));
                }
                if !phi.is_finite() {
                    return Err(Error::invalid("state spec", "phi must be finite"));
                }
                Ok(())
            }
            StateKind::Cat { gamma, modes, parity } => {
                if !gamma.re.is_finite() || !gamma.im.is_finite() {
                    return Err(Error::invalid("state spec", "gamma must be finite"));
                }
                if *modes == 0 {
                    return Err(Error::invalid("state spec", "cat needs at least one mode"));
                }
                if *parity != 1 && *parity != -1 {
                    return Err(Error::invalid("state spec", format!("parity must be +1 or -1, got {parity}")));
                }
                if *parity == -1 && gamma.norm_sqr() == 0.0 {
                    return Err(Error::invalid(
                        "state spec",
                        "odd cat with gamma = 0 is the zero vector",
                    ));
                }
                Ok(())
            }
            StateKind::PhaseDiffusedTmsv { lambda } => {
                if !lambda.re.is_finite() || !lambda.im.is_finite() || lambda.norm() >= 1.0 {
                    return Err(Error::invalid(
                        "state spec",
                        format!("|lambda| must be < 1, got {}", lambda.norm()),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// A state family plus an optional per-mode cutoff override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    #[serde(flatten)]
    pub kind: StateKind,
    #[serde(default)]
    pub cutoff: Option<usize>,
}

impl StateSpec {
    pub fn new(kind: StateKind) -> Self {
        StateSpec { kind, cutoff: None }
    }

    pub fn with_cutoff(kind: StateKind, cutoff: usize) -> Self {
        StateSpec { kind, cutoff: Some(cutoff) }
    }
}

/// Smallest dimension holding all but `tail` of a Poisson distribution with
/// mean `x` (the photon distribution of a coherent state of energy `x`).
fn poisson_dim(x: f64, tail: f64) -> usize {
    if x == 0.0 {
        return 1;
    }
    let mut p = (-x).exp();
    if p == 0.0 {
        // Very energetic: normal tail bound, mean + 10 sigma + margin.
        return (x + 10.0 * x.sqrt() + 25.0).ceil() as usize;
    }
    let mut cum = p;
    let mut n = 0usize;
    while (1.0 - cum > tail || (n as f64) < x) && n < MAX_CUTOFF {
        n += 1;
        p *= x / n as f64;
        cum += p;
    }
    n + 1
}

fn resolve_cutoff(
    needed_auto: usize,
    requested: Option<usize>,
    sufficient: impl Fn(usize) -> bool,
) -> Result<usize> {
    match requested {
        None => Ok(needed_auto.min(MAX_CUTOFF)),
        Some(c) => {
            if c == 0 || c > MAX_CUTOFF {
                return Err(Error::invalid(
                    "cutoff",
                    format!("must be in 1..={MAX_CUTOFF}, got {c}"),
                ));
            }
            if !sufficient(c) {
                return Err(Error::Truncation(format!(
                    "cutoff {c} leaves too much truncated mass for this state; \
                     use at least {needed_auto} or omit the cutoff"
                )));
            }
            Ok(c)
        }
    }
}

/// Builds the density matrix of a named family at a cutoff that holds its
/// truncation tail below 1e-11 (1e-12 when the cutoff is chosen
/// automatically). An explicitly requested cutoff that cannot hold the tail
/// is an error rather than a silent accuracy loss.
pub fn make_state(spec: &StateSpec) -> Result<DensityMatrix> {
    spec.kind.validate()?;
    let one = C64::new(1.0, 0.0);
    match &spec.kind {
        StateKind::Fock { n } => {
            let needed = n + 1;
            let cutoff = resolve_cutoff(needed, spec.cutoff, |c| c >= needed)?;
            let mut v = Array1::<C64>::zeros(cutoff);
            v[*n] = one;
            DensityMatrix::pure_superposition(cutoff, vec![(one, vec![v])], Some(*n))
        }
        StateKind::Coherent { beta } => {
            let x = beta.norm_sqr();
            let auto = poisson_dim(x, AUTO_TAIL).max(8);
            let cutoff = resolve_cutoff(auto, spec.cutoff, |c| c >= poisson_dim(x, USER_TAIL))?;
            let v = coherent_vector(*beta, cutoff);
            DensityMatrix::pure_superposition(cutoff, vec![(one, vec![v])], Some(cutoff - 1))
        }
        StateKind::Thermal { nbar } => {
            if *nbar == 0.0 {
                let cutoff = resolve_cutoff(1, spec.cutoff, |_| true)?;
                let mut v = Array1::<C64>::zeros(cutoff);
                v[0] = one;
                return DensityMatrix::product_mixture(cutoff, vec![(1.0, vec![v])], None);
            }
            let q = nbar / (1.0 + nbar);
            let geom_dim = |tail: f64| ((tail.ln() / q.ln()).ceil() as usize).max(8);
            let auto = geom_dim(AUTO_TAIL);
            let cutoff = resolve_cutoff(auto, spec.cutoff, |c| c >= geom_dim(USER_TAIL))?;
            let comps = (0..cutoff)
                .map(|n| {
                    let mut v = Array1::<C64>::zeros(cutoff);
                    v[n] = one;
                    ((1.0 - q) * q.powi(n as i32), vec![v])
                })
                .collect();
            DensityMatrix::product_mixture(cutoff, comps, None)
        }
        StateKind::SqueezedVacuum { r, phi } => {
            if *r == 0.0 {
                let cutoff = resolve_cutoff(8, spec.cutoff, |_| true)?;
                let mut v = Array1::<C64>::zeros(cutoff);
                v[0] = one;
                return DensityMatrix::pure_superposition(cutoff, vec![(one, vec![v])], None);
            }
            let t = r.tanh();
            let ratio = C64::new(phi.cos(), phi.sin()) * (-t);
            let amps_to = |cutoff: usize| -> (Array1<C64>, f64) {
                let mut v = Array1::<C64>::zeros(cutoff);
                let mut c = C64::new(1.0 / r.cosh().sqrt(), 0.0);
                let mut cum = 0.0f64;
                let mut n = 0usize;
                loop {
                    let idx = 2 * n;
                    if idx >= cutoff {
                        break;
                    }
                    v[idx] = c;
                    cum += c.norm_sqr();
                    let nf = n as f64;
                    c *= ratio * ((2.0 * nf + 1.0) * (2.0 * nf + 2.0)).sqrt()
                        / (2.0 * (nf + 1.0));
                    n += 1;
                }
                (v, 1.0 - cum)
            };
            let auto = {
                let mut c = 8usize;
                while c < MAX_CUTOFF && amps_to(c).1 > AUTO_TAIL {
                    c += 8;
                }
                c
            };
            let cutoff = resolve_cutoff(auto, spec.cutoff, |c| amps_to(c).1 <= USER_TAIL)?;
            let (v, _) = amps_to(cutoff);
            DensityMatrix::pure_superposition(cutoff, vec![(one, vec![v])], None)
        }
        StateKind::Cat { gamma, modes, parity } => {
            let x = gamma.norm_sqr();
            let g = gamma.norm();
            let auto = (32usize).max((x + 6.0 * g + 10.0).ceil() as usize);
            // The superposition constructor's trace gate is the real check;
            // this pre-check produces an actionable message instead.
            let per_mode_ok =
                |c: usize| c >= poisson_dim(x, USER_TAIL / (2.0 * *modes as f64));
            let cutoff = resolve_cutoff(auto, spec.cutoff, per_mode_ok)?;
            let p = f64::from(*parity);
            let norm_sq = 2.0 * (1.0 + p * (-2.0 * *modes as f64 * x).exp());
            let c = C64::new(1.0 / norm_sq.sqrt(), 0.0);
            let plus: Vec<Array1<C64>> = (0..*modes).map(|_| coherent_vector(*gamma, cutoff)).collect();
            let minus: Vec<Array1<C64>> = (0..*modes).map(|_| coherent_vector(-*gamma, cutoff)).collect();
            DensityMatrix::pure_superposition(
                cutoff,
                vec![(c, plus), (C64::new(p, 0.0) * c, minus)],
                Some(cutoff - 1),
            )
        }
        StateKind::PhaseDiffusedTmsv { lambda } => {
            let q = lambda.norm_sqr();
            if q == 0.0 {
                let cutoff = resolve_cutoff(8, spec.cutoff, |_| true)?;
                let mut v = Array1::<C64>::zeros(cutoff);
                v[0] = one;
                return DensityMatrix::product_mixture(
                    cutoff,
                    vec![(1.0, vec![v.clone(), v])],
                    None,
                );
            }
            let geom_dim = |tail: f64| ((tail.ln() / q.ln()).ceil() as usize).max(8);
            let auto = geom_dim(AUTO_TAIL);
            let cutoff = resolve_cutoff(auto, spec.cutoff, |c| c >= geom_dim(USER_TAIL))?;
            let comps = (0..cutoff)
                .map(|n| {
                    let mut v = Array1::<C64>::zeros(cutoff);
                    v[n] = one;
                    ((1.0 - q) * q.powi(n as i32), vec![v.clone(), v])
                })
                .collect();
            DensityMatrix::product_mixture(cutoff, comps, None)
        }
    }
}

/// Closed-form Husimi Q function of a family, independent of any truncation.
#[derive(Debug, Clone)]
pub struct AnalyticQ {
    kind: StateKind,
}

/// Closed-form Q evaluator for every supported family (the cutoff in the
/// spec is ignored; nothing here is truncated).
pub fn analytic_q(spec: &StateSpec) -> Result<AnalyticQ> {
    spec.kind.validate()?;
    Ok(AnalyticQ { kind: spec.kind.clone() })
}

impl AnalyticQ {
    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn mode_count(&self) -> usize {
        self.kind.mode_count()
    }

    /// Q at a tuple of amplitudes (one per mode). Nonnegative by
    /// construction of every closed form.
    pub fn q(&self, amplitudes: &[C64]) -> Result<f64> {
        if amplitudes.len() != self.mode_count() {
            return Err(Error::domain(format!(
                "Q needs {} amplitudes, got {}",
                self.mode_count(),
                amplitudes.len()
            )));
        }
        let pi = std::f64::consts::PI;
        match &self.kind {
            StateKind::Fock { n } => {
                let x = amplitudes[0].norm_sqr();
                if x == 0.0 {
                    return Ok(if *n == 0 { 1.0 / pi } else { 0.0 });
                }
                let lf = ln_factorials(*n);
                Ok(((*n as f64) * x.ln() - x - lf[*n]).exp() / pi)
            }
            StateKind::Coherent { beta } => {
                Ok((-(amplitudes[0] - beta).norm_sqr()).exp() / pi)
            }
            StateKind::Thermal { nbar } => {
                let x = amplitudes[0].norm_sqr();
                Ok((-x / (1.0 + nbar)).exp() / (pi * (1.0 + nbar)))
            }
            StateKind::SqueezedVacuum { r, phi } => {
                let a = amplitudes[0];
                let t = r.tanh();
                let rot = C64::new(phi.cos(), phi.sin());
                let quad = (rot * a.conj() * a.conj()).re;
                Ok((-a.norm_sqr() - t * quad).exp() / (pi * r.cosh()))
            }
            StateKind::Cat { gamma, modes, parity } => {
                let x = gamma.norm_sqr();
                let p = f64::from(*parity);
                let s: C64 = amplitudes.iter().sum();
                let z = gamma.conj() * s;
                let mut gauss = -(*modes as f64) * x;
                for a in amplitudes {
                    gauss -= a.norm_sqr();
                }
                let osc = (2.0 * z.re).cosh() + p * (2.0 * z.im).cos();
                let denom = pi.powi(*modes as i32) * (1.0 + p * (-2.0 * *modes as f64 * x).exp());
                Ok(gauss.exp() * osc / denom)
            }
            StateKind::PhaseDiffusedTmsv { lambda } => {
                let q = lambda.norm_sqr();
                let (a1, a2) = (amplitudes[0], amplitudes[1]);
                let bess = bessel_i0(2.0 * lambda.norm() * a1.norm() * a2.norm());
                Ok((1.0 - q) * (-a1.norm_sqr() - a2.norm_sqr()).exp() * bess / (pi * pi))
            }
        }
    }

    /// Q at a phase point; every width must be exactly 1.
    pub fn evaluate(&self, point: &PhasePoint) -> Result<f64> {
        if point.widths().iter().any(|&s| s != 1.0) {
            return Err(Error::domain(
                "analytic Q is defined at width 1 on every mode",
            ));
        }
        self.q(point.amplitudes())
    }
}

/// Known optimal second point for the two-point Q-function determinant test
/// with the first point at the origin.
///
/// - Number state `|n>`: `alpha_2 = sqrt(2n)` (0 for the vacuum).
/// - Squeezed vacuum: `|alpha_2|^2 = (2/lambda) ln((1+lambda)/(1+lambda/2))`
///   with `lambda = tanh r`, directed along the squeezed quadrature
///   (`e^{i phi/2}`); the `r -> 0` limit is 1, where the criterion value
///   degenerates to 0 everywhere.
pub fn optimal_point(spec: &StateSpec) -> Result<C64> {
    spec.kind.validate()?;
    match &spec.kind {
        StateKind::Fock { n } => Ok(C64::new((2.0 * *n as f64).sqrt(), 0.0)),
        StateKind::SqueezedVacuum { r, phi } => {
            let l = r.tanh();
            let mag_sq = if l == 0.0 {
                1.0
            } else {
                (2.0 / l) * ((1.0 + l) / (1.0 + 0.5 * l)).ln()
            };
            let mag = mag_sq.sqrt();
            Ok(mag * C64::new((0.5 * phi).cos(), (0.5 * phi).sin()))
        }
        _ => Err(Error::domain(
            "closed-form optimal points exist for fock and squeezed_vacuum; \
             use the search module for other families",
        )),
    }
}
