//! Monte Carlo model of the correlation measurement: the signal is split on
//! a balanced tap, each arm is mixed with a local oscillator and watched by
//! a click detector with efficiency `eta`, dark-count parameter `delta`,
//! and an optional two-photon-absorption nonlinearity `chi`.
//!
//! Joint no-click statistics are sampled directly from their exact
//! probabilities (the closed form is exact for this scheme), so the
//! simulation targets finite-statistics behavior of the witness rather
//! than photon transport. Referred back to the signal mode, each detector
//! contributes exponent coefficients `eta/2` (and `chi/4` on the quadratic
//! term, keeping only the single-arm response), so a matrix diagonal at
//! full efficiency samples the width-1 distribution and every entry is a
//! genuine probability.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expectation::{
    gaussian_pair_expectation, nonlinear_pair_expectation, DEFAULT_NONLINEAR_ORDER,
};
use crate::phase::PhasePoint;
use crate::special::ln_factorials;
use crate::state::DensityMatrix;

/// How far outside [0, 1] a computed probability may land before it is an
/// error instead of a rounding artifact to clamp away.
const PROBABILITY_SLACK: f64 = 1e-10;

/// Click-detector response parameters, validated up to a photon-number
/// cutoff at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    eta: f64,
    delta: f64,
    chi: f64,
    cutoff: usize,
}

impl DetectorModel {
    /// Validates `eta` in (0, 1], `delta >= 0`, `chi >= 0`, and the
    /// nonlinearity bound `chi <= e*eta^2/(4*cutoff)`; the no-click
    /// eigenvalues are then checked to lie in [0, 1] for all Fock levels up
    /// to `cutoff`.
    pub fn new(eta: f64, delta: f64, chi: f64, cutoff: usize) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
            return Err(Error::invalid(
                "detector",
                format!("efficiency must be in (0, 1], got {eta}"),
            ));
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::invalid(
                "detector",
                format!("dark-count parameter must be >= 0, got {delta}"),
            ));
        }
        if !chi.is_finite() || chi < 0.0 {
            return Err(Error::invalid(
                "detector",
                format!("nonlinearity must be >= 0, got {chi}"),
            ));
        }
        if cutoff == 0 {
            return Err(Error::invalid("detector", "validation cutoff must be >= 1"));
        }
        let bound = std::f64::consts::E * eta * eta / (4.0 * cutoff as f64);
        if chi > bound {
            return Err(Error::domain(format!(
                "nonlinearity {chi:.3e} exceeds the validity bound e*eta^2/(4*cutoff) = {bound:.3e} \
                 for eta = {eta}, cutoff = {cutoff}"
            )));
        }
        let model = DetectorModel { eta, delta, chi, cutoff };
        for (m, pi) in model.noclick_eigenvalues(cutoff).iter().enumerate() {
            if !(0.0..=1.0).contains(pi) {
                return Err(Error::domain(format!(
                    "no-click eigenvalue {pi:.6e} at Fock level {m} is outside [0, 1]"
                )));
            }
        }
        Ok(model)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Photon-number range the response was validated for.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Eigenvalues of the no-click element on Fock levels 0..=up_to:
    /// `pi_m = e^{-delta} * sum_j m!/(j!(m-2j)!) chi^j (1-eta)^{m-2j}`,
    /// the level-m coefficient of `m! e^{(1-eta)z + chi z^2}`. Every term
    /// is nonnegative, so the sum needs no cancellation care.
    pub fn noclick_eigenvalues(&self, up_to: usize) -> Vec<f64> {
        let lnf = ln_factorials(up_to);
        let damp = (-self.delta).exp();
        (0..=up_to)
            .map(|m| {
                let mut sum = 0.0f64;
                for j in 0..=m / 2 {
                    let k = m - 2 * j;
                    let lin = if k == 0 { 1.0 } else { (1.0 - self.eta).powi(k as i32) };
                    let non = if j == 0 { 1.0 } else { self.chi.powi(j as i32) };
                    if lin == 0.0 || non == 0.0 {
                        continue;
                    }
                    sum += (lnf[m] - lnf[j] - lnf[k]).exp() * lin * non;
                }
                damp * sum
            })
            .collect()
    }
}

/// Beam-splitter and local-oscillator layout of one measurement run.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    t: C64,
    r: C64,
    lo_amplitudes: Vec<C64>,
    shots: u64,
    seed: u64,
}

impl SchemeConfig {
    /// Requires `|t|^2 + |r|^2 = 1` within 1e-12, at least one LO
    /// amplitude, and `shots >= 1`.
    pub fn new(t: C64, r: C64, lo_amplitudes: Vec<C64>, shots: u64, seed: u64) -> Result<Self> {
        let unitarity = t.norm_sqr() + r.norm_sqr();
        if !unitarity.is_finite() || (unitarity - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "scheme",
                format!("|t|^2 + |r|^2 must be 1 within 1e-12, got {unitarity:.15}"),
            ));
        }
        if lo_amplitudes.is_empty() {
            return Err(Error::invalid("scheme", "need at least one LO amplitude"));
        }
        if lo_amplitudes.iter().any(|b| !b.re.is_finite() || !b.im.is_finite()) {
            return Err(Error::invalid("scheme", "LO amplitudes must be finite"));
        }
        if shots == 0 {
            return Err(Error::invalid("scheme", "shots must be >= 1"));
        }
        Ok(SchemeConfig { t, r, lo_amplitudes, shots, seed })
    }

    pub fn t(&self) -> C64 {
        self.t
    }

    pub fn r(&self) -> C64 {
        self.r
    }

    pub fn lo_amplitudes(&self) -> &[C64] {
        &self.lo_amplitudes
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Phase-space points probed by the LO amplitudes:
/// `alpha_i = -r sqrt(2) beta_i / t`. Errors when `t = 0`.
pub fn lo_to_alpha(config: &SchemeConfig) -> Result<Vec<C64>> {
    if config.t.norm() == 0.0 {
        return Err(Error::domain(
            "beam splitter transmission t = 0 leaves no signal path to the detectors",
        ));
    }
    let scale = -config.r * std::f64::consts::SQRT_2 / config.t;
    Ok(config.lo_amplitudes.iter().map(|b| scale * b).collect())
}

fn clamp_probability(p: f64, what: &str) -> Result<f64> {
    if !p.is_finite() || p < -PROBABILITY_SLACK || p > 1.0 + PROBABILITY_SLACK {
        return Err(Error::domain(format!(
            "{what} evaluated to {p:.6e}, outside [0, 1] beyond rounding slack"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Exact probability that the detector pair probing `a_i` and `a_j` both
/// stay silent: `e^{-2 delta}` times the pair expectation with per-arm
/// exponent coefficients `eta/2` (and `chi/4` when nonlinear). Values are
/// clamped into [0, 1] within 1e-10; larger excursions are errors. With
/// `chi > 0` the state's Fock cutoff must not exceed the range the
/// detector was validated for.
pub fn joint_noclick_probability(
    state: &DensityMatrix,
    det: &DetectorModel,
    a_i: C64,
    a_j: C64,
) -> Result<f64> {
    if state.mode_count() != 1 {
        return Err(Error::invalid(
            "signal state",
            format!("the scheme probes a single mode, got {}", state.mode_count()),
        ));
    }
    let dark = (-2.0 * det.delta).exp();
    let expectation = if det.chi == 0.0 {
        let p1 = PhasePoint::single(a_i, det.eta / 2.0)?;
        let p2 = PhasePoint::single(a_j, det.eta / 2.0)?;
        gaussian_pair_expectation(state, &p1, &p2)?
    } else {
        if state.cutoff() > det.cutoff {
            return Err(Error::domain(format!(
                "state occupies Fock levels up to {} but the nonlinear response was only \
                 validated up to {}; construct the detector with a larger cutoff",
                state.cutoff(),
                det.cutoff
            )));
        }
        nonlinear_pair_expectation(state, a_i, a_j, det.eta / 2.0, det.chi / 4.0, DEFAULT_NONLINEAR_ORDER)?
    };
    clamp_probability(dark * expectation, "joint no-click probability")
}

/// Draws `shots` Bernoulli samples at the exact joint no-click probability
/// and returns the observed frequency with its binomial standard error
/// `sqrt(p_hat (1 - p_hat) / shots)`. Reproducible from `seed`.
pub fn sample_entry(
    state: &DensityMatrix,
    det: &DetectorModel,
    a_i: C64,
    a_j: C64,
    shots: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if shots == 0 {
        return Err(Error::invalid("sampler", "shots must be >= 1"));
    }
    let p = joint_noclick_probability(state, det, a_i, a_j)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let clicks = Binomial::new(shots, p)
        .map_err(|e| Error::invalid("sampler", e.to_string()))?
        .sample(&mut rng);
    let estimate = clicks as f64 / shots as f64;
    let std_error = (estimate * (1.0 - estimate) / shots as f64).sqrt();
    Ok((estimate, std_error))
}

/// Sampled phase-space matrix: joint no-click frequencies with their
/// binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedMatrix {
    values: Array2<f64>,
    std_errors: Array2<f64>,
    shots: u64,
}

impl EstimatedMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn std_errors(&self) -> &Array2<f64> {
        &self.std_errors
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }
}

/// Samples every entry of the matrix over the scheme's LO list. Each pair
/// `(i, j)` with `i <= j` is sampled once with its own seed derived from
/// the scheme seed, then mirrored, so the estimate is symmetric and the
/// run is reproducible; diagonal entries probe the same LO with both
/// detectors.
pub fn estimate_matrix(
    state: &DensityMatrix,
    det: &DetectorModel,
    config: &SchemeConfig,
) -> Result<EstimatedMatrix> {
    let alphas = lo_to_alpha(config)?;
    let k = alphas.len();
    let mut seeder = ChaCha12Rng::seed_from_u64(config.seed);
    let mut jobs = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            jobs.push((i, j, seeder.random::<u64>()));
        }
    }
    let sampled: Vec<Result<(usize, usize, f64, f64)>> = jobs
        .par_iter()
        .map(|&(i, j, seed)| {
            let (est, se) = sample_entry(state, det, alphas[i], alphas[j], config.shots, seed)?;
            Ok((i, j, est, se))
        })
        .collect();
    let mut values = Array2::zeros((k, k));
    let mut std_errors = Array2::zeros((k, k));
    for entry in sampled {
        let (i, j, est, se) = entry?;
        values[[i, j]] = est;
        values[[j, i]] = est;
        std_errors[[i, j]] = se;
        std_errors[[j, i]] = se;
    }
    Ok(EstimatedMatrix { values, std_errors, shots: config.shots })
}

/// Bootstrap summary of the determinant of an estimated matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub det_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn truncated_normal(rng: &mut ChaCha12Rng, mean: f64, sd: f64) -> f64 {
    let dist = Normal::new(mean, sd).expect("finite bootstrap parameters");
    for _ in 0..10_000 {
        let x = dist.sample(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
    mean.clamp(0.0, 1.0)
}

/// Parametric bootstrap of the determinant: each entry is redrawn from a
/// normal law at its estimate and standard error, truncated to [0, 1],
/// keeping the matrix symmetric. Returns the mean determinant and the
/// central 95% interval over `resamples >= 100` redraws.
pub fn bootstrap_det(est: &EstimatedMatrix, resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if resamples < 100 {
        return Err(Error::invalid(
            "bootstrap",
            format!("need >= 100 resamples, got {resamples}"),
        ));
    }
    let k = est.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut dets = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut m = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let (p, se) = (est.values[[i, j]], est.std_errors[[i, j]]);
                let x = if se == 0.0 { p } else { truncated_normal(&mut rng, p, se) };
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        dets.push(m.lu().determinant());
    }
    let det_mean = dets.iter().sum::<f64>() / resamples as f64;
    dets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo_idx = (0.025 * resamples as f64).floor() as usize;
    let hi_idx = ((0.975 * resamples as f64).ceil() as usize).saturating_sub(1);
    Ok(BootstrapSummary {
        det_mean,
        ci_low: dets[lo_idx],
        ci_high: dets[hi_idx.min(resamples - 1)],
    })
}
