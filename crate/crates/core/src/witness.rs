//! Matrices of phase-space distribution values and the positivity
//! diagnostics and named nonclassicality criteria built from them.
//!
//! Every matrix index carries a smoothed phase-space point. An entry pair
//! factors into a classical Gaussian prefactor (depending only on the two
//! points) and a quantum expectation at their barycenter; for any classical
//! state the full matrix is a Gram matrix and therefore positive
//! semidefinite. A negative determinant, leading principal minor, or
//! eigenvalue certifies a nonclassical state.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
#[cfg(test)]
use crate::expectation::gaussian_pair_expectation;
use crate::expectation::{nexp, nonlinear_pair_expectation, DEFAULT_NONLINEAR_ORDER};
use crate::phase::{pair_geometry, PhasePoint};
use crate::state::DensityMatrix;
use crate::states::AnalyticQ;

/// Absolute tolerance below which a positivity diagnostic counts as a
/// certified negativity; sized for double-precision determinants of small
/// (order <= 8) matrices.
pub const POSITIVITY_TOLERANCE: f64 = 1e-9;

/// Largest tolerated asymmetry before a report refuses the matrix.
const SYMMETRY_GATE: f64 = 1e-8;

/// Tightest asymmetry accepted when assembling a matrix from parts.
const PART_SYMMETRY: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Phase-space matrix
// ---------------------------------------------------------------------------

/// Matrix of smoothed-distribution pair values over a list of points,
/// split into its classical Gaussian-prefactor factor and its quantum
/// expectation factor; the test matrix is their entrywise product.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceMatrix {
    points: Vec<PhasePoint>,
    classical: Array2<f64>,
    quantum: Array2<f64>,
    hadamard: Array2<f64>,
}

impl PhaseSpaceMatrix {
    /// Assembles a matrix from an externally computed classical/quantum
    /// split, enforcing the structural invariants: matching square shapes,
    /// symmetry within 1e-10, classical entries in (0, 1] with unit
    /// diagonal.
    pub fn from_parts(
        points: Vec<PhasePoint>,
        classical: Array2<f64>,
        quantum: Array2<f64>,
    ) -> Result<Self> {
        let k = points.len();
        if k == 0 {
            return Err(Error::invalid("phase-space matrix", "need at least one point"));
        }
        if classical.dim() != (k, k) || quantum.dim() != (k, k) {
            return Err(Error::invalid(
                "phase-space matrix",
                format!(
                    "expected {k}x{k} factors for {k} points, got {:?} and {:?}",
                    classical.dim(),
                    quantum.dim()
                ),
            ));
        }
        for i in 0..k {
            if classical[[i, i]] != 1.0 {
                return Err(Error::invalid(
                    "phase-space matrix",
                    format!("classical diagonal must be exactly 1, got {}", classical[[i, i]]),
                ));
            }
            for j in 0..k {
                let c = classical[[i, j]];
                if !(c > 0.0 && c <= 1.0) {
                    return Err(Error::invalid(
                        "phase-space matrix",
                        format!("classical entry ({i},{j}) = {c} outside (0, 1]"),
                    ));
                }
                let (dc, dq) = (
                    (classical[[i, j]] - classical[[j, i]]).abs(),
                    (quantum[[i, j]] - quantum[[j, i]]).abs(),
                );
                if dc > PART_SYMMETRY || dq > PART_SYMMETRY {
                    return Err(Error::NotSymmetric(dc.max(dq)));
                }
            }
        }
        let hadamard = &classical * &quantum;
        Ok(PhaseSpaceMatrix { points, classical, quantum, hadamard })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    /// Gaussian prefactor matrix; entries in (0, 1], diagonal exactly 1.
    pub fn classical(&self) -> &Array2<f64> {
        &self.classical
    }

    /// Quantum expectation matrix: barycentric kernel values.
    pub fn quantum(&self) -> &Array2<f64> {
        &self.quantum
    }

    /// The tested matrix: entrywise product of the two factors.
    pub fn hadamard(&self) -> &Array2<f64> {
        &self.hadamard
    }
}

/// Classical prefactor and quantum factor of one entry pair.
fn entry(state: &DensityMatrix, p1: &PhasePoint, p2: &PhasePoint) -> Result<(f64, f64)> {
    let modes = p1.mode_count();
    let mut classical = 1.0f64;
    let mut amps = Vec::with_capacity(modes);
    let mut widths = Vec::with_capacity(modes);
    for m in 0..modes {
        let g = pair_geometry(
            p1.amplitudes()[m],
            p1.widths()[m],
            p2.amplitudes()[m],
            p2.widths()[m],
        );
        classical *= (-g.reduced_width * g.delta_alpha.norm_sqr()).exp();
        amps.push(g.barycenter);
        widths.push(g.total_width);
    }
    let merged = PhasePoint::new(amps, widths)?;
    Ok((classical, nexp(state, &merged)?))
}

/// Builds the phase-space matrix of a state over a point list. Entries are
/// independent and evaluated in parallel; the result is deterministic and
/// exactly symmetric because each unordered pair is computed once.
pub fn build_matrix(state: &DensityMatrix, points: &[PhasePoint]) -> Result<PhaseSpaceMatrix> {
    if points.is_empty() {
        return Err(Error::invalid("phase-space matrix", "need at least one point"));
    }
    for (i, p) in points.iter().enumerate() {
        if p.mode_count() != state.mode_count() {
            return Err(Error::domain(format!(
                "point {i} has {} modes but the state has {}",
                p.mode_count(),
                state.mode_count()
            )));
        }
    }
    let k = points.len();
    let mut pairs = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            pairs.push((i, j));
        }
    }
    let computed = pairs
        .par_iter()
        .map(|&(i, j)| entry(state, &points[i], &points[j]))
        .collect::<Result<Vec<_>>>()?;
    let mut classical = Array2::<f64>::zeros((k, k));
    let mut quantum = Array2::<f64>::zeros((k, k));
    let mut hadamard = Array2::<f64>::zeros((k, k));
    for (&(i, j), &(c, q)) in pairs.iter().zip(&computed) {
        let h = c * q;
        classical[[i, j]] = c;
        classical[[j, i]] = c;
        quantum[[i, j]] = q;
        quantum[[j, i]] = q;
        hadamard[[i, j]] = h;
        hadamard[[j, i]] = h;
    }
    Ok(PhaseSpaceMatrix { points: points.to_vec(), classical, quantum, hadamard })
}

// ---------------------------------------------------------------------------
// Positivity report
// ---------------------------------------------------------------------------

/// Positivity diagnostics of a phase-space matrix. Any entry below the
/// tolerance in `{determinant, leading minors, min eigenvalue}` flags the
/// state as nonclassical; the minors localize the smallest failing
/// submatrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub determinant: f64,
    pub leading_minors: Vec<f64>,
    pub min_eigenvalue: f64,
    pub nonclassical: bool,
    /// Magnitude of the extremal diagnostic: how deep the violation is, or
    /// how far from the boundary a passing matrix sits.
    pub margin: f64,
}

/// Evaluates determinant, leading principal minors (orders 1..k), and the
/// minimum eigenvalue of the tested matrix. All three are reported even
/// though any single negative value suffices for certification.
pub fn report(matrix: &PhaseSpaceMatrix, tolerance: f64) -> Result<WitnessReport> {
    if !tolerance.is_finite() || tolerance < 0.0 {
        return Err(Error::invalid(
            "report tolerance",
            format!("must be finite and >= 0, got {tolerance}"),
        ));
    }
    let m = matrix.hadamard();
    let k = matrix.dim();
    let mut asym = 0.0f64;
    for i in 0..k {
        for j in 0..i {
            asym = asym.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if asym > SYMMETRY_GATE {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = DMatrix::from_fn(k, k, |i, j| 0.5 * (m[[i, j]] + m[[j, i]]));
    let mut leading_minors = Vec::with_capacity(k);
    for r in 1..=k {
        let sub = sym.view((0, 0), (r, r)).into_owned();
        leading_minors.push(sub.lu().determinant());
    }
    let determinant = leading_minors[k - 1];
    let eig = nalgebra::SymmetricEigen::new(sym);
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let worst = leading_minors.iter().cloned().fold(min_eigenvalue, f64::min);
    Ok(WitnessReport {
        determinant,
        leading_minors,
        min_eigenvalue,
        nonclassical: worst < -tolerance,
        margin: worst.abs(),
    })
}

// ---------------------------------------------------------------------------
// Husimi-value source
// ---------------------------------------------------------------------------

/// Source of Husimi-function values for the unit-width criteria: either a
/// truncated state (general) or a closed-form expression (for the families
/// that have one). Both routes agree to truncation accuracy and are tested
/// against each other.
#[derive(Clone, Copy)]
pub enum QSource<'a> {
    Density(&'a DensityMatrix),
    Analytic(&'a AnalyticQ),
}

impl<'a> From<&'a DensityMatrix> for QSource<'a> {
    fn from(state: &'a DensityMatrix) -> Self {
        QSource::Density(state)
    }
}

impl<'a> From<&'a AnalyticQ> for QSource<'a> {
    fn from(q: &'a AnalyticQ) -> Self {
        QSource::Analytic(q)
    }
}

impl QSource<'_> {
    pub fn mode_count(&self) -> usize {
        match self {
            QSource::Density(s) => s.mode_count(),
            QSource::Analytic(q) => q.mode_count(),
        }
    }

    /// Husimi value at a multimode amplitude (unit width on every mode).
    pub fn q(&self, amplitudes: &[C64]) -> Result<f64> {
        match self {
            QSource::Density(s) => {
                let point = PhasePoint::uniform(amplitudes.to_vec(), 1.0)?;
                Ok(nexp(s, &point)? / PI.powi(amplitudes.len() as i32))
            }
            QSource::Analytic(q) => q.q(amplitudes),
        }
    }
}

// ---------------------------------------------------------------------------
// Named criteria
// ---------------------------------------------------------------------------

/// Husimi pair criterion
/// `Q(a1) Q(a2) - exp(-|a2 - a1|^2 / 2) Q((a1 + a2) / 2)^2`; negative values
/// certify nonclassicality from Husimi values alone. Single mode.
pub fn qq_pair<'a>(source: impl Into<QSource<'a>>, a1: C64, a2: C64) -> Result<f64> {
    qq_multi_impl(source.into(), &[a1], &[a2])
}

/// Multimode Husimi pair criterion: `Q(p1) Q(p2)` against the midpoint value
/// damped by the product Gaussian factor `exp(-sum_m |Dalpha_m|^2 / 2)`.
pub fn qq_multi<'a>(source: impl Into<QSource<'a>>, p1: &[C64], p2: &[C64]) -> Result<f64> {
    qq_multi_impl(source.into(), p1, p2)
}

fn qq_multi_impl(source: QSource<'_>, p1: &[C64], p2: &[C64]) -> Result<f64> {
    if p1.is_empty() || p1.len() != p2.len() {
        return Err(Error::domain(format!(
            "criterion points disagree on mode count: {} vs {}",
            p1.len(),
            p2.len()
        )));
    }
    if p1.len() != source.mode_count() {
        return Err(Error::domain(format!(
            "criterion points have {} modes but the source has {}",
            p1.len(),
            source.mode_count()
        )));
    }
    let mut gauss = 0.0f64;
    let mut mids = Vec::with_capacity(p1.len());
    for (&a, &b) in p1.iter().zip(p2) {
        gauss += (b - a).norm_sqr();
        mids.push(0.5 * (a + b));
    }
    let q1 = source.q(p1)?;
    let q2 = source.q(p2)?;
    let qm = source.q(&mids)?;
    Ok(q1 * q2 - (-0.5 * gauss).exp() * qm * qm)
}

fn require_single_mode(state: &DensityMatrix) -> Result<()> {
    if state.mode_count() != 1 {
        return Err(Error::domain(format!(
            "criterion is single-mode; the state has {} modes",
            state.mode_count()
        )));
    }
    Ok(())
}

fn single_positive_point(p: &PhasePoint, which: &str) -> Result<(C64, f64)> {
    if p.mode_count() != 1 {
        return Err(Error::domain(format!(
            "{which} must be single-mode, got {} modes",
            p.mode_count()
        )));
    }
    let s = p.widths()[0];
    if s <= 0.0 {
        return Err(Error::domain(format!(
            "{which} needs a strictly positive width, got {s}"
        )));
    }
    Ok((p.amplitudes()[0], s))
}

fn nexp_single(state: &DensityMatrix, a: C64, sigma: f64) -> Result<f64> {
    nexp(state, &PhasePoint::single(a, sigma)?)
}

/// Same-point two-width criterion
/// `P(alpha; 2 sigma) - (2 pi / sigma) P(alpha; sigma)^2`; at `sigma = 1`
/// this compares the Wigner value against twice-pi the squared Husimi value.
pub fn wq_criterion(state: &DensityMatrix, alpha: C64, sigma: f64) -> Result<f64> {
    require_single_mode(state)?;
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::domain(format!("width must be positive, got {sigma}")));
    }
    let n2 = nexp_single(state, alpha, 2.0 * sigma)?;
    let n1 = nexp_single(state, alpha, sigma)?;
    Ok(2.0 * sigma / PI * (n2 - n1 * n1))
}

/// Two-point two-width criterion
/// `P(a1; 2 s1) P(a2; 2 s2) - (4 sr / S) [exp(-sr |Da|^2) P(A; S)]^2`, with
/// `S` the total width, `sr` the reduced width, and `A` the barycenter of the
/// two smoothed points.
pub fn pair_criterion(state: &DensityMatrix, p1: &PhasePoint, p2: &PhasePoint) -> Result<f64> {
    require_single_mode(state)?;
    let (a1, s1) = single_positive_point(p1, "first point")?;
    let (a2, s2) = single_positive_point(p2, "second point")?;
    let g = pair_geometry(a1, s1, a2, s2);
    let n1 = nexp_single(state, a1, 2.0 * s1)?;
    let n2 = nexp_single(state, a2, 2.0 * s2)?;
    let na = nexp_single(state, g.barycenter, g.total_width)?;
    let cross = (-2.0 * g.reduced_width * g.delta_alpha.norm_sqr()).exp() * na * na;
    Ok(4.0 * s1 * s2 / (PI * PI) * (n1 * n2 - cross))
}

/// Third-order criterion from the two points plus the constant (zero-width)
/// functional: the product of the two same-point diagnostics minus a squared
/// cross-covariance. Equals the determinant of the corresponding 3x3 matrix
/// divided by pi^2.
pub fn three_by_three(state: &DensityMatrix, p1: &PhasePoint, p2: &PhasePoint) -> Result<f64> {
    require_single_mode(state)?;
    let (a1, s1) = single_positive_point(p1, "first point")?;
    let (a2, s2) = single_positive_point(p2, "second point")?;
    let g = pair_geometry(a1, s1, a2, s2);
    let m1 = nexp_single(state, a1, s1)?;
    let m2 = nexp_single(state, a2, s2)?;
    let t1 = nexp_single(state, a1, 2.0 * s1)? - m1 * m1;
    let t2 = nexp_single(state, a2, 2.0 * s2)? - m2 * m2;
    let cross = (-g.reduced_width * g.delta_alpha.norm_sqr()).exp()
        * nexp_single(state, g.barycenter, g.total_width)?
        - m1 * m2;
    Ok((t1 * t2 - cross * cross) / (PI * PI))
}

/// Same-point product criterion from the integral association inequality:
/// `P(alpha; S) - (S / pi) prod_i (pi / s_i) P(alpha; s_i)` with
/// `S = sum_i s_i`; classical states make the joint smoothing dominate the
/// product of individual smoothings.
pub fn chebyshev_criterion(state: &DensityMatrix, alpha: C64, sigmas: &[f64]) -> Result<f64> {
    require_single_mode(state)?;
    if sigmas.len() < 2 {
        return Err(Error::domain(format!(
            "need at least two widths, got {}",
            sigmas.len()
        )));
    }
    for &s in sigmas {
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::domain(format!("widths must be positive, got {s}")));
        }
    }
    let total: f64 = sigmas.iter().sum();
    let joint = nexp_single(state, alpha, total)?;
    let mut prod = 1.0f64;
    for &s in sigmas {
        prod *= nexp_single(state, alpha, s)?;
    }
    Ok(total / PI * (joint - prod))
}

/// Two-mode criterion mixing marginal Wigner and Husimi values with the
/// joint Husimi value:
/// `[W1/(2 pi) - Q1^2][W2/(2 pi) - Q2^2] - [Q12 - Q1 Q2]^2`,
/// where marginals are taken by tracing out the other mode. The second
/// diagonal factor uses the second mode's marginal, following the symmetric
/// construction.
pub fn wigner_husimi_two_mode(state: &DensityMatrix, a1: C64, a2: C64) -> Result<f64> {
    if state.mode_count() != 2 {
        return Err(Error::domain(format!(
            "criterion needs a two-mode state, got {} modes",
            state.mode_count()
        )));
    }
    let mut t = [0.0f64; 2];
    let mut q = [0.0f64; 2];
    for (m, &a) in [a1, a2].iter().enumerate() {
        let marginal = state.partial_trace(m)?;
        let w = nexp_single(&marginal, a, 2.0)?;
        let h = nexp_single(&marginal, a, 1.0)?;
        t[m] = (w - h * h) / (PI * PI);
        q[m] = h / PI;
    }
    let q12 = nexp(state, &PhasePoint::uniform(vec![a1, a2], 1.0)?)? / (PI * PI);
    let cross = q12 - q[0] * q[1];
    Ok(t[0] * t[1] - cross * cross)
}

/// Pair criterion for the nonlinear (quartic-exponent) kernels
/// `Omega(a) = : exp(-eta n(a) + chi n(a)^2) :`:
/// `<:O1 O1:><:O2 O2:> - <:O1 O2:>^2` evaluated by the chi power series at
/// the default order.
pub fn nonlinear_pair_criterion(
    state: &DensityMatrix,
    a1: C64,
    a2: C64,
    eta: f64,
    chi: f64,
) -> Result<f64> {
    let m11 = nonlinear_pair_expectation(state, a1, a1, eta, chi, DEFAULT_NONLINEAR_ORDER)?;
    let m22 = nonlinear_pair_expectation(state, a2, a2, eta, chi, DEFAULT_NONLINEAR_ORDER)?;
    let m12 = nonlinear_pair_expectation(state, a1, a2, eta, chi, DEFAULT_NONLINEAR_ORDER)?;
    Ok(m11 * m22 - m12 * m12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{analytic_q, make_state, optimal_point, StateKind, StateSpec};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single(a: C64, s: f64) -> PhasePoint {
        PhasePoint::single(a, s).unwrap()
    }

    fn fock(n: usize) -> DensityMatrix {
        make_state(&StateSpec::new(StateKind::Fock { n })).unwrap()
    }

    fn thermal(nbar: f64) -> DensityMatrix {
        make_state(&StateSpec::new(StateKind::Thermal { nbar })).unwrap()
    }

    /// Coherent state deep enough that truncation sits at machine noise.
    fn coherent_deep(beta: C64) -> DensityMatrix {
        make_state(&StateSpec::with_cutoff(StateKind::Coherent { beta }, 32)).unwrap()
    }

    #[test]
    fn single_point_matrix_is_the_doubled_width_kernel() {
        let state = fock(1);
        let a = c(0.6, -0.3);
        let m = build_matrix(&state, &[single(a, 0.7)]).unwrap();
        let expect = nexp_single(&state, a, 1.4).unwrap();
        assert_eq!(m.classical()[[0, 0]], 1.0);
        assert_relative_eq!(m.hadamard()[[0, 0]], expect, max_relative = 1e-13);
        let rep = report(&m, POSITIVITY_TOLERANCE).unwrap();
        assert_eq!(rep.leading_minors.len(), 1);
        assert_relative_eq!(rep.determinant, expect, max_relative = 1e-13);
        assert_relative_eq!(rep.min_eigenvalue, expect, max_relative = 1e-13);
    }

    #[test]
    fn builder_rejects_bad_inputs() {
        let state = fock(1);
        assert!(build_matrix(&state, &[]).is_err());
        let two_mode = PhasePoint::uniform(vec![c(0.0, 0.0); 2], 1.0).unwrap();
        assert!(build_matrix(&state, &[two_mode]).is_err());
        let m = build_matrix(&state, &[single(c(0.0, 0.0), 1.0)]).unwrap();
        assert!(report(&m, -1.0).is_err());
        assert!(report(&m, f64::NAN).is_err());
    }

    #[test]
    fn coherent_matrices_are_rank_one_gram_matrices() {
        let state = coherent_deep(c(0.8, -0.2));
        let points = [
            single(c(0.0, 0.0), 0.0),
            single(c(0.4, 0.6), 0.5),
            single(c(-0.9, 0.1), 1.0),
            single(c(0.2, -1.1), 1.5),
        ];
        let m = build_matrix(&state, &points).unwrap();
        for i in 0..4 {
            assert_eq!(m.classical()[[i, i]], 1.0);
            for j in 0..4 {
                let cij = m.classical()[[i, j]];
                assert!(cij > 0.0 && cij <= 1.0);
                assert_eq!(m.hadamard()[[i, j]], cij * m.quantum()[[i, j]]);
                assert_eq!(m.hadamard()[[i, j]], m.hadamard()[[j, i]]);
            }
        }
        // Rank one: every 2x2 minor vanishes.
        let h = m.hadamard();
        for i in 0..4 {
            for j in i + 1..4 {
                for k in 0..4 {
                    for l in k + 1..4 {
                        let det = h[[i, k]] * h[[j, l]] - h[[i, l]] * h[[j, k]];
                        assert!(det.abs() < 1e-10, "minor ({i}{j},{k}{l}) = {det:.3e}");
                    }
                }
            }
        }
        let rep = report(&m, POSITIVITY_TOLERANCE).unwrap();
        assert!(!rep.nonclassical);
        assert!(rep.min_eigenvalue > -1e-9);
    }

    #[test]
    fn report_on_assembled_parts() {
        let points: Vec<_> = (0..3).map(|i| single(c(i as f64, 0.0), 1.0)).collect();
        let classical = Array2::from_elem((3, 3), 1.0);
        let quantum = Array2::eye(3);
        let m = PhaseSpaceMatrix::from_parts(points.clone(), classical.clone(), quantum).unwrap();
        let rep = report(&m, POSITIVITY_TOLERANCE).unwrap();
        assert_eq!(rep.determinant, 1.0);
        assert_eq!(rep.leading_minors, vec![1.0, 1.0, 1.0]);
        assert_relative_eq!(rep.min_eigenvalue, 1.0, max_relative = 1e-12);
        assert!(!rep.nonclassical);
        assert_relative_eq!(rep.margin, 1.0, max_relative = 1e-12);

        let mut asym = Array2::eye(3);
        asym[[0, 1]] = 0.5;
        assert!(PhaseSpaceMatrix::from_parts(points.clone(), classical.clone(), asym).is_err());
        let mut bad_diag = Array2::from_elem((3, 3), 1.0);
        bad_diag[[1, 1]] = 0.999;
        assert!(PhaseSpaceMatrix::from_parts(points, bad_diag, Array2::eye(3)).is_err());
    }

    #[test]
    fn fock_qq_pair_matches_known_minimum() {
        for n in 1..=3usize {
            let spec = StateSpec::new(StateKind::Fock { n });
            let state = make_state(&spec).unwrap();
            let qa = analytic_q(&spec).unwrap();
            let a2 = optimal_point(&spec).unwrap();
            assert_relative_eq!(a2.re, (2.0 * n as f64).sqrt(), max_relative = 1e-12);
            let nf: f64 = (1..=n).product::<usize>() as f64;
            let expect = -(-2.0 * n as f64).exp() * (n as f64 / 2.0).powi(2 * n as i32)
                / (PI * nf).powi(2);
            assert_relative_eq!(
                qq_pair(&state, c(0.0, 0.0), a2).unwrap(),
                expect,
                max_relative = 1e-11
            );
            assert_relative_eq!(
                qq_pair(&qa, c(0.0, 0.0), a2).unwrap(),
                expect,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn criteria_match_matrix_builder_determinants() {
        let states = [
            fock(1),
            make_state(&StateSpec::new(StateKind::SqueezedVacuum { r: 0.6, phi: 0.0 })).unwrap(),
            thermal(0.7),
        ];
        let (a1, a2) = (c(0.15, -0.4), c(-0.8, 0.35));
        for state in &states {
            let m = build_matrix(state, &[single(a1, 0.5), single(a2, 0.5)]).unwrap();
            let det = report(&m, 1e-9).unwrap().determinant;
            assert_relative_eq!(
                qq_pair(state, a1, a2).unwrap(),
                det / (PI * PI),
                max_relative = 1e-10,
                epsilon = 1e-13
            );

            let sigma = 0.8;
            let m = build_matrix(state, &[single(a1, 0.0), single(a1, sigma)]).unwrap();
            let det = report(&m, 1e-9).unwrap().determinant;
            assert_relative_eq!(
                wq_criterion(state, a1, sigma).unwrap(),
                2.0 * sigma / PI * det,
                max_relative = 1e-10,
                epsilon = 1e-13
            );

            let (s1, s2) = (0.6, 0.9);
            let m = build_matrix(state, &[single(a1, s1), single(a2, s2)]).unwrap();
            let det = report(&m, 1e-9).unwrap().determinant;
            assert_relative_eq!(
                pair_criterion(state, &single(a1, s1), &single(a2, s2)).unwrap(),
                4.0 * s1 * s2 / (PI * PI) * det,
                max_relative = 1e-10,
                epsilon = 1e-13
            );

            let m = build_matrix(
                state,
                &[single(a1, s1), single(a2, s2), single(c(0.0, 0.0), 0.0)],
            )
            .unwrap();
            let det = report(&m, 1e-9).unwrap().determinant;
            assert_relative_eq!(
                three_by_three(state, &single(a1, s1), &single(a2, s2)).unwrap(),
                det / (PI * PI),
                max_relative = 1e-10,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn wq_criterion_landmarks() {
        // First number state at the origin: Wigner -2/pi, Husimi 0.
        assert_relative_eq!(
            wq_criterion(&fock(1), c(0.0, 0.0), 1.0).unwrap(),
            -2.0 / PI,
            max_relative = 1e-12
        );
        assert!(wq_criterion(&thermal(1.0), c(0.0, 0.0), 1.0).unwrap() > 0.0);
        let coh = coherent_deep(c(0.9, -0.4));
        for &s in &[0.3, 0.7, 1.0] {
            let v = wq_criterion(&coh, c(0.5, 0.2), s).unwrap();
            assert!(v.abs() < 1e-9, "coherent saturation violated: {v:.3e}");
        }
    }

    #[test]
    fn chebyshev_reduces_to_equal_width_same_point_condition() {
        for state in &[fock(1), thermal(0.8)] {
            for &s in &[0.4, 0.9] {
                let a = c(0.3, 0.5);
                assert_relative_eq!(
                    chebyshev_criterion(state, a, &[s, s]).unwrap(),
                    wq_criterion(state, a, s).unwrap(),
                    max_relative = 1e-12,
                    epsilon = 1e-15
                );
            }
        }
        assert!(chebyshev_criterion(&fock(1), c(0.0, 0.0), &[1.0, 0.5, 0.4]).unwrap() < 0.0);
        assert!(chebyshev_criterion(&thermal(0.8), c(0.2, 0.0), &[1.0, 0.5, 0.4]).unwrap() > 0.0);
        assert!(chebyshev_criterion(&fock(1), c(0.0, 0.0), &[1.0]).is_err());
        assert!(chebyshev_criterion(&fock(1), c(0.0, 0.0), &[1.0, -0.5]).is_err());
    }

    #[test]
    fn three_by_three_signs() {
        let p1 = single(c(0.0, 0.0), 1.0);
        let p2 = single(c(2f64.sqrt(), 0.0), 1.0);
        assert!(three_by_three(&fock(1), &p1, &p2).unwrap() < 0.0);
        let th = thermal(0.5);
        for &(b1, b2) in &[(c(0.2, 0.4), c(-0.6, 0.1)), (c(1.0, 0.0), c(0.0, 0.9))] {
            let v = three_by_three(&th, &single(b1, 0.8), &single(b2, 0.95)).unwrap();
            assert!(v >= -1e-12, "thermal 3x3 went negative: {v:.3e}");
        }
    }

    #[test]
    fn qq_multi_reduces_and_flags_known_states() {
        let f1 = fock(1);
        let (a1, a2) = (c(0.3, -0.2), c(1.1, 0.4));
        assert_relative_eq!(
            qq_multi(&f1, &[a1], &[a2]).unwrap(),
            qq_pair(&f1, a1, a2).unwrap(),
            max_relative = 1e-14
        );

        // Photon-number-correlated mixed state: classical marginals, joint
        // negativity at cross points of unit magnitude.
        let lam = c(0.5f64.sqrt(), 0.0);
        let spec = StateSpec::new(StateKind::PhaseDiffusedTmsv { lambda: lam });
        let state = make_state(&spec).unwrap();
        let qa = analytic_q(&spec).unwrap();
        let p1 = [c(1.0, 0.0), c(0.0, 0.0)];
        let p2 = [c(0.0, 0.0), c(0.0, 1.0)];
        let vd = qq_multi(&state, &p1, &p2).unwrap();
        let va = qq_multi(&qa, &p1, &p2).unwrap();
        assert!(vd < 0.0, "expected joint negativity, got {vd:.3e}");
        assert_relative_eq!(vd, va, max_relative = 1e-8, epsilon = 1e-10);

        // Tripartite odd superposition: the origin value vanishes, so any
        // pairing against it is certified.
        let spec = StateSpec::new(StateKind::Cat {
            gamma: c(1.0, 0.0),
            modes: 3,
            parity: -1,
        });
        let state = make_state(&spec).unwrap();
        let qa = analytic_q(&spec).unwrap();
        let a = c(0.55, 0.0);
        let zero = c(0.0, 0.0);
        let vd = qq_multi(&state, &[a, a, a], &[zero, zero, zero]).unwrap();
        let va = qq_multi(&qa, &[a, a, a], &[zero, zero, zero]).unwrap();
        assert!(vd < 0.0);
        assert_relative_eq!(vd, va, max_relative = 1e-10, epsilon = 1e-13);
    }

    #[test]
    fn wigner_husimi_two_mode_criterion() {
        // A product of coherent states is classical and uncorrelated.
        let prod = DensityMatrix::coherent_product_mixture(
            32,
            &[(1.0, vec![c(0.5, 0.1), c(-0.3, 0.4)])],
        )
        .unwrap();
        let v = wigner_husimi_two_mode(&prod, c(0.2, 0.0), c(0.0, -0.3)).unwrap();
        assert!(v.abs() < 1e-9, "coherent product should saturate, got {v:.3e}");

        let vac = DensityMatrix::coherent_product_mixture(
            8,
            &[(1.0, vec![c(0.0, 0.0), c(0.0, 0.0)])],
        )
        .unwrap();
        let v = wigner_husimi_two_mode(&vac, c(0.3, 0.1), c(-0.2, 0.5)).unwrap();
        assert!(v.abs() < 1e-12);

        // Cross-check the partial-trace marginals against zero-width padding
        // on the joint state, which leaves the other mode untouched.
        let spec = StateSpec::new(StateKind::PhaseDiffusedTmsv {
            lambda: c(0.5f64.sqrt(), 0.0),
        });
        let state = make_state(&spec).unwrap();
        let (a1, a2) = (c(0.9, 0.0), c(0.9, 0.0));
        let got = wigner_husimi_two_mode(&state, a1, a2).unwrap();
        let pad = |a: C64, s: f64, mode: usize| -> f64 {
            let (amps, widths) = if mode == 0 {
                (vec![a, c(0.0, 0.0)], vec![s, 0.0])
            } else {
                (vec![c(0.0, 0.0), a], vec![0.0, s])
            };
            nexp(&state, &PhasePoint::new(amps, widths).unwrap()).unwrap()
        };
        let mut t = [0.0f64; 2];
        let mut q = [0.0f64; 2];
        for (m, &a) in [a1, a2].iter().enumerate() {
            let w = pad(a, 2.0, m);
            let h = pad(a, 1.0, m);
            t[m] = (w - h * h) / (PI * PI);
            q[m] = h / PI;
        }
        let q12 = nexp(&state, &PhasePoint::uniform(vec![a1, a2], 1.0).unwrap()).unwrap()
            / (PI * PI);
        let x = q12 - q[0] * q[1];
        let expect = t[0] * t[1] - x * x;
        assert_relative_eq!(got, expect, max_relative = 1e-10, epsilon = 1e-13);

        assert!(wigner_husimi_two_mode(&fock(1), a1, a2).is_err());
    }

    #[test]
    fn nonlinear_criterion_reduces_and_detects() {
        let spec = StateSpec::new(StateKind::Cat { gamma: c(1.0, 0.0), modes: 1, parity: 1 });
        let state = make_state(&spec).unwrap();
        let (a1, a2) = (c(0.9, 0.0), c(0.0, 0.7));
        let eta = 0.8;

        let v0 = nonlinear_pair_criterion(&state, a1, a2, eta, 0.0).unwrap();
        let g = |x: C64, y: C64| -> f64 {
            gaussian_pair_expectation(&state, &single(x, eta), &single(y, eta)).unwrap()
        };
        let direct = g(a1, a1) * g(a2, a2) - g(a1, a2) * g(a1, a2);
        assert_relative_eq!(v0, direct, max_relative = 1e-12, epsilon = 1e-14);
        assert_relative_eq!(
            pair_criterion(&state, &single(a1, eta), &single(a2, eta)).unwrap(),
            4.0 * eta * eta / (PI * PI) * v0,
            max_relative = 1e-11,
            epsilon = 1e-14
        );

        // Quartic-kernel negativity for the even superposition at unit
        // efficiency and small nonlinearity.
        let mut found = false;
        for &re in &[0.6, 1.0, 1.4] {
            for &im in &[0.6, 1.0, 1.4] {
                let v =
                    nonlinear_pair_criterion(&state, c(re, 0.0), c(0.0, im), 1.0, 0.01).unwrap();
                if v < 0.0 {
                    found = true;
                }
            }
        }
        assert!(found, "no negativity found on the probe grid");
    }

    #[test]
    fn zero_of_husimi_forces_negativity() {
        let f2 = fock(2);
        for &a2 in &[c(0.7, 0.3), c(-1.1, 0.2)] {
            assert!(qq_pair(&f2, c(0.0, 0.0), a2).unwrap() < 0.0);
        }
        let odd = make_state(&StateSpec::new(StateKind::Cat {
            gamma: c(0.8, 0.0),
            modes: 1,
            parity: -1,
        }))
        .unwrap();
        assert!(qq_pair(&odd, c(0.0, 0.0), c(0.9, -0.2)).unwrap() < 0.0);
    }

    #[test]
    fn squeezed_state_is_certified_at_its_optimal_point() {
        let spec = StateSpec::new(StateKind::SqueezedVacuum { r: 0.57, phi: 0.0 });
        let state = make_state(&spec).unwrap();
        let a2 = optimal_point(&spec).unwrap();
        let v = qq_pair(&state, c(0.0, 0.0), a2).unwrap();
        assert!(v < 0.0, "squeezed state not certified at optimal point: {v:.3e}");
    }

    #[test]
    fn classical_states_pass_every_criterion() {
        let coh = coherent_deep(c(0.7, 0.5));
        let th = thermal(1.3);
        let mix = DensityMatrix::coherent_product_mixture(
            40,
            &[(0.55, vec![c(1.0, 0.2)]), (0.45, vec![c(-0.6, 0.9)])],
        )
        .unwrap();
        let probes = [(c(0.3, 0.2), c(-0.5, 0.6)), (c(1.0, -0.4), c(0.2, 0.8))];
        for state in &[coh, th, mix] {
            for &(a1, a2) in &probes {
                assert!(qq_pair(state, a1, a2).unwrap() >= -1e-9);
                assert!(wq_criterion(state, a1, 0.8).unwrap() >= -1e-9);
                assert!(
                    pair_criterion(state, &single(a1, 0.5), &single(a2, 0.95)).unwrap() >= -1e-9
                );
                assert!(
                    three_by_three(state, &single(a1, 0.9), &single(a2, 0.7)).unwrap() >= -1e-9
                );
                assert!(chebyshev_criterion(state, a1, &[0.5, 0.7, 0.8]).unwrap() >= -1e-9);
                assert!(
                    nonlinear_pair_criterion(state, a1, a2, 0.9, 1e-3).unwrap() >= -1e-9
                );
            }
        }
    }
}
