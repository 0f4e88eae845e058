//! Expectation values of displaced Gaussian kernels.
//!
//! Everything reduces to the normally ordered building block
//!
//! ```text
//! nexp(state; alphas, sigmas) = < : prod_m exp(-sigma_m n(alpha_m)) : >
//!                             = Tr[ rho (x)_m D(a_m) (1-sigma_m)^n D(a_m)^dag ]
//! ```
//!
//! where `n(a) = (adag - conj(a))(a - a)` counts quanta around the displaced
//! origin. Per mode the kernel is evaluated as a diagonally weighted quadratic
//! form over vectors displaced into a working window sized from two bounds:
//! where the kernel weights `(1-sigma)^m` decay away and where the displaced
//! state runs out of mass.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::displacement_block;
use crate::phase::{pair_geometry, PhasePoint};
use crate::special::ln_factorials;
use crate::state::{DensityMatrix, ModeVec, Repr};

/// Hard ceiling on the per-mode working window.
pub const MAX_WINDOW: usize = 1024;

const TAIL_GATE: f64 = 1e-9;
const REALNESS_GATE: f64 = 1e-10;

/// Default truncation order of the quartic-exponent power series; keeps the
/// dropped tail near 1e-7 for `chi <= 0.01` at amplitudes within a few units
/// of the origin, including the coincident-point (doubled-exponent) entries.
pub const DEFAULT_NONLINEAR_ORDER: usize = 4;

// ---------------------------------------------------------------------------
// Per-mode kernel
// ---------------------------------------------------------------------------

/// One mode's kernel `D(a) (1-sigma)^n D(a)^dag` prepared for quadratic forms.
struct ModeKernel {
    /// `D(-a)` block, `vec_len x cutoff`; `None` when `a = 0`.
    disp: Option<Array2<C64>>,
    /// `(1-sigma)^m` for `m < form_len`.
    weights: Vec<f64>,
    /// Rows kept in displaced vectors (`form_len + extra`).
    vec_len: usize,
    /// `sigma == 0`: the kernel is exactly the identity.
    identity: bool,
    cutoff: usize,
}

impl ModeKernel {
    /// `support`: the state's exact-support bound, if any; gates widths > 2
    /// and tightens the window for low-lying states.
    fn new(
        alpha: C64,
        sigma: f64,
        cutoff: usize,
        support: Option<usize>,
        extra: usize,
    ) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("width must be finite and >= 0, got {sigma}")));
        }
        if sigma > 2.0 && support.is_none() {
            return Err(Error::domain(format!(
                "width {sigma} > 2 makes the kernel weights (1-sigma)^n grow without bound; \
                 valid only for states with exactly bounded Fock support"
            )));
        }
        if sigma == 0.0 && extra == 0 {
            return Ok(ModeKernel {
                disp: None,
                weights: Vec::new(),
                vec_len: cutoff,
                identity: true,
                cutoff,
            });
        }
        let top = support.unwrap_or(cutoff - 1).min(cutoff - 1);
        let w = (1.0 - sigma).abs();
        let displaced = alpha.norm_sqr() > 0.0;

        let form_len = if !displaced {
            cutoff
        } else {
            // Window from kernel-weight decay: |1-sigma|^m < 1e-17.
            let weight_win = if w == 0.0 {
                1
            } else if w < 1.0 {
                ((1e-17f64.ln() / w.ln()).ceil() as usize).max(1) + 2
            } else {
                usize::MAX
            };
            // Window from displaced-mass decay: the displaced vector behaves
            // like a Poisson tail of mean (|a| + sqrt(top))^2, inflated by
            // growing weights when |1-sigma| > 1.
            let mut mu = (alpha.norm() + (top as f64).sqrt()).powi(2);
            if w > 1.0 {
                mu *= w * w;
            }
            let mass_win = (mu + 10.0 * mu.sqrt() + 25.0).ceil() as usize;
            weight_win.min(mass_win).max(1)
        };
        let vec_len = form_len
            .checked_add(extra)
            .filter(|&v| v <= MAX_WINDOW)
            .ok_or_else(|| {
                Error::Truncation(format!(
                    "working window {form_len}+{extra} exceeds the {MAX_WINDOW} ceiling \
                     (amplitude {alpha}, width {sigma}); reduce the amplitude or width"
                ))
            })?;

        let disp = if displaced {
            Some(displacement_block(-alpha, vec_len, cutoff))
        } else {
            None
        };
        let mut weights = Vec::with_capacity(form_len);
        let mut wm = 1.0f64;
        for m in 0..form_len.min(vec_len) {
            if m > 0 {
                wm *= 1.0 - sigma;
            }
            weights.push(wm);
        }
        Ok(ModeKernel { disp, weights, vec_len, identity: false, cutoff })
    }

    /// Applies `D(-a)` to a mode vector, using column extraction for basis
    /// vectors.
    fn displace(&self, v: &ModeVec) -> Array1<C64> {
        match &self.disp {
            None => {
                if self.vec_len == v.dim() {
                    v.amps.clone()
                } else {
                    let mut out = Array1::<C64>::zeros(self.vec_len);
                    for (i, z) in v.amps.iter().enumerate().take(self.vec_len) {
                        out[i] = *z;
                    }
                    out
                }
            }
            Some(d) => {
                if let Some(j) = v.basis_index {
                    let c = v.amps[j];
                    let mut out = Array1::<C64>::zeros(self.vec_len);
                    for m in 0..self.vec_len {
                        out[m] = d[[m, j]] * c;
                    }
                    out
                } else {
                    let mut out = Array1::<C64>::zeros(self.vec_len);
                    for m in 0..self.vec_len {
                        let mut acc = C64::new(0.0, 0.0);
                        for (n, z) in v.amps.iter().enumerate() {
                            if z.norm_sqr() != 0.0 {
                                acc += d[[m, n]] * z;
                            }
                        }
                        out[m] = acc;
                    }
                    out
                }
            }
        }
    }

    /// `<u|K|v>` over displaced vectors, with a tail-contribution gate on the
    /// last tenth of the window. The gate only applies when a displacement
    /// actually windowed the vectors; at `a = 0` the sum spans the full state
    /// dimension and is exact wherever its mass sits.
    fn form(&self, u: &Array1<C64>, v: &Array1<C64>) -> Result<C64> {
        if self.identity {
            let acc: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            return Ok(acc);
        }
        let len = self.weights.len().min(u.len()).min(v.len());
        let tail_start = len - len / 10;
        let mut total = C64::new(0.0, 0.0);
        let mut tail = C64::new(0.0, 0.0);
        for m in 0..len {
            let term = self.weights[m] * u[m].conj() * v[m];
            total += term;
            if m >= tail_start {
                tail += term;
            }
        }
        if self.disp.is_some() && len >= 20 && tail.norm() > TAIL_GATE * (1.0 + total.norm()) {
            return Err(Error::Truncation(format!(
                "window tail still contributes {:.3e} against total {:.3e}; \
                 working window too small",
                tail.norm(),
                total.norm()
            )));
        }
        Ok(total)
    }

    /// `Tr[rho K]` for a dense single-mode density matrix.
    fn trace_form(&self, rho: &Array2<C64>) -> Result<C64> {
        if self.identity {
            let acc: C64 = (0..self.cutoff).map(|i| rho[[i, i]]).sum();
            return Ok(acc);
        }
        match &self.disp {
            None => {
                let len = self.weights.len().min(self.cutoff);
                let acc: C64 = (0..len).map(|m| self.weights[m] * rho[[m, m]]).sum();
                Ok(acc)
            }
            Some(d) => {
                // sum_m w_m (D rho D^dag)_{mm}, row by row.
                let len = self.weights.len().min(self.vec_len);
                let tail_start = len - len / 10;
                let mut total = C64::new(0.0, 0.0);
                let mut tail = C64::new(0.0, 0.0);
                for m in 0..len {
                    let mut row = Array1::<C64>::zeros(self.cutoff);
                    for a in 0..self.cutoff {
                        let mut acc = C64::new(0.0, 0.0);
                        for b in 0..self.cutoff {
                            acc += d[[m, a]] * rho[[a, b]] * d[[m, b]].conj();
                        }
                        row[a] = acc;
                    }
                    let diag: C64 = row.iter().sum();
                    let term = self.weights[m] * diag;
                    total += term;
                    if m >= tail_start {
                        tail += term;
                    }
                }
                if len >= 20 && tail.norm() > TAIL_GATE * (1.0 + total.norm()) {
                    return Err(Error::Truncation(format!(
                        "window tail still contributes {:.3e} against total {:.3e}",
                        tail.norm(),
                        total.norm()
                    )));
                }
                Ok(total)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// nexp and the distribution
// ---------------------------------------------------------------------------

fn nexp_complex(state: &DensityMatrix, point: &PhasePoint) -> Result<C64> {
    if point.mode_count() != state.mode_count() {
        return Err(Error::domain(format!(
            "point has {} modes, state has {}",
            point.mode_count(),
            state.mode_count()
        )));
    }
    let kernels: Vec<ModeKernel> = point
        .amplitudes()
        .iter()
        .zip(point.widths().iter())
        .map(|(&a, &s)| ModeKernel::new(a, s, state.cutoff(), state.support_bound(), 0))
        .collect::<Result<_>>()?;

    match state.repr() {
        Repr::PureSuperposition(comps) => {
            let displaced: Vec<Vec<Array1<C64>>> = comps
                .iter()
                .map(|(_, vecs)| {
                    vecs.iter()
                        .zip(kernels.iter())
                        .map(|(v, k)| k.displace(v))
                        .collect()
                })
                .collect();
            let mut acc = C64::new(0.0, 0.0);
            for (j, (cj, _)) in comps.iter().enumerate() {
                for (k, (ck, _)) in comps.iter().enumerate() {
                    let mut prod = cj.conj() * ck;
                    for (m, kern) in kernels.iter().enumerate() {
                        if prod.norm_sqr() == 0.0 {
                            break;
                        }
                        prod *= kern.form(&displaced[j][m], &displaced[k][m])?;
                    }
                    acc += prod;
                }
            }
            Ok(acc)
        }
        Repr::ProductMixture(comps) => {
            let mut acc = C64::new(0.0, 0.0);
            for (w, vecs) in comps {
                let mut prod = C64::new(*w, 0.0);
                for (m, kern) in kernels.iter().enumerate() {
                    if prod.norm_sqr() == 0.0 {
                        break;
                    }
                    let dv = kern.displace(&vecs[m]);
                    prod *= kern.form(&dv, &dv)?;
                }
                acc += prod;
            }
            Ok(acc)
        }
        Repr::SingleMode(rho) => kernels[0].trace_form(rho),
    }
}

/// Normally ordered expectation
/// `< : prod_m exp(-sigma_m n(alpha_m)) : >` at a phase point.
///
/// Always in `[-1, 1]` for widths in `[0, 2]`; the flat limit `sigma -> 0`
/// tends to 1. Widths above 2 require a state with exactly bounded support.
pub fn nexp(state: &DensityMatrix, point: &PhasePoint) -> Result<f64> {
    let v = nexp_complex(state, point)?;
    if v.im.abs() > REALNESS_GATE * (1.0 + v.re.abs()) {
        return Err(Error::NotReal { imag: v.im });
    }
    Ok(v.re)
}

/// Gaussian-smoothed distribution value
/// `P(alphas; sigmas) = (prod_m sigma_m / pi) nexp(...)`; all widths must be
/// positive. Width 1 gives the Husimi function, width 2 the Wigner function.
pub fn distribution(state: &DensityMatrix, point: &PhasePoint) -> Result<f64> {
    let mut scale = 1.0f64;
    for &s in point.widths() {
        if s <= 0.0 {
            return Err(Error::domain(format!(
                "distribution needs strictly positive widths, got {s}"
            )));
        }
        scale *= s / std::f64::consts::PI;
    }
    Ok(scale * nexp(state, point)?)
}

// ---------------------------------------------------------------------------
// Pair factorization
// ---------------------------------------------------------------------------

/// Expectation of the product of two Gaussian kernels,
/// `< : prod_m e^{-s1_m n(a1_m)} e^{-s2_m n(a2_m)} : >`, evaluated through the
/// factorization into a classical Gaussian prefactor times a single
/// barycentric kernel per mode.
pub fn gaussian_pair_expectation(
    state: &DensityMatrix,
    p1: &PhasePoint,
    p2: &PhasePoint,
) -> Result<f64> {
    if p1.mode_count() != p2.mode_count() {
        return Err(Error::domain(format!(
            "pair points disagree on mode count: {} vs {}",
            p1.mode_count(),
            p2.mode_count()
        )));
    }
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
    Ok(classical * nexp(state, &merged)?)
}

// ---------------------------------------------------------------------------
// Displaced polynomial-Gaussian forms
// ---------------------------------------------------------------------------

/// A single-mode state displaced once so that many polynomial-weighted
/// Gaussian forms can be taken against the same window.
struct DisplacedState {
    kernel: ModeKernel,
    comps: DisplacedComps,
}

enum DisplacedComps {
    Pure(Vec<(C64, Array1<C64>)>),
    Mixture(Vec<(f64, Array1<C64>)>),
    /// `D(-A) rho D(-A)^dag` on the window.
    Dense(Array2<C64>),
}

impl DisplacedState {
    fn new(state: &DensityMatrix, a: C64, sigma: f64, extra: usize) -> Result<Self> {
        if state.mode_count() != 1 {
            return Err(Error::domain(format!(
                "displaced polynomial forms are single-mode; state has {} modes",
                state.mode_count()
            )));
        }
        let kernel = ModeKernel::new(a, sigma, state.cutoff(), state.support_bound(), extra)?;
        let comps = match state.repr() {
            Repr::PureSuperposition(comps) => DisplacedComps::Pure(
                comps
                    .iter()
                    .map(|(c, vecs)| (*c, kernel.displace(&vecs[0])))
                    .collect(),
            ),
            Repr::ProductMixture(comps) => DisplacedComps::Mixture(
                comps
                    .iter()
                    .map(|(w, vecs)| (*w, kernel.displace(&vecs[0])))
                    .collect(),
            ),
            Repr::SingleMode(rho) => {
                let d = state.cutoff();
                let len = kernel.vec_len;
                match &kernel.disp {
                    None => {
                        let mut t = Array2::<C64>::zeros((len, len));
                        for i in 0..len.min(d) {
                            for j in 0..len.min(d) {
                                t[[i, j]] = rho[[i, j]];
                            }
                        }
                        DisplacedComps::Dense(t)
                    }
                    Some(dm) => {
                        // T = D rho D^dag.
                        let mut b = Array2::<C64>::zeros((len, d));
                        for m in 0..len {
                            for j in 0..d {
                                let mut acc = C64::new(0.0, 0.0);
                                for i in 0..d {
                                    acc += dm[[m, i]] * rho[[i, j]];
                                }
                                b[[m, j]] = acc;
                            }
                        }
                        let mut t = Array2::<C64>::zeros((len, len));
                        for m in 0..len {
                            for n in 0..len {
                                let mut acc = C64::new(0.0, 0.0);
                                for j in 0..d {
                                    acc += b[[m, j]] * dm[[n, j]].conj();
                                }
                                t[[m, n]] = acc;
                            }
                        }
                        DisplacedComps::Dense(t)
                    }
                }
            }
        };
        Ok(DisplacedState { kernel, comps })
    }

    /// Table of all forms
    /// `< : (adag - conj A)^p (a - A)^q e^{-Sigma n(A)} : >` for
    /// `p <= pmax`, `q <= qmax`.
    fn poly_table(&self, pmax: usize, qmax: usize) -> Result<Array2<C64>> {
        let form_len = self.kernel.weights.len();
        let shift_max = pmax.max(qmax);
        let lf = ln_factorials(form_len + shift_max);
        // g_p(m) = sqrt((m+p)!/m!)
        let gfac = |m: usize, p: usize| -> f64 { (0.5 * (lf[m + p] - lf[m])).exp() };

        let mut table = Array2::<C64>::zeros((pmax + 1, qmax + 1));
        match &self.comps {
            DisplacedComps::Dense(t) => {
                for p in 0..=pmax {
                    for q in 0..=qmax {
                        let len = form_len.min(t.dim().0.saturating_sub(p.max(q)));
                        let mut acc = C64::new(0.0, 0.0);
                        for m in 0..len {
                            acc += self.kernel.weights[m] * gfac(m, p) * gfac(m, q)
                                * t[[m + q, m + p]];
                        }
                        table[[p, q]] = acc;
                    }
                }
            }
            DisplacedComps::Pure(comps) => {
                // Shifted, factorial-weighted copies of each displaced vector:
                // X_p[m] = u[m+p] g_p(m); the table is then a weighted dot.
                let shifted: Vec<Vec<Array1<C64>>> = comps
                    .iter()
                    .map(|(_, u)| shift_family(u, shift_max, form_len, &gfac))
                    .collect();
                for (j, (cj, _)) in comps.iter().enumerate() {
                    for (k, (ck, _)) in comps.iter().enumerate() {
                        let cc = cj.conj() * ck;
                        for p in 0..=pmax {
                            for q in 0..=qmax {
                                let xu = &shifted[j][p];
                                let yv = &shifted[k][q];
                                let mut acc = C64::new(0.0, 0.0);
                                for m in 0..form_len {
                                    acc += self.kernel.weights[m] * xu[m].conj() * yv[m];
                                }
                                table[[p, q]] += cc * acc;
                            }
                        }
                    }
                }
            }
            DisplacedComps::Mixture(comps) => {
                for (w, u) in comps {
                    let shifted = shift_family(u, shift_max, form_len, &gfac);
                    for p in 0..=pmax {
                        for q in 0..=qmax {
                            let mut acc = C64::new(0.0, 0.0);
                            for m in 0..form_len {
                                acc += self.kernel.weights[m]
                                    * shifted[p][m].conj()
                                    * shifted[q][m];
                            }
                            table[[p, q]] += *w * acc;
                        }
                    }
                }
            }
        }
        Ok(table)
    }
}

fn shift_family(
    u: &Array1<C64>,
    shift_max: usize,
    form_len: usize,
    gfac: &dyn Fn(usize, usize) -> f64,
) -> Vec<Array1<C64>> {
    (0..=shift_max)
        .map(|p| {
            let mut x = Array1::<C64>::zeros(form_len);
            for m in 0..form_len {
                if m + p < u.len() {
                    x[m] = u[m + p] * gfac(m, p);
                }
            }
            x
        })
        .collect()
}

/// Displaced polynomial-Gaussian expectation
/// `< : (adag - conj A)^p (a - A)^q e^{-Sigma n(A)} : >` for a single-mode
/// state. The generalization of `nexp` that appears when polynomial factors
/// multiply the Gaussian kernel.
pub fn displaced_poly_gaussian(
    state: &DensityMatrix,
    a: C64,
    sigma: f64,
    p: usize,
    q: usize,
) -> Result<C64> {
    let ds = DisplacedState::new(state, a, sigma, p.max(q))?;
    let table = ds.poly_table(p, q)?;
    Ok(table[[p, q]])
}

// ---------------------------------------------------------------------------
// Nonlinear (quartic-exponent) pair expectation
// ---------------------------------------------------------------------------

/// `< : Omega(a1) Omega(a2) : >` with
/// `Omega(a) = : exp(-eta n(a) + chi n(a)^2) :`, by expanding the quartic
/// exponentials as a power series in `chi` truncated at total order `order`
/// (all terms `chi^(k1+k2)` with `k1 + k2 <= order`) and reducing every term
/// to displaced polynomial-Gaussian forms around the pair barycenter.
///
/// Errors if the geometric-extrapolation estimate of the dropped tail
/// exceeds 1e-6 on the scale of the result (the kernels are bounded by 1, so
/// the threshold is absolute). Physical-detector callers should also keep
/// `chi <= e eta^2 / (4 n_max)`; the click-detector layer enforces that bound.
pub fn nonlinear_pair_expectation(
    state: &DensityMatrix,
    a1: C64,
    a2: C64,
    eta: f64,
    chi: f64,
    order: usize,
) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("eta must be positive, got {eta}")));
    }
    if !(chi >= 0.0) || !chi.is_finite() {
        return Err(Error::domain(format!("chi must be >= 0, got {chi}")));
    }
    if order == 0 || order > 8 {
        return Err(Error::domain(format!("series order must be in 1..=8, got {order}")));
    }
    let g = pair_geometry(a1, eta, a2, eta);
    let classical = (-g.reduced_width * g.delta_alpha.norm_sqr()).exp();
    let a = g.barycenter;
    let d1 = a - a1;
    let d2 = a - a2;

    let pmax = 2 * order;
    let ds = DisplacedState::new(state, a, g.total_width, pmax)?;
    let table = ds.poly_table(pmax, pmax)?;

    let mut fact = vec![1.0f64; order + 1];
    for k in 1..=order {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut order_sums = vec![C64::new(0.0, 0.0); order + 1];
    for k1 in 0..=order {
        for k2 in 0..=order - k1 {
            let coeff = chi.powi((k1 + k2) as i32) / (fact[k1] * fact[k2]);
            if coeff == 0.0 && k1 + k2 > 0 {
                continue;
            }
            let s = binomial_product_poly(d1, 2 * k1, d2, 2 * k2);
            debug_assert!(s.len() - 1 <= pmax);
            let mut acc = C64::new(0.0, 0.0);
            for (ai, sa) in s.iter().enumerate() {
                if sa.norm_sqr() == 0.0 {
                    continue;
                }
                for (bi, sb) in s.iter().enumerate() {
                    if sb.norm_sqr() == 0.0 {
                        continue;
                    }
                    acc += sa.conj() * sb * table[[ai, bi]];
                }
            }
            order_sums[k1 + k2] += coeff * acc;
        }
    }
    let total: C64 = order_sums.iter().sum();
    if chi > 0.0 && order >= 1 {
        let t = |k: usize| order_sums[k].norm();
        // Estimate the dropped tail by geometric extrapolation. For deep
        // truncations, fit the squared per-order ratio between sums of
        // adjacent order pairs: individual orders can pass through zero
        // (the series alternates in sign on some states), but two
        // consecutive orders do not vanish together, so pair sums give a
        // zero-crossing-proof decay estimate. Shallow truncations fall
        // back to the plain last-over-previous ratio.
        let residual = if order >= 3 {
            let hi = t(order - 1) + t(order);
            let lo = t(order - 3) + t(order - 2);
            if hi == 0.0 {
                0.0
            } else if lo == 0.0 {
                f64::INFINITY
            } else {
                let rho2 = hi / lo;
                if rho2 < 0.81 { hi * rho2 / (1.0 - rho2) } else { f64::INFINITY }
            }
        } else {
            let last = t(order);
            let prev = t(order - 1);
            let ratio = if prev > 0.0 { last / prev } else { 1.0 };
            if ratio < 0.9 { last * ratio / (1.0 - ratio) } else { f64::INFINITY }
        };
        if residual > 1e-6 * (1.0 + total.norm()) {
            return Err(Error::Series(format!(
                "chi series residual estimate {residual:.3e} against total {:.3e}; \
                 raise the order or lower chi",
                total.norm()
            )));
        }
    }
    let v = classical * total;
    if v.im.abs() > 1e-9 * (1.0 + v.re.abs()) {
        return Err(Error::NotReal { imag: v.im });
    }
    Ok(v.re)
}

/// Coefficients of `(x + d1)^(e1) (x + d2)^(e2)` in ascending powers of `x`.
fn binomial_product_poly(d1: C64, e1: usize, d2: C64, e2: usize) -> Vec<C64> {
    let one = vec![C64::new(1.0, 0.0)];
    let p1 = binomial_poly(d1, e1);
    let p2 = binomial_poly(d2, e2);
    let p1 = if e1 == 0 { one.clone() } else { p1 };
    let p2 = if e2 == 0 { one } else { p2 };
    let mut out = vec![C64::new(0.0, 0.0); p1.len() + p2.len() - 1];
    for (i, a) in p1.iter().enumerate() {
        for (j, b) in p2.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn binomial_poly(d: C64, e: usize) -> Vec<C64> {
    // (x + d)^e = sum_i C(e, i) d^(e-i) x^i
    let mut out = vec![C64::new(0.0, 0.0); e + 1];
    let mut binom = 1.0f64;
    let mut dp = vec![C64::new(1.0, 0.0); e + 1];
    for i in 1..=e {
        dp[i] = dp[i - 1] * d;
    }
    for i in 0..=e {
        if i > 0 {
            binom = binom * ((e - i + 1) as f64) / (i as f64);
        }
        out[i] = binom * dp[e - i];
    }
    out
}

/// Independent cross-check of [`nonlinear_pair_expectation`]: the same
/// `chi`-series, truncated at the same total order `k1 + k2 <= order`, with
/// every moment obtained by central finite differences of the plain
/// two-width pair expectation in its widths.
///
/// The step of each term is set by the term's *total* derivative order
/// `2(k1 + k2)` and shared by both axes: a mixed term divides by
/// `h1^{2 k1} h2^{2 k2}`, so roundoff scales with the product of the axis
/// powers, and steps tuned per axis alone turn high mixed partials into
/// noise. Truncation is O(h^2) while roundoff grows like eps / h^{2q}, which
/// the chosen steps balance to ~1e-7 relative at chi <= 0.01. The widest
/// stencil samples widths in `eta +- 3h`, so `eta` must exceed `3 h` and, at
/// `eta = 1`, the state's support bound must admit widths slightly above 2.
pub fn nonlinear_pair_expectation_fd(
    state: &DensityMatrix,
    a1: C64,
    a2: C64,
    eta: f64,
    chi: f64,
    order: usize,
) -> Result<f64> {
    if order == 0 || order > 3 {
        return Err(Error::domain(format!(
            "finite-difference route supports orders 1..=3, got {order}"
        )));
    }
    // Step by total half-order q = k1 + k2 of the term.
    let step = |q: usize| -> f64 {
        match q {
            0 => 0.0,
            1 => 5e-4,
            2 => 3e-3,
            _ => 1.2e-2,
        }
    };
    let reach = order as f64 * step(order);
    if eta <= reach {
        return Err(Error::domain(format!(
            "eta = {eta} is too small for the order-{order} stencil \
             (needs eta > {reach})"
        )));
    }
    let stencil = |k: usize| -> Vec<f64> {
        // Central weights for d^(2k): alternating binomials C(2k, .).
        let n = 2 * k;
        let mut w = Vec::with_capacity(n + 1);
        let mut b = 1.0f64;
        for i in 0..=n {
            if i > 0 {
                b = b * ((n - i + 1) as f64) / (i as f64);
            }
            let sign = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
            w.push(sign * b);
        }
        w
    };
    let g = |s1: f64, s2: f64| -> Result<f64> {
        gaussian_pair_expectation(
            state,
            &PhasePoint::single(a1, s1)?,
            &PhasePoint::single(a2, s2)?,
        )
    };

    let mut fact = vec![1.0f64; order + 1];
    for k in 1..=order {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut total = 0.0f64;
    for k1 in 0..=order {
        for k2 in 0..=order - k1 {
            let h = step(k1 + k2);
            let (h1, h2) = (if k1 == 0 { 0.0 } else { h }, if k2 == 0 { 0.0 } else { h });
            let (w1, w2) = (stencil(k1), stencil(k2));
            let mut deriv = 0.0f64;
            for (i, wi) in w1.iter().enumerate() {
                let s1 = eta + (i as f64 - k1 as f64) * h1;
                for (j, wj) in w2.iter().enumerate() {
                    let s2 = eta + (j as f64 - k2 as f64) * h2;
                    deriv += wi * wj * g(s1, s2)?;
                }
            }
            let scale1 = if k1 == 0 { 1.0 } else { h1.powi(2 * k1 as i32) };
            let scale2 = if k2 == 0 { 1.0 } else { h2.powi(2 * k2 as i32) };
            deriv /= scale1 * scale2;
            total += chi.powi((k1 + k2) as i32) / (fact[k1] * fact[k2]) * deriv;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Normalization check
// ---------------------------------------------------------------------------

/// Square midpoint grid `[-radius, radius]^2` per mode.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub points_per_axis: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { radius: 6.0, points_per_axis: 81 }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::invalid("grid", format!("radius must be positive, got {}", self.radius)));
        }
        if self.points_per_axis < 8 {
            return Err(Error::invalid(
                "grid",
                format!("need at least 8 points per axis, got {}", self.points_per_axis),
            ));
        }
        Ok(())
    }

    fn nodes(&self) -> (Vec<C64>, f64) {
        let n = self.points_per_axis;
        let h = 2.0 * self.radius / n as f64;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let x = -self.radius + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -self.radius + (j as f64 + 0.5) * h;
                out.push(C64::new(x, y));
            }
        }
        (out, h * h)
    }

    fn is_boundary(&self, idx: usize) -> bool {
        let n = self.points_per_axis;
        let (i, j) = (idx / n, idx % n);
        i == 0 || j == 0 || i == n - 1 || j == n - 1
    }
}

/// Result of integrating a distribution over the grid: `value` should be 1,
/// and `tail_estimate` (the outermost ring's contribution) flags a grid whose
/// radius is too small for the state.
#[derive(Debug, Clone, Copy)]
pub struct NormalizationCheck {
    pub value: f64,
    pub tail_estimate: f64,
}

/// Integrates `P(alphas; sigma)` over the product of per-mode square grids.
/// For a sound distribution the result is 1 up to quadrature and truncation
/// error. The integral separates per mode for every stored representation,
/// so the cost is one 2D grid per mode, not a 2N-dimensional product.
pub fn check_normalization(
    state: &DensityMatrix,
    sigma: f64,
    grid: &GridSpec,
) -> Result<NormalizationCheck> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("normalization needs sigma > 0, got {sigma}")));
    }
    grid.validate()?;
    let modes = state.mode_count();
    let (nodes, w) = grid.nodes();
    let scale = (sigma / std::f64::consts::PI).powi(modes as i32);

    match state.repr() {
        Repr::PureSuperposition(comps) => {
            let j_n = comps.len();
            // Per-mode integrals of <u_j|K|u_k> and their boundary rings.
            let mut ints = vec![Array2::<C64>::zeros((j_n, j_n)); modes];
            let mut rings = vec![Array2::<C64>::zeros((j_n, j_n)); modes];
            for (gi, &node) in nodes.iter().enumerate() {
                let kern = ModeKernel::new(node, sigma, state.cutoff(), state.support_bound(), 0)?;
                let boundary = grid.is_boundary(gi);
                for m in 0..modes {
                    let displaced: Vec<Array1<C64>> =
                        comps.iter().map(|(_, vecs)| kern.displace(&vecs[m])).collect();
                    for j in 0..j_n {
                        for k in 0..j_n {
                            let f = kern.form(&displaced[j], &displaced[k])? * w;
                            ints[m][[j, k]] += f;
                            if boundary {
                                rings[m][[j, k]] += f;
                            }
                        }
                    }
                }
            }
            let combine = |per_mode: &dyn Fn(usize) -> Array2<C64>| -> C64 {
                let mut acc = C64::new(0.0, 0.0);
                for (j, (cj, _)) in comps.iter().enumerate() {
                    for (k, (ck, _)) in comps.iter().enumerate() {
                        let mut prod = cj.conj() * ck;
                        for m in 0..modes {
                            prod *= per_mode(m)[[j, k]];
                        }
                        acc += prod;
                    }
                }
                acc
            };
            let value = scale * combine(&|m| ints[m].clone()).re;
            let mut tail = 0.0f64;
            for t in 0..modes {
                let mixed = combine(&|m| if m == t { rings[m].clone() } else { ints[m].clone() });
                tail += (scale * mixed.re).abs();
            }
            Ok(NormalizationCheck { value, tail_estimate: tail })
        }
        Repr::ProductMixture(comps) => {
            let j_n = comps.len();
            let mut ints = vec![vec![0.0f64; modes]; j_n];
            let mut rings = vec![vec![0.0f64; modes]; j_n];
            for (gi, &node) in nodes.iter().enumerate() {
                let kern = ModeKernel::new(node, sigma, state.cutoff(), state.support_bound(), 0)?;
                let boundary = grid.is_boundary(gi);
                for (ci, (_, vecs)) in comps.iter().enumerate() {
                    for m in 0..modes {
                        let dv = kern.displace(&vecs[m]);
                        let f = kern.form(&dv, &dv)?.re * w;
                        ints[ci][m] += f;
                        if boundary {
                            rings[ci][m] += f;
                        }
                    }
                }
            }
            let mut value = 0.0f64;
            let mut tail = 0.0f64;
            for (ci, (cw, _)) in comps.iter().enumerate() {
                let prod: f64 = ints[ci].iter().product();
                value += cw * prod;
                for t in 0..modes {
                    let mut mixed = *cw;
                    for m in 0..modes {
                        mixed *= if m == t { rings[ci][m] } else { ints[ci][m] };
                    }
                    tail += (scale * mixed).abs();
                }
            }
            Ok(NormalizationCheck { value: scale * value, tail_estimate: tail })
        }
        Repr::SingleMode(rho) => {
            let mut value = 0.0f64;
            let mut tail = 0.0f64;
            for (gi, &node) in nodes.iter().enumerate() {
                let kern = ModeKernel::new(node, sigma, state.cutoff(), state.support_bound(), 0)?;
                let f = kern.trace_form(rho)?.re * w;
                value += f;
                if grid.is_boundary(gi) {
                    tail += f.abs();
                }
            }
            Ok(NormalizationCheck { value: scale * value, tail_estimate: scale * tail })
        }
    }
}
