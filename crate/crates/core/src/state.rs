//! Multimode bosonic states in a truncated Fock basis.
//!
//! States are stored structurally — a superposition of product vectors, a
//! statistical mixture of product vectors, or a dense single-mode matrix —
//! rather than as a dense `d^N x d^N` density matrix, which would be
//! prohibitive for three-mode states at realistic cutoffs. All expectation
//! values reduce to per-mode quadratic forms over the stored vectors.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Per-mode state vector, with a recorded basis index when the vector is a
/// (scaled) Fock basis vector so kernels can use a cheap column extraction.
#[derive(Debug, Clone)]
pub(crate) struct ModeVec {
    pub(crate) amps: Array1<C64>,
    pub(crate) basis_index: Option<usize>,
}

impl ModeVec {
    pub(crate) fn new(amps: Array1<C64>) -> Self {
        let mut nonzero = 0usize;
        let mut idx = 0usize;
        for (i, z) in amps.iter().enumerate() {
            if z.norm_sqr() != 0.0 {
                nonzero += 1;
                idx = i;
            }
        }
        let basis_index = if nonzero == 1 { Some(idx) } else { None };
        ModeVec { amps, basis_index }
    }

    pub(crate) fn dim(&self) -> usize {
        self.amps.len()
    }

    fn inner(&self, other: &ModeVec) -> C64 {
        // <self|other>
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn mean_n(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.norm_sqr())
            .sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Repr {
    /// Pure state `sum_k c_k (x)_m |u_{k,m}>`.
    PureSuperposition(Vec<(C64, Vec<ModeVec>)>),
    /// Mixture `sum_k w_k (x)_m |u_{k,m}><u_{k,m}|`.
    ProductMixture(Vec<(f64, Vec<ModeVec>)>),
    /// Dense single-mode density matrix.
    SingleMode(Array2<C64>),
}

/// A normalized multimode bosonic state on a truncated Fock space.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mode_count: usize,
    cutoff: usize,
    support_bound: Option<usize>,
    repr: Repr,
}

/// Largest dense dimension `cutoff^modes` that [`DensityMatrix::to_dense`]
/// will materialize.
pub const MAX_DENSE_DIM: usize = 4096;

impl DensityMatrix {
    /// Pure superposition of product vectors. Verifies normalization within
    /// 1e-10 (callers supply analytically normalized amplitudes) and then
    /// rescales the residual truncation defect away.
    pub(crate) fn pure_superposition(
        cutoff: usize,
        comps: Vec<(C64, Vec<Array1<C64>>)>,
        support_bound: Option<usize>,
    ) -> Result<Self> {
        let mode_count = check_product_comps(cutoff, comps.iter().map(|(_, v)| v))?;
        let comps: Vec<(C64, Vec<ModeVec>)> = comps
            .into_iter()
            .map(|(c, vecs)| (c, vecs.into_iter().map(ModeVec::new).collect()))
            .collect();
        let mut tr = C64::new(0.0, 0.0);
        for (cj, uj) in &comps {
            for (ck, uk) in &comps {
                let mut ov = C64::new(1.0, 0.0);
                for (a, b) in uj.iter().zip(uk.iter()) {
                    ov *= a.inner(b);
                }
                tr += cj.conj() * ck * ov.conj();
            }
        }
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-12 {
            return Err(Error::invalid(
                "state",
                format!("superposition trace is {} + {}i, not 1 within 1e-10", tr.re, tr.im),
            ));
        }
        let scale = C64::new(1.0 / tr.re.sqrt(), 0.0);
        let comps = comps
            .into_iter()
            .map(|(c, v)| (c * scale, v))
            .collect();
        Ok(DensityMatrix { mode_count, cutoff, support_bound, repr: Repr::PureSuperposition(comps) })
    }

    /// Mixture of product vectors. Vectors are normalized individually with
    /// their mass folded into the weights; the weight sum must be 1 within
    /// 1e-10 and is then rescaled exactly.
    pub(crate) fn product_mixture(
        cutoff: usize,
        comps: Vec<(f64, Vec<Array1<C64>>)>,
        support_bound: Option<usize>,
    ) -> Result<Self> {
        let mode_count = check_product_comps(cutoff, comps.iter().map(|(_, v)| v))?;
        let mut out: Vec<(f64, Vec<ModeVec>)> = Vec::with_capacity(comps.len());
        for (w, vecs) in comps {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid("state", format!("mixture weight {w} must be >= 0")));
            }
            if w == 0.0 {
                continue;
            }
            let mut weight = w;
            let mut mvs = Vec::with_capacity(vecs.len());
            for v in vecs {
                let mv = ModeVec::new(v);
                let n = mv.norm();
                if n == 0.0 {
                    return Err(Error::invalid("state", "mixture component has a zero vector"));
                }
                weight *= n * n;
                let amps = mv.amps.mapv(|z| z / n);
                mvs.push(ModeVec::new(amps));
            }
            out.push((weight, mvs));
        }
        if out.is_empty() {
            return Err(Error::invalid("state", "mixture has no components with positive weight"));
        }
        let total: f64 = out.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(
                "state",
                format!("mixture weights sum to {total}, not 1 within 1e-10"),
            ));
        }
        for (w, _) in &mut out {
            *w /= total;
        }
        Ok(DensityMatrix { mode_count, cutoff, support_bound, repr: Repr::ProductMixture(out) })
    }

    /// Wraps a dense single-mode density matrix: Hermitian within 1e-10,
    /// unit trace within 1e-10, eigenvalues >= -1e-10.
    pub fn from_single_mode_dense(rho: Array2<C64>) -> Result<Self> {
        let (r, c) = rho.dim();
        if r != c || r == 0 {
            return Err(Error::invalid("state", format!("matrix must be square, got {r} x {c}")));
        }
        let mut herm_defect = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                herm_defect = herm_defect.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
            }
        }
        if herm_defect > 1e-10 {
            return Err(Error::invalid(
                "state",
                format!("matrix not Hermitian: max defect {herm_defect:.3e}"),
            ));
        }
        let mut sym = Array2::<C64>::zeros((r, r));
        for i in 0..r {
            for j in 0..r {
                sym[[i, j]] = 0.5 * (rho[[i, j]] + rho[[j, i]].conj());
            }
        }
        let tr: f64 = (0..r).map(|i| sym[[i, i]].re).sum();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("state", format!("trace is {tr}, not 1 within 1e-10")));
        }
        sym.mapv_inplace(|z| z / tr);
        let na = nalgebra::DMatrix::<C64>::from_fn(r, r, |i, j| sym[[i, j]]);
        let eigs = na.symmetric_eigenvalues();
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::invalid(
                "state",
                format!("matrix has negative eigenvalue {min_eig:.3e}"),
            ));
        }
        Ok(DensityMatrix { mode_count: 1, cutoff: r, support_bound: None, repr: Repr::SingleMode(sym) })
    }

    /// Mixture of products of coherent states,
    /// `sum_k w_k (x)_m |beta_{k,m}><beta_{k,m}|` — the generic classical
    /// (positive-P) test ensemble.
    pub fn coherent_product_mixture(cutoff: usize, comps: &[(f64, Vec<C64>)]) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::invalid("state", "coherent mixture needs at least one component"));
        }
        let total: f64 = comps.iter().map(|(w, _)| w).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("state", "coherent mixture weights must have positive sum"));
        }
        let raw: Vec<(f64, Vec<Array1<C64>>)> = comps
            .iter()
            .map(|(w, betas)| {
                let vecs = betas.iter().map(|&b| coherent_vector(b, cutoff)).collect();
                (w / total, vecs)
            })
            .collect();
        // coherent_vector is normalized to its truncated mass, so each
        // component carries weight (w/total) * (1 - tail); the constructor's
        // 1e-10 gate enforces that the cutoff actually holds the tails.
        DensityMatrix::product_mixture(cutoff, raw, None)
    }

    /// Convex mixture of states that are themselves product mixtures or pure
    /// product states (single superposition component). The result's cutoff
    /// is the maximum of the inputs'; shorter vectors are zero-padded.
    pub fn mix(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("state", "mixture of states needs at least one part"));
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("state", "mixture weights must have positive sum"));
        }
        let mode_count = parts[0].1.mode_count;
        let cutoff = parts.iter().map(|(_, s)| s.cutoff).max().unwrap();
        let mut comps: Vec<(f64, Vec<Array1<C64>>)> = Vec::new();
        for (w, s) in parts {
            if s.mode_count != mode_count {
                return Err(Error::invalid("state", "mixture parts must have equal mode counts"));
            }
            let scale = w / total;
            match &s.repr {
                Repr::PureSuperposition(c) if c.len() == 1 => {
                    let vecs = c[0].1.iter().map(|mv| pad_to(&mv.amps, cutoff)).collect();
                    comps.push((scale, vecs));
                }
                Repr::PureSuperposition(_) => {
                    return Err(Error::invalid(
                        "state",
                        "mixing superpositions of products is not supported; \
                         mixture parts must be product states or product mixtures",
                    ));
                }
                Repr::ProductMixture(c) => {
                    for (wk, vecs) in c {
                        let vecs = vecs.iter().map(|mv| pad_to(&mv.amps, cutoff)).collect();
                        comps.push((scale * wk, vecs));
                    }
                }
                Repr::SingleMode(_) => {
                    return Err(Error::invalid(
                        "state",
                        "mixing dense single-mode states is not supported",
                    ));
                }
            }
        }
        DensityMatrix::product_mixture(cutoff, comps, None)
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    /// Per-mode truncation dimension (levels `0..cutoff-1` are stored).
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// `Some(b)` when the state's Fock support may be treated as exactly
    /// bounded by level `b`: genuinely finite (number states) or with
    /// factorially decaying tails that beat any exponential weight (coherent
    /// superpositions). Distribution widths above 2 are valid only for such
    /// states, because the kernel weights `(1-sigma)^n` then grow with `n`.
    pub fn support_bound(&self) -> Option<usize> {
        self.support_bound
    }

    pub(crate) fn repr(&self) -> &Repr {
        &self.repr
    }

    /// Exact trace of the stored object (1 up to float rounding).
    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::PureSuperposition(comps) => {
                let mut tr = C64::new(0.0, 0.0);
                for (cj, uj) in comps {
                    for (ck, uk) in comps {
                        let mut ov = C64::new(1.0, 0.0);
                        for (a, b) in uk.iter().zip(uj.iter()) {
                            ov *= a.inner(b);
                        }
                        tr += cj * ck.conj() * ov;
                    }
                }
                tr.re
            }
            Repr::ProductMixture(comps) => comps.iter().map(|(w, _)| w).sum(),
            Repr::SingleMode(rho) => (0..self.cutoff).map(|i| rho[[i, i]].re).sum(),
        }
    }

    /// Total mean photon number over all modes.
    pub fn mean_photon_number(&self) -> f64 {
        match &self.repr {
            Repr::PureSuperposition(comps) => {
                let modes = self.mode_count;
                let mut total = 0.0;
                for target in 0..modes {
                    let mut acc = C64::new(0.0, 0.0);
                    for (cj, uj) in comps {
                        for (ck, uk) in comps {
                            let mut ov = C64::new(1.0, 0.0);
                            for m in 0..modes {
                                if m == target {
                                    let w: C64 = uk[m]
                                        .amps
                                        .iter()
                                        .zip(uj[m].amps.iter())
                                        .enumerate()
                                        .map(|(n, (a, b))| n as f64 * a.conj() * b)
                                        .sum();
                                    ov *= w;
                                } else {
                                    ov *= uk[m].inner(&uj[m]);
                                }
                            }
                            acc += cj * ck.conj() * ov;
                        }
                    }
                    total += acc.re;
                }
                total
            }
            Repr::ProductMixture(comps) => comps
                .iter()
                .map(|(w, vecs)| w * vecs.iter().map(ModeVec::mean_n).sum::<f64>())
                .sum(),
            Repr::SingleMode(rho) => {
                (0..self.cutoff).map(|n| n as f64 * rho[[n, n]].re).sum()
            }
        }
    }

    /// Reduced single-mode state of mode `keep` (trace over all others).
    pub fn partial_trace(&self, keep: usize) -> Result<DensityMatrix> {
        if keep >= self.mode_count {
            return Err(Error::domain(format!(
                "mode index {keep} out of range for {} modes",
                self.mode_count
            )));
        }
        let d = self.cutoff;
        let rho = match &self.repr {
            Repr::SingleMode(rho) => rho.clone(),
            Repr::PureSuperposition(comps) => {
                let mut rho = Array2::<C64>::zeros((d, d));
                for (cj, uj) in comps {
                    for (ck, uk) in comps {
                        let mut ov = cj * ck.conj();
                        for m in 0..self.mode_count {
                            if m != keep {
                                ov *= uk[m].inner(&uj[m]);
                            }
                        }
                        if ov.norm_sqr() == 0.0 {
                            continue;
                        }
                        for a in 0..d {
                            if uj[keep].amps[a].norm_sqr() == 0.0 {
                                continue;
                            }
                            for b in 0..d {
                                rho[[a, b]] += ov * uj[keep].amps[a] * uk[keep].amps[b].conj();
                            }
                        }
                    }
                }
                rho
            }
            Repr::ProductMixture(comps) => {
                let mut rho = Array2::<C64>::zeros((d, d));
                for (w, vecs) in comps {
                    let u = &vecs[keep].amps;
                    for a in 0..d {
                        if u[a].norm_sqr() == 0.0 {
                            continue;
                        }
                        for b in 0..d {
                            rho[[a, b]] += *w * u[a] * u[b].conj();
                        }
                    }
                }
                rho
            }
        };
        Ok(DensityMatrix {
            mode_count: 1,
            cutoff: d,
            support_bound: self.support_bound,
            repr: Repr::SingleMode(rho),
        })
    }

    /// Dense density matrix, available only while `cutoff^modes` stays small.
    pub fn to_dense(&self) -> Result<Array2<C64>> {
        let dim = self
            .cutoff
            .checked_pow(self.mode_count as u32)
            .filter(|&n| n <= MAX_DENSE_DIM)
            .ok_or_else(|| {
                Error::Truncation(format!(
                    "dense form needs {}^{} entries per side, beyond the {MAX_DENSE_DIM} limit",
                    self.cutoff, self.mode_count
                ))
            })?;
        let mut rho = Array2::<C64>::zeros((dim, dim));
        match &self.repr {
            Repr::SingleMode(r) => Ok(r.clone()),
            Repr::PureSuperposition(comps) => {
                let mut psi = Array1::<C64>::zeros(dim);
                for (c, vecs) in comps {
                    let k = kron_vec(vecs);
                    psi.zip_mut_with(&k, |p, v| *p += c * v);
                }
                for a in 0..dim {
                    for b in 0..dim {
                        rho[[a, b]] = psi[a] * psi[b].conj();
                    }
                }
                Ok(rho)
            }
            Repr::ProductMixture(comps) => {
                for (w, vecs) in comps {
                    let k = kron_vec(vecs);
                    for a in 0..dim {
                        if k[a].norm_sqr() == 0.0 {
                            continue;
                        }
                        for b in 0..dim {
                            rho[[a, b]] += *w * k[a] * k[b].conj();
                        }
                    }
                }
                Ok(rho)
            }
        }
    }
}

fn check_product_comps<'a, I>(cutoff: usize, comps: I) -> Result<usize>
where
    I: Iterator<Item = &'a Vec<Array1<C64>>>,
{
    let mut mode_count = None;
    let mut any = false;
    for vecs in comps {
        any = true;
        match mode_count {
            None => {
                if vecs.is_empty() {
                    return Err(Error::invalid("state", "component has no mode vectors"));
                }
                mode_count = Some(vecs.len());
            }
            Some(mc) => {
                if vecs.len() != mc {
                    return Err(Error::invalid("state", "components disagree on mode count"));
                }
            }
        }
        for v in vecs {
            if v.len() != cutoff {
                return Err(Error::invalid(
                    "state",
                    format!("mode vector length {} differs from cutoff {cutoff}", v.len()),
                ));
            }
        }
    }
    if !any {
        return Err(Error::invalid("state", "state needs at least one component"));
    }
    Ok(mode_count.unwrap())
}

fn pad_to(v: &Array1<C64>, cutoff: usize) -> Array1<C64> {
    if v.len() == cutoff {
        return v.clone();
    }
    let mut out = Array1::<C64>::zeros(cutoff);
    for (i, z) in v.iter().enumerate() {
        out[i] = *z;
    }
    out
}

fn kron_vec(vecs: &[ModeVec]) -> Array1<C64> {
    let mut out = Array1::<C64>::from_elem(1, C64::new(1.0, 0.0));
    for mv in vecs {
        let mut next = Array1::<C64>::zeros(out.len() * mv.dim());
        for (i, a) in out.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (j, b) in mv.amps.iter().enumerate() {
                next[i * mv.dim() + j] = a * b;
            }
        }
        out = next;
    }
    out
}

/// Truncated coherent-state vector `e^{-|b|^2/2} b^n / sqrt(n!)`, without
/// renormalization (the truncation tail stays visible to the caller).
pub(crate) fn coherent_vector(beta: C64, cutoff: usize) -> Array1<C64> {
    let mut v = Array1::<C64>::zeros(cutoff);
    let mut c = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..cutoff {
        if n > 0 {
            c *= beta / C64::new((n as f64).sqrt(), 0.0);
        }
        v[n] = c;
    }
    v
}
