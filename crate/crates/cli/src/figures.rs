//! Bundled dataset builders: each produces a CSV reproducing one of the
//! reference curves/maps from fixed, seeded searches so outputs are
//! bit-identical across runs.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use anyhow::{bail, Result};
use num_complex::Complex64 as C64;

use pswit_core::{
    make_state, minimize, qq_multi, scan, CriterionSpec, FreeParam, ScanAxis, SearchSpec,
    StateKind, StateSpec, Strategy,
};

use crate::formats::{fmt_f64, scan_table_csv};

/// Builds the named dataset. Unknown names are an error.
pub fn build(figure: &str) -> Result<Vec<u8>> {
    match figure {
        "fig2" => fock_minima(),
        "fig3" => squeezed_sweep(),
        "fig4b" => dephased_pair_map(),
        "fig5" => multimode_cat_sweep(),
        "fig6" => nonlinear_cat_map(),
        other => bail!("unknown figure id `{other}` (expected fig2, fig3, fig4b, fig5, or fig6)"),
    }
}

fn make(kind: StateKind, cutoff: Option<usize>) -> Result<pswit_core::DensityMatrix> {
    Ok(make_state(&StateSpec { kind, cutoff })?)
}

/// Radial two-point search: first point pinned at the origin, second swept
/// along the positive real axis.
fn radial_pair_search(hi: f64) -> SearchSpec {
    let mut fixed = BTreeMap::new();
    fixed.insert("re_a1".to_string(), 0.0);
    fixed.insert("im_a1".to_string(), 0.0);
    fixed.insert("im_a2".to_string(), 0.0);
    SearchSpec {
        criterion: CriterionSpec::QqPair,
        fixed,
        free: vec![FreeParam::new("re_a2", 0.0, hi)],
        strategy: Strategy::GridThenSimplex,
        grid_resolution: 81,
        max_iters: 200,
        seed: 0,
    }
}

/// Exact determinant minimum for a photon-number state with the first
/// point at the origin: -e^{-2n} (n/2)^{2n} / (pi n!)^2.
fn fock_minimum_value(n: usize) -> f64 {
    let nf: f64 = (1..=n).map(|k| k as f64).product();
    -(-2.0 * n as f64).exp() * (n as f64 / 2.0).powi(2 * n as i32) / (PI * nf).powi(2)
}

/// Photon-number states n = 1..10: optimal second point and determinant,
/// with the closed-form value alongside.
fn fock_minima() -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "alpha2", "det", "closed_form"])?;
    for n in 1..=10usize {
        let state = make(StateKind::Fock { n }, None)?;
        let spec = radial_pair_search(6.0);
        let result = minimize(&state, &spec)?;
        let alpha2 = result.best_params["re_a2"];
        w.write_record(&[
            n.to_string(),
            fmt_f64(alpha2),
            fmt_f64(result.best_value),
            fmt_f64(fock_minimum_value(n)),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Squeezed vacuum r = 0.00..1.50: optimal second point and determinant.
fn squeezed_sweep() -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "alpha2", "det"])?;
    for i in 0..=150usize {
        let r = 0.01 * i as f64;
        let state = make(StateKind::SqueezedVacuum { r, phi: 0.0 }, None)?;
        let spec = radial_pair_search(4.0);
        let result = minimize(&state, &spec)?;
        w.write_record(&[
            fmt_f64(r),
            fmt_f64(result.best_params["re_a2"]),
            fmt_f64(result.best_value),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Phase-diffused two-mode squeezed vacuum at mean interaction 1/sqrt(2):
/// two-mode determinant over the (alpha, beta) >= 0 quadrant, with the
/// first point at (alpha, 0) and the second at (0, beta).
fn dephased_pair_map() -> Result<Vec<u8>> {
    let state = make(
        StateKind::PhaseDiffusedTmsv {
            lambda: C64::new(FRAC_1_SQRT_2, 0.0),
        },
        None,
    )?;
    let n = 81usize;
    let hi = 2.5;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "beta", "det"])?;
    for i in 0..n {
        let x = hi * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let y = hi * j as f64 / (n - 1) as f64;
            let p1 = [C64::new(x, 0.0), C64::new(0.0, 0.0)];
            let p2 = [C64::new(0.0, 0.0), C64::new(y, 0.0)];
            let det = qq_multi(&state, &p1, &p2)?;
            w.write_record(&[fmt_f64(x), fmt_f64(y), fmt_f64(det)])?;
        }
    }
    Ok(w.into_inner()?)
}

/// Three-mode odd superposition of +/-gamma coherent products, gamma =
/// 0.05..2.00: determinant minimised over a shared real first point, with
/// the second point at the origin.
fn multimode_cat_sweep() -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["gamma", "alpha1", "det"])?;
    for i in 1..=40usize {
        let gamma = 0.05 * i as f64;
        let state = make(
            StateKind::Cat {
                gamma: C64::new(gamma, 0.0),
                modes: 3,
                parity: -1,
            },
            None,
        )?;
        let mut fixed = BTreeMap::new();
        fixed.insert("im_a1".to_string(), 0.0);
        fixed.insert("re_a2".to_string(), 0.0);
        fixed.insert("im_a2".to_string(), 0.0);
        let spec = SearchSpec {
            criterion: CriterionSpec::QqMultiUniform,
            fixed,
            free: vec![FreeParam::new("re_a1", 0.0, 3.0)],
            strategy: Strategy::GridThenSimplex,
            grid_resolution: 81,
            max_iters: 200,
            seed: 0,
        };
        let result = minimize(&state, &spec)?;
        w.write_record(&[
            fmt_f64(gamma),
            fmt_f64(result.best_params["re_a1"]),
            fmt_f64(result.best_value),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Even single-mode cat at gamma = 1 probed with the nonlinear-response
/// pair determinant (eta = 1, chi = 0.01) over an 81x81 grid in
/// (re a1, im a2).
fn nonlinear_cat_map() -> Result<Vec<u8>> {
    let state = make(
        StateKind::Cat {
            gamma: C64::new(1.0, 0.0),
            modes: 1,
            parity: 1,
        },
        None,
    )?;
    let mut fixed = BTreeMap::new();
    fixed.insert("im_a1".to_string(), 0.0);
    fixed.insert("re_a2".to_string(), 0.0);
    fixed.insert("eta".to_string(), 1.0);
    fixed.insert("chi".to_string(), 0.01);
    let axes = [
        ScanAxis::linspace("re_a1", -1.5, 1.5, 81)?,
        ScanAxis::linspace("im_a2", -1.5, 1.5, 81)?,
    ];
    let table = scan(&state, &CriterionSpec::NonlinearPair, &fixed, &axes)?;
    scan_table_csv(&table)
}
