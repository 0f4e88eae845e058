//! Minimal end-to-end use of the library: build a state, evaluate the
//! two-point criterion, and certify nonclassicality through the full
//! matrix pipeline.
//!
//! Run with `cargo run -p pswit-core --example certify`.

use num_complex::Complex64 as C64;
use pswit_core::{
    build_matrix, make_state, qq_pair, report, PhasePoint, StateKind, StateSpec,
    POSITIVITY_TOLERANCE,
};

fn main() -> pswit_core::Result<()> {
    // A single photon probed at the origin and at sqrt(2), where its
    // two-point determinant is most negative.
    let state = make_state(&StateSpec::new(StateKind::Fock { n: 1 }))?;
    let origin = C64::new(0.0, 0.0);
    let probe = C64::new(2.0f64.sqrt(), 0.0);

    let det = qq_pair(&state, origin, probe)?;
    println!("two-point determinant: {det:.6e}"); // exactly -e^(-2) / (4 pi^2)

    // The same test through the matrix pipeline: assemble the 2x2 matrix of
    // distribution values and run the positivity checks.
    let points = vec![PhasePoint::single(origin, 1.0)?, PhasePoint::single(probe, 1.0)?];
    let matrix = build_matrix(&state, &points)?;
    let verdict = report(&matrix, POSITIVITY_TOLERANCE)?;
    println!(
        "determinant {:.6e}, smallest eigenvalue {:.6e}, nonclassical: {}",
        verdict.determinant, verdict.min_eigenvalue, verdict.nonclassical
    );
    assert!(verdict.nonclassical);
    Ok(())
}
