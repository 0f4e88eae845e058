//! Benchmark-only crate; the measurements live in `benches/suite.rs`.
//!
//! Run with `cargo bench -p pswit-bench`. The suite covers the kernel
//! evaluation, matrix assembly and certification, the multimode and
//! nonlinear criteria, the optimizer, and the click simulator.
