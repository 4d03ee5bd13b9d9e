//! Cosine eigenbasis of the Neumann Laplacian on a box: spectrum, Gram
//! matrix and the spectral Laplacian of a smooth field.
//!
//! Usage: `cargo run --release --example neumann_basis -- [modes]`

use std::f64::consts::PI;

use lie_galerkin::domain::{DomainSpec, Field, ModeBasis};

fn main() -> lie_galerkin::Result<()> {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let d = DomainSpec::neumann_box(&[1.0, 2.0], &[32, 64])?;
    let basis = ModeBasis::neumann(&d, count)?;
    for (i, (lam, label)) in basis.eigenvalues().iter().zip(basis.labels()).enumerate() {
        let exact = (label[0] as f64 * PI).powi(2) + (label[1] as f64 * PI / 2.0).powi(2);
        println!("{:>3}  k = {label:?}  lambda = {lam:.10}  exact {exact:.10}", i + 1);
    }
    let gram = basis.gram();
    let defect = (gram - nalgebra::DMatrix::identity(count, count)).abs().max();
    println!("max |G - I| = {defect:.2e}");

    // u = cos(pi x) cos(pi y / 2) is the mode with lambda = 5 pi^2 / 4
    let u = Field::from_fn(&d, 1, |x, o| o[0] = (PI * x[0]).cos() * (0.5 * PI * x[1]).cos());
    let beta = basis.analyze(&u)?;
    let lap = basis.apply_operator(u.values(), 1);
    let ratio = lap.iter().zip(u.values()).filter(|(_, v)| v.abs() > 0.1).map(|(l, v)| -l / v).fold(0.0, f64::max);
    println!("analyzed coefficients: {:?}", beta.iter().map(|b| (b * 1e6).round() / 1e6).collect::<Vec<_>>());
    println!("-Lap u / u = {ratio:.10}  (5 pi^2 / 4 = {:.10})", 1.25 * PI * PI);
    Ok(())
}
