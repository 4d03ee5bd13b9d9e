//! Eigenpairs of `-div(f grad)` on a periodic interval with `f = 2 + sin x`,
//! computed by the dense and the iterative solver.
//!
//! Usage: `cargo run --release --example weighted_basis -- [points] [modes]`

use std::f64::consts::PI;
use std::time::Instant;

use lie_galerkin::domain::{DomainSpec, EigenMethod, ModeBasis};

fn main() -> lie_galerkin::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let points = args.next().flatten().unwrap_or(256);
    let count = args.next().flatten().unwrap_or(8);
    let d = DomainSpec::torus(&[2.0 * PI], &[points])?;
    let f: Vec<f64> = d.points().iter().map(|x| 2.0 + x[0].sin()).collect();

    let t = Instant::now();
    let dense = ModeBasis::weighted(&d, &f, count, 1e-12, EigenMethod::Dense)?;
    let t_dense = t.elapsed();
    let t = Instant::now();
    let iter = ModeBasis::weighted(&d, &f, count, 1e-13, EigenMethod::Iterative)?;
    let t_iter = t.elapsed();

    println!("  i  dense              iterative          residual");
    for i in 0..count {
        println!(
            "{:>3}  {:<18.12} {:<18.12} {:.1e}",
            i + 1,
            dense.eigenvalues()[i],
            iter.eigenvalues()[i],
            iter.residuals()[i]
        );
    }
    println!("dense {:.1} ms, iterative {:.1} ms", t_dense.as_secs_f64() * 1e3, t_iter.as_secs_f64() * 1e3);
    // constant f = 1 gives integer squares
    let one = ModeBasis::weighted(&d, &vec![1.0; points], 5, 1e-12, EigenMethod::Auto)?;
    println!("f = 1: {:.10?}", one.eigenvalues());
    Ok(())
}
