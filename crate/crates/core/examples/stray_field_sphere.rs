//! Uniformly magnetized ball in a box: the interior stray field should be
//! close to `-u/3` and the energy close to `vol(ball)/6`.
//!
//! Usage: `cargo run --release --example stray_field_sphere -- [grid]`

use std::time::Instant;

use lie_galerkin::demag::DemagOperator;
use lie_galerkin::domain::{DomainSpec, Field};

fn main() -> lie_galerkin::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let domain = DomainSpec::neumann_box(&[1.0; 3], &[n; 3])?;
    let t0 = Instant::now();
    let op = DemagOperator::new(&domain, 3)?;
    println!("kernel setup {:.2}s", t0.elapsed().as_secs_f64());

    let radius = 0.45;
    let inside = |x: &[f64]| x.iter().map(|c| (c - 0.5) * (c - 0.5)).sum::<f64>() < radius * radius;
    let u = Field::from_fn(&domain, 3, |x, o| {
        if inside(x) {
            o.copy_from_slice(&[0.0, 0.0, 1.0]);
        }
    });
    let t0 = Instant::now();
    let h = op.demag_field(&u)?;
    println!("field evaluation {:.3}s", t0.elapsed().as_secs_f64());

    // worst cell in the inner half of the ball
    let mut worst: f64 = 0.0;
    for (p, x) in domain.points().iter().enumerate() {
        if x.iter().map(|c| (c - 0.5) * (c - 0.5)).sum::<f64>() < 0.25 * radius * radius {
            let v = h.at(p);
            let dev = (v[0] * v[0] + v[1] * v[1] + (v[2] + 1.0 / 3.0).powi(2)).sqrt();
            worst = worst.max(dev * 3.0);
        }
    }
    let cells = u.values().chunks(3).filter(|v| v[2] != 0.0).count();
    let vol = cells as f64 * domain.cell_volume();
    let energy = op.demag_energy(&u)?;
    println!("interior field relative deviation from -u/3: {worst:.3e}");
    println!("energy = {energy:.6}, vol/6 = {:.6}", vol / 6.0);

    let t0 = Instant::now();
    let (lhs, rhs) = op.lemma_norms(&u)?;
    println!("padded norms {lhs:.6} <= {rhs:.6} ({:.3}s incl. setup)", t0.elapsed().as_secs_f64());
    let t0 = Instant::now();
    op.lemma_norms(&u)?;
    println!("padded evaluation {:.3}s", t0.elapsed().as_secs_f64());
    Ok(())
}
