//! Single-mode LLG with easy-plane anisotropy `Phi = u3^2`: the spin
//! precesses about e3 at rate `2 cos(theta)`. With damping it relaxes
//! towards the plane.

use std::f64::consts::PI;

use lie_galerkin::flow::run;
use lie_galerkin::selftest::macrospin_config;

fn main() -> lie_galerkin::Result<()> {
    let cfg = macrospin_config();
    let sc = cfg.resolve()?;
    let tr = run(&sc.system, sc.beta0())?;
    let th = PI / 3.0;
    let w = 2.0 * th.cos();
    println!("   t      u1         u2         u3         error");
    for s in tr.samples.iter().step_by(10) {
        let exact = [th.sin() * (w * s.t).cos(), -th.sin() * (w * s.t).sin(), th.cos()];
        let err = (0..3).map(|a| (s.beta[a] - exact[a]).abs()).fold(0.0, f64::max);
        println!("{:5.2}  {:+.7}  {:+.7}  {:+.7}  {err:.1e}", s.t, s.beta[0], s.beta[1], s.beta[2]);
    }

    let damped = cfg.with_overrides("alpha = 0.5\nT = 10")?.resolve()?;
    let tr = run(&damped.system, damped.beta0())?;
    let u = &tr.last().beta;
    println!("alpha = 0.5, t = 10: u = {u:.5?}, |u| = {:.12}", u.iter().map(|v| v * v).sum::<f64>().sqrt());
    Ok(())
}
