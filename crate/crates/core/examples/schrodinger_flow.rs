//! Schrodinger map flow `u_t = [u, Lap u]` on the torus: the exchange
//! energy and the L2 norm stay constant while the field moves.

use lie_galerkin::flow::run;
use lie_galerkin::selftest::reference_with;

fn main() -> lie_galerkin::Result<()> {
    for scheme in ["implicit_midpoint", "rk4"] {
        let sc = reference_with(&format!("epsilon = 0\ninitial = twist_y\nN = 25\nscheme = {scheme}\nT = 2"))?;
        let tr = run(&sc.system, sc.beta0())?;
        let first = &tr.ledger.rows[0];
        let (e0, l0) = (first.grad_energy, first.l2_norm_sq);
        let de = tr.ledger.rows.iter().map(|r| (r.grad_energy - e0).abs()).fold(0.0, f64::max);
        let dl = tr.ledger.rows.iter().map(|r| (r.l2_norm_sq - l0).abs()).fold(0.0, f64::max);
        let moved: f64 =
            sc.beta0().iter().zip(&tr.last().beta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        println!("{scheme:>17}: E0 = {e0:.6}, max |E - E0| = {de:.2e}, max |L2 - L2(0)| = {dl:.2e}, |u(T) - u0| = {moved:.3}");
    }
    Ok(())
}
