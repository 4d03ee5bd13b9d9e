//! Damping sweep towards the undamped flow. The damping energy
//! `alpha int int |u_t|^2` stays below the common a-priori bound and the
//! damping pairing vanishes with alpha.

use lie_galerkin::flow::{continuation_alpha, ContinuationSetup};
use lie_galerkin::selftest::reference_with;

fn main() -> lie_galerkin::Result<()> {
    let sc = reference_with("initial = twist_y\nT = 0.5")?;
    let setup = ContinuationSetup { system: sc.system.clone(), beta0: sc.beta0().to_vec(), jobs: None, seed: 0 };
    let rep = continuation_alpha(&setup, &[0.2, 0.1, 0.05, 0.01])?;
    print!("{}", rep.to_csv());
    println!("common bound {:.4e}, bounded: {}, pairing decreasing: {}", rep.common_bound, rep.bounded(), rep.pairing_decreasing());
    Ok(())
}
