//! Runs the reference scenario along decreasing epsilon and prints the
//! comparison table: weak residual, distance to the previous run, mass.

use lie_galerkin::config::Scenario;
use lie_galerkin::flow::{continuation_epsilon, ContinuationSetup};

fn main() -> lie_galerkin::Result<()> {
    let sc = Scenario::reference()?;
    let setup = ContinuationSetup { system: sc.system.clone(), beta0: sc.beta0().to_vec(), jobs: None, seed: 0 };
    let rep = continuation_epsilon(&setup, &[0.2, 0.1, 0.05, 0.025, 0.0125])?;
    print!("{}", rep.to_csv());
    println!("residual decreasing: {}", rep.residual_decreasing());
    for f in &rep.flags {
        println!("flag: {f}");
    }
    Ok(())
}
