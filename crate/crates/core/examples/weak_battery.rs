//! Weak residual of a damped run against the 32-function battery, in both
//! the derivative and the integrated form, and from stored samples.

use lie_galerkin::flow::run;
use lie_galerkin::selftest::reference_with;
use lie_galerkin::verify::{standard_battery, weak_residual, WeakForm};

fn main() -> lie_galerkin::Result<()> {
    let sc = reference_with("alpha = 0.2\ninitial = twist_y\nN = 45\nT = 0.5")?;
    let tr = run(&sc.system, sc.beta0())?;
    println!("{}", tr.weak.summary());
    let battery = standard_battery(8);
    for form in [WeakForm::Derivative, WeakForm::IntegratedByParts] {
        let rep = weak_residual(&sc.system, &tr.samples, &battery, form)?;
        println!("from {} samples: {}", tr.samples.len(), rep.summary());
    }
    let worst = tr.weak.entries.iter().max_by(|a, b| a.residual.total_cmp(&b.residual)).expect("battery");
    println!("worst test {}: residual {:.3e}, relative {:.3e}", worst.test.label(), worst.residual, worst.relative);
    Ok(())
}
