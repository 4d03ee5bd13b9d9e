//! Structure constants, Killing form and invariant metric of the built-in
//! algebras, plus an algebra read from a table.

use lie_galerkin::algebra::{builtin, parse_algebra_text, validate_algebra, AlgebraKernel};

const ROT3: &str = "\
# so(3) by hand: [e1, e2] = e3 and cyclic
dim 3
1 2 3  1.0
2 1 3 -1.0
2 3 1  1.0
3 2 1 -1.0
3 1 2  1.0
1 3 2 -1.0
";

fn main() -> lie_galerkin::Result<()> {
    for name in ["so3", "su2", "so4"] {
        let alg = builtin(name).expect("built-in algebra");
        println!("{}", validate_algebra(&alg));
        println!("killing form of {name}:{}", alg.killing_matrix());
    }

    let alg = parse_algebra_text("rot3", ROT3)?;
    let (x, y) = ([1.0, 2.0, 0.5], [-0.3, 0.0, 1.0]);
    let z = alg.bracket(&x, &y);
    println!("{}: [x, y] = {z:?}, <x, [x, y]> = {:.1e}", alg.name(), alg.inner(&x, &z));
    Ok(())
}
