use super::LieAlgebra;

pub const BUILTIN_NAMES: &[&str] = &["so3", "su2", "so4", "cross"];

fn levi_civita_entries() -> Vec<(usize, usize, usize, f64)> {
    let mut e = Vec::new();
    for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        e.push((i, j, k, 1.0));
        e.push((j, i, k, -1.0));
    }
    e
}

/// so(3) in the basis of infinitesimal rotations: `[e_i, e_j] = eps_ijk e_k`.
pub fn so3() -> LieAlgebra {
    LieAlgebra::new("so3", 3, &levi_civita_entries()).expect("so3 constants are valid")
}

/// su(2) in the basis `e_k = -(i/2) sigma_k`, which has the same constants as so(3).
pub fn su2() -> LieAlgebra {
    LieAlgebra::new("su2", 3, &levi_civita_entries()).expect("su2 constants are valid")
}

/// Index pairs of the so(4) basis `L_ab = E_ab - E_ba`, in order 01, 02, 03, 12, 13, 23.
pub const SO4_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// so(4) with `[L_ab, L_cd] = d_bc L_ad - d_ac L_bd - d_bd L_ac + d_ad L_bc`.
pub fn so4() -> LieAlgebra {
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    // L_xy for arbitrary x != y, expressed as +/- a basis element
    let index = |x: usize, y: usize| -> Option<(usize, f64)> {
        if x == y {
            return None;
        }
        let (p, q, s) = if x < y { (x, y, 1.0) } else { (y, x, -1.0) };
        SO4_PAIRS.iter().position(|&pr| pr == (p, q)).map(|i| (i, s))
    };
    let mut entries = Vec::new();
    for (i, &(a, b)) in SO4_PAIRS.iter().enumerate() {
        for (j, &(c, d)) in SO4_PAIRS.iter().enumerate() {
            let mut out = [0.0; 6];
            for (coef, x, y) in [
                (delta(b, c), a, d),
                (-delta(a, c), b, d),
                (-delta(b, d), a, c),
                (delta(a, d), b, c),
            ] {
                if coef != 0.0 {
                    if let Some((k, s)) = index(x, y) {
                        out[k] += coef * s;
                    }
                }
            }
            for (k, &v) in out.iter().enumerate() {
                if v != 0.0 {
                    entries.push((i, j, k, v));
                }
            }
        }
    }
    LieAlgebra::new("so4", 6, &entries).expect("so4 constants are valid")
}

/// Looks up a structure-constant algebra by name. `cross` is not included
/// here because it is not a [`LieAlgebra`]; see [`super::resolve_algebra`].
pub fn builtin(name: &str) -> Option<LieAlgebra> {
    match name {
        "so3" => Some(so3()),
        "su2" => Some(su2()),
        "so4" => Some(so4()),
        _ => None,
    }
}
