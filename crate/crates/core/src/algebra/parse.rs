use std::path::Path;

use super::LieAlgebra;
use crate::error::{Error, Result};

/// Parses the text format
///
/// ```text
/// # comment
/// dim 3
/// 1 2 3  1.0
/// 2 1 3 -1.0
/// ```
///
/// Indices are 1-based. Only nonzero constants need to be listed.
pub fn parse_algebra_text(name: &str, text: &str) -> Result<LieAlgebra> {
    let mut dim: Option<usize> = None;
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::format(name, format!("line {}: {msg}", lineno + 1));
        let toks: Vec<&str> = line.split_whitespace().collect();
        if dim.is_none() {
            if toks.len() != 2 || toks[0] != "dim" {
                return Err(err("expected header `dim m`".into()));
            }
            let m: usize = toks[1].parse().map_err(|_| err(format!("bad dimension `{}`", toks[1])))?;
            if m == 0 {
                return Err(err("dimension must be positive".into()));
            }
            dim = Some(m);
            continue;
        }
        let m = dim.unwrap();
        if toks.len() != 4 {
            return Err(err("expected `i j k value`".into()));
        }
        let mut idx = [0usize; 3];
        for (slot, tok) in idx.iter_mut().zip(&toks[..3]) {
            let v: usize = tok.parse().map_err(|_| err(format!("bad index `{tok}`")))?;
            if v == 0 || v > m {
                return Err(err(format!("index {v} outside 1..={m}")));
            }
            *slot = v - 1;
        }
        let value: f64 = toks[3].parse().map_err(|_| err(format!("bad value `{}`", toks[3])))?;
        entries.push((idx[0], idx[1], idx[2], value));
    }
    let m = dim.ok_or_else(|| Error::format(name, "missing `dim m` header"))?;
    LieAlgebra::new(name, m, &entries)
}

pub fn load_algebra_file(path: &Path) -> Result<LieAlgebra> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_algebra_text(&name, &text).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(path, message),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{so3, AlgebraKernel};

    const SO3_TEXT: &str = "\
# rotations
dim 3
1 2 3 1
2 1 3 -1
2 3 1 1
3 2 1 -1
3 1 2 1
1 3 2 -1
";

    #[test]
    fn parses_so3_table() {
        let a = parse_algebra_text("file", SO3_TEXT).unwrap();
        let b = so3();
        let x = [0.3, -0.2, 0.9];
        let y = [1.0, 0.5, -0.4];
        assert_eq!(a.bracket(&x, &y), b.bracket(&x, &y));
        assert_eq!(a.metric_scale(), 0.5);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_algebra_text("f", "3\n").is_err());
        assert!(parse_algebra_text("f", "dim 3\n1 2 4 1\n").is_err());
        assert!(parse_algebra_text("f", "dim 3\n1 2 3\n").is_err());
        assert!(parse_algebra_text("f", "").is_err());
        // antisymmetry missing
        assert!(matches!(
            parse_algebra_text("f", "dim 3\n1 2 3 1\n"),
            Err(Error::Algebra(_))
        ));
    }

    #[test]
    fn loads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rot.alg");
        std::fs::write(&p, SO3_TEXT).unwrap();
        let a = load_algebra_file(&p).unwrap();
        assert_eq!(a.name(), "rot");
        assert!(load_algebra_file(&dir.path().join("missing")).is_err());
    }
}
