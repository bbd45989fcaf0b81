//! Plain-text model checkpoints for warm starts.
//!
//! ```text
//! # mgcoop value-model checkpoint
//! schema_version 1
//! n_mgs 2
//! phi 0.01
//! mu 0.00001
//! delta_init 1000
//! theta <5·n_mgs+1 values>
//! delta_inverse <dim>
//! <dim rows of dim values>
//! ```
//!
//! The matrix block is `Δ⁻¹`, the form the estimator works in. Numbers use
//! Rust's shortest round-trip formatting, so a save/load cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{feature_dim, RlError, RlsState, ValueModel};
use crate::scenario::SCHEMA_VERSION;

pub fn checkpoint_to_string(model: &ValueModel, rls: &RlsState) -> String {
    let mut s = String::from("# mgcoop value-model checkpoint\n");
    let _ = writeln!(s, "schema_version {SCHEMA_VERSION}");
    let _ = writeln!(s, "n_mgs {}", model.n_mgs());
    let _ = writeln!(s, "phi {}", rls.phi);
    let _ = writeln!(s, "mu {}", rls.mu);
    let _ = writeln!(s, "delta_init {}", rls.delta_init);
    let theta: Vec<String> = model.theta.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "theta {}", theta.join(" "));
    let _ = writeln!(s, "delta_inverse {}", rls.dim());
    for r in 0..rls.dim() {
        let row: Vec<String> = rls.information().row(r).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn parse_checkpoint(text: &str) -> Result<(ValueModel, RlsState), RlError> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut field = |key: &str| -> Result<(usize, Vec<String>), RlError> {
        let (no, line) =
            lines.next().ok_or_else(|| RlError::Checkpoint { line: 0, msg: format!("missing `{key}`") })?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(RlError::Checkpoint { line: no, msg: format!("expected `{key}`") });
        }
        Ok((no, parts.map(str::to_owned).collect()))
    };
    fn num(no: usize, s: &str) -> Result<f64, RlError> {
        s.parse().map_err(|_| RlError::Checkpoint { line: no, msg: format!("bad number `{s}`") })
    }
    fn one(no: usize, v: &[String]) -> Result<f64, RlError> {
        match v {
            [x] => num(no, x),
            _ => Err(RlError::Checkpoint { line: no, msg: "expected one value".into() }),
        }
    }

    let (no, v) = field("schema_version")?;
    if one(no, &v)? as u32 != SCHEMA_VERSION {
        return Err(RlError::Checkpoint { line: no, msg: "unsupported schema_version".into() });
    }
    let (no, v) = field("n_mgs")?;
    let n_mgs = one(no, &v)? as usize;
    let (no, v) = field("phi")?;
    let phi = one(no, &v)?;
    let (no, v) = field("mu")?;
    let mu = one(no, &v)?;
    let (no, v) = field("delta_init")?;
    let delta_init = one(no, &v)?;
    let (no, v) = field("theta")?;
    let theta: Vec<f64> = v.iter().map(|s| num(no, s)).collect::<Result<_, _>>()?;
    let d = feature_dim(n_mgs);
    if theta.len() != d {
        return Err(RlError::Checkpoint { line: no, msg: format!("theta has {} values, expected {d}", theta.len()) });
    }
    let (no, v) = field("delta_inverse")?;
    if one(no, &v)? as usize != d {
        return Err(RlError::Checkpoint { line: no, msg: "delta dimension mismatch".into() });
    }
    let mut info = DMatrix::zeros(d, d);
    for r in 0..d {
        let (no, line) = lines.next().ok_or_else(|| RlError::Checkpoint { line: 0, msg: "truncated delta".into() })?;
        let row: Vec<f64> = line.split_whitespace().map(|s| num(no, s)).collect::<Result<_, _>>()?;
        if row.len() != d {
            return Err(RlError::Checkpoint { line: no, msg: format!("row has {} values, expected {d}", row.len()) });
        }
        for (c, val) in row.into_iter().enumerate() {
            info[(r, c)] = val;
        }
    }
    let model = ValueModel::from_theta(n_mgs, DVector::from_vec(theta))?;
    let rls = RlsState::from_information(info, phi, mu, delta_init)?;
    Ok((model, rls))
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &ValueModel, rls: &RlsState) -> Result<(), RlError> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_string(model, rls))
        .map_err(|source| RlError::Io { path: path.to_owned(), source })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ValueModel, RlsState), RlError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RlError::Io { path: path.to_owned(), source })?;
    parse_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_exact(theta in proptest::collection::vec(-1e6f64..1e6, 11), scale in 1e-3f64..1e6) {
            let model = ValueModel::from_theta(2, DVector::from_vec(theta)).unwrap();
            let mut info = DMatrix::identity(11, 11) * scale;
            info[(0, 3)] = 1.0 / 3.0;
            info[(3, 0)] = 1.0 / 3.0;
            let rls = RlsState::from_information(info, 0.01, 1e-5, 1e3).unwrap();
            let (m2, r2) = parse_checkpoint(&checkpoint_to_string(&model, &rls)).unwrap();
            prop_assert_eq!(m2, model);
            prop_assert_eq!(r2, rls);
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = checkpoint_to_string(&ValueModel::zeros(1), &RlsState::new(6, 0.0, 0.0, 1.0).unwrap());
        let cut: String = text.lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_checkpoint(&cut), Err(RlError::Checkpoint { .. })));
    }
}
