//! Deterministic run reports.
//!
//! A [`Report`] collects every law check of a run together with an echo of
//! the inputs that determine the arithmetic (seed, tolerance, truncation,
//! cutoff, pairing normalizations) and output tables: level dimensions,
//! intertwiner dimensions, and content digests of the structure constants.
//! Serialization is byte-deterministic for a fixed input and seed: all maps
//! are ordered, and digests hash values rounded to a fixed grid so that
//! last-bit float drift cannot change a golden file.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest as _, Sha256};

use crate::check::{CheckSet, LawCheck};
use crate::linalg::CMat;
use crate::reconstruct::TruncatedFrameBundle;
use crate::scalar::Real;
use crate::so2::CircleAlgebra;

/// Rounding grid for the fine digest: far below every verification
/// tolerance, so two runs agree only if they are numerically identical for
/// all practical purposes.
pub const FINE_GRID: f64 = 1e-12;

/// Rounding grid for the gauge digest: coarse enough to absorb the residual
/// noise left after canonical gauge fixing.
pub const GAUGE_GRID: f64 = 1e-8;

/// One verified law, as it appears in a report. `anchor` is the stable
/// machine-readable identifier of the law (the dotted check name); golden
/// files and audits key on it.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
    pub context: String,
}

impl From<&LawCheck> for CheckRecord {
    fn from(c: &LawCheck) -> Self {
        CheckRecord {
            name: c.name.clone(),
            anchor: c.name.clone(),
            residual: c.residual,
            bound: c.bound,
            pass: c.pass,
            context: c.context.clone(),
        }
    }
}

/// Echo of everything that determines the run's arithmetic.
#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub seed: u64,
    pub tolerance: f64,
    /// Group parameter `n`, for rotation-group modes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    /// Tensor-power truncation, for rotation-group modes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    /// Kept classes (rotation-group modes) or grades (circle mode).
    pub cutoff: Vec<String>,
    /// Norm of the conjugate pairing vector per class, where one is chosen.
    pub pairing_norms: BTreeMap<String, f64>,
}

impl Environment {
    pub fn new(seed: u64, tolerance: f64) -> Self {
        Environment {
            seed,
            tolerance,
            group: None,
            truncation: None,
            cutoff: Vec::new(),
            pairing_norms: BTreeMap::new(),
        }
    }
}

/// One row of the level-dimension table.
#[derive(Clone, Debug, Serialize)]
pub struct LevelDim {
    pub label: String,
    pub dim: usize,
}

/// One row of the intertwiner-dimension table.
#[derive(Clone, Debug, Serialize)]
pub struct HomDim {
    pub k: usize,
    pub l: usize,
    pub dim: usize,
}

/// Content digest of a tensor family at the two rounding grids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TensorDigest {
    pub fine: String,
    pub gauge: String,
}

/// Output tables of a run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Tables {
    pub level_dims: Vec<LevelDim>,
    pub intertwiner_dims: Vec<HomDim>,
    pub digests: BTreeMap<String, TensorDigest>,
}

/// A complete, deterministic run report.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub mode: String,
    pub environment: Environment,
    pub checks: Vec<CheckRecord>,
    pub tables: Tables,
    pub pass: bool,
}

impl Report {
    pub fn new(mode: &str, environment: Environment) -> Self {
        Report {
            mode: mode.to_string(),
            environment,
            checks: Vec::new(),
            tables: Tables::default(),
            pass: true,
        }
    }

    /// Append every check of a set, updating the overall verdict.
    pub fn add_checks(&mut self, set: &CheckSet) {
        for c in set.checks() {
            self.pass &= c.pass;
            self.checks.push(CheckRecord::from(c));
        }
    }

    /// Record a failure that prevented checks from running at all.
    pub fn add_failure(&mut self, name: &str, context: &str) {
        self.pass = false;
        self.checks.push(CheckRecord {
            name: name.to_string(),
            anchor: name.to_string(),
            residual: f64::INFINITY,
            bound: 0.0,
            pass: false,
            context: context.to_string(),
        });
    }

    /// Canonical JSON rendering (pretty, trailing newline). Byte-identical
    /// for identical report contents.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

/// SHA-256 over the little-endian 64-bit integers `round(v / grid)`, rendered
/// as lowercase hex.
pub fn digest_stream(values: impl IntoIterator<Item = f64>, grid: f64) -> String {
    let mut h = Sha256::new();
    for v in values {
        let r = (v / grid).round();
        let q = if r.is_nan() || r >= i64::MAX as f64 {
            i64::MAX
        } else if r <= i64::MIN as f64 {
            i64::MIN
        } else {
            r as i64
        };
        h.update(q.to_le_bytes());
    }
    let bytes = h.finalize();
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write;
        write!(out, "{b:02x}").expect("hex");
    }
    out
}

/// Digest a value stream at both grids.
pub fn tensor_digest(values: &[f64]) -> TensorDigest {
    TensorDigest {
        fine: digest_stream(values.iter().copied(), FINE_GRID),
        gauge: digest_stream(values.iter().copied(), GAUGE_GRID),
    }
}

fn push_mat<T: Real>(out: &mut Vec<f64>, m: &CMat<T>) {
    out.push(m.rows() as f64);
    out.push(m.cols() as f64);
    for z in m.data() {
        out.push(z.re.as_f64());
        out.push(z.im.as_f64());
    }
}

/// Flatten a graded bundle's structure constants into a canonical value
/// stream: level classes and dimensions, then every realized pair's
/// multiplication data in pair order, then the involution maps.
pub fn bundle_structure_values<T: Real>(bundle: &TruncatedFrameBundle<T>) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, lv) in bundle.levels.iter().enumerate() {
        out.push(i as f64);
        out.push(lv.class_id as f64);
        out.push(bundle.level_dim(i) as f64);
    }
    for ((i, j), pp) in &bundle.products {
        out.push(*i as f64);
        out.push(*j as f64);
        push_mat(&mut out, &pp.coeff_mul);
        for comp in &pp.comps {
            out.push(comp.level as f64);
            push_mat(&mut out, &comp.coeff_adj);
            push_mat(&mut out, &comp.iso);
        }
        for cls in &pp.dropped {
            out.push(*cls as f64);
        }
    }
    for (i, inv) in &bundle.involutions {
        out.push(*i as f64);
        out.push(inv.target as f64);
        push_mat(&mut out, &inv.map);
    }
    out
}

/// Flatten a circle-graded algebra's structure constants: level dimensions,
/// every multiplication map in grade order, then the involution maps.
pub fn so2_structure_values<T: Real>(ca: &CircleAlgebra<T>) -> Vec<f64> {
    let mut out = Vec::new();
    let c = ca.cutoff() as i64;
    for k in -c..=c {
        out.push(k as f64);
        out.push(ca.level_dim(k) as f64);
    }
    for ((k1, k2), p) in &ca.fs.psi {
        out.push(*k1 as f64);
        out.push(*k2 as f64);
        push_mat(&mut out, p);
    }
    for (k, m) in (-c..=c).zip(&ca.involutions) {
        out.push(k as f64);
        push_mat(&mut out, m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbmod::AlgebraShape;
    use crate::scalar::Ctx;
    use crate::so2::{build_so2_algebra, factor_system, MoritaBimodule};

    #[test]
    fn digests_are_stable_and_grid_sensitive() {
        let a = [1.0, 0.5, -0.25];
        let b = [1.0, 0.5, -0.25];
        assert_eq!(tensor_digest(&a), tensor_digest(&b));
        // A perturbation below the gauge grid but above the fine grid moves
        // only the fine digest.
        let c = [1.0 + 3e-10, 0.5, -0.25];
        let da = tensor_digest(&a);
        let dc = tensor_digest(&c);
        assert_ne!(da.fine, dc.fine);
        assert_eq!(da.gauge, dc.gauge);
        // A perturbation above the gauge grid moves both.
        let d = [1.0 + 3e-7, 0.5, -0.25];
        let dd = tensor_digest(&d);
        assert_ne!(da.gauge, dd.gauge);
    }

    #[test]
    fn report_json_is_deterministic_and_ordered() {
        let mut env = Environment::new(7, 1e-9);
        env.group = Some(3);
        env.cutoff = vec!["0".into(), "1".into()];
        env.pairing_norms.insert("1".into(), 3.0_f64.sqrt());
        let mut r = Report::new("check", env);
        let mut set = CheckSet::new();
        set.record("law.alpha", 1e-12_f64, 1e-9, "somewhere");
        set.record_flag("law.beta", true, "flag");
        r.add_checks(&set);
        r.tables.level_dims.push(LevelDim {
            label: "0".into(),
            dim: 1,
        });
        r.tables
            .digests
            .insert("structure".into(), tensor_digest(&[1.0, 2.0]));
        let j1 = r.to_json();
        let j2 = r.to_json();
        assert_eq!(j1, j2);
        assert!(r.pass);
        assert!(j1.contains("\"anchor\": \"law.alpha\""));
        assert!(j1.ends_with('\n'));
    }

    #[test]
    fn failure_records_flip_the_verdict() {
        let mut r = Report::new("build", Environment::new(1, 1e-9));
        r.add_failure("pipeline", "construction failed");
        assert!(!r.pass);
        assert!(r.to_json().contains("pipeline"));
    }

    #[test]
    fn so2_structure_stream_is_reproducible() {
        let ctx = Ctx::<f64>::default();
        let m = MoritaBimodule::<f64>::over_self(&AlgebraShape::scalar());
        let fs = factor_system(&m, 2, &ctx).unwrap();
        let ca = build_so2_algebra(fs).unwrap();
        let v1 = so2_structure_values(&ca);
        let fs2 = factor_system(&m, 2, &ctx).unwrap();
        let ca2 = build_so2_algebra(fs2).unwrap();
        let v2 = so2_structure_values(&ca2);
        assert_eq!(tensor_digest(&v1), tensor_digest(&v2));
    }
}
