//! The JSON job configuration shared by all commands.

use std::fs;
use std::path::{Path, PathBuf};

use qheat::verify::{CheckKind, Tolerances};
use qheat::{Complex64, FormIndex, QuadricForm};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::CliError;

const FIELDS: [&str; 9] = ["quadric", "lambda", "L", "s", "points", "zt", "grid", "verify", "initial"];

/// A validated job configuration.
#[derive(Debug, Clone)]
pub struct JobConfig {
    /// Raw bytes of the configuration file, hashed into output headers.
    pub raw: Vec<u8>,
    pub quadric: Option<QuadricForm>,
    pub lambda: Option<Vec<f64>>,
    pub form: Option<FormIndex>,
    pub s: Option<Vec<f64>>,
    pub points: Option<Vec<Vec<Complex64>>>,
    pub zt: Option<Vec<Complex64>>,
    pub grid: Option<GridBlock>,
    pub verify: Option<VerifyBlock>,
    pub initial: Option<InitialBlock>,
}

/// A box `[-R, R]^{2n}` sampled with `points` nodes per axis.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub half_width: HalfWidth,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum HalfWidth {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

impl GridBlock {
    pub fn half_widths(&self, dim: usize) -> Vec<f64> {
        match &self.half_width {
            HalfWidth::Uniform(r) => vec![*r; dim],
            HalfWidth::PerAxis(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    #[serde(default)]
    pub checks: Option<Vec<CheckKind>>,
    #[serde(default)]
    pub corrupt_phase: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    pub expr: String,
    pub grid: GridBlock,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Times {
    One(f64),
    Many(Vec<f64>),
}

fn field_error(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("field `{name}`: {msg}"))
}

fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, name: &str) -> Result<Option<T>, CliError> {
    match map.remove(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| field_error(name, e)),
    }
}

fn complex_point(raw: Vec<[f64; 2]>) -> Vec<Complex64> {
    raw.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()
}

impl JobConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = fs::read(path).map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(raw, &base)
    }

    /// Parses configuration bytes; relative quadric paths resolve against `base`.
    pub fn parse(raw: Vec<u8>, base: &Path) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_slice(&raw).map_err(|e| CliError::Input(format!("config is not valid JSON: {e}")))?;
        let Value::Object(mut map) = value else {
            return Err(CliError::Input("config must be a JSON object".into()));
        };
        if let Some(unknown) = map.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(CliError::Input(format!("unknown field `{unknown}`")));
        }

        let quadric = match map.remove("quadric") {
            None | Some(Value::Null) => None,
            Some(Value::String(p)) => Some(load_quadric(&base.join(p))?),
            Some(v) => Some(serde_json::from_value::<QuadricForm>(v).map_err(|e| field_error("quadric", e))?),
        };
        let lambda: Option<Vec<f64>> = take(&mut map, "lambda")?;
        let form_raw: Option<Vec<usize>> = take(&mut map, "L")?;
        let s = take::<Times>(&mut map, "s")?.map(|t| match t {
            Times::One(v) => vec![v],
            Times::Many(v) => v,
        });
        let points: Option<Vec<Vec<Complex64>>> = take::<Vec<Vec<[f64; 2]>>>(&mut map, "points")?.map(|p| p.into_iter().map(complex_point).collect());
        let zt = take::<Vec<[f64; 2]>>(&mut map, "zt")?.map(complex_point);
        let grid: Option<GridBlock> = take(&mut map, "grid")?;
        let verify: Option<VerifyBlock> = take(&mut map, "verify")?;
        let initial: Option<InitialBlock> = take(&mut map, "initial")?;

        if let Some(lambda) = &lambda {
            if lambda.iter().any(|v| !v.is_finite()) {
                return Err(field_error("lambda", "entries must be finite"));
            }
        }
        if let Some(s) = &s {
            if s.is_empty() {
                return Err(field_error("s", "needs at least one time"));
            }
            if let Some(bad) = s.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(field_error("s", format!("times must be positive and finite, got {bad}")));
            }
        }
        let mut form = None;
        if let Some(q) = &quadric {
            let n = q.n();
            if let Some(lambda) = &lambda {
                if lambda.len() != q.m() {
                    return Err(field_error("lambda", format!("has length {}, expected m = {}", lambda.len(), q.m())));
                }
            }
            if let Some(mut idx) = form_raw.clone() {
                idx.sort_unstable();
                if let Some(w) = idx.windows(2).find(|w| w[0] == w[1]) {
                    return Err(field_error("L", format!("index {} is repeated", w[0])));
                }
                form = Some(FormIndex::new(idx, n).map_err(|e| field_error("L", e))?);
            }
            if let Some(points) = &points {
                if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != n) {
                    return Err(field_error("points", format!("point {i} has {} coordinates, expected n = {n}", p.len())));
                }
            }
            if let Some(zt) = &zt {
                if zt.len() != n {
                    return Err(field_error("zt", format!("has {} coordinates, expected n = {n}", zt.len())));
                }
            }
            if let Some(g) = &grid {
                validate_grid("grid", g, n)?;
            }
            if let Some(init) = &initial {
                validate_grid("initial.grid", &init.grid, n)?;
            }
        } else if form_raw.is_some() || lambda.is_some() {
            return Err(field_error("quadric", "required when `lambda` or `L` is given"));
        }
        Ok(Self { raw, quadric, lambda, form, s, points, zt, grid, verify, initial })
    }

    pub fn quadric(&self) -> Result<&QuadricForm, CliError> {
        self.quadric.as_ref().ok_or_else(|| field_error("quadric", "missing"))
    }

    pub fn lambda(&self) -> Result<&[f64], CliError> {
        self.lambda.as_deref().ok_or_else(|| field_error("lambda", "missing"))
    }

    pub fn form(&self) -> Result<&FormIndex, CliError> {
        self.form.as_ref().ok_or_else(|| field_error("L", "missing"))
    }

    pub fn times(&self) -> Result<&[f64], CliError> {
        self.s.as_deref().ok_or_else(|| field_error("s", "missing"))
    }
}

fn validate_grid(name: &str, g: &GridBlock, n: usize) -> Result<(), CliError> {
    let hw = g.half_widths(2 * n);
    if hw.len() != 2 * n {
        return Err(field_error(name, format!("half_width has {} entries, expected 2n = {}", hw.len(), 2 * n)));
    }
    if hw.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(field_error(name, "half_width entries must be positive and finite"));
    }
    if g.points < 8 {
        return Err(field_error(name, format!("points = {} is below the minimum of 8", g.points)));
    }
    Ok(())
}

fn load_quadric(path: &PathBuf) -> Result<QuadricForm, CliError> {
    let text = fs::read(path).map_err(|e| field_error("quadric", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_slice(&text).map_err(|e| field_error("quadric", format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<JobConfig, CliError> {
        JobConfig::parse(text.as_bytes().to_vec(), Path::new("."))
    }

    const HEIS: &str = r#""quadric": {"n": 1, "m": 1, "A": [[[1, 0]]]}"#;

    #[test]
    fn minimal_config() {
        let c = parse(&format!(r#"{{{HEIS}, "lambda": [1], "L": [1], "s": 0.5, "points": [[[0, 0]]]}}"#)).unwrap();
        assert_eq!(c.quadric().unwrap().n(), 1);
        assert_eq!(c.times().unwrap(), &[0.5]);
        assert_eq!(c.form().unwrap().indices(), &[1]);
        assert_eq!(c.points.unwrap()[0], vec![Complex64::new(0.0, 0.0)]);
    }

    #[test]
    fn field_level_errors() {
        let cases = [
            (format!(r#"{{{HEIS}, "lambda": [1], "L": [1, 1]}}"#), "`L`"),
            (format!(r#"{{{HEIS}, "lambda": [1], "L": [2]}}"#), "`L`"),
            (format!(r#"{{{HEIS}, "lambda": [1, 2], "L": []}}"#), "`lambda`"),
            (format!(r#"{{{HEIS}, "lambda": [1], "L": [], "s": -1}}"#), "`s`"),
            (format!(r#"{{{HEIS}, "lambda": [1], "L": [], "s": "x"}}"#), "`s`"),
            (format!(r#"{{{HEIS}, "lambda": [1], "L": [], "points": [[[0, 0], [1, 1]]]}}"#), "`points`"),
            (format!(r#"{{{HEIS}, "lambda": [1], "L": [], "grid": {{"half_width": 1, "points": 4}}}}"#), "`grid`"),
            (r#"{"quadric": {"n": 2, "m": 1, "A": [[[1, 0]]]}}"#.to_string(), "`quadric`"),
            (r#"{"lambda": [1]}"#.to_string(), "`quadric`"),
            (format!(r#"{{{HEIS}, "bogus": 1}}"#), "`bogus`"),
        ];
        for (text, field) in cases {
            let err = parse(&text).unwrap_err();
            assert!(err.to_string().contains(field), "{text}: {err}");
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn l_order_is_normalized() {
        let c = parse(r#"{"quadric": {"n": 2, "m": 1, "A": [[[1, 0], [0, 0], [0, 0], [1, 0]]]}, "lambda": [1], "L": [2, 1]}"#)
            .unwrap();
        assert_eq!(c.form().unwrap().indices(), &[1, 2]);
    }

    #[test]
    fn quadric_from_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("q.json"), r#"{"n": 1, "m": 1, "A": [[[2, 0]]]}"#).unwrap();
        let cfg = dir.path().join("job.json");
        fs::write(&cfg, r#"{"quadric": "q.json", "lambda": [1], "L": []}"#).unwrap();
        let c = JobConfig::load(&cfg).unwrap();
        assert_eq!(c.quadric().unwrap().matrices()[0][(0, 0)], Complex64::new(2.0, 0.0));
    }
}
