//! Versioned text snapshot of a [`MixtureModel`].
//!
//! ```text
//! cdpr-gmm v1
//! dim <d>
//! k <K>
//! seed <u64>
//! n_iterations <count>
//! log_likelihood <f64>
//! bic <f64>
//! reg_covar <f64>
//! component <i>
//! weight <f64>
//! mean <d values>
//! cov <d values>        (d rows, row-major)
//! ...
//! end
//! ```
//!
//! Reals are written in shortest round-trip scientific notation, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{GaussianComponent, MixtureModel};
use crate::error::{Error, Result};

pub const MODEL_HEADER: &str = "cdpr-gmm v1";

fn push_reals(out: &mut String, key: &str, values: impl IntoIterator<Item = f64>) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v:e}");
    }
    out.push('\n');
}

pub fn model_to_string(m: &MixtureModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_HEADER}");
    let _ = writeln!(out, "dim {}", m.dim());
    let _ = writeln!(out, "k {}", m.k());
    let _ = writeln!(out, "seed {}", m.seed);
    let _ = writeln!(out, "n_iterations {}", m.n_iterations);
    push_reals(&mut out, "log_likelihood", [m.log_likelihood]);
    push_reals(&mut out, "bic", [m.bic]);
    push_reals(&mut out, "reg_covar", [m.reg_covar]);
    for (i, c) in m.components().iter().enumerate() {
        let _ = writeln!(out, "component {i}");
        push_reals(&mut out, "weight", [c.weight()]);
        push_reals(&mut out, "mean", c.mean().iter().copied());
        for row in c.covariance().row_iter() {
            push_reals(&mut out, "cov", row.iter().copied());
        }
    }
    out.push_str("end\n");
    out
}

/// Line-oriented reader shared with the detector snapshot.
pub(crate) struct Lines<'a> {
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    source: &'a Path,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str, source: &'a Path) -> Self {
        Self {
            iter: text.lines().enumerate().peekable(),
            source,
        }
    }

    pub(crate) fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// Next non-empty line as `(line number, key, rest)`.
    pub(crate) fn next_entry(&mut self) -> Result<(usize, &'a str, &'a str)> {
        loop {
            let Some((i, raw)) = self.iter.next() else {
                return Err(self.err(0, "unexpected end of snapshot"));
            };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            return Ok((i + 1, key, rest.trim()));
        }
    }

    /// Key of the next non-empty line without consuming it.
    pub(crate) fn peek_key(&mut self) -> Option<&'a str> {
        while let Some(&(_, raw)) = self.iter.peek() {
            let line = raw.trim();
            if line.is_empty() {
                self.iter.next();
                continue;
            }
            return Some(line.split_once(' ').map_or(line, |(k, _)| k));
        }
        None
    }

    pub(crate) fn expect(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, k, rest) = self.next_entry()?;
        if k != key {
            return Err(self.err(line, format!("expected `{key}`, found `{k}`")));
        }
        Ok((line, rest))
    }

    pub(crate) fn reals(&mut self, key: &str, count: usize) -> Result<Vec<f64>> {
        let (line, rest) = self.expect(key)?;
        let values = rest
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|e| self.err(line, format!("`{key}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(self.err(line, format!("`{key}`: expected {count} values, found {}", values.len())));
        }
        Ok(values)
    }

    pub(crate) fn real(&mut self, key: &str) -> Result<f64> {
        Ok(self.reals(key, 1)?[0])
    }

    pub(crate) fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let (line, rest) = self.expect(key)?;
        rest.parse().map_err(|e| self.err(line, format!("`{key}`: {e}")))
    }
}

pub(crate) fn read_model(lines: &mut Lines<'_>) -> Result<MixtureModel> {
    let (line, header, rest) = lines.next_entry()?;
    if format!("{header} {rest}") != MODEL_HEADER {
        return Err(lines.err(line, format!("expected header `{MODEL_HEADER}`")));
    }
    let d: usize = lines.parse("dim")?;
    let k: usize = lines.parse("k")?;
    let seed: u64 = lines.parse("seed")?;
    let n_iterations: usize = lines.parse("n_iterations")?;
    let log_likelihood = lines.real("log_likelihood")?;
    let bic = lines.real("bic")?;
    let reg_covar = lines.real("reg_covar")?;
    let mut components = Vec::with_capacity(k);
    for i in 0..k {
        let idx: usize = lines.parse("component")?;
        if idx != i {
            return Err(lines.err(0, format!("component {idx} out of order, expected {i}")));
        }
        let weight = lines.real("weight")?;
        let mean = DVector::from_vec(lines.reals("mean", d)?);
        let mut rows = Vec::with_capacity(d * d);
        for _ in 0..d {
            rows.extend(lines.reals("cov", d)?);
        }
        let cov = DMatrix::from_row_slice(d, d, &rows);
        components.push(GaussianComponent::new(weight, mean, cov)?);
    }
    lines.expect("end")?;
    let mut model = MixtureModel::from_components(components)?;
    model.seed = seed;
    model.n_iterations = n_iterations;
    model.log_likelihood = log_likelihood;
    model.bic = bic;
    model.reg_covar = reg_covar;
    Ok(model)
}

pub fn model_from_str(text: &str) -> Result<MixtureModel> {
    read_model(&mut Lines::new(text, Path::new("<model>")))
}

pub fn save_model(path: &Path, m: &MixtureModel) -> Result<()> {
    std::fs::write(path, model_to_string(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MixtureModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_model(&mut Lines::new(&text, path))
}
