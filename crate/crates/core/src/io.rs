//! Text persistence for problem instances and solve results.
//!
//! Both files are a block of `key = value` header lines followed by named
//! vector sections (`[x_true]`, `[y]`, ...) in the `re,im` CSV layout of
//! [`cvec::to_csv`]. Floats use the shortest round-trip representation, so a
//! reloaded instance reproduces `y` bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::cvec::{self, fmt_f64, C64};
use crate::error::{Error, Result};
use crate::models::{ModelParams, ProblemInstance};
use crate::solvers::{SolveResult, SolveStatus};

const INSTANCE_MAGIC: &str = "# corrsense instance";
const RESULT_MAGIC: &str = "# corrsense solve result";

struct Document {
    header: BTreeMap<String, String>,
    sections: BTreeMap<String, Vec<C64>>,
}

impl Document {
    fn get(&self, key: &str) -> Result<&str> {
        self.header
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse(format!("missing key '{key}'")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .parse()
            .map_err(|e| Error::Parse(format!("key '{key}': {e}")))
    }

    fn section(&mut self, name: &str, len: usize) -> Result<Vec<C64>> {
        let v = self
            .sections
            .remove(name)
            .ok_or_else(|| Error::Parse(format!("missing section [{name}]")))?;
        if v.len() != len {
            return Err(Error::Dimension {
                what: "section length",
                expected: len,
                got: v.len(),
            });
        }
        Ok(v)
    }
}

fn parse_document(text: &str, magic: &str) -> Result<Document> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(magic) {
        return Err(Error::Parse(format!("expected first line '{magic}'")));
    }
    let mut header = BTreeMap::new();
    let mut sections = BTreeMap::new();
    let mut current: Option<(String, String)> = None;
    let flush = |cur: Option<(String, String)>, sections: &mut BTreeMap<String, Vec<C64>>| -> Result<()> {
        if let Some((name, body)) = cur {
            let v = cvec::from_csv(&body).map_err(|e| Error::Parse(format!("[{name}]: {e}")))?;
            if sections.insert(name.clone(), v).is_some() {
                return Err(Error::Parse(format!("duplicate section [{name}]")));
            }
        }
        Ok(())
    };
    for line in lines {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            flush(current.take(), &mut sections)?;
            current = Some((name.to_string(), String::new()));
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
            body.push('\n');
        } else if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        } else {
            let (k, v) = trimmed
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected 'key = value', got '{trimmed}'")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    flush(current.take(), &mut sections)?;
    Ok(Document { header, sections })
}

fn push_section(out: &mut String, name: &str, v: &[C64]) {
    let _ = writeln!(out, "[{name}]");
    out.push_str(&cvec::to_csv(v));
}

pub fn instance_to_string(inst: &ProblemInstance) -> Result<String> {
    let params = inst.model.params.ok_or_else(|| {
        Error::Argument("instances of custom models cannot be saved".into())
    })?;
    let mut out = format!("{INSTANCE_MAGIC}\n");
    for (k, v) in params.to_pairs() {
        let _ = writeln!(out, "{k} = {v}");
    }
    let _ = writeln!(out, "rows_realized = {}", inst.model.m);
    let _ = writeln!(out, "s = {}", inst.s);
    let _ = writeln!(out, "k = {}", inst.k);
    let _ = writeln!(out, "setting = {}", inst.setting);
    let _ = writeln!(out, "noise_amp = {}", fmt_f64(inst.noise_amp));
    let _ = writeln!(out, "noise_model = {}", inst.noise_model);
    let _ = writeln!(out, "seed = {}", inst.seed);
    push_section(&mut out, "x_true", &inst.x_true);
    push_section(&mut out, "z_true", &inst.z_true);
    push_section(&mut out, "w", &inst.w);
    push_section(&mut out, "y", &inst.y);
    Ok(out)
}

/// Parses an instance file, rebuilding the model from its parameters.
pub fn instance_from_str(text: &str) -> Result<ProblemInstance> {
    let mut doc = parse_document(text, INSTANCE_MAGIC)?;
    let params = ModelParams::from_pairs(|k| doc.header.get(k).cloned())?;
    let model = params.build()?;
    if let Some(rows) = doc.header.get("rows_realized") {
        if rows != &model.m.to_string() {
            return Err(Error::Parse(format!(
                "rebuilt model has {} rows, file records {rows}",
                model.m
            )));
        }
    }
    let (n, m) = (model.n, model.m);
    Ok(ProblemInstance {
        s: doc.parse("s")?,
        k: doc.parse("k")?,
        setting: doc.get("setting")?.parse()?,
        noise_amp: doc.parse("noise_amp")?,
        noise_model: doc.get("noise_model")?.parse()?,
        seed: doc.parse("seed")?,
        x_true: doc.section("x_true", n)?,
        z_true: doc.section("z_true", m)?,
        w: doc.section("w", m)?,
        y: doc.section("y", m)?,
        model,
    })
}

pub fn save_instance(inst: &ProblemInstance, path: &Path) -> Result<()> {
    std::fs::write(path, instance_to_string(inst)?).map_err(|e| Error::io(path, e))
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    instance_from_str(&text)
}

pub fn result_to_string(result: &SolveResult) -> String {
    let mut out = format!("{RESULT_MAGIC}\n");
    let _ = writeln!(out, "status = {}", result.status);
    let _ = writeln!(out, "iterations = {}", result.iterations);
    let _ = writeln!(out, "residual = {}", fmt_f64(result.residual));
    let _ = writeln!(out, "objective = {}", fmt_f64(result.objective));
    let _ = writeln!(out, "n = {}", result.x_hat.len());
    let _ = writeln!(out, "m = {}", result.z_hat.len());
    push_section(&mut out, "x_hat", &result.x_hat);
    push_section(&mut out, "z_hat", &result.z_hat);
    out
}

pub fn result_from_str(text: &str) -> Result<SolveResult> {
    let mut doc = parse_document(text, RESULT_MAGIC)?;
    let (n, m): (usize, usize) = (doc.parse("n")?, doc.parse("m")?);
    Ok(SolveResult {
        status: doc.get("status")?.parse::<SolveStatus>()?,
        iterations: doc.parse("iterations")?,
        residual: doc.parse("residual")?,
        objective: doc.parse("objective")?,
        x_hat: doc.section("x_hat", n)?,
        z_hat: doc.section("z_hat", m)?,
    })
}

pub fn save_result(result: &SolveResult, path: &Path) -> Result<()> {
    std::fs::write(path, result_to_string(result)).map_err(|e| Error::io(path, e))
}

pub fn load_result(path: &Path) -> Result<SolveResult> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    result_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gen_instance, Family, Setting};

    fn bits(v: &[C64]) -> Vec<(u64, u64)> {
        v.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect()
    }

    #[test]
    fn instance_round_trip_is_bit_exact() {
        for family in [Family::Mtx1, Family::PartialCirculant, Family::Drpe] {
            let model = ModelParams::new(family, 32, 16, 5).build().unwrap();
            let inst = gen_instance(&model, 3, 2, Setting::Gaussian, 0.01, 11).unwrap();
            let back = instance_from_str(&instance_to_string(&inst).unwrap()).unwrap();
            assert_eq!(bits(&back.y), bits(&inst.y));
            assert_eq!(bits(&back.x_true), bits(&inst.x_true));
            assert_eq!(back.noise_amp.to_bits(), inst.noise_amp.to_bits());
            // The rebuilt model reproduces the measurements exactly.
            let y = crate::cvec::add(&back.model.measure(&back.x_true, &back.z_true).unwrap(), &back.w);
            assert_eq!(bits(&y), bits(&inst.y));
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(instance_from_str("nonsense").is_err());
        let model = ModelParams::new(Family::Mtx1, 16, 8, 1).build().unwrap();
        let inst = gen_instance(&model, 1, 1, Setting::Flat, 0.0, 2).unwrap();
        let text = instance_to_string(&inst).unwrap();
        let truncated = &text[..text.find("[y]").unwrap()];
        assert!(matches!(instance_from_str(truncated), Err(Error::Parse(_))));
    }

    #[test]
    fn result_round_trip() {
        let r = SolveResult {
            x_hat: vec![C64::new(0.1, -2.5e-300), C64::new(3.0, 0.0)],
            z_hat: vec![C64::new(1.0 / 3.0, 0.0)],
            iterations: 17,
            residual: 1e-12,
            objective: 4.2,
            status: SolveStatus::MaxIter,
        };
        let back = result_from_str(&result_to_string(&r)).unwrap();
        assert_eq!(bits(&back.x_hat), bits(&r.x_hat));
        assert_eq!(back.status, r.status);
        assert_eq!(back.iterations, 17);
        assert_eq!(back.residual.to_bits(), r.residual.to_bits());
    }
}
