//! Plain-text checkpoint format.
//!
//! ```text
//! ttea-checkpoint 1
//! meta d_e 32
//! ...
//! param emb.kg1 2 200 32
//! <one value per line, row-major, round-trip `{}` formatting>
//! ```
//!
//! Meta lines carry the model configuration; parameters appear in sorted
//! name order. Floats are written with Rust's shortest round-trip
//! formatting, so a load restores bit-identical tensors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::Variant;
use crate::enhance::CycleMode;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, TteaModel};
use crate::params::ParamSet;
use crate::tensor::Tensor;

pub const MAGIC: &str = "ttea-checkpoint";
pub const VERSION: u32 = 1;

pub fn to_text(model: &TteaModel) -> String {
    let c = &model.config;
    let mut s = format!("{MAGIC} {VERSION}\n");
    let meta = [
        ("d_e", c.d_e.to_string()),
        ("d_r", c.d_r.to_string()),
        ("d_t", c.d_t.to_string()),
        ("gcn_depth", c.gcn_depth.to_string()),
        ("cycle_mode", c.cycle_mode.number().to_string()),
        ("variant", c.variant.to_string()),
        ("leaky_slope", c.leaky_slope.to_string()),
    ];
    for (k, v) in meta {
        writeln!(s, "meta {k} {v}").expect("string write");
    }
    for (name, t) in model.params.iter() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        writeln!(s, "param {name} {} {}", t.shape().len(), dims.join(" ")).expect("string write");
        for v in t.data() {
            writeln!(s, "{v}").expect("string write");
        }
    }
    s
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Checkpoint(format!("line {line}: {}", msg.into()))
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| bad(line, format!("cannot parse {s:?}")))
}

pub fn from_text(text: &str) -> Result<TteaModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, header)) if header == format!("{MAGIC} {VERSION}") => {}
        Some((_, header)) => {
            return Err(Error::Checkpoint(format!(
                "unsupported header {header:?} (expected \"{MAGIC} {VERSION}\")"
            )))
        }
        None => return Err(Error::Checkpoint("empty checkpoint".into())),
    }

    let mut meta = std::collections::BTreeMap::new();
    let mut params = ParamSet::new();
    let mut pending: Option<(String, Vec<usize>, Vec<f64>, usize)> = None;
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        if let Some((_, shape, data, _)) = &mut pending {
            let want: usize = shape.iter().product();
            if data.len() < want {
                data.push(num(n, line)?);
                continue;
            }
        }
        if let Some((name, shape, data, _)) = pending.take() {
            params.insert(name, Tensor::new(shape, data)?);
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("meta") => {
                let k = parts.next().ok_or_else(|| bad(n, "meta without key"))?;
                let v = parts.next().ok_or_else(|| bad(n, "meta without value"))?;
                meta.insert(k.to_string(), v.to_string());
            }
            Some("param") => {
                let name = parts.next().ok_or_else(|| bad(n, "param without name"))?;
                let ndim: usize = num(n, parts.next().ok_or_else(|| bad(n, "param without rank"))?)?;
                let shape = parts.map(|d| num(n, d)).collect::<Result<Vec<usize>>>()?;
                if shape.len() != ndim {
                    return Err(bad(n, format!("rank {ndim} but {} dims", shape.len())));
                }
                pending = Some((name.to_string(), shape, Vec::new(), n));
            }
            _ => return Err(bad(n, format!("unexpected line {line:?}"))),
        }
    }
    if let Some((name, shape, data, start)) = pending {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(bad(start, format!("{name}: expected {want} values, found {}", data.len())));
        }
        params.insert(name, Tensor::new(shape, data)?);
    }

    let get = |k: &str| {
        meta.get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("missing meta {k}")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| Error::Checkpoint(format!("bad meta {k}")))
    };
    let config = ModelConfig {
        d_e: parse_usize("d_e")?,
        d_r: parse_usize("d_r")?,
        d_t: parse_usize("d_t")?,
        gcn_depth: parse_usize("gcn_depth")?,
        cycle_mode: CycleMode::from_number(
            get("cycle_mode")?
                .parse()
                .map_err(|_| Error::Checkpoint("bad meta cycle_mode".into()))?,
        )?,
        variant: get("variant")?.parse::<Variant>()?,
        leaky_slope: get("leaky_slope")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad meta leaky_slope".into()))?,
    };
    Ok(TteaModel { config, params })
}

pub fn save(model: &TteaModel, path: &Path) -> Result<()> {
    fs::write(path, to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<TteaModel> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}
