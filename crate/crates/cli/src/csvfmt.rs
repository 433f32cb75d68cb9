//! CSV writing and reading. One float formatter is shared by every writer so
//! that independently recomputed values compare byte-for-byte.

use segilm::ilm::GenerationRecord;
use segilm::CoreError;
use std::fmt::Write as _;
use std::path::Path;

/// Shortest round-trip decimal rendering; stable across runs and platforms.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub const SCHEMA_VERSION: u32 = 1;

/// Header of a per-instantiation generations file for a given epoch count.
pub fn generations_header(n_epochs: usize) -> String {
    let mut h = String::from("generation,x,c_raw,c,s");
    for family in ["enc_loss", "dec_loss", "inner_loss", "outer_loss"] {
        for e in 1..=n_epochs {
            let _ = write!(h, ",{family}_{e}");
        }
    }
    h
}

pub fn generations_csv(records: &[GenerationRecord], n_epochs: usize) -> String {
    let mut s = generations_header(n_epochs);
    s.push('\n');
    for r in records {
        let _ = write!(
            s,
            "{},{},{},{},{}",
            r.generation,
            fmt(r.expressivity),
            fmt(r.c_raw),
            fmt(r.c),
            fmt(r.stability)
        );
        for family in [
            &r.losses.encoder,
            &r.losses.decoder,
            &r.losses.inner,
            &r.losses.outer,
        ] {
            for &v in family.iter() {
                let _ = write!(s, ",{}", fmt(v));
            }
        }
        s.push('\n');
    }
    s
}

/// Mean/min/max of x, c and s per generation over the successful
/// instantiations.
pub fn aggregate_csv(runs: &[&[GenerationRecord]]) -> String {
    let mut s =
        String::from("generation,x_mean,x_min,x_max,c_mean,c_min,c_max,s_mean,s_min,s_max\n");
    if runs.is_empty() {
        return s;
    }
    let generations = runs[0].len();
    for g in 0..generations {
        let stat = |f: &dyn Fn(&GenerationRecord) -> f64| {
            let vals: Vec<f64> = runs.iter().map(|r| f(&r[g])).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (mean, min, max)
        };
        let (xm, xl, xh) = stat(&|r| r.expressivity);
        let (cm, cl, ch) = stat(&|r| r.c);
        let (sm, sl, sh) = stat(&|r| r.stability);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            runs[0][g].generation,
            fmt(xm),
            fmt(xl),
            fmt(xh),
            fmt(cm),
            fmt(cl),
            fmt(ch),
            fmt(sm),
            fmt(sl),
            fmt(sh)
        );
    }
    s
}

/// How the per-epoch losses are normalized before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    /// Each instantiation is divided by its own generation-1 epoch-1 loss.
    PerRun,
    /// All instantiations are divided by the cross-instantiation mean of the
    /// generation-1 epoch-1 loss.
    Global,
}

/// Normalized per-epoch losses averaged over instantiations; one row per
/// (generation, epoch).
pub fn norm_losses_csv(runs: &[&[GenerationRecord]], mode: Normalize) -> String {
    let mut s = String::from("generation,epoch,enc,dec,inner,outer\n");
    if runs.is_empty() || runs[0].is_empty() {
        return s;
    }
    let generations = runs[0].len();
    let n_epochs = runs[0][0].losses.encoder.len();
    type Family<'a> = &'a dyn Fn(&GenerationRecord) -> &Vec<f64>;
    let families: [Family; 4] = [
        &|r| &r.losses.encoder,
        &|r| &r.losses.decoder,
        &|r| &r.losses.inner,
        &|r| &r.losses.outer,
    ];
    // Reference loss per (run, family).
    let refs: Vec<[f64; 4]> = runs
        .iter()
        .map(|r| {
            let mut f = [0.0; 4];
            for (k, fam) in families.iter().enumerate() {
                f[k] = fam(&r[0])[0];
            }
            f
        })
        .collect();
    let global_ref: [f64; 4] = {
        let mut f = [0.0; 4];
        for k in 0..4 {
            f[k] = refs.iter().map(|r| r[k]).sum::<f64>() / refs.len() as f64;
        }
        f
    };
    for g in 0..generations {
        for e in 0..n_epochs {
            let mut mean = [0.0f64; 4];
            for (ri, run) in runs.iter().enumerate() {
                for (k, fam) in families.iter().enumerate() {
                    let denom = match mode {
                        Normalize::PerRun => refs[ri][k],
                        Normalize::Global => global_ref[k],
                    };
                    let denom = if denom == 0.0 { 1.0 } else { denom };
                    mean[k] += fam(&run[g])[e] / denom;
                }
            }
            for m in mean.iter_mut() {
                *m /= runs.len() as f64;
            }
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                runs[0][g].generation,
                e + 1,
                fmt(mean[0]),
                fmt(mean[1]),
                fmt(mean[2]),
                fmt(mean[3])
            );
        }
    }
    s
}

/// A parsed CSV: header fields and float rows.
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Csv {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<Csv, CoreError> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Csv, CoreError> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CoreError::Format("empty CSV".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
        let row =
            row.map_err(|_| CoreError::Format(format!("bad CSV row at line {}", lineno + 2)))?;
        if row.len() != header.len() {
            return Err(CoreError::Format(format!(
                "row at line {} has {} fields, header has {}",
                lineno + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Csv { header, rows })
}
