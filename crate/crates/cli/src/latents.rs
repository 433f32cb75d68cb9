//! Continuous latent dumps from agent snapshots: how one glyph's variant
//! images map onto latent activations, and how a base glyph's latent drifts
//! across generations.

use segilm::agent::Agent;
use segilm::glyphset::{Dataset, GlyphId};
use segilm::CoreError;
use std::path::{Path, PathBuf};

/// One row per variant image of `glyph`: the agent's continuous latent.
pub fn variant_latents(
    agent: &Agent,
    ds: &Dataset,
    glyph: GlyphId,
    count: usize,
) -> Result<Vec<Vec<f64>>, CoreError> {
    let variants = ds.variants_of(glyph);
    if count > variants.len() {
        return Err(CoreError::InvalidConfig(format!(
            "asked for {count} variants, dataset holds {}",
            variants.len()
        )));
    }
    Ok(variants[..count]
        .iter()
        .map(|img| agent.encode_latent(img))
        .collect())
}

/// One row per generation in `[from, to]`: the base glyph's latent under that
/// generation's snapshot agent.
pub fn generation_latents(
    snap_dir: &Path,
    ds: &Dataset,
    glyph: GlyphId,
    from: usize,
    to: usize,
) -> Result<Vec<Vec<f64>>, CoreError> {
    if from > to {
        return Err(CoreError::InvalidConfig(format!(
            "empty generation range {from}..={to}"
        )));
    }
    let mut rows = Vec::with_capacity(to - from + 1);
    let mut width: Option<usize> = None;
    for g in from..=to {
        let path: PathBuf = snap_dir.join(format!("gen-{g:04}.agent"));
        let agent = Agent::load_snapshot(&path)?;
        if *width.get_or_insert(agent.n_l()) != agent.n_l() {
            return Err(CoreError::Dimension(format!(
                "snapshot {} changes signal width",
                path.display()
            )));
        }
        rows.push(agent.encode_latent(ds.base_image(glyph)));
    }
    Ok(rows)
}

/// Header z1..zn, one latent per row.
pub fn latents_csv(rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    if let Some(first) = rows.first() {
        let cols: Vec<String> = (1..=first.len()).map(|i| format!("z{i}")).collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    for row in rows {
        let vals: Vec<String> = row.iter().map(|&v| crate::csvfmt::fmt(v)).collect();
        s.push_str(&vals.join(","));
        s.push('\n');
    }
    s
}
