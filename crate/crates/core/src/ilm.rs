//! The generational transmission loop: bottleneck sampling, the four-part
//! per-iteration training schedule and the tutor→pupil chain.
//!
//! Randomness is addressed through [`StreamKey`] paths: one child per
//! generation, with fixed purpose tags below it, so a chain is a pure
//! function of its configuration and master stream.

use crate::agent::{Agent, Signal};
use crate::error::CoreError;
use crate::glyphset::{Dataset, GlyphId, Image, GLYPH_COUNT};
use crate::metrics;
use crate::net::TrainConfig;
use crate::rng::StreamKey;
use rand::seq::SliceRandom;
use rand::Rng;
use std::time::Instant;

// Purpose tags under a generation's stream.
const TAG_PUPIL_INIT: u64 = 0;
const TAG_BOTTLENECK: u64 = 1;
const TAG_EVERYDAY: u64 = 2;
const TAG_TRAINING: u64 = 3;

use crate::agent::AgentArch;

/// Per-chain learning-rate multipliers on top of [`SimConfig::eta`].
///
/// The four training configurations have very different output widths, so one
/// global rate under a per-component mean loss gives them wildly different
/// effective step sizes; these factors rebalance them. The defaults are the
/// values under which the transmission dynamics reproduce the target
/// behaviour; `uniform()` recovers a single shared rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRates {
    pub encoder: f64,
    pub decoder: f64,
    pub outer: f64,
    pub inner: f64,
}

impl ChainRates {
    pub fn uniform() -> Self {
        ChainRates {
            encoder: 1.0,
            decoder: 1.0,
            outer: 1.0,
            inner: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        for (name, v) in [
            ("encoder", self.encoder),
            ("decoder", self.decoder),
            ("outer", self.outer),
            ("inner", self.inner),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::InvalidConfig(format!(
                    "eta scale for {name} chain must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ChainRates {
    fn default() -> Self {
        // Calibrated so that, at the reference eta of 15, the effective rates
        // are encoder 2, decoder 15, outer 45, inner 5. The supervised encoder
        // and the inner autoencoder share E_w and compete; at a uniform rate
        // the encoder saturates E_w onto the tutor's signal set within one
        // epoch, which freezes the language into a constant. These ratios keep
        // the encoder gentle enough to preserve gradient flow, the inner
        // autoencoder strong enough to keep E_w information-preserving, and
        // the outer autoencoder strong enough to give the latent code the
        // spread from which supervised learning generalizes — and from which a
        // chain reliably escapes the degenerate constant language within a few
        // generations instead of lingering in it.
        ChainRates {
            encoder: 2.0 / 15.0,
            decoder: 1.0,
            outer: 3.0,
            inner: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Glyph types in the bottleneck (b).
    pub bottleneck_glyphs: usize,
    /// Image-signal pairs shown per pupil.
    pub n_pairs: usize,
    /// Size of the everyday image set.
    pub n_everyday: usize,
    /// Autoencoder samples per iteration, per autoencoder (r).
    pub r: usize,
    pub n_epochs: usize,
    pub eta: f64,
    pub generations: usize,
    pub arch: AgentArch,
    pub master_seed: u64,
    /// Sample the bottleneck images without replacement instead.
    pub pairs_without_replacement: bool,
    /// Monte Carlo samples for the background compositionality constant.
    pub c0_samples: usize,
    /// Skip the background run and use this constant instead.
    pub c0_override: Option<f64>,
    /// Per-chain multipliers applied to `eta`.
    pub rates: ChainRates,
}

impl SimConfig {
    pub fn new(arch: AgentArch) -> Self {
        SimConfig {
            bottleneck_glyphs: 40,
            n_pairs: 400,
            n_everyday: 1200,
            r: 15,
            n_epochs: 15,
            eta: 15.0,
            generations: 100,
            arch,
            master_seed: 0,
            pairs_without_replacement: false,
            c0_samples: 10_000,
            c0_override: None,
            rates: ChainRates::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.arch.validate()?;
        if self.arch.n_l() < 7 {
            return Err(CoreError::InvalidConfig(format!(
                "signal width must be >= 7 for the language metrics, got {}",
                self.arch.n_l()
            )));
        }
        if self.bottleneck_glyphs == 0 || self.bottleneck_glyphs > GLYPH_COUNT {
            return Err(CoreError::InvalidConfig(format!(
                "bottleneck_glyphs must be 1..=128, got {}",
                self.bottleneck_glyphs
            )));
        }
        if self.n_pairs == 0 || self.generations == 0 || self.n_epochs == 0 {
            return Err(CoreError::InvalidConfig(
                "n_pairs, generations and n_epochs must be >= 1".into(),
            ));
        }
        if self.eta <= 0.0 {
            return Err(CoreError::InvalidConfig("eta must be positive".into()));
        }
        self.rates.validate()?;
        Ok(())
    }
}

/// The utterances one pupil gets to see.
#[derive(Debug, Clone)]
pub struct BottleneckSet {
    pub pairs: Vec<(Image, Signal)>,
    /// Which glyph each pair's image came from.
    pub sources: Vec<GlyphId>,
    /// The b chosen glyph types.
    pub glyphs: Vec<GlyphId>,
}

/// b distinct glyphs without replacement, then n_pairs images from the
/// union of their variant pools, each labelled by the tutor's encoder.
pub fn sample_bottleneck(
    tutor: &Agent,
    ds: &Dataset,
    cfg: &SimConfig,
    key: StreamKey,
) -> BottleneckSet {
    let mut rng = key.rng();
    let glyphs: Vec<GlyphId> = {
        let mut ids: Vec<GlyphId> = GlyphId::all().collect();
        ids.partial_shuffle(&mut rng, cfg.bottleneck_glyphs)
            .0
            .to_vec()
    };
    let pool: Vec<(GlyphId, usize)> = glyphs
        .iter()
        .flat_map(|&g| (0..ds.variants_of(g).len()).map(move |v| (g, v)))
        .collect();
    let picks: Vec<usize> = if cfg.pairs_without_replacement {
        assert!(
            pool.len() >= cfg.n_pairs,
            "pool of {} images cannot supply {} distinct pairs",
            pool.len(),
            cfg.n_pairs
        );
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.partial_shuffle(&mut rng, cfg.n_pairs).0.to_vec()
    } else {
        (0..cfg.n_pairs)
            .map(|_| rng.random_range(0..pool.len()))
            .collect()
    };
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    let mut sources = Vec::with_capacity(cfg.n_pairs);
    for i in picks {
        let (g, v) = pool[i];
        let img = ds.variants_of(g)[v].clone();
        let sig = tutor.encode(&img);
        pairs.push((img, sig));
        sources.push(g);
    }
    BottleneckSet {
        pairs,
        sources,
        glyphs,
    }
}

/// n_everyday images uniform with replacement from all variants.
pub fn sample_everyday(ds: &Dataset, cfg: &SimConfig, key: StreamKey) -> Vec<Image> {
    let mut rng = key.rng();
    let v = ds.variants_per_glyph();
    (0..cfg.n_everyday)
        .map(|_| {
            let g = GlyphId::new(rng.random_range(0..GLYPH_COUNT as u8)).unwrap();
            ds.variants_of(g)[rng.random_range(0..v)].clone()
        })
        .collect()
}

/// Mean loss per epoch for each of the four training configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLosses {
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
}

/// Exact step counters for the schedule audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepCounts {
    pub encoder: u64,
    pub decoder: u64,
    pub outer: u64,
    pub inner: u64,
}

impl StepCounts {
    pub fn supervised(&self) -> u64 {
        self.encoder + self.decoder
    }
    pub fn autoencoder(&self) -> u64 {
        self.outer + self.inner
    }
}

/// One pupil's education. Per epoch: reshuffle the bottleneck; for each
/// element, one encoder step and one decoder step on it, then r everyday
/// draws through the outer autoencoder and r more through the inner one.
pub fn train_pupil(
    pupil: &mut Agent,
    bottleneck: &BottleneckSet,
    everyday: &[Image],
    cfg: &SimConfig,
    key: StreamKey,
) -> Result<(EpochLosses, StepCounts), CoreError> {
    let tc_enc = TrainConfig::new(cfg.eta * cfg.rates.encoder);
    let tc_dec = TrainConfig::new(cfg.eta * cfg.rates.decoder);
    let tc_out = TrainConfig::new(cfg.eta * cfg.rates.outer);
    let tc_inn = TrainConfig::new(cfg.eta * cfg.rates.inner);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = bottleneck
        .pairs
        .iter()
        .map(|(img, sig)| (img.to_f64(), sig.to_f64()))
        .collect();
    let everyday: Vec<Vec<f64>> = everyday.iter().map(Image::to_f64).collect();
    let n = pairs.len();

    let mut losses = EpochLosses {
        encoder: Vec::with_capacity(cfg.n_epochs),
        decoder: Vec::with_capacity(cfg.n_epochs),
        outer: Vec::with_capacity(cfg.n_epochs),
        inner: Vec::with_capacity(cfg.n_epochs),
    };
    let mut counts = StepCounts::default();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.n_epochs {
        let mut rng = key.child(epoch as u64).rng();
        order.shuffle(&mut rng);
        let (mut enc, mut dec, mut out, mut inn) = (0.0, 0.0, 0.0, 0.0);
        let fail = |e, it| match e {
            CoreError::Divergence { context, .. } => CoreError::Divergence {
                generation: 0,
                epoch,
                iteration: it,
                context,
            },
            other => other,
        };
        for (it, &pi) in order.iter().enumerate() {
            let (img, sig) = &pairs[pi];
            enc += pupil
                .train_encoder_pair(img, sig, &tc_enc)
                .map_err(|e| fail(e, it))?;
            counts.encoder += 1;
            dec += pupil
                .train_decoder_pair(sig, img, &tc_dec)
                .map_err(|e| fail(e, it))?;
            counts.decoder += 1;
            if !everyday.is_empty() {
                for _ in 0..cfg.r {
                    let img = &everyday[rng.random_range(0..everyday.len())];
                    out += pupil.train_outer(img, &tc_out).map_err(|e| fail(e, it))?;
                    counts.outer += 1;
                }
                for _ in 0..cfg.r {
                    let img = &everyday[rng.random_range(0..everyday.len())];
                    inn += pupil.train_inner(img, &tc_inn).map_err(|e| fail(e, it))?;
                    counts.inner += 1;
                }
            }
        }
        let ae_steps = (n * cfg.r) as f64;
        losses.encoder.push(enc / n as f64);
        losses.decoder.push(dec / n as f64);
        losses
            .outer
            .push(if ae_steps > 0.0 { out / ae_steps } else { 0.0 });
        losses
            .inner
            .push(if ae_steps > 0.0 { inn / ae_steps } else { 0.0 });
    }
    Ok((losses, counts))
}

/// The pupil's signal table over the 128 clean base glyphs.
pub fn language_table(agent: &Agent, ds: &Dataset) -> Vec<Signal> {
    GlyphId::all()
        .map(|id| agent.encode(ds.base_image(id)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct GenerationRecord {
    pub generation: usize,
    pub table: Vec<Signal>,
    pub expressivity: f64,
    /// Raw proxy score, before background normalization.
    pub c_raw: f64,
    /// Normalized score, clamped to [-0.1, 1] for reporting.
    pub c: f64,
    pub stability: f64,
    pub losses: EpochLosses,
    pub counts: StepCounts,
    pub seconds: f64,
}

/// Observer invoked with each generation's trained pupil, e.g. to snapshot
/// agents to disk.
pub type GenerationHook<'a> = dyn FnMut(usize, &Agent) -> Result<(), CoreError> + 'a;

/// The deterministic background constant for a given signal width. Fixed
/// per n_l (not per run) so runs and offline recomputation agree.
pub fn default_c0(n_l: usize, samples: usize) -> f64 {
    let key = StreamKey::from_seed(0xbac0).child(n_l as u64);
    metrics::background_c0(n_l, samples, &mut key.rng())
}

/// Run a full tutor→pupil chain. Generation 0 is a freshly initialized
/// naive agent acting as the first tutor; each later generation trains a
/// naive pupil on a bottleneck sampled from the current tutor.
pub fn run_chain(
    cfg: &SimConfig,
    ds: &Dataset,
    key: StreamKey,
    mut hook: Option<&mut GenerationHook>,
) -> Result<Vec<GenerationRecord>, CoreError> {
    cfg.validate()?;
    let n_l = cfg.arch.n_l();
    let c0 = match cfg.c0_override {
        Some(c0) => c0,
        None => default_c0(n_l, cfg.c0_samples),
    };

    let mut tutor = Agent::new_naive(&cfg.arch, &mut key.child(0).child(TAG_PUPIL_INIT).rng())?;
    let mut tutor_table = language_table(&tutor, ds);
    if let Some(h) = hook.as_deref_mut() {
        h(0, &tutor)?;
    }

    let mut records = Vec::with_capacity(cfg.generations);
    for g in 1..=cfg.generations {
        let started = Instant::now();
        let gk = key.child(g as u64);
        let bottleneck = sample_bottleneck(&tutor, ds, cfg, gk.child(TAG_BOTTLENECK));
        let everyday = sample_everyday(ds, cfg, gk.child(TAG_EVERYDAY));
        let mut pupil = Agent::new_naive(&cfg.arch, &mut gk.child(TAG_PUPIL_INIT).rng())?;
        let (losses, counts) = train_pupil(
            &mut pupil,
            &bottleneck,
            &everyday,
            cfg,
            gk.child(TAG_TRAINING),
        )
        .map_err(|e| match e {
            CoreError::Divergence {
                epoch,
                iteration,
                context,
                ..
            } => CoreError::Divergence {
                generation: g,
                epoch,
                iteration,
                context,
            },
            other => other,
        })?;
        let table = language_table(&pupil, ds);
        let x = metrics::expressivity(&table);
        let c_raw = metrics::compositionality_raw_of_table(&table)?;
        let c_norm = metrics::compositionality(c_raw, c0)?;
        let s = metrics::stability(&table, &tutor_table)?;
        if let Some(h) = hook.as_deref_mut() {
            h(g, &pupil)?;
        }
        records.push(GenerationRecord {
            generation: g,
            table: table.clone(),
            expressivity: x,
            c_raw,
            c: c_norm.clamp(-0.1, 1.0),
            stability: s,
            losses,
            counts,
            seconds: started.elapsed().as_secs_f64(),
        });
        tutor = pupil;
        tutor_table = table;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyphset::{generate_dataset, NoiseParams, SegmentLayout};

    fn tiny_arch() -> AgentArch {
        AgentArch {
            ei: vec![784, 8, 7],
            ew: vec![7, 7, 7],
            dw: vec![7, 7, 7],
            di: vec![7, 8, 784],
        }
    }

    fn tiny_cfg() -> SimConfig {
        let mut cfg = SimConfig::new(tiny_arch());
        cfg.bottleneck_glyphs = 5;
        cfg.n_pairs = 10;
        cfg.n_everyday = 20;
        cfg.r = 2;
        cfg.n_epochs = 2;
        cfg.generations = 2;
        cfg.c0_override = Some(0.4);
        cfg
    }

    fn tiny_dataset() -> Dataset {
        generate_dataset(
            &SegmentLayout::default(),
            &NoiseParams::level(1).unwrap(),
            2,
            5,
        )
        .unwrap()
    }

    #[test]
    fn bottleneck_shape_and_determinism() {
        let ds = tiny_dataset();
        let cfg = tiny_cfg();
        let tutor = Agent::new_naive(&cfg.arch, &mut StreamKey::from_seed(1).rng()).unwrap();
        let key = StreamKey::from_seed(2);
        let a = sample_bottleneck(&tutor, &ds, &cfg, key);
        assert_eq!(a.pairs.len(), 10);
        assert_eq!(a.glyphs.len(), 5);
        let distinct: std::collections::HashSet<_> = a.glyphs.iter().collect();
        assert_eq!(distinct.len(), 5);
        // Every pair's source glyph is one of the chosen ones and its signal
        // is the tutor's encoding of the image.
        for ((img, sig), src) in a.pairs.iter().zip(&a.sources) {
            assert!(a.glyphs.contains(src));
            assert_eq!(*sig, tutor.encode(img));
        }
        let b = sample_bottleneck(&tutor, &ds, &cfg, key);
        assert_eq!(a.pairs, b.pairs);
    }

    #[test]
    fn bottleneck_with_all_glyphs() {
        let ds = tiny_dataset();
        let mut cfg = tiny_cfg();
        cfg.bottleneck_glyphs = 128;
        let tutor = Agent::new_naive(&cfg.arch, &mut StreamKey::from_seed(1).rng()).unwrap();
        let set = sample_bottleneck(&tutor, &ds, &cfg, StreamKey::from_seed(3));
        let mut ids: Vec<u8> = set.glyphs.iter().map(|g| g.id()).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..128).collect::<Vec<u8>>());
    }

    #[test]
    fn bottleneck_without_replacement_is_distinct() {
        let ds = tiny_dataset();
        let mut cfg = tiny_cfg();
        cfg.pairs_without_replacement = true;
        let tutor = Agent::new_naive(&cfg.arch, &mut StreamKey::from_seed(1).rng()).unwrap();
        let set = sample_bottleneck(&tutor, &ds, &cfg, StreamKey::from_seed(4));
        let mut seen: Vec<_> = set
            .pairs
            .iter()
            .map(|(img, _)| img.pixels().to_vec())
            .collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), cfg.n_pairs);
    }

    #[test]
    fn everyday_size_and_empty_case() {
        let ds = tiny_dataset();
        let mut cfg = tiny_cfg();
        assert_eq!(
            sample_everyday(&ds, &cfg, StreamKey::from_seed(5)).len(),
            20
        );
        cfg.n_everyday = 0;
        assert!(sample_everyday(&ds, &cfg, StreamKey::from_seed(5)).is_empty());
    }

    #[test]
    fn schedule_counters_are_exact() {
        let ds = tiny_dataset();
        let cfg = tiny_cfg();
        let tutor = Agent::new_naive(&cfg.arch, &mut StreamKey::from_seed(1).rng()).unwrap();
        let bn = sample_bottleneck(&tutor, &ds, &cfg, StreamKey::from_seed(6));
        let ev = sample_everyday(&ds, &cfg, StreamKey::from_seed(7));
        let mut pupil = Agent::new_naive(&cfg.arch, &mut StreamKey::from_seed(8).rng()).unwrap();
        let (losses, counts) =
            train_pupil(&mut pupil, &bn, &ev, &cfg, StreamKey::from_seed(9)).unwrap();
        assert_eq!(counts.encoder, 20); // n_pairs * n_epochs
        assert_eq!(counts.decoder, 20);
        assert_eq!(counts.outer, 40); // r * n_pairs * n_epochs
        assert_eq!(counts.inner, 40);
        assert_eq!(losses.encoder.len(), 2);
    }

    #[test]
    fn r_zero_skips_autoencoders() {
        let ds = tiny_dataset();
        let mut cfg = tiny_cfg();
        cfg.r = 0;
        let tutor = Agent::new_naive(&cfg.arch, &mut StreamKey::from_seed(1).rng()).unwrap();
        let bn = sample_bottleneck(&tutor, &ds, &cfg, StreamKey::from_seed(6));
        let ev = sample_everyday(&ds, &cfg, StreamKey::from_seed(7));
        let mut pupil = Agent::new_naive(&cfg.arch, &mut StreamKey::from_seed(8).rng()).unwrap();
        let (losses, counts) =
            train_pupil(&mut pupil, &bn, &ev, &cfg, StreamKey::from_seed(9)).unwrap();
        assert_eq!(counts.autoencoder(), 0);
        assert!(losses.outer.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn single_generation_chain() {
        let ds = tiny_dataset();
        let mut cfg = tiny_cfg();
        cfg.generations = 1;
        let records = run_chain(&cfg, &ds, StreamKey::from_seed(10), None).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.generation, 1);
        assert_eq!(r.table.len(), 128);
        assert!((0.0..=1.0).contains(&r.expressivity));
        assert!((0.0..=1.0).contains(&r.stability));
        assert!((-0.1..=1.0).contains(&r.c));
    }

    #[test]
    fn chain_is_deterministic() {
        let ds = tiny_dataset();
        let cfg = tiny_cfg();
        let a = run_chain(&cfg, &ds, StreamKey::from_seed(11), None).unwrap();
        let b = run_chain(&cfg, &ds, StreamKey::from_seed(11), None).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.table, y.table);
            assert_eq!(x.expressivity, y.expressivity);
            assert_eq!(x.c_raw, y.c_raw);
            assert_eq!(x.stability, y.stability);
            assert_eq!(x.losses, y.losses);
        }
    }

    #[test]
    fn hook_sees_every_generation() {
        let ds = tiny_dataset();
        let cfg = tiny_cfg();
        let mut seen = Vec::new();
        let mut hook = |g: usize, _a: &Agent| {
            seen.push(g);
            Ok(())
        };
        run_chain(&cfg, &ds, StreamKey::from_seed(12), Some(&mut hook)).unwrap();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn bottleneck_coverage_matches_expectation() {
        // At defaults a pupil sees b/128 of the glyph types; measure the
        // fraction of types actually present among pair sources.
        let ds = tiny_dataset();
        let mut cfg = SimConfig::new(tiny_arch());
        cfg.bottleneck_glyphs = 40;
        cfg.n_pairs = 400;
        let tutor = Agent::new_naive(&cfg.arch, &mut StreamKey::from_seed(1).rng()).unwrap();
        let key = StreamKey::from_seed(13);
        let mut total = 0.0;
        let n_trials = 50;
        for t in 0..n_trials {
            let set = sample_bottleneck(&tutor, &ds, &cfg, key.child(t));
            let seen: std::collections::HashSet<_> = set.sources.iter().collect();
            total += seen.len() as f64 / 128.0;
        }
        let mean = total / n_trials as f64;
        let expected = 40.0 / 128.0;
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "coverage {mean} vs {expected}"
        );
    }
}
