//! Multi-instantiation experiment execution: deterministic seeding, optional
//! thread parallelism, CSV/manifest output and offline metric recomputation.

use crate::config::RunConfig;
use crate::csvfmt::{self, Normalize};
use segilm::agent::Agent;
use segilm::glyphset::{generate_dataset, load_dataset, save_dataset, Dataset, SegmentLayout};
use segilm::hash::fnv64;
use segilm::ilm::{language_table, run_chain, GenerationRecord, SimConfig};
use segilm::metrics;
use segilm::{CoreError, StreamKey};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub struct RunSpec {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    /// Load this dataset instead of generating one into the output directory.
    pub dataset: Option<PathBuf>,
    /// Worker thread count; results are identical at any degree.
    pub parallel: usize,
    pub charts: bool,
    pub normalize: Normalize,
    /// Recorded in the manifest; "custom" when no preset was named.
    pub preset_name: String,
}

pub struct RunOutcome {
    /// Instantiation index and error for every failed chain.
    pub failures: Vec<(usize, CoreError)>,
    pub records: Vec<Option<Vec<GenerationRecord>>>,
}

pub fn inst_dir(out_dir: &Path, i: usize) -> PathBuf {
    out_dir.join(format!("inst-{i:02}"))
}

pub fn snapshot_path(inst: &Path, generation: usize) -> PathBuf {
    inst.join("snapshots")
        .join(format!("gen-{generation:04}.agent"))
}

/// The per-instantiation master stream: child i of the run seed.
pub fn instantiation_key(seed: u64, i: usize) -> StreamKey {
    StreamKey::from_seed(seed).child(i as u64)
}

fn run_one(
    sim: &SimConfig,
    ds: &Dataset,
    seed: u64,
    i: usize,
    snapshots_into: Option<&Path>,
) -> Result<Vec<GenerationRecord>, CoreError> {
    let key = instantiation_key(seed, i);
    match snapshots_into {
        None => run_chain(sim, ds, key, None),
        Some(inst) => {
            std::fs::create_dir_all(inst.join("snapshots"))?;
            let mut hook = |g: usize, a: &Agent| a.save_snapshot(&snapshot_path(inst, g));
            run_chain(sim, ds, key, Some(&mut hook))
        }
    }
}

pub fn run_experiment(spec: &RunSpec) -> Result<RunOutcome, CoreError> {
    let cfg = &spec.cfg;
    let sim = cfg.sim_config()?;
    std::fs::create_dir_all(&spec.out_dir)?;

    // Dataset: load the given file or generate deterministically from the
    // config and keep a copy beside the results.
    let dataset_path = match &spec.dataset {
        Some(p) => p.clone(),
        None => {
            let p = spec.out_dir.join("dataset.bin");
            if !p.exists() {
                let ds = generate_dataset(
                    &SegmentLayout::default(),
                    &cfg.noise,
                    cfg.variants,
                    cfg.data_seed,
                )?;
                save_dataset(&ds, &p)?;
            }
            p
        }
    };
    let dataset_bytes = std::fs::read(&dataset_path)?;
    let dataset_hash = fnv64(&dataset_bytes);
    drop(dataset_bytes);
    let ds = load_dataset(&dataset_path)?;

    // Worker pool over instantiation indices; slot order, not completion
    // order, decides every output.
    let n = cfg.instantiations;
    let parallel = spec.parallel.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    type Slot = Option<Result<Vec<GenerationRecord>, CoreError>>;
    let slots: Mutex<Vec<Slot>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..parallel {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let snap_dir = cfg.snapshots.then(|| inst_dir(&spec.out_dir, i));
                let res = run_one(&sim, &ds, cfg.seed, i, snap_dir.as_deref());
                slots.lock().unwrap()[i] = Some(res);
            });
        }
    });
    let results: Vec<Result<Vec<GenerationRecord>, CoreError>> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect();

    // Per-instantiation CSVs.
    let mut failures = Vec::new();
    let mut records: Vec<Option<Vec<GenerationRecord>>> = Vec::with_capacity(n);
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(recs) => {
                let dir = inst_dir(&spec.out_dir, i);
                std::fs::create_dir_all(&dir)?;
                std::fs::write(
                    dir.join("generations.csv"),
                    csvfmt::generations_csv(&recs, cfg.n_epochs),
                )?;
                records.push(Some(recs));
            }
            Err(e) => {
                failures.push((i, e));
                records.push(None);
            }
        }
    }

    let ok_runs: Vec<&[GenerationRecord]> = records.iter().flatten().map(Vec::as_slice).collect();
    std::fs::write(
        spec.out_dir.join("aggregate.csv"),
        csvfmt::aggregate_csv(&ok_runs),
    )?;
    if cfg.log_losses {
        std::fs::write(
            spec.out_dir.join("norm_losses.csv"),
            csvfmt::norm_losses_csv(&ok_runs, spec.normalize),
        )?;
    }

    // Canonical config and manifest.
    std::fs::write(spec.out_dir.join("config.txt"), cfg.canonical())?;
    let manifest = manifest_text(spec, cfg, dataset_hash, &dataset_path, &failures)?;
    std::fs::write(spec.out_dir.join("manifest.txt"), manifest)?;

    if spec.charts {
        crate::chart::write_charts(&spec.out_dir)?;
    }
    Ok(RunOutcome { failures, records })
}

fn manifest_text(
    spec: &RunSpec,
    cfg: &RunConfig,
    dataset_hash: u64,
    dataset_path: &Path,
    failures: &[(usize, CoreError)],
) -> Result<String, CoreError> {
    let mut m = String::new();
    let _ = writeln!(m, "schema_version = {}", csvfmt::SCHEMA_VERSION);
    let _ = writeln!(m, "code_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "preset = {}", spec.preset_name);
    let _ = writeln!(
        m,
        "config_hash = {:016x}",
        fnv64(cfg.canonical().as_bytes())
    );
    let _ = writeln!(
        m,
        "dataset = {}",
        dataset_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default()
    );
    let _ = writeln!(m, "dataset_hash = {dataset_hash:016x}");
    let _ = writeln!(m, "master_seed = {}", cfg.seed);
    let _ = writeln!(m, "instantiations = {}", cfg.instantiations);
    let _ = writeln!(m, "generations = {}", cfg.generations);
    let _ = writeln!(m, "n_l = {}", cfg.arch().n_l());
    let _ = writeln!(m, "c0 = {}", csvfmt::fmt(cfg.resolve_c0()));
    for i in 0..cfg.instantiations {
        match failures.iter().find(|(fi, _)| *fi == i) {
            Some((_, e)) => {
                let _ = writeln!(m, "inst_{i:02} = failed: {e}");
            }
            None => {
                let _ = writeln!(m, "inst_{i:02} = ok");
            }
        }
    }
    Ok(m)
}

/// Read one `key = value` entry from a manifest or config file.
pub fn manifest_value(text: &str, key: &str) -> Option<String> {
    text.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim().to_owned())
    })
}

/// A metrics row recomputed offline from agent snapshots.
pub struct MetricRow {
    pub generation: usize,
    pub x: f64,
    pub c_raw: f64,
    pub c: f64,
    /// None when there is no predecessor snapshot.
    pub s: Option<f64>,
}

/// Recompute x, c and s from consecutive snapshots in a directory. With a
/// single snapshot, stability is omitted. Values match the run-time CSV
/// exactly because both go through the same metric code and formatter.
pub fn recompute_metrics(
    snap_dir: &Path,
    ds: &Dataset,
    c0: f64,
) -> Result<Vec<MetricRow>, CoreError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(snap_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "agent"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CoreError::Format(format!(
            "no .agent snapshots in {}",
            snap_dir.display()
        )));
    }
    let mut rows = Vec::new();
    let mut prev_table: Option<Vec<segilm::Signal>> = None;
    let mut width: Option<usize> = None;
    for path in &paths {
        let agent = Agent::load_snapshot(path)?;
        match width {
            None => width = Some(agent.n_l()),
            Some(w) if w != agent.n_l() => {
                return Err(CoreError::Dimension(format!(
                    "snapshot {} has signal width {}, expected {}",
                    path.display(),
                    agent.n_l(),
                    w
                )));
            }
            _ => {}
        }
        let generation = generation_of(path);
        let table = language_table(&agent, ds);
        let x = metrics::expressivity(&table);
        let c_raw = metrics::compositionality_raw_of_table(&table)?;
        let c = metrics::compositionality(c_raw, c0)?.clamp(-0.1, 1.0);
        let s = match &prev_table {
            Some(prev) => Some(metrics::stability(&table, prev)?),
            None => None,
        };
        rows.push(MetricRow {
            generation,
            x,
            c_raw,
            c,
            s,
        });
        prev_table = Some(table);
    }
    Ok(rows)
}

/// Generation number from a `gen-NNNN.agent` file name; falls back to the
/// row's position when the name does not carry one.
fn generation_of(path: &Path) -> usize {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("gen-"))
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let with_s = rows.iter().any(|r| r.s.is_some());
    let mut s = String::from(if with_s {
        "generation,x,c_raw,c,s\n"
    } else {
        "generation,x,c_raw,c\n"
    });
    for r in rows {
        let _ = write!(
            s,
            "{},{},{},{}",
            r.generation,
            csvfmt::fmt(r.x),
            csvfmt::fmt(r.c_raw),
            csvfmt::fmt(r.c)
        );
        if with_s {
            match r.s {
                Some(v) => {
                    let _ = write!(s, ",{}", csvfmt::fmt(v));
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}
