//! One function per subcommand. Each reads only the artifacts named in its
//! doc comment and writes the ones listed after the arrow.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pgsc_core::constraints::{constraint_check, ConstraintInputs, ConstraintReport};
use pgsc_core::detector::{
    evaluate, fit_baselines, fit_forest, grid_search, labelled, write_metrics_csv, Baselines, Classifier,
    ParamGrid, RandomForest,
};
use pgsc_core::gan::{
    discriminator_optimum_check, generate, generation_fidelity, train_gan, Discriminator, FidelityReport,
    Generator, OptimumCheck,
};
use pgsc_core::grid::{is_stable, simulate, Trajectory};
use pgsc_core::message::{
    apply_stats, normalize, read_scada_csv, read_stability_csv, split, synthesize_scada_dataset,
    synthesize_stability_dataset, Dataset, Loaded, NormMode, NormalizationStats, Schema, StabilitySynthesis,
    LABEL_REAL,
};
use pgsc_core::risk::{assess_all, risk_scores, write_reports_csv, RiskReport};
use serde::{Deserialize, Serialize};

use crate::config::{Scenario, Stream, SYNTHETIC};
use crate::error::ConfigError;
use crate::run::Run;

pub const TRAJECTORY: &str = "trajectory.csv";
pub const REAL_TRAIN: &str = "real_train.csv";
pub const REAL_TEST: &str = "real_test.csv";
pub const NORMALIZATION: &str = "normalization.json";
pub const GENERATOR: &str = "generator.json";
pub const DISCRIMINATOR: &str = "discriminator.json";
pub const GAN_LOG: &str = "gan_log.csv";
pub const GENERATED: &str = "generated.csv";
pub const FIDELITY: &str = "fidelity.json";
pub const RISK_JSON: &str = "risk.json";
pub const RISK_CSV: &str = "risk.csv";
pub const DETECTOR_TRAIN: &str = "detector_train.csv";
pub const DETECTOR_TEST: &str = "detector_test.csv";
pub const CV_TABLE: &str = "cv.csv";
pub const FOREST: &str = "forest.json";
pub const BASELINES: &str = "baselines.json";
pub const METRICS: &str = "metrics.csv";
pub const CONSTRAINTS: &str = "constraints.json";

fn input(dir: &Path, name: &str, producer: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if !path.is_file() {
        bail!("missing artifact {} (run `{producer}` first)", path.display());
    }
    Ok(path)
}

fn read_csv(surface: Schema, text: &[u8]) -> Result<Loaded> {
    Ok(match surface {
        Schema::Scada => read_scada_csv(text)?,
        Schema::Stability => read_stability_csv(text)?,
    })
}

/// Loads an artifact dataset, which must parse without rejections.
fn load_dataset(path: &Path, surface: Schema) -> Result<Dataset> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let loaded = read_csv(surface, &bytes).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(bad) = loaded.rejected.first() {
        bail!("{}: row {} rejected: {}", path.display(), bad.row, bad.reason);
    }
    if loaded.dataset.is_empty() {
        bail!("{} holds no rows", path.display());
    }
    Ok(loaded.dataset)
}

/// Writes a dataset and returns it as a reader of the file would see it.
fn write_dataset(run: &mut Run, path: &Path, ds: &Dataset) -> Result<Dataset> {
    let mut bytes = Vec::new();
    ds.write_csv(&mut bytes)?;
    run.write(path, &bytes)?;
    let loaded = read_csv(ds.schema(), &bytes)?;
    if !loaded.rejected.is_empty() {
        bail!("{} does not round-trip through CSV", path.display());
    }
    Ok(loaded.dataset)
}

fn write_json<T: Serialize>(run: &mut Run, path: &Path, value: &T) -> Result<()> {
    run.write(path, serde_json::to_string_pretty(value)? + "\n")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Real rows of one surface, all labelled real.
fn real_dataset(run: &Run, surface: Schema) -> Result<Dataset> {
    let cfg = &run.cfg;
    let source = cfg.data_source(surface);
    let seed = cfg.stream(surface, Stream::Data);
    let ds = if source == SYNTHETIC {
        match surface {
            Schema::Scada => synthesize_scada_dataset(cfg.synthetic_rows, seed)?,
            Schema::Stability => {
                synthesize_stability_dataset(cfg.synthetic_rows, &StabilitySynthesis::default(), seed)?
            }
        }
    } else {
        let bytes = std::fs::read(source).map_err(|e| ConfigError(format!("cannot read {source}: {e}")))?;
        let loaded = read_csv(surface, &bytes).map_err(|e| ConfigError(format!("{source}: {e}")))?;
        if !loaded.rejected.is_empty() {
            log::warn!("{source}: skipped {} invalid rows", loaded.rejected.len());
        }
        if loaded.dataset.is_empty() {
            return Err(ConfigError(format!("{source} holds no valid {surface} rows")).into());
        }
        loaded.dataset
    };
    Ok(ds.without_labels())
}

/// Grid scenario → `trajectory.csv`.
pub fn simulate_stage(run: &mut Run, dir: &Path) -> Result<Trajectory> {
    let scenario = match &run.cfg.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    let (topology, sim) = scenario.build(run.cfg.seed)?;
    let traj = simulate(&topology, &sim)?;
    let mut bytes = Vec::new();
    traj.write_csv(&mut bytes)?;
    run.write(&dir.join(TRAJECTORY), bytes)?;
    Ok(traj)
}

/// Configured dataset → real train/test split, min/max statistics, both
/// networks and the per-epoch loss log.
pub fn train_gan_stage(run: &mut Run, surface: Schema, dir: &Path) -> Result<()> {
    let real = real_dataset(run, surface)?;
    let (train, test) = split(&real, run.cfg.train_fraction, run.cfg.stream(surface, Stream::Split))?;
    let train = write_dataset(run, &dir.join(REAL_TRAIN), &train.with_uniform_label(LABEL_REAL))?;
    write_dataset(run, &dir.join(REAL_TEST), &test.with_uniform_label(LABEL_REAL))?;

    let (normalized, stats) = normalize(&train.without_labels(), NormMode::MinmaxPm1)?;
    run.write(&dir.join(NORMALIZATION), stats.to_json()? + "\n")?;
    let trained = train_gan(&normalized, &run.cfg.gan(surface))?;
    let path = dir.join(GENERATOR);
    trained.generator.save(&path)?;
    run.wrote(&path);
    let path = dir.join(DISCRIMINATOR);
    trained.discriminator.save(&path)?;
    run.wrote(&path);
    let mut log = Vec::new();
    trained.log.write_csv(&mut log)?;
    run.write(&dir.join(GAN_LOG), log)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub rows: usize,
    pub fidelity: FidelityReport,
    /// Mean discriminator score on the generated rows.
    pub discriminator_mean: f64,
}

fn load_stats(dir: &Path) -> Result<NormalizationStats> {
    let path = input(dir, NORMALIZATION, "train-gan")?;
    Ok(NormalizationStats::from_json(&std::fs::read_to_string(&path)?)?)
}

/// Generator, discriminator, statistics and real rows → `generated.csv`
/// plus a fidelity summary.
pub fn generate_stage(run: &mut Run, surface: Schema, dir: &Path) -> Result<GenerationSummary> {
    let generator = Generator::load(&input(dir, GENERATOR, "train-gan")?)?;
    let discriminator = Discriminator::load(&input(dir, DISCRIMINATOR, "train-gan")?)?;
    let stats = load_stats(dir)?;
    if stats.schema != surface {
        bail!("{NORMALIZATION} describes {}, not {surface}", stats.schema);
    }
    let real = load_dataset(&input(dir, REAL_TRAIN, "train-gan")?, surface)?;
    let rows = match run.cfg.generated_rows {
        0 => load_dataset(&input(dir, REAL_TEST, "train-gan")?, surface)?.len(),
        n => n,
    };
    let generated = generate(&generator, rows, run.cfg.stream(surface, Stream::Generate), &stats)?;
    let generated = write_dataset(run, &dir.join(GENERATED), &generated)?;

    let fidelity = generation_fidelity(&real, &generated)?;
    let scores = discriminator.score(apply_stats(&generated.without_labels(), &stats)?.features().view())?;
    let summary = GenerationSummary {
        rows,
        fidelity,
        discriminator_mean: scores.iter().sum::<f64>() / scores.len() as f64,
    };
    write_json(run, &dir.join(FIDELITY), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiskDocument {
    /// Largest risk score among the real training rows.
    pub baseline_max: f64,
    pub reports: Vec<RiskReport>,
}

/// Risk scores of the generated rows against the real training rows' z-score
/// statistics, with the largest real score as the percentage baseline.
fn score_generated(dir: &Path, surface: Schema) -> Result<(Vec<f64>, f64)> {
    let real = load_dataset(&input(dir, REAL_TRAIN, "train-gan")?, surface)?.without_labels();
    let generated = load_dataset(&input(dir, GENERATED, "generate")?, surface)?.without_labels();
    let (_, zstats) = normalize(&real, NormMode::Zscore)?;
    let scores = risk_scores(&generated, &zstats)?;
    let baseline = risk_scores(&real, &zstats)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok((scores, baseline))
}

/// Real training rows and generated rows → `risk.json`, `risk.csv`.
pub fn risk_stage(run: &mut Run, surface: Schema, dir: &Path) -> Result<RiskDocument> {
    let (scores, baseline_max) = score_generated(dir, surface)?;
    let reports = assess_all(&scores, &run.cfg.risk())?
        .into_iter()
        .map(|r| r.with_baseline(baseline_max))
        .collect::<pgsc_core::Result<Vec<_>>>()?;
    let mut csv = Vec::new();
    write_reports_csv(&reports, &mut csv)?;
    run.write(&dir.join(RISK_CSV), csv)?;
    let doc = RiskDocument { baseline_max, reports };
    write_json(run, &dir.join(RISK_JSON), &doc)?;
    Ok(doc)
}

/// Held-out real rows (y = 0) and generated rows (y = 1) → detector split,
/// forest and baselines (plus the cross-validation table with `detector_grid`).
pub fn train_detector_stage(run: &mut Run, surface: Schema, dir: &Path) -> Result<()> {
    let real = load_dataset(&input(dir, REAL_TEST, "train-gan")?, surface)?;
    let generated = load_dataset(&input(dir, GENERATED, "generate")?, surface)?;
    let all = real.concat(&generated)?;
    let (train, test) = split(
        &all,
        run.cfg.detector_train_fraction,
        run.cfg.stream(surface, Stream::DetectorSplit),
    )?;
    let train = write_dataset(run, &dir.join(DETECTOR_TRAIN), &train)?;
    write_dataset(run, &dir.join(DETECTOR_TEST), &test)?;

    let (x, y) = labelled(&train)?;
    let forest_cfg = if run.cfg.detector_grid {
        let search = grid_search(
            x,
            y,
            &ParamGrid::full(),
            run.cfg.cv_folds,
            run.cfg.stream(surface, Stream::CrossValidation),
        )?;
        let mut table = Vec::new();
        search.write_csv(&mut table)?;
        run.write(&dir.join(CV_TABLE), table)?;
        search.best
    } else {
        run.cfg.forest()
    };
    let forest = fit_forest(x, y, &forest_cfg, run.cfg.stream(surface, Stream::Forest))?;
    run.write(&dir.join(FOREST), forest.to_json()? + "\n")?;
    let baselines = fit_baselines(x, y, run.cfg.stream(surface, Stream::Forest))?;
    write_json(run, &dir.join(BASELINES), &baselines)?;
    Ok(())
}

fn load_baselines(dir: &Path) -> Result<Baselines> {
    let baselines: Baselines = read_json(&input(dir, BASELINES, "train-detector")?)?;
    baselines.knn.validate()?;
    let width = baselines.knn.features() + 1;
    for m in [&baselines.logistic, &baselines.linear_svm] {
        if m.weights.len() != width || m.weights.iter().any(|w| !w.is_finite()) {
            bail!("{BASELINES}: linear model weights are malformed");
        }
    }
    Ok(baselines)
}

/// Forest, baselines and the detector test split → `metrics.csv`.
pub fn evaluate_stage(run: &mut Run, surface: Schema, dir: &Path) -> Result<Vec<(String, pgsc_core::detector::Metrics)>> {
    let forest = RandomForest::load(&input(dir, FOREST, "train-detector")?)?;
    let baselines = load_baselines(dir)?;
    let test = load_dataset(&input(dir, DETECTOR_TEST, "train-detector")?, surface)?;
    let models: [(&str, &dyn Classifier); 4] = [
        ("random_forest", &forest),
        ("knn", &baselines.knn),
        ("logistic_regression", &baselines.logistic),
        ("linear_svm", &baselines.linear_svm),
    ];
    let rows = models
        .iter()
        .map(|(name, model)| Ok((name.to_string(), evaluate(*model, &test)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Vec::new();
    write_metrics_csv(&rows, &mut csv)?;
    run.write(&dir.join(METRICS), csv)?;
    Ok(rows)
}

/// Every upstream artifact of one surface, plus the grid trajectory →
/// `constraints.json`.
///
/// Stability indices come from the trajectory's node samples and, on the
/// stability surface, from the real and generated records.
pub fn constraints_stage(
    run: &mut Run,
    surface: Schema,
    dir: &Path,
    trajectory: &Trajectory,
) -> Result<ConstraintReport> {
    let cfg_risk = run.cfg.risk();
    let (scores, _) = score_generated(dir, surface)?;
    let reports = assess_all(&scores, &cfg_risk)?;

    let stats = load_stats(dir)?;
    let discriminator = Discriminator::load(&input(dir, DISCRIMINATOR, "train-gan")?)?;
    let real = load_dataset(&input(dir, REAL_TRAIN, "train-gan")?, surface)?.without_labels();
    let generated = load_dataset(&input(dir, GENERATED, "generate")?, surface)?.without_labels();
    let real_n = apply_stats(&real, &stats)?;
    let generated_n = apply_stats(&generated, &stats)?;
    let optimum = discriminator_optimum_check(
        &discriminator,
        real_n.features().view(),
        generated_n.features().view(),
        &OptimumCheck::default(),
    )?;

    let mut stab: Vec<f64> = trajectory.nodes.iter().flat_map(|n| n.stability.iter().copied()).collect();
    if let Some(idx) = surface.stab_index() {
        for ds in [&real, &generated] {
            stab.extend(ds.features().column(idx).iter().copied());
        }
    }
    let flags: Vec<bool> = stab.iter().map(|&s| is_stable(s)).collect();

    let baselines = load_baselines(dir)?;
    let test = load_dataset(&input(dir, DETECTOR_TEST, "train-detector")?, surface)?;
    let train = load_dataset(&input(dir, DETECTOR_TRAIN, "train-detector")?, surface)?;
    let labels: Vec<u8> = train
        .labels()
        .into_iter()
        .chain(test.labels())
        .flatten()
        .copied()
        .collect();
    let linear = [&baselines.logistic, &baselines.linear_svm];
    let report = constraint_check(&ConstraintInputs {
        scores: Some(&scores),
        risk: Some(&reports),
        optimum: Some(&optimum),
        stability: Some((&stab, &flags)),
        linear_models: Some((&linear, test.features().view())),
        labels: Some(&labels),
    })?;
    write_json(run, &dir.join(CONSTRAINTS), &report)?;
    if !report.all {
        log::warn!("{surface}: constraint check failed: {report:?}");
    }
    Ok(report)
}

/// Every stage of one surface in order.
pub fn surface_pipeline(run: &mut Run, surface: Schema, dir: &Path, trajectory: &Trajectory) -> Result<()> {
    run.stage("train-gan", Some(surface), |r| train_gan_stage(r, surface, dir))?;
    run.stage("generate", Some(surface), |r| generate_stage(r, surface, dir))?;
    run.stage("risk", Some(surface), |r| risk_stage(r, surface, dir))?;
    run.stage("train-detector", Some(surface), |r| train_detector_stage(r, surface, dir))?;
    run.stage("evaluate", Some(surface), |r| evaluate_stage(r, surface, dir))?;
    run.stage("constraints", Some(surface), |r| constraints_stage(r, surface, dir, trajectory))?;
    Ok(())
}

pub fn unsupported(what: &str) -> anyhow::Error {
    anyhow!(ConfigError(what.to_string()))
}
