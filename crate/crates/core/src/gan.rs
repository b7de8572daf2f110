//! Adversarial synthesis of attack vectors.
//!
//! A generator maps standard-normal latent noise to feature vectors in the
//! `[-1, 1]` normalized space; a discriminator scores how likely a vector is to
//! be real. Training alternates, per minibatch, one discriminator ascent step on
//!
//! ```text
//! U = E[ln D(x)] + E[ln(1 − D(G(z)))]
//! ```
//!
//! and one generator descent step on `E[ln(1 − D(G(z)))]`. The saturating
//! generator objective is used as written; no non-saturating substitute.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::fmt::g9;
use crate::message::{denormalize, Dataset, NormMode, NormalizationStats, Schema, LABEL_GENERATED};
use crate::nn::{bce_loss, mean_log_complement, Activation, AdamState, Gradients, Mlp};
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const MAX_EPOCHS: usize = 5000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub hidden_units: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub surface: Schema,
}

impl GanConfig {
    /// Latent size 35, 64 hidden units, learning rate 0.02, 5000 epochs, batch 64.
    pub fn new(surface: Schema) -> Self {
        Self {
            latent_dim: 35,
            hidden_units: 64,
            lr: 0.02,
            epochs: 5000,
            batch_size: 64,
            seed: 0,
            surface,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden_units == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "latent_dim, hidden_units and batch_size must be positive".into(),
            ));
        }
        if self.epochs > MAX_EPOCHS {
            return Err(Error::InvalidConfig(format!("epochs must be at most {MAX_EPOCHS}")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// `latent_dim → hidden (relu) → features (tanh)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    net: Mlp,
}

impl Generator {
    pub fn new(cfg: &GanConfig, feature_dim: usize, rng: &mut Rng) -> Result<Self> {
        let net = Mlp::new(
            &[cfg.latent_dim, cfg.hidden_units, feature_dim],
            &[Activation::Relu, Activation::Tanh],
            rng,
        )?;
        Ok(Self { net })
    }

    pub fn from_mlp(net: Mlp) -> Result<Self> {
        if net.layers().last().map(|l| l.activation()) != Some(Activation::Tanh) {
            return Err(Error::InvalidConfig("generator output head must be tanh".into()));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn latent_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn latent_batch(&self, n: usize, rng: &mut Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((n, self.latent_dim()), || StandardNormal.sample(rng))
    }

    /// Samples in normalized coordinates.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Array2<f64>> {
        let z = self.latent_batch(n, rng);
        self.net.predict(z.view())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.net.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_mlp(Mlp::load(path)?)
    }
}

/// `features → hidden (leaky relu 0.2) → 1 (sigmoid)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    net: Mlp,
}

impl Discriminator {
    pub fn new(cfg: &GanConfig, feature_dim: usize, rng: &mut Rng) -> Result<Self> {
        let net = Mlp::new(
            &[feature_dim, cfg.hidden_units, 1],
            &[Activation::LeakyRelu, Activation::Sigmoid],
            rng,
        )?;
        Ok(Self { net })
    }

    pub fn from_mlp(net: Mlp) -> Result<Self> {
        if net.output_dim() != 1 || net.layers().last().map(|l| l.activation()) != Some(Activation::Sigmoid) {
            return Err(Error::InvalidConfig("discriminator must end in one sigmoid unit".into()));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Probability that each row is real.
    pub fn score(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.net.predict(x)?.into_iter().collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.net.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_mlp(Mlp::load(path)?)
    }
}

fn column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column vector")
}

/// Minibatch estimate of `U = E[ln D(x)] + E[ln(1 − D(G(z)))]`.
pub fn minimax_objective(dis: &Discriminator, real: ArrayView2<f64>, fake: ArrayView2<f64>) -> Result<f64> {
    let d_real = dis.score(real)?;
    let d_fake = dis.score(fake)?;
    let ones = vec![1.0; d_real.len()];
    let zeros = vec![0.0; d_fake.len()];
    Ok(-(bce_loss(&d_real, &ones)?.value + bce_loss(&d_fake, &zeros)?.value))
}

/// Discriminator loss `-U` and its parameter gradients (descending it ascends `U`).
pub fn discriminator_gradients(
    dis: &Discriminator,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
) -> Result<(f64, Gradients)> {
    let real_cache = dis.net.forward(real)?;
    let real_scores: Vec<f64> = real_cache.output().iter().copied().collect();
    let real_loss = bce_loss(&real_scores, &vec![1.0; real_scores.len()])?;
    let mut grads = dis.net.backward(&real_cache, column(&real_loss.gradient).view())?;

    let fake_cache = dis.net.forward(fake)?;
    let fake_scores: Vec<f64> = fake_cache.output().iter().copied().collect();
    let fake_loss = bce_loss(&fake_scores, &vec![0.0; fake_scores.len()])?;
    grads.accumulate(&dis.net.backward(&fake_cache, column(&fake_loss.gradient).view())?)?;
    Ok((real_loss.value + fake_loss.value, grads))
}

/// Generator loss `E[ln(1 − D(G(z)))]` and its gradients with respect to the
/// generator parameters, backpropagated through a frozen discriminator.
pub fn generator_gradients(gen: &Generator, dis: &Discriminator, z: ArrayView2<f64>) -> Result<(f64, Gradients)> {
    let gen_cache = gen.net.forward(z)?;
    let dis_cache = dis.net.forward(gen_cache.output().view())?;
    let scores: Vec<f64> = dis_cache.output().iter().copied().collect();
    let loss = mean_log_complement(&scores)?;
    let through_dis = dis.net.backward(&dis_cache, column(&loss.gradient).view())?;
    let grads = gen.net.backward(&gen_cache, through_dis.input.view())?;
    Ok((loss.value, grads))
}

/// Losses observed during one alternating update.
#[derive(Clone, Debug, PartialEq)]
pub struct StepStats {
    /// Discriminator loss `-U` before its update.
    pub d_loss: f64,
    /// Discriminator loss on the same real/fake batch after its update.
    pub d_loss_after: f64,
    pub g_loss: f64,
}

/// Per-epoch training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean generator objective `ln(1 − D(G(z)))` over the epoch's minibatches.
    pub g_loss: f64,
    /// Mean discriminator loss `-U` over the epoch's minibatches.
    pub d_loss: f64,
    /// Discriminator accuracy on the monitoring real batch plus a fresh fake batch.
    pub d_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    /// CSV with header `epoch,g_loss,d_loss,d_acc`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,g_loss,d_loss,d_acc")?;
        for e in &self.epochs {
            writeln!(out, "{},{},{},{}", e.epoch, g9(e.g_loss), g9(e.d_loss), g9(e.d_acc))?;
        }
        Ok(())
    }
}

/// Holds both networks and their optimizers between alternating updates.
pub struct GanTrainer {
    pub generator: Generator,
    pub discriminator: Discriminator,
    gen_opt: AdamState,
    dis_opt: AdamState,
    rng: Rng,
}

impl GanTrainer {
    pub fn new(cfg: &GanConfig, feature_dim: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::seeded(cfg.seed);
        let generator = Generator::new(cfg, feature_dim, &mut rng)?;
        let discriminator = Discriminator::new(cfg, feature_dim, &mut rng)?;
        Ok(Self {
            generator,
            discriminator,
            gen_opt: AdamState::new(cfg.lr),
            dis_opt: AdamState::new(cfg.lr),
            rng,
        })
    }

    pub fn rng(&mut self) -> &mut Rng {
        &mut self.rng
    }

    /// One discriminator ascent step followed by one generator descent step,
    /// both on fakes produced from the same latent batch.
    pub fn step(&mut self, real: ArrayView2<f64>) -> Result<StepStats> {
        let z = self.generator.latent_batch(real.nrows(), &mut self.rng);
        let fake = self.generator.net.predict(z.view())?;

        let (d_loss, d_grads) = discriminator_gradients(&self.discriminator, real, fake.view())?;
        self.discriminator.net.apply_adam(&d_grads, &mut self.dis_opt)?;
        let d_loss_after = -minimax_objective(&self.discriminator, real, fake.view())?;

        let (g_loss, g_grads) = generator_gradients(&self.generator, &self.discriminator, z.view())?;
        self.generator.net.apply_adam(&g_grads, &mut self.gen_opt)?;
        Ok(StepStats {
            d_loss,
            d_loss_after,
            g_loss,
        })
    }
}

/// Trained networks plus their log.
pub struct TrainedGan {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub log: TrainingLog,
}

fn check_normalized(real: &Dataset) -> Result<()> {
    if let Some(stats) = real.stats() {
        if stats.mode() != NormMode::MinmaxPm1 {
            return Err(Error::InvalidConfig(
                "GAN training expects min/max [-1, 1] normalized data".into(),
            ));
        }
    }
    if real.features().iter().any(|v| !(v.abs() <= 1.0 + 1e-9)) {
        return Err(Error::InvalidConfig("training data must lie in [-1, 1]".into()));
    }
    Ok(())
}

/// Trains a GAN on normalized real feature vectors.
///
/// Each epoch shuffles the rows and visits every full minibatch once.
pub fn train_gan(real: &Dataset, cfg: &GanConfig) -> Result<TrainedGan> {
    cfg.validate()?;
    if real.schema() != cfg.surface {
        return Err(Error::SchemaMismatch {
            expected: cfg.surface.to_string(),
            found: real.schema().to_string(),
        });
    }
    if real.len() < 2 * cfg.batch_size {
        return Err(Error::TooSmall(format!(
            "{} rows; GAN training needs at least {}",
            real.len(),
            2 * cfg.batch_size
        )));
    }
    check_normalized(real)?;
    let data = real.features();
    let mut trainer = GanTrainer::new(cfg, real.feature_count())?;

    let mut order: Vec<usize> = (0..real.len()).collect();
    let monitor_rows: Vec<usize> = {
        let mut idx = order.clone();
        idx.shuffle(trainer.rng());
        idx.truncate(cfg.batch_size);
        idx
    };
    let monitor = data.select(Axis(0), &monitor_rows);

    let mut log = TrainingLog::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(trainer.rng());
        let mut g_sum = 0.0;
        let mut d_sum = 0.0;
        let batches = real.len() / cfg.batch_size;
        for b in 0..batches {
            let rows = &order[b * cfg.batch_size..(b + 1) * cfg.batch_size];
            let batch = data.select(Axis(0), rows);
            let stats = trainer.step(batch.view())?;
            if !stats.d_loss.is_finite() || !stats.g_loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            g_sum += stats.g_loss;
            d_sum += stats.d_loss;
        }
        let fake = {
            let GanTrainer { generator, rng, .. } = &mut trainer;
            generator.sample(cfg.batch_size, rng)?
        };
        let real_scores = trainer.discriminator.score(monitor.view())?;
        let fake_scores = trainer.discriminator.score(fake.view())?;
        let correct = real_scores.iter().filter(|&&p| p >= 0.5).count()
            + fake_scores.iter().filter(|&&p| p < 0.5).count();
        let entry = EpochLog {
            epoch,
            g_loss: g_sum / batches as f64,
            d_loss: d_sum / batches as f64,
            d_acc: correct as f64 / (real_scores.len() + fake_scores.len()) as f64,
        };
        if !entry.g_loss.is_finite() || !entry.d_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        log.epochs.push(entry);
    }
    Ok(TrainedGan {
        generator: trainer.generator,
        discriminator: trainer.discriminator,
        log,
    })
}

/// Draws `n` synthetic vectors, maps them back to raw units with `stats` and
/// labels them generated (`y = 1`).
pub fn generate(gen: &Generator, n: usize, seed: u64, stats: &NormalizationStats) -> Result<Dataset> {
    if stats.feature_count() != gen.feature_dim() || stats.schema.feature_count() != gen.feature_dim() {
        return Err(Error::SchemaMismatch {
            expected: format!("{} generator outputs", gen.feature_dim()),
            found: format!("{} statistics for {}", stats.feature_count(), stats.schema),
        });
    }
    if n == 0 {
        return Ok(Dataset::empty(stats.schema).with_uniform_label(LABEL_GENERATED));
    }
    let mut rng = rng::seeded(seed);
    let mut sample = gen.sample(n, &mut rng)?;
    // The tanh head already lies in [-1, 1]; clamping removes rounding past the real box.
    sample.mapv_inplace(|v| v.clamp(-1.0, 1.0));
    let normalized = Dataset::new(stats.schema, sample, None)?;
    let raw = denormalize(&normalized, stats)?;
    let raw = match stats.bounds() {
        Ok((lo, hi)) => {
            let mut features = raw.features().clone();
            for (f, mut col) in features.columns_mut().into_iter().enumerate() {
                col.mapv_inplace(|v| v.clamp(lo[f], hi[f]));
            }
            Dataset::new(stats.schema, features, None)?
        }
        Err(_) => raw,
    };
    Ok(raw.with_uniform_label(LABEL_GENERATED))
}

/// Histogram cell used by [`discriminator_optimum_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct BinSummary {
    pub cell: Vec<usize>,
    pub real: usize,
    pub fake: usize,
    /// Optimal discriminator value `P_X / (P_X + P_G)` in this cell.
    pub optimal: f64,
    pub mean_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimumReport {
    /// Sample-weighted mean of `|D(x) − P_X/(P_X + P_G)|`.
    pub mean_deviation: f64,
    pub bins: Vec<BinSummary>,
    pub features: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimumCheck {
    pub bins_per_feature: usize,
    /// Up to two feature indices whose joint histogram estimates the densities.
    pub features: Vec<usize>,
}

impl Default for OptimumCheck {
    fn default() -> Self {
        Self {
            bins_per_feature: 16,
            features: vec![0, 1],
        }
    }
}

/// Compares the discriminator with the optimum `P_X / (P_X + P_G)`, both
/// densities estimated by a histogram over the selected features.
///
/// Inputs are in the discriminator's (normalized) coordinates.
pub fn discriminator_optimum_check(
    dis: &Discriminator,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    check: &OptimumCheck,
) -> Result<OptimumReport> {
    if real.nrows() == 0 || fake.nrows() == 0 {
        return Err(Error::Empty("optimum check needs real and fake samples".into()));
    }
    let dims = real.ncols();
    let features: Vec<usize> = check.features.iter().copied().filter(|&f| f < dims).take(2).collect();
    if features.is_empty() || check.bins_per_feature == 0 {
        return Err(Error::InvalidConfig("select one or two valid features and at least one bin".into()));
    }
    let bins = check.bins_per_feature;
    let mut lo = vec![f64::INFINITY; features.len()];
    let mut hi = vec![f64::NEG_INFINITY; features.len()];
    for row in real.rows().into_iter().chain(fake.rows()) {
        for (k, &f) in features.iter().enumerate() {
            lo[k] = lo[k].min(row[f]);
            hi[k] = hi[k].max(row[f]);
        }
    }
    let cell_of = |row: ndarray::ArrayView1<f64>| -> Vec<usize> {
        features
            .iter()
            .enumerate()
            .map(|(k, &f)| {
                let width = hi[k] - lo[k];
                if width <= 0.0 {
                    0
                } else {
                    (((row[f] - lo[k]) / width * bins as f64) as usize).min(bins - 1)
                }
            })
            .collect()
    };
    let flat = |cell: &[usize]| cell.iter().fold(0usize, |acc, &c| acc * bins + c);
    let total_cells = bins.pow(features.len() as u32);
    let mut real_counts = vec![0usize; total_cells];
    let mut fake_counts = vec![0usize; total_cells];
    let real_cells: Vec<Vec<usize>> = real.rows().into_iter().map(cell_of).collect();
    let fake_cells: Vec<Vec<usize>> = fake.rows().into_iter().map(cell_of).collect();
    for c in &real_cells {
        real_counts[flat(c)] += 1;
    }
    for c in &fake_cells {
        fake_counts[flat(c)] += 1;
    }
    let n_real = real.nrows() as f64;
    let n_fake = fake.nrows() as f64;
    let optimal = |idx: usize| {
        let px = real_counts[idx] as f64 / n_real;
        let pg = fake_counts[idx] as f64 / n_fake;
        px / (px + pg)
    };

    let scores: Vec<f64> = dis
        .score(real)?
        .into_iter()
        .chain(dis.score(fake)?)
        .collect();
    let mut score_sums = vec![0.0; total_cells];
    let mut deviation = 0.0;
    for (cell, &s) in real_cells.iter().chain(&fake_cells).zip(&scores) {
        let idx = flat(cell);
        score_sums[idx] += s;
        deviation += (s - optimal(idx)).abs();
    }
    let mean_deviation = deviation / scores.len() as f64;

    let mut summaries = Vec::new();
    for idx in 0..total_cells {
        let occupied = real_counts[idx] + fake_counts[idx];
        if occupied == 0 {
            continue;
        }
        let mut cell = vec![0; features.len()];
        let mut rest = idx;
        for slot in cell.iter_mut().rev() {
            *slot = rest % bins;
            rest /= bins;
        }
        summaries.push(BinSummary {
            cell,
            real: real_counts[idx],
            fake: fake_counts[idx],
            optimal: optimal(idx),
            mean_score: score_sums[idx] / occupied as f64,
        });
    }
    let mut warnings = Vec::new();
    if summaries.len() == 1 {
        let msg = "all samples fall into one histogram cell; widen the bins or pick other features".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(OptimumReport {
        mean_deviation,
        bins: summaries,
        features,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFidelity {
    pub name: String,
    pub real_mean: f64,
    pub generated_mean: f64,
    pub mean_error: f64,
    pub real_sd: f64,
    pub generated_sd: f64,
    pub sd_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub features: Vec<FeatureFidelity>,
    /// `100 · (1 − mean relative error of the feature means)`, in percent.
    pub accuracy: f64,
}

fn relative_error(reference: f64, value: f64, fallback_scale: f64) -> f64 {
    let scale = if reference.abs() > 1e-12 { reference.abs() } else { fallback_scale };
    if scale > 0.0 {
        ((value - reference).abs() / scale).min(1.0)
    } else if value == reference {
        0.0
    } else {
        1.0
    }
}

fn mean_sd(values: ndarray::ArrayView1<f64>) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.sum() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-feature agreement of generated and real data in raw units.
///
/// Relative errors are taken against the real value (the real standard
/// deviation when the real mean is zero) and capped at 1.
pub fn generation_fidelity(real: &Dataset, generated: &Dataset) -> Result<FidelityReport> {
    if real.schema() != generated.schema() || real.stats() != generated.stats() {
        return Err(Error::SchemaMismatch {
            expected: real.schema().to_string(),
            found: generated.schema().to_string(),
        });
    }
    if real.is_empty() || generated.is_empty() {
        return Err(Error::Empty("fidelity needs real and generated rows".into()));
    }
    let names = real.schema().feature_names();
    let features: Vec<FeatureFidelity> = (0..real.feature_count())
        .map(|f| {
            let (rm, rs) = mean_sd(real.features().column(f));
            let (gm, gs) = mean_sd(generated.features().column(f));
            FeatureFidelity {
                name: names[f].to_string(),
                real_mean: rm,
                generated_mean: gm,
                mean_error: relative_error(rm, gm, rs),
                real_sd: rs,
                generated_sd: gs,
                sd_error: relative_error(rs, gs, 1.0),
            }
        })
        .collect();
    let mean_error = features.iter().map(|f| f.mean_error).sum::<f64>() / features.len() as f64;
    Ok(FidelityReport {
        features,
        accuracy: 100.0 * (1.0 - mean_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{normalize, synthesize_scada_dataset};
    use ndarray::array;

    fn tiny_cfg() -> GanConfig {
        GanConfig {
            latent_dim: 4,
            hidden_units: 8,
            lr: 0.01,
            epochs: 3,
            batch_size: 16,
            seed: 3,
            surface: Schema::Scada,
        }
    }

    fn normalized_scada(n: usize) -> (Dataset, NormalizationStats) {
        let raw = synthesize_scada_dataset(n, 1).unwrap();
        normalize(&raw, NormMode::MinmaxPm1).unwrap()
    }

    #[test]
    fn defaults_follow_experimental_setup() {
        let cfg = GanConfig::new(Schema::Scada);
        assert_eq!(cfg.latent_dim, 35);
        assert_eq!(cfg.hidden_units, 64);
        assert_eq!(cfg.lr, 0.02);
        assert_eq!(cfg.epochs, 5000);
    }

    #[test]
    fn zero_epochs_returns_initial_models() {
        let (real, _) = normalized_scada(64);
        let cfg = GanConfig { epochs: 0, ..tiny_cfg() };
        let trained = train_gan(&real, &cfg).unwrap();
        assert!(trained.log.epochs.is_empty());
        let fresh = GanTrainer::new(&cfg, 5).unwrap();
        assert_eq!(trained.generator, fresh.generator);
        assert_eq!(trained.discriminator, fresh.discriminator);
    }

    #[test]
    fn training_is_deterministic() {
        let (real, _) = normalized_scada(64);
        let a = train_gan(&real, &tiny_cfg()).unwrap();
        let b = train_gan(&real, &tiny_cfg()).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.epochs.len(), 3);
        assert_eq!(a.generator, b.generator);
    }

    #[test]
    fn rejects_small_or_unnormalized_data() {
        let (real, _) = normalized_scada(20);
        assert!(matches!(train_gan(&real, &tiny_cfg()), Err(Error::TooSmall(_))));
        let raw = synthesize_scada_dataset(64, 1).unwrap();
        assert!(train_gan(&raw, &tiny_cfg()).is_err());
    }

    #[test]
    fn generate_respects_box_and_seed() {
        let (_, stats) = normalized_scada(64);
        let mut rng = rng::seeded(0);
        let gen = Generator::new(&tiny_cfg(), 5, &mut rng).unwrap();
        let a = generate(&gen, 50, 9, &stats).unwrap();
        assert_eq!(a, generate(&gen, 50, 9, &stats).unwrap());
        assert_eq!(a.labels().unwrap(), &[LABEL_GENERATED; 50][..]);
        let (min, max) = stats.bounds().unwrap();
        for row in a.features().rows() {
            for f in 0..5 {
                assert!(row[f] >= min[f] - 1e-9 && row[f] <= max[f] + 1e-9);
            }
        }
        assert!(generate(&gen, 0, 9, &stats).unwrap().is_empty());
    }

    #[test]
    fn generate_rejects_mismatched_stats() {
        let (_, stats) = normalized_scada(64);
        let mut rng = rng::seeded(0);
        let gen = Generator::new(&tiny_cfg(), 13, &mut rng).unwrap();
        assert!(matches!(generate(&gen, 5, 1, &stats), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn optimum_ratio_on_disjoint_supports() {
        let mut rng = rng::seeded(0);
        let dis = Discriminator::new(&tiny_cfg(), 2, &mut rng).unwrap();
        let real = array![[-1.0, -1.0], [-0.9, -0.9]];
        let fake = array![[1.0, 1.0], [0.9, 0.95]];
        let report = discriminator_optimum_check(&dis, real.view(), fake.view(), &OptimumCheck::default()).unwrap();
        for bin in &report.bins {
            if bin.real > 0 {
                assert_eq!(bin.optimal, 1.0);
            } else {
                assert_eq!(bin.optimal, 0.0);
            }
        }
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn optimum_check_warns_on_single_cell_and_rejects_empty() {
        let mut rng = rng::seeded(0);
        let dis = Discriminator::new(&tiny_cfg(), 2, &mut rng).unwrap();
        let same = array![[0.5, 0.5], [0.5, 0.5]];
        let report = discriminator_optimum_check(&dis, same.view(), same.view(), &OptimumCheck::default()).unwrap();
        assert_eq!(report.bins.len(), 1);
        assert_eq!(report.bins[0].optimal, 0.5);
        assert_eq!(report.warnings.len(), 1);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(discriminator_optimum_check(&dis, same.view(), empty.view(), &OptimumCheck::default()).is_err());
    }

    #[test]
    fn fidelity_of_identical_and_shifted_data() {
        let real = synthesize_scada_dataset(200, 4).unwrap();
        assert_eq!(generation_fidelity(&real, &real).unwrap().accuracy, 100.0);
        let shifted = Dataset::new(Schema::Scada, real.features() * 1.1, None).unwrap();
        let report = generation_fidelity(&real, &shifted).unwrap();
        assert!((report.accuracy - 90.0).abs() < 1e-9, "{}", report.accuracy);
    }

    #[test]
    fn log_csv_format() {
        let log = TrainingLog {
            epochs: vec![EpochLog {
                epoch: 0,
                g_loss: -0.5,
                d_loss: 1.25,
                d_acc: 0.5,
            }],
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,g_loss,d_loss,d_acc\n0,-0.5,1.25,0.5\n");
    }
}
