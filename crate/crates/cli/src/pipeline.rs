//! Stage plans for every experiment kind and their sequential execution.
//!
//! Each stage writes its files under the run directory and is recorded in the
//! manifest with their hashes. Stages read what they need from earlier
//! stages' files, so any stage can be recomputed on its own.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::Instant;

use comember::attacks::{write_attack_csv, AttackMethod};
use comember::datalab::{make_split, Dataset, Membership, MembershipSplit};
use comember::metrics::{
    adversarial_sampling, dispersion_profile, learning_curve, mean_std, roc_and_auc,
    write_curve_csv, write_dispersion_csv, AdversarialSamplingConfig, LearningCurveConfig,
};
use comember::seed;
use serde::{Deserialize, Serialize};

use crate::config::{AdversarialNonmembers, ExperimentConfig, ExperimentKind, ModelKind};
use crate::desk::{
    attack_records, explicit_units, generated_samples, load_dataset, load_model, method_losses,
    save_model, split_units, train_model, EvalUnit,
};
use crate::error::{CliError, CliResult};
use crate::manifest::{
    hash_bytes, FileRecord, ReplicateSeed, RunManifest, StageRecord, StageStatus, CONFIG_FILE,
    MANIFEST_FILE,
};
use crate::summary::write_summary;

pub const CODE_VERSION: &str = concat!("comember ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the config's `output_dir`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads for per-instance attacks; the rayon default when unset.
    pub threads: Option<usize>,
    pub seed_override: Option<u64>,
}

/// Selection rows holding each batch's second-highest loss point.
const RUNNER_UP: &str = "runner_up";

/// Which training set a model was fitted on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arm {
    /// A random training set of this size.
    Size(usize),
    /// The points adversarial sampling picked.
    Adversarial,
    /// The random control of the same size.
    Random,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::Size(n) => write!(f, "size{n}"),
            Arm::Adversarial => f.write_str("adversarial"),
            Arm::Random => f.write_str("random"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    Select {
        replicate: usize,
    },
    Train {
        replicate: usize,
        model: ModelKind,
        arm: Arm,
    },
    Attack {
        replicate: usize,
        model: ModelKind,
        arm: Arm,
        method: AttackMethod,
        strength: usize,
    },
    Curve {
        replicate: usize,
        size: usize,
    },
    Dispersion {
        replicate: usize,
        model: ModelKind,
        arm: Arm,
    },
    Summary,
}

impl Stage {
    pub fn name(&self) -> String {
        match self {
            Stage::Select { replicate } => format!("select/r{replicate}"),
            Stage::Train { replicate, model, arm } => format!("train/{model}/{arm}/r{replicate}"),
            Stage::Attack {
                replicate,
                model,
                arm,
                method,
                strength,
            } => format!("attack/{model}/{arm}/r{replicate}/{method}/n{strength}"),
            Stage::Curve { replicate, size } => format!("curve/size{size}/r{replicate}"),
            Stage::Dispersion { replicate, model, arm } => {
                format!("dispersion/{model}/{arm}/r{replicate}")
            }
            Stage::Summary => "summary".into(),
        }
    }
}

fn model_stem(replicate: usize, model: ModelKind, arm: Arm) -> String {
    format!("{model}_{arm}_r{replicate}")
}

pub fn attack_stem(replicate: usize, model: ModelKind, arm: Arm, method: AttackMethod, n: usize) -> String {
    format!("{model}_{arm}_r{replicate}_{method}_n{n}")
}

pub fn replicate_seed(master: u64, replicate: usize) -> u64 {
    seed::derive(master, "replicate", replicate as u64)
}

/// `(method, strength)` pairs attacked on every model of the experiment.
/// Only the attacker network takes groups; the baselines see single instances.
fn attack_cells(cfg: &ExperimentConfig) -> Vec<(AttackMethod, usize)> {
    use ExperimentKind::*;
    let m = &cfg.metrics;
    match cfg.kind {
        RocVsDatasize | GeneralizationGapSweep | AdversarialVsRandom => {
            vec![(AttackMethod::AttackerNet, 1)]
        }
        RocVsCoattackStrength | StrengthVsDatasizeFrontier => {
            m.strengths.iter().map(|&n| (AttackMethod::AttackerNet, n)).collect()
        }
        TableAttackComparison => {
            let mut cells = Vec::new();
            for &method in &m.methods {
                if method == AttackMethod::AttackerNet {
                    cells.extend(m.strengths.iter().map(|&n| (method, n)));
                } else {
                    cells.push((method, 1));
                }
            }
            cells
        }
        LearningCurve | DispersionProfile => Vec::new(),
    }
}

pub fn plan(cfg: &ExperimentConfig) -> Vec<Stage> {
    use ExperimentKind::*;
    let m = &cfg.metrics;
    let cells = attack_cells(cfg);
    let mut stages = Vec::new();
    for replicate in 0..cfg.replicates {
        match cfg.kind {
            TableAttackComparison
            | RocVsDatasize
            | RocVsCoattackStrength
            | StrengthVsDatasizeFrontier
            | GeneralizationGapSweep => {
                for &model in &m.models {
                    for &size in &m.sizes {
                        let arm = Arm::Size(size);
                        stages.push(Stage::Train { replicate, model, arm });
                        stages.extend(cells.iter().map(|&(method, strength)| Stage::Attack {
                            replicate,
                            model,
                            arm,
                            method,
                            strength,
                        }));
                    }
                }
            }
            LearningCurve => {
                stages.extend(m.sizes.iter().map(|&size| Stage::Curve { replicate, size }));
            }
            DispersionProfile => {
                for &model in &m.models {
                    for &size in &m.sizes {
                        let arm = Arm::Size(size);
                        stages.push(Stage::Train { replicate, model, arm });
                        stages.push(Stage::Dispersion { replicate, model, arm });
                    }
                }
            }
            AdversarialVsRandom => {
                stages.push(Stage::Select { replicate });
                for arm in [Arm::Adversarial, Arm::Random] {
                    let model = ModelKind::Wgan;
                    stages.push(Stage::Train { replicate, model, arm });
                    stages.push(Stage::Dispersion { replicate, model, arm });
                    stages.push(Stage::Attack {
                        replicate,
                        model,
                        arm,
                        method: AttackMethod::AttackerNet,
                        strength: 1,
                    });
                }
            }
        }
    }
    stages.push(Stage::Summary);
    stages
}

/// Per-attack result written next to the ROC curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub replicate: usize,
    pub model: ModelKind,
    pub arm: String,
    /// Training-set size of the attacked model.
    pub size: usize,
    pub method: String,
    pub strength: usize,
    pub auc: f64,
    pub num_positive: usize,
    pub num_negative: usize,
    pub mean_member_loss: f64,
    pub mean_nonmember_loss: f64,
    /// Mean nonmember loss minus mean member loss.
    pub gap: f64,
}

pub(crate) fn write_file(dir: &Path, rel: &str, bytes: &[u8]) -> CliResult<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
}

pub(crate) fn read_text(dir: &Path, rel: &str) -> CliResult<String> {
    let path = dir.join(rel);
    fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))
}

#[derive(Default)]
struct StageFiles {
    checkpoints: Vec<String>,
    outputs: Vec<String>,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    pools: HashMap<usize, Rc<Dataset>>,
}

impl<'a> Runner<'a> {
    fn rep_seed(&self, replicate: usize) -> u64 {
        replicate_seed(self.cfg.master_seed, replicate)
    }

    fn attack_seed(&self, replicate: usize) -> u64 {
        seed::derive(self.rep_seed(replicate), "attack", 0)
    }

    fn stage_seed(&self, stage: &Stage) -> u64 {
        match *stage {
            Stage::Select { replicate } => seed::derive(self.rep_seed(replicate), "select", 0),
            Stage::Train { replicate, model, arm } => {
                seed::derive(self.rep_seed(replicate), &format!("train/{model}/{arm}"), 0)
            }
            Stage::Attack { replicate, .. } => self.attack_seed(replicate),
            Stage::Curve { replicate, size } => {
                seed::derive(self.rep_seed(replicate), "curve", size as u64)
            }
            Stage::Dispersion { replicate, model, arm } => {
                seed::derive(self.rep_seed(replicate), &format!("samples/{model}/{arm}"), 0)
            }
            Stage::Summary => self.cfg.master_seed,
        }
    }

    fn pool(&mut self, replicate: usize) -> CliResult<Rc<Dataset>> {
        if let Some(p) = self.pools.get(&replicate) {
            return Ok(Rc::clone(p));
        }
        let seed = seed::derive(self.rep_seed(replicate), "data", 0);
        let pool = Rc::new(load_dataset(&self.cfg.dataset, seed)?);
        self.pools.insert(replicate, Rc::clone(&pool));
        Ok(pool)
    }

    fn split(&mut self, replicate: usize, size: usize) -> CliResult<(Rc<Dataset>, MembershipSplit)> {
        let pool = self.pool(replicate)?;
        let m = &self.cfg.metrics;
        let seed = seed::derive(self.rep_seed(replicate), "split", size as u64);
        let split = make_split(&pool, size, m.eval_members_for(size), m.eval_nonmembers, seed)?;
        Ok((pool, split))
    }

    /// Unseen candidates for adversarial sampling, plus held-out nonmembers.
    fn candidates(&mut self, replicate: usize) -> CliResult<(Rc<Dataset>, MembershipSplit)> {
        let pool = self.pool(replicate)?;
        let m = &self.cfg.metrics;
        let seed = seed::derive(self.rep_seed(replicate), "candidates", 0);
        let split = make_split(&pool, m.candidate_pool, 0, m.eval_nonmembers, seed)?;
        Ok((pool, split))
    }

    fn selection_path(replicate: usize) -> String {
        format!("selection/r{replicate}.csv")
    }

    fn selected_ids(&self, replicate: usize, label: &str) -> CliResult<Vec<u64>> {
        let rel = Self::selection_path(replicate);
        let text = read_text(self.dir, &rel)?;
        text.lines()
            .skip(1)
            .filter(|l| l.split(',').next() == Some(label))
            .map(|l| {
                l.rsplit(',')
                    .next()
                    .and_then(|id| id.parse().ok())
                    .ok_or_else(|| CliError::Integrity(format!("{rel}: malformed row {l:?}")))
            })
            .collect()
    }

    fn train_ids(&mut self, replicate: usize, arm: Arm) -> CliResult<(Rc<Dataset>, Vec<u64>)> {
        match arm {
            Arm::Size(size) => {
                let (pool, split) = self.split(replicate, size)?;
                Ok((pool, split.train_ids))
            }
            Arm::Adversarial | Arm::Random => Ok((self.pool(replicate)?, self.selected_ids(replicate, &arm.to_string())?)),
        }
    }

    fn units(&mut self, replicate: usize, arm: Arm, strength: usize) -> CliResult<(usize, Vec<EvalUnit>)> {
        match arm {
            Arm::Size(size) => {
                let (pool, split) = self.split(replicate, size)?;
                let seed = seed::derive(self.rep_seed(replicate), "groups", 0);
                Ok((size, split_units(&pool, &split, strength, seed)?))
            }
            Arm::Adversarial | Arm::Random => {
                if strength != 1 {
                    return Err(CliError::Config("selected training sets are attacked one instance at a time".into()));
                }
                let members = self.selected_ids(replicate, &arm.to_string())?;
                let (pool, cand) = self.candidates(replicate)?;
                let nonmembers = match (arm, self.cfg.metrics.adversarial_nonmembers) {
                    (Arm::Adversarial, AdversarialNonmembers::RunnerUp) => self.selected_ids(replicate, RUNNER_UP)?,
                    _ => cand.eval_nonmembers(),
                };
                Ok((members.len(), explicit_units(&pool, &members, &nonmembers)?))
            }
        }
    }

    fn run(&mut self, stage: &Stage) -> CliResult<StageFiles> {
        let cfg = self.cfg;
        let seed = self.stage_seed(stage);
        let mut files = StageFiles::default();
        match *stage {
            Stage::Select { replicate } => {
                let (pool, cand) = self.candidates(replicate)?;
                let rows = pool.select(&cand.train_ids)?;
                let m = &cfg.metrics;
                let sampling = AdversarialSamplingConfig {
                    batch_size: m.batch_size,
                    target_size: m.target_size,
                    finetune_steps: m.finetune_steps,
                    seed,
                };
                let out = adversarial_sampling(
                    &rows,
                    &sampling,
                    &cfg.model.gan(seed),
                    &cfg.attack.config(self.attack_seed(replicate)),
                )?;
                let id = |i: &usize| cand.train_ids[*i];
                let runner_ups: Vec<usize> = out
                    .rounds
                    .iter()
                    .filter_map(|r| {
                        (0..r.batch.len())
                            .filter(|&i| i != r.picked)
                            .max_by(|&a, &b| r.losses[a].total_cmp(&r.losses[b]).then(b.cmp(&a)))
                            .map(|i| r.batch[i])
                    })
                    .collect();
                let mut csv = String::from("arm,rank,id\n");
                let lists = [
                    (Arm::Adversarial.to_string(), &out.selected),
                    (Arm::Random.to_string(), &out.control),
                    (RUNNER_UP.to_string(), &runner_ups),
                ];
                for (label, picks) in lists {
                    for (rank, i) in picks.iter().enumerate() {
                        csv.push_str(&format!("{label},{rank},{}\n", id(i)));
                    }
                }
                let rounds: Vec<_> = out
                    .rounds
                    .iter()
                    .map(|r| {
                        serde_json::json!({
                            "batch": r.batch.iter().map(id).collect::<Vec<_>>(),
                            "losses": r.losses,
                            "picked": r.picked,
                        })
                    })
                    .collect();
                let json = serde_json::json!({ "overlap": out.overlap, "rounds": rounds });
                let csv_rel = Self::selection_path(replicate);
                let json_rel = format!("selection/r{replicate}.json");
                write_file(self.dir, &csv_rel, csv.as_bytes())?;
                write_file(self.dir, &json_rel, to_json(&json).as_bytes())?;
                files.outputs = vec![csv_rel, json_rel];
            }
            Stage::Train { replicate, model, arm } => {
                let (pool, ids) = self.train_ids(replicate, arm)?;
                let rows = pool.select(&ids)?;
                let (trained, log) = train_model(model, &rows, &cfg.model, seed)?;
                let stem = model_stem(replicate, model, arm);
                let names = save_model(&trained, &self.dir.join("models"), &stem)?;
                files.checkpoints = names.into_iter().map(|n| format!("models/{n}")).collect();
                let mut buf = Vec::new();
                log.write_csv(&mut buf)?;
                let rel = format!("logs/{stem}.csv");
                write_file(self.dir, &rel, &buf)?;
                files.outputs.push(rel);
            }
            Stage::Attack {
                replicate,
                model,
                arm,
                method,
                strength,
            } => {
                let trained = load_model(
                    model,
                    &self.dir.join("models"),
                    &model_stem(replicate, model, arm),
                    cfg.model.latent_prior,
                )?;
                let (size, units) = self.units(replicate, arm, strength)?;
                let attack_cfg = cfg.attack.config(seed);
                let samples = if method == AttackMethod::NearestNeighbor {
                    let s = seed::derive(self.rep_seed(replicate), &format!("nn/{model}/{arm}"), 0);
                    Some(generated_samples(&trained, cfg.metrics.nn_samples, s)?)
                } else {
                    None
                };
                let losses = method_losses(&trained, method, &units, &attack_cfg, samples.as_deref())?;
                let labels: Vec<Membership> = units.iter().map(|u| u.label).collect();
                let roc = roc_and_auc(&losses, &labels)?;
                let side = |member: bool| -> Vec<f64> {
                    losses
                        .iter()
                        .zip(&labels)
                        .filter(|(_, l)| l.is_member() == member)
                        .map(|(x, _)| *x)
                        .collect()
                };
                let (mean_member_loss, _) = mean_std(&side(true));
                let (mean_nonmember_loss, _) = mean_std(&side(false));
                let summary = AttackSummary {
                    replicate,
                    model,
                    arm: arm.to_string(),
                    size,
                    method: method.to_string(),
                    strength,
                    auc: roc.auc,
                    num_positive: roc.num_positive,
                    num_negative: roc.num_negative,
                    mean_member_loss,
                    mean_nonmember_loss,
                    gap: mean_nonmember_loss - mean_member_loss,
                };
                let stem = attack_stem(replicate, model, arm, method, strength);
                let (rec_rel, roc_rel, json_rel) = (
                    format!("attacks/{stem}.csv"),
                    format!("roc/{stem}.csv"),
                    format!("roc/{stem}.json"),
                );
                let mut buf = Vec::new();
                write_attack_csv(&attack_records(&units, &losses, method, &attack_cfg), &mut buf)?;
                write_file(self.dir, &rec_rel, &buf)?;
                let mut buf = Vec::new();
                roc.write_csv(&mut buf)?;
                write_file(self.dir, &roc_rel, &buf)?;
                write_file(self.dir, &json_rel, to_json(&summary).as_bytes())?;
                files.outputs = vec![rec_rel, roc_rel, json_rel];
            }
            Stage::Curve { replicate, size } => {
                let (pool, split) = self.split(replicate, size)?;
                let train = pool.select(&split.train_ids)?;
                let test = pool.select(&split.eval_nonmembers())?;
                let m = &cfg.metrics;
                let curve_cfg = LearningCurveConfig {
                    probe_steps: m.probe_steps.clone(),
                    probe_size: m.probe_size,
                    seed,
                };
                let curve = learning_curve(
                    &train,
                    &test,
                    &cfg.model.gan(seed),
                    &cfg.attack.config(self.attack_seed(replicate)),
                    &curve_cfg,
                )?;
                let mut buf = Vec::new();
                write_curve_csv(&curve, &mut buf)?;
                let rel = format!("curves/size{size}_r{replicate}.csv");
                write_file(self.dir, &rel, &buf)?;
                files.outputs.push(rel);
            }
            Stage::Dispersion { replicate, model, arm } => {
                let stem = model_stem(replicate, model, arm);
                let trained =
                    load_model(model, &self.dir.join("models"), &stem, cfg.model.latent_prior)?;
                let samples = generated_samples(&trained, cfg.metrics.dispersion_samples, seed)?;
                let profile = dispersion_profile(&samples, &cfg.metrics.dispersion_ks)?;
                let mut buf = Vec::new();
                write_dispersion_csv(&profile, &mut buf)?;
                let rel = format!("dispersion/{stem}.csv");
                write_file(self.dir, &rel, &buf)?;
                files.outputs.push(rel);
            }
            Stage::Summary => {
                files.outputs = write_summary(cfg, self.dir, &plan(cfg))?;
            }
        }
        Ok(files)
    }
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("result serialises") + "\n"
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn execute(cfg: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> CliResult<()> {
    let stages = plan(cfg);
    let mut runner = Runner {
        cfg,
        dir,
        pools: HashMap::new(),
    };
    for (i, stage) in stages.iter().enumerate() {
        let record = &manifest.stages[i];
        if record.status == StageStatus::Complete {
            for ck in &record.checkpoints {
                if !ck.intact(dir)? {
                    return Err(CliError::Integrity(format!(
                        "checkpoint {} is missing or does not match its recorded hash",
                        ck.path
                    )));
                }
            }
            let mut intact = true;
            for out in &record.outputs {
                intact &= out.intact(dir)?;
            }
            if intact {
                continue;
            }
            log::info!("{}: outputs missing or changed, recomputing", record.name);
        }
        log::info!("stage {}/{}: {}", i + 1, stages.len(), record.name);
        let started = Instant::now();
        let result = runner.run(stage).and_then(|files| {
            let hash = |rels: Vec<String>| {
                rels.iter().map(|r| FileRecord::of(dir, r)).collect::<CliResult<Vec<_>>>()
            };
            Ok((hash(files.checkpoints)?, hash(files.outputs)?))
        });
        let record = &mut manifest.stages[i];
        record.wall_time_secs = started.elapsed().as_secs_f64();
        match result {
            Ok((checkpoints, outputs)) => {
                record.status = StageStatus::Complete;
                record.checkpoints = checkpoints;
                record.outputs = outputs;
                record.error = None;
                manifest.save(dir)?;
            }
            Err(e) => {
                record.status = StageStatus::Failed;
                record.error = Some(e.to_string());
                manifest.save(dir)?;
                return Err(e);
            }
        }
    }
    Ok(())
}

fn fresh_manifest(cfg: &ExperimentConfig, config_hash: String) -> RunManifest {
    let runner = Runner {
        cfg,
        dir: Path::new(""),
        pools: HashMap::new(),
    };
    RunManifest {
        kind: cfg.kind,
        config_hash,
        code_version: CODE_VERSION.into(),
        master_seed: cfg.master_seed,
        config_file: CONFIG_FILE.into(),
        seeds: (0..cfg.replicates)
            .map(|r| ReplicateSeed {
                replicate: r,
                seed: replicate_seed(cfg.master_seed, r),
            })
            .collect(),
        stages: plan(cfg)
            .iter()
            .map(|s| StageRecord::pending(s.name(), runner.stage_seed(s)))
            .collect(),
        report: Vec::new(),
    }
}

pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> CliResult<RunManifest> {
    run_config(ExperimentConfig::load(config_path)?, opts)
}

/// Validates, claims the output directory and runs every stage.
pub fn run_config(mut cfg: ExperimentConfig, opts: &RunOptions) -> CliResult<RunManifest> {
    if let Some(s) = opts.seed_override {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))?;
    if dir.join(MANIFEST_FILE).exists() {
        return Err(CliError::Config(format!(
            "{} already holds a run; resume it or choose another directory",
            dir.display()
        )));
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let text = cfg.to_toml();
    write_file(&dir, CONFIG_FILE, text.as_bytes())?;
    let mut manifest = fresh_manifest(&cfg, hash_bytes(text.as_bytes()));
    manifest.save(&dir)?;
    with_threads(opts.threads, || execute(&cfg, &dir, &mut manifest))??;
    Ok(manifest)
}

pub fn run_dir(manifest_path: &Path) -> PathBuf {
    match manifest_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Skips stages whose recorded files are intact and recomputes the rest.
pub fn resume(manifest_path: &Path, threads: Option<usize>) -> CliResult<RunManifest> {
    let mut manifest = RunManifest::load(manifest_path)?;
    let dir = run_dir(manifest_path);
    let text = read_text(&dir, &manifest.config_file)?;
    if hash_bytes(text.as_bytes()) != manifest.config_hash {
        return Err(CliError::Integrity(format!(
            "{} does not match the manifest's config hash",
            manifest.config_file
        )));
    }
    let cfg = ExperimentConfig::parse(&text)?;
    let planned: Vec<String> = plan(&cfg).iter().map(Stage::name).collect();
    let recorded: Vec<&str> = manifest.stages.iter().map(|s| s.name.as_str()).collect();
    if planned != recorded {
        return Err(CliError::Integrity("manifest stages do not match the configuration".into()));
    }
    with_threads(threads, || execute(&cfg, &dir, &mut manifest))??;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: &str, metrics: &str) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            "kind = \"{kind}\"\nmaster_seed = 1\nreplicates = 2\n\n[dataset]\nsource = \"synth_digits\"\npool_size = 2000\n\n[model]\nlatent_dim = 4\n\n[metrics]\n{metrics}\n"
        ))
        .unwrap()
    }

    #[test]
    fn table_plan_attacks_baselines_once() {
        let c = cfg(
            "table_attack_comparison",
            "models = [\"wgan\", \"vae\"]\nmethods = [\"attacker_net\", \"nearest_neighbor\", \"direct_projection\"]\nsizes = [8]\nstrengths = [1, 4]",
        );
        let stages = plan(&c);
        let attacks = stages.iter().filter(|s| matches!(s, Stage::Attack { .. })).count();
        // 2 replicates × 2 models × (2 strengths + 2 baselines)
        assert_eq!(attacks, 16);
        assert_eq!(stages.last(), Some(&Stage::Summary));
        let names: std::collections::HashSet<String> = stages.iter().map(Stage::name).collect();
        assert_eq!(names.len(), stages.len());
    }

    #[test]
    fn adversarial_plan() {
        let c = cfg("adversarial_vs_random", "");
        let stages = plan(&c);
        assert_eq!(stages[0], Stage::Select { replicate: 0 });
        assert_eq!(stages.len(), 2 * 7 + 1);
    }

    #[test]
    fn replicate_seeds_differ() {
        assert_ne!(replicate_seed(1, 0), replicate_seed(1, 1));
        assert_eq!(replicate_seed(1, 0), replicate_seed(1, 0));
    }
}
