//! Per-experiment summary tables and the trend checks each figure is about.

use std::collections::BTreeMap;
use std::path::Path;

use comember::attacks::AttackMethod;
use comember::metrics::{spearman, windowed_mean_decreasing, EFFECTIVENESS_THRESHOLD};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind, ModelKind};
use crate::error::{CliError, CliResult};
use crate::pipeline::{attack_stem, read_text, to_json, write_file, Arm, AttackSummary, Stage};

pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub replicate: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    pub passed: bool,
    pub value: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub replicate: usize,
    pub size: usize,
    pub step: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub replicate: usize,
    pub model: ModelKind,
    pub arm: String,
    pub k: usize,
    pub value: f64,
}

/// Smallest training size at which the attack falls below the effectiveness
/// threshold; `None` when no configured size is large enough.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub replicate: usize,
    pub model: ModelKind,
    pub strength: usize,
    pub min_safe_size: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub passed: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub replicates: usize,
    pub tally: BTreeMap<String, Tally>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attacks: Vec<AttackSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<CurveRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dispersion: Vec<DispersionRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frontier: Vec<FrontierRow>,
}

impl Summary {
    pub fn load(run_dir: &Path) -> CliResult<Self> {
        let text = read_text(run_dir, SUMMARY_JSON)?;
        serde_json::from_str(&text).map_err(|e| CliError::Integrity(format!("{SUMMARY_JSON}: {e}")))
    }

    pub fn auc(&self, replicate: usize, model: ModelKind, arm: &str, method: &str, strength: usize) -> Option<f64> {
        self.attacks
            .iter()
            .find(|a| {
                a.replicate == replicate
                    && a.model == model
                    && a.arm == arm
                    && a.method == method
                    && a.strength == strength
            })
            .map(|a| a.auc)
    }

    pub fn checks_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> {
        self.checks.iter().filter(move |c| c.name == name)
    }
}

fn parse_rows(text: &str, rel: &str, columns: usize) -> CliResult<Vec<Vec<String>>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<String> = l.split(',').map(str::to_string).collect();
            if f.len() == columns {
                Ok(f)
            } else {
                Err(CliError::Integrity(format!("{rel}: malformed row {l:?}")))
            }
        })
        .collect()
}

fn num<T: std::str::FromStr>(s: &str, rel: &str) -> CliResult<T> {
    s.parse().map_err(|_| CliError::Integrity(format!("{rel}: bad number {s:?}")))
}

fn collect(cfg: &ExperimentConfig, dir: &Path, stages: &[Stage]) -> CliResult<Summary> {
    let mut s = Summary {
        kind: cfg.kind,
        replicates: cfg.replicates,
        tally: BTreeMap::new(),
        checks: Vec::new(),
        attacks: Vec::new(),
        curves: Vec::new(),
        dispersion: Vec::new(),
        frontier: Vec::new(),
    };
    for stage in stages {
        match *stage {
            Stage::Attack {
                replicate,
                model,
                arm,
                method,
                strength,
            } => {
                let rel = format!("roc/{}.json", attack_stem(replicate, model, arm, method, strength));
                let text = read_text(dir, &rel)?;
                s.attacks.push(
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Integrity(format!("{rel}: {e}")))?,
                );
            }
            Stage::Curve { replicate, size } => {
                let rel = format!("curves/size{size}_r{replicate}.csv");
                for f in parse_rows(&read_text(dir, &rel)?, &rel, 3)? {
                    s.curves.push(CurveRow {
                        replicate,
                        size,
                        step: num(&f[0], &rel)?,
                        train_loss: num(&f[1], &rel)?,
                        test_loss: num(&f[2], &rel)?,
                    });
                }
            }
            Stage::Dispersion { replicate, model, arm } => {
                let rel = format!("dispersion/{model}_{arm}_r{replicate}.csv");
                for f in parse_rows(&read_text(dir, &rel)?, &rel, 3)? {
                    s.dispersion.push(DispersionRow {
                        replicate,
                        model,
                        arm: arm.to_string(),
                        k: num(&f[0], &rel)?,
                        value: num(&f[1], &rel)?,
                    });
                }
            }
            _ => {}
        }
    }
    Ok(s)
}

fn check(name: &str, replicate: usize, model: Option<ModelKind>, size: Option<usize>, passed: bool, value: serde_json::Value) -> Check {
    Check {
        name: name.into(),
        replicate,
        model,
        size,
        passed,
        value,
    }
}

fn derive_checks(cfg: &ExperimentConfig, s: &mut Summary) {
    use ExperimentKind::*;
    let m = &cfg.metrics;
    let net = AttackMethod::AttackerNet.to_string();
    let mut checks = Vec::new();
    for r in 0..cfg.replicates {
        match cfg.kind {
            RocVsDatasize => {
                for &model in &m.models {
                    let aucs: Vec<f64> = m
                        .sizes
                        .iter()
                        .filter_map(|&n| s.auc(r, model, &Arm::Size(n).to_string(), &net, 1))
                        .collect();
                    let decreasing = aucs.windows(2).all(|w| w[1] < w[0]);
                    checks.push(check(
                        "auc_strictly_decreasing_in_size",
                        r,
                        Some(model),
                        None,
                        decreasing,
                        json!({ "sizes": m.sizes, "aucs": aucs }),
                    ));
                }
            }
            RocVsCoattackStrength => {
                for &model in &m.models {
                    for &size in &m.sizes {
                        let arm = Arm::Size(size).to_string();
                        let aucs: Vec<f64> =
                            m.strengths.iter().filter_map(|&n| s.auc(r, model, &arm, &net, n)).collect();
                        checks.push(check(
                            "auc_nondecreasing_in_strength",
                            r,
                            Some(model),
                            Some(size),
                            aucs.windows(2).all(|w| w[1] >= w[0]),
                            json!({ "strengths": m.strengths, "aucs": aucs }),
                        ));
                    }
                }
            }
            StrengthVsDatasizeFrontier => {
                for &model in &m.models {
                    let mut safe = Vec::new();
                    for &n in &m.strengths {
                        let min_safe_size = m.sizes.iter().copied().find(|&size| {
                            s.auc(r, model, &Arm::Size(size).to_string(), &net, n)
                                .is_some_and(|a| a < EFFECTIVENESS_THRESHOLD)
                        });
                        s.frontier.push(FrontierRow {
                            replicate: r,
                            model,
                            strength: n,
                            min_safe_size,
                        });
                        safe.push(min_safe_size.unwrap_or(usize::MAX));
                    }
                    checks.push(check(
                        "required_size_nondecreasing_in_strength",
                        r,
                        Some(model),
                        None,
                        safe.windows(2).all(|w| w[1] >= w[0]),
                        json!({ "strengths": m.strengths, "min_safe_sizes": safe }),
                    ));
                }
            }
            GeneralizationGapSweep => {
                for &model in &m.models {
                    let rows: Vec<&AttackSummary> = m
                        .sizes
                        .iter()
                        .filter_map(|&n| {
                            let arm = Arm::Size(n).to_string();
                            s.attacks.iter().find(|a| {
                                a.replicate == r && a.model == model && a.arm == arm && a.strength == 1
                            })
                        })
                        .collect();
                    let gaps: Vec<f64> = rows.iter().map(|a| a.gap).collect();
                    let aucs: Vec<f64> = rows.iter().map(|a| a.auc).collect();
                    let rho = spearman(&gaps, &aucs).ok();
                    checks.push(check(
                        "gap_auc_rank_correlation_positive",
                        r,
                        Some(model),
                        None,
                        rho.is_some_and(|v| v > 0.0),
                        json!({ "gaps": gaps, "aucs": aucs, "spearman": rho }),
                    ));
                }
            }
            TableAttackComparison => {
                for &model in &m.models {
                    for &size in &m.sizes {
                        let arm = Arm::Size(size).to_string();
                        let Some(ours) = s.auc(r, model, &arm, &net, 1) else {
                            continue;
                        };
                        let baselines: BTreeMap<String, f64> = m
                            .methods
                            .iter()
                            .filter(|&&x| x != AttackMethod::AttackerNet)
                            .filter_map(|x| s.auc(r, model, &arm, &x.to_string(), 1).map(|a| (x.to_string(), a)))
                            .collect();
                        if baselines.is_empty() {
                            continue;
                        }
                        checks.push(check(
                            "attacker_net_at_least_baselines",
                            r,
                            Some(model),
                            Some(size),
                            baselines.values().all(|&b| ours >= b),
                            json!({ "attacker_net": ours, "baselines": baselines }),
                        ));
                    }
                }
            }
            LearningCurve => {
                for &size in &m.sizes {
                    let rows: Vec<&CurveRow> =
                        s.curves.iter().filter(|c| c.replicate == r && c.size == size).collect();
                    let train: Vec<f64> = rows.iter().map(|c| c.train_loss).collect();
                    checks.push(check(
                        "train_loss_windowed_mean_decreasing",
                        r,
                        None,
                        Some(size),
                        windowed_mean_decreasing(&train, m.curve_windows),
                        json!({ "windows": m.curve_windows, "train_losses": train }),
                    ));
                    let gap = |c: &CurveRow| c.test_loss - c.train_loss;
                    let first = rows.iter().find(|c| c.step > 0).map(|c| gap(c));
                    let last = rows.last().map(|c| gap(c));
                    checks.push(check(
                        "final_gap_exceeds_first_post_warmup",
                        r,
                        None,
                        Some(size),
                        matches!((first, last), (Some(a), Some(b)) if b > a),
                        json!({ "first": first, "final": last }),
                    ));
                }
            }
            DispersionProfile => {
                let (Some(&lo), Some(&hi)) = (m.sizes.first(), m.sizes.last()) else {
                    continue;
                };
                for &model in &m.models {
                    let profile = |size: usize| -> Vec<f64> {
                        let arm = Arm::Size(size).to_string();
                        m.dispersion_ks
                            .iter()
                            .filter_map(|&k| {
                                s.dispersion
                                    .iter()
                                    .find(|d| d.replicate == r && d.model == model && d.arm == arm && d.k == k)
                                    .map(|d| d.value)
                            })
                            .collect()
                    };
                    let (small, large) = (profile(lo), profile(hi));
                    checks.push(check(
                        "largest_size_dispersion_dominates_smallest",
                        r,
                        Some(model),
                        None,
                        small.len() == large.len() && large.iter().zip(&small).all(|(a, b)| a >= b),
                        json!({ "ks": m.dispersion_ks, "smallest": small, "largest": large }),
                    ));
                }
            }
            AdversarialVsRandom => {
                let model = ModelKind::Wgan;
                let arm_stats = |arm: Arm| {
                    let arm = arm.to_string();
                    let auc = s.auc(r, model, &arm, &net, 1);
                    let disp: Vec<f64> = s
                        .dispersion
                        .iter()
                        .filter(|d| d.replicate == r && d.arm == arm)
                        .map(|d| d.value)
                        .collect();
                    (auc, disp.iter().sum::<f64>() / disp.len().max(1) as f64)
                };
                let (adv_auc, adv_disp) = arm_stats(Arm::Adversarial);
                let (rnd_auc, rnd_disp) = arm_stats(Arm::Random);
                let auc_higher = matches!((adv_auc, rnd_auc), (Some(a), Some(b)) if a > b);
                checks.push(check(
                    "adversarial_higher_dispersion_and_auc",
                    r,
                    Some(model),
                    None,
                    auc_higher && adv_disp > rnd_disp,
                    json!({
                        "adversarial": { "auc": adv_auc, "mean_dispersion": adv_disp },
                        "random": { "auc": rnd_auc, "mean_dispersion": rnd_disp },
                    }),
                ));
            }
        }
    }
    for c in &checks {
        let t = s.tally.entry(c.name.clone()).or_default();
        t.total += 1;
        t.passed += usize::from(c.passed);
    }
    s.checks = checks;
}

/// Writes `summary.json` and one CSV per nonempty table; returns their paths.
pub fn write_summary(cfg: &ExperimentConfig, dir: &Path, stages: &[Stage]) -> CliResult<Vec<String>> {
    let mut s = collect(cfg, dir, stages)?;
    derive_checks(cfg, &mut s);
    let mut written = Vec::new();
    let mut put = |rel: &str, text: String| -> CliResult<()> {
        write_file(dir, rel, text.as_bytes())?;
        written.push(rel.to_string());
        Ok(())
    };
    if !s.attacks.is_empty() {
        let mut t = String::from("replicate,model,arm,size,method,strength,auc,gap\n");
        for a in &s.attacks {
            t += &format!(
                "{},{},{},{},{},{},{},{}\n",
                a.replicate, a.model, a.arm, a.size, a.method, a.strength, a.auc, a.gap
            );
        }
        put("summary_attacks.csv", t)?;
    }
    if !s.curves.is_empty() {
        let mut t = String::from("replicate,size,step,train_attack_loss,test_attack_loss\n");
        for c in &s.curves {
            t += &format!("{},{},{},{},{}\n", c.replicate, c.size, c.step, c.train_loss, c.test_loss);
        }
        put("summary_curves.csv", t)?;
    }
    if !s.dispersion.is_empty() {
        let mut t = String::from("replicate,model,arm,k,value\n");
        for d in &s.dispersion {
            t += &format!("{},{},{},{},{}\n", d.replicate, d.model, d.arm, d.k, d.value);
        }
        put("summary_dispersion.csv", t)?;
    }
    if !s.frontier.is_empty() {
        let mut t = String::from("replicate,model,strength,min_safe_size\n");
        for f in &s.frontier {
            let size = f.min_safe_size.map(|v| v.to_string()).unwrap_or_default();
            t += &format!("{},{},{},{}\n", f.replicate, f.model, f.strength, size);
        }
        put("summary_frontier.csv", t)?;
    }
    put(SUMMARY_JSON, to_json(&s))?;
    Ok(written)
}
