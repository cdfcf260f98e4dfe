//! Acceptance gate. Each test prints one `criterion N PASS|FAIL` line.
//!
//! The experiment criteria run the shipped configs under `configs/` through
//! the same pipeline as the `comember` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use comember::attacks::{attack_co, attack_direct_projection, attack_single, AttackConfig, IdentityGenerator};
use comember::datalab::Membership;
use comember::metrics::{dispersion_exact, dispersion_greedy, roc_and_auc};
use comember::numcore::{backward, finite_diff_grad, forward, predict, Activation, FdMode, NetworkSpec};
use comember::seed;
use comember_cli::{run_config, ExperimentConfig, ModelKind, RunOptions, Summary};
use rand::Rng;

fn report(n: usize, passed: bool, started: Instant, detail: String) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("criterion {n} {verdict} ({:.1}s): {detail}", started.elapsed().as_secs_f64());
    assert!(passed, "criterion {n} failed: {detail}");
}

fn run(config: &str) -> (tempfile::TempDir, Summary) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(config).unwrap();
    let opts = RunOptions {
        out_dir: Some(dir.path().join("run")),
        ..RunOptions::default()
    };
    run_config(cfg, &opts).unwrap();
    let summary = Summary::load(&dir.path().join("run")).unwrap();
    (dir, summary)
}

fn majority(passed: usize, total: usize) -> bool {
    2 * passed > total
}

fn auc(s: &Summary, r: usize, model: ModelKind, size: usize, method: &str, n: usize) -> f64 {
    s.auc(r, model, &format!("size{size}"), method, n)
        .unwrap_or_else(|| panic!("no AUC for r{r} {model} size{size} {method} n{n}"))
}

#[test]
fn criterion_01_gradient_oracle() {
    let t = Instant::now();
    let acts = [Activation::Relu, Activation::Sigmoid, Activation::Tanh, Activation::Identity];
    let mut rng = seed::rng_for(101, "acceptance/networks", 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let depth = rng.gen_range(2..=5);
        let sizes: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=8)).collect();
        let spec = NetworkSpec::new(sizes, acts[rng.gen_range(0..4)], acts[rng.gen_range(0..4)]).unwrap();
        // Random biases too: behind a dead unit, zero initial biases put the
        // next preactivation exactly on the ReLU kink.
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..spec.input_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..spec.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, tape) = forward(&spec, &params, &x).unwrap();
        let g = backward(&spec, &params, &tape, &w).unwrap();
        let loss = |p: &[f64]| predict(&spec, p, &x).unwrap().iter().zip(&w).map(|(o, c)| o * c).sum::<f64>();
        let fd = finite_diff_grad(loss, &params, 1e-5, FdMode::Central);
        for (a, b) in g.params.iter().zip(&fd) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-6));
        }
    }
    report(1, worst <= 1e-4, t, format!("max relative error {worst:.2e} over 100 networks"));
}

#[test]
fn criterion_02_auc_oracle() {
    let t = Instant::now();
    let mut rng = seed::rng_for(102, "acceptance/auc", 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..60);
        // A coarse grid forces ties.
        let losses: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 / 4.0).collect();
        let mut labels: Vec<Membership> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { Membership::Member } else { Membership::Nonmember })
            .collect();
        labels[0] = Membership::Member;
        labels[1] = Membership::Nonmember;
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (lp, mp) in losses.iter().zip(&labels) {
            for (ln, mn) in losses.iter().zip(&labels) {
                if mp.is_member() && !mn.is_member() {
                    pairs += 1.0;
                    wins += if lp < ln { 1.0 } else if lp == ln { 0.5 } else { 0.0 };
                }
            }
        }
        let roc = roc_and_auc(&losses, &labels).unwrap();
        worst = worst.max((roc.auc - wins / pairs).abs());
    }
    report(2, worst <= 1e-12, t, format!("max |trapezoid - Mann-Whitney| {worst:.1e} over 1000 sets"));
}

#[test]
fn criterion_03_dispersion_oracle() {
    let t = Instant::now();
    let mut rng = seed::rng_for(103, "acceptance/dispersion", 0);
    let mut bad = Vec::new();
    for set in 0..50 {
        let n = rng.gen_range(2..=12);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
        let k = rng.gen_range(2..=n.min(6));
        let exact = dispersion_exact(&pts, k).unwrap().value;
        let greedy = dispersion_greedy(&pts, k).unwrap().value;
        let pair = dispersion_exact(&pts, 2).unwrap().value == dispersion_greedy(&pts, 2).unwrap().value;
        if !(exact >= greedy && greedy >= 0.5 * exact && pair) {
            bad.push(set);
        }
    }
    report(3, bad.is_empty(), t, format!("50 sets, violations at {bad:?}"));
}

#[test]
fn criterion_04_identity_fixture() {
    let t = Instant::now();
    let gen = IdentityGenerator { dim: 64 };
    let cfg = AttackConfig::default();
    assert_eq!((cfg.iterations, cfg.restarts), (1000, 4));
    let mut rng = seed::rng_for(104, "acceptance/identity", 0);
    let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..64).map(|_| rng.gen::<f64>()).collect()).collect();
    let single = attack_single(&gen, &xs[0], &cfg).unwrap().loss;
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let co = attack_co(&gen, &refs, &cfg).unwrap().loss;
    let proj = attack_direct_projection(&gen, &xs[0], &cfg).unwrap().loss;
    let passed = [single, co, proj].iter().all(|l| *l <= 1e-2);
    report(4, passed, t, format!("single {single:.2e}, co n=8 {co:.2e}, projection {proj:.2e}"));
}

#[test]
fn criterion_05_overfitting_trend() {
    let t = Instant::now();
    let (_dir, s) = run(include_str!("../../../configs/roc_vs_datasize.toml"));
    let mut passed = 0;
    let mut rows = Vec::new();
    for r in 0..s.replicates {
        let a: Vec<f64> = [8, 64, 512].iter().map(|&n| auc(&s, r, ModelKind::Wgan, n, "attacker_net", 1)).collect();
        let ok = a.windows(2).all(|w| w[1] < w[0]) && a[0] >= 0.85 && a[2] <= 0.70;
        passed += usize::from(ok);
        rows.push(format!("{:.3}/{:.3}/{:.3}", a[0], a[1], a[2]));
    }
    report(5, majority(passed, s.replicates), t, format!("{passed}/{} seeds, AUC(8/64/512) {}", s.replicates, rows.join(" ")));
}

#[test]
fn criterion_06_coattack_strength() {
    let t = Instant::now();
    let (_dir, s) = run(include_str!("../../../configs/roc_vs_coattack_strength.toml"));
    let mut passed = 0;
    let mut rows = Vec::new();
    for r in 0..s.replicates {
        let one = auc(&s, r, ModelKind::Wgan, 512, "attacker_net", 1);
        let eight = auc(&s, r, ModelKind::Wgan, 512, "attacker_net", 8);
        passed += usize::from(eight - one >= 0.05);
        rows.push(format!("{one:.3}->{eight:.3}"));
    }
    report(6, passed >= 4, t, format!("{passed}/{} seeds gain ≥ 0.05, AUC(n=1)->AUC(n=8) {}", s.replicates, rows.join(" ")));
}

#[test]
fn criterion_07_method_comparison() {
    let t = Instant::now();
    let (_dir, s) = run(include_str!("../../../configs/table_attack_comparison.toml"));
    let mut passed = 0;
    let mut rows = Vec::new();
    for r in 0..s.replicates {
        let [ours, nn, proj] = ["attacker_net", "nearest_neighbor", "direct_projection"]
            .map(|m| auc(&s, r, ModelKind::Wgan, 8, m, 1));
        passed += usize::from(ours >= nn && ours >= proj);
        rows.push(format!("{ours:.3}/{nn:.3}/{proj:.3}"));
    }
    report(7, majority(passed, s.replicates), t, format!("{passed}/{} seeds, AUC net/nn/projection {}", s.replicates, rows.join(" ")));
}

#[test]
fn criterion_08_gap_correlation() {
    let t = Instant::now();
    let (_dir, s) = run(include_str!("../../../configs/generalization_gap_sweep.toml"));
    let rhos: Vec<f64> = s
        .checks_named("gap_auc_rank_correlation_positive")
        .map(|c| c.value["spearman"].as_f64().unwrap_or(f64::NAN))
        .collect();
    assert_eq!(rhos.len(), s.replicates);
    let passed = rhos.iter().filter(|&&r| r >= 0.8).count();
    report(8, majority(passed, s.replicates), t, format!("{passed}/{} seeds with Spearman ≥ 0.8: {rhos:.2?}", s.replicates));
}

#[test]
fn criterion_09_learning_curve() {
    let t = Instant::now();
    let (_dir, s) = run(include_str!("../../../configs/learning_curve.toml"));
    let decreasing = s.checks_named("train_loss_windowed_mean_decreasing").all(|c| c.passed);
    let widening = s.checks_named("final_gap_exceeds_first_post_warmup").all(|c| c.passed);
    let curve: Vec<String> = s
        .curves
        .iter()
        .map(|c| format!("{}:{:.3}/{:.3}", c.step, c.train_loss, c.test_loss))
        .collect();
    report(
        9,
        decreasing && widening,
        t,
        format!("windowed decrease {decreasing}, gap widens {widening}; step:train/test {}", curve.join(" ")),
    );
}

#[test]
fn criterion_10_dispersion_trend() {
    let t = Instant::now();
    let (_dir, s) = run(include_str!("../../../configs/dispersion_profile.toml"));
    let mut passed = 0;
    let mut rows = Vec::new();
    for r in 0..s.replicates {
        let profile = |arm: &str| -> BTreeMap<usize, f64> {
            s.dispersion
                .iter()
                .filter(|d| d.replicate == r && d.arm == arm && [8, 16, 32].contains(&d.k))
                .map(|d| (d.k, d.value))
                .collect()
        };
        let (small, large) = (profile("size8"), profile("size512"));
        assert_eq!((small.len(), large.len()), (3, 3));
        passed += usize::from(large.iter().all(|(k, v)| *v >= small[k]));
        rows.push(format!("{:.2?}>={:.2?}", large.values().collect::<Vec<_>>(), small.values().collect::<Vec<_>>()));
    }
    report(10, majority(passed, s.replicates), t, format!("{passed}/{} seeds, size512 vs size8 at k=8,16,32 {}", s.replicates, rows.join(" ")));
}

#[test]
fn criterion_11_adversarial_sampling() {
    let t = Instant::now();
    let (_dir, s) = run(include_str!("../../../configs/adversarial_vs_random.toml"));
    let checks: Vec<_> = s.checks_named("adversarial_higher_dispersion_and_auc").collect();
    assert_eq!(checks.len(), s.replicates);
    let passed = checks.iter().filter(|c| c.passed).count();
    let rows: Vec<String> = checks
        .iter()
        .map(|c| {
            let v = &c.value;
            format!(
                "auc {:.3}/{:.3} disp {:.3}/{:.3}",
                v["adversarial"]["auc"].as_f64().unwrap_or(f64::NAN),
                v["random"]["auc"].as_f64().unwrap_or(f64::NAN),
                v["adversarial"]["mean_dispersion"].as_f64().unwrap_or(f64::NAN),
                v["random"]["mean_dispersion"].as_f64().unwrap_or(f64::NAN),
            )
        })
        .collect();
    report(11, passed >= 3, t, format!("{passed}/{} seeds, adversarial/random {}", s.replicates, rows.join("; ")));
}

#[test]
fn criterion_12_vae_more_susceptible() {
    let t = Instant::now();
    let (_dir, s) = run(include_str!("../../../configs/vae_vs_wgan.toml"));
    let mut passed = 0;
    let mut rows = Vec::new();
    for r in 0..s.replicates {
        let vae = auc(&s, r, ModelKind::Vae, 64, "attacker_net", 1);
        let gan = auc(&s, r, ModelKind::Wgan, 64, "attacker_net", 1);
        passed += usize::from(vae >= gan);
        rows.push(format!("{vae:.3}/{gan:.3}"));
    }
    report(12, majority(passed, s.replicates), t, format!("{passed}/{} seeds, AUC vae/wgan {}", s.replicates, rows.join(" ")));
}

fn result_csvs(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_13_determinism() {
    let t = Instant::now();
    let small = |kind: &str, metrics: &str| {
        format!(
            "kind = \"{kind}\"\nmaster_seed = 13\nreplicates = 2\n\n[dataset]\nsource = \"synth_digits\"\npool_size = 300\n\n\
             [model]\nlatent_dim = 4\ngenerator_hidden = [16]\ncritic_hidden = [16]\nencoder_hidden = [16]\nsteps = 40\nbatch_size = 8\n\n\
             [attack]\nhidden = [16]\niterations = 20\nrestarts = 2\n\n\
             [metrics]\neval_members = 16\neval_nonmembers = 16\nnn_samples = 100\ndispersion_samples = 100\ndispersion_ks = [2, 4, 8]\n\
             probe_steps = [0, 10, 20, 40]\nprobe_size = 8\ncurve_windows = 2\ncandidate_pool = 64\ntarget_size = 8\nfinetune_steps = 5\n{metrics}\n"
        )
    };
    let kinds = [
        ("table_attack_comparison", "models = [\"wgan\", \"vae\"]\nmethods = [\"attacker_net\", \"nearest_neighbor\", \"direct_projection\"]\nsizes = [8, 32]\nstrengths = [1, 4]"),
        ("roc_vs_datasize", "sizes = [8, 32]"),
        ("roc_vs_coattack_strength", "sizes = [32]\nstrengths = [1, 2, 4]"),
        ("strength_vs_datasize_frontier", "sizes = [8, 32]\nstrengths = [1, 2]"),
        ("generalization_gap_sweep", "sizes = [8, 16, 32]"),
        ("learning_curve", "sizes = [16]"),
        ("dispersion_profile", "sizes = [8, 32]"),
        ("adversarial_vs_random", ""),
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for (kind, metrics) in kinds {
        let text = small(kind, metrics);
        let outputs: Vec<BTreeMap<String, Vec<u8>>> = [Some(1), Some(2), Some(1)]
            .into_iter()
            .map(|threads| {
                let dir = tempfile::tempdir().unwrap();
                let opts = RunOptions {
                    out_dir: Some(dir.path().to_path_buf()),
                    threads,
                    seed_override: None,
                };
                run_config(ExperimentConfig::parse(&text).unwrap(), &opts).unwrap();
                result_csvs(dir.path())
            })
            .collect();
        files += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            differing.push(kind);
        }
    }
    report(13, differing.is_empty(), t, format!("{files} CSVs over 8 kinds at 1, 2, 1 threads; differing kinds {differing:?}"));
}
