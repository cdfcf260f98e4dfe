use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use comember_cli::manifest::{StageStatus, MANIFEST_FILE};
use comember_cli::{report, resume, run_config, CliError, ExperimentConfig, RunManifest, RunOptions, Summary};

fn tiny(kind: &str, metrics: &str) -> String {
    format!(
        r#"kind = "{kind}"
master_seed = 11
replicates = 2

[dataset]
source = "synth_digits"
pool_size = 200

[model]
latent_dim = 2
generator_hidden = [8]
critic_hidden = [8]
encoder_hidden = [8]
steps = 20
batch_size = 8

[attack]
hidden = [8]
iterations = 10
restarts = 1

[metrics]
eval_members = 8
eval_nonmembers = 8
nn_samples = 50
dispersion_samples = 50
dispersion_ks = [2, 4]
probe_steps = [0, 5, 10, 15, 20]
probe_size = 4
curve_windows = 2
candidate_pool = 64
target_size = 4
finetune_steps = 3
{metrics}
"#
    )
}

const TABLE: &str = r#"models = ["wgan", "vae"]
methods = ["attacker_net", "nearest_neighbor", "direct_projection"]
sizes = [8, 16]
strengths = [1, 4]"#;

fn run(text: &str, dir: &Path, threads: Option<usize>) -> RunManifest {
    let cfg = ExperimentConfig::parse(text).unwrap();
    let opts = RunOptions {
        out_dir: Some(dir.to_path_buf()),
        threads,
        seed_override: None,
    };
    run_config(cfg, &opts).unwrap()
}

fn files_under(root: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out
}

fn result_csvs(root: &Path) -> Vec<(String, Vec<u8>)> {
    files_under(root)
        .into_iter()
        .filter(|f| f.ends_with(".csv"))
        .map(|f| {
            let bytes = fs::read(root.join(&f)).unwrap();
            (f, bytes)
        })
        .collect()
}

#[test]
fn every_kind_runs_and_records_all_outputs() {
    let kinds = [
        ("table_attack_comparison", TABLE),
        ("roc_vs_datasize", "sizes = [8, 16]"),
        ("roc_vs_coattack_strength", "sizes = [16]\nstrengths = [1, 2, 4]"),
        ("strength_vs_datasize_frontier", "sizes = [8, 16]\nstrengths = [1, 2]"),
        ("generalization_gap_sweep", "sizes = [8, 16, 32]"),
        ("learning_curve", "sizes = [16]"),
        ("dispersion_profile", "sizes = [8, 32]"),
        ("adversarial_vs_random", ""),
    ];
    for (kind, metrics) in kinds {
        let dir = tempfile::tempdir().unwrap();
        let m = run(&tiny(kind, metrics), dir.path(), None);
        assert!(m.is_complete(), "{kind}");
        let mut listed: BTreeSet<String> = m.files().map(|f| f.path.clone()).collect();
        listed.insert(m.config_file.clone());
        listed.insert(MANIFEST_FILE.into());
        assert_eq!(files_under(dir.path()), listed, "{kind}: orphan or missing outputs");
        let summary = Summary::load(dir.path()).unwrap();
        assert!(!summary.checks.is_empty(), "{kind}");
        assert!(summary.attacks.iter().all(|a| (0.0..=1.0).contains(&a.auc)));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let text = tiny("roc_vs_coattack_strength", "sizes = [16]\nstrengths = [1, 4]");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&text, a.path(), Some(1));
    run(&text, b.path(), Some(3));
    let (ra, rb) = (result_csvs(a.path()), result_csvs(b.path()));
    assert!(!ra.is_empty());
    assert_eq!(ra, rb);
}

#[test]
fn resume_skips_repairs_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(&tiny("roc_vs_datasize", "sizes = [8, 16]"), dir.path(), None);
    let manifest_path = dir.path().join(MANIFEST_FILE);

    // Nothing to do.
    assert_eq!(resume(&manifest_path, None).unwrap(), first);

    // Deleted metric outputs come back byte-identical.
    let before = result_csvs(dir.path());
    fs::remove_dir_all(dir.path().join("roc")).unwrap();
    fs::remove_file(dir.path().join("summary_attacks.csv")).unwrap();
    let again = resume(&manifest_path, Some(2)).unwrap();
    assert_eq!(result_csvs(dir.path()), before);
    for (a, b) in first.stages.iter().zip(&again.stages) {
        assert_eq!((&a.outputs, &a.checkpoints), (&b.outputs, &b.checkpoints));
    }

    // A damaged checkpoint header is refused.
    let ck = dir.path().join(&first.stages[0].checkpoints[0].path);
    let mut bytes = fs::read(&ck).unwrap();
    bytes[0] ^= 0xff;
    fs::write(&ck, bytes).unwrap();
    let err = resume(&manifest_path, None).unwrap_err();
    assert!(matches!(err, CliError::Integrity(_)), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn report_grid_has_each_cell_once() {
    let dir = tempfile::tempdir().unwrap();
    run(&tiny("table_attack_comparison", TABLE), dir.path(), None);
    let r = report(&dir.path().join(MANIFEST_FILE), None).unwrap();
    // 2 models × 2 sizes × (2 strengths + 2 baselines)
    assert_eq!(r.cells.len(), 16);
    let keys: BTreeSet<_> = r.cells.iter().map(|c| (c.model, &c.method, c.strength, c.size)).collect();
    assert_eq!(keys.len(), r.cells.len());
    assert!(r.cells.iter().all(|c| c.replicates == 2 && (0.0..=1.0).contains(&c.mean_auc)));
    assert!(r
        .cells
        .iter()
        .filter(|c| c.method != "attacker_net")
        .all(|c| c.strength == 1));
    let m = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.report.len(), 2);
    assert!(m.report.iter().all(|f| f.intact(dir.path()).unwrap()));
}

#[test]
fn report_refuses_incomplete_runs() {
    let dir = tempfile::tempdir().unwrap();
    run(&tiny("roc_vs_datasize", "sizes = [8]"), dir.path(), None);
    let path = dir.path().join(MANIFEST_FILE);
    let mut m = RunManifest::load(&path).unwrap();
    m.stages[1].status = StageStatus::Pending;
    m.save(dir.path()).unwrap();
    let err = report(&path, None).unwrap_err();
    assert!(matches!(err, CliError::Incomplete(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn seed_override_changes_the_run() {
    let text = tiny("roc_vs_datasize", "sizes = [8]");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run(&text, a.path(), None);
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let opts = RunOptions {
        out_dir: Some(b.path().to_path_buf()),
        threads: None,
        seed_override: Some(12),
    };
    let mb = run_config(cfg, &opts).unwrap();
    assert_eq!(mb.master_seed, 12);
    assert_ne!(ma.config_hash, mb.config_hash);
    assert_ne!(ma.seeds, mb.seeds);
}

#[test]
fn an_existing_run_directory_is_not_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let text = tiny("roc_vs_datasize", "sizes = [8]");
    run(&text, dir.path(), None);
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let opts = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..RunOptions::default()
    };
    assert!(matches!(run_config(cfg, &opts), Err(CliError::Config(_))));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_comember");
    let dir = tempfile::tempdir().unwrap();

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, tiny("roc_vs_datasize", "sizes = [8]").replace("latent_dim = 2\n", "")).unwrap();
    let out = dir.path().join("bad_run");
    let status = Command::new(bin)
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());

    let missing = Command::new(bin)
        .args(["run", "--config"])
        .arg(dir.path().join("nope.toml"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(4));

    let good = dir.path().join("good.toml");
    fs::write(&good, tiny("roc_vs_datasize", "sizes = [8]")).unwrap();
    let run_dir = dir.path().join("run");
    let ok = Command::new(bin)
        .args(["run", "--threads", "2", "--seed-override", "5", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let manifest = run_dir.join(MANIFEST_FILE);
    for sub in ["resume", "report"] {
        let st = Command::new(bin).args([sub, "--manifest"]).arg(&manifest).status().unwrap();
        assert!(st.success(), "{sub}");
    }
}

#[test]
fn runner_ups_are_one_unpicked_point_per_batch() {
    let dir = tempfile::tempdir().unwrap();
    run(&tiny("adversarial_vs_random", ""), dir.path(), None);
    let text = fs::read_to_string(dir.path().join("selection/r0.csv")).unwrap();
    let ids = |label: &str| -> Vec<u64> {
        text.lines()
            .skip(1)
            .filter(|l| l.starts_with(&format!("{label},")))
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect()
    };
    let (picked, runner_up) = (ids("adversarial"), ids("runner_up"));
    assert_eq!(picked.len(), 4);
    assert_eq!(runner_up.len(), picked.len());
    assert!(runner_up.iter().all(|r| !picked.contains(r)));
}
