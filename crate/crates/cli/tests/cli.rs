use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use scaffgen::chem::{canonical_code, is_supergraph, parse_smiles, prefix_map};
use scaffgen::decoder::GenerationRecord;
use scaffgen::decoder::Policy;
use scaffgen_cli::commands::{cmd_generate, GenerateArgs};
use scaffgen_cli::manifest::{hash_file, RunManifest};

const TOY: &str = "\
c1ccccc1CCO
c1ccccc1C(=O)N
OC(=O)c1ccccc1
Cc1ccc(O)cc1
c1ccc2ccccc2c1N
C1CCNCC1C(=O)O
CC1CCCCC1
c1ccncc1CC
";

const CONFIG: &str = "\
hidden_dim = 8
latent_dim = 4
k_init = 3
k_build = 2
beta = 0.1
lr = 0.001
epochs = 2
batch_size = 4
seed = 5
properties = mw
max_added_atoms = 20
workers = 1
";

fn scaffgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scaffgen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_inputs(dir: &Path, config: &str) -> (PathBuf, PathBuf) {
    let data = dir.join("toy.smi");
    let cfg = dir.join("toy.cfg");
    fs::write(&data, TOY).unwrap();
    fs::write(&cfg, config).unwrap();
    (data, cfg)
}

struct Trained {
    _dir: tempfile::TempDir,
    data: PathBuf,
    out: PathBuf,
}

fn trained() -> &'static Trained {
    static T: OnceLock<Trained> = OnceLock::new();
    T.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let (data, cfg) = write_inputs(dir.path(), CONFIG);
        let out = dir.path().join("run");
        let o = scaffgen(&[
            "train",
            "--config",
            s(&cfg),
            "--dataset",
            s(&data),
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        Trained {
            _dir: dir,
            data,
            out,
        }
    })
}

fn last_checkpoint() -> PathBuf {
    trained().out.join("checkpoint_epoch002.sggm")
}

#[test]
fn train_writes_checkpoints_metrics_and_manifests() {
    let t = trained();
    let mut ckpts: Vec<_> = fs::read_dir(&t.out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "sggm"))
        .collect();
    ckpts.sort();
    assert_eq!(ckpts.len(), 2);
    let csv = fs::read_to_string(t.out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    for c in &ckpts {
        let m = RunManifest::parse(&fs::read_to_string(RunManifest::path_for(c)).unwrap()).unwrap();
        assert_eq!(&m.checkpoint, c);
        assert_eq!(m.seed, 5);
        assert_eq!(m.config.epochs, 2);
        assert_eq!(m.datasets[0].1, hash_file(&t.data).unwrap());
    }
}

#[test]
fn single_worker_training_is_byte_identical() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let (data, cfg) = write_inputs(dir.path(), CONFIG);
    let out = dir.path().join("again");
    let o = scaffgen(&[
        "train",
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    for name in [
        "checkpoint_epoch001.sggm",
        "checkpoint_epoch002.sggm",
        "metrics.csv",
    ] {
        assert_eq!(
            fs::read(t.out.join(name)).unwrap(),
            fs::read(out.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn missing_config_key_exits_1_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let config: String = CONFIG
        .lines()
        .filter(|l| !l.starts_with("lr"))
        .map(|l| format!("{l}\n"))
        .collect();
    let (data, cfg) = write_inputs(dir.path(), &config);
    let out = dir.path().join("run");
    let o = scaffgen(&[
        "train",
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lr"));
    assert!(!out.exists());
}

#[test]
fn generated_molecules_contain_the_scaffold() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen.tsv");
    let scaffold = "c1ccc(cc1)C1CCNCC1";
    let targets = [("mw".to_string(), 300.0)];
    let built = cmd_generate(GenerateArgs {
        checkpoint: &last_checkpoint(),
        scaffold,
        n: 100,
        targets: &targets,
        seed: 3,
        policy: Policy::Sample,
        workers: 1,
        out: Some(&gen),
    })
    .unwrap();
    let sg = parse_smiles(scaffold).unwrap();
    let text = fs::read_to_string(&gen).unwrap();
    assert_eq!(text.lines().count(), 100);
    for (line, b) in text.lines().zip(&built) {
        assert!(is_supergraph(&b.graph, &sg, &prefix_map(&sg)).unwrap());
        let r = GenerationRecord::parse(line).unwrap();
        assert_eq!(r.targets, vec![300.0]);
        if r.valid {
            assert_eq!(
                canonical_code(&parse_smiles(&r.smiles).unwrap()),
                canonical_code(&b.graph),
                "{}",
                r.smiles
            );
        }
    }
}

#[test]
fn generation_is_seeded() {
    let run = |workers: &str| {
        scaffgen(&[
            "generate",
            "--checkpoint",
            s(&last_checkpoint()),
            "--scaffold",
            "c1ccccc1",
            "--n",
            "20",
            "--seed",
            "9",
            "--workers",
            workers,
        ])
        .stdout
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn target_below_scaffold_weight_is_refused() {
    let o = scaffgen(&[
        "generate",
        "--checkpoint",
        s(&last_checkpoint()),
        "--scaffold",
        "c1ccccc1",
        "--target",
        "mw=50",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_target_and_bad_scaffold() {
    let ck = last_checkpoint();
    let o = scaffgen(&[
        "generate",
        "--checkpoint",
        s(&ck),
        "--scaffold",
        "c1ccccc1",
        "--target",
        "logp=2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = scaffgen(&["generate", "--checkpoint", s(&ck), "--scaffold", "c1ccc"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_reads_generate_output() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen.tsv");
    let report = dir.path().join("report.txt");
    let o = scaffgen(&[
        "generate",
        "--checkpoint",
        s(&last_checkpoint()),
        "--scaffold",
        "c1ccccc1",
        "--n",
        "30",
        "--out",
        s(&gen),
    ]);
    assert!(o.status.success());
    let o = scaffgen(&[
        "evaluate",
        "--generated",
        s(&gen),
        "--dataset",
        s(&t.data),
        "--out",
        s(&report),
        "--checkpoint",
        s(&last_checkpoint()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(report.with_extension("csv")).unwrap();
    assert!(csv.contains("mw"), "{csv}");
    assert!(fs::read_to_string(&report).unwrap().contains("30"));
}

#[test]
fn evaluate_empty_file_reports_na() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("empty.tsv");
    fs::write(&gen, "").unwrap();
    let report = dir.path().join("report.txt");
    let o = scaffgen(&[
        "evaluate",
        "--generated",
        s(&gen),
        "--dataset",
        s(&t.data),
        "--out",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(&report).unwrap().contains("NA"));
}

#[test]
fn evaluate_flags_malformed_lines() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen.tsv");
    fs::write(&gen, "c1ccccc1C\tc1ccccc1\t\t1\nnot a record\n").unwrap();
    let report = dir.path().join("report.txt");
    let o = scaffgen(&[
        "evaluate",
        "--generated",
        s(&gen),
        "--dataset",
        s(&t.data),
        "--out",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));
    assert!(report.exists());
}

#[test]
fn scaffold_command_marks_acyclic_and_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.smi");
    fs::write(&input, "CCO\nc1ccccc1CC\nC1CC(\n").unwrap();
    let out = dir.path().join("out.tsv");
    let o = scaffgen(&["scaffold", "--dataset", s(&input), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "CCO\t-");
    let (mol, scaf) = lines[1].split_once('\t').unwrap();
    assert_eq!(mol, "c1ccccc1CC");
    assert_eq!(
        canonical_code(&parse_smiles(scaf).unwrap()),
        canonical_code(&parse_smiles("c1ccccc1").unwrap())
    );
}
