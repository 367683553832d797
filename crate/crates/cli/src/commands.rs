//! The four subcommands.

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scaffgen::chem::{
    canonical_code_with, check_validity, extract_scaffold, read_smiles_lines, write_smiles,
    MolGraph,
};
use scaffgen::decoder::{generate, Generated, GenerationRecord, Policy};
use scaffgen::nets::Model;
use scaffgen::nn::ParameterStore;
use scaffgen::props::{evaluate, molecular_weight, mw_target_filter, properties, EvalOptions};
use scaffgen::training::{
    checkpoint_name, init_model, make_pairs, train_epochs, write_atomic, TrainConfig,
    METRICS_HEADER,
};

use crate::error::CliError;
use crate::manifest::{hash_file, now, RunManifest};

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(CliError::io(path))
}

/// `(line number, SMILES text, graph)` of each parsed line.
type Molecules = Vec<(usize, String, MolGraph)>;

/// Parses a SMILES-lines file, reporting bad lines on stderr. Returns the
/// molecules with their line numbers and the number of rejected lines.
fn read_molecules(path: &Path) -> Result<(Molecules, usize), CliError> {
    let text = read_text(path)?;
    let mut mols = Vec::new();
    let mut failed = 0;
    for r in read_smiles_lines(&text) {
        match r.parsed {
            Ok(g) => mols.push((r.line, r.smiles, g)),
            Err(e) => {
                failed += 1;
                eprintln!("{}:{}: {e}", path.display(), r.line);
            }
        }
    }
    Ok((mols, failed))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))
}

/// Writes `molecule \t scaffold` lines (`-` for an empty scaffold).
pub fn cmd_scaffold(input: &Path, output: &Path) -> Result<(), CliError> {
    let (mols, failed) = read_molecules(input)?;
    let mut out = String::new();
    for (_, smiles, g) in &mols {
        let s = extract_scaffold(g);
        let s = if s.is_empty() {
            "-".to_string()
        } else {
            write_smiles(&s)
        };
        out.push_str(&format!("{smiles}\t{s}\n"));
    }
    write_text(output, &out)?;
    eprintln!("{} scaffolds written, {failed} lines rejected", mols.len());
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: failed + mols.len(),
        });
    }
    Ok(())
}

pub struct TrainArgs<'a> {
    pub config: &'a Path,
    pub dataset: &'a Path,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub command_line: Vec<String>,
}

/// Trains from a config and SMILES file, writing per-epoch checkpoints,
/// manifests and `metrics.csv` into the output directory.
pub fn cmd_train(args: TrainArgs<'_>) -> Result<Vec<PathBuf>, CliError> {
    let mut config = TrainConfig::parse(&read_text(args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(w) = args.workers {
        config.workers = w;
    }
    config.validate()?;
    let (mols, failed) = read_molecules(args.dataset)?;
    let graphs: Vec<MolGraph> = mols.into_iter().map(|(_, _, g)| g).collect();
    let dataset =
        make_pairs(&graphs, &config.properties).map_err(|e| CliError::Usage(e.to_string()))?;
    eprintln!(
        "{} pairs ({} unparseable, {} acyclic, {} unreproducible, {} duplicate molecules skipped)",
        dataset.len(),
        failed,
        dataset.dropped_acyclic,
        dataset.dropped_unreplayable,
        dataset.duplicates
    );
    if dataset.is_empty() {
        return Err(CliError::Data("no training pairs in the dataset".into()));
    }
    fs::create_dir_all(args.out).map_err(CliError::io(args.out))?;
    let datasets = vec![
        (args.dataset.to_path_buf(), hash_file(args.dataset)?),
        (args.config.to_path_buf(), hash_file(args.config)?),
    ];
    let (model, mut store) = init_model(&dataset, &config)?;
    let metrics_path = args.out.join("metrics.csv");
    let mut csv = format!("{METRICS_HEADER}\n");
    write_text(&metrics_path, &csv)?;
    let mut written = Vec::new();
    let mut failure = None;
    let run_config = config.clone();
    let result = train_epochs(&model, &mut store, &dataset, &config, |m, s| {
        let ckpt = args.out.join(checkpoint_name(m.epoch));
        let step = (|| {
            write_atomic(&ckpt, &s.to_bytes()).map_err(CliError::io(&ckpt))?;
            RunManifest {
                config: run_config.clone(),
                seed: run_config.seed,
                checkpoint: ckpt.clone(),
                datasets: datasets.clone(),
                command_line: args.command_line.clone(),
                timestamp: now(),
            }
            .write()?;
            csv.push_str(&m.csv_row());
            csv.push('\n');
            write_text(&metrics_path, &csv)
        })();
        eprintln!("epoch {}: loss {:.4}", m.epoch, m.losses.total);
        written.push(ckpt);
        step.map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            scaffgen::training::TrainError::Config(msg)
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    result?;
    Ok(written)
}

pub struct GenerateArgs<'a> {
    pub checkpoint: &'a Path,
    pub scaffold: &'a str,
    pub n: usize,
    pub targets: &'a [(String, f64)],
    pub seed: u64,
    pub policy: Policy,
    pub workers: usize,
    pub out: Option<&'a Path>,
}

pub fn load_model(path: &Path) -> Result<(Model, ParameterStore), CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    let store = ParameterStore::from_bytes(&bytes)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let model =
        Model::bind(&store).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((model, store))
}

/// Generates `n` molecules from one scaffold and writes their records.
/// Properties without a target are conditioned on their training mean.
pub fn cmd_generate(args: GenerateArgs<'_>) -> Result<Vec<Generated>, CliError> {
    let (model, store) = load_model(args.checkpoint)?;
    let scaffold = scaffgen::chem::parse_smiles(args.scaffold)
        .map_err(|e| CliError::Data(format!("scaffold `{}`: {e}", args.scaffold)))?;
    if scaffold.is_empty() {
        return Err(CliError::Data("scaffold has no atoms".into()));
    }
    let names = model.property_names();
    let mut y: Vec<f64> = model.properties.iter().map(|p| p.mean).collect();
    let mut seen = HashSet::new();
    for (name, value) in args.targets {
        let j = names.iter().position(|n| n == name).ok_or_else(|| {
            CliError::Usage(format!(
                "checkpoint has no property `{name}` (available: {})",
                names.join(", ")
            ))
        })?;
        if !seen.insert(name) {
            return Err(CliError::Usage(format!("target `{name}` given twice")));
        }
        if name == "mw" && !mw_target_filter(&scaffold, *value) {
            return Err(CliError::Usage(format!(
                "target mw {value} is below the scaffold weight {:.2}",
                molecular_weight(&scaffold)
            )));
        }
        y[j] = *value;
    }
    let y_s = properties(&names, &scaffold).map_err(|e| CliError::Data(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let opts = scaffgen::decoder::BuildOptions::default();
    let generated = pool(args.workers)?
        .install(|| {
            generate(
                &model,
                &store,
                &scaffold,
                &y,
                &y_s,
                &mut rng,
                args.n,
                args.policy,
                opts,
            )
        })
        .map_err(|e| CliError::Data(e.to_string()))?;
    let records: Vec<GenerationRecord> = generated
        .iter()
        .map(|g| GenerationRecord::new(&g.graph, &scaffold, &y))
        .collect();
    let text: String = records.iter().map(|r| r.to_line() + "\n").collect();
    match args.out {
        Some(path) => write_text(path, &text)?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(CliError::io("<stdout>"))?,
    }
    let valid = records.iter().filter(|r| r.valid).count();
    eprintln!("{} generated, {valid} valid", records.len());
    Ok(generated)
}

pub struct EvaluateArgs<'a> {
    pub generated: &'a Path,
    pub dataset: &'a Path,
    pub out: &'a Path,
    /// Supplies property names for MAD columns.
    pub checkpoint: Option<&'a Path>,
}

/// CSV report path written next to the text report.
pub fn csv_path(report: &Path) -> PathBuf {
    report.with_extension("csv")
}

/// Recomputes validity from the structures and writes text and CSV reports.
pub fn cmd_evaluate(args: EvaluateArgs<'_>) -> Result<scaffgen::props::MetricsReport, CliError> {
    let names = match args.checkpoint {
        Some(p) => load_model(p)?.0.property_names(),
        None => Vec::new(),
    };
    let text = read_text(args.generated)?;
    let mut graphs = Vec::new();
    let mut targets = Vec::new();
    let (mut malformed, mut disagreements, mut total) = (0usize, 0usize, 0usize);
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let record = match GenerationRecord::parse(line) {
            Ok(r) => r,
            Err(e) => {
                malformed += 1;
                eprintln!("{}:{}: {e}", args.generated.display(), i + 1);
                continue;
            }
        };
        if !names.is_empty() && record.targets.len() != names.len() {
            malformed += 1;
            eprintln!(
                "{}:{}: {} targets, checkpoint has {} properties",
                args.generated.display(),
                i + 1,
                record.targets.len(),
                names.len()
            );
            continue;
        }
        let (graph, valid) = record.recompute_validity();
        if valid != record.valid {
            disagreements += 1;
            eprintln!(
                "warning: {}:{}: file says valid={}, recomputed valid={valid}",
                args.generated.display(),
                i + 1,
                u8::from(record.valid)
            );
        }
        // Unparseable structures still count as generated (and invalid).
        graphs.push(graph.unwrap_or_else(invalid_placeholder));
        targets.push(record.targets);
    }
    let (train, _) = read_molecules(args.dataset)?;
    let opts = EvalOptions::default();
    let codes = train
        .iter()
        .map(|(_, _, g)| canonical_code_with(g, opts.stereo))
        .collect();
    let report = evaluate(&graphs, &codes, &targets, &names, opts)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_text(args.out, &report.to_text())?;
    write_text(&csv_path(args.out), &report.to_csv())?;
    if disagreements > 0 {
        eprintln!("warning: {disagreements} validity flags disagreed with recomputation");
    }
    if malformed > 0 {
        return Err(CliError::Partial {
            failed: malformed,
            total,
        });
    }
    Ok(report)
}

/// A graph that fails validity (a carbon with five bonds).
fn invalid_placeholder() -> MolGraph {
    let mut g = MolGraph::new();
    let c = g.add_atom(scaffgen::chem::Atom::new(scaffgen::chem::Element::C));
    for _ in 0..5 {
        let h = g.add_atom(scaffgen::chem::Atom::new(scaffgen::chem::Element::C));
        g.add_bond(c, h, scaffgen::chem::BondOrder::Single)
            .expect("fresh atoms");
    }
    debug_assert!(!check_validity(&g));
    g
}
