use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use walkdir::WalkDir;

use pdfmlp_core::evaluator::evaluate;
use pdfmlp_core::features::{describe_schema, features_from_bytes, SCHEMA_ID};
use pdfmlp_core::mlp::Verdict;
use pdfmlp_core::model_store::ModelFile;
use pdfmlp_core::preprocess::{read_csv, write_csv, Dataset, FeatureRow, LABEL_BENIGN, LABEL_MALICIOUS};
use pdfmlp_core::trainer::{train, TrainConfig};

const EXIT_OPERATIONAL: u8 = 2;
const EXIT_MALICIOUS: u8 = 3;

#[derive(Parser)]
#[command(name = "pdfmlp", version, about = "Static PDF malware detection with a multilayer perceptron")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract feature vectors from labeled corpus directories into a CSV.
    Extract {
        #[arg(long, num_args = 1.., value_name = "DIR")]
        benign: Vec<PathBuf>,
        #[arg(long, num_args = 1.., value_name = "DIR")]
        malicious: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: Option<u16>,
    },
    /// Train a model from a feature CSV.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: u64,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
        batch_size: u64,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        #[arg(long, default_value_t = 0.15)]
        dropout: f64,
        #[arg(long, default_value_t = 0.2)]
        val_frac: f64,
        #[arg(long, env = "PDFMLP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.62)]
        threshold: f64,
        /// Hidden layer widths.
        #[arg(long, value_delimiter = ',', default_value = "72,72")]
        hidden: Vec<usize>,
        /// Stop once validation loss falls below this value.
        #[arg(long)]
        early_stop_loss: Option<f64>,
        /// Per-epoch report CSV; defaults to the model path with a
        /// `.train.csv` extension.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a model on a labeled feature CSV and write plot data.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score files and print one verdict line per file.
    Scan {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true, value_name = "FILE")]
        files: Vec<PathBuf>,
    },
    /// Print the feature schema.
    Schema,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_OPERATIONAL)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Extract {
            benign,
            malicious,
            out,
            jobs,
        } => cmd_extract(&benign, &malicious, &out, jobs),
        Command::Train {
            features,
            out,
            epochs,
            batch_size,
            eta,
            dropout,
            val_frac,
            seed,
            threshold,
            hidden,
            early_stop_loss,
            report,
        } => {
            let config = TrainConfig {
                epochs: epochs as usize,
                batch_size: batch_size as usize,
                eta,
                dropout_rate: dropout,
                validation_fraction: val_frac,
                seed,
                early_stop_loss,
                hidden_widths: hidden,
                batch_norm: true,
                threshold,
            };
            let report = report.unwrap_or_else(|| out.with_extension("train.csv"));
            cmd_train(&features, &out, &report, &config)
        }
        Command::Evaluate {
            features,
            model,
            out_dir,
        } => cmd_evaluate(&features, &model, &out_dir),
        Command::Scan { model, files } => cmd_scan(&model, &files),
        Command::Schema => {
            cmd_schema()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Every regular file under the given roots, keyed by path.
fn collect_corpus(benign: &[PathBuf], malicious: &[PathBuf]) -> Result<BTreeMap<PathBuf, i8>> {
    let mut entries = BTreeMap::new();
    for (roots, label) in [(benign, LABEL_BENIGN), (malicious, LABEL_MALICIOUS)] {
        for root in roots {
            if !root.is_dir() {
                bail!("{}: not a readable directory", root.display());
            }
            for entry in WalkDir::new(root).follow_links(true).sort_by_file_name() {
                let entry = match entry {
                    Ok(e) => e,
                    Err(e) => {
                        warn!("skipping {}: {e}", e.path().map_or_else(|| root.display().to_string(), |p| p.display().to_string()));
                        continue;
                    }
                };
                if entry.file_type().is_dir() {
                    continue;
                }
                if !entry.file_type().is_file() {
                    warn!("skipping {}: not a regular file", entry.path().display());
                    continue;
                }
                let path = entry.into_path();
                if let Some(&previous) = entries.get(&path) {
                    if previous != label {
                        bail!("{} is listed as both benign and malicious", path.display());
                    }
                }
                entries.insert(path, label);
            }
        }
    }
    Ok(entries)
}

fn cmd_extract(benign: &[PathBuf], malicious: &[PathBuf], out: &Path, jobs: Option<u16>) -> Result<ExitCode> {
    if benign.is_empty() && malicious.is_empty() {
        bail!("no corpus directories given (use --benign and/or --malicious)");
    }
    let corpus: Vec<(PathBuf, i8)> = collect_corpus(benign, malicious)?.into_iter().collect();
    if corpus.is_empty() {
        bail!("no files found under the given directories");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n.into());
    }
    let pool = pool.build().context("starting worker pool")?;
    let results: Vec<Option<FeatureRow>> = pool.install(|| {
        corpus
            .par_iter()
            .map(|(path, label)| match fs::read(path) {
                Ok(bytes) => Some(FeatureRow {
                    path: path.display().to_string(),
                    label: *label,
                    values: features_from_bytes(&bytes).values.to_vec(),
                }),
                Err(e) => {
                    warn!("skipping {}: {e}", path.display());
                    None
                }
            })
            .collect()
    });
    let mut rows: Vec<FeatureRow> = results.into_iter().flatten().collect();
    if rows.is_empty() {
        bail!("no readable files found");
    }
    rows.sort_by(|a, b| a.path.cmp(&b.path));
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, &rows).with_context(|| format!("writing {}", out.display()))?;
    w.flush().with_context(|| format!("writing {}", out.display()))?;
    let malicious_rows = rows.iter().filter(|r| r.label == LABEL_MALICIOUS).count();
    info!(
        "wrote {} rows ({} benign, {} malicious) to {}",
        rows.len(),
        rows.len() - malicious_rows,
        malicious_rows,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = read_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
    Dataset::from_rows(&rows, SCHEMA_ID).with_context(|| format!("loading {}", path.display()))
}

fn cmd_train(features: &Path, out: &Path, report_path: &Path, config: &TrainConfig) -> Result<ExitCode> {
    let data = load_dataset(features)?;
    let [benign, malicious] = data.class_counts();
    info!("training on {} rows ({benign} benign, {malicious} malicious)", data.len());
    let outcome = train(&data, config)?;
    let report = outcome.report.clone();
    let model_file = outcome.into_model_file(config, &data);
    model_file.save(out)?;

    let file = File::create(report_path).with_context(|| format!("creating {}", report_path.display()))?;
    report
        .write_csv(BufWriter::new(file))
        .with_context(|| format!("writing {}", report_path.display()))?;

    println!("selected epoch: {} of {}", report.selected_epoch, report.records.len());
    if let Some(r) = report.selected() {
        println!(
            "validation loss: {:.6}  tpr@0.5: {:.4}  fpr@0.5: {:.4}",
            r.val_loss, r.val_tpr, r.val_fpr
        );
    }
    println!("model: {} (sha256 {})", out.display(), model_file.checksum());
    Ok(ExitCode::SUCCESS)
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let file = ModelFile::load(path).with_context(|| format!("loading model {}", path.display()))?;
    file.check_schema(SCHEMA_ID)?;
    Ok(file)
}

fn cmd_evaluate(features: &Path, model: &Path, out_dir: &Path) -> Result<ExitCode> {
    let file = load_model(model)?;
    let data = load_dataset(features)?;
    let thresholds: Vec<f64> = (1..100).map(|i| f64::from(i) / 100.0).collect();
    let report = evaluate(&file.model, &file.scaler, &data, &thresholds)?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let create = |name: &str| {
        let path = out_dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .with_context(|| format!("creating {}", path.display()))
    };
    report.write_roc_csv(create("roc.csv")?).context("writing roc.csv")?;
    report.write_sweep_csv(create("sweep.csv")?).context("writing sweep.csv")?;
    let summary = report.summary();
    create("report.txt")?
        .write_all(summary.as_bytes())
        .context("writing report.txt")?;

    let op = &report.operating_point;
    println!(
        "threshold {}: tpr {:.4}  fpr {:.4}  fnr {:.4}  auc {:.4}",
        op.threshold, op.tpr, op.fpr, op.fnr, report.auc
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_scan(model: &Path, files: &[PathBuf]) -> Result<ExitCode> {
    let file = load_model(model)?;
    let mut any_malicious = false;
    let mut failures = 0usize;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for path in files {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                failures += 1;
                continue;
            }
        };
        let x = file.scaler.transform(&features_from_bytes(&bytes))?;
        let (probability, verdict) = file.model.predict(&x)?;
        any_malicious |= verdict == Verdict::Malicious;
        writeln!(out, "{}\t{probability:.4}\t{}", path.display(), verdict.as_str())?;
    }
    Ok(if failures > 0 {
        ExitCode::from(EXIT_OPERATIONAL)
    } else if any_malicious {
        ExitCode::from(EXIT_MALICIOUS)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_schema() -> Result<()> {
    let schema = describe_schema();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "# {}", schema.schema_id)?;
    writeln!(out, "index\tname\tcategory\tunit\tdescription")?;
    for (i, d) in schema.descriptors.iter().enumerate() {
        writeln!(out, "{i}\t{}\t{}\t{}\t{}", d.name, d.category.as_str(), d.unit, d.description)?;
    }
    Ok(())
}
