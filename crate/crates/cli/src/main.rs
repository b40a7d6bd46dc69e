//! Operator entry point: triage one APK, score a labeled corpus, dump
//! extracted features, or forge fixtures. stdout carries machine-readable
//! payloads only; diagnostics go to stderr. Exit codes: 0 legitimate or
//! success, 2 fraud verdict, 1 any error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use chrono::Utc;
use clap::{Parser, Subcommand};
use droidtriage_apk::build_feature_bundle;
use droidtriage_eval::{
    build_index, evaluate, load_corpus, metrics_table, stratified_split, table, EvalConfig,
};
use droidtriage_forge::{assemble_apk, category_spec, default_profile, generate_corpus};
use droidtriage_pipeline::{run_pipeline, CorpusIndex, FraudCategory, Policy};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::{build_suite, credential_from_env, resolve, Overrides, RunConfig};

const EXIT_FRAUD: u8 = 2;

#[derive(Parser)]
#[command(
    name = "droidtriage",
    version,
    about = "APK fraud triage over statically extracted features"
)]
struct Cli {
    /// Flat key = value config file. Flags override file values, which
    /// override built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Triage one APK; prints the verdict JSON.
    Analyze {
        apk: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Split a labeled corpus, score the test side, print the summary table.
    Evaluate {
        manifest: PathBuf,
        /// Share of each class drawn into the test split.
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Average the headline metrics over this many consecutive seeds.
        #[arg(long, default_value_t = 1)]
        repeats: u32,
        /// Where the full JSON report is written.
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the extracted feature bundle as canonical JSON.
    Extract { apk: PathBuf },
    /// Build synthetic fixture APKs with planted indicators.
    Forge {
        #[command(subcommand)]
        target: ForgeTarget,
    },
}

#[derive(Subcommand)]
enum ForgeTarget {
    /// The default 40-APK labeled corpus plus its manifest.
    Corpus {
        #[arg(long, default_value = "forged-corpus")]
        out: PathBuf,
        // --seed arrives through the shared overrides.
        #[command(flatten)]
        overrides: Overrides,
    },
    /// One APK carrying the indicators of a single category.
    Apk {
        #[arg(long, value_parser = parse_category)]
        category: FraudCategory,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn parse_category(text: &str) -> Result<FraudCategory, String> {
    text.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version are not failures. Usage mistakes exit 1;
            // clap's default of 2 is reserved for fraud verdicts here.
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Analyze { apk, overrides } => {
            cmd_analyze(&apk, &resolve(config_path, &overrides)?)
        }
        Command::Evaluate {
            manifest,
            test_fraction,
            repeats,
            report,
            overrides,
        } => cmd_evaluate(
            &manifest,
            test_fraction,
            repeats,
            &report,
            &resolve(config_path, &overrides)?,
        ),
        Command::Extract { apk } => cmd_extract(&apk),
        Command::Forge { target } => match target {
            ForgeTarget::Corpus { out, overrides } => {
                cmd_forge_corpus(&out, &resolve(config_path, &overrides)?)
            }
            ForgeTarget::Apk {
                category,
                out,
                overrides,
            } => cmd_forge_apk(category, out, &resolve(config_path, &overrides)?),
        },
    }
}

fn cmd_analyze(apk: &Path, config: &RunConfig) -> Result<ExitCode> {
    let bundle = build_feature_bundle(apk)
        .map_err(|e| anyhow!("{e:?}: {e}"))
        .with_context(|| format!("extracting `{}`", apk.display()))?;
    let suite = build_suite(config, CorpusIndex::new(), Utc::now(), credential_from_env())?;
    let policy = Policy {
        max_iterations: config.max_iterations,
    };
    let verdict = run_pipeline(Arc::new(bundle), &suite, &policy)?;
    println!("{}", serde_json::to_value(&verdict)?);
    Ok(if verdict.category.is_fraud() {
        ExitCode::from(EXIT_FRAUD)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_evaluate(
    manifest: &Path,
    test_fraction: f64,
    repeats: u32,
    report_path: &Path,
    config: &RunConfig,
) -> Result<ExitCode> {
    let corpus = load_corpus(manifest)?;
    let mut runs = Vec::new();
    for k in 0..u64::from(repeats.max(1)) {
        let seed = config.seed.wrapping_add(k);
        let (train, test) = stratified_split(&corpus, test_fraction, seed)?;
        // Rule tables see only the train side; evaluate refuses overlap.
        let index = build_index(&train)?;
        let suite = build_suite(config, index, Utc::now(), credential_from_env())?;
        let eval_config = EvalConfig {
            suite,
            policy: Policy {
                max_iterations: config.max_iterations,
            },
            worker_count: config.worker_count,
            tuning_ids: train.iter().map(|e| e.id.clone()).collect(),
        };
        runs.push(evaluate(&test, &eval_config)?);
    }

    let report_json = if runs.len() == 1 {
        print!("{}", metrics_table(&runs[0].summary));
        serde_json::to_value(&runs[0])?
    } else {
        let n = runs.len() as f64;
        let mut sums = [0.0f64; 4];
        for run in &runs {
            sums[0] += run.summary.accuracy;
            sums[1] += run.summary.precision_w;
            sums[2] += run.summary.recall_w;
            sums[3] += run.summary.f1_w;
        }
        let [acc, precision, recall, f1] = sums.map(|s| s / n);
        print!("{}", table(acc, precision, recall, f1));
        serde_json::json!({
            "mean": {
                "accuracy": acc,
                "precision_w": precision,
                "recall_w": recall,
                "f1_w": f1,
            },
            "runs": serde_json::to_value(&runs)?,
        })
    };
    fs::write(report_path, serde_json::to_string_pretty(&report_json)?)
        .with_context(|| format!("writing report `{}`", report_path.display()))?;
    eprintln!("report written to {}", report_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_extract(apk: &Path) -> Result<ExitCode> {
    // The error variant name is part of the scripting contract, so it is
    // printed alongside the prose.
    let bundle = build_feature_bundle(apk).map_err(|e| anyhow!("{e:?}: {e}"))?;
    println!("{}", serde_json::to_value(&bundle)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_forge_corpus(out: &Path, config: &RunConfig) -> Result<ExitCode> {
    let manifest = generate_corpus(config.seed, &default_profile(), out)?;
    println!("{}", manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_forge_apk(
    category: FraudCategory,
    out: Option<PathBuf>,
    config: &RunConfig,
) -> Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let spec = category_spec(category, 0, &mut rng);
    let out =
        out.unwrap_or_else(|| PathBuf::from(format!("forged-{}.apk", category.as_str())));
    let path = assemble_apk(&spec, &out)?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}
