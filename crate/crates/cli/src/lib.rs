//! `hazgen`: validate hazard sources, generate labeled datasets, train and
//! evaluate the safety envelope, and report the provenance chain.
//!
//! Exit codes: 0 success, 1 domain error, 2 environment error (I/O, usage).
//! Diagnostics go to standard error, progress to standard output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hazgen_core::canon::sha256_hex;
use hazgen_core::dataset::{
    build_records, export_records, manifest_path, split, verify_manifest, Manifest, ManifestInputs, Partition, Record,
    SplitRatios,
};
use hazgen_core::envelope::{evaluate, feature_names, train, Batch, EnvelopeModel, EvalMetrics, Hyperparams};
use hazgen_core::genvar::{generate_plan, GenerationPlan};
use hazgen_core::hsl::{load_registry, Diagnostic};
use hazgen_core::ontology::Registry;
use hazgen_core::twin::SensorModel;

pub const REGISTRY_FILE: &str = "registry.json";
pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Parser)]
#[command(name = "hazgen", version, about = "Hazard-informed synthetic data pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check .hsl sources and print diagnostics.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Generate labeled datasets for every scenario in the sources.
    Generate(GenerateArgs),
    /// Train the safety envelope on a generated dataset.
    Train(TrainArgs),
    /// Evaluate a trained model on one split partition.
    Evaluate(EvaluateArgs),
    /// Verify the registry -> dataset -> model digest chain and summarize.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "HAZGEN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub count: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Train, val and test ratios.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub split: String,
    /// Range sensor noise in cm at lighting 1.
    #[arg(long, default_value_t = 0.0)]
    pub sensor_sigma: f64,
    /// Temperature sensor noise in degrees C.
    #[arg(long, default_value_t = 0.0)]
    pub temperature_sigma: f64,
    /// Only generate these scenarios (repeatable).
    #[arg(long)]
    pub scenario: Vec<String>,
    /// Override threshold recorded for downstream commands.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub scenario: Option<String>,
    /// Label flag to learn (default: the scenario's only flag).
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: u32,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub partition: String,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

/// A failure with a code and an exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
}

impl CliError {
    pub fn domain(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, message: message.into(), exit: 1 }
    }

    pub fn env(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, message: message.into(), exit: 2 }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::env("E_IO", format!("{}: {e}", path.display()))
    }
}

impl From<hazgen_core::dataset::DatasetError> for CliError {
    fn from(e: hazgen_core::dataset::DatasetError) -> Self {
        let exit = if e.code() == "E_IO" { 2 } else { 1 };
        CliError { code: e.code(), message: e.to_string(), exit }
    }
}

impl From<hazgen_core::envelope::EnvelopeError> for CliError {
    fn from(e: hazgen_core::envelope::EnvelopeError) -> Self {
        let exit = if e.code() == "E_IO" { 2 } else { 1 };
        CliError { code: e.code(), message: e.to_string(), exit }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Validate { paths } => cmd_validate(&paths),
        Command::Generate(args) => cmd_generate(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Report(args) => cmd_report(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hazgen: error[{}]: {}", e.code, e.message);
            e.exit
        }
    }
}

fn read_sources(paths: &[PathBuf]) -> Result<Vec<(String, String)>, CliError> {
    paths
        .iter()
        .map(|p| fs::read_to_string(p).map(|t| (p.display().to_string(), t)).map_err(|e| CliError::io(p, e)))
        .collect()
}

fn print_diagnostics(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{d}");
    }
}

/// Compiles sources into a registry, printing every diagnostic.
pub fn compile(paths: &[PathBuf]) -> Result<Registry, CliError> {
    let sources = read_sources(paths)?;
    match load_registry(&sources) {
        Ok(loaded) => {
            print_diagnostics(&loaded.warnings);
            Ok(loaded.registry)
        }
        Err(diags) => {
            print_diagnostics(&diags);
            let errors = diags.iter().filter(|d| d.is_error()).count();
            Err(CliError::domain("E_INVALID", format!("{errors} error(s) in hazard sources")))
        }
    }
}

pub fn cmd_validate(paths: &[PathBuf]) -> Result<(), CliError> {
    let registry = compile(paths)?;
    println!(
        "ok: {} assets, {} exposures, {} scenarios (registry {})",
        registry.assets().len(),
        registry.exposures().len(),
        registry.scenarios().len(),
        registry.digest()
    );
    Ok(())
}

fn parse_ratios(text: &str) -> Result<SplitRatios, CliError> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match parts.as_deref() {
        Ok([a, b, c]) => Ok(SplitRatios::new(*a, *b, *c)?),
        _ => Err(CliError::domain("E_BAD_RATIOS", format!("--split expects three comma-separated numbers, got `{text}`"))),
    }
}

/// Configuration recorded in every manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub inputs: Vec<String>,
    pub out_dir: String,
    pub master_seed: u64,
    pub count: u64,
    pub threads: usize,
    pub split: SplitRatios,
    pub tau: f64,
    pub sensor: SensorModel,
    pub scenarios: Vec<String>,
}

/// Removes written files unless disarmed.
struct Cleanup {
    files: Vec<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for f in &self.files {
                let _ = fs::remove_file(f);
            }
        }
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(CliError::domain("E_BAD_FLAG", "--count must be at least 1"));
    }
    if !(args.sensor_sigma.is_finite() && args.sensor_sigma >= 0.0)
        || !(args.temperature_sigma.is_finite() && args.temperature_sigma >= 0.0)
    {
        return Err(CliError::domain("E_BAD_FLAG", "sensor noise must be a non-negative number"));
    }
    if !(0.0..=1.0).contains(&args.tau) {
        return Err(CliError::domain("E_BAD_FLAG", "--tau must lie in [0, 1]"));
    }
    let ratios = parse_ratios(&args.split)?;
    let threads = match args.threads {
        Some(0) => return Err(CliError::domain("E_BAD_FLAG", "--threads must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let registry = compile(&args.paths)?;
    let scenarios: Vec<String> = if args.scenario.is_empty() {
        registry.scenarios().keys().cloned().collect()
    } else {
        for s in &args.scenario {
            if registry.scenario(s).is_none() {
                return Err(CliError::domain("E_UNKNOWN_SCENARIO", format!("no scenario `{s}` in the sources")));
            }
        }
        args.scenario.clone()
    };
    if scenarios.is_empty() {
        return Err(CliError::domain("E_EMPTY_PLAN", "the sources declare no scenarios"));
    }
    let sensor = SensorModel { clearance_noise_sigma: args.sensor_sigma, temperature_noise_sigma: args.temperature_sigma };
    let config = RunConfig {
        inputs: args.paths.iter().map(|p| p.display().to_string()).collect(),
        out_dir: args.out.display().to_string(),
        master_seed: args.seed,
        count: args.count,
        threads,
        split: ratios,
        tau: args.tau,
        sensor,
        scenarios: scenarios.clone(),
    };
    let config_value = serde_json::to_value(&config).expect("config serializes");

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let mut cleanup = Cleanup { files: Vec::new(), armed: true };
    let registry_path = args.out.join(REGISTRY_FILE);
    cleanup.files.push(registry_path.clone());
    fs::write(&registry_path, registry.canonical_text()).map_err(|e| CliError::io(&registry_path, e))?;

    for id in &scenarios {
        let plan = GenerationPlan::new(&registry, id, args.count, args.seed, sensor);
        let variations =
            generate_plan(&registry, &plan, threads).map_err(|e| CliError::domain(e.code(), format!("{id}: {e}")))?;
        let rules = &registry.scenario(id).expect("checked above").label_rules;
        let records = build_records(&variations, rules)?;
        let data_path = args.out.join(format!("{id}.jsonl"));
        cleanup.files.push(data_path.clone());
        cleanup.files.push(manifest_path(&data_path));
        let inputs = ManifestInputs {
            master_seed: args.seed,
            registry_digest: registry.digest().to_string(),
            split: Some((ratios, args.seed)),
            config: config_value.clone(),
        };
        let manifest = export_records(&records, &data_path, &inputs)?;
        println!("{id}: {} records, {} skipped, digest {}", manifest.record_count, manifest.skip_count, manifest.content_digest);
        for (flag, c) in &manifest.label_histogram {
            println!("  {flag}: {} positive, {} negative", c.positive, c.negative);
        }
    }
    cleanup.armed = false;
    Ok(())
}

/// Every manifest in a generate output directory, keyed by scenario id.
pub fn find_manifests(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if let Some(stem) = name.strip_suffix(".manifest.json") {
            out.insert(stem.to_string(), path);
        }
    }
    Ok(out)
}

fn pick_manifest(dir: &Path, scenario: Option<&str>) -> Result<(String, PathBuf), CliError> {
    let manifests = find_manifests(dir)?;
    match scenario {
        Some(s) => manifests
            .get(s)
            .map(|p| (s.to_string(), p.clone()))
            .ok_or_else(|| CliError::domain("E_NO_DATASET", format!("{}: no dataset for scenario `{s}`", dir.display()))),
        None => match manifests.len() {
            0 => Err(CliError::domain("E_NO_DATASET", format!("{}: no dataset manifests found", dir.display()))),
            1 => Ok(manifests.into_iter().next().expect("one entry")),
            _ => Err(CliError::domain(
                "E_AMBIGUOUS",
                format!("several datasets in {}; pass --scenario ({})", dir.display(), manifests.keys().cloned().collect::<Vec<_>>().join(", ")),
            )),
        },
    }
}

fn partition_of(manifest: &Manifest, records: &[Record]) -> Result<Vec<Partition>, CliError> {
    let summary = manifest
        .split
        .as_ref()
        .ok_or_else(|| CliError::domain("E_NO_SPLIT", "manifest has no split assignment"))?;
    let ids: Vec<&str> = records.iter().map(|r| r.record_id.as_str()).collect();
    Ok(split(&ids, summary.ratios, summary.seed)?)
}

/// Records of one partition.
pub fn partition_records<'a>(manifest: &Manifest, records: &'a [Record], which: Partition) -> Result<Vec<&'a Record>, CliError> {
    let parts = partition_of(manifest, records)?;
    Ok(records.iter().zip(parts).filter(|(_, p)| *p == which).map(|(r, _)| r).collect())
}

fn default_target(manifest: &Manifest) -> Result<String, CliError> {
    let flags: Vec<_> = manifest.label_histogram.keys().cloned().collect();
    match flags.as_slice() {
        [only] => Ok(only.clone()),
        [] => Err(CliError::domain("E_NO_LABELS", "dataset carries no label flags")),
        _ => Err(CliError::domain("E_AMBIGUOUS", format!("several label flags; pass --target ({})", flags.join(", ")))),
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let (scenario, mpath) = pick_manifest(&args.data, args.scenario.as_deref())?;
    let (manifest, records) = verify_manifest(&mpath)?;
    let target = match &args.target {
        Some(t) => t.clone(),
        None => default_target(&manifest)?,
    };
    let tau = args.tau.unwrap_or_else(|| manifest.config.get("tau").and_then(|v| v.as_f64()).unwrap_or(0.5));
    if !(0.0..=1.0).contains(&tau) {
        return Err(CliError::domain("E_BAD_FLAG", "--tau must lie in [0, 1]"));
    }
    let train_set = partition_records(&manifest, &records, Partition::Train)?;
    let batch = Batch::from_records(train_set.iter().copied(), &target)?;
    let hp = Hyperparams { learning_rate: args.lr, epochs: args.epochs, l2: args.l2, seed: manifest.master_seed };
    let mut model = train(&batch, &target, &hp)?;
    model.tau = tau;
    model.meta.dataset_digest = Some(manifest.content_digest.clone());
    model.meta.registry_digest = Some(manifest.registry_digest.clone());
    let path = args.model.clone().unwrap_or_else(|| args.data.join(MODEL_FILE));
    model.save(&path)?;
    println!(
        "trained `{target}` on {scenario}: {} records, loss {:.6} -> {:.6}, model {}",
        batch.len(),
        model.meta.initial_loss,
        model.meta.final_loss,
        path.display()
    );
    Ok(())
}

fn load_checked_model(path: &Path) -> Result<EnvelopeModel, CliError> {
    let model = EnvelopeModel::load(path)?;
    let expected = feature_names();
    if model.feature_names != expected {
        return Err(CliError::domain(
            "E_FEATURE_MISMATCH",
            format!("model features {:?} do not match the layout {:?}", model.feature_names, expected),
        ));
    }
    Ok(model)
}

fn model_dataset(model: &EnvelopeModel, dir: &Path) -> Result<(String, Manifest, Vec<Record>), CliError> {
    let manifests = find_manifests(dir)?;
    if manifests.is_empty() {
        return Err(CliError::domain("E_NO_DATASET", format!("{}: no dataset manifests found", dir.display())));
    }
    let want = model.meta.dataset_digest.as_deref().unwrap_or("");
    for (scenario, mpath) in &manifests {
        let manifest = Manifest::read(mpath)?;
        if manifest.content_digest == want {
            let (manifest, records) = verify_manifest(mpath)?;
            return Ok((scenario.clone(), manifest, records));
        }
    }
    Err(CliError::domain(
        "E_DIGEST_MISMATCH",
        format!("no dataset in {} has the model's training digest {want}", dir.display()),
    ))
}

fn parse_partition(name: &str) -> Result<Partition, CliError> {
    match name {
        "train" => Ok(Partition::Train),
        "val" => Ok(Partition::Val),
        "test" => Ok(Partition::Test),
        other => Err(CliError::domain("E_BAD_FLAG", format!("--partition must be train, val or test, got `{other}`"))),
    }
}

fn eval_partition(model: &EnvelopeModel, manifest: &Manifest, records: &[Record], which: Partition) -> Result<EvalMetrics, CliError> {
    let rows = partition_records(manifest, records, which)?;
    let batch = Batch::from_records(rows.iter().copied(), &model.meta.target_flag)?;
    Ok(evaluate(model, &batch)?)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let which = parse_partition(&args.partition)?;
    let path = args.model.clone().unwrap_or_else(|| args.data.join(MODEL_FILE));
    let mut model = load_checked_model(&path)?;
    if let Some(tau) = args.tau {
        model.tau = tau;
    }
    let (_, manifest, records) = model_dataset(&model, &args.data)?;
    let metrics = eval_partition(&model, &manifest, &records, which)?;
    println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
    Ok(())
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("undefined".to_string(), |v| format!("{v:.4}"))
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let manifests = find_manifests(&args.data)?;
    if manifests.is_empty() {
        return Err(CliError::domain("E_NO_DATASET", format!("{}: no dataset manifests found; run `hazgen generate` first", args.data.display())));
    }
    let registry_path = args.data.join(REGISTRY_FILE);
    let registry_bytes = fs::read(&registry_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::domain("E_NO_REGISTRY", format!("{} is missing", registry_path.display())),
        _ => CliError::io(&registry_path, e),
    })?;
    let registry_digest = sha256_hex(&registry_bytes);
    let registry_text = String::from_utf8(registry_bytes)
        .map_err(|_| CliError::domain("E_DIGEST_MISMATCH", "registry file is not UTF-8"))?;
    let registry = Registry::from_canonical_text(&registry_text)
        .map_err(|e| CliError::domain("E_DIGEST_MISMATCH", format!("registry file does not reproduce its digest: {e}")))?;
    if registry.digest() != registry_digest {
        return Err(CliError::domain("E_DIGEST_MISMATCH", "registry file is not in canonical form"));
    }
    println!("registry  {registry_digest}  ({} assets, {} exposures, {} scenarios)", registry.assets().len(), registry.exposures().len(), registry.scenarios().len());

    let mut verified = BTreeMap::new();
    for (scenario, mpath) in &manifests {
        let (manifest, records) = verify_manifest(mpath)?;
        if manifest.registry_digest != registry_digest {
            return Err(CliError::domain(
                "E_DIGEST_MISMATCH",
                format!("{scenario}: manifest registry digest {} differs from registry file {registry_digest}", manifest.registry_digest),
            ));
        }
        println!(
            "dataset   {}  {scenario}: {} records, {} skipped, seed {}",
            manifest.content_digest, manifest.record_count, manifest.skip_count, manifest.master_seed
        );
        for (flag, c) in &manifest.label_histogram {
            println!("            {flag}: {} positive / {} negative", c.positive, c.negative);
        }
        verified.insert(manifest.content_digest.clone(), (scenario.clone(), manifest, records));
    }

    let model_path = args.model.clone().unwrap_or_else(|| args.data.join(MODEL_FILE));
    if args.model.is_none() && !model_path.exists() {
        println!("model     (none)");
        return Ok(());
    }
    let model = load_checked_model(&model_path)?;
    let want = model.meta.dataset_digest.clone().unwrap_or_default();
    let Some((scenario, manifest, records)) = verified.get(&want) else {
        return Err(CliError::domain("E_DIGEST_MISMATCH", format!("model was trained on dataset {want}, which is not present")));
    };
    if model.meta.registry_digest.as_deref() != Some(registry_digest.as_str()) {
        return Err(CliError::domain("E_DIGEST_MISMATCH", "model registry digest differs from the registry file"));
    }
    println!(
        "model     {}  {}\n          target `{}` on {scenario}: {} train records, final loss {:.6}, tau {}",
        model.digest(),
        model_path.display(),
        model.meta.target_flag,
        model.meta.train_count,
        model.meta.final_loss,
        model.tau
    );
    let m = eval_partition(&model, manifest, records, Partition::Test)?;
    println!(
        "test      accuracy {}  precision {}  recall {}  fn-rate {}  (tp {} fp {} tn {} fn {})",
        fmt_rate(m.accuracy),
        fmt_rate(m.precision),
        fmt_rate(m.recall),
        fmt_rate(m.false_negative_rate),
        m.tp,
        m.fp,
        m.tn,
        m.fn_
    );
    println!("chain verified");
    Ok(())
}
