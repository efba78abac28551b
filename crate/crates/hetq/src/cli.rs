//! Command-line front end. Every command writing a file also writes
//! `<file>.manifest.json`, and `hetq replay` reruns a manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetq_core::memsys::{cost_report, explore_bandwidth, DseCandidate};
use hetq_core::noise::{perturb_cells_2bit, perturb_codes};
use hetq_core::pipeline::reconstruction_sse;
use hetq_core::sweep::sweep_rho;
use hetq_core::{
    quantize_tensor, NoiseModel, QuantizeOptions, QuantizerSpec, ScaleSearchConfig, SystemConfig,
    WeightTensor,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_noise_model, load_system_config, system_config_toml};
use crate::error::{Error, Result};
use crate::format::{load_qmq, load_qmt, save_qmq, save_qmt};
use crate::manifest::RunManifest;
use crate::sample::{gaussian_tensors, SampleSpec};

#[derive(Debug, Parser)]
#[command(name = "hetq", version, about = "Outlier-aware dual-precision quantization and memory cost model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize a QMT file into a QMQ file and print a JSON summary.
    Quantize(QuantizeArgs),
    /// Print the cost report for a system configuration as JSON.
    Report(ReportArgs),
    /// Sweep the outlier ratio and emit a CSV table.
    Sweep(SweepArgs),
    /// Explore bandwidth allocations and emit the best point and the Pareto front.
    Dse(DseArgs),
    /// Inject read errors into the inlier codes of a QMQ file.
    Inject(InjectArgs),
    /// Write synthetic Gaussian weight tensors to a QMT file.
    GenSample(GenSampleArgs),
    /// Print the default system configuration as TOML.
    DefaultConfig(DefaultConfigArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// MLC mode of the inlier store (2 or 3). Selects the default noise levels.
    #[arg(long)]
    pub mlc_bits: Option<u8>,
    /// TOML noise file; overrides --mlc-bits.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Seed for every random draw; overrides the noise file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl NoiseArgs {
    fn resolve(&self, default_mlc: u8) -> Result<NoiseModel> {
        let model = match &self.noise {
            Some(path) => load_noise_model(path)?,
            None => NoiseModel::default_for_mlc(self.mlc_bits.unwrap_or(default_mlc))?,
        };
        Ok(match self.seed {
            Some(s) => model.with_seed(s),
            None => model,
        })
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.noise.iter().cloned().collect()
    }
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub rho: f64,
    #[arg(long, default_value_t = 3)]
    pub inlier_bits: u8,
    #[arg(long, default_value_t = 5)]
    pub outlier_bits: u8,
    #[arg(long, default_value_t = 128)]
    pub grid_points: usize,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// System TOML; the built-in default when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Tensors to quantize; a generated sample when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 128)]
    pub grid_points: usize,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DseArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured power budget.
    #[arg(long)]
    pub power_budget_mw: Option<f64>,
    /// Overrides the configured latency target.
    #[arg(long)]
    pub latency_target_ns: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectMode {
    /// Shift codes by one quantization level.
    Code,
    /// Pack 3-bit codes into 2-bit cells and shift cell levels.
    Cell,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = InjectMode::Code)]
    pub mode: InjectMode,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct GenSampleArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub tensors: usize,
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    #[arg(long, default_value_t = 40)]
    pub cols: usize,
    #[arg(long, default_value_t = 0.02)]
    pub std: f64,
}

#[derive(Debug, Args)]
pub struct DefaultConfigArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Parses `args` (without the program name) and runs the command.
pub fn run(args: &[String], stdout: &mut dyn Write) -> Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("hetq").chain(args.iter().map(String::as_str)))
        .map_err(|e| Error::Usage(e.to_string()))?;
    execute(cli, args, stdout)
}

pub fn execute(cli: Cli, args: &[String], stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Quantize(a) => quantize(a, args, stdout),
        Command::Report(a) => report(a, args, stdout),
        Command::Sweep(a) => sweep(a, args, stdout),
        Command::Dse(a) => dse(a, args, stdout),
        Command::Inject(a) => inject(a, args, stdout),
        Command::GenSample(a) => gen_sample(a, args, stdout),
        Command::DefaultConfig(a) => default_config(a, args, stdout),
        Command::Replay(a) => replay(a, stdout),
    }
}

#[derive(Debug, Serialize)]
struct TensorSummary {
    name: String,
    elements: usize,
    outliers: usize,
    mse: f64,
    bits_per_weight: f64,
    compression: f64,
    metadata_bits: u64,
}

#[derive(Debug, Serialize)]
struct QuantizeSummary {
    elements: usize,
    outliers: usize,
    mse: f64,
    bits_per_weight: f64,
    compression: f64,
    metadata_bits: u64,
    tensors: Vec<TensorSummary>,
}

fn quantize(a: QuantizeArgs, args: &[String], stdout: &mut dyn Write) -> Result<()> {
    let opts = QuantizeOptions {
        rho: a.rho,
        inlier: QuantizerSpec::new(a.inlier_bits)?,
        outlier: QuantizerSpec::new(a.outlier_bits)?,
        noise: a.noise.resolve(3)?,
        search: ScaleSearchConfig {
            grid_points: a.grid_points,
            ..ScaleSearchConfig::default()
        },
    };
    if !(0.0..=1.0).contains(&opts.rho) {
        return Err(hetq_core::Error::Config(format!("--rho {} outside [0, 1]", opts.rho)).into());
    }
    opts.search.validate()?;

    let tensors = load_qmt(&a.input)?;
    let mut quantized = Vec::with_capacity(tensors.len());
    let mut rows = Vec::with_capacity(tensors.len());
    for t in &tensors {
        let q = quantize_tensor(t, &opts)?;
        let sse = reconstruction_sse(t, &q)?;
        let bpw = q.payload_bits_per_weight();
        rows.push(TensorSummary {
            name: q.name.clone(),
            elements: q.len(),
            outliers: q.outlier_indices.len(),
            mse: sse / q.len() as f64,
            bits_per_weight: bpw,
            compression: 16.0 / bpw,
            metadata_bits: q.metadata_bits(),
        });
        quantized.push(q);
    }
    save_qmq(&a.out, &quantized)?;

    let elements: usize = rows.iter().map(|r| r.elements).sum();
    let payload: f64 = rows.iter().map(|r| r.bits_per_weight * r.elements as f64).sum();
    let bpw = if elements == 0 { 0.0 } else { payload / elements as f64 };
    let summary = QuantizeSummary {
        elements,
        outliers: rows.iter().map(|r| r.outliers).sum(),
        mse: if elements == 0 {
            0.0
        } else {
            rows.iter().map(|r| r.mse * r.elements as f64).sum::<f64>() / elements as f64
        },
        bits_per_weight: bpw,
        compression: if bpw > 0.0 { 16.0 / bpw } else { 0.0 },
        metadata_bits: rows.iter().map(|r| r.metadata_bits).sum(),
        tensors: rows,
    };

    let mut m = RunManifest::new(
        "quantize",
        args,
        json!({
            "rho": opts.rho,
            "inlier_bits": a.inlier_bits,
            "outlier_bits": a.outlier_bits,
            "noise": opts.noise,
            "search": opts.search,
        }),
    );
    m.seed = Some(opts.noise.seed);
    m.inputs = [vec![a.input.clone()], a.noise.inputs()].concat();
    m.outputs = vec![a.out.clone()];
    m.write_beside(&a.out)?;
    print_json(stdout, &summary)
}

fn system_config(path: Option<&Path>) -> Result<SystemConfig> {
    match path {
        Some(p) => load_system_config(p),
        None => Ok(SystemConfig::default()),
    }
}

fn report(a: ReportArgs, args: &[String], stdout: &mut dyn Write) -> Result<()> {
    let cfg = system_config(a.config.as_deref())?;
    let report = cost_report(&cfg)?;
    let text = json_text(&report)?;
    if let Some(out) = &a.out {
        write_file(out, &text)?;
        let mut m = RunManifest::new("report", args, serde_json::to_value(&cfg)?);
        m.inputs = a.config.iter().cloned().collect();
        m.outputs = vec![out.clone()];
        m.write_beside(out)?;
    }
    write_stdout(stdout, &text)
}

fn sweep(a: SweepArgs, args: &[String], stdout: &mut dyn Write) -> Result<()> {
    let cfg = system_config(a.config.as_deref())?;
    let noise = a.noise.resolve(cfg.mlc_bits)?;
    let search = ScaleSearchConfig {
        grid_points: a.grid_points,
        ..ScaleSearchConfig::default()
    };
    let tensors: Vec<WeightTensor> = match &a.input {
        Some(p) => load_qmt(p)?,
        None => gaussian_tensors(&SampleSpec {
            seed: noise.seed,
            ..SampleSpec::default()
        }),
    };
    let rows = sweep_rho(&cfg, &a.rho, &tensors, &noise, &search)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
    let text = String::from_utf8(bytes).expect("csv output is UTF-8");

    if let Some(out) = &a.out {
        write_file(out, &text)?;
        let mut m = RunManifest::new(
            "sweep",
            args,
            json!({ "system": cfg, "noise": noise, "search": search, "rho": a.rho }),
        );
        m.seed = Some(noise.seed);
        m.inputs = [a.input.iter().cloned().collect(), a.config.iter().cloned().collect(), a.noise.inputs()].concat();
        m.outputs = vec![out.clone()];
        m.write_beside(out)?;
    }
    write_stdout(stdout, &text)
}

#[derive(Debug, Serialize)]
struct DseSummary<'a> {
    candidates: usize,
    feasible: usize,
    best: &'a DseCandidate,
    pareto: &'a [DseCandidate],
}

fn dse(a: DseArgs, args: &[String], stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = system_config(a.config.as_deref())?;
    if let Some(b) = a.power_budget_mw {
        cfg.power_budget_mw = b;
    }
    if let Some(t) = a.latency_target_ns {
        cfg.latency_target_ns = Some(t);
    }
    cfg.validate()?;
    let outcome = explore_bandwidth(&cfg, &cfg.candidate_grid())?;
    let text = json_text(&DseSummary {
        candidates: outcome.candidates.len(),
        feasible: outcome.candidates.iter().filter(|c| c.is_feasible()).count(),
        best: &outcome.best,
        pareto: &outcome.pareto,
    })?;
    if let Some(out) = &a.out {
        write_file(out, &text)?;
        let mut m = RunManifest::new("dse", args, serde_json::to_value(&cfg)?);
        m.inputs = a.config.iter().cloned().collect();
        m.outputs = vec![out.clone()];
        m.write_beside(out)?;
    }
    write_stdout(stdout, &text)
}

#[derive(Debug, Serialize)]
struct InjectRow {
    name: String,
    seed: u64,
    inlier_codes: usize,
    changed: usize,
}

fn inject(a: InjectArgs, args: &[String], stdout: &mut dyn Write) -> Result<()> {
    let default_mlc = match a.mode {
        InjectMode::Code => 3,
        InjectMode::Cell => 2,
    };
    let noise = a.noise.resolve(default_mlc)?;
    if a.mode == InjectMode::Cell && noise.mlc_bits != 2 {
        return Err(hetq_core::Error::Config("cell mode needs a 2-bit MLC noise model".into()).into());
    }
    let mut tensors = load_qmq(&a.input)?;
    let mut rows = Vec::with_capacity(tensors.len());
    for (ordinal, q) in tensors.iter_mut().enumerate() {
        // Independent streams per tensor from the single base seed.
        let seed = noise.seed ^ ordinal as u64;
        let local = noise.clone().with_seed(seed);
        let noisy = match a.mode {
            InjectMode::Code => perturb_codes(&q.inlier_codes, QuantizerSpec::new(q.inlier_bits)?, &local),
            InjectMode::Cell => {
                if q.inlier_bits != 3 {
                    return Err(hetq_core::Error::Config(format!(
                        "cell mode packs 3-bit codes; tensor '{}' has {}-bit inliers",
                        q.name, q.inlier_bits
                    ))
                    .into());
                }
                perturb_cells_2bit(&q.inlier_codes, &local)?
            }
        };
        let clean = std::mem::replace(&mut q.inlier_codes, noisy);
        zero_codes_in_empty_channels(q);
        let changed = q.inlier_codes.iter().zip(&clean).filter(|(x, y)| x != y).count();
        rows.push(InjectRow {
            name: q.name.clone(),
            seed,
            inlier_codes: q.inlier_codes.len(),
            changed,
        });
    }
    save_qmq(&a.out, &tensors)?;

    let mut m = RunManifest::new("inject", args, json!({ "mode": a.mode, "noise": noise }));
    m.seed = Some(noise.seed);
    m.inputs = [vec![a.input.clone()], a.noise.inputs()].concat();
    m.outputs = vec![a.out.clone()];
    m.write_beside(&a.out)?;
    print_json(stdout, &rows)
}

/// Channels whose inlier scale is 0 hold no information; noise there is
/// reset so the artifact keeps its invariants.
fn zero_codes_in_empty_channels(q: &mut hetq_core::QuantizedTensor) {
    if q.inlier_scales.iter().all(|&s| s > 0.0) {
        return;
    }
    let stride: usize = q.dims[q.channel_axis + 1..].iter().product();
    let channels = q.channels();
    let mut next_outlier = q.outlier_indices.iter().peekable();
    let mut ii = 0;
    for flat in 0..q.len() {
        if next_outlier.peek() == Some(&&(flat as u64)) {
            next_outlier.next();
            continue;
        }
        if q.inlier_scales[(flat / stride) % channels] == 0.0 {
            q.inlier_codes[ii] = 0;
        }
        ii += 1;
    }
}

fn gen_sample(a: GenSampleArgs, args: &[String], stdout: &mut dyn Write) -> Result<()> {
    let spec = SampleSpec {
        tensors: a.tensors,
        rows: a.rows,
        cols: a.cols,
        std: a.std,
        seed: a.seed,
    };
    if spec.rows == 0 || spec.cols == 0 || !(spec.std.is_finite() && spec.std > 0.0) {
        return Err(hetq_core::Error::Config("rows, cols and std must be positive".into()).into());
    }
    save_qmt(&a.out, &gaussian_tensors(&spec))?;
    let mut m = RunManifest::new("gen-sample", args, serde_json::to_value(spec)?);
    m.seed = Some(spec.seed);
    m.outputs = vec![a.out.clone()];
    m.write_beside(&a.out)?;
    writeln!(stdout, "{}", a.out.display()).map_err(|e| Error::io("<stdout>", e))
}

fn default_config(a: DefaultConfigArgs, args: &[String], stdout: &mut dyn Write) -> Result<()> {
    let cfg = SystemConfig::default();
    let text = system_config_toml(&cfg);
    match &a.out {
        Some(out) => {
            write_file(out, &text)?;
            let mut m = RunManifest::new("default-config", args, serde_json::to_value(&cfg)?);
            m.outputs = vec![out.clone()];
            m.write_beside(out)?;
            Ok(())
        }
        None => write_stdout(stdout, &text),
    }
}

fn replay(a: ReplayArgs, stdout: &mut dyn Write) -> Result<()> {
    let m = RunManifest::load(&a.manifest)?;
    let cli = Cli::try_parse_from(std::iter::once("hetq").chain(m.args.iter().map(String::as_str)))
        .map_err(|e| Error::Usage(e.to_string()))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::Usage("a manifest cannot record another replay".into()));
    }
    execute(cli, &m.args, stdout)
}

fn json_text<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn print_json<T: Serialize + ?Sized>(stdout: &mut dyn Write, value: &T) -> Result<()> {
    write_stdout(stdout, &json_text(value)?)
}

fn write_stdout(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
