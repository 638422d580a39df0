//! `fnirs-hblr` command-line front end.
//!
//! Exit status: 0 on success, 2 for usage, configuration, parse and I/O
//! errors, 1 for failures during computation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fnirs_hblr::baselines::{
    fit_params, pooled, read_baseline_model, select_and_fit, write_baseline_model, BaselineKind, BaselineModelFile,
    BaselineParams, Kernel, Penalty,
};
use fnirs_hblr::config::RunConfig;
use fnirs_hblr::dataset::{generate_cohort, read_sessions, read_truth, write_sessions, write_truth};
use fnirs_hblr::eval::{cluster_recovery, run_experiment, write_fold_csv, write_report, ModelSpec};
use fnirs_hblr::features::{extract_sessions, group_by_task, read_features, write_features, FeatureVector, NormalizationStats};
use fnirs_hblr::hblr::{self, read_model, write_membership_csv, write_model, HblrHyperParams};
use fnirs_hblr::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "fnirs-hblr", version, about = "Pain detection from windowed hemodynamic signals")]
struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Primary output file of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Progress messages on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort (sessions JSON-lines + ground-truth clusters).
    Synth(SynthArgs),
    /// Window sessions and write the feature table.
    Extract(ExtractArgs),
    /// Train one model on a feature table.
    Train(TrainArgs),
    /// Cross-validate models on a feature table.
    Eval(EvalArgs),
    /// Export task memberships of an HBLR model.
    Clusters(ClustersArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    n_tasks: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Ground-truth map; defaults to `truth.json` next to the sessions file.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Sessions file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    window_s: Option<f64>,
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long)]
    voices: Option<usize>,
    #[arg(long)]
    n_no_pain: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Hblr,
    LogregL1,
    LogregL2,
    SvmLinear,
    SvmRbf,
}

impl ModelArg {
    fn baseline(self) -> Option<BaselineKind> {
        match self {
            ModelArg::Hblr => None,
            ModelArg::LogregL1 => Some(BaselineKind::LogregL1),
            ModelArg::LogregL2 => Some(BaselineKind::LogregL2),
            ModelArg::SvmLinear => Some(BaselineKind::SvmLinear),
            ModelArg::SvmRbf => Some(BaselineKind::SvmRbf),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct HblrFlags {
    /// Truncation level of the stick-breaking prior.
    #[arg(long)]
    k: Option<usize>,
    /// Shape of the Gamma prior on the concentration.
    #[arg(long)]
    tau10: Option<f64>,
    /// Rate of the Gamma prior on the concentration.
    #[arg(long)]
    tau20: Option<f64>,
    /// Variance of the Gaussian base measure.
    #[arg(long)]
    prior_var: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Score unseen tasks with the expected stick weights.
    #[arg(long)]
    cold_start: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Feature table.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hblr")]
    model: ModelArg,
    #[command(flatten)]
    hblr: HblrFlags,
    /// Regularization strength; selected by inner cross-validation if absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// SVM box constraint; selected by inner cross-validation if absent.
    #[arg(long)]
    c: Option<f64>,
    /// RBF width; selected by inner cross-validation if absent.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Feature table.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Models to compare; repeat or comma-separate.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["hblr", "logreg-l2"])]
    model: Vec<ModelArg>,
    #[command(flatten)]
    hblr: HblrFlags,
    #[arg(long)]
    folds: Option<usize>,
    /// Per-fold CSV; defaults to `folds.csv` next to the report.
    #[arg(long)]
    fold_csv: Option<PathBuf>,
    /// Membership CSV of an HBLR fit on all data; defaults to `memberships.csv` next to the report.
    #[arg(long)]
    memberships: Option<PathBuf>,
    /// Skip per-task class balancing.
    #[arg(long)]
    no_balance: bool,
}

#[derive(Args, Debug)]
struct ClustersArgs {
    /// HBLR model file.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Ground-truth map; prints the adjusted Rand index when given.
    #[arg(long)]
    truth: Option<PathBuf>,
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    verbose: bool,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out_or(&self, default: &Path) -> PathBuf {
        self.out.clone().unwrap_or_else(|| default.to_path_buf())
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })
        }
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn flush(mut w: impl Write, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn apply_hblr_flags(hp: &mut HblrHyperParams, flags: &HblrFlags) -> Result<()> {
    if let Some(k) = flags.k {
        hp.k = k;
    }
    if let Some(v) = flags.tau10 {
        hp.tau10 = v;
    }
    if let Some(v) = flags.tau20 {
        hp.tau20 = v;
    }
    if let Some(v) = flags.prior_var {
        hp.prior_var = v;
    }
    if let Some(v) = flags.max_sweeps {
        hp.max_sweeps = v;
    }
    if flags.cold_start {
        hp.cold_start = true;
    }
    hp.validate()
}

fn cmd_synth(ctx: &mut Ctx, args: &SynthArgs) -> Result<()> {
    if let Some(n) = args.n_tasks {
        ctx.cfg.synth.n_tasks = n;
    }
    if let Some(c) = args.clusters {
        ctx.cfg.synth.n_ground_truth_clusters = c;
    }
    if let Some(s) = args.noise_sigma {
        ctx.cfg.synth.noise_sigma = s;
    }
    let synth = ctx.cfg.synth_config();
    let cohort = generate_cohort(&synth)?;
    let sessions_path = ctx.out_or(&ctx.cfg.paths.sessions);
    let truth_path = match (&args.truth, &ctx.out) {
        (Some(t), _) => t.clone(),
        (None, Some(out)) => sibling(out, "truth.json"),
        (None, None) => ctx.cfg.paths.truth.clone(),
    };
    ensure_parent(&sessions_path)?;
    ensure_parent(&truth_path)?;
    write_sessions(&sessions_path, &cohort.sessions)?;
    write_truth(&truth_path, &cohort.truth)?;
    println!(
        "tasks {} windows/task {} channels {} clusters {}",
        synth.n_tasks,
        2 * synth.windows_per_task_per_class,
        synth.channels,
        synth.n_ground_truth_clusters
    );
    ctx.log(format!("wrote {} and {}", sessions_path.display(), truth_path.display()));
    Ok(())
}

fn cmd_extract(ctx: &mut Ctx, args: &ExtractArgs) -> Result<()> {
    if let Some(v) = args.window_s {
        ctx.cfg.window_s = v;
    }
    if let Some(v) = args.w0 {
        ctx.cfg.w0 = v;
    }
    if let Some(v) = args.voices {
        ctx.cfg.voices = v;
    }
    if args.n_no_pain.is_some() {
        ctx.cfg.n_no_pain = args.n_no_pain;
    }
    ctx.cfg.validate()?;
    let input = args.input.clone().unwrap_or_else(|| ctx.cfg.paths.sessions.clone());
    let sessions = read_sessions(&input)?;
    ctx.log(format!("read {} sessions from {}", sessions.len(), input.display()));
    let extractor = ctx.cfg.extractor()?;
    let vectors = extract_sessions(&sessions, &extractor, ctx.cfg.window_s, ctx.cfg.n_no_pain, ctx.cfg.seed)?;
    let out = ctx.out_or(&ctx.cfg.paths.features);
    ensure_parent(&out)?;
    write_features(&out, &vectors)?;
    println!("windows {} features {}", vectors.len(), vectors.first().map_or(0, FeatureVector::dim));
    Ok(())
}

fn normalized(vectors: &[FeatureVector]) -> Result<(NormalizationStats, Vec<FeatureVector>)> {
    let stats = NormalizationStats::fit(vectors)?;
    let rows = vectors.iter().map(|v| stats.apply(v)).collect::<Result<_>>()?;
    Ok((stats, rows))
}

fn load_features(ctx: &Ctx, input: &Option<PathBuf>) -> Result<Vec<FeatureVector>> {
    let path = input.clone().unwrap_or_else(|| ctx.cfg.paths.features.clone());
    let vectors = read_features(&path)?;
    if vectors.is_empty() {
        return Err(Error::Data(format!("{} contains no feature rows", path.display())));
    }
    ctx.log(format!("read {} feature rows from {}", vectors.len(), path.display()));
    Ok(vectors)
}

fn cmd_train(ctx: &mut Ctx, args: &TrainArgs) -> Result<()> {
    let mut hp = ctx.cfg.hblr.clone();
    apply_hblr_flags(&mut hp, &args.hblr)?;
    let vectors = load_features(ctx, &args.input)?;
    let (stats, rows) = normalized(&vectors)?;
    let out = ctx.out_or(&ctx.cfg.paths.model);
    ensure_parent(&out)?;
    match args.model.baseline() {
        None => {
            hp.seed = ctx.cfg.seed;
            let model = hblr::fit(&group_by_task(&rows), &hp)?.with_normalizer(stats);
            ctx.log(format!("bound {} after {} sweeps", model.state.bound, model.bound_trace.len() - 1));
            write_model(&out, &model)?;
            println!("model hblr k {} tasks {} converged {}", model.k(), model.task_ids.len(), model.converged);
        }
        Some(kind) => {
            let (x, y) = pooled(&rows);
            let dim = x.first().map_or(0, Vec::len);
            let fixed = match kind {
                BaselineKind::LogregL1 | BaselineKind::LogregL2 => args.lambda.map(|lambda| BaselineParams::Logreg {
                    penalty: if kind == BaselineKind::LogregL1 { Penalty::L1 } else { Penalty::L2 },
                    lambda,
                }),
                BaselineKind::SvmLinear => args.c.map(|c| BaselineParams::Svm { kernel: Kernel::Linear, c }),
                BaselineKind::SvmRbf => match (args.c, args.gamma) {
                    (Some(c), Some(gamma)) => Some(BaselineParams::Svm { kernel: Kernel::Rbf { gamma }, c }),
                    (Some(c), None) => Some(BaselineParams::Svm { kernel: Kernel::Rbf { gamma: 1.0 / dim.max(1) as f64 }, c }),
                    (None, Some(_)) => return Err(Error::Argument("--gamma requires --c".into())),
                    (None, None) => None,
                },
            };
            let (model, params) = match fixed {
                Some(p) => (fit_params(&x, &y, p)?, p),
                None => select_and_fit(kind, &x, &y, &ctx.cfg.baselines, ctx.cfg.seed)?,
            };
            ctx.log(format!("selected {params:?}"));
            let file = BaselineModelFile {
                format_version: fnirs_hblr::baselines::MODEL_FORMAT_VERSION,
                model_type: kind,
                params,
                model,
                normalizer: Some(stats),
            };
            write_baseline_model(&out, &file)?;
            println!("model {}", kind.name());
        }
    }
    Ok(())
}

fn cmd_eval(ctx: &mut Ctx, args: &EvalArgs) -> Result<()> {
    if let Some(k) = args.folds {
        if k < 2 {
            return Err(Error::Argument(format!("--folds must be at least 2, got {k}")));
        }
        ctx.cfg.folds = k;
    }
    if args.no_balance {
        ctx.cfg.balance = false;
    }
    apply_hblr_flags(&mut ctx.cfg.hblr, &args.hblr)?;
    let vectors = load_features(ctx, &args.input)?;
    let sets = group_by_task(&vectors);
    let mut models = Vec::new();
    for m in &args.model {
        let spec = match m.baseline() {
            None => ModelSpec::Hblr { hyper: ctx.cfg.hblr.clone() },
            Some(kind) => ModelSpec::Baseline { kind, grid: ctx.cfg.baselines.clone() },
        };
        if !models.contains(&spec) {
            models.push(spec);
        }
    }
    let report_path = ctx.out_or(&ctx.cfg.paths.report);
    let fold_csv = args.fold_csv.clone().unwrap_or_else(|| sibling(&report_path, "folds.csv"));
    let mut report = run_experiment(&sets, &models, &ctx.cfg.experiment_options())?;

    if models.iter().any(|m| matches!(m, ModelSpec::Hblr { .. })) {
        let path = args.memberships.clone().unwrap_or_else(|| sibling(&report_path, "memberships.csv"));
        let (_, rows) = normalized(&vectors)?;
        let hp = HblrHyperParams { seed: ctx.cfg.seed, ..ctx.cfg.hblr.clone() };
        let model = hblr::fit(&group_by_task(&rows), &hp)?;
        let (ids, phi) = model.membership_matrix();
        let mut w = create(&path)?;
        write_membership_csv(&mut w, &ids, &phi).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        flush(w, &path)?;
        report.membership_csv = Some(path.display().to_string());
    }
    report.config = Some(serde_json::to_value(&ctx.cfg).map_err(|e| Error::Serialize(e.to_string()))?);

    ensure_parent(&report_path)?;
    write_report(&report_path, &report)?;
    let mut w = create(&fold_csv)?;
    write_fold_csv(&mut w, &report)?;
    flush(w, &fold_csv)?;

    println!("{:<12} {:>9} {:>9} {:>9} {:>9}", "model", "accuracy", "precision", "recall", "f1");
    for s in &report.summaries {
        println!(
            "{:<12} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            s.model, s.mean.accuracy, s.mean.precision, s.mean.recall, s.mean.f1
        );
    }
    ctx.log(format!("wrote {} and {}", report_path.display(), fold_csv.display()));
    Ok(())
}

fn cmd_clusters(ctx: &mut Ctx, args: &ClustersArgs) -> Result<()> {
    let path = args.model_file.clone().unwrap_or_else(|| ctx.cfg.paths.model.clone());
    if read_baseline_model(&path).is_ok() {
        return Err(Error::Argument(format!("{} is not an HBLR model", path.display())));
    }
    let model = read_model(&path)?;
    let (ids, rows) = model.membership_matrix();
    let out = ctx.out_or(&ctx.cfg.paths.memberships);
    let mut w = create(&out)?;
    write_membership_csv(&mut w, &ids, &rows).map_err(|e| Error::Io { path: out.display().to_string(), source: e })?;
    flush(w, &out)?;
    println!("tasks {} clusters {}", ids.len(), model.k());
    if let Some(t) = &args.truth {
        let truth = read_truth(t)?;
        println!("ARI {}", cluster_recovery(&ids, &rows, &truth)?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let mut ctx = Ctx { cfg, out: cli.out, verbose: cli.verbose };
    match &cli.command {
        Command::Synth(a) => cmd_synth(&mut ctx, a),
        Command::Extract(a) => cmd_extract(&mut ctx, a),
        Command::Train(a) => cmd_train(&mut ctx, a),
        Command::Eval(a) => cmd_eval(&mut ctx, a),
        Command::Clusters(a) => cmd_clusters(&mut ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
