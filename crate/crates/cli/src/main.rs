use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{info, warn};

use relhyper::analysis::{compare_medians, emit_kde_data, offset_report, query_point_diagnostics};
use relhyper::config::{RunConfig, VsmSpec};
use relhyper::dataset::{parse_bats_directory, parse_bats_file, resolve, write_drop_report};
use relhyper::eval::{aggregate, evaluate_dataset, ReportMeta};
use relhyper::relmodels::{fit, rank};
use relhyper::report::{
    write_f1_table, write_metrics_csv, write_metrics_json, write_offsets_json, FORMAT_VERSION,
};
use relhyper::vsm::{load_vsm_with, write_cache, CaseMode, VsmFormat};
use relhyper::{Error, ModelConfig, ModelKind, ResolvedCategory, VectorSpaceModel};

/// Relation discovery in word-embedding spaces.
#[derive(Parser)]
#[command(name = "relhyper", version, about)]
struct Cli {
    /// Run configuration (flat key = value file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long, global = true, env = "RELHYPER_THREADS")]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Drop target-class classification from every model.
    #[arg(long, global = true)]
    no_classifier: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leave-one-out evaluation of every configured model on every VSM.
    Eval,
    /// Train on a pairs file and rank the vocabulary for one source token.
    Query(QueryArgs),
    /// Mean pairwise cosine of relation offsets, per category and pooled.
    AnalyzeOffsets {
        /// Also report a random token-pair baseline over this many pairs.
        #[arg(long)]
        random_baseline: Option<usize>,
    },
    /// Query-point distance and cosine records for plotting.
    Diagnose,
    /// Convert a VSM file to the native binary cache.
    Cache {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "glove_text")]
        format: VsmFormat,
    },
}

#[derive(clap::Args)]
struct QueryArgs {
    /// VSM file; defaults to the first VSM of the config.
    #[arg(long)]
    vsm: Option<PathBuf>,
    #[arg(long)]
    format: Option<VsmFormat>,
    #[arg(long)]
    case_mode: Option<CaseMode>,
    /// Training pairs in BATS format.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value = "svmcos")]
    model: ModelKind,
    #[arg(long)]
    source: String,
    #[arg(short, default_value_t = 10)]
    k: usize,
    /// Write the trained model as JSON.
    #[arg(long)]
    dump_model: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Files written by a command; removed again if the command fails.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Outcome<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_owned(), source: e })?;
        Ok(Outputs { dir: dir.to_owned(), created_dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> relhyper::Result<()>) -> Outcome {
        let path = self.dir.join(name);
        let io_err = |e: io::Error| Error::Io { path: path.clone(), source: e };
        let file = File::create(&path).map_err(io_err)?;
        self.written.push(path.clone());
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(io_err)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Token-safe file name fragment.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' })
        .collect()
}

fn load_config(cli: &Cli) -> Outcome<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = (t > 0).then_some(t);
    }
    if cli.no_classifier {
        cfg.models = cfg.models.into_iter().map(ModelConfig::without_classifier).collect();
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not size thread pool: {e}");
        }
    }
}

fn load(spec: &VsmSpec) -> Outcome<VectorSpaceModel> {
    let start = Instant::now();
    let vsm = load_vsm_with(&spec.path, spec.format, spec.case_mode)?;
    info!(
        "loaded {} ({} tokens, d={}, {} duplicates dropped) in {:.1}s",
        vsm.name(),
        vsm.len(),
        vsm.dim(),
        vsm.duplicates_dropped(),
        start.elapsed().as_secs_f64()
    );
    Ok(vsm)
}

fn need_vsms(cfg: &RunConfig) -> Outcome {
    if cfg.vsms.is_empty() {
        return Err(usage("no VSM configured (set vsm.path in the config)"));
    }
    let mut names: Vec<String> = cfg
        .vsms
        .iter()
        .map(|v| v.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(usage("configured VSM files must have distinct names"));
    }
    Ok(())
}

fn load_categories(cfg: &RunConfig) -> Outcome<Vec<relhyper::RelationCategory>> {
    let dir = cfg.bats_dir.as_ref().ok_or_else(|| usage("no dataset configured (set bats.dir)"))?;
    let cats = parse_bats_directory(dir)?;
    info!(
        "{} categories, {} pairs",
        cats.len(),
        cats.iter().map(|c| c.pairs.len()).sum::<usize>()
    );
    Ok(cats)
}

fn resolve_all(cats: &[relhyper::RelationCategory], vsm: &VectorSpaceModel) -> Vec<ResolvedCategory> {
    let resolved: Vec<ResolvedCategory> = cats.iter().map(|c| resolve(c, vsm)).collect();
    let dropped: usize = resolved.iter().map(|r| r.dropped.len()).sum();
    if dropped > 0 {
        warn!("{}: {dropped} pair(s) dropped as out of vocabulary", vsm.name());
    }
    resolved
}

/// Config echo and format version for artifacts that cannot embed them.
fn write_run_manifest(out: &mut Outputs, command: &str, cfg: &RunConfig) -> Outcome {
    let manifest = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "command": command,
        "config": cfg.echo(),
        "artifacts": out.written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy()).collect::<Vec<_>>(),
    });
    out.write(&format!("run_{command}.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::InvalidInput(e.to_string()))
    })
}

fn cmd_eval(cfg: &RunConfig, out: &mut Outputs) -> Outcome {
    need_vsms(cfg)?;
    let cats = load_categories(cfg)?;
    let eval = cfg.eval_config();
    let mut reports = Vec::new();
    for spec in &cfg.vsms {
        let vsm = load(spec)?;
        let resolved = resolve_all(&cats, &vsm);
        let vname = slug(vsm.name());
        out.write(&format!("drops_{vname}.csv"), |w| write_drop_report(w, &resolved))?;
        for model in &cfg.models {
            let start = Instant::now();
            let evals = evaluate_dataset(&resolved, &vsm, model, &eval)?;
            let meta = ReportMeta {
                model: model.label(),
                vsm: vsm.name().to_owned(),
                k_eval: cfg.k_eval,
                k_sens: cfg.k_sens,
                seed: cfg.seed,
                config: cfg.echo(),
            };
            let report = aggregate(&evals, meta)?;
            let stem = format!("metrics_{vname}_{}", slug(&model.label()));
            out.write(&format!("{stem}.json"), |w| write_metrics_json(&report, w))?;
            out.write(&format!("{stem}.csv"), |w| write_metrics_csv(&report, w))?;
            println!(
                "{}\t{}\tF1 {:.4}\tsensitivity {:.4}\tMAP {:.4}\t({} queries, {:.1}s)",
                vsm.name(),
                model.label(),
                report.dataset.f1,
                report.dataset.sensitivity,
                report.dataset.map,
                report.dataset.n_queries,
                start.elapsed().as_secs_f64()
            );
            reports.push(report);
        }
    }
    out.write("f1_table.csv", |w| write_f1_table(&reports, w))?;
    write_run_manifest(out, "eval", cfg)
}

fn cmd_analyze_offsets(cfg: &RunConfig, out: &mut Outputs, random: Option<usize>) -> Outcome {
    need_vsms(cfg)?;
    let cats = load_categories(cfg)?;
    for spec in &cfg.vsms {
        let vsm = load(spec)?;
        let resolved = resolve_all(&cats, &vsm);
        let report = offset_report(&resolved, &vsm, random.map(|n| (n, cfg.seed)))?;
        let echo = cfg.echo();
        out.write(&format!("offsets_{}.json", slug(vsm.name())), |w| {
            write_offsets_json(&report, &echo, w)
        })?;
        println!(
            "{}\tpooled mean offset cosine {:.4} over {} categories",
            vsm.name(),
            report.dataset.mean_pairwise_cosine,
            report.per_category.len()
        );
    }
    write_run_manifest(out, "analyze-offsets", cfg)
}

fn cmd_diagnose(cfg: &RunConfig, out: &mut Outputs) -> Outcome {
    need_vsms(cfg)?;
    let cats = load_categories(cfg)?;
    for spec in &cfg.vsms {
        let vsm = load(spec)?;
        let resolved = resolve_all(&cats, &vsm);
        let mut records = Vec::new();
        for c in resolved.iter().filter(|c| c.resolved_pairs.len() >= 2) {
            records.extend(query_point_diagnostics(c, &vsm, &cfg.models, cfg.n_nontargets, cfg.seed)?);
        }
        out.write(&format!("kde_{}.csv", slug(vsm.name())), |w| emit_kde_data(&records, w))?;
        if let [a, b, ..] = cfg.models.as_slice() {
            let cmp = compare_medians(&records, &a.label(), &b.label())?;
            let n = cmp.len().max(1) as f64;
            let share = |f: fn(&relhyper::analysis::MedianComparison) -> bool| {
                cmp.iter().filter(|c| f(c)).count() as f64 / n
            };
            println!(
                "{}\t{} vs {} over {} categories: further from targets {:.2}, higher target cosine {:.2}, lower non-target cosine {:.2}",
                vsm.name(),
                a.label(),
                b.label(),
                cmp.len(),
                share(|c| c.further()),
                share(|c| c.closer_in_angle()),
                share(|c| c.fewer_confusers()),
            );
        }
    }
    write_run_manifest(out, "diagnose", cfg)
}

fn cmd_query(cli: &Cli, cfg: &RunConfig, args: &QueryArgs) -> Outcome {
    if args.k == 0 {
        return Err(usage("-k must be positive"));
    }
    let mut spec = match (&args.vsm, cfg.vsms.first()) {
        (Some(p), _) => VsmSpec { path: p.clone(), format: VsmFormat::GloveText, case_mode: CaseMode::default() },
        (None, Some(s)) => s.clone(),
        (None, None) => return Err(usage("no VSM given (use --vsm or a config with vsm.path)")),
    };
    if let Some(f) = args.format {
        spec.format = f;
    }
    if let Some(m) = args.case_mode {
        spec.case_mode = m;
    }
    let vsm = load(&spec)?;
    if !vsm.contains(&args.source) {
        return Err(Error::Oov(args.source.clone()).into());
    }
    let category = parse_bats_file(&args.pairs)?;
    let resolved = resolve(&category, &vsm);
    for (pair, reason) in &resolved.dropped {
        warn!("dropped training pair {} ({reason})", pair.source);
    }
    let mut model_cfg = cfg
        .models
        .iter()
        .find(|m| m.kind == args.model)
        .cloned()
        .unwrap_or_else(|| ModelConfig::new(args.model));
    if cli.no_classifier {
        model_cfg.use_target_classifier = false;
    }
    model_cfg.seed = cfg.seed;
    let model = fit(&resolved.resolved_pairs, &vsm, &model_cfg, None)?;
    if let Some(path) = &args.dump_model {
        let json = serde_json::to_string_pretty(&model).map_err(|e| Error::InvalidInput(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| Error::Io { path: path.clone(), source: e })?;
    }
    let ranked = rank(&model, &args.source, &vsm, args.k.min(vsm.len()))?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for (i, r) in ranked.iter().enumerate() {
        writeln!(w, "{}\t{}\t{}", i + 1, r.token, relhyper::report::fmt_sig9(r.score))
            .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
    }
    Ok(())
}

fn cmd_cache(input: &Path, output: &Path, format: VsmFormat) -> Outcome {
    let start = Instant::now();
    let vsm = load_vsm_with(input, format, CaseMode::default())?;
    if let Err(e) = write_cache(&vsm, output) {
        let _ = fs::remove_file(output);
        return Err(e.into());
    }
    println!(
        "N={} d={} elapsed={:.3}s -> {}",
        vsm.len(),
        vsm.dim(),
        start.elapsed().as_secs_f64(),
        output.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    init_threads(cfg.threads);
    match &cli.command {
        Command::Query(args) => return cmd_query(cli, &cfg, args),
        Command::Cache { input, output, format } => return cmd_cache(input, output, *format),
        _ => {}
    }
    let mut out = Outputs::new(&cfg.out)?;
    let result = match &cli.command {
        Command::Eval => cmd_eval(&cfg, &mut out),
        Command::AnalyzeOffsets { random_baseline } => cmd_analyze_offsets(&cfg, &mut out, *random_baseline),
        Command::Diagnose => cmd_diagnose(&cfg, &mut out),
        Command::Query(_) | Command::Cache { .. } => unreachable!("handled above"),
    };
    if result.is_err() {
        out.discard();
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numeric(_) => 4,
                _ => 3,
            })
        }
    }
}
