use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use topk_boost::data::{load, reduce_mediamill, write_csv, LabelSpec, MultilabelDataset, Split};
use topk_boost::experiment::{
    preset, run, summary_text, sweep_k, write_curves, write_diagnostics, write_summary, Algorithm, ExperimentConfig,
    Preset, DEFAULT_GAMMA,
};
use topk_boost::randomize::SchemeKind;

#[derive(Parser)]
#[command(name = "topk-boost", version, about = "Online multilabel ranking boosters under top-k feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on looped passes of a dataset, then evaluate on its test split.
    Run(RunArgs),
    /// Repeat a run for several k and write one mean/std curve per k.
    SweepK {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated values of k.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
    },
    /// Draw the 1500/500 Mediamill subsample.
    Reduce {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 101)]
        labels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Convert an ARFF file to canonical CSV plus a `.meta` sidecar.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        labels: LabelArgs,
        #[arg(long, value_enum, default_value_t = SplitArg::Train)]
        split: SplitArg,
    },
}

#[derive(Args, Clone)]
struct LabelArgs {
    /// Number of trailing label attributes in ARFF input. Inferred for the
    /// benchmark datasets from the file name.
    #[arg(long)]
    labels: Option<usize>,
    /// Label attribute names in ARFF input, comma-separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "labels")]
    label_names: Option<Vec<String>>,
}

#[derive(Copy, Clone, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Copy, Clone, ValueEnum)]
enum AlgoArg {
    Topbbm,
    Topada,
    Fullbbm,
    Fullada,
}

#[derive(Copy, Clone, ValueEnum)]
enum RandArg {
    Uniform,
    Singleswap,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    /// Training split (ARFF or canonical CSV).
    #[arg(long)]
    dataset: PathBuf,
    /// Test split (ARFF or canonical CSV).
    #[arg(long)]
    test: PathBuf,
    /// Preset name for defaults. Inferred from the dataset file name.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long)]
    learners: Option<usize>,
    #[arg(long)]
    loops: Option<usize>,
    /// A count (`10` runs seeds 0..10) or a comma-separated list (`3,8,` or `1,2`).
    #[arg(long, default_value = "10")]
    seeds: String,
    #[arg(long = "rand", value_enum, default_value_t = RandArg::Uniform)]
    randomization: RandArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Stop learning during the test pass.
    #[arg(long)]
    freeze: bool,
    #[arg(long)]
    no_prob_clip: bool,
    #[arg(long)]
    no_grad_clip: bool,
    /// Also write per-round learner losses.
    #[arg(long)]
    diagnostics: bool,
    #[command(flatten)]
    labels: LabelArgs,
}

/// Bad flags or flag combinations; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

const BENCHMARKS: [(&str, usize); 5] = [
    ("emotions", 6),
    ("scene", 6),
    ("yeast", 14),
    ("mediamill", 101),
    ("m-reduced", 101),
];

/// Benchmark name a file belongs to, from its stem (`yeast-train.arff`).
fn benchmark_of(path: &Path) -> Option<&'static str> {
    let stem = path.file_stem()?.to_str()?.to_ascii_lowercase();
    let stem = stem.replace('_', "-");
    BENCHMARKS
        .iter()
        .map(|(name, _)| *name)
        .filter(|name| stem.starts_with(name) || (*name == "m-reduced" && stem.starts_with("mreduced")))
        .max_by_key(|name| name.len())
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if !text.contains(',') {
        let count: u64 = text.parse().map_err(|_| usage(format!("bad --seeds `{text}`")))?;
        if count == 0 {
            return Err(usage("--seeds count must be positive"));
        }
        return Ok((0..count).collect());
    }
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| usage(format!("bad seed `{s}`"))))
        .collect()
}

fn label_spec(args: &LabelArgs, path: &Path) -> Result<LabelSpec> {
    if let Some(names) = &args.label_names {
        return Ok(LabelSpec::Names(names.clone()));
    }
    if let Some(n) = args.labels {
        return Ok(LabelSpec::Count(n));
    }
    match benchmark_of(path).and_then(|b| BENCHMARKS.iter().find(|(n, _)| *n == b)) {
        Some((_, m)) => Ok(LabelSpec::Count(*m)),
        None => Ok(LabelSpec::Count(0)),
    }
}

fn load_split(path: &Path, labels: &LabelArgs, split: Split) -> Result<MultilabelDataset> {
    let is_arff = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("arff"));
    let spec = label_spec(labels, path)?;
    if is_arff && matches!(spec, LabelSpec::Count(0)) {
        return Err(usage(format!(
            "cannot tell how many labels {} has; pass --labels or --label-names",
            path.display()
        )));
    }
    load(path, &spec, split).with_context(|| format!("loading {}", path.display()))
}

fn build_config(args: &RunArgs) -> Result<(ExperimentConfig, String)> {
    let algorithm = match args.algo {
        AlgoArg::Topbbm => Algorithm::TopBbm,
        AlgoArg::Topada => Algorithm::TopAda,
        AlgoArg::Fullbbm => Algorithm::FullBbm,
        AlgoArg::Fullada => Algorithm::FullAda,
    };
    let name = match &args.preset {
        Some(p) => p.to_ascii_lowercase(),
        None => benchmark_of(&args.dataset).unwrap_or("custom").to_string(),
    };
    let base = preset(&name, algorithm);
    if args.preset.is_some() && base.is_none() {
        return Err(usage(format!("unknown preset `{name}`")));
    }
    let pick = |flag: Option<usize>, from: fn(&Preset) -> usize, what: &str| -> Result<usize> {
        flag.or(base.as_ref().map(from))
            .ok_or_else(|| usage(format!("no preset for `{name}`; pass --{what}")))
    };
    let learners = pick(args.learners, |p| p.learners, "learners")?;
    let loops = pick(args.loops, |p| p.loops, "loops")?;
    let rho = match (args.rho, &base, algorithm.is_full()) {
        (Some(r), _, _) => r,
        (None, _, true) => 0.0,
        (None, Some(p), false) => p.rho,
        (None, None, false) => return Err(usage(format!("no preset for `{name}`; pass --rho"))),
    };
    let mut cfg = ExperimentConfig::new(algorithm, Preset { learners, rho, loops }, args.k);
    cfg.gamma = args.gamma;
    cfg.seeds = parse_seeds(&args.seeds)?;
    cfg.scheme = match args.randomization {
        RandArg::Uniform => SchemeKind::Uniform,
        RandArg::Singleswap => SchemeKind::SingleSwap,
    };
    cfg.prob_clip = !args.no_prob_clip;
    cfg.grad_clip = !args.no_grad_clip;
    cfg.diagnostics = args.diagnostics;
    cfg.freeze = args.freeze;
    Ok((cfg, name))
}

fn prepare(args: &RunArgs) -> Result<(ExperimentConfig, String, MultilabelDataset, MultilabelDataset)> {
    let (cfg, name) = build_config(args)?;
    let train = load_split(&args.dataset, &args.labels, Split::Train)?;
    let test = load_split(&args.test, &args.labels, Split::Test)?;
    cfg.validate(train.m()).map_err(|e| usage(e.to_string()))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    Ok((cfg, name, train, test))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let (cfg, name, train, test) = prepare(args)?;
    let summary = run(&cfg, &train, &test)?;
    write_curves(&summary, args.out.join("curves.csv"))?;
    if cfg.diagnostics {
        write_diagnostics(&summary, args.out.join("diagnostics.csv"))?;
    }
    let text = summary_text(&cfg, &name, train.m(), &summary);
    write_summary(&text, args.out.join("summary.txt"))?;
    println!(
        "{} on {}: test loss {:.4} ± {:.4} over {} seeds ({:.1}s); results in {}",
        cfg.algorithm,
        name,
        summary.test_mean,
        summary.test_std,
        cfg.seeds.len(),
        summary.wall_seconds,
        args.out.display()
    );
    Ok(())
}

fn cmd_sweep(args: &RunArgs, ks: &[usize]) -> Result<()> {
    let (cfg, name, train, test) = prepare(args)?;
    for &k in ks {
        let mut c = cfg.clone();
        c.k = k;
        c.validate(train.m()).map_err(|e| usage(e.to_string()))?;
    }
    for (k, summary, path) in sweep_k(&cfg, &train, &test, ks, &args.out)? {
        let mut c = cfg.clone();
        c.k = k;
        write_summary(
            &summary_text(&c, &name, train.m(), &summary),
            args.out.join(format!("summary_k{k}.txt")),
        )?;
        println!(
            "k={k}: test loss {:.4} ± {:.4}; curve {}",
            summary.test_mean,
            summary.test_std,
            path.display()
        );
    }
    Ok(())
}

fn cmd_reduce(train: &Path, test: &Path, labels: usize, seed: u64, out: &Path) -> Result<()> {
    let spec = LabelArgs {
        labels: Some(labels),
        label_names: None,
    };
    let full_train = load_split(train, &spec, Split::Train)?;
    let full_test = load_split(test, &spec, Split::Test)?;
    let (tr, te) = reduce_mediamill(&full_train, &full_test, seed)?;
    fs::create_dir_all(out)?;
    write_csv(&tr, out.join("m-reduced-train.csv"))?;
    write_csv(&te, out.join("m-reduced-test.csv"))?;
    let (_, mean, _) = tr.cardinality();
    println!(
        "wrote {} train and {} test rows to {} (mean labels per train row {:.2})",
        tr.len(),
        te.len(),
        out.display(),
        mean
    );
    Ok(())
}

fn cmd_convert(input: &Path, output: &Path, labels: &LabelArgs, split: SplitArg) -> Result<()> {
    let split = match split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let ds = load_split(input, labels, split)?;
    write_csv(&ds, output)?;
    let (min, mean, max) = ds.cardinality();
    println!(
        "{}: {} rows, dim {}, m {}, labels per row {min}/{mean:.2}/{max}",
        ds.name,
        ds.len(),
        ds.dim(),
        ds.m()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::SweepK { run, ks } => cmd_sweep(&run, &ks),
        Command::Reduce {
            train,
            test,
            labels,
            seed,
            out,
        } => cmd_reduce(&train, &test, labels, seed, &out),
        Command::Convert {
            input,
            output,
            labels,
            split,
        } => cmd_convert(&input, &output, &labels, split),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config = err.downcast_ref::<UsageError>().is_some()
                || matches!(err.downcast_ref::<topk_boost::Error>(), Some(topk_boost::Error::Config(_)));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_parse_as_count_or_list() {
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4,9").unwrap(), vec![4, 9]);
        assert_eq!(parse_seeds("7,").unwrap(), vec![7]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn benchmark_names_come_from_file_stems() {
        assert_eq!(benchmark_of(Path::new("data/yeast-train.arff")), Some("yeast"));
        assert_eq!(benchmark_of(Path::new("Emotions-test.arff")), Some("emotions"));
        assert_eq!(benchmark_of(Path::new("m-reduced-train.csv")), Some("m-reduced"));
        assert_eq!(benchmark_of(Path::new("mediamill-train.arff")), Some("mediamill"));
        assert_eq!(benchmark_of(Path::new("other.arff")), None);
    }
}
