//! Seeded experiment runs: train over looped passes, then a prequential
//! pass over the test split, with per-round loss curves and summaries.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::booster::{AuditedOracle, BoosterConfig, EdgeTracker, OnlineBooster, TopkAdaptive, TopkBbm};
use crate::data::{MultilabelDataset, StreamPlan};
use crate::error::{Error, Result};
use crate::loss::weighted_rank_loss;
use crate::randomize::{RandomizationScheme, SchemeKind};
use crate::weaklearn::{StumpConfig, StumpLearner};

pub const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    TopBbm,
    TopAda,
    FullBbm,
    FullAda,
}

impl Algorithm {
    pub fn is_full(self) -> bool {
        matches!(self, Algorithm::FullBbm | Algorithm::FullAda)
    }

    pub fn is_bbm(self) -> bool {
        matches!(self, Algorithm::TopBbm | Algorithm::FullBbm)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "topbbm" => Ok(Algorithm::TopBbm),
            "topada" => Ok(Algorithm::TopAda),
            "fullbbm" => Ok(Algorithm::FullBbm),
            "fullada" => Ok(Algorithm::FullAda),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::TopBbm => "topbbm",
            Algorithm::TopAda => "topada",
            Algorithm::FullBbm => "fullbbm",
            Algorithm::FullAda => "fullada",
        })
    }
}

/// Hyperparameters shipped per dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub learners: usize,
    pub rho: f64,
    pub loops: usize,
}

/// Tuned settings for the benchmark datasets. Full-information variants
/// reuse the learner count of their top-k counterpart with a single loop.
pub fn preset(dataset: &str, algo: Algorithm) -> Option<Preset> {
    let (bbm, ada) = match dataset.to_ascii_lowercase().as_str() {
        "emotions" => ((50, 0.02, 20), (50, 0.02, 10)),
        "scene" => ((50, 0.02, 10), (50, 0.04, 10)),
        "yeast" => ((30, 0.03, 10), (60, 0.04, 10)),
        "mediamill" => ((10, 0.02, 20), (10, 0.06, 20)),
        "m-reduced" | "mreduced" | "mediamill-reduced" => ((20, 0.04, 20), (60, 0.06, 20)),
        _ => return None,
    };
    let (learners, rho, loops) = if algo.is_bbm() { bbm } else { ada };
    Some(if algo.is_full() {
        Preset {
            learners,
            rho: 0.0,
            loops: 1,
        }
    } else {
        Preset { learners, rho, loops }
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    pub rho: f64,
    pub gamma: f64,
    pub learners: usize,
    pub loops: usize,
    pub seeds: Vec<u64>,
    pub scheme: SchemeKind,
    pub prob_clip: bool,
    pub grad_clip: bool,
    pub diagnostics: bool,
    /// Stop learning during the test pass.
    pub freeze: bool,
    pub stump: StumpConfig,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, preset: Preset, k: usize) -> Self {
        Self {
            algorithm,
            k,
            rho: preset.rho,
            gamma: DEFAULT_GAMMA,
            learners: preset.learners,
            loops: preset.loops,
            seeds: (0..10).collect(),
            scheme: SchemeKind::Uniform,
            prob_clip: true,
            grad_clip: true,
            diagnostics: false,
            freeze: false,
            stump: StumpConfig::default(),
        }
    }

    /// Effective `(k, ρ, probability clipping)` for `m` labels.
    /// Full-information variants reveal everything and never explore.
    pub fn effective(&self, m: usize) -> (usize, f64, bool) {
        if self.algorithm.is_full() {
            (m, 0.0, false)
        } else {
            (self.k, self.rho, self.prob_clip)
        }
    }

    pub fn scheme_for(&self, m: usize) -> Result<RandomizationScheme> {
        let (k, rho, _) = self.effective(m);
        RandomizationScheme::new(self.scheme, rho, k, m).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        self.scheme_for(m)?;
        if self.learners == 0 {
            return Err(Error::Config("need at least one weak learner".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("empty seed list".into()));
        }
        if self.algorithm.is_bbm() && !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1), got {}", self.gamma)));
        }
        StreamPlan::new(self.loops, true, 0)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub round: usize,
    pub avg_loss: f64,
    pub explored: bool,
    pub expert: usize,
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub curve: Vec<CurvePoint>,
    /// Per learner; `None` when no round had a mixed pair.
    pub edges: Vec<Option<f64>>,
    pub alphas: Vec<f64>,
    pub expert_weights: Vec<f64>,
    /// Per round and learner, `ĉ · h`. Filled only with diagnostics on.
    pub learner_losses: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub per_seed: Vec<SeedResult>,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub wall_seconds: f64,
}

/// Mean and sample standard deviation. One value has zero spread.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn check_compatible(train: &MultilabelDataset, test: &MultilabelDataset) -> Result<()> {
    if train.m() != test.m() {
        return Err(Error::Dimension {
            expected: train.m(),
            got: test.m(),
        });
    }
    if train.dim() != test.dim() {
        return Err(Error::Dimension {
            expected: train.dim(),
            got: test.dim(),
        });
    }
    Ok(())
}

fn build_booster(cfg: &ExperimentConfig, m: usize, dim: usize, seed: u64) -> Result<Box<dyn OnlineBooster>> {
    let (_, _, prob_clip) = cfg.effective(m);
    let config = BoosterConfig {
        num_learners: cfg.learners,
        scheme: cfg.scheme_for(m)?,
        gamma: cfg.gamma,
        prob_clip,
        grad_clip: cfg.grad_clip,
        diagnostics: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let learners = (0..cfg.learners)
        .map(|_| StumpLearner::new(m, dim, cfg.stump.clone(), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(if cfg.algorithm.is_bbm() {
        Box::new(TopkBbm::new(config, learners, m, seed)?)
    } else {
        Box::new(TopkAdaptive::new(config, learners, m, seed)?)
    })
}

/// One seed: `loops` shuffled training passes, then one pass over `test`.
pub fn run_seed(
    cfg: &ExperimentConfig,
    train: &MultilabelDataset,
    test: &MultilabelDataset,
    seed: u64,
) -> Result<SeedResult> {
    check_compatible(train, test)?;
    let m = train.m();
    cfg.validate(m)?;
    let mut booster = build_booster(cfg, m, train.dim(), seed)?;
    let plan = StreamPlan::new(cfg.loops, true, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    let train_order = plan.order(train.len());
    let n_train = train_order.len();
    let rows = train_order
        .into_iter()
        .map(|i| (train.features(i), train.labels(i)))
        .chain(test.rows());

    let mut edges = vec![EdgeTracker::default(); cfg.learners];
    let mut curve = Vec::with_capacity(n_train + test.len());
    let mut learner_losses = Vec::new();
    let mut total = 0.0;
    let mut train_total = 0.0;
    for (t, (x, relevant)) in rows.enumerate() {
        if t == n_train && cfg.freeze {
            booster.set_learning(false);
        }
        let mut oracle = AuditedOracle::new(relevant.clone());
        let record = booster.round(x, &mut oracle)?;
        let loss = weighted_rank_loss(&record.played_scores, relevant);
        total += loss;
        if t < n_train {
            train_total += loss;
        }
        if let Some(d) = &record.diagnostics {
            for (i, tracker) in edges.iter_mut().enumerate() {
                tracker.push(d.predictions[i].as_slice(), &d.prefix_scores[i], relevant);
            }
        }
        if cfg.diagnostics {
            learner_losses.push(record.learner_losses.clone());
        }
        curve.push(CurvePoint {
            round: t + 1,
            avg_loss: total / (t + 1) as f64,
            explored: record.explored,
            expert: record.expert,
        });
    }
    let test_total = total - train_total;
    Ok(SeedResult {
        seed,
        train_loss: train_total / n_train as f64,
        test_loss: test_total / test.len() as f64,
        curve,
        edges: edges.iter().map(|e| e.edge().ok()).collect(),
        alphas: booster.alphas().to_vec(),
        expert_weights: booster.expert_weights().to_vec(),
        learner_losses,
    })
}

/// Runs every seed in parallel; results come back in seed-list order.
pub fn run(cfg: &ExperimentConfig, train: &MultilabelDataset, test: &MultilabelDataset) -> Result<RunSummary> {
    check_compatible(train, test)?;
    cfg.validate(train.m())?;
    let start = Instant::now();
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, train, test, seed))
        .collect::<Result<Vec<_>>>()?;
    let (train_mean, train_std) = mean_std(&per_seed.iter().map(|r| r.train_loss).collect::<Vec<_>>());
    let (test_mean, test_std) = mean_std(&per_seed.iter().map(|r| r.test_loss).collect::<Vec<_>>());
    Ok(RunSummary {
        per_seed,
        train_mean,
        train_std,
        test_mean,
        test_std,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Curve CSV: `seed,round,avg_weighted_rank_loss,explored,expert_index`.
pub fn write_curves(summary: &RunSummary, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "round", "avg_weighted_rank_loss", "explored", "expert_index"])?;
    for r in &summary.per_seed {
        for p in &r.curve {
            w.write_record([
                r.seed.to_string(),
                p.round.to_string(),
                p.avg_loss.to_string(),
                u8::from(p.explored).to_string(),
                p.expert.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-round learner losses: `seed,round,learner,loss`.
pub fn write_diagnostics(summary: &RunSummary, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "round", "learner", "loss"])?;
    for r in &summary.per_seed {
        for (t, losses) in r.learner_losses.iter().enumerate() {
            for (i, l) in losses.iter().enumerate() {
                w.write_record([r.seed.to_string(), (t + 1).to_string(), (i + 1).to_string(), l.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Flat `key=value` record.
pub fn summary_text(cfg: &ExperimentConfig, dataset: &str, m: usize, summary: &RunSummary) -> String {
    let (k, rho, prob_clip) = cfg.effective(m);
    let mut out = String::new();
    let mut kv = |key: &str, value: String| out.push_str(&format!("{key}={value}\n"));
    kv("dataset", dataset.to_string());
    kv("algorithm", cfg.algorithm.to_string());
    kv("m", m.to_string());
    kv("k", k.to_string());
    kv("rho", rho.to_string());
    if cfg.algorithm.is_bbm() {
        kv("gamma", cfg.gamma.to_string());
    }
    kv("learners", cfg.learners.to_string());
    kv("loops", cfg.loops.to_string());
    kv("randomization", format!("{:?}", cfg.scheme).to_lowercase());
    kv("prob_clip", prob_clip.to_string());
    kv("grad_clip", cfg.grad_clip.to_string());
    kv("freeze", cfg.freeze.to_string());
    kv(
        "seeds",
        cfg.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    );
    kv("train_loss_mean", summary.train_mean.to_string());
    kv("train_loss_std", summary.train_std.to_string());
    kv("test_loss_mean", summary.test_mean.to_string());
    kv("test_loss_std", summary.test_std.to_string());
    kv("wall_seconds", format!("{:.3}", summary.wall_seconds));
    for r in &summary.per_seed {
        let s = r.seed;
        kv(&format!("seed.{s}.train_loss"), r.train_loss.to_string());
        kv(&format!("seed.{s}.test_loss"), r.test_loss.to_string());
        kv(
            &format!("seed.{s}.edges"),
            r.edges
                .iter()
                .map(|e| e.map_or_else(|| "NA".to_string(), |v| v.to_string()))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(&format!("seed.{s}.alphas"), join(&r.alphas));
        kv(&format!("seed.{s}.expert_weights"), join(&r.expert_weights));
    }
    out
}

/// Mean and std of the cumulative-average curve across seeds, per round.
pub fn curve_band(summary: &RunSummary) -> Vec<(usize, f64, f64)> {
    let rounds = summary.per_seed.iter().map(|r| r.curve.len()).min().unwrap_or(0);
    (0..rounds)
        .map(|t| {
            let values: Vec<f64> = summary.per_seed.iter().map(|r| r.curve[t].avg_loss).collect();
            let (mean, std) = mean_std(&values);
            (t + 1, mean, std)
        })
        .collect()
}

/// Runs once per `k` and writes `curve_k{k}.csv` with columns
/// `round,mean_avg_weighted_rank_loss,std`. Returns the summaries and paths.
pub fn sweep_k(
    cfg: &ExperimentConfig,
    train: &MultilabelDataset,
    test: &MultilabelDataset,
    ks: &[usize],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<(usize, RunSummary, PathBuf)>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut out = Vec::new();
    for &k in ks {
        let mut c = cfg.clone();
        c.k = k;
        let summary = run(&c, train, test)?;
        let path = out_dir.join(format!("curve_k{k}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["round", "mean_avg_weighted_rank_loss", "std"])?;
        for (round, mean, std) in curve_band(&summary) {
            w.write_record([round.to_string(), mean.to_string(), std.to_string()])?;
        }
        w.flush()?;
        out.push((k, summary, path));
    }
    Ok(out)
}

pub fn write_summary(text: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::RelevanceSet;
    use crate::data::Split;

    fn toy(n: usize, seed: u64, split: Split) -> MultilabelDataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
            let rel: Vec<usize> = (0..4).filter(|&l| x[l] > 0.5).collect();
            features.push(x);
            labels.push(RelevanceSet::from_indices(4, &rel).unwrap());
        }
        MultilabelDataset::new("toy", split, features, labels).unwrap()
    }

    fn cfg(algo: Algorithm) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(algo, Preset { learners: 3, rho: 0.1, loops: 2 }, 2);
        c.seeds = vec![1, 2];
        c
    }

    #[test]
    fn presets_follow_the_table() {
        assert_eq!(
            preset("yeast", Algorithm::TopBbm),
            Some(Preset { learners: 30, rho: 0.03, loops: 10 })
        );
        assert_eq!(
            preset("Yeast", Algorithm::TopAda),
            Some(Preset { learners: 60, rho: 0.04, loops: 10 })
        );
        assert_eq!(preset("emotions", Algorithm::TopBbm).unwrap().loops, 20);
        assert_eq!(preset("m-reduced", Algorithm::TopAda).unwrap().learners, 60);
        assert_eq!(preset("scene", Algorithm::FullAda).unwrap().loops, 1);
        assert_eq!(preset("scene", Algorithm::FullAda).unwrap().rho, 0.0);
        assert!(preset("unknown", Algorithm::TopAda).is_none());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [Algorithm::TopBbm, Algorithm::TopAda, Algorithm::FullBbm, Algorithm::FullAda] {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert!("opt".parse::<Algorithm>().is_err());
    }

    #[test]
    fn runs_produce_full_curves() {
        let train = toy(40, 1, Split::Train);
        let test = toy(15, 2, Split::Test);
        for algo in [Algorithm::TopBbm, Algorithm::TopAda, Algorithm::FullBbm, Algorithm::FullAda] {
            let s = run(&cfg(algo), &train, &test).unwrap();
            assert_eq!(s.per_seed.len(), 2);
            for r in &s.per_seed {
                assert_eq!(r.curve.len(), 80 + 15);
                assert!((0.0..=1.0).contains(&r.test_loss));
                if algo.is_full() {
                    assert!(r.curve.iter().all(|p| !p.explored));
                }
            }
        }
    }

    #[test]
    fn same_seed_same_curve() {
        let train = toy(30, 1, Split::Train);
        let test = toy(10, 2, Split::Test);
        let c = cfg(Algorithm::TopAda);
        let a = run_seed(&c, &train, &test, 7).unwrap();
        let b = run_seed(&c, &train, &test, 7).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.alphas, b.alphas);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let train = toy(10, 1, Split::Train);
        let mut c = cfg(Algorithm::TopBbm);
        c.k = 9;
        assert!(matches!(run(&c, &train, &train), Err(Error::Config(_))));
        let mut c = cfg(Algorithm::TopBbm);
        c.loops = 21;
        assert!(matches!(run(&c, &train, &train), Err(Error::Config(_))));
        let mut c = cfg(Algorithm::TopBbm);
        c.gamma = 0.0;
        assert!(matches!(run(&c, &train, &train), Err(Error::Config(_))));
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
