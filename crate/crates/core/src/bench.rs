//! Timing harness: training time against corpus size and against iteration
//! number, averaged over trials. Learners run one at a time.

use std::collections::BTreeMap;
use std::io::Write;

use crate::corpus::Corpus;
use crate::error::{Result, TblError};
use crate::learner::{train, Algo, TrainConfig};
use crate::predicates::Template;
use crate::rules::RuleList;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub algos: Vec<Algo>,
    /// Fractions of the corpus (by sequences), each in (0, 1].
    pub sizes: Vec<f64>,
    pub trials: usize,
    pub threshold: i64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            algos: vec![Algo::Regular, Algo::Fast, Algo::Ica],
            sizes: vec![0.125, 0.25, 0.5, 1.0],
            trials: 4,
            threshold: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub algo: Algo,
    /// Samples in the training corpus.
    pub size: usize,
    pub trial: usize,
    pub total_seconds: f64,
    /// `(iteration, seconds)`, 1-based.
    pub iterations: Vec<(usize, f64)>,
    /// Set when the learner failed; timings are then meaningless.
    pub failed: Option<String>,
    /// The learned rules of the first trial.
    pub rules: Option<RuleList>,
}

impl BenchRecord {
    pub fn ok(&self) -> bool {
        self.failed.is_none()
    }
}

/// Runs every (size, algo, trial) combination on prefixes of `corpus`, whose
/// initial classes must already be assigned.
pub fn run_bench(
    corpus: &Corpus,
    templates: &[Template],
    config: &BenchConfig,
) -> Result<Vec<BenchRecord>> {
    if config.trials == 0 {
        return Err(TblError::Config("at least one trial is required".into()));
    }
    if config.sizes.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
        return Err(TblError::Config("sizes must be fractions in (0, 1]".into()));
    }
    let train_config = TrainConfig::with_threshold(config.threshold);
    let mut out = Vec::new();
    for &frac in &config.sizes {
        let n_seq = ((corpus.num_sequences() as f64 * frac).round() as usize).max(1);
        let base = corpus.prefix(n_seq)?;
        for &algo in &config.algos {
            for trial in 0..config.trials {
                let mut c = base.clone();
                let record = match train(algo, &mut c, templates, &train_config) {
                    Ok((list, report)) => BenchRecord {
                        algo,
                        size: base.len(),
                        trial,
                        total_seconds: report.total_seconds,
                        iterations: report
                            .records
                            .iter()
                            .map(|r| (r.iteration, r.seconds))
                            .collect(),
                        failed: None,
                        rules: (trial == 0).then_some(list),
                    },
                    Err(e) => BenchRecord {
                        algo,
                        size: base.len(),
                        trial,
                        total_seconds: 0.0,
                        iterations: Vec::new(),
                        failed: Some(e.to_string()),
                        rules: None,
                    },
                };
                out.push(record);
            }
        }
    }
    Ok(out)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean total seconds of successful trials per (algo, size).
pub fn mean_totals(records: &[BenchRecord]) -> BTreeMap<(Algo, usize), f64> {
    let mut groups: BTreeMap<(Algo, usize), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.ok()) {
        groups.entry((r.algo, r.size)).or_default().push(r.total_seconds);
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| mean(v).map(|m| (k, m)))
        .collect()
}

/// Per-iteration seconds averaged over the successful trials of `algo` at
/// `size`.
pub fn mean_series(records: &[BenchRecord], algo: Algo, size: usize) -> Vec<(usize, f64)> {
    let mut by_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.ok() && r.algo == algo && r.size == size)
    {
        for &(i, s) in &r.iterations {
            by_iter.entry(i).or_default().push(s);
        }
    }
    by_iter
        .into_iter()
        .filter_map(|(i, v)| mean(v).map(|m| (i, m)))
        .collect()
}

/// Mean of the first and of the last quartile of a series.
pub fn quartile_means(seconds: &[f64]) -> Option<(f64, f64)> {
    let q = seconds.len() / 4;
    if q == 0 {
        return None;
    }
    Some((
        mean(seconds[..q].iter().copied())?,
        mean(seconds[seconds.len() - q..].iter().copied())?,
    ))
}

fn fmt_secs(x: f64) -> String {
    format!("{x:.6}")
}

/// `algo,size,trial,seconds`, one row per trial (NaN for failed ones)
/// followed by an `avg` row per (algo, size).
pub fn write_scalability_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algo", "size", "trial", "seconds"])?;
    let mut order: Vec<(Algo, usize)> = Vec::new();
    for r in records {
        if !order.contains(&(r.algo, r.size)) {
            order.push((r.algo, r.size));
        }
    }
    let averages = mean_totals(records);
    for (algo, size) in order {
        for r in records.iter().filter(|r| r.algo == algo && r.size == size) {
            let secs = if r.ok() {
                fmt_secs(r.total_seconds)
            } else {
                "NaN".to_string()
            };
            w.write_record([algo.name(), &size.to_string(), &r.trial.to_string(), &secs])?;
        }
        let avg = averages
            .get(&(algo, size))
            .map_or_else(|| "NaN".to_string(), |&m| fmt_secs(m));
        w.write_record([algo.name(), &size.to_string(), "avg", &avg])?;
    }
    w.flush()?;
    Ok(())
}

/// `algo,iteration,seconds` at the largest benchmarked size, each row the
/// mean over trials.
pub fn write_iteration_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algo", "iteration", "seconds"])?;
    let Some(size) = records.iter().map(|r| r.size).max() else {
        w.flush()?;
        return Ok(());
    };
    let mut algos: Vec<Algo> = Vec::new();
    for r in records {
        if !algos.contains(&r.algo) {
            algos.push(r.algo);
        }
    }
    for algo in algos {
        for (i, s) in mean_series(records, algo, size) {
            w.write_record([algo.name(), &i.to_string(), &fmt_secs(s)])?;
        }
    }
    w.flush()?;
    Ok(())
}
