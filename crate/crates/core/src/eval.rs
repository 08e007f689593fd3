//! Rule-list application and evaluation metrics.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::corpus::Corpus;
use crate::error::{Result, TblError};
use crate::learner::{apply_simultaneous, find_matches};
use crate::predicates::{template_of, ClassView};
use crate::rules::RuleList;
use crate::symbols::Sym;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApplyMode {
    /// Every rule in learned order, each applied simultaneously.
    Sequential,
    /// One pass; a sample is changed by the first rule that applies to it in
    /// the initial context and is frozen afterwards.
    DecisionList,
}

impl FromStr for ApplyMode {
    type Err = TblError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(ApplyMode::Sequential),
            "decision-list" => Ok(ApplyMode::DecisionList),
            other => Err(TblError::Config(format!("unknown apply mode `{other}`"))),
        }
    }
}

/// Applies `rules` to `corpus`, which must already carry its initial
/// classes. Returns the positions changed by each rule.
pub fn apply_rule_list(
    corpus: &mut Corpus,
    rules: &RuleList,
    mode: ApplyMode,
) -> Result<Vec<Vec<u32>>> {
    if !corpus.is_assigned() {
        return Err(TblError::Unassigned);
    }
    let templates = rules.templates_for(corpus.schema())?;
    let mut changed = Vec::with_capacity(rules.len());
    let initial: Vec<Sym> = match mode {
        ApplyMode::DecisionList => {
            corpus.clear_commitments();
            corpus.current_classes().to_vec()
        }
        ApplyMode::Sequential => Vec::new(),
    };
    for learned in &rules.rules {
        let Some(rule) = learned.resolve(corpus) else {
            changed.push(Vec::new());
            continue;
        };
        let template = template_of(&templates, &rule.predicate)?;
        match mode {
            ApplyMode::Sequential => {
                let c = apply_simultaneous(corpus, template, &rule);
                changed.push(c.into_iter().map(|(g, _)| g).collect());
            }
            ApplyMode::DecisionList => {
                let matches = {
                    let view = ClassView::with_classes(corpus, &initial);
                    find_matches(&view, template, &rule, |g| !corpus.is_committed(g))
                };
                for &g in &matches {
                    corpus.commit(g as usize);
                    corpus.set_current(g as usize, rule.target);
                }
                corpus.add_class(rule.target);
                changed.push(matches);
            }
        }
    }
    Ok(changed)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub label: String,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

/// Decodes B-X / I-X / O tags. An I-X that does not continue a chunk of the
/// same label opens a new one.
pub fn chunks<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Chunk>> {
    let mut out: Vec<Chunk> = Vec::new();
    let mut open = false;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        if tag == "O" {
            open = false;
            continue;
        }
        let (kind, label) = match tag.split_once('-') {
            Some((k @ ("B" | "I"), l)) if !l.is_empty() => (k, l),
            _ => return Err(TblError::MalformedTag(tag.to_string())),
        };
        let continues = kind == "I" && open && out.last().is_some_and(|c| c.label == label);
        if continues {
            out.last_mut().unwrap().end = i;
        } else {
            out.push(Chunk {
                label: label.to_string(),
                start: i,
                end: i,
            });
        }
        open = true;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalReport {
    Accuracy {
        correct: u64,
        total: u64,
        accuracy: f64,
    },
    Chunk {
        correct: u64,
        predicted: u64,
        gold: u64,
        precision: f64,
        recall: f64,
        f1: f64,
    },
    SignTest {
        a_only: u64,
        b_only: u64,
        p_value: f64,
    },
}

impl EvalReport {
    pub fn metric(&self) -> &'static str {
        match self {
            EvalReport::Accuracy { .. } => "accuracy",
            EvalReport::Chunk { .. } => "chunk",
            EvalReport::SignTest { .. } => "signtest",
        }
    }

    /// Machine-readable `key=value` lines.
    pub fn key_values(&self) -> String {
        let mut lines = vec![format!("metric={}", self.metric())];
        match *self {
            EvalReport::Accuracy {
                correct,
                total,
                accuracy,
            } => {
                lines.push(format!("correct={correct}"));
                lines.push(format!("total={total}"));
                lines.push(format!("accuracy={accuracy}"));
            }
            EvalReport::Chunk {
                correct,
                predicted,
                gold,
                precision,
                recall,
                f1,
            } => {
                lines.push(format!("correct={correct}"));
                lines.push(format!("predicted={predicted}"));
                lines.push(format!("gold={gold}"));
                lines.push(format!("precision={precision}"));
                lines.push(format!("recall={recall}"));
                lines.push(format!("f1={f1}"));
            }
            EvalReport::SignTest {
                a_only,
                b_only,
                p_value,
            } => {
                lines.push(format!("a_only={a_only}"));
                lines.push(format!("b_only={b_only}"));
                lines.push(format!("p_value={p_value}"));
            }
        }
        lines.join("\n") + "\n"
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EvalReport::Accuracy {
                correct,
                total,
                accuracy,
            } => write!(f, "accuracy: {:.2}% ({correct}/{total})", accuracy * 100.0),
            EvalReport::Chunk {
                correct,
                predicted,
                gold,
                precision,
                recall,
                f1,
            } => write!(
                f,
                "chunks: precision {:.2}% recall {:.2}% F {:.2} ({correct} correct, {predicted} predicted, {gold} gold)",
                precision * 100.0,
                recall * 100.0,
                f1 * 100.0
            ),
            EvalReport::SignTest {
                a_only,
                b_only,
                p_value,
            } => write!(
                f,
                "sign test: A alone correct {a_only}, B alone correct {b_only}, two-sided p = {p_value:.6}"
            ),
        }
    }
}

/// Tag sequences, one inner vector per sentence.
pub type TagSeqs = Vec<Vec<String>>;

fn tags(corpus: &Corpus, classes: &[Sym]) -> TagSeqs {
    corpus
        .sequences()
        .map(|s| {
            s.samples()
                .map(|x| corpus.symbols().resolve(classes[x.global_index()]).to_string())
                .collect()
        })
        .collect()
}

/// Current classes of `corpus` as strings.
pub fn predicted_tags(corpus: &Corpus) -> Result<TagSeqs> {
    if !corpus.is_assigned() {
        return Err(TblError::Unassigned);
    }
    Ok(tags(corpus, corpus.current_classes()))
}

/// True classes of `corpus` as strings.
pub fn gold_tags(corpus: &Corpus) -> TagSeqs {
    tags(corpus, corpus.true_classes())
}

fn check_aligned(a: &TagSeqs, b: &TagSeqs) -> Result<()> {
    if a.len() != b.len() {
        return Err(TblError::Misaligned(format!(
            "{} vs {} sequences",
            a.len(),
            b.len()
        )));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.len() != y.len() {
            return Err(TblError::Misaligned(format!(
                "sequence {i} has {} vs {} samples",
                x.len(),
                y.len()
            )));
        }
    }
    Ok(())
}

pub fn accuracy(corpus: &Corpus) -> Result<EvalReport> {
    if corpus.is_empty() {
        return Err(TblError::EmptyCorpus);
    }
    let errors = corpus.error_count()?;
    let total = corpus.len() as u64;
    let correct = total - errors as u64;
    Ok(EvalReport::Accuracy {
        correct,
        total,
        accuracy: correct as f64 / total as f64,
    })
}

pub fn accuracy_tags(predicted: &TagSeqs, gold: &TagSeqs) -> Result<EvalReport> {
    check_aligned(predicted, gold)?;
    let total: u64 = gold.iter().map(|s| s.len() as u64).sum();
    if total == 0 {
        return Err(TblError::EmptyCorpus);
    }
    let correct = predicted
        .iter()
        .flatten()
        .zip(gold.iter().flatten())
        .filter(|(p, g)| p == g)
        .count() as u64;
    Ok(EvalReport::Accuracy {
        correct,
        total,
        accuracy: correct as f64 / total as f64,
    })
}

/// Chunk precision, recall and F over the current classes of `predicted`
/// against the true classes of `gold`.
pub fn chunk_f1(predicted: &Corpus, gold: &Corpus) -> Result<EvalReport> {
    chunk_f1_tags(&predicted_tags(predicted)?, &gold_tags(gold))
}

pub fn chunk_f1_tags(predicted: &TagSeqs, gold: &TagSeqs) -> Result<EvalReport> {
    check_aligned(predicted, gold)?;
    let (mut correct, mut n_pred, mut n_gold) = (0u64, 0u64, 0u64);
    for (p, g) in predicted.iter().zip(gold) {
        let pc = chunks(p)?;
        let gc = chunks(g)?;
        n_pred += pc.len() as u64;
        n_gold += gc.len() as u64;
        // both lists are sorted by start and non-overlapping
        let (mut i, mut j) = (0, 0);
        while i < pc.len() && j < gc.len() {
            match pc[i].start.cmp(&gc[j].start) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if pc[i] == gc[j] {
                        correct += 1;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(correct, n_pred);
    let recall = ratio(correct, n_gold);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport::Chunk {
        correct,
        predicted: n_pred,
        gold: n_gold,
        precision,
        recall,
        f1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SignLevel {
    #[default]
    Token,
    /// A sentence counts as correct only if every token is.
    Sentence,
}

impl FromStr for SignLevel {
    type Err = TblError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(SignLevel::Token),
            "sentence" => Ok(SignLevel::Sentence),
            other => Err(TblError::Config(format!("unknown sign-test level `{other}`"))),
        }
    }
}

/// Two-sided exact binomial p-value (success probability 1/2) for `wins_a`
/// against `wins_b`.
pub fn sign_test_p(wins_a: u64, wins_b: u64) -> f64 {
    let n = wins_a + wins_b;
    if n == 0 {
        return 1.0;
    }
    let k = wins_a.min(wins_b);
    let tail = if n <= 1000 {
        // C(n, i) * 2^-n with exact powers of two
        let scale = 0.5f64.powi(n as i32);
        let mut c = 1.0f64;
        let mut sum = 0.0f64;
        for i in 0..=k {
            if i > 0 {
                c = c * (n - i + 1) as f64 / i as f64;
            }
            sum += c * scale;
        }
        sum
    } else {
        let ln2 = std::f64::consts::LN_2;
        let mut ln_c = 0.0f64;
        let mut terms = Vec::with_capacity(k as usize + 1);
        for i in 0..=k {
            if i > 0 {
                ln_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
            }
            terms.push(ln_c - n as f64 * ln2);
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max.exp() * terms.iter().map(|t| (t - max).exp()).sum::<f64>()
    };
    (2.0 * tail).min(1.0)
}

pub fn sign_test_tags(
    a: &TagSeqs,
    b: &TagSeqs,
    gold: &TagSeqs,
    level: SignLevel,
) -> Result<EvalReport> {
    check_aligned(a, gold)?;
    check_aligned(b, gold)?;
    let (mut a_only, mut b_only) = (0u64, 0u64);
    let mut tally = |ra: bool, rb: bool| match (ra, rb) {
        (true, false) => a_only += 1,
        (false, true) => b_only += 1,
        _ => {}
    };
    for ((sa, sb), sg) in a.iter().zip(b).zip(gold) {
        match level {
            SignLevel::Token => {
                for ((x, y), z) in sa.iter().zip(sb).zip(sg) {
                    tally(x == z, y == z);
                }
            }
            SignLevel::Sentence => tally(sa == sg, sb == sg),
        }
    }
    Ok(EvalReport::SignTest {
        a_only,
        b_only,
        p_value: sign_test_p(a_only, b_only),
    })
}

/// Sign test of two systems' current classes against `gold`'s true classes.
pub fn sign_test(a: &Corpus, b: &Corpus, gold: &Corpus, level: SignLevel) -> Result<EvalReport> {
    sign_test_tags(&predicted_tags(a)?, &predicted_tags(b)?, &gold_tags(gold), level)
}

/// Reads a tagged corpus (features, true class, predicted class per line)
/// into `(gold, predicted)` tag sequences.
pub fn read_tagged<R: BufRead>(reader: R) -> Result<(TagSeqs, TagSeqs)> {
    let (mut gold, mut pred) = (TagSeqs::new(), TagSeqs::new());
    let (mut g, mut p) = (Vec::new(), Vec::new());
    let mut width = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !g.is_empty() {
                gold.push(std::mem::take(&mut g));
                pred.push(std::mem::take(&mut p));
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(TblError::Parse {
                line: idx + 1,
                msg: "tagged lines need a true and a predicted class".into(),
            });
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(TblError::RaggedRow {
                    line: idx + 1,
                    expected: w,
                    found: fields.len(),
                })
            }
            _ => {}
        }
        g.push(fields[fields.len() - 2].to_string());
        p.push(fields[fields.len() - 1].to_string());
    }
    if !g.is_empty() {
        gold.push(g);
        pred.push(p);
    }
    if gold.is_empty() {
        return Err(TblError::EmptyInput);
    }
    Ok((gold, pred))
}
