//! The reference greedy learner, the independence/commitment (ICA) learner
//! and simultaneous rule application.

use std::cmp::Ordering;
use std::time::Instant;

use rustc_hash::FxHashMap;

use crate::corpus::Corpus;
use crate::error::{Result, TblError};
use crate::predicates::{for_each_candidate, template_of, ClassView, Predicate, Template, Values};
use crate::rules::{ErrorTracker, IterationRecord, LearnedRule, RuleList, TrainReport};
use crate::rulestore::{can_compete, rank_cmp, rule_key, Counts, Rule, RuleStore};
use crate::symbols::Sym;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Training stops once the best rule scores below this.
    pub threshold: i64,
    /// Recount every rule from scratch after each iteration and fail on any
    /// difference (incremental learner only).
    pub check_oracle: bool,
    pub max_iterations: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            threshold: 1,
            check_oracle: false,
            max_iterations: None,
        }
    }
}

impl TrainConfig {
    pub fn with_threshold(threshold: i64) -> Self {
        TrainConfig {
            threshold,
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.threshold < 1 {
            return Err(TblError::Config(format!(
                "threshold must be at least 1, got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    pub(crate) fn exhausted(&self, iterations: usize) -> bool {
        self.max_iterations.is_some_and(|m| iterations >= m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algo {
    Regular,
    Fast,
    Ica,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Regular => "regular",
            Algo::Fast => "fast",
            Algo::Ica => "ica",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = TblError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(Algo::Regular),
            "fast" => Ok(Algo::Fast),
            "ica" => Ok(Algo::Ica),
            other => Err(TblError::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs the named learner.
pub fn train(
    algo: Algo,
    corpus: &mut Corpus,
    templates: &[Template],
    config: &TrainConfig,
) -> Result<(RuleList, TrainReport)> {
    match algo {
        Algo::Regular => train_regular(corpus, templates, config),
        Algo::Fast => crate::fast::train_fast(corpus, templates, config),
        Algo::Ica => train_ica(corpus, templates, config),
    }
}

/// Positions where `rule` applies under `view`: the predicate holds and the
/// class differs from the target.
pub(crate) fn find_matches(
    view: &ClassView<'_>,
    template: &Template,
    rule: &Rule,
    include: impl Fn(usize) -> bool,
) -> Vec<u32> {
    let mut out = Vec::new();
    for_each_candidate(view.corpus(), template, &rule.predicate, |g| {
        if include(g) && view.class_at(g) != rule.target && view.holds_at(&rule.predicate, template, g) {
            out.push(g as u32);
        }
        true
    });
    out
}

/// Applies `rule` everywhere it matches in the pre-application state, then
/// changes all matched samples at once. Returns `(position, old class)` in
/// ascending position order.
pub(crate) fn apply_simultaneous(
    corpus: &mut Corpus,
    template: &Template,
    rule: &Rule,
) -> Vec<(u32, Sym)> {
    let matches = find_matches(&ClassView::current(corpus), template, rule, |_| true);
    set_classes(corpus, &matches, rule.target)
}

/// Sets `target` at every position in `matches` (ascending), returning
/// `(position, old class)` pairs.
pub(crate) fn set_classes(corpus: &mut Corpus, matches: &[u32], target: Sym) -> Vec<(u32, Sym)> {
    let mut changed = Vec::with_capacity(matches.len());
    for &g in matches {
        changed.push((g, corpus.current(g as usize)));
        corpus.set_current(g as usize, target);
    }
    corpus.add_class(target);
    changed
}

/// Public form of simultaneous application; returns the changed positions.
pub fn apply_rule_simultaneous(
    corpus: &mut Corpus,
    templates: &[Template],
    rule: &Rule,
) -> Result<Vec<usize>> {
    if !corpus.is_assigned() {
        return Err(TblError::Unassigned);
    }
    let template = template_of(templates, &rule.predicate)?;
    Ok(apply_simultaneous(corpus, template, rule)
        .into_iter()
        .map(|(g, _)| g as usize)
        .collect())
}

/// Appends iterations to a rule list and report.
pub(crate) struct Recorder {
    pub list: RuleList,
    pub report: TrainReport,
    pub errors: ErrorTracker,
    start: Instant,
}

impl Recorder {
    pub fn new(algo: Algo, corpus: &Corpus, templates: &[Template], config: &TrainConfig) -> Result<Self> {
        let errors = ErrorTracker::new(corpus)?;
        Ok(Recorder {
            list: RuleList::new(algo.name(), corpus.schema(), templates, config.threshold),
            report: TrainReport {
                algo: algo.name().to_string(),
                initial_errors: errors.errors,
                ..Default::default()
            },
            errors,
            start: Instant::now(),
        })
    }

    pub fn setup_done(&mut self) {
        self.report.setup_seconds = self.start.elapsed().as_secs_f64();
    }

    pub fn iterations(&self) -> usize {
        self.list.rules.len()
    }

    pub fn record(
        &mut self,
        corpus: &Corpus,
        rule: &Rule,
        counts: Counts,
        changed: &[(u32, Sym)],
        seconds: f64,
    ) {
        for &(g, old) in changed {
            let g = g as usize;
            self.errors.update(corpus.truth(g), old, corpus.current(g));
        }
        let learned = LearnedRule::from_rule(rule, counts, corpus.symbols());
        self.report.records.push(IterationRecord {
            iteration: self.list.rules.len() + 1,
            rule: learned.key(),
            good: learned.good,
            bad: learned.bad,
            f: learned.f,
            changed: changed.iter().map(|&(g, _)| g).collect(),
            errors_after: self.errors.errors,
            seconds,
        });
        self.list.rules.push(learned);
    }

    pub fn finish(mut self) -> (RuleList, TrainReport) {
        self.report.final_errors = self.errors.errors;
        self.report.total_seconds = self.start.elapsed().as_secs_f64();
        (self.list, self.report)
    }
}

struct Best {
    predicate: Predicate,
    target: Sym,
    good: u32,
    bad: u32,
    key: Option<String>,
}

impl Best {
    fn f(&self) -> i64 {
        self.good as i64 - self.bad as i64
    }
}

/// Bad count of `(predicate, target)` by a pass over the whole corpus,
/// abandoned once `good - bad` drops below `limit`.
fn scan_bad_full(
    view: &ClassView<'_>,
    template: &Template,
    predicate: &Predicate,
    target: Sym,
    good: u32,
    limit: i64,
) -> Option<u32> {
    let corpus = view.corpus();
    let mut bad = 0u32;
    for g in 0..corpus.len() {
        let c = view.class_at(g);
        if c == target || c != corpus.truth(g) || !view.holds_at(predicate, template, g) {
            continue;
        }
        bad += 1;
        if (good as i64) - (bad as i64) < limit {
            return None;
        }
    }
    Some(bad)
}

/// Greedy TBL that regenerates candidates every iteration.
///
/// Each iteration counts good over the wrong samples, then computes bad for
/// candidates in descending good order, skipping a candidate as soon as it
/// falls behind the best found so far.
pub fn train_regular(
    corpus: &mut Corpus,
    templates: &[Template],
    config: &TrainConfig,
) -> Result<(RuleList, TrainReport)> {
    config.validate()?;
    let mut rec = Recorder::new(Algo::Regular, corpus, templates, config)?;
    rec.setup_done();
    let threshold = config.threshold;
    let mut values = Values::new();
    while rec.errors.errors > 0 && !config.exhausted(rec.iterations()) {
        let started = Instant::now();
        let view = ClassView::current(corpus);
        let mut goods: FxHashMap<(Predicate, Sym), u32> = FxHashMap::default();
        for g in 0..corpus.len() {
            let t = corpus.truth(g);
            if corpus.current(g) == t {
                continue;
            }
            for tpl in templates {
                view.fill(g, tpl, &mut values);
                let p = Predicate {
                    template_id: tpl.id(),
                    values: values.clone(),
                };
                *goods.entry((p, t)).or_insert(0) += 1;
            }
        }
        let mut candidates: Vec<((Predicate, Sym), u32)> = goods.into_iter().collect();
        candidates.sort_unstable_by(|a, b| b.1.cmp(&a.1));

        let mut best: Option<Best> = None;
        for ((predicate, target), good) in candidates {
            let summary = best.as_ref().map(|b| (b.f(), b.good));
            if !can_compete(good, summary, threshold) {
                break;
            }
            let limit = match summary {
                Some((f, _)) if f >= threshold => f,
                _ => threshold,
            };
            let template = &templates[predicate.template_id as usize];
            let Some(bad) = scan_bad_full(&view, template, &predicate, target, good, limit) else {
                continue;
            };
            let f = good as i64 - bad as i64;
            let better = match best.as_mut() {
                None => true,
                Some(b) => {
                    let order = (f, good).cmp(&(b.f(), b.good)).reverse();
                    match order {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => {
                            let symbols = corpus.symbols();
                            let key = rule_key(
                                predicate.template_id,
                                predicate.values.iter().map(|&v| symbols.resolve(v)),
                                symbols.resolve(target),
                            );
                            let best_key = b.key.get_or_insert_with(|| {
                                rule_key(
                                    b.predicate.template_id,
                                    b.predicate.values.iter().map(|&v| symbols.resolve(v)),
                                    symbols.resolve(b.target),
                                )
                            });
                            rank_cmp((f, good, &key), (f, good, best_key)) == Ordering::Less
                        }
                    }
                }
            };
            if better {
                best = Some(Best {
                    predicate,
                    target,
                    good,
                    bad,
                    key: None,
                });
            }
        }
        let Some(best) = best.filter(|b| b.f() >= threshold) else {
            break;
        };
        let rule = Rule {
            predicate: best.predicate,
            target: best.target,
        };
        let template = &templates[rule.predicate.template_id as usize];
        let changed = apply_simultaneous(corpus, template, &rule);
        let counts = Counts {
            good: best.good,
            bad: best.bad,
            bad_known: true,
        };
        rec.record(corpus, &rule, counts, &changed, started.elapsed().as_secs_f64());
    }
    Ok(rec.finish())
}

/// Learner under sample independence and rule commitment.
///
/// Counts are computed once on the initial state. Each selected rule
/// commits every uncommitted sample it applies to (judged in the initial
/// context); committed samples are removed from all counts and never
/// change again.
pub fn train_ica(
    corpus: &mut Corpus,
    templates: &[Template],
    config: &TrainConfig,
) -> Result<(RuleList, TrainReport)> {
    config.validate()?;
    let mut rec = Recorder::new(Algo::Ica, corpus, templates, config)?;
    corpus.clear_commitments();
    let initial: Vec<Sym> = corpus.current_classes().to_vec();
    let mut store = RuleStore::init_counts(corpus, templates)?;
    store.set_floor(config.threshold);
    rec.setup_done();
    let threshold = config.threshold;
    let mut values = Values::new();
    while !config.exhausted(rec.iterations()) {
        let started = Instant::now();
        // every count is known, so selection never rescans the corpus
        let Some((id, _)) = store.best_rule(corpus, templates, threshold)? else {
            break;
        };
        let rule = store.rule(id);
        let counts = store.counts(id);
        let template = &templates[rule.predicate.template_id as usize];
        let matches = {
            let view = ClassView::with_classes(corpus, &initial);
            find_matches(&view, template, &rule, |g| !corpus.is_committed(g))
        };
        let mut changed = Vec::with_capacity(matches.len());
        for &g in &matches {
            let g = g as usize;
            changed.push((g as u32, corpus.current(g)));
            corpus.commit(g);
            corpus.set_current(g, rule.target);
        }
        corpus.add_class(rule.target);
        let view = ClassView::with_classes(corpus, &initial);
        for &g in &matches {
            let g = g as usize;
            let (c0, t) = (initial[g], corpus.truth(g));
            for tpl in templates {
                view.fill(g, tpl, &mut values);
                if c0 != t {
                    store.add_good(tpl.id(), &values, t, -1, corpus.symbols())?;
                } else {
                    store.add_bad_for_pred(tpl.id(), &values, c0, -1)?;
                }
            }
        }
        rec.record(corpus, &rule, counts, &changed, started.elapsed().as_secs_f64());
    }
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Schema;
    use crate::predicates::parse_templates;

    fn corpus(text: &str) -> Corpus {
        Corpus::parse(text, Schema::parse("word,guess*,tag").unwrap()).unwrap()
    }

    fn classes(c: &Corpus) -> Vec<&str> {
        c.current_classes()
            .iter()
            .map(|&s| c.symbols().resolve(s))
            .collect()
    }

    #[test]
    fn simultaneous_application_uses_pre_state() {
        let mut c = corpus("a A A\nb A B\nc A B\n");
        let t = parse_templates("class@-1", c.schema()).unwrap();
        let a = c.symbols().get("A").unwrap();
        let b = c.symbols().get("B").unwrap();
        let rule = Rule {
            predicate: Predicate {
                template_id: 0,
                values: [a].into_iter().collect(),
            },
            target: b,
        };
        let changed = apply_rule_simultaneous(&mut c, &t, &rule).unwrap();
        assert_eq!(changed, [1, 2]);
        assert_eq!(classes(&c), ["A", "B", "B"]);
    }

    #[test]
    fn application_skips_samples_already_at_target() {
        let mut c = corpus("a B B\nb B B\n");
        let t = parse_templates("word@0", c.schema()).unwrap();
        let rule = Rule {
            predicate: Predicate {
                template_id: 0,
                values: [c.symbols().get("a").unwrap()].into_iter().collect(),
            },
            target: c.symbols().get("B").unwrap(),
        };
        assert!(apply_rule_simultaneous(&mut c, &t, &rule).unwrap().is_empty());
    }

    #[test]
    fn static_rule_changes_matches_minus_target() {
        let mut c = corpus("x A A\ny B A\nx B A\nx C A\n");
        let t = parse_templates("word@0", c.schema()).unwrap();
        let rule = Rule {
            predicate: Predicate {
                template_id: 0,
                values: [c.symbols().get("x").unwrap()].into_iter().collect(),
            },
            target: c.symbols().get("A").unwrap(),
        };
        assert_eq!(apply_rule_simultaneous(&mut c, &t, &rule).unwrap(), [2, 3]);
    }

    #[test]
    fn perfect_corpus_learns_nothing() {
        for algo in [Algo::Regular, Algo::Fast, Algo::Ica] {
            let mut c = corpus("a A A\nb B B\n");
            let t = parse_templates("word@0", c.schema()).unwrap();
            let (list, report) = train(algo, &mut c, &t, &TrainConfig::default()).unwrap();
            assert!(list.is_empty());
            assert_eq!(report.final_errors, 0);
        }
    }

    #[test]
    fn threshold_zero_is_rejected() {
        let mut c = corpus("a A A\n");
        let t = parse_templates("word@0", c.schema()).unwrap();
        assert!(train_regular(&mut c, &t, &TrainConfig::with_threshold(0)).is_err());
    }

    #[test]
    fn regular_fixes_simple_errors() {
        let mut c = corpus("dog V N\ndog V N\ndog N N\ncat V V\n");
        let t = parse_templates("word@0", c.schema()).unwrap();
        let (list, report) = train_regular(&mut c, &t, &TrainConfig::default()).unwrap();
        assert_eq!(list.rules[0].key(), "0|dog => N");
        assert_eq!((list.rules[0].good, list.rules[0].bad), (2, 0));
        assert_eq!(report.final_errors, 0);
        assert_eq!(report.records[0].changed, [0, 1]);
    }

    #[test]
    fn ica_commits_each_sample_once() {
        let mut c = corpus("a X A\nb X A\na X A\nb X B\nc X B\n\na X B\n");
        let t = parse_templates("word@0\nclass@-1\nword@-1", c.schema()).unwrap();
        let (list, report) = train_ica(&mut c, &t, &TrainConfig::default()).unwrap();
        assert!(!list.is_empty());
        let mut seen = vec![0; c.len()];
        for r in &report.records {
            for &g in &r.changed {
                seen[g as usize] += 1;
                assert!(c.is_committed(g as usize));
            }
        }
        assert!(seen.iter().all(|&n| n <= 1));
        assert_eq!(c.error_count().unwrap(), report.final_errors);
    }
}
