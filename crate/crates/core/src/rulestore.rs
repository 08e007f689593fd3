//! Candidate rules with good/bad counts, the predicate index R(p), and
//! best-rule selection with lazily materialized bad counts.
//!
//! Rules are interned to dense [`RuleId`]s. Every rule with a known bad
//! count, a positive good count and `f` at or above the store's floor sits
//! in an ordered set ranked by `(f, good, key)`, so the best known rule is its
//! first element. Rules whose bad count is not known yet are bucketed by good
//! count and materialized only when they could still beat the current best.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::corpus::Corpus;
use crate::error::{Result, TblError};
use crate::predicates::{for_each_candidate, join_values, template_of, ClassView, Predicate, Template, Values};
use crate::symbols::{Sym, SymbolTable};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub predicate: Predicate,
    pub target: Sym,
}

impl Rule {
    /// `tplID|v1,v2,... => TARGET`; also the final tie-break key.
    pub fn key(&self, symbols: &SymbolTable) -> String {
        rule_key(
            self.predicate.template_id,
            self.predicate.values.iter().map(|&v| symbols.resolve(v)),
            symbols.resolve(self.target),
        )
    }
}

pub(crate) fn rule_key<'a>(
    template_id: u32,
    values: impl IntoIterator<Item = &'a str>,
    target: &str,
) -> String {
    format!("{template_id}|{} => {target}", join_values(values))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Counts {
    pub good: u32,
    pub bad: u32,
    pub bad_known: bool,
}

impl Counts {
    /// `good - bad`, if bad is known.
    pub fn f(&self) -> Option<i64> {
        self.bad_known.then(|| self.good as i64 - self.bad as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountKind {
    Good,
    Bad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Materialized {
    Bad(u32),
    Aborted,
}

/// Total order on candidates: higher f, then higher good, then the
/// lexicographically smaller serialized rule. `Less` means `a` is better.
pub fn rank_cmp(a: (i64, u32, &str), b: (i64, u32, &str)) -> Ordering {
    b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2))
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Rank {
    f: i64,
    good: u32,
    /// First eight key bytes, big-endian, zero padded.
    prefix: u64,
    key: Arc<str>,
    id: RuleId,
}

fn key_prefix(key: &str) -> u64 {
    let mut buf = [0u8; 8];
    let n = key.len().min(8);
    buf[..n].copy_from_slice(&key.as_bytes()[..n]);
    u64::from_be_bytes(buf)
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then(other.good.cmp(&self.good))
            .then(self.prefix.cmp(&other.prefix))
            .then_with(|| self.key.cmp(&other.key))
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug)]
struct Entry {
    pred: u32,
    target: Sym,
    counts: Counts,
    key: Arc<str>,
}

#[derive(Clone, Debug, Default)]
pub struct RuleStore {
    pred_ids: FxHashMap<Predicate, u32>,
    preds: Vec<Predicate>,
    by_pred: Vec<SmallVec<[RuleId; 2]>>,
    index: FxHashMap<(u32, Sym), RuleId>,
    entries: Vec<Entry>,
    known: BTreeSet<Rank>,
    unknown: BTreeSet<(u32, RuleId)>,
    /// Rules that cannot reach this score are left out of the ranked sets.
    floor: i64,
}

impl RuleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the store for the corpus's current state.
    ///
    /// Pass 1 creates `(p, T[s])` for every predicate true at a wrong sample
    /// and counts good. Pass 2 walks the correct samples and charges bad to
    /// every stored rule in R(p) whose target differs from the sample's class.
    pub fn init_counts(corpus: &Corpus, templates: &[Template]) -> Result<Self> {
        Self::init_counts_in(&ClassView::current(corpus), templates, |_| true)
    }

    /// [`RuleStore::init_counts`] over an explicit view, restricted to the
    /// samples accepted by `include`.
    pub(crate) fn init_counts_in(
        view: &ClassView<'_>,
        templates: &[Template],
        include: impl Fn(usize) -> bool,
    ) -> Result<Self> {
        let corpus = view.corpus();
        if !corpus.is_assigned() {
            return Err(TblError::Unassigned);
        }
        let mut store = RuleStore::new();
        let mut values = Values::new();
        for g in 0..corpus.len() {
            let (c, t) = (view.class_at(g), corpus.truth(g));
            if c == t || !include(g) {
                continue;
            }
            for tpl in templates {
                view.fill(g, tpl, &mut values);
                let pid = store.intern_pred_values(tpl.id(), &values);
                let id = store.get_or_create(pid, t, corpus.symbols());
                store.entries[id.0 as usize].counts.good += 1;
            }
        }
        for g in 0..corpus.len() {
            let c = view.class_at(g);
            if c != corpus.truth(g) || !include(g) {
                continue;
            }
            for tpl in templates {
                view.fill(g, tpl, &mut values);
                let Some(pid) = store.lookup_pred_values(tpl.id(), &values) else {
                    continue;
                };
                for &id in &store.by_pred[pid as usize] {
                    let e = &mut store.entries[id.0 as usize];
                    if e.target != c {
                        e.counts.bad += 1;
                    }
                }
            }
        }
        for i in 0..store.entries.len() {
            store.entries[i].counts.bad_known = true;
            store.attach(RuleId(i as u32));
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rule(&self, id: RuleId) -> Rule {
        let e = &self.entries[id.0 as usize];
        Rule {
            predicate: self.preds[e.pred as usize].clone(),
            target: e.target,
        }
    }

    pub fn counts(&self, id: RuleId) -> Counts {
        self.entries[id.0 as usize].counts
    }

    pub fn key(&self, id: RuleId) -> &str {
        &self.entries[id.0 as usize].key
    }

    pub fn id_of(&self, rule: &Rule) -> Option<RuleId> {
        let pid = *self.pred_ids.get(&rule.predicate)?;
        self.index.get(&(pid, rule.target)).copied()
    }

    pub fn get(&self, rule: &Rule) -> Option<Counts> {
        self.id_of(rule).map(|id| self.counts(id))
    }

    /// Rules sharing `predicate`, i.e. R(p).
    pub fn rules_for(&self, predicate: &Predicate) -> &[RuleId] {
        match self.pred_ids.get(predicate) {
            Some(&pid) => &self.by_pred[pid as usize],
            None => &[],
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = RuleId> {
        (0..self.entries.len() as u32).map(RuleId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Rule, Counts)> + '_ {
        self.ids().map(|id| (self.rule(id), self.counts(id)))
    }

    fn intern_pred_values(&mut self, template_id: u32, values: &Values) -> u32 {
        if let Some(pid) = self.lookup_pred_values(template_id, values) {
            return pid;
        }
        let p = Predicate {
            template_id,
            values: values.clone(),
        };
        let pid = self.preds.len() as u32;
        self.preds.push(p.clone());
        self.by_pred.push(SmallVec::new());
        self.pred_ids.insert(p, pid);
        pid
    }

    fn lookup_pred_values(&self, template_id: u32, values: &Values) -> Option<u32> {
        // values of up to four atoms stay inline, so the probe does not allocate
        let probe = Predicate {
            template_id,
            values: values.clone(),
        };
        self.pred_ids.get(&probe).copied()
    }

    fn get_or_create(&mut self, pid: u32, target: Sym, symbols: &SymbolTable) -> RuleId {
        if let Some(&id) = self.index.get(&(pid, target)) {
            return id;
        }
        let id = RuleId(self.entries.len() as u32);
        let p = &self.preds[pid as usize];
        let key = rule_key(
            p.template_id,
            p.values.iter().map(|&v| symbols.resolve(v)),
            symbols.resolve(target),
        );
        self.entries.push(Entry {
            pred: pid,
            target,
            counts: Counts::default(),
            key: key.into(),
        });
        self.index.insert((pid, target), id);
        self.by_pred[pid as usize].push(id);
        id
    }

    fn ranked(&self, c: &Counts) -> bool {
        let reach = if c.bad_known {
            c.good as i64 - c.bad as i64
        } else {
            c.good as i64
        };
        c.good > 0 && reach >= self.floor
    }

    fn rank_of(&self, id: RuleId) -> Rank {
        let e = &self.entries[id.0 as usize];
        Rank {
            f: e.counts.good as i64 - e.counts.bad as i64,
            good: e.counts.good,
            prefix: key_prefix(&e.key),
            key: e.key.clone(),
            id,
        }
    }

    fn detach(&mut self, id: RuleId) {
        let c = self.entries[id.0 as usize].counts;
        if !self.ranked(&c) {
            return;
        }
        if c.bad_known {
            let rank = self.rank_of(id);
            self.known.remove(&rank);
        } else {
            self.unknown.remove(&(c.good, id));
        }
    }

    fn attach(&mut self, id: RuleId) {
        let c = self.entries[id.0 as usize].counts;
        if !self.ranked(&c) {
            return;
        }
        if c.bad_known {
            let rank = self.rank_of(id);
            self.known.insert(rank);
        } else {
            self.unknown.insert((c.good, id));
        }
    }

    /// Leaves rules whose score (or, with unknown bad, good count) is below
    /// `floor` out of selection. Their counts are still maintained exactly.
    pub fn set_floor(&mut self, floor: i64) {
        self.known.clear();
        self.unknown.clear();
        self.floor = floor;
        for id in self.ids() {
            self.attach(id);
        }
    }

    /// Adds `delta` to good of `(predicate, target)`. Increments create a
    /// missing rule with an unknown bad count.
    pub(crate) fn add_good(
        &mut self,
        template_id: u32,
        values: &Values,
        target: Sym,
        delta: i32,
        symbols: &SymbolTable,
    ) -> Result<()> {
        let id = if delta > 0 {
            let pid = self.intern_pred_values(template_id, values);
            if let Some(&id) = self.index.get(&(pid, target)) {
                id
            } else {
                let id = self.get_or_create(pid, target, symbols);
                self.entries[id.0 as usize].counts.bad_known = false;
                id
            }
        } else {
            self.lookup_pred_values(template_id, values)
                .and_then(|pid| self.index.get(&(pid, target)).copied())
                .ok_or_else(|| {
                    TblError::Consistency(format!(
                        "good decrement of absent rule {}",
                        rule_key(
                            template_id,
                            values.iter().map(|&v| symbols.resolve(v)),
                            symbols.resolve(target)
                        )
                    ))
                })?
        };
        self.bump(id, CountKind::Good, delta)
    }

    /// Adds `delta` to bad of every rule in R(p) whose target differs from
    /// `class`. Rules with an unknown bad count are skipped.
    pub(crate) fn add_bad_for_pred(
        &mut self,
        template_id: u32,
        values: &Values,
        class: Sym,
        delta: i32,
    ) -> Result<()> {
        let Some(pid) = self.lookup_pred_values(template_id, values) else {
            return Ok(());
        };
        let n = self.by_pred[pid as usize].len();
        for i in 0..n {
            let id = self.by_pred[pid as usize][i];
            let e = &self.entries[id.0 as usize];
            if e.target != class && e.counts.bad_known {
                self.bump(id, CountKind::Bad, delta)?;
            }
        }
        Ok(())
    }

    fn bump(&mut self, id: RuleId, which: CountKind, delta: i32) -> Result<()> {
        let c = self.entries[id.0 as usize].counts;
        if which == CountKind::Bad && !c.bad_known {
            return Ok(());
        }
        let current = match which {
            CountKind::Good => c.good,
            CountKind::Bad => c.bad,
        };
        let next = current as i64 + delta as i64;
        if next < 0 {
            return Err(TblError::Consistency(format!(
                "{which:?} count of {} would become negative",
                self.entries[id.0 as usize].key
            )));
        }
        self.detach(id);
        let counts = &mut self.entries[id.0 as usize].counts;
        match which {
            CountKind::Good => counts.good = next as u32,
            CountKind::Bad => counts.bad = next as u32,
        }
        self.attach(id);
        Ok(())
    }

    /// Adjusts one count of `rule` by `delta` (±1).
    ///
    /// Good increments create missing rules with an unknown bad count; bad
    /// adjustments of rules with unknown bad are no-ops. Decrementing an
    /// absent rule is a consistency error.
    pub fn adjust(
        &mut self,
        rule: &Rule,
        which: CountKind,
        delta: i32,
        corpus: &Corpus,
    ) -> Result<()> {
        let values = &rule.predicate.values;
        let tid = rule.predicate.template_id;
        match which {
            CountKind::Good => self.add_good(tid, values, rule.target, delta, corpus.symbols()),
            CountKind::Bad => match self.id_of(rule) {
                Some(id) => self.bump(id, CountKind::Bad, delta),
                None if delta < 0 => Err(TblError::Consistency(format!(
                    "bad decrement of absent rule {}",
                    rule.key(corpus.symbols())
                ))),
                None => Ok(()),
            },
        }
    }

    /// Computes bad of a stored rule exactly by scanning the corpus, giving up
    /// as soon as `good - partial_bad < abort_below`.
    pub fn materialize_bad(
        &mut self,
        id: RuleId,
        corpus: &Corpus,
        templates: &[Template],
        abort_below: Option<i64>,
    ) -> Result<Materialized> {
        let e = &self.entries[id.0 as usize];
        let pred = &self.preds[e.pred as usize];
        let template = template_of(templates, pred)?;
        let view = ClassView::current(corpus);
        let outcome = scan_bad(&view, template, pred, e.target, e.counts.good, abort_below, |_| true);
        if let Materialized::Bad(bad) = outcome {
            self.detach(id);
            let counts = &mut self.entries[id.0 as usize].counts;
            counts.bad = bad;
            counts.bad_known = true;
            self.attach(id);
        }
        Ok(outcome)
    }

    /// The rule maximizing `good - bad`, or `None` when nothing reaches
    /// `threshold`. Candidates with unknown bad counts are materialized in
    /// descending good order while they could still beat the best so far.
    pub fn best_rule(
        &mut self,
        corpus: &Corpus,
        templates: &[Template],
        threshold: i64,
    ) -> Result<Option<(RuleId, i64)>> {
        if threshold < self.floor {
            self.set_floor(threshold);
        }
        let mut cursor: Option<(u32, RuleId)> = None;
        loop {
            let best = self.known.first().map(|r| (r.f, r.good));
            let next = match cursor {
                None => self.unknown.last().copied(),
                Some(c) => self.unknown.range(..c).next_back().copied(),
            };
            let Some((good, id)) = next else { break };
            if !can_compete(good, best, threshold) {
                break;
            }
            cursor = Some((good, id));
            self.materialize_bad(id, corpus, templates, None)?;
        }
        Ok(self
            .known
            .first()
            .filter(|r| r.f >= threshold)
            .map(|r| (r.id, r.f)))
    }

    /// Compares every rule in this store against a from-scratch recount.
    ///
    /// Good counts must agree for all rules; bad counts for rules whose bad
    /// is known. Rules missing from the recount must have good 0, and their
    /// known bad is checked by a direct scan. Returns the first difference.
    pub fn diff_against(
        &self,
        oracle: &RuleStore,
        corpus: &Corpus,
        templates: &[Template],
    ) -> Result<Option<String>> {
        let symbols = corpus.symbols();
        for (rule, oc) in oracle.iter() {
            match self.get(&rule) {
                None => {
                    return Ok(Some(format!(
                        "{} missing from incremental store (oracle good={})",
                        rule.key(symbols),
                        oc.good
                    )))
                }
                Some(c) => {
                    if c.good != oc.good || (c.bad_known && c.bad != oc.bad) {
                        return Ok(Some(format!(
                            "{}: incremental good={} bad={} vs oracle good={} bad={}",
                            rule.key(symbols),
                            c.good,
                            c.bad,
                            oc.good,
                            oc.bad
                        )));
                    }
                }
            }
        }
        let view = ClassView::current(corpus);
        for id in self.ids() {
            let rule = self.rule(id);
            if oracle.get(&rule).is_some() {
                continue;
            }
            let c = self.counts(id);
            if c.good != 0 {
                return Ok(Some(format!(
                    "{}: incremental good={} but rule corrects nothing",
                    rule.key(symbols),
                    c.good
                )));
            }
            if c.bad_known {
                let template = template_of(templates, &rule.predicate)?;
                let Materialized::Bad(bad) =
                    scan_bad(&view, template, &rule.predicate, rule.target, 0, None, |_| true)
                else {
                    unreachable!()
                };
                if bad != c.bad {
                    return Ok(Some(format!(
                        "{}: incremental bad={} vs recount {}",
                        rule.key(symbols),
                        c.bad,
                        bad
                    )));
                }
            }
        }
        Ok(None)
    }
}

/// Could a rule with this good count beat or tie the current best?
pub(crate) fn can_compete(good: u32, best: Option<(i64, u32)>, threshold: i64) -> bool {
    let g = good as i64;
    if g < threshold {
        return false;
    }
    match best {
        None => true,
        Some((f, _)) if f < threshold => true,
        // equal f still needs the good/key tie-break, which a rule with
        // good == f can only win when the best also has no bad samples
        Some((f, best_good)) => g > f || (g == f && best_good as i64 == f),
    }
}

/// Counts samples where `(predicate, target)` would break a correct class.
pub(crate) fn scan_bad(
    view: &ClassView<'_>,
    template: &Template,
    predicate: &Predicate,
    target: Sym,
    good: u32,
    abort_below: Option<i64>,
    include: impl Fn(usize) -> bool,
) -> Materialized {
    let corpus = view.corpus();
    let mut bad = 0u32;
    let mut aborted = false;
    for_each_candidate(corpus, template, predicate, |g| {
        let c = view.class_at(g);
        if c == target || c != corpus.truth(g) || !include(g) {
            return true;
        }
        if view.holds_at(predicate, template, g) {
            bad += 1;
            if let Some(limit) = abort_below {
                if (good as i64) - (bad as i64) < limit {
                    aborted = true;
                    return false;
                }
            }
        }
        true
    });
    if aborted {
        Materialized::Aborted
    } else {
        Materialized::Bad(bad)
    }
}

impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bad_known {
            write!(
                f,
                "good={} bad={} f={}",
                self.good,
                self.bad,
                self.good as i64 - self.bad as i64
            )
        } else {
            write!(f, "good={} bad=?", self.good)
        }
    }
}
