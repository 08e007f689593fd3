//! Incremental training: rule counts are kept in a [`RuleStore`] and, after
//! each selected rule is applied, updated only at samples within the
//! vicinity of a changed sample.

use std::time::Instant;

use rustc_hash::FxHashMap;

use crate::corpus::Corpus;
use crate::error::{Result, TblError};
use crate::learner::{apply_simultaneous, set_classes, Algo, Recorder, TrainConfig};
use crate::predicates::{dynamic_radius, ClassView, Overlay, Template, Values};
use crate::rules::{RuleList, TrainReport};
use crate::rulestore::{Rule, RuleStore};
use crate::symbols::Sym;

/// Pre/post state of one rule application.
#[derive(Debug, Default)]
pub struct UpdateContext {
    /// Old class of every changed sample; overlaid on the corpus (which holds
    /// the new classes) to reconstruct the old view.
    pub old_classes: Overlay,
    /// Samples whose class changed, ascending.
    pub changed: Vec<u32>,
    /// Union of the changed samples' vicinities, ascending and deduplicated.
    pub affected: Vec<u32>,
}

impl UpdateContext {
    /// Builds the context from `(position, old class)` pairs recorded while
    /// applying a rule to `corpus`.
    pub fn new(corpus: &Corpus, changed: &[(u32, Sym)], radius: usize) -> Self {
        let mut old_classes = Overlay::default();
        old_classes.reserve(changed.len());
        let mut affected = Vec::with_capacity(changed.len() * (2 * radius + 1));
        for &(g, old) in changed {
            old_classes.insert(g, old);
            affected.extend(corpus.vicinity_global(g as usize, radius).map(|q| q as u32));
        }
        affected.sort_unstable();
        affected.dedup();
        UpdateContext {
            old_classes,
            changed: changed.iter().map(|&(g, _)| g).collect(),
            affected,
        }
    }
}

/// Brings every count touched by sample `g` from the old view to the new one.
///
/// Case I (class of `g` unchanged): a predicate that stops holding removes
/// `g`'s contribution, one that starts holding adds it. Case II (class
/// changed): the good contribution is also removed when the new class is
/// already the true class (and added when the old class was), and the bad
/// contribution is always moved, since a sample whose class changed cannot
/// stay in any bad set.
pub fn update_for_sample(
    store: &mut RuleStore,
    corpus: &Corpus,
    templates: &[Template],
    ctx: &UpdateContext,
    g: usize,
) -> Result<()> {
    let new_view = ClassView::current(corpus);
    let old_view = ClassView::current(corpus).with_overlay(&ctx.old_classes);
    let c_new = corpus.current(g);
    let c_old = old_view.class_at(g);
    let t = corpus.truth(g);
    let symbols = corpus.symbols();
    let mut p_old = Values::new();
    let mut p_new = Values::new();
    let case_two = c_old != c_new;
    for tpl in templates {
        if !case_two && !tpl.is_dynamic() {
            continue;
        }
        old_view.fill(g, tpl, &mut p_old);
        new_view.fill(g, tpl, &mut p_new);
        let same = p_old == p_new;
        if !case_two {
            if same {
                continue;
            }
            if c_old != t {
                store.add_good(tpl.id(), &p_old, t, -1, symbols)?;
                store.add_good(tpl.id(), &p_new, t, 1, symbols)?;
            } else {
                store.add_bad_for_pred(tpl.id(), &p_old, c_old, -1)?;
                store.add_bad_for_pred(tpl.id(), &p_new, c_new, 1)?;
            }
            continue;
        }
        if c_old != t {
            if !same || t == c_new {
                store.add_good(tpl.id(), &p_old, t, -1, symbols)?;
            }
        } else {
            store.add_bad_for_pred(tpl.id(), &p_old, c_old, -1)?;
        }
        if c_new != t {
            if !same || t == c_old {
                store.add_good(tpl.id(), &p_new, t, 1, symbols)?;
            }
        } else {
            store.add_bad_for_pred(tpl.id(), &p_new, c_new, 1)?;
        }
    }
    Ok(())
}

/// Positions at which each predicate of a dynamic template currently holds.
/// Lets a selected rule be applied without scanning feature postings.
#[derive(Default)]
struct PredTable {
    ids: FxHashMap<Values, u32>,
    values: Vec<Values>,
    members: Vec<Vec<u32>>,
    /// Predicate id and slot in `members` per position.
    at: Vec<u32>,
    slot: Vec<u32>,
}

impl PredTable {
    fn intern(&mut self, v: &Values) -> u32 {
        if let Some(&id) = self.ids.get(v) {
            return id;
        }
        let id = self.values.len() as u32;
        self.ids.insert(v.clone(), id);
        self.values.push(v.clone());
        self.members.push(Vec::new());
        id
    }

    fn insert(&mut self, g: usize, id: u32) {
        let list = &mut self.members[id as usize];
        self.slot[g] = list.len() as u32;
        list.push(g as u32);
        self.at[g] = id;
    }

    fn remove(&mut self, g: usize) {
        let s = self.slot[g] as usize;
        let list = &mut self.members[self.at[g] as usize];
        list.swap_remove(s);
        if let Some(&moved) = list.get(s) {
            self.slot[moved as usize] = s as u32;
        }
    }
}

struct MatchIndex {
    /// `None` for static templates, whose feature postings are exact.
    tables: Vec<Option<PredTable>>,
}

impl MatchIndex {
    fn new(corpus: &Corpus, templates: &[Template]) -> Self {
        let view = ClassView::current(corpus);
        let n = corpus.len();
        let mut values = Values::new();
        let tables = templates
            .iter()
            .map(|tpl| {
                tpl.is_dynamic().then(|| {
                    let mut table = PredTable {
                        at: vec![0; n],
                        slot: vec![0; n],
                        ..Default::default()
                    };
                    for g in 0..n {
                        view.fill(g, tpl, &mut values);
                        let id = table.intern(&values);
                        table.insert(g, id);
                    }
                    table
                })
            })
            .collect();
        MatchIndex { tables }
    }

    /// Re-keys `affected` positions after the corpus changed.
    fn refresh(&mut self, corpus: &Corpus, templates: &[Template], affected: &[u32]) {
        let view = ClassView::current(corpus);
        let mut values = Values::new();
        for (tpl, table) in templates.iter().zip(&mut self.tables) {
            let Some(table) = table else { continue };
            for &g in affected {
                let g = g as usize;
                view.fill(g, tpl, &mut values);
                if table.values[table.at[g] as usize] == values {
                    continue;
                }
                table.remove(g);
                let id = table.intern(&values);
                table.insert(g, id);
            }
        }
    }

    /// Ascending positions where `rule` applies, or `None` for a static
    /// template.
    fn matches(&self, corpus: &Corpus, rule: &Rule) -> Option<Vec<u32>> {
        let table = self.tables[rule.predicate.template_id as usize].as_ref()?;
        let Some(&id) = table.ids.get(&rule.predicate.values) else {
            return Some(Vec::new());
        };
        let mut out: Vec<u32> = table.members[id as usize]
            .iter()
            .copied()
            .filter(|&g| corpus.current(g as usize) != rule.target)
            .collect();
        out.sort_unstable();
        Some(out)
    }
}

/// From-scratch store for the current corpus state.
pub fn oracle_recount(corpus: &Corpus, templates: &[Template]) -> Result<RuleStore> {
    RuleStore::init_counts(corpus, templates)
}

/// Incremental TBL. Produces the same rules, counts and final corpus as
/// [`crate::learner::train_regular`].
pub fn train_fast(
    corpus: &mut Corpus,
    templates: &[Template],
    config: &TrainConfig,
) -> Result<(RuleList, TrainReport)> {
    train_fast_with_store(corpus, templates, config).map(|(l, r, _)| (l, r))
}

/// [`train_fast`], also returning the final rule store.
pub fn train_fast_with_store(
    corpus: &mut Corpus,
    templates: &[Template],
    config: &TrainConfig,
) -> Result<(RuleList, TrainReport, RuleStore)> {
    config.validate()?;
    let mut rec = Recorder::new(Algo::Fast, corpus, templates, config)?;
    let radius = dynamic_radius(templates);
    let mut store = RuleStore::init_counts(corpus, templates)?;
    store.set_floor(config.threshold);
    let mut index = MatchIndex::new(corpus, templates);
    rec.setup_done();
    while rec.errors.errors > 0 && !config.exhausted(rec.iterations()) {
        let started = Instant::now();
        let Some((id, _)) = store.best_rule(corpus, templates, config.threshold)? else {
            break;
        };
        let rule = store.rule(id);
        let counts = store.counts(id);
        let template = &templates[rule.predicate.template_id as usize];
        let changed = match index.matches(corpus, &rule) {
            Some(matches) => set_classes(corpus, &matches, rule.target),
            None => apply_simultaneous(corpus, template, &rule),
        };
        let ctx = UpdateContext::new(corpus, &changed, radius);
        for &g in &ctx.affected {
            update_for_sample(&mut store, corpus, templates, &ctx, g as usize)?;
        }
        index.refresh(corpus, templates, &ctx.affected);
        rec.record(corpus, &rule, counts, &changed, started.elapsed().as_secs_f64());
        if config.check_oracle {
            let oracle = oracle_recount(corpus, templates)?;
            if let Some(detail) = store.diff_against(&oracle, corpus, templates)? {
                return Err(TblError::OracleMismatch {
                    iteration: rec.iterations(),
                    detail,
                });
            }
        }
    }
    let (list, report) = rec.finish();
    Ok((list, report, store))
}
