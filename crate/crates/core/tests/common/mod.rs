#![allow(dead_code)]

use std::collections::BTreeMap;

use fasttbl::predicates::{holds, instantiate, parse_templates, Predicate, Template};
use fasttbl::synth::{gen_synth, SynthSpec};
use fasttbl::{ClassView, Corpus, Rule, RuleStore, Sym};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TEMPLATE_POOL: &[&str] = &[
    "word@0",
    "word@-1",
    "word@1",
    "guess@0",
    "class@-1",
    "class@1",
    "class@-2",
    "class@-1,word@0",
    "class@1,word@0",
    "word@-1,word@0",
    "class@-1,class@1",
    "class@-2,class@-1",
    "class@-1,word@1",
];

pub const DYNAMIC_POOL: &[&str] = &["class@-1", "class@1", "class@-1,word@0", "class@1,word@0"];

/// One seeded random training problem.
pub struct Case {
    pub seed: u64,
    pub corpus: Corpus,
    pub templates: Vec<Template>,
    pub template_text: String,
}

/// 200-2000 samples, 3-5 classes, noise 0.2-0.5, 2-6 templates with at
/// least one class atom.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = rng.random_range(200..=2000usize);
    let mut spec = SynthSpec {
        num_classes: rng.random_range(3..=5),
        vocab_size: rng.random_range(20..=120),
        min_len: 3,
        max_len: 15,
        pattern_rules: rng.random_range(3..=15),
        noise: rng.random_range(0.2..=0.5),
        seed: rng.random(),
        ..Default::default()
    };
    spec.num_sequences = spec.sequences_for(samples);
    let corpus = gen_synth(&spec).unwrap();
    let n_templates = rng.random_range(2..=6usize);
    let mut chosen: Vec<&str> = vec![DYNAMIC_POOL.choose(&mut rng).unwrap()];
    while chosen.len() < n_templates {
        let t = TEMPLATE_POOL.choose(&mut rng).unwrap();
        if !chosen.contains(t) {
            chosen.push(t);
        }
    }
    let template_text = chosen.join("\n");
    let templates = parse_templates(&template_text, corpus.schema()).unwrap();
    Case {
        seed,
        corpus,
        templates,
        template_text,
    }
}

pub type BruteCounts = BTreeMap<(Predicate, Sym), (u32, u32)>;

/// G and B sizes of every rule whose predicate occurs somewhere, by
/// evaluating each predicate at every sample.
pub fn brute_counts(corpus: &Corpus, templates: &[Template]) -> BruteCounts {
    let view = ClassView::current(corpus);
    let mut predicates = std::collections::BTreeSet::new();
    for (s, seq) in corpus.sequences().enumerate() {
        for pos in 0..seq.len() {
            for t in templates {
                predicates.insert(instantiate(&view, s, pos, t).unwrap());
            }
        }
    }
    let classes: Vec<Sym> = corpus.class_alphabet().iter().copied().collect();
    let mut out = BruteCounts::new();
    for p in predicates {
        let mut good = vec![0u32; classes.len()];
        let mut bad = vec![0u32; classes.len()];
        for (s, seq) in corpus.sequences().enumerate() {
            for pos in 0..seq.len() {
                if !holds(&p, templates, &view, s, pos).unwrap() {
                    continue;
                }
                let g = corpus.global(s, pos).unwrap();
                let (c, t) = (corpus.current(g), corpus.truth(g));
                for (i, &target) in classes.iter().enumerate() {
                    if c == target {
                        continue;
                    }
                    if target == t {
                        good[i] += 1;
                    }
                    if c == t {
                        bad[i] += 1;
                    }
                }
            }
        }
        for (i, &target) in classes.iter().enumerate() {
            if good[i] > 0 || bad[i] > 0 {
                out.insert((p.clone(), target), (good[i], bad[i]));
            }
        }
    }
    out
}

/// Differences between a store and the brute-force counts: every rule with
/// positive good must be stored with that good; known bad counts must match.
pub fn compare_with_brute(store: &RuleStore, brute: &BruteCounts) -> Vec<String> {
    let mut diffs = Vec::new();
    for ((p, target), &(good, bad)) in brute {
        if good == 0 {
            continue;
        }
        let rule = Rule {
            predicate: p.clone(),
            target: *target,
        };
        match store.get(&rule) {
            None => diffs.push(format!("{rule:?} missing, want {good}/{bad}")),
            Some(c) => {
                if c.good != good || (c.bad_known && c.bad != bad) {
                    diffs.push(format!("{rule:?}: have {c:?}, want {good}/{bad}"));
                }
            }
        }
    }
    for (rule, c) in store.iter() {
        let want = brute
            .get(&(rule.predicate.clone(), rule.target))
            .copied()
            .unwrap_or((0, 0));
        if c.good != want.0 || (c.bad_known && c.bad != want.1) {
            diffs.push(format!("stored {rule:?}: have {c:?}, want {want:?}"));
        }
    }
    diffs
}

/// Highest f, then highest good, then smallest key, over brute counts.
pub fn brute_best(corpus: &Corpus, brute: &BruteCounts) -> Option<(String, i64, u32)> {
    brute
        .iter()
        .filter(|(_, &(g, _))| g > 0)
        .map(|((p, t), &(g, b))| {
            let rule = Rule {
                predicate: p.clone(),
                target: *t,
            };
            (rule.key(corpus.symbols()), g as i64 - b as i64, g)
        })
        .min_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)))
}
