//! Seeded synthetic corpora with planted local dependencies.
//!
//! Every word has a base class. A planted pattern `(context, word) -> class`
//! overrides it, where the context is the previous sample's true class (or,
//! in the static-only variant, the previous word). Initial classes are the
//! true classes with a fraction `noise` replaced by a different class.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use rustc_hash::FxHashMap;

use crate::corpus::{Corpus, CorpusBuilder, Row, Schema};
use crate::error::{Result, TblError};

/// Schema of generated corpora: the word, the noisy initial guess (also the
/// initial class) and the true tag.
pub const SYNTH_SCHEMA: &str = "word,guess*,tag";

/// Templates matching the planted structure, with `class@-1` atoms.
pub const SYNTH_TEMPLATES: &str = "word@0\nclass@-1,word@0\nclass@-1\nclass@1\nclass@-1,class@1\n";

/// Templates for the static-only variant (no class atoms).
pub const SYNTH_STATIC_TEMPLATES: &str = "word@0\nword@-1,word@0\nword@-1\nword@1,word@0\n";

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub vocab_size: usize,
    pub num_sequences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub pattern_rules: usize,
    pub noise: f64,
    pub seed: u64,
    /// Exponent of the Zipf word distribution.
    pub zipf: f64,
    /// Patterns key on the previous word instead of the previous class.
    pub static_only: bool,
    /// Probability that a word takes its secondary class instead.
    pub ambiguity: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_classes: 8,
            vocab_size: 2000,
            num_sequences: 1000,
            min_len: 5,
            max_len: 25,
            pattern_rules: 40,
            noise: 0.3,
            seed: 1,
            zipf: 1.0,
            static_only: false,
            ambiguity: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TblError::Config(format!("synthetic spec: {m}")));
        if self.num_classes == 0 {
            return bad("need at least one class");
        }
        if self.num_sequences == 0 {
            return bad("need at least one sequence");
        }
        if self.vocab_size == 0 {
            return bad("need at least one word");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("sequence lengths must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise rate must lie in [0, 1]");
        }
        if self.noise > 0.0 && self.num_classes < 2 {
            return bad("noise needs at least two classes");
        }
        if !(0.0..=1.0).contains(&self.ambiguity) {
            return bad("ambiguity must lie in [0, 1]");
        }
        if !(self.zipf > 0.0) {
            return bad("zipf exponent must be positive");
        }
        Ok(())
    }

    /// Sequences needed for roughly `samples` samples.
    pub fn sequences_for(&self, samples: usize) -> usize {
        let mean = (self.min_len + self.max_len) as f64 / 2.0;
        ((samples as f64 / mean).ceil() as usize).max(1)
    }
}

/// Generates the corpus described by `spec`. Initial classes are assigned.
pub fn gen_synth(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = Zipf::new(spec.vocab_size as f64, spec.zipf)
        .map_err(|e| TblError::Config(format!("synthetic spec: {e}")))?;
    let draw_word = |rng: &mut ChaCha8Rng| zipf.sample(rng) as usize - 1;

    let k = spec.num_classes;
    let base: Vec<usize> = (0..spec.vocab_size).map(|_| rng.random_range(0..k)).collect();
    let secondary: Vec<usize> = base
        .iter()
        .map(|&b| {
            if k < 2 {
                return b;
            }
            let c = rng.random_range(0..k - 1);
            if c >= b {
                c + 1
            } else {
                c
            }
        })
        .collect();
    let mut patterns: FxHashMap<(usize, usize), usize> = FxHashMap::default();
    let context_size = if spec.static_only { spec.vocab_size } else { k };
    let mut attempts = 0;
    while patterns.len() < spec.pattern_rules && k > 1 && attempts < spec.pattern_rules * 50 {
        attempts += 1;
        let word = draw_word(&mut rng);
        let context = if spec.static_only {
            draw_word(&mut rng)
        } else {
            rng.random_range(0..context_size)
        };
        let mut class = rng.random_range(0..k - 1);
        if class >= base[word] {
            class += 1;
        }
        patterns.entry((context, word)).or_insert(class);
    }

    let schema = Schema::parse(SYNTH_SCHEMA)?;
    let mut builder = CorpusBuilder::new(schema);
    let words: Vec<String> = (0..spec.vocab_size).map(|w| format!("w{w}")).collect();
    let classes: Vec<String> = (0..k).map(|c| format!("C{c}")).collect();
    for _ in 0..spec.num_sequences {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut prev: Option<(usize, usize)> = None; // (word, class)
        for _ in 0..len {
            let word = draw_word(&mut rng);
            let class = prev
                .and_then(|(pw, pc)| {
                    let context = if spec.static_only { pw } else { pc };
                    patterns.get(&(context, word)).copied()
                })
                .unwrap_or(base[word]);
            let class = if spec.ambiguity > 0.0 && rng.random_bool(spec.ambiguity) {
                secondary[word]
            } else {
                class
            };
            let guess = if spec.noise > 0.0 && rng.random_bool(spec.noise) {
                let mut other = rng.random_range(0..k - 1);
                if other >= class {
                    other += 1;
                }
                other
            } else {
                class
            };
            builder.push(Row {
                features: &[&words[word], &classes[guess]],
                truth: &classes[class],
            })?;
            prev = Some((word, class));
        }
        builder.end_sequence();
    }
    builder.finish()
}

/// Writes the corpus in the column format it can be loaded from.
pub fn write_synth<W: Write>(corpus: &Corpus, out: W) -> Result<()> {
    corpus.write(out)
}
