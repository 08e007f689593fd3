//! The sample space: sequences of samples with static features, a mutable
//! current class and a fixed true class.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::error::{Result, TblError};
use crate::symbols::{Sym, SymbolTable, OUT_OF_RANGE_TEXT};

/// Column layout of a corpus file.
///
/// All columns except the last are static features; the last column is the
/// true class. One feature column may additionally be marked as the source
/// of the initial current class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<String>,
    class_column: String,
    initial: Option<usize>,
}

impl Schema {
    pub fn new<S: Into<String>>(
        columns: impl IntoIterator<Item = S>,
        class_column: impl Into<String>,
        initial: Option<&str>,
    ) -> Result<Self> {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        let class_column = class_column.into();
        let mut seen = BTreeSet::new();
        for name in columns.iter().chain(std::iter::once(&class_column)) {
            if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ',' || c == '@') {
                return Err(TblError::Config(format!("invalid column name `{name}`")));
            }
            if name == "class" {
                return Err(TblError::Config(
                    "`class` is reserved for the dynamic class atom".into(),
                ));
            }
            if !seen.insert(name.as_str()) {
                return Err(TblError::Config(format!("duplicate column `{name}`")));
            }
        }
        let initial = match initial {
            None => None,
            Some(name) => Some(
                columns
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| TblError::UnknownColumn(name.to_string()))?,
            ),
        };
        Ok(Schema {
            columns,
            class_column,
            initial,
        })
    }

    /// Parses `word,pos,chunk`; a trailing `*` on a feature column marks it as
    /// the initial-class column (`word,guess*,tag`).
    pub fn parse(descriptor: &str) -> Result<Self> {
        let mut names: Vec<&str> = descriptor.split(',').map(str::trim).collect();
        if names.len() < 2 {
            return Err(TblError::Config(format!(
                "schema `{descriptor}` needs at least one feature column and a class column"
            )));
        }
        let class = names.pop().unwrap();
        if class.ends_with('*') {
            return Err(TblError::Config(
                "the class column cannot be the initial-class column".into(),
            ));
        }
        let mut initial = None;
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            if let Some(stripped) = name.strip_suffix('*') {
                if initial.replace(stripped).is_some() {
                    return Err(TblError::Config("more than one initial-class column".into()));
                }
                columns.push(stripped);
            } else {
                columns.push(name);
            }
        }
        Schema::new(columns, class, initial)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn class_column(&self) -> &str {
        &self.class_column
    }

    pub fn initial_column(&self) -> Option<usize> {
        self.initial
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Number of whitespace-separated fields on a data line.
    pub fn width(&self) -> usize {
        self.columns.len() + 1
    }

    pub fn descriptor(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.columns.iter().enumerate() {
            out.push_str(c);
            if Some(i) == self.initial {
                out.push('*');
            }
            out.push(',');
        }
        out.push_str(&self.class_column);
        out
    }
}

impl FromStr for Schema {
    type Err = TblError;

    fn from_str(s: &str) -> Result<Self> {
        Schema::parse(s)
    }
}

/// Positions of each static value, per column.
#[derive(Debug, Default)]
pub(crate) struct Postings {
    by_column: Vec<FxHashMap<Sym, Vec<u32>>>,
}

impl Postings {
    fn build(features: &[Sym], width: usize, n: usize) -> Self {
        let mut by_column = vec![FxHashMap::<Sym, Vec<u32>>::default(); width];
        for g in 0..n {
            for (col, map) in by_column.iter_mut().enumerate() {
                map.entry(features[g * width + col]).or_default().push(g as u32);
            }
        }
        Postings { by_column }
    }
}

/// The sample space. Samples are stored flat; a sample's global index is its
/// position in corpus order.
#[derive(Clone, Debug)]
pub struct Corpus {
    schema: Schema,
    symbols: SymbolTable,
    features: Vec<Sym>,
    current: Vec<Sym>,
    truth: Vec<Sym>,
    committed: Vec<bool>,
    seq_starts: Vec<usize>,
    seq_of: Vec<u32>,
    classes: BTreeSet<Sym>,
    assigned: bool,
    postings: Arc<Postings>,
}

/// One record handed to [`CorpusBuilder`].
pub struct Row<'a> {
    pub features: &'a [&'a str],
    pub truth: &'a str,
}

/// Incremental construction of a corpus from string rows.
pub struct CorpusBuilder {
    schema: Schema,
    symbols: SymbolTable,
    features: Vec<Sym>,
    current: Vec<Sym>,
    truth: Vec<Sym>,
    seq_starts: Vec<usize>,
    classes: BTreeSet<Sym>,
}

impl CorpusBuilder {
    pub fn new(schema: Schema) -> Self {
        CorpusBuilder {
            schema,
            symbols: SymbolTable::new(),
            features: Vec::new(),
            current: Vec::new(),
            truth: Vec::new(),
            seq_starts: vec![0],
            classes: BTreeSet::new(),
        }
    }

    pub fn push(&mut self, row: Row<'_>) -> Result<()> {
        let width = self.schema.columns.len();
        if row.features.len() != width {
            return Err(TblError::Config(format!(
                "row has {} features, schema has {width}",
                row.features.len()
            )));
        }
        for value in row.features.iter().chain(std::iter::once(&row.truth)) {
            if *value == OUT_OF_RANGE_TEXT {
                return Err(TblError::Config(format!(
                    "`{OUT_OF_RANGE_TEXT}` is a reserved symbol"
                )));
            }
        }
        for value in row.features {
            let sym = self.symbols.intern(value);
            self.features.push(sym);
        }
        let truth = self.symbols.intern(row.truth);
        self.truth.push(truth);
        self.classes.insert(truth);
        let current = match self.schema.initial {
            Some(col) => {
                let c = self.features[self.features.len() - width + col];
                self.classes.insert(c);
                c
            }
            None => Sym::UNASSIGNED,
        };
        self.current.push(current);
        Ok(())
    }

    /// Closes the current sequence. Empty sequences are dropped.
    pub fn end_sequence(&mut self) {
        if *self.seq_starts.last().unwrap() != self.truth.len() {
            self.seq_starts.push(self.truth.len());
        }
    }

    pub fn finish(mut self) -> Result<Corpus> {
        self.end_sequence();
        if self.truth.is_empty() {
            return Err(TblError::EmptyInput);
        }
        let n = self.truth.len();
        let mut seq_of = Vec::with_capacity(n);
        for (i, w) in self.seq_starts.windows(2).enumerate() {
            seq_of.extend(std::iter::repeat_n(i as u32, w[1] - w[0]));
        }
        let width = self.schema.columns.len();
        let postings = Arc::new(Postings::build(&self.features, width, n));
        let assigned = self.schema.initial.is_some();
        Ok(Corpus {
            schema: self.schema,
            symbols: self.symbols,
            features: self.features,
            current: self.current,
            truth: self.truth,
            committed: vec![false; n],
            seq_starts: self.seq_starts,
            seq_of,
            classes: self.classes,
            assigned,
            postings,
        })
    }
}

/// Read-only view of one sample.
#[derive(Clone, Copy)]
pub struct Sample<'a> {
    corpus: &'a Corpus,
    index: usize,
}

impl<'a> Sample<'a> {
    pub fn static_features(&self) -> &'a [Sym] {
        self.corpus.features_of(self.index)
    }

    pub fn current_class(&self) -> Option<Sym> {
        let c = self.corpus.current[self.index];
        (c != Sym::UNASSIGNED).then_some(c)
    }

    pub fn true_class(&self) -> Sym {
        self.corpus.truth[self.index]
    }

    pub fn committed(&self) -> bool {
        self.corpus.committed[self.index]
    }

    pub fn position(&self) -> usize {
        self.index - self.corpus.seq_starts[self.corpus.seq_of[self.index] as usize]
    }

    pub fn global_index(&self) -> usize {
        self.index
    }
}

/// Read-only view of one sequence.
#[derive(Clone, Copy)]
pub struct Sequence<'a> {
    corpus: &'a Corpus,
    range: (usize, usize),
}

impl<'a> Sequence<'a> {
    pub fn len(&self) -> usize {
        self.range.1 - self.range.0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample<'a>> + 'a {
        let corpus = self.corpus;
        (self.range.0..self.range.1).map(move |index| Sample { corpus, index })
    }
}

impl Corpus {
    /// Reads a whitespace-columned corpus.
    ///
    /// One sample per line, a blank line ends a sequence and lines starting
    /// with `#` are comments.
    pub fn load<R: BufRead>(reader: R, schema: Schema) -> Result<Self> {
        let width = schema.width();
        let mut builder = CorpusBuilder::new(schema);
        let mut tokens: Vec<String> = Vec::with_capacity(width);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.starts_with('#') {
                continue;
            }
            if line.trim().is_empty() {
                builder.end_sequence();
                continue;
            }
            tokens.clear();
            tokens.extend(line.split_whitespace().map(str::to_string));
            if tokens.len() != width {
                return Err(TblError::RaggedRow {
                    line: lineno,
                    expected: width,
                    found: tokens.len(),
                });
            }
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            builder
                .push(Row {
                    features: &refs[..width - 1],
                    truth: refs[width - 1],
                })
                .map_err(|e| TblError::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?;
        }
        builder.finish()
    }

    pub fn parse(text: &str, schema: Schema) -> Result<Self> {
        Corpus::load(text.as_bytes(), schema)
    }

    /// Writes the corpus in its input format (features and true class).
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        self.write_rows(&mut out, false)
    }

    /// Writes the corpus with the current class appended as an extra column.
    pub fn write_tagged<W: Write>(&self, mut out: W) -> Result<()> {
        if !self.assigned {
            return Err(TblError::Unassigned);
        }
        self.write_rows(&mut out, true)
    }

    fn write_rows<W: Write>(&self, out: &mut W, tagged: bool) -> Result<()> {
        let mut line = String::new();
        for s in 0..self.num_sequences() {
            for g in self.seq_starts[s]..self.seq_starts[s + 1] {
                line.clear();
                for &f in self.features_of(g) {
                    line.push_str(self.symbols.resolve(f));
                    line.push(' ');
                }
                line.push_str(self.symbols.resolve(self.truth[g]));
                if tagged {
                    let _ = write!(line, " {}", self.symbols.resolve(self.current[g]));
                }
                line.push('\n');
                out.write_all(line.as_bytes())?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub(crate) fn symbols_mut(&mut self) -> &mut SymbolTable {
        &mut self.symbols
    }

    pub fn class_alphabet(&self) -> &BTreeSet<Sym> {
        &self.classes
    }

    pub fn num_sequences(&self) -> usize {
        self.seq_starts.len() - 1
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn is_assigned(&self) -> bool {
        self.assigned
    }

    pub fn sequence(&self, seq: usize) -> Result<Sequence<'_>> {
        if seq >= self.num_sequences() {
            return Err(TblError::SequenceOutOfRange(seq));
        }
        Ok(Sequence {
            corpus: self,
            range: (self.seq_starts[seq], self.seq_starts[seq + 1]),
        })
    }

    pub fn sequences(&self) -> impl Iterator<Item = Sequence<'_>> + '_ {
        self.seq_starts.windows(2).map(move |w| Sequence {
            corpus: self,
            range: (w[0], w[1]),
        })
    }

    pub fn sample(&self, g: usize) -> Sample<'_> {
        assert!(g < self.len());
        Sample {
            corpus: self,
            index: g,
        }
    }

    /// Global index of `(seq, pos)`.
    pub fn global(&self, seq: usize, pos: usize) -> Result<usize> {
        if seq >= self.num_sequences() {
            return Err(TblError::SequenceOutOfRange(seq));
        }
        let (start, end) = (self.seq_starts[seq], self.seq_starts[seq + 1]);
        if pos >= end - start {
            return Err(TblError::PositionOutOfRange {
                seq,
                pos,
                len: end - start,
            });
        }
        Ok(start + pos)
    }

    /// `(sequence, position)` of a global index.
    pub fn locate(&self, g: usize) -> (usize, usize) {
        let seq = self.seq_of[g] as usize;
        (seq, g - self.seq_starts[seq])
    }

    /// Global index range of the sequence containing `g`.
    #[inline]
    pub fn sequence_bounds(&self, g: usize) -> Range<usize> {
        let seq = self.seq_of[g] as usize;
        self.seq_starts[seq]..self.seq_starts[seq + 1]
    }

    #[inline]
    pub fn features_of(&self, g: usize) -> &[Sym] {
        let w = self.schema.columns.len();
        &self.features[g * w..(g + 1) * w]
    }

    #[inline]
    pub fn feature(&self, g: usize, col: usize) -> Sym {
        self.features[g * self.schema.columns.len() + col]
    }

    #[inline]
    pub fn current(&self, g: usize) -> Sym {
        self.current[g]
    }

    #[inline]
    pub fn truth(&self, g: usize) -> Sym {
        self.truth[g]
    }

    pub fn current_classes(&self) -> &[Sym] {
        &self.current
    }

    pub fn true_classes(&self) -> &[Sym] {
        &self.truth
    }

    #[inline]
    pub(crate) fn set_current(&mut self, g: usize, class: Sym) {
        self.current[g] = class;
    }

    pub fn is_committed(&self, g: usize) -> bool {
        self.committed[g]
    }

    pub(crate) fn commit(&mut self, g: usize) {
        self.committed[g] = true;
    }

    pub(crate) fn clear_commitments(&mut self) {
        self.committed.iter_mut().for_each(|c| *c = false);
    }

    pub(crate) fn add_class(&mut self, class: Sym) {
        self.classes.insert(class);
    }

    /// Positions holding `value` in feature column `col`.
    pub(crate) fn postings(&self, col: usize, value: Sym) -> &[u32] {
        self.postings.by_column[col]
            .get(&value)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Positions within `radius` of `(seq, pos)`, clipped to the sequence.
    pub fn vicinity(&self, seq: usize, pos: usize, radius: usize) -> Result<Range<usize>> {
        let len = self.sequence(seq)?.len();
        if pos >= len {
            return Err(TblError::PositionOutOfRange { seq, pos, len });
        }
        Ok(pos.saturating_sub(radius)..(pos + radius + 1).min(len))
    }

    /// Global-index form of [`Corpus::vicinity`].
    #[inline]
    pub fn vicinity_global(&self, g: usize, radius: usize) -> Range<usize> {
        let bounds = self.sequence_bounds(g);
        g.saturating_sub(radius).max(bounds.start)..(g + radius + 1).min(bounds.end)
    }

    /// Number of samples whose current class differs from the true class.
    pub fn error_count(&self) -> Result<usize> {
        if !self.assigned {
            return Err(TblError::Unassigned);
        }
        Ok(self
            .current
            .iter()
            .zip(&self.truth)
            .filter(|(c, t)| c != t)
            .count())
    }

    /// Sets every current class from `classes` (one per sample).
    pub(crate) fn set_all_current(&mut self, classes: Vec<Sym>) {
        debug_assert_eq!(classes.len(), self.len());
        for &c in &classes {
            self.classes.insert(c);
        }
        self.current = classes;
        self.assigned = true;
        self.clear_commitments();
    }

    /// Copy of the first `num_sequences` sequences.
    pub fn prefix(&self, num_sequences: usize) -> Result<Corpus> {
        let k = num_sequences.min(self.num_sequences());
        let mut b = CorpusBuilder::new(self.schema.clone());
        b.symbols = self.symbols.clone();
        let mut features: Vec<&str> = Vec::new();
        for s in 0..k {
            for g in self.seq_starts[s]..self.seq_starts[s + 1] {
                features.clear();
                features.extend(self.features_of(g).iter().map(|&f| self.symbols.resolve(f)));
                b.push(Row {
                    features: &features,
                    truth: self.symbols.resolve(self.truth[g]),
                })?;
            }
            b.end_sequence();
        }
        let mut out = b.finish()?;
        if self.assigned {
            let n = out.len();
            out.set_all_current(self.current[..n].to_vec());
        }
        Ok(out)
    }
}

/// How the initial current class is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Most frequent true class in the corpus.
    Global,
    /// Most frequent true class per value of the named column, backing off to
    /// the global majority for unseen values.
    ByColumn(String),
    /// Copy the named column's value.
    CopyColumn(String),
}

impl FromStr for InitMode {
    type Err = TblError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "global" {
            Ok(InitMode::Global)
        } else if let Some(c) = s.strip_prefix("column:") {
            Ok(InitMode::ByColumn(c.to_string()))
        } else if let Some(c) = s.strip_prefix("copy:") {
            Ok(InitMode::CopyColumn(c.to_string()))
        } else {
            Err(TblError::Config(format!(
                "unknown init mode `{s}` (expected global, column:NAME or copy:NAME)"
            )))
        }
    }
}

impl std::fmt::Display for InitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitMode::Global => f.write_str("global"),
            InitMode::ByColumn(c) => write!(f, "column:{c}"),
            InitMode::CopyColumn(c) => write!(f, "copy:{c}"),
        }
    }
}

/// A fitted initial-assignment model, portable across corpora because it is
/// kept in string form.
#[derive(Clone, Debug)]
pub enum InitModel {
    Global(String),
    Lexicon {
        column: String,
        entries: FxHashMap<String, String>,
        fallback: String,
    },
    Copy(String),
}

fn majority(counts: &FxHashMap<Sym, usize>) -> Option<Sym> {
    // ties go to the earlier-interned symbol
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&s, _)| s)
}

impl InitModel {
    /// Fits the model on `train` (its true classes).
    pub fn fit(train: &Corpus, mode: &InitMode) -> Result<Self> {
        let column = |name: &str| {
            train
                .schema
                .column_index(name)
                .ok_or_else(|| TblError::UnknownColumn(name.to_string()))
        };
        let global = || {
            let mut counts = FxHashMap::default();
            for &t in &train.truth {
                *counts.entry(t).or_insert(0usize) += 1;
            }
            majority(&counts).ok_or(TblError::EmptyCorpus)
        };
        match mode {
            InitMode::Global => Ok(InitModel::Global(
                train.symbols.resolve(global()?).to_string(),
            )),
            InitMode::CopyColumn(name) => {
                column(name)?;
                Ok(InitModel::Copy(name.clone()))
            }
            InitMode::ByColumn(name) => {
                let col = column(name)?;
                let fallback = global()?;
                let mut per_value: FxHashMap<Sym, FxHashMap<Sym, usize>> = FxHashMap::default();
                for g in 0..train.len() {
                    *per_value
                        .entry(train.feature(g, col))
                        .or_default()
                        .entry(train.truth[g])
                        .or_insert(0) += 1;
                }
                let entries = per_value
                    .iter()
                    .map(|(v, counts)| {
                        (
                            train.symbols.resolve(*v).to_string(),
                            train.symbols.resolve(majority(counts).unwrap()).to_string(),
                        )
                    })
                    .collect();
                Ok(InitModel::Lexicon {
                    column: name.clone(),
                    entries,
                    fallback: train.symbols.resolve(fallback).to_string(),
                })
            }
        }
    }

    /// Assigns every sample's current class and clears commitments.
    pub fn apply(&self, corpus: &mut Corpus) -> Result<()> {
        let column = |corpus: &Corpus, name: &str| {
            corpus
                .schema
                .column_index(name)
                .ok_or_else(|| TblError::UnknownColumn(name.to_string()))
        };
        let classes = match self {
            InitModel::Global(class) => {
                let c = corpus.symbols.intern(class);
                vec![c; corpus.len()]
            }
            InitModel::Copy(name) => {
                let col = column(corpus, name)?;
                (0..corpus.len()).map(|g| corpus.feature(g, col)).collect()
            }
            InitModel::Lexicon {
                column: name,
                entries,
                fallback,
            } => {
                let col = column(corpus, name)?;
                let mut cache: FxHashMap<Sym, Sym> = FxHashMap::default();
                let fallback = corpus.symbols.intern(fallback);
                let mut out = Vec::with_capacity(corpus.len());
                for g in 0..corpus.len() {
                    let v = corpus.feature(g, col);
                    let c = match cache.get(&v) {
                        Some(&c) => c,
                        None => {
                            let value = corpus.symbols.resolve(v).to_string();
                            let c = match entries.get(&value) {
                                Some(class) => corpus.symbols.intern(class),
                                None => fallback,
                            };
                            cache.insert(v, c);
                            c
                        }
                    };
                    out.push(c);
                }
                out
            }
        };
        corpus.set_all_current(classes);
        Ok(())
    }
}

/// Fits `mode` on the corpus itself and assigns initial classes.
pub fn assign_initial(corpus: &mut Corpus, mode: &InitMode) -> Result<()> {
    let model = InitModel::fit(corpus, mode)?;
    model.apply(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema3() -> Schema {
        Schema::parse("word,pos,chunk").unwrap()
    }

    #[test]
    fn loads_chunk_table_line() {
        let c = Corpus::parse("A.P. NNP B-NP\n", schema3()).unwrap();
        assert_eq!(c.len(), 1);
        let s = c.sample(0);
        let feats: Vec<&str> = s
            .static_features()
            .iter()
            .map(|&f| c.symbols().resolve(f))
            .collect();
        assert_eq!(feats, ["A.P.", "NNP"]);
        assert_eq!(c.symbols().resolve(s.true_class()), "B-NP");
        assert!(s.current_class().is_none());
    }

    #[test]
    fn blank_line_separates_sequences() {
        let c = Corpus::parse("a X Y\nb X Y\n\n# comment\nc X Y\n\n\n", schema3()).unwrap();
        assert_eq!(c.num_sequences(), 2);
        assert_eq!(c.sequence(0).unwrap().len(), 2);
        assert_eq!(c.sequence(1).unwrap().len(), 1);
        let positions: Vec<usize> = c.sequence(0).unwrap().samples().map(|s| s.position()).collect();
        assert_eq!(positions, [0, 1]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let schema = Schema::parse("a,b,c,d").unwrap();
        let err = Corpus::parse("w x y z\nw x y\n", schema).unwrap_err();
        assert!(matches!(
            err,
            TblError::RaggedRow {
                line: 2,
                expected: 4,
                found: 3
            }
        ));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            Corpus::parse("\n# nothing\n\n", schema3()),
            Err(TblError::EmptyInput)
        ));
    }

    #[test]
    fn undeclared_initial_column() {
        assert!(matches!(
            Schema::new(["word"], "tag", Some("guess")),
            Err(TblError::UnknownColumn(_))
        ));
    }

    #[test]
    fn initial_column_assigns_current() {
        let schema = Schema::parse("word,guess*,tag").unwrap();
        let c = Corpus::parse("the D D\ndog V N\n", schema).unwrap();
        assert!(c.is_assigned());
        assert_eq!(c.error_count().unwrap(), 1);
        assert!(c.class_alphabet().contains(&c.symbols().get("V").unwrap()));
    }

    #[test]
    fn global_majority() {
        let mut c = Corpus::parse("x A\ny A\nz B\n", Schema::parse("w,t").unwrap()).unwrap();
        assign_initial(&mut c, &InitMode::Global).unwrap();
        let a = c.symbols().get("A").unwrap();
        assert!(c.current_classes().iter().all(|&s| s == a));
        assert_eq!(c.error_count().unwrap(), 1);
    }

    #[test]
    fn global_tie_prefers_first_interned() {
        let mut c = Corpus::parse("x A\ny B\nz B\nw A\n", Schema::parse("w,t").unwrap()).unwrap();
        assign_initial(&mut c, &InitMode::Global).unwrap();
        let a = c.symbols().get("A").unwrap();
        assert!(c.current_classes().iter().all(|&s| s == a));
    }

    #[test]
    fn lexicon_backs_off_to_global() {
        let schema = Schema::parse("w,t").unwrap();
        let train = Corpus::parse("dog N\nthe D\ncat N\n", schema.clone()).unwrap();
        let model = InitModel::fit(&train, &InitMode::ByColumn("w".into())).unwrap();
        let mut test = Corpus::parse("the X\nzyzzy X\ndog X\n", schema).unwrap();
        model.apply(&mut test).unwrap();
        let got: Vec<&str> = test
            .current_classes()
            .iter()
            .map(|&s| test.symbols().resolve(s))
            .collect();
        assert_eq!(got, ["D", "N", "N"]);
    }

    #[test]
    fn init_mode_unknown_column() {
        let mut c = Corpus::parse("x A\n", Schema::parse("w,t").unwrap()).unwrap();
        assert!(matches!(
            assign_initial(&mut c, &InitMode::ByColumn("pos".into())),
            Err(TblError::UnknownColumn(_))
        ));
        assert!(matches!(
            assign_initial(&mut c, &InitMode::CopyColumn("pos".into())),
            Err(TblError::UnknownColumn(_))
        ));
    }

    #[test]
    fn copy_column_mode() {
        let mut c = Corpus::parse("A A\nB A\n", Schema::parse("w,t").unwrap()).unwrap();
        assign_initial(&mut c, &InitMode::CopyColumn("w".into())).unwrap();
        assert_eq!(c.error_count().unwrap(), 1);
    }

    #[test]
    fn vicinity_windows() {
        let text: String = (0..10).map(|i| format!("w{i} A\n")).collect::<String>() + "\nx A\ny A\nz A\n";
        let c = Corpus::parse(&text, Schema::parse("w,t").unwrap()).unwrap();
        assert_eq!(c.vicinity(0, 4, 2).unwrap(), 2..7);
        assert_eq!(c.vicinity(0, 4, 0).unwrap(), 4..5);
        assert_eq!(c.vicinity(1, 0, 2).unwrap(), 0..3);
        assert!(matches!(
            c.vicinity(1, 3, 1),
            Err(TblError::PositionOutOfRange { .. })
        ));
        assert_eq!(c.vicinity_global(10, 2), 10..13);
    }

    #[test]
    fn error_count_requires_assignment() {
        let c = Corpus::parse("x A\n", Schema::parse("w,t").unwrap()).unwrap();
        assert!(matches!(c.error_count(), Err(TblError::Unassigned)));
    }

    #[test]
    fn error_count_three_of_four() {
        let schema = Schema::parse("w,g*,t").unwrap();
        let c = Corpus::parse("a A A\nb A B\nc A B\nd A B\n", schema).unwrap();
        assert_eq!(c.error_count().unwrap(), 3);
    }

    #[test]
    fn schema_descriptor_round_trip() {
        let s = Schema::parse("word,guess*,tag").unwrap();
        assert_eq!(s.descriptor(), "word,guess*,tag");
        assert_eq!(Schema::parse(&s.descriptor()).unwrap(), s);
        assert!(Schema::parse("class,tag").is_err());
        assert!(Schema::parse("tag").is_err());
    }
}
