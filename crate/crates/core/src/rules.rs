//! Learned rule lists and training reports, with their file formats.
//!
//! A rule-list file is a block of `#`-prefixed `key=value` header lines
//! followed by one rule per line in learned order:
//!
//! ```text
//! # fasttbl rule list
//! # algo=fast
//! # schema=word,guess*,tag
//! # init=column:word
//! # threshold=1
//! # template=class@-1,word@0
//! 0|DT,dog => NN  # good=12 bad=3 f=9
//! ```

use std::io::{BufRead, Write};

use crate::corpus::{Corpus, InitMode, Schema};
use crate::error::{Result, TblError};
use crate::predicates::{parse_templates_with_max, split_escaped, Predicate, Template, Values};
use crate::rulestore::{rule_key, Counts, Rule};
use crate::symbols::{Sym, SymbolTable};

const HEADER: &str = "# fasttbl rule list";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnedRule {
    pub template_id: u32,
    pub values: Vec<String>,
    pub target: String,
    pub good: u32,
    pub bad: u32,
    pub f: i64,
}

impl LearnedRule {
    pub fn from_rule(rule: &Rule, counts: Counts, symbols: &SymbolTable) -> Self {
        LearnedRule {
            template_id: rule.predicate.template_id,
            values: rule
                .predicate
                .values
                .iter()
                .map(|&v| symbols.resolve(v).to_string())
                .collect(),
            target: symbols.resolve(rule.target).to_string(),
            good: counts.good,
            bad: counts.bad,
            f: counts.good as i64 - counts.bad as i64,
        }
    }

    /// `tplID|v1,v2,... => TARGET`
    pub fn key(&self) -> String {
        rule_key(
            self.template_id,
            self.values.iter().map(String::as_str),
            &self.target,
        )
    }

    /// `tplID|v1,v2,... => TARGET  # good=G bad=B f=F`
    pub fn render(&self) -> String {
        format!(
            "{}  # good={} bad={} f={}",
            self.key(),
            self.good,
            self.bad,
            self.f
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let bad_line = || TblError::Config(format!("malformed rule line `{line}`"));
        let (body, comment) = match line.split_once("  # ") {
            Some((b, c)) => (b, Some(c)),
            None => (line, None),
        };
        let (lhs, target) = body.split_once(" => ").ok_or_else(bad_line)?;
        let (tid, values) = lhs.split_once('|').ok_or_else(bad_line)?;
        let template_id = tid.parse().map_err(|_| bad_line())?;
        let (mut good, mut bad) = (0u32, 0u32);
        if let Some(comment) = comment {
            for field in comment.split_whitespace() {
                match field.split_once('=') {
                    Some(("good", v)) => good = v.parse().map_err(|_| bad_line())?,
                    Some(("bad", v)) => bad = v.parse().map_err(|_| bad_line())?,
                    _ => {}
                }
            }
        }
        Ok(LearnedRule {
            template_id,
            values: split_escaped(values),
            target: target.trim().to_string(),
            good,
            bad,
            f: good as i64 - bad as i64,
        })
    }

    /// Binds the rule to `corpus` symbols. A value the corpus never saw makes
    /// the predicate unsatisfiable, reported as `None`.
    pub fn resolve(&self, corpus: &mut Corpus) -> Option<Rule> {
        let symbols = corpus.symbols();
        let mut values = Values::new();
        for v in &self.values {
            values.push(symbols.get(v)?);
        }
        let target = corpus.symbols_mut().intern(&self.target);
        Some(Rule {
            predicate: Predicate {
                template_id: self.template_id,
                values,
            },
            target,
        })
    }
}

/// Ordered rules plus the metadata needed to replay them.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleList {
    pub algo: String,
    pub schema: String,
    pub templates: Vec<String>,
    pub max_offset: i32,
    pub threshold: i64,
    pub init: Option<InitMode>,
    pub rules: Vec<LearnedRule>,
}

impl RuleList {
    pub fn new(algo: &str, schema: &Schema, templates: &[Template], threshold: i64) -> Self {
        let max_offset = templates
            .iter()
            .flat_map(|t| t.atoms())
            .map(|a| a.offset.abs())
            .max()
            .unwrap_or(0)
            .max(crate::predicates::DEFAULT_MAX_OFFSET);
        RuleList {
            algo: algo.to_string(),
            schema: schema.descriptor(),
            templates: templates.iter().map(|t| t.to_string()).collect(),
            max_offset,
            threshold,
            init: None,
            rules: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Parses the stored templates against `schema`.
    pub fn templates_for(&self, schema: &Schema) -> Result<Vec<Template>> {
        parse_templates_with_max(&self.templates.join("\n"), schema, self.max_offset).map_err(
            |e| match e {
                TblError::UnknownColumn(c) => {
                    TblError::SchemaMismatch(format!("rules reference column `{c}`"))
                }
                other => other,
            },
        )
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER}")?;
        writeln!(out, "# algo={}", self.algo)?;
        writeln!(out, "# schema={}", self.schema)?;
        match &self.init {
            Some(mode) => writeln!(out, "# init={mode}")?,
            None => writeln!(out, "# init=none")?,
        }
        writeln!(out, "# threshold={}", self.threshold)?;
        writeln!(out, "# max_offset={}", self.max_offset)?;
        for t in &self.templates {
            writeln!(out, "# template={t}")?;
        }
        for r in &self.rules {
            writeln!(out, "{}", r.render())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut list = RuleList {
            algo: String::new(),
            schema: String::new(),
            templates: Vec::new(),
            max_offset: crate::predicates::DEFAULT_MAX_OFFSET,
            threshold: 1,
            init: None,
            rules: Vec::new(),
        };
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let parse_err = |msg: String| TblError::Parse { line: idx + 1, msg };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix("# ") {
                let Some((k, v)) = meta.split_once('=') else {
                    continue;
                };
                match k {
                    "algo" => list.algo = v.to_string(),
                    "schema" => list.schema = v.to_string(),
                    "init" if v == "none" => list.init = None,
                    "init" => list.init = Some(v.parse().map_err(|e: TblError| parse_err(e.to_string()))?),
                    "threshold" => {
                        list.threshold = v.parse().map_err(|_| parse_err(format!("bad threshold `{v}`")))?
                    }
                    "max_offset" => {
                        list.max_offset = v.parse().map_err(|_| parse_err(format!("bad max_offset `{v}`")))?
                    }
                    "template" => list.templates.push(v.to_string()),
                    _ => {}
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            list.rules
                .push(LearnedRule::parse(&line).map_err(|e| parse_err(e.to_string()))?);
        }
        if list.templates.is_empty() {
            return Err(TblError::Config("rule list has no templates".into()));
        }
        Ok(list)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("rule lists are UTF-8")
    }
}

/// One training iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub rule: String,
    pub good: u32,
    pub bad: u32,
    pub f: i64,
    /// Samples whose class changed when the rule was applied.
    pub changed: Vec<u32>,
    /// Error count after applying the rule, recounted from the changed samples.
    pub errors_after: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub algo: String,
    pub initial_errors: usize,
    pub final_errors: usize,
    pub records: Vec<IterationRecord>,
    /// Time spent before the first iteration (initial counting).
    pub setup_seconds: f64,
    pub total_seconds: f64,
}

impl TrainReport {
    /// CSV with columns `iteration,rule,f,changed,seconds`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "rule", "f", "changed", "seconds"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.rule.clone(),
                r.f.to_string(),
                r.changed.len().to_string(),
                format!("{:.6}", r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn iteration_seconds(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.seconds).collect()
    }
}

/// Tracks errors while a learner applies rules.
pub(crate) struct ErrorTracker {
    pub errors: usize,
}

impl ErrorTracker {
    pub fn new(corpus: &Corpus) -> Result<Self> {
        Ok(ErrorTracker {
            errors: corpus.error_count()?,
        })
    }

    /// Applies the class change `old -> new` at a sample with true class `truth`.
    pub fn update(&mut self, truth: Sym, old: Sym, new: Sym) {
        if old == truth {
            self.errors += 1;
        }
        if new == truth {
            self.errors -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_list() -> RuleList {
        RuleList {
            algo: "fast".into(),
            schema: "word,guess*,tag".into(),
            templates: vec!["class@-1,word@0".into(), "word@0".into()],
            max_offset: 3,
            threshold: 2,
            init: Some(InitMode::ByColumn("word".into())),
            rules: vec![
                LearnedRule {
                    template_id: 0,
                    values: vec!["DT".into(), ",".into()],
                    target: "NN".into(),
                    good: 5,
                    bad: 1,
                    f: 4,
                },
                LearnedRule {
                    template_id: 1,
                    values: vec!["__OOR__".into()],
                    target: "VB".into(),
                    good: 2,
                    bad: 0,
                    f: 2,
                },
            ],
        }
    }

    #[test]
    fn rule_line_format() {
        let l = sample_list();
        assert_eq!(l.rules[0].render(), "0|DT,\\, => NN  # good=5 bad=1 f=4");
        assert_eq!(l.rules[1].key(), "1|__OOR__ => VB");
    }

    #[test]
    fn file_round_trip() {
        let l = sample_list();
        let text = l.to_text();
        assert!(text.starts_with(HEADER));
        let back = RuleList::read(text.as_bytes()).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn report_csv_header() {
        let report = TrainReport {
            records: vec![IterationRecord {
                iteration: 1,
                rule: "0|a,b => C".into(),
                good: 3,
                bad: 1,
                f: 2,
                changed: vec![1, 2, 3, 4],
                errors_after: 0,
                seconds: 0.5,
            }],
            ..Default::default()
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iteration,rule,f,changed,seconds\n1,\"0|a,b => C\",2,4,0.500000\n"
        );
    }

    #[test]
    fn templates_for_reports_schema_mismatch() {
        let l = sample_list();
        let other = Schema::parse("token,tag").unwrap();
        assert!(matches!(l.templates_for(&other), Err(TblError::SchemaMismatch(_))));
    }
}
