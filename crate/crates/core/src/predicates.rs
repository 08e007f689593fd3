//! Rule templates, instantiated predicates and class views.
//!
//! A template is a conjunction of atoms, each reading either a static
//! feature column or the dynamic current class at a relative offset.
//! Instantiating a template at a position binds every atom to a concrete
//! symbol; atoms that fall outside the sequence bind to
//! [`Sym::OUT_OF_RANGE`], so instantiation never fails.

use std::borrow::Cow;
use std::fmt;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::corpus::{Corpus, Schema};
use crate::error::{Result, TblError};
use crate::symbols::{Sym, SymbolTable};

pub const DEFAULT_MAX_OFFSET: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AtomSource {
    Feature(usize),
    Class,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TemplateAtom {
    pub source: AtomSource,
    pub offset: i32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    id: u32,
    atoms: Vec<TemplateAtom>,
    text: String,
}

impl Template {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn atoms(&self) -> &[TemplateAtom] {
        &self.atoms
    }

    pub fn is_dynamic(&self) -> bool {
        self.atoms.iter().any(|a| a.source == AtomSource::Class)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Parses one template per line (`class@-1,word@0`). Blank lines and `#`
/// comments are skipped; ids follow file order.
pub fn parse_templates(text: &str, schema: &Schema) -> Result<Vec<Template>> {
    parse_templates_with_max(text, schema, DEFAULT_MAX_OFFSET)
}

pub fn parse_templates_with_max(
    text: &str,
    schema: &Schema,
    max_offset: i32,
) -> Result<Vec<Template>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut atoms = Vec::new();
        let mut parts = Vec::new();
        for spec in line.split(',') {
            let spec = spec.trim();
            let (name, offset) = spec.split_once('@').ok_or_else(|| {
                TblError::Template(format!("line {}: atom `{spec}` lacks `@OFFSET`", idx + 1))
            })?;
            let offset: i32 = offset.trim().parse().map_err(|_| {
                TblError::Template(format!("line {}: malformed offset in `{spec}`", idx + 1))
            })?;
            if offset.abs() > max_offset {
                return Err(TblError::Template(format!(
                    "line {}: offset {offset} exceeds the maximum of {max_offset}",
                    idx + 1
                )));
            }
            let name = name.trim();
            let source = if name == "class" {
                AtomSource::Class
            } else {
                AtomSource::Feature(
                    schema
                        .column_index(name)
                        .ok_or_else(|| TblError::UnknownColumn(name.to_string()))?,
                )
            };
            let atom = TemplateAtom { source, offset };
            if atoms.contains(&atom) {
                return Err(TblError::Template(format!(
                    "line {}: duplicate atom `{spec}`",
                    idx + 1
                )));
            }
            atoms.push(atom);
            parts.push(format!("{name}@{offset}"));
        }
        out.push(Template {
            id: out.len() as u32,
            atoms,
            text: parts.join(","),
        });
    }
    if out.is_empty() {
        return Err(TblError::Template("no templates".into()));
    }
    Ok(out)
}

/// Largest offset of any dynamic-class atom; 0 when no template reads the class.
pub fn dynamic_radius(templates: &[Template]) -> usize {
    templates
        .iter()
        .flat_map(|t| t.atoms.iter())
        .filter(|a| a.source == AtomSource::Class)
        .map(|a| a.offset.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

pub type Values = SmallVec<[Sym; 4]>;

/// A template bound to concrete symbols. Equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub template_id: u32,
    pub values: Values,
}

/// Escapes `\` and `,` so that value lists split unambiguously.
pub fn escape_symbol(s: &str) -> Cow<'_, str> {
    if s.contains(['\\', ',']) {
        let mut out = String::with_capacity(s.len() + 2);
        for ch in s.chars() {
            if ch == '\\' || ch == ',' {
                out.push('\\');
            }
            out.push(ch);
        }
        Cow::Owned(out)
    } else {
        Cow::Borrowed(s)
    }
}

/// Inverse of joining escaped symbols with `,`.
pub fn split_escaped(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => {
                if let Some(next) = chars.next() {
                    cur.push(next);
                }
            }
            ',' => out.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    out.push(cur);
    out
}

pub(crate) fn join_values<'a>(values: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&escape_symbol(v));
    }
    out
}

impl Predicate {
    /// `templateId:v1,v2,...` with the out-of-range sentinel as `__OOR__`.
    pub fn render(&self, symbols: &SymbolTable) -> String {
        format!(
            "{}:{}",
            self.template_id,
            join_values(self.values.iter().map(|&v| symbols.resolve(v)))
        )
    }

    /// Parses the [`Predicate::render`] form. Unknown symbols yield `None`
    /// (such a predicate cannot hold anywhere in the corpus).
    pub fn parse(text: &str, symbols: &SymbolTable) -> Result<Option<Predicate>> {
        let (id, rest) = text
            .split_once(':')
            .ok_or_else(|| TblError::Config(format!("malformed predicate `{text}`")))?;
        let template_id: u32 = id
            .parse()
            .map_err(|_| TblError::Config(format!("malformed template id in `{text}`")))?;
        let mut values = Values::new();
        for v in split_escaped(rest) {
            match symbols.get(&v) {
                Some(s) => values.push(s),
                None => return Ok(None),
            }
        }
        Ok(Some(Predicate {
            template_id,
            values,
        }))
    }
}

/// Positions whose class differs from the underlying array.
pub type Overlay = FxHashMap<u32, Sym>;

/// Read access to the corpus with a class assignment that may differ from
/// the corpus's own current classes: either a separate class array or an
/// overlay of changed positions.
#[derive(Clone, Copy)]
pub struct ClassView<'a> {
    corpus: &'a Corpus,
    classes: &'a [Sym],
    overlay: Option<&'a Overlay>,
}

impl<'a> ClassView<'a> {
    /// The corpus as it currently is.
    pub fn current(corpus: &'a Corpus) -> Self {
        ClassView {
            corpus,
            classes: corpus.current_classes(),
            overlay: None,
        }
    }

    /// The corpus features paired with an explicit class array.
    pub fn with_classes(corpus: &'a Corpus, classes: &'a [Sym]) -> Self {
        assert_eq!(classes.len(), corpus.len());
        ClassView {
            corpus,
            classes,
            overlay: None,
        }
    }

    pub fn with_overlay(self, overlay: &'a Overlay) -> Self {
        ClassView {
            overlay: Some(overlay),
            ..self
        }
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    #[inline]
    pub fn class_at(&self, g: usize) -> Sym {
        if let Some(o) = self.overlay {
            if let Some(&c) = o.get(&(g as u32)) {
                return c;
            }
        }
        self.classes[g]
    }

    /// Writes the values of `template` at global position `g` into `out`.
    #[inline]
    pub fn fill(&self, g: usize, template: &Template, out: &mut Values) {
        out.clear();
        let bounds = self.corpus.sequence_bounds(g);
        for atom in &template.atoms {
            let at = g as i64 + atom.offset as i64;
            let value = if at < bounds.start as i64 || at >= bounds.end as i64 {
                Sym::OUT_OF_RANGE
            } else {
                let at = at as usize;
                match atom.source {
                    AtomSource::Feature(col) => self.corpus.feature(at, col),
                    AtomSource::Class => self.class_at(at),
                }
            };
            out.push(value);
        }
    }

    /// Instantiation at a global position.
    pub fn instantiate_at(&self, g: usize, template: &Template) -> Predicate {
        let mut values = Values::new();
        self.fill(g, template, &mut values);
        Predicate {
            template_id: template.id,
            values,
        }
    }

    /// True iff the predicate's template instantiated at `g` yields its values.
    #[inline]
    pub fn holds_at(&self, predicate: &Predicate, template: &Template, g: usize) -> bool {
        debug_assert_eq!(predicate.template_id, template.id);
        let bounds = self.corpus.sequence_bounds(g);
        template
            .atoms
            .iter()
            .zip(&predicate.values)
            .all(|(atom, &want)| {
                let at = g as i64 + atom.offset as i64;
                let value = if at < bounds.start as i64 || at >= bounds.end as i64 {
                    Sym::OUT_OF_RANGE
                } else {
                    let at = at as usize;
                    match atom.source {
                        AtomSource::Feature(col) => self.corpus.feature(at, col),
                        AtomSource::Class => self.class_at(at),
                    }
                };
                value == want
            })
    }
}

pub fn instantiate(
    view: &ClassView<'_>,
    seq: usize,
    pos: usize,
    template: &Template,
) -> Result<Predicate> {
    let g = view.corpus.global(seq, pos)?;
    Ok(view.instantiate_at(g, template))
}

pub fn holds(
    predicate: &Predicate,
    templates: &[Template],
    view: &ClassView<'_>,
    seq: usize,
    pos: usize,
) -> Result<bool> {
    let g = view.corpus.global(seq, pos)?;
    let template = template_of(templates, predicate)?;
    Ok(view.holds_at(predicate, template, g))
}

/// One predicate per template, in template order.
pub fn predicates_at(
    view: &ClassView<'_>,
    seq: usize,
    pos: usize,
    templates: &[Template],
) -> Result<Vec<Predicate>> {
    let g = view.corpus.global(seq, pos)?;
    Ok(templates.iter().map(|t| view.instantiate_at(g, t)).collect())
}

pub(crate) fn template_of<'t>(templates: &'t [Template], p: &Predicate) -> Result<&'t Template> {
    templates
        .get(p.template_id as usize)
        .filter(|t| t.atoms.len() == p.values.len())
        .ok_or_else(|| TblError::SchemaMismatch(format!("no template {}", p.template_id)))
}

/// Visits every position where `predicate` could hold, in ascending order.
///
/// Candidates come from the posting list of the rarest static atom; templates
/// whose static atoms all bind the sentinel fall back to a full scan.
pub(crate) fn for_each_candidate(
    corpus: &Corpus,
    template: &Template,
    predicate: &Predicate,
    mut visit: impl FnMut(usize) -> bool,
) {
    let mut best: Option<(&[u32], i32)> = None;
    for (atom, &value) in template.atoms.iter().zip(&predicate.values) {
        if let AtomSource::Feature(col) = atom.source {
            if value == Sym::OUT_OF_RANGE {
                continue;
            }
            let list = corpus.postings(col, value);
            if best.is_none_or(|(b, _)| list.len() < b.len()) {
                best = Some((list, atom.offset));
            }
        }
    }
    match best {
        Some((list, offset)) => {
            for &h in list {
                let g = h as i64 - offset as i64;
                if g < 0 || g as usize >= corpus.len() {
                    continue;
                }
                if !visit(g as usize) {
                    return;
                }
            }
        }
        None => {
            for g in 0..corpus.len() {
                if !visit(g) {
                    return;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Schema;

    fn schema() -> Schema {
        Schema::parse("word,guess*,tag").unwrap()
    }

    fn corpus(text: &str) -> Corpus {
        Corpus::parse(text, schema()).unwrap()
    }

    #[test]
    fn parses_dynamic_and_static_atoms() {
        let t = parse_templates("class@-1,class@1\nword@0\n", &schema()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].atoms().len(), 2);
        assert!(t[0].atoms().iter().all(|a| a.source == AtomSource::Class));
        assert!(!t[1].is_dynamic());
        assert_eq!(t[1].id(), 1);
        assert_eq!(t[0].to_string(), "class@-1,class@1");
    }

    #[test]
    fn template_errors() {
        let s = schema();
        assert!(matches!(
            parse_templates("clss@-1", &s),
            Err(TblError::UnknownColumn(c)) if c == "clss"
        ));
        assert!(matches!(parse_templates("word@x", &s), Err(TblError::Template(_))));
        assert!(matches!(parse_templates("word", &s), Err(TblError::Template(_))));
        assert!(matches!(
            parse_templates("word@0,word@0", &s),
            Err(TblError::Template(_))
        ));
        assert!(matches!(parse_templates("\n# x\n", &s), Err(TblError::Template(_))));
        assert!(matches!(parse_templates("word@4", &s), Err(TblError::Template(_))));
        assert!(parse_templates_with_max("word@4", &s, 4).is_ok());
    }

    #[test]
    fn radius() {
        let s = schema();
        let t = parse_templates("class@-2\nclass@1,word@0\n", &s).unwrap();
        assert_eq!(dynamic_radius(&t), 2);
        let t = parse_templates("word@-3,guess@2\n", &s).unwrap();
        assert_eq!(dynamic_radius(&t), 0);
        assert_eq!(dynamic_radius(&[]), 0);
    }

    #[test]
    fn instantiate_reads_neighbors_and_sentinel() {
        let c = corpus("the B D\ndog X N\n");
        let t = parse_templates("class@-1,word@0", &schema()).unwrap();
        let view = ClassView::current(&c);
        let sym = |s: &str| c.symbols().get(s).unwrap();
        let p = instantiate(&view, 0, 1, &t[0]).unwrap();
        assert_eq!(p.values.as_slice(), &[sym("B"), sym("dog")]);
        let p0 = instantiate(&view, 0, 0, &t[0]).unwrap();
        assert_eq!(p0.values.as_slice(), &[Sym::OUT_OF_RANGE, sym("the")]);
        assert_eq!(p0.render(c.symbols()), "0:__OOR__,the");

        let mut overlay = Overlay::default();
        let mut c2 = c.clone();
        let x = c2.symbols_mut().intern("X");
        overlay.insert(0, x);
        let view = ClassView::current(&c2).with_overlay(&overlay);
        let p = instantiate(&view, 0, 1, &t[0]).unwrap();
        assert_eq!(p.values.as_slice(), &[x, sym("dog")]);
    }

    #[test]
    fn holds_semantics() {
        let c = corpus("a A A\nb A A\nc B B\n\nb A A\n");
        let t = parse_templates("class@-1,word@0", &schema()).unwrap();
        let view = ClassView::current(&c);
        let p = instantiate(&view, 0, 1, &t[0]).unwrap();
        assert!(holds(&p, &t, &view, 0, 1).unwrap());
        // different word
        assert!(!holds(&p, &t, &view, 0, 2).unwrap());
        // same word, left neighbor out of range
        assert!(!holds(&p, &t, &view, 1, 0).unwrap());

        // old vs new view where the referenced neighbor changed
        let mut overlay = Overlay::default();
        overlay.insert(0, c.symbols().get("B").unwrap());
        let changed = ClassView::current(&c).with_overlay(&overlay);
        assert!(holds(&p, &t, &view, 0, 1).unwrap());
        assert!(!holds(&p, &t, &changed, 0, 1).unwrap());
    }

    #[test]
    fn predicates_at_one_per_template() {
        let c = corpus("a A A\nb A A\na A A\n");
        let t = parse_templates("word@0\nguess@0\nword@-1\nword@1\nclass@-1", &schema()).unwrap();
        let view = ClassView::current(&c);
        assert_eq!(predicates_at(&view, 0, 1, &t).unwrap().len(), 5);
        let statics = &t[..2];
        assert_eq!(
            predicates_at(&view, 0, 0, statics).unwrap(),
            predicates_at(&view, 0, 2, statics).unwrap()
        );
        let single = corpus("z A A\n");
        let p = predicates_at(&ClassView::current(&single), 0, 0, &t[4..]).unwrap();
        assert_eq!(p[0].values.as_slice(), &[Sym::OUT_OF_RANGE]);
    }

    #[test]
    fn escaping_round_trips() {
        for s in ["plain", ",", "a\\b", "x,y\\,z", ""] {
            let joined = join_values([s, "q"]);
            assert_eq!(split_escaped(&joined), vec![s.to_string(), "q".to_string()]);
        }
    }

    #[test]
    fn predicate_render_parse() {
        let c = corpus("a,b A A\n");
        let t = parse_templates("word@0,class@1", &schema()).unwrap();
        let p = ClassView::current(&c).instantiate_at(0, &t[0]);
        let text = p.render(c.symbols());
        assert_eq!(text, "0:a\\,b,__OOR__");
        assert_eq!(Predicate::parse(&text, c.symbols()).unwrap(), Some(p));
        assert_eq!(Predicate::parse("0:zz,__OOR__", c.symbols()).unwrap(), None);
    }

    #[test]
    fn candidates_cover_all_matches() {
        let c = corpus("a A A\nb A A\na A A\n\na B B\n");
        let t = parse_templates("word@1,class@0\nclass@-1", &schema()).unwrap();
        let view = ClassView::current(&c);
        for tpl in &t {
            for g in 0..c.len() {
                let p = view.instantiate_at(g, tpl);
                let mut seen = Vec::new();
                for_each_candidate(&c, tpl, &p, |h| {
                    if view.holds_at(&p, tpl, h) {
                        seen.push(h);
                    }
                    true
                });
                let brute: Vec<usize> = (0..c.len()).filter(|&h| view.holds_at(&p, tpl, h)).collect();
                assert_eq!(seen, brute);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Positions farther than the dynamic radius from every overlaid
            // position instantiate identically under base and overlay.
            #[test]
            fn view_locality(classes in proptest::collection::vec(0u8..3, 1..30),
                             flips in proptest::collection::vec((0usize..30, 0u8..3), 0..4)) {
                let text: String = classes.iter().enumerate()
                    .map(|(i, c)| format!("w{} C{} C{}\n", i % 4, c, c)).collect();
                let c = Corpus::parse(&text, Schema::parse("word,guess*,tag").unwrap()).unwrap();
                let t = parse_templates("class@-2,word@0\nclass@1\nword@-1", c.schema()).unwrap();
                let d = dynamic_radius(&t);
                let mut overlay = Overlay::default();
                for (pos, cls) in flips {
                    if pos < c.len() {
                        if let Some(s) = c.symbols().get(&format!("C{cls}")) {
                            overlay.insert(pos as u32, s);
                        }
                    }
                }
                let base = ClassView::current(&c);
                let over = ClassView::current(&c).with_overlay(&overlay);
                for q in 0..c.len() {
                    let far = overlay.keys().all(|&k| (k as i64 - q as i64).unsigned_abs() as usize > d);
                    if far {
                        for tpl in &t {
                            prop_assert_eq!(base.instantiate_at(q, tpl), over.instantiate_at(q, tpl));
                        }
                    }
                }
            }
        }
    }
}
