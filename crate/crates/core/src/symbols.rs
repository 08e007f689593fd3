//! Dense interning of feature and class strings.

use std::fmt;

use rustc_hash::FxHashMap;

/// An interned symbol. Ids are assigned in first-seen order, which is also
/// the order used for every deterministic tie-break.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(pub u32);

impl Sym {
    /// Value bound by template atoms that fall outside their sequence.
    pub const OUT_OF_RANGE: Sym = Sym(0);
    /// Placeholder for a current class that has not been assigned yet.
    pub const UNASSIGNED: Sym = Sym(u32::MAX);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub const OUT_OF_RANGE_TEXT: &str = "__OOR__";

#[derive(Clone, Debug)]
pub struct SymbolTable {
    strings: Vec<Box<str>>,
    ids: FxHashMap<Box<str>, Sym>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl SymbolTable {
    pub fn new() -> Self {
        let mut table = SymbolTable {
            strings: Vec::new(),
            ids: FxHashMap::default(),
        };
        let oor = table.intern(OUT_OF_RANGE_TEXT);
        debug_assert_eq!(oor, Sym::OUT_OF_RANGE);
        table
    }

    pub fn intern(&mut self, s: &str) -> Sym {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = Sym(self.strings.len() as u32);
        self.strings.push(s.into());
        self.ids.insert(s.into(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<Sym> {
        self.ids.get(s).copied()
    }

    /// # Panics
    /// If `sym` was not produced by this table.
    pub fn resolve(&self, sym: Sym) -> &str {
        &self.strings[sym.index()]
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        // the sentinel is always present
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_is_first() {
        let t = SymbolTable::new();
        assert_eq!(t.get(OUT_OF_RANGE_TEXT), Some(Sym::OUT_OF_RANGE));
        assert_eq!(t.resolve(Sym::OUT_OF_RANGE), OUT_OF_RANGE_TEXT);
    }

    #[test]
    fn interning_round_trips_and_is_stable() {
        let mut t = SymbolTable::new();
        let a = t.intern("dog");
        let b = t.intern("cat");
        assert_eq!(t.intern("dog"), a);
        assert!(a < b);
        assert_eq!(t.resolve(a), "dog");
        assert_eq!(t.resolve(b), "cat");
        assert_eq!(t.len(), 3);
    }
}
