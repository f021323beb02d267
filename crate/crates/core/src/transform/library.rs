use std::collections::BTreeSet;

const STANDARD_SYMBOLS: &str = include_str!("../../data/c_stdlib_symbols.txt");

/// Callee names that function renaming leaves alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibraryAllowlist {
    names: BTreeSet<String>,
}

impl LibraryAllowlist {
    /// C standard library and common libc symbols.
    pub fn standard() -> Self {
        let mut list = Self::empty();
        list.extend_from_text(STANDARD_SYMBOLS);
        list
    }

    pub fn empty() -> Self {
        Self {
            names: BTreeSet::new(),
        }
    }

    /// Add one name per line; blank lines and `#` comments are skipped.
    pub fn extend_from_text(&mut self, text: &str) {
        self.names.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_owned),
        );
    }

    pub fn insert(&mut self, name: impl Into<String>) {
        self.names.insert(name.into());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl Default for LibraryAllowlist {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_list() {
        let l = LibraryAllowlist::standard();
        assert!(l.contains("memcpy"));
        assert!(l.contains("malloc"));
        assert!(!l.contains("compute"));
        assert!(!l.contains("# assert.h"));
    }

    #[test]
    fn extension() {
        let mut l = LibraryAllowlist::empty();
        l.extend_from_text("av_log\n\n# comment\n  ff_alloc  \n");
        assert_eq!(l.len(), 2);
        assert!(l.contains("ff_alloc"));
    }
}
