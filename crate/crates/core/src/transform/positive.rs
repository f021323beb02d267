//! Semantics-preserving rewrites: variable renaming, function renaming and
//! declaration permutation.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{realize, AppliedTransform, Edit, LibraryAllowlist, Relation, Rewrite, TransformKind,
    TransformedCode};
use crate::error::NotApplicable;
use crate::flow::{independent_declarations, Analysis, Site, TransformMenu};
use crate::syntax::{is_keyword, is_primitive_type, is_type_name, Span};

#[derive(Debug, Clone, Copy)]
pub enum RenameMode<'p> {
    /// `VAR_0`, `VAR_1`, ... in definition order.
    Abstract,
    /// Identifiers drawn from a pool of names seen in the corpus.
    RandomPool(&'p [String]),
}

fn identifiers_in(a: &Analysis) -> HashSet<&str> {
    a.tree.token_texts().into_iter().collect()
}

fn fresh_names(prefix: &str, count: usize, taken: &HashSet<&str>) -> Vec<String> {
    (0..)
        .map(|i| format!("{prefix}{i}"))
        .filter(|n| !taken.contains(n.as_str()))
        .take(count)
        .collect()
}

fn usable_pool_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_keyword(name)
        && !is_primitive_type(name)
        && !is_type_name(name)
}

/// Rename every local variable and parameter, definition and resolved uses
/// alike, to distinct fresh names.
pub fn rename_variables(
    a: &Analysis,
    mode: RenameMode<'_>,
    rng: &mut impl Rng,
) -> Result<Rewrite, NotApplicable> {
    let defs = a.scopes.defs();
    if defs.is_empty() {
        return Err(NotApplicable(TransformKind::VarRename));
    }
    let taken = identifiers_in(a);
    let mut names: Vec<String> = match mode {
        RenameMode::Abstract => Vec::new(),
        RenameMode::RandomPool(pool) => {
            let mut seen = HashSet::new();
            let mut candidates: Vec<&String> = pool
                .iter()
                .filter(|n| usable_pool_name(n) && !taken.contains(n.as_str()) && seen.insert(*n))
                .collect();
            candidates.shuffle(rng);
            candidates.into_iter().take(defs.len()).cloned().collect()
        }
    };
    if names.len() < defs.len() {
        let mut taken_now = taken.clone();
        taken_now.extend(names.iter().map(String::as_str));
        let extra = fresh_names("VAR_", defs.len() - names.len(), &taken_now);
        names.extend(extra);
    }
    let mut rw = Rewrite::new(TransformKind::VarRename).with_meta(
        "mode",
        match mode {
            RenameMode::Abstract => "abstract",
            RenameMode::RandomPool(_) => "random_pool",
        },
    );
    for (id, (def, new)) in defs.iter().zip(&names).enumerate() {
        rw.edits.push(Edit::new(a.tree.span(def.ident), new.clone()));
        for u in a.scopes.uses_of(id) {
            rw.edits.push(Edit::new(a.tree.span(u.ident), new.clone()));
        }
        rw.metadata.push((def.name.clone(), new.clone()));
    }
    Ok(rw)
}

/// Rename each non-library callee to `FUNC_i` in order of first occurrence.
/// A recursive call renames the function's own name as well.
pub fn rename_functions(
    a: &Analysis,
    library: &LibraryAllowlist,
) -> Result<Rewrite, NotApplicable> {
    let sites = crate::flow::menu::callee_sites(a, library);
    if sites.is_empty() {
        return Err(NotApplicable(TransformKind::FuncRename));
    }
    let taken = identifiers_in(a);
    let names = fresh_names("FUNC_", sites.len(), &taken);
    let mut rw = Rewrite::new(TransformKind::FuncRename);
    for (site, new) in sites.iter().zip(names) {
        let Site::Callee { name, idents } = site else {
            unreachable!("callee_sites yields callees")
        };
        for &ident in idents {
            rw.edits.push(Edit::new(a.tree.span(ident), new.clone()));
        }
        rw.metadata.push((name.clone(), new));
    }
    Ok(rw)
}

/// Move the independent declarations to the start of the function body in a
/// random order different from the original one.
pub fn permute_statements(a: &Analysis, rng: &mut impl Rng) -> Result<Rewrite, NotApplicable> {
    let decls = independent_declarations(&a.tree, &a.scopes);
    if decls.len() < 2 {
        return Err(NotApplicable(TransformKind::Permute));
    }
    let mut order: Vec<usize> = (0..decls.len()).collect();
    while order.iter().enumerate().all(|(i, &o)| i == o) {
        order.shuffle(rng);
    }
    let text = a.text();
    let tree = &a.tree;
    let body = tree.function_body().expect("declarations live in a body");
    let first = tree.children(body)[1];
    let first_span = tree.span(first);
    let insert_at = line_start(text, first_span.start);
    let own_line = text[insert_at..first_span.start].trim().is_empty()
        && insert_at > 0;

    let mut rw = Rewrite::new(TransformKind::Permute);
    for &d in &decls {
        let span = tree.span(d);
        let start = line_start(text, span.start);
        let end = line_end(text, span.end);
        let alone = text[start..span.start].trim().is_empty()
            && text[span.end..end].trim().is_empty()
            && own_line;
        if alone {
            let end = if text[end..].starts_with('\n') { end + 1 } else { end };
            rw.edits.push(Edit::new(Span::new(start, end), ""));
        } else {
            rw.edits.push(Edit::new(span, ""));
        }
    }
    let hoisted: Vec<&str> = order.iter().map(|&i| tree.text(decls[i])).collect();
    if own_line {
        let indent = &text[insert_at..first_span.start];
        let block: String = hoisted
            .iter()
            .map(|d| format!("{indent}{d}\n"))
            .collect();
        rw.edits.push(Edit::insert(insert_at, block));
    } else {
        rw.edits
            .push(Edit::insert(first_span.start, format!("{} ", hoisted.join(" "))));
    }
    let order_text: Vec<String> = order.iter().map(usize::to_string).collect();
    rw.metadata.push(("order".into(), order_text.join(",")));
    Ok(rw)
}

fn line_start(text: &str, pos: usize) -> usize {
    text[..pos].rfind('\n').map_or(0, |i| i + 1)
}

/// Offset of the newline ending the line containing `pos` (or text end).
fn line_end(text: &str, pos: usize) -> usize {
    text[pos..].find('\n').map_or(text.len(), |i| pos + i)
}

#[derive(Debug, Clone)]
pub struct PositiveConfig<'c> {
    /// Maximum number of positive transforms composed into one sample.
    pub max_compose: usize,
    pub library: &'c LibraryAllowlist,
    /// Identifier pool for random renaming; abstract names only when empty.
    pub name_pool: &'c [String],
}

const POSITIVE_ORDER: [TransformKind; 3] = [
    TransformKind::Permute,
    TransformKind::FuncRename,
    TransformKind::VarRename,
];

/// Compose the applicable positive transforms (at most `max_compose`, chosen
/// at random when more apply) into one functionally equivalent variant.
/// Permutation runs first, then function and variable renaming, each on the
/// re-parsed output of the previous step.
pub fn generate_positive(
    a: &Analysis,
    menu: &TransformMenu,
    rng: &mut impl Rng,
    cfg: &PositiveConfig<'_>,
) -> Result<TransformedCode, NotApplicable> {
    let available: Vec<TransformKind> = POSITIVE_ORDER
        .into_iter()
        .filter(|&k| menu.contains(k))
        .collect();
    let Some(&first) = available.first() else {
        return Err(NotApplicable(TransformKind::VarRename));
    };
    let k = available.len().min(cfg.max_compose.max(1));
    let mut chosen: Vec<TransformKind> = available.choose_multiple(rng, k).copied().collect();
    chosen.sort_by_key(|c| POSITIVE_ORDER.iter().position(|p| p == c));

    let mut current = a.clone();
    let mut provenance: Vec<AppliedTransform> = Vec::new();
    for kind in chosen {
        let rewrite = match kind {
            TransformKind::Permute => permute_statements(&current, rng),
            TransformKind::FuncRename => rename_functions(&current, cfg.library),
            _ => {
                let mode = if !cfg.name_pool.is_empty() && rng.gen_bool(0.5) {
                    RenameMode::RandomPool(cfg.name_pool)
                } else {
                    RenameMode::Abstract
                };
                rename_variables(&current, mode, rng)
            }
        };
        let Ok(rewrite) = rewrite else { continue };
        if let Some(next) = realize(&current, &rewrite) {
            provenance.push(rewrite.applied());
            current = next;
        }
    }
    if provenance.is_empty() || current.unit.text == a.unit.text {
        return Err(NotApplicable(first));
    }
    Ok(TransformedCode {
        analysis: current,
        provenance,
        relation: Relation::Positive,
        bug: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::applicable_transforms;
    use crate::syntax::SourceUnit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn analysis(text: &str) -> Analysis {
        Analysis::new(SourceUnit::new("t", text)).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn run(a: &Analysis, rw: &Rewrite) -> String {
        realize(a, rw).unwrap().unit.text
    }

    #[test]
    fn abstract_variable_names() {
        let a = analysis("int foo(int bar){return bar;}");
        let rw = rename_variables(&a, RenameMode::Abstract, &mut rng()).unwrap();
        assert_eq!(run(&a, &rw), "int foo(int VAR_0){return VAR_0;}");
        let none = analysis("int f(){return 0;}");
        assert_eq!(
            rename_variables(&none, RenameMode::Abstract, &mut rng()),
            Err(NotApplicable(TransformKind::VarRename))
        );
    }

    #[test]
    fn fresh_names_skip_existing_identifiers() {
        let a = analysis("int f(int a){ int VAR_0 = a; return VAR_0; }");
        let rw = rename_variables(&a, RenameMode::Abstract, &mut rng()).unwrap();
        assert_eq!(run(&a, &rw), "int f(int VAR_1){ int VAR_2 = VAR_1; return VAR_2; }");
    }

    #[test]
    fn shadowed_names_get_distinct_fresh_names() {
        let a = analysis("void f(){ int a = 1; { int a = 2; g(a); } g(a); }");
        let rw = rename_variables(&a, RenameMode::Abstract, &mut rng()).unwrap();
        assert_eq!(
            run(&a, &rw),
            "void f(){ int VAR_0 = 1; { int VAR_1 = 2; g(VAR_1); } g(VAR_0); }"
        );
    }

    #[test]
    fn pool_names_are_unique_and_fresh() {
        let a = analysis("int f(int a, int b){ int count = a + b; return count; }");
        let pool: Vec<String> = ["count", "len", "len", "idx", "size_t", "while", "total"]
            .map(String::from)
            .to_vec();
        let rw = rename_variables(&a, RenameMode::RandomPool(&pool), &mut rng()).unwrap();
        let new: Vec<&str> = rw.metadata[1..].iter().map(|(_, n)| n.as_str()).collect();
        let unique: HashSet<_> = new.iter().collect();
        assert_eq!(unique.len(), 3);
        for n in &new {
            assert!(["len", "idx", "total"].contains(n), "{n}");
        }
    }

    #[test]
    fn function_renaming() {
        let lib = LibraryAllowlist::standard();
        let a = analysis("void f(int y){ int x; x=compute(y); }");
        let rw = rename_functions(&a, &lib).unwrap();
        assert_eq!(run(&a, &rw), "void f(int y){ int x; x=FUNC_0(y); }");
        let a = analysis("void f(char *d, char *s, int n){ memcpy(d,s,n); }");
        assert!(rename_functions(&a, &lib).is_err());
        let a = analysis("int f(int n){ return helper(compute(n)) + compute(n) + f(n - 1); }");
        let rw = rename_functions(&a, &lib).unwrap();
        assert_eq!(
            run(&a, &rw),
            "int FUNC_2(int n){ return FUNC_0(FUNC_1(n)) + FUNC_1(n) + FUNC_2(n - 1); }"
        );
    }

    #[test]
    fn two_declaration_swap() {
        let a = analysis("void f(){ int a=1; int b=2; use(a,b); }");
        let rw = permute_statements(&a, &mut rng()).unwrap();
        assert_eq!(run(&a, &rw), "void f(){ int b=2; int a=1;   use(a,b); }");
        let dep = analysis("void f(){ int a=1; int b=a; }");
        assert!(permute_statements(&dep, &mut rng()).is_err());
    }

    #[test]
    fn hoisting_moves_whole_lines() {
        let a = analysis(
            "int f(int n)\n{\n    int s = n;\n    int a = 1;\n    s += a;\n    int b = 2;\n    return s + b;\n}",
        );
        let rw = permute_statements(&a, &mut rng()).unwrap();
        assert_eq!(
            run(&a, &rw),
            "int f(int n)\n{\n    int b = 2;\n    int a = 1;\n    int s = n;\n    s += a;\n    return s + b;\n}"
        );
    }

    #[test]
    fn composition_applies_every_kind() {
        let a = analysis(
            "int f(int n)\n{\n    int a = 1;\n    int b = 2;\n    return compute(a + n) + b;\n}",
        );
        let lib = LibraryAllowlist::standard();
        let menu = applicable_transforms(&a, &lib);
        let cfg = PositiveConfig {
            max_compose: 3,
            library: &lib,
            name_pool: &[],
        };
        let out = generate_positive(&a, &menu, &mut rng(), &cfg).unwrap();
        let kinds: Vec<_> = out.provenance.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, POSITIVE_ORDER.to_vec());
        assert!(out.text().contains("FUNC_0(VAR_"));
        assert!(out.text().starts_with("int f(int VAR_0)\n{\n    int VAR_1 = 2;\n    int VAR_2 = 1;"));

        let one = PositiveConfig { max_compose: 1, ..cfg };
        let out = generate_positive(&a, &menu, &mut rng(), &one).unwrap();
        assert_eq!(out.provenance.len(), 1);

        let empty = analysis("int f(){return 0;}");
        let menu = applicable_transforms(&empty, &lib);
        assert!(generate_positive(&empty, &menu, &mut rng(), &cfg).is_err());
    }
}
