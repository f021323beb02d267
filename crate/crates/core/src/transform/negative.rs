//! Bug injection: six families of small, parse-preserving mutations.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    realize, token_edit_distance, CweMap, Edit, Relation, Rewrite, TransformKind,
    TransformedCode,
};
use crate::error::NotApplicable;
use crate::flow::menu::{
    call_sites, conditional_sites, numeric_type_sites, pointer_sites,
    value_sites, variable_use_sites,
};
use crate::flow::{Analysis, Site, TransformMenu, COMPARISON_OPERATORS};
use crate::syntax::NodeId;

/// Smaller numeric types a declaration type may be replaced with. `char` is
/// never produced.
pub fn demotions(type_text: &str) -> &'static [&'static str] {
    let words: Vec<&str> = type_text.split_whitespace().collect();
    match words.join(" ").as_str() {
        "long long" | "long long int" | "signed long long" => &["long", "int"],
        "unsigned long long" | "unsigned long long int" => {
            &["unsigned long", "unsigned int", "long long"]
        }
        "long" | "long int" | "signed long" => &["short", "int"],
        "unsigned long" | "unsigned long int" => &["unsigned short", "unsigned int", "long"],
        "int" | "signed int" | "signed" => &["short"],
        "unsigned int" | "unsigned" => &["unsigned short", "int"],
        "unsigned short" | "unsigned short int" => &["short"],
        "size_t" => &["int", "unsigned int"],
        "ssize_t" | "ptrdiff_t" => &["int"],
        "double" => &["float"],
        "long double" => &["double", "float"],
        "int64_t" => &["int32_t"],
        "int32_t" => &["int16_t"],
        "uint64_t" => &["uint32_t"],
        "uint32_t" => &["uint16_t"],
        _ => &[],
    }
}

fn choose(
    candidates: Vec<Rewrite>,
    kind: TransformKind,
    rng: &mut impl Rng,
) -> Result<Rewrite, NotApplicable> {
    candidates
        .choose(rng)
        .cloned()
        .ok_or(NotApplicable(kind))
}

fn replace(kind: TransformKind, a: &Analysis, node: NodeId, text: impl Into<String>) -> Rewrite {
    Rewrite::new(kind).with_edit(Edit::new(a.tree.span(node), text))
}

fn data_type_candidates(a: &Analysis) -> Vec<Rewrite> {
    let mut out = Vec::new();
    for site in numeric_type_sites(a) {
        let Site::NumericType { spec, smaller, .. } = site else { continue };
        for &to in smaller {
            let from = a.tree.text(spec).split_whitespace().collect::<Vec<_>>().join(" ");
            out.push(
                replace(TransformKind::DataType, a, spec, to)
                    .with_meta("from", from)
                    .with_meta("to", to),
            );
        }
    }
    out
}

/// Replace a numeric declaration type with a smaller one (`long` to
/// `short`).
pub fn misuse_data_type(a: &Analysis, rng: &mut impl Rng) -> Result<Rewrite, NotApplicable> {
    choose(data_type_candidates(a), TransformKind::DataType, rng)
}

fn pointer_candidates(a: &Analysis) -> Vec<Rewrite> {
    let k = TransformKind::Pointer;
    let mut out = Vec::new();
    for site in pointer_sites(a) {
        match site {
            Site::PointerInit { declarator, value } => {
                let name_part = a.tree.children(declarator)[0];
                out.push(
                    replace(k, a, declarator, a.tree.text(name_part))
                        .with_meta("action", "drop_initializer"),
                );
                out.push(replace(k, a, value, "NULL").with_meta("action", "assign_null"));
            }
            Site::PointerAssign { value, .. } => {
                out.push(replace(k, a, value, "NULL").with_meta("action", "assign_null"));
            }
            _ => {}
        }
    }
    out
}

/// Remove a pointer initializer or set a pointer to `NULL`.
pub fn misuse_pointer(a: &Analysis, rng: &mut impl Rng) -> Result<Rewrite, NotApplicable> {
    choose(pointer_candidates(a), TransformKind::Pointer, rng)
}

fn conditional_candidates(a: &Analysis) -> Vec<Rewrite> {
    let k = TransformKind::Conditional;
    let mut out = Vec::new();
    for site in conditional_sites(a) {
        match site {
            Site::SmallIf { stmt, body } => {
                out.push(
                    replace(k, a, stmt, a.tree.text(body)).with_meta("action", "remove_guard"),
                );
            }
            Site::Comparison { op } => {
                let from = a.tree.text(op);
                for to in COMPARISON_OPERATORS.into_iter().filter(|&o| o != from) {
                    out.push(
                        replace(k, a, op, to)
                            .with_meta("action", "swap_operator")
                            .with_meta("from", from)
                            .with_meta("to", to),
                    );
                }
            }
            _ => {}
        }
    }
    out
}

/// Remove a small if-guard (keeping its body) or change a comparison
/// operator.
pub fn mutate_conditional(a: &Analysis, rng: &mut impl Rng) -> Result<Rewrite, NotApplicable> {
    choose(conditional_candidates(a), TransformKind::Conditional, rng)
}

fn variable_candidates(a: &Analysis) -> Vec<Rewrite> {
    let mut out = Vec::new();
    for site in variable_use_sites(a) {
        let Site::VariableUse { ident, alternatives } = site else { continue };
        for alt in alternatives {
            let name = &a.scopes.def(alt).name;
            out.push(
                replace(TransformKind::VarMisuse, a, ident, name.as_str())
                    .with_meta("from", a.tree.text(ident))
                    .with_meta("to", name.as_str()),
            );
        }
    }
    out
}

/// Replace one variable use with another compatible variable visible there.
pub fn misuse_variable(a: &Analysis, rng: &mut impl Rng) -> Result<Rewrite, NotApplicable> {
    choose(variable_candidates(a), TransformKind::VarMisuse, rng)
}

fn value_candidates(a: &Analysis) -> Vec<Rewrite> {
    let k = TransformKind::ValueMisuse;
    let text = a.text();
    let mut out = Vec::new();
    for site in value_sites(a) {
        match site {
            Site::Initializer { declarator, .. } => {
                let name_part = a.tree.children(declarator)[0];
                out.push(
                    replace(k, a, declarator, a.tree.text(name_part))
                        .with_meta("action", "drop_initializer"),
                );
            }
            Site::Divisor { def, stmt } => {
                let name = &a.scopes.def(def).name;
                let start = a.tree.span(stmt).start;
                let line = text[..start].rfind('\n').map_or(0, |i| i + 1);
                let prefix = &text[line..start];
                let insert = if prefix.trim().is_empty() {
                    format!("{name} = 0;\n{prefix}")
                } else {
                    format!("{name} = 0; ")
                };
                out.push(
                    Rewrite::new(k)
                        .with_edit(Edit::insert(start, insert))
                        .with_meta("action", "zero_divisor")
                        .with_meta("divisor", name.as_str()),
                );
            }
            _ => {}
        }
    }
    out
}

/// Drop an initializer, or assign zero to a divisor right before the
/// statement that divides by it.
pub fn misuse_value(a: &Analysis, rng: &mut impl Rng) -> Result<Rewrite, NotApplicable> {
    choose(value_candidates(a), TransformKind::ValueMisuse, rng)
}

fn call_candidates(a: &Analysis, rng: &mut impl Rng) -> Vec<Rewrite> {
    let k = TransformKind::CallMutation;
    let tree = &a.tree;
    let mut out = Vec::new();
    for site in call_sites(a) {
        let Site::Call { call, args } = site else { continue };
        let list = tree.children(call)[1];
        let texts: Vec<&str> = args.iter().map(|&n| tree.text(n)).collect();
        let rebuilt = |new: &[&str], action: &str| {
            replace(k, a, list, format!("({})", new.join(", "))).with_meta("action", action)
        };
        // add: an in-scope variable or a literal zero
        let visible: Vec<&str> = tree
            .descendants(call)
            .find_map(|n| a.scopes.use_at(n))
            .map(|u| u.visible.iter().map(|&d| a.scopes.def(d).name.as_str()).collect())
            .unwrap_or_default();
        let mut pool = visible;
        pool.push("0");
        let extra = *pool.choose(rng).expect("pool holds the zero literal");
        let mut added = texts.clone();
        added.push(extra);
        out.push(rebuilt(&added, "add"));
        for i in 0..texts.len() {
            let mut removed = texts.clone();
            removed.remove(i);
            out.push(rebuilt(&removed, "remove"));
            if texts[i] != "NULL" {
                let mut nulled = texts.clone();
                nulled[i] = "NULL";
                out.push(rebuilt(&nulled, "assign_null"));
            }
            for j in i + 1..texts.len() {
                let same_kind = tree.label(args[i]) == tree.label(args[j]);
                if same_kind && texts[i] != texts[j] {
                    let mut swapped = texts.clone();
                    swapped.swap(i, j);
                    out.push(rebuilt(&swapped, "swap"));
                }
            }
        }
    }
    out
}

/// Add, remove, swap or null out an argument of one call.
pub fn mutate_call(a: &Analysis, rng: &mut impl Rng) -> Result<Rewrite, NotApplicable> {
    choose(call_candidates(a, rng), TransformKind::CallMutation, rng)
}

/// Every candidate rewrite of one bug family, before validity filtering.
pub fn negative_candidates(
    a: &Analysis,
    kind: TransformKind,
    rng: &mut impl Rng,
) -> Vec<Rewrite> {
    match kind {
        TransformKind::DataType => data_type_candidates(a),
        TransformKind::Pointer => pointer_candidates(a),
        TransformKind::Conditional => conditional_candidates(a),
        TransformKind::VarMisuse => variable_candidates(a),
        TransformKind::ValueMisuse => value_candidates(a),
        TransformKind::CallMutation => call_candidates(a, rng),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone)]
pub struct NegativeConfig<'c> {
    /// Largest allowed token edit distance between x and x⁻.
    pub edit_bound: usize,
    pub cwe_map: &'c CweMap,
}

/// Inject exactly one bug. Families from the menu are tried in random
/// order; within a family a random candidate is taken among those that
/// re-parse and stay within the token edit bound.
pub fn generate_negative(
    a: &Analysis,
    menu: &TransformMenu,
    rng: &mut impl Rng,
    cfg: &NegativeConfig<'_>,
) -> Result<TransformedCode, NotApplicable> {
    let mut families = menu.negative_kinds();
    let Some(&first) = families.first() else {
        return Err(NotApplicable(TransformKind::DataType));
    };
    families.shuffle(rng);
    for kind in families {
        let mut candidates = negative_candidates(a, kind, rng);
        candidates.shuffle(rng);
        for rw in candidates {
            let Some(next) = realize(a, &rw) else { continue };
            let close = token_edit_distance(a.text(), &next.unit.text)
                .is_some_and(|d| (1..=cfg.edit_bound).contains(&d));
            if !close {
                continue;
            }
            let family = kind.family().expect("negative kinds have a family");
            return Ok(TransformedCode {
                analysis: next,
                provenance: vec![rw.applied()],
                relation: Relation::Negative,
                bug: Some(cfg.cwe_map.tag(family)),
            });
        }
    }
    Err(NotApplicable(first))
}
