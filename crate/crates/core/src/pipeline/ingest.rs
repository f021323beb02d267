use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::syntax::{normalize_source, Language, SourceUnit};

/// Units extracted from a set of roots, plus the paths that could not be
/// read.
#[derive(Debug, Default)]
pub struct Ingested {
    pub units: Vec<SourceUnit>,
    pub errors: Vec<(PathBuf, String)>,
}

fn extension(language: Language) -> &'static str {
    match language {
        Language::C => "c",
        Language::Java => "java",
    }
}

/// Walk the roots, read every source file of the language, and extract
/// one unit per function definition. Units are ordered by path, then by
/// offset within the file. Unreadable files are reported, not fatal.
pub fn ingest_corpus(roots: &[PathBuf], language: Language) -> Ingested {
    let ext = extension(language);
    let mut files = Vec::new();
    let mut out = Ingested::default();
    for root in roots {
        for entry in WalkDir::new(root).follow_links(true) {
            match entry {
                Ok(e) if e.file_type().is_file() => {
                    if e.path().extension().is_some_and(|x| x == ext) {
                        files.push(e.into_path());
                    }
                }
                Ok(_) => {}
                Err(err) => {
                    let path = err.path().map_or_else(|| root.clone(), Path::to_path_buf);
                    out.errors.push((path, err.to_string()));
                }
            }
        }
    }
    files.sort();
    files.dedup();
    for path in files {
        match std::fs::read(&path) {
            Ok(bytes) => {
                let text = String::from_utf8_lossy(&bytes);
                let name = path.to_string_lossy();
                for (offset, body) in extract_functions(&text) {
                    out.units.push(SourceUnit {
                        id: format!("{name}:{offset}"),
                        language,
                        text: normalize_source(&body),
                        origin_path: name.to_string(),
                    });
                }
            }
            Err(err) => out.errors.push((path, err.to_string())),
        }
    }
    out
}

/// Blank out preprocessor lines, keeping byte offsets.
fn drop_directives(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut continued = false;
    for line in text.split_inclusive('\n') {
        let directive = continued || line.trim_start().starts_with('#');
        continued = directive && line.trim_end().ends_with('\\');
        if directive {
            out.extend(line.chars().map(|c| if c == '\n' { '\n' } else { ' ' }));
        } else {
            out.push_str(line);
        }
    }
    out
}

/// Top-level function definitions of a C file as `(offset, text)`.
/// Offsets index the file after comments and directives are removed.
pub fn extract_functions(file: &str) -> Vec<(usize, String)> {
    let text = drop_directives(&normalize_source(file));
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut seg_start = 0;
    let mut parens = 0i32;
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => i = skip_literal(b, i),
            b'(' => parens += 1,
            b')' => parens -= 1,
            b';' if parens == 0 => seg_start = i + 1,
            b'{' if parens == 0 => {
                let close = matching_brace(b, i);
                let header = text[seg_start..i].trim();
                let start = seg_start + (text[seg_start..].len() - text[seg_start..].trim_start().len());
                if is_function_header(header) {
                    if let Some(end) = close {
                        out.push((start, text[start..=end].to_owned()));
                    }
                    seg_start = close.map_or(b.len(), |e| e + 1);
                }
                i = close.unwrap_or(b.len());
            }
            _ => {}
        }
        i += 1;
    }
    out
}

fn is_function_header(header: &str) -> bool {
    let first = header.split_whitespace().next().unwrap_or("");
    header.ends_with(')')
        && header.contains('(')
        && !header.contains('=')
        && !matches!(first, "struct" | "union" | "enum" | "typedef")
}

fn skip_literal(b: &[u8], start: usize) -> usize {
    let quote = b[start];
    let mut i = start + 1;
    while i < b.len() && b[i] != quote && b[i] != b'\n' {
        if b[i] == b'\\' {
            i += 1;
        }
        i += 1;
    }
    i.min(b.len().saturating_sub(1))
}

fn matching_brace(b: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut i = open;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => i = skip_literal(b, i),
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = "#include <stdio.h>\n#define MAX(a,b) \\\n  ((a)>(b)?(a):(b))\n\nstruct point { int x; int y; };\nstatic int table[] = { 1, 2, 3 };\n\n/* helper */\nstatic int add(int a, int b)\n{\n    return a + b; /* } */\n}\n\nint main(void) {\n    const char *s = \"{\";\n    printf(\"%s %d\\n\", s, add(1, 2));\n    return 0;\n}\nint proto(int);\n";

    #[test]
    fn functions_and_only_functions() {
        let got = extract_functions(FILE);
        let texts: Vec<&str> = got.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(texts.len(), 2);
        assert_eq!(texts[0], "static int add(int a, int b)\n{\n    return a + b;\n}");
        assert!(texts[1].starts_with("int main(void) {"));
        assert!(texts[1].ends_with("return 0;\n}"));
        assert!(got[0].0 < got[1].0);
    }

    #[test]
    fn comment_only_files_have_no_units() {
        assert!(extract_functions("/* nothing */\n// here\n").is_empty());
    }

    #[test]
    fn corpus_walk_is_sorted_and_filters_extensions() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.c"), "int g(void){return 1;}\nint h(void){return 2;}\n").unwrap();
        std::fs::write(dir.path().join("a.c"), FILE).unwrap();
        std::fs::write(dir.path().join("c.h"), "int k(void){return 3;}\n").unwrap();
        std::fs::write(dir.path().join("d.java"), "class A { void m() {} }\n").unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/e.c"), "// only a comment\n").unwrap();
        let got = ingest_corpus(&[dir.path().to_path_buf()], Language::C);
        assert!(got.errors.is_empty());
        let names: Vec<String> = got
            .units
            .iter()
            .map(|u| u.text.split('(').next().unwrap().to_owned())
            .collect();
        assert_eq!(names, vec!["static int add", "int main", "int g", "int h"]);
        let a = dir.path().join("a.c").to_string_lossy().into_owned();
        assert_eq!(got.units[0].id, format!("{a}:{}", extract_functions(FILE)[0].0));
        assert_eq!(got.units[0].origin_path, a);
    }

    #[test]
    fn missing_roots_are_reported() {
        let got = ingest_corpus(&[PathBuf::from("/definitely/not/here")], Language::C);
        assert!(got.units.is_empty());
        assert_eq!(got.errors.len(), 1);
    }
}
