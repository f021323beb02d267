//! Seeded generator of small, realistic C functions for fixture corpora.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hand-written functions that every generated corpus starts with.
pub const FIXTURES: [&str; 3] = [
    "int foo(int bar){ if (bar<5) return (1); else return (0); }\n",
    "static void filter_rows(uint8_t *dst, int width, int height, const uint8_t *src, int stride, int scale, int delta)\n{\n    int y;\n    int x;\n    for (y = 0; y < height; y++) {\n        for (x = 0; x < width; x++) {\n            int sum = src[x] * scale + delta;\n            dst[x] = clip_pixel(sum);\n        }\n        dst += stride;\n        src += stride;\n    }\n}\n",
    "int read_header(const uint8_t *buf, int size, int *width, int *height)\n{\n    int w = buf[0] | buf[1] << 8;\n    int h = buf[2] | buf[3] << 8;\n    if (size < 4) {\n        return -1;\n    }\n    if (w <= 0 || h <= 0) {\n        return -1;\n    }\n    *width = w;\n    *height = h;\n    return 0;\n}\n",
];

const NOUNS: [&str; 40] = [
    "count", "total", "idx", "len", "key", "value", "limit", "offset", "size", "result", "acc",
    "step", "base", "width", "height", "flags", "mask", "score", "start", "end", "pos", "item",
    "tmp", "sum", "depth", "level", "weight", "delta", "factor", "index", "cursor", "span",
    "bound", "slot", "entry", "lo", "hi", "mid", "rate", "ticks",
];

const BUFFERS: [&str; 16] = [
    "buf", "data", "arr", "items", "vals", "src", "dst", "samples", "table", "bytes", "block",
    "row", "pixels", "scores", "keys", "list",
];

const VERBS: [&str; 20] = [
    "compute", "find", "count", "update", "scale", "check", "sum", "copy", "fill", "reset",
    "parse", "merge", "clamp", "apply", "collect", "measure", "scan", "shift", "load", "store",
];

const OBJECTS: [&str; 20] = [
    "total", "range", "buffer", "entries", "values", "limit", "block", "frame", "packet",
    "header", "stats", "weights", "offsets", "pixels", "samples", "window", "queue", "slots",
    "record", "state",
];

const HELPERS: [&str; 12] = [
    "log_value", "update_state", "emit_record", "notify_owner", "track_usage", "push_event",
    "record_error", "mark_dirty", "process_item", "handle_entry", "visit_node", "flush_block",
];

const INT_TYPES: [&str; 6] = ["int", "int", "int", "long", "unsigned int", "size_t"];

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Gen<'_> {
    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items.choose(self.rng).copied().unwrap_or("x")
    }

    fn fresh(&mut self, pool: &[&str]) -> String {
        for _ in 0..32 {
            let n = self.pick(pool).to_owned();
            if self.used.insert(n.clone()) {
                return n;
            }
        }
        let mut k = 2;
        loop {
            let n = format!("{}{k}", self.pick(pool));
            if self.used.insert(n.clone()) {
                return n;
            }
            k += 1;
        }
    }

    fn var(&mut self) -> String {
        self.fresh(&NOUNS)
    }

    fn buf(&mut self) -> String {
        self.fresh(&BUFFERS)
    }

    fn func(&mut self) -> String {
        let name = format!("{}_{}", self.pick(&VERBS), self.pick(&OBJECTS));
        self.used.insert(name.clone());
        name
    }

    fn helper(&mut self) -> String {
        self.fresh(&HELPERS)
    }

    fn ty(&mut self) -> &'static str {
        self.pick(&INT_TYPES)
    }

    fn small(&mut self) -> i64 {
        self.rng.gen_range(2..64)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn cmp(&mut self) -> &'static str {
        self.pick(&["<", "<=", ">", ">=", "==", "!="])
    }
}

type Template = fn(&mut Gen) -> String;

fn t_sum(g: &mut Gen) -> String {
    let (f, t, a, n, acc, i) = (g.func(), g.ty(), g.buf(), g.var(), g.var(), g.var());
    let w = g.var();
    let c = g.small();
    format!(
        "{t} {f}(const {t} *{a}, int {n})\n{{\n    {t} {acc} = 0;\n    int {w} = {c};\n    int {i};\n    for ({i} = 0; {i} < {n}; {i}++) {{\n        {acc} += {a}[{i}] * {w};\n    }}\n    return {acc};\n}}\n"
    )
}

fn t_clamp(g: &mut Gen) -> String {
    let (f, t, v, lo, hi) = (g.func(), g.ty(), g.var(), g.var(), g.var());
    format!(
        "{t} {f}({t} {v}, {t} {lo}, {t} {hi})\n{{\n    if ({v} < {lo}) {{\n        return {lo};\n    }}\n    if ({v} > {hi}) {{\n        return {hi};\n    }}\n    return {v};\n}}\n"
    )
}

fn t_find(g: &mut Gen) -> String {
    let (f, a, n, key, pos, k) = (g.func(), g.buf(), g.var(), g.var(), g.var(), g.var());
    format!(
        "int {f}(const int *{a}, int {n}, int {key})\n{{\n    int {pos} = -1;\n    int {k};\n    for ({k} = 0; {k} < {n}; {k}++) {{\n        if ({a}[{k}] == {key}) {{\n            {pos} = {k};\n            break;\n        }}\n    }}\n    return {pos};\n}}\n"
    )
}

fn t_copy(g: &mut Gen) -> String {
    let (f, d, s, n) = (g.func(), g.fresh(&["dst", "out", "dest", "target"]), g.fresh(&["src", "in", "source", "input"]), g.var());
    format!(
        "int {f}(char *{d}, const char *{s}, size_t {n})\n{{\n    if ({d} == NULL || {s} == NULL) {{\n        return -1;\n    }}\n    if ({n} == 0) {{\n        return 0;\n    }}\n    memcpy({d}, {s}, {n});\n    {d}[{n} - 1] = '\\0';\n    return 0;\n}}\n"
    )
}

fn t_average(g: &mut Gen) -> String {
    let (f, a, n, total, i) = (g.func(), g.buf(), g.var(), g.var(), g.var());
    format!(
        "double {f}(const int *{a}, int {n})\n{{\n    long {total} = 0;\n    int {i};\n    if ({n} <= 0) {{\n        return 0.0;\n    }}\n    for ({i} = 0; {i} < {n}; {i}++) {{\n        {total} += {a}[{i}];\n    }}\n    return (double){total} / {n};\n}}\n"
    )
}

fn t_count_if(g: &mut Gen) -> String {
    let (f, a, n, lim, c, i) = (g.func(), g.buf(), g.var(), g.var(), g.var(), g.var());
    let op = g.cmp();
    format!(
        "int {f}(const int *{a}, int {n}, int {lim})\n{{\n    int {c} = 0;\n    int {i} = 0;\n    while ({i} < {n}) {{\n        if ({a}[{i}] {op} {lim}) {{\n            {c}++;\n        }}\n        {i}++;\n    }}\n    return {c};\n}}\n"
    )
}

fn t_alloc(g: &mut Gen) -> String {
    let (f, n, p, i, v) = (g.func(), g.var(), g.buf(), g.var(), g.var());
    let t = g.pick(&["int", "long", "double"]);
    format!(
        "{t} *{f}(int {n}, {t} {v})\n{{\n    {t} *{p} = malloc({n} * sizeof({t}));\n    int {i};\n    if ({p} == NULL) {{\n        return NULL;\n    }}\n    for ({i} = 0; {i} < {n}; {i}++) {{\n        {p}[{i}] = {v};\n    }}\n    return {p};\n}}\n"
    )
}

fn t_strlen(g: &mut Gen) -> String {
    let (f, s, n) = (g.func(), g.fresh(&["str", "text", "name", "line", "word"]), g.var());
    let ch = g.pick(&["'\\0'", "'\\n'", "' '"]);
    format!(
        "size_t {f}(const char *{s})\n{{\n    size_t {n} = 0;\n    if ({s} == NULL) {{\n        return 0;\n    }}\n    while ({s}[{n}] != {ch} && {s}[{n}] != '\\0') {{\n        {n}++;\n    }}\n    return {n};\n}}\n"
    )
}

fn t_swap(g: &mut Gen) -> String {
    let (f, t, a, b, tmp) = (g.func(), g.ty(), g.var(), g.var(), g.var());
    format!(
        "void {f}({t} *{a}, {t} *{b})\n{{\n    {t} {tmp};\n    if ({a} == NULL || {b} == NULL) {{\n        return;\n    }}\n    {tmp} = *{a};\n    *{a} = *{b};\n    *{b} = {tmp};\n}}\n"
    )
}

fn t_list_len(g: &mut Gen) -> String {
    let (f, head, cur, n) = (g.func(), g.fresh(&["head", "first", "root"]), g.fresh(&["cur", "node", "it", "walk"]), g.var());
    let sname = g.pick(&["node", "entry", "item", "link"]);
    format!(
        "int {f}(struct {sname} *{head})\n{{\n    struct {sname} *{cur} = {head};\n    int {n} = 0;\n    while ({cur} != NULL) {{\n        {n}++;\n        {cur} = {cur}->next;\n    }}\n    return {n};\n}}\n"
    )
}

fn t_gcd(g: &mut Gen) -> String {
    let (f, t, a, b, r) = (g.func(), g.ty(), g.var(), g.var(), g.var());
    format!(
        "{t} {f}({t} {a}, {t} {b})\n{{\n    {t} {r};\n    while ({b} != 0) {{\n        {r} = {a} % {b};\n        {a} = {b};\n        {b} = {r};\n    }}\n    return {a};\n}}\n"
    )
}

fn t_power(g: &mut Gen) -> String {
    let (f, base, e, acc, i) = (g.func(), g.var(), g.var(), g.var(), g.var());
    let m = g.rng.gen_range(1000..100_000);
    format!(
        "long {f}(long {base}, int {e})\n{{\n    long {acc} = 1;\n    int {i};\n    for ({i} = 0; {i} < {e}; {i}++) {{\n        {acc} = ({acc} * {base}) % {m};\n    }}\n    return {acc};\n}}\n"
    )
}

fn t_ratio(g: &mut Gen) -> String {
    let (f, a, b, q, r) = (g.func(), g.var(), g.var(), g.var(), g.var());
    let c = g.small();
    format!(
        "long {f}(long {a}, long {b})\n{{\n    long {q} = {a} / {b};\n    long {r} = {a} % {b};\n    if ({r} > {b} / 2) {{\n        {q} = {q} + 1;\n    }}\n    return {q} * {c};\n}}\n"
    )
}

fn t_fill(g: &mut Gen) -> String {
    let (f, a, n, v, i) = (g.func(), g.buf(), g.var(), g.var(), g.var());
    if g.chance(0.5) {
        format!(
            "void {f}(char *{a}, int {n}, char {v})\n{{\n    int {i} = 0;\n    while ({i} < {n}) {{\n        {a}[{i}] = {v};\n        {i}++;\n    }}\n}}\n"
        )
    } else {
        format!(
            "void {f}(int *{a}, size_t {n})\n{{\n    if ({a} == NULL) {{\n        return;\n    }}\n    memset({a}, 0, {n} * sizeof(int));\n}}\n"
        )
    }
}

fn t_reverse(g: &mut Gen) -> String {
    let (f, a, n, lo, hi, tmp) = (g.func(), g.buf(), g.var(), g.var(), g.var(), g.var());
    format!(
        "void {f}(int *{a}, int {n})\n{{\n    int {lo} = 0;\n    int {hi} = {n} - 1;\n    int {tmp};\n    while ({lo} < {hi}) {{\n        {tmp} = {a}[{lo}];\n        {a}[{lo}] = {a}[{hi}];\n        {a}[{hi}] = {tmp};\n        {lo}++;\n        {hi}--;\n    }}\n}}\n"
    )
}

fn t_checksum(g: &mut Gen) -> String {
    let (f, a, n, h, i) = (g.func(), g.buf(), g.var(), g.var(), g.var());
    let sh = g.rng.gen_range(1..8);
    let seed = g.rng.gen_range(1..65_536);
    format!(
        "unsigned int {f}(const unsigned char *{a}, size_t {n})\n{{\n    unsigned int {h} = {seed};\n    size_t {i};\n    for ({i} = 0; {i} < {n}; {i}++) {{\n        {h} = ({h} << {sh}) ^ {a}[{i}];\n    }}\n    return {h};\n}}\n"
    )
}

fn t_get(g: &mut Gen) -> String {
    let (f, a, n, i) = (g.func(), g.buf(), g.var(), g.var());
    let d = -g.small();
    format!(
        "int {f}(const int *{a}, int {n}, int {i})\n{{\n    if ({a} == NULL) {{\n        return {d};\n    }}\n    if ({i} < 0 || {i} >= {n}) {{\n        return {d};\n    }}\n    return {a}[{i}];\n}}\n"
    )
}

fn t_report(g: &mut Gen) -> String {
    let (f, label, a, b, total) = (g.func(), g.fresh(&["label", "name", "tag", "title"]), g.var(), g.var(), g.var());
    format!(
        "void {f}(const char *{label}, int {a}, int {b})\n{{\n    int {total} = {a} + {b};\n    if ({label} == NULL) {{\n        return;\n    }}\n    printf(\"%s: %d\\n\", {label}, {total});\n}}\n"
    )
}

fn t_release(g: &mut Gen) -> String {
    let (f, p, n, i) = (g.func(), g.fresh(&["ptrs", "slots", "blocks", "pages"]), g.var(), g.var());
    format!(
        "void {f}(char **{p}, int {n})\n{{\n    int {i};\n    if ({p} == NULL) {{\n        return;\n    }}\n    for ({i} = 0; {i} < {n}; {i}++) {{\n        free({p}[{i}]);\n        {p}[{i}] = NULL;\n    }}\n}}\n"
    )
}

fn t_dispatch(g: &mut Gen) -> String {
    let (f, h1, h2, v, lim, st) = (g.func(), g.helper(), g.helper(), g.var(), g.var(), g.var());
    let c = g.small();
    format!(
        "int {f}(int {v}, int {lim})\n{{\n    int {st} = 0;\n    if ({v} > {lim}) {{\n        {st} = {h1}({v}, {lim});\n    }} else {{\n        {st} = {h2}({v} + {c});\n    }}\n    return {st};\n}}\n"
    )
}

fn t_walk(g: &mut Gen) -> String {
    let (f, h, a, n, i, ok) = (g.func(), g.helper(), g.buf(), g.var(), g.var(), g.var());
    format!(
        "int {f}(int *{a}, int {n})\n{{\n    int {ok} = 0;\n    int {i};\n    for ({i} = 0; {i} < {n}; {i}++) {{\n        if ({h}({a}[{i}], {i}) != 0) {{\n            {ok}++;\n        }}\n    }}\n    return {ok};\n}}\n"
    )
}

fn t_minmax(g: &mut Gen) -> String {
    let (f, a, n, best, i) = (g.func(), g.buf(), g.var(), g.var(), g.var());
    let op = g.pick(&["<", ">"]);
    format!(
        "int {f}(const int *{a}, int {n})\n{{\n    int {best} = {a}[0];\n    int {i};\n    for ({i} = 1; {i} < {n}; {i}++) {{\n        if ({a}[{i}] {op} {best}) {{\n            {best} = {a}[{i}];\n        }}\n    }}\n    return {best};\n}}\n"
    )
}

fn t_area(g: &mut Gen) -> String {
    let (f, w, h, stride, bytes, pad) = (g.func(), g.var(), g.var(), g.var(), g.var(), g.var());
    let c = g.pick(&["3", "4", "8"]);
    format!(
        "size_t {f}(int {w}, int {h})\n{{\n    size_t {stride} = (size_t){w} * {c};\n    size_t {pad} = {stride} % 4;\n    size_t {bytes};\n    if ({w} <= 0 || {h} <= 0) {{\n        return 0;\n    }}\n    {bytes} = ({stride} + {pad}) * {h};\n    return {bytes};\n}}\n"
    )
}

fn t_compare(g: &mut Gen) -> String {
    let (f, a, b, n) = (g.func(), g.fresh(&["lhs", "left", "first", "want"]), g.fresh(&["rhs", "right", "second", "got"]), g.var());
    format!(
        "int {f}(const char *{a}, const char *{b}, size_t {n})\n{{\n    if ({a} == NULL || {b} == NULL) {{\n        return 0;\n    }}\n    if (strlen({a}) < {n}) {{\n        return 0;\n    }}\n    return strncmp({a}, {b}, {n}) == 0;\n}}\n"
    )
}

fn t_histogram(g: &mut Gen) -> String {
    let (f, a, n, bins, i, k) = (g.func(), g.buf(), g.var(), g.fresh(&["bins", "hist", "counts", "freq"]), g.var(), g.var());
    let m = g.pick(&["8", "16", "32", "256"]);
    format!(
        "void {f}(const unsigned char *{a}, int {n}, int *{bins})\n{{\n    int {i};\n    int {k};\n    for ({i} = 0; {i} < {n}; {i}++) {{\n        {k} = {a}[{i}] % {m};\n        {bins}[{k}] += 1;\n    }}\n}}\n"
    )
}

fn t_scale(g: &mut Gen) -> String {
    let (f, a, n, num, den, i) = (g.func(), g.buf(), g.var(), g.var(), g.var(), g.var());
    format!(
        "void {f}(int *{a}, int {n}, int {num}, int {den})\n{{\n    int {i};\n    if ({den} == 0) {{\n        return;\n    }}\n    for ({i} = 0; {i} < {n}; {i}++) {{\n        {a}[{i}] = {a}[{i}] * {num} / {den};\n    }}\n}}\n"
    )
}

fn t_state(g: &mut Gen) -> String {
    let (f, s, ev, next) = (g.func(), g.fresh(&["state", "mode", "phase"]), g.fresh(&["event", "input", "signal"]), g.var());
    let (a, b, c) = (g.small(), g.small(), g.small());
    format!(
        "int {f}(int {s}, int {ev})\n{{\n    int {next} = {s};\n    switch ({s}) {{\n    case 0:\n        if ({ev} == {a}) {{\n            {next} = 1;\n        }}\n        break;\n    case 1:\n        if ({ev} > {b}) {{\n            {next} = 2;\n        }}\n        break;\n    default:\n        {next} = {ev} % {c};\n        break;\n    }}\n    return {next};\n}}\n"
    )
}

const TEMPLATES: [Template; 27] = [
    t_sum, t_clamp, t_find, t_copy, t_average, t_count_if, t_alloc, t_strlen, t_swap,
    t_list_len, t_gcd, t_power, t_ratio, t_fill, t_reverse, t_checksum, t_get, t_report,
    t_release, t_dispatch, t_walk, t_minmax, t_area, t_compare, t_histogram, t_scale, t_state,
];

/// `count` generated functions; the same seed gives the same functions.
/// The fixtures are not included.
pub fn generate_functions(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let t = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
            let mut g = Gen {
                rng: &mut rng,
                used: BTreeSet::new(),
            };
            t(&mut g)
        })
        .collect()
}

/// Write the fixtures plus `count` generated functions to `dir` as `.c`
/// files of at most `per_file` functions each. Returns the files written.
pub fn write_corpus(dir: &Path, count: usize, seed: u64, per_file: usize) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut functions: Vec<String> = FIXTURES.iter().map(|s| s.to_string()).collect();
    functions.extend(generate_functions(count, seed));
    let mut files = Vec::new();
    for (k, chunk) in functions.chunks(per_file.max(1)).enumerate() {
        let path = dir.join(format!("synth_{k:04}.c"));
        fs::write(&path, chunk.join("\n"))?;
        files.push(path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Analysis;
    use crate::syntax::{parse_source, SourceUnit};

    #[test]
    fn every_template_parses() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (k, t) in TEMPLATES.iter().enumerate() {
            for _ in 0..20 {
                let text = t(&mut Gen {
                    rng: &mut rng,
                    used: BTreeSet::new(),
                });
                let a = Analysis::new(SourceUnit::new("t", &text));
                assert!(a.is_ok(), "template {k}: {:?}\n{text}", a.err());
            }
        }
        for f in FIXTURES {
            assert!(parse_source(&SourceUnit::new("f", f)).is_ok(), "{f}");
        }
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(generate_functions(50, 3), generate_functions(50, 3));
        assert_ne!(generate_functions(50, 3), generate_functions(50, 4));
    }

    #[test]
    fn corpus_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_corpus(dir.path(), 10, 0, 4).unwrap();
        assert_eq!(files.len(), 4);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert!(text.starts_with("int foo(int bar)"));
    }
}
