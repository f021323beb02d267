use std::io::Write;
use std::process::{Command, Stdio};

/// Syntax-only compilation through an external C compiler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileCheck {
    pub compiler: String,
}

impl Default for CompileCheck {
    fn default() -> Self {
        Self {
            compiler: "cc".into(),
        }
    }
}

impl CompileCheck {
    /// Number of diagnostics reported as errors, or `None` when the
    /// compiler cannot be run.
    pub fn error_count(&self, source: &str) -> Option<usize> {
        let mut child = Command::new(&self.compiler)
            .args(["-fsyntax-only", "-w", "-x", "c", "-"])
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .ok()?;
        child.stdin.take()?.write_all(source.as_bytes()).ok()?;
        let out = child.wait_with_output().ok()?;
        let stderr = String::from_utf8_lossy(&out.stderr);
        Some(stderr.lines().filter(|l| l.contains("error:")).count())
    }

    pub fn available(&self) -> bool {
        self.error_count("int main(void) { return 0; }\n") == Some(0)
    }

    /// A variant passes when it adds no errors over the original.
    pub fn accepts(&self, original: &str, variant: &str) -> bool {
        match (self.error_count(original), self.error_count(variant)) {
            (Some(a), Some(b)) => b <= a,
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_added_errors() {
        let cc = CompileCheck::default();
        if !cc.available() {
            return;
        }
        let ok = "int f(int a){ return a + 1; }";
        assert!(cc.accepts(ok, "int f(int a){ return a - 1; }"));
        assert!(!cc.accepts(ok, "int f(int a){ return b + 1; }"));
        let missing = CompileCheck {
            compiler: "/no/such/compiler".into(),
        };
        assert_eq!(missing.error_count(ok), None);
        assert!(missing.accepts(ok, "garbage"));
    }
}
