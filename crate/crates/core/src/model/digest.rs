//! Structural digests used by the validation fast filter.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ast::Renderer;
use super::SubjectProgram;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuralDigest {
    /// Hash of the whitespace-normalized source text.
    pub raw_hash: String,
    /// Hash of the canonical AST rendering.
    pub ast_hash: String,
    /// Hash of the canonical AST rendering with renameable names replaced by
    /// positional placeholders.
    pub alpha_hash: String,
}

fn sha256_hex(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Strips trailing whitespace on each line, normalizes line endings and
/// drops trailing blank lines.
pub fn normalize_whitespace(src: &str) -> String {
    let lines: Vec<&str> = src.split('\n').map(|l| l.trim_end_matches(['\r', ' ', '\t'])).collect();
    let end = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines[..end].join("\n")
}

pub fn raw_hash(src: &str) -> String {
    sha256_hex(&normalize_whitespace(src))
}

/// Maps each renameable name to `$k`, numbered by first occurrence.
pub fn canonical_namer(program: &SubjectProgram) -> impl Fn(&str) -> String {
    let map: HashMap<String, String> =
        program.renameable_names().into_iter().enumerate().map(|(i, n)| (n, format!("${i}"))).collect();
    move |n: &str| map.get(n).cloned().unwrap_or_else(|| n.to_string())
}

/// Canonical rendering of the whole module under `rename`.
pub fn render_module(program: &SubjectProgram, rename: &dyn Fn(&str) -> String) -> String {
    let r = Renderer { rename };
    let mut out = String::new();
    r.block(&program.module().body, 0, &mut out);
    out
}

pub fn structural_digest(program: &SubjectProgram) -> StructuralDigest {
    let identity = |n: &str| n.to_string();
    let namer = canonical_namer(program);
    StructuralDigest {
        raw_hash: raw_hash(program.source()),
        ast_hash: sha256_hex(&render_module(program, &identity)),
        alpha_hash: sha256_hex(&render_module(program, &namer)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    fn digest(src: &str) -> StructuralDigest {
        structural_digest(&parse(src, "f").unwrap())
    }

    #[test]
    fn whitespace_only_changes_keep_raw_hash() {
        let a = digest("def f(x):\n    return x\n");
        let b = digest("def f(x):   \r\n    return x\n\n\n");
        assert_eq!(a.raw_hash, b.raw_hash);
    }

    #[test]
    fn formatting_changes_keep_ast_hash() {
        let a = digest("def f(x):\n    return x+1\n");
        let b = digest("def f(x):\n    # comment\n    return (x + 1)\n");
        assert_ne!(a.raw_hash, b.raw_hash);
        assert_eq!(a.ast_hash, b.ast_hash);
    }

    #[test]
    fn consistent_rename_keeps_alpha_hash() {
        let a = digest("def f(x):\n    y = x * 2\n    return y\n");
        let b = digest("def f(a):\n    b = a * 2\n    return b\n");
        assert_ne!(a.ast_hash, b.ast_hash);
        assert_eq!(a.alpha_hash, b.alpha_hash);
    }

    #[test]
    fn swapping_names_changes_alpha_hash_when_roles_change() {
        let a = digest("def f(x, y):\n    return x - y\n");
        let b = digest("def f(x, y):\n    return y - x\n");
        assert_ne!(a.alpha_hash, b.alpha_hash);
    }

    #[test]
    fn entry_point_and_builtins_are_not_abstracted() {
        let a = digest("def f(x):\n    return len(x)\n");
        let b = digest("def f(x):\n    return abs(x)\n");
        assert_ne!(a.alpha_hash, b.alpha_hash);
    }
}
