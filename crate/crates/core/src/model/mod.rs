//! Program model: parsing, scopes, def/use sets, control-flow graphs and
//! structural digests for subject-language (Python 3) functions.

pub mod ast;
pub mod cfg;
pub mod defuse;
pub mod digest;
pub mod lexer;
pub mod parser;
pub mod scope;

use std::collections::BTreeSet;

use ast::{Module, Stmt, StmtKind};
pub use cfg::{build_cfg, cfg_equivalent, Branch, Cfg, CfgEdge, CfgNode, NodeKind};
pub use defuse::{def_use_sets, StatementInfo, PURE_CALLS};
pub use digest::{structural_digest, StructuralDigest};
pub use lexer::Span;
pub use parser::SyntaxError;
use scope::NameTable;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("entry point `{0}` is not defined")]
    MissingEntryPoint(String),
    #[error("unsupported construct: {kind}")]
    UnsupportedConstruct { kind: String, pos: usize },
}

/// A parsed subject program: a complete function (plus any helper
/// definitions and imports) with its entry point.
#[derive(Debug, Clone)]
pub struct SubjectProgram {
    source: String,
    entry_point: String,
    origin: String,
    module: Module,
    names: NameTable,
    external_names: BTreeSet<String>,
}

/// Parses `source` and checks that `entry_point` is defined as a top-level
/// function.
pub fn parse(source: &str, entry_point: &str) -> Result<SubjectProgram, ModelError> {
    let module = parser::parse_module(source)?;
    let defined =
        module.body.iter().any(|s| matches!(&s.kind, StmtKind::FunctionDef { name, .. } if name.id == entry_point));
    if !defined {
        return Err(ModelError::MissingEntryPoint(entry_point.to_string()));
    }
    let names = NameTable::build(&module);
    Ok(SubjectProgram {
        source: source.to_string(),
        entry_point: entry_point.to_string(),
        origin: String::new(),
        module,
        names,
        external_names: BTreeSet::new(),
    })
}

impl SubjectProgram {
    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    /// Names referenced from code outside the program (test harness,
    /// prelude). They keep their spelling in renaming and α-hashing.
    pub fn with_external_names(mut self, names: impl IntoIterator<Item = String>) -> Self {
        self.external_names = names.into_iter().collect();
        self
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn entry_point(&self) -> &str {
        &self.entry_point
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn module(&self) -> &Module {
        &self.module
    }

    pub fn names(&self) -> &NameTable {
        &self.names
    }

    pub fn external_names(&self) -> &BTreeSet<String> {
        &self.external_names
    }

    /// The entry-point function definition.
    pub fn entry_function(&self) -> &Stmt {
        self.module
            .body
            .iter()
            .find(|s| matches!(&s.kind, StmtKind::FunctionDef { name, .. } if name.id == self.entry_point))
            .expect("entry point checked at parse time")
    }

    /// Statements of the entry-point function body.
    pub fn entry_body(&self) -> &[Stmt] {
        match &self.entry_function().kind {
            StmtKind::FunctionDef { body, .. } => &body.stmts,
            _ => unreachable!(),
        }
    }

    /// Names pinned to their spelling: the entry point plus external names.
    pub fn fixed_names(&self) -> BTreeSet<String> {
        let mut s = self.external_names.clone();
        s.insert(self.entry_point.clone());
        s
    }

    /// Identifiers that can be consistently renamed, in first-occurrence order.
    pub fn renameable_names(&self) -> Vec<String> {
        self.names.renameable(&self.fixed_names())
    }

    /// Re-parses another source text with the same entry point and external
    /// names.
    pub fn reparse(&self, source: &str) -> Result<SubjectProgram, ModelError> {
        Ok(parse(source, &self.entry_point)?
            .with_origin(self.origin.clone())
            .with_external_names(self.external_names.iter().cloned()))
    }
}

/// Checks the entry function against the supported subset: no nested
/// function or class definitions, no `try`/`with`, no `async` forms.
pub fn check_supported(program: &SubjectProgram) -> Result<(), ModelError> {
    let mut err = None;
    ast::walk_stmts(program.entry_body(), &mut |s| {
        if err.is_some() {
            return;
        }
        let kind = match &s.kind {
            StmtKind::FunctionDef { .. } => Some("nested function definition"),
            StmtKind::ClassDef { .. } => Some("class definition"),
            StmtKind::Try { .. } => Some("try statement"),
            StmtKind::With { .. } => Some("with statement"),
            StmtKind::For { is_async: true, .. } => Some("async for"),
            _ => None,
        };
        if let Some(k) = kind {
            err = Some(ModelError::UnsupportedConstruct { kind: k.to_string(), pos: s.span.start });
        }
    });
    if let StmtKind::FunctionDef { is_async: true, .. } = &program.entry_function().kind {
        err.get_or_insert(ModelError::UnsupportedConstruct {
            kind: "async function".into(),
            pos: program.entry_function().span.start,
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_function_has_one_body_statement() {
        let p = parse("def f(x):\n    return x", "f").unwrap();
        assert_eq!(p.entry_body().len(), 1);
        assert_eq!(def_use_sets(&p).len(), 1);
    }

    #[test]
    fn malformed_input_is_a_syntax_error() {
        assert!(matches!(parse("def f(:", "f"), Err(ModelError::Syntax(_))));
    }

    #[test]
    fn entry_point_must_be_defined() {
        assert_eq!(parse("def g():\n    pass", "f").unwrap_err(), ModelError::MissingEntryPoint("f".into()));
    }

    #[test]
    fn unsupported_constructs_are_reported() {
        let p =
            parse("def f(x):\n    try:\n        return 1 / x\n    except ZeroDivisionError:\n        return 0\n", "f")
                .unwrap();
        assert!(matches!(check_supported(&p), Err(ModelError::UnsupportedConstruct { .. })));
        let p = parse("def f(x):\n    def g(y):\n        return y\n    return g(x)\n", "f").unwrap();
        assert!(matches!(check_supported(&p), Err(ModelError::UnsupportedConstruct { .. })));
    }
}
