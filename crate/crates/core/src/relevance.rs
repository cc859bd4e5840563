//! Test-to-focal relevance: does any call in the test hit the focal method by
//! name, arity and parameter types?

use std::collections::HashMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::ast::{Node, SyntaxTree};
use crate::error::{Error, Result};
use crate::syntax::parameter_type;

/// A normalized Java type, or `Unknown` when it cannot be inferred.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeName {
    Unknown,
    Known(String),
}

impl TypeName {
    /// Erases generic arguments, drops package qualifiers and whitespace, and
    /// keeps array suffixes: `java.util.List<String> []` becomes `List[]`.
    pub fn normalize(text: &str) -> TypeName {
        let mut erased = String::with_capacity(text.len());
        let mut depth = 0usize;
        for c in text.chars() {
            match c {
                '<' => depth += 1,
                '>' => depth = depth.saturating_sub(1),
                c if depth == 0 && !c.is_whitespace() => erased.push(c),
                _ => {}
            }
        }
        let base_end = erased.find('[').unwrap_or(erased.len());
        let (base, dims) = erased.split_at(base_end);
        let simple = base.rsplit('.').next().unwrap_or(base);
        if simple.is_empty() {
            return TypeName::Unknown;
        }
        TypeName::Known(format!("{simple}{dims}"))
    }

    pub fn known(name: &str) -> TypeName {
        TypeName::Known(name.to_owned())
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            TypeName::Unknown => None,
            TypeName::Known(s) => Some(s),
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, TypeName::Unknown)
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str().unwrap_or("?"))
    }
}

impl Serialize for TypeName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TypeName::Unknown => s.serialize_none(),
            TypeName::Known(name) => s.serialize_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MethodSignature {
    pub name: String,
    /// For varargs methods the last entry is the element type.
    pub params: Vec<TypeName>,
    pub varargs: bool,
}

impl MethodSignature {
    pub fn new(name: impl Into<String>, params: Vec<TypeName>, varargs: bool) -> Self {
        assert!(!varargs || !params.is_empty(), "varargs needs a parameter");
        MethodSignature {
            name: name.into(),
            params,
            varargs,
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallSite {
    pub name: String,
    pub args: Vec<TypeName>,
}

impl CallSite {
    pub fn new(name: impl Into<String>, args: Vec<TypeName>) -> Self {
        CallSite {
            name: name.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

/// Signature of the first method or constructor declaration in the snippet.
pub fn extract_signature(focal: &SyntaxTree) -> Result<MethodSignature> {
    let decl = focal
        .declarations()
        .next()
        .ok_or(Error::NoFocalDeclaration)?;
    signature_of(decl).ok_or(Error::NoFocalDeclaration)
}

/// Names introduced by the declaration's own `<...>` clause.
fn type_variables(decl: Node<'_>) -> Vec<&str> {
    decl.child_of_kind("type_parameters")
        .into_iter()
        .flat_map(|tp| tp.named_children())
        .filter(|tp| tp.kind() == "type_parameter")
        .filter_map(|tp| {
            tp.named_children()
                .find(|c| matches!(c.kind(), "type_identifier" | "identifier"))
        })
        .map(|id| id.text())
        .collect()
}

fn signature_of(decl: Node<'_>) -> Option<MethodSignature> {
    let name = decl.child_by_field("name")?.text().to_owned();
    let vars = type_variables(decl);
    let mut params = Vec::new();
    let mut varargs = false;
    if let Some(list) = decl.child_by_field("parameters") {
        for p in list.named_children() {
            if let Some((ty, spread)) = parameter_type(p) {
                // a type variable accepts any argument
                let base = ty.as_str().map(|t| t.trim_end_matches("[]"));
                let ty = if base.is_some_and(|b| vars.contains(&b)) {
                    TypeName::Unknown
                } else {
                    ty
                };
                params.push(ty);
                varargs |= spread;
            }
        }
    }
    Some(MethodSignature {
        name,
        params,
        varargs,
    })
}

/// Local variable types visible while walking a test top to bottom.
pub type LocalEnv = HashMap<String, TypeName>;

fn declare_locals(node: Node<'_>, env: &mut LocalEnv) {
    match node.kind() {
        "local_variable_declaration" => {
            let Some(ty) = node.child_by_field("type") else {
                return;
            };
            let inferred_var = ty.text() == "var";
            for decl in node
                .children()
                .filter(|c| c.kind() == "variable_declarator")
            {
                let Some(name) = decl.child_by_field("name") else {
                    continue;
                };
                let mut text = ty.text().to_owned();
                if let Some(dims) = decl.child_by_field("dimensions") {
                    text.push_str(dims.text());
                }
                let declared = if inferred_var {
                    decl.child_by_field("value")
                        .map(|v| infer_arg_type(v, env))
                        .unwrap_or(TypeName::Unknown)
                } else {
                    TypeName::normalize(&text)
                };
                env.insert(name.text().to_owned(), declared);
            }
        }
        "formal_parameter" | "spread_parameter" => {
            let name = node.child_by_field("name").or_else(|| {
                node.child_of_kind("variable_declarator")
                    .and_then(|d| d.child_by_field("name"))
            });
            if let (Some(name), Some((ty, spread))) = (name, parameter_type(node)) {
                let ty = match (spread, ty) {
                    (true, TypeName::Known(t)) => TypeName::Known(format!("{t}[]")),
                    (_, ty) => ty,
                };
                env.insert(name.text().to_owned(), ty);
            }
        }
        "catch_formal_parameter" => {
            if let (Some(name), Some(ty)) = (
                node.child_by_field("name"),
                node.child_of_kind("catch_type"),
            ) {
                let single = ty.named_children().count() == 1;
                let ty = if single {
                    TypeName::normalize(ty.text())
                } else {
                    TypeName::Unknown
                };
                env.insert(name.text().to_owned(), ty);
            }
        }
        "enhanced_for_statement" => {
            if let (Some(name), Some(ty)) =
                (node.child_by_field("name"), node.child_by_field("type"))
            {
                let ty = if ty.text() == "var" {
                    TypeName::Unknown
                } else {
                    TypeName::normalize(ty.text())
                };
                env.insert(name.text().to_owned(), ty);
            }
        }
        _ => {}
    }
}

/// Every method invocation and constructor call in the test, in source order.
pub fn extract_call_sites(test: &SyntaxTree) -> Vec<CallSite> {
    let mut env = LocalEnv::new();
    let mut calls = Vec::new();
    for node in test.dfs() {
        declare_locals(node, &mut env);
        let name = match node.kind() {
            "method_invocation" => node.child_by_field("name").map(|n| n.text().to_owned()),
            "object_creation_expression" => node
                .child_by_field("type")
                .and_then(|t| TypeName::normalize(t.text()).as_str().map(str::to_owned)),
            _ => None,
        };
        let Some(name) = name else { continue };
        let args = node
            .child_by_field("arguments")
            .map(|list| {
                list.named_children()
                    .filter(|a| !a.is_comment())
                    .map(|a| infer_arg_type(a, &env))
                    .collect()
            })
            .unwrap_or_default();
        calls.push(CallSite { name, args });
    }
    calls
}

/// Best-effort static type of an argument expression.
pub fn infer_arg_type(expr: Node<'_>, env: &LocalEnv) -> TypeName {
    let text = expr.text();
    match expr.kind() {
        "decimal_integer_literal"
        | "hex_integer_literal"
        | "octal_integer_literal"
        | "binary_integer_literal" => {
            if text.ends_with(['l', 'L']) {
                TypeName::known("long")
            } else {
                TypeName::known("int")
            }
        }
        "decimal_floating_point_literal" | "hex_floating_point_literal" => {
            if text.ends_with(['f', 'F']) {
                TypeName::known("float")
            } else {
                TypeName::known("double")
            }
        }
        "string_literal" | "text_block" => TypeName::known("String"),
        "character_literal" => TypeName::known("char"),
        "true" | "false" => TypeName::known("boolean"),
        "null_literal" => TypeName::Unknown,
        "object_creation_expression" => expr
            .child_by_field("type")
            .map(|t| TypeName::normalize(t.text()))
            .unwrap_or(TypeName::Unknown),
        "identifier" => env.get(text).cloned().unwrap_or(TypeName::Unknown),
        "cast_expression" => expr
            .child_by_field("type")
            .map(|t| TypeName::normalize(t.text()))
            .unwrap_or(TypeName::Unknown),
        _ => TypeName::Unknown,
    }
}

const NUMERIC: &[&str] = &[
    "byte", "short", "int", "long", "float", "double", "Byte", "Short", "Integer", "Long", "Float",
    "Double",
];

/// Unknown on either side matches anything: an argument whose type could not
/// be inferred, or a parameter typed by a method type variable.
pub fn types_compatible(param: &TypeName, arg: &TypeName) -> bool {
    let (p, a) = match (param, arg) {
        (TypeName::Unknown, _) | (_, TypeName::Unknown) => return true,
        (TypeName::Known(p), TypeName::Known(a)) => (p.as_str(), a.as_str()),
    };
    p == a
        || NUMERIC.contains(&p) && NUMERIC.contains(&a)
        || matches!(
            (p, a),
            ("boolean", "Boolean")
                | ("Boolean", "boolean")
                | ("char", "Character")
                | ("Character", "char")
        )
}

/// Name, arity and position-wise type match of a single call.
pub fn call_matches(sig: &MethodSignature, call: &CallSite) -> bool {
    if call.name != sig.name {
        return false;
    }
    if !sig.varargs {
        return call.arity() == sig.arity()
            && sig
                .params
                .iter()
                .zip(&call.args)
                .all(|(p, a)| types_compatible(p, a));
    }
    let fixed = sig.arity() - 1;
    let element = &sig.params[fixed];
    call.arity() >= fixed
        && call.args.iter().enumerate().all(|(i, a)| {
            let param = if i < fixed { &sig.params[i] } else { element };
            types_compatible(param, a)
        })
}

/// First call in source order that matches the focal signature.
pub fn is_relevant<'c>(sig: &MethodSignature, calls: &'c [CallSite]) -> Option<&'c CallSite> {
    calls.iter().find(|c| call_matches(sig, c))
}
