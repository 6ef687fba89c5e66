//! Parsed and validated language description.

use std::collections::HashSet;
use std::fmt;

use roxmltree::{Document, Node, NodeType};

/// The tape's real scalar; usable as an argument or result type without
/// being declared as a structure.
pub const REAL: &str = "Real";

/// Names every generated routine binds besides the arguments.
pub const RESERVED: [&str; 3] = ["r", "r_b", "t"];

const KEYWORDS: &[&str] = &[
    "as", "async", "await", "break", "const", "continue", "crate", "dyn", "else", "enum",
    "extern", "false", "fn", "for", "if", "impl", "in", "let", "loop", "match", "mod", "move",
    "mut", "pub", "ref", "return", "self", "Self", "static", "struct", "super", "trait", "true",
    "type", "unsafe", "use", "where", "while", "abstract", "become", "box", "do", "final",
    "macro", "override", "priv", "try", "typeof", "unsized", "virtual", "yield",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Location {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// One problem in a specification document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("malformed XML: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

impl SpecError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            SpecError::Invalid(d) => d,
            SpecError::Xml(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageSpec {
    /// Rust type of the tape's real scalar.
    pub real: String,
    pub structures: Vec<Structure>,
    /// Global functions followed by member functions, each group in
    /// document order.
    pub functions: Vec<Function>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    pub name: String,
    /// Rust type behind the structure; `None` means a type of the same
    /// name must be in scope where the generated code is included.
    pub value_type: Option<String>,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub result: String,
    pub member_of: Option<String>,
    /// For member functions the receiver `t` comes first.
    pub args: Vec<Arg>,
    pub primal: String,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg {
    pub name: String,
    pub ty: String,
    pub input: bool,
    pub reverse: Option<String>,
    pub location: Location,
}

impl Function {
    /// Name used for generated items, unique across global and member
    /// functions.
    pub fn ident(&self) -> String {
        match &self.member_of {
            Some(s) => format!("{s}_{}", self.name),
            None => self.name.clone(),
        }
    }

    /// Name registered on the tape.
    pub fn display_name(&self) -> String {
        match &self.member_of {
            Some(s) => format!("{s}.{}", self.name),
            None => self.name.clone(),
        }
    }

    /// Positions of the differentiable arguments.
    pub fn inputs(&self) -> Vec<usize> {
        (0..self.args.len()).filter(|&i| self.args[i].input).collect()
    }
}

impl LanguageSpec {
    pub fn is_empty(&self) -> bool {
        self.structures.is_empty() && self.functions.is_empty()
    }

    pub fn structure(&self, name: &str) -> Option<&Structure> {
        self.structures.iter().find(|s| s.name == name)
    }
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch == '_' || ch.is_ascii_alphabetic())
        && c.all(|ch| ch == '_' || ch.is_ascii_alphanumeric())
        && s != "_"
        && !KEYWORDS.contains(&s)
}

struct Parser<'a, 'input> {
    doc: &'a Document<'input>,
    diags: Vec<Diagnostic>,
}

impl<'a, 'input> Parser<'a, 'input> {
    fn loc(&self, node: Node) -> Location {
        let p = self.doc.text_pos_at(node.range().start);
        Location {
            line: p.row,
            column: p.col,
        }
    }

    fn error(&mut self, node: Node, message: impl Into<String>) {
        let location = self.loc(node);
        self.diags.push(Diagnostic {
            location,
            message: message.into(),
        });
    }

    /// Checks that `node` only carries the listed attributes.
    fn attributes(&mut self, node: Node, allowed: &[&str]) {
        for a in node.attributes() {
            if !allowed.contains(&a.name()) {
                self.error(
                    node,
                    format!("unknown attribute `{}` on <{}>", a.name(), node.tag_name().name()),
                );
            }
        }
    }

    fn required(&mut self, node: Node<'a, 'input>, attr: &str) -> Option<String> {
        match node.attribute(attr) {
            Some(v) => Some(v.to_string()),
            None => {
                self.error(
                    node,
                    format!("<{}> is missing attribute `{attr}`", node.tag_name().name()),
                );
                None
            }
        }
    }

    fn name(&mut self, node: Node<'a, 'input>, attr: &str) -> Option<String> {
        let v = self.required(node, attr)?;
        if !is_ident(&v) {
            self.error(node, format!("`{v}` is not a valid identifier"));
            return None;
        }
        Some(v)
    }

    /// Element children; stray text is an error, comments are skipped.
    fn children(&mut self, node: Node<'a, 'input>) -> Vec<Node<'a, 'input>> {
        let mut out = Vec::new();
        for c in node.children() {
            match c.node_type() {
                NodeType::Element => out.push(c),
                NodeType::Text if c.text().is_some_and(|t| t.trim().is_empty()) => {}
                NodeType::Comment | NodeType::PI => {}
                _ => self.error(c, format!("unexpected text in <{}>", node.tag_name().name())),
            }
        }
        out
    }

    fn code(&mut self, node: Node<'a, 'input>) -> Option<String> {
        self.attributes(node, &[]);
        let mut text = String::new();
        for c in node.children() {
            match c.node_type() {
                NodeType::Text => text.push_str(c.text().unwrap_or("")),
                NodeType::Comment => {}
                _ => self.error(c, format!("<{}> may only contain code", node.tag_name().name())),
            }
        }
        let code = text.trim();
        if code.is_empty() {
            self.error(node, format!("<{}> is empty", node.tag_name().name()));
            return None;
        }
        Some(code.to_string())
    }

    fn function(&mut self, node: Node<'a, 'input>, member_of: Option<&str>) -> Option<Function> {
        self.attributes(node, &["name", "rType"]);
        let name = self.name(node, "name");
        let result = self.name(node, "rType");
        let mut args = Vec::new();
        if let Some(s) = member_of {
            args.push(Arg {
                name: "t".into(),
                ty: s.to_string(),
                input: false,
                reverse: None,
                location: self.loc(node),
            });
        }
        let mut primal = None;
        for c in self.children(node) {
            match c.tag_name().name() {
                "arg" => {
                    if let Some(a) = self.arg(c) {
                        args.push(a);
                    }
                }
                "primal" if primal.is_some() => self.error(c, "duplicate <primal>"),
                "primal" => primal = Some(self.code(c)),
                // receiver derivative of a member function
                "reverse" if member_of.is_some() => {
                    if args[0].reverse.is_some() {
                        self.error(c, "duplicate <reverse> for `t`");
                    }
                    args[0].reverse = self.code(c);
                    args[0].input = true;
                }
                other => self.error(c, format!("unknown element <{other}> in <function>")),
            }
        }
        let primal = match primal {
            Some(p) => p,
            None => {
                self.error(node, "<function> has no <primal>");
                None
            }
        };
        Some(Function {
            name: name?,
            result: result?,
            member_of: member_of.map(str::to_string),
            args,
            primal: primal?,
            location: self.loc(node),
        })
    }

    fn arg(&mut self, node: Node<'a, 'input>) -> Option<Arg> {
        self.attributes(node, &["input", "type", "name"]);
        let name = self.name(node, "name");
        let ty = self.name(node, "type");
        let input = match self.required(node, "input").as_deref() {
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some(v) => {
                self.error(node, format!("attribute `input` must be 0 or 1, not `{v}`"));
                None
            }
            None => None,
        };
        let mut reverse = None;
        for c in self.children(node) {
            match c.tag_name().name() {
                "reverse" if reverse.is_some() => self.error(c, "duplicate <reverse>"),
                "reverse" => reverse = Some(self.code(c)),
                other => self.error(c, format!("unknown element <{other}> in <arg>")),
            }
        }
        let input = input?;
        let reverse = match (input, reverse) {
            (true, None) => {
                self.error(
                    node,
                    format!("argument `{}` has input=\"1\" but no <reverse> code", name.as_deref().unwrap_or("?")),
                );
                return None;
            }
            (false, Some(_)) => {
                self.error(node, "<reverse> given for an argument with input=\"0\"");
                return None;
            }
            (_, r) => r.flatten(),
        };
        if input && reverse.is_none() {
            return None;
        }
        Some(Arg {
            name: name?,
            ty: ty?,
            input,
            reverse,
            location: self.loc(node),
        })
    }
}

/// Options that are not part of the document.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Value type for structures without a `valueType` attribute.
    pub default_value_type: Option<String>,
}

/// Parses and validates a specification document.
pub fn parse_spec(text: &str, opts: &ParseOptions) -> Result<LanguageSpec, SpecError> {
    let doc = Document::parse(text)?;
    let mut p = Parser {
        doc: &doc,
        diags: Vec::new(),
    };
    let root = doc.root_element();
    let mut spec = LanguageSpec {
        real: "f64".into(),
        structures: Vec::new(),
        functions: Vec::new(),
    };
    if root.tag_name().name() != "language" {
        p.error(root, format!("root element must be <language>, found <{}>", root.tag_name().name()));
        return Err(SpecError::Invalid(p.diags));
    }
    p.attributes(root, &["real"]);
    if let Some(r) = root.attribute("real") {
        match r {
            "f32" | "f64" => spec.real = r.into(),
            _ => p.error(root, format!("attribute `real` must be f32 or f64, not `{r}`")),
        }
    }
    let mut members = Vec::new();
    for c in p.children(root) {
        match c.tag_name().name() {
            "structure" => {
                p.attributes(c, &["name", "valueType"]);
                let Some(name) = p.name(c, "name") else { continue };
                let value_type = c
                    .attribute("valueType")
                    .map(str::to_string)
                    .or_else(|| opts.default_value_type.clone());
                let location = p.loc(c);
                spec.structures.push(Structure {
                    name: name.clone(),
                    value_type,
                    location,
                });
                for f in p.children(c) {
                    if f.tag_name().name() == "function" {
                        if let Some(f) = p.function(f, Some(&name)) {
                            members.push(f);
                        }
                    } else {
                        p.error(f, format!("unknown element <{}> in <structure>", f.tag_name().name()));
                    }
                }
            }
            "function" => {
                if let Some(f) = p.function(c, None) {
                    spec.functions.push(f);
                }
            }
            other => p.error(c, format!("unknown element <{other}>")),
        }
    }
    spec.functions.extend(members);
    validate(&spec, &mut p.diags);
    if p.diags.is_empty() {
        Ok(spec)
    } else {
        Err(SpecError::Invalid(p.diags))
    }
}

fn validate(spec: &LanguageSpec, diags: &mut Vec<Diagnostic>) {
    let mut err = |location, message: String| diags.push(Diagnostic { location, message });
    let mut types = HashSet::new();
    for s in &spec.structures {
        if s.name == REAL {
            err(s.location, format!("structure name `{REAL}` is reserved for the tape's real type"));
        } else if !types.insert(s.name.as_str()) {
            err(s.location, format!("structure `{}` declared twice", s.name));
        }
    }
    let known = |t: &str| t == REAL || types.contains(t);
    let mut fns = HashSet::new();
    for f in &spec.functions {
        if !fns.insert(f.ident()) {
            err(f.location, format!("function `{}` declared twice", f.display_name()));
        }
        if !known(&f.result) {
            err(f.location, format!("result type `{}` of `{}` is not declared", f.result, f.name));
        }
        let mut names = HashSet::new();
        let receiver = usize::from(f.member_of.is_some());
        for a in &f.args[receiver..] {
            if RESERVED.contains(&a.name.as_str()) {
                err(
                    a.location,
                    format!("argument name `{}` collides with a reserved name (r, r_b, t)", a.name),
                );
            }
            if !known(&a.ty) {
                err(a.location, format!("type `{}` of argument `{}` is not declared", a.ty, a.name));
            }
        }
        for a in &f.args {
            if !names.insert(a.name.as_str()) {
                err(a.location, format!("argument `{}` of `{}` declared twice", a.name, f.name));
            }
        }
        if f.args.len() > 32 {
            err(f.location, format!("`{}` has more than 32 arguments", f.name));
        }
    }
}
