//! Turns a [`LanguageSpec`] into source files.
//!
//! All text is produced by a [`Backend`]; [`RustBackend`] targets the
//! `dslad` runtime. Another host language only needs another backend.

use std::fmt::Write;

use crate::patterns::{enumerate, ActivityPattern};
use crate::spec::{Function, LanguageSpec, Structure, REAL};

/// Generated files in emission order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Artifact {
    pub files: Vec<GeneratedFile>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFile {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.contents.as_str())
    }
}

/// Text templates for one host language.
pub trait Backend {
    fn structure_file_name(&self, s: &Structure) -> String;
    fn function_file_name(&self, f: &Function) -> String;
    fn root_file_name(&self) -> String;

    fn structure(&self, spec: &LanguageSpec, s: &Structure) -> String;
    fn function(&self, spec: &LanguageSpec, f: &Function) -> String;
    fn root(&self, spec: &LanguageSpec, includes: &[String]) -> String;
}

pub fn generate(spec: &LanguageSpec) -> Artifact {
    generate_with(spec, &RustBackend)
}

pub fn generate_with(spec: &LanguageSpec, backend: &dyn Backend) -> Artifact {
    let mut files = Vec::new();
    if spec.is_empty() {
        return Artifact { files };
    }
    for s in &spec.structures {
        files.push(GeneratedFile {
            name: backend.structure_file_name(s),
            contents: backend.structure(spec, s),
        });
    }
    for f in &spec.functions {
        files.push(GeneratedFile {
            name: backend.function_file_name(f),
            contents: backend.function(spec, f),
        });
    }
    let includes: Vec<String> = files.iter().map(|f| f.name.clone()).collect();
    files.push(GeneratedFile {
        name: backend.root_file_name(),
        contents: backend.root(spec, &includes),
    });
    Artifact { files }
}

/// Emits Rust for the `dslad` crate.
///
/// The root file defines `Real`, includes the other files and provides
/// `register(tape)`. It is meant to be pulled into a module with
/// `include!`; every structure without a value type must be a type of the
/// same name in that module.
#[derive(Debug, Clone, Copy, Default)]
pub struct RustBackend;

const HEADER: &str = "// @generated by dslgen. Do not edit.\n";

/// `Mat` for `Matrix`, as in the expression type names.
fn abbrev(ty: &str) -> &str {
    if ty == REAL {
        return ty;
    }
    let end = ty.char_indices().nth(3).map_or(ty.len(), |(i, _)| i);
    &ty[..end]
}

fn expr_trait(ty: &str) -> String {
    format!("{ty}Expr")
}

fn op_struct(f: &Function) -> String {
    format!("Op_{}", f.ident())
}

fn args_trait(f: &Function) -> String {
    format!("Args_{}", f.ident())
}

fn factory_name(f: &Function) -> String {
    match &f.member_of {
        Some(s) => format!("{}_{}", snake(s), f.name),
        None => f.name.clone(),
    }
}

fn snake(s: &str) -> String {
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if c.is_ascii_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.push(c.to_ascii_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

fn expr_struct(f: &Function, p: ActivityPattern) -> String {
    let types: String = f.args.iter().map(|a| abbrev(&a.ty)).collect();
    format!("E_{}_{}_{}", f.ident(), types, p.label(f.args.len()))
}

/// How a value of type `ty` named `name` is passed to a snippet routine.
fn param(ty: &str, name: &str) -> String {
    if ty == REAL {
        format!("{name}: {ty}")
    } else {
        format!("{name}: &{ty}")
    }
}

fn pass(ty: &str, expr: &str) -> String {
    if ty == REAL {
        expr.to_string()
    } else {
        format!("&{expr}")
    }
}

/// Snippet lines re-indented into a routine body.
fn body(code: &str, indent: &str) -> String {
    let mut out = String::new();
    for line in code.lines() {
        if line.trim().is_empty() {
            out.push('\n');
        } else {
            let _ = writeln!(out, "{indent}{line}");
        }
    }
    out
}

impl RustBackend {
    fn op_impl(&self, out: &mut String, f: &Function) {
        let op = op_struct(f);
        let params: Vec<String> = f.args.iter().map(|a| param(&a.ty, &a.name)).collect();
        let sig = f
            .args
            .iter()
            .map(|a| format!("{}: {}", a.name, a.ty))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "/// `{}({sig}) -> {}`", f.display_name(), f.result);
        let _ = writeln!(out, "#[allow(non_camel_case_types)]");
        let _ = writeln!(out, "pub struct {op};\n");
        let _ = writeln!(out, "#[allow(unused_variables, clippy::needless_return)]");
        let _ = writeln!(out, "impl {op} {{");
        let _ = writeln!(
            out,
            "    pub fn compute_value({}) -> {} {{",
            params.join(", "),
            f.result
        );
        out.push_str(&body(&f.primal, "        "));
        out.push_str("    }\n");
        for a in f.args.iter().filter(|a| a.input) {
            let _ = writeln!(
                out,
                "\n    pub fn diff_b_{}({}, {}, {}) -> {} {{",
                a.name,
                params.join(", "),
                param(&f.result, "r"),
                param(&f.result, "r_b"),
                a.ty
            );
            out.push_str(&body(a.reverse.as_deref().unwrap_or_default(), "        "));
            out.push_str("    }\n");
        }
        out.push_str("}\n");
    }

    fn descriptor(&self, out: &mut String, f: &Function) {
        let op = op_struct(f);
        let unpack = |ty: &str, expr: String| {
            if ty == REAL {
                format!("*{expr}")
            } else {
                expr
            }
        };
        let prim_args: Vec<String> = f
            .args
            .iter()
            .enumerate()
            .map(|(i, a)| unpack(&a.ty, format!("arg::<{}>(a, {i})", a.ty)))
            .collect();
        let _ = writeln!(out, "\nimpl ::dslad::DslOpDef for {op} {{");
        out.push_str("    fn descriptor() -> ::dslad::DslOpDescriptor {\n");
        out.push_str("        use ::dslad::dsl::{arg, value};\n");
        out.push_str("        use ::std::any::Any;\n\n");
        out.push_str("        fn primal(a: &[&dyn Any]) -> Box<dyn Any> {\n");
        let _ = writeln!(out, "            Box::new({op}::compute_value({}))", prim_args.join(", "));
        out.push_str("        }\n");
        for a in f.args.iter().filter(|a| a.input) {
            let _ = writeln!(
                out,
                "        fn reverse_{}(a: &[&dyn Any], r: &dyn Any, r_b: &dyn Any) -> Box<dyn Any> {{",
                a.name
            );
            let _ = writeln!(
                out,
                "            Box::new({op}::diff_b_{}({}, {}, {}))",
                a.name,
                prim_args.join(", "),
                unpack(&f.result, format!("value::<{}>(r)", f.result)),
                unpack(&f.result, format!("value::<{}>(r_b)", f.result)),
            );
            out.push_str("        }\n");
        }
        let _ = write!(
            out,
            "        ::dslad::DslOpDescriptor::new::<{}>({:?}, primal)",
            f.result,
            f.display_name()
        );
        for a in &f.args {
            let rev = if a.input {
                format!("Some(reverse_{})", a.name)
            } else {
                "None".into()
            };
            let _ = write!(out, "\n            .arg::<{}>({:?}, {rev})", a.ty, a.name);
        }
        out.push_str("\n    }\n}\n");
    }

    fn variant(&self, out: &mut String, f: &Function, p: ActivityPattern) {
        let name = expr_struct(f, p);
        let op = op_struct(f);
        let active: Vec<_> = f.args.iter().enumerate().filter(|(i, _)| p.is_active(*i)).map(|(_, a)| a).collect();
        let generics = active.iter().map(|a| format!("E_{}", a.name)).collect::<Vec<_>>().join(", ");
        let bounds = active
            .iter()
            .map(|a| format!("E_{}: {}", a.name, expr_trait(&a.ty)))
            .collect::<Vec<_>>()
            .join(", ");
        let passive: Vec<_> = f.args.iter().enumerate().filter(|(i, _)| !p.is_active(*i)).map(|(_, a)| a.name.as_str()).collect();
        let doc = if passive.is_empty() {
            format!("/// `{}` with all arguments active.", f.display_name())
        } else {
            let list = passive.iter().map(|n| format!("`{n}`")).collect::<Vec<_>>().join(", ");
            format!("/// `{}` with {list} passive.", f.display_name())
        };
        let _ = writeln!(out, "\n{doc}");
        out.push_str("#[allow(non_camel_case_types)]\n#[derive(Clone)]\n");
        let _ = writeln!(out, "pub struct {name}<{generics}> {{");
        for (i, a) in f.args.iter().enumerate() {
            let ty = if p.is_active(i) { format!("E_{}", a.name) } else { a.ty.clone() };
            let _ = writeln!(out, "    pub {}: {ty},", a.name);
        }
        out.push_str("}\n\n");

        let value_args: Vec<String> = f
            .args
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if p.is_active(i) {
                    pass(&a.ty, &format!("self.{}.value()", a.name))
                } else {
                    pass(&a.ty, &format!("self.{}", a.name))
                }
            })
            .collect();
        let _ = writeln!(out, "#[allow(non_camel_case_types)]\nimpl<{bounds}> ::dslad::DslExpr for {name}<{generics}> {{");
        let _ = writeln!(out, "    type Value = {};\n", f.result);
        let _ = writeln!(out, "    fn value(&self) -> {} {{", f.result);
        let _ = writeln!(out, "        {op}::compute_value({})", value_args.join(", "));
        out.push_str("    }\n\n");
        let _ = writeln!(
            out,
            "    fn record(&self, rec: &mut ::dslad::ExprRecorder<'_>) -> Result<::dslad::Recorded<{}>, ::dslad::TapeError> {{",
            f.result
        );
        out.push_str("        let mark = rec.mark();\n");
        for (i, a) in f.args.iter().enumerate() {
            if p.is_active(i) {
                let _ = writeln!(out, "        let arg_{0} = self.{0}.record(rec)?;", a.name);
            } else if a.ty == REAL {
                let _ = writeln!(out, "        let arg_{0} = rec.passive(self.{0})?;", a.name);
            } else {
                let _ = writeln!(out, "        let arg_{0} = rec.passive(self.{0}.clone())?;", a.name);
            }
        }
        let rec_args: Vec<String> = f.args.iter().map(|a| pass(&a.ty, &format!("arg_{}.value", a.name))).collect();
        let _ = writeln!(out, "        let value = {op}::compute_value({});", rec_args.join(", "));
        let flags: Vec<String> = f.args.iter().map(|a| format!("arg_{}.active", a.name)).collect();
        let _ = writeln!(
            out,
            "        let active = rec.op::<{op}, {}>(mark, &[{}], &value)?;",
            f.result,
            flags.join(", ")
        );
        out.push_str("        Ok(::dslad::Recorded { value, active })\n");
        out.push_str("    }\n}\n\n");
        let _ = writeln!(
            out,
            "#[allow(non_camel_case_types)]\nimpl<{bounds}> {} for {name}<{generics}> {{}}",
            expr_trait(&f.result)
        );
    }

    fn factory(&self, out: &mut String, f: &Function, patterns: &[ActivityPattern]) {
        let tr = args_trait(f);
        let _ = writeln!(
            out,
            "\n/// Argument tuples accepted by [`{}`]; selects the expression variant.",
            factory_name(f)
        );
        out.push_str("#[allow(non_camel_case_types)]\n");
        let _ = writeln!(out, "pub trait {tr} {{");
        out.push_str("    type Output;\n    fn build(self) -> Self::Output;\n}\n");
        let n = f.args.len();
        for &p in patterns {
            let name = expr_struct(f, p);
            let active: Vec<_> = f.args.iter().enumerate().filter(|(i, _)| p.is_active(*i)).map(|(_, a)| a).collect();
            let generics = active.iter().map(|a| format!("E_{}", a.name)).collect::<Vec<_>>().join(", ");
            let bounds = active
                .iter()
                .map(|a| format!("E_{}: {}", a.name, expr_trait(&a.ty)))
                .collect::<Vec<_>>()
                .join(", ");
            let tuple: Vec<String> = f
                .args
                .iter()
                .enumerate()
                .map(|(i, a)| if p.is_active(i) { format!("E_{}", a.name) } else { a.ty.clone() })
                .collect();
            let tuple = if n == 1 { format!("({},)", tuple[0]) } else { format!("({})", tuple.join(", ")) };
            let fields: Vec<String> = f.args.iter().enumerate().map(|(i, a)| format!("{}: self.{i}", a.name)).collect();
            let _ = writeln!(out, "\n#[allow(non_camel_case_types)]\nimpl<{bounds}> {tr} for {tuple} {{");
            let _ = writeln!(out, "    type Output = {name}<{generics}>;\n");
            out.push_str("    fn build(self) -> Self::Output {\n");
            let _ = writeln!(out, "        {name} {{ {} }}", fields.join(", "));
            out.push_str("    }\n}\n");
        }
        let gen_names: Vec<String> = f.args.iter().map(|a| format!("A_{}", a.name)).collect();
        let params: Vec<String> = f.args.iter().map(|a| format!("{0}: A_{0}", a.name)).collect();
        let tuple_ty = if n == 1 { format!("({},)", gen_names[0]) } else { format!("({})", gen_names.join(", ")) };
        let names: Vec<&str> = f.args.iter().map(|a| a.name.as_str()).collect();
        let tuple_val = if n == 1 { format!("({},)", names[0]) } else { format!("({})", names.join(", ")) };
        let _ = writeln!(
            out,
            "\n/// `{}` as an expression; each argument is an active expression or a passive value.",
            f.display_name()
        );
        let _ = writeln!(
            out,
            "#[allow(non_camel_case_types)]\npub fn {}<{}>({}) -> <{tuple_ty} as {tr}>::Output\nwhere\n    {tuple_ty}: {tr},\n{{\n    {tr}::build({tuple_val})\n}}",
            factory_name(f),
            gen_names.join(", "),
            params.join(", ")
        );
    }

    fn passive_factory(&self, out: &mut String, f: &Function) {
        let params: Vec<String> = f.args.iter().map(|a| format!("{}: {}", a.name, a.ty)).collect();
        let args: Vec<String> = f.args.iter().map(|a| pass(&a.ty, &a.name)).collect();
        let _ = writeln!(
            out,
            "\n/// `{}` has no differentiable argument and is evaluated directly.\npub fn {}({}) -> {} {{\n    {}::compute_value({})\n}}",
            f.display_name(),
            factory_name(f),
            params.join(", "),
            f.result,
            op_struct(f),
            args.join(", ")
        );
    }
}

impl Backend for RustBackend {
    fn structure_file_name(&self, s: &Structure) -> String {
        format!("{}.gen.rs", s.name)
    }

    fn function_file_name(&self, f: &Function) -> String {
        format!("ops_{}.gen.rs", f.ident())
    }

    fn root_file_name(&self) -> String {
        "dsl.gen.rs".into()
    }

    fn structure(&self, _spec: &LanguageSpec, s: &Structure) -> String {
        let mut out = String::from(HEADER);
        let n = &s.name;
        if let Some(v) = &s.value_type {
            let _ = writeln!(out, "\npub type {n} = {v};");
        }
        let _ = writeln!(
            out,
            "\n/// Active `{n}`: the value plus an identifier from the `{n}` index manager."
        );
        let _ = writeln!(out, "pub type Active{n}<'t> = ::dslad::ActiveObject<'t, Real, {n}>;");
        let _ = writeln!(out, "\n/// Expressions with a `{n}` value.");
        let _ = writeln!(out, "pub trait {0}: ::dslad::DslExpr<Value = {n}> {{}}\n", expr_trait(n));
        let _ = writeln!(out, "impl {} for &Active{n}<'_> {{}}", expr_trait(n));
        out
    }

    fn function(&self, _spec: &LanguageSpec, f: &Function) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        self.op_impl(&mut out, f);
        let patterns = enumerate(&f.inputs());
        if patterns.is_empty() {
            self.passive_factory(&mut out, f);
            return out;
        }
        self.descriptor(&mut out, f);
        for &p in &patterns {
            self.variant(&mut out, f, p);
        }
        self.factory(&mut out, f, &patterns);
        out
    }

    fn root(&self, spec: &LanguageSpec, includes: &[String]) -> String {
        let mut out = String::from(HEADER);
        out.push_str("\n/// Real type of the tape the generated types record on.\n");
        let _ = writeln!(out, "pub type Real = {};", spec.real);
        out.push_str("\n/// Expressions with a `Real` value.\n");
        out.push_str("pub trait RealExpr: ::dslad::DslExpr<Value = Real> {}\n\n");
        out.push_str("impl RealExpr for &::dslad::ActiveScalar<'_, Real> {}\n\n");
        for inc in includes {
            let _ = writeln!(out, "include!({inc:?});");
        }
        out.push_str("\n/// Registers all structures and operations with `tape`.\n");
        out.push_str("pub fn register(tape: &::dslad::Tape<Real>) -> Result<(), ::dslad::TapeError> {\n");
        for s in &spec.structures {
            let _ = writeln!(out, "    tape.register_type::<{}>()?;", s.name);
        }
        for f in spec.functions.iter().filter(|f| !f.inputs().is_empty()) {
            let _ = writeln!(out, "    tape.register_op::<{}>()?;", op_struct(f));
        }
        out.push_str("    Ok(())\n}\n");
        out
    }
}
