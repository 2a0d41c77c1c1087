//! Pretty-printer for the mini-C AST (2-space indentation).

use std::fmt::Write;

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_function(f));
    }
    out
}

pub fn print_signature(f: &Function) -> String {
    let params: Vec<String> = f.params.iter().map(print_param).collect();
    let params = if params.is_empty() { "void".to_string() } else { params.join(", ") };
    format!("void {}({})", f.name, params)
}

fn print_param(d: &VarDecl) -> String {
    let mut s = format!("{} {}", d.ty.keyword(), d.name);
    for dim in &d.dims {
        let _ = write!(s, "[{}]", print_expr(dim));
    }
    s
}

pub fn print_decl(d: &VarDecl) -> String {
    match d.alloc {
        Allocation::Stack => format!("{};", print_param(d)),
        Allocation::Heap => {
            let all: String = d.dims.iter().map(|e| format!("[{}]", print_expr(e))).collect();
            let trailing: String = d.dims[1..].iter().map(|e| format!("[{}]", print_expr(e))).collect();
            let ty = d.ty.keyword();
            if trailing.is_empty() {
                format!("{ty} *{} = malloc(sizeof({ty}{all}));", d.name)
            } else {
                format!("{ty} (*{}){trailing} = malloc(sizeof({ty}{all}));", d.name)
            }
        }
    }
}

pub fn print_function(f: &Function) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {{", print_signature(f));
    for d in &f.locals {
        let _ = writeln!(out, "  {}", print_decl(d));
    }
    for s in &f.body {
        print_stmt(s, 1, &mut out);
    }
    for d in f.locals.iter().filter(|d| d.alloc == Allocation::Heap) {
        let _ = writeln!(out, "  free({});", d.name);
    }
    out.push_str("}\n");
    out
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

pub fn print_loop_header(l: &Loop) -> String {
    let step = if l.step >= 0 {
        format!("{} += {}", l.counter, l.step)
    } else {
        format!("{} -= {}", l.counter, -l.step)
    };
    format!(
        "for (int {} = {}; {}; {})",
        l.counter,
        print_expr(&l.init),
        print_expr(&l.cond),
        step
    )
}

fn print_body(body: &[Stmt], level: usize, out: &mut String) {
    match body {
        [single] if !matches!(single, Stmt::Block(_)) => {
            out.push('\n');
            print_stmt(single, level + 1, out);
        }
        _ => {
            out.push_str(" {\n");
            for s in body {
                print_stmt(s, level + 1, out);
            }
            indent(level, out);
            out.push_str("}\n");
        }
    }
}

pub fn print_stmt(s: &Stmt, level: usize, out: &mut String) {
    match s {
        Stmt::For(l) => {
            for p in &l.pragmas {
                indent(level, out);
                out.push_str(&p.text);
                out.push('\n');
            }
            indent(level, out);
            out.push_str(&print_loop_header(l));
            print_body(&l.body, level, out);
        }
        Stmt::Block(b) => {
            indent(level, out);
            out.push_str("{\n");
            for s in b {
                print_stmt(s, level + 1, out);
            }
            indent(level, out);
            out.push_str("}\n");
        }
        Stmt::If(i) => {
            indent(level, out);
            let _ = writeln!(out, "if ({}) {{", print_expr(&i.cond));
            for s in &i.then_body {
                print_stmt(s, level + 1, out);
            }
            indent(level, out);
            if i.else_body.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                for s in &i.else_body {
                    print_stmt(s, level + 1, out);
                }
                indent(level, out);
                out.push_str("}\n");
            }
        }
        Stmt::Assign(_) | Stmt::Call(_) => {
            indent(level, out);
            out.push_str(&print_stmt_inline(s));
            out.push('\n');
        }
    }
}

/// A simple statement on one line, without indentation.
pub fn print_stmt_inline(s: &Stmt) -> String {
    match s {
        Stmt::Assign(a) => {
            let label = if a.labeled { format!("{}: ", a.name) } else { String::new() };
            format!("{label}{} {} {};", print_access(&a.lhs), a.op.symbol(), print_expr(&a.rhs))
        }
        Stmt::Call(c) => {
            let label = if c.labeled { format!("{}: ", c.name) } else { String::new() };
            let args: Vec<String> = c.args.iter().map(print_expr).collect();
            format!("{label}{}({});", c.callee, args.join(", "))
        }
        other => {
            let mut out = String::new();
            print_stmt(other, 0, &mut out);
            out.trim_end().to_string()
        }
    }
}

pub fn print_access(a: &Access) -> String {
    let mut s = a.array.clone();
    for ix in &a.indices {
        let _ = write!(s, "[{}]", print_expr(ix));
    }
    s
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, 0, &mut out);
    out
}

fn write_expr(e: &Expr, min_prec: u8, out: &mut String) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Float(v) => {
            let _ = write!(out, "{v:?}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Access(a) => out.push_str(&print_access(a)),
        Expr::SizeOf(t) => {
            let _ = write!(out, "sizeof({})", t.keyword());
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(a, 0, out);
            }
            out.push(')');
        }
        Expr::Unary(op, x) => {
            out.push(if *op == UnOp::Neg { '-' } else { '!' });
            let atomic = matches!(
                **x,
                Expr::Var(_) | Expr::Access(_) | Expr::Call(..) | Expr::SizeOf(_)
            ) || matches!(**x, Expr::Int(v) if v >= 0);
            if atomic {
                write_expr(x, 7, out);
            } else {
                out.push('(');
                write_expr(x, 0, out);
                out.push(')');
            }
        }
        Expr::Binary(op, l, r) => {
            let prec = op.precedence();
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(l, prec, out);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(r, prec + 1, out);
            if paren {
                out.push(')');
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    #[test]
    fn parenthesization_preserves_structure() {
        let e = Expr::bin(
            BinOp::Sub,
            Expr::var("a"),
            Expr::bin(BinOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(print_expr(&e), "a - (b - c)");
        let e = Expr::bin(
            BinOp::Mul,
            Expr::bin(BinOp::Add, Expr::var("a"), Expr::Int(1)),
            Expr::var("b"),
        );
        assert_eq!(print_expr(&e), "(a + 1) * b");
        let e = Expr::Unary(UnOp::Neg, Box::new(Expr::bin(BinOp::Add, Expr::var("a"), Expr::Int(1))));
        assert_eq!(print_expr(&e), "-(a + 1)");
    }

    #[test]
    fn loop_headers() {
        let p = parse_source("void f(int n) { for (int i = n-1; i >= 0; i--) ; }").unwrap();
        let Stmt::For(l) = &p.functions[0].body[0] else { panic!() };
        assert_eq!(print_loop_header(l), "for (int i = n - 1; i >= 0; i -= 1)");
    }
}
