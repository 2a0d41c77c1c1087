use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{expr_to_affine, loop_range, FrontendError};

/// Helper functions the generated code defines and the interpreter implements natively.
pub const BUILTIN_FUNCTIONS: &[&str] = &["min", "max", "floord", "lf_disjoint"];

pub fn parse_program(src: &str) -> Result<Program, FrontendError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, scope: Scope::default() };
    p.program()
}

#[derive(Default)]
struct Scope {
    /// Declared variables of the current function with their rank.
    vars: HashMap<String, usize>,
    scalar_params: HashSet<String>,
    heap: HashSet<String>,
    counters: Vec<String>,
    locals: Vec<VarDecl>,
    stmt_count: usize,
    loop_count: usize,
    names: HashSet<String>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    scope: Scope,
}

fn type_keyword(s: &str) -> Option<ScalarType> {
    match s {
        "int" => Some(ScalarType::Int),
        "long" => Some(ScalarType::Long),
        "double" => Some(ScalarType::Double),
        _ => None,
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn loc(&self) -> Location {
        self.toks[self.pos].loc
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Float(v) => format!("`{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Pragma(_) => "pragma line".into(),
            Tok::Eof => "end of input".into(),
        }
    }

    fn err_expected(&self, what: &str) -> FrontendError {
        FrontendError::Syntax {
            loc: self.loc(),
            message: format!("expected {what}, found {}", Self::describe(self.peek())),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(q) if q == s)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), FrontendError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.err_expected(&format!("`{p}`")))
        }
    }

    fn expect_ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.err_expected("identifier")),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), FrontendError> {
        if self.is_ident(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.err_expected(&format!("`{kw}`")))
        }
    }

    fn expect_type(&mut self) -> Result<ScalarType, FrontendError> {
        match self.peek() {
            Tok::Ident(s) => match type_keyword(s) {
                Some(t) => {
                    self.advance();
                    Ok(t)
                }
                None => Err(self.err_expected("type name")),
            },
            _ => Err(self.err_expected("type name")),
        }
    }

    fn program(&mut self) -> Result<Program, FrontendError> {
        let mut prog = Program::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Pragma(_) => {
                    return Err(FrontendError::MisplacedPragma { loc: self.loc() });
                }
                Tok::Ident(s) if s == "static" => {
                    let name = self.skip_helper()?;
                    prog.helpers.push(name);
                }
                Tok::Ident(s) if s == "void" => {
                    let f = self.function()?;
                    if prog.functions.iter().any(|g| g.name == f.name) {
                        return Err(FrontendError::Redeclared { loc: f.loc, name: f.name });
                    }
                    prog.functions.push(f);
                }
                _ => return Err(self.err_expected("function definition")),
            }
        }
        Ok(prog)
    }

    /// Skips a `static inline` helper definition; only the known helpers are accepted.
    fn skip_helper(&mut self) -> Result<String, FrontendError> {
        self.expect_keyword("static")?;
        if self.is_ident("inline") {
            self.advance();
        }
        let loc = self.loc();
        // Return type: one or more type words, possibly `const`.
        while matches!(self.peek(), Tok::Ident(s) if type_keyword(s).is_some() || s == "const" || s == "unsigned")
        {
            self.advance();
        }
        let name = self.expect_ident()?;
        if !BUILTIN_FUNCTIONS.contains(&name.as_str()) {
            return Err(FrontendError::Syntax {
                loc,
                message: format!("unsupported helper function `{name}`"),
            });
        }
        self.expect_punct("(")?;
        let mut depth = 1;
        while depth > 0 {
            match self.advance().tok {
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => depth -= 1,
                Tok::Eof => return Err(self.err_expected("`)`")),
                _ => {}
            }
        }
        self.expect_punct("{")?;
        let mut depth = 1;
        while depth > 0 {
            match self.advance().tok {
                Tok::Punct("{") => depth += 1,
                Tok::Punct("}") => depth -= 1,
                Tok::Eof => return Err(self.err_expected("`}`")),
                _ => {}
            }
        }
        Ok(name)
    }

    fn function(&mut self) -> Result<Function, FrontendError> {
        self.expect_keyword("void")?;
        let loc = self.loc();
        let name = self.expect_ident()?;
        self.scope = Scope::default();
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.is_ident("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.advance();
        }
        if !self.is_punct(")") {
            loop {
                let ploc = self.loc();
                let ty = self.expect_type()?;
                let pname = self.expect_ident()?;
                let mut dims = Vec::new();
                while self.eat_punct("[") {
                    let d = self.expr()?;
                    self.check_dim_expr(&d, ploc)?;
                    dims.push(d);
                    self.expect_punct("]")?;
                }
                self.declare(&pname, dims.len(), ploc)?;
                if dims.is_empty() {
                    self.scope.scalar_params.insert(pname.clone());
                }
                params.push(VarDecl { name: pname, ty, dims, alloc: Allocation::Stack, loc: ploc });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.err_expected("`}`"));
            }
            body.extend(self.stmt()?);
        }
        self.expect_punct("}")?;
        let locals = std::mem::take(&mut self.scope.locals);
        Ok(Function { name, params, locals, body, loc })
    }

    fn declare(&mut self, name: &str, rank: usize, loc: Location) -> Result<(), FrontendError> {
        if self.scope.vars.contains_key(name) || self.scope.counters.iter().any(|c| c == name) {
            return Err(FrontendError::Redeclared { loc, name: name.to_string() });
        }
        self.scope.vars.insert(name.to_string(), rank);
        Ok(())
    }

    /// Array extents may only mention integer constants and scalar parameters.
    fn check_dim_expr(&self, e: &Expr, loc: Location) -> Result<(), FrontendError> {
        let mut bad: Option<String> = None;
        e.map(&mut |x| {
            match &x {
                Expr::Var(v) if !self.scope.scalar_params.contains(v) && bad.is_none() => {
                    bad = Some(v.clone())
                }
                Expr::Access(a) if bad.is_none() => bad = Some(a.array.clone()),
                _ => {}
            }
            x
        });
        match bad {
            Some(v) if !self.scope.vars.contains_key(&v) => {
                Err(FrontendError::Undeclared { loc, name: v })
            }
            Some(v) => Err(FrontendError::Syntax {
                loc,
                message: format!("array extent may only use scalar parameters, found `{v}`"),
            }),
            None => Ok(()),
        }
    }

    fn next_stmt_name(&mut self, label: Option<String>, loc: Location) -> Result<(String, bool), FrontendError> {
        let idx = self.scope.stmt_count;
        self.scope.stmt_count += 1;
        let (name, labeled) = match label {
            Some(l) => (l, true),
            None => (format!("S{idx}"), false),
        };
        if !self.scope.names.insert(name.clone()) {
            return Err(FrontendError::Redeclared { loc, name });
        }
        Ok((name, labeled))
    }

    /// Parses one statement; declarations and `free` calls may produce nothing.
    fn stmt(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Pragma(_) => {
                let mut pragmas = Vec::new();
                while let Tok::Pragma(text) = self.peek().clone() {
                    let ploc = self.loc();
                    if !is_loop_pragma(&text) {
                        return Err(FrontendError::Syntax {
                            loc: ploc,
                            message: format!("unsupported directive `{text}`"),
                        });
                    }
                    pragmas.push(Pragma { text, loc: ploc });
                    self.advance();
                }
                if !self.is_ident("for") {
                    return Err(FrontendError::MisplacedPragma { loc: pragmas[0].loc });
                }
                Ok(vec![Stmt::For(self.for_loop(pragmas)?)])
            }
            Tok::Punct("{") => {
                self.advance();
                let mut body = Vec::new();
                while !self.is_punct("}") {
                    if matches!(self.peek(), Tok::Eof) {
                        return Err(self.err_expected("`}`"));
                    }
                    body.extend(self.stmt()?);
                }
                self.advance();
                Ok(vec![Stmt::Block(body)])
            }
            Tok::Punct(";") => {
                self.advance();
                Ok(vec![])
            }
            Tok::Ident(s) if s == "for" => Ok(vec![Stmt::For(self.for_loop(Vec::new())?)]),
            Tok::Ident(s) if s == "if" => self.if_stmt(),
            Tok::Ident(s) if type_keyword(&s).is_some() => self.declaration(),
            Tok::Ident(s) if s == "free" => {
                self.advance();
                self.expect_punct("(")?;
                let name = self.expect_ident()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                if !self.scope.heap.contains(&name) {
                    return Err(FrontendError::Syntax {
                        loc,
                        message: format!("`free` of `{name}`, which is not a heap allocation"),
                    });
                }
                Ok(vec![])
            }
            Tok::Ident(label) if matches!(self.peek_at(1), Tok::Punct(":")) => {
                self.advance();
                self.advance();
                self.simple_stmt(Some(label), loc)
            }
            Tok::Ident(_) => self.simple_stmt(None, loc),
            _ => Err(self.err_expected("statement")),
        }
    }

    fn body(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        let mut s = self.stmt()?;
        if let [Stmt::Block(_)] = s.as_slice() {
            if let Some(Stmt::Block(inner)) = s.pop() {
                return Ok(inner);
            }
        }
        Ok(s)
    }

    fn if_stmt(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        let loc = self.loc();
        self.expect_keyword("if")?;
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.check_expr(&cond, loc)?;
        self.expect_punct(")")?;
        let then_body = self.body()?;
        let else_body = if self.is_ident("else") {
            self.advance();
            self.body()?
        } else {
            Vec::new()
        };
        Ok(vec![Stmt::If(IfStmt { cond, then_body, else_body, loc })])
    }

    fn declaration(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        let loc = self.loc();
        let ty = self.expect_type()?;
        // Heap forms: `T (*P)[d1].. = malloc(sizeof(T[d0][d1]..));` and `T *P = malloc(sizeof(T[d0]));`
        if self.is_punct("(") || self.is_punct("*") {
            let paren = self.eat_punct("(");
            self.expect_punct("*")?;
            let name = self.expect_ident()?;
            let mut trailing = Vec::new();
            if paren {
                self.expect_punct(")")?;
                while self.eat_punct("[") {
                    trailing.push(self.expr()?);
                    self.expect_punct("]")?;
                }
            }
            self.expect_punct("=")?;
            self.expect_keyword("malloc")?;
            self.expect_punct("(")?;
            self.expect_keyword("sizeof")?;
            self.expect_punct("(")?;
            let ty2 = self.expect_type()?;
            let mut dims = Vec::new();
            while self.eat_punct("[") {
                let d = self.expr()?;
                self.check_dim_expr(&d, loc)?;
                dims.push(d);
                self.expect_punct("]")?;
            }
            self.expect_punct(")")?;
            self.expect_punct(")")?;
            self.expect_punct(";")?;
            if ty2 != ty || dims.is_empty() || dims.len() != trailing.len() + 1 || dims[1..] != trailing[..] {
                return Err(FrontendError::Syntax {
                    loc,
                    message: format!("heap allocation of `{name}` has inconsistent extents"),
                });
            }
            if !self.scope.counters.is_empty() {
                return Err(FrontendError::Syntax {
                    loc,
                    message: "heap allocations must be at function scope".into(),
                });
            }
            self.declare(&name, dims.len(), loc)?;
            self.scope.heap.insert(name.clone());
            self.scope.locals.push(VarDecl { name, ty, dims, alloc: Allocation::Heap, loc });
            return Ok(vec![]);
        }
        let mut out = Vec::new();
        loop {
            let dloc = self.loc();
            let name = self.expect_ident()?;
            let mut dims = Vec::new();
            while self.eat_punct("[") {
                let d = self.expr()?;
                self.check_dim_expr(&d, dloc)?;
                dims.push(d);
                self.expect_punct("]")?;
            }
            self.declare(&name, dims.len(), dloc)?;
            self.scope.locals.push(VarDecl {
                name: name.clone(),
                ty,
                dims: dims.clone(),
                alloc: Allocation::Stack,
                loc: dloc,
            });
            if self.eat_punct("=") {
                if !dims.is_empty() {
                    return Err(FrontendError::Syntax {
                        loc: dloc,
                        message: "array initializers are not supported".into(),
                    });
                }
                let rhs = self.expr()?;
                self.check_expr(&rhs, dloc)?;
                let (sname, labeled) = self.next_stmt_name(None, dloc)?;
                out.push(Stmt::Assign(Assign {
                    name: sname,
                    labeled,
                    lhs: Access { array: name, indices: vec![] },
                    op: AssignOp::Set,
                    rhs,
                    loc: dloc,
                }));
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(out)
    }

    fn simple_stmt(&mut self, label: Option<String>, loc: Location) -> Result<Vec<Stmt>, FrontendError> {
        let head = self.expect_ident()?;
        if self.eat_punct("(") {
            let args = self.call_args()?;
            self.expect_punct(";")?;
            for a in &args {
                self.check_call_arg(a, loc)?;
            }
            let (name, labeled) = self.next_stmt_name(label, loc)?;
            return Ok(vec![Stmt::Call(CallStmt { name, labeled, callee: head, args, loc })]);
        }
        let mut indices = Vec::new();
        while self.eat_punct("[") {
            indices.push(self.expr()?);
            self.expect_punct("]")?;
        }
        let op = match self.peek() {
            Tok::Punct("=") => AssignOp::Set,
            Tok::Punct("+=") => AssignOp::Add,
            Tok::Punct("-=") => AssignOp::Sub,
            Tok::Punct("*=") => AssignOp::Mul,
            _ => return Err(self.err_expected("assignment operator")),
        };
        self.advance();
        let rhs = self.expr()?;
        self.expect_punct(";")?;
        if self.scope.counters.contains(&head) {
            return Err(FrontendError::NonCanonicalLoop {
                loc,
                reason: format!("loop counter `{head}` is modified in the loop body"),
            });
        }
        if self.scope.scalar_params.contains(&head) {
            return Err(FrontendError::Syntax {
                loc,
                message: format!("scalar parameter `{head}` cannot be assigned"),
            });
        }
        let lhs = Access { array: head, indices };
        self.check_access(&lhs, loc)?;
        self.check_expr(&rhs, loc)?;
        let (name, labeled) = self.next_stmt_name(label, loc)?;
        Ok(vec![Stmt::Assign(Assign { name, labeled, lhs, op, rhs, loc })])
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, FrontendError> {
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn for_loop(&mut self, pragmas: Vec<Pragma>) -> Result<Loop, FrontendError> {
        let loc = self.loc();
        self.expect_keyword("for")?;
        self.expect_punct("(")?;
        if !matches!(self.peek(), Tok::Ident(s) if type_keyword(s).map(ScalarType::is_integer) == Some(true)) {
            return Err(self.err_expected("`int` or `long` loop counter declaration"));
        }
        self.advance();
        let cloc = self.loc();
        let counter = self.expect_ident()?;
        if self.scope.vars.contains_key(&counter) || self.scope.counters.contains(&counter) {
            return Err(FrontendError::Redeclared { loc: cloc, name: counter });
        }
        self.expect_punct("=")?;
        let init = self.expr()?;
        self.check_expr(&init, cloc)?;
        self.expect_punct(";")?;
        self.scope.counters.push(counter.clone());
        let cond = self.expr()?;
        self.check_expr(&cond, cloc)?;
        self.expect_punct(";")?;
        let step = self.increment(&counter, loc)?;
        self.expect_punct(")")?;
        let key = self.scope.loop_count;
        self.scope.loop_count += 1;
        let body = self.body()?;
        self.scope.counters.pop();
        let l = Loop { counter, init, cond, step, body, pragmas, key, loc };
        if !l.pragmas.is_empty() {
            self.check_targeted_nest(&l)?;
        }
        Ok(l)
    }

    fn increment(&mut self, counter: &str, loc: Location) -> Result<i64, FrontendError> {
        let bad = |why: &str| FrontendError::NonCanonicalLoop { loc, reason: why.to_string() };
        let step = if self.eat_punct("++") || self.eat_punct("--") {
            let inc = matches!(self.toks[self.pos - 1].tok, Tok::Punct("++"));
            let name = self.expect_ident()?;
            if name != counter {
                return Err(bad("increment does not update the loop counter"));
            }
            if inc {
                1
            } else {
                -1
            }
        } else {
            let name = self.expect_ident()?;
            if name != counter {
                return Err(bad("increment does not update the loop counter"));
            }
            match self.advance().tok {
                Tok::Punct("++") => 1,
                Tok::Punct("--") => -1,
                Tok::Punct(op @ ("+=" | "-=")) => {
                    let e = self.expr()?;
                    let v = const_value(&e).ok_or_else(|| bad("loop step is not a constant"))?;
                    if op == "+=" {
                        v
                    } else {
                        v.checked_neg().ok_or_else(|| bad("loop step overflows"))?
                    }
                }
                Tok::Punct("=") => {
                    let e = self.expr()?;
                    match &e {
                        Expr::Binary(op @ (BinOp::Add | BinOp::Sub), l, r)
                            if matches!(&**l, Expr::Var(v) if v == counter) =>
                        {
                            let v = const_value(r).ok_or_else(|| bad("loop step is not a constant"))?;
                            if *op == BinOp::Add {
                                v
                            } else {
                                -v
                            }
                        }
                        _ => return Err(bad("unsupported loop increment")),
                    }
                }
                _ => return Err(bad("unsupported loop increment")),
            }
        };
        if step == 0 {
            return Err(bad("loop step is zero"));
        }
        Ok(step)
    }

    /// Canonical-form and affinity checks for a nest that carries pragmas.
    fn check_targeted_nest(&self, l: &Loop) -> Result<(), FrontendError> {
        let mut counters: Vec<String> = self.scope.counters.clone();
        self.check_nest_rec(l, &mut counters)
    }

    fn check_nest_rec(&self, l: &Loop, counters: &mut Vec<String>) -> Result<(), FrontendError> {
        let is_var = |v: &str| counters.iter().any(|c| c == v) || self.scope.scalar_params.contains(v);
        loop_range(l, &is_var).map_err(|reason| FrontendError::NonCanonicalLoop { loc: l.loc, reason })?;
        counters.push(l.counter.clone());
        let res = self.check_body_affine(&l.body, counters);
        counters.pop();
        res
    }

    fn check_body_affine(&self, body: &[Stmt], counters: &mut Vec<String>) -> Result<(), FrontendError> {
        for s in body {
            match s {
                Stmt::For(inner) => self.check_nest_rec(inner, counters)?,
                Stmt::Block(b) => self.check_body_affine(b, counters)?,
                Stmt::If(i) => {
                    return Err(FrontendError::Syntax {
                        loc: i.loc,
                        message: "conditionals are not supported inside transformed loop nests".into(),
                    })
                }
                Stmt::Assign(_) | Stmt::Call(_) => {
                    let loc = match s {
                        Stmt::Assign(a) => a.loc,
                        Stmt::Call(c) => c.loc,
                        _ => unreachable!(),
                    };
                    for (acc, _) in s.accesses() {
                        for ix in &acc.indices {
                            let ok = expr_to_affine(ix, &|v: &str| {
                                counters.iter().any(|c| c == v) || self.scope.scalar_params.contains(v)
                            })
                            .is_some();
                            if !ok {
                                return Err(FrontendError::NonAffineAccess {
                                    loc,
                                    array: acc.array.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_access(&self, a: &Access, loc: Location) -> Result<(), FrontendError> {
        match self.scope.vars.get(&a.array) {
            None => Err(FrontendError::Undeclared { loc, name: a.array.clone() }),
            Some(&rank) if rank != a.indices.len() => Err(FrontendError::RankMismatch {
                loc,
                array: a.array.clone(),
                expected: rank,
                found: a.indices.len(),
            }),
            Some(_) => {
                for ix in &a.indices {
                    self.check_expr(ix, loc)?;
                }
                Ok(())
            }
        }
    }

    fn check_call_arg(&self, e: &Expr, loc: Location) -> Result<(), FrontendError> {
        if let Expr::Var(v) = e {
            if self.scope.vars.get(v).is_some_and(|r| *r > 0) {
                return Ok(());
            }
        }
        self.check_expr(e, loc)
    }

    fn check_expr(&self, e: &Expr, loc: Location) -> Result<(), FrontendError> {
        match e {
            Expr::Int(_) | Expr::Float(_) | Expr::SizeOf(_) => Ok(()),
            Expr::Var(v) => {
                if self.scope.counters.contains(v) {
                    return Ok(());
                }
                match self.scope.vars.get(v) {
                    None => Err(FrontendError::Undeclared { loc, name: v.clone() }),
                    Some(&0) => Ok(()),
                    Some(&rank) => Err(FrontendError::RankMismatch {
                        loc,
                        array: v.clone(),
                        expected: rank,
                        found: 0,
                    }),
                }
            }
            Expr::Access(a) => self.check_access(a, loc),
            Expr::Unary(_, x) => self.check_expr(x, loc),
            Expr::Binary(_, l, r) => {
                self.check_expr(l, loc)?;
                self.check_expr(r, loc)
            }
            Expr::Call(name, args) => {
                let arity = match name.as_str() {
                    "min" | "max" | "floord" => 2,
                    "lf_disjoint" => 4,
                    _ => {
                        return Err(FrontendError::Syntax {
                            loc,
                            message: format!("unknown function `{name}` in expression"),
                        })
                    }
                };
                if args.len() != arity {
                    return Err(FrontendError::Syntax {
                        loc,
                        message: format!("`{name}` takes {arity} arguments"),
                    });
                }
                for a in args {
                    self.check_call_arg(a, loc)?;
                }
                Ok(())
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let op = match self.peek() {
            Tok::Punct(p) => match *p {
                "||" => BinOp::Or,
                "&&" => BinOp::And,
                "==" => BinOp::Eq,
                "!=" => BinOp::Ne,
                "<" => BinOp::Lt,
                "<=" => BinOp::Le,
                ">" => BinOp::Gt,
                ">=" => BinOp::Ge,
                "+" => BinOp::Add,
                "-" => BinOp::Sub,
                "*" => BinOp::Mul,
                "/" => BinOp::Div,
                "%" => BinOp::Mod,
                _ => return None,
            },
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        if self.eat_punct("-") {
            let e = self.unary()?;
            return Ok(match e {
                Expr::Int(v) => Expr::Int(-v),
                Expr::Float(v) => Expr::Float(-v),
                e => Expr::Unary(UnOp::Neg, Box::new(e)),
            });
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr::Unary(UnOp::Not, Box::new(e)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Int(v))
            }
            Tok::Float(v) => {
                self.advance();
                Ok(Expr::Float(v))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "sizeof" => {
                self.advance();
                self.expect_punct("(")?;
                let t = self.expect_type()?;
                self.expect_punct(")")?;
                Ok(Expr::SizeOf(t))
            }
            Tok::Ident(name) => {
                self.advance();
                if self.eat_punct("(") {
                    let args = self.call_args()?;
                    return Ok(Expr::Call(name, args));
                }
                let mut indices = Vec::new();
                while self.eat_punct("[") {
                    indices.push(self.expr()?);
                    self.expect_punct("]")?;
                }
                if indices.is_empty() {
                    Ok(Expr::Var(name))
                } else {
                    Ok(Expr::Access(Access { array: name, indices }))
                }
            }
            _ => Err(self.err_expected("expression")),
        }
    }
}

pub fn is_loop_pragma(text: &str) -> bool {
    pragma_body(text).is_some()
}

/// Strips the `#pragma clang loop` / `#pragma loop` prefix, keeping a directly
/// attached `(ids)` target list.
pub fn pragma_body(text: &str) -> Option<&str> {
    let rest = text.strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix("pragma")?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let rest = rest.trim_start();
    let rest = match rest.strip_prefix("clang") {
        Some(r) if r.starts_with(char::is_whitespace) => r.trim_start(),
        _ => rest,
    };
    let rest = rest.strip_prefix("loop")?;
    if rest.is_empty() || rest.starts_with(char::is_whitespace) || rest.starts_with('(') {
        Some(rest)
    } else {
        None
    }
}

fn const_value(e: &Expr) -> Option<i64> {
    expr_to_affine(e, &|_| false).and_then(|a| a.as_constant())
}
