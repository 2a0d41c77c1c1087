use std::fmt;

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub line: u32,
    pub col: u32,
}

impl Location {
    pub fn new(line: u32, col: u32) -> Self {
        Location { line, col }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalarType {
    Int,
    Long,
    Double,
}

impl ScalarType {
    pub fn keyword(self) -> &'static str {
        match self {
            ScalarType::Int => "int",
            ScalarType::Long => "long",
            ScalarType::Double => "double",
        }
    }

    pub fn size_bytes(self) -> i64 {
        match self {
            ScalarType::Int => 4,
            ScalarType::Long | ScalarType::Double => 8,
        }
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, ScalarType::Double)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Allocation {
    Stack,
    Heap,
}

/// An array or scalar variable. Scalars are arrays of rank 0.
#[derive(Clone, Debug, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub ty: ScalarType,
    pub dims: Vec<Expr>,
    pub alloc: Allocation,
    pub loc: Location,
}

impl VarDecl {
    pub fn rank(&self) -> usize {
        self.dims.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<VarDecl>,
    pub locals: Vec<VarDecl>,
    pub body: Vec<Stmt>,
    pub loc: Location,
}

impl Function {
    pub fn scalar_params(&self) -> impl Iterator<Item = &VarDecl> {
        self.params.iter().filter(|p| p.rank() == 0)
    }

    pub fn array_params(&self) -> impl Iterator<Item = &VarDecl> {
        self.params.iter().filter(|p| p.rank() > 0)
    }

    pub fn lookup(&self, name: &str) -> Option<&VarDecl> {
        self.params.iter().chain(self.locals.iter()).find(|d| d.name == name)
    }

    pub fn is_param_scalar(&self, name: &str) -> bool {
        self.scalar_params().any(|p| p.name == name)
    }

    /// Visits every loop in pre-order.
    pub fn loops(&self) -> Vec<&Loop> {
        let mut out = Vec::new();
        for s in &self.body {
            s.collect_loops(&mut out);
        }
        out
    }

    /// Assignments and calls in source order.
    pub fn statements(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for s in &self.body {
            s.collect_simple(&mut out);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Program {
    pub functions: Vec<Function>,
    /// Names of `static inline` helpers defined in the source (bodies are not kept).
    pub helpers: Vec<String>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pragma {
    pub text: String,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Loop {
    pub counter: String,
    pub init: Expr,
    pub cond: Expr,
    /// Signed constant increment.
    pub step: i64,
    pub body: Vec<Stmt>,
    pub pragmas: Vec<Pragma>,
    /// Pre-order index of the loop within its function.
    pub key: usize,
    pub loc: Location,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Access {
    pub array: String,
    pub indices: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assign {
    /// Statement name: the C label when present, otherwise `S<n>`.
    pub name: String,
    pub labeled: bool,
    pub lhs: Access,
    pub op: AssignOp,
    pub rhs: Expr,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CallStmt {
    pub name: String,
    pub labeled: bool,
    pub callee: String,
    pub args: Vec<Expr>,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IfStmt {
    pub cond: Expr,
    pub then_body: Vec<Stmt>,
    pub else_body: Vec<Stmt>,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    For(Loop),
    Assign(Assign),
    Call(CallStmt),
    Block(Vec<Stmt>),
    If(IfStmt),
}

impl Stmt {
    fn collect_loops<'a>(&'a self, out: &mut Vec<&'a Loop>) {
        match self {
            Stmt::For(l) => {
                out.push(l);
                for s in &l.body {
                    s.collect_loops(out);
                }
            }
            Stmt::Block(b) => b.iter().for_each(|s| s.collect_loops(out)),
            Stmt::If(i) => {
                i.then_body.iter().for_each(|s| s.collect_loops(out));
                i.else_body.iter().for_each(|s| s.collect_loops(out));
            }
            Stmt::Assign(_) | Stmt::Call(_) => {}
        }
    }

    fn collect_simple<'a>(&'a self, out: &mut Vec<&'a Stmt>) {
        match self {
            Stmt::For(l) => l.body.iter().for_each(|s| s.collect_simple(out)),
            Stmt::Block(b) => b.iter().for_each(|s| s.collect_simple(out)),
            Stmt::If(i) => {
                i.then_body.iter().for_each(|s| s.collect_simple(out));
                i.else_body.iter().for_each(|s| s.collect_simple(out));
            }
            Stmt::Assign(_) | Stmt::Call(_) => out.push(self),
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Stmt::Assign(a) => Some(&a.name),
            Stmt::Call(c) => Some(&c.name),
            _ => None,
        }
    }

    /// Every array access in evaluation-relevant positions, the written one (if any) flagged.
    pub fn accesses(&self) -> Vec<(&Access, bool)> {
        let mut out = Vec::new();
        match self {
            Stmt::Assign(a) => {
                for ix in &a.lhs.indices {
                    ix.collect_accesses(&mut out);
                }
                a.rhs.collect_accesses(&mut out);
                out.push((&a.lhs, true));
            }
            Stmt::Call(c) => c.args.iter().for_each(|e| e.collect_accesses(&mut out)),
            _ => {}
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(i64),
    Float(f64),
    /// Scalar variable, loop counter, parameter, or (as a call argument) a whole array.
    Var(String),
    Access(Access),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    SizeOf(ScalarType),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn call(name: &str, args: Vec<Expr>) -> Expr {
        Expr::Call(name.to_string(), args)
    }

    fn collect_accesses<'a>(&'a self, out: &mut Vec<(&'a Access, bool)>) {
        match self {
            Expr::Access(a) => {
                for ix in &a.indices {
                    ix.collect_accesses(out);
                }
                out.push((a, false));
            }
            Expr::Unary(_, e) => e.collect_accesses(out),
            Expr::Binary(_, l, r) => {
                l.collect_accesses(out);
                r.collect_accesses(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_accesses(out)),
            Expr::Int(_) | Expr::Float(_) | Expr::Var(_) | Expr::SizeOf(_) => {}
        }
    }

    /// Applies `f` bottom-up to every node.
    pub fn map(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Access(a) => Expr::Access(Access {
                array: a.array.clone(),
                indices: a.indices.iter().map(|e| e.map(f)).collect(),
            }),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.map(f))),
            Expr::Binary(op, l, r) => Expr::Binary(*op, Box::new(l.map(f)), Box::new(r.map(f))),
            Expr::Call(n, args) => Expr::Call(n.clone(), args.iter().map(|e| e.map(f)).collect()),
            other => other.clone(),
        };
        f(rebuilt)
    }

    pub fn mentions_var(&self, name: &str) -> bool {
        match self {
            Expr::Var(v) => v == name,
            Expr::Access(a) => a.array == name || a.indices.iter().any(|e| e.mentions_var(name)),
            Expr::Unary(_, e) => e.mentions_var(name),
            Expr::Binary(_, l, r) => l.mentions_var(name) || r.mentions_var(name),
            Expr::Call(_, args) => args.iter().any(|e| e.mentions_var(name)),
            Expr::Int(_) | Expr::Float(_) | Expr::SizeOf(_) => false,
        }
    }
}

impl Program {
    /// Copy with every source position reset, for structural comparison.
    pub fn without_locations(&self) -> Program {
        Program {
            functions: self.functions.iter().map(Function::without_locations).collect(),
            helpers: self.helpers.clone(),
        }
    }
}

impl Function {
    pub fn without_locations(&self) -> Function {
        let strip_decl = |d: &VarDecl| VarDecl { loc: Location::default(), ..d.clone() };
        Function {
            name: self.name.clone(),
            params: self.params.iter().map(strip_decl).collect(),
            locals: self.locals.iter().map(strip_decl).collect(),
            body: self.body.iter().map(Stmt::without_locations).collect(),
            loc: Location::default(),
        }
    }
}

impl Stmt {
    pub fn without_locations(&self) -> Stmt {
        let z = Location::default();
        match self {
            Stmt::For(l) => Stmt::For(Loop {
                body: l.body.iter().map(Stmt::without_locations).collect(),
                pragmas: l.pragmas.iter().map(|p| Pragma { text: p.text.clone(), loc: z }).collect(),
                loc: z,
                ..l.clone()
            }),
            Stmt::Assign(a) => Stmt::Assign(Assign { loc: z, ..a.clone() }),
            Stmt::Call(c) => Stmt::Call(CallStmt { loc: z, ..c.clone() }),
            Stmt::Block(b) => Stmt::Block(b.iter().map(Stmt::without_locations).collect()),
            Stmt::If(i) => Stmt::If(IfStmt {
                cond: i.cond.clone(),
                then_body: i.then_body.iter().map(Stmt::without_locations).collect(),
                else_body: i.else_body.iter().map(Stmt::without_locations).collect(),
                loc: z,
            }),
        }
    }
}
