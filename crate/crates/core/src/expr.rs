//! Infix expression grammar for densities and graph curves.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! var   := 'x1' | 'x2' | 'x3' | 'y1' | 'y2' | 'y3'
//! func  := 'sin' | 'cos' | 'abs'
//! ```
//!
//! `^` binds tighter than unary minus and is right associative, so
//! `-2^2 = -4` and `2^3^2 = 2^9`. Columns in errors are 1-based.

use std::fmt;

use crate::error::{Error, Result};

/// A variable slot: slow (anchor) coordinate `x_i` or fast coordinate `y_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>, usize),
    Pow(Box<Node>, Box<Node>, usize),
    Call(Func, Box<Node>),
}

impl Node {
    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Node::Const(_) => {}
            Node::Var(v) => f(*v),
            Node::Neg(a) | Node::Call(_, a) => a.visit_vars(f),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b, _) | Node::Pow(a, b, _) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }
}

fn fold_tree(node: Node) -> Node {
    use Node::*;
    match node {
        Add(a, b) => fold_binary(*a, *b, |x, y| x + y, Add),
        Sub(a, b) => fold_binary(*a, *b, |x, y| x - y, Sub),
        Mul(a, b) => fold_binary(*a, *b, |x, y| x * y, Mul),
        Div(a, b, col) => {
            let (a, b) = (fold_tree(*a), fold_tree(*b));
            match (&a, &b) {
                (Const(x), Const(y)) if *y != 0.0 => Const(x / y),
                _ => Div(Box::new(a), Box::new(b), col),
            }
        }
        Pow(a, b, col) => {
            let (a, b) = (fold_tree(*a), fold_tree(*b));
            match (&a, &b) {
                (Const(x), Const(y)) if x.powf(*y).is_finite() => Const(x.powf(*y)),
                _ => Pow(Box::new(a), Box::new(b), col),
            }
        }
        Neg(a) => match fold_tree(*a) {
            Const(c) => Const(-c),
            a => Neg(Box::new(a)),
        },
        Call(f, a) => match fold_tree(*a) {
            Const(c) => Const(apply_func(f, c)),
            a => Call(f, Box::new(a)),
        },
        leaf => leaf,
    }
}

fn fold_binary(a: Node, b: Node, op: impl Fn(f64, f64) -> f64, build: impl Fn(Box<Node>, Box<Node>) -> Node) -> Node {
    let (a, b) = (fold_tree(a), fold_tree(b));
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(op(*x, *y)),
        _ => build(Box::new(a), Box::new(b)),
    }
}

fn apply_func(f: Func, v: f64) -> f64 {
    match f {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Abs => v.abs(),
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Node::Var(Var::Y(i)) => write!(f, "y{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b, _) => write!(f, "({a} / {b})"),
            Node::Pow(a, b, _) => write!(f, "({a} ^ {b})"),
            Node::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Abs => "abs",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Parse { column: col, message: format!("malformed number '{text}'") })?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(Error::Parse { column: col, message: format!("unexpected character '{c}'") }),
            };
            out.push((tok, col));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { column: self.col(), message: message.into() })
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            let col = self.col();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs), col)
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            let col = self.col();
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp), col));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let col = self.col();
                self.pos += 1;
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(func) = func {
                    if self.peek() != Some(&Tok::LParen) {
                        return self.err(format!("expected '(' after '{name}'"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Node::Const(std::f64::consts::PI));
                }
                parse_var(&name, self.dim)
                    .map(Node::Var)
                    .ok_or_else(|| Error::Parse { column: col, message: format!("unknown identifier '{name}'") })
            }
            Tok::Op(c) => self.err(format!("unexpected operator '{c}'")),
            Tok::RParen => self.err("unexpected ')'"),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.err("expected ')'")
        }
    }
}

fn parse_var(name: &str, dim: usize) -> Option<Var> {
    let mut chars = name.chars();
    let kind = chars.next()?;
    let idx: usize = chars.as_str().parse().ok()?;
    if idx == 0 || idx > dim {
        return None;
    }
    match kind {
        'x' => Some(Var::X(idx - 1)),
        'y' => Some(Var::Y(idx - 1)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    X(usize),
    Y(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div(usize),
    Pow(usize),
    Sin,
    Cos,
    Abs,
}

const MAX_STACK: usize = 64;

/// A parsed and compiled expression in the variables `x1..xn, y1..yn`.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    dim: usize,
    tree: Node,
    program: Vec<Op>,
}

impl Expr {
    /// Parses `src` for ambient dimension `dim` (2 or 3).
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(format!("expressions support n <= 3, got {dim}")));
        }
        let toks = tokenize(src)?;
        let end_col = src.chars().count() + 1;
        let mut p = Parser { toks, pos: 0, end_col, dim };
        let tree = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("unexpected trailing input");
        }
        let tree = fold_tree(tree);
        let mut program = Vec::new();
        let depth = compile(&tree, &mut program);
        if depth > MAX_STACK {
            return Err(Error::Parse { column: 1, message: "expression nests too deeply".into() });
        }
        Ok(Self { source: src.to_string(), dim, tree, program })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tree(&self) -> &Node {
        &self.tree
    }

    /// Bitmask of the `x` coordinates referenced (bit `i` for `x_{i+1}`).
    pub fn x_mask(&self) -> u8 {
        let mut mask = 0u8;
        self.tree.visit_vars(&mut |v| {
            if let Var::X(i) = v {
                mask |= 1 << i;
            }
        });
        mask
    }

    /// Bitmask of the `y` coordinates referenced.
    pub fn y_mask(&self) -> u8 {
        let mut mask = 0u8;
        self.tree.visit_vars(&mut |v| {
            if let Var::Y(i) = v {
                mask |= 1 << i;
            }
        });
        mask
    }

    /// Evaluates with the given slow and fast coordinates. Missing trailing
    /// coordinates read as zero.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let mut stack = [0.0f64; MAX_STACK];
        let mut sp = 0usize;
        for op in &self.program {
            match *op {
                Op::Const(c) => {
                    stack[sp] = c;
                    sp += 1;
                }
                Op::X(i) => {
                    stack[sp] = x.get(i).copied().unwrap_or(0.0);
                    sp += 1;
                }
                Op::Y(i) => {
                    stack[sp] = y.get(i).copied().unwrap_or(0.0);
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Sin => stack[sp - 1] = stack[sp - 1].sin(),
                Op::Cos => stack[sp - 1] = stack[sp - 1].cos(),
                Op::Abs => stack[sp - 1] = stack[sp - 1].abs(),
                Op::Add => {
                    sp -= 1;
                    stack[sp - 1] += stack[sp];
                }
                Op::Sub => {
                    sp -= 1;
                    stack[sp - 1] -= stack[sp];
                }
                Op::Mul => {
                    sp -= 1;
                    stack[sp - 1] *= stack[sp];
                }
                Op::Div(col) => {
                    sp -= 1;
                    let d = stack[sp];
                    if d == 0.0 {
                        return Err(Error::Eval { column: col, message: "division by zero".into() });
                    }
                    stack[sp - 1] /= d;
                }
                Op::Pow(col) => {
                    sp -= 1;
                    let v = stack[sp - 1].powf(stack[sp]);
                    if !v.is_finite() {
                        return Err(Error::Eval {
                            column: col,
                            message: format!("non-finite power {}^{}", stack[sp - 1], stack[sp]),
                        });
                    }
                    stack[sp - 1] = v;
                }
            }
        }
        Ok(stack[0])
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Emits RPN for `node`, returning the maximal stack depth it needs.
fn compile(node: &Node, out: &mut Vec<Op>) -> usize {
    match node {
        Node::Const(c) => {
            out.push(Op::Const(*c));
            1
        }
        Node::Var(Var::X(i)) => {
            out.push(Op::X(*i));
            1
        }
        Node::Var(Var::Y(i)) => {
            out.push(Op::Y(*i));
            1
        }
        Node::Neg(a) => {
            let d = compile(a, out);
            out.push(Op::Neg);
            d
        }
        Node::Call(func, a) => {
            let d = compile(a, out);
            out.push(match func {
                Func::Sin => Op::Sin,
                Func::Cos => Op::Cos,
                Func::Abs => Op::Abs,
            });
            d
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b, _) | Node::Pow(a, b, _) => {
            let da = compile(a, out);
            let db = compile(b, out);
            out.push(match node {
                Node::Add(..) => Op::Add,
                Node::Sub(..) => Op::Sub,
                Node::Mul(..) => Op::Mul,
                Node::Div(_, _, col) => Op::Div(*col),
                Node::Pow(_, _, col) => Op::Pow(*col),
                _ => unreachable!(),
            });
            da.max(db + 1)
        }
    }
}
