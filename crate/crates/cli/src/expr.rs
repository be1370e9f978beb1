//! Arithmetic expressions over the variables `t`, `S`, `x`, `y`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | constant | variable | func arg | '(' expr ')'
//! arg    := '(' expr ')' | unary
//! ```
//!
//! Parentheses after a function name are optional: `ln4/ln3` reads as
//! `ln(4) / ln(3)` and `exp -S^2` as `exp(-(S^2))`, while `sin(S)^2` is the
//! square of the sine. `log` is the natural logarithm.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    S,
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Values of the variables at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub t: f64,
    pub s: f64,
    pub x: f64,
    pub y: f64,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some((at, tok)) => Err(ParseError {
                position: at,
                message: format!("unexpected {tok}"),
            }),
        }
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => env.t,
            Expr::Var(Var::S) => env.s,
            Expr::Var(Var::X) => env.x,
            Expr::Var(Var::Y) => env.y,
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env), b.eval(env));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(env);
                match f {
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.tan(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(var),
            Expr::Bin(_, a, b) => a.uses(var) || b.uses(var),
        }
    }

    /// Whether the expression reads curve coordinates.
    pub fn uses_coordinates(&self) -> bool {
        self.uses(Var::X) || self.uses(Var::Y)
    }

    pub fn is_constant(&self) -> bool {
        ![Var::T, Var::S, Var::X, Var::Y].iter().any(|v| self.uses(*v))
    }
}

/// Parses and evaluates an expression without variables, e.g. `ln4/ln3`.
pub fn eval_constant(src: &str) -> Result<f64, ParseError> {
    let e = Expr::parse(src)?;
    if !e.is_constant() {
        return Err(ParseError {
            position: 0,
            message: "expected a number, found an expression with variables".into(),
        });
    }
    Ok(e.eval(&Env::default()))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "name `{s}`"),
            Tok::Sym(c) => write!(f, "`{c}`"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            // Exponent part, only when followed by digits.
            if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = chars.get(i).map_or(src.len(), |c| c.0);
            let text = &src[at..end];
            let v = text.parse::<f64>().map_err(|_| ParseError {
                position: chars[start].0,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((at, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].1.is_ascii_alphabetic() || chars[i].1 == '_') {
                i += 1;
            }
            let end = chars.get(i).map_or(src.len(), |c| c.0);
            out.push((at, Tok::Ident(src[at..end].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((at, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ParseError {
                position: at,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<(usize, &Tok)> {
        self.tokens.get(self.pos).map(|(at, t)| (*at, t))
    }

    fn eat(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some((_, Tok::Sym(s))) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn end_position(&self) -> usize {
        self.tokens.last().map_or(0, |(at, _)| at + 1)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some((at, tok)) = self.peek() else {
            return Err(ParseError {
                position: self.end_position(),
                message: "unexpected end of expression".into(),
            });
        };
        let tok = tok.clone();
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(ParseError {
                        position: self.peek().map_or(self.end_position(), |p| p.0),
                        message: "expected `)`".into(),
                    });
                }
                Ok(e)
            }
            Tok::Sym(c) => Err(ParseError {
                position: at,
                message: format!("unexpected `{c}`"),
            }),
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "ln" | "log" => Some(Func::Ln),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tan" => Some(Func::Tan),
                    "sqrt" => Some(Func::Sqrt),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(f) = func {
                    // `sin(x)^2` squares the sine; `sin x^2` takes the sine of x^2.
                    let arg = if matches!(self.peek(), Some((_, Tok::Sym('(')))) {
                        self.atom()?
                    } else {
                        self.unary()?
                    };
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    "t" => Ok(Expr::Var(Var::T)),
                    "S" | "s" => Ok(Expr::Var(Var::S)),
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    _ => Err(ParseError {
                        position: at,
                        message: format!("unknown name `{name}`"),
                    }),
                }
            }
        }
    }
}
