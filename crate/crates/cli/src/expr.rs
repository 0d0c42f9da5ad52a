//! Closed-form expressions over body coordinates.
//!
//! Grammar: numbers, `pi` (or `π`), the variables `x`, `x1`, `x2`, `t`,
//! the functions `sin`, `cos`, `exp`, the operators `+ - * / ^` and
//! parentheses. `^` binds tighter than unary minus and associates right.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.position)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    /// Body coordinate, zero-based.
    X(usize),
    T,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Highest body coordinate referenced, one-based; zero if none.
    pub fn max_coordinate(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::X(a) => a + 1,
                Node::Num(_) | Node::T => 0,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a).max(walk(b)),
            }
        }
        walk(&self.root)
    }

    pub fn uses_time(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::T => true,
                Node::Num(_) | Node::X(_) => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a) || walk(b),
            }
        }
        walk(&self.root)
    }

    /// Evaluates at time `t` and body point `x`. Coordinates beyond `x.len()`
    /// read as zero; callers validate with [`Expr::max_coordinate`].
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        fn go(n: &Node, t: f64, x: &[f64]) -> f64 {
            match n {
                Node::Num(v) => *v,
                Node::X(a) => x.get(*a).copied().unwrap_or(0.0),
                Node::T => t,
                Node::Neg(a) => -go(a, t, x),
                Node::Call(f, a) => {
                    let v = go(a, t, x);
                    match f {
                        Func::Sin => v.sin(),
                        Func::Cos => v.cos(),
                        Func::Exp => v.exp(),
                    }
                }
                Node::Bin(op, a, b) => {
                    let (a, b) = (go(a, t, x), go(b, t, x));
                    match op {
                        '+' => a + b,
                        '-' => a - b,
                        '*' => a * b,
                        '/' => a / b,
                        _ => a.powf(b),
                    }
                }
            }
        }
        go(&self.root, t, x)
    }
}

impl FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, ExprError> {
        let tokens = lex(s)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: s.len(),
        };
        let root = p.sum()?;
        if let Some((at, tok)) = p.tokens.get(p.pos) {
            return Err(ExprError {
                position: *at,
                message: format!("unexpected {tok}"),
            });
        }
        Ok(Self {
            source: s.trim().to_string(),
            root,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Op(c) => write!(f, "'{c}'"),
        }
    }
}

fn lex(s: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let mut out = Vec::new();
    let mut chars = s.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c.is_ascii_digit() || c == '.' {
            let mut end = i;
            let mut prev = ' ';
            while let Some(&(j, d)) = chars.peek() {
                let exponent_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exponent_sign {
                    end = j + d.len_utf8();
                    prev = d;
                    chars.next();
                } else {
                    break;
                }
            }
            let text = &s[i..end];
            let v = text.parse::<f64>().map_err(|_| ExprError {
                position: i,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((i, Tok::Num(v)));
        } else if c.is_alphabetic() || c == 'π' {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_alphanumeric() || d == '_' || d == 'π' {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push((i, Tok::Ident(s[i..end].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            chars.next();
        } else {
            return Err(ExprError {
                position: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((_, Tok::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn expect(&mut self, op: char) -> Result<(), ExprError> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ExprError {
                position: self.here(),
                message: format!("expected '{op}'"),
            })
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let at = self.here();
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(ExprError {
                position: at,
                message: "unexpected end of expression".into(),
            });
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op('(') => {
                let inner = self.sum()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect('(')?;
                    let arg = self.sum()?;
                    self.expect(')')?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" | "π" => Ok(Node::Num(std::f64::consts::PI)),
                    "t" => Ok(Node::T),
                    "x" => Ok(Node::X(0)),
                    _ => match name.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                        Some(k) if k >= 1 => Ok(Node::X(k - 1)),
                        _ => Err(ExprError {
                            position: at,
                            message: format!("unknown name '{name}'"),
                        }),
                    },
                }
            }
            other => Err(ExprError {
                position: at,
                message: format!("unexpected {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ev(s: &str, x: &[f64]) -> f64 {
        s.parse::<Expr>().unwrap().eval(0.25, x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[]), -4.0);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x", &[0.5, 2.0]), 0.5);
        assert_eq!(ev("x2", &[0.5, 2.0]), 2.0);
        assert_eq!(ev("t", &[]), 0.25);
        assert_eq!(ev("sin(pi * x1)", &[0.5]), (PI * 0.5).sin());
        assert_eq!(ev("cos(π)", &[]), -1.0);
        assert_eq!(ev("exp(0)", &[]), 1.0);
        assert_eq!(ev("1.5e-1 + 2E2", &[]), 200.15);
    }

    #[test]
    fn reports_coordinates_and_time() {
        let e: Expr = "x2 * sin(x1) + 1".parse().unwrap();
        assert_eq!(e.max_coordinate(), 2);
        assert!(!e.uses_time());
        assert!("cos(t)".parse::<Expr>().unwrap().uses_time());
    }

    #[test]
    fn errors_carry_positions() {
        let e = "1 + tan(x)".parse::<Expr>().unwrap_err();
        assert_eq!(e.position, 4);
        assert!(e.message.contains("tan"));
        assert!("(1 + 2".parse::<Expr>().is_err());
        assert!("1 +".parse::<Expr>().is_err());
        assert!("2 $ 3".parse::<Expr>().is_err());
        assert!("x0".parse::<Expr>().is_err());
        assert!("1 2".parse::<Expr>().is_err());
    }
}
