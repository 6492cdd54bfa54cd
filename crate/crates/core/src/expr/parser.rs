//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   = term { ("+" | "-") term }
//! term   = factor { ("*" | "/") factor }
//! factor = "-" factor | power
//! power  = atom [ "^" factor ]          exponent must fold to a constant
//! atom   = number | "t" | "pi" | "e" | func "(" expr ")" | "(" expr ")"
//! func   = "sin" | "cos" | "exp" | "log" | "sqrt" | "abs"
//! ```
//!
//! `+ - * /` are left-associative; `^` is right-associative and binds
//! tighter than unary minus, so `-t^2` is `-(t^2)`.

use super::{BinOp, Expr, Offset, UnOp};

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: Offset, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: Offset, name: String },
    #[error("`{name}` takes exactly one argument (at byte {offset})")]
    Arity { offset: Offset, name: String },
    #[error("exponent at byte {offset} does not fold to a constant")]
    NonConstantExponent { offset: Offset },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, Offset)>, ParseError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        while let Some(t) = lx.next_token()? {
            out.push(t);
        }
        Ok(out)
    }

    fn next_token(&mut self) -> Result<Option<(Tok, Offset)>, ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' => return self.number(start).map(Some),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("identifier bytes are ASCII")
                    .to_string();
                return Ok(Some((Tok::Ident(name), start)));
            }
            other => {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        self.pos += 1;
        Ok(Some((tok, start)))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, Offset), ParseError> {
        let digits = |lx: &mut Self| {
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            if self.pos >= self.src.len() || !self.src[self.pos].is_ascii_digit() {
                return Err(ParseError::Syntax {
                    offset: self.pos.min(self.src.len()),
                    message: "expected digits after decimal point".into(),
                });
            }
            digits(self);
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            // Only an exponent suffix when followed by [+-]?digit; otherwise
            // the `e` starts an identifier (e.g. `2e` is `2*e` misspelled and
            // errors later, but `2*e` lexes the constant).
            let mut look = self.pos + 1;
            if look < self.src.len() && (self.src[look] == b'+' || self.src[look] == b'-') {
                look += 1;
            }
            if look < self.src.len() && self.src[look].is_ascii_digit() {
                self.pos = look;
                digits(self);
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("number bytes are ASCII");
        let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("invalid number literal `{text}`"),
        })?;
        if !v.is_finite() {
            return Err(ParseError::Syntax {
                offset: start,
                message: format!("number literal `{text}` overflows"),
            });
        }
        Ok((Tok::Num(v), start))
    }
}

struct Parser {
    toks: Vec<(Tok, Offset)>,
    pos: usize,
    end: Offset,
}

pub(super) fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if let Some((_, off)) = p.peek() {
        return Err(ParseError::Syntax {
            offset: off,
            message: "unexpected trailing input".into(),
        });
    }
    Ok(e)
}

impl Parser {
    fn peek(&self) -> Option<(&Tok, Offset)> {
        self.toks.get(self.pos).map(|(t, o)| (t, *o))
    }

    fn bump(&mut self) -> Option<(Tok, Offset)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> Offset {
        self.peek().map(|(_, o)| o).unwrap_or(self.end)
    }

    fn expect_rparen(&mut self, what: &str) -> Result<(), ParseError> {
        match self.bump() {
            Some((Tok::RParen, _)) => Ok(()),
            Some((_, off)) => Err(ParseError::Syntax {
                offset: off,
                message: format!("expected `)` to close {what}"),
            }),
            None => Err(ParseError::Syntax {
                offset: self.end,
                message: format!("expected `)` to close {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some((Tok::Plus, _)) => BinOp::Add,
                Some((Tok::Minus, _)) => BinOp::Sub,
                _ => break,
            };
            let (_, off) = self.bump().expect("peeked");
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs, off);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some((Tok::Star, _)) => BinOp::Mul,
                Some((Tok::Slash, _)) => BinOp::Div,
                _ => break,
            };
            let (_, off) = self.bump().expect("peeked");
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs, off);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if let Some((Tok::Minus, off)) = self.peek() {
            self.bump();
            let inner = self.factor()?;
            return Ok(Expr::unary(UnOp::Neg, inner, off));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some((Tok::Caret, off)) = self.peek() {
            self.bump();
            let exp_off = self.here();
            let exponent = self.factor()?;
            let k = exponent
                .as_constant()
                .ok_or(ParseError::NonConstantExponent { offset: exp_off })?;
            return Ok(Expr::pow(base, k, off));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            Some((Tok::Num(v), off)) => Ok(Expr::constant(v, off)),
            Some((Tok::LParen, _)) => {
                let e = self.expr()?;
                self.expect_rparen("the parenthesized expression")?;
                Ok(e)
            }
            Some((Tok::Ident(name), off)) => self.ident(name, off),
            Some((tok, off)) => Err(ParseError::Syntax {
                offset: off,
                message: format!("unexpected `{}`", describe(&tok)),
            }),
            None => Err(ParseError::Syntax {
                offset: self.end,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn ident(&mut self, name: String, off: Offset) -> Result<Expr, ParseError> {
        let func = match name.as_str() {
            "t" => return Ok(Expr::time(off)),
            "pi" => return Ok(Expr::constant(std::f64::consts::PI, off)),
            "e" => return Ok(Expr::constant(std::f64::consts::E, off)),
            "sin" => UnOp::Sin,
            "cos" => UnOp::Cos,
            "exp" => UnOp::Exp,
            "log" => UnOp::Log,
            "sqrt" => UnOp::Sqrt,
            "abs" => UnOp::Abs,
            _ => return Err(ParseError::UnknownIdentifier { offset: off, name }),
        };
        match self.bump() {
            Some((Tok::LParen, _)) => {}
            _ => {
                return Err(ParseError::Syntax {
                    offset: off + name.len(),
                    message: format!("expected `(` after `{name}`"),
                })
            }
        }
        let arg = self.expr()?;
        if let Some((Tok::Comma, comma_off)) = self.peek() {
            return Err(ParseError::Arity {
                offset: comma_off,
                name,
            });
        }
        self.expect_rparen(&format!("the argument of `{name}`"))?;
        Ok(Expr::unary(func, arg, off))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("{v}"),
        Tok::Ident(s) => s.clone(),
        Tok::Plus => "+".into(),
        Tok::Minus => "-".into(),
        Tok::Star => "*".into(),
        Tok::Slash => "/".into(),
        Tok::Caret => "^".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
    }
}
