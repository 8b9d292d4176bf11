use thiserror::Error;

use super::{BinaryOp, Expression, Scope, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            tokens.push((tok, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lexeme = &text[start..i];
            let value: f64 = lexeme.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{lexeme}`"),
            })?;
            tokens.push((Token::Number(value), start));
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(ParseError::Syntax {
                    offset: i,
                    message: "implicit multiplication is not allowed".into(),
                });
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push((Token::Ident(text[start..i].to_string()), start));
            continue;
        }
        let ch = text[start..].chars().next().unwrap_or('?');
        return Err(ParseError::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        });
    }
    tokens.push((Token::End, text.len()));
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    scope: &'a Scope<'a>,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].0.clone();
        if tok != Token::End {
            self.pos += 1;
        }
        tok
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    // expr := term (("+"|"-") term)*
    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    // term := unary (("*"|"/") unary)*
    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    // unary := "-" unary | power      (so -x^2 = -(x^2))
    fn unary(&mut self) -> Result<Expression, ParseError> {
        if *self.peek() == Token::Minus {
            self.bump();
            let arg = self.unary()?;
            return Ok(Expression::unary(UnaryOp::Neg, arg));
        }
        self.power()
    }

    // power := atom ("^" unary)?     (right-associative)
    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Token::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        let exponent = self.unary()?;
        if exponent.depends_on_coordinates() {
            return Err(ParseError::Syntax {
                offset: at,
                message: "exponent must not depend on coordinates".into(),
            });
        }
        Ok(Expression::binary(BinaryOp::Pow, base, exponent))
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let at = self.offset();
        match self.bump() {
            Token::Number(v) => Ok(Expression::Constant(v)),
            Token::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Token::RParen {
                    return self.error("expected `)`");
                }
                self.bump();
                Ok(inner)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let Some(op) = UnaryOp::from_name(&name) else {
                        return Err(ParseError::UnknownIdentifier { name, offset: at });
                    };
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Token::RParen {
                        return self.error("expected `)`");
                    }
                    self.bump();
                    return Ok(Expression::unary(op, arg));
                }
                if let Some(i) = self.scope.coordinates.iter().position(|c| *c == name) {
                    Ok(Expression::Coordinate(i))
                } else if self.scope.parameters.contains(&name) {
                    Ok(Expression::Parameter(name))
                } else if name == "pi" {
                    Ok(Expression::Constant(std::f64::consts::PI))
                } else {
                    Err(ParseError::UnknownIdentifier { name, offset: at })
                }
            }
            Token::End => Err(ParseError::Syntax {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            other => Err(ParseError::Syntax {
                offset: at,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }
}

/// Parses `text` against the names in `scope`.
pub fn parse_expression(text: &str, scope: &Scope<'_>) -> Result<Expression, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        scope,
    };
    let expr = parser.expr()?;
    if *parser.peek() != Token::End {
        return parser.error("unexpected trailing input");
    }
    Ok(expr)
}
