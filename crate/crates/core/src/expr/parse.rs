//! Infix formula parser.
//!
//! Grammar (standard precedence, left-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := NUMBER | VARIABLE | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Numbers use a decimal point and may carry an exponent. Unary minus folds
//! into constant literals and otherwise desugars to `0 - x`.

use super::{Expr, Op, Variable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

fn err<T>(position: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        position,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

fn tokenize(input: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' => {
                tokens.push((Token::Plus, start));
                i += 1;
            }
            b'-' => {
                tokens.push((Token::Minus, start));
                i += 1;
            }
            b'*' => {
                tokens.push((Token::Star, start));
                i += 1;
            }
            b'/' => {
                tokens.push((Token::Slash, start));
                i += 1;
            }
            b'(' => {
                tokens.push((Token::LParen, start));
                i += 1;
            }
            b')' => {
                tokens.push((Token::RParen, start));
                i += 1;
            }
            b',' => {
                tokens.push((Token::Comma, start));
                i += 1;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return err(i, "expected digits after decimal point");
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return err(i, "expected digits in exponent");
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &input[start..i];
                match text.parse::<f64>() {
                    Ok(value) => tokens.push((Token::Number(value), start)),
                    Err(_) => return err(start, format!("invalid number literal `{text}`")),
                }
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(input[start..i].to_string()), start));
            }
            _ => return err(start, format!("unexpected character `{}`", c as char)),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    input_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.input_len)
    }

    fn advance(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&token) {
            self.pos += 1;
            Ok(())
        } else {
            err(self.here(), format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::binary(Op::Add, lhs, self.term()?);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    lhs = Expr::binary(Op::Sub, lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    lhs = Expr::binary(Op::Mul, lhs, self.unary()?);
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    lhs = Expr::binary(Op::Div, lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::binary(Op::Sub, Expr::Const(0.0), other),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let position = self.here();
        match self.advance().cloned() {
            Some(Token::Number(value)) => Ok(Expr::Const(value)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                if self.peek() == Some(&Token::LParen) {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Token::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Token::RParen, "closing `)`")?;
                    self.call(&name, args, position)
                } else if let Some(var) = Variable::from_name(&name) {
                    Ok(Expr::Var(var))
                } else {
                    err(position, format!("unknown variable `{name}`"))
                }
            }
            Some(Token::Plus)
            | Some(Token::Minus)
            | Some(Token::Star)
            | Some(Token::Slash)
            | Some(Token::RParen)
            | Some(Token::Comma) => err(position, "expected a value"),
            None => err(position, "unexpected end of input"),
        }
    }

    fn call(&self, name: &str, mut args: Vec<Expr>, position: usize) -> Result<Expr, ParseError> {
        // Arithmetic symbols are never tokenized as identifiers, so matching
        // by name over all ops only ever finds the function-call primitives.
        let op = match Op::ALL.iter().copied().find(|op| op.name() == name) {
            Some(op) => op,
            None => return err(position, format!("unknown function `{name}`")),
        };
        if args.len() != op.arity() {
            return err(
                position,
                format!(
                    "`{name}` takes {} argument{}, found {}",
                    op.arity(),
                    if op.arity() == 1 { "" } else { "s" },
                    args.len()
                ),
            );
        }
        if op.arity() == 1 {
            Ok(Expr::unary(op, args.remove(0)))
        } else {
            let b = args.pop().expect("two arguments");
            let a = args.pop().expect("two arguments");
            Ok(Expr::binary(op, a, b))
        }
    }
}

/// Parse a formula in the toolkit grammar.
pub fn parse(input: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(input)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        input_len: input.len(),
    };
    let tree = parser.expr()?;
    if parser.pos != tokens.len() {
        return err(parser.here(), "unexpected trailing input");
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_bare_variable() {
        assert_eq!(parse("MST").unwrap(), Expr::Var(Variable::Mst));
    }

    #[test]
    fn respects_precedence_and_associativity() {
        let tree = parse("0.55 + 0.95*MST - cos(MSDMT)").unwrap();
        let expected = Expr::binary(
            Op::Sub,
            Expr::binary(
                Op::Add,
                Expr::Const(0.55),
                Expr::binary(Op::Mul, Expr::Const(0.95), Expr::Var(Variable::Mst)),
            ),
            Expr::unary(Op::Cos, Expr::Var(Variable::Msdmt)),
        );
        assert_eq!(tree, expected);
        assert_eq!(tree.complexity(), 10);
    }

    #[test]
    fn parses_two_argument_min() {
        let tree = parse("min(MST, 2*MYT)").unwrap();
        assert_eq!(
            tree,
            Expr::binary(
                Op::Min,
                Expr::Var(Variable::Mst),
                Expr::binary(Op::Mul, Expr::Const(2.0), Expr::Var(Variable::Myt)),
            )
        );
    }

    #[test]
    fn min_arity_is_checked() {
        let e = parse("min(MST)").unwrap_err();
        assert!(e.message.contains("takes 2 arguments"), "{e}");
    }

    #[test]
    fn unknown_identifier_reports_position() {
        let e = parse("MST + bogus").unwrap_err();
        assert_eq!(e.position, 6);
        assert!(e.message.contains("bogus"));
    }

    #[test]
    fn syntax_error_reports_position() {
        let e = parse("MST + ").unwrap_err();
        assert_eq!(e.position, 6);
    }

    #[test]
    fn variable_names_are_case_sensitive() {
        assert!(parse("MSDmT").is_ok());
        assert!(parse("msdmt").is_err());
    }

    #[test]
    fn unary_minus_folds_into_literals() {
        assert_eq!(parse("-5").unwrap(), Expr::Const(-5.0));
        assert_eq!(parse("(MST - -5)").unwrap().complexity(), 3);
        assert_eq!(
            parse("-MST").unwrap(),
            Expr::binary(Op::Sub, Expr::Const(0.0), Expr::Var(Variable::Mst))
        );
    }

    #[test]
    fn exponent_notation_is_accepted() {
        assert_eq!(parse("1.5e2").unwrap(), Expr::Const(150.0));
        assert_eq!(parse("2E-3").unwrap(), Expr::Const(0.002));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        assert!(parse("MST MST").is_err());
        assert!(parse("").is_err());
    }
}
