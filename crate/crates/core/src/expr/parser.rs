//! Tokenizer and Pratt parser for the expression grammar.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary `-`, `^` (right
//! associative). Function calls take the form `name(expr)`.

use super::ast::{BinaryOp, Expr, UnaryOp};
use super::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

impl Token {
    fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Number(v) => format!("number {v}"),
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Op(c) => format!("`{c}`"),
            TokenKind::LParen => "`(`".to_string(),
            TokenKind::RParen => "`)`".to_string(),
            TokenKind::Eof => "end of input".to_string(),
        }
    }
}

fn syntax_error(token: &Token, expected: &[&str]) -> ExprError {
    ExprError::Syntax {
        offset: token.offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: token.describe(),
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                TokenKind::Op(c as char)
            }
            b'(' => {
                i += 1;
                TokenKind::LParen
            }
            b')' => {
                i += 1;
                TokenKind::RParen
            }
            b'0'..=b'9' | b'.' => {
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
                let text = &src[start..i];
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => TokenKind::Number(v),
                    _ => {
                        return Err(ExprError::Syntax {
                            offset: start,
                            expected: vec!["finite number".to_string()],
                            found: format!("`{text}`"),
                        })
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Ident(src[start..i].to_string())
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    expected: vec![
                        "number".into(),
                        "identifier".into(),
                        "operator".into(),
                        "parenthesis".into(),
                    ],
                    found: format!("character `{ch}`"),
                });
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: src.len(),
    });
    Ok(tokens)
}

const OPERAND: [&str; 4] = ["number", "identifier", "`(`", "`-`"];
const NEG_BP: u8 = 5;

fn infix_binding_power(op: char) -> Option<(BinaryOp, u8, u8)> {
    Some(match op {
        '+' => (BinaryOp::Add, 1, 2),
        '-' => (BinaryOp::Sub, 1, 2),
        '*' => (BinaryOp::Mul, 3, 4),
        '/' => (BinaryOp::Div, 3, 4),
        '^' => (BinaryOp::Pow, 7, 6),
        _ => return None,
    })
}

struct Parser<'a> {
    tokens: Vec<Token>,
    cursor: usize,
    vocabulary: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.cursor]
    }

    fn next(&mut self) -> Token {
        let token = self.tokens[self.cursor].clone();
        if token.kind != TokenKind::Eof {
            self.cursor += 1;
        }
        token
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let token = self.next();
        match token.kind {
            TokenKind::RParen => Ok(()),
            _ => Err(syntax_error(&token, &["`)`", "operator"])),
        }
    }

    fn expression(&mut self, min_bp: u8) -> Result<Expr, ExprError> {
        let mut lhs = self.operand()?;
        loop {
            let token = self.peek().clone();
            let (op, l_bp, r_bp) = match &token.kind {
                TokenKind::Op(c) => match infix_binding_power(*c) {
                    Some(bp) => bp,
                    None => return Err(syntax_error(&token, &["operator"])),
                },
                TokenKind::RParen | TokenKind::Eof => break,
                _ => return Err(syntax_error(&token, &["operator", "`)`", "end of input"])),
            };
            if l_bp < min_bp {
                break;
            }
            self.next();
            let rhs = self.expression(r_bp)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn operand(&mut self) -> Result<Expr, ExprError> {
        let token = self.next();
        match token.kind {
            TokenKind::Number(v) => Ok(Expr::Const(v)),
            TokenKind::Op('-') => {
                let arg = self.expression(NEG_BP)?;
                Ok(Expr::unary(UnaryOp::Neg, arg))
            }
            TokenKind::LParen => {
                let inner = self.expression(0)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokenKind::Ident(ref name) => {
                if let Some(op) = UnaryOp::from_function_name(name) {
                    let open = self.next();
                    if open.kind != TokenKind::LParen {
                        return Err(syntax_error(&open, &["`(`"]));
                    }
                    let arg = self.expression(0)?;
                    self.expect_rparen()?;
                    Ok(Expr::unary(op, arg))
                } else if self.vocabulary.contains(&name.as_str()) {
                    Ok(Expr::Var(name.clone()))
                } else {
                    Err(ExprError::UnknownVariable {
                        name: name.clone(),
                        offset: token.offset,
                    })
                }
            }
            _ => Err(syntax_error(&token, &OPERAND)),
        }
    }
}

/// Parses `src`, resolving every identifier against `vocabulary`.
pub fn parse(src: &str, vocabulary: &[&str]) -> Result<Expr, ExprError> {
    for (i, name) in vocabulary.iter().enumerate() {
        super::check_identifier(name)?;
        if vocabulary[..i].contains(name) {
            return Err(ExprError::InvalidVocabulary {
                name: name.to_string(),
                reason: "declared twice".to_string(),
            });
        }
    }
    let tokens = tokenize(src)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        vocabulary,
    };
    let expr = parser.expression(0)?;
    let tail = parser.next();
    match tail.kind {
        TokenKind::Eof => Ok(expr),
        _ => Err(syntax_error(&tail, &["operator", "end of input"])),
    }
}
