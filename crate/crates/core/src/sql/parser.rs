use super::ast::*;
use super::token::{tokenize, Token, TokenKind};
use crate::error::{Error, Result};
use crate::ir::AggFunc;
use crate::kernels::{ArithOp, CmpOp, LogicOp};
use crate::store::date;

const RESERVED: [&str; 26] = [
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "ORDER", "LIMIT", "JOIN", "INNER", "ON", "AND", "OR", "NOT", "BETWEEN",
    "LIKE", "CASE", "WHEN", "THEN", "ELSE", "END", "AS", "DATE", "ASC", "DESC", "TRUE", "FALSE",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    expected: Vec<String>,
    expected_at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect_note(&mut self, what: &str) {
        if self.expected_at != self.pos {
            self.expected.clear();
            self.expected_at = self.pos;
        }
        if !self.expected.iter().any(|e| e == what) {
            self.expected.push(what.to_string());
        }
    }

    fn error<T>(&mut self) -> Result<T> {
        if self.expected_at != self.pos {
            self.expected.clear();
        }
        let t = self.peek();
        let mut expected = self.expected.clone();
        expected.sort();
        Err(Error::Syntax {
            offset: t.offset,
            expected,
            found: t.to_string(),
        })
    }

    fn fail<T>(&mut self, what: &str) -> Result<T> {
        self.expect_note(what);
        self.error()
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.peek().is_word(kw) {
            self.bump();
            true
        } else {
            self.expect_note(kw);
            false
        }
    }

    fn eat_symbol(&mut self, s: &str) -> bool {
        if self.peek().is_symbol(s) {
            self.bump();
            true
        } else {
            self.expect_note(&format!("`{s}`"));
            false
        }
    }

    fn word(&mut self, kw: &str) -> Result<()> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            self.error()
        }
    }

    fn symbol(&mut self, s: &str) -> Result<()> {
        if self.eat_symbol(s) {
            Ok(())
        } else {
            self.error()
        }
    }

    fn ident(&mut self) -> Result<Ident> {
        let t = self.peek();
        if t.kind == TokenKind::Word && !is_reserved(&t.lexeme) {
            let t = self.bump();
            Ok(Ident {
                name: t.lexeme,
                span: Span(t.offset),
            })
        } else {
            self.fail("identifier")
        }
    }

    fn query(&mut self) -> Result<Query> {
        let start = self.peek().offset;
        self.word("SELECT")?;
        let mut select = Vec::new();
        if self.peek().is_symbol("*") {
            select.push(SelectItem::Wildcard(Span(self.bump().offset)));
        } else {
            loop {
                let expr = self.expr()?;
                let alias = if self.eat_word("AS") {
                    Some(self.ident()?)
                } else if self.peek().kind == TokenKind::Word && !is_reserved(&self.peek().lexeme) {
                    Some(self.ident()?)
                } else {
                    None
                };
                select.push(SelectItem::Expr { expr, alias });
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        self.word("FROM")?;
        let first = self.ident()?;
        let from = if self.eat_symbol(",") {
            From::Comma(first, self.ident()?)
        } else if self.peek().is_word("JOIN") || self.peek().is_word("INNER") {
            if self.eat_word("INNER") {
                self.word("JOIN")?;
            } else {
                self.bump();
            }
            let right = self.ident()?;
            self.word("ON")?;
            let on = self.expr()?;
            From::Join {
                left: first,
                right,
                on,
            }
        } else {
            self.expect_note("JOIN");
            From::Table(first)
        };
        if self.peek().is_symbol(",") {
            return self.fail("WHERE");
        }
        let where_clause = if self.eat_word("WHERE") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_word("GROUP") {
            self.word("BY")?;
            loop {
                let start = self.peek().offset;
                let (table, name) = self.column_ref()?;
                group_by.push(AstExpr {
                    kind: ExprKind::Column { table, name },
                    span: Span(start),
                });
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        let mut order_by = Vec::new();
        if self.eat_word("ORDER") {
            self.word("BY")?;
            loop {
                let column = self.ident()?;
                let asc = if self.eat_word("DESC") {
                    false
                } else {
                    self.eat_word("ASC");
                    true
                };
                order_by.push(OrderItem { column, asc });
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_word("LIMIT") {
            match self.peek().kind {
                TokenKind::Int(n) if n >= 0 => {
                    self.bump();
                    Some(n as u64)
                }
                _ => return self.fail("non-negative integer"),
            }
        } else {
            None
        };
        self.eat_symbol(";");
        if self.peek().kind != TokenKind::Eof {
            return self.fail("end of input");
        }
        Ok(Query {
            select,
            from,
            where_clause,
            group_by,
            order_by,
            limit,
            span: Span(start),
        })
    }

    fn column_ref(&mut self) -> Result<(Option<Ident>, Ident)> {
        let first = self.ident()?;
        if self.eat_symbol(".") {
            Ok((Some(first), self.ident()?))
        } else {
            Ok((None, first))
        }
    }

    fn expr(&mut self) -> Result<AstExpr> {
        self.or()
    }

    fn binary(op: BinOp, left: AstExpr, right: AstExpr) -> AstExpr {
        let span = left.span;
        AstExpr {
            kind: ExprKind::Binary {
                op,
                left: Box::new(left),
                right: Box::new(right),
            },
            span,
        }
    }

    fn or(&mut self) -> Result<AstExpr> {
        let mut e = self.and()?;
        while self.eat_word("OR") {
            let r = self.and()?;
            e = Self::binary(BinOp::Logic(LogicOp::Or), e, r);
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<AstExpr> {
        let mut e = self.not()?;
        while self.eat_word("AND") {
            let r = self.not()?;
            e = Self::binary(BinOp::Logic(LogicOp::And), e, r);
        }
        Ok(e)
    }

    fn not(&mut self) -> Result<AstExpr> {
        let start = self.peek().offset;
        if self.eat_word("NOT") {
            let e = self.not()?;
            return Ok(AstExpr {
                kind: ExprKind::Not(Box::new(e)),
                span: Span(start),
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<AstExpr> {
        let e = self.additive()?;
        const OPS: [(&str, CmpOp); 7] = [
            ("=", CmpOp::Eq),
            ("<>", CmpOp::Ne),
            ("!=", CmpOp::Ne),
            ("<", CmpOp::Lt),
            ("<=", CmpOp::Le),
            (">", CmpOp::Gt),
            (">=", CmpOp::Ge),
        ];
        for (sym, op) in OPS {
            if self.eat_symbol(sym) {
                let r = self.additive()?;
                return Ok(Self::binary(BinOp::Cmp(op), e, r));
            }
        }
        let span = e.span;
        if self.eat_word("BETWEEN") {
            let low = self.additive()?;
            self.word("AND")?;
            let high = self.additive()?;
            return Ok(AstExpr {
                kind: ExprKind::Between {
                    arg: Box::new(e),
                    low: Box::new(low),
                    high: Box::new(high),
                },
                span,
            });
        }
        if self.eat_word("LIKE") {
            let TokenKind::Str(pattern) = self.peek().kind.clone() else {
                return self.fail("string literal");
            };
            self.bump();
            return Ok(AstExpr {
                kind: ExprKind::Like {
                    arg: Box::new(e),
                    pattern,
                },
                span,
            });
        }
        Ok(e)
    }

    fn additive(&mut self) -> Result<AstExpr> {
        let mut e = self.multiplicative()?;
        loop {
            let op = if self.eat_symbol("+") {
                ArithOp::Add
            } else if self.eat_symbol("-") {
                ArithOp::Sub
            } else {
                return Ok(e);
            };
            let r = self.multiplicative()?;
            e = Self::binary(BinOp::Arith(op), e, r);
        }
    }

    fn multiplicative(&mut self) -> Result<AstExpr> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_symbol("*") {
                ArithOp::Mul
            } else if self.eat_symbol("/") {
                ArithOp::Div
            } else {
                return Ok(e);
            };
            let r = self.unary()?;
            e = Self::binary(BinOp::Arith(op), e, r);
        }
    }

    fn unary(&mut self) -> Result<AstExpr> {
        let start = self.peek().offset;
        if self.eat_symbol("-") {
            let e = self.unary()?;
            return Ok(AstExpr {
                kind: ExprKind::Neg(Box::new(e)),
                span: Span(start),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<AstExpr> {
        let t = self.peek().clone();
        let at = |kind| AstExpr {
            kind,
            span: Span(t.offset),
        };
        match &t.kind {
            TokenKind::Int(v) => {
                self.bump();
                return Ok(at(ExprKind::Int(*v)));
            }
            TokenKind::Float(v) => {
                self.bump();
                return Ok(at(ExprKind::Float(*v)));
            }
            TokenKind::Str(s) => {
                self.bump();
                return Ok(at(ExprKind::Str(s.clone())));
            }
            _ => {}
        }
        if self.eat_symbol("(") {
            let mut e = self.expr()?;
            self.symbol(")")?;
            e.span = Span(t.offset);
            return Ok(e);
        }
        if self.eat_word("TRUE") {
            return Ok(at(ExprKind::Bool(true)));
        }
        if self.eat_word("FALSE") {
            return Ok(at(ExprKind::Bool(false)));
        }
        if self.eat_word("DATE") {
            let s = self.peek().clone();
            return match s.kind {
                TokenKind::Str(text) if date::parse(&text).is_ok() => {
                    self.bump();
                    Ok(at(ExprKind::Date(text)))
                }
                _ => self.fail("date literal 'YYYY-MM-DD' from 1677-09-22 to 2262-04-11"),
            };
        }
        if self.eat_word("CASE") {
            let mut branches = Vec::new();
            while self.eat_word("WHEN") {
                let w = self.expr()?;
                self.word("THEN")?;
                branches.push((w, self.expr()?));
            }
            if branches.is_empty() {
                return self.error();
            }
            self.word("ELSE")?;
            let else_value = Box::new(self.expr()?);
            self.word("END")?;
            return Ok(at(ExprKind::Case {
                branches,
                else_value,
            }));
        }
        if t.kind == TokenKind::Word && self.peek_at(1).is_symbol("(") {
            let func = AggFunc::ALL
                .into_iter()
                .find(|f| t.lexeme.eq_ignore_ascii_case(f.name()));
            if let Some(func) = func {
                self.bump();
                self.bump();
                let arg = if func == AggFunc::Count && self.eat_symbol("*") {
                    None
                } else {
                    Some(Box::new(self.expr()?))
                };
                self.symbol(")")?;
                return Ok(at(ExprKind::Aggregate { func, arg }));
            }
            if t.lexeme.eq_ignore_ascii_case("PREDICT") {
                self.bump();
                self.bump();
                let model = self.ident()?;
                let mut args = Vec::new();
                while self.eat_symbol(",") {
                    args.push(self.expr()?);
                }
                self.symbol(")")?;
                return Ok(at(ExprKind::Predict { model, args }));
            }
        }
        if t.kind == TokenKind::Word && !is_reserved(&t.lexeme) {
            let (table, name) = self.column_ref()?;
            return Ok(at(ExprKind::Column { table, name }));
        }
        self.fail("expression")
    }
}

/// Parses one SELECT statement.
pub fn parse(sql: &str) -> Result<Query> {
    let toks = tokenize(sql)?;
    let mut p = Parser {
        toks,
        pos: 0,
        expected: Vec::new(),
        expected_at: 0,
    };
    p.query()
}
