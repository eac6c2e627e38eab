//! Recursive-descent parser for the formula text grammar.
//!
//! ```text
//! sdnf      := seqconj ("|" seqconj)*
//! seqconj   := primitive (("&" | "&&") primitive)*
//! primitive := ["!"] temporal
//! temporal  := ("F" | "G") "[" int "," int "]" (["!"] temporal | atom)
//! atom      := ["!"] "(" cond ("&" cond)* ")"
//! cond      := var (">=" | "<=") int | var
//! ```
//!
//! A bare `var` inside an atom is shorthand for `var>=1`.

use super::{Bound, FormulaError, Interval, Literal, Primitive, PrimitiveKind, Region, Sdnf, SeqConj, Tick};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Bang,
    And,
    Or,
    Ge,
    Le,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Bang => "`!`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, FormulaError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'!' => Tok::Bang,
            b'|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    i += 1;
                }
                Tok::Or
            }
            b'&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    i += 1;
                }
                Tok::And
            }
            b'>' | b'<' => {
                if bytes.get(i + 1) != Some(&b'=') {
                    return Err(FormulaError::Syntax {
                        pos: i,
                        expected: "`>=` or `<=`".into(),
                        found: format!("`{}`", c as char),
                    });
                }
                i += 1;
                if c == b'>' {
                    Tok::Ge
                } else {
                    Tok::Le
                }
            }
            b'-' | b'0'..=b'9' => {
                let mut j = i + 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let lit = &text[i..j];
                let v = lit.parse::<i64>().map_err(|_| FormulaError::Syntax {
                    pos: i,
                    expected: "integer".into(),
                    found: format!("`{lit}`"),
                })?;
                i = j;
                out.push((start, Tok::Int(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = text[i..j].to_string();
                i = j;
                out.push((start, Tok::Ident(word)));
                continue;
            }
            _ => {
                return Err(FormulaError::Syntax {
                    pos: i,
                    expected: "formula token".into(),
                    found: format!("`{}`", text[i..].chars().next().unwrap_or('?')),
                })
            }
        };
        i += 1;
        out.push((start, tok));
    }
    out.push((text.len(), Tok::Eof));
    Ok(out)
}

/// Parse tree before negation normalization.
enum Raw {
    Not(Box<Raw>),
    Temporal { always: bool, lo: Tick, hi: Tick, body: Box<Raw> },
    Atom(Literal),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            pos: self.pos(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), FormulaError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(&tok.describe())
        }
    }

    fn int(&mut self) -> Result<i64, FormulaError> {
        match self.peek() {
            Tok::Int(v) => {
                let v = *v;
                self.bump();
                Ok(v)
            }
            _ => self.error("integer"),
        }
    }

    fn tick(&mut self) -> Result<Tick, FormulaError> {
        let pos = self.pos();
        let v = self.int()?;
        Tick::try_from(v).map_err(|_| FormulaError::Interval(format!("time bound {v} at byte {pos} is negative")))
    }

    fn sdnf(&mut self) -> Result<Sdnf, FormulaError> {
        let mut disjuncts = vec![self.seqconj()?];
        while *self.peek() == Tok::Or {
            self.bump();
            disjuncts.push(self.seqconj()?);
        }
        if *self.peek() != Tok::Eof {
            return self.error("`&`, `|` or end of input");
        }
        Sdnf::new(disjuncts)
    }

    fn seqconj(&mut self) -> Result<SeqConj, FormulaError> {
        let mut prims = vec![self.primitive()?];
        while *self.peek() == Tok::And {
            self.bump();
            prims.push(self.primitive()?);
        }
        SeqConj::new(prims)
    }

    fn primitive(&mut self) -> Result<Primitive, FormulaError> {
        let raw = self.temporal_or_not()?;
        classify(normalize(raw, false))
    }

    fn temporal_or_not(&mut self) -> Result<Raw, FormulaError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Raw::Not(Box::new(self.temporal_or_not()?)));
        }
        let always = match self.peek() {
            Tok::Ident(s) if s == "F" => false,
            Tok::Ident(s) if s == "G" => true,
            _ => return self.error("`F`, `G` or `!`"),
        };
        self.bump();
        self.expect(Tok::LBracket)?;
        let lo = self.tick()?;
        self.expect(Tok::Comma)?;
        let hi = self.tick()?;
        self.expect(Tok::RBracket)?;
        let body = self.body()?;
        Ok(Raw::Temporal { always, lo, hi, body: Box::new(body) })
    }

    fn body(&mut self) -> Result<Raw, FormulaError> {
        let mut negations = 0usize;
        while *self.peek() == Tok::Bang {
            self.bump();
            negations += 1;
        }
        let inner = match self.peek() {
            Tok::LParen => Raw::Atom(Literal::pos(self.atom()?)),
            Tok::Ident(s) if s == "F" || s == "G" => self.temporal_or_not()?,
            _ => return self.error("`(`, `F`, `G` or `!`"),
        };
        Ok((0..negations).fold(inner, |r, _| Raw::Not(Box::new(r))))
    }

    fn atom(&mut self) -> Result<Region, FormulaError> {
        let open = self.pos();
        self.expect(Tok::LParen)?;
        let mut dims: Vec<Bound> = Vec::new();
        loop {
            let var = match self.peek() {
                Tok::Ident(s) => s.clone(),
                _ => return self.error("variable name"),
            };
            self.bump();
            let (lo, hi) = match self.peek() {
                Tok::Ge => {
                    self.bump();
                    (self.int()?, i64::MAX)
                }
                Tok::Le => {
                    self.bump();
                    (i64::MIN, self.int()?)
                }
                _ => (1, i64::MAX),
            };
            match dims.iter_mut().find(|d| d.var == var) {
                Some(d) => {
                    d.lo = d.lo.max(lo);
                    d.hi = d.hi.min(hi);
                }
                None => dims.push(Bound { var, lo, hi }),
            }
            match self.peek() {
                Tok::And => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    break;
                }
                _ => return self.error("`&` or `)`"),
            }
        }
        Region::new(dims).map_err(|e| match e {
            FormulaError::Region(msg) => FormulaError::Region(format!("atom at byte {open}: {msg}")),
            other => other,
        })
    }
}

/// Pushes negations down to the literal using the duals of F and G.
fn normalize(raw: Raw, negate: bool) -> Raw {
    match raw {
        Raw::Not(inner) => normalize(*inner, !negate),
        Raw::Temporal { always, lo, hi, body } => Raw::Temporal {
            always: always != negate,
            lo,
            hi,
            body: Box::new(normalize(*body, negate)),
        },
        Raw::Atom(lit) => Raw::Atom(if negate { lit.negate() } else { lit }),
    }
}

fn classify(raw: Raw) -> Result<Primitive, FormulaError> {
    let Raw::Temporal { always, lo, hi, body } = raw else {
        return Err(FormulaError::Structure("a primitive must start with F or G".into()));
    };
    let outer = Interval::outer(lo, hi)?;
    match *body {
        Raw::Atom(lit) => {
            let kind = if always { PrimitiveKind::Alw } else { PrimitiveKind::Ev };
            Primitive::new(kind, outer, None, lit)
        }
        Raw::Temporal { always: inner_always, lo: ilo, hi: ihi, body: inner_body } => {
            let lit = match *inner_body {
                Raw::Atom(lit) => lit,
                _ => {
                    return Err(FormulaError::Structure(
                        "temporal nesting deeper than two operators".into(),
                    ))
                }
            };
            let kind = match (always, inner_always) {
                (false, true) => PrimitiveKind::EvAlw,
                (true, false) => PrimitiveKind::AlwEv,
                (false, false) => return Err(FormulaError::Structure("F F is not a primitive structure".into())),
                (true, true) => return Err(FormulaError::Structure("G G is not a primitive structure".into())),
            };
            if ilo != 0 {
                return Err(FormulaError::Interval(format!("inner interval [{ilo},{ihi}] must start at 0")));
            }
            Primitive::new(kind, outer, Some(Interval::inner(ihi)?), lit)
        }
        Raw::Not(_) => unreachable!("normalize removes every negation node"),
    }
}

/// Parses the canonical text form into a normalized formula.
pub fn parse_formula(text: &str) -> Result<Sdnf, FormulaError> {
    let toks = lex(text)?;
    Parser { toks, at: 0 }.sdnf()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{format_formula, EffectTimes};

    #[test]
    fn parses_case_one_source_formula() {
        let phi = parse_formula(
            "F[1,15] G[0,4] (x>=3 & x<=4 & y>=3 & y<=5) & F[21,39] (x>=7 & x<=8 & y>=5 & y<=8)",
        )
        .unwrap();
        assert_eq!(phi.disjuncts().len(), 1);
        let prims = phi.disjuncts()[0].primitives();
        assert_eq!(prims[0], Primitive::ev_alw(1, 15, 4, Literal::pos(Region::rect(3, 4, 3, 5).unwrap())).unwrap());
        assert_eq!(prims[1], Primitive::ev(21, 39, Literal::pos(Region::rect(7, 8, 5, 8).unwrap())).unwrap());
    }

    #[test]
    fn negation_is_pushed_to_the_literal() {
        let phi = parse_formula("!F[2,5](x>=0 & x<=1)").unwrap();
        let p = &phi.disjuncts()[0].primitives()[0];
        assert_eq!(p.kind(), PrimitiveKind::Alw);
        assert!(p.literal().negated);
        assert_eq!(p.outer(), Interval { lo: 2, hi: 5 });

        let nested = parse_formula("!G[0,8] F[0,4] (x<=4)").unwrap();
        let p = &nested.disjuncts()[0].primitives()[0];
        assert_eq!(p.kind(), PrimitiveKind::EvAlw);
        assert!(p.literal().negated);

        let inner = parse_formula("F[1,3] !F[0,2] (x>=1)").unwrap();
        assert_eq!(inner.disjuncts()[0].primitives()[0].kind(), PrimitiveKind::EvAlw);
        let double = parse_formula("!!F[1,3] (x>=1)").unwrap();
        assert_eq!(double.disjuncts()[0].primitives()[0].kind(), PrimitiveKind::Ev);
        assert!(!double.disjuncts()[0].primitives()[0].literal().negated);
    }

    #[test]
    fn overlapping_windows_are_an_sdnf_error() {
        assert!(matches!(parse_formula("F[0,3](a) & F[1,2](b)"), Err(FormulaError::Sdnf(_))));
        assert!(parse_formula("F[0,3](a) && F[4,6](b)").is_ok());
    }

    #[test]
    fn error_kinds() {
        match parse_formula("F[1,2] (x>=1") {
            Err(FormulaError::Syntax { pos, .. }) => assert_eq!(pos, 12),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_formula("F[1,2] F[0,3] (x>=1)"), Err(FormulaError::Structure(_))));
        assert!(matches!(parse_formula("F[1,2] G[0,3] F[0,1] (x>=1)"), Err(FormulaError::Structure(_))));
        assert!(matches!(parse_formula("F[3,3] (x>=1)"), Err(FormulaError::Interval(_))));
        assert!(matches!(parse_formula("F[1,3] G[1,3] (x>=1)"), Err(FormulaError::Interval(_))));
        assert!(matches!(parse_formula("F[1,3] G[0,0] (x>=1)"), Err(FormulaError::Interval(_))));
        assert!(matches!(parse_formula("F[1,3] (x>=4 & x<=2)"), Err(FormulaError::Region(_))));
        assert!(matches!(parse_formula("X[1,3] (x>=1)"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_formula("F[1,3] (x>1)"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_formula(""), Err(FormulaError::Syntax { .. })));
    }

    #[test]
    fn canonical_text_round_trips() {
        let texts = [
            "F[1,15] G[0,4] (x>=3 & x<=4 & y>=3 & y<=5) & F[21,39] (x>=7 & x<=8 & y>=5 & y<=8)",
            "G[0,40] F[0,10] (x>=2 & x<=3 & y>=3 & y<=4) | G[0,40] F[0,10] (x>=4 & x<=5 & y>=3 & y<=4)",
            "G[2,5] !(x>=0 & x<=1)",
            "F[0,3] (a>=1) & G[4,9] (b<=-2)",
        ];
        for t in texts {
            let phi = parse_formula(t).unwrap();
            assert_eq!(format_formula(&phi), t);
            assert_eq!(parse_formula(&format_formula(&phi)).unwrap(), phi);
        }
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse_formula("F[1,15]G[0,4](x>=3&x<=4&y>=3&y<=5)").unwrap();
        let b = parse_formula("  F [ 1 , 15 ]  G[0, 4]\n( x >= 3 & x <= 4 & y >= 3 & y <= 5 ) ").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.effect_times(), (1, 19));
    }
}
