//! Flat token encoding of a formula plus a KeyTrace prefix.
//!
//! ```text
//! [CNF] 1 -3 4 0 -1 2 3 0 -2 -3 -4 0 [SEP] [D] -4 [D] 1 [D] 2 -3 [D]
//! ```
//!
//! The CNF segment is the DIMACS clause body without header. Each KeyTrace
//! block is `[D]`, its decision literal, then the literals it implied; levels
//! and tags are dropped. The trailing `[D]` asks for the next decision.
//! Implied literals that precede the first decision (level-0 facts from unit
//! input clauses) are not encoded: the formula already determines them.

use std::fmt;
use std::str::FromStr;

use super::{KeyEvent, KeyTrace};
use crate::cnf::{Clause, Formula, Lit};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    Cnf,
    Sep,
    D,
    ClauseEnd,
    Lit(Lit),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Cnf => f.write_str("[CNF]"),
            Token::Sep => f.write_str("[SEP]"),
            Token::D => f.write_str("[D]"),
            Token::ClauseEnd => f.write_str("0"),
            Token::Lit(l) => write!(f, "{}", l.value()),
        }
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Token> {
        match s {
            "[CNF]" => Ok(Token::Cnf),
            "[SEP]" => Ok(Token::Sep),
            "[D]" => Ok(Token::D),
            _ => {
                let v: i32 =
                    s.parse().map_err(|_| Error::TokenFormat(format!("unknown token `{s}`")))?;
                Ok(Lit::new(v).map_or(Token::ClauseEnd, Token::Lit))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<TokenStream> {
        let tokens = text.split_whitespace().map(str::parse).collect::<Result<Vec<_>>>()?;
        Ok(TokenStream { tokens })
    }
}

impl fmt::Display for TokenStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// `[CNF]` followed by the clause body. Policies cache this per instance.
pub fn cnf_tokens(formula: &Formula) -> Vec<Token> {
    let size = 1 + formula.clauses().iter().map(|c| c.len() + 1).sum::<usize>();
    let mut tokens = Vec::with_capacity(size);
    tokens.push(Token::Cnf);
    for clause in formula.clauses() {
        tokens.extend(clause.iter().map(|&l| Token::Lit(l)));
        tokens.push(Token::ClauseEnd);
    }
    tokens
}

/// Appends `[SEP]`, the blocks of `prefix`, and the final `[D]`.
pub fn serialize_with_cnf(cnf: &[Token], prefix: &KeyTrace) -> TokenStream {
    let mut tokens = Vec::with_capacity(cnf.len() + prefix.len() + prefix.decision_count() + 2);
    tokens.extend_from_slice(cnf);
    tokens.push(Token::Sep);
    let mut started = false;
    for e in prefix.events() {
        if e.is_decision() {
            started = true;
            tokens.push(Token::D);
        } else if !started {
            continue;
        }
        tokens.push(Token::Lit(e.lit));
    }
    tokens.push(Token::D);
    TokenStream { tokens }
}

pub fn serialize(formula: &Formula, prefix: &KeyTrace) -> Result<TokenStream> {
    let n = formula.num_vars();
    if let Some(e) = prefix.events().iter().find(|e| e.lit.var() > n) {
        return Err(Error::LiteralOutOfRange { lit: e.lit.value(), num_vars: n });
    }
    Ok(serialize_with_cnf(&cnf_tokens(formula), prefix))
}

/// Inverse of [`serialize`] up to levels: block `i` (1-based) gets level `i`.
pub fn deserialize(stream: &TokenStream, num_vars: u32) -> Result<(Formula, KeyTrace)> {
    let bad = |m: &str| Error::TokenFormat(m.to_string());
    let tokens = &stream.tokens;
    if tokens.first() != Some(&Token::Cnf) {
        return Err(bad("stream must start with [CNF]"));
    }
    if tokens.last() != Some(&Token::D) {
        return Err(bad("stream must end with [D]"));
    }
    let seps: Vec<usize> =
        tokens.iter().enumerate().filter(|(_, t)| **t == Token::Sep).map(|(i, _)| i).collect();
    let [sep] = seps[..] else {
        return Err(bad("stream must contain exactly one [SEP]"));
    };

    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for t in &tokens[1..sep] {
        match *t {
            Token::Lit(l) => current.push(l),
            Token::ClauseEnd => clauses.push(Clause::new(current.drain(..))),
            _ => return Err(bad("markers are not allowed inside the CNF segment")),
        }
    }
    if !current.is_empty() {
        return Err(bad("unterminated clause before [SEP]"));
    }
    let formula = Formula::new(num_vars, clauses)
        .map_err(|e| Error::LiteralOutOfRange { lit: e.lit, num_vars })?;

    let body = &tokens[sep + 1..tokens.len() - 1];
    let mut events = Vec::new();
    let mut level = 0u32;
    let mut i = 0;
    while i < body.len() {
        if body[i] != Token::D {
            return Err(bad("each block must start with [D]"));
        }
        let Some(Token::Lit(d)) = body.get(i + 1) else {
            return Err(bad("[D] must be followed by a decision literal"));
        };
        level += 1;
        events.push(KeyEvent::decision(*d, level));
        i += 2;
        while let Some(Token::Lit(a)) = body.get(i) {
            events.push(KeyEvent::assign(*a, level));
            i += 1;
        }
    }
    if let Some(e) = events.iter().find(|e| e.lit.var() > num_vars) {
        return Err(Error::LiteralOutOfRange { lit: e.lit.value(), num_vars });
    }
    Ok((formula, KeyTrace::from_events(events)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::tests::example_formula;
    use crate::keytrace::tests::{golden_formula, golden_keytrace};
    use crate::keytrace::{extract_keytrace, tests::arb_trail};
    use proptest::prelude::*;

    #[test]
    fn empty_prefix() {
        let z = serialize(&example_formula(), &KeyTrace::new()).unwrap();
        assert_eq!(z.to_text(), "[CNF] 1 -3 4 0 -1 2 3 0 -2 -3 -4 0 [SEP] [D]");
    }

    #[test]
    fn golden_prefix_blocks() {
        let z = serialize(&golden_formula(), &golden_keytrace()).unwrap();
        assert!(z.to_text().ends_with("[SEP] [D] -4 [D] 1 [D] 2 -3 [D]"), "{z}");
        assert_eq!(z.tokens.iter().filter(|t| **t == Token::Sep).count(), 1);
    }

    #[test]
    fn leading_assigns_are_skipped() {
        let k = KeyTrace::from_events(vec![
            KeyEvent::assign(Lit::new(1).unwrap(), 0),
            KeyEvent::decision(Lit::new(2).unwrap(), 1),
        ]);
        let z = serialize(&Formula::from_ints(2, &[&[1]]), &k).unwrap();
        assert_eq!(z.to_text(), "[CNF] 1 0 [SEP] [D] 2 [D]");
    }

    #[test]
    fn rejects_out_of_range_prefix() {
        let k = KeyTrace::from_events(vec![KeyEvent::decision(Lit::new(9).unwrap(), 1)]);
        assert!(matches!(
            serialize(&example_formula(), &k),
            Err(Error::LiteralOutOfRange { lit: 9, num_vars: 4 })
        ));
    }

    #[test]
    fn malformed_streams() {
        for text in [
            "[SEP] [D]",
            "[CNF] 1 0 [SEP]",
            "[CNF] 1 0 [D]",
            "[CNF] 1 0 [SEP] [SEP] [D]",
            "[CNF] 1 [SEP] [D]",
            "[CNF] 1 0 [SEP] 1 [D]",
            "[CNF] 1 0 [SEP] [D] [D]",
            "[CNF] 1 [D] 0 [SEP] [D]",
            "[CNF] 1 0 [SEP] [D] 7 [D]",
        ] {
            let z = TokenStream::parse(text).unwrap();
            assert!(deserialize(&z, 4).is_err(), "{text}");
        }
        assert!(TokenStream::parse("[CNF] x").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(f in crate::cnf::tests::arb_formula(8, 20), trail in arb_trail()) {
            let k = extract_keytrace(&trail);
            let f = Formula::new(8, f.clauses().to_vec()).unwrap();
            let z = serialize(&f, &k).unwrap();
            let text = z.to_text();
            let parsed = TokenStream::parse(&text).unwrap();
            prop_assert_eq!(&parsed, &z);
            let (g, k2) = deserialize(&parsed, 8).unwrap();
            prop_assert_eq!(g.clauses(), f.clauses());
            prop_assert_eq!(k2.blocks(), k.blocks());
        }
    }
}
