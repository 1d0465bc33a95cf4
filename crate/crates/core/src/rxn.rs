//! Plain-text reaction network models (`.rxn`).
//!
//! ```text
//! # immigration–death
//! species X = 0
//! param b = 10
//! param d = 1
//! 0 -> X @ massaction(b)
//! X -> 0 @ massaction(d)
//! observable twice = 2 X
//! ```
//!
//! The grammar is documented in `docs/format.md`. [`serialize_model`] emits
//! a canonical form that [`parse_model`] maps back to an equal document.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::{RateTerm, Reaction, ReactionNetwork};
use crate::params::ParameterVector;
use crate::simulate::Observables;
use crate::Real;

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument<S> {
    pub network: ReactionNetwork<S>,
    pub initial: Vec<i64>,
    /// Declared observables; empty when the file has none.
    pub observables: Observables<S>,
}

impl<S: Real> ModelDocument<S> {
    /// Declared observables, or one per species if none were declared.
    pub fn observables_or_species(&self) -> Observables<S> {
        if self.observables.is_empty() {
            Observables::identity(self.network.species())
        } else {
            self.observables.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Arrow,
    At,
    Plus,
    Minus,
    Star,
    Eq,
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Arrow => "`->`".into(),
            Tok::At => "`@`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eq => "`=`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
        }
    }
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Splits one comment-free line into tokens with 1-based columns.
fn lex(line_no: usize, text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
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
            out.push((Tok::Number(chars[start..i].iter().collect()), col));
            continue;
        }
        let tok = match c {
            '-' if chars.get(i + 1) == Some(&'>') => {
                i += 1;
                Tok::Arrow
            }
            '@' => Tok::At,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '=' => Tok::Eq,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(parse_error(line_no, col, format!("unexpected character {other:?}")));
            }
        };
        out.push((tok, col));
        i += 1;
    }
    Ok(out)
}

struct Line<'a> {
    no: usize,
    toks: &'a [(Tok, usize)],
    pos: usize,
    end_col: usize,
}

impl Line<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |&(_, c)| c)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        parse_error(self.no, self.col(), message)
    }

    fn found(&self) -> String {
        self.peek().map_or("end of line".into(), Tok::describe)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.found())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize)> {
        match self.peek() {
            Some(Tok::Ident(_)) => match self.next() {
                Some((Tok::Ident(s), c)) => Ok((s, c)),
                _ => unreachable!(),
            },
            _ => Err(self.error(format!("expected {what}, found {}", self.found()))),
        }
    }

    /// Optionally signed number literal.
    fn number(&mut self, what: &str) -> Result<(String, usize)> {
        let col = self.col();
        let neg = if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.peek() {
            Some(Tok::Number(_)) => match self.next() {
                Some((Tok::Number(s), _)) => Ok((if neg { format!("-{s}") } else { s }, col)),
                _ => unreachable!(),
            },
            _ => Err(self.error(format!("expected {what}, found {}", self.found()))),
        }
    }

    fn done(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.error(format!("unexpected {} after end of clause", t.describe()))),
        }
    }
}

const KEYWORDS: [&str; 5] = ["species", "param", "observable", "massaction", "mm"];

#[derive(Default)]
struct Builder<S> {
    species: Vec<String>,
    initial: Vec<i64>,
    params: Vec<String>,
    values: Vec<S>,
    names: HashMap<String, (usize, usize)>,
    reactions: Vec<Reaction>,
    obs_names: Vec<String>,
    obs_weights: Vec<Vec<(usize, S)>>,
}

impl<S: Real> Builder<S> {
    fn declare(&mut self, line: &Line<'_>, name: &str, col: usize) -> Result<()> {
        if KEYWORDS.contains(&name) {
            return Err(parse_error(line.no, col, format!("`{name}` is a reserved word")));
        }
        if let Some(&(l, c)) = self.names.get(name) {
            return Err(parse_error(
                line.no,
                col,
                format!("duplicate declaration of `{name}` (first declared at {l}:{c})"),
            ));
        }
        self.names.insert(name.to_string(), (line.no, col));
        Ok(())
    }

    fn species_ref(&self, line: &Line<'_>, name: &str, col: usize) -> Result<usize> {
        self.species.iter().position(|s| s == name).ok_or_else(|| {
            let kind = if self.params.iter().any(|p| p == name) {
                "is a parameter, not a species"
            } else {
                "is not a declared species"
            };
            parse_error(line.no, col, format!("`{name}` {kind}"))
        })
    }

    fn param_ref(&self, line: &Line<'_>, name: &str, col: usize) -> Result<usize> {
        self.params.iter().position(|s| s == name).ok_or_else(|| {
            let kind = if self.species.iter().any(|p| p == name) {
                "is a species, not a parameter"
            } else {
                "is not a declared parameter"
            };
            parse_error(line.no, col, format!("`{name}` {kind}"))
        })
    }

    fn species_decl(&mut self, line: &mut Line<'_>) -> Result<()> {
        let (name, col) = line.ident("species name")?;
        self.declare(line, &name, col)?;
        line.expect(Tok::Eq)?;
        let (text, ncol) = line.number("initial count")?;
        let count: i64 = text
            .parse()
            .map_err(|_| parse_error(line.no, ncol, format!("initial count must be an integer, got `{text}`")))?;
        if count < 0 {
            return Err(parse_error(line.no, ncol, "initial count must be nonnegative"));
        }
        line.done()?;
        self.species.push(name);
        self.initial.push(count);
        Ok(())
    }

    fn param_decl(&mut self, line: &mut Line<'_>) -> Result<()> {
        let (name, col) = line.ident("parameter name")?;
        self.declare(line, &name, col)?;
        line.expect(Tok::Eq)?;
        let (text, ncol) = line.number("parameter value")?;
        let value: S = text
            .parse()
            .map_err(|_| parse_error(line.no, ncol, format!("invalid number `{text}`")))?;
        if !value.is_finite() || value <= S::zero() {
            return Err(parse_error(
                line.no,
                ncol,
                format!("rate constant `{name}` must be positive, got {text}"),
            ));
        }
        line.done()?;
        self.params.push(name);
        self.values.push(value);
        Ok(())
    }

    fn side(&self, line: &mut Line<'_>) -> Result<Vec<(usize, u32)>> {
        if let Some(Tok::Number(n)) = line.peek() {
            if n == "0" && !matches!(line.toks.get(line.pos + 1), Some((Tok::Ident(_), _))) {
                line.pos += 1;
                return Ok(Vec::new());
            }
        }
        let mut side = Vec::new();
        loop {
            let coefficient = match line.peek() {
                Some(Tok::Number(_)) => {
                    let (text, col) = line.number("stoichiometric coefficient")?;
                    let c: u32 = text.parse().ok().filter(|&c| c > 0).ok_or_else(|| {
                        parse_error(line.no, col, format!("invalid stoichiometric coefficient `{text}`"))
                    })?;
                    c
                }
                _ => 1,
            };
            let (name, col) = line.ident("species name or `0`")?;
            side.push((self.species_ref(line, &name, col)?, coefficient));
            if line.peek() == Some(&Tok::Plus) {
                line.pos += 1;
            } else {
                return Ok(side);
            }
        }
    }

    fn rate_term(&self, line: &mut Line<'_>, reactants: &[(usize, u32)]) -> Result<RateTerm> {
        let (law, col) = line.ident("rate law (`massaction` or `mm`)")?;
        line.expect(Tok::LParen)?;
        let mut args = vec![line.ident("argument")?];
        while line.peek() == Some(&Tok::Comma) {
            line.pos += 1;
            args.push(line.ident("argument")?);
        }
        line.expect(Tok::RParen)?;
        match (law.as_str(), args.len()) {
            ("massaction", 1) => Ok(RateTerm::MassAction {
                rate: self.param_ref(line, &args[0].0, args[0].1)?,
            }),
            ("mm", 2..=4) => {
                let vmax = self.param_ref(line, &args[0].0, args[0].1)?;
                let km = self.param_ref(line, &args[1].0, args[1].1)?;
                let substrate = match args.get(2) {
                    Some((name, c)) => self.species_ref(line, name, *c)?,
                    None => match reactants {
                        [(s, 1)] => *s,
                        _ => {
                            return Err(parse_error(
                                line.no,
                                col,
                                "mm(V, K) needs a single reactant; name the substrate with mm(V, K, S)",
                            ))
                        }
                    },
                };
                let modifier = match args.get(3) {
                    Some((name, c)) => Some(self.species_ref(line, name, *c)?),
                    None => None,
                };
                Ok(RateTerm::MichaelisMenten {
                    vmax,
                    km,
                    substrate,
                    modifier,
                })
            }
            ("massaction", n) | ("mm", n) => Err(parse_error(
                line.no,
                col,
                format!("`{law}` does not take {n} argument(s)"),
            )),
            _ => Err(parse_error(line.no, col, format!("unknown rate law `{law}`"))),
        }
    }

    fn reaction(&mut self, line: &mut Line<'_>) -> Result<()> {
        let reactants = self.side(line)?;
        line.expect(Tok::Arrow)?;
        let products = self.side(line)?;
        line.expect(Tok::At)?;
        let mut terms = vec![self.rate_term(line, &reactants)?];
        while line.peek() == Some(&Tok::Plus) {
            line.pos += 1;
            terms.push(self.rate_term(line, &reactants)?);
        }
        line.done()?;
        self.reactions.push(Reaction::new(reactants, products, terms));
        Ok(())
    }

    fn observable(&mut self, line: &mut Line<'_>) -> Result<()> {
        let (name, col) = line.ident("observable name")?;
        if let Some(prev) = self.obs_names.iter().position(|o| *o == name) {
            return Err(parse_error(
                line.no,
                col,
                format!("duplicate observable `{}`", self.obs_names[prev]),
            ));
        }
        line.expect(Tok::Eq)?;
        let mut weights = Vec::new();
        let mut first = true;
        loop {
            let negative = match line.peek() {
                Some(Tok::Minus) => {
                    line.pos += 1;
                    true
                }
                Some(Tok::Plus) if !first => {
                    line.pos += 1;
                    false
                }
                _ if first => false,
                _ => break,
            };
            first = false;
            let mut w = S::one();
            if let Some(Tok::Number(_)) = line.peek() {
                let (text, ncol) = line.number("coefficient")?;
                w = text
                    .parse()
                    .map_err(|_| parse_error(line.no, ncol, format!("invalid number `{text}`")))?;
                if line.peek() == Some(&Tok::Star) {
                    line.pos += 1;
                }
            }
            let (s, scol) = line.ident("species name")?;
            let idx = self.species_ref(line, &s, scol)?;
            weights.push((idx, if negative { -w } else { w }));
        }
        line.done()?;
        self.obs_names.push(name);
        self.obs_weights.push(weights);
        Ok(())
    }
}

/// Parses `.rxn` text.
pub fn parse_model<S: Real>(text: &str) -> Result<ModelDocument<S>> {
    let mut b = Builder::<S>::default();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let toks = lex(no, body)?;
        if toks.is_empty() {
            continue;
        }
        let mut line = Line {
            no,
            toks: &toks,
            pos: 0,
            end_col: body.chars().count() + 1,
        };
        match line.peek() {
            Some(Tok::Ident(k)) if k == "species" => {
                line.pos += 1;
                b.species_decl(&mut line)?
            }
            Some(Tok::Ident(k)) if k == "param" => {
                line.pos += 1;
                b.param_decl(&mut line)?
            }
            Some(Tok::Ident(k)) if k == "observable" => {
                line.pos += 1;
                b.observable(&mut line)?
            }
            _ => b.reaction(&mut line)?,
        }
    }
    let parameters = ParameterVector::new(b.params, b.values)?;
    let network = ReactionNetwork::new(b.species, b.reactions, parameters)?;
    Ok(ModelDocument {
        network,
        initial: b.initial,
        observables: Observables::new(b.obs_names, b.obs_weights)?,
    })
}

/// Parses raw bytes, reporting invalid UTF-8 as a located error.
pub fn parse_model_bytes<S: Real>(bytes: &[u8]) -> Result<ModelDocument<S>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_model(text),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let line = valid.iter().filter(|&&c| c == b'\n').count() + 1;
            let tail = valid.rsplit(|&c| c == b'\n').next().unwrap_or(valid);
            let column = String::from_utf8_lossy(tail).chars().count() + 1;
            Err(parse_error(line, column, "invalid UTF-8"))
        }
    }
}

fn write_side(out: &mut String, species: &[String], side: &[(usize, u32)]) {
    if side.is_empty() {
        out.push('0');
        return;
    }
    for (i, &(s, c)) in side.iter().enumerate() {
        if i > 0 {
            out.push_str(" + ");
        }
        if c != 1 {
            let _ = write!(out, "{c} ");
        }
        out.push_str(&species[s]);
    }
}

/// Canonical `.rxn` text for a network and its initial state.
pub fn serialize_model<S: Real>(network: &ReactionNetwork<S>, initial: &[i64], observables: &Observables<S>) -> String {
    let species = network.species();
    let params = network.parameters();
    let mut out = String::new();
    for (name, x0) in species.iter().zip(initial) {
        let _ = writeln!(out, "species {name} = {x0}");
    }
    out.push('\n');
    for (name, v) in params.names().iter().zip(params.values()) {
        let _ = writeln!(out, "param {name} = {v}");
    }
    if !network.reactions().is_empty() {
        out.push('\n');
    }
    for r in network.reactions() {
        write_side(&mut out, species, r.reactants());
        out.push_str(" -> ");
        write_side(&mut out, species, r.products());
        out.push_str(" @ ");
        for (i, term) in r.rate_terms().iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            match *term {
                RateTerm::MassAction { rate } => {
                    let _ = write!(out, "massaction({})", params.names()[rate]);
                }
                RateTerm::MichaelisMenten {
                    vmax,
                    km,
                    substrate,
                    modifier,
                } => {
                    let (v, k) = (&params.names()[vmax], &params.names()[km]);
                    match modifier {
                        None if r.reactants() == [(substrate, 1)] => {
                            let _ = write!(out, "mm({v}, {k})");
                        }
                        None => {
                            let _ = write!(out, "mm({v}, {k}, {})", species[substrate]);
                        }
                        Some(m) => {
                            let _ = write!(out, "mm({v}, {k}, {}, {})", species[substrate], species[m]);
                        }
                    }
                }
            }
        }
        out.push('\n');
    }
    if !observables.is_empty() {
        out.push('\n');
    }
    for (name, weights) in observables.names().iter().zip(observables.weights()) {
        let _ = write!(out, "observable {name} =");
        for (i, &(s, w)) in weights.iter().enumerate() {
            let sign = if w < S::zero() { "-" } else { "+" };
            let mag = w.abs();
            match (i, sign) {
                (0, "-") => out.push_str(" -"),
                (0, _) => {}
                _ => {
                    let _ = write!(out, " {sign}");
                }
            }
            if mag == S::one() {
                let _ = write!(out, " {}", species[s]);
            } else {
                let _ = write!(out, " {mag} {}", species[s]);
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{birth_death, p53};

    const BIRTH_DEATH: &str =
        "species X = 0\nparam b = 10\nparam d = 1\n0 -> X @ massaction(b)\nX -> 0 @ massaction(d)\n";

    fn location(e: Error) -> (usize, usize) {
        match e {
            Error::Parse { line, column, .. } => (line, column),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn birth_death_text_propensities() {
        let doc = parse_model::<f64>(BIRTH_DEATH).unwrap();
        assert_eq!(
            doc.network.propensities(doc.network.theta(), &[7]).unwrap(),
            vec![10.0, 7.0]
        );
        assert_eq!(doc.network, birth_death(10.0, 1.0).unwrap());
        assert_eq!(doc.initial, vec![0]);
        assert!(doc.observables.is_empty());
    }

    #[test]
    fn empty_reaction_body_is_located() {
        let text = "species A = 1\nparam k = 1\nA -> @ massaction(k)\n";
        assert_eq!(location(parse_model::<f64>(text).unwrap_err()), (3, 6));
        let text = "species A = 1\nparam k = 1\nA -> 0 @\n";
        assert_eq!(location(parse_model::<f64>(text).unwrap_err()).0, 3);
        let text = "species A = 1\n -> \n";
        assert_eq!(location(parse_model::<f64>(text).unwrap_err()), (2, 2));
    }

    #[test]
    fn declaration_errors() {
        let dup = "species A = 1\nparam A = 2\n";
        assert_eq!(location(parse_model::<f64>(dup).unwrap_err()), (2, 7));
        let undeclared = "species A = 1\nA -> 0 @ massaction(k)\n";
        assert_eq!(location(parse_model::<f64>(undeclared).unwrap_err()), (2, 21));
        let nonpositive = "param k = -0.5\n";
        assert_eq!(location(parse_model::<f64>(nonpositive).unwrap_err()), (1, 11));
        let zero = "param k = 0\n";
        assert!(parse_model::<f64>(zero).is_err());
        let real_count = "species A = 2.5\n";
        assert_eq!(location(parse_model::<f64>(real_count).unwrap_err()), (1, 13));
        let wrong_kind = "species A = 1\nparam k = 1\nk -> A @ massaction(k)\n";
        assert_eq!(location(parse_model::<f64>(wrong_kind).unwrap_err()), (3, 1));
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let text = "# header\n\nspecies X = 0   # trailing\nparam b = 10\nparam d = 1\n  0->X@massaction(b)\nX -> 0 @ massaction( d )\n";
        assert_eq!(
            parse_model::<f64>(text).unwrap().network,
            birth_death(10.0, 1.0).unwrap()
        );
    }

    #[test]
    fn mm_clause_is_emitted() {
        let text = "species A = 5\nspecies B = 0\nparam V7 = 2\nparam K7 = 3\nA -> B @ mm(V7, K7)\n";
        let doc = parse_model::<f64>(text).unwrap();
        let out = serialize_model(&doc.network, &doc.initial, &doc.observables);
        assert!(out.contains("A -> B @ mm(V7, K7)\n"), "{out}");
        assert_eq!(parse_model::<f64>(&out).unwrap(), doc);
    }

    #[test]
    fn mm_without_single_reactant_needs_substrate() {
        let text = "species A = 5\nparam V = 2\nparam K = 3\n0 -> A @ mm(V, K)\n";
        assert!(parse_model::<f64>(text).is_err());
        let text = "species A = 5\nparam V = 2\nparam K = 3\n0 -> A @ mm(V, K, A)\n";
        let doc = parse_model::<f64>(text).unwrap();
        let out = serialize_model(&doc.network, &doc.initial, &doc.observables);
        assert!(out.contains("mm(V, K, A)"));
    }

    #[test]
    fn observables_parse_and_round_trip() {
        let text = format!("{BIRTH_DEATH}observable twice = 2 X\nobservable neg = -X + 0.5 * X\n");
        let doc = parse_model::<f64>(&text).unwrap();
        assert_eq!(doc.observables.weights()[0], vec![(0, 2.0)]);
        assert_eq!(doc.observables.weights()[1], vec![(0, -1.0), (0, 0.5)]);
        let out = serialize_model(&doc.network, &doc.initial, &doc.observables);
        assert_eq!(parse_model::<f64>(&out).unwrap(), doc);
    }

    #[test]
    fn p53_round_trip_is_fixed_point() {
        let net = p53::<f64>().unwrap();
        let empty = Observables::new(vec![], vec![]).unwrap();
        let text = serialize_model(&net, &[0, 0, 0], &empty);
        let doc = parse_model::<f64>(&text).unwrap();
        assert_eq!(doc.network, net);
        assert_eq!(serialize_model(&doc.network, &doc.initial, &doc.observables), text);
    }

    #[test]
    fn invalid_utf8_is_located() {
        let bytes = b"species A = 1\nspe\xffcies";
        assert_eq!(location(parse_model_bytes::<f64>(bytes).unwrap_err()), (2, 4));
    }
}
