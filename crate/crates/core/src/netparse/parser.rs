//! Line-oriented parser for the reaction-network DSL.

use std::collections::HashMap;

use thiserror::Error;

use super::network::{Chemostat, ReactionDecl, ReactionNetwork};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("expected {expected}, found `{found}`")]
    Syntax { expected: String, found: String },
    #[error("undeclared identifier `{0}`")]
    Undeclared(String),
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("reaction `{0}` has zero net change in internal species")]
    ZeroNetChange(String),
    #[error("negative rate constant `{0}`")]
    NegativeRate(String),
    #[error("reaction `{0}` has both rate constants zero")]
    NoRate(String),
    #[error("invalid chemostat concentration `{0}`")]
    BadConcentration(String),
    #[error("network declares no {0}")]
    Empty(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(&'static str),
    End,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Number(s) => s.clone(),
            Tok::Sym(s) => s.to_string(),
            Tok::End => "end of line".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex_line(src: &str, line: usize) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), line, col });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent only when followed by digits, so `2e` stays `2` `e`
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
            out.push(Spanned { tok: Tok::Number(chars[start..i].iter().collect()), line, col });
            continue;
        }
        if c == '<' && chars.get(i + 1) == Some(&'=') && chars.get(i + 2) == Some(&'>') {
            out.push(Spanned { tok: Tok::Sym("<=>"), line, col });
            i += 3;
            continue;
        }
        let sym = match c {
            ',' => ",",
            '=' => "=",
            ':' => ":",
            ';' => ";",
            '+' => "+",
            '-' => "-",
            _ => {
                return Err(ParseError {
                    line,
                    col,
                    kind: ParseErrorKind::Syntax { expected: "a token".into(), found: c.to_string() },
                })
            }
        };
        out.push(Spanned { tok: Tok::Sym(sym), line, col });
        i += 1;
    }
    out.push(Spanned { tok: Tok::End, line, col: chars.len() + 1 });
    Ok(out)
}

struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError {
            line: t.line,
            col: t.col,
            kind: ParseErrorKind::Syntax { expected: expected.to_string(), found: t.tok.text() },
        }
    }

    fn ident(&mut self) -> Result<(String, usize, usize), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let t = self.bump();
                Ok((s, t.line, t.col))
            }
            _ => Err(self.err("identifier")),
        }
    }

    fn sym(&mut self, s: &'static str) -> Result<(), ParseError> {
        if self.peek().tok == Tok::Sym(s) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(&format!("`{s}`")))
        }
    }

    fn at_sym(&self, s: &'static str) -> bool {
        self.peek().tok == Tok::Sym(s)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.err(&format!("`{kw}`"))),
        }
    }

    /// A float, optionally signed so negative rates reach the semantic check.
    fn float(&mut self) -> Result<(f64, String, usize, usize), ParseError> {
        let neg = self.at_sym("-");
        if neg {
            self.bump();
        }
        match &self.peek().tok {
            Tok::Number(s) => {
                let text = if neg { format!("-{s}") } else { s.clone() };
                let v: f64 = text.parse().map_err(|_| self.err("number"))?;
                let t = self.bump();
                Ok((v, text, t.line, t.col))
            }
            _ => Err(self.err("number")),
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        if self.peek().tok == Tok::End {
            Ok(())
        } else {
            Err(self.err("end of line"))
        }
    }
}

struct RawTerm {
    coeff: u32,
    name: String,
    line: usize,
    col: usize,
}

struct RawReaction {
    label: Option<(String, usize, usize)>,
    lhs: Vec<RawTerm>,
    rhs: Vec<RawTerm>,
    k_plus: f64,
    k_minus: f64,
    line: usize,
    col: usize,
    rate_pos: [(usize, usize, String); 2],
}

fn parse_side(cur: &mut Cursor) -> Result<Vec<RawTerm>, ParseError> {
    if let Tok::Number(s) = &cur.peek().tok {
        if s == "0" && !matches!(cur.toks[cur.pos + 1].tok, Tok::Ident(_)) {
            cur.bump();
            return Ok(Vec::new());
        }
    }
    let mut terms = Vec::new();
    loop {
        let coeff = match &cur.peek().tok {
            Tok::Number(s) => {
                let c: u32 = s.parse().map_err(|_| cur.err("integer coefficient"))?;
                if c == 0 {
                    return Err(cur.err("positive coefficient"));
                }
                cur.bump();
                c
            }
            _ => 1,
        };
        let (name, line, col) = cur.ident()?;
        terms.push(RawTerm { coeff, name, line, col });
        if cur.at_sym("+") {
            cur.bump();
        } else {
            break;
        }
    }
    Ok(terms)
}

fn parse_reaction(cur: &mut Cursor, line: usize, col: usize) -> Result<RawReaction, ParseError> {
    let mut label = None;
    if let (Tok::Ident(_), Tok::Sym(":")) = (&cur.peek().tok, &cur.toks[cur.pos + 1].tok) {
        label = Some(cur.ident()?);
        cur.sym(":")?;
    }
    let lhs = parse_side(cur)?;
    cur.sym("<=>")?;
    let rhs = parse_side(cur)?;
    cur.sym(";")?;
    cur.keyword("kplus")?;
    cur.sym("=")?;
    let (k_plus, tp, lp, cp) = cur.float()?;
    cur.sym(",")?;
    cur.keyword("kminus")?;
    cur.sym("=")?;
    let (k_minus, tm, lm, cm) = cur.float()?;
    cur.end()?;
    Ok(RawReaction { label, lhs, rhs, k_plus, k_minus, line, col, rate_pos: [(lp, cp, tp), (lm, cm, tm)] })
}

/// Parse DSL source into a validated network with effective rates folded in.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, ParseError> {
    let mut name: Option<String> = None;
    let mut species: Vec<String> = Vec::new();
    let mut chemostats: Vec<Chemostat> = Vec::new();
    let mut raw: Vec<RawReaction> = Vec::new();
    let mut declared: HashMap<String, ()> = HashMap::new();
    let dup = |n: &str, line, col| ParseError { line, col, kind: ParseErrorKind::Duplicate(n.to_string()) };

    for (idx, src) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = lex_line(src, line)?;
        if toks[0].tok == Tok::End {
            continue;
        }
        let mut cur = Cursor { toks, pos: 0 };
        let (kw, kl, kc) = cur.ident().map_err(|_| cur.err("`network`, `species`, `chemostat` or `reaction`"))?;
        match kw.as_str() {
            "network" => {
                if name.is_some() {
                    return Err(dup("network", kl, kc));
                }
                let (n, _, _) = cur.ident()?;
                cur.end()?;
                name = Some(n);
            }
            "species" => loop {
                let (s, l, c) = cur.ident()?;
                if declared.insert(s.clone(), ()).is_some() {
                    return Err(dup(&s, l, c));
                }
                species.push(s);
                if cur.at_sym(",") {
                    cur.bump();
                } else {
                    cur.end()?;
                    break;
                }
            },
            "chemostat" => loop {
                let (s, l, c) = cur.ident()?;
                if declared.insert(s.clone(), ()).is_some() {
                    return Err(dup(&s, l, c));
                }
                cur.sym("=")?;
                let (v, vt, vl, vc) = cur.float()?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ParseError { line: vl, col: vc, kind: ParseErrorKind::BadConcentration(vt) });
                }
                chemostats.push(Chemostat { name: s, value: v });
                if cur.at_sym(",") {
                    cur.bump();
                } else {
                    cur.end()?;
                    break;
                }
            },
            "reaction" => raw.push(parse_reaction(&mut cur, kl, kc)?),
            other => {
                return Err(ParseError {
                    line: kl,
                    col: kc,
                    kind: ParseErrorKind::Syntax {
                        expected: "`network`, `species`, `chemostat` or `reaction`".into(),
                        found: other.to_string(),
                    },
                })
            }
        }
    }

    if species.is_empty() {
        return Err(ParseError { line: 1, col: 1, kind: ParseErrorKind::Empty("species") });
    }
    if raw.is_empty() {
        return Err(ParseError { line: 1, col: 1, kind: ParseErrorKind::Empty("reactions") });
    }

    let n = species.len();
    let explicit: Vec<String> = raw.iter().filter_map(|r| r.label.as_ref().map(|l| l.0.clone())).collect();
    let mut labels: Vec<String> = Vec::new();
    let mut auto = 0usize;
    let mut reactions = Vec::with_capacity(raw.len());
    for r in raw {
        let label = match &r.label {
            Some((l, ll, lc)) => {
                if labels.contains(l) {
                    return Err(dup(l, *ll, *lc));
                }
                l.clone()
            }
            None => loop {
                auto += 1;
                let cand = format!("r{auto}");
                if !explicit.contains(&cand) && !labels.contains(&cand) {
                    break cand;
                }
            },
        };
        labels.push(label.clone());
        let mut nu_plus = vec![0u32; n];
        let mut nu_minus = vec![0u32; n];
        let mut chemo_plus = vec![0u32; chemostats.len()];
        let mut chemo_minus = vec![0u32; chemostats.len()];
        for (terms, internal, chemo) in
            [(&r.lhs, &mut nu_plus, &mut chemo_plus), (&r.rhs, &mut nu_minus, &mut chemo_minus)]
        {
            for t in terms.iter() {
                if let Some(i) = species.iter().position(|s| *s == t.name) {
                    internal[i] += t.coeff;
                } else if let Some(i) = chemostats.iter().position(|c| c.name == t.name) {
                    chemo[i] += t.coeff;
                } else {
                    return Err(ParseError {
                        line: t.line,
                        col: t.col,
                        kind: ParseErrorKind::Undeclared(t.name.clone()),
                    });
                }
            }
        }
        for (k, (l, c, text)) in [r.k_plus, r.k_minus].iter().zip(&r.rate_pos) {
            if *k < 0.0 || !k.is_finite() {
                return Err(ParseError { line: *l, col: *c, kind: ParseErrorKind::NegativeRate(text.clone()) });
            }
        }
        if r.k_plus + r.k_minus <= 0.0 {
            return Err(ParseError { line: r.line, col: r.col, kind: ParseErrorKind::NoRate(label) });
        }
        if nu_plus == nu_minus {
            return Err(ParseError { line: r.line, col: r.col, kind: ParseErrorKind::ZeroNetChange(label) });
        }
        reactions.push(ReactionDecl {
            label,
            nu_plus,
            nu_minus,
            chemo_plus,
            chemo_minus,
            k_plus: r.k_plus,
            k_minus: r.k_minus,
            k_plus_eff: 0.0,
            k_minus_eff: 0.0,
        });
    }
    let mut net = ReactionNetwork { name: name.unwrap_or_else(|| "network".into()), species, chemostats, reactions };
    net.refold();
    Ok(net)
}
