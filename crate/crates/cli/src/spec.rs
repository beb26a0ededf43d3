//! The declarative input format and its recursive-descent parser.
//!
//! Grammar (EBNF):
//!
//! ```text
//! document := stmt*
//! stmt     := "coords" ident+
//!           | "params" ident+
//!           | "field" ident "dims" ("scalar" | "matrix") "deps" ident* ["constant"]
//!           | "poles" ident "=" "[" ident ("," ident)* "]"
//!           | "construct" ("zm" ["include_g"] | "triplet" | "laxpair" | "akns" ["tower" int])
//!           | "check" name
//!           | "option" key "=" value
//! ```
//!
//! Comments start with `#` and run to the end of the line. Identifiers may
//! contain `-` after the first character (for the `scalar-akns` check name).
//! Errors carry line and column.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for SpecError {}

const KEYWORDS: &[&str] = &[
    "coords", "params", "field", "poles", "construct", "check", "option", "dims", "deps", "constant",
    "scalar", "matrix",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub matrix: bool,
    pub deps: Vec<String>,
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Construct {
    Zm { include_g: bool },
    Triplet,
    LaxPair,
    Akns { tower: u32 },
}

impl fmt::Display for Construct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construct::Zm { include_g: false } => write!(f, "zm"),
            Construct::Zm { include_g: true } => write!(f, "zm include_g"),
            Construct::Triplet => write!(f, "triplet"),
            Construct::LaxPair => write!(f, "laxpair"),
            Construct::Akns { tower } => write!(f, "akns tower {}", tower),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckName {
    El,
    Closure,
    Mdc,
    Isospectral,
    Ghost,
    ScalarAkns,
    All,
}

impl CheckName {
    pub fn parse(s: &str) -> Option<CheckName> {
        Some(match s {
            "el" => CheckName::El,
            "closure" => CheckName::Closure,
            "mdc" => CheckName::Mdc,
            "isospectral" => CheckName::Isospectral,
            "ghost" => CheckName::Ghost,
            "scalar-akns" => CheckName::ScalarAkns,
            "all" => CheckName::All,
            _ => return None,
        })
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckName::El => "el",
            CheckName::Closure => "closure",
            CheckName::Mdc => "mdc",
            CheckName::Isospectral => "isospectral",
            CheckName::Ghost => "ghost",
            CheckName::ScalarAkns => "scalar-akns",
            CheckName::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub trials: Option<u32>,
    pub dim: Option<u32>,
    pub max_jet_order: Option<u32>,
    /// Fault-injection target for detector self-tests (`l23`).
    pub corrupt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpecDocument {
    pub coords: Vec<String>,
    pub params: Vec<String>,
    pub fields: Vec<FieldDecl>,
    pub poles: Vec<(String, Vec<String>)>,
    pub construct: Option<Construct>,
    pub checks: Vec<CheckName>,
    pub options: Options,
}

impl SpecDocument {
    pub fn pole_family(&self, key: &str) -> Option<&[String]> {
        self.poles.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice())
    }

    /// Canonical text form; parsing it back yields an equal document.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.coords.is_empty() {
            out.push_str(&format!("coords {}\n", self.coords.join(" ")));
        }
        if !self.params.is_empty() {
            out.push_str(&format!("params {}\n", self.params.join(" ")));
        }
        for f in &self.fields {
            out.push_str(&format!(
                "field {} dims {} deps {}{}\n",
                f.name,
                if f.matrix { "matrix" } else { "scalar" },
                f.deps.join(" "),
                if f.constant { " constant" } else { "" }
            ));
        }
        for (k, syms) in &self.poles {
            out.push_str(&format!("poles {} = [{}]\n", k, syms.join(", ")));
        }
        if let Some(c) = &self.construct {
            out.push_str(&format!("construct {}\n", c));
        }
        for c in &self.checks {
            out.push_str(&format!("check {}\n", c));
        }
        let o = &self.options;
        if let Some(v) = o.seed {
            out.push_str(&format!("option seed = {}\n", v));
        }
        if let Some(v) = o.trials {
            out.push_str(&format!("option trials = {}\n", v));
        }
        if let Some(v) = o.dim {
            out.push_str(&format!("option dim = {}\n", v));
        }
        if let Some(v) = o.max_jet_order {
            out.push_str(&format!("option max_jet_order = {}\n", v));
        }
        if let Some(v) = &o.corrupt {
            out.push_str(&format!("option corrupt = {}\n", v));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SpecError> {
    let mut out = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        let mut chars = line.char_indices().peekable();
        while let Some(&(idx, ch)) = chars.peek() {
            let col = idx + 1;
            if ch == '#' {
                break;
            }
            if ch.is_whitespace() {
                chars.next();
                continue;
            }
            if ch.is_ascii_alphabetic() || ch == '_' {
                let mut ident = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Spanned { tok: Tok::Ident(ident), line: lno + 1, col });
                continue;
            }
            if ch.is_ascii_digit() {
                let mut num = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_digit() {
                        num.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let v = num.parse::<u64>().map_err(|_| SpecError {
                    line: lno + 1,
                    col,
                    message: format!("integer `{}` out of range", num),
                })?;
                out.push(Spanned { tok: Tok::Int(v), line: lno + 1, col });
                continue;
            }
            if matches!(ch, '=' | '[' | ']' | ',') {
                chars.next();
                out.push(Spanned { tok: Tok::Punct(ch), line: lno + 1, col });
                continue;
            }
            return Err(SpecError { line: lno + 1, col, message: format!("unexpected character `{}`", ch) });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> SpecError {
        match self.peek().or_else(|| self.toks.last()) {
            Some(t) => SpecError { line: t.line, col: t.col, message: message.into() },
            None => SpecError { line: 1, col: 1, message: message.into() },
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), SpecError> {
        match self.next() {
            Some(Spanned { tok: Tok::Punct(p), .. }) if p == c => Ok(()),
            other => Err(match other {
                Some(t) => SpecError {
                    line: t.line,
                    col: t.col,
                    message: format!("expected `{}`, found {}", c, describe(&t.tok)),
                },
                None => self.err_here(format!("expected `{}`, found end of input", c)),
            }),
        }
    }

    /// A user symbol: an identifier that is not a reserved keyword.
    fn symbol(&mut self, what: &str) -> Result<String, SpecError> {
        match self.next() {
            Some(Spanned { tok: Tok::Ident(s), line, col }) => {
                if KEYWORDS.contains(&s.as_str()) {
                    Err(SpecError { line, col, message: format!("`{}` is a reserved word, expected {}", s, what) })
                } else {
                    Ok(s)
                }
            }
            Some(t) => Err(SpecError {
                line: t.line,
                col: t.col,
                message: format!("expected {}, found {}", what, describe(&t.tok)),
            }),
            None => Err(self.err_here(format!("expected {}, found end of input", what))),
        }
    }

    /// Greedy run of user symbols (stops at keywords or punctuation).
    fn symbol_run(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        while let Some(Spanned { tok: Tok::Ident(s), .. }) = self.peek() {
            if KEYWORDS.contains(&s.as_str()) {
                break;
            }
            out.push(s.clone());
            self.pos += 1;
        }
        out
    }

    fn int(&mut self, what: &str) -> Result<u64, SpecError> {
        match self.next() {
            Some(Spanned { tok: Tok::Int(v), .. }) => Ok(v),
            Some(t) => Err(SpecError {
                line: t.line,
                col: t.col,
                message: format!("expected {}, found {}", what, describe(&t.tok)),
            }),
            None => Err(self.err_here(format!("expected {}, found end of input", what))),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{}`", s),
        Tok::Int(v) => format!("`{}`", v),
        Tok::Punct(c) => format!("`{}`", c),
    }
}

/// Parse a document; diagnostics carry line and column.
pub fn parse_spec(text: &str) -> Result<SpecDocument, SpecError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let mut doc = SpecDocument::default();
    let mut declared: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    while let Some(t) = p.next() {
        let Tok::Ident(kw) = &t.tok else {
            return Err(SpecError {
                line: t.line,
                col: t.col,
                message: format!("expected a statement keyword, found {}", describe(&t.tok)),
            });
        };
        match kw.as_str() {
            "coords" => {
                let names = p.symbol_run();
                if names.is_empty() {
                    return Err(p.err_here("`coords` needs at least one name"));
                }
                for n in &names {
                    if !declared.insert(n.clone()) {
                        return Err(SpecError {
                            line: t.line,
                            col: t.col,
                            message: format!("duplicate declaration of `{}`", n),
                        });
                    }
                }
                doc.coords.extend(names);
            }
            "params" => {
                let names = p.symbol_run();
                if names.is_empty() {
                    return Err(p.err_here("`params` needs at least one name"));
                }
                for n in &names {
                    if !declared.insert(n.clone()) {
                        return Err(SpecError {
                            line: t.line,
                            col: t.col,
                            message: format!("duplicate declaration of `{}`", n),
                        });
                    }
                }
                doc.params.extend(names);
            }
            "field" => {
                let name = p.symbol("a field name")?;
                if !declared.insert(name.clone()) {
                    return Err(SpecError {
                        line: t.line,
                        col: t.col,
                        message: format!("duplicate declaration of `{}`", name),
                    });
                }
                match p.next() {
                    Some(Spanned { tok: Tok::Ident(k), .. }) if k == "dims" => {}
                    _ => return Err(p.err_here("expected `dims`")),
                }
                let matrix = match p.next() {
                    Some(Spanned { tok: Tok::Ident(k), .. }) if k == "scalar" => false,
                    Some(Spanned { tok: Tok::Ident(k), .. }) if k == "matrix" => true,
                    _ => return Err(p.err_here("expected `scalar` or `matrix`")),
                };
                match p.next() {
                    Some(Spanned { tok: Tok::Ident(k), .. }) if k == "deps" => {}
                    _ => return Err(p.err_here("expected `deps`")),
                }
                let deps = p.symbol_run();
                let constant = matches!(p.peek(), Some(Spanned { tok: Tok::Ident(k), .. }) if k == "constant");
                if constant {
                    p.pos += 1;
                }
                for d in &deps {
                    if !doc.coords.contains(d) {
                        return Err(SpecError {
                            line: t.line,
                            col: t.col,
                            message: format!("field `{}` depends on undeclared coordinate `{}`", name, d),
                        });
                    }
                }
                if constant && !deps.is_empty() {
                    return Err(SpecError {
                        line: t.line,
                        col: t.col,
                        message: format!("constant field `{}` must have an empty dependency list", name),
                    });
                }
                doc.fields.push(FieldDecl { name, matrix, deps, constant });
            }
            "poles" => {
                let family = p.symbol("a pole family name (U, V or W)")?;
                if doc.pole_family(&family).is_some() {
                    return Err(SpecError {
                        line: t.line,
                        col: t.col,
                        message: format!("pole family `{}` declared twice", family),
                    });
                }
                p.expect_punct('=')?;
                p.expect_punct('[')?;
                let mut syms = vec![p.symbol("a pole symbol")?];
                loop {
                    match p.peek() {
                        Some(Spanned { tok: Tok::Punct(','), .. }) => {
                            p.pos += 1;
                            syms.push(p.symbol("a pole symbol")?);
                        }
                        _ => break,
                    }
                }
                p.expect_punct(']')?;
                let mut seen = std::collections::BTreeSet::new();
                for s in &syms {
                    if !seen.insert(s.clone()) {
                        return Err(SpecError {
                            line: t.line,
                            col: t.col,
                            message: format!("duplicate pole symbol `{}`", s),
                        });
                    }
                }
                doc.poles.push((family, syms));
            }
            "construct" => {
                if doc.construct.is_some() {
                    return Err(SpecError {
                        line: t.line,
                        col: t.col,
                        message: "a document holds exactly one construction".into(),
                    });
                }
                let kind = p.symbol("a construction (zm, triplet, laxpair, akns)")?;
                let c = match kind.as_str() {
                    "zm" => {
                        let include_g =
                            matches!(p.peek(), Some(Spanned { tok: Tok::Ident(k), .. }) if k == "include_g");
                        if include_g {
                            p.pos += 1;
                        }
                        Construct::Zm { include_g }
                    }
                    "triplet" => Construct::Triplet,
                    "laxpair" => Construct::LaxPair,
                    "akns" => {
                        let mut tower = 4u32;
                        if matches!(p.peek(), Some(Spanned { tok: Tok::Ident(k), .. }) if k == "tower") {
                            p.pos += 1;
                            tower = p.int("a tower height")? as u32;
                        }
                        Construct::Akns { tower }
                    }
                    other => {
                        return Err(SpecError {
                            line: t.line,
                            col: t.col,
                            message: format!("unknown construction `{}`", other),
                        })
                    }
                };
                doc.construct = Some(c);
            }
            "check" => {
                let name = p.symbol("a check name")?;
                match CheckName::parse(&name) {
                    Some(c) => doc.checks.push(c),
                    None => {
                        return Err(SpecError {
                            line: t.line,
                            col: t.col,
                            message: format!(
                                "unknown check `{}` (expected el, closure, mdc, isospectral, ghost, scalar-akns or all)",
                                name
                            ),
                        })
                    }
                }
            }
            "option" => {
                let key = p.symbol("an option key")?;
                p.expect_punct('=')?;
                match key.as_str() {
                    "seed" => doc.options.seed = Some(p.int("a seed")?),
                    "trials" => doc.options.trials = Some(p.int("a trial count")? as u32),
                    "dim" => doc.options.dim = Some(p.int("a dimension")? as u32),
                    "max_jet_order" => doc.options.max_jet_order = Some(p.int("a jet order")? as u32),
                    "corrupt" => doc.options.corrupt = Some(p.symbol("a corruption target")?),
                    other => {
                        return Err(SpecError {
                            line: t.line,
                            col: t.col,
                            message: format!("unknown option `{}`", other),
                        })
                    }
                }
            }
            other => {
                return Err(SpecError {
                    line: t.line,
                    col: t.col,
                    message: format!("unknown statement `{}`", other),
                })
            }
        }
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_triplet_spec_parses() {
        let text = "\
# minimal triplet
coords xi eta nu
params a b c
poles U = [a]
poles V = [b]
poles W = [c]
construct triplet
check closure
";
        let doc = parse_spec(text).unwrap();
        assert_eq!(doc.coords, vec!["xi", "eta", "nu"]);
        assert_eq!(doc.pole_family("U").unwrap(), &["a".to_string()][..]);
        assert_eq!(doc.construct, Some(Construct::Triplet));
        assert_eq!(doc.checks, vec![CheckName::Closure]);
    }

    #[test]
    fn empty_document_is_valid() {
        let doc = parse_spec("").unwrap();
        assert_eq!(doc, SpecDocument::default());
        let doc2 = parse_spec("# only a comment\n").unwrap();
        assert_eq!(doc2, SpecDocument::default());
    }

    #[test]
    fn duplicate_pole_symbol_is_an_error() {
        let err = parse_spec("params a\npoles U = [a, a]\n").unwrap_err();
        assert!(err.message.contains("duplicate pole symbol"), "{}", err);
        assert_eq!(err.line, 2);
    }

    #[test]
    fn duplicate_declaration_is_an_error() {
        let err = parse_spec("coords xi xi\n").unwrap_err();
        assert!(err.message.contains("duplicate declaration"), "{}", err);
    }

    #[test]
    fn syntax_errors_carry_location() {
        let err = parse_spec("coords xi\npoles U [a]\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("expected `=`"), "{}", err);
        let err = parse_spec("bogus xi\n").unwrap_err();
        assert!(err.message.contains("unknown statement"), "{}", err);
    }

    #[test]
    fn second_construct_is_rejected() {
        let err = parse_spec("construct triplet\nconstruct zm\n").unwrap_err();
        assert!(err.message.contains("exactly one construction"), "{}", err);
    }

    #[test]
    fn print_parse_round_trip() {
        let text = "\
coords xi eta nu
params a1 a2 b lambda
field extra dims matrix deps xi eta
poles U = [a1, a2]
poles V = [b]
poles W = [lambda]
construct laxpair
check ghost
check closure
option seed = 11
option trials = 3
option dim = 2
";
        let doc = parse_spec(text).unwrap();
        let printed = doc.to_text();
        let reparsed = parse_spec(&printed).unwrap();
        assert_eq!(doc, reparsed);
    }

    #[test]
    fn field_with_unknown_dependency_is_rejected() {
        let err = parse_spec("coords xi\nfield f dims matrix deps eta\n").unwrap_err();
        assert!(err.message.contains("undeclared coordinate"), "{}", err);
    }

    #[test]
    fn akns_tower_argument() {
        let doc = parse_spec("coords x1 x2 x3\nconstruct akns tower 5\ncheck scalar-akns\n").unwrap();
        assert_eq!(doc.construct, Some(Construct::Akns { tower: 5 }));
        assert_eq!(doc.checks, vec![CheckName::ScalarAkns]);
    }
}
