//! Recursive-descent parser for `.scn` scenario sources.
//!
//! ```text
//! scenario   := "scenario" STRING "{" ego actor+ layout salient? stimulus group request? "}"
//! ego        := "ego" "{" stmt* "}"
//! actor      := "actor" KIND "{" stmt* "}"
//! stmt       := "maneuver" IDENT | "from" IDENT "to" IDENT | "placement" IDENT
//!             | IDENT ":" value
//! layout     := "layout" IDENT
//! salient    := "salient" "{" (IDENT ("," IDENT)*)? "}"
//! stimulus   := "stimulus" "{" (IDENT ":" value)* "}"
//! group      := "group" IDENT
//! request    := "request" STRING
//! value      := NUM | "range" "(" NUM "," NUM "," "step" NUM ")"
//! ```
//! `#` starts a comment that runs to the end of the line.

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Tok, Token};
use super::{default_locations, default_placement, ParseError, SourcePos};
use crate::scenario::{
    ActorKind, ActorSpec, FunctionalScenario, Location, LogicalScenario, Maneuver, ManeuverSpec,
    ParamRange, Placement, SalientFactor, Unit,
};

/// A parsed scenario plus the source position of each named element.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScenario {
    pub logical: LogicalScenario,
    /// Keys: `scenario`, `ego`, `actor0`, `layout`, `group`, and every parameter name.
    pub positions: BTreeMap<String, SourcePos>,
}

impl ParsedScenario {
    pub fn functional(&self) -> &FunctionalScenario {
        &self.logical.functional
    }
}

/// Parameter names accepted in each block, with their units.
fn param_unit(block: Block, name: &str) -> Option<Unit> {
    match (block, name) {
        (Block::Ego, "speed") | (Block::Actor, "speed") => Some(Unit::MetersPerSecond),
        (Block::Actor, "time_offset") => Some(Unit::Seconds),
        (Block::Actor, "decel") => Some(Unit::MetersPerSecondSquared),
        (Block::Stimulus, "trigger_ttc") | (Block::Stimulus, "ramp_up") => Some(Unit::Seconds),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Block {
    Ego,
    Actor,
    Stimulus,
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    positions: BTreeMap<String, SourcePos>,
    ranges: BTreeMap<String, ParamRange>,
}

/// Parses one scenario from DSL source.
pub fn parse_functional(src: &str) -> Result<ParsedScenario, ParseError> {
    let mut p = Parser {
        tokens: tokenize(src)?,
        idx: 0,
        positions: BTreeMap::new(),
        ranges: BTreeMap::new(),
    };
    let functional = p.scenario()?;
    p.expect(Tok::Eof)?;
    Ok(ParsedScenario {
        logical: LogicalScenario {
            functional,
            parameter_ranges: p.ranges,
        },
        positions: p.positions,
    })
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.idx]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.idx].clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::syntax(
            t.pos,
            format!("expected {expected}, found {}", t.tok.describe()),
        )
    }

    fn expect(&mut self, tok: Tok) -> Result<SourcePos, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<SourcePos, ParseError> {
        if self.is_keyword(kw) {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, SourcePos), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                Ok((s, self.bump().pos))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn string(&mut self) -> Result<(String, SourcePos), ParseError> {
        match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                Ok((s, self.bump().pos))
            }
            _ => Err(self.unexpected("string")),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek().tok {
            Tok::Num(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn vocab<T>(
        &mut self,
        category: &'static str,
        lookup: impl Fn(&str) -> Option<T>,
    ) -> Result<(T, SourcePos), ParseError> {
        let (word, pos) = self.ident()?;
        lookup(&word)
            .map(|v| (v, pos))
            .ok_or(ParseError::UnknownToken {
                line: pos.line,
                col: pos.col,
                category,
                token: word,
            })
    }

    fn scenario(&mut self) -> Result<FunctionalScenario, ParseError> {
        let pos = self.keyword("scenario")?;
        self.positions.insert("scenario".into(), pos);
        let (id, id_pos) = self.string()?;
        if id.trim().is_empty() {
            return Err(ParseError::syntax(
                id_pos,
                "scenario name must not be empty",
            ));
        }
        self.expect(Tok::LBrace)?;

        let ego_pos = self.keyword("ego")?;
        self.positions.insert("ego".into(), ego_pos);
        let (ego_maneuver, _) = self.maneuver_block(Block::Ego, "ego", ego_pos)?;

        let mut actors = Vec::new();
        while self.is_keyword("actor") {
            let pos = self.bump().pos;
            let key = format!("actor{}", actors.len());
            self.positions.insert(key.clone(), pos);
            let (kind, _) = self.vocab("actor kind", ActorKind::from_token)?;
            let (maneuver, placement) = self.maneuver_block(Block::Actor, &key, pos)?;
            actors.push(ActorSpec {
                kind,
                maneuver,
                placement: placement.unwrap_or_else(|| default_placement(maneuver.maneuver)),
            });
        }
        if actors.is_empty() {
            return Err(self.unexpected("`actor`"));
        }

        let pos = self.keyword("layout")?;
        self.positions.insert("layout".into(), pos);
        let (layout_class, _) = self.ident()?;

        let mut salient_factors = BTreeSet::new();
        if self.is_keyword("salient") {
            let pos = self.bump().pos;
            self.positions.insert("salient".into(), pos);
            self.expect(Tok::LBrace)?;
            if self.peek().tok != Tok::RBrace {
                loop {
                    let (f, _) = self.vocab("salient factor", SalientFactor::from_token)?;
                    salient_factors.insert(f);
                    if self.peek().tok == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RBrace)?;
        }

        let pos = self.keyword("stimulus")?;
        self.positions.insert("stimulus".into(), pos);
        self.expect(Tok::LBrace)?;
        while self.peek().tok != Tok::RBrace {
            self.param(Block::Stimulus, "stimulus")?;
        }
        self.expect(Tok::RBrace)?;

        let pos = self.keyword("group")?;
        self.positions.insert("group".into(), pos);
        let (conflict_type, _) = self.ident()?;

        let test_request = if self.is_keyword("request") {
            self.bump();
            Some(self.string()?.0)
        } else {
            None
        };
        self.expect(Tok::RBrace)?;

        Ok(FunctionalScenario {
            id,
            ego_maneuver,
            actors,
            layout_class,
            salient_factors,
            conflict_type,
            test_request,
        })
    }

    fn maneuver_block(
        &mut self,
        block: Block,
        prefix: &str,
        block_pos: SourcePos,
    ) -> Result<(ManeuverSpec, Option<Placement>), ParseError> {
        self.expect(Tok::LBrace)?;
        let mut maneuver = None;
        let mut locations = None;
        let mut placement = None;
        loop {
            match &self.peek().tok {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Ident(kw) if kw == "maneuver" => {
                    self.bump();
                    maneuver = Some(self.vocab("maneuver", Maneuver::from_token)?.0);
                }
                Tok::Ident(kw) if kw == "from" => {
                    self.bump();
                    let (from, _) = self.vocab("location", Location::from_token)?;
                    self.keyword("to")?;
                    let (to, _) = self.vocab("location", Location::from_token)?;
                    locations = Some((from, to));
                }
                Tok::Ident(kw) if kw == "placement" && block == Block::Actor => {
                    self.bump();
                    placement = Some(self.vocab("placement", Placement::from_token)?.0);
                }
                Tok::Ident(_) => self.param(block, prefix)?,
                _ => return Err(self.unexpected("statement or `}`")),
            }
        }
        let maneuver =
            maneuver.ok_or_else(|| ParseError::syntax(block_pos, "block is missing `maneuver`"))?;
        let (start, end) = locations.unwrap_or_else(|| {
            if block == Block::Ego {
                (Location::WithinLane, Location::WithinLane)
            } else {
                default_locations(maneuver)
            }
        });
        Ok((ManeuverSpec::new(maneuver, start, end), placement))
    }

    fn param(&mut self, block: Block, prefix: &str) -> Result<(), ParseError> {
        let (name, pos) = self.ident()?;
        let unit = param_unit(block, &name).ok_or(ParseError::UnknownToken {
            line: pos.line,
            col: pos.col,
            category: "parameter",
            token: name.clone(),
        })?;
        self.expect(Tok::Colon)?;
        let range = if self.is_keyword("range") {
            self.bump();
            self.expect(Tok::LParen)?;
            let min = self.number()?;
            self.expect(Tok::Comma)?;
            let max = self.number()?;
            self.expect(Tok::Comma)?;
            self.keyword("step")?;
            let step = self.number()?;
            self.expect(Tok::RParen)?;
            ParamRange {
                min,
                max,
                step,
                unit,
            }
        } else {
            ParamRange::point(self.number()?, unit)
        };
        let key = format!("{prefix}.{name}");
        if self.ranges.insert(key.clone(), range).is_some() {
            return Err(ParseError::syntax(
                pos,
                format!("duplicate parameter `{name}`"),
            ));
        }
        self.positions.insert(key, pos);
        Ok(())
    }
}
