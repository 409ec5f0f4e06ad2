//! Rules and matrix text formats.
//!
//! Rules file:
//!
//! ```text
//! interaction walk
//! actions random-walk deactivate-none
//! end
//! ```
//!
//! Matrix file, one entry per line:
//!
//! ```text
//! ; source-family interaction-name priority cardinality <target-family distance>
//! particles cooc 1 1 walkers 2
//! ```
//!
//! Lines whose first non-blank character is `;` are comments in both formats.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{Deactivation, EntryTarget, InteractionRule, MatrixEntry, Movement};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown action {token:?}")]
    UnknownAction { line: usize, token: String },
    #[error("line {line}: expected 4 or 6 fields, found {found}")]
    Arity { line: usize, found: usize },
    #[error("line {line}: {field} {value:?} is not a valid number")]
    NotNumeric {
        line: usize,
        field: &'static str,
        value: String,
    },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Malformed { line, .. }
            | ParseError::UnknownAction { line, .. }
            | ParseError::Arity { line, .. }
            | ParseError::NotNumeric { line, .. } => *line,
        }
    }
}

/// Non-blank, non-comment lines with 1-based line numbers.
pub(crate) fn content_lines<'a>(
    text: &'a str,
    comment: char,
) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let t = raw.trim();
        if t.is_empty() || t.starts_with(comment) {
            None
        } else {
            Some((i + 1, t.split_whitespace().collect()))
        }
    })
}

fn malformed(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

pub fn parse_rules(text: &str) -> Result<Vec<InteractionRule>, ParseError> {
    enum State {
        Idle,
        Named(String),
        Acting(InteractionRule),
    }

    let mut rules = Vec::new();
    let mut state = State::Idle;
    let mut last_line = 0;
    for (line, fields) in content_lines(text, ';') {
        last_line = line;
        state = match (state, fields.as_slice()) {
            (State::Idle, ["interaction", name]) => State::Named((*name).to_string()),
            (State::Idle, _) => return Err(malformed(line, "expected `interaction <name>`")),
            (State::Named(name), ["actions", movement, deactivation]) => {
                let movement =
                    Movement::from_token(movement).ok_or_else(|| ParseError::UnknownAction {
                        line,
                        token: (*movement).to_string(),
                    })?;
                let deactivation = Deactivation::from_token(deactivation).ok_or_else(|| {
                    ParseError::UnknownAction {
                        line,
                        token: (*deactivation).to_string(),
                    }
                })?;
                State::Acting(InteractionRule {
                    name,
                    movement,
                    deactivation,
                })
            }
            (State::Named(_), _) => {
                return Err(malformed(
                    line,
                    "expected `actions <movement> <deactivation>`",
                ))
            }
            (State::Acting(rule), ["end"]) => {
                rules.push(rule);
                State::Idle
            }
            (State::Acting(_), _) => return Err(malformed(line, "expected `end`")),
        };
    }
    match state {
        State::Idle => Ok(rules),
        _ => Err(malformed(last_line, "unterminated interaction block")),
    }
}

fn number<T: FromStr>(line: usize, field: &'static str, value: &str) -> Result<T, ParseError> {
    value.parse().map_err(|_| ParseError::NotNumeric {
        line,
        field,
        value: value.to_string(),
    })
}

pub fn parse_matrix(text: &str) -> Result<Vec<MatrixEntry>, ParseError> {
    content_lines(text, ';')
        .map(|(line, f)| {
            if f.len() != 4 && f.len() != 6 {
                return Err(ParseError::Arity {
                    line,
                    found: f.len(),
                });
            }
            let target = if f.len() == 6 {
                let distance: f64 = number(line, "distance", f[5])?;
                if !distance.is_finite() {
                    return Err(ParseError::NotNumeric {
                        line,
                        field: "distance",
                        value: f[5].to_string(),
                    });
                }
                Some(EntryTarget {
                    family: f[4].to_string(),
                    distance,
                })
            } else {
                None
            };
            Ok(MatrixEntry {
                source: f[0].to_string(),
                rule: f[1].to_string(),
                priority: number(line, "priority", f[2])?,
                cardinality: number(line, "cardinality", f[3])?,
                target,
            })
        })
        .collect()
}

pub const MATRIX_HEADER: &str =
    "; source-family interaction-name priority cardinality <target-family distance>";

/// Canonical matrix text; re-parses to the same entries.
pub fn print_matrix(entries: &[MatrixEntry]) -> String {
    let mut out = String::from(MATRIX_HEADER);
    out.push('\n');
    for e in entries {
        write!(
            out,
            "{} {} {} {}",
            e.source, e.rule, e.priority, e.cardinality
        )
        .unwrap();
        if let Some(t) = &e.target {
            write!(out, " {} {}", t.family, t.distance).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn print_rules(rules: &[InteractionRule]) -> String {
    rules
        .iter()
        .map(|r| {
            format!(
                "interaction {}\nactions {} {}\nend\n",
                r.name,
                r.movement.token(),
                r.deactivation.token()
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RULES: &str = "interaction walk\nactions random-walk deactivate-none\nend\n\ninteraction cooc\nactions follow-path deactivate-source\nend\n";

    #[test]
    fn parses_walk_and_cooc() {
        let rules = parse_rules(RULES).unwrap();
        assert_eq!(
            rules,
            vec![InteractionRule::walk(), InteractionRule::cooc()]
        );
        assert_eq!(parse_rules(&print_rules(&rules)).unwrap(), rules);
    }

    #[test]
    fn empty_and_commented_rules() {
        assert!(parse_rules("").unwrap().is_empty());
        assert!(parse_rules("; nothing\n\n   \n").unwrap().is_empty());
    }

    #[test]
    fn unknown_action_is_named() {
        let err = parse_rules("interaction x\nactions fly deactivate-none\nend\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownAction {
                line: 2,
                token: "fly".into()
            }
        );
        let err = parse_rules("interaction x\nactions random-walk vanish\nend\n").unwrap_err();
        assert!(matches!(err, ParseError::UnknownAction { token, .. } if token == "vanish"));
    }

    #[test]
    fn malformed_blocks_report_lines() {
        assert_eq!(
            parse_rules("actions random-walk deactivate-none\n")
                .unwrap_err()
                .line(),
            1
        );
        assert_eq!(parse_rules("interaction a\n\nend\n").unwrap_err().line(), 3);
        assert_eq!(
            parse_rules("interaction a\nactions random-walk deactivate-none\n")
                .unwrap_err()
                .line(),
            2
        );
        assert_eq!(parse_rules("interaction a b\n").unwrap_err().line(), 1);
    }

    #[test]
    fn matrix_lines() {
        let m = parse_matrix("particles cooc 1 1 walkers 2\nwalkers walk 0 0\n").unwrap();
        assert_eq!(
            m[0],
            MatrixEntry::targeted("particles", "cooc", 1, 1, "walkers", 2.0)
        );
        assert_eq!(m[1], MatrixEntry::targetless("walkers", "walk", 0, 0));
    }

    #[test]
    fn matrix_rejections() {
        let text = "; header\nparticles walk 0 0\nparticles cooc 1 1 walkers\n";
        assert_eq!(
            parse_matrix(text).unwrap_err(),
            ParseError::Arity { line: 3, found: 5 }
        );
        assert!(matches!(
            parse_matrix("a walk x 0").unwrap_err(),
            ParseError::NotNumeric {
                line: 1,
                field: "priority",
                ..
            }
        ));
        assert!(matches!(
            parse_matrix("a walk 0 -1").unwrap_err(),
            ParseError::NotNumeric {
                field: "cardinality",
                ..
            }
        ));
        assert!(matches!(
            parse_matrix("a cooc 1 1 b far").unwrap_err(),
            ParseError::NotNumeric {
                field: "distance",
                ..
            }
        ));
        assert!(matches!(
            parse_matrix("a cooc 1 1 b NaN").unwrap_err(),
            ParseError::NotNumeric { .. }
        ));
        assert!(matches!(
            parse_matrix("a").unwrap_err(),
            ParseError::Arity { found: 1, .. }
        ));
    }

    fn token() -> impl Strategy<Value = String> {
        "[a-z_][a-z0-9_]{0,8}"
    }

    fn entry() -> impl Strategy<Value = MatrixEntry> {
        (
            token(),
            token(),
            any::<u32>(),
            any::<u32>(),
            prop::option::of((token(), 0.001f64..1e6)),
        )
            .prop_map(|(s, r, p, c, t)| MatrixEntry {
                source: s,
                rule: r,
                priority: p,
                cardinality: c,
                target: t.map(|(family, distance)| EntryTarget { family, distance }),
            })
    }

    proptest! {
        #[test]
        fn matrix_print_parse_round_trip(entries in prop::collection::vec(entry(), 0..20)) {
            let text = print_matrix(&entries);
            let back = parse_matrix(&text).unwrap();
            prop_assert_eq!(&back, &entries);
            prop_assert_eq!(print_matrix(&back), text);
        }

        #[test]
        fn mutated_lines_are_rejected_with_line_numbers(
            entries in prop::collection::vec(entry(), 1..10),
            victim in any::<prop::sample::Index>(),
            mutation in 0usize..3,
            drop_at in any::<prop::sample::Index>(),
        ) {
            let mut lines: Vec<String> = print_matrix(&entries).lines().map(str::to_string).collect();
            // line 0 is the header comment
            let i = 1 + victim.index(entries.len());
            let mut fields: Vec<String> = lines[i].split_whitespace().map(str::to_string).collect();
            match mutation {
                0 => { fields.remove(drop_at.index(fields.len())); }
                1 => fields[2] = "p".into(),
                _ => fields[3] = "1.5".into(),
            }
            lines[i] = fields.join(" ");
            let err = parse_matrix(&lines.join("\n")).unwrap_err();
            prop_assert_eq!(err.line(), i + 1);
        }
    }
}
