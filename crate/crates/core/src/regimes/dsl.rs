//! Parser for the rule DSL.
//!
//! Grammar, one rule per line, evaluated top to bottom:
//!
//! ```text
//! IF <column> <op> <literal> [AND <column> <op> <literal>]... THEN <label>
//! ELSE <label>
//! ```
//!
//! Operators: `<`, `<=`, `>`, `>=`, `==`, `!=`. Keywords are case-insensitive.
//! Blank lines and lines starting with `#` are ignored. The final `ELSE`
//! line is mandatory; it makes the regime total.

use crate::error::{Error, Result};

use super::{CompareOp, Condition, Regime, RegimeKind, Rule};

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Vec<Token<'_>>> {
    let mut lines = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let mut tokens = Vec::new();
        let mut start: Option<usize> = None;
        for (ci, ch) in raw.char_indices().chain(std::iter::once((raw.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push(Token {
                        text: &raw[s..ci],
                        line: li + 1,
                        column: s + 1,
                    });
                }
            } else if start.is_none() {
                start = Some(ci);
            }
        }
        if tokens
            .first()
            .map(|t| t.text.starts_with('#'))
            .unwrap_or(false)
        {
            continue;
        }
        if !tokens.is_empty() {
            lines.push(tokens);
        }
    }
    lines
}

fn parse_op(tok: &Token<'_>) -> Result<CompareOp> {
    match tok.text {
        "<" => Ok(CompareOp::Lt),
        "<=" => Ok(CompareOp::Le),
        ">" => Ok(CompareOp::Gt),
        ">=" => Ok(CompareOp::Ge),
        "==" => Ok(CompareOp::Eq),
        "!=" => Ok(CompareOp::Ne),
        other => Err(Error::RuleParse {
            line: tok.line,
            column: tok.column,
            message: format!("expected comparison operator, found {other:?}"),
        }),
    }
}

/// Parses rule source text into a regime. The first matching rule wins; the
/// `ELSE` label applies when no rule matches.
pub fn parse_rule_dsl(text: &str) -> Result<Regime> {
    let lines = tokenize(text);
    let mut rules: Vec<Rule> = Vec::new();
    let mut default: Option<String> = None;

    for tokens in &lines {
        if default.is_some() {
            let t = &tokens[0];
            return Err(Error::RuleParse {
                line: t.line,
                column: t.column,
                message: "content after ELSE line".into(),
            });
        }
        let head = &tokens[0];
        let keyword = head.text.to_ascii_uppercase();
        match keyword.as_str() {
            "ELSE" => {
                if tokens.len() != 2 {
                    return Err(Error::RuleParse {
                        line: head.line,
                        column: head.column,
                        message: "ELSE expects exactly one label".into(),
                    });
                }
                default = Some(tokens[1].text.to_string());
            }
            "IF" => {
                let mut conditions = Vec::new();
                let mut pos = 1;
                loop {
                    if pos + 2 >= tokens.len() {
                        let t = tokens.last().unwrap();
                        return Err(Error::RuleParse {
                            line: t.line,
                            column: t.column + t.text.len(),
                            message: "incomplete condition; expected <column> <op> <literal>"
                                .into(),
                        });
                    }
                    let column = tokens[pos].text.to_string();
                    let op = parse_op(&tokens[pos + 1])?;
                    let literal = tokens[pos + 2].text.to_string();
                    conditions.push(Condition {
                        column,
                        op,
                        literal,
                    });
                    pos += 3;
                    if pos >= tokens.len() {
                        let t = tokens.last().unwrap();
                        return Err(Error::RuleParse {
                            line: t.line,
                            column: t.column + t.text.len(),
                            message: "expected AND or THEN".into(),
                        });
                    }
                    match tokens[pos].text.to_ascii_uppercase().as_str() {
                        "AND" => pos += 1,
                        "THEN" => break,
                        other => {
                            return Err(Error::RuleParse {
                                line: tokens[pos].line,
                                column: tokens[pos].column,
                                message: format!("expected AND or THEN, found {other:?}"),
                            })
                        }
                    }
                }
                // pos points at THEN
                if pos + 1 >= tokens.len() {
                    let t = &tokens[pos];
                    return Err(Error::RuleParse {
                        line: t.line,
                        column: t.column + t.text.len(),
                        message: "THEN expects a label".into(),
                    });
                }
                if pos + 2 != tokens.len() {
                    let t = &tokens[pos + 2];
                    return Err(Error::RuleParse {
                        line: t.line,
                        column: t.column,
                        message: "unexpected trailing tokens".into(),
                    });
                }
                rules.push(Rule {
                    conditions,
                    label: tokens[pos + 1].text.to_string(),
                });
            }
            other => {
                return Err(Error::RuleParse {
                    line: head.line,
                    column: head.column,
                    message: format!("expected IF or ELSE, found {other:?}"),
                })
            }
        }
    }

    let default = default.ok_or_else(|| Error::RuleParse {
        line: lines.len() + 1,
        column: 1,
        message: "missing ELSE rule".into(),
    })?;
    Ok(Regime {
        id: "rules".into(),
        kind: RegimeKind::RuleList { rules, default },
    })
}
