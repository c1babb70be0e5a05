//! The Controller's terse command language.
//!
//! ```text
//! Click [<n>]
//! Type [<n>] "<text>"
//! Note "<text>"
//! Scroll Up | Scroll Down
//! END
//! ```
//!
//! Keywords are case-insensitive and surrounding whitespace is ignored.
//! Inside quoted text only `\"` and `\\` are escapes.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::fence::is_fence_line;
use crate::label_map::LabelNumber;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    /// Lowercase wire name used in action JSON.
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// One high-level step decided by the Controller.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ControllerCommand {
    Click(LabelNumber),
    Type(LabelNumber, String),
    Note(String),
    Scroll(Direction),
    End,
}

impl fmt::Display for ControllerCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_command(self))
    }
}

/// A token class the parser would have accepted at the failure point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expected {
    Keyword,
    OpenBracket,
    CloseBracket,
    Number,
    NonZeroNumber,
    Quote,
    EscapedChar,
    Direction,
    EndOfInput,
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expected::Keyword => "one of Click, Type, Note, Scroll, END",
            Expected::OpenBracket => "'['",
            Expected::CloseBracket => "']'",
            Expected::Number => "a label number",
            Expected::NonZeroNumber => "a label number between 1 and 4294967295",
            Expected::Quote => "'\"'",
            Expected::EscapedChar => "'\"' or '\\' after '\\'",
            Expected::Direction => "Up or Down",
            Expected::EndOfInput => "end of line",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: expected {}", ExpectedList(.expected))]
pub struct ParseError {
    /// Byte offset into the input line.
    pub offset: usize,
    pub expected: Vec<Expected>,
}

struct ExpectedList<'a>(&'a [Expected]);

impl fmt::Display for ExpectedList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" or ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no line of the model output is a valid command")]
pub struct ExtractError;

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn fail<T>(&self, expected: &[Expected]) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.pos,
            expected: expected.to_vec(),
        })
    }

    fn word(&mut self) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.bump();
        }
        &self.src[start..self.pos]
    }

    fn expect_char(&mut self, want: char, expected: Expected) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(want) {
            self.bump();
            Ok(())
        } else {
            self.fail(&[expected])
        }
    }

    fn label(&mut self) -> Result<LabelNumber, ParseError> {
        self.expect_char('[', Expected::OpenBracket)?;
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        let digits = &self.src[start..self.pos];
        if digits.is_empty() {
            return self.fail(&[Expected::Number]);
        }
        let number = digits
            .parse::<u32>()
            .ok()
            .and_then(LabelNumber::new)
            .ok_or(ParseError {
                offset: start,
                expected: alloc::vec![Expected::NonZeroNumber],
            })?;
        self.expect_char(']', Expected::CloseBracket)?;
        Ok(number)
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        self.expect_char('"', Expected::Quote)?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return self.fail(&[Expected::Quote]),
                Some('"') => return Ok(out),
                Some('\\') => match self.peek() {
                    Some(c @ ('"' | '\\')) => {
                        self.bump();
                        out.push(c);
                    }
                    _ => return self.fail(&[Expected::EscapedChar]),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn direction(&mut self) -> Result<Direction, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let word = self.word();
        if word.eq_ignore_ascii_case("up") {
            Ok(Direction::Up)
        } else if word.eq_ignore_ascii_case("down") {
            Ok(Direction::Down)
        } else {
            self.pos = start;
            self.fail(&[Expected::Direction])
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.rest().is_empty() {
            Ok(())
        } else {
            self.fail(&[Expected::EndOfInput])
        }
    }
}

/// Parses one line of Controller output into a command.
pub fn parse_command(line: &str) -> Result<ControllerCommand, ParseError> {
    let mut cur = Cursor { src: line, pos: 0 };
    cur.skip_ws();
    let start = cur.pos;
    let keyword = cur.word();
    let cmd = if keyword.eq_ignore_ascii_case("click") {
        ControllerCommand::Click(cur.label()?)
    } else if keyword.eq_ignore_ascii_case("type") {
        let n = cur.label()?;
        ControllerCommand::Type(n, cur.quoted()?)
    } else if keyword.eq_ignore_ascii_case("note") {
        ControllerCommand::Note(cur.quoted()?)
    } else if keyword.eq_ignore_ascii_case("scroll") {
        ControllerCommand::Scroll(cur.direction()?)
    } else if keyword.eq_ignore_ascii_case("end") {
        ControllerCommand::End
    } else {
        cur.pos = start;
        return cur.fail(&[Expected::Keyword]);
    };
    cur.end()?;
    Ok(cmd)
}

/// Returns the last line of `raw` that parses as a command, after dropping
/// markdown fence lines. The returned slice is trimmed.
pub fn extract_command(raw: &str) -> Result<&str, ExtractError> {
    raw.lines()
        .filter(|line| !is_fence_line(line))
        .map(str::trim)
        .rev()
        .find(|line| parse_command(line).is_ok())
        .ok_or(ExtractError)
}

fn push_quoted(out: &mut String, text: &str) {
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

/// Canonical text form: `Click [13]`, `Type [2] "a\"b"`, `Note "x"`,
/// `Scroll Down`, `END`.
pub fn render_command(cmd: &ControllerCommand) -> String {
    use core::fmt::Write as _;

    let mut out = String::new();
    match cmd {
        ControllerCommand::Click(n) => {
            let _ = write!(out, "Click [{n}]");
        }
        ControllerCommand::Type(n, text) => {
            let _ = write!(out, "Type [{n}] ");
            push_quoted(&mut out, text);
        }
        ControllerCommand::Note(text) => {
            out.push_str("Note ");
            push_quoted(&mut out, text);
        }
        ControllerCommand::Scroll(Direction::Up) => out.push_str("Scroll Up"),
        ControllerCommand::Scroll(Direction::Down) => out.push_str("Scroll Down"),
        ControllerCommand::End => out.push_str("END"),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn n(v: u32) -> LabelNumber {
        LabelNumber::new(v).unwrap()
    }

    #[test]
    fn click_literal() {
        assert_eq!(parse_command("Click [13]"), Ok(ControllerCommand::Click(n(13))));
    }

    #[test]
    fn end_literal() {
        assert_eq!(parse_command("END"), Ok(ControllerCommand::End));
    }

    #[test]
    fn label_zero_is_rejected() {
        let err = parse_command("Click [0]").unwrap_err();
        assert_eq!(err.offset, 7);
        assert_eq!(err.expected, vec![Expected::NonZeroNumber]);
    }

    #[test]
    fn label_overflow_is_rejected() {
        assert!(parse_command("Click [4294967296]").is_err());
        assert_eq!(
            parse_command("Click [4294967295]"),
            Ok(ControllerCommand::Click(n(u32::MAX)))
        );
    }

    #[test]
    fn escaped_quotes_in_type() {
        assert_eq!(
            parse_command(r#"Type [5] "hello \"world\"""#),
            Ok(ControllerCommand::Type(n(5), r#"hello "world""#.to_string()))
        );
    }

    #[test]
    fn keywords_are_case_insensitive_and_whitespace_tolerant() {
        assert_eq!(parse_command("  click[ 7 ]  "), Ok(ControllerCommand::Click(n(7))));
        assert_eq!(parse_command("end"), Ok(ControllerCommand::End));
        assert_eq!(
            parse_command("SCROLL down"),
            Ok(ControllerCommand::Scroll(Direction::Down))
        );
        assert_eq!(
            parse_command("note \"x\""),
            Ok(ControllerCommand::Note("x".to_string()))
        );
    }

    #[test]
    fn error_positions_and_expectations() {
        let err = parse_command("Fly [1]").unwrap_err();
        assert_eq!((err.offset, err.expected), (0, vec![Expected::Keyword]));

        let err = parse_command("Click 13").unwrap_err();
        assert_eq!((err.offset, err.expected), (6, vec![Expected::OpenBracket]));

        let err = parse_command("Click [13").unwrap_err();
        assert_eq!((err.offset, err.expected), (9, vec![Expected::CloseBracket]));

        let err = parse_command("Type [1] \"abc").unwrap_err();
        assert_eq!((err.offset, err.expected), (13, vec![Expected::Quote]));

        let err = parse_command(r#"Note "a\n""#).unwrap_err();
        assert_eq!(err.expected, vec![Expected::EscapedChar]);

        let err = parse_command("Scroll sideways").unwrap_err();
        assert_eq!((err.offset, err.expected), (7, vec![Expected::Direction]));

        let err = parse_command("END now").unwrap_err();
        assert_eq!((err.offset, err.expected), (4, vec![Expected::EndOfInput]));

        let err = parse_command("ENDX").unwrap_err();
        assert_eq!(err.expected, vec![Expected::Keyword]);
    }

    #[test]
    fn error_display_names_expectation() {
        let err = parse_command("Click [x]").unwrap_err();
        assert_eq!(err.to_string(), "parse error at byte 7: expected a label number");
    }

    #[test]
    fn empty_and_blank_lines_fail() {
        assert!(parse_command("").is_err());
        assert!(parse_command("   ").is_err());
    }

    #[test]
    fn extract_takes_last_parsing_line() {
        assert_eq!(
            extract_command("I will click the login button.\nClick [3]"),
            Ok("Click [3]")
        );
        assert_eq!(extract_command("Click [1]\nthen\nClick [2]\nok"), Ok("Click [2]"));
        assert_eq!(extract_command("END"), Ok("END"));
        assert_eq!(extract_command("no command here"), Err(ExtractError));
        assert_eq!(extract_command(""), Err(ExtractError));
    }

    #[test]
    fn extract_ignores_fences() {
        assert_eq!(extract_command("```\nClick [4]\n```"), Ok("Click [4]"));
        assert_eq!(extract_command("Thinking...\n```text\n  END  \n```\n"), Ok("END"));
    }

    #[test]
    fn render_canonical_forms() {
        assert_eq!(render_command(&ControllerCommand::Click(n(13))), "Click [13]");
        assert_eq!(render_command(&ControllerCommand::End), "END");
        assert_eq!(
            render_command(&ControllerCommand::Type(n(2), "a\"b".to_string())),
            r#"Type [2] "a\"b""#
        );
        assert_eq!(
            render_command(&ControllerCommand::Note("c:\\x".to_string())),
            r#"Note "c:\\x""#
        );
        assert_eq!(
            render_command(&ControllerCommand::Scroll(Direction::Up)),
            "Scroll Up"
        );
    }

    /// Independent reference tokenizer for the quoted-string escape rules:
    /// walks the raw body between the outer quotes two characters at a time.
    fn reference_unescape(body: &str) -> Option<String> {
        let chars: Vec<char> = body.chars().collect();
        let mut out = String::new();
        let mut i = 0;
        while i < chars.len() {
            match (chars[i], chars.get(i + 1)) {
                ('\\', Some('"')) => {
                    out.push('"');
                    i += 2;
                }
                ('\\', Some('\\')) => {
                    out.push('\\');
                    i += 2;
                }
                ('\\', _) => return None,
                ('"', _) => return None,
                (c, _) => {
                    out.push(c);
                    i += 1;
                }
            }
        }
        Some(out)
    }

    #[test]
    fn escape_corpus_matches_reference_tokenizer() {
        let corpus = [
            r#"hello \"world\""#,
            r#"\\"#,
            r#"\\\""#,
            r#"a\\b\\c"#,
            r#"\"\"\""#,
            "plain",
            "",
            "ünïcødé 中文",
            r#"trailing\\"#,
            r#"bad\q"#,
            r#"bad\"#,
            r#"mid"quote"#,
        ];
        for body in corpus {
            let line = alloc::format!("Note \"{body}\"");
            let expected = reference_unescape(body);
            let actual = match parse_command(&line) {
                Ok(ControllerCommand::Note(text)) => Some(text),
                Ok(other) => panic!("unexpected {other:?}"),
                Err(_) => None,
            };
            assert_eq!(actual, expected, "body {body:?}");
        }
    }
}
