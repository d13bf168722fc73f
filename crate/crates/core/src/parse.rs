//! Tolerant parsers for model output.
//!
//! Two shapes are accepted, each possibly wrapped in prose:
//!
//! * tuple lists from the annotating model, `[("Steve Jobs", "person"), ...]`,
//!   with single or double quoted strings;
//! * JSON lists of strings from a tuned model, `["Los Angeles"]`.
//!
//! Both start by locating the bracketed list: the first `[` in the text and
//! its matching `]`, found by tracking `[`/`(` nesting outside quoted strings.
//! Text before and after that span is ignored.
//!
//! Tuple-list grammar inside the located span (whitespace is free between
//! tokens):
//!
//! ```text
//! list  := '[' ( tuple ( ',' tuple )* ','? )? ']'
//! tuple := '(' ( str ( ',' str )* ','? )? ')'
//! str   := '"' ... '"' | '\'' ... '\''
//! ```
//!
//! Backslash escapes `\n \t \r \\ \' \"` decode; any other `\c` is kept as
//! the two characters. Failures are classified in this priority order:
//! an unlocatable or unbalanced span is [`MalformedReason::UnbalancedBrackets`];
//! otherwise elements are checked left to right and the first failing element
//! decides. Within an element, a non-string item or a missing `(` is
//! [`MalformedReason::NonTupleElement`], a tuple that closes with other than
//! two items is [`MalformedReason::ArityNot2`], and a two-item tuple with a
//! blank field is [`MalformedReason::EmptyField`]. Tuples are returned in
//! order with duplicates kept.

use crate::model::MalformedReason;
use crate::text;

/// Which characters open a quoted string while locating the list span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QuoteStyle {
    /// `'` and `"`, with backslash escapes.
    Python,
    /// `"` only, with backslash escapes.
    Json,
}

impl QuoteStyle {
    fn opens(self, c: char) -> bool {
        match self {
            QuoteStyle::Python => c == '"' || c == '\'',
            QuoteStyle::Json => c == '"',
        }
    }
}

/// Byte range `[start, end)` of the first balanced bracketed list.
fn locate_list(input: &str, quotes: QuoteStyle) -> Option<(usize, usize)> {
    let start = input.find('[')?;
    let mut stack: Vec<char> = Vec::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in input[start..].char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '[' | '(' => stack.push(c),
            ']' | ')' => {
                let open = if c == ']' { '[' } else { '(' };
                if stack.pop() != Some(open) {
                    return None;
                }
                if stack.is_empty() {
                    return Some((start, start + i + c.len_utf8()));
                }
            }
            c if quotes.opens(c) => quote = Some(c),
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Open(char),
    Close(char),
    Comma,
    Str(String),
    /// Anything else: a bare word, number, colon, ...
    Junk,
}

fn decode_escape(c: char, out: &mut String) {
    match c {
        'n' => out.push('\n'),
        't' => out.push('\t'),
        'r' => out.push('\r'),
        '\\' | '\'' | '"' => out.push(c),
        other => {
            out.push('\\');
            out.push(other);
        }
    }
}

/// Tokenizes a located span. The span is balanced, so strings terminate.
fn tokenize(span: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = span.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            '[' | '(' => tokens.push(Token::Open(c)),
            ']' | ')' => tokens.push(Token::Close(c)),
            ',' => tokens.push(Token::Comma),
            '"' | '\'' => {
                let mut s = String::new();
                while let Some(d) = chars.next() {
                    if d == '\\' {
                        if let Some(e) = chars.next() {
                            decode_escape(e, &mut s);
                        }
                    } else if d == c {
                        break;
                    } else {
                        s.push(d);
                    }
                }
                tokens.push(Token::Str(s));
            }
            _ => {
                while chars
                    .peek()
                    .is_some_and(|d| !d.is_whitespace() && !"[]()',\"".contains(*d))
                {
                    chars.next();
                }
                tokens.push(Token::Junk);
            }
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ListState {
    /// Just after `[`: a tuple or `]`.
    Start,
    /// After a tuple: `,` or `]`.
    AfterItem,
    /// After `,`: a tuple or `]`.
    AfterComma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TupleState {
    Start,
    AfterItem,
    AfterComma,
}

/// Parses a tuple-list response into `(mention, type)` pairs.
pub fn parse_tuple_list(response: &str) -> Result<Vec<(String, String)>, MalformedReason> {
    let (start, end) =
        locate_list(response, QuoteStyle::Python).ok_or(MalformedReason::UnbalancedBrackets)?;
    let tokens = tokenize(&response[start..end]);
    // tokens[0] is the opening '[' and the last token its matching ']'.
    let body = &tokens[1..tokens.len() - 1];

    let mut out = Vec::new();
    let mut state = ListState::Start;
    let mut i = 0;
    while i < body.len() {
        match (&body[i], state) {
            (Token::Comma, ListState::AfterItem) => {
                state = ListState::AfterComma;
                i += 1;
            }
            (Token::Open('('), ListState::Start | ListState::AfterComma) => {
                let (pair, next) = parse_tuple(body, i + 1)?;
                out.push(pair);
                state = ListState::AfterItem;
                i = next;
            }
            _ => return Err(MalformedReason::NonTupleElement),
        }
    }
    Ok(out)
}

/// Parses tuple items starting just after its `(`; returns the pair and the
/// index after the closing `)`.
fn parse_tuple(body: &[Token], mut i: usize) -> Result<((String, String), usize), MalformedReason> {
    let mut items: Vec<&str> = Vec::new();
    let mut state = TupleState::Start;
    loop {
        let Some(tok) = body.get(i) else {
            return Err(MalformedReason::NonTupleElement);
        };
        i += 1;
        match (tok, state) {
            (Token::Str(s), TupleState::Start | TupleState::AfterComma) => {
                items.push(s);
                state = TupleState::AfterItem;
            }
            (Token::Comma, TupleState::AfterItem) => state = TupleState::AfterComma,
            (Token::Close(')'), _) => break,
            _ => return Err(MalformedReason::NonTupleElement),
        }
    }
    let [mention, entity_type] = items[..] else {
        return Err(MalformedReason::ArityNot2);
    };
    if mention.trim().is_empty() || entity_type.trim().is_empty() {
        return Err(MalformedReason::EmptyField);
    }
    Ok(((text::nfc(mention), text::nfc(entity_type)), i))
}

/// A parsed prediction: mentions (duplicates kept) and whether the output
/// parsed at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMentions {
    pub mentions: Vec<String>,
    pub parse_ok: bool,
}

/// Parses a model answer that should be a JSON list of strings.
///
/// Unparseable output yields no mentions and `parse_ok = false`; it is never
/// an error.
pub fn parse_prediction_output(raw: &str) -> ParsedMentions {
    let parsed = locate_list(raw, QuoteStyle::Json)
        .and_then(|(s, e)| serde_json::from_str::<Vec<String>>(&raw[s..e]).ok());
    match parsed {
        Some(ms) => ParsedMentions {
            mentions: ms.iter().map(|m| text::nfc(m)).collect(),
            parse_ok: true,
        },
        None => ParsedMentions {
            mentions: Vec::new(),
            parse_ok: false,
        },
    }
}
