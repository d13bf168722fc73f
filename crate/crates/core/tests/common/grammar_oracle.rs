//! Reference recursive-descent parsers for model output, written without
//! reference to the library's tokenizer or state machines.

use nerforge::model::MalformedReason;
use unicode_normalization::UnicodeNormalization;

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Index just past the group closed by `close`, starting after its opener.
/// Quoted strings are skipped when `quote` accepts their opening character.
fn skip_group(cs: &[char], mut i: usize, close: char, quote: fn(char) -> bool) -> Option<usize> {
    while i < cs.len() {
        let c = cs[i];
        if c == close {
            return Some(i + 1);
        }
        i = match c {
            '[' => skip_group(cs, i + 1, ']', quote)?,
            '(' => skip_group(cs, i + 1, ')', quote)?,
            ']' | ')' => return None,
            q if quote(q) => skip_string(cs, i + 1, q)?,
            _ => i + 1,
        };
    }
    None
}

fn skip_string(cs: &[char], mut i: usize, q: char) -> Option<usize> {
    while i < cs.len() {
        match cs[i] {
            '\\' => i += 2,
            c if c == q => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

fn span(input: &str, quote: fn(char) -> bool) -> Option<Vec<char>> {
    let cs: Vec<char> = input.chars().collect();
    let start = cs.iter().position(|&c| c == '[')?;
    let end = skip_group(&cs, start + 1, ']', quote)?;
    Some(cs[start..end].to_vec())
}

struct Cursor {
    cs: Vec<char>,
    i: usize,
}

impl Cursor {
    fn peek(&self) -> Option<char> {
        self.cs.get(self.i).copied()
    }

    fn ws(&mut self, is_ws: fn(char) -> bool) {
        while self.peek().is_some_and(is_ws) {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }
}

// ---------------------------------------------------------------- tuples

fn py_ws(c: char) -> bool {
    c.is_whitespace()
}

fn py_string(cur: &mut Cursor) -> String {
    let q = cur.cs[cur.i];
    cur.i += 1;
    let mut out = String::new();
    while let Some(c) = cur.peek() {
        cur.i += 1;
        if c == q {
            break;
        }
        if c != '\\' {
            out.push(c);
            continue;
        }
        let Some(e) = cur.peek() else { break };
        cur.i += 1;
        match e {
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            '\\' | '"' | '\'' => out.push(e),
            _ => {
                out.push('\\');
                out.push(e);
            }
        }
    }
    out
}

fn tuple(cur: &mut Cursor) -> Result<(String, String), MalformedReason> {
    if !cur.eat('(') {
        return Err(MalformedReason::NonTupleElement);
    }
    let mut items = Vec::new();
    cur.ws(py_ws);
    if !cur.eat(')') {
        loop {
            cur.ws(py_ws);
            match cur.peek() {
                Some(')') if !items.is_empty() => {
                    cur.i += 1;
                    break;
                }
                Some('"' | '\'') => items.push(py_string(cur)),
                _ => return Err(MalformedReason::NonTupleElement),
            }
            cur.ws(py_ws);
            if cur.eat(',') {
                continue;
            }
            if cur.eat(')') {
                break;
            }
            return Err(MalformedReason::NonTupleElement);
        }
    }
    if items.len() != 2 {
        return Err(MalformedReason::ArityNot2);
    }
    let t = items.pop().unwrap();
    let m = items.pop().unwrap();
    if m.trim().is_empty() || t.trim().is_empty() {
        return Err(MalformedReason::EmptyField);
    }
    Ok((nfc(&m), nfc(&t)))
}

pub fn tuples(input: &str) -> Result<Vec<(String, String)>, MalformedReason> {
    let cs = span(input, |c| c == '"' || c == '\'').ok_or(MalformedReason::UnbalancedBrackets)?;
    let mut cur = Cursor { cs, i: 1 };
    let mut out = Vec::new();
    loop {
        cur.ws(py_ws);
        if cur.eat(']') {
            return Ok(out);
        }
        out.push(tuple(&mut cur)?);
        cur.ws(py_ws);
        if cur.eat(']') {
            return Ok(out);
        }
        if !cur.eat(',') {
            return Err(MalformedReason::NonTupleElement);
        }
    }
}

// -------------------------------------------------------------- mentions

fn json_ws(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | '\r')
}

fn hex4(cur: &mut Cursor) -> Option<u32> {
    let s: String = cur.cs.get(cur.i..cur.i + 4)?.iter().collect();
    cur.i += 4;
    if !s.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    u32::from_str_radix(&s, 16).ok()
}

fn json_string(cur: &mut Cursor) -> Option<String> {
    if !cur.eat('"') {
        return None;
    }
    let mut out = String::new();
    loop {
        let c = cur.peek()?;
        cur.i += 1;
        match c {
            '"' => return Some(out),
            '\\' => {
                let e = cur.peek()?;
                cur.i += 1;
                let decoded = match e {
                    '"' => '"',
                    '\\' => '\\',
                    '/' => '/',
                    'b' => '\u{8}',
                    'f' => '\u{c}',
                    'n' => '\n',
                    'r' => '\r',
                    't' => '\t',
                    'u' => {
                        let hi = hex4(cur)?;
                        let code = if (0xD800..0xDC00).contains(&hi) {
                            if !(cur.eat('\\') && cur.eat('u')) {
                                return None;
                            }
                            let lo = hex4(cur)?;
                            if !(0xDC00..0xE000).contains(&lo) {
                                return None;
                            }
                            0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                        } else {
                            hi
                        };
                        char::from_u32(code)?
                    }
                    _ => return None,
                };
                out.push(decoded);
            }
            c if (c as u32) < 0x20 => return None,
            c => out.push(c),
        }
    }
}

fn json_list(cur: &mut Cursor) -> Option<Vec<String>> {
    cur.eat('[');
    cur.ws(json_ws);
    let mut out = Vec::new();
    if cur.eat(']') {
        return Some(out);
    }
    loop {
        cur.ws(json_ws);
        out.push(nfc(&json_string(cur)?));
        cur.ws(json_ws);
        if cur.eat(']') {
            return Some(out);
        }
        if !cur.eat(',') {
            return None;
        }
    }
}

/// `Some(mentions)` when the output holds a JSON list of strings.
pub fn mentions(input: &str) -> Option<Vec<String>> {
    let cs = span(input, |c| c == '"')?;
    let mut cur = Cursor { cs, i: 0 };
    let out = json_list(&mut cur)?;
    (cur.i == cur.cs.len()).then_some(out)
}
