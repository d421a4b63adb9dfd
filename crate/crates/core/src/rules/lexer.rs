use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    /// Digits with a fractional part, kept verbatim.
    Decimal(String),
    Str(String),
    LBrace,
    RBrace,
    Colon,
    Comma,
    Semi,
    Dot,
    Assign,
    EqEq,
    Lt,
    Le,
    Plus,
    Minus,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(i) => format!("integer `{i}`"),
            Tok::Decimal(d) => format!("number `{d}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Assign => "`=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }
}

/// Splits rule-file text into tokens. `#` and `//` start line comments.
pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, Vec<ParseError>> {
    let mut cur = Cursor {
        chars: src.chars().peekable(),
        pos: Pos { line: 1, col: 1 },
    };
    let mut out = Vec::new();
    let mut errors = Vec::new();

    while let Some(c) = cur.peek() {
        let pos = cur.pos;
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            skip_line(&mut cur);
            continue;
        }
        let tok = match c {
            '/' => {
                cur.bump();
                if cur.peek() == Some('/') {
                    skip_line(&mut cur);
                    continue;
                }
                errors.push(ParseError::new(pos, "unexpected character `/`", None));
                continue;
            }
            '{' | '}' | ':' | ',' | ';' | '.' | '+' | '-' => {
                cur.bump();
                match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    '.' => Tok::Dot,
                    '+' => Tok::Plus,
                    _ => Tok::Minus,
                }
            }
            '=' => {
                cur.bump();
                if cur.peek() == Some('=') {
                    cur.bump();
                    Tok::EqEq
                } else {
                    Tok::Assign
                }
            }
            '<' => {
                cur.bump();
                if cur.peek() == Some('=') {
                    cur.bump();
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            '"' => {
                cur.bump();
                match lex_string(&mut cur) {
                    Ok(s) => Tok::Str(s),
                    Err(msg) => {
                        errors.push(ParseError::new(pos, msg, None));
                        continue;
                    }
                }
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    cur.bump();
                }
                // A fraction only when the dot is followed by a digit.
                let mut look = cur.chars.clone();
                if look.next() == Some('.') && look.next().is_some_and(|d| d.is_ascii_digit()) {
                    cur.bump();
                    digits.push('.');
                    while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                        digits.push(d);
                        cur.bump();
                    }
                    Tok::Decimal(digits)
                } else {
                    match digits.parse() {
                        Ok(i) => Tok::Int(i),
                        Err(_) => {
                            errors.push(ParseError::new(pos, "integer literal too large", None));
                            continue;
                        }
                    }
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(d) = cur.peek().filter(|d| d.is_alphanumeric() || *d == '_') {
                    ident.push(d);
                    cur.bump();
                }
                Tok::Ident(ident)
            }
            other => {
                cur.bump();
                errors.push(ParseError::new(
                    pos,
                    format!("unexpected character `{other}`"),
                    None,
                ));
                continue;
            }
        };
        out.push(Token { tok, pos });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: cur.pos,
    });
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

fn skip_line(cur: &mut Cursor<'_>) {
    while let Some(c) = cur.bump() {
        if c == '\n' {
            break;
        }
    }
}

fn lex_string(cur: &mut Cursor<'_>) -> Result<String, String> {
    let mut s = String::new();
    loop {
        match cur.bump() {
            None | Some('\n') => return Err("unterminated string literal".into()),
            Some('"') => return Ok(s),
            Some('\\') => match cur.bump() {
                Some('"') => s.push('"'),
                Some('\\') => s.push('\\'),
                Some('\'') => s.push('\''),
                Some('n') => s.push('\n'),
                Some('t') => s.push('\t'),
                Some('r') => s.push('\r'),
                Some('0') => s.push('\0'),
                Some('u') => {
                    if cur.bump() != Some('{') {
                        return Err("malformed unicode escape".into());
                    }
                    let mut hex = String::new();
                    loop {
                        match cur.bump() {
                            Some('}') => break,
                            Some(h) if h.is_ascii_hexdigit() => hex.push(h),
                            _ => return Err("malformed unicode escape".into()),
                        }
                    }
                    let ch = u32::from_str_radix(&hex, 16)
                        .ok()
                        .and_then(char::from_u32)
                        .ok_or("invalid unicode escape")?;
                    s.push(ch);
                }
                _ => return Err("unknown escape sequence".into()),
            },
            Some(c) => s.push(c),
        }
    }
}
