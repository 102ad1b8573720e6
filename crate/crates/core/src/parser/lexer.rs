//! Tokenizer for the supported Java subset.

use super::ParseFailure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Keyword,
    IntLit,
    FloatLit,
    CharLit,
    StringLit,
    Op,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        matches!(self.kind, TokenKind::Op | TokenKind::Keyword) && self.text == text
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "true", "false", "null",
];

// Longest first so that greedy matching picks `>>>=` over `>>`.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=",
    ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "(", ")", "{", "}", "[",
    "]", ";", ",", ".", "@", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|",
    "^", "%",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn fail(&self, message: impl Into<String>) -> ParseFailure {
        ParseFailure { line: self.line, column: self.col, message: message.into() }
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseFailure> {
    let mut cur = Cursor { chars: src.chars().collect(), pos: 0, line: 1, col: 1, _src: src };
    let mut out = Vec::new();
    // Skip a leading byte-order mark.
    if cur.peek(0) == Some('\u{feff}') {
        cur.pos += 1;
    }
    loop {
        skip_trivia(&mut cur)?;
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.peek(0) else {
            out.push(Token { kind: TokenKind::Eof, text: String::new(), line, col });
            return Ok(out);
        };
        let (kind, text) = if c.is_alphabetic() || c == '_' || c == '$' {
            let mut word = String::new();
            while let Some(c) = cur.peek(0) {
                if c.is_alphanumeric() || c == '_' || c == '$' {
                    word.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            let kind = if is_keyword(&word) { TokenKind::Keyword } else { TokenKind::Ident };
            (kind, word)
        } else if c.is_ascii_digit() || (c == '.' && cur.peek(1).is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&mut cur)?
        } else if c == '"' {
            if cur.starts_with("\"\"\"") {
                return Err(cur.fail("text blocks are not supported"));
            }
            (TokenKind::StringLit, lex_quoted(&mut cur, '"')?)
        } else if c == '\'' {
            (TokenKind::CharLit, lex_quoted(&mut cur, '\'')?)
        } else if let Some(op) = OPERATORS.iter().find(|op| cur.starts_with(op)) {
            for _ in 0..op.chars().count() {
                cur.bump();
            }
            (TokenKind::Op, (*op).to_string())
        } else {
            return Err(cur.fail(format!("unexpected character {c:?}")));
        };
        out.push(Token { kind, text, line, col });
    }
}

fn skip_trivia(cur: &mut Cursor<'_>) -> Result<(), ParseFailure> {
    loop {
        match cur.peek(0) {
            Some(c) if c.is_whitespace() => {
                cur.bump();
            }
            Some('/') if cur.peek(1) == Some('/') => {
                while let Some(c) = cur.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            }
            Some('/') if cur.peek(1) == Some('*') => {
                let start = cur.fail("unterminated block comment");
                cur.bump();
                cur.bump();
                loop {
                    if cur.peek(0).is_none() {
                        return Err(start);
                    }
                    if cur.starts_with("*/") {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    cur.bump();
                }
            }
            _ => return Ok(()),
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) -> Result<(TokenKind, String), ParseFailure> {
    let mut text = String::new();
    let mut float = false;
    if cur.starts_with("0x") || cur.starts_with("0X") || cur.starts_with("0b") || cur.starts_with("0B") {
        text.push(cur.bump().unwrap_or('0'));
        text.push(cur.bump().unwrap_or('x'));
        while let Some(c) = cur.peek(0) {
            if c.is_ascii_hexdigit() || c == '_' {
                text.push(c);
                cur.bump();
            } else {
                break;
            }
        }
    } else {
        while let Some(c) = cur.peek(0) {
            if c.is_ascii_digit() || c == '_' {
                text.push(c);
                cur.bump();
            } else if c == '.' && !float && cur.peek(1).is_some_and(|d| d.is_ascii_digit() || !d.is_alphabetic() && d != '.') {
                float = true;
                text.push(c);
                cur.bump();
            } else if (c == 'e' || c == 'E')
                && (cur.peek(1).is_some_and(|d| d.is_ascii_digit())
                    || (matches!(cur.peek(1), Some('+' | '-')) && cur.peek(2).is_some_and(|d| d.is_ascii_digit())))
            {
                float = true;
                text.push(c);
                cur.bump();
                if let Some(sign @ ('+' | '-')) = cur.peek(0) {
                    text.push(sign);
                    cur.bump();
                }
            } else {
                break;
            }
        }
    }
    if let Some(c) = cur.peek(0) {
        match c {
            'l' | 'L' => {
                text.push(c);
                cur.bump();
            }
            'f' | 'F' | 'd' | 'D' => {
                float = true;
                text.push(c);
                cur.bump();
            }
            _ => {}
        }
    }
    if cur.peek(0).is_some_and(|c| c.is_alphanumeric() || c == '_') {
        return Err(cur.fail("malformed numeric literal"));
    }
    Ok((if float { TokenKind::FloatLit } else { TokenKind::IntLit }, text))
}

fn lex_quoted(cur: &mut Cursor<'_>, quote: char) -> Result<String, ParseFailure> {
    let start = cur.fail("unterminated literal");
    let mut text = String::new();
    text.push(cur.bump().unwrap_or(quote));
    loop {
        match cur.peek(0) {
            None | Some('\n') => return Err(start),
            Some('\\') => {
                text.push('\\');
                cur.bump();
                match cur.bump() {
                    Some(c) if c != '\n' => text.push(c),
                    _ => return Err(start),
                }
            }
            Some(c) if c == quote => {
                text.push(c);
                cur.bump();
                return Ok(text);
            }
            Some(c) => {
                text.push(c);
                cur.bump();
            }
        }
    }
}
