use super::ast::Location;
use super::FrontendError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Punct(&'static str),
    /// A full `#pragma` logical line, continuations joined.
    Pragma(String),
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub loc: Location,
}

// Longest first so that greedy matching works.
const PUNCTS: &[&str] = &[
    "&&", "||", "<=", ">=", "==", "!=", "+=", "-=", "*=", "/=", "++", "--", "(", ")", "[", "]",
    "{", "}", ";", ",", "+", "-", "*", "/", "%", "<", ">", "=", "!", "?", ":", "&",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    let mut at_line_start = true;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            at_line_start = true;
            bump!();
            continue;
        }
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let loc = Location::new(line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(FrontendError::Syntax {
                        loc,
                        message: "unterminated comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let loc = Location::new(line, col);
        if c == '#' {
            if !at_line_start {
                return Err(FrontendError::Syntax { loc, message: "stray `#`".into() });
            }
            let mut text = String::new();
            while i < chars.len() && chars[i] != '\n' {
                if chars[i] == '\\' && chars.get(i + 1) == Some(&'\n') {
                    text.push(' ');
                    bump!();
                    bump!();
                    continue;
                }
                if chars[i] == '/' && chars.get(i + 1) == Some(&'/') {
                    while i < chars.len() && chars[i] != '\n' {
                        bump!();
                    }
                    break;
                }
                text.push(chars[i]);
                bump!();
            }
            let norm = text.split_whitespace().collect::<Vec<_>>().join(" ");
            if norm.starts_with("#include") {
                continue;
            }
            out.push(Token { tok: Tok::Pragma(norm), loc });
            continue;
        }
        at_line_start = false;
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            out.push(Token { tok: Tok::Ident(s), loc });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            let mut is_float = false;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric()
                    || chars[i] == '.'
                    || ((chars[i] == '+' || chars[i] == '-')
                        && matches!(s.chars().last(), Some('e') | Some('E'))
                        && is_float_like(&s)))
            {
                if chars[i] == '.' || chars[i] == 'e' || chars[i] == 'E' {
                    is_float = true;
                }
                s.push(chars[i]);
                bump!();
            }
            let trimmed = s.trim_end_matches(['l', 'L', 'u', 'U']);
            let tok = if is_float {
                let t = trimmed.trim_end_matches(['f', 'F']);
                t.parse::<f64>().map(Tok::Float).map_err(|_| FrontendError::Syntax {
                    loc,
                    message: format!("malformed number `{s}`"),
                })?
            } else {
                trimmed.parse::<i64>().map(Tok::Int).map_err(|_| FrontendError::Syntax {
                    loc,
                    message: format!("malformed or out-of-range integer `{s}`"),
                })?
            };
            out.push(Token { tok, loc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.len() {
                    bump!();
                }
                out.push(Token { tok: Tok::Punct(p), loc });
            }
            None => {
                return Err(FrontendError::Syntax {
                    loc,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, loc: Location::new(line, col) });
    Ok(out)
}

fn is_float_like(s: &str) -> bool {
    !s.starts_with("0x") && !s.starts_with("0X")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pragma_continuation_is_joined() {
        let toks = tokenize("#pragma clang loop tile \\\n   sizes(4)\nfor").unwrap();
        assert_eq!(toks[0].tok, Tok::Pragma("#pragma clang loop tile sizes(4)".into()));
        assert_eq!(toks[1].tok, Tok::Ident("for".into()));
        assert_eq!(toks[1].loc, Location::new(3, 1));
    }

    #[test]
    fn operators_and_numbers() {
        let toks = tokenize("i+=1; x <= 2.5e-1 && y").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(kinds[1], Tok::Punct("+="));
        assert_eq!(kinds[2], Tok::Int(1));
        assert_eq!(kinds[5], Tok::Punct("<="));
        assert_eq!(kinds[6], Tok::Float(0.25));
        assert_eq!(kinds[7], Tok::Punct("&&"));
    }

    #[test]
    fn comments_and_includes_are_skipped() {
        let toks = tokenize("#include <stdlib.h>\n/* a */ x // b\n").unwrap();
        assert_eq!(toks.len(), 2);
    }
}
