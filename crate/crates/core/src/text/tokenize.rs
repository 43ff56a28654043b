use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::patterns;

/// A token with end-exclusive character offsets into its source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.surface.chars().any(char::is_alphanumeric)
    }
}

/// Joiners that stay inside a word when both neighbours are alphanumeric.
fn is_connector(c: char) -> bool {
    matches!(c, '_' | '-' | '.' | '/' | '\\')
}

/// Byte ranges that must come out as single tokens.
fn protected_ranges(text: &str) -> Vec<Range<usize>> {
    let mut all: Vec<Range<usize>> = [
        patterns::urls(text),
        patterns::emails(text),
        patterns::windows_paths(text),
        patterns::unix_paths(text),
        patterns::ipv6(text),
    ]
    .into_iter()
    .flatten()
    .filter(|r| !r.is_empty())
    .collect();
    all.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let mut kept: Vec<Range<usize>> = Vec::with_capacity(all.len());
    for r in all {
        if kept.last().map_or(true, |k| r.start >= k.end) {
            kept.push(r);
        }
    }
    kept
}

/// Splits text into word, punctuation and indicator tokens.
///
/// Whitespace separates tokens and is never part of one. Punctuation is split
/// off words unless it joins two alphanumerics (`payload.exe`, `CVE-2021-1`,
/// `10.0.0.1`); URLs, emails, paths and IPv6 addresses are kept whole.
pub fn tokenize(text: &str) -> Vec<Token> {
    let protected = protected_ranges(text);
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut next_protected = protected.iter().peekable();
    let mut i = 0;

    let push = |tokens: &mut Vec<Token>, from: usize, to: usize, chars: &[(usize, char)]| {
        let b0 = chars[from].0;
        let b1 = chars.get(to).map_or(text.len(), |c| c.0);
        tokens.push(Token { start: from, end: to, surface: text[b0..b1].to_string() });
    };

    while i < chars.len() {
        let (byte, c) = chars[i];
        while next_protected.peek().map_or(false, |r| r.end <= byte) {
            next_protected.next();
        }
        if let Some(r) = next_protected.peek() {
            if r.start == byte {
                let mut j = i;
                while j < chars.len() && chars[j].0 < r.end {
                    j += 1;
                }
                push(&mut tokens, i, j, &chars);
                i = j;
                continue;
            }
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if !c.is_alphanumeric() {
            push(&mut tokens, i, i + 1, &chars);
            i += 1;
            continue;
        }
        let stop = next_protected.peek().map_or(usize::MAX, |r| r.start);
        let mut j = i + 1;
        while j < chars.len() && chars[j].0 < stop {
            let cj = chars[j].1;
            if cj.is_alphanumeric() {
                j += 1;
            } else if is_connector(cj)
                && chars[j - 1].1.is_alphanumeric()
                && chars.get(j + 1).map_or(false, |n| n.1.is_alphanumeric() && n.0 < stop)
            {
                j += 2;
            } else {
                break;
            }
        }
        push(&mut tokens, i, j, &chars);
        i = j;
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn whitespace_split() {
        assert_eq!(surfaces("Lazarus was behind"), ["Lazarus", "was", "behind"]);
    }

    #[test]
    fn trailing_punctuation_is_split_from_patterns() {
        assert_eq!(surfaces("CVE-2021-44228."), ["CVE-2021-44228", "."]);
        assert_eq!(surfaces("10.0.0.1:443"), ["10.0.0.1", ":", "443"]);
        assert_eq!(surfaces("RunGame()"), ["RunGame", "(", ")"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn indicators_stay_whole() {
        assert_eq!(surfaces("get http://x.com/a?b=1, then"), ["get", "http://x.com/a?b=1", ",", "then"]);
        assert_eq!(surfaces(r"run C:\Windows\cmd.exe."), ["run", r"C:\Windows\cmd.exe", "."]);
        assert_eq!(surfaces("read /etc/passwd"), ["read", "/etc/passwd"]);
        assert_eq!(surfaces("mail bad@evil.com!"), ["mail", "bad@evil.com", "!"]);
        assert_eq!(surfaces("host fe80::1."), ["host", "fe80::1", "."]);
        assert_eq!(surfaces("a .exe file"), ["a", ".", "exe", "file"]);
    }

    #[test]
    fn offsets_are_characters() {
        let toks = tokenize("Ünïcode café x");
        assert_eq!(toks[1], Token { start: 8, end: 12, surface: "café".into() });
    }

    proptest! {
        #[test]
        fn tokens_cover_every_non_space_char(text in "[ a-zA-Zé0-9.,:/\\\\_()@-]{0,60}") {
            let chars: Vec<char> = text.chars().collect();
            let toks = tokenize(&text);
            let mut covered = vec![false; chars.len()];
            let mut prev_end = 0;
            for t in &toks {
                prop_assert!(t.start >= prev_end && t.start < t.end);
                prev_end = t.end;
                let s: String = chars[t.start..t.end].iter().collect();
                prop_assert_eq!(&s, &t.surface);
                for c in covered.iter_mut().take(t.end).skip(t.start) {
                    *c = true;
                }
            }
            for (c, cov) in chars.iter().zip(covered) {
                prop_assert_eq!(cov, !c.is_whitespace());
            }
        }
    }
}
