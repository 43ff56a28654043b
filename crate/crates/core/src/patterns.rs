//! Format scanners for indicator-like strings.
//!
//! Every scanner returns byte ranges into the input. The regex crate has no
//! look-around, so candidates are found with a permissive regex and then
//! boundary- and value-checked by hand.

use std::net::Ipv6Addr;
use std::ops::Range;

use once_cell::sync::Lazy;
use regex::Regex;

static IPV4: Lazy<Regex> = Lazy::new(|| Regex::new(r"\d{1,3}(?:\.\d{1,3}){3}").unwrap());
static IPV6: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)[0-9a-f]{0,4}(?::[0-9a-f]{0,4}){2,7}").unwrap());
static HEX_RUN: Lazy<Regex> = Lazy::new(|| Regex::new(r"[0-9A-Fa-f]+").unwrap());
static CVE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)CVE-\d{4}-\d{4,7}").unwrap());
static PORT_TRIGGER: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)\bports? (\d+)").unwrap());
static URL: Lazy<Regex> =
    Lazy::new(|| Regex::new(r#"(?i)(?:https?|ftp)://[^\s<>"'`{}|\\^]+"#).unwrap());
static EMAIL: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?(?:\.[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?)*\.[A-Za-z]{2,}")
        .unwrap()
});
static WINDOWS_PATH: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?:[A-Za-z]:|%[A-Za-z_]+%)\\[^\s]*").unwrap());
static UNIX_PATH: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"/[\w.\-]+(?:/[\w.\-]+)*/?").unwrap());

fn char_before(text: &str, at: usize) -> Option<char> {
    text[..at].chars().next_back()
}

fn char_after(text: &str, at: usize) -> Option<char> {
    text[at..].chars().next()
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// True when `c` followed by the char after it continues a dotted number,
/// e.g. the `.5` in `1.2.3.4.5`.
fn dotted_continuation(text: &str, at: usize) -> bool {
    let mut it = text[at..].chars();
    matches!((it.next(), it.next()), (Some('.'), Some(d)) if d.is_ascii_digit())
}

fn dotted_prefix(text: &str, at: usize) -> bool {
    let mut it = text[..at].chars().rev();
    matches!((it.next(), it.next()), (Some('.'), Some(d)) if d.is_ascii_digit())
}

fn valid_octet(s: &str) -> bool {
    if s.len() > 1 && s.starts_with('0') {
        return false;
    }
    s.parse::<u16>().map(|v| v <= 255).unwrap_or(false)
}

/// Dotted-quad IPv4 addresses with every octet in 0..=255.
pub fn ipv4(text: &str) -> Vec<Range<usize>> {
    IPV4.find_iter(text)
        .filter(|m| {
            let (s, e) = (m.start(), m.end());
            let left_ok = char_before(text, s).map_or(true, |c| !is_word(c)) && !dotted_prefix(text, s);
            let right_ok = char_after(text, e).map_or(true, |c| !is_word(c)) && !dotted_continuation(text, e);
            left_ok && right_ok && m.as_str().split('.').all(valid_octet)
        })
        .map(|m| m.range())
        .collect()
}

/// Bracket-free IPv6 addresses (full or `::`-compressed).
pub fn ipv6(text: &str) -> Vec<Range<usize>> {
    IPV6.find_iter(text)
        .filter(|m| {
            let s = m.as_str();
            let bounded = char_before(text, m.start()).map_or(true, |c| !is_word(c) && c != ':')
                && char_after(text, m.end()).map_or(true, |c| !is_word(c) && c != ':');
            bounded
                && s.chars().any(|c| c.is_ascii_hexdigit())
                && s.parse::<Ipv6Addr>().is_ok()
        })
        .map(|m| m.range())
        .collect()
}

/// Word-bounded hex digests of length 32 (MD5), 40 (SHA-1) or 64 (SHA-256).
pub fn hashes(text: &str) -> Vec<Range<usize>> {
    HEX_RUN
        .find_iter(text)
        .filter(|m| {
            matches!(m.len(), 32 | 40 | 64)
                && char_before(text, m.start()).map_or(true, |c| !is_word(c))
                && char_after(text, m.end()).map_or(true, |c| !is_word(c))
        })
        .map(|m| m.range())
        .collect()
}

pub fn cves(text: &str) -> Vec<Range<usize>> {
    CVE.find_iter(text)
        .filter(|m| {
            char_before(text, m.start()).map_or(true, |c| !is_word(c))
                && char_after(text, m.end()).map_or(true, |c| !is_word(c))
        })
        .map(|m| m.range())
        .collect()
}

fn valid_port(digits: &str) -> bool {
    if digits.len() > 1 && digits.starts_with('0') {
        return false;
    }
    digits.len() <= 5 && digits.parse::<u32>().map(|v| v <= 65_535).unwrap_or(false)
}

/// Port numbers: digits right after `port `/`ports `, or after `:` that ends
/// an IPv4 match. The range covers the digits only.
pub fn ports(text: &str, ipv4_matches: &[Range<usize>]) -> Vec<Range<usize>> {
    let digits_end = |start: usize| {
        start
            + text[start..]
                .char_indices()
                .find(|(_, c)| !c.is_ascii_digit())
                .map_or(text.len() - start, |(i, _)| i)
    };
    let mut out = Vec::new();
    for caps in PORT_TRIGGER.captures_iter(text) {
        let g = caps.get(1).unwrap();
        let after = char_after(text, g.end());
        if after.map_or(true, |c| !is_word(c)) && valid_port(g.as_str()) {
            out.push(g.range());
        }
    }
    for ip in ipv4_matches {
        if char_after(text, ip.end) != Some(':') {
            continue;
        }
        let start = ip.end + 1;
        let end = digits_end(start);
        if end > start
            && char_after(text, end).map_or(true, |c| !is_word(c))
            && valid_port(&text[start..end])
        {
            out.push(start..end);
        }
    }
    out.sort_by_key(|r| (r.start, r.end));
    out.dedup();
    out
}

/// Drops trailing sentence punctuation and unbalanced closing brackets.
fn trim_trailing(text: &str, mut range: Range<usize>) -> Range<usize> {
    loop {
        let s = &text[range.clone()];
        let Some(last) = s.chars().next_back() else { break };
        let strip = match last {
            '.' | ',' | ';' | ':' | '!' | '?' | '\'' | '"' => true,
            ')' => s.matches('(').count() < s.matches(')').count(),
            ']' => s.matches('[').count() < s.matches(']').count(),
            _ => false,
        };
        if !strip {
            break;
        }
        range.end -= last.len_utf8();
    }
    range
}

/// `http`, `https` and `ftp` URLs with a non-empty authority.
pub fn urls(text: &str) -> Vec<Range<usize>> {
    URL.find_iter(text)
        .filter(|m| char_before(text, m.start()).map_or(true, |c| !c.is_alphanumeric()))
        .map(|m| trim_trailing(text, m.range()))
        .filter(|r| {
            let s = &text[r.clone()];
            let after_scheme = &s[s.find("://").unwrap() + 3..];
            after_scheme
                .chars()
                .next()
                .map_or(false, |c| c.is_alphanumeric() || c == '[')
        })
        .collect()
}

pub fn emails(text: &str) -> Vec<Range<usize>> {
    EMAIL
        .find_iter(text)
        .filter(|m| {
            let local = &m.as_str()[..m.as_str().find('@').unwrap()];
            char_before(text, m.start()).map_or(true, |c| !is_word(c) && c != '.' && c != '@')
                && char_after(text, m.end()).map_or(true, |c| !is_word(c) && c != '@')
                && !local.starts_with('.')
                && !local.ends_with('.')
                && !local.contains("..")
        })
        .map(|m| m.range())
        .collect()
}

/// `C:\...` and `%VAR%\...` paths.
pub fn windows_paths(text: &str) -> Vec<Range<usize>> {
    WINDOWS_PATH
        .find_iter(text)
        .filter(|m| char_before(text, m.start()).map_or(true, |c| !is_word(c)))
        .map(|m| trim_trailing(text, m.range()))
        .collect()
}

/// Absolute Unix paths such as `/etc/passwd`.
pub fn unix_paths(text: &str) -> Vec<Range<usize>> {
    UNIX_PATH
        .find_iter(text)
        .filter(|m| char_before(text, m.start()).map_or(true, |c| !is_word(c) && c != '/' && c != ':'))
        .map(|m| trim_trailing(text, m.range()))
        .filter(|r| r.len() > 1)
        .collect()
}
