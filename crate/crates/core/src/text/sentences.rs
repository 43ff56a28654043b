use super::tokenize::{tokenize, Token};

const ABBREVIATIONS: &[&str] = &[
    "e.g", "i.e", "etc", "vs", "mr", "mrs", "ms", "dr", "prof", "inc", "ltd", "co", "corp", "jr",
    "sr", "st", "fig", "no", "approx", "u.s",
];

fn is_terminator(t: &Token) -> bool {
    matches!(t.surface.as_str(), "." | "!" | "?")
}

fn is_closer(t: &Token) -> bool {
    matches!(t.surface.as_str(), "\"" | "'" | ")" | "]" | "”" | "’")
}

fn is_opener(t: &Token) -> bool {
    matches!(t.surface.as_str(), "\"" | "'" | "(" | "[" | "“" | "‘")
}

fn starts_sentence(t: &Token) -> bool {
    t.surface
        .chars()
        .next()
        .map_or(false, |c| c.is_uppercase() || c.is_ascii_digit())
}

/// True if the word glued to the terminator at `term` is an abbreviation or an initial.
fn after_abbreviation(tokens: &[Token], term: usize) -> bool {
    let Some(prev) = term.checked_sub(1).map(|i| &tokens[i]) else {
        return false;
    };
    if prev.end != tokens[term].start || !prev.is_word() {
        return false;
    }
    let lower = prev.surface.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
        || (prev.surface.chars().count() == 1 && prev.surface.chars().all(char::is_alphabetic))
}

/// Sentence ranges `(start, end)` in characters, end-exclusive.
///
/// A sentence ends at a `.`, `!` or `?` token (plus any closing quotes or
/// brackets glued to it) followed by whitespace and a token starting with an
/// uppercase letter or a digit. Terminators inside tokens, such as the dot in
/// `10.2`, are never split points.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    split_tokens(&tokenize(text))
}

pub(crate) fn split_tokens(tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if tokens.is_empty() {
        return out;
    }
    let mut first = 0;
    let mut i = 0;
    while i < tokens.len() {
        if !is_terminator(&tokens[i]) {
            i += 1;
            continue;
        }
        let term = i;
        let mut last = i;
        while last + 1 < tokens.len()
            && (is_terminator(&tokens[last + 1]) || is_closer(&tokens[last + 1]))
            && tokens[last + 1].start == tokens[last].end
        {
            last += 1;
        }
        let boundary = match tokens.get(last + 1) {
            Some(next) if next.start > tokens[last].end => {
                let opener_then_upper = is_opener(next)
                    && tokens.get(last + 2).map_or(false, starts_sentence);
                (starts_sentence(next) || opener_then_upper) && !after_abbreviation(tokens, term)
            }
            _ => false,
        };
        if boundary {
            out.push((tokens[first].start, tokens[last].end));
            first = last + 1;
        }
        i = last + 1;
    }
    if first < tokens.len() {
        out.push((tokens[first].start, tokens[tokens.len() - 1].end));
    }
    out
}
