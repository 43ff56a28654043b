use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};

use super::RulesError;
use crate::mention::{leftmost_longest, Mention, Provenance};
use crate::schema::SchemaVersion;
use crate::text::Document;

/// Lowercases char by char without changing the char count.
fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Case-folds and collapses internal whitespace to single spaces.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace()
        .map(|w| w.chars().map(fold_char).collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

/// The folded, whitespace-collapsed view of a text with a map back to the
/// original char offsets.
pub(crate) struct FoldedText {
    pub text: String,
    /// original char offset of each folded char
    pub origin: Vec<usize>,
    /// folded char index of each folded byte offset (only valid on boundaries)
    byte_to_char: Vec<usize>,
}

impl FoldedText {
    pub fn new(text: &str) -> Self {
        let mut out = String::with_capacity(text.len());
        let mut origin = Vec::new();
        let mut in_space = false;
        for (ci, c) in text.chars().enumerate() {
            if c.is_whitespace() {
                if !in_space && !out.is_empty() {
                    out.push(' ');
                    origin.push(ci);
                }
                in_space = true;
            } else {
                out.push(fold_char(c));
                origin.push(ci);
                in_space = false;
            }
        }
        let mut byte_to_char = vec![usize::MAX; out.len() + 1];
        for (i, (b, _)) in out.char_indices().enumerate() {
            byte_to_char[b] = i;
        }
        byte_to_char[out.len()] = origin.len();
        FoldedText { text: out, origin, byte_to_char }
    }

    /// Original char span of a folded byte range.
    pub fn original_span(&self, start_byte: usize, end_byte: usize) -> (usize, usize) {
        let s = self.byte_to_char[start_byte];
        let e = self.byte_to_char[end_byte];
        (self.origin[s], self.origin[e - 1] + 1)
    }
}

/// A term list for one entity type with a multi-pattern automaton over it.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    type_label: String,
    entries: Vec<String>,
    automaton: AhoCorasick,
}

impl Gazetteer {
    pub fn type_label(&self) -> &str {
        &self.type_label
    }

    /// Normalised entries, sorted.
    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Normalises and deduplicates `entries` and builds the automaton.
pub fn compile_gazetteer<S: AsRef<str>>(type_label: &str, entries: &[S]) -> Result<Gazetteer, RulesError> {
    let set: BTreeSet<String> = entries
        .iter()
        .map(|e| normalize_term(e.as_ref()))
        .filter(|e| !e.is_empty())
        .collect();
    if set.is_empty() {
        return Err(RulesError::EmptyGazetteer(type_label.to_string()));
    }
    let entries: Vec<String> = set.into_iter().collect();
    let automaton = AhoCorasick::builder()
        .match_kind(MatchKind::Standard)
        .build(&entries)
        .map_err(|e| RulesError::Automaton(e.to_string()))?;
    Ok(Gazetteer { type_label: type_label.to_string(), entries, automaton })
}

/// Case-insensitive, token-aligned matches, resolved leftmost-longest.
pub fn match_gazetteer(gaz: &Gazetteer, doc: &Document) -> Vec<Mention> {
    let folded = FoldedText::new(doc.text());
    let tokens = doc.tokens();
    let starts: HashSet<usize> = tokens.iter().map(|t| t.start).collect();
    let ends: HashSet<usize> = tokens.iter().map(|t| t.end).collect();
    let candidates = gaz
        .automaton
        .find_overlapping_iter(&folded.text)
        .filter_map(|m| {
            let (s, e) = folded.original_span(m.start(), m.end());
            (starts.contains(&s) && ends.contains(&e))
                .then(|| Mention::new(s, e, gaz.type_label.clone(), Provenance::Rule))
        })
        .collect();
    leftmost_longest(candidates)
}

/// Parses `term<TAB>type` lines; `#` starts a comment line.
pub fn parse_gazetteer_tsv(
    source: &str,
    content: &str,
    into: &mut BTreeMap<String, Vec<String>>,
) -> Result<(), RulesError> {
    for (i, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let Some((term, label)) = line.split_once('\t') else {
            return Err(RulesError::Parse {
                source_name: source.to_string(),
                line: i + 1,
                message: "expected `term<TAB>type`".into(),
            });
        };
        into.entry(label.trim().to_string()).or_default().push(term.to_string());
    }
    Ok(())
}

fn compile_all(
    grouped: BTreeMap<String, Vec<String>>,
    schema: &SchemaVersion,
) -> Result<Vec<Gazetteer>, RulesError> {
    grouped
        .into_iter()
        .map(|(label, terms)| {
            schema
                .lookup(&label)
                .map_err(|_| RulesError::UnknownType(label.clone()))?;
            compile_gazetteer(&label, &terms)
        })
        .collect()
}

/// Loads every `*.tsv` file in `dir`, one gazetteer per type.
pub fn load_gazetteers(dir: &Path, schema: &SchemaVersion) -> Result<Vec<Gazetteer>, RulesError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |x| x == "tsv"))
        .collect();
    paths.sort();
    let mut grouped = BTreeMap::new();
    for p in paths {
        let content = fs::read_to_string(&p)?;
        parse_gazetteer_tsv(&p.display().to_string(), &content, &mut grouped)?;
    }
    compile_all(grouped, schema)
}

const SEED_FILES: &[(&str, &str)] = &[
    ("attack_type.tsv", include_str!("../../data/gazetteers/attack_type.tsv")),
    ("file_extension.tsv", include_str!("../../data/gazetteers/file_extension.tsv")),
    ("malware_type.tsv", include_str!("../../data/gazetteers/malware_type.tsv")),
    ("operating_system.tsv", include_str!("../../data/gazetteers/operating_system.tsv")),
    ("programming_language.tsv", include_str!("../../data/gazetteers/programming_language.tsv")),
    ("protocol.tsv", include_str!("../../data/gazetteers/protocol.tsv")),
];

/// The shipped seed lists for the six gazetteer types.
pub fn seed_gazetteers() -> Vec<Gazetteer> {
    let mut grouped = BTreeMap::new();
    for (name, content) in SEED_FILES {
        parse_gazetteer_tsv(name, content, &mut grouped).expect("seed gazetteer parses");
    }
    compile_all(grouped, SchemaVersion::round2()).expect("seed gazetteers compile")
}

/// Writes the seed lists into `dir`, e.g. to start a curated copy.
pub fn write_seed_gazetteers(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, content) in SEED_FILES {
        fs::write(dir.join(name), content)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document::from_raw("t", text)
    }

    #[test]
    fn compile_examples() {
        let g = compile_gazetteer("Protocol", &["HTTP", "HTTPS", "DNS"]).unwrap();
        assert_eq!(g.len(), 3);
        let g = compile_gazetteer("Protocol", &["http", "HTTP", "  Http "]).unwrap();
        assert_eq!(g.entries(), ["http"]);
        let empty: [&str; 0] = [];
        assert!(matches!(compile_gazetteer("Protocol", &empty), Err(RulesError::EmptyGazetteer(_))));
        assert!(matches!(compile_gazetteer("Protocol", &["  "]), Err(RulesError::EmptyGazetteer(_))));
    }

    #[test]
    fn normalisation_collapses_whitespace() {
        assert_eq!(normalize_term("  Mac \t OS   X "), "mac os x");
    }

    #[test]
    fn match_examples() {
        let os = compile_gazetteer("Operating_System", &["windows"]).unwrap();
        assert_eq!(
            match_gazetteer(&os, &doc("targets Windows systems")),
            vec![Mention::new(8, 15, "Operating_System", Provenance::Rule)]
        );
        assert!(match_gazetteer(&os, &doc("Windowsill")).is_empty());

        let mac = compile_gazetteer("Operating_System", &["mac os", "mac os x"]).unwrap();
        assert_eq!(
            match_gazetteer(&mac, &doc("Mac OS X")),
            vec![Mention::new(0, 8, "Operating_System", Provenance::Rule)]
        );
        // the longer entry fails alignment, the shorter one still matches
        assert_eq!(
            match_gazetteer(&mac, &doc("Mac OS Xtra")),
            vec![Mention::new(0, 6, "Operating_System", Provenance::Rule)]
        );
    }

    #[test]
    fn whitespace_runs_in_text_still_match() {
        let mac = compile_gazetteer("Operating_System", &["mac os x"]).unwrap();
        let d = Document::new("t", "on Mac   OS X.", None, &Default::default()).unwrap();
        assert_eq!(match_gazetteer(&mac, &d), vec![Mention::new(3, 13, "Operating_System", Provenance::Rule)]);
    }

    #[test]
    fn extension_entries_align_on_punctuation_tokens() {
        let ext = compile_gazetteer("File_Extension", &[".exe"]).unwrap();
        assert_eq!(match_gazetteer(&ext, &doc("a .exe file")).len(), 1);
        assert!(match_gazetteer(&ext, &doc("payload.exe")).is_empty());
    }

    #[test]
    fn seeds_load() {
        let seeds = seed_gazetteers();
        let labels: Vec<&str> = seeds.iter().map(|g| g.type_label()).collect();
        assert_eq!(
            labels,
            ["Attack_Type", "File_Extension", "Malware_Type", "Operating_System", "Programming_Language", "Protocol"]
        );
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let mut g = BTreeMap::new();
        let err = parse_gazetteer_tsv("x.tsv", "# c\nok\tProtocol\nbroken\n", &mut g).unwrap_err();
        assert!(matches!(err, RulesError::Parse { line: 3, .. }));
    }
}
