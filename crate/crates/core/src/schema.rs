//! Entity type registry for the two annotation rounds.
//!
//! Round one is the type list the first annotation study used; round two
//! replaces the confusing types (`Tool`, `Process`, `Filepath`, `Filename`)
//! and adds `File_Extension`, `Function` and `Path`. Both rounds also carry
//! the 18 OntoNotes general-purpose types.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unknown entity type `{0}`")]
    UnknownType(String),
    #[error("unknown schema version `{0}` (expected round1 or round2)")]
    UnknownVersion(String),
    #[error("invalid schema document: {0}")]
    Invalid(String),
}

/// How a type is recognised by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Regex,
    Gazetteer,
    Statistical,
    BuiltinRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Cyber,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityType {
    pub name: String,
    pub category: Category,
    pub origin: Origin,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VersionId {
    Round1,
    Round2,
}

impl VersionId {
    pub fn as_str(self) -> &'static str {
        match self {
            VersionId::Round1 => "round1",
            VersionId::Round2 => "round2",
        }
    }
}

impl fmt::Display for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VersionId {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round1" => Ok(VersionId::Round1),
            "round2" => Ok(VersionId::Round2),
            other => Err(SchemaError::UnknownVersion(other.to_string())),
        }
    }
}

/// Where a retired round-one label goes in round two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Migration {
    To(String),
    Drop,
}

/// An immutable set of entity types plus the label migration into round two.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaVersion {
    id: VersionId,
    types: BTreeMap<String, EntityType>,
    migration: BTreeMap<String, Migration>,
}

use Category::*;
use Origin::*;

const SHARED_CYBER: &[(&str, Category, &str)] = &[
    ("Malware_Name", Statistical, "Proper name of a malware family or sample, e.g. WannaCry."),
    ("Malware_Type", Gazetteer, "Class of malware such as ransomware, trojan or worm."),
    ("Software_Name", Statistical, "Name of a software product, library or tool."),
    ("Version_Tag", Statistical, "Version identifier attached to software, e.g. 2.4.1."),
    ("Vulnerability", Statistical, "Named vulnerability, e.g. EternalBlue or Log4Shell."),
    ("Attack_Type", Gazetteer, "Attack technique category such as phishing or SQL injection."),
    ("Programming_Language", Gazetteer, "Programming or scripting language."),
    ("Email", BuiltinRule, "Email address."),
    ("CVE", Regex, "CVE identifier of the form CVE-YYYY-NNNN."),
    ("Campaign", Statistical, "Named attack campaign or operation."),
    ("IP_Address", Regex, "IPv4 or IPv6 address."),
    ("Protocol", Gazetteer, "Network or application protocol such as HTTP or SMB."),
    ("Threat_Actor", Statistical, "Threat actor or group, e.g. Lazarus Group."),
    ("Operating_System", Gazetteer, "Operating system such as Windows or Linux."),
    ("Hash", Regex, "MD5, SHA-1 or SHA-256 digest in hexadecimal."),
    ("URL", BuiltinRule, "URL with an http, https or ftp scheme."),
    ("Port", Regex, "Network port number."),
];

const ROUND2_ONLY: &[(&str, Category, &str)] = &[
    ("File_Extension", Gazetteer, "File extension such as .exe or .dll."),
    ("Path", Statistical, "File system path or file name."),
    ("Function", Statistical, "Function, API call, process or method name."),
];

const ROUND1_ONLY: &[(&str, Category, &str)] = &[
    ("Filename", Statistical, "Name of a file."),
    ("Filepath", Statistical, "Full path to a file."),
    ("Tool", Statistical, "Tool used by an attacker or defender."),
    ("Process", Statistical, "Running process name."),
];

/// The OntoNotes general-purpose tag set.
pub const GENERAL_TYPES: &[(&str, &str)] = &[
    ("PERSON", "People, including fictional."),
    ("NORP", "Nationalities or religious or political groups."),
    ("FAC", "Buildings, airports, highways, bridges."),
    ("ORG", "Companies, agencies, institutions."),
    ("GPE", "Countries, cities, states."),
    ("LOC", "Non-GPE locations, mountain ranges, bodies of water."),
    ("PRODUCT", "Objects, vehicles, foods (not services)."),
    ("EVENT", "Named hurricanes, battles, wars, sports events."),
    ("WORK_OF_ART", "Titles of books, songs."),
    ("LAW", "Named documents made into laws."),
    ("LANGUAGE", "Any named language."),
    ("DATE", "Absolute or relative dates or periods."),
    ("TIME", "Times smaller than a day."),
    ("PERCENT", "Percentage, including %."),
    ("MONEY", "Monetary values, including unit."),
    ("QUANTITY", "Measurements, as of weight or distance."),
    ("ORDINAL", "first, second, etc."),
    ("CARDINAL", "Numerals that do not fall under another type."),
];

const ROUND1_MIGRATION: &[(&str, &str)] = &[
    ("Tool", "Software_Name"),
    ("Process", "Function"),
    ("Filepath", "Path"),
    ("Filename", "Path"),
];

static ROUND1: Lazy<SchemaVersion> = Lazy::new(|| SchemaVersion::builtin(VersionId::Round1));
static ROUND2: Lazy<SchemaVersion> = Lazy::new(|| SchemaVersion::builtin(VersionId::Round2));

fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphabetic() || c == '_')
}

impl SchemaVersion {
    /// The embedded schema for a round.
    pub fn get(id: VersionId) -> &'static SchemaVersion {
        match id {
            VersionId::Round1 => &ROUND1,
            VersionId::Round2 => &ROUND2,
        }
    }

    pub fn round1() -> &'static SchemaVersion {
        &ROUND1
    }

    pub fn round2() -> &'static SchemaVersion {
        &ROUND2
    }

    fn builtin(id: VersionId) -> Self {
        let extra = match id {
            VersionId::Round1 => ROUND1_ONLY,
            VersionId::Round2 => ROUND2_ONLY,
        };
        let mut types = BTreeMap::new();
        for &(name, category, description) in SHARED_CYBER.iter().chain(extra) {
            types.insert(
                name.to_string(),
                EntityType {
                    name: name.to_string(),
                    category,
                    origin: Cyber,
                    description: description.to_string(),
                },
            );
        }
        for &(name, description) in GENERAL_TYPES {
            types.insert(
                name.to_string(),
                EntityType {
                    name: name.to_string(),
                    category: Statistical,
                    origin: General,
                    description: description.to_string(),
                },
            );
        }
        let migration = match id {
            VersionId::Round1 => ROUND1_MIGRATION
                .iter()
                .map(|&(from, to)| (from.to_string(), Migration::To(to.to_string())))
                .collect(),
            VersionId::Round2 => BTreeMap::new(),
        };
        SchemaVersion { id, types, migration }
    }

    pub fn id(&self) -> VersionId {
        self.id
    }

    pub fn lookup(&self, name: &str) -> Result<&EntityType, SchemaError> {
        self.types
            .get(name)
            .ok_or_else(|| SchemaError::UnknownType(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.types.contains_key(name)
    }

    /// Types in name order.
    pub fn types(&self) -> impl Iterator<Item = &EntityType> {
        self.types.values()
    }

    pub fn names_in(&self, category: Category) -> Vec<&str> {
        self.types
            .values()
            .filter(|t| t.category == category)
            .map(|t| t.name.as_str())
            .collect()
    }

    pub fn migration(&self) -> &BTreeMap<String, Migration> {
        &self.migration
    }

    pub fn to_document(&self) -> SchemaDocument {
        SchemaDocument {
            version: self.id,
            types: self.types.values().cloned().collect(),
            migration: self
                .migration
                .iter()
                .map(|(from, to)| {
                    let to = match to {
                        Migration::To(t) => Some(t.clone()),
                        Migration::Drop => None,
                    };
                    (from.clone(), to)
                })
                .collect(),
        }
    }

    pub fn from_document(doc: SchemaDocument) -> Result<Self, SchemaError> {
        let mut types = BTreeMap::new();
        for t in doc.types {
            if !is_valid_name(&t.name) {
                return Err(SchemaError::Invalid(format!("bad type name `{}`", t.name)));
            }
            if types.insert(t.name.clone(), t.clone()).is_some() {
                return Err(SchemaError::Invalid(format!("duplicate type `{}`", t.name)));
            }
        }
        let migration = doc
            .migration
            .into_iter()
            .map(|(from, to)| (from, to.map(Migration::To).unwrap_or(Migration::Drop)))
            .collect();
        Ok(SchemaVersion { id: doc.version, types, migration })
    }
}

/// JSON exchange form: `{version, types:[...], migration:{from:to|null}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub version: VersionId,
    pub types: Vec<EntityType>,
    pub migration: BTreeMap<String, Option<String>>,
}

/// Exact, case-sensitive lookup.
pub fn lookup_type(name: &str, version: VersionId) -> Result<&'static EntityType, SchemaError> {
    SchemaVersion::get(version).lookup(name)
}

/// Maps a label into the round-two type set. `None` means the label is dropped.
///
/// Round-two names map to themselves, so the function is idempotent.
pub fn migrate_label(label: &str) -> Result<Option<&'static str>, SchemaError> {
    let round2 = SchemaVersion::round2();
    if let Some(t) = round2.types.get(label) {
        return Ok(Some(t.name.as_str()));
    }
    match SchemaVersion::round1().migration.get(label) {
        Some(Migration::To(target)) => Ok(Some(round2.lookup(target)?.name.as_str())),
        Some(Migration::Drop) => Ok(None),
        None => Err(SchemaError::UnknownType(label.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    const TABLE1: [&str; 20] = [
        "Malware_Name",
        "Campaign",
        "Malware_Type",
        "IP_Address",
        "Software_Name",
        "Protocol",
        "Version_Tag",
        "Threat_Actor",
        "Vulnerability",
        "Operating_System",
        "Attack_Type",
        "Hash",
        "Programming_Language",
        "URL",
        "Email",
        "Path",
        "File_Extension",
        "Function",
        "CVE",
        "Port",
    ];

    fn cyber(v: &SchemaVersion) -> BTreeSet<&str> {
        v.types()
            .filter(|t| t.origin == Cyber)
            .map(|t| t.name.as_str())
            .collect()
    }

    #[test]
    fn round2_has_exactly_the_twenty_cyber_types() {
        let expected: BTreeSet<&str> = TABLE1.into_iter().collect();
        assert_eq!(cyber(SchemaVersion::round2()), expected);
    }

    #[test]
    fn round1_differs_by_the_renamed_types() {
        let r1 = cyber(SchemaVersion::round1());
        for added in ["Filename", "Filepath", "Tool", "Process"] {
            assert!(r1.contains(added), "{added}");
        }
        for missing in ["File_Extension", "Function", "Path"] {
            assert!(!r1.contains(missing), "{missing}");
        }
        assert_eq!(r1.len(), 21);
    }

    #[test]
    fn both_rounds_carry_all_general_types() {
        for v in [SchemaVersion::round1(), SchemaVersion::round2()] {
            let general = v.types().filter(|t| t.origin == General).count();
            assert_eq!(general, 18);
        }
    }

    #[test]
    fn names_are_well_formed() {
        for v in [SchemaVersion::round1(), SchemaVersion::round2()] {
            assert!(v.types().all(|t| is_valid_name(&t.name)));
        }
    }

    #[test]
    fn lookup_examples() {
        let actor = lookup_type("Threat_Actor", VersionId::Round2).unwrap();
        assert_eq!(actor.category, Statistical);
        assert_eq!(
            lookup_type("Tool", VersionId::Round2),
            Err(SchemaError::UnknownType("Tool".into()))
        );
        assert_eq!(lookup_type("IP_Address", VersionId::Round2).unwrap().category, Regex);
        // exact match only
        assert!(lookup_type("threat_actor", VersionId::Round2).is_err());
    }

    #[test]
    fn migration_examples() {
        assert_eq!(migrate_label("Process").unwrap(), Some("Function"));
        assert_eq!(migrate_label("Filepath").unwrap(), Some("Path"));
        assert_eq!(migrate_label("Filename").unwrap(), Some("Path"));
        assert_eq!(migrate_label("Tool").unwrap(), Some("Software_Name"));
        assert_eq!(migrate_label("Malware_Name").unwrap(), Some("Malware_Name"));
        assert!(matches!(migrate_label("Nonsense"), Err(SchemaError::UnknownType(_))));
    }

    #[test]
    fn migration_is_total_and_idempotent() {
        for t in SchemaVersion::round1().types() {
            let once = migrate_label(&t.name).unwrap();
            if let Some(label) = once {
                assert!(SchemaVersion::round2().contains(label));
                assert_eq!(migrate_label(label).unwrap(), Some(label));
            }
        }
    }

    #[test]
    fn category_sets() {
        let r2 = SchemaVersion::round2();
        let set = |c| r2.names_in(c).into_iter().collect::<BTreeSet<_>>();
        assert_eq!(set(Regex), BTreeSet::from(["CVE", "Hash", "IP_Address", "Port"]));
        assert_eq!(set(BuiltinRule), BTreeSet::from(["Email", "URL"]));
        assert_eq!(
            set(Gazetteer),
            BTreeSet::from([
                "Attack_Type",
                "File_Extension",
                "Malware_Type",
                "Operating_System",
                "Programming_Language",
                "Protocol"
            ])
        );
    }

    #[test]
    fn document_round_trip() {
        let doc = SchemaVersion::round1().to_document();
        let json = serde_json::to_string(&doc).unwrap();
        let back: SchemaDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(SchemaVersion::from_document(back).unwrap(), *SchemaVersion::round1());
        assert!(json.contains("\"builtin-rule\""));
    }
}
