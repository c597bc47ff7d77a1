//! DEX and APK reading: just enough of the format to build an [`AppModel`].

use std::collections::BTreeSet;
use std::io::{Cursor, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AppModel;

mod parse;
mod reader;

pub use parse::SUPPORTED_VERSIONS;

/// Uncompressed size limit for a single DEX entry inside an APK.
pub const MAX_DEX_ENTRY: u64 = 512 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DexError {
    #[error("not a DEX file or APK (bad magic)")]
    InvalidMagic,
    #[error("unsupported version {0:?} (supported: 035-039)")]
    UnsupportedVersion(String),
    #[error("truncated {section} at offset {offset:#x}")]
    Truncated { section: &'static str, offset: usize },
    #[error("malformed {section} at offset {offset:#x}: {message}")]
    Malformed {
        section: &'static str,
        offset: usize,
        message: String,
    },
    #[error("no code: archive has no classes*.dex entry")]
    NoCode,
    #[error("zip: {0}")]
    Zip(String),
    #[error("parsed model is invalid: {0}")]
    Invalid(String),
    #[error("{entry}: {source}")]
    Entry { entry: String, source: Box<DexError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainerSource {
    Apk,
    Dex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DexEntry {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DexContainer {
    pub source: ContainerSource,
    /// classes.dex, classes2.dex, ... in numeric order.
    pub dex_entries: Vec<DexEntry>,
    pub total_bytes: u64,
}

/// Index of a root-level `classesN.dex` entry name (`classes.dex` is 1).
fn dex_entry_index(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("classes")?.strip_suffix(".dex")?;
    if digits.is_empty() {
        return Some(1);
    }
    if digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|n| *n >= 2)
}

impl DexContainer {
    /// Accepts a zip archive or a bare DEX stream, told apart by magic.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DexError> {
        if bytes.starts_with(b"dex\n") {
            return Ok(DexContainer {
                source: ContainerSource::Dex,
                dex_entries: vec![DexEntry {
                    name: "classes.dex".into(),
                    bytes: bytes.to_vec(),
                }],
                total_bytes: bytes.len() as u64,
            });
        }
        if !bytes.starts_with(b"PK") {
            return Err(DexError::InvalidMagic);
        }
        let mut zip = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| DexError::Zip(e.to_string()))?;
        let mut found: Vec<(u32, String)> = zip
            .file_names()
            .filter_map(|n| dex_entry_index(n).map(|i| (i, n.to_string())))
            .collect();
        if found.is_empty() {
            return Err(DexError::NoCode);
        }
        found.sort();
        let mut dex_entries = Vec::with_capacity(found.len());
        for (_, name) in found {
            let file = zip.by_name(&name).map_err(|e| DexError::Zip(e.to_string()))?;
            let mut data = Vec::new();
            file.take(MAX_DEX_ENTRY + 1)
                .read_to_end(&mut data)
                .map_err(|e| DexError::Zip(format!("{name}: {e}")))?;
            if data.len() as u64 > MAX_DEX_ENTRY {
                return Err(DexError::Zip(format!("{name}: larger than {MAX_DEX_ENTRY} bytes")));
            }
            dex_entries.push(DexEntry { name, bytes: data });
        }
        Ok(DexContainer {
            source: ContainerSource::Apk,
            dex_entries,
            total_bytes: bytes.len() as u64,
        })
    }
}

/// A parsed app plus non-fatal findings such as duplicate classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedApp {
    pub model: AppModel,
    pub warnings: Vec<String>,
}

pub fn parse_container(container: &DexContainer, app_id: &str, main_package: Option<&str>) -> Result<ParsedApp, DexError> {
    let mut model = AppModel::new(app_id, main_package.map(str::to_string));
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for entry in &container.dex_entries {
        let classes = parse::classes(&entry.bytes).map_err(|e| wrap(entry, e))?;
        for class in classes {
            if seen.insert(class.qualified_name.clone()) {
                model.classes.push(class);
            } else {
                warnings.push(format!(
                    "{}: duplicate class {}, keeping the first definition",
                    entry.name, class.qualified_name
                ));
            }
        }
    }
    model.validate().map_err(|e| DexError::Invalid(e.to_string()))?;
    Ok(ParsedApp { model, warnings })
}

fn wrap(entry: &DexEntry, e: DexError) -> DexError {
    if entry.name == "classes.dex" {
        e
    } else {
        DexError::Entry {
            entry: entry.name.clone(),
            source: Box::new(e),
        }
    }
}

pub fn parse_apk_detailed(bytes: &[u8], app_id: &str, main_package: Option<&str>) -> Result<ParsedApp, DexError> {
    parse_container(&DexContainer::from_bytes(bytes)?, app_id, main_package)
}

/// APK or bare DEX bytes to an app model. Duplicate classes across DEX
/// entries keep their first definition.
pub fn parse_apk(bytes: &[u8], app_id: &str, main_package: Option<&str>) -> Result<AppModel, DexError> {
    parse_apk_detailed(bytes, app_id, main_package).map(|p| p.model)
}

fn primitive(c: u8) -> Option<&'static str> {
    Some(match c {
        b'V' => "void",
        b'Z' => "boolean",
        b'B' => "byte",
        b'S' => "short",
        b'C' => "char",
        b'I' => "int",
        b'J' => "long",
        b'F' => "float",
        b'D' => "double",
        _ => return None,
    })
}

/// `Lcom/foo/Bar;` to `com.foo.Bar`, `[I` to `int[]`. `None` for strings
/// that are not type descriptors.
pub fn descriptor_to_java(desc: &str) -> Option<String> {
    let dims = desc.bytes().take_while(|b| *b == b'[').count();
    let base = &desc[dims..];
    let mut out = match base.as_bytes() {
        [c] => primitive(*c).filter(|p| dims == 0 || *p != "void")?.to_string(),
        [b'L', inner @ .., b';'] if !inner.is_empty() => {
            let inner = std::str::from_utf8(inner).ok()?;
            if inner.split('/').any(str::is_empty) || inner.contains(['.', ';', '[']) {
                return None;
            }
            inner.replace('/', ".")
        }
        _ => return None,
    };
    for _ in 0..dims {
        out.push_str("[]");
    }
    Some(out)
}

/// Inverse of [`descriptor_to_java`].
pub fn java_to_descriptor(name: &str) -> Option<String> {
    let base = name.trim_end_matches("[]");
    let dims = (name.len() - base.len()) / 2;
    let mut out = "[".repeat(dims);
    let code = match base {
        "void" if dims == 0 => "V",
        "void" => return None,
        "boolean" => "Z",
        "byte" => "B",
        "short" => "S",
        "char" => "C",
        "int" => "I",
        "long" => "J",
        "float" => "F",
        "double" => "D",
        _ => {
            if base.is_empty() || base.split('.').any(str::is_empty) || base.contains(['/', ';', '[', ']']) {
                return None;
            }
            out.push('L');
            out.push_str(&base.replace('.', "/"));
            out.push(';');
            return Some(out);
        }
    };
    out.push_str(code);
    Some(out)
}

/// Package prefixes identifying commercial protectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerLists {
    #[serde(default = "default_dexprotector")]
    pub dexprotector: Vec<String>,
    #[serde(default = "default_bangcle")]
    pub bangcle: Vec<String>,
}

fn default_dexprotector() -> Vec<String> {
    vec!["com.dexprotector".into()]
}

fn default_bangcle() -> Vec<String> {
    vec!["com.secneo".into(), "com.bangcle".into()]
}

impl Default for MarkerLists {
    fn default() -> Self {
        MarkerLists {
            dexprotector: default_dexprotector(),
            bangcle: default_bangcle(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolMarkerReport {
    pub dexprotector_detected: bool,
    pub bangcle_detected: bool,
    /// Matched strings, class descriptors shown in dotted form.
    pub marker_evidence: Vec<String>,
}

/// Whether `s` names something under `prefix`, in dotted or descriptor form.
fn mentions(s: &str, prefix: &str) -> bool {
    let slashed = prefix.replace('.', "/");
    [prefix, slashed.as_str()].iter().any(|p| {
        s.match_indices(p).any(|(i, _)| {
            let before = s[..i].chars().next_back();
            let after = s[i + p.len()..].chars().next();
            let boundary_before = before.map_or(true, |c| !(c.is_alphanumeric() || c == '_' || c == '$'));
            let boundary_after = after.map_or(true, |c| matches!(c, '.' | '/' | ';' | '$'));
            boundary_before && boundary_after
        })
    })
}


/// Scans string tables (class descriptors included) of every DEX entry.
/// Entries whose string table cannot be read contribute nothing.
pub fn scan_tool_markers(container: &DexContainer, lists: &MarkerLists) -> ToolMarkerReport {
    let mut strings = BTreeSet::new();
    for entry in &container.dex_entries {
        if let Ok(table) = parse::strings(&entry.bytes) {
            strings.extend(table);
        }
    }
    scan_strings(strings.iter().map(String::as_str), lists)
}

/// Marker scan over arbitrary names, e.g. the classes of an app model.
pub fn scan_strings<'a>(strings: impl IntoIterator<Item = &'a str>, lists: &MarkerLists) -> ToolMarkerReport {
    let mut report = ToolMarkerReport::default();
    let mut evidence = BTreeSet::new();
    for s in strings {
        let s = descriptor_to_java(s).unwrap_or_else(|| s.to_string());
        if lists.dexprotector.iter().any(|p| mentions(&s, p)) {
            report.dexprotector_detected = true;
            evidence.insert(s.clone());
        }
        if lists.bangcle.iter().any(|p| mentions(&s, p)) {
            report.bangcle_detected = true;
            evidence.insert(s);
        }
    }
    report.marker_evidence = evidence.into_iter().collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn descriptors() {
        assert_eq!(descriptor_to_java("La/b/C;").as_deref(), Some("a.b.C"));
        assert_eq!(descriptor_to_java("[[I").as_deref(), Some("int[][]"));
        assert_eq!(descriptor_to_java("[Ljava/lang/String;").as_deref(), Some("java.lang.String[]"));
        assert_eq!(descriptor_to_java("V").as_deref(), Some("void"));
        for bad in ["", "L;", "La//b;", "[V", "Q", "La/b", "II"] {
            assert_eq!(descriptor_to_java(bad), None, "{bad}");
        }
        assert_eq!(java_to_descriptor("a.b.C$D").as_deref(), Some("La/b/C$D;"));
        assert_eq!(java_to_descriptor("long[]").as_deref(), Some("[J"));
        assert_eq!(java_to_descriptor("void[]"), None);
    }

    proptest! {
        #[test]
        fn descriptor_round_trip(segs in prop::collection::vec("[a-zA-Z_$][a-zA-Z0-9_$]{0,6}", 1..5), dims in 0usize..3) {
            let desc = format!("{}L{};", "[".repeat(dims), segs.join("/"));
            let java = descriptor_to_java(&desc).unwrap();
            prop_assert_eq!(java_to_descriptor(&java).unwrap(), desc);
        }
    }

    #[test]
    fn entry_names() {
        assert_eq!(dex_entry_index("classes.dex"), Some(1));
        assert_eq!(dex_entry_index("classes10.dex"), Some(10));
        assert_eq!(dex_entry_index("classes1.dex"), None);
        assert_eq!(dex_entry_index("classes02.dex"), None);
        assert_eq!(dex_entry_index("lib/classes.dex"), None);
    }

    #[test]
    fn markers() {
        let lists = MarkerLists::default();
        let r = scan_strings(["com.dexprotector.annotations.ClassEncryption"], &lists);
        assert!(r.dexprotector_detected && !r.bangcle_detected);
        let r = scan_strings(["Lcom/secneo/apkwrapper/ApplicationWrapper;"], &lists);
        assert!(r.bangcle_detected);
        assert_eq!(r.marker_evidence, vec!["com.secneo.apkwrapper.ApplicationWrapper"]);
        let r = scan_strings(["com.example.hello.MainActivity", "Hello", "com.dexprotectorx.Y"], &lists);
        assert_eq!(r, ToolMarkerReport::default());
    }

    #[test]
    fn garbage_is_rejected() {
        assert_eq!(parse_apk(b"0123456789", "x", None), Err(DexError::InvalidMagic));
        let mut v = b"dex\n034\0".to_vec();
        v.resize(0x70, 0);
        assert_eq!(parse_apk(&v, "x", None), Err(DexError::UnsupportedVersion("034".into())));
        v[4..7].copy_from_slice(b"035");
        v.truncate(0x40);
        assert_eq!(
            parse_apk(&v, "x", None),
            Err(DexError::Truncated {
                section: "header",
                offset: 0
            })
        );
    }
}
