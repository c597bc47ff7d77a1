//! Domain types shared by every analysis, and the canonical JSON form of an
//! app (one app per document).
//!
//! Class names are kept in dot-separated binary form (`com.foo.Bar`,
//! `com.foo.Bar$Inner`). Type descriptors in member signatures use Java
//! source spelling (`int`, `java.lang.String`, `byte[]`).

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::FeatureReport;

/// Method names fixed by the class file format; never renamed.
pub const CONSTRUCTOR: &str = "<init>";
pub const STATIC_INITIALIZER: &str = "<clinit>";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed JSON at byte offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("invalid document at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub name: String,
    pub param_types: Vec<String>,
    pub return_type: String,
    pub has_code: bool,
    pub has_line_numbers: bool,
}

impl MethodRecord {
    pub fn is_initializer(&self) -> bool {
        self.name == CONSTRUCTOR || self.name == STATIC_INITIALIZER
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub name: String,
    #[serde(rename = "type")]
    pub field_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub qualified_name: String,
    pub is_interface: bool,
    /// `None` when the source file attribute was stripped.
    #[serde(default)]
    pub source_file: Option<String>,
    pub annotations_present: bool,
    /// Direct superclass and implemented interfaces, when known. Only keep
    /// rules with an `extends`/`implements` clause consult this.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub supertypes: Vec<String>,
    #[serde(default)]
    pub methods: Vec<MethodRecord>,
    #[serde(default)]
    pub fields: Vec<FieldRecord>,
}

impl ClassRecord {
    pub fn new(qualified_name: impl Into<String>) -> Self {
        ClassRecord {
            qualified_name: qualified_name.into(),
            is_interface: false,
            source_file: None,
            annotations_present: false,
            supertypes: Vec::new(),
            methods: Vec::new(),
            fields: Vec::new(),
        }
    }

    /// Package prefix; empty for the default package.
    pub fn package(&self) -> &str {
        split_qualified(&self.qualified_name).0
    }

    pub fn simple_name(&self) -> &str {
        split_qualified(&self.qualified_name).1
    }
}

/// Splits `a.b.C` into (`a.b`, `C`).
pub fn split_qualified(name: &str) -> (&str, &str) {
    match name.rfind('.') {
        Some(i) => (&name[..i], &name[i + 1..]),
        None => ("", name),
    }
}

/// True if `package` is `root` or nested below it.
pub fn in_package_subtree(package: &str, root: &str) -> bool {
    root.is_empty()
        || package == root
        || (package.len() > root.len()
            && package.starts_with(root)
            && package.as_bytes()[root.len()] == b'.')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppModel {
    pub app_id: String,
    #[serde(default)]
    pub main_package: Option<String>,
    pub classes: Vec<ClassRecord>,
}

impl AppModel {
    pub fn new(app_id: impl Into<String>, main_package: Option<String>) -> Self {
        AppModel {
            app_id: app_id.into(),
            main_package,
            classes: Vec::new(),
        }
    }

    pub fn class(&self, qualified_name: &str) -> Option<&ClassRecord> {
        self.classes
            .iter()
            .find(|c| c.qualified_name == qualified_name)
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.app_id.is_empty() {
            return Err(invalid("app_id", "must be non-empty"));
        }
        if let Some(main) = &self.main_package {
            if !valid_dotted(main) {
                return Err(invalid("main_package", "not a dot-separated package name"));
            }
        }
        let mut seen = HashSet::with_capacity(self.classes.len());
        for (ci, class) in self.classes.iter().enumerate() {
            if !valid_dotted(&class.qualified_name) {
                return Err(invalid(
                    format!("classes[{ci}].qualified_name"),
                    format!("`{}` is not a dot-separated class name", class.qualified_name),
                ));
            }
            if !seen.insert(class.qualified_name.as_str()) {
                return Err(ModelError::DuplicateClass(class.qualified_name.clone()));
            }
            for (mi, method) in class.methods.iter().enumerate() {
                if method.name.is_empty() {
                    return Err(invalid(format!("classes[{ci}].methods[{mi}].name"), "empty"));
                }
                if let Some(pi) = method.param_types.iter().position(|p| p.is_empty()) {
                    return Err(invalid(
                        format!("classes[{ci}].methods[{mi}].param_types[{pi}]"),
                        "empty type",
                    ));
                }
                if method.has_line_numbers && !method.has_code {
                    return Err(invalid(
                        format!("classes[{ci}].methods[{mi}].has_line_numbers"),
                        "line numbers without code",
                    ));
                }
            }
            for (fi, field) in class.fields.iter().enumerate() {
                if field.name.is_empty() {
                    return Err(invalid(format!("classes[{ci}].fields[{fi}].name"), "empty"));
                }
            }
        }
        Ok(())
    }
}

fn valid_dotted(name: &str) -> bool {
    !name.is_empty() && name.split('.').all(|seg| !seg.is_empty())
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

fn syntax_error(bytes: &[u8], err: serde_json::Error) -> ModelError {
    ModelError::Syntax {
        offset: byte_offset(bytes, err.line(), err.column()),
        message: err.to_string(),
    }
}

/// Converts serde_json's 1-based line/column position into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for _ in 1..line {
        match bytes[offset..].iter().position(|&b| b == b'\n') {
            Some(nl) => offset += nl + 1,
            None => return bytes.len(),
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}

fn from_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ModelError> {
    if bytes.starts_with(b"\xEF\xBB\xBF") {
        return Err(ModelError::Syntax {
            offset: 0,
            message: "byte order mark not allowed".into(),
        });
    }
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| syntax_error(bytes, e))?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ModelError::Validation {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializing plain data cannot fail");
    out.push(b'\n');
    out
}

/// Reads one app from its canonical JSON document.
pub fn load_app(bytes: &[u8]) -> Result<AppModel, ModelError> {
    let app: AppModel = from_json(bytes)?;
    app.validate()?;
    Ok(app)
}

pub fn save_app(app: &AppModel) -> Vec<u8> {
    to_json(app)
}

pub fn save_report(report: &FeatureReport) -> Vec<u8> {
    to_json(report)
}

pub fn load_report(bytes: &[u8]) -> Result<FeatureReport, ModelError> {
    from_json(bytes)
}

/// Classes of one app grouped by package. Each key is a full package name
/// (empty string for the default package); only packages holding at least
/// one class are present.
#[derive(Debug, Clone, Default)]
pub struct PackageTree<'a> {
    nodes: BTreeMap<&'a str, Vec<&'a ClassRecord>>,
}

impl<'a> PackageTree<'a> {
    pub fn build(app: &'a AppModel) -> Self {
        Self::from_classes(app.classes.iter())
    }

    pub fn from_classes(classes: impl IntoIterator<Item = &'a ClassRecord>) -> Self {
        let mut nodes: BTreeMap<&str, Vec<&ClassRecord>> = BTreeMap::new();
        for class in classes {
            nodes.entry(class.package()).or_default().push(class);
        }
        PackageTree { nodes }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.nodes.values().map(Vec::len).sum()
    }

    pub fn classes_in(&self, package: &str) -> &[&'a ClassRecord] {
        self.nodes.get(package).map_or(&[], Vec::as_slice)
    }

    /// Packages in lexicographic order with their classes.
    pub fn packages(&self) -> impl Iterator<Item = (&'a str, &[&'a ClassRecord])> + '_ {
        self.nodes.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// The part of the tree rooted at `root` (the package and its subpackages).
    pub fn subtree(&self, root: &str) -> PackageTree<'a> {
        PackageTree {
            nodes: self
                .nodes
                .iter()
                .filter(|(pkg, _)| in_package_subtree(pkg, root))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }

    /// Every package prefix implied by the populated nodes, mapped to the
    /// set of next-level segment names below it. The root prefix is "".
    pub fn child_segments(&self) -> BTreeMap<String, Vec<&'a str>> {
        let mut out: BTreeMap<String, Vec<&'a str>> = BTreeMap::new();
        for pkg in self.nodes.keys().copied().filter(|p| !p.is_empty()) {
            let mut parent_end = 0;
            for (i, seg) in pkg.split('.').enumerate() {
                let parent = if i == 0 { "" } else { &pkg[..parent_end] };
                let children = out.entry(parent.to_string()).or_default();
                if !children.contains(&seg) {
                    children.push(seg);
                }
                parent_end = if i == 0 { seg.len() } else { parent_end + 1 + seg.len() };
            }
        }
        out
    }
}
