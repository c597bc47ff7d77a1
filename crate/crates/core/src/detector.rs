//! Obfuscation feature detection over an [`AppModel`].
//!
//! Every heuristic is evaluated per package. App-level verdicts are the OR
//! of the package verdicts, once over all packages and once over the
//! declared main package and its subpackages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{in_package_subtree, AppModel, ClassRecord, PackageTree};
use crate::names::{count_matches, AlphabetMode, RenameAlphabet, WindowsKeywordSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Smallest scope (classes per package, members per class) that gets a verdict.
    pub min_scope_size: usize,
    /// Minimum matched fraction for a scope to count as obfuscated.
    pub match_threshold: f64,
    pub evaluate_annotations: bool,
    pub alphabet_modes: BTreeSet<AlphabetMode>,
    /// Extra obfuscation dictionary tried alongside the built-in alphabets.
    pub custom_alphabet: Option<Vec<String>>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            min_scope_size: 3,
            match_threshold: 0.5,
            evaluate_annotations: true,
            alphabet_modes: [AlphabetMode::MixedCase, AlphabetMode::LowerCase].into(),
            custom_alphabet: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.match_threshold > 0.0 && self.match_threshold <= 1.0) {
            return Err(format!("match_threshold {} outside (0, 1]", self.match_threshold));
        }
        if self.min_scope_size == 0 {
            return Err("min_scope_size must be at least 1".into());
        }
        if self.alphabet_modes.is_empty() && self.custom_alphabet.is_none() {
            return Err("no alphabet to match against".into());
        }
        if let Some(words) = &self.custom_alphabet {
            RenameAlphabet::custom(words.iter().cloned()).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    /// Alphabets to try for a scope. Mixed case is only tried when the scope
    /// shows single uppercase-letter names, or when it is the only mode.
    fn alphabets_for(&self, names: &BTreeSet<&str>) -> Vec<RenameAlphabet> {
        let mut out = Vec::with_capacity(3);
        let lower = self.alphabet_modes.contains(&AlphabetMode::LowerCase);
        if lower {
            out.push(RenameAlphabet::lower_case());
        }
        if self.alphabet_modes.contains(&AlphabetMode::MixedCase) {
            let uppercase_evidence = names.iter().any(|n| {
                let mut chars = n.chars();
                matches!((chars.next(), chars.next()), (Some(c), None) if c.is_ascii_uppercase())
            });
            if uppercase_evidence || !lower {
                out.push(RenameAlphabet::mixed_case());
            }
        }
        if let Some(words) = &self.custom_alphabet {
            if let Ok(al) = RenameAlphabet::custom(words.iter().cloned()) {
                out.push(al);
            }
        }
        out
    }
}

/// Result of matching one name scope against the rename sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeVerdict {
    /// Number of entries in the scope (overloaded members count separately).
    pub scope_size: usize,
    pub distinct_names: usize,
    pub matched: usize,
    pub fraction: f64,
    pub flagged: bool,
}

/// Matches a scope of `entries` identifiers. Returns `None` when the scope is
/// below the configured minimum size.
pub fn judge_scope<'a>(entries: &[&'a str], cfg: &DetectorConfig) -> Option<ScopeVerdict> {
    if entries.is_empty() || entries.len() < cfg.min_scope_size {
        return None;
    }
    let distinct: BTreeSet<&str> = entries.iter().copied().collect();
    let (matched, total) = cfg
        .alphabets_for(&distinct)
        .iter()
        .map(|al| count_matches(distinct.iter().copied(), al))
        .max_by_key(|(hits, _)| *hits)
        .unwrap_or((0, distinct.len()));
    let fraction = matched as f64 / total as f64;
    Some(ScopeVerdict {
        scope_size: entries.len(),
        distinct_names: total,
        matched,
        fraction,
        flagged: fraction >= cfg.match_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    ClassNameObfuscated,
    MethodNameObfuscated,
    FieldNameObfuscated,
    OverloadingDetected,
    DebugInfoRemoved,
    AnnotationsRemoved,
    SourceFilesRemoved,
    WindowsKeywordsDetected,
}

impl Feature {
    pub const ALL: [Feature; 8] = [
        Feature::ClassNameObfuscated,
        Feature::MethodNameObfuscated,
        Feature::FieldNameObfuscated,
        Feature::OverloadingDetected,
        Feature::DebugInfoRemoved,
        Feature::AnnotationsRemoved,
        Feature::SourceFilesRemoved,
        Feature::WindowsKeywordsDetected,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Feature::ClassNameObfuscated => "Class name obfuscation",
            Feature::MethodNameObfuscated => "Method name obfuscation",
            Feature::FieldNameObfuscated => "Field name obfuscation",
            Feature::OverloadingDetected => "Method name overloading",
            Feature::DebugInfoRemoved => "Debug information removed",
            Feature::AnnotationsRemoved => "Annotations removed",
            Feature::SourceFilesRemoved => "Source files removed",
            Feature::WindowsKeywordsDetected => "Windows keyword class names",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFlags {
    pub class_name_obfuscated: bool,
    pub method_name_obfuscated: bool,
    pub field_name_obfuscated: bool,
    pub overloading_detected: bool,
    pub debug_info_removed: bool,
    pub source_files_removed: bool,
    pub annotations_removed: bool,
    pub windows_keywords_detected: bool,
}

impl FeatureFlags {
    pub fn get(&self, feature: Feature) -> bool {
        match feature {
            Feature::ClassNameObfuscated => self.class_name_obfuscated,
            Feature::MethodNameObfuscated => self.method_name_obfuscated,
            Feature::FieldNameObfuscated => self.field_name_obfuscated,
            Feature::OverloadingDetected => self.overloading_detected,
            Feature::DebugInfoRemoved => self.debug_info_removed,
            Feature::AnnotationsRemoved => self.annotations_removed,
            Feature::SourceFilesRemoved => self.source_files_removed,
            Feature::WindowsKeywordsDetected => self.windows_keywords_detected,
        }
    }

    pub fn set(&mut self, feature: Feature, value: bool) {
        let slot = match feature {
            Feature::ClassNameObfuscated => &mut self.class_name_obfuscated,
            Feature::MethodNameObfuscated => &mut self.method_name_obfuscated,
            Feature::FieldNameObfuscated => &mut self.field_name_obfuscated,
            Feature::OverloadingDetected => &mut self.overloading_detected,
            Feature::DebugInfoRemoved => &mut self.debug_info_removed,
            Feature::AnnotationsRemoved => &mut self.annotations_removed,
            Feature::SourceFilesRemoved => &mut self.source_files_removed,
            Feature::WindowsKeywordsDetected => &mut self.windows_keywords_detected,
        };
        *slot = value;
    }

    fn or_assign(&mut self, other: &FeatureFlags) {
        for f in Feature::ALL {
            self.set(f, self.get(f) || other.get(f));
        }
    }

    pub fn any_name_feature(&self) -> bool {
        self.class_name_obfuscated || self.method_name_obfuscated || self.field_name_obfuscated
    }
}

/// Per-package evidence behind the flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PackageDetail {
    #[serde(flatten)]
    pub flags: FeatureFlags,
    pub class_count: usize,
    /// `None` when the package is below the minimum scope size.
    pub class_names: Option<ScopeVerdict>,
    pub method_scoped_classes: usize,
    pub method_flagged_classes: usize,
    pub field_scoped_classes: usize,
    pub field_flagged_classes: usize,
    pub overloading_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub app_id: String,
    pub all_packages: FeatureFlags,
    /// `None` when the app declares no main package or it holds no classes.
    pub main_package: Option<FeatureFlags>,
    pub packages: BTreeMap<String, PackageDetail>,
    /// Verdicts on the segment names directly below each package prefix.
    pub package_segments: BTreeMap<String, ScopeVerdict>,
    pub windows_keyword_evidence: Vec<String>,
}

impl FeatureReport {
    pub fn empty(app_id: impl Into<String>) -> Self {
        FeatureReport {
            app_id: app_id.into(),
            all_packages: FeatureFlags::default(),
            main_package: None,
            packages: BTreeMap::new(),
            package_segments: BTreeMap::new(),
            windows_keyword_evidence: Vec::new(),
        }
    }
}

/// Class-name verdict for every package in the tree.
pub fn detect_class_names(tree: &PackageTree<'_>, cfg: &DetectorConfig) -> BTreeMap<String, Option<ScopeVerdict>> {
    tree.packages()
        .map(|(pkg, classes)| {
            let names: Vec<&str> = classes.iter().map(|c| c.simple_name()).collect();
            (pkg.to_string(), judge_scope(&names, cfg))
        })
        .collect()
}

/// Method- and field-name verdicts of a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberVerdict {
    pub methods: Option<ScopeVerdict>,
    pub fields: Option<ScopeVerdict>,
}

pub fn class_member_verdict(class: &ClassRecord, cfg: &DetectorConfig) -> MemberVerdict {
    let methods: Vec<&str> = class
        .methods
        .iter()
        .filter(|m| !m.is_initializer())
        .map(|m| m.name.as_str())
        .collect();
    let fields: Vec<&str> = class.fields.iter().map(|f| f.name.as_str()).collect();
    MemberVerdict {
        methods: judge_scope(&methods, cfg),
        fields: judge_scope(&fields, cfg),
    }
}

/// Aggregated member verdicts of one package.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MemberTally {
    pub method_scoped: usize,
    pub method_flagged: usize,
    pub field_scoped: usize,
    pub field_flagged: usize,
    pub method_obfuscated: bool,
    pub field_obfuscated: bool,
}

/// Classes without any method (field) are outside the method (field) scope;
/// classes with members but no verdict count as unflagged.
pub fn tally_members(classes: &[&ClassRecord], cfg: &DetectorConfig) -> MemberTally {
    let mut t = MemberTally::default();
    for class in classes {
        let v = class_member_verdict(class, cfg);
        if class.methods.iter().any(|m| !m.is_initializer()) {
            t.method_scoped += 1;
            t.method_flagged += v.methods.is_some_and(|s| s.flagged) as usize;
        }
        if !class.fields.is_empty() {
            t.field_scoped += 1;
            t.field_flagged += v.fields.is_some_and(|s| s.flagged) as usize;
        }
    }
    let passes = |flagged: usize, scoped: usize| {
        flagged > 0 && flagged as f64 / scoped as f64 >= cfg.match_threshold
    };
    t.method_obfuscated = passes(t.method_flagged, t.method_scoped);
    t.field_obfuscated = passes(t.field_flagged, t.field_scoped);
    t
}

pub fn detect_member_names(tree: &PackageTree<'_>, cfg: &DetectorConfig) -> BTreeMap<String, MemberTally> {
    tree.packages()
        .map(|(pkg, classes)| (pkg.to_string(), tally_members(classes, cfg)))
        .collect()
}

/// A class overloads obfuscated names when a name from the generated prefix
/// (sized by the class's distinct method-name count) is carried by methods
/// with at least two different parameter lists.
pub fn class_overloads(class: &ClassRecord, cfg: &DetectorConfig) -> bool {
    let mut signatures: BTreeMap<&str, BTreeSet<&[String]>> = BTreeMap::new();
    for m in class.methods.iter().filter(|m| !m.is_initializer()) {
        signatures
            .entry(m.name.as_str())
            .or_default()
            .insert(m.param_types.as_slice());
    }
    let distinct: BTreeSet<&str> = signatures.keys().copied().collect();
    let k = distinct.len();
    let alphabets = cfg.alphabets_for(&distinct);
    signatures.iter().any(|(name, sigs)| {
        sigs.len() >= 2 && alphabets.iter().any(|al| crate::names::in_prefix(al, name, k))
    })
}

pub fn detect_overloading(tree: &PackageTree<'_>, cfg: &DetectorConfig) -> BTreeMap<String, usize> {
    tree.packages()
        .map(|(pkg, classes)| {
            let n = classes.iter().filter(|c| class_overloads(c, cfg)).count();
            (pkg.to_string(), n)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StrippingFlags {
    pub debug_info_removed: bool,
    pub source_files_removed: bool,
    pub annotations_removed: bool,
}

pub fn stripping_flags(classes: &[&ClassRecord], cfg: &DetectorConfig) -> StrippingFlags {
    let mut coded = classes.iter().flat_map(|c| &c.methods).filter(|m| m.has_code).peekable();
    let debug_info_removed = coded.peek().is_some() && coded.all(|m| !m.has_line_numbers);
    StrippingFlags {
        debug_info_removed,
        source_files_removed: !classes.is_empty() && classes.iter().all(|c| c.source_file.is_none()),
        annotations_removed: cfg.evaluate_annotations
            && !classes.is_empty()
            && classes.iter().all(|c| !c.annotations_present),
    }
}

pub fn detect_stripping(tree: &PackageTree<'_>, cfg: &DetectorConfig) -> BTreeMap<String, StrippingFlags> {
    tree.packages()
        .map(|(pkg, classes)| (pkg.to_string(), stripping_flags(classes, cfg)))
        .collect()
}

/// Qualified names of classes whose simple name is a reserved Windows name.
pub fn detect_windows_keywords(tree: &PackageTree<'_>, keywords: &WindowsKeywordSet) -> (bool, Vec<String>) {
    let evidence: Vec<String> = tree
        .packages()
        .flat_map(|(_, classes)| classes.iter())
        .filter(|c| keywords.contains(c.simple_name()))
        .map(|c| c.qualified_name.clone())
        .collect();
    (!evidence.is_empty(), evidence)
}

/// Runs every detector and assembles both views.
pub fn analyze(app: &AppModel, cfg: &DetectorConfig) -> FeatureReport {
    let tree = PackageTree::build(app);
    let keywords = WindowsKeywordSet::default();
    let mut report = FeatureReport::empty(&app.app_id);

    for (pkg, classes) in tree.packages() {
        let class_names = {
            let names: Vec<&str> = classes.iter().map(|c| c.simple_name()).collect();
            judge_scope(&names, cfg)
        };
        let members = tally_members(classes, cfg);
        let overloading_classes = classes.iter().filter(|c| class_overloads(c, cfg)).count();
        let stripping = stripping_flags(classes, cfg);
        let windows = classes.iter().any(|c| keywords.contains(c.simple_name()));

        let flags = FeatureFlags {
            class_name_obfuscated: class_names.as_ref().is_some_and(|v| v.flagged),
            method_name_obfuscated: members.method_obfuscated,
            field_name_obfuscated: members.field_obfuscated,
            overloading_detected: overloading_classes > 0,
            debug_info_removed: stripping.debug_info_removed,
            source_files_removed: stripping.source_files_removed,
            annotations_removed: stripping.annotations_removed,
            windows_keywords_detected: windows,
        };
        report.all_packages.or_assign(&flags);
        report.packages.insert(
            pkg.to_string(),
            PackageDetail {
                flags,
                class_count: classes.len(),
                class_names,
                method_scoped_classes: members.method_scoped,
                method_flagged_classes: members.method_flagged,
                field_scoped_classes: members.field_scoped,
                field_flagged_classes: members.field_flagged,
                overloading_classes,
            },
        );
    }

    report.main_package = app.main_package.as_deref().and_then(|main| {
        let mut view: Option<FeatureFlags> = None;
        for (pkg, detail) in &report.packages {
            if in_package_subtree(pkg, main) {
                view.get_or_insert_with(FeatureFlags::default).or_assign(&detail.flags);
            }
        }
        view
    });

    for (parent, segments) in tree.child_segments() {
        if let Some(v) = judge_scope(&segments, cfg) {
            report.package_segments.insert(parent, v);
        }
    }
    report.windows_keyword_evidence = detect_windows_keywords(&tree, &keywords).1;
    report
}
