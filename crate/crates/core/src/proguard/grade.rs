//! Binary grading of a ProGuard setup against a keep/obfuscate rubric.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::AppModel;

use super::gradle::BuildConfig;
use super::matcher::{class_name_matches, rule_covers, ClassTarget, MemberQuery};
use super::rules::{KeepRule, RuleFile};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub class: String,
    #[serde(default)]
    pub member: Option<String>,
}

impl Target {
    pub fn class(class: impl Into<String>) -> Self {
        Target {
            class: class.into(),
            member: None,
        }
    }

    pub fn member(class: impl Into<String>, member: impl Into<String>) -> Self {
        Target {
            class: class.into(),
            member: Some(member.into()),
        }
    }
}

/// Targets that must stay readable and targets that must be renamed. Both
/// empty means only activation is graded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    #[serde(default)]
    pub must_keep: Vec<Target>,
    #[serde(default)]
    pub must_obfuscate: Vec<Target>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    MissingMinify,
    MissingProguardFiles,
    DontobfuscatePresent,
    KeepMissingTarget,
    ClassNameMisspelled,
    KeepCoversForbidden,
    WildcardTooBroad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeResult {
    pub verdict: Verdict,
    pub reasons: Vec<Reason>,
    /// Human-readable notes, one per finding.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GradeOptions {
    /// Accept a class-level `-keep` without member specs as covering members.
    pub lenient: bool,
}

const MAX_TYPO_DISTANCE: usize = 2;

fn has_wildcard(pattern: &str) -> bool {
    pattern.contains(['*', '?', '!', ','])
}

/// Builds the matcher's view of a target class, from the app when it has
/// the class, otherwise from the rubric's own knowledge of it.
fn class_target(class: &str, app: Option<&AppModel>, rubric: &Rubric) -> ClassTarget {
    if let Some(record) = app.and_then(|a| a.class(class)) {
        return ClassTarget::from_record(record);
    }
    let mut target = ClassTarget::named(class);
    target.members = rubric
        .must_keep
        .iter()
        .chain(&rubric.must_obfuscate)
        .filter(|t| t.class == class)
        .filter_map(|t| t.member.as_deref().map(MemberQuery::parse))
        .collect();
    target
}

/// Members of `class` the rubric's member string refers to.
fn member_queries(target: &ClassTarget, member: &str) -> Vec<MemberQuery> {
    let wanted = MemberQuery::parse(member);
    let found: Vec<MemberQuery> = target
        .members
        .iter()
        .filter(|m| {
            m.name == wanted.name
                && match (&wanted.params, &m.params) {
                    (Some(w), Some(a)) => w == a,
                    _ => true,
                }
        })
        .cloned()
        .collect();
    if found.is_empty() {
        vec![wanted]
    } else {
        found
    }
}

fn covered(rules: &[KeepRule], class: &ClassTarget, member: Option<&str>, lenient: bool) -> Option<usize> {
    match member {
        None => rules.iter().position(|r| rule_covers(r, class, None, lenient)),
        Some(m) => {
            let queries = member_queries(class, m);
            rules
                .iter()
                .position(|r| queries.iter().any(|q| rule_covers(r, class, Some(q), lenient)))
        }
    }
}

pub fn grade(
    build: &BuildConfig,
    rules: &RuleFile,
    rubric: &Rubric,
    app: Option<&AppModel>,
    opts: GradeOptions,
) -> GradeResult {
    let mut reasons = BTreeSet::new();
    let mut notes = Vec::new();

    if !build.minify_enabled {
        reasons.insert(Reason::MissingMinify);
        notes.push(format!("build type `{}` does not enable minification", build.build_type));
    }
    if build.proguard_files.is_empty() {
        reasons.insert(Reason::MissingProguardFiles);
        notes.push(format!("build type `{}` names no ProGuard files", build.build_type));
    }
    if rules.flags.dontobfuscate {
        reasons.insert(Reason::DontobfuscatePresent);
        notes.push("-dontobfuscate disables renaming".into());
    }

    let known_classes: BTreeSet<&str> = match app {
        Some(a) => a.classes.iter().map(|c| c.qualified_name.as_str()).collect(),
        None => rubric
            .must_keep
            .iter()
            .chain(&rubric.must_obfuscate)
            .map(|t| t.class.as_str())
            .collect(),
    };

    for target in &rubric.must_keep {
        let class = class_target(&target.class, app, rubric);
        if covered(&rules.keep_rules, &class, target.member.as_deref(), opts.lenient).is_some() {
            continue;
        }
        let typo = rules.keep_rules.iter().find(|r| {
            !has_wildcard(&r.class_pattern)
                && !known_classes.iter().any(|k| class_name_matches(&r.class_pattern, k))
                && strsim::levenshtein(&r.class_pattern, &target.class) <= MAX_TYPO_DISTANCE
        });
        let what = describe(target);
        match typo {
            Some(r) => {
                reasons.insert(Reason::ClassNameMisspelled);
                notes.push(format!("`{}` looks like a misspelling of {what}", r.class_pattern));
            }
            None => {
                reasons.insert(Reason::KeepMissingTarget);
                notes.push(format!("no keep rule covers {what}"));
            }
        }
    }

    for target in &rubric.must_obfuscate {
        let class = class_target(&target.class, app, rubric);
        let hit = covered(&rules.keep_rules, &class, None, opts.lenient)
            .or_else(|| {
                target
                    .member
                    .as_deref()
                    .and_then(|m| covered(&rules.keep_rules, &class, Some(m), opts.lenient))
            });
        if let Some(i) = hit {
            let rule = &rules.keep_rules[i];
            reasons.insert(Reason::KeepCoversForbidden);
            notes.push(format!("`{rule}` keeps {}", describe(target)));
            if has_wildcard(&rule.class_pattern) {
                reasons.insert(Reason::WildcardTooBroad);
            }
        }
    }

    let reasons: Vec<Reason> = reasons.into_iter().collect();
    GradeResult {
        verdict: if reasons.is_empty() { Verdict::Correct } else { Verdict::Incorrect },
        reasons,
        notes,
    }
}

fn describe(t: &Target) -> String {
    match &t.member {
        Some(m) => format!("{}#{m}", t.class),
        None => t.class.clone(),
    }
}
