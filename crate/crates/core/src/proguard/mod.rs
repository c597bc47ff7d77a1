//! ProGuard and Gradle configuration: parsing, keep-rule semantics and grading.

use thiserror::Error;

mod grade;
mod gradle;
mod matcher;
mod rules;

pub use grade::{grade, GradeOptions, GradeResult, Reason, Rubric, Target, Verdict};
pub use gradle::{parse_gradle_snippet, BuildConfig, GradleConfig};
pub use matcher::{class_name_matches, rule_covers, rule_matches, wildcard_match, ClassTarget, MemberQuery};
pub use rules::{parse_rules, ClassKind, GlobalFlags, KeepRule, KeepVariant, MemberKind, MemberSpec, RuleFile};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}
