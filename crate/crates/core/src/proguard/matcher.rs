//! Which classes and members a keep rule applies to.

use crate::model::{ClassRecord, FieldRecord, MethodRecord};

use super::rules::{ClassKind, KeepRule, KeepVariant, MemberKind, MemberSpec};

const PRIMITIVES: &[&str] = &["boolean", "byte", "char", "short", "int", "long", "float", "double"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Lit(char),
    /// `?`: one character other than `.`.
    One,
    /// `*`: any run without `.`.
    Star,
    /// `**` (and `***`): any run.
    AnyRun,
}

fn compile(pattern: &str) -> Vec<Piece> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut out = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '*' => {
                let mut run = 0;
                while i < chars.len() && chars[i] == '*' {
                    run += 1;
                    i += 1;
                }
                out.push(if run == 1 { Piece::Star } else { Piece::AnyRun });
                continue;
            }
            '?' => out.push(Piece::One),
            c => out.push(Piece::Lit(c)),
        }
        i += 1;
    }
    out
}

fn glob(pieces: &[Piece], text: &[char]) -> bool {
    // dp[j]: pieces[..i] match text[..j]
    let mut dp = vec![false; text.len() + 1];
    dp[0] = true;
    for piece in pieces {
        let mut next = vec![false; text.len() + 1];
        match piece {
            Piece::Star | Piece::AnyRun => {
                let mut reachable = false;
                for j in 0..=text.len() {
                    if dp[j] {
                        reachable = true;
                    }
                    next[j] = reachable;
                    if j < text.len() && *piece == Piece::Star && text[j] == '.' {
                        reachable = false;
                    }
                }
            }
            Piece::One => {
                for j in 0..text.len() {
                    next[j + 1] = dp[j] && text[j] != '.';
                }
            }
            Piece::Lit(c) => {
                for j in 0..text.len() {
                    next[j + 1] = dp[j] && text[j] == *c;
                }
            }
        }
        dp = next;
    }
    dp[text.len()]
}

/// Matches one name against a single pattern (no list syntax).
pub fn wildcard_match(pattern: &str, name: &str) -> bool {
    let text: Vec<char> = name.chars().collect();
    glob(&compile(pattern), &text)
}

/// Class name patterns may be comma-separated lists with `!` negators; the
/// first matching entry decides. A lone `*` matches classes in any package.
pub fn class_name_matches(pattern: &str, name: &str) -> bool {
    for entry in pattern.split(',') {
        let (negated, p) = match entry.strip_prefix('!') {
            Some(rest) => (true, rest),
            None => (false, entry),
        };
        let hit = p == "*" || wildcard_match(p, name);
        if hit {
            return !negated;
        }
    }
    false
}

fn type_matches(pattern: &str, ty: &str) -> bool {
    match pattern {
        "%" => PRIMITIVES.contains(&ty),
        "***" => true,
        // `*` and `**` never match primitive or array types.
        "*" | "**" => !PRIMITIVES.contains(&ty) && !ty.ends_with(']') && ty != "void" && wildcard_match(pattern, ty),
        _ => wildcard_match(pattern, ty),
    }
}

fn params_match(patterns: &[String], actual: &[String]) -> bool {
    match patterns.split_first() {
        None => actual.is_empty(),
        Some((p, rest)) if p == "..." => rest.is_empty() || (0..=actual.len()).any(|i| params_match(rest, &actual[i..])),
        Some((p, rest)) => actual
            .split_first()
            .is_some_and(|(a, tail)| type_matches(p, a) && params_match(rest, tail)),
    }
}

/// A member as seen by the matcher. Unknown parts (`None`) match anything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberQuery {
    pub kind: Option<MemberKind>,
    pub name: String,
    pub params: Option<Vec<String>>,
    pub value_type: Option<String>,
}

impl MemberQuery {
    pub fn method(m: &MethodRecord) -> Self {
        MemberQuery {
            kind: Some(MemberKind::Method),
            name: m.name.clone(),
            params: Some(m.param_types.clone()),
            value_type: Some(m.return_type.clone()),
        }
    }

    pub fn field(f: &FieldRecord) -> Self {
        MemberQuery {
            kind: Some(MemberKind::Field),
            name: f.name.clone(),
            params: None,
            value_type: Some(f.field_type.clone()),
        }
    }

    /// Parses `name`, `name()` or `name(int, java.lang.String)`.
    pub fn parse(text: &str) -> Self {
        let text = text.trim();
        match text.split_once('(') {
            Some((name, rest)) => {
                let inner = rest.trim_end_matches(')').trim();
                let params = if inner.is_empty() {
                    Vec::new()
                } else {
                    inner.split(',').map(|p| p.trim().to_string()).collect()
                };
                MemberQuery {
                    kind: Some(MemberKind::Method),
                    name: name.trim().to_string(),
                    params: Some(params),
                    value_type: None,
                }
            }
            None => MemberQuery {
                kind: None,
                name: text.to_string(),
                params: None,
                value_type: None,
            },
        }
    }
}

/// A class as seen by the matcher.
#[derive(Debug, Clone)]
pub struct ClassTarget {
    pub name: String,
    pub is_interface: bool,
    pub supertypes: Vec<String>,
    pub members: Vec<MemberQuery>,
}

impl ClassTarget {
    pub fn from_record(c: &ClassRecord) -> Self {
        ClassTarget {
            name: c.qualified_name.clone(),
            is_interface: c.is_interface,
            supertypes: c.supertypes.clone(),
            members: c
                .methods
                .iter()
                .map(MemberQuery::method)
                .chain(c.fields.iter().map(MemberQuery::field))
                .collect(),
        }
    }

    pub fn named(name: impl Into<String>) -> Self {
        ClassTarget {
            name: name.into(),
            is_interface: false,
            supertypes: Vec::new(),
            members: Vec::new(),
        }
    }
}

pub fn member_spec_matches(spec: &MemberSpec, member: &MemberQuery) -> bool {
    let kind_ok = match (spec.kind, member.kind) {
        (MemberKind::Any, _) | (_, None) => true,
        (want, Some(have)) => want == have || have == MemberKind::Any,
    };
    if !kind_ok || !wildcard_match(&spec.name_pattern, &member.name) {
        return false;
    }
    if spec.name_pattern == "*" && member.name.starts_with('<') && spec.type_pattern.is_none() {
        // `<methods>` and `*` do not cover constructors.
        return false;
    }
    if let (Some(p), Some(t)) = (&spec.type_pattern, &member.value_type) {
        if !type_matches(p, t) {
            return false;
        }
    }
    match (&spec.params, &member.params) {
        (Some(p), Some(a)) => params_match(p, a),
        _ => true,
    }
}

fn class_matches(rule: &KeepRule, class: &ClassTarget) -> bool {
    if !class_name_matches(&rule.class_pattern, &class.name) {
        return false;
    }
    let kind_ok = match rule.class_kind {
        ClassKind::Class => true,
        ClassKind::Interface => class.is_interface,
        ClassKind::Enum => class.supertypes.iter().any(|s| s == "java.lang.Enum"),
        ClassKind::AnnotationType => {
            class.is_interface && class.supertypes.iter().any(|s| s == "java.lang.annotation.Annotation")
        }
    };
    if !kind_ok {
        return false;
    }
    match &rule.extends_pattern {
        Some(p) => class.supertypes.iter().any(|s| class_name_matches(p, s)),
        None => true,
    }
}

fn members_present(rule: &KeepRule, class: &ClassTarget) -> bool {
    rule.member_specs
        .iter()
        .all(|spec| class.members.iter().any(|m| member_spec_matches(spec, m)))
}

/// Does `rule` protect the class (when `member` is `None`) or the given
/// member of the class from renaming?
///
/// In lenient mode a class-level `-keep`/`-keepnames` without member specs
/// also covers every member of the class.
pub fn rule_covers(rule: &KeepRule, class: &ClassTarget, member: Option<&MemberQuery>, lenient: bool) -> bool {
    if !class_matches(rule, class) {
        return false;
    }
    use KeepVariant::*;
    let with_members = matches!(rule.variant, KeepClassesWithMembers | KeepClassesWithMemberNames);
    if with_members && !members_present(rule, class) {
        return false;
    }
    match member {
        None => matches!(rule.variant, Keep | KeepNames) || with_members,
        Some(m) => {
            (lenient && matches!(rule.variant, Keep | KeepNames) && rule.member_specs.is_empty())
                || rule.member_specs.iter().any(|spec| member_spec_matches(spec, m))
        }
    }
}

/// Strict-mode coverage check.
pub fn rule_matches(rule: &KeepRule, class: &ClassTarget, member: Option<&MemberQuery>) -> bool {
    rule_covers(rule, class, member, false)
}
