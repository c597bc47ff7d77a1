//! ProGuard configuration files: keep rules in full, the handful of global
//! flags the analyses consult, everything else preserved verbatim.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepVariant {
    Keep,
    KeepClassMembers,
    KeepClassesWithMembers,
    KeepNames,
    KeepClassMemberNames,
    KeepClassesWithMemberNames,
}

impl KeepVariant {
    pub const ALL: [KeepVariant; 6] = [
        KeepVariant::Keep,
        KeepVariant::KeepClassMembers,
        KeepVariant::KeepClassesWithMembers,
        KeepVariant::KeepNames,
        KeepVariant::KeepClassMemberNames,
        KeepVariant::KeepClassesWithMemberNames,
    ];

    pub fn option_name(self) -> &'static str {
        match self {
            KeepVariant::Keep => "keep",
            KeepVariant::KeepClassMembers => "keepclassmembers",
            KeepVariant::KeepClassesWithMembers => "keepclasseswithmembers",
            KeepVariant::KeepNames => "keepnames",
            KeepVariant::KeepClassMemberNames => "keepclassmembernames",
            KeepVariant::KeepClassesWithMemberNames => "keepclasseswithmembernames",
        }
    }

    pub fn from_option(name: &str) -> Option<Self> {
        KeepVariant::ALL.into_iter().find(|v| v.option_name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Class,
    Interface,
    Enum,
    AnnotationType,
}

impl ClassKind {
    fn keyword(self) -> &'static str {
        match self {
            ClassKind::Class => "class",
            ClassKind::Interface => "interface",
            ClassKind::Enum => "enum",
            ClassKind::AnnotationType => "@interface",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberKind {
    Method,
    Field,
    /// `*;` matches fields and methods alike.
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub kind: MemberKind,
    pub annotation: Option<String>,
    pub modifiers: Vec<String>,
    /// Return type of a method or type of a field; `None` for wildcards and
    /// constructors.
    pub type_pattern: Option<String>,
    pub name_pattern: String,
    /// `Some` for methods; `None` for fields and wildcards.
    pub params: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepRule {
    pub variant: KeepVariant,
    /// Option modifiers such as `allowobfuscation` (`-keep,allowobfuscation`).
    pub options: Vec<String>,
    pub annotation: Option<String>,
    pub modifiers: Vec<String>,
    pub class_kind: ClassKind,
    pub class_pattern: String,
    /// `extends` or `implements`, kept for printing only.
    pub extends_keyword: Option<String>,
    pub extends_annotation: Option<String>,
    pub extends_pattern: Option<String>,
    pub member_specs: Vec<MemberSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalFlags {
    pub dontobfuscate: bool,
    pub dontusemixedcaseclassnames: bool,
    pub overloadaggressively: bool,
    pub dontwarn: Vec<String>,
    /// Mapping output target; empty string when printing to standard output.
    pub printmapping: Option<String>,
    pub optimizationpasses: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleFile {
    pub keep_rules: Vec<KeepRule>,
    pub flags: GlobalFlags,
    /// Other directives, verbatim (comments removed).
    pub unrecognized: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Punct(char),
}

fn tokenize(text: &str) -> Vec<(Tok, usize)> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut word = String::new();
        for ch in line.chars() {
            if ch.is_whitespace() || "{}();,!@".contains(ch) {
                if !word.is_empty() {
                    out.push((Tok::Word(std::mem::take(&mut word)), lineno + 1));
                }
                if !ch.is_whitespace() {
                    out.push((Tok::Punct(ch), lineno + 1));
                }
            } else {
                word.push(ch);
            }
        }
        if !word.is_empty() {
            out.push((Tok::Word(word), lineno + 1));
        }
    }
    out
}

fn strip_comment(line: &str) -> &str {
    line.find('#').map_or(line, |i| &line[..i])
}

/// One directive: text from a line starting with `-` up to the next such
/// line at brace depth zero.
struct Chunk {
    first_line: usize,
    text: String,
}

fn split_chunks(text: &str) -> Result<Vec<Chunk>, ParseError> {
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut depth: i64 = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if depth == 0 && trimmed.starts_with('-') {
            chunks.push(Chunk {
                first_line: i + 1,
                text: trimmed.to_string(),
            });
        } else if let Some(current) = chunks.last_mut() {
            current.text.push('\n');
            current.text.push_str(trimmed);
        } else {
            return Err(ParseError::new(i + 1, format!("expected an option, found `{trimmed}`")));
        }
        depth += trimmed.matches('{').count() as i64 - trimmed.matches('}').count() as i64;
        if depth < 0 {
            return Err(ParseError::new(i + 1, "unbalanced `}`"));
        }
    }
    if depth != 0 {
        let line = chunks.last().map_or(1, |c| c.first_line);
        return Err(ParseError::new(line, "unclosed `{`"));
    }
    Ok(chunks)
}

struct Cursor {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    base_line: usize,
}

impl Cursor {
    fn line(&self) -> usize {
        let rel = self
            .toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |t| t.1);
        self.base_line + rel - 1
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line(), message)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn peek_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn peek_word(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek_punct(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn word(&mut self, what: &str) -> Result<String, ParseError> {
        match self.bump() {
            Some(Tok::Word(w)) => Ok(w),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("expected {what}")))
            }
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// A comma-separated list of names/patterns, with optional `!` negators,
    /// joined back into one pattern string.
    fn name_list(&mut self, what: &str) -> Result<String, ParseError> {
        let mut out = String::new();
        loop {
            if self.eat_punct('!') {
                out.push('!');
            }
            out.push_str(&self.word(what)?);
            if !self.eat_punct(',') {
                return Ok(out);
            }
            out.push(',');
        }
    }

    fn annotation(&mut self) -> Result<Option<String>, ParseError> {
        if self.peek_punct('@') && self.toks.get(self.pos + 1).map(|t| &t.0) != Some(&Tok::Word("interface".into())) {
            self.pos += 1;
            return Ok(Some(self.word("annotation name")?));
        }
        Ok(None)
    }
}

const CLASS_MODIFIERS: &[&str] = &["public", "final", "abstract", "synthetic", "private", "protected", "static"];
const MEMBER_MODIFIERS: &[&str] = &[
    "public", "private", "protected", "static", "final", "synchronized", "native", "abstract",
    "strictfp", "volatile", "transient", "synthetic", "bridge", "varargs",
];

fn modifiers(cur: &mut Cursor, allowed: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    loop {
        let negated = cur.peek_punct('!');
        let idx = cur.pos + negated as usize;
        match cur.toks.get(idx).map(|t| &t.0) {
            Some(Tok::Word(w)) if allowed.contains(&w.as_str()) => {
                out.push(if negated { format!("!{w}") } else { w.clone() });
                cur.pos = idx + 1;
            }
            _ => return out,
        }
    }
}

fn parse_member(cur: &mut Cursor) -> Result<MemberSpec, ParseError> {
    let annotation = cur.annotation()?;
    let modifiers = modifiers(cur, MEMBER_MODIFIERS);
    let first = cur.word("member type or name")?;
    let spec = |kind, type_pattern, name_pattern: String, params| MemberSpec {
        kind,
        annotation: annotation.clone(),
        modifiers: modifiers.clone(),
        type_pattern,
        name_pattern,
        params,
    };
    let member = match first.as_str() {
        "<fields>" => spec(MemberKind::Field, None, "*".into(), None),
        "<methods>" => spec(MemberKind::Method, None, "*".into(), None),
        "*" if cur.peek_punct(';') => spec(MemberKind::Any, None, "*".into(), None),
        "<init>" => {
            let params = param_list(cur)?;
            spec(MemberKind::Method, None, first, Some(params))
        }
        _ => {
            let name = cur.word("member name")?;
            if cur.peek_punct('(') {
                let params = param_list(cur)?;
                spec(MemberKind::Method, Some(first), name, Some(params))
            } else {
                spec(MemberKind::Field, Some(first), name, None)
            }
        }
    };
    // ProGuard allows `return` value assumptions etc. here; not supported.
    cur.expect_punct(';')?;
    Ok(member)
}

fn param_list(cur: &mut Cursor) -> Result<Vec<String>, ParseError> {
    cur.expect_punct('(')?;
    let mut params = Vec::new();
    if cur.eat_punct(')') {
        return Ok(params);
    }
    loop {
        params.push(cur.word("parameter type")?);
        if cur.eat_punct(')') {
            return Ok(params);
        }
        cur.expect_punct(',')?;
    }
}

fn parse_keep(variant: KeepVariant, cur: &mut Cursor) -> Result<KeepRule, ParseError> {
    let mut options = Vec::new();
    while cur.eat_punct(',') {
        options.push(cur.word("keep option modifier")?);
    }
    let annotation = cur.annotation()?;
    let modifiers = modifiers(cur, CLASS_MODIFIERS);
    let class_kind = if cur.eat_punct('@') {
        match cur.word("`interface`")?.as_str() {
            "interface" => ClassKind::AnnotationType,
            other => return Err(cur.err(format!("unexpected `@{other}`"))),
        }
    } else {
        match cur.word("`class`, `interface` or `enum`")?.as_str() {
            "class" => ClassKind::Class,
            "interface" => ClassKind::Interface,
            "enum" => ClassKind::Enum,
            other => return Err(cur.err(format!("expected `class`, `interface` or `enum`, found `{other}`"))),
        }
    };
    let class_pattern = cur.name_list("class name")?;
    let mut rule = KeepRule {
        variant,
        options,
        annotation,
        modifiers,
        class_kind,
        class_pattern,
        extends_keyword: None,
        extends_annotation: None,
        extends_pattern: None,
        member_specs: Vec::new(),
    };
    if let Some(kw @ ("extends" | "implements")) = cur.peek_word() {
        rule.extends_keyword = Some(kw.to_string());
        cur.pos += 1;
        rule.extends_annotation = cur.annotation()?;
        rule.extends_pattern = Some(cur.name_list("superclass name")?);
    }
    if cur.eat_punct('{') {
        while !cur.eat_punct('}') {
            if cur.at_end() {
                return Err(cur.err("unclosed member block"));
            }
            rule.member_specs.push(parse_member(cur)?);
        }
    }
    if !cur.at_end() {
        return Err(cur.err("unexpected text after class specification"));
    }
    Ok(rule)
}

/// Parses a ProGuard configuration. Unknown options are kept, not rejected.
pub fn parse_rules(text: &str) -> Result<RuleFile, ParseError> {
    let mut file = RuleFile::default();
    for chunk in split_chunks(text)? {
        let mut cur = Cursor {
            toks: tokenize(&chunk.text),
            pos: 0,
            base_line: chunk.first_line,
        };
        let option = cur.word("option")?;
        let name = &option[1..];
        let flags = &mut file.flags;
        match name {
            "dontobfuscate" | "dontusemixedcaseclassnames" | "overloadaggressively" => {
                if !cur.at_end() {
                    return Err(cur.err(format!("-{name} takes no arguments")));
                }
                match name {
                    "dontobfuscate" => flags.dontobfuscate = true,
                    "dontusemixedcaseclassnames" => flags.dontusemixedcaseclassnames = true,
                    _ => flags.overloadaggressively = true,
                }
            }
            "optimizationpasses" => {
                let n = cur.word("pass count")?;
                let passes = n
                    .parse()
                    .map_err(|_| cur.err(format!("`{n}` is not a pass count")))?;
                flags.optimizationpasses = Some(passes);
            }
            "printmapping" => {
                flags.printmapping = Some(if cur.at_end() { String::new() } else { cur.word("file")? });
            }
            "dontwarn" => {
                if cur.at_end() {
                    flags.dontwarn.push("**".into());
                }
                while !cur.at_end() {
                    flags.dontwarn.push(cur.word("class pattern")?);
                    cur.eat_punct(',');
                }
            }
            _ => match KeepVariant::from_option(name) {
                Some(variant) => {
                    let rule = parse_keep(variant, &mut cur)?;
                    file.keep_rules.push(rule);
                    continue;
                }
                None => {
                    file.unrecognized.push(chunk.text);
                    continue;
                }
            },
        }
        if !cur.at_end() {
            return Err(cur.err(format!("unexpected argument to -{name}")));
        }
    }
    Ok(file)
}

impl fmt::Display for MemberSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(a) = &self.annotation {
            write!(f, "@{a} ")?;
        }
        for m in &self.modifiers {
            write!(f, "{m} ")?;
        }
        match (self.kind, &self.type_pattern) {
            (MemberKind::Field, None) => f.write_str("<fields>")?,
            (MemberKind::Method, None) if self.params.is_none() => f.write_str("<methods>")?,
            (MemberKind::Any, _) => f.write_str("*")?,
            (_, ty) => {
                if let Some(ty) = ty {
                    write!(f, "{ty} ")?;
                }
                f.write_str(&self.name_pattern)?;
                if let Some(params) = &self.params {
                    write!(f, "({})", params.join(", "))?;
                }
            }
        }
        f.write_str(";")
    }
}

impl fmt::Display for KeepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "-{}", self.variant.option_name())?;
        for o in &self.options {
            write!(f, ",{o}")?;
        }
        f.write_str(" ")?;
        if let Some(a) = &self.annotation {
            write!(f, "@{a} ")?;
        }
        for m in &self.modifiers {
            write!(f, "{m} ")?;
        }
        write!(f, "{} {}", self.class_kind.keyword(), self.class_pattern)?;
        if let (Some(kw), Some(p)) = (&self.extends_keyword, &self.extends_pattern) {
            write!(f, " {kw} ")?;
            if let Some(a) = &self.extends_annotation {
                write!(f, "@{a} ")?;
            }
            f.write_str(p)?;
        }
        if !self.member_specs.is_empty() {
            f.write_str(" {\n")?;
            for m in &self.member_specs {
                writeln!(f, "    {m}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

impl fmt::Display for RuleFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flags = &self.flags;
        if let Some(n) = flags.optimizationpasses {
            writeln!(f, "-optimizationpasses {n}")?;
        }
        if flags.dontobfuscate {
            writeln!(f, "-dontobfuscate")?;
        }
        if flags.dontusemixedcaseclassnames {
            writeln!(f, "-dontusemixedcaseclassnames")?;
        }
        if flags.overloadaggressively {
            writeln!(f, "-overloadaggressively")?;
        }
        match flags.printmapping.as_deref() {
            Some("") => writeln!(f, "-printmapping")?,
            Some(target) => writeln!(f, "-printmapping {target}")?,
            None => {}
        }
        for rule in &self.keep_rules {
            writeln!(f, "{rule}")?;
        }
        for pattern in &flags.dontwarn {
            writeln!(f, "-dontwarn {pattern}")?;
        }
        for raw in &self.unrecognized {
            writeln!(f, "{raw}")?;
        }
        Ok(())
    }
}
