//! Extraction of minification settings from a Gradle `buildTypes` block.
//!
//! This is not a Groovy/Kotlin parser. It tracks braces and string literals
//! and recognizes the `minifyEnabled` and `proguardFiles` statements, which
//! is enough for build scripts that configure ProGuard in the usual way.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub build_type: String,
    pub minify_enabled: bool,
    pub proguard_files: Vec<String>,
}

impl BuildConfig {
    pub fn new(build_type: impl Into<String>) -> Self {
        BuildConfig {
            build_type: build_type.into(),
            minify_enabled: false,
            proguard_files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradleConfig {
    pub build_types: BTreeMap<String, BuildConfig>,
}

impl GradleConfig {
    /// Settings of one build type; defaults when the snippet does not mention it.
    pub fn build_type(&self, name: &str) -> BuildConfig {
        self.build_types
            .get(name)
            .cloned()
            .unwrap_or_else(|| BuildConfig::new(name))
    }

    pub fn release(&self) -> BuildConfig {
        self.build_type("release")
    }
}

struct Block {
    name: String,
    line: usize,
}

/// Removes `//` and `/* */` comments, leaving string literals and line
/// structure intact.
fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let mut quote: Option<char> = None;
    while let Some(c) = chars.next() {
        if let Some(q) = quote {
            out.push(c);
            if c == '\\' {
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            } else if c == q || c == '\n' {
                quote = None;
            }
            continue;
        }
        match (c, chars.peek()) {
            ('/', Some('/')) => {
                while chars.peek().is_some_and(|&n| n != '\n') {
                    chars.next();
                }
            }
            ('/', Some('*')) => {
                chars.next();
                let mut prev = ' ';
                for n in chars.by_ref() {
                    if n == '\n' {
                        out.push('\n');
                    }
                    if prev == '*' && n == '/' {
                        break;
                    }
                    prev = n;
                }
            }
            ('"' | '\'', _) => {
                quote = Some(c);
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    out
}

fn string_literals(stmt: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = stmt.chars();
    while let Some(c) = chars.next() {
        if c == '"' || c == '\'' {
            let lit: String = chars.by_ref().take_while(|&n| n != c).collect();
            out.push(lit);
        }
    }
    out
}

/// Name of a block from the statement text preceding its `{`:
/// `release`, `getByName("release")`, `create("staging")`.
fn block_name(stmt: &str) -> String {
    if let Some(lit) = string_literals(stmt).pop() {
        return lit;
    }
    stmt.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .last()
        .unwrap_or("")
        .to_string()
}

fn apply_statement(stmt: &str, config: &mut BuildConfig) {
    let stmt = stmt.trim();
    let key: String = stmt
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    let rest = &stmt[key.len()..];
    match key.as_str() {
        "minifyEnabled" | "isMinifyEnabled" => {
            let value = rest.trim_matches(|c: char| c.is_whitespace() || "=()".contains(c));
            config.minify_enabled = value == "true";
        }
        "proguardFiles" | "proguardFile" | "setProguardFiles" => {
            config.proguard_files.extend(string_literals(rest).into_iter().filter(|s| !s.is_empty()));
        }
        _ => {}
    }
}

/// Reads every build type's minification settings from a Gradle snippet.
pub fn parse_gradle_snippet(text: &str) -> Result<GradleConfig, ParseError> {
    let text = strip_comments(text);
    let mut stack: Vec<Block> = Vec::new();
    let mut configs: BTreeMap<String, BuildConfig> = BTreeMap::new();
    let mut stmt = String::new();
    let mut line = 1;
    let mut quote: Option<char> = None;

    let target = |stack: &[Block]| -> String {
        if let Some(i) = stack.iter().position(|b| b.name == "buildTypes") {
            if let Some(b) = stack.get(i + 1) {
                return b.name.clone();
            }
        }
        stack.last().map_or_else(|| "release".to_string(), |b| b.name.clone())
    };
    let mut flush = |stmt: &mut String, stack: &[Block]| {
        if !stmt.trim().is_empty() {
            let name = target(stack);
            let entry = configs.entry(name.clone()).or_insert_with(|| BuildConfig::new(name));
            apply_statement(stmt, entry);
        }
        stmt.clear();
    };

    for c in text.chars() {
        if let Some(q) = quote {
            stmt.push(c);
            if c == q {
                quote = None;
            }
            if c == '\n' {
                line += 1;
            }
            continue;
        }
        match c {
            '"' | '\'' => {
                quote = Some(c);
                stmt.push(c);
            }
            '{' => {
                let name = block_name(&stmt);
                stmt.clear();
                stack.push(Block { name, line });
            }
            '}' => {
                flush(&mut stmt, &stack);
                if stack.pop().is_none() {
                    return Err(ParseError::new(line, "unbalanced `}`"));
                }
            }
            '\n' => {
                // A trailing comma continues the statement on the next line.
                if !stmt.trim_end().ends_with(',') {
                    flush(&mut stmt, &stack);
                }
                line += 1;
            }
            ';' => flush(&mut stmt, &stack),
            _ => stmt.push(c),
        }
    }
    flush(&mut stmt, &stack);
    if let Some(open) = stack.last() {
        return Err(ParseError::new(open.line, format!("unclosed `{}` block", open.name)));
    }
    // Statements outside any recognized setting create no build types.
    configs.retain(|_, c| c.minify_enabled || !c.proguard_files.is_empty() || c.build_type == "release");
    Ok(GradleConfig { build_types: configs })
}
