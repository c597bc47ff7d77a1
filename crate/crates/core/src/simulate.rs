//! ProGuard-style transforms applied to an unobfuscated [`AppModel`], used to
//! manufacture ground truth for detector evaluation.
//!
//! Names are handed out per scope in sorted order of the original names:
//! classes per package, methods and fields per class. Only membership in the
//! generated prefix matters to the detector, so the order is not significant.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AppModel, ClassRecord};
use crate::names::{nth_name, AlphabetMode, RenameAlphabet};
use crate::proguard::{parse_rules, rule_matches, ClassTarget, KeepRule, MemberQuery, ParseError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("overload_aggressively requires rename_methods")]
    OverloadWithoutRenaming,
    #[error("malformed plan: {0}")]
    Json(#[from] serde_json::Error),
    #[error("keep rule {index}: {source}")]
    KeepRule { index: usize, source: ParseError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub rename_classes: bool,
    pub rename_methods: bool,
    pub rename_fields: bool,
    pub overload_aggressively: bool,
    pub strip_debug: bool,
    pub strip_source: bool,
    pub strip_annotations: bool,
    pub alphabet: AlphabetMode,
    pub keep_rules: Vec<KeepRule>,
    /// Reserved for randomized transforms; the current transforms are fully
    /// determined by the input.
    pub seed: u64,
}

impl SimulationPlan {
    /// No transform at all.
    pub fn identity() -> Self {
        SimulationPlan {
            rename_classes: false,
            rename_methods: false,
            rename_fields: false,
            overload_aggressively: false,
            strip_debug: false,
            strip_source: false,
            strip_annotations: false,
            alphabet: AlphabetMode::MixedCase,
            keep_rules: Vec::new(),
            seed: 0,
        }
    }

    /// Every renaming and stripping feature enabled.
    pub fn full() -> Self {
        SimulationPlan {
            rename_classes: true,
            rename_methods: true,
            rename_fields: true,
            overload_aggressively: true,
            strip_debug: true,
            strip_source: true,
            strip_annotations: true,
            ..Self::identity()
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.overload_aggressively && !self.rename_methods {
            return Err(PlanError::OverloadWithoutRenaming);
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, PlanError> {
        let doc: PlanDocument = serde_json::from_slice(bytes)?;
        let keep_rules = doc
            .keep_rules
            .iter()
            .enumerate()
            .map(|(index, text)| {
                parse_rules(text)
                    .map(|f| f.keep_rules)
                    .map_err(|source| PlanError::KeepRule { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        let plan = SimulationPlan {
            rename_classes: doc.rename_classes,
            rename_methods: doc.rename_methods,
            rename_fields: doc.rename_fields,
            overload_aggressively: doc.overload_aggressively,
            strip_debug: doc.strip_debug,
            strip_source: doc.strip_source,
            strip_annotations: doc.strip_annotations,
            alphabet: doc.alphabet,
            keep_rules,
            seed: doc.seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let doc = PlanDocument {
            rename_classes: self.rename_classes,
            rename_methods: self.rename_methods,
            rename_fields: self.rename_fields,
            overload_aggressively: self.overload_aggressively,
            strip_debug: self.strip_debug,
            strip_source: self.strip_source,
            strip_annotations: self.strip_annotations,
            alphabet: self.alphabet,
            keep_rules: self.keep_rules.iter().map(ToString::to_string).collect(),
            seed: self.seed,
        };
        serde_json::to_vec_pretty(&doc).expect("plan serializes")
    }
}

/// On-disk plan. Keep rules are written in ProGuard syntax.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDocument {
    #[serde(default)]
    rename_classes: bool,
    #[serde(default)]
    rename_methods: bool,
    #[serde(default)]
    rename_fields: bool,
    #[serde(default)]
    overload_aggressively: bool,
    #[serde(default)]
    strip_debug: bool,
    #[serde(default)]
    strip_source: bool,
    #[serde(default)]
    strip_annotations: bool,
    #[serde(default = "default_alphabet")]
    alphabet: AlphabetMode,
    #[serde(default)]
    keep_rules: Vec<String>,
    #[serde(default)]
    seed: u64,
}

fn default_alphabet() -> AlphabetMode {
    AlphabetMode::MixedCase
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenameKind {
    Class,
    Method,
    Field,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameEntry {
    pub kind: RenameKind,
    /// Original qualified name of the class (the renamed class itself for
    /// class entries).
    pub class: String,
    pub old: String,
    pub new: String,
    /// Original parameter types, for methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameMap {
    pub entries: Vec<RenameEntry>,
    /// Generated names skipped because a kept name already used them.
    pub notes: Vec<String>,
}

impl RenameMap {
    pub fn class_map(&self) -> HashMap<&str, &str> {
        self.entries
            .iter()
            .filter(|e| e.kind == RenameKind::Class)
            .map(|e| (e.old.as_str(), e.new.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub app: AppModel,
    pub map: RenameMap,
}

/// Hands out generated names in order, skipping reserved ones.
struct NameSource<'a> {
    alphabet: &'a RenameAlphabet,
    next: u64,
}

impl NameSource<'_> {
    fn take(&mut self, reserved: &BTreeSet<String>, scope: &str, notes: &mut Vec<String>) -> String {
        loop {
            let name = nth_name(self.alphabet, self.next);
            self.next += 1;
            if !reserved.contains(&name) {
                return name;
            }
            notes.push(format!("{scope}: `{name}` is kept, skipped"));
        }
    }
}

fn kept_class(rules: &[KeepRule], target: &ClassTarget) -> bool {
    rules.iter().any(|r| rule_matches(r, target, None))
}

fn kept_member(rules: &[KeepRule], target: &ClassTarget, member: &MemberQuery) -> bool {
    rules.iter().any(|r| rule_matches(r, target, Some(member)))
}

/// Rewrites class references inside a Java type name (`a.B`, `a.B[][]`).
fn remap_type(ty: &str, classes: &HashMap<String, String>) -> String {
    let base = ty.trim_end_matches("[]");
    match classes.get(base) {
        Some(new) => format!("{new}{}", &ty[base.len()..]),
        None => ty.to_string(),
    }
}

fn join(package: &str, simple: &str) -> String {
    if package.is_empty() {
        simple.to_string()
    } else {
        format!("{package}.{simple}")
    }
}

pub fn simulate(app: &AppModel, plan: &SimulationPlan) -> Result<Simulation, PlanError> {
    plan.validate()?;
    let alphabet = RenameAlphabet::for_mode(plan.alphabet);
    let rules = &plan.keep_rules;
    let targets: Vec<ClassTarget> = app.classes.iter().map(ClassTarget::from_record).collect();
    let mut map = RenameMap::default();
    let mut out = app.clone();

    // Classes, per package.
    let mut class_names: HashMap<String, String> = HashMap::new();
    if plan.rename_classes {
        let mut by_package: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, c) in app.classes.iter().enumerate() {
            by_package.entry(c.package()).or_default().push(i);
        }
        for (package, mut idx) in by_package {
            idx.sort_by(|&a, &b| app.classes[a].simple_name().cmp(app.classes[b].simple_name()));
            let (kept, renamed): (Vec<usize>, Vec<usize>) =
                idx.into_iter().partition(|&i| kept_class(rules, &targets[i]));
            let reserved: BTreeSet<String> =
                kept.iter().map(|&i| app.classes[i].simple_name().to_string()).collect();
            let mut source = NameSource { alphabet: &alphabet, next: 0 };
            for i in renamed {
                let old = &app.classes[i];
                let new_simple = source.take(&reserved, &format!("package `{package}`"), &mut map.notes);
                let new_name = join(package, &new_simple);
                class_names.insert(old.qualified_name.clone(), new_name.clone());
                map.entries.push(RenameEntry {
                    kind: RenameKind::Class,
                    class: old.qualified_name.clone(),
                    old: old.qualified_name.clone(),
                    new: new_name,
                    params: None,
                });
            }
        }
    }

    for (ci, class) in out.classes.iter_mut().enumerate() {
        let original = &app.classes[ci];
        let target = &targets[ci];
        if plan.rename_methods {
            rename_methods(class, original, target, plan, &alphabet, &mut map);
        }
        if plan.rename_fields {
            let order = sorted_indices(&original.fields, |f| (f.name.clone(), Vec::new()));
            let (kept, renamed): (Vec<usize>, Vec<usize>) = order
                .into_iter()
                .partition(|&i| kept_member(rules, target, &MemberQuery::field(&original.fields[i])));
            let reserved: BTreeSet<String> = kept.iter().map(|&i| original.fields[i].name.clone()).collect();
            let mut source = NameSource { alphabet: &alphabet, next: 0 };
            for i in renamed {
                let new = source.take(&reserved, &format!("fields of `{}`", original.qualified_name), &mut map.notes);
                map.entries.push(RenameEntry {
                    kind: RenameKind::Field,
                    class: original.qualified_name.clone(),
                    old: original.fields[i].name.clone(),
                    new: new.clone(),
                    params: None,
                });
                class.fields[i].name = new;
            }
        }

        if let Some(new) = class_names.get(&class.qualified_name) {
            class.qualified_name = new.clone();
        }
        if !class_names.is_empty() {
            for m in &mut class.methods {
                m.return_type = remap_type(&m.return_type, &class_names);
                for p in &mut m.param_types {
                    *p = remap_type(p, &class_names);
                }
            }
            for f in &mut class.fields {
                f.field_type = remap_type(&f.field_type, &class_names);
            }
            for s in &mut class.supertypes {
                *s = remap_type(s, &class_names);
            }
        }
        if plan.strip_debug {
            for m in &mut class.methods {
                m.has_line_numbers = false;
            }
        }
        if plan.strip_source {
            class.source_file = None;
        }
        if plan.strip_annotations {
            class.annotations_present = false;
        }
    }
    Ok(Simulation { app: out, map })
}

fn sorted_indices<T>(items: &[T], key: impl Fn(&T) -> (String, Vec<String>)) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by_key(|&i| key(&items[i]));
    idx
}

fn rename_methods(
    class: &mut ClassRecord,
    original: &ClassRecord,
    target: &ClassTarget,
    plan: &SimulationPlan,
    alphabet: &RenameAlphabet,
    map: &mut RenameMap,
) {
    let order: Vec<usize> = sorted_indices(&original.methods, |m| (m.name.clone(), m.param_types.clone()))
        .into_iter()
        .filter(|&i| !original.methods[i].is_initializer())
        .collect();
    let (kept, renamed): (Vec<usize>, Vec<usize>) = order
        .into_iter()
        .partition(|&i| kept_member(&plan.keep_rules, target, &MemberQuery::method(&original.methods[i])));
    let reserved: BTreeSet<String> = kept.iter().map(|&i| original.methods[i].name.clone()).collect();
    let scope = format!("methods of `{}`", original.qualified_name);

    let mut assign = |i: usize, new: String, map: &mut RenameMap| {
        map.entries.push(RenameEntry {
            kind: RenameKind::Method,
            class: original.qualified_name.clone(),
            old: original.methods[i].name.clone(),
            new: new.clone(),
            params: Some(original.methods[i].param_types.clone()),
        });
        class.methods[i].name = new;
    };

    if plan.overload_aggressively {
        // Earliest generated name not yet taken by the same parameter list.
        let mut used: HashMap<u64, BTreeSet<&[String]>> = HashMap::new();
        let mut skipped: BTreeSet<u64> = BTreeSet::new();
        for i in renamed {
            let params = original.methods[i].param_types.as_slice();
            let mut n = 0u64;
            loop {
                let name = nth_name(alphabet, n);
                if reserved.contains(&name) {
                    if skipped.insert(n) {
                        map.notes.push(format!("{scope}: `{name}` is kept, skipped"));
                    }
                } else if used.entry(n).or_default().insert(params) {
                    assign(i, name, map);
                    break;
                }
                n += 1;
            }
        }
    } else {
        let mut source = NameSource { alphabet, next: 0 };
        for i in renamed {
            let name = source.take(&reserved, &scope, &mut map.notes);
            assign(i, name, map);
        }
    }
}

/// Undoes the renaming recorded in `map`. Stripped attributes stay stripped.
pub fn invert(simulated: &AppModel, map: &RenameMap) -> AppModel {
    let back: HashMap<String, String> = map
        .entries
        .iter()
        .filter(|e| e.kind == RenameKind::Class)
        .map(|e| (e.new.clone(), e.old.clone()))
        .collect();
    let mut members: HashMap<(&str, RenameKind, &str, Option<&[String]>), &str> = HashMap::new();
    for e in map.entries.iter().filter(|e| e.kind != RenameKind::Class) {
        members.insert((e.class.as_str(), e.kind, e.new.as_str(), e.params.as_deref()), e.old.as_str());
    }
    let mut out = simulated.clone();
    for class in &mut out.classes {
        if let Some(old) = back.get(&class.qualified_name) {
            class.qualified_name = old.clone();
        }
        for m in &mut class.methods {
            m.return_type = remap_type(&m.return_type, &back);
            for p in &mut m.param_types {
                *p = remap_type(p, &back);
            }
            let key = (class.qualified_name.as_str(), RenameKind::Method, m.name.as_str(), Some(m.param_types.as_slice()));
            if let Some(old) = members.get(&key) {
                m.name = old.to_string();
            }
        }
        for f in &mut class.fields {
            f.field_type = remap_type(&f.field_type, &back);
            let key = (class.qualified_name.as_str(), RenameKind::Field, f.name.as_str(), None);
            if let Some(old) = members.get(&key) {
                f.name = old.to_string();
            }
        }
        for s in &mut class.supertypes {
            *s = remap_type(s, &back);
        }
    }
    out
}
