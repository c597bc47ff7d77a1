//! Seeded generator of plausible unobfuscated apps, for evaluation runs and
//! tests that need many realistic-looking models.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::model::{AppModel, ClassRecord, FieldRecord, MethodRecord};

const NOUNS: &[&str] = &[
    "User", "Account", "Session", "Cache", "Image", "Photo", "Album", "Track", "Player", "Playlist",
    "Message", "Thread", "Contact", "Profile", "Setting", "Theme", "Network", "Request", "Response",
    "Token", "Download", "Upload", "File", "Folder", "Note", "Task", "Event", "Calendar", "Location",
    "Map", "Route", "Sensor", "Battery", "Widget", "Notification", "Payment", "Order", "Cart", "Product",
    "Review", "Score", "Level", "Game", "Sprite", "Sound", "Video", "Stream", "Channel", "Feed", "Post",
];
const ROLES: &[&str] = &[
    "Manager", "Helper", "Adapter", "Activity", "Fragment", "View", "Service", "Provider", "Repository",
    "Controller", "Factory", "Builder", "Parser", "Loader", "Store", "Handler", "Listener", "Util",
    "Client", "Dialog", "Presenter", "Model", "Holder", "Receiver", "Worker", "Config",
];
const VERBS: &[&str] = &[
    "load", "save", "get", "set", "update", "create", "delete", "find", "parse", "build", "show", "hide",
    "start", "stop", "open", "close", "refresh", "sync", "fetch", "apply", "check", "handle", "notify",
    "register", "reset", "compute", "format", "validate", "bind", "render",
];
const FIELD_WORDS: &[&str] = &[
    "count", "name", "title", "id", "index", "size", "width", "height", "color", "state", "mode", "url",
    "path", "items", "listener", "context", "handler", "cache", "enabled", "visible", "timeout", "retries",
    "offset", "position", "duration", "label", "value", "data", "callback", "manager",
];
const TYPES: &[&str] = &[
    "int", "long", "boolean", "float", "double", "java.lang.String", "android.content.Context",
    "android.os.Bundle", "java.util.List", "android.view.View",
];
const SUBPACKAGES: &[&str] = &["ui", "data", "net", "util", "model", "service", "db", "widget", "media", "auth"];
const LIBRARIES: &[&str] = &[
    "com.squareup.okhttp", "com.google.gson.internal", "org.fmod.core", "com.unity3d.player",
    "com.facebook.login", "com.chartboost.sdk", "com.startapp.android",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Packages per app, main package included.
    pub packages: (usize, usize),
    pub classes_per_package: (usize, usize),
    pub methods_per_class: (usize, usize),
    pub fields_per_class: (usize, usize),
    /// Every n-th app (by index) carries classes whose fields are legitimately
    /// called `a`, `b`, `c`: a source of field-name false positives.
    pub short_field_every: Option<usize>,
    /// Every n-th app has no annotations anywhere.
    pub unannotated_every: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            packages: (5, 7),
            classes_per_package: (5, 9),
            methods_per_class: (5, 9),
            fields_per_class: (5, 8),
            short_field_every: Some(20),
            unannotated_every: Some(10),
        }
    }
}

fn camel(a: &str, b: &str) -> String {
    let mut out = a.to_string();
    let mut chars = b.chars();
    if let Some(c) = chars.next() {
        out.extend(c.to_uppercase());
        out.push_str(chars.as_str());
    }
    out
}

fn unique<F: FnMut(&mut StdRng) -> String>(rng: &mut StdRng, taken: &mut BTreeSet<String>, mut make: F) -> String {
    loop {
        let candidate = make(rng);
        if taken.insert(candidate.clone()) {
            return candidate;
        }
    }
}

fn pick<'a>(rng: &mut StdRng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("word lists are non-empty")
}

fn make_class(rng: &mut StdRng, cfg: &SynthConfig, qualified: String, annotated: bool) -> ClassRecord {
    let mut class = ClassRecord::new(qualified);
    class.source_file = Some(format!("{}.java", class.simple_name()));
    class.annotations_present = annotated;
    class.supertypes.push("java.lang.Object".into());

    let n_methods = rng.gen_range(cfg.methods_per_class.0..=cfg.methods_per_class.1);
    let mut names = BTreeSet::new();
    class.methods.push(MethodRecord {
        name: "<init>".into(),
        param_types: vec![],
        return_type: "void".into(),
        has_code: true,
        has_line_numbers: true,
    });
    for i in 0..n_methods {
        let name = unique(rng, &mut names, |r| camel(pick(r, VERBS), pick(r, NOUNS)));
        // The first two methods always differ in parameter lists so that an
        // aggressive overloading pass has something to collapse.
        let params: Vec<String> = match i {
            0 => vec![],
            1 => vec!["int".into()],
            _ => (0..rng.gen_range(0..3)).map(|_| pick(rng, TYPES).to_string()).collect(),
        };
        class.methods.push(MethodRecord {
            name,
            param_types: params,
            return_type: if rng.gen_bool(0.5) { "void".into() } else { pick(rng, TYPES).to_string() },
            has_code: true,
            has_line_numbers: true,
        });
    }
    let n_fields = rng.gen_range(cfg.fields_per_class.0..=cfg.fields_per_class.1);
    let mut fields = BTreeSet::new();
    for _ in 0..n_fields {
        let name = unique(rng, &mut fields, |r| {
            if r.gen_bool(0.5) {
                camel("m", pick(r, FIELD_WORDS))
            } else {
                camel(pick(r, FIELD_WORDS), pick(r, NOUNS))
            }
        });
        class.fields.push(FieldRecord { name, field_type: pick(rng, TYPES).to_string() });
    }
    class
}

fn coefficient_classes(package: &str) -> Vec<ClassRecord> {
    let shapes: [(&str, &[&str]); 5] = [
        ("Line", &["a", "b", "c"]),
        ("Plane", &["a", "b", "c", "d"]),
        ("Quadratic", &["a", "b", "c"]),
        ("Cubic", &["a", "b", "c", "d"]),
        ("Conic", &["a", "b", "c", "d", "e", "f"]),
    ];
    shapes
        .iter()
        .map(|(name, coeffs)| {
            let mut c = ClassRecord::new(format!("{package}.{name}"));
            c.source_file = Some(format!("{name}.java"));
            c.annotations_present = true;
            c.methods = ["evaluate", "derivative", "scale", "translate", "intersect"]
                .iter()
                .map(|m| MethodRecord {
                    name: m.to_string(),
                    param_types: vec!["double".into()],
                    return_type: "double".into(),
                    has_code: true,
                    has_line_numbers: true,
                })
                .collect();
            c.fields = coeffs
                .iter()
                .map(|n| FieldRecord { name: n.to_string(), field_type: "double".into() })
                .collect();
            c
        })
        .collect()
}

/// Generates app number `index` of a corpus. The same (seed, index, config)
/// always yields the same app.
pub fn generate_app(seed: u64, index: usize, cfg: &SynthConfig) -> AppModel {
    let mut rng = StdRng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let main = format!("com.dev{index:03}.app");
    let mut app = AppModel::new(format!("synth-{index:03}"), Some(main.clone()));
    let annotated_app = cfg.unannotated_every.map_or(true, |n| index % n != n / 2);

    let n_packages = rng.gen_range(cfg.packages.0..=cfg.packages.1);
    let mut packages = vec![main.clone()];
    let mut subs: Vec<&str> = SUBPACKAGES.to_vec();
    subs.shuffle(&mut rng);
    let n_libs = rng.gen_range(1..=2).min(n_packages - 1);
    for sub in subs.iter().take(n_packages - 1 - n_libs) {
        packages.push(format!("{main}.{sub}"));
    }
    let mut libs: Vec<&str> = LIBRARIES.to_vec();
    libs.shuffle(&mut rng);
    packages.extend(libs.iter().take(n_libs).map(|s| s.to_string()));

    for package in &packages {
        let n_classes = rng.gen_range(cfg.classes_per_package.0..=cfg.classes_per_package.1);
        let mut names = BTreeSet::new();
        let annotated_one = rng.gen_range(0..n_classes);
        for i in 0..n_classes {
            let simple = unique(&mut rng, &mut names, |r| format!("{}{}", pick(r, NOUNS), pick(r, ROLES)));
            let annotated = annotated_app && (i == annotated_one || rng.gen_bool(0.6));
            app.classes.push(make_class(&mut rng, cfg, format!("{package}.{simple}"), annotated));
        }
    }
    if cfg.short_field_every.is_some_and(|n| index % n == n / 3) {
        app.classes.extend(coefficient_classes(&format!("{main}.geom")));
    }
    app
}

pub fn generate_corpus(seed: u64, count: usize, cfg: &SynthConfig) -> Vec<AppModel> {
    (0..count).map(|i| generate_app(seed, i, cfg)).collect()
}
