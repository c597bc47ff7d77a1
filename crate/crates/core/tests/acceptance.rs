//! Acceptance criteria, one check per criterion. Each prints a PASS/FAIL
//! line to stderr (bypassing test output capture) and the test fails if any
//! criterion fails.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use dexlens::corpus::{read_metadata_csv, CorpusAggregate, CorpusRecord, ScopeRule, TableOptions};
use dexlens::detector::PackageDetail;
use dexlens::dex::{parse_apk, scan_tool_markers, DexContainer, MarkerLists};
use dexlens::eval::{plan_labels, prediction, score, ConfusionCounts, FeatureVector, SIMULATED_FEATURES};
use dexlens::names::{generated_prefix, in_prefix, nth_name, RenameAlphabet};
use dexlens::proguard::{grade, parse_gradle_snippet, parse_rules, GradeOptions, Reason, Rubric, Target, Verdict};
use dexlens::simulate::{simulate, SimulationPlan};
use dexlens::synth::{generate_corpus, SynthConfig};
use dexlens::{analyze, load_app, AppModel, ClassRecord, DetectorConfig, Feature, FeatureFlags, FeatureReport, FieldRecord, MethodRecord};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, format!("took {took:?}, limit {limit:?}"))
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    let path = root().join(path);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

// 1. MCC on the published confusion counts.
fn mcc_reproduction() -> Outcome {
    let start = Instant::now();
    let table = [
        (Feature::ClassNameObfuscated, 98, 100, 0, 2, 0.980),
        (Feature::MethodNameObfuscated, 99, 100, 0, 1, 0.990),
        (Feature::FieldNameObfuscated, 100, 92, 8, 0, 0.923),
        (Feature::OverloadingDetected, 99, 100, 0, 1, 0.990),
        (Feature::DebugInfoRemoved, 100, 100, 0, 0, 1.000),
        (Feature::AnnotationsRemoved, 100, 88, 12, 0, 0.886),
        (Feature::SourceFilesRemoved, 100, 100, 0, 0, 1.000),
    ];
    let mut got = Vec::new();
    for (feature, tp, tn, fp, fn_, mcc) in table {
        // Rebuild row-level vectors with exactly these counts and score them.
        let mut preds: Vec<FeatureVector> = Vec::new();
        let mut labels: Vec<FeatureVector> = Vec::new();
        for (p, l, n) in [(true, true, tp), (false, false, tn), (true, false, fp), (false, true, fn_)] {
            for _ in 0..n {
                preds.push([(feature, p)].into());
                labels.push([(feature, l)].into());
            }
        }
        let s = score(&preds, &labels).map_err(|e| e.to_string())?;
        check(s[0].counts == ConfusionCounts { tp, tn, fp, fn_ }, format!("{feature}: counts {:?}", s[0].counts))?;
        check((s[0].mcc - mcc).abs() <= 0.001, format!("{feature}: {} vs {mcc}", s[0].mcc))?;
        got.push(format!("{:.3}", s[0].mcc));
    }
    within(start, Duration::from_secs(1))?;
    Ok(got.join(" "))
}

// 2. Generated name sequence.
fn name_sequence() -> Outcome {
    let start = Instant::now();
    let mixed = RenameAlphabet::mixed_case();
    let first: Vec<String> = (0..54).map(|i| nth_name(&mixed, i)).collect();
    let mut want: Vec<String> = ('a'..='z').chain('A'..='Z').map(String::from).collect();
    want.extend(["aa".to_string(), "ab".to_string()]);
    check(first == want, format!("first 54 names: {first:?}"))?;
    for alphabet in [RenameAlphabet::mixed_case(), RenameAlphabet::lower_case()] {
        let names: Vec<String> = (0..10_000).map(|i| nth_name(&alphabet, i)).collect();
        check(names.iter().collect::<BTreeSet<_>>().len() == names.len(), "sequence repeats a name")?;
        for k in [0usize, 1, 26, 52, 53, 700, 2756, 10_000] {
            let prefix = generated_prefix(&alphabet, k);
            check(prefix.len() == k, format!("prefix {k} has {} names", prefix.len()))?;
            let enumerated: BTreeSet<String> = names[..k].iter().cloned().collect();
            check(prefix == enumerated, format!("prefix {k} differs from enumeration"))?;
        }
        for (i, n) in names.iter().enumerate().step_by(97) {
            check(in_prefix(&alphabet, n, i + 1) && !in_prefix(&alphabet, n, i), format!("rank of {n}"))?;
        }
    }
    within(start, Duration::from_secs(1))?;
    Ok("a..z A..Z aa ab; 10,000 names distinct, prefix law holds".into())
}

// 3. Simulate then detect on 100 synthetic apps.
fn round_trip() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig::default();
    let apps = generate_corpus(2018, 100, &cfg);
    for app in &apps {
        let tree = dexlens::PackageTree::build(app);
        check(tree.node_count() >= 5, format!("{}: {} packages", app.app_id, tree.node_count()))?;
        for (p, classes) in tree.packages() {
            check(classes.len() >= 5, format!("{}: {p} has {} classes", app.app_id, classes.len()))?;
            for c in classes.iter() {
                check(c.methods.len() + c.fields.len() >= 5, format!("{}: {} is small", app.app_id, c.qualified_name))?;
            }
        }
    }
    let plan = SimulationPlan::full();
    let det = DetectorConfig::default();
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let negative: FeatureVector = SIMULATED_FEATURES.iter().map(|f| (*f, false)).collect();
    for app in &apps {
        let sim = simulate(app, &plan).map_err(|e| e.to_string())?;
        preds.push(prediction(&analyze(app, &det).all_packages, &SIMULATED_FEATURES));
        labels.push(negative.clone());
        preds.push(prediction(&analyze(&sim.app, &det).all_packages, &SIMULATED_FEATURES));
        labels.push(plan_labels(&plan));
    }
    let scores = score(&preds, &labels).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for s in &scores {
        check(s.counts.fn_ == 0, format!("{}: {} false negatives", s.feature, s.counts.fn_))?;
        summary.push(format!("{} fp={}", s.feature, s.counts.fp));
    }
    let field = scores.iter().find(|s| s.feature == Feature::FieldNameObfuscated).expect("scored");
    check(field.counts.fp <= 8, format!("field-name FP {} of 100 originals", field.counts.fp))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!("FN=0 on all; field FP {}/100; {}", field.counts.fp, summary.join(", ")))
}

fn plain_class(name: &str, stem: &str) -> ClassRecord {
    let mut c = ClassRecord::new(name);
    c.source_file = Some(format!("{stem}.java"));
    c.annotations_present = true;
    for m in ["loadItems", "saveState", "render"] {
        c.methods.push(MethodRecord {
            name: m.into(),
            param_types: vec![],
            return_type: "void".into(),
            has_code: true,
            has_line_numbers: true,
        });
    }
    c.fields = ["itemCount", "title", "listener"]
        .iter()
        .map(|f| FieldRecord { name: f.to_string(), field_type: "int".into() })
        .collect();
    c
}

fn package_of(package: &str, names: &[&str]) -> Vec<ClassRecord> {
    names.iter().map(|n| plain_class(&format!("{package}.{n}"), n)).collect()
}

// 4. Obfuscated libraries flag only the all-packages view.
fn library_vs_main() -> Outcome {
    let det = DetectorConfig::default();
    let readable = ["MainActivity", "SettingsFragment", "Repository", "Player"];
    let short = ["a", "b", "c", "d"];

    let mut lib_only = AppModel::new("library-only", Some("com.dev.app".into()));
    lib_only.classes.extend(package_of("com.dev.app", &readable));
    lib_only.classes.extend(package_of("com.google.ads", &short));
    let r = analyze(&lib_only, &det);
    let main = r.main_package.ok_or("main view missing")?;
    check(r.all_packages.class_name_obfuscated, "library-only: all-packages view not flagged")?;
    check(!main.class_name_obfuscated, "library-only: main view flagged")?;

    let mut main_too = AppModel::new("main-obfuscated", Some("com.dev.app".into()));
    main_too.classes.extend(package_of("com.dev.app", &short));
    main_too.classes.extend(package_of("com.google.ads", &readable));
    let r = analyze(&main_too, &det);
    let main = r.main_package.ok_or("main view missing")?;
    check(r.all_packages.class_name_obfuscated && main.class_name_obfuscated, "main-obfuscated: views not both flagged")?;

    let mut no_main = lib_only.clone();
    no_main.main_package = None;
    check(analyze(&no_main, &det).main_package.is_none(), "null main package gave a main view")?;
    Ok("library-only: all=true main=false; main obfuscated: all=true main=true".into())
}

const LISTING_1: &str = "android{\n   buildTypes {\n       release {\n           minifyEnabled true\n           proguardFiles 'proguard-rules.pro'\n}}}\n";

// 5. Grading rubric.
fn grading() -> Outcome {
    let task2 = Rubric {
        must_keep: vec![Target::member("com.task.OpenClass", "doStuff()")],
        must_obfuscate: vec![Target::member("com.task.SecretClass", "doSecretStuff()")],
    };
    let task1 = Rubric::default();
    let no_minify = LISTING_1.replace("minifyEnabled true", "minifyEnabled false");
    let no_files = LISTING_1.replace("           proguardFiles 'proguard-rules.pro'\n", "");
    let keep = "-keep class com.task.OpenClass { void doStuff(); }";

    let mut cases: Vec<(String, String, &str, &Rubric, Verdict, Vec<Reason>)> = vec![
        ("task 1 correct".into(), LISTING_1.into(), "", &task1, Verdict::Correct, vec![]),
        ("missing minifyEnabled".into(), no_minify, "", &task1, Verdict::Incorrect, vec![Reason::MissingMinify]),
        ("missing proguardFiles".into(), no_files, "", &task1, Verdict::Incorrect, vec![Reason::MissingProguardFiles]),
        ("-dontobfuscate".into(), LISTING_1.into(), "-dontobfuscate", &task1, Verdict::Incorrect, vec![Reason::DontobfuscatePresent]),
        ("task 2 correct".into(), LISTING_1.into(), keep, &task2, Verdict::Correct, vec![]),
        ("missing keep".into(), LISTING_1.into(), "-dontwarn com.task.**", &task2, Verdict::Incorrect, vec![Reason::KeepMissingTarget]),
        (
            "misspelled class".into(),
            LISTING_1.into(),
            "-keep class com.tasks.OpenClass { void doStuff(); }",
            &task2,
            Verdict::Incorrect,
            vec![Reason::ClassNameMisspelled],
        ),
        (
            "over-broad wildcard".into(),
            LISTING_1.into(),
            "-keep class com.task.** { *; }",
            &task2,
            Verdict::Incorrect,
            vec![Reason::KeepCoversForbidden, Reason::WildcardTooBroad],
        ),
    ];
    let variant_rules: Vec<String> = [
        "keep",
        "keepclassmembers",
        "keepclasseswithmembers",
        "keepnames",
        "keepclassmembernames",
        "keepclasseswithmembernames",
    ]
    .iter()
    .map(|v| format!("-{v} class com.task.OpenClass {{ void doStuff(); }}"))
    .collect();
    for rule in &variant_rules {
        cases.push((rule.clone(), LISTING_1.into(), rule, &task2, Verdict::Correct, vec![]));
    }

    for (name, gradle, rules, rubric, verdict, reasons) in &cases {
        let build = parse_gradle_snippet(gradle).map_err(|e| format!("{name}: {e}"))?.release();
        let rules = parse_rules(rules).map_err(|e| format!("{name}: {e}"))?;
        let r = grade(&build, &rules, rubric, None, GradeOptions::default());
        check(r.verdict == *verdict && r.reasons == *reasons, format!("{name}: got {:?} {:?}", r.verdict, r.reasons))?;
    }
    Ok(format!("{} configurations graded as expected", cases.len()))
}

fn fixture_report(app: &Value) -> FeatureReport {
    let mut r = FeatureReport::empty(app["app_id"].as_str().expect("app_id"));
    r.main_package = app["main"].as_bool().map(|m| FeatureFlags {
        class_name_obfuscated: m,
        ..Default::default()
    });
    for (package, flagged) in app["packages"].as_object().expect("packages") {
        let mut d = PackageDetail::default();
        d.flags.class_name_obfuscated = flagged.as_bool().expect("bool");
        r.all_packages.class_name_obfuscated |= d.flags.class_name_obfuscated;
        r.packages.insert(package.clone(), d);
    }
    r
}

// 6. Corpus tables against brute-force values.
fn corpus_tables() -> Outcome {
    let apps: Vec<Value> = serde_json::from_slice(&read("tests/fixtures/corpus/apps.json")).map_err(|e| e.to_string())?;
    let expected: Value = serde_json::from_slice(&read("tests/fixtures/corpus/expected.json")).map_err(|e| e.to_string())?;
    let meta = read_metadata_csv(&read("tests/fixtures/corpus/metadata.csv")[..]).map_err(|e| e.to_string())?;

    // Two partitions merged, as a parallel ingest would do.
    let mut parts = [CorpusAggregate::new(ScopeRule::default()), CorpusAggregate::new(ScopeRule::default())];
    for (i, app) in apps.iter().enumerate() {
        let report = fixture_report(app);
        let metadata = meta.rows.get(&report.app_id).cloned();
        parts[i % 2].add(&CorpusRecord { report, metadata });
    }
    let [mut agg, other] = parts;
    agg.merge(other);
    let t = agg.finish(&TableOptions::default());

    let got = json!({
        "apps": t.apps,
        "metadata_missing": t.skipped.metadata_missing,
        "malformed_rows": meta.warnings.len(),
        "bad_dates": t.skipped.bad_dates,
        "downloads": t.downloads,
        "accounts": t.accounts.iter().map(|r| json!({
            "bucket": r.bucket,
            "accounts": r.accounts,
            "rated_accounts": r.rated_accounts,
            "macro_percent": r.macro_percent,
            "micro_percent": r.micro_percent,
        })).collect::<Vec<_>>(),
        "trend": t.trend,
        "scopes": t.scopes,
        "orphans": t.orphans,
    });
    let keys: BTreeSet<&String> = expected.as_object().ok_or("expected is not an object")?.keys().collect();
    for key in keys {
        check(got[key] == expected[key], format!("{key}: got {} want {}", got[key], expected[key]))?;
    }
    Ok(format!(
        "{} apps; {} download buckets, {} account buckets, {} months, {} scopes, {} orphan apps match",
        t.apps,
        t.downloads.len(),
        t.accounts.len(),
        t.trend.len(),
        t.scopes.len(),
        t.orphans.count
    ))
}

// 7. DEX fixtures and fuzzing.
fn dex_frontend() -> Outcome {
    let start = Instant::now();
    let dir = "tests/fixtures/dex";
    for (name, main) in [("hello.apk", Some("com.example.hello")), ("hello_stripped.apk", Some("com.example.hello"))] {
        let got = parse_apk(&read(format!("{dir}/{name}")), name, main).map_err(|e| format!("{name}: {e}"))?;
        let want = load_app(&read(format!("{dir}/{name}.expected.json"))).map_err(|e| e.to_string())?;
        check(got == want, format!("{name}: model differs from the disassembler's"))?;
    }
    let full = parse_apk(&read(format!("{dir}/hello.apk")), "x", None).map_err(|e| e.to_string())?;
    let stripped = parse_apk(&read(format!("{dir}/hello_stripped.apk")), "x", None).map_err(|e| e.to_string())?;
    let lines = |a: &AppModel| a.classes.iter().flat_map(|c| &c.methods).filter(|m| m.has_line_numbers).count();
    check(lines(&full) > 0 && lines(&stripped) == 0, "stripping flags")?;

    let seeds: Vec<Vec<u8>> = ["hello.dex", "hello.apk", "multidex.apk", "dexprotector.apk"]
        .iter()
        .map(|n| read(format!("{dir}/{n}")))
        .collect();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let (mut ok, mut err) = (0u32, 0u32);
    for i in 0..10_000 {
        let mut bytes = seeds[i % seeds.len()].clone();
        match rng.gen_range(0..4) {
            0 => {
                let at = rng.gen_range(0..bytes.len());
                bytes.truncate(at);
            }
            1 => {
                for _ in 0..rng.gen_range(1..16) {
                    let at = rng.gen_range(0..bytes.len());
                    bytes[at] = rng.gen();
                }
            }
            2 => {
                // Corrupt a 32-bit field in the id tables.
                let at = rng.gen_range(0..bytes.len().saturating_sub(4).max(1));
                let v: u32 = if rng.gen_bool(0.5) { u32::MAX - rng.gen_range(0..4) } else { rng.gen() };
                for (k, b) in v.to_le_bytes().iter().enumerate() {
                    if let Some(slot) = bytes.get_mut(at + k) {
                        *slot = *b;
                    }
                }
            }
            _ => {
                let at = rng.gen_range(0..bytes.len());
                let junk: Vec<u8> = (0..rng.gen_range(1..64)).map(|_| rng.gen()).collect();
                bytes.splice(at..at, junk);
            }
        }
        let outcome = std::panic::catch_unwind(|| {
            let parsed = parse_apk(&bytes, "fuzz", None);
            if let Ok(c) = DexContainer::from_bytes(&bytes) {
                scan_tool_markers(&c, &MarkerLists::default());
            }
            parsed.map(|app| app.validate().is_ok())
        });
        match outcome {
            Err(_) => return Err(format!("mutated input {i} panicked")),
            Ok(Ok(valid)) => {
                check(valid, format!("mutated input {i} produced an invalid model"))?;
                ok += 1;
            }
            Ok(Err(_)) => err += 1,
        }
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!("fixtures match; 10,000 mutated inputs: {ok} parsed, {err} rejected, 0 crashes"))
}

// 8. Headline corpus statistics are out of reach at desk scale; the README
// must say so and name the replacement checks.
fn non_reproducibility() -> Outcome {
    let path = root().join("../../README.md");
    let readme = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    for needle in ["24.92%", "1,762,868", "50.00%", "68.41%"] {
        check(readme.contains(needle), format!("README does not mention {needle}"))?;
    }
    Ok("headline corpus figures documented as not reproduced; covered by criteria 3-6".into())
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("MCC reproduction", mcc_reproduction),
        ("name-sequence fidelity", name_sequence),
        ("simulate/detect round trip", round_trip),
        ("library vs main separation", library_vs_main),
        ("grading rubric", grading),
        ("corpus tables", corpus_tables),
        ("DEX frontend", dex_frontend),
        ("explicit non-reproducibility", non_reproducibility),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = run();
        let line = match &result {
            Ok(d) => format!("criterion {}: PASS  {name}: {d}", i + 1),
            Err(e) => format!("criterion {}: FAIL  {name}: {e}", i + 1),
        };
        writeln!(err, "{line}").ok();
        if result.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
