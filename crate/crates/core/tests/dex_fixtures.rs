use std::path::PathBuf;

use dexlens::dex::{parse_apk, parse_apk_detailed, scan_tool_markers, DexContainer, DexError, MarkerLists};
use dexlens::{load_app, AppModel};

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dex").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn expected(name: &str) -> AppModel {
    load_app(&fixture(&format!("{name}.expected.json"))).unwrap()
}

fn parsed(name: &str, main: Option<&str>) -> AppModel {
    parse_apk(&fixture(name), name, main).unwrap()
}

#[test]
fn models_match_independent_disassembly() {
    for (name, main) in [
        ("hello.apk", Some("com.example.hello")),
        ("hello.dex", Some("com.example.hello")),
        ("hello_nolines.dex", Some("com.example.hello")),
        ("hello_stripped.apk", Some("com.example.hello")),
        ("hello_v039.dex", Some("com.example.hello")),
        ("multidex.apk", Some("com.example.hello")),
        ("dexprotector.apk", Some("com.example.shop")),
        ("bangcle.dex", None),
    ] {
        assert_eq!(parsed(name, main), expected(name), "{name}");
    }
}

#[test]
fn one_class_example() {
    let app = parsed("hello.apk", None);
    let c = app.class("a.b.C").unwrap();
    assert_eq!(c.methods.len(), 1);
    let m = &c.methods[0];
    assert_eq!((m.name.as_str(), m.param_types.as_slice()), ("m", &["int".to_string()][..]));
    assert!(m.has_line_numbers);
}

#[test]
fn stripping_only_touches_line_numbers() {
    let full = parsed("hello.apk", None);
    for name in ["hello_stripped.apk", "hello_nolines.dex"] {
        let mut stripped = parsed(name, None);
        assert!(stripped.classes.iter().flat_map(|c| &c.methods).all(|m| !m.has_line_numbers));
        for m in stripped.classes.iter_mut().flat_map(|c| &mut c.methods) {
            m.has_line_numbers = m.has_code;
        }
        stripped.app_id = full.app_id.clone();
        assert_eq!(stripped, full, "{name}");
    }
}

#[test]
fn multidex_first_wins() {
    let parsed = parse_apk_detailed(&fixture("multidex.apk"), "m", None).unwrap();
    let container = DexContainer::from_bytes(&fixture("multidex.apk")).unwrap();
    let names: Vec<&str> = container.dex_entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["classes.dex", "classes2.dex", "classes10.dex"]);
    assert_eq!(parsed.warnings.len(), 1);
    assert!(parsed.warnings[0].contains("a.b.C"));
    assert_eq!(parsed.model.class("a.b.C").unwrap().source_file.as_deref(), Some("C.java"));
    // One record per class_def, minus the duplicate.
    assert_eq!(parsed.model.classes.len(), 5 + 2 + 1 - 1);
}

#[test]
fn loud_errors() {
    assert_eq!(
        parse_apk(&fixture("hello_v040.dex"), "x", None),
        Err(DexError::UnsupportedVersion("040".into()))
    );
    assert_eq!(parse_apk(&fixture("nocode.apk"), "x", None), Err(DexError::NoCode));
    let mut cut = fixture("hello.dex");
    cut.truncate(0x90);
    match parse_apk(&cut, "x", None) {
        Err(DexError::Truncated { section, offset }) => {
            assert!(!section.is_empty());
            assert!(offset > 0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn tool_markers() {
    let lists = MarkerLists::default();
    let scan = |name: &str| scan_tool_markers(&DexContainer::from_bytes(&fixture(name)).unwrap(), &lists);
    let r = scan("dexprotector.apk");
    assert!(r.dexprotector_detected && !r.bangcle_detected);
    assert_eq!(r.marker_evidence, vec!["com.dexprotector.annotations.ClassEncryption"]);
    let r = scan("bangcle.dex");
    assert!(r.bangcle_detected && !r.dexprotector_detected);
    let r = scan("hello.apk");
    assert!(!r.dexprotector_detected && !r.bangcle_detected && r.marker_evidence.is_empty());
}

#[test]
fn deterministic() {
    let bytes = fixture("multidex.apk");
    assert_eq!(parse_apk(&bytes, "a", None), parse_apk(&bytes, "a", None));
}

#[test]
fn mutated_inputs_never_panic() {
    use rand::{Rng, SeedableRng};
    let seeds = [fixture("hello.dex"), fixture("hello.apk"), fixture("multidex.apk")];
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for i in 0..3000 {
        let mut bytes = seeds[i % seeds.len()].clone();
        for _ in 0..rng.gen_range(1..8) {
            let at = rng.gen_range(0..bytes.len());
            bytes[at] = rng.gen();
        }
        if rng.gen_bool(0.2) {
            bytes.truncate(rng.gen_range(0..bytes.len()));
        }
        if let Ok(app) = parse_apk(&bytes, "fuzz", None) {
            app.validate().unwrap();
        }
        if let Ok(c) = DexContainer::from_bytes(&bytes) {
            let _ = scan_tool_markers(&c, &MarkerLists::default());
        }
    }
}
