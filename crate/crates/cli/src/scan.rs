use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use dexlens::config::Config;
use dexlens::dex::{parse_container, scan_strings, scan_tool_markers, DexContainer, ToolMarkerReport};
use dexlens::{analyze, load_app, FeatureReport};

use crate::io::{file_stem_for, load_config, to_json, write};
use crate::{CmdResult, Failure, InputFormat};

#[derive(Serialize)]
struct ScanEntry {
    input: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    app_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    markers: Option<ToolMarkerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<FeatureReport>,
}

struct Scanned {
    report: FeatureReport,
    warnings: Vec<String>,
    markers: ToolMarkerReport,
}

fn guess_format(path: &Path, bytes: &[u8]) -> InputFormat {
    if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("json")) || bytes.trim_ascii_start().starts_with(b"{") {
        InputFormat::Json
    } else if bytes.starts_with(b"dex\n") {
        InputFormat::Dex
    } else {
        InputFormat::Apk
    }
}

fn scan_one(path: &Path, main_package: Option<&str>, format: Option<InputFormat>, cfg: &Config) -> anyhow::Result<Scanned> {
    let bytes = std::fs::read(path)?;
    let format = format.unwrap_or_else(|| guess_format(path, &bytes));
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let (app, warnings, markers) = match format {
        InputFormat::Json => {
            let mut app = load_app(&bytes)?;
            if let Some(main) = main_package {
                app.main_package = Some(main.to_string());
            }
            let markers = scan_strings(app.classes.iter().map(|c| c.qualified_name.as_str()), &cfg.markers);
            (app, Vec::new(), markers)
        }
        InputFormat::Apk | InputFormat::Dex => {
            let container = DexContainer::from_bytes(&bytes)?;
            let markers = scan_tool_markers(&container, &cfg.markers);
            let parsed = parse_container(&container, &stem, main_package)?;
            (parsed.model, parsed.warnings, markers)
        }
    };
    Ok(Scanned {
        report: analyze(&app, &cfg.detector),
        warnings,
        markers,
    })
}

fn main_summary(r: &FeatureReport) -> &'static str {
    match &r.main_package {
        None => "no main-package view",
        Some(m) if m.class_name_obfuscated => "main package obfuscated",
        Some(_) => "main package not obfuscated",
    }
}

pub fn run(
    paths: &[std::path::PathBuf],
    main_package: Option<&str>,
    format: Option<InputFormat>,
    config: Option<&Path>,
    out: Option<&Path>,
) -> CmdResult {
    let cfg = load_config(config)?;
    let results: Vec<anyhow::Result<Scanned>> =
        paths.par_iter().map(|p| scan_one(p, main_package, format, &cfg)).collect();

    let mut entries = Vec::with_capacity(paths.len());
    let mut taken = BTreeSet::new();
    for (path, result) in paths.iter().zip(results) {
        let input = path.display().to_string();
        let mut entry = ScanEntry {
            input,
            status: "error",
            app_id: None,
            report_path: None,
            error: None,
            warnings: Vec::new(),
            markers: None,
            report: None,
        };
        match result {
            Err(e) => {
                if out.is_some() {
                    println!("error  {}: {e:#}", entry.input);
                }
                entry.error = Some(format!("{e:#}"))
            }
            Ok(s) => {
                let name = format!("{}.json", file_stem_for(&s.report.app_id));
                if out.is_some() && !taken.insert(name.clone()) {
                    let msg = format!("another input already produced report {name}");
                    println!("error  {}: {msg}", entry.input);
                    entry.error = Some(msg);
                } else {
                    entry.status = "ok";
                    entry.app_id = Some(s.report.app_id.clone());
                    entry.warnings = s.warnings;
                    entry.markers = Some(s.markers);
                    match out {
                        Some(dir) => {
                            write(&dir.join(&name), to_json(&s.report))?;
                            println!("ok     {} -> {name} ({})", entry.input, main_summary(&s.report));
                            entry.report_path = Some(name);
                        }
                        None => entry.report = Some(s.report),
                    }
                }
            }
        }
        entries.push(entry);
    }

    match out {
        Some(dir) => {
            write(&dir.join("scan_summary.json"), to_json(&entries))?;
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&to_json(&entries))
                .map_err(|e| Failure::Internal(e.into()))?;
        }
    }

    let failed = entries.iter().filter(|e| e.status == "error").count();
    if failed > 0 {
        eprintln!("{failed} of {} inputs failed", entries.len());
    }
    if failed == entries.len() {
        return Err(Failure::input("no input could be scanned"));
    }
    Ok(())
}
