use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dexlens::eval::{
    label_pair, metrics_csv, plan_labels, prediction, score, LabeledApp, ManifestEntry, SIMULATED_FEATURES,
    SIMULATED_SUFFIX,
};
use dexlens::simulate::{simulate as run_plan, SimulationPlan};
use dexlens::{analyze, load_app, save_app, AppModel};

use crate::io::{file_stem_for, json_inputs, load_config, read, to_json, write};
use crate::{input_err, CmdResult, Failure};

fn load_plan(path: &Path) -> Result<SimulationPlan, Failure> {
    SimulationPlan::from_json(&read(path)?).map_err(input_err(path))
}

fn load_models(path: &Path) -> Result<Vec<AppModel>, Failure> {
    let files = json_inputs(path)?;
    if files.is_empty() {
        return Err(Failure::input(format!("{}: no model files", path.display())));
    }
    files
        .par_iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(input_err(p))?;
            load_app(&bytes).map_err(input_err(p))
        })
        .collect()
}

fn relative(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

pub fn simulate(models: &Path, plan: &Path, out: &Path) -> CmdResult {
    let plan = load_plan(plan)?;
    let apps = load_models(models)?;
    let mut manifest = Vec::with_capacity(apps.len() * 2);
    for app in &apps {
        let stem = file_stem_for(&app.app_id);
        let mut sim = run_plan(app, &plan).map_err(|e| Failure::Input(e.into()))?;
        sim.app.app_id = format!("{}{SIMULATED_SUFFIX}", app.app_id);

        let orig_path = PathBuf::from("original").join(format!("{stem}.json"));
        let obf_path = PathBuf::from("obfuscated").join(format!("{stem}.json"));
        write(&out.join(&orig_path), save_app(app))?;
        write(&out.join(&obf_path), save_app(&sim.app))?;
        write(&out.join("maps").join(format!("{stem}.json")), to_json(&sim.map))?;
        manifest.push(ManifestEntry {
            model_path: relative(&orig_path),
            labels: SIMULATED_FEATURES.iter().map(|f| (*f, false)).collect(),
        });
        manifest.push(ManifestEntry {
            model_path: relative(&obf_path),
            labels: plan_labels(&plan),
        });
    }
    write(&out.join("manifest.json"), to_json(&manifest))?;
    println!("{} apps, {} labeled models in {}", apps.len(), manifest.len(), out.display());
    Ok(())
}

pub fn eval(models: &Path, plan: &Path, out: &Path, config: Option<&Path>, main_view: bool) -> CmdResult {
    let cfg = load_config(config)?;
    let plan = load_plan(plan)?;
    let apps = load_models(models)?;
    let labeled: Vec<LabeledApp> = apps
        .par_iter()
        .map(|a| label_pair(a, &plan))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Input(e.into()))?
        .into_iter()
        .flatten()
        .collect();

    let mut predictions = Vec::with_capacity(labeled.len());
    let mut labels = Vec::with_capacity(labeled.len());
    let mut unrated = 0;
    let reports: Vec<_> = labeled.par_iter().map(|l| analyze(&l.model, &cfg.detector)).collect();
    for (l, report) in labeled.iter().zip(&reports) {
        let flags = if main_view {
            match &report.main_package {
                Some(f) => f,
                None => {
                    unrated += 1;
                    continue;
                }
            }
        } else {
            &report.all_packages
        };
        predictions.push(prediction(flags, &SIMULATED_FEATURES));
        labels.push(l.labels.clone());
    }
    if unrated > 0 {
        eprintln!("warning: {unrated} models have no main-package view and were not scored");
    }
    let scores = score(&predictions, &labels).map_err(|e| Failure::Internal(e.into()))?;

    let csv = metrics_csv(&scores);
    write(out, &csv)?;
    write(&out.with_extension("json"), to_json(&scores))?;
    print!("{csv}");
    Ok(())
}
