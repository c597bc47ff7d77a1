use std::path::Path;

use rayon::prelude::*;

use dexlens::corpus::{read_metadata_csv, read_metadata_json, CorpusAggregate, CorpusRecord};
use dexlens::model::load_report;

use crate::io::{json_inputs, load_config, read, to_json, write};
use crate::{input_err, CmdResult, Failure};

pub fn run(report_dir: &Path, metadata: &Path, out: &Path, config: Option<&Path>, micro: bool) -> CmdResult {
    let cfg = load_config(config)?;
    if !report_dir.is_dir() {
        return Err(Failure::input(format!("{}: not a directory", report_dir.display())));
    }
    let meta_bytes = read(metadata)?;
    let is_json = metadata.extension().is_some_and(|x| x.eq_ignore_ascii_case("json"));
    let table = if is_json {
        read_metadata_json(&meta_bytes)
    } else {
        read_metadata_csv(meta_bytes.as_slice())
    }
    .map_err(input_err(metadata))?;
    for w in &table.warnings {
        eprintln!("warning: {}: {w}", metadata.display());
    }

    let files: Vec<_> = json_inputs(report_dir)?
        .into_iter()
        .filter(|p| p.file_name().is_some_and(|n| n != "scan_summary.json"))
        .collect();

    let (agg, warnings) = files
        .par_iter()
        .fold(
            || (CorpusAggregate::new(cfg.scope.clone()), Vec::new()),
            |(mut agg, mut warnings), path| {
                let parsed = std::fs::read(path)
                    .map_err(|e| e.to_string())
                    .and_then(|b| load_report(&b).map_err(|e| e.to_string()));
                match parsed {
                    Err(e) => warnings.push(format!("{}: skipped: {e}", path.display())),
                    Ok(report) => {
                        let metadata = table.rows.get(&report.app_id).cloned();
                        if metadata.is_none() {
                            warnings.push(format!("{}: no metadata for app `{}`", path.display(), report.app_id));
                        }
                        agg.add(&CorpusRecord { report, metadata });
                    }
                }
                (agg, warnings)
            },
        )
        .reduce(
            || (CorpusAggregate::new(cfg.scope.clone()), Vec::new()),
            |(mut a, mut wa), (b, wb)| {
                a.merge(b);
                wa.extend(wb);
                (a, wa)
            },
        );
    let mut warnings = warnings;
    warnings.sort();
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let mut options = cfg.tables.clone();
    options.micro_accounts |= micro;
    let tables = agg.finish(&options);

    write(&out.join("scopes.csv"), tables.scopes_csv())?;
    write(&out.join("scopes.json"), to_json(&tables.scopes))?;
    write(&out.join("downloads.csv"), tables.downloads_csv())?;
    write(&out.join("downloads.json"), to_json(&tables.downloads))?;
    write(&out.join("accounts.csv"), tables.accounts_csv())?;
    write(&out.join("accounts.json"), to_json(&tables.accounts))?;
    write(&out.join("trend.csv"), tables.trend_csv())?;
    write(&out.join("trend.json"), to_json(&tables.trend))?;
    write(&out.join("trend_all.csv"), tables.trend_series_csv(false))?;
    write(&out.join("trend_main.csv"), tables.trend_series_csv(true))?;
    write(&out.join("orphans.csv"), tables.orphans_csv())?;
    write(&out.join("orphans.json"), to_json(&tables.orphans))?;
    write(&out.join("tables.json"), to_json(&tables))?;

    println!(
        "{} apps, {} without metadata, {} scopes, {} orphan-bound apps",
        tables.apps,
        tables.skipped.metadata_missing,
        tables.scopes.len(),
        tables.orphans.count
    );
    Ok(())
}
