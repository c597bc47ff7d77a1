use std::path::Path;

use dexlens::load_app;
use dexlens::proguard::{grade, parse_gradle_snippet, parse_rules, GradeOptions, Rubric, Verdict};

use crate::io::{read, read_text, to_json, write};
use crate::{input_err, CmdResult, Failure};

fn at_line(path: &Path, e: dexlens::proguard::ParseError) -> Failure {
    Failure::input(format!("{}:{}: {}", path.display(), e.line, e.message))
}

pub fn run(
    build: &Path,
    rules: &Path,
    rubric: &Path,
    app: Option<&Path>,
    build_type: &str,
    lenient: bool,
    out: Option<&Path>,
) -> CmdResult {
    let gradle = parse_gradle_snippet(&read_text(build)?).map_err(|e| at_line(build, e))?;
    let rule_file = parse_rules(&read_text(rules)?).map_err(|e| at_line(rules, e))?;
    let rubric_doc: Rubric = serde_json::from_slice(&read(rubric)?).map_err(input_err(rubric))?;
    let model = match app {
        Some(p) => Some(load_app(&read(p)?).map_err(input_err(p))?),
        None => None,
    };

    let result = grade(
        &gradle.build_type(build_type),
        &rule_file,
        &rubric_doc,
        model.as_ref(),
        GradeOptions { lenient },
    );
    let json = to_json(&result);
    if let Some(p) = out {
        write(p, &json)?;
    }
    let verdict = match result.verdict {
        Verdict::Correct => "correct",
        Verdict::Incorrect => "incorrect",
    };
    println!("{verdict}");
    for note in &result.notes {
        println!("  {note}");
    }
    if out.is_none() {
        use std::io::Write;
        std::io::stdout().write_all(&json).map_err(|e| Failure::Internal(e.into()))?;
    }
    Ok(())
}
