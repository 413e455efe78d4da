use std::path::Path;

use crate::CliError;

/// Outputs `report` looks for, in report order.
const SOURCES: [(&str, &str); 4] = [
    ("verify", "verify.csv"),
    ("scaling", "scaling_fit.csv"),
    ("holder", "holder_fit.csv"),
    ("solve", "homotopy_fit.csv"),
];

/// Merges the check tables found in `dir` into `report.txt`. Passes iff at
/// least one table exists and no row failed.
pub fn merge(dir: &Path) -> Result<bool, CliError> {
    let mut text = String::new();
    let (mut found, mut failed) = (0, 0);
    for (name, file) in SOURCES {
        let path = dir.join(file);
        let Ok(body) = std::fs::read_to_string(&path) else { continue };
        found += 1;
        let mut lines = body.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        let Some(col) = header.iter().position(|h| *h == "status") else {
            return Err(CliError::Internal(format!("{} has no status column", path.display())));
        };
        let rows: Vec<Vec<&str>> = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
        let bad: Vec<&str> = rows.iter().filter(|r| r.get(col) != Some(&"pass")).map(|r| r[0]).collect();
        failed += bad.len();
        text.push_str(&format!("{name}: {}/{} pass", rows.len() - bad.len(), rows.len()));
        if !bad.is_empty() {
            text.push_str(&format!("; failing: {}", bad.join(" ")));
        }
        text.push('\n');
    }
    if found == 0 {
        return Err(CliError::Config(format!("no check tables in {}; run another command first", dir.display())));
    }
    text.push_str(&format!("overall: {}\n", if failed == 0 { "pass" } else { "fail" }));
    std::fs::write(dir.join("report.txt"), &text).map_err(|e| CliError::Internal(e.to_string()))?;
    print!("{text}");
    Ok(failed == 0)
}
