use std::fs;
use std::path::Path;

use rkhs_complexity::{Kernel, KernelSpec, PointSet};

use crate::error::CliError;
use crate::args::DataArgs;

/// Rows of a numeric CSV. Lines starting with `#` are skipped; a first row
/// that does not parse as numbers is taken as a header.
pub fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 && rows.is_empty() => continue,
            Err(e) => {
                return Err(CliError::Validation(format!(
                    "{}: row {} is not numeric: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{}: no data rows", path.display())));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != rows[0].len()) {
        return Err(CliError::Validation(format!(
            "{}: row {} has {} columns, expected {}",
            path.display(),
            bad + 1,
            rows[bad].len(),
            rows[0].len()
        )));
    }
    Ok(rows)
}

pub fn read_kernel(path: &Path) -> Result<KernelSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: malformed kernel: {e}", path.display())))
}

/// Resolved kernel and point set.
pub fn load(data: &DataArgs) -> Result<(Kernel, PointSet), CliError> {
    let (spec, points) = if let Some(gram) = &data.gram {
        let gram = read_numeric_csv(gram)?;
        let n = gram.len();
        (KernelSpec::Precomputed { gram }, PointSet::ids(n)?)
    } else {
        let kernel_path = data
            .kernel
            .as_ref()
            .ok_or_else(|| CliError::Validation("either --kernel or --gram is required".into()))?;
        let spec = read_kernel(kernel_path)?;
        match (&spec, &data.points) {
            (KernelSpec::Precomputed { gram }, None) => {
                let n = gram.len();
                (spec, PointSet::ids(n)?)
            }
            (KernelSpec::Precomputed { .. }, Some(_)) => {
                return Err(CliError::Validation(
                    "a precomputed kernel takes no --points; points are row indices".into(),
                ))
            }
            (_, Some(p)) => {
                let rows = read_numeric_csv(p)?;
                (spec, PointSet::from_rows(rows)?)
            }
            (_, None) => return Err(CliError::Validation("--points is required for this kernel".into())),
        }
    };
    let points = match data.bound {
        Some(b) => points.with_bound(b)?,
        None => points,
    };
    Ok((Kernel::new(spec)?, points))
}
