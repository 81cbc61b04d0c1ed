use std::path::Path;

use prospect::{Matrix, Vector};

use crate::Failure;

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        let line = record
            .position()
            .map_or(rows.len() + 1, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| {
                Failure::validation(format!(
                    "{} line {line}: expected finite numbers",
                    path.display()
                ))
            })?;
        if let Some(first) = rows.first().map(|r: &Vec<f64>| r.len()) {
            if row.len() != first {
                return Err(Failure::validation(format!(
                    "{} line {line}: expected {first} columns, found {}",
                    path.display(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::validation(format!("{} is empty", path.display())));
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path) -> Result<Matrix, Failure> {
    let rows = parse_rows(path)?;
    let (n, p) = (rows.len(), rows[0].len());
    Ok(Matrix::from_fn(n, p, |i, j| rows[i][j]))
}

pub fn read_vector(path: &Path) -> Result<Vector, Failure> {
    let rows = parse_rows(path)?;
    if rows[0].len() != 1 {
        return Err(Failure::validation(format!(
            "{} line 1: expected a single column",
            path.display()
        )));
    }
    Ok(Vector::from_iterator(rows.len(), rows.iter().map(|r| r[0])))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::validation(format!("cannot write {}: {e}", path.display())))
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}
