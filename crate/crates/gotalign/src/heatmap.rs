//! Transport plans as pictures: binary PGM (P5) plus the raw CSV.
//!
//! Rows of the image are patches, columns are tokens. Each column is
//! divided by its own maximum and scaled to 0..=255, so every token's
//! attention map uses the full gray range; an all-zero column stays black.

use std::fs;
use std::path::Path;

use gotalign_core::Matrix;

use crate::error::{Error, Result};

/// Column-max normalized 8-bit intensities, row-major.
pub fn intensities(plan: &Matrix) -> Vec<u8> {
    let (rows, cols) = plan.shape();
    let max: Vec<f64> = (0..cols)
        .map(|c| (0..rows).map(|r| plan[(r, c)]).fold(0.0, f64::max))
        .collect();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for (c, &m) in max.iter().enumerate() {
            let v = if m > 0.0 { plan[(r, c)] / m } else { 0.0 };
            out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn pgm_bytes(plan: &Matrix) -> Vec<u8> {
    let (rows, cols) = plan.shape();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(intensities(plan));
    out
}

/// One line per patch, tokens separated by commas, shortest round-trip floats.
pub fn csv_text(plan: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..plan.rows() {
        let line: Vec<String> = plan.row(r).iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> std::result::Result<Matrix, String> {
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string()))
                .collect()
        })
        .collect::<std::result::Result<Vec<Vec<f64>>, String>>()?;
    Matrix::from_rows(&rows).map_err(|e| e.to_string())
}

/// Writes `<stem>.pgm` and `<stem>.csv` into `dir`.
pub fn export_heatmap(plan: &Matrix, dir: &Path, stem: &str) -> Result<()> {
    if plan.data().iter().any(|&x| x < 0.0 || x.is_nan()) {
        return Err(Error::Usage(format!("plan `{stem}` has negative or NaN entries")));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pgm = dir.join(format!("{stem}.pgm"));
    fs::write(&pgm, pgm_bytes(plan)).map_err(|e| Error::io(&pgm, e))?;
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&csv, csv_text(plan)).map_err(|e| Error::io(&csv, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_saturates() {
        assert_eq!(intensities(&Matrix::scalar(0.5)), vec![255]);
    }

    #[test]
    fn uniform_plan_is_all_white() {
        assert_eq!(intensities(&Matrix::filled(2, 2, 0.25)), vec![255; 4]);
    }

    #[test]
    fn columns_are_normalized_separately() {
        let plan = Matrix::from_rows(&[vec![0.4, 0.0], vec![0.1, 0.0], vec![0.2, 0.3]]).unwrap();
        assert_eq!(intensities(&plan), vec![255, 0, 64, 0, 128, 255]);
    }

    #[test]
    fn pgm_header_and_size() {
        let bytes = pgm_bytes(&Matrix::filled(3, 2, 0.1));
        assert!(bytes.starts_with(b"P5\n2 3\n255\n"));
        assert_eq!(bytes.len(), b"P5\n2 3\n255\n".len() + 6);
    }

    #[test]
    fn csv_roundtrip() {
        let plan = Matrix::from_fn(3, 4, |r, c| (r as f64 + 1.0) / (c as f64 + 7.0) / 3.0);
        let back = parse_csv(&csv_text(&plan)).unwrap();
        assert!(back.max_abs_diff(&plan).unwrap() < 1e-9);
    }

    #[test]
    fn negative_plans_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let plan = Matrix::from_rows(&[vec![0.5, -0.1]]).unwrap();
        assert!(export_heatmap(&plan, dir.path(), "x").is_err());
        export_heatmap(&Matrix::filled(2, 2, 0.25), dir.path(), "ok").unwrap();
        assert!(dir.path().join("ok.pgm").exists() && dir.path().join("ok.csv").exists());
    }
}
