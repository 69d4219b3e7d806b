//! Line-oriented dataset export for cross-implementation comparison.
//!
//! ```text
//! gotalign-dataset 1
//! samples <count>
//! sample <index>
//! patches <rows> <cols>
//! <cols floats>            (one line per patch)
//! tokens <n> <id>...
//! gt <n> <patch or ->...   (`-` marks a token with no ground-truth patch)
//! ```
//!
//! Tokens are separated by single spaces and floats use the shortest
//! round-trip decimal form, so a re-parse reproduces the samples exactly.

use std::fmt::Write as _;

use gotalign_core::data::PairedSample;
use gotalign_core::Matrix;

pub const FORMAT_LINE: &str = "gotalign-dataset 1";

/// Exported view of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub index: u64,
    pub patch_features: Matrix,
    pub token_ids: Vec<usize>,
    pub gt_alignment: Vec<Option<usize>>,
}

pub fn write(samples: &[(u64, &PairedSample)]) -> String {
    let mut out = String::new();
    writeln!(out, "{FORMAT_LINE}").unwrap();
    writeln!(out, "samples {}", samples.len()).unwrap();
    for (index, s) in samples {
        let (rows, cols) = s.patch_features.shape();
        writeln!(out, "sample {index}").unwrap();
        writeln!(out, "patches {rows} {cols}").unwrap();
        for r in 0..rows {
            let line: Vec<String> = s.patch_features.row(r).iter().map(f64::to_string).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        let ids: Vec<String> = s.token_ids.iter().map(usize::to_string).collect();
        writeln!(out, "tokens {} {}", ids.len(), ids.join(" ")).unwrap();
        let gt: Vec<String> = s
            .gt_alignment
            .iter()
            .map(|g| g.map_or_else(|| "-".to_owned(), |p| p.to_string()))
            .collect();
        writeln!(out, "gt {} {}", gt.len(), gt.join(" ")).unwrap();
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, expect: &str) -> Result<(usize, Vec<&'a str>), String> {
        let (n, line) = self
            .inner
            .next()
            .ok_or_else(|| format!("unexpected end of input, wanted `{expect}`"))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if !expect.is_empty() && parts.first() != Some(&expect) {
            return Err(format!("line {}: expected `{expect}`", n + 1));
        }
        Ok((n + 1, parts))
    }
}

fn field<T: std::str::FromStr>(parts: &[&str], i: usize, line: usize) -> Result<T, String> {
    parts
        .get(i)
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| format!("line {line}: bad or missing field {i}"))
}

fn counted<'a>(parts: &'a [&'a str], line: usize) -> Result<&'a [&'a str], String> {
    let n: usize = field(parts, 1, line)?;
    if parts.len() != n + 2 {
        return Err(format!("line {line}: expected {n} entries"));
    }
    Ok(&parts[2..])
}

pub fn parse(text: &str) -> Result<Vec<Record>, String> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, head) = lines.next("")?;
    if head.join(" ") != FORMAT_LINE {
        return Err("missing format line".into());
    }
    let (n, parts) = lines.next("samples")?;
    let count: usize = field(&parts, 1, n)?;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, parts) = lines.next("sample")?;
        let index = field(&parts, 1, n)?;
        let (n, parts) = lines.next("patches")?;
        let (rows, cols): (usize, usize) = (field(&parts, 1, n)?, field(&parts, 2, n)?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, parts) = lines.next("")?;
            if parts.len() != cols {
                return Err(format!("line {n}: expected {cols} values"));
            }
            for p in parts {
                data.push(p.parse::<f64>().map_err(|e| format!("line {n}: {e}"))?);
            }
        }
        let patch_features = Matrix::from_vec(rows, cols, data).map_err(|e| e.to_string())?;
        let (n, parts) = lines.next("tokens")?;
        let token_ids = counted(&parts, n)?
            .iter()
            .map(|x| x.parse().map_err(|_| format!("line {n}: bad token id `{x}`")))
            .collect::<Result<Vec<usize>, String>>()?;
        let (n, parts) = lines.next("gt")?;
        let gt_alignment = counted(&parts, n)?
            .iter()
            .map(|&x| match x {
                "-" => Ok(None),
                _ => x
                    .parse()
                    .map(Some)
                    .map_err(|_| format!("line {n}: bad patch index `{x}`")),
            })
            .collect::<Result<Vec<Option<usize>>, String>>()?;
        records.push(Record {
            index,
            patch_features,
            token_ids,
            gt_alignment,
        });
    }
    Ok(records)
}
