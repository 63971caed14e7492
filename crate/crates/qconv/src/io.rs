//! Tensor file formats: JSON `{"shape": [..], "data": [..]}` (extra fields
//! ignored) and CSV with a `shape,...` header line followed by data rows that
//! concatenate to the flattened tensor.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

#[derive(Deserialize)]
struct TensorFile {
    shape: [usize; 4],
    data: Vec<f64>,
}

pub fn parse_tensor_json(text: &str) -> Result<Tensor4> {
    let file: TensorFile =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("invalid tensor JSON: {e}")))?;
    Tensor4::new(file.shape, file.data)
}

pub fn parse_tensor_csv(text: &str) -> Result<Tensor4> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("empty CSV tensor file"))?;
    let mut fields = header.split(',').map(str::trim);
    if fields.next() != Some("shape") {
        return Err(Error::parse("CSV tensor file must start with a 'shape,...' header"));
    }
    let dims: Vec<usize> = fields
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| Error::parse(format!("invalid shape field '{f}'")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 4 {
        return Err(Error::parse(format!(
            "expected 4 shape dimensions, got {}",
            dims.len()
        )));
    }
    let mut data = Vec::new();
    for line in lines {
        for field in line.split(',') {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            data.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Error::parse(format!("invalid value '{field}'")))?,
            );
        }
    }
    Tensor4::new([dims[0], dims[1], dims[2], dims[3]], data)
}

/// Read a tensor file, choosing the format by extension (.csv is CSV,
/// anything else is JSON).
pub fn read_tensor(path: &Path) -> Result<Tensor4> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "csv") {
        parse_tensor_csv(&text)
    } else {
        parse_tensor_json(&text)
    }
}

/// CSV rendering: shape header, then one row per leading-index slice.
pub fn tensor_to_csv(t: &Tensor4) -> String {
    let mut out = format!(
        "shape,{},{},{},{}\n",
        t.shape[0], t.shape[1], t.shape[2], t.shape[3]
    );
    let row_len = t.shape[1] * t.shape[2] * t.shape[3];
    for chunk in t.data.chunks(row_len.max(1)) {
        let row: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
