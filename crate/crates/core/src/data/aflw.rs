//! AFLW-style CSV manifest: `path,l0x,l0y,...,bx,by,bw,bh`.

use crate::geometry::BBox;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AflwRecord {
    pub path: String,
    pub points: Vec<[f64; 2]>,
    pub bbox: BBox,
}

fn expected_header(landmarks: usize) -> Vec<String> {
    let mut h = vec!["path".to_string()];
    for i in 0..landmarks {
        h.push(format!("l{i}x"));
        h.push(format!("l{i}y"));
    }
    h.extend(["bx", "by", "bw", "bh"].map(String::from));
    h
}

pub fn parse_aflw_csv(text: &str) -> Result<Vec<AflwRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header.len() < 7 || (header.len() - 5) % 2 != 0 {
        return Err(Error::parse(1, format!("header has {} columns", header.len())));
    }
    let landmarks = (header.len() - 5) / 2;
    if header != expected_header(landmarks) {
        return Err(Error::parse(1, "header must be `path,l0x,l0y,...,bx,by,bw,bh`"));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(line, e.to_string()))?;
        if row.len() != header.len() {
            return Err(Error::parse(line, format!("expected {} columns, found {}", header.len(), row.len())));
        }
        let nums = row
            .iter()
            .skip(1)
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(line, format!("non-numeric value `{t}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (coords, b) = nums.split_at(2 * landmarks);
        out.push(AflwRecord {
            path: row[0].to_string(),
            points: coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            bbox: BBox::new(b[0], b[1], b[2], b[3]),
        });
    }
    Ok(out)
}
