//! One line of the WFLW annotation list: 196 coordinates, a 4-int box
//! (`x_min y_min x_max y_max`), six binary attribute flags and an image path.

use crate::geometry::BBox;
use crate::{Error, Result};

pub const WFLW_LANDMARKS: usize = 98;
/// 196 + 4 + 6 + 1.
pub const WFLW_FIELDS: usize = 2 * WFLW_LANDMARKS + 4 + 6 + 1;

/// Attribute flags in file order.
pub const WFLW_ATTRIBUTES: [&str; 6] = ["pose", "expression", "illumination", "make-up", "occlusion", "blur"];

#[derive(Debug, Clone, PartialEq)]
pub struct WflwRecord {
    pub points: Vec<[f64; 2]>,
    /// `[x_min, y_min, x_max, y_max]`.
    pub bbox: [i64; 4],
    pub attributes: [bool; 6],
    pub filename: String,
}

impl WflwRecord {
    pub fn bbox(&self) -> BBox {
        let [x0, y0, x1, y1] = self.bbox;
        BBox::new(x0 as f64, y0 as f64, (x1 - x0) as f64, (y1 - y0) as f64)
    }

    pub fn to_line(&self) -> String {
        let mut fields: Vec<String> = self.points.iter().flat_map(|p| [p[0].to_string(), p[1].to_string()]).collect();
        fields.extend(self.bbox.iter().map(i64::to_string));
        fields.extend(self.attributes.iter().map(|&a| if a { "1" } else { "0" }.to_string()));
        fields.push(self.filename.clone());
        fields.join(" ")
    }
}

pub fn parse_wflw_line(text: &str) -> Result<WflwRecord> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != WFLW_FIELDS {
        return Err(Error::parse(1, format!("expected {WFLW_FIELDS} fields, found {}", fields.len())));
    }
    let mut coords = Vec::with_capacity(2 * WFLW_LANDMARKS);
    for (i, tok) in fields[..2 * WFLW_LANDMARKS].iter().enumerate() {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::parse(1, format!("field {}: non-numeric coordinate `{tok}`", i + 1)))?;
        if !v.is_finite() {
            return Err(Error::parse(1, format!("field {}: non-finite coordinate", i + 1)));
        }
        coords.push(v);
    }
    let mut bbox = [0i64; 4];
    for (k, tok) in fields[2 * WFLW_LANDMARKS..2 * WFLW_LANDMARKS + 4].iter().enumerate() {
        bbox[k] = tok
            .parse()
            .map_err(|_| Error::parse(1, format!("bbox field {}: expected an integer, found `{tok}`", k + 1)))?;
    }
    let mut attributes = [false; 6];
    for (k, tok) in fields[2 * WFLW_LANDMARKS + 4..WFLW_FIELDS - 1].iter().enumerate() {
        attributes[k] = match *tok {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    1,
                    format!("attribute `{}` must be 0 or 1, found `{other}`", WFLW_ATTRIBUTES[k]),
                ))
            }
        };
    }
    Ok(WflwRecord {
        points: coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        bbox,
        attributes,
        filename: fields[WFLW_FIELDS - 1].to_string(),
    })
}

/// Parses a whole annotation list, reporting the failing line number.
pub fn parse_wflw_file(text: &str) -> Result<Vec<WflwRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_wflw_line(l).map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(i + 1, message),
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_record(flag: &str) -> String {
        let mut f = vec!["0"; 2 * WFLW_LANDMARKS + 4];
        f.extend(std::iter::repeat_n(flag, 6));
        f.push("a.png");
        f.join(" ")
    }

    #[test]
    fn minimal_zero_record() {
        let r = parse_wflw_line(&zero_record("0")).unwrap();
        assert_eq!(r.points, vec![[0.0, 0.0]; 98]);
        assert_eq!(r.bbox, [0; 4]);
        assert_eq!(r.attributes, [false; 6]);
        assert_eq!(r.filename, "a.png");
    }

    #[test]
    fn flag_two_is_rejected() {
        assert!(matches!(parse_wflw_line(&zero_record("2")), Err(Error::Parse { .. })));
    }

    #[test]
    fn field_count_is_207() {
        assert_eq!(WFLW_FIELDS, 207);
        let full = zero_record("0");
        let short: Vec<&str> = full.split(' ').skip(1).collect();
        assert_eq!(short.len(), 206);
        let err = parse_wflw_line(&short.join(" ")).unwrap_err().to_string();
        assert!(err.contains("expected 207 fields, found 206"), "{err}");
    }

    #[test]
    fn non_integer_bbox_is_rejected() {
        let mut f: Vec<String> = zero_record("1").split(' ').map(String::from).collect();
        f[196] = "1.5".into();
        assert!(parse_wflw_line(&f.join(" ")).is_err());
    }

    #[test]
    fn round_trip() {
        let rec = WflwRecord {
            points: (0..98).map(|i| [i as f64 * 1.5, 200.0 - i as f64 * 0.25]).collect(),
            bbox: [3, 4, 150, 170],
            attributes: [true, false, false, true, false, true],
            filename: "dir/img_01.jpg".into(),
        };
        assert_eq!(parse_wflw_line(&rec.to_line()).unwrap(), rec);
        assert_eq!(rec.bbox(), BBox::new(3.0, 4.0, 147.0, 166.0));
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let text = format!("{}\n{}\n", zero_record("0"), zero_record("7"));
        match parse_wflw_file(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
