//! The 300-W `.pts` landmark format.

use crate::{Error, Result};

/// Parses a `.pts` file, converting 1-based file coordinates to 0-based.
pub fn parse_pts(text: &str) -> Result<Vec<[f64; 2]>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of input, expected {what}")))
    };

    let (ln, version) = next("`version: 1`")?;
    let version = version
        .strip_prefix("version:")
        .map(str::trim)
        .ok_or_else(|| Error::parse(ln, format!("expected `version: 1`, found `{version}`")))?;
    if version != "1" {
        return Err(Error::parse(ln, format!("unsupported version `{version}`")));
    }

    let (ln, header) = next("`n_points: N`")?;
    let count: usize = header
        .strip_prefix("n_points:")
        .map(str::trim)
        .ok_or_else(|| Error::parse(ln, format!("expected `n_points: N`, found `{header}`")))?
        .parse()
        .map_err(|_| Error::parse(ln, format!("invalid point count in `{header}`")))?;

    let (ln, open) = next("`{`")?;
    if open != "{" {
        return Err(Error::parse(ln, format!("expected `{{`, found `{open}`")));
    }

    let mut points = Vec::with_capacity(count.min(4096));
    loop {
        let (ln, line) = next("`}`")?;
        if line == "}" {
            if points.len() != count {
                return Err(Error::parse(ln, format!("expected {count} points, found {}", points.len())));
            }
            break;
        }
        let mut tokens = line.split_whitespace();
        let mut coord = || -> Result<f64> {
            let tok = tokens.next().ok_or_else(|| Error::parse(ln, "expected two coordinates"))?;
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(ln, format!("non-numeric token `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(ln, format!("non-finite coordinate `{tok}`")));
            }
            // Shift in decimal so the 0-based value is rounded only once.
            Ok(shift_by_one(tok, false).and_then(|t| t.parse().ok()).unwrap_or(v - 1.0))
        };
        let (x, y) = (coord()?, coord()?);
        if tokens.next().is_some() {
            return Err(Error::parse(ln, "more than two values on a point line"));
        }
        if points.len() == count {
            return Err(Error::parse(ln, format!("more than the declared {count} points")));
        }
        points.push([x, y]);
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(Error::parse(ln, format!("trailing content `{extra}`")));
    }
    Ok(points)
}

/// Byte-level entry point; invalid UTF-8 is a parse error.
pub fn parse_pts_bytes(bytes: &[u8]) -> Result<Vec<[f64; 2]>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse(0, format!("invalid UTF-8: {e}")))?;
    parse_pts(text)
}

/// Writes 0-based points as a 1-based `.pts` document.
pub fn write_pts(points: &[[f64; 2]]) -> String {
    let mut out = format!("version: 1\nn_points: {}\n{{\n", points.len());
    for p in points {
        let [x, y] = p.map(|v| shift_by_one(&v.to_string(), true).unwrap_or_else(|| (v + 1.0).to_string()));
        out.push_str(&format!("{x} {y}\n"));
    }
    out.push_str("}\n");
    out
}

/// Adds or subtracts one in decimal arithmetic on a plain decimal token
/// (`-12.5`, `+3`, `.25`). Other spellings return `None`.
fn shift_by_one(token: &str, up: bool) -> Option<String> {
    let (neg, body) = match token.as_bytes().first()? {
        b'-' => (true, &token[1..]),
        b'+' => (false, &token[1..]),
        _ => (false, token),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if (int.is_empty() && frac.is_empty()) || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let a: Vec<u8> = int.bytes().chain(frac.bytes()).map(|b| b - b'0').collect();
    let mut one = vec![0u8; frac.len() + 1];
    one[0] = 1;
    let (mag, neg) = if neg != up {
        (add_digits(&a, &one), neg)
    } else if cmp_digits(&a, &one).is_ge() {
        (sub_digits(&a, &one), neg)
    } else {
        (sub_digits(&one, &a), !neg)
    };

    let mut mag = mag;
    while mag.len() < frac.len() + 1 {
        mag.insert(0, 0);
    }
    let split = mag.len() - frac.len();
    let lead = mag[..split - 1].iter().take_while(|&&d| d == 0).count();
    let digit = |d: &u8| char::from(b'0' + d);
    let mut out = String::new();
    if neg && mag.iter().any(|&d| d != 0) {
        out.push('-');
    }
    out.extend(mag[lead..split].iter().map(digit));
    if !frac.is_empty() {
        out.push('.');
        out.extend(mag[split..].iter().map(digit));
    }
    Some(out)
}

fn trimmed(a: &[u8]) -> &[u8] {
    &a[a.iter().take_while(|&&d| d == 0).count()..]
}

fn cmp_digits(a: &[u8], b: &[u8]) -> std::cmp::Ordering {
    let (a, b) = (trimmed(a), trimmed(b));
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Big-endian digit sum.
fn add_digits(a: &[u8], b: &[u8]) -> Vec<u8> {
    let n = a.len().max(b.len());
    let at = |v: &[u8], i: usize| if i < v.len() { v[v.len() - 1 - i] } else { 0 };
    let mut out = Vec::with_capacity(n + 1);
    let mut carry = 0;
    for i in 0..n {
        let s = at(a, i) + at(b, i) + carry;
        out.push(s % 10);
        carry = s / 10;
    }
    if carry > 0 {
        out.push(carry);
    }
    out.reverse();
    out
}

/// Big-endian digit difference; requires `a >= b`.
fn sub_digits(a: &[u8], b: &[u8]) -> Vec<u8> {
    let at = |v: &[u8], i: usize| if i < v.len() { v[v.len() - 1 - i] as i8 } else { 0 };
    let mut out = Vec::with_capacity(a.len());
    let mut borrow = 0;
    for i in 0..a.len().max(b.len()) {
        let mut d = at(a, i) - at(b, i) - borrow;
        borrow = (d < 0) as i8;
        d += 10 * borrow;
        out.push(d as u8);
    }
    out.reverse();
    out
}
