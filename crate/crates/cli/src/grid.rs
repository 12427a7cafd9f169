//! Comma lists with optional inclusive ranges: `1,2,5`, `0:4`, `0.1:0.5:0.2`.

use std::str::FromStr;

fn parse_one<T: FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("invalid {what} value '{}'", s.trim()))
}

/// Integers; ranges are `start:stop` or `start:stop:step`, both ends included.
pub fn parse_usize_list(spec: &str, what: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_one(v, what)?),
            [a, b] | [a, b, _] => {
                let (a, b): (usize, usize) = (parse_one(a, what)?, parse_one(b, what)?);
                let step: usize = if parts.len() == 3 { parse_one(parts[2], what)? } else { 1 };
                if step == 0 || b < a {
                    return Err(format!("empty {what} range '{item}'"));
                }
                out.extend((a..=b).step_by(step));
            }
            _ => return Err(format!("invalid {what} range '{item}'")),
        }
    }
    Ok(out)
}

/// Floats; ranges are `start:stop:step`, stop included when reached.
pub fn parse_f64_list(spec: &str, what: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_one(v, what)?),
            [a, b, s] => {
                let (a, b, s): (f64, f64, f64) =
                    (parse_one(a, what)?, parse_one(b, what)?, parse_one(s, what)?);
                if !(s > 0.0) || b < a {
                    return Err(format!("empty {what} range '{item}'"));
                }
                let count = ((b - a) / s + 1e-9).floor() as usize;
                // Multiplying instead of accumulating keeps 0.1:0.5:0.1 exact at the ends.
                out.extend((0..=count).map(|i| a + i as f64 * s));
            }
            _ => return Err(format!("invalid {what} range '{item}', expected start:stop:step")),
        }
    }
    Ok(out)
}
