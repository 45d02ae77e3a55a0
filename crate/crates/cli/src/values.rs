//! `--values` syntax for sweeps.

const DEFAULT_STEP: f64 = 0.1;

/// Decimal places kept for range points, so `0.1..0.9` yields 0.3 rather
/// than 0.30000000000000004.
const RANGE_DIGITS: i32 = 9;

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

/// Parses `a,b,c`, `lo..hi` or `lo..hi:step`. Ranges include both ends.
pub fn parse(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty value list".into());
    }
    let Some((lo, rest)) = text.split_once("..") else {
        return text.split(',').map(number).collect();
    };
    let (hi, step) = match rest.split_once(':') {
        Some((hi, step)) => (number(hi)?, number(step)?),
        None => (number(rest)?, DEFAULT_STEP),
    };
    let lo = number(lo)?;
    if step <= 0.0 {
        return Err(format!("step {step} must be positive"));
    }
    if hi < lo {
        return Err(format!("range {lo}..{hi} is empty"));
    }
    let scale = 10f64.powi(RANGE_DIGITS);
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((lo + i as f64 * step) * scale).round() / scale)
        .collect())
}
