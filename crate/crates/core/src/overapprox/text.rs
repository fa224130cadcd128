//! Line-oriented evidence dump.
//!
//! ```text
//! # evidence n=<n> m=<m>
//! x_1 .. x_2n  F_1.lo F_1.hi .. F_n.lo F_n.hi  G_11.lo G_11.hi G_12.lo .. G_nm.hi
//! ```
//!
//! One entry per line, whitespace separated, `G` in row-major order. Numbers
//! use Rust's shortest round-trip formatting so a dump reloads bit-exactly.

use std::fmt::Write;

use super::{EvidenceEntry, OverapproxError};
use crate::interval::{Interval, IntervalMatrix, IntervalVector};

pub fn write_evidence(entries: &[EvidenceEntry]) -> String {
    let (n, m) = entries.first().map_or((0, 0), |e| (e.cf.len(), e.cg.cols()));
    let mut out = format!("# evidence n={n} m={m}\n");
    for e in entries {
        let mut fields: Vec<String> = e.x.iter().map(|v| v.to_string()).collect();
        for a in e.cf.iter().chain(e.cg.iter()) {
            fields.push(a.lo().to_string());
            fields.push(a.hi().to_string());
        }
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}

pub fn read_evidence(text: &str) -> Result<Vec<EvidenceEntry>, OverapproxError> {
    let bad = |line: usize, msg: &str| OverapproxError::Invalid(format!("evidence line {line}: {msg}"));
    let mut dims: Option<(usize, usize)> = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if dims.is_none() {
                dims = parse_header(rest);
            }
            continue;
        }
        let (n, m) = dims.ok_or_else(|| bad(i + 1, "missing '# evidence n=.. m=..' header"))?;
        let nums = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(i + 1, &e.to_string()))?;
        let want = 2 * n + 2 * n + 2 * n * m;
        if nums.len() != want {
            return Err(bad(i + 1, &format!("expected {want} numbers, found {}", nums.len())));
        }
        let iv = |j: usize| Interval::try_new(nums[j], nums[j + 1]).map_err(|e| bad(i + 1, &e.to_string()));
        let x = nums[..2 * n].to_vec();
        let cf = (0..n).map(|k| iv(2 * n + 2 * k)).collect::<Result<IntervalVector, _>>()?;
        let base = 4 * n;
        let mut cg = IntervalMatrix::filled(n, m, Interval::point(0.0));
        for k in 0..n {
            for l in 0..m {
                cg.set(k, l, iv(base + 2 * (k * m + l))?);
            }
        }
        out.push(EvidenceEntry { x, cf, cg });
    }
    Ok(out)
}

fn parse_header(rest: &str) -> Option<(usize, usize)> {
    let mut words = rest.split_whitespace();
    if words.next()? != "evidence" {
        return None;
    }
    let mut n = None;
    let mut m = None;
    for w in words {
        if let Some(v) = w.strip_prefix("n=") {
            n = v.parse().ok();
        } else if let Some(v) = w.strip_prefix("m=") {
            m = v.parse().ok();
        }
    }
    Some((n?, m?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let e = EvidenceEntry {
            x: vec![0.1, -0.2, 1.0 / 3.0, 4.0],
            cf: IntervalVector::new(vec![Interval::new(-1.5, 2.0), Interval::new(0.1, 0.30000000000000004)]),
            cg: IntervalMatrix::from_fn(2, 3, |r, c| Interval::new(r as f64 - c as f64, 7.25 + r as f64)),
        };
        let text = write_evidence(&[e.clone(), e.clone()]);
        assert_eq!(read_evidence(&text).unwrap(), vec![e.clone(), e]);
    }

    #[test]
    fn rejects_short_line() {
        assert!(read_evidence("# evidence n=1 m=1\n1 2 3\n").is_err());
        assert!(read_evidence("1 2 3\n").is_err());
    }
}
