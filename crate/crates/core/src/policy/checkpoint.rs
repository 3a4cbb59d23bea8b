//! Text checkpoints with bit-exact weights.
//!
//! ```text
//! crlab-policy v1
//! vocab 0 1 2 3 4 5 6 7 8 9 + - * / = ; <end>
//! end_token 16
//! feature_dim 96
//! temperature 3ff0000000000000
//! weights
//! <feature_dim lines of |vocab| hex words>
//! ```
//!
//! Reals are written as the hexadecimal IEEE-754 bit pattern, so a round trip
//! reproduces every weight exactly.

use std::path::Path;

use super::PolicyParams;
use crate::envs::pool::write_atomic;
use crate::envs::Token;
use crate::error::{Error, Result};

pub const MAGIC: &str = "crlab-policy v1";

fn hex_f64(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn parse_hex_f64(s: &str) -> Option<f64> {
    (s.len() == 16).then_some(())?;
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}

pub fn to_text(p: &PolicyParams) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("vocab {}\n", p.vocab.join(" ")));
    out.push_str(&format!("end_token {}\n", p.end_token));
    out.push_str(&format!("feature_dim {}\n", p.feature_dim));
    out.push_str(&format!("temperature {}\n", hex_f64(p.temperature_default)));
    out.push_str("weights\n");
    for row in p.weights.chunks(p.vocab.len()) {
        let words: Vec<String> = row.iter().map(|&w| hex_f64(w)).collect();
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    out
}

pub fn from_text(text: &str, origin: &str) -> Result<PolicyParams> {
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(origin.to_string(), format!("unexpected end of file, expected {what}")))
    };
    let err = |i: usize, m: String| Error::parse(format!("{origin}:{}", i + 1), m);
    let (i, magic) = next("header")?;
    if magic != MAGIC {
        return Err(err(i, format!("expected `{MAGIC}`")));
    }
    let mut keyed = |key: &str| -> Result<(usize, String)> {
        let (i, line) = next(key)?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((i, v.to_string())),
            _ => Err(err(i, format!("expected `{key} …`"))),
        }
    };
    let (_, vocab) = keyed("vocab")?;
    let vocab: Vec<String> = vocab.split(' ').map(str::to_string).collect();
    let (i, end) = keyed("end_token")?;
    let end_token: Token = end.parse().map_err(|_| err(i, "bad end_token".into()))?;
    let (i, dim) = keyed("feature_dim")?;
    let feature_dim: usize = dim.parse().map_err(|_| err(i, "bad feature_dim".into()))?;
    let (i, temp) = keyed("temperature")?;
    let temperature_default = parse_hex_f64(&temp).ok_or_else(|| err(i, "bad temperature".into()))?;
    let (i, w) = next("weights")?;
    if w != "weights" {
        return Err(err(i, "expected `weights`".into()));
    }
    let mut weights = Vec::with_capacity(feature_dim * vocab.len());
    for _ in 0..feature_dim {
        let (i, row) = next("weight row")?;
        let vals: Vec<f64> = row
            .split(' ')
            .map(|s| parse_hex_f64(s).ok_or_else(|| err(i, format!("bad weight `{s}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != vocab.len() {
            return Err(err(i, format!("row has {} weights, expected {}", vals.len(), vocab.len())));
        }
        weights.extend(vals);
    }
    if let Ok((i, _)) = next("end of file") {
        return Err(err(i, "trailing content".into()));
    }
    let p = PolicyParams {
        vocab,
        end_token,
        feature_dim,
        weights,
        temperature_default,
    };
    p.validate()?;
    Ok(p)
}

pub fn save(path: &Path, p: &PolicyParams) -> Result<()> {
    write_atomic(path, to_text(p).as_bytes())
}

pub fn load(path: &Path) -> Result<PolicyParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Family;
    use crate::policy::base_prior;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut p = base_prior(Family::Countdown);
        p.weights[3] = 0.1 + 0.2;
        p.weights[7] = -1e-300;
        p.weights[11] = f64::MIN_POSITIVE / 3.0;
        let q = from_text(&to_text(&p), "mem").unwrap();
        assert_eq!(q.weights.len(), p.weights.len());
        for (a, b) in p.weights.iter().zip(&q.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(q, p);
    }

    #[test]
    fn rejects_truncated_file() {
        let p = base_prior(Family::Blocksworld);
        let text = to_text(&p);
        let cut: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(from_text(&cut, "mem").is_err());
        assert!(from_text("nope", "mem").is_err());
    }
}
