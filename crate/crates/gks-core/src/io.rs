//! Serialization: a small binary profile container, CSV tables, and a
//! minimal JSON writer for report files.

use std::fmt::Write as _;

use crate::error::{GksError, Result};
use crate::profile::{WaveParams, WaveProfile};

/// Header magic of the binary profile container.
pub const PROFILE_MAGIC: &[u8; 8] = b"GKSPROF1";

/// Guards allocation on corrupt headers.
const MAX_SAMPLES: u64 = 1 << 24;

/// Layout: magic, then `k, m, delta, c, qbar` as little-endian f64, then the
/// sample count as little-endian u64, then the samples.
pub fn write_profile<W: std::io::Write>(w: &mut W, profile: &WaveProfile) -> Result<()> {
    w.write_all(PROFILE_MAGIC)?;
    let head = [
        profile.params.k,
        profile.params.m,
        profile.params.delta,
        profile.c,
        profile.qbar,
    ];
    for v in head {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(profile.u.len() as u64).to_le_bytes())?;
    for v in &profile.u {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64<R: std::io::Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_profile<R: std::io::Read>(r: &mut R) -> Result<WaveProfile> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != PROFILE_MAGIC {
        return Err(GksError::format("profile header magic mismatch"));
    }
    let k = read_f64(r)?;
    let m = read_f64(r)?;
    let delta = read_f64(r)?;
    let c = read_f64(r)?;
    let qbar = read_f64(r)?;
    if !c.is_finite() || !qbar.is_finite() {
        return Err(GksError::format("profile header holds non-finite values"));
    }
    let params = WaveParams::new(k, m, delta)
        .map_err(|_| GksError::format("profile header parameters out of range"))?;
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let n = u64::from_le_bytes(b);
    if n == 0 || n > MAX_SAMPLES {
        return Err(GksError::format(format!("implausible sample count {n}")));
    }
    let mut u = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let v = read_f64(r)?;
        if !v.is_finite() {
            return Err(GksError::format("profile samples hold non-finite values"));
        }
        u.push(v);
    }
    Ok(WaveProfile { params, u, c, qbar })
}

/// Two-column table of the profile against the unit grid.
pub fn write_profile_csv<W: std::io::Write>(w: &mut W, profile: &WaveProfile) -> Result<()> {
    writeln!(w, "y,u")?;
    let n = profile.u.len();
    for (j, v) in profile.u.iter().enumerate() {
        writeln!(w, "{:.12e},{:.12e}", j as f64 / n as f64, v)?;
    }
    Ok(())
}

/// A JSON document built by hand. The writer is deterministic: object keys
/// keep insertion order and every float prints as `{:.12e}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Object(Vec<(String, Json)>),
    Array(Vec<Json>),
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
}

impl Json {
    pub fn key(name: &str, value: Json) -> (String, Json) {
        (name.to_string(), value)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }

    fn render_into(&self, out: &mut String) {
        match self {
            Json::Object(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    push_escaped(out, k);
                    out.push(':');
                    v.render_into(out);
                }
                out.push('}');
            }
            Json::Array(items) => {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    v.render_into(out);
                }
                out.push(']');
            }
            // JSON has no spelling for non-finite numbers.
            Json::Num(v) if !v.is_finite() => out.push_str("null"),
            Json::Num(v) => write!(out, "{v:.12e}").expect("string write"),
            Json::Int(v) => write!(out, "{v}").expect("string write"),
            Json::Str(s) => push_escaped(out, s),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        }
    }
}

fn push_escaped(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                write!(out, "\\u{:04x}", c as u32).expect("string write");
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_profile() -> WaveProfile {
        WaveProfile {
            params: WaveParams::new(0.7, 0.25, 0.05).unwrap(),
            u: vec![0.1, -0.2, 0.3, 0.55],
            c: -0.4375,
            qbar: 0.0123,
        }
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let p = sample_profile();
        let mut buf = Vec::new();
        write_profile(&mut buf, &p).unwrap();
        let q = read_profile(&mut buf.as_slice()).unwrap();
        assert_eq!(p.params, q.params);
        assert_eq!(p.c.to_bits(), q.c.to_bits());
        assert_eq!(p.qbar.to_bits(), q.qbar.to_bits());
        assert_eq!(p.u.len(), q.u.len());
        for (a, b) in p.u.iter().zip(&q.u) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_corrupt_containers() {
        let p = sample_profile();
        let mut buf = Vec::new();
        write_profile(&mut buf, &p).unwrap();
        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(read_profile(&mut wrong_magic.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 4];
        assert!(read_profile(&mut &truncated[..]).is_err());
        // Sample count far past the payload.
        let mut huge = buf.clone();
        let off = 8 + 5 * 8;
        huge[off..off + 8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(read_profile(&mut huge.as_slice()).is_err());
    }

    #[test]
    fn csv_layout_is_stable() {
        let mut p = sample_profile();
        p.u = vec![1.0, -0.5];
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "y,u\n0.000000000000e0,1.000000000000e0\n5.000000000000e-1,-5.000000000000e-1\n");
    }

    #[test]
    fn json_renders_deterministically() {
        let doc = Json::Object(vec![
            Json::key("name", Json::Str("wave \"a\"\n".into())),
            Json::key("speed", Json::Num(-0.4375)),
            Json::key("count", Json::Int(3)),
            Json::key("ok", Json::Bool(true)),
            Json::key("values", Json::Array(vec![Json::Num(1.0), Json::Num(f64::NAN)])),
        ]);
        assert_eq!(
            doc.render(),
            "{\"name\":\"wave \\\"a\\\"\\n\",\"speed\":-4.375000000000e-1,\"count\":3,\"ok\":true,\"values\":[1.000000000000e0,null]}"
        );
    }
}
