//! Line-delimited JSON encoding of potential and tracked DOAs.
//!
//! Lines are formatted by hand so that field order and number formatting
//! are fixed: coordinates, energies and activities carry exactly three
//! decimals and never print as `-0.000`.

use std::fmt::Write;

use serde_json::Value;

use crate::ssl::PotentialDoa;
use crate::Vec3;

/// Protocol revision, documented with the schemas.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTag {
    /// Produced by the tracker.
    Dynamic,
    /// A fixed target from the configuration.
    Static,
}

impl SourceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Dynamic => "dynamic",
            SourceTag::Static => "static",
        }
    }
}

/// A separation target as published on the tracks stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetInfo {
    pub id: u64,
    pub tag: SourceTag,
    pub direction: Vec3,
    pub activity: f64,
}

/// Fixed three-decimal formatting without a negative zero.
pub fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

/// `{"frame":k,"pot":[{"x":..,"y":..,"z":..,"E":..},...]}`
pub fn pot_line(frame: u64, doas: &[PotentialDoa]) -> String {
    let mut s = format!("{{\"frame\":{frame},\"pot\":[");
    for (i, d) in doas.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(
            s,
            "{{\"x\":{},\"y\":{},\"z\":{},\"E\":{}}}",
            fmt3(d.direction.x),
            fmt3(d.direction.y),
            fmt3(d.direction.z),
            fmt3(d.power)
        );
    }
    s.push_str("]}");
    s
}

/// `{"frame":k,"src":[{"id":..,"tag":..,"x":..,"y":..,"z":..,"activity":..},...]}`
pub fn src_line(frame: u64, sources: &[TargetInfo]) -> String {
    let mut s = format!("{{\"frame\":{frame},\"src\":[");
    for (i, t) in sources.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(
            s,
            "{{\"id\":{},\"tag\":\"{}\",\"x\":{},\"y\":{},\"z\":{},\"activity\":{}}}",
            t.id,
            t.tag.as_str(),
            fmt3(t.direction.x),
            fmt3(t.direction.y),
            fmt3(t.direction.z),
            fmt3(t.activity)
        );
    }
    s.push_str("]}");
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Potential,
    Tracked,
}

fn is_fixed3(raw: &str) -> bool {
    let body = raw.strip_prefix('-').unwrap_or(raw);
    match body.split_once('.') {
        Some((int, frac)) => {
            !int.is_empty() && int.bytes().all(|b| b.is_ascii_digit()) && frac.len() == 3 && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

fn check_keys(obj: &serde_json::Map<String, Value>, keys: &[&str], what: &str) -> Result<(), String> {
    let got: Vec<&str> = obj.keys().map(String::as_str).collect();
    if got != keys {
        return Err(format!("{what}: keys {got:?}, expected {keys:?}"));
    }
    Ok(())
}

/// Checks one line against the documented schema, including key order and
/// the three-decimal number format.
pub fn validate_line(stream: Stream, line: &str) -> Result<(), String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("not JSON: {e}"))?;
    let obj = v.as_object().ok_or("not an object")?;
    let (list_key, item_keys, numeric): (&str, &[&str], &[&str]) = match stream {
        Stream::Potential => ("pot", &["x", "y", "z", "E"], &["x", "y", "z", "E"]),
        Stream::Tracked => (
            "src",
            &["id", "tag", "x", "y", "z", "activity"],
            &["x", "y", "z", "activity"],
        ),
    };
    check_keys(obj, &["frame", list_key], "frame object")?;
    obj["frame"].as_u64().ok_or("frame must be a non-negative integer")?;
    let items = obj[list_key].as_array().ok_or("list expected")?;
    for item in items {
        let o = item.as_object().ok_or("item must be an object")?;
        check_keys(o, item_keys, "item")?;
        if stream == Stream::Tracked {
            o["id"].as_u64().ok_or("id must be a positive integer")?;
            match o["tag"].as_str() {
                Some("dynamic") | Some("static") => {}
                _ => return Err("tag must be \"dynamic\" or \"static\"".into()),
            }
        }
        for k in numeric {
            if !o[*k].is_number() {
                return Err(format!("{k} must be a number"));
            }
        }
    }
    // number format, checked on the raw text
    for k in numeric {
        let pat = format!("\"{k}\":");
        let mut r = line;
        while let Some(p) = r.find(&pat) {
            let tail = &r[p + pat.len()..];
            let end = tail.find([',', '}']).unwrap_or(tail.len());
            if !is_fixed3(&tail[..end]) {
                return Err(format!("{k} is not formatted with three decimals: {}", &tail[..end]));
            }
            r = &tail[end..];
        }
    }
    Ok(())
}
