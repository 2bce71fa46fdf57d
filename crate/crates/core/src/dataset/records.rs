//! The feature-point record format.
//!
//! One record per line, eleven comma-separated fields:
//!
//! ```text
//! u1, v1, z1, id1, u2, v2, id2, class, e_I, e_Re, e_D
//! ```
//!
//! Whitespace around fields is ignored, blank lines and lines starting with
//! `#` are skipped. `class` is 0 (static) or 1 (dynamic).

use std::io::{BufRead, Write};

use crate::features::{FeatureVector, LabeledFeature};
use crate::geometry::Pixel;
use crate::{Error, Result};

pub const FIELD_COUNT: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRecord {
    pub u1: f64,
    pub v1: f64,
    /// Depth of the frame-1 observation in meters.
    pub z1: f64,
    pub id1: i64,
    pub u2: f64,
    pub v2: f64,
    pub id2: i64,
    pub class: u8,
    pub e_i: f64,
    pub e_re: f64,
    pub e_d: f64,
}

impl FeatureRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id1 == self.id2 {
            return Err(format!("id1 and id2 are both {}", self.id1));
        }
        if self.class > 1 {
            return Err(format!("class must be 0 or 1, got {}", self.class));
        }
        if !(self.z1 > 0.0) {
            return Err(format!("z1 must be positive, got {}", self.z1));
        }
        Ok(())
    }

    pub fn pixel1(&self) -> Pixel {
        Pixel::new(self.u1, self.v1)
    }

    pub fn pixel2(&self) -> Pixel {
        Pixel::new(self.u2, self.v2)
    }

    pub fn features(&self) -> FeatureVector {
        FeatureVector::new(self.e_i, self.e_d, self.e_re)
    }

    pub fn labeled(&self) -> LabeledFeature {
        LabeledFeature::new(self.features(), self.class)
    }
}

fn parse_float(field: &str, name: &str) -> std::result::Result<f64, String> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("field {name}: `{field}` is not a finite number")),
    }
}

/// Frame ids are integers; an integral float such as `12.0` is accepted.
fn parse_id(field: &str, name: &str) -> std::result::Result<i64, String> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    match field.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(format!("field {name}: `{field}` is not an integer frame id")),
    }
}

fn parse_class(field: &str) -> std::result::Result<u8, String> {
    match field {
        "static" => return Ok(0),
        "dynamic" => return Ok(1),
        _ => {}
    }
    match field.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(format!("class must be 0 or 1, got `{field}`")),
    }
}

pub fn parse_record_line(line: &str) -> std::result::Result<FeatureRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != FIELD_COUNT {
        return Err(format!(
            "expected {FIELD_COUNT} fields, found {}",
            fields.len()
        ));
    }
    let record = FeatureRecord {
        u1: parse_float(fields[0], "u1")?,
        v1: parse_float(fields[1], "v1")?,
        z1: parse_float(fields[2], "z1")?,
        id1: parse_id(fields[3], "id1")?,
        u2: parse_float(fields[4], "u2")?,
        v2: parse_float(fields[5], "v2")?,
        id2: parse_id(fields[6], "id2")?,
        class: parse_class(fields[7])?,
        e_i: parse_float(fields[8], "e_I")?,
        e_re: parse_float(fields[9], "e_Re")?,
        e_d: parse_float(fields[10], "e_D")?,
    };
    record.validate()?;
    Ok(record)
}

pub fn parse_records<R: BufRead>(input: R) -> Result<Vec<FeatureRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(parse_record_line(trimmed).map_err(|m| Error::parse(i + 1, m))?);
    }
    Ok(out)
}

pub fn format_record(r: &FeatureRecord) -> String {
    format!(
        "{:?},{:?},{:?},{},{:?},{:?},{},{},{:?},{:?},{:?}",
        r.u1, r.v1, r.z1, r.id1, r.u2, r.v2, r.id2, r.class, r.e_i, r.e_re, r.e_d
    )
}

pub fn write_records<W: Write>(records: &[FeatureRecord], mut out: W) -> Result<()> {
    writeln!(out, "# u1,v1,z1,id1,u2,v2,id2,class,e_I,e_Re,e_D")?;
    for r in records {
        writeln!(out, "{}", format_record(r))?;
    }
    Ok(())
}
