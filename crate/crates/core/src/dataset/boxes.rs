//! Detection file: one box per line,
//! `frame_id u_min v_min u_max v_max class track_id` with `class` either
//! `dynamic` (potentially dynamic) or `static`.

use std::io::{BufRead, Write};

use crate::depth_filter::{BoundingBox, ObjectClass};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBox {
    pub frame_id: i64,
    pub bbox: BoundingBox,
}

pub fn write_boxes<W: Write>(boxes: &[FrameBox], mut out: W) -> Result<()> {
    writeln!(out, "# frame_id u_min v_min u_max v_max class track_id")?;
    for b in boxes {
        let x = &b.bbox;
        writeln!(
            out,
            "{} {:?} {:?} {:?} {:?} {} {}",
            b.frame_id,
            x.u_min,
            x.v_min,
            x.u_max,
            x.v_max,
            x.object_class.as_str(),
            x.track_id
        )?;
    }
    Ok(())
}

pub fn parse_boxes<R: BufRead>(input: R) -> Result<Vec<FrameBox>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_box_line(line).map_err(|m| Error::parse(i + 1, m))?);
    }
    Ok(out)
}

fn parse_box_line(line: &str) -> std::result::Result<FrameBox, String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 7 {
        return Err(format!("expected 7 fields, found {}", f.len()));
    }
    let int = |s: &str| s.parse::<i64>().map_err(|_| format!("`{s}` is not an integer"));
    let num = |s: &str| match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a finite number")),
    };
    let class = ObjectClass::parse(f[5]).ok_or_else(|| format!("unknown object class `{}`", f[5]))?;
    let bbox = BoundingBox::new(num(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?, class, int(f[6])?)
        .map_err(|e| e.to_string())?;
    Ok(FrameBox { frame_id: int(f[0])?, bbox })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let boxes = vec![
            FrameBox {
                frame_id: 0,
                bbox: BoundingBox::new(1.5, 2.0, 30.25, 40.0, ObjectClass::PotentiallyDynamic, 3).unwrap(),
            },
            FrameBox {
                frame_id: 7,
                bbox: BoundingBox::new(0.1, 0.2, 0.3, 0.4, ObjectClass::Static, -1).unwrap(),
            },
        ];
        let mut buf = Vec::new();
        write_boxes(&boxes, &mut buf).unwrap();
        assert_eq!(parse_boxes(&buf[..]).unwrap(), boxes);
    }

    #[test]
    fn bad_lines() {
        for bad in ["0 1 2 3", "0 1 2 3 4 car 1", "0 5 2 3 4 dynamic 1", "x 1 2 3 4 static 1"] {
            let text = format!("# header\n{bad}\n");
            assert!(
                matches!(parse_boxes(text.as_bytes()), Err(Error::Parse { line: 2, .. })),
                "{bad}"
            );
        }
    }
}
