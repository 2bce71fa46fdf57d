//! Plain-text model format:
//!
//! ```text
//! mlp-v1
//! norm_mean <m0> <m1> <m2>
//! norm_std <s0> <s1> <s2>
//! W1 <rows> <cols>
//! <row-major values, one matrix row per line>
//! b1 <n>
//! <values>
//! ...
//! ```
//!
//! Floats use the shortest representation that parses back to the same bits.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use super::{DenseLayer, MlpModel, Normalization};
use crate::{Error, Result};

const HEADER: &str = "mlp-v1";

pub fn write_model<W: Write>(model: &MlpModel, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "norm_mean {}", join(&model.norm.mean))?;
    writeln!(out, "norm_std {}", join(&model.norm.std))?;
    for (i, layer) in model.layers.iter().enumerate() {
        let n = i + 1;
        writeln!(out, "W{n} {} {}", layer.outputs(), layer.inputs())?;
        for r in 0..layer.outputs() {
            let row: Vec<f64> = layer.weights.row(r).iter().copied().collect();
            writeln!(out, "{}", join(&row))?;
        }
        writeln!(out, "b{n} {}", layer.bias.len())?;
        writeln!(out, "{}", join(layer.bias.as_slice()))?;
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Token stream that remembers the line of each token for error messages.
struct Tokens {
    tokens: Vec<(usize, String)>,
    pos: usize,
}

impl Tokens {
    fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(|t| (i + 1, t.to_string())));
        }
        Ok(Self { tokens, pos: 0 })
    }

    fn last_line(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &str)> {
        match self.tokens.get(self.pos) {
            Some((line, tok)) => {
                self.pos += 1;
                Ok((*line, tok.as_str()))
            }
            None => Err(Error::parse(
                self.last_line(),
                format!("unexpected end of model file, expected {what}"),
            )),
        }
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let (line, tok) = self.next(keyword)?;
        if tok != keyword {
            return Err(Error::parse(line, format!("expected `{keyword}`, found `{tok}`")));
        }
        Ok(())
    }

    fn float(&mut self) -> Result<f64> {
        let (line, tok) = self.next("a number")?;
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::parse(line, format!("invalid number `{tok}`"))),
        }
    }

    fn count(&mut self) -> Result<usize> {
        let (line, tok) = self.next("a dimension")?;
        tok.parse::<usize>()
            .map_err(|_| Error::parse(line, format!("invalid dimension `{tok}`")))
    }

    fn floats<const N: usize>(&mut self) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.float()?;
        }
        Ok(out)
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<MlpModel> {
    let mut t = Tokens::read(input)?;
    t.expect(HEADER)?;
    t.expect("norm_mean")?;
    let mean = t.floats::<3>()?;
    t.expect("norm_std")?;
    let std = t.floats::<3>()?;
    if let Some(s) = std.iter().find(|s| **s <= 0.0) {
        return Err(Error::parse(3, format!("norm_std must be positive, found {s}")));
    }

    let mut layers: Vec<DenseLayer> = Vec::new();
    while t.pos < t.tokens.len() {
        let n = layers.len() + 1;
        t.expect(&format!("W{n}"))?;
        let (line, _) = t.tokens[t.pos - 1].clone();
        let rows = t.count()?;
        let cols = t.count()?;
        let expected_in = layers.last().map_or(3, |l| l.outputs());
        if cols != expected_in || rows == 0 {
            return Err(Error::parse(
                line,
                format!("layer {n} has shape {rows}x{cols}, expected {expected_in} inputs"),
            ));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            values.push(t.float()?);
        }
        let weights = DMatrix::from_row_slice(rows, cols, &values);
        t.expect(&format!("b{n}"))?;
        let (line, _) = t.tokens[t.pos - 1].clone();
        let len = t.count()?;
        if len != rows {
            return Err(Error::parse(line, format!("bias {n} has {len} entries, expected {rows}")));
        }
        let mut bias = Vec::with_capacity(len);
        for _ in 0..len {
            bias.push(t.float()?);
        }
        layers.push(DenseLayer {
            weights,
            bias: DVector::from_vec(bias),
        });
    }
    match layers.last() {
        Some(l) if l.outputs() == 2 => {}
        _ => {
            return Err(Error::parse(
                t.last_line(),
                "model must end with a 2-output layer",
            ))
        }
    }
    Ok(MlpModel {
        layers,
        norm: Normalization { mean, std },
    })
}
