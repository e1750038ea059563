//! Encoding circuits for polar and branching-MERA codes.
//!
//! Wires are numbered `0..n` with `n = 2^L`, bit 0 leftmost. Scale `l` uses
//! CNOTs of span `s = 2^l`; scales are applied from the input side with the
//! span growing towards the output, so the decoder (which starts at the
//! outputs) meets the widest gates first.
//!
//! * polar sublayer `P_l`: gates `j -> j + s` for every `j` with bit `l` clear.
//! * shifted sublayer `S_l`: gates `j -> (j + s) mod n` for every `j` with bit
//!   `l` set. Gates with `j + s >= n` wrap around and are dropped under
//!   [`Boundary::Open`].
//!
//! A polar scale is `[P_l]`; a branching-MERA scale is `[S_l, P_l]` in
//! encoding order.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BitVec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Polar,
    #[serde(rename = "bmera")]
    BranchingMera,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::Polar => "polar",
            Family::BranchingMera => "bmera",
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "polar" => Ok(Family::Polar),
            "bmera" | "mera" | "branching-mera" => Ok(Family::BranchingMera),
            _ => Err(Error::InvalidParameter(format!("unknown family {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "open" => Ok(Boundary::Open),
            _ => Err(Error::InvalidParameter(format!("unknown boundary {s:?}"))),
        }
    }
}

/// Order of the two sublayers inside a branching-MERA scale (encoding order).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ScaleOrder {
    #[default]
    ShiftedFirst,
    PolarFirst,
}

/// CNOT: `(control, target) -> (control, control ^ target)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub control: usize,
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredCircuit {
    n: usize,
    levels: usize,
    family: Family,
    boundary: Boundary,
    layers: Vec<Vec<Gate>>,
    canonical: bool,
}

/// Build the canonical circuit with `2^levels` wires.
pub fn build_circuit(family: Family, levels: usize, boundary: Boundary) -> Result<LayeredCircuit> {
    build_circuit_ordered(family, levels, boundary, ScaleOrder::ShiftedFirst)
}

/// Like [`build_circuit`] with an explicit sublayer order. Only the default
/// order is supported by the memoized decoder; other orders decode through
/// the reference contraction path.
pub fn build_circuit_ordered(
    family: Family,
    levels: usize,
    boundary: Boundary,
    order: ScaleOrder,
) -> Result<LayeredCircuit> {
    if levels == 0 {
        return Err(Error::ZeroLayers);
    }
    if levels > 24 {
        return Err(Error::TooLarge {
            what: "layer count",
            value: levels,
            limit: 24,
        });
    }
    let n = 1usize << levels;
    let mut layers = Vec::new();
    for l in 0..levels {
        let s = 1 << l;
        let polar: Vec<Gate> = (0..n)
            .filter(|j| j & s == 0)
            .map(|j| Gate {
                control: j,
                target: j + s,
            })
            .collect();
        match family {
            Family::Polar => layers.push(polar),
            Family::BranchingMera => {
                let shifted: Vec<Gate> = (0..n)
                    .filter(|j| j & s != 0)
                    .filter(|j| boundary == Boundary::Periodic || j + s < n)
                    .map(|j| Gate {
                        control: j,
                        target: (j + s) % n,
                    })
                    .collect();
                let pair = match order {
                    ScaleOrder::ShiftedFirst => [shifted, polar],
                    ScaleOrder::PolarFirst => [polar, shifted],
                };
                layers.extend(pair.into_iter().filter(|l| !l.is_empty()));
            }
        }
    }
    Ok(LayeredCircuit {
        n,
        levels,
        family,
        boundary,
        layers,
        canonical: order == ScaleOrder::ShiftedFirst,
    })
}

impl LayeredCircuit {
    /// Arbitrary layered CNOT circuit. Decoding such a circuit always uses
    /// the reference contraction path.
    pub fn from_layers(
        n: usize,
        family: Family,
        boundary: Boundary,
        layers: Vec<Vec<Gate>>,
    ) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidCircuit(format!(
                "n = {n} is not a power of two >= 2"
            )));
        }
        for (k, layer) in layers.iter().enumerate() {
            let mut used = vec![false; n];
            for g in layer {
                if g.control >= n || g.target >= n || g.control == g.target {
                    return Err(Error::InvalidCircuit(format!(
                        "bad gate {g:?} in layer {k}"
                    )));
                }
                for w in [g.control, g.target] {
                    if std::mem::replace(&mut used[w], true) {
                        return Err(Error::InvalidCircuit(format!(
                            "wire {w} reused in layer {k}"
                        )));
                    }
                }
            }
        }
        Ok(LayeredCircuit {
            n,
            levels: n.trailing_zeros() as usize,
            family,
            boundary,
            layers,
            canonical: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `L = log2 n`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub(crate) fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn encode(&self, x: &[u8]) -> Result<BitVec> {
        self.check_len(x.len())?;
        let mut y = x.to_vec();
        for g in self.layers.iter().flatten() {
            y[g.target] ^= y[g.control];
        }
        Ok(y)
    }

    /// Inverse of [`encode`](Self::encode): layers in reverse order.
    pub fn decode_exact(&self, y: &[u8]) -> Result<BitVec> {
        self.check_len(y.len())?;
        let mut x = y.to_vec();
        for layer in self.layers.iter().rev() {
            for g in layer {
                x[g.target] ^= x[g.control];
            }
        }
        Ok(x)
    }

    /// `G` with `encode(x) = G x`; column `j` is the encoding of `e_j`.
    pub fn generator_matrix(&self) -> BinMatrix {
        let mut m = BinMatrix::identity(self.n);
        for g in self.layers.iter().flatten() {
            m.xor_row(g.target, g.control);
        }
        m
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }
}

pub fn encode(circuit: &LayeredCircuit, x: &[u8]) -> Result<BitVec> {
    circuit.encode(x)
}

pub fn generator_matrix(circuit: &LayeredCircuit) -> BinMatrix {
    circuit.generator_matrix()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// `#` for 1 and `.` for 0.
    Ascii,
    /// Plain PBM (`P1`), 1 = black.
    Pbm,
    Csv,
}

impl FromStr for MatrixFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascii" => Ok(MatrixFormat::Ascii),
            "pbm" => Ok(MatrixFormat::Pbm),
            "csv" => Ok(MatrixFormat::Csv),
            _ => Err(Error::InvalidParameter(format!(
                "unknown matrix format {s:?}"
            ))),
        }
    }
}

pub fn render_matrix(m: &BinMatrix, format: MatrixFormat) -> String {
    let mut out = String::new();
    if format == MatrixFormat::Pbm {
        let _ = writeln!(out, "P1\n{} {}", m.cols(), m.rows());
    }
    for r in 0..m.rows() {
        let cells = (0..m.cols()).map(|c| m.get(r, c));
        let line: String = match format {
            MatrixFormat::Ascii => cells.map(|b| if b { '#' } else { '.' }).collect(),
            MatrixFormat::Pbm => cells
                .map(|b| if b { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(" "),
            MatrixFormat::Csv => cells
                .map(|b| if b { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(","),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parse the output of [`render_matrix`] back into a matrix.
pub fn parse_matrix(text: &str, format: MatrixFormat) -> Result<BinMatrix> {
    let bad = |why: &str| Error::InvalidParameter(format!("malformed matrix: {why}"));
    let mut lines = text.lines();
    if format == MatrixFormat::Pbm && lines.next() != Some("P1") {
        return Err(bad("missing P1 header"));
    }
    if format == MatrixFormat::Pbm {
        lines.next().ok_or_else(|| bad("missing size line"))?;
    }
    let rows: Vec<Vec<bool>> = lines
        .map(|l| match format {
            MatrixFormat::Ascii => l.chars().map(|c| c == '#').collect(),
            MatrixFormat::Pbm => l.split(' ').map(|c| c == "1").collect(),
            MatrixFormat::Csv => l.split(',').map(|c| c == "1").collect(),
        })
        .collect();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(bad("ragged rows"));
    }
    let mut m = BinMatrix::zeros(rows.len(), cols);
    for (r, row) in rows.iter().enumerate() {
        for (c, &b) in row.iter().enumerate() {
            m.set(r, c, b);
        }
    }
    Ok(m)
}
