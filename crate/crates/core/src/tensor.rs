//! Dense tensors over binary indices and small tensor networks.
//!
//! A [`Tensor`] stores `2^r` values; bit `k` of the flat index is the value
//! of slot `k`. Slots carry integer labels. Two slots in different tensors
//! with the same label form an edge. After [`simplify`], a label may be
//! shared by more than two slots (a surviving CNOT copies its control, so
//! the control wire becomes a hyper-index).

use std::cmp::Reverse;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::Real;

pub type Label = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    labels: Vec<Label>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(labels: Vec<Label>, data: Vec<T>) -> Result<Self> {
        if labels.len() > 30 || data.len() != 1 << labels.len() {
            return Err(Error::LengthMismatch {
                expected: 1 << labels.len().min(30),
                got: data.len(),
            });
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::InvalidParameter(
                "tensor entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Tensor { labels, data })
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            labels: vec![],
            data: vec![v],
        }
    }

    /// Rank-1 tensor for a bit: "0" = (1,0), "1" = (0,1), "e" = (1,1).
    pub fn bit(label: Label, v: BitValue) -> Self {
        let (o, z) = (T::one(), T::zero());
        let data = match v {
            BitValue::Zero => vec![o, z],
            BitValue::One => vec![z, o],
            BitValue::Uniform => vec![o, o],
        };
        Tensor {
            labels: vec![label],
            data,
        }
    }

    /// Indicator of `out == a ^ b` over labels `[a, b, out]`.
    pub fn parity(a: Label, b: Label, out: Label) -> Self {
        let data = (0..8)
            .map(|k| {
                if (k & 1) ^ (k >> 1 & 1) == k >> 2 {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        Tensor {
            labels: vec![a, b, out],
            data,
        }
    }

    /// NOT gate over `[input, output]`.
    pub fn not(input: Label, output: Label) -> Self {
        let (o, z) = (T::one(), T::zero());
        Tensor {
            labels: vec![input, output],
            data: vec![z, o, o, z],
        }
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Entry at slot values `bits` (each 0 or 1).
    pub fn get(&self, bits: &[u8]) -> T {
        assert_eq!(bits.len(), self.rank());
        self.data[bits
            .iter()
            .enumerate()
            .map(|(k, &b)| (b as usize & 1) << k)
            .sum::<usize>()]
    }

    pub fn relabel(mut self, labels: Vec<Label>) -> Self {
        assert_eq!(labels.len(), self.labels.len());
        self.labels = labels;
        self
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &b| a + b)
    }
}

/// CNOT tensor `N[a,b,c,d] = [c == a][d == a ^ b]` with labels `[0, 1, 2, 3]`
/// for (control in, target in, control out, target out).
pub fn cnot_tensor<T: Real>() -> Tensor<T> {
    cnot_with_labels([0, 1, 2, 3])
}

pub fn cnot_with_labels<T: Real>(labels: [Label; 4]) -> Tensor<T> {
    let data = (0..16)
        .map(|k| {
            let (a, b, c, d) = (k & 1, k >> 1 & 1, k >> 2 & 1, k >> 3 & 1);
            if c == a && d == a ^ b {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    Tensor {
        labels: labels.to_vec(),
        data,
    }
}

/// Contract slot `pairs[k].0` of `a` with slot `pairs[k].1` of `b`.
///
/// The result keeps `a`'s free slots followed by `b`'s, so its rank is
/// `rank(a) + rank(b) - 2 |pairs|`.
pub fn contract_pair<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    pairs: &[(usize, usize)],
) -> Result<Tensor<T>> {
    let (ra, rb) = (a.rank(), b.rank());
    let mut used_a = vec![false; ra];
    let mut used_b = vec![false; rb];
    for &(x, y) in pairs {
        if x >= ra || y >= rb {
            return Err(Error::InvalidPairing(format!(
                "slot pair ({x}, {y}) out of range"
            )));
        }
        if std::mem::replace(&mut used_a[x], true) || std::mem::replace(&mut used_b[y], true) {
            return Err(Error::InvalidPairing(format!(
                "slot reused in pair ({x}, {y})"
            )));
        }
    }
    let free_a: Vec<usize> = (0..ra).filter(|&k| !used_a[k]).collect();
    let free_b: Vec<usize> = (0..rb).filter(|&k| !used_b[k]).collect();
    let labels: Vec<Label> = free_a
        .iter()
        .map(|&k| a.labels[k])
        .chain(free_b.iter().map(|&k| b.labels[k]))
        .collect();
    let r = labels.len();
    let mut data = vec![T::zero(); 1 << r];
    for (out, slot) in data.iter_mut().enumerate() {
        let mut ia = 0;
        let mut ib = 0;
        for (k, &s) in free_a.iter().enumerate() {
            ia |= (out >> k & 1) << s;
        }
        for (k, &s) in free_b.iter().enumerate() {
            ib |= (out >> (free_a.len() + k) & 1) << s;
        }
        let mut acc = T::zero();
        for shared in 0..1usize << pairs.len() {
            let (mut ja, mut jb) = (ia, ib);
            for (k, &(x, y)) in pairs.iter().enumerate() {
                let v = shared >> k & 1;
                ja |= v << x;
                jb |= v << y;
            }
            acc = acc + a.data[ja] * b.data[jb];
        }
        *slot = acc;
    }
    Ok(Tensor { labels, data })
}

/// Multiply tensors and sum out `drop` (if any). Labels shared between
/// tensors (or repeated within one) are identified.
pub fn product_sum<T: Real>(tensors: &[&Tensor<T>], drop: Option<Label>) -> Tensor<T> {
    let mut all: Vec<Label> = Vec::new();
    for t in tensors {
        for &l in &t.labels {
            if !all.contains(&l) {
                all.push(l);
            }
        }
    }
    let keep: Vec<Label> = all.iter().copied().filter(|&l| Some(l) != drop).collect();
    product_sum_onto(tensors, &all, &keep)
}

fn product_sum_onto<T: Real>(tensors: &[&Tensor<T>], all: &[Label], keep: &[Label]) -> Tensor<T> {
    let pos = |l: Label| all.iter().position(|&x| x == l).expect("label in union");
    let slot_pos: Vec<Vec<usize>> = tensors
        .iter()
        .map(|t| t.labels.iter().map(|&l| pos(l)).collect())
        .collect();
    let keep_pos: Vec<Option<usize>> = keep
        .iter()
        .map(|&l| all.iter().position(|&x| x == l))
        .collect();
    let mut data = vec![T::zero(); 1 << keep.len()];
    for assign in 0..1usize << all.len() {
        let mut p = T::one();
        for (t, sp) in tensors.iter().zip(&slot_pos) {
            let idx = sp
                .iter()
                .enumerate()
                .fold(0, |acc, (k, &u)| acc | (assign >> u & 1) << k);
            p = p * t.data[idx];
            if p == T::zero() {
                break;
            }
        }
        let out = keep_pos
            .iter()
            .enumerate()
            .fold(0, |acc, (k, u)| acc | u.map_or(0, |u| assign >> u & 1) << k);
        data[out] = data[out] + p;
    }
    Tensor {
        labels: keep.to_vec(),
        data,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BitValue {
    Zero,
    One,
    Uniform,
}

impl BitValue {
    pub fn from_bit(b: u8) -> Self {
        if b & 1 == 0 {
            BitValue::Zero
        } else {
            BitValue::One
        }
    }

    fn flipped(self) -> Self {
        match self {
            BitValue::Zero => BitValue::One,
            BitValue::One => BitValue::Zero,
            BitValue::Uniform => BitValue::Uniform,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Bit(BitValue),
    Prior,
    /// Rank 4: control in, target in, control out, target out.
    Cnot,
    /// Rank 3 parity factor: control, target in, target out.
    Parity,
    Not,
    Dense,
}

#[derive(Clone, Debug)]
pub struct Node<T> {
    pub tensor: Tensor<T>,
    pub kind: NodeKind,
    /// Circuit sublayer the node belongs to (inputs 0, priors at the bottom).
    pub layer: usize,
}

/// Tensors joined by shared labels, with a set of open labels left
/// uncontracted. Each label records the layer at which it was created.
#[derive(Clone, Debug)]
pub struct TensorNetwork<T> {
    nodes: Vec<Node<T>>,
    open: Vec<Label>,
    label_layer: Vec<usize>,
}

impl<T: Real> Default for TensorNetwork<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> TensorNetwork<T> {
    pub fn new() -> Self {
        TensorNetwork {
            nodes: vec![],
            open: vec![],
            label_layer: vec![],
        }
    }

    pub fn fresh_label(&mut self, layer: usize) -> Label {
        self.label_layer.push(layer);
        self.label_layer.len() - 1
    }

    pub fn add(&mut self, node: Node<T>) -> usize {
        debug_assert!(node
            .tensor
            .labels
            .iter()
            .all(|&l| l < self.label_layer.len()));
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn add_open(&mut self, label: Label) {
        self.open.push(label);
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn open(&self) -> &[Label] {
        &self.open
    }

    pub fn label_count(&self) -> usize {
        self.label_layer.len()
    }

    pub fn label_layer(&self, l: Label) -> usize {
        self.label_layer[l]
    }

    /// Number of gate-like nodes (CNOT, parity, NOT).
    pub fn gate_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Cnot | NodeKind::Parity | NodeKind::Not))
            .count()
    }
}

/// Apply the CNOT identities until nothing changes:
///
/// * control is a "0": the gate is the identity; the control output is "0".
/// * control is a "1": the gate is a NOT on the target.
/// * target is "e": the target output is "e", the control passes through.
/// * NOT on a "0", "1" or "e" gives "1", "0" or "e".
///
/// Surviving CNOTs are rewritten as rank-3 parity factors that reuse the
/// control label for the control output. The contraction value is unchanged.
pub fn simplify<T: Real>(net: &TensorNetwork<T>) -> TensorNetwork<T> {
    let mut s = Simplifier::new(net);
    s.run();
    s.finish()
}

struct Simplifier<T> {
    nodes: Vec<Option<Node<T>>>,
    attach: Vec<Vec<usize>>,
    open: Vec<Label>,
    label_layer: Vec<usize>,
    work: Vec<usize>,
}

impl<T: Real> Simplifier<T> {
    fn new(net: &TensorNetwork<T>) -> Self {
        let mut attach = vec![Vec::new(); net.label_layer.len()];
        for (id, node) in net.nodes.iter().enumerate() {
            for &l in &node.tensor.labels {
                attach[l].push(id);
            }
        }
        let work = (0..net.nodes.len()).rev().collect();
        Simplifier {
            nodes: net.nodes.iter().cloned().map(Some).collect(),
            attach,
            open: net.open.clone(),
            label_layer: net.label_layer.clone(),
            work,
        }
    }

    fn neighbor(&self, label: Label, me: usize) -> Option<usize> {
        self.attach[label].iter().copied().find(|&k| k != me)
    }

    fn bit_at(&self, label: Label, me: usize) -> Option<(usize, BitValue)> {
        let k = self.neighbor(label, me)?;
        match self.nodes[k].as_ref()?.kind {
            NodeKind::Bit(v) => Some((k, v)),
            _ => None,
        }
    }

    fn remove(&mut self, id: usize) -> Node<T> {
        let node = self.nodes[id].take().expect("live node");
        for &l in &node.tensor.labels {
            self.attach[l].retain(|&x| x != id);
        }
        node
    }

    fn insert(&mut self, node: Node<T>) -> usize {
        let id = self.nodes.len();
        for &l in &node.tensor.labels {
            self.attach[l].push(id);
        }
        self.nodes.push(Some(node));
        id
    }

    fn place_bit(&mut self, label: Label, v: BitValue, layer: usize) {
        self.insert(Node {
            tensor: Tensor::bit(label, v),
            kind: NodeKind::Bit(v),
            layer,
        });
        self.touch(label);
    }

    /// Queue every node on `label` for another look.
    fn touch(&mut self, label: Label) {
        self.work.extend(self.attach[label].iter().copied());
    }

    /// Replace `from` by `to` everywhere; `to` keeps its creation layer.
    fn rename(&mut self, from: Label, to: Label) {
        let ids = std::mem::take(&mut self.attach[from]);
        for &id in &ids {
            let node = self.nodes[id].as_mut().expect("attached node is live");
            for l in node.tensor.labels.iter_mut() {
                if *l == from {
                    *l = to;
                }
            }
        }
        self.attach[to].extend(ids);
        for l in self.open.iter_mut() {
            if *l == from {
                *l = to;
            }
        }
        self.touch(to);
    }

    fn run(&mut self) {
        while let Some(g) = self.work.pop() {
            let Some(node) = self.nodes[g].as_ref() else {
                continue;
            };
            let layer = node.layer;
            let labels = node.tensor.labels.clone();
            match node.kind {
                NodeKind::Cnot => {
                    let [ci, ti, co, to] = labels[..] else {
                        unreachable!()
                    };
                    if let Some((k, v)) =
                        self.bit_at(ci, g).filter(|&(_, v)| v != BitValue::Uniform)
                    {
                        self.remove(g);
                        self.remove(k);
                        self.place_bit(co, v, layer);
                        if v == BitValue::One {
                            let id = self.insert(Node {
                                tensor: Tensor::not(ti, to),
                                kind: NodeKind::Not,
                                layer,
                            });
                            self.work.push(id);
                        } else {
                            self.rename(to, ti);
                        }
                    } else if let Some((k, BitValue::Uniform)) = self.bit_at(ti, g) {
                        self.remove(g);
                        self.remove(k);
                        self.place_bit(to, BitValue::Uniform, layer);
                        self.rename(co, ci);
                    }
                }
                NodeKind::Not => {
                    let [i, o] = labels[..] else { unreachable!() };
                    if let Some((k, v)) = self.bit_at(i, g) {
                        self.remove(g);
                        self.remove(k);
                        self.place_bit(o, v.flipped(), layer);
                    }
                }
                _ => {}
            }
        }
    }

    fn finish(mut self) -> TensorNetwork<T> {
        for id in 0..self.nodes.len() {
            let Some(node) = self.nodes[id].as_ref() else {
                continue;
            };
            if node.kind != NodeKind::Cnot {
                continue;
            }
            let layer = node.layer;
            let [ci, ti, co, to] = node.tensor.labels[..] else {
                unreachable!()
            };
            self.remove(id);
            self.insert(Node {
                tensor: Tensor::parity(ci, ti, to),
                kind: NodeKind::Parity,
                layer,
            });
            self.rename(co, ci);
        }
        // A bit tensor is eliminated together with the gate that consumes it.
        for id in 0..self.nodes.len() {
            let Some(node) = self.nodes[id].as_ref() else {
                continue;
            };
            if let NodeKind::Bit(_) = node.kind {
                let l = node.tensor.labels[0];
                if let Some(k) = self.neighbor(l, id) {
                    let consumer = self.nodes[k].as_ref().expect("live");
                    if matches!(consumer.kind, NodeKind::Parity | NodeKind::Not) {
                        self.label_layer[l] = consumer.layer + 1;
                    }
                }
            }
        }
        TensorNetwork {
            nodes: self.nodes.into_iter().flatten().collect(),
            open: self.open,
            label_layer: self.label_layer,
        }
    }
}

/// Result of a full contraction: the true value is
/// `tensor * exp(log_scale)`.
#[derive(Clone, Debug)]
pub struct Contraction<T> {
    /// Tensor over the network's open labels, normalized to unit sum.
    pub tensor: Tensor<T>,
    pub log_scale: T,
    /// Largest rank of any intermediate message.
    pub max_rank: usize,
}

impl<T: Real> Contraction<T> {
    /// Unnormalized value of a fully contracted (rank 0) network.
    pub fn value(&self) -> T {
        self.tensor.data[0] * self.log_scale.exp()
    }

    pub fn log_value(&self) -> T {
        self.tensor.data[0].ln() + self.log_scale
    }
}

struct Eliminator<T> {
    tensors: Vec<Option<Tensor<T>>>,
    attach: Vec<Vec<usize>>,
    log_scale: T,
    max_rank: usize,
}

impl<T: Real> Eliminator<T> {
    fn new(net: &TensorNetwork<T>) -> Self {
        let mut attach = vec![Vec::new(); net.label_layer.len()];
        for (id, node) in net.nodes.iter().enumerate() {
            for &l in &node.tensor.labels {
                if !attach[l].contains(&id) {
                    attach[l].push(id);
                }
            }
        }
        Eliminator {
            tensors: net.nodes.iter().map(|n| Some(n.tensor.clone())).collect(),
            attach,
            log_scale: T::zero(),
            max_rank: 0,
        }
    }

    /// Labels adjacent to `v`, excluding `v`.
    fn result_labels(&self, v: Label) -> Vec<Label> {
        let mut out = Vec::new();
        for &id in &self.attach[v] {
            for &l in self.tensors[id].as_ref().expect("live").labels() {
                if l != v && !out.contains(&l) {
                    out.push(l);
                }
            }
        }
        out
    }

    fn eliminate(&mut self, v: Label, layer: usize, cap: usize) -> Result<Vec<Label>> {
        let keep = self.result_labels(v);
        if keep.len() > cap {
            return Err(Error::WidthExceeded {
                label: v,
                layer,
                rank: keep.len(),
                cap,
            });
        }
        let ids = std::mem::take(&mut self.attach[v]);
        let taken: Vec<Tensor<T>> = ids
            .iter()
            .map(|&id| self.tensors[id].take().expect("live"))
            .collect();
        for (t, &id) in taken.iter().zip(&ids) {
            for l in t.labels() {
                self.attach[*l].retain(|&x| x != id);
            }
        }
        let refs: Vec<&Tensor<T>> = taken.iter().collect();
        let mut all = keep.clone();
        all.push(v);
        let mut out = product_sum_onto(&refs, &all, &keep);
        self.normalize(&mut out);
        self.max_rank = self.max_rank.max(keep.len());
        let id = self.tensors.len();
        for &l in &keep {
            self.attach[l].push(id);
        }
        self.tensors.push(Some(out));
        Ok(keep)
    }

    fn normalize(&mut self, t: &mut Tensor<T>) {
        let s = t.sum();
        if s > T::zero() {
            for x in t.data.iter_mut() {
                *x = *x / s;
            }
            self.log_scale = self.log_scale + s.ln();
        }
    }

    fn finish(mut self, open: &[Label]) -> Contraction<T> {
        let rest: Vec<Tensor<T>> = self.tensors.iter_mut().filter_map(Option::take).collect();
        let refs: Vec<&Tensor<T>> = rest.iter().collect();
        let mut all: Vec<Label> = open.to_vec();
        for t in &rest {
            for &l in t.labels() {
                assert!(open.contains(&l), "label {l} left uncontracted");
            }
        }
        all.dedup();
        let mut out = product_sum_onto(&refs, &all, open);
        self.normalize(&mut out);
        Contraction {
            tensor: out,
            log_scale: self.log_scale,
            max_rank: self.max_rank,
        }
    }
}

/// Contract by variable elimination, deepest layer first. Within a layer
/// the label whose elimination yields the smallest message goes next (ties
/// by label). Every message is rescaled to unit sum.
pub fn schedule_and_contract<T: Real>(
    net: &TensorNetwork<T>,
    cap: usize,
) -> Result<Contraction<T>> {
    let mut el = Eliminator::new(net);
    let is_open = |l: Label| net.open.contains(&l);
    let mut key: Vec<Option<(Reverse<usize>, usize, Label)>> = vec![None; net.label_layer.len()];
    let mut queue = BTreeSet::new();
    for l in 0..net.label_layer.len() {
        if !is_open(l) && !el.attach[l].is_empty() {
            let k = (Reverse(net.label_layer[l]), el.result_labels(l).len(), l);
            key[l] = Some(k);
            queue.insert(k);
        }
    }
    while let Some(k) = queue.pop_first() {
        let v = k.2;
        key[v] = None;
        let touched = el.eliminate(v, net.label_layer[v], cap)?;
        for u in touched {
            if let Some(old) = key[u] {
                queue.remove(&old);
                let k = (old.0, el.result_labels(u).len(), u);
                key[u] = Some(k);
                queue.insert(k);
            }
        }
    }
    Ok(el.finish(&net.open))
}

/// Contract with an explicit elimination order covering every non-open
/// label that appears in the network.
pub fn contract_with_order<T: Real>(
    net: &TensorNetwork<T>,
    order: &[Label],
    cap: usize,
) -> Result<Contraction<T>> {
    let mut el = Eliminator::new(net);
    for &v in order {
        if net.open.contains(&v) || el.attach[v].is_empty() {
            continue;
        }
        el.eliminate(v, net.label_layer[v], cap)?;
    }
    Ok(el.finish(&net.open))
}
