//! Memoized SC contraction for the canonical circuits.
//!
//! At scale `l` (span `s = 2^l`) the wires split into `2^l` residue classes
//! mod `s`, each a ring of `N = n / s` sites (position `p` is wire
//! `r + p s`). Scale `l` only couples neighbours on a ring:
//! the polar sublayer pairs `2m -> 2m+1`, the shifted one `2m+1 -> 2m+2`
//! (wrapping `N-1 -> 0`). The even and odd sites of a ring at level `l+1`
//! are the rings `r` and `r + s` of the next scale.
//!
//! For bit `i` every wire value is one of: `E` (an independent uniform bit),
//! `D` (a known function of decided inputs) or `C` (correlated with `x_i`).
//! On every level all rings share one contiguous pattern `E^a C^w D^rest`
//! with `w <= 3`. A ring message is the (unnormalized) likelihood of the
//! ring's outputs as a function of its `C` values, marginalizing the `E`
//! values. A [`Plan`] turns the two child messages into the parent one.
//!
//! Patterns depend only on `i`, so the schedule is computed once per circuit.
//! The pattern at level `l` changes roughly every `2^l` bits and a change
//! costs `2^l` ring updates, which gives `O(n log n)` per decode.

use num_traits::{One, Zero};
use std::ops::{Add, Mul};

use crate::circuits::{Boundary, Family};
use crate::Real;

pub(crate) const MAX_WINDOW: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Pattern {
    pub a: usize,
    pub b: usize,
}

impl Pattern {
    pub fn width(self) -> usize {
        self.b - self.a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum St {
    E,
    C,
    D,
}

/// One ring update: parent window (level `l`) from child windows (`l+1`).
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub level: usize,
    pub w: usize,
    pub cw: usize,
    /// Ring positions (level `l`) of the decided sites feeding the children.
    pub dpos: Vec<usize>,
    pub a_dmask: Vec<u32>,
    pub b_dmask: Vec<u32>,
    /// For each assignment of the free bits: parent index, child A index,
    /// child B index (before the decided offsets).
    pub table: Vec<[u8; 3]>,
}

#[derive(Clone, Copy, Debug)]
struct Form {
    vars: u64,
    ds: u64,
}

pub(crate) fn make_plan(
    n: usize,
    level: usize,
    pat: Pattern,
    family: Family,
    boundary: Boundary,
) -> (Plan, Pattern) {
    let ring = n >> level;
    assert!(ring >= 2, "no scale below the outputs");
    let shifted = family == Family::BranchingMera;
    let periodic = boundary == Boundary::Periodic;
    let (lo, hi) = if ring <= 16 {
        (0, ring)
    } else {
        (pat.a.saturating_sub(4), (pat.b + 4).min(ring))
    };
    let mut sites: Vec<usize> = (lo..hi).collect();
    if shifted && periodic {
        for p in [0, ring - 1] {
            if !sites.contains(&p) {
                sites.push(p);
            }
        }
        sites.sort_unstable();
    }
    let slot = |p: usize| sites.binary_search(&p).ok();

    let w = pat.width();
    let mut st = Vec::with_capacity(sites.len());
    let mut form = Vec::with_capacity(sites.len());
    let (mut next_e, mut next_d) = (w, 0);
    for &p in &sites {
        if p < pat.a {
            st.push(St::E);
            form.push(Form {
                vars: 1 << next_e,
                ds: 0,
            });
            next_e += 1;
        } else if p < pat.b {
            st.push(St::C);
            form.push(Form {
                vars: 1 << (p - pat.a),
                ds: 0,
            });
        } else {
            st.push(St::D);
            form.push(Form {
                vars: 0,
                ds: 1 << next_d,
            });
            next_d += 1;
        }
    }
    assert!(next_e <= 64 && next_d <= 64);

    let mut gates = Vec::new();
    if shifted {
        for &p in sites.iter().filter(|p| *p % 2 == 1) {
            let t = if p + 1 == ring {
                if !periodic {
                    continue;
                }
                0
            } else {
                p + 1
            };
            if let (Some(c), Some(t)) = (slot(p), slot(t)) {
                gates.push((c, t));
            }
        }
    }
    for &p in sites.iter().filter(|p| *p % 2 == 0) {
        if let (Some(c), Some(t)) = (slot(p), slot(p + 1)) {
            gates.push((c, t));
        }
    }

    for &(c, t) in &gates {
        match (st[c], st[t]) {
            (St::D, St::E) => {}
            (St::D, _) => {
                form[t].vars ^= form[c].vars;
                form[t].ds ^= form[c].ds;
            }
            (_, St::E) => {}
            _ => {
                form[t].vars ^= form[c].vars;
                form[t].ds ^= form[c].ds;
                st[c] = St::C;
                st[t] = St::C;
            }
        }
    }

    // child patterns
    let child = |par: usize| -> Pattern {
        let implicit_e = (lo + 1).saturating_sub(par) / 2
            - usize::from(par == 0 && lo > 0 && sites.first() == Some(&0));
        let mut seq: Vec<St> = Vec::new();
        for (k, &p) in sites.iter().enumerate() {
            if p % 2 == par {
                seq.push(st[k]);
            }
        }
        assert!(
            seq.windows(2).all(|x| x[0] <= x[1]),
            "non-contiguous window at level {level}: {seq:?}"
        );
        let e = implicit_e + seq.iter().filter(|s| **s == St::E).count();
        let c = seq.iter().filter(|s| **s == St::C).count();
        Pattern { a: e, b: e + c }
    };
    let pa = child(0);
    let pb = child(1);
    assert_eq!(pa, pb, "children of a ring disagree at level {level}");
    let cw = pa.width();
    assert!(
        w <= MAX_WINDOW && cw <= MAX_WINDOW,
        "window wider than {MAX_WINDOW}"
    );

    let forms_of = |par: usize| -> Vec<Form> {
        (pa.a..pa.b)
            .map(|q| form[slot(2 * q + par).expect("child window inside simulated segment")])
            .collect()
    };
    let fa = forms_of(0);
    let fb = forms_of(1);

    // compact the involved E variables and D sources
    let wmask = (1u64 << w) - 1;
    let used_vars = fa.iter().chain(&fb).fold(0u64, |m, f| m | f.vars) & !wmask;
    let used_ds = fa.iter().chain(&fb).fold(0u64, |m, f| m | f.ds);
    let extra: Vec<u32> = (0..64).filter(|b| used_vars >> b & 1 == 1).collect();
    let free = w + extra.len();
    assert!(free <= 8, "too many free bits at level {level}");
    let remap_vars = |v: u64| -> u32 {
        let mut out = (v & wmask) as u32;
        for (k, &b) in extra.iter().enumerate() {
            out |= ((v >> b & 1) as u32) << (w + k);
        }
        out
    };
    let d_ids: Vec<u32> = (0..64).filter(|b| used_ds >> b & 1 == 1).collect();
    let remap_ds = |d: u64| -> u32 {
        d_ids
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &b)| acc | ((d >> b & 1) as u32) << k)
    };
    // ring position of each D source id
    let d_sites: Vec<usize> = sites.iter().copied().filter(|&p| p >= pat.b).collect();
    let dpos: Vec<usize> = d_ids.iter().map(|&b| d_sites[b as usize]).collect();

    let va: Vec<u32> = fa.iter().map(|f| remap_vars(f.vars)).collect();
    let vb: Vec<u32> = fb.iter().map(|f| remap_vars(f.vars)).collect();
    let lin = |masks: &[u32], f: u32| -> u8 {
        masks.iter().enumerate().fold(0, |acc, (k, &m)| {
            acc | (((m & f).count_ones() & 1) as u8) << k
        })
    };
    let table = (0..1u32 << free)
        .map(|f| [(f & wmask as u32) as u8, lin(&va, f), lin(&vb, f)])
        .collect();
    let plan = Plan {
        level,
        w,
        cw,
        dpos,
        a_dmask: fa.iter().map(|f| remap_ds(f.ds)).collect(),
        b_dmask: fb.iter().map(|f| remap_ds(f.ds)).collect(),
        table,
    };
    (plan, pa)
}

/// Per-bit recomputation schedule for one circuit shape.
#[derive(Clone, Debug)]
pub(crate) struct Schedule {
    pub n: usize,
    pub levels: usize,
    pub family: Family,
    pub boundary: Boundary,
    pub plans: Vec<Plan>,
    /// Indexed by decode step (`i = n - 1 - step`).
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug)]
pub(crate) struct Step {
    /// Plan ids for levels `0..plans.len()`, to be applied deepest first.
    pub plans: Vec<u32>,
    /// New leaf pattern, when the outputs must be reloaded.
    pub leaf: Option<Pattern>,
}

impl Schedule {
    pub fn new(levels: usize, family: Family, boundary: Boundary) -> Self {
        let n = 1usize << levels;
        let mut plans = Vec::new();
        let mut steps = Vec::with_capacity(n);
        let mut prev: Vec<Option<Pattern>> = vec![None; levels + 1];
        for i in (0..n).rev() {
            let mut pat = Pattern { a: i, b: i + 1 };
            let mut ids = Vec::new();
            let mut leaf = None;
            for l in 0..=levels {
                if l > 0 && prev[l] == Some(pat) {
                    break;
                }
                prev[l] = Some(pat);
                if l == levels {
                    leaf = Some(pat);
                    break;
                }
                let (plan, next) = make_plan(n, l, pat, family, boundary);
                ids.push(plans.len() as u32);
                plans.push(plan);
                pat = next;
            }
            steps.push(Step { plans: ids, leaf });
        }
        Schedule {
            n,
            levels,
            family,
            boundary,
            plans,
            steps,
        }
    }

    #[cfg(test)]
    pub fn max_width(&self) -> usize {
        self.plans.iter().map(|p| p.w.max(p.cw)).max().unwrap_or(1)
    }
}

const UNKNOWN: u8 = 2;

/// Decided-site values per (level, wire), filled on demand.
pub(crate) struct DValues {
    levels: Vec<Vec<u8>>,
    n: usize,
    shifted: bool,
    periodic: bool,
}

impl DValues {
    pub fn new(n: usize, levels: usize, family: Family, boundary: Boundary) -> Self {
        DValues {
            levels: vec![vec![UNKNOWN; n]; levels + 1],
            n,
            shifted: family == Family::BranchingMera,
            periodic: boundary == Boundary::Periodic,
        }
    }

    pub fn reset(&mut self) {
        for l in &mut self.levels {
            l.fill(UNKNOWN);
        }
    }

    pub fn set_input(&mut self, j: usize, v: u8) {
        self.levels[0][j] = v;
    }

    pub fn get(&mut self, level: usize, j: usize) -> u8 {
        let v = self.levels[level][j];
        if v != UNKNOWN {
            return v;
        }
        assert!(level > 0, "input {j} read before it was decided");
        let s = 1usize << (level - 1);
        let v = if j & s == 0 {
            self.mid(level, j)
        } else {
            self.mid(level, j - s) ^ self.mid(level, j)
        };
        self.levels[level][j] = v;
        v
    }

    /// Value after the shifted sublayer of the scale ending at `level`.
    fn mid(&mut self, level: usize, t: usize) -> u8 {
        let s = 1usize << (level - 1);
        let here = self.get(level - 1, t);
        if !self.shifted || t & s != 0 || (t < s && !self.periodic) {
            return here;
        }
        here ^ self.get(level - 1, (t + self.n - s) % self.n)
    }
}

/// Runs SC over a schedule with real-valued ring messages.
pub(crate) struct Engine<'s, T> {
    sched: &'s Schedule,
    msgs: Vec<Vec<T>>,
    widths: Vec<usize>,
    dv: DValues,
}

impl<'s, T: Real> Engine<'s, T> {
    pub fn new(sched: &'s Schedule) -> Self {
        Engine {
            sched,
            msgs: vec![Vec::new(); sched.levels + 1],
            widths: vec![0; sched.levels + 1],
            dv: DValues::new(sched.n, sched.levels, sched.family, sched.boundary),
        }
    }

    /// Decode right to left. `decide(i, [m0, m1])` sees the normalized
    /// marginal of bit `i` and returns the value to condition on.
    pub fn run(&mut self, priors: &[[T; 2]], mut decide: impl FnMut(usize, [T; 2]) -> u8) {
        let n = self.sched.n;
        self.dv.reset();
        for step in 0..n {
            let i = n - 1 - step;
            let st = &self.sched.steps[step];
            if let Some(leaf) = st.leaf {
                self.load_leaves(priors, leaf);
            }
            let sched = self.sched;
            for &id in st.plans.iter().rev() {
                self.apply(&sched.plans[id as usize]);
            }
            debug_assert_eq!(self.widths[0], 1);
            let m = &self.msgs[0];
            let b = decide(i, [m[0], m[1]]);
            self.dv.set_input(i, b);
        }
    }

    fn load_leaves(&mut self, priors: &[[T; 2]], leaf: Pattern) {
        let levels = self.sched.levels;
        let w = leaf.width();
        let mut out = Vec::with_capacity(self.sched.n << w);
        for (r, p) in priors.iter().enumerate() {
            match (leaf.a, leaf.b) {
                (0, 1) => {
                    let s = p[0] + p[1];
                    if s > T::zero() {
                        out.extend([p[0] / s, p[1] / s]);
                    } else {
                        out.extend([T::zero(), T::zero()]);
                    }
                }
                (1, 1) => out.push(if p[0] + p[1] > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }),
                _ => {
                    let d = self.dv.get(levels, r) as usize;
                    out.push(if p[d] > T::zero() {
                        T::one()
                    } else {
                        T::zero()
                    });
                }
            }
        }
        self.msgs[levels] = out;
        self.widths[levels] = w;
    }

    fn apply(&mut self, plan: &Plan) {
        let l = plan.level;
        debug_assert_eq!(self.widths[l + 1], plan.cw);
        let rings = 1usize << l;
        let stride = 1usize << plan.w;
        let cstride = 1usize << plan.cw;
        let (upper, lower) = self.msgs.split_at_mut(l + 1);
        let child = &lower[0];
        let out = &mut upper[l];
        out.clear();
        out.resize(rings * stride, T::zero());
        for r in 0..rings {
            let mut dbits = 0u32;
            for (k, &p) in plan.dpos.iter().enumerate() {
                dbits |= (self.dv.get(l, r + (p << l)) as u32) << k;
            }
            let off = |masks: &[u32]| -> usize {
                masks.iter().enumerate().fold(0, |acc, (k, &m)| {
                    acc | (((m & dbits).count_ones() & 1) as usize) << k
                })
            };
            let (ao, bo) = (off(&plan.a_dmask), off(&plan.b_dmask));
            let ca = &child[r * cstride..(r + 1) * cstride];
            let cb = &child[(r + rings) * cstride..(r + rings + 1) * cstride];
            let o = &mut out[r * stride..(r + 1) * stride];
            for &[z, a, b] in &plan.table {
                o[z as usize] = o[z as usize] + ca[a as usize ^ ao] * cb[b as usize ^ bo];
            }
            let s = o.iter().fold(T::zero(), |x, &y| x + y);
            if s > T::zero() {
                for x in o.iter_mut() {
                    *x = *x / s;
                }
            }
        }
        self.widths[l] = plan.w;
    }
}

/// Distribution over linear subspaces of a window's assignments, each
/// subspace stored as a bitmask over the `2^w` assignments.
type SubspaceDist<P> = Vec<(u16, P)>;

fn push_mass<P: Clone + Add<Output = P>>(dist: &mut SubspaceDist<P>, mask: u16, p: P) {
    match dist.iter_mut().find(|(m, _)| *m == mask) {
        Some((_, q)) => *q = q.clone() + p,
        None => dist.push((mask, p)),
    }
}

/// Exact erasure rates of every logical channel, assuming the all-zero
/// codeword and genie-supplied suffixes. `keep` is `1 - eps`.
pub(crate) fn erasure_rates<P>(sched: &Schedule, eps: P, keep: P) -> Vec<P>
where
    P: Clone + Zero + One + Add<Output = P> + Mul<Output = P>,
{
    let levels = sched.levels;
    let mut dists: Vec<SubspaceDist<P>> = vec![Vec::new(); levels + 1];
    let mut rates = vec![P::zero(); sched.n];
    for (step, st) in sched.steps.iter().enumerate() {
        if let Some(leaf) = st.leaf {
            dists[levels] = if leaf.width() == 1 {
                vec![(0b01, keep.clone()), (0b11, eps.clone())]
            } else {
                vec![(0b1, P::one())]
            };
        }
        for &id in st.plans.iter().rev() {
            let plan = &sched.plans[id as usize];
            let l = plan.level;
            let mut out = Vec::new();
            for (ma, pa) in &dists[l + 1] {
                for (mb, pb) in &dists[l + 1] {
                    let mut mask = 0u16;
                    for &[z, a, b] in &plan.table {
                        if ma >> a & 1 == 1 && mb >> b & 1 == 1 {
                            mask |= 1 << z;
                        }
                    }
                    push_mass(&mut out, mask, pa.clone() * pb.clone());
                }
            }
            dists[l] = out;
        }
        let i = sched.n - 1 - step;
        rates[i] = dists[0]
            .iter()
            .filter(|(m, _)| *m == 0b11)
            .fold(P::zero(), |acc, (_, p)| acc + p.clone());
    }
    rates
}
