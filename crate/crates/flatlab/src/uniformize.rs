//! Extraction of `{2^-jT}`-uniform subsets from dyadic cell sets.
//!
//! A cell set `P` at scale `2^-mT` inside `[0,1)^d` is *uniform* when for
//! every block level `j` the number of level-`jT` cells of `P` inside each
//! level-`(j-1)T` ancestor is a constant `N_j`, a power of two. The
//! extraction loop is greedy: compute each cell's vector of ancestor
//! child-counts rounded down to powers of two, take the most popular
//! vector class, and trim the class tree to exact branching by keeping at
//! each node the children with the largest class subtrees (Morton order on
//! ties). When a class tree cannot realise its rounded targets (the
//! rounding was taken against the full set, so class subtrees may be
//! thinner), the target at the topmost deficient level is halved until the
//! trim is feasible; halving terminates because the all-ones vector is
//! always realisable.
//!
//! The size guarantees (`|P_i| >= delta^{2 eps} |P|`, remainder at most
//! `delta^eps |P|`) hold asymptotically for block sizes above an
//! unquantified threshold `T_0(eps)`; they are therefore *checked and
//! reported*, never assumed.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CellSet, Scale};

/// An exactly uniform cell set with its branching sequence.
#[derive(Clone, Debug, Serialize)]
pub struct UniformSetRecord {
    pub t_block: u32,
    pub m_blocks: u32,
    /// `N_1 .. N_m`, all powers of two.
    pub branching: Vec<u64>,
    pub cells: CellSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum UniformVerdict {
    Uniform(Vec<u64>),
    /// First violating (level, ancestor) pair in canonical order.
    Violation {
        level: u32,
        ancestor: [i64; 2],
        expected: u64,
        found: u64,
    },
    /// Branching constant at this level is not a power of two.
    NonDyadicBranching { level: u32, value: u64 },
}

fn ancestor(idx: [i64; 2], shift: u32, dim: u8) -> [i64; 2] {
    [idx[0] >> shift, if dim == 2 { idx[1] >> shift } else { 0 }]
}

fn check_unit_box(cells: &CellSet) -> Result<()> {
    let n = 1i64 << cells.scale().m();
    for c in cells.indices() {
        if c[0] < 0 || c[0] >= n || c[1] < 0 || (cells.scale().dim() == 2 && c[1] >= n) {
            return Err(Error::InvalidParameter(format!(
                "cell {c:?} outside [0,1)^d at scale 2^-{}",
                cells.scale().m()
            )));
        }
    }
    Ok(())
}

/// Exact verification: returns the branching sequence or the first
/// violation witness.
pub fn verify_uniform(cells: &CellSet, t_block: u32, m_blocks: u32) -> Result<UniformVerdict> {
    if t_block < 1 || m_blocks < 1 {
        return Err(Error::InvalidParameter("need T >= 1 and m >= 1".into()));
    }
    if cells.scale().m() != t_block * m_blocks {
        return Err(Error::ScaleMismatch(format!(
            "cell scale 2^-{} does not equal 2^-(mT) = 2^-{}",
            cells.scale().m(),
            t_block * m_blocks
        )));
    }
    if cells.is_empty() {
        return Err(Error::Empty("verify_uniform on empty cell set".into()));
    }
    check_unit_box(cells)?;
    let dim = cells.scale().dim();
    let mt = t_block * m_blocks;
    let mut branching = Vec::with_capacity(m_blocks as usize);
    for j in 1..=m_blocks {
        let parent_shift = mt - (j - 1) * t_block;
        let child_shift = mt - j * t_block;
        // parent -> set of children, in canonical order.
        let mut children: BTreeMap<[i64; 2], Vec<[i64; 2]>> = BTreeMap::new();
        for &c in cells.indices() {
            let p = ancestor(c, parent_shift, dim);
            let ch = ancestor(c, child_shift, dim);
            children.entry(p).or_default().push(ch);
        }
        let mut expected = None;
        for (parent, mut chs) in children {
            chs.sort_unstable();
            chs.dedup();
            let found = chs.len() as u64;
            match expected {
                None => expected = Some(found),
                Some(e) if e != found => {
                    return Ok(UniformVerdict::Violation {
                        level: j,
                        ancestor: parent,
                        expected: e,
                        found,
                    })
                }
                _ => {}
            }
        }
        let n_j = expected.expect("nonempty");
        if !n_j.is_power_of_two() {
            return Ok(UniformVerdict::NonDyadicBranching { level: j, value: n_j });
        }
        branching.push(n_j);
    }
    Ok(UniformVerdict::Uniform(branching))
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ExtractionReport {
    pub records: Vec<UniformSetRecord>,
    pub remainder: CellSet,
    pub rounds: u32,
    /// `ceil(delta^eps |P|)`: the loop stops once the remainder is this small.
    pub remainder_target: usize,
    pub remainder_ok: bool,
    /// `ceil(delta^{2 eps} |P|)`: the per-record size guarantee.
    pub record_size_floor: usize,
    pub record_size_ok: Vec<bool>,
    /// Round cap reached with an oversized remainder.
    pub partial: bool,
}

pub const DEFAULT_ROUND_CAP: u32 = 64;

fn morton(idx: [i64; 2], dim: u8) -> u128 {
    if dim == 1 {
        return idx[0] as u128;
    }
    let mut out: u128 = 0;
    for b in 0..62 {
        out |= (((idx[0] >> b) & 1) as u128) << (2 * b + 1);
        out |= (((idx[1] >> b) & 1) as u128) << (2 * b);
    }
    out
}

fn round_down_pow2(v: u64) -> u64 {
    debug_assert!(v >= 1);
    1u64 << (63 - v.leading_zeros())
}

/// Greedy popular-class extraction (see module docs).
pub fn extract_uniform(
    p: &CellSet,
    t_block: u32,
    m_blocks: u32,
    epsilon: f64,
    round_cap: u32,
) -> Result<ExtractionReport> {
    if t_block < 1 || m_blocks < 1 {
        return Err(Error::InvalidParameter("need T >= 1 and m >= 1".into()));
    }
    if epsilon < 0.0 {
        return Err(Error::InvalidParameter("epsilon must be nonnegative".into()));
    }
    if p.scale().m() != t_block * m_blocks {
        return Err(Error::ScaleMismatch(format!(
            "cell scale 2^-{} does not equal 2^-(mT) = 2^-{}",
            p.scale().m(),
            t_block * m_blocks
        )));
    }
    if p.is_empty() {
        return Err(Error::Empty("extract_uniform on empty input".into()));
    }
    check_unit_box(p)?;
    let dim = p.scale().dim();
    let mt = t_block * m_blocks;
    let total = p.len();
    let delta_eps = (-(mt as f64) * epsilon).exp2();
    let remainder_target = (delta_eps * total as f64).ceil() as usize;
    let record_size_floor = ((delta_eps * delta_eps * total as f64).ceil() as usize).max(1);

    let mut work: Vec<[i64; 2]> = p.indices().to_vec();
    let mut records = Vec::new();
    let mut rounds = 0;
    while work.len() > remainder_target && rounds < round_cap {
        rounds += 1;
        let record = extract_one_class(&work, t_block, m_blocks, dim)?;
        let verdict = verify_uniform(&record.cells, t_block, m_blocks)?;
        match verdict {
            UniformVerdict::Uniform(seq) => debug_assert_eq!(seq, record.branching),
            other => {
                return Err(Error::PropertyViolated(format!(
                    "extracted record failed verification: {other:?}"
                )))
            }
        }
        let taken = record.cells.clone();
        work.retain(|c| !taken.contains(c));
        records.push(record);
    }
    let remainder = CellSet::new(p.scale(), work)?;
    let record_size_ok: Vec<bool> = records
        .iter()
        .map(|r| r.cells.len() >= record_size_floor)
        .collect();
    let remainder_ok = remainder.len() <= remainder_target;
    Ok(ExtractionReport {
        partial: !remainder_ok,
        records,
        remainder,
        rounds,
        remainder_target,
        remainder_ok,
        record_size_floor,
        record_size_ok,
    })
}

/// One round: pick the most popular rounded branching-vector class in
/// `work` and trim it to an exactly uniform record.
fn extract_one_class(
    work: &[[i64; 2]],
    t_block: u32,
    m_blocks: u32,
    dim: u8,
) -> Result<UniformSetRecord> {
    let mt = t_block * m_blocks;
    let m = m_blocks as usize;

    // Child-counts per ancestor, per level.
    let mut counts: Vec<HashMap<[i64; 2], u64>> = Vec::with_capacity(m);
    for j in 1..=m_blocks {
        let parent_shift = mt - (j - 1) * t_block;
        let child_shift = mt - j * t_block;
        let mut pairs: Vec<([i64; 2], [i64; 2])> = work
            .iter()
            .map(|&c| (ancestor(c, parent_shift, dim), ancestor(c, child_shift, dim)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut map: HashMap<[i64; 2], u64> = HashMap::new();
        for (parent, _) in pairs {
            *map.entry(parent).or_insert(0) += 1;
        }
        counts.push(map);
    }

    // Rounded vector per cell; popularity contest.
    let mut popularity: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut cell_vectors: Vec<Vec<u64>> = Vec::with_capacity(work.len());
    for &c in work {
        let mut v = Vec::with_capacity(m);
        for j in 1..=m_blocks {
            let parent_shift = mt - (j - 1) * t_block;
            let b = counts[j as usize - 1][&ancestor(c, parent_shift, dim)];
            v.push(round_down_pow2(b));
        }
        *popularity.entry(v.clone()).or_insert(0) += 1;
        cell_vectors.push(v);
    }
    let mut classes: Vec<(Vec<u64>, usize)> = popularity.into_iter().collect();
    classes.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let class_vector = classes[0].0.clone();
    let class_cells: Vec<[i64; 2]> = work
        .iter()
        .zip(cell_vectors.iter())
        .filter(|(_, v)| **v == class_vector)
        .map(|(c, _)| *c)
        .collect();

    // Class tree: children lists and subtree leaf counts per level.
    // children[l]: node at level l -> its children at level l+1.
    let mut children: Vec<BTreeMap<[i64; 2], Vec<[i64; 2]>>> = vec![BTreeMap::new(); m];
    let mut subtree: Vec<HashMap<[i64; 2], u64>> = vec![HashMap::new(); m + 1];
    for &c in &class_cells {
        for l in 0..=m_blocks {
            let shift = (m_blocks - l) * t_block;
            let node = ancestor(c, shift, dim);
            *subtree[l as usize].entry(node).or_insert(0) += 1;
            if l < m_blocks {
                let child = ancestor(c, (m_blocks - l - 1) * t_block, dim);
                let list = children[l as usize].entry(node).or_default();
                if !list.contains(&child) {
                    list.push(child);
                }
            }
        }
    }
    let root = ancestor(class_cells[0], mt, dim);

    // Halve targets (topmost level first) until the trim is feasible.
    let mut targets = class_vector.clone();
    loop {
        if feasible(&children, &targets, root, m) {
            break;
        }
        let j = targets
            .iter()
            .position(|&n| n >= 2)
            .expect("all-ones targets are always feasible");
        targets[j] /= 2;
    }

    // Top-down selection of exactly N_{l+1} full children per node,
    // largest class subtree first, Morton order on ties.
    let full = full_marks(&children, &targets, m);
    let mut selected = vec![root];
    for l in 0..m {
        let need = targets[l] as usize;
        let mut next = Vec::with_capacity(selected.len() * need);
        for node in &selected {
            let mut cand: Vec<[i64; 2]> = children[l][node]
                .iter()
                .filter(|c| full[l + 1].contains_key(*c))
                .copied()
                .collect();
            cand.sort_by(|a, b| {
                subtree[l + 1][b]
                    .cmp(&subtree[l + 1][a])
                    .then_with(|| morton(*a, dim).cmp(&morton(*b, dim)))
            });
            debug_assert!(cand.len() >= need);
            next.extend(cand.into_iter().take(need));
        }
        selected = next;
    }
    let scale = Scale::new(mt, dim)?;
    Ok(UniformSetRecord {
        t_block,
        m_blocks,
        branching: targets,
        cells: CellSet::new(scale, selected)?,
    })
}

/// Bottom-up "full" marks: a leaf is full; an interior node is full when
/// it has at least `N_{l+1}` full children. Returns one map per level
/// (presence = full).
fn full_marks(
    children: &[BTreeMap<[i64; 2], Vec<[i64; 2]>>],
    targets: &[u64],
    m: usize,
) -> Vec<HashMap<[i64; 2], bool>> {
    let mut full: Vec<HashMap<[i64; 2], bool>> = vec![HashMap::new(); m + 1];
    // Leaves: every node appearing as a child at the last level.
    for list in children[m - 1].values() {
        for c in list {
            full[m].insert(*c, true);
        }
    }
    for l in (0..m).rev() {
        for (node, kids) in &children[l] {
            let n_full = kids.iter().filter(|k| full[l + 1].contains_key(*k)).count();
            if n_full >= targets[l] as usize {
                full[l].insert(*node, true);
            }
        }
    }
    full
}

fn feasible(
    children: &[BTreeMap<[i64; 2], Vec<[i64; 2]>>],
    targets: &[u64],
    root: [i64; 2],
    m: usize,
) -> bool {
    full_marks(children, targets, m)[0].contains_key(&root)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
