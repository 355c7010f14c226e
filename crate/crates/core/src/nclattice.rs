//! The lattice NC(n) of noncrossing partitions of `{1..n}`.
//!
//! Partitions are stored in canonical form: every block strictly increasing,
//! blocks ordered by their minimum. `enumerate_nc` returns NC(n) sorted
//! lexicographically on that form. Möbius values of intervals are computed by
//! the defining recursion `μ(π,π) = 1`, `μ(π,σ) = -Σ_{π ≤ τ < σ} μ(π,τ)` and
//! memoized per lattice behind a mutex.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};

/// Largest `n` accepted by [`enumerate_nc`].
pub const ENUMERATION_CEILING: usize = 10;
/// Largest `n` for which interval Möbius tables are built.
pub const MOBIUS_CEILING: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NcPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl NcPartition {
    /// Validates and canonicalizes a block list over `{1..n}`.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(domain!("partition of an empty ground set"));
        }
        let mut seen = vec![false; n + 1];
        let mut blocks = blocks;
        for block in blocks.iter_mut() {
            if block.is_empty() {
                return Err(domain!("empty block"));
            }
            block.sort_unstable();
            for &x in block.iter() {
                if x == 0 || x > n {
                    return Err(domain!("element {x} outside 1..{n}"));
                }
                if seen[x] {
                    return Err(domain!("element {x} appears twice"));
                }
                seen[x] = true;
            }
        }
        if let Some(missing) = (1..=n).find(|&x| !seen[x]) {
            return Err(domain!("element {missing} is not covered"));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                if blocks_cross(&blocks[i], &blocks[j]) {
                    return Err(domain!(
                        "blocks {:?} and {:?} cross",
                        blocks[i],
                        blocks[j]
                    ));
                }
            }
        }
        Ok(NcPartition { n, blocks })
    }

    /// Builds from blocks, taking `n` to be the number of listed elements.
    pub fn from_blocks(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n = blocks.iter().map(Vec::len).sum();
        Self::new(n, blocks)
    }

    /// The minimal element `0_n`.
    pub fn singletons(n: usize) -> Self {
        assert!(n > 0, "0_n needs n >= 1");
        NcPartition {
            n,
            blocks: (1..=n).map(|i| vec![i]).collect(),
        }
    }

    /// The maximal element `1_n`.
    pub fn full(n: usize) -> Self {
        assert!(n > 0, "1_n needs n >= 1");
        NcPartition {
            n,
            blocks: vec![(1..=n).collect()],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_full(&self) -> bool {
        self.blocks.len() == 1
    }

    /// `labels[i]` is the index of the block containing `i` (1-based; slot 0 unused).
    fn labels(&self) -> Vec<usize> {
        let mut labels = vec![usize::MAX; self.n + 1];
        for (b, block) in self.blocks.iter().enumerate() {
            for &x in block {
                labels[x] = b;
            }
        }
        labels
    }
}

/// Two sorted blocks cross iff their merged label sequence has at least four runs.
fn blocks_cross(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    let mut runs = 0;
    let mut last: Option<bool> = None;
    while i < a.len() || j < b.len() {
        let from_a = j == b.len() || (i < a.len() && a[i] < b[j]);
        if from_a {
            i += 1;
        } else {
            j += 1;
        }
        if last != Some(from_a) {
            runs += 1;
            last = Some(from_a);
            if runs >= 4 {
                return true;
            }
        }
    }
    false
}

impl fmt::Display for NcPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, block) in self.blocks.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            f.write_str("(")?;
            for (t, x) in block.iter().enumerate() {
                if t > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str(")")?;
        }
        f.write_str("}")
    }
}

impl FromStr for NcPartition {
    type Err = Error;

    /// Parses the brace-tuple syntax `{(1,4),(2,3),(5)}`.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let inner = compact
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| Error::Parse(format!("partition must be wrapped in braces: {s:?}")))?;
        let mut blocks = Vec::new();
        let mut rest = inner;
        while !rest.is_empty() {
            let body = rest
                .strip_prefix('(')
                .ok_or_else(|| Error::Parse(format!("expected '(' in {s:?}")))?;
            let close = body
                .find(')')
                .ok_or_else(|| Error::Parse(format!("unclosed block in {s:?}")))?;
            let block = body[..close]
                .split(',')
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad element {t:?} in {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(block);
            rest = &body[close + 1..];
            if let Some(r) = rest.strip_prefix(',') {
                if r.is_empty() {
                    return Err(Error::Parse(format!("trailing comma in {s:?}")));
                }
                rest = r;
            } else if !rest.is_empty() {
                return Err(Error::Parse(format!("expected ',' between blocks in {s:?}")));
            }
        }
        NcPartition::from_blocks(blocks)
    }
}

impl Serialize for NcPartition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.blocks.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NcPartition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let blocks = Vec::<Vec<usize>>::deserialize(deserializer)?;
        NcPartition::from_blocks(blocks).map_err(serde::de::Error::custom)
    }
}

/// Every noncrossing partition of `{1..n}`, lexicographic on canonical form.
pub fn enumerate_nc(n: usize) -> Result<Vec<NcPartition>> {
    if n == 0 || n > ENUMERATION_CEILING {
        return Err(domain!(
            "enumeration needs 1 <= n <= {ENUMERATION_CEILING}, got {n}"
        ));
    }
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    grow(1, n, &mut blocks, &mut out);
    out.sort_unstable();
    Ok(out)
}

fn grow(next: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<NcPartition>) {
    if next > n {
        let mut canonical = blocks.clone();
        canonical.sort_unstable_by_key(|b| b[0]);
        out.push(NcPartition {
            n,
            blocks: canonical,
        });
        return;
    }
    for b in 0..blocks.len() {
        blocks[b].push(next);
        let ok = (0..blocks.len()).all(|c| c == b || !blocks_cross(&blocks[b], &blocks[c]));
        if ok {
            grow(next + 1, n, blocks, out);
        }
        blocks[b].pop();
    }
    blocks.push(vec![next]);
    grow(next + 1, n, blocks, out);
    blocks.pop();
}

/// Refinement order: every block of `pi` lies inside a block of `theta`.
pub fn leq(pi: &NcPartition, theta: &NcPartition) -> Result<bool> {
    if pi.n != theta.n {
        return Err(domain!(
            "partitions of different ground sets ({} vs {})",
            pi.n,
            theta.n
        ));
    }
    Ok(leq_unchecked(pi, &theta.labels()))
}

fn leq_unchecked(pi: &NcPartition, theta_labels: &[usize]) -> bool {
    pi.blocks.iter().all(|block| {
        let l = theta_labels[block[0]];
        block.iter().all(|&x| theta_labels[x] == l)
    })
}

/// NC(n) with its order relation and a memo of Möbius rows.
pub struct NcLattice {
    n: usize,
    elements: Vec<NcPartition>,
    index: HashMap<NcPartition, usize>,
    /// Bit matrix: bit `j` of row `i` set iff `elements[i] <= elements[j]`.
    order: Vec<Vec<u64>>,
    /// Element indices sorted by decreasing block count (a linear extension).
    by_rank: Vec<usize>,
    rows: Mutex<HashMap<usize, Arc<Vec<i64>>>>,
    to_top: OnceLock<Vec<i64>>,
}

static LATTICES: OnceLock<Mutex<HashMap<usize, Arc<NcLattice>>>> = OnceLock::new();

impl NcLattice {
    /// Shared lattice for `n`, built on first use.
    pub fn get(n: usize) -> Result<Arc<NcLattice>> {
        if n == 0 || n > MOBIUS_CEILING {
            return Err(domain!(
                "Möbius tables need 1 <= n <= {MOBIUS_CEILING}, got {n}"
            ));
        }
        let cache = LATTICES.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(l) = cache.lock().expect("lattice cache poisoned").get(&n) {
            return Ok(Arc::clone(l));
        }
        let built = Arc::new(NcLattice::build(n)?);
        let mut guard = cache.lock().expect("lattice cache poisoned");
        Ok(Arc::clone(guard.entry(n).or_insert(built)))
    }

    fn build(n: usize) -> Result<Self> {
        let elements = enumerate_nc(n)?;
        let index = elements
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let words = elements.len().div_ceil(64);
        let labels: Vec<Vec<usize>> = elements.iter().map(NcPartition::labels).collect();
        let order = elements
            .iter()
            .map(|pi| {
                let mut row = vec![0u64; words];
                for (j, lj) in labels.iter().enumerate() {
                    if leq_unchecked(pi, lj) {
                        row[j / 64] |= 1 << (j % 64);
                    }
                }
                row
            })
            .collect();
        let mut by_rank: Vec<usize> = (0..elements.len()).collect();
        by_rank.sort_by_key(|&i| std::cmp::Reverse(elements[i].block_count()));
        Ok(NcLattice {
            n,
            elements,
            index,
            order,
            by_rank,
            rows: Mutex::new(HashMap::new()),
            to_top: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn elements(&self) -> &[NcPartition] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn index_of(&self, pi: &NcPartition) -> Result<usize> {
        self.index
            .get(pi)
            .copied()
            .ok_or_else(|| domain!("{pi} is not an element of NC({})", self.n))
    }

    #[inline]
    pub fn leq_idx(&self, i: usize, j: usize) -> bool {
        self.order[i][j / 64] >> (j % 64) & 1 == 1
    }

    /// Row `σ ↦ μ(π, σ)` for `π = elements[i]`; zero off the up-set of `π`.
    pub fn mobius_row(&self, i: usize) -> Arc<Vec<i64>> {
        if let Some(row) = self.rows.lock().expect("möbius memo poisoned").get(&i) {
            return Arc::clone(row);
        }
        let mut row = vec![0i64; self.elements.len()];
        let mut upset: Vec<usize> = Vec::new();
        for &s in &self.by_rank {
            if !self.leq_idx(i, s) {
                continue;
            }
            row[s] = if s == i {
                1
            } else {
                -upset
                    .iter()
                    .filter(|&&t| self.leq_idx(t, s))
                    .map(|&t| row[t])
                    .sum::<i64>()
            };
            upset.push(s);
        }
        let row = Arc::new(row);
        let mut guard = self.rows.lock().expect("möbius memo poisoned");
        Arc::clone(guard.entry(i).or_insert(row))
    }

    pub fn mobius_idx(&self, i: usize, j: usize) -> Result<i64> {
        if !self.leq_idx(i, j) {
            return Err(domain!(
                "{} is not below {}",
                self.elements[i],
                self.elements[j]
            ));
        }
        Ok(self.mobius_row(i)[j])
    }

    /// `μ(π, 1_n)` for every `π`, indexed like [`NcLattice::elements`].
    pub fn mobius_to_top(&self) -> &[i64] {
        self.to_top.get_or_init(|| {
            let top = self
                .elements
                .iter()
                .position(NcPartition::is_full)
                .expect("1_n is in NC(n)");
            (0..self.elements.len())
                .map(|i| self.mobius_row(i)[top])
                .collect()
        })
    }
}

/// Möbius value of the interval `[pi, sigma]` in NC(n).
pub fn mobius(pi: &NcPartition, sigma: &NcPartition) -> Result<i64> {
    if pi.n != sigma.n {
        return Err(domain!(
            "partitions of different ground sets ({} vs {})",
            pi.n,
            sigma.n
        ));
    }
    let lattice = NcLattice::get(pi.n)?;
    let i = lattice.index_of(pi)?;
    let j = lattice.index_of(sigma)?;
    lattice.mobius_idx(i, j)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ForestNode {
    pub block: Vec<usize>,
    pub parent: Option<usize>,
    /// Ordered by block minimum.
    pub children: Vec<usize>,
}

/// Immediate-nesting structure of the blocks of a noncrossing partition.
///
/// Node `k` corresponds to block `k` of the partition's canonical form. A
/// block is inner in another when it sits strictly between two consecutive
/// elements of it; the parent is the innermost such block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NestingForest {
    pub n: usize,
    pub nodes: Vec<ForestNode>,
    pub roots: Vec<usize>,
}

impl NestingForest {
    /// Blocks with no inner block; each is a run of consecutive integers.
    pub fn innermost(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&k| self.nodes[k].children.is_empty())
            .collect()
    }

    /// Children of `node` lying in the gap right after position `pos` of its block.
    pub fn children_after(&self, node: usize, pos: usize) -> impl Iterator<Item = usize> + '_ {
        let block = &self.nodes[node].block;
        let next = block
            .iter()
            .copied()
            .find(|&x| x > pos)
            .unwrap_or(usize::MAX);
        self.nodes[node].children.iter().copied().filter(move |&c| {
            let m = self.nodes[c].block[0];
            m > pos && m < next
        })
    }
}

pub fn nesting_forest(pi: &NcPartition) -> NestingForest {
    let blocks = &pi.blocks;
    let mut nodes: Vec<ForestNode> = blocks
        .iter()
        .map(|b| ForestNode {
            block: b.clone(),
            parent: None,
            children: Vec::new(),
        })
        .collect();
    for (v, block) in blocks.iter().enumerate() {
        let (lo, hi) = (block[0], *block.last().expect("nonempty block"));
        // Among enclosing blocks, the innermost has the largest minimum.
        nodes[v].parent = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b[0] < lo && hi < *b.last().expect("nonempty block"))
            .max_by_key(|(_, b)| b[0])
            .map(|(k, _)| k);
    }
    let mut roots = Vec::new();
    for v in 0..nodes.len() {
        match nodes[v].parent {
            Some(p) => nodes[p].children.push(v),
            None => roots.push(v),
        }
    }
    NestingForest {
        n: pi.n,
        nodes,
        roots,
    }
}
