//! Hierarchical Navigable Small World index over unit vectors.
//!
//! Distance is cosine distance `1 - dot`. Every ordering (candidate heaps,
//! neighbor selection, result lists) breaks distance ties by ascending node
//! id, so a fixed seed always produces the same graph and the same answers.
//!
//! Upper layers keep the `M` closest candidates; layer 0 uses the diversity
//! heuristic (a candidate is kept only if it is closer to the base node than
//! to every neighbor already kept) and back-fills pruned candidates up to
//! `2M`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::{self, Read, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EmbeddingSet;
use crate::geometry::dot;

pub const DEFAULT_M: usize = 16;
pub const DEFAULT_EF_CONSTRUCTION: usize = 200;
pub const DEFAULT_EF_SEARCH: usize = 64;
pub const DEFAULT_SEED: u64 = 0x5eed;

const MAGIC: &[u8; 5] = b"HNSW1";

#[derive(Debug, Error)]
pub enum AnnError {
    #[error("cannot index an empty embedding set")]
    EmptySet,
    #[error("embedding set must be unit-normalized")]
    NotNormalized,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("query has dimension {found}, index expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt index file: {0}")]
    Corrupt(String),
}

pub type Result<T, E = AnnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnswParams {
    /// Maximum neighbors per node on layers above 0; layer 0 allows twice this.
    pub m: usize,
    pub ef_construction: usize,
    pub level_multiplier: f64,
}

impl HnswParams {
    pub fn new(m: usize, ef_construction: usize) -> Self {
        Self {
            m,
            ef_construction,
            level_multiplier: 1.0 / (m as f64).ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(AnnError::InvalidParams(format!("M = {} < 2", self.m)));
        }
        if self.ef_construction < self.m {
            return Err(AnnError::InvalidParams(format!(
                "ef_construction = {} < M = {}",
                self.ef_construction, self.m
            )));
        }
        if !(self.level_multiplier.is_finite() && self.level_multiplier > 0.0) {
            return Err(AnnError::InvalidParams(format!(
                "level multiplier {}",
                self.level_multiplier
            )));
        }
        Ok(())
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }
}

impl Default for HnswParams {
    fn default() -> Self {
        Self::new(DEFAULT_M, DEFAULT_EF_CONSTRUCTION)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborHit {
    pub node_id: usize,
    pub word: String,
    pub distance: f64,
}

/// Cosine distance on unit vectors, floored at zero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - dot(a, b)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    dist: f64,
    id: u32,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Generation-stamped visited marks, reused across searches during build.
struct Visited {
    marks: Vec<u32>,
    generation: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self {
            marks: vec![0; n],
            generation: 0,
        }
    }

    fn reset(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.generation = 1;
        }
    }

    /// Returns true the first time `id` is seen in the current generation.
    fn insert(&mut self, id: u32) -> bool {
        let slot = &mut self.marks[id as usize];
        if *slot == self.generation {
            false
        } else {
            *slot = self.generation;
            true
        }
    }
}

#[derive(Debug, Clone)]
pub struct HnswIndex {
    set: Arc<EmbeddingSet>,
    params: HnswParams,
    seed: u64,
    levels: Vec<usize>,
    /// `links[node][layer]` for `layer <= levels[node]`.
    links: Vec<Vec<Vec<u32>>>,
    entry_point: usize,
}

impl PartialEq for HnswIndex {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.seed == other.seed
            && self.levels == other.levels
            && self.links == other.links
            && self.entry_point == other.entry_point
    }
}

/// Inserts every vector of `set`, in vocabulary order.
pub fn build_index(set: Arc<EmbeddingSet>, params: HnswParams, seed: u64) -> Result<HnswIndex> {
    params.validate()?;
    if set.is_empty() {
        return Err(AnnError::EmptySet);
    }
    if !set.is_normalized() {
        return Err(AnnError::NotNormalized);
    }
    if set.len() > u32::MAX as usize {
        return Err(AnnError::InvalidParams("more than u32::MAX vectors".into()));
    }
    let n = set.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<usize> = (0..n)
        .map(|_| {
            // gen::<f64>() is in [0, 1); 1 - that is in (0, 1].
            let u: f64 = 1.0 - rng.gen::<f64>();
            (-u.ln() * params.level_multiplier).floor() as usize
        })
        .collect();
    let links = levels.iter().map(|&l| vec![Vec::new(); l + 1]).collect();
    let mut index = HnswIndex {
        set,
        params,
        seed,
        levels,
        links,
        entry_point: 0,
    };
    let mut visited = Visited::new(n);
    for node in 1..n {
        index.insert(node, &mut visited);
    }
    Ok(index)
}

impl HnswIndex {
    pub fn params(&self) -> HnswParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn entry_point(&self) -> usize {
        self.entry_point
    }

    pub fn max_level(&self) -> usize {
        self.levels[self.entry_point]
    }

    pub fn level(&self, node: usize) -> usize {
        self.levels[node]
    }

    pub fn neighbors(&self, node: usize, layer: usize) -> &[u32] {
        self.links[node]
            .get(layer)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn embeddings(&self) -> &Arc<EmbeddingSet> {
        &self.set
    }

    fn dist_to(&self, query: &[f64], id: u32) -> f64 {
        cosine_distance(query, self.set.vector(id as usize))
    }

    fn dist_between(&self, a: u32, b: u32) -> f64 {
        cosine_distance(self.set.vector(a as usize), self.set.vector(b as usize))
    }

    fn insert(&mut self, node: usize, visited: &mut Visited) {
        let level = self.levels[node];
        let top = self.max_level();
        let query = self.set.vector(node).to_vec();
        let ep = self.entry_point as u32;
        let mut entry = vec![Scored {
            dist: self.dist_to(&query, ep),
            id: ep,
        }];
        for layer in ((level + 1)..=top).rev() {
            entry = self.search_layer(&query, &entry, 1, layer, visited);
        }
        for layer in (0..=level.min(top)).rev() {
            let candidates =
                self.search_layer(&query, &entry, self.params.ef_construction, layer, visited);
            let chosen = self.select_neighbors(&candidates, self.params.m, layer);
            self.links[node][layer] = chosen.iter().map(|s| s.id).collect();
            let cap = self.params.max_links(layer);
            for s in &chosen {
                let nb = s.id as usize;
                self.links[nb][layer].push(node as u32);
                if self.links[nb][layer].len() > cap {
                    let mut pool: Vec<Scored> = self.links[nb][layer]
                        .iter()
                        .map(|&id| Scored {
                            dist: self.dist_between(nb as u32, id),
                            id,
                        })
                        .collect();
                    pool.sort();
                    let kept = self.select_neighbors(&pool, cap, layer);
                    self.links[nb][layer] = kept.iter().map(|s| s.id).collect();
                }
            }
            entry = candidates;
        }
        if level > top {
            self.entry_point = node;
        }
    }

    /// `candidates` must be sorted by distance to the base node.
    fn select_neighbors(&self, candidates: &[Scored], m: usize, layer: usize) -> Vec<Scored> {
        if layer > 0 || candidates.len() <= m {
            return candidates.iter().take(m).copied().collect();
        }
        let mut kept: Vec<Scored> = Vec::with_capacity(m);
        let mut pruned = Vec::new();
        for &c in candidates {
            if kept.len() >= m {
                break;
            }
            let diverse = kept.iter().all(|k| self.dist_between(c.id, k.id) > c.dist);
            if diverse {
                kept.push(c);
            } else {
                pruned.push(c);
            }
        }
        for c in pruned {
            if kept.len() >= m {
                break;
            }
            kept.push(c);
        }
        kept.sort();
        kept
    }

    /// Beam search on one layer. Returns up to `ef` nodes sorted ascending.
    fn search_layer(
        &self,
        query: &[f64],
        entry: &[Scored],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
    ) -> Vec<Scored> {
        visited.reset();
        let mut candidates: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        let mut best: BinaryHeap<Scored> = BinaryHeap::new();
        for &e in entry {
            if visited.insert(e.id) {
                candidates.push(Reverse(e));
                best.push(e);
                if best.len() > ef {
                    best.pop();
                }
            }
        }
        while let Some(Reverse(current)) = candidates.pop() {
            let worst = *best.peek().expect("best is never empty here");
            if current > worst && best.len() >= ef {
                break;
            }
            for &nb in self.neighbors(current.id as usize, layer) {
                if !visited.insert(nb) {
                    continue;
                }
                let cand = Scored {
                    dist: self.dist_to(query, nb),
                    id: nb,
                };
                let worst = *best.peek().expect("best is never empty here");
                if best.len() < ef || cand < worst {
                    candidates.push(Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    /// `k` approximate nearest neighbors of `query`, ascending by distance.
    pub fn search_knn(&self, query: &[f64], k: usize, ef_search: usize) -> Result<Vec<NeighborHit>> {
        if query.len() != self.set.dim() {
            return Err(AnnError::DimensionMismatch {
                expected: self.set.dim(),
                found: query.len(),
            });
        }
        if k == 0 {
            return Err(AnnError::InvalidParams("k must be at least 1".into()));
        }
        if ef_search < k {
            return Err(AnnError::InvalidParams(format!(
                "ef_search = {ef_search} < k = {k}"
            )));
        }
        let mut visited = Visited::new(self.len());
        let ep = self.entry_point as u32;
        let mut entry = vec![Scored {
            dist: self.dist_to(query, ep),
            id: ep,
        }];
        for layer in (1..=self.max_level()).rev() {
            entry = self.search_layer(query, &entry, 1, layer, &mut visited);
        }
        let found = self.search_layer(query, &entry, ef_search, 0, &mut visited);
        Ok(found
            .into_iter()
            .take(k)
            .map(|s| NeighborHit {
                node_id: s.id as usize,
                word: self.set.word(s.id as usize).to_string(),
                distance: s.dist,
            })
            .collect())
    }

    /// Serializes the graph (not the vectors) as `HNSW1` + little-endian fields.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        for v in [
            self.len() as u64,
            self.set.dim() as u64,
            self.params.m as u64,
            self.params.ef_construction as u64,
            self.params.level_multiplier.to_bits(),
            self.seed,
            self.entry_point as u64,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        for &l in &self.levels {
            out.write_all(&(l as u32).to_le_bytes())?;
        }
        for node_links in &self.links {
            for layer in node_links {
                out.write_all(&(layer.len() as u32).to_le_bytes())?;
                for &id in layer {
                    out.write_all(&id.to_le_bytes())?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a graph written by [`Self::write_to`] and re-attaches `set`,
    /// validating every structural invariant.
    pub fn read_from<R: Read>(mut input: R, set: Arc<EmbeddingSet>) -> Result<Self> {
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(AnnError::Corrupt("bad magic bytes".into()));
        }
        let read_u64 = |input: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let n = read_u64(&mut input)? as usize;
        let dim = read_u64(&mut input)? as usize;
        let m = read_u64(&mut input)? as usize;
        let ef_construction = read_u64(&mut input)? as usize;
        let level_multiplier = f64::from_bits(read_u64(&mut input)?);
        let seed = read_u64(&mut input)?;
        let entry_point = read_u64(&mut input)? as usize;
        if n != set.len() || dim != set.dim() {
            return Err(AnnError::Corrupt(format!(
                "index is {n}x{dim} but embeddings are {}x{}",
                set.len(),
                set.dim()
            )));
        }
        let params = HnswParams {
            m,
            ef_construction,
            level_multiplier,
        };
        params
            .validate()
            .map_err(|e| AnnError::Corrupt(e.to_string()))?;
        let read_u32 = |input: &mut R| -> Result<u32> {
            let mut b = [0u8; 4];
            input.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let mut levels = Vec::with_capacity(n);
        for _ in 0..n {
            let l = read_u32(&mut input)? as usize;
            if l > 64 {
                return Err(AnnError::Corrupt(format!("node level {l}")));
            }
            levels.push(l);
        }
        let mut links = Vec::with_capacity(n);
        for (node, &l) in levels.iter().enumerate() {
            let mut node_links = Vec::with_capacity(l + 1);
            for layer in 0..=l {
                let count = read_u32(&mut input)? as usize;
                if count > params.max_links(layer) {
                    return Err(AnnError::Corrupt(format!(
                        "node {node} has {count} links on layer {layer}"
                    )));
                }
                let mut ids = Vec::with_capacity(count);
                for _ in 0..count {
                    let id = read_u32(&mut input)?;
                    if id as usize >= n || id as usize == node || levels[id as usize] < layer {
                        return Err(AnnError::Corrupt(format!(
                            "node {node} links to invalid node {id} on layer {layer}"
                        )));
                    }
                    ids.push(id);
                }
                node_links.push(ids);
            }
            links.push(node_links);
        }
        if entry_point >= n || levels.iter().any(|&l| l > levels[entry_point]) {
            return Err(AnnError::Corrupt("entry point is not on the top level".into()));
        }
        Ok(Self {
            set,
            params,
            seed,
            levels,
            links,
            entry_point,
        })
    }
}

/// Exact top-`k` by full scan; ties by ascending node id.
pub fn exact_knn(set: &EmbeddingSet, query: &[f64], k: usize) -> Result<Vec<NeighborHit>> {
    if query.len() != set.dim() {
        return Err(AnnError::DimensionMismatch {
            expected: set.dim(),
            found: query.len(),
        });
    }
    let mut all: Vec<Scored> = set
        .rows()
        .enumerate()
        .map(|(i, v)| Scored {
            dist: cosine_distance(query, v),
            id: i as u32,
        })
        .collect();
    let k = k.min(all.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    all.select_nth_unstable(k - 1);
    all.truncate(k);
    all.sort();
    Ok(all
        .into_iter()
        .map(|s| NeighborHit {
            node_id: s.id as usize,
            word: set.word(s.id as usize).to_string(),
            distance: s.dist,
        })
        .collect())
}

/// Mean fraction of the exact top-`k` ids that the index recovers.
pub fn measure_recall(
    index: &HnswIndex,
    set: &EmbeddingSet,
    queries: &[Vec<f64>],
    k: usize,
    ef_search: usize,
) -> Result<f64> {
    if queries.is_empty() {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for q in queries {
        let truth = exact_knn(set, q, k)?;
        let got = index.search_knn(q, k, ef_search)?;
        let hits = truth
            .iter()
            .filter(|t| got.iter().any(|g| g.node_id == t.node_id))
            .count();
        total += hits as f64 / truth.len() as f64;
    }
    Ok(total / queries.len() as f64)
}
