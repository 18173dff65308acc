//! Agglomerative clustering over a precomputed distance matrix and cut
//! selection by the variance ratio criterion.

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// UPGMA: mean pairwise distance between members.
    #[default]
    Average,
    Complete,
    Single,
}

impl std::str::FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "average" | "avg" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            other => Err(format!(
                "unknown linkage `{other}` (expected average, complete or single)"
            )),
        }
    }
}

/// One merge step. Leaves are `0..n`; the cluster created by merge `i` has
/// id `n + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

struct Active {
    id: usize,
    // smallest leaf index, used for tie-breaking
    key: usize,
    size: usize,
}

/// Standard agglomerative merge sequence. Ties between equally close pairs
/// go to the pair with the smallest member indices.
pub fn agglomerate(matrix: &DistanceMatrix, linkage: Linkage) -> Dendrogram {
    let n = matrix.len();
    let mut active: Vec<Active> = (0..n).map(|i| Active { id: i, key: i, size: 1 }).collect();
    // Between-cluster aggregate: sum of member distances for average
    // linkage, max or min for complete and single.
    let mut agg: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| matrix.get(i, j)).collect())
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    while active.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let (ax, ay) = (&active[x], &active[y]);
                let d = match linkage {
                    Linkage::Average => agg[x][y] / (ax.size * ay.size) as f64,
                    Linkage::Complete | Linkage::Single => agg[x][y],
                };
                let pair = (ax.key.min(ay.key), ax.key.max(ay.key));
                let better = match best {
                    None => true,
                    Some((bd, bp, _, _)) => d < bd || (d == bd && pair < bp),
                };
                if better {
                    best = Some((d, pair, x, y));
                }
            }
        }
        let (height, _, x, y) = best.expect("at least two active clusters");
        let (lo, hi) = if active[x].key < active[y].key { (x, y) } else { (y, x) };
        let size = active[x].size + active[y].size;
        merges.push(Merge {
            a: active[lo].id,
            b: active[hi].id,
            height,
            size,
        });

        // fold row y into row x, then drop y
        for z in 0..active.len() {
            if z == x || z == y {
                continue;
            }
            let v = match linkage {
                Linkage::Average => agg[x][z] + agg[y][z],
                Linkage::Complete => agg[x][z].max(agg[y][z]),
                Linkage::Single => agg[x][z].min(agg[y][z]),
            };
            agg[x][z] = v;
            agg[z][x] = v;
        }
        active[x] = Active {
            id: n + merges.len() - 1,
            key: active[x].key.min(active[y].key),
            size,
        };
        active.remove(y);
        agg.remove(y);
        for row in agg.iter_mut() {
            row.remove(y);
        }
    }
    Dendrogram { n, merges }
}

impl Dendrogram {
    /// Distinct merge heights in ascending order.
    pub fn heights(&self) -> Vec<f64> {
        let mut hs: Vec<f64> = self.merges.iter().map(|m| m.height).collect();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        hs
    }

    /// Clusters formed by every merge at height `<= threshold`. Members are
    /// sorted and clusters are ordered by their smallest member.
    pub fn cut(&self, threshold: f64) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        // representative leaf of every cluster id
        let mut leaf_of: Vec<usize> = (0..self.n).collect();
        for m in &self.merges {
            let (ra, rb) = (leaf_of[m.a], leaf_of[m.b]);
            if m.height <= threshold {
                let (ra, rb) = (find(&mut parent, ra), find(&mut parent, rb));
                let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent[drop] = keep;
            }
            leaf_of.push(ra.min(rb));
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; self.n];
        for i in 0..self.n {
            let r = find(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(i);
        }
        groups
    }

    /// Nested-list rendering, e.g. `((0,1):0,2):4`.
    pub fn to_nested(&self) -> String {
        let mut repr: Vec<String> = (0..self.n).map(|i| i.to_string()).collect();
        for m in &self.merges {
            let s = format!("({},{}):{}", repr[m.a], repr[m.b], m.height);
            repr.push(s);
        }
        repr.pop().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub clusters: Vec<Vec<usize>>,
    pub threshold: f64,
    pub medoids: Vec<usize>,
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Member minimizing the summed squared distance to the others. Ties go to
/// the member closest to all points, then to the smallest index, so the
/// choice does not depend on labels unless distances coincide exactly.
pub fn medoid(members: &[usize], matrix: &DistanceMatrix) -> usize {
    let global = |c: usize| -> f64 { (0..matrix.len()).map(|m| sq(matrix.get(c, m))).sum() };
    let mut best = (f64::INFINITY, f64::INFINITY, usize::MAX);
    for &c in members {
        let cost: f64 = members.iter().map(|&m| sq(matrix.get(c, m))).sum();
        let key = (cost, global(c), c);
        if key.partial_cmp(&best) == Some(std::cmp::Ordering::Less) {
            best = key;
        }
    }
    best.2
}

impl Partition {
    pub fn new(clusters: Vec<Vec<usize>>, threshold: f64, matrix: &DistanceMatrix) -> Self {
        let medoids = clusters.iter().map(|c| medoid(c, matrix)).collect();
        Self {
            clusters,
            threshold,
            medoids,
        }
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn n(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Clusters with at least two members.
    pub fn dominant(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.clusters.iter().filter(|c| c.len() >= 2)
    }
}

/// Variance ratio criterion with medoids standing in for centroids.
///
/// Returns `+inf` when all clusters are internally tight but apart, and `0`
/// when both dispersions vanish.
pub fn vrc(partition: &Partition, matrix: &DistanceMatrix) -> Result<f64> {
    let n = partition.n();
    let k = partition.k();
    if k < 2 || k >= n {
        return Err(Error::DegenerateK { k, n });
    }
    let all: Vec<usize> = (0..matrix.len()).collect();
    let global = medoid(&all, matrix);
    let mut within = 0.0;
    let mut between = 0.0;
    for (members, &m) in partition.clusters.iter().zip(&partition.medoids) {
        within += members.iter().map(|&x| sq(matrix.get(x, m))).sum::<f64>();
        between += members.len() as f64 * sq(matrix.get(m, global));
    }
    if within == 0.0 {
        return Ok(if between > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutScore {
    pub threshold: f64,
    pub k: usize,
    pub score: Option<f64>,
}

/// VRC of the cut at every distinct merge height; `None` where undefined.
pub fn sweep(dendrogram: &Dendrogram, matrix: &DistanceMatrix) -> Vec<CutScore> {
    let n = dendrogram.n;
    dendrogram
        .heights()
        .into_iter()
        .map(|h| {
            let clusters = dendrogram.cut(h);
            let k = clusters.len();
            let score = (k >= 2 && k < n)
                .then(|| vrc(&Partition::new(clusters, h, matrix), matrix).ok())
                .flatten();
            CutScore {
                threshold: h,
                k,
                score,
            }
        })
        .collect()
}

/// Picks the cut that maximizes VRC, preferring the lower threshold on ties.
///
/// When no cut has a defined score (every cut yields one cluster or all
/// singletons), the cut at height 0 is returned: exact duplicates grouped,
/// everything else apart.
pub fn select_partition(dendrogram: &Dendrogram, matrix: &DistanceMatrix) -> Result<Partition> {
    if dendrogram.n < 2 {
        return Err(Error::TooFewPoints(dendrogram.n));
    }
    let mut best: Option<(f64, f64)> = None;
    for cut in sweep(dendrogram, matrix) {
        if let Some(score) = cut.score {
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, cut.threshold));
            }
        }
    }
    let threshold = best.map_or(0.0, |(_, h)| h);
    Ok(Partition::new(dendrogram.cut(threshold), threshold, matrix))
}

/// Clusters `matrix` and selects a partition; a single point forms one
/// cluster.
pub fn cluster(matrix: &DistanceMatrix, linkage: Linkage) -> Result<Partition> {
    match matrix.len() {
        0 => Err(Error::TooFewPoints(0)),
        1 => Ok(Partition::new(vec![vec![0]], 0.0, matrix)),
        _ => select_partition(&agglomerate(matrix, linkage), matrix),
    }
}
