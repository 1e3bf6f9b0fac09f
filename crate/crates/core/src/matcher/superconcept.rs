//! Superconcepts: connected components of the match graph.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{MatchContext, MatcherWeights};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Superconcept {
    /// Lexicographically smallest member id.
    pub representative: String,
    pub members: BTreeSet<String>,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
    }
}

/// Partitions `concepts` by the transitive closure of `is_match`. Matching
/// itself is not transitive, so a block may contain pairs that do not match
/// directly. Blocks come back sorted by representative.
pub fn form_superconcepts<S: AsRef<str>>(
    concepts: &[S],
    ctx: &MatchContext<'_>,
    w: &MatcherWeights,
    theta: f64,
) -> Result<Vec<Superconcept>> {
    let ids: Vec<&str> = concepts
        .iter()
        .map(AsRef::as_ref)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut dsu = DisjointSet::new(ids.len());
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            if ctx.is_match(ids[i], ids[j], w, theta)? {
                dsu.union(i, j);
            }
        }
    }
    let mut blocks: std::collections::BTreeMap<usize, BTreeSet<String>> = Default::default();
    for (i, id) in ids.iter().enumerate() {
        let root = dsu.find(i);
        blocks.entry(root).or_default().insert(id.to_string());
    }
    let mut out: Vec<Superconcept> = blocks
        .into_values()
        .map(|members| Superconcept {
            representative: members.iter().next().cloned().unwrap_or_default(),
            members,
        })
        .collect();
    out.sort();
    Ok(out)
}
