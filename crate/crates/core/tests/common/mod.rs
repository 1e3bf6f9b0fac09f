// Independent reference implementations and random data for tests. Every
// oracle here recomputes from raw records or edge lists with plain loops, so
// it shares no index or cache with the code under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{DateTime, TimeZone, Utc};
use fm_core::{
    AssignmentRecord, AssociationRecord, CandidateLink, ContentType, CorpusSnapshot, CorpusStore,
    EdgeObject, FacetModel, FacetValueRef, JointMeaning, KnowledgeView, MatcherWeights,
    NormalizedTag, Ontology, Predicate, Resource, SearchParams, TagFacetPair, Taxonomy,
    TaxonomyRecord,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VOCAB: [&str; 20] = [
    "red", "fast", "car", "suv", "van", "sport", "family", "compact", "trendy", "road", "city",
    "blue", "coupe", "luxury", "cheap", "big", "small", "electric", "classic", "new",
];

pub fn ts(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_700_000_000 + secs, 0).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- strings

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in table.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in table[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = table[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            table[i][j] = sub.min(table[i - 1][j] + 1).min(table[i][j - 1] + 1);
        }
    }
    table[a.len()][b.len()]
}

pub fn label_distance(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / n as f64
    }
}

pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union: BTreeSet<&T> = a.iter().chain(b.iter()).collect();
    if union.is_empty() {
        return 1.0;
    }
    let inter = a.iter().filter(|x| b.contains(x)).count();
    1.0 - inter as f64 / union.len() as f64
}

// --------------------------------------------------------------- taxonomy

pub fn parent_map(taxonomy: &Taxonomy) -> BTreeMap<FacetValueRef, Option<FacetValueRef>> {
    taxonomy
        .to_records()
        .into_iter()
        .filter(|r| !r.value.is_empty())
        .map(|r| {
            let parent = (!r.parent.is_empty()).then(|| FacetValueRef::new(&r.group, &r.parent));
            (FacetValueRef::new(&r.group, &r.value), parent)
        })
        .collect()
}

pub fn is_ancestor_or_self(
    parents: &BTreeMap<FacetValueRef, Option<FacetValueRef>>,
    ancestor: &FacetValueRef,
    v: &FacetValueRef,
) -> bool {
    let mut cur = Some(v.clone());
    while let Some(c) = cur {
        if &c == ancestor {
            return true;
        }
        cur = parents.get(&c).cloned().flatten();
    }
    false
}

pub fn conflicting(
    parents: &BTreeMap<FacetValueRef, Option<FacetValueRef>>,
    a: &FacetValueRef,
    b: &FacetValueRef,
) -> bool {
    a.group == b.group && !is_ancestor_or_self(parents, a, b) && !is_ancestor_or_self(parents, b, a)
}

// --------------------------------------------------------------- ontology

pub struct Graph {
    pub is_a: BTreeSet<(String, String)>,
    pub same_as: BTreeSet<(String, String)>,
    pub facet_of: BTreeSet<(String, FacetValueRef)>,
    pub concepts: BTreeSet<String>,
}

impl Graph {
    pub fn of(o: &Ontology) -> Self {
        let mut g = Graph {
            is_a: BTreeSet::new(),
            same_as: BTreeSet::new(),
            facet_of: BTreeSet::new(),
            concepts: o.concepts().map(|c| c.id.clone()).collect(),
        };
        for e in o.edges() {
            match (e.predicate, e.object) {
                (Predicate::IsA, EdgeObject::Concept(t)) => {
                    g.is_a.insert((e.subject, t));
                }
                (Predicate::SameAs, EdgeObject::Concept(t)) => {
                    g.same_as.insert((e.subject.clone(), t.clone()));
                    g.same_as.insert((t, e.subject));
                }
                (Predicate::FacetOf, EdgeObject::FacetValue(v)) => {
                    g.facet_of.insert((e.subject, v));
                }
                _ => {}
            }
        }
        g
    }

    pub fn subsumes(&self, general: &str, specific: &str) -> bool {
        let mut seen = BTreeSet::from([specific.to_string()]);
        let mut stack = vec![specific.to_string()];
        while let Some(n) = stack.pop() {
            if n == general {
                return true;
            }
            for (c, p) in &self.is_a {
                if *c == n && seen.insert(p.clone()) {
                    stack.push(p.clone());
                }
            }
        }
        false
    }

    pub fn depth(&self) -> usize {
        // Longest chain by relaxation over edges; fine for small graphs.
        let mut h: BTreeMap<&str, usize> = self.concepts.iter().map(|c| (c.as_str(), 0)).collect();
        for _ in 0..self.concepts.len() {
            for (c, p) in &self.is_a {
                let cand = h[p.as_str()] + 1;
                if cand > h[c.as_str()] {
                    h.insert(c, cand);
                }
            }
        }
        h.values().copied().max().unwrap_or(0)
    }

    pub fn path_distance(&self, a: &str, b: &str) -> f64 {
        if a == b || self.same_as.contains(&(a.to_string(), b.to_string())) {
            return 0.0;
        }
        let depth = self.depth();
        if depth == 0 {
            return 1.0;
        }
        let mut dist = BTreeMap::from([(a.to_string(), 0usize)]);
        let mut queue = VecDeque::from([a.to_string()]);
        while let Some(n) = queue.pop_front() {
            let d = dist[&n];
            if n == b {
                return (d as f64 / (2 * depth) as f64).min(1.0);
            }
            for (x, y) in &self.is_a {
                for (from, to) in [(x, y), (y, x)] {
                    if *from == n && !dist.contains_key(to) {
                        dist.insert(to.clone(), d + 1);
                        queue.push_back(to.clone());
                    }
                }
            }
        }
        1.0
    }

    /// The single concept grounding `v`, if exactly one does.
    pub fn grounding(&self, v: &FacetValueRef) -> Option<String> {
        let gs: Vec<&String> = self
            .facet_of
            .iter()
            .filter(|(_, fv)| fv == v)
            .map(|(c, _)| c)
            .collect();
        (gs.len() == 1).then(|| gs[0].clone())
    }
}

// -------------------------------------------------------------- joint meaning

/// Repeats full scans of the deletion rules until nothing changes.
pub fn naive_fixpoint(
    l0: &[CandidateLink],
    commitments: &[FacetValueRef],
    taxonomy: &Taxonomy,
    graph: &Graph,
) -> Vec<CandidateLink> {
    let parents = parent_map(taxonomy);
    let initial: Vec<CandidateLink> = l0.to_vec();
    let mut current = initial.clone();
    loop {
        let before = current.len();
        let snapshot = current.clone();
        current.retain(|l| {
            let conflict = graph.facet_of.iter().any(|(c, fv)| {
                *c == l.concept && commitments.iter().any(|v| conflicting(&parents, v, fv))
            });
            let anchor_lost = initial
                .iter()
                .any(|a| a.pair == l.pair && a.concept == a.grounding)
                && !snapshot
                    .iter()
                    .any(|a| a.pair == l.pair && a.concept == a.grounding);
            !conflict && !anchor_lost
        });
        if current.len() == before {
            break;
        }
    }
    current.sort();
    current.dedup();
    current
}

/// Nested-loop candidate generation: every pair against every query tag,
/// every matching pair against every concept.
pub fn naive_candidate_links(
    query_tags: &BTreeSet<NormalizedTag>,
    pairs: &[TagFacetPair],
    view: &KnowledgeView,
) -> Vec<CandidateLink> {
    let ctx = view.match_context();
    let graph = Graph::of(&view.ontology);
    let theta = view.params.theta;
    let resolve = |tag: &str| -> Option<String> {
        let mut best: Option<(String, f64)> = None;
        for c in view.ontology.concepts() {
            for l in &c.labels {
                let d = label_distance(tag, l.as_str());
                if best
                    .as_ref()
                    .is_none_or(|(bid, bd)| d < *bd || (d == *bd && c.id < *bid))
                {
                    best = Some((c.id.clone(), d));
                }
            }
        }
        best.filter(|(_, d)| *d <= theta).map(|(c, _)| c)
    };
    let mut out = Vec::new();
    for p in pairs {
        let hit = query_tags.iter().any(|q| {
            q == &p.tag
                || match (resolve(p.tag.as_str()), resolve(q.as_str())) {
                    (Some(a), Some(b)) => ctx.is_match(&a, &b, &view.weights, theta).unwrap(),
                    _ => false,
                }
        });
        if !hit {
            continue;
        }
        let Some(g) = graph.grounding(&p.facet_value) else {
            continue;
        };
        for c in &graph.concepts {
            let d = ctx.dissimilarity(&g, c, &view.weights).unwrap();
            if d <= theta {
                out.push(CandidateLink {
                    pair: p.clone(),
                    concept: c.clone(),
                    dissimilarity: d,
                    grounding: g.clone(),
                });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

// ------------------------------------------------------------------ search

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedHit {
    pub id: String,
    pub score: f64,
    pub annotations: BTreeSet<(FacetValueRef, String)>,
    pub support: usize,
}

pub fn naive_annotations(
    snap: &CorpusSnapshot,
    facets: &FacetModel,
    resource: &str,
) -> BTreeSet<(FacetValueRef, String)> {
    let mut out = BTreeSet::new();
    for a in snap.assignments() {
        if a.resource_id != resource {
            continue;
        }
        for p in facets.associations.pairs() {
            if p.tag == a.tag {
                out.insert((p.facet_value.clone(), p.speaker_id.clone()));
            }
        }
    }
    out
}

fn contains_phrase(text: &str, phrase: &[String]) -> bool {
    let ws = fm_core::words(text);
    !phrase.is_empty() && ws.windows(phrase.len()).any(|w| w == phrase)
}

/// Linear scan over every resource: lexical matches, annotations, J
/// support, filters and ordering all recomputed from raw records.
pub fn naive_search(
    view: &KnowledgeView,
    tags: &BTreeSet<NormalizedTag>,
    jm: &JointMeaning,
    filters: &[FacetValueRef],
) -> Vec<ExpectedHit> {
    let snap = &view.corpus;
    let graph = Graph::of(&view.ontology);
    let parents = parent_map(&view.facets.taxonomy);
    let all: Vec<_> = snap.assignments().collect();
    let mut hits = Vec::new();
    for r in snap.resources() {
        let mut lex = 0usize;
        for t in tags {
            let phrase = fm_core::words(t.as_str());
            let in_text = contains_phrase(&r.title, &phrase) || contains_phrase(&r.body, &phrase);
            let tagged = all.iter().any(|a| a.resource_id == r.id && &a.tag == t);
            if in_text || tagged {
                lex += 1;
            }
        }
        let annotations = naive_annotations(snap, &view.facets, &r.id);
        let support = jm
            .links
            .iter()
            .filter(|l| {
                annotations.iter().any(|(v, s)| {
                    (v == &l.pair.facet_value && s == &l.pair.speaker_id)
                        || graph.grounding(v).as_deref() == Some(l.concept.as_str())
                })
            })
            .count();
        if lex == 0 && support == 0 {
            continue;
        }
        if !filters.iter().all(|f| {
            annotations
                .iter()
                .any(|(v, _)| is_ancestor_or_self(&parents, f, v))
        }) {
            continue;
        }
        let jms = if jm.links.is_empty() {
            0.0
        } else {
            support as f64 / jm.links.len() as f64
        };
        let score = view.params.alpha * (lex as f64 / tags.len() as f64) + view.params.beta * jms;
        hits.push((
            all.iter().filter(|a| a.resource_id == r.id).count(),
            ExpectedHit {
                id: r.id.clone(),
                score,
                annotations,
                support,
            },
        ));
    }
    hits.sort_by(|(pa, a), (pb, b)| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(pb.cmp(pa))
            .then(a.id.cmp(&b.id))
    });
    hits.into_iter().map(|(_, h)| h).collect()
}

// ------------------------------------------------------------ random worlds

pub struct WorldSpec {
    pub concepts: usize,
    pub resources: usize,
    pub assignments: usize,
    pub associations: usize,
    pub users: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            concepts: 20,
            resources: 40,
            assignments: 120,
            associations: 40,
            users: 5,
        }
    }
}

pub struct World {
    pub corpus: CorpusStore,
    pub facets: FacetModel,
    pub ontology: Ontology,
}

impl World {
    pub fn view(&self, weights: MatcherWeights) -> KnowledgeView {
        KnowledgeView {
            corpus: self.corpus.snapshot(),
            facets: std::sync::Arc::new(self.facets.clone()),
            ontology: std::sync::Arc::new(self.ontology.clone()),
            weights: std::sync::Arc::new(weights),
            params: SearchParams::default(),
        }
    }
}

pub fn phrase(rng: &mut impl Rng) -> String {
    let n = rng.random_range(1..=2);
    (0..n)
        .map(|_| *VOCAB.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_taxonomy(rng: &mut impl Rng) -> Taxonomy {
    let mut records = Vec::new();
    for g in 0..3 {
        let group = format!("G{g}");
        records.push(TaxonomyRecord {
            group: group.clone(),
            value: String::new(),
            parent: String::new(),
        });
        let n = rng.random_range(3..=6);
        for v in 0..n {
            let parent = if v > 0 && rng.random_bool(0.5) {
                format!("V{}", rng.random_range(0..v))
            } else {
                String::new()
            };
            records.push(TaxonomyRecord {
                group: group.clone(),
                value: format!("V{v}"),
                parent,
            });
        }
    }
    Taxonomy::from_records(&records).unwrap()
}

pub fn random_ontology_text(rng: &mut impl Rng, n: usize, taxonomy: &Taxonomy) -> String {
    let mut lines = Vec::new();
    for i in 0..n {
        lines.push(format!("C{i} label \"{}\"", phrase(rng)));
        if i > 0 && rng.random_bool(0.75) {
            lines.push(format!("C{i} isA C{}", rng.random_range(0..i)));
            if i > 1 && rng.random_bool(0.15) {
                lines.push(format!("C{i} isA C{}", rng.random_range(0..i)));
            }
        }
        if i > 0 && rng.random_bool(0.05) {
            lines.push(format!("C{i} sameAs C{}", rng.random_range(0..i)));
        }
    }
    for v in taxonomy.all_values() {
        if rng.random_bool(0.85) {
            lines.push(format!("C{} facetOf {v}", rng.random_range(0..n)));
            if rng.random_bool(0.05) {
                lines.push(format!("C{} facetOf {v}", rng.random_range(0..n)));
            }
        }
    }
    lines.join("\n")
}

pub fn random_world(seed: u64, spec: &WorldSpec) -> World {
    let mut rng = rng(seed);
    let taxonomy = random_taxonomy(&mut rng);
    let mut ontology = Ontology::parse(
        &random_ontology_text(&mut rng, spec.concepts, &taxonomy),
        Some(&taxonomy),
    )
    .unwrap();
    ontology.version = 1;

    let sentence = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| {
        let n = rng.random_range(lo..=hi);
        (0..n)
            .map(|_| *VOCAB.choose(rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let resources: Vec<Resource> = (0..spec.resources)
        .map(|i| Resource {
            id: format!("r{i:04}"),
            title: sentence(&mut rng, 1, 4),
            body: sentence(&mut rng, 0, 8),
            content_type: ContentType::Text,
        })
        .collect();
    let assignments: Vec<AssignmentRecord> = (0..spec.assignments)
        .map(|k| AssignmentRecord {
            user_id: format!("u{}", rng.random_range(0..spec.users)),
            resource_id: format!("r{:04}", rng.random_range(0..spec.resources)),
            tag: phrase(&mut rng),
            timestamp: ts(k as i64),
        })
        .collect();
    let mut corpus = CorpusStore::new();
    corpus.ingest(resources, assignments).unwrap();

    let values: Vec<FacetValueRef> = taxonomy.all_values().collect();
    let records: Vec<AssociationRecord> = (0..spec.associations)
        .map(|k| {
            let v = values.choose(&mut rng).unwrap().clone();
            AssociationRecord {
                tag: phrase(&mut rng),
                group: v.group,
                value: v.value,
                speaker_id: format!("u{}", rng.random_range(0..spec.users)),
                asserted_at: ts(k as i64),
            }
        })
        .collect();
    let mut facets = FacetModel {
        taxonomy: taxonomy.clone(),
        ..FacetModel::default()
    };
    facets
        .associations
        .apply_records(&taxonomy, &records)
        .unwrap();
    facets.version = 1;

    World {
        corpus,
        facets,
        ontology,
    }
}

/// A random value from a random group, plus a value from the same group that
/// conflicts with it when one exists.
pub fn conflicting_pair(
    rng: &mut impl Rng,
    taxonomy: &Taxonomy,
) -> Option<(FacetValueRef, FacetValueRef)> {
    let parents = parent_map(taxonomy);
    let values: Vec<FacetValueRef> = taxonomy.all_values().collect();
    let mut pairs = Vec::new();
    for a in &values {
        for b in &values {
            if conflicting(&parents, a, b) {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    pairs.choose(rng).cloned()
}

pub struct FixpointCase {
    pub taxonomy: Taxonomy,
    pub ontology: Ontology,
    pub l0: Vec<CandidateLink>,
    pub commitments: Vec<FacetValueRef>,
}

/// Up to 30 concepts, up to 50 candidate links, up to 3 commitments.
pub fn random_fixpoint_case(seed: u64) -> FixpointCase {
    let mut rng = rng(seed);
    let taxonomy = random_taxonomy(&mut rng);
    let n = rng.random_range(3..=30);
    let ontology = Ontology::parse(
        &random_ontology_text(&mut rng, n, &taxonomy),
        Some(&taxonomy),
    )
    .unwrap();
    let concepts: Vec<String> = ontology.concepts().map(|c| c.id.clone()).collect();
    let values: Vec<FacetValueRef> = taxonomy.all_values().collect();

    let mut l0 = Vec::new();
    let budget = rng.random_range(0..=50);
    let mut k = 0;
    while l0.len() < budget && k < 200 {
        k += 1;
        let v = values.choose(&mut rng).unwrap().clone();
        let Ok(g) = ontology.concept_for_facet_value(&v) else {
            continue;
        };
        let pair = TagFacetPair {
            tag: fm_core::normalize_tag(&phrase(&mut rng)).unwrap(),
            facet_value: v,
            speaker_id: format!("u{}", rng.random_range(0..4)),
            asserted_at: ts(k),
        };
        let mut targets = Vec::new();
        if rng.random_bool(0.85) {
            targets.push(g.id.clone());
        }
        for _ in 0..rng.random_range(0..4) {
            targets.push(concepts.choose(&mut rng).unwrap().clone());
        }
        for c in targets {
            if l0.len() < budget {
                l0.push(CandidateLink {
                    pair: pair.clone(),
                    concept: c,
                    dissimilarity: rng.random_range(0.0..0.35),
                    grounding: g.id.clone(),
                });
            }
        }
    }
    l0.sort();
    l0.dedup();

    let mut groups: Vec<String> = taxonomy.groups().map(str::to_string).collect();
    let mut commitments = Vec::new();
    for _ in 0..rng.random_range(0..=3) {
        if groups.is_empty() {
            break;
        }
        let g = groups.remove(rng.random_range(0..groups.len()));
        let in_group: Vec<&FacetValueRef> = values.iter().filter(|v| v.group == g).collect();
        commitments.push((*in_group.choose(&mut rng).unwrap()).clone());
    }
    FixpointCase {
        taxonomy,
        ontology,
        l0,
        commitments,
    }
}
