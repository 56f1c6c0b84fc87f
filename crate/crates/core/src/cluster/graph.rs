//! The directed graph linking each tag to its most similar tag(s).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::normalize::FilmTagMatrix;

use super::modularity::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedEdge {
    pub from: u32,
    pub to: u32,
    pub weight: f64,
}

/// Tags are vertices; edges are sorted by `(from, to)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TagGraph {
    n_vertices: usize,
    edges: Vec<DirectedEdge>,
}

impl TagGraph {
    pub fn from_edges(n_vertices: usize, mut edges: Vec<DirectedEdge>) -> Result<Self> {
        edges.sort_by_key(|e| (e.from, e.to));
        for e in &edges {
            if e.from == e.to {
                return Err(Error::Contract(format!("self-edge on tag {}", e.from)));
            }
            if e.from as usize >= n_vertices || e.to as usize >= n_vertices {
                return Err(Error::Contract(format!("edge {}->{} out of range", e.from, e.to)));
            }
            if !(e.weight > 0.0 && e.weight <= 1.0) {
                return Err(Error::Contract(format!(
                    "edge {}->{} has weight {} outside (0, 1]",
                    e.from, e.to, e.weight
                )));
            }
        }
        if edges.windows(2).any(|w| (w[0].from, w[0].to) == (w[1].from, w[1].to)) {
            return Err(Error::Contract("duplicate edge".into()));
        }
        Ok(TagGraph { n_vertices, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.edges
    }

    pub fn out_edges(&self, from: u32) -> &[DirectedEdge] {
        let lo = self.edges.partition_point(|e| e.from < from);
        let hi = self.edges.partition_point(|e| e.from <= from);
        &self.edges[lo..hi]
    }

    /// `w(a, b) + w(b, a)` over the vertices of `component`, indexed locally.
    pub fn undirected(&self, component: &[u32]) -> WeightedGraph {
        let mut g = WeightedGraph::new(component.len());
        for (a, &v) in component.iter().enumerate() {
            for e in self.out_edges(v) {
                if let Ok(b) = component.binary_search(&e.to) {
                    g.add_edge(a, b, e.weight);
                }
            }
        }
        g
    }
}

fn cosine_from_counts(shared: u32, n1: u32, n2: u32) -> f64 {
    shared as f64 / (n1 as f64 * n2 as f64).sqrt()
}

/// Cosine similarity of two binary film columns given as sorted row lists.
pub fn tag_cosine(columns: &[Vec<u32>], l1: usize, l2: usize) -> Result<f64> {
    let (a, b) = (&columns[l1], &columns[l2]);
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract(format!(
            "cosine of tag {} with an empty column",
            if a.is_empty() { l1 } else { l2 }
        )));
    }
    let (mut i, mut j, mut shared) = (0, 0, 0u32);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(cosine_from_counts(shared, a.len() as u32, b.len() as u32))
}

/// Draws an edge from every tag to each tag attaining its maximum cosine.
///
/// Co-occurrence counts come from the film inverted index, so only tags that
/// share a film are ever compared. Maxima are found on exact integer ratios
/// (`shared² / n_other`), so mathematically tied tags all receive an edge.
pub fn build_strong_graph(matrix: &FilmTagMatrix) -> TagGraph {
    let columns = matrix.columns();
    let n_tags = matrix.n_tags();
    let edges: Vec<DirectedEdge> = (0..n_tags)
        .into_par_iter()
        .map_init(
            || (vec![0u32; n_tags], Vec::<u32>::new()),
            |(counts, touched), t| {
                for &film in &columns[t] {
                    for &u in matrix.row(film as usize) {
                        if u as usize != t {
                            if counts[u as usize] == 0 {
                                touched.push(u);
                            }
                            counts[u as usize] += 1;
                        }
                    }
                }
                touched.sort_unstable();
                // shared² · n_best vs best_shared² · n_u decides the ordering.
                let mut best: Vec<u32> = Vec::new();
                let (mut best_shared, mut best_n) = (0u128, 1u128);
                for &u in touched.iter() {
                    let shared = counts[u as usize] as u128;
                    let n_u = columns[u as usize].len() as u128;
                    let lhs = shared * shared * best_n;
                    let rhs = best_shared * best_shared * n_u;
                    if best.is_empty() || lhs > rhs {
                        best.clear();
                        best.push(u);
                        best_shared = shared;
                        best_n = n_u;
                    } else if lhs == rhs {
                        best.push(u);
                    }
                }
                let n_t = columns[t].len() as u32;
                let out: Vec<DirectedEdge> = best
                    .iter()
                    .map(|&u| DirectedEdge {
                        from: t as u32,
                        to: u,
                        weight: cosine_from_counts(
                            counts[u as usize],
                            n_t,
                            columns[u as usize].len() as u32,
                        ),
                    })
                    .collect();
                for &u in touched.iter() {
                    counts[u as usize] = 0;
                }
                touched.clear();
                out
            },
        )
        .flatten()
        .collect();
    TagGraph::from_edges(n_tags, edges).expect("strong graph edges are valid by construction")
}

/// Weakly connected components, each sorted, ordered by smallest vertex.
pub fn weak_components(graph: &TagGraph) -> Vec<Vec<u32>> {
    let n = graph.n_vertices();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let up = parent[parent[x as usize] as usize];
            parent[x as usize] = up;
            x = up;
        }
        x
    }
    for e in graph.edges() {
        let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi as usize] = lo;
        }
    }
    let mut by_root: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
    for v in 0..n as u32 {
        let r = find(&mut parent, v);
        by_root.entry(r).or_default().push(v);
    }
    let mut comps: Vec<Vec<u32>> = by_root.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::TagInfo;

    fn matrix(n_tags: usize, rows: Vec<Vec<u32>>) -> FilmTagMatrix {
        let tags = (0..n_tags)
            .map(|i| TagInfo {
                stem: format!("t{i:02}"),
                label: format!("t{i:02}"),
                user_count: 0,
                film_count: 0,
            })
            .collect();
        let ids = (0..rows.len() as u32).collect();
        FilmTagMatrix::from_parts(ids, tags, rows).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let cols = vec![vec![1, 2], vec![1, 2], vec![5, 6], vec![1, 3], vec![]];
        assert_eq!(tag_cosine(&cols, 0, 1).unwrap(), 1.0);
        assert_eq!(tag_cosine(&cols, 0, 2).unwrap(), 0.0);
        assert!((tag_cosine(&cols, 0, 3).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(tag_cosine(&cols, 0, 4).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn two_tags_link_mutually() {
        let m = matrix(2, vec![vec![0, 1]]);
        let g = build_strong_graph(&m);
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.edges()[0].weight, g.edges()[1].weight);
        assert_eq!(g.edges()[0].weight, 1.0);
    }

    #[test]
    fn ties_receive_all_edges() {
        // a shares 9 films with b and 9 with c (each on 10 films); b and c share one.
        let mut rows = Vec::new();
        for f in 0..9 {
            rows.push(if f == 0 { vec![0, 1, 2] } else { vec![0, 1] });
        }
        for _ in 1..9 {
            rows.push(vec![0, 2]);
        }
        rows.push(vec![1]);
        rows.push(vec![2]);
        let m = matrix(3, rows);
        let cols = m.columns();
        let ab = tag_cosine(&cols, 0, 1).unwrap();
        let ac = tag_cosine(&cols, 0, 2).unwrap();
        assert_eq!(ab, ac);
        let g = build_strong_graph(&m);
        let targets: Vec<u32> = g.out_edges(0).iter().map(|e| e.to).collect();
        assert_eq!(targets, vec![1, 2]);
        for e in g.edges() {
            let expect = tag_cosine(&cols, e.from as usize, e.to as usize).unwrap();
            assert_eq!(e.weight, expect);
        }
    }

    #[test]
    fn isolated_tags_have_no_out_edges() {
        let m = matrix(3, vec![vec![0, 1], vec![2]]);
        let g = build_strong_graph(&m);
        assert!(g.out_edges(2).is_empty());
        assert_eq!(weak_components(&g), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn component_examples() {
        let edgeless = TagGraph::from_edges(5, vec![]).unwrap();
        assert_eq!(weak_components(&edgeless).len(), 5);

        let e = |from, to| DirectedEdge { from, to, weight: 0.5 };
        let chain = TagGraph::from_edges(3, vec![e(0, 1), e(2, 1)]).unwrap();
        assert_eq!(weak_components(&chain), vec![vec![0, 1, 2]]);

        let pairs = TagGraph::from_edges(5, vec![e(0, 3), e(3, 0), e(1, 4), e(4, 1)]).unwrap();
        assert_eq!(weak_components(&pairs), vec![vec![0, 3], vec![1, 4], vec![2]]);
    }

    #[test]
    fn undirected_weights_add_both_directions() {
        let e = |from, to, weight| DirectedEdge { from, to, weight };
        let g = TagGraph::from_edges(3, vec![e(0, 1, 0.4), e(1, 0, 0.4), e(2, 1, 0.3)]).unwrap();
        let u = g.undirected(&[0, 1, 2]);
        assert_eq!(u.weight(0, 1), 0.8);
        assert_eq!(u.weight(1, 2), 0.3);
        assert_eq!(u.weight(2, 1), 0.3);
        assert_eq!(u.weight(0, 2), 0.0);
    }

    #[test]
    fn rejects_invalid_edges() {
        let e = |from, to, weight| DirectedEdge { from, to, weight };
        assert!(TagGraph::from_edges(2, vec![e(0, 0, 0.5)]).is_err());
        assert!(TagGraph::from_edges(2, vec![e(0, 1, 0.0)]).is_err());
        assert!(TagGraph::from_edges(2, vec![e(0, 1, 1.5)]).is_err());
    }
}
