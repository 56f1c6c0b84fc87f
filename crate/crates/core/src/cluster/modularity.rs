//! Weighted Newman-Girvan modularity and its maximization.
//!
//! Small graphs are solved exactly by branch and bound over restricted growth
//! strings; larger ones use greedy agglomeration followed by single-vertex
//! moves. Among partitions of equal modularity the one with fewer groups wins,
//! then the lexicographically smallest sequence of sorted member lists.

/// Graphs with at most this many vertices are partitioned exactly.
pub const DEFAULT_EXACT_LIMIT: usize = 15;

/// Modularity values closer than this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Dense symmetric weight matrix with an empty diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    w: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph {
            n,
            w: vec![0.0; n * n],
        }
    }

    /// Adds `weight` to the undirected edge `{a, b}`. Loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize, weight: f64) {
        if a == b {
            return;
        }
        self.w[a * self.n + b] += weight;
        self.w[b * self.n + a] += weight;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.w[a * self.n + b]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.w[i * self.n..(i + 1) * self.n].iter().sum()
    }

    /// Sum of all degrees, i.e. twice the total edge weight.
    pub fn total_degree(&self) -> f64 {
        (0..self.n).map(|i| self.degree(i)).sum()
    }
}

/// Sorts members and orders groups by their smallest member.
pub fn canonical(mut groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    groups.retain(|g| !g.is_empty());
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort();
    groups
}

/// Modularity of a partition given as member lists, evaluated in canonical
/// order so equal partitions always produce bit-identical values.
pub fn modularity(graph: &WeightedGraph, groups: &[Vec<usize>]) -> f64 {
    let two_m = graph.total_degree();
    if two_m == 0.0 {
        return 0.0;
    }
    let groups = canonical(groups.to_vec());
    let mut q = 0.0;
    for g in &groups {
        let mut internal = 0.0;
        let mut degree = 0.0;
        for &i in g {
            degree += graph.degree(i);
            for &j in g {
                internal += graph.weight(i, j);
            }
        }
        q += internal / two_m - (degree / two_m) * (degree / two_m);
    }
    q
}

fn labels_to_groups(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); k];
    for (v, &c) in labels.iter().enumerate() {
        groups[c].push(v);
    }
    canonical(groups)
}

/// Picks the winner among candidate partitions: highest modularity, then
/// fewer groups, then lexicographically smallest.
fn select_best(graph: &WeightedGraph, candidates: Vec<Vec<Vec<usize>>>) -> Vec<Vec<usize>> {
    let scored: Vec<(f64, Vec<Vec<usize>>)> = candidates
        .into_iter()
        .map(|c| {
            let c = canonical(c);
            (modularity(graph, &c), c)
        })
        .collect();
    let q_max = scored.iter().map(|(q, _)| *q).fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .filter(|(q, _)| *q >= q_max - TIE_TOLERANCE)
        .map(|(_, c)| c)
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
        .expect("at least one candidate")
}

/// Returns a modularity-maximizing partition, exact when `n <= exact_limit`.
pub fn partition(graph: &WeightedGraph, exact_limit: usize) -> Vec<Vec<usize>> {
    match graph.n() {
        0 => Vec::new(),
        1 => vec![vec![0]],
        n if n <= exact_limit => exact_partition(graph),
        _ => greedy_partition(graph),
    }
}

/// Exact maximization by branch and bound.
pub fn exact_partition(graph: &WeightedGraph) -> Vec<Vec<usize>> {
    let n = graph.n();
    if n <= 1 {
        return (0..n).map(|i| vec![i]).collect();
    }
    let two_m = graph.total_degree();
    if two_m == 0.0 {
        // No edges: every partition scores 0, the single group is the tie winner.
        return vec![(0..n).collect()];
    }
    let seed = greedy_partition(graph);
    BranchAndBound::new(graph).solve(seed)
}

struct BranchAndBound<'g> {
    graph: &'g WeightedGraph,
    n: usize,
    /// Assignment order (positions -> vertex).
    order: Vec<usize>,
    /// Modularity matrix B restricted to pairs, indexed by position.
    b: Vec<f64>,
    /// Sum of positive B over pairs whose positions are both >= p.
    tail_positive: Vec<f64>,
    tol: f64,
    best: f64,
    candidates: Vec<(f64, Vec<usize>)>,
    labels: Vec<usize>,
    /// gain[p * n + k]: sum of B between unassigned position p and cluster k.
    gain: Vec<f64>,
}

impl<'g> BranchAndBound<'g> {
    fn new(graph: &'g WeightedGraph) -> Self {
        let n = graph.n();
        let two_m = graph.total_degree();
        let degrees: Vec<f64> = (0..n).map(|i| graph.degree(i)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| degrees[b].total_cmp(&degrees[a]).then(a.cmp(&b)));

        let mut b = vec![0.0; n * n];
        let mut scale = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    let (i, j) = (order[p], order[q]);
                    let v = graph.weight(i, j) - degrees[i] * degrees[j] / two_m;
                    b[p * n + q] = v;
                    scale += v.abs();
                }
            }
        }
        let mut tail_positive = vec![0.0; n + 1];
        for p in (0..n).rev() {
            let row: f64 = (p + 1..n).map(|q| b[p * n + q].max(0.0)).sum();
            tail_positive[p] = tail_positive[p + 1] + row;
        }
        BranchAndBound {
            graph,
            n,
            order,
            b,
            tail_positive,
            tol: 1e-9 * (scale + f64::MIN_POSITIVE),
            best: f64::NEG_INFINITY,
            candidates: Vec::new(),
            labels: vec![usize::MAX; n],
            gain: vec![0.0; n * n],
        }
    }

    fn objective(&self, groups: &[Vec<usize>]) -> f64 {
        let mut pos = vec![0; self.n];
        for (p, &v) in self.order.iter().enumerate() {
            pos[v] = p;
        }
        let mut f = 0.0;
        for g in groups {
            for (x, &i) in g.iter().enumerate() {
                for &j in &g[x + 1..] {
                    f += self.b[pos[i] * self.n + pos[j]];
                }
            }
        }
        f
    }

    fn solve(mut self, seed: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
        self.best = self.objective(&seed);
        self.search(0, 0, 0.0);
        let best = self.best;
        let tol = self.tol;
        let order = self.order.clone();
        let candidates: Vec<Vec<Vec<usize>>> = self
            .candidates
            .into_iter()
            .filter(|(f, _)| *f >= best - tol)
            .map(|(_, labels_by_pos)| {
                let mut labels = vec![0; labels_by_pos.len()];
                for (p, &c) in labels_by_pos.iter().enumerate() {
                    labels[order[p]] = c;
                }
                labels_to_groups(&labels)
            })
            .collect();
        let mut all = candidates;
        all.push(seed);
        select_best(self.graph, all)
    }

    fn search(&mut self, pos: usize, clusters: usize, value: f64) {
        let n = self.n;
        if pos == n {
            if value >= self.best - self.tol {
                if value > self.best {
                    self.best = value;
                    if self.candidates.len() > 64 {
                        let (best, tol) = (self.best, self.tol);
                        self.candidates.retain(|(f, _)| *f >= best - tol);
                    }
                }
                self.candidates.push((value, self.labels.clone()));
            }
            return;
        }
        // Upper bound on what the remaining positions can add.
        let mut bound = value + self.tail_positive[pos];
        for p in pos..n {
            let row = &self.gain[p * n..p * n + clusters];
            bound += row.iter().copied().fold(0.0, f64::max);
        }
        if bound < self.best - self.tol {
            return;
        }

        let mut options: Vec<usize> = (0..clusters).collect();
        options.sort_by(|&a, &b| {
            self.gain[pos * n + b]
                .total_cmp(&self.gain[pos * n + a])
                .then(a.cmp(&b))
        });
        options.push(clusters);
        for k in options {
            let delta = if k < clusters { self.gain[pos * n + k] } else { 0.0 };
            self.labels[pos] = k;
            for p in pos + 1..n {
                self.gain[p * n + k] += self.b[p * n + pos];
            }
            let next_clusters = clusters.max(k + 1);
            self.search(pos + 1, next_clusters, value + delta);
            for p in pos + 1..n {
                self.gain[p * n + k] -= self.b[p * n + pos];
            }
            if k == clusters {
                // Restore exact zeros for the unused cluster column.
                for p in pos + 1..n {
                    self.gain[p * n + k] = 0.0;
                }
            }
        }
        self.labels[pos] = usize::MAX;
    }
}

/// Greedy agglomeration followed by single-vertex moves to a local optimum.
/// Never returns a partition worse than the single group.
pub fn greedy_partition(graph: &WeightedGraph) -> Vec<Vec<usize>> {
    let n = graph.n();
    if n <= 1 {
        return (0..n).map(|i| vec![i]).collect();
    }
    let two_m = graph.total_degree();
    if two_m == 0.0 {
        return vec![(0..n).collect()];
    }
    let degrees: Vec<f64> = (0..n).map(|i| graph.degree(i)).collect();

    // Agglomeration over community-level weights.
    let mut alive: Vec<bool> = vec![true; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut between: Vec<f64> = (0..n * n).map(|x| graph.weight(x / n, x % n)).collect();
    let mut share: Vec<f64> = degrees.iter().map(|d| d / two_m).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if !alive[a] {
                continue;
            }
            for b in a + 1..n {
                if !alive[b] || between[a * n + b] == 0.0 {
                    continue;
                }
                let delta = 2.0 * (between[a * n + b] / two_m - share[a] * share[b]);
                if delta > TIE_TOLERANCE && best.is_none_or(|(d, _, _)| delta > d) {
                    best = Some((delta, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { break };
        alive[b] = false;
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        share[a] += share[b];
        for c in 0..n {
            if c != a && alive[c] {
                let w = between[a * n + c] + between[b * n + c];
                between[a * n + c] = w;
                between[c * n + a] = w;
            }
        }
    }

    let mut labels = vec![0usize; n];
    for (c, group) in members.iter().enumerate() {
        for &v in group {
            labels[v] = c;
        }
    }
    refine(graph, &degrees, two_m, &mut labels);

    let refined = labels_to_groups(&labels);
    select_best(graph, vec![refined, vec![(0..n).collect()]])
}

/// Moves single vertices to the community with the largest modularity gain
/// until no move improves by more than the tie tolerance.
fn refine(graph: &WeightedGraph, degrees: &[f64], two_m: f64, labels: &mut [usize]) {
    let n = graph.n();
    let mut community_degree = vec![0.0; n];
    for v in 0..n {
        community_degree[labels[v]] += degrees[v];
    }
    // Bounded: every accepted move strictly increases modularity.
    let mut improved = true;
    let mut rounds = 0;
    while improved && rounds < 10_000 {
        improved = false;
        rounds += 1;
        for v in 0..n {
            let home = labels[v];
            let mut links = vec![0.0; n];
            for u in 0..n {
                if u != v {
                    links[labels[u]] += graph.weight(v, u);
                }
            }
            let kv = degrees[v];
            // Gain of inserting v (removed from home) into community c.
            let gain = |c: usize, links_c: f64| {
                let tot = if c == home { community_degree[c] - kv } else { community_degree[c] };
                links_c / two_m - tot * kv / (two_m * two_m)
            };
            let stay = gain(home, links[home]);
            let empty = labels.iter().enumerate().find_map(|(c, _)| {
                (community_degree[c] == 0.0 && !labels.contains(&c)).then_some(c)
            });
            let mut best = (stay, home);
            for c in 0..n {
                let candidate = if c == home || links[c] > 0.0 {
                    Some(gain(c, links[c]))
                } else if Some(c) == empty {
                    Some(0.0)
                } else {
                    None
                };
                if let Some(g) = candidate {
                    if g > best.0 + TIE_TOLERANCE {
                        best = (g, c);
                    }
                }
            }
            if best.1 != home {
                community_degree[home] -= kv;
                community_degree[best.1] += kv;
                labels[v] = best.1;
                improved = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two triangles joined by a weak bridge.
    fn two_triangles() -> WeightedGraph {
        let mut g = WeightedGraph::new(6);
        for &(a, b, w) in &[
            (0, 1, 1.0),
            (1, 2, 0.9),
            (0, 2, 0.8),
            (3, 4, 1.0),
            (4, 5, 0.7),
            (3, 5, 0.95),
            (2, 3, 0.01),
        ] {
            g.add_edge(a, b, w);
        }
        g
    }

    /// All set partitions of `0..n` as restricted growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(labels: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
            if labels.len() == n {
                out.push(labels.clone());
                return;
            }
            for k in 0..=max + 1 {
                labels.push(k);
                rec(labels, n, max.max(k), out);
                labels.pop();
            }
        }
        let mut out = Vec::new();
        if n > 0 {
            rec(&mut vec![0], n, 0, &mut out);
        }
        out
    }

    /// Independent evaluation: (1/2m) Σ_ij (A_ij - k_i k_j / 2m) δ(c_i, c_j).
    fn q_reference(g: &WeightedGraph, labels: &[usize]) -> f64 {
        let n = g.n();
        let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g.weight(i, j)).sum()).collect();
        let two_m: f64 = k.iter().sum();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == labels[j] {
                    q += g.weight(i, j) - k[i] * k[j] / two_m;
                }
            }
        }
        q / two_m
    }

    fn brute_force_best(g: &WeightedGraph) -> (f64, Vec<Vec<usize>>) {
        let parts = all_partitions(g.n());
        let scored: Vec<(f64, Vec<Vec<usize>>)> =
            parts.iter().map(|l| (q_reference(g, l), labels_to_groups(l))).collect();
        let q_max = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        let best = scored
            .into_iter()
            .filter(|s| s.0 >= q_max - TIE_TOLERANCE)
            .map(|s| s.1)
            .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
            .unwrap();
        (q_max, best)
    }

    fn random_connected(rng: &mut ChaCha8Rng, n: usize, density: f64) -> WeightedGraph {
        let mut g = WeightedGraph::new(n);
        for v in 1..n {
            let u = rng.gen_range(0..v);
            g.add_edge(u, v, rng.gen_range(0.01..2.0));
        }
        for a in 0..n {
            for b in a + 1..n {
                if g.weight(a, b) == 0.0 && rng.gen_bool(density) {
                    g.add_edge(a, b, rng.gen_range(0.01..2.0));
                }
            }
        }
        g
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=6).map(|n| all_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
    }

    #[test]
    fn canonical_evaluation_matches_reference_formula() {
        let g = two_triangles();
        for labels in all_partitions(6) {
            let groups = labels_to_groups(&labels);
            assert!((modularity(&g, &groups) - q_reference(&g, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_triangles_split_at_bridge() {
        let g = two_triangles();
        let (q_max, oracle) = brute_force_best(&g);
        let got = exact_partition(&g);
        assert_eq!(got, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(got, oracle);
        assert!((modularity(&g, &got) - q_max).abs() < 1e-12);
        assert_eq!(greedy_partition(&g), got);
    }

    #[test]
    fn exact_matches_brute_force_up_to_nine_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..120 {
            let n = 2 + trial % 8;
            let density = [0.1, 0.3, 0.6][trial % 3];
            let g = random_connected(&mut rng, n, density);
            let (q_max, oracle) = brute_force_best(&g);
            let got = exact_partition(&g);
            assert_eq!(got, oracle, "trial {trial}");
            assert!((modularity(&g, &got) - q_max).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_modularity_prefers_fewer_groups() {
        // Single edge: one group scores 0, two singletons score -0.5.
        let mut g = WeightedGraph::new(2);
        g.add_edge(0, 1, 1.0);
        assert_eq!(exact_partition(&g), vec![vec![0, 1]]);
        // Path of 3 equal edges (4 vertices): {01}{23} is the unique optimum.
        let mut g = WeightedGraph::new(4);
        g.add_edge(0, 1, 1.0);
        g.add_edge(1, 2, 1.0);
        g.add_edge(2, 3, 1.0);
        assert_eq!(exact_partition(&g), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn greedy_never_below_single_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.gen_range(2..40);
            let g = random_connected(&mut rng, n, 0.15);
            let groups = greedy_partition(&g);
            assert!(modularity(&g, &groups) >= modularity(&g, &[(0..n).collect()]) - 1e-15);
            let mut all: Vec<usize> = groups.concat();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn fifteen_vertices_is_tractable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for density in [0.05, 0.2, 0.5] {
            let g = random_connected(&mut rng, 15, density);
            let exact = exact_partition(&g);
            let greedy = greedy_partition(&g);
            assert!(modularity(&g, &exact) >= modularity(&g, &greedy) - TIE_TOLERANCE);
        }
    }
}
