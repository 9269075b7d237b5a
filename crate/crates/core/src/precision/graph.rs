use crate::error::{Error, Result};

/// Conditional-independence structure used for a precision matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    Independent,
    Ar1,
    Ar2,
}

impl GraphKind {
    pub fn bandwidth(self) -> usize {
        match self {
            GraphKind::Independent => 0,
            GraphKind::Ar1 => 1,
            GraphKind::Ar2 => 2,
        }
    }
}

/// Undirected graph over the active lead times. Vertex `i` carries the label
/// `lead_times[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionGraph {
    lead_times: Vec<usize>,
    /// Sorted neighbour lists, no self loops.
    adjacency: Vec<Vec<usize>>,
}

impl PrecisionGraph {
    /// Band graph: `i ~ j` iff `|i - j| <= k` and `|t_i - t_j| <= k`.
    pub fn build(kind: GraphKind, lead_times: &[usize]) -> Result<Self> {
        if lead_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("lead times must be strictly increasing"));
        }
        let k = kind.bandwidth();
        let n = lead_times.len();
        let adjacency = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(k);
                let hi = (i + k).min(n.saturating_sub(1));
                (lo..=hi)
                    .filter(|&j| j != i && lead_times[i].abs_diff(lead_times[j]) <= k)
                    .collect()
            })
            .collect();
        Ok(Self {
            lead_times: lead_times.to_vec(),
            adjacency,
        })
    }

    /// Graph from an explicit edge list over `n` vertices labelled `0..n`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::input(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
            if a == b {
                return Err(Error::input("self loops are not allowed"));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            lead_times: (0..n).collect(),
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.lead_times.len()
    }

    pub fn lead_times(&self) -> &[usize] {
        &self.lead_times
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Neighbours of `i` that precede it in the vertex order.
    pub fn earlier_neighbors(&self, i: usize) -> &[usize] {
        let list = &self.adjacency[i];
        &list[..list.partition_point(|&j| j < i)]
    }

    /// True when every vertex's earlier neighbours form a clique, i.e. the
    /// vertex order is a perfect numbering of a decomposable graph.
    pub fn is_perfectly_ordered(&self) -> bool {
        (0..self.n()).all(|i| {
            let earlier = self.earlier_neighbors(i);
            earlier
                .iter()
                .enumerate()
                .all(|(a, &u)| earlier[a + 1..].iter().all(|&v| self.has_edge(u, v)))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_respects_lead_time_gaps() {
        let g = PrecisionGraph::build(GraphKind::Ar1, &[5, 6, 9]).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn independent_has_no_edges() {
        let g = PrecisionGraph::build(GraphKind::Independent, &[1, 2, 3, 4]).unwrap();
        assert_eq!(g.edges().count(), 0);
    }

    #[test]
    fn ar2_on_three_consecutive_is_complete() {
        let g = PrecisionGraph::build(GraphKind::Ar2, &[1, 2, 3]).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn band_graphs_are_perfectly_ordered() {
        let leads = [1, 2, 3, 5, 6, 7, 8, 12, 13, 30];
        for kind in [GraphKind::Independent, GraphKind::Ar1, GraphKind::Ar2] {
            let g = PrecisionGraph::build(kind, &leads).unwrap();
            assert!(g.is_perfectly_ordered());
            for (i, j) in g.edges() {
                assert!(j - i <= kind.bandwidth());
                assert!(leads[j] - leads[i] <= kind.bandwidth());
            }
        }
    }

    #[test]
    fn four_cycle_is_not_perfect() {
        let g = PrecisionGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert!(!g.is_perfectly_ordered());
    }

    #[test]
    fn unsorted_lead_times_are_rejected() {
        assert!(PrecisionGraph::build(GraphKind::Ar1, &[3, 2]).is_err());
    }
}
