use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Directed follow graph. An edge `a -> b` means `a` follows `b`, so `b`
/// belongs to the ego network S_a and influences `a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SocialGraph {
    followees: Vec<Vec<usize>>,
    num_edges: usize,
}

impl SocialGraph {
    pub fn new(num_users: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut followees = vec![Vec::new(); num_users];
        for (a, b) in edges {
            for id in [a, b] {
                if id >= num_users {
                    return Err(Error::UnknownId {
                        kind: "user",
                        id,
                        count: num_users,
                    });
                }
            }
            if a == b {
                return Err(Error::Data(format!("self-loop on user {a}")));
            }
            followees[a].push(b);
        }
        Ok(Self::from_lists(followees))
    }

    pub fn empty(num_users: usize) -> Self {
        Self::from_lists(vec![Vec::new(); num_users])
    }

    /// Caller guarantees ids are in range and there are no self loops.
    pub(crate) fn from_lists(mut followees: Vec<Vec<usize>>) -> Self {
        let mut num_edges = 0;
        for list in followees.iter_mut() {
            list.sort_unstable();
            list.dedup();
            num_edges += list.len();
        }
        Self {
            followees,
            num_edges,
        }
    }

    pub fn num_users(&self) -> usize {
        self.followees.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Sorted ego network S_a.
    pub fn followees(&self, user: usize) -> &[usize] {
        &self.followees[user]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.followees
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().map(move |&b| (a, b)))
    }

    /// Fraction of ordered user pairs that are follow links.
    pub fn link_density(&self) -> f64 {
        let m = self.num_users();
        if m < 2 {
            return 0.0;
        }
        self.num_edges as f64 / (m as f64 * (m as f64 - 1.0))
    }

    /// Users reachable from `start` in at most `hops` follow steps,
    /// including `start` itself. Sorted.
    pub fn within_hops(&self, start: usize, hops: usize) -> Vec<usize> {
        self.within_hops_of(std::slice::from_ref(&start), hops)
    }

    /// Multi-source variant of [`within_hops`](Self::within_hops).
    pub fn within_hops_of(&self, sources: &[usize], hops: usize) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.num_users()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if depth[s] == usize::MAX {
                depth[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(a) = queue.pop_front() {
            if depth[a] == hops {
                continue;
            }
            for &b in &self.followees[a] {
                if depth[b] == usize::MAX {
                    depth[b] = depth[a] + 1;
                    queue.push_back(b);
                }
            }
        }
        depth
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != usize::MAX)
            .map(|(a, _)| a)
            .collect()
    }
}
