use crate::error::{Error, Result};

/// Sparse binary user -> item positive feedback.
///
/// Stored twice (by user and by item) so both history lookups and item
/// degree queries are slices. Both views always encode the same edge set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InteractionMatrix {
    num_users: usize,
    num_items: usize,
    by_user: Vec<Vec<usize>>,
    by_item: Vec<Vec<usize>>,
    num_edges: usize,
}

impl InteractionMatrix {
    /// Builds a matrix from `(user, item)` pairs, dropping duplicates.
    pub fn new(
        num_users: usize,
        num_items: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut by_user = vec![Vec::new(); num_users];
        for (u, i) in edges {
            if u >= num_users {
                return Err(Error::UnknownId {
                    kind: "user",
                    id: u,
                    count: num_users,
                });
            }
            if i >= num_items {
                return Err(Error::UnknownId {
                    kind: "item",
                    id: i,
                    count: num_items,
                });
            }
            by_user[u].push(i);
        }
        Ok(Self::from_user_lists(num_items, by_user))
    }

    pub fn empty(num_users: usize, num_items: usize) -> Self {
        Self::from_user_lists(num_items, vec![Vec::new(); num_users])
    }

    /// Caller guarantees all item ids are `< num_items`.
    pub(crate) fn from_user_lists(num_items: usize, mut by_user: Vec<Vec<usize>>) -> Self {
        let mut by_item = vec![Vec::new(); num_items];
        let mut num_edges = 0;
        for (u, items) in by_user.iter_mut().enumerate() {
            items.sort_unstable();
            items.dedup();
            num_edges += items.len();
            for &i in items.iter() {
                by_item[i].push(u);
            }
        }
        Self {
            num_users: by_user.len(),
            num_items,
            by_user,
            by_item,
            num_edges,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn is_empty(&self) -> bool {
        self.num_edges == 0
    }

    /// Sorted items the user liked (R_a).
    pub fn user_items(&self, user: usize) -> &[usize] {
        &self.by_user[user]
    }

    /// Sorted users who liked the item.
    pub fn item_users(&self, item: usize) -> &[usize] {
        &self.by_item[item]
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.by_user
            .get(user)
            .is_some_and(|items| items.binary_search(&item).is_ok())
    }

    /// Edges in (user, item) lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.by_user
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
    }

    /// Fraction of the user x item grid that is observed.
    pub fn density(&self) -> f64 {
        if self.num_users == 0 || self.num_items == 0 {
            return 0.0;
        }
        self.num_edges as f64 / (self.num_users as f64 * self.num_items as f64)
    }
}
