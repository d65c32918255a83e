use super::{FeatureTable, InteractionMatrix, SocialGraph};
use crate::error::{Error, Result};

/// Minimum-degree thresholds applied by [`preprocess_filter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    /// Minimum rated items per user.
    pub min_ratings: usize,
    /// Minimum followees per user (|S_a|).
    pub min_links: usize,
    /// Minimum raters per item.
    pub min_item_degree: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_ratings: 2,
            min_links: 2,
            min_item_degree: 2,
        }
    }
}

/// Output of [`preprocess_filter`]: compacted data plus id maps.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub interactions: InteractionMatrix,
    pub social: SocialGraph,
    /// old user id -> new user id
    pub user_map: Vec<Option<usize>>,
    /// old item id -> new item id
    pub item_map: Vec<Option<usize>>,
    /// new user id -> old user id
    pub kept_users: Vec<usize>,
    /// new item id -> old item id
    pub kept_items: Vec<usize>,
}

impl Filtered {
    pub fn remap_user_features(&self, table: &FeatureTable) -> FeatureTable {
        table.select(&self.kept_users)
    }

    pub fn remap_item_features(&self, table: &FeatureTable) -> FeatureTable {
        table.select(&self.kept_items)
    }
}

/// Drops users with too few ratings or links and items with too few raters,
/// repeating until no entity violates a threshold, then compacts ids.
pub fn preprocess_filter(
    interactions: &InteractionMatrix,
    social: &SocialGraph,
    config: FilterConfig,
) -> Result<Filtered> {
    if interactions.num_users() != social.num_users() {
        return Err(Error::Data(format!(
            "interaction users ({}) and social users ({}) disagree",
            interactions.num_users(),
            social.num_users()
        )));
    }
    let mut user_alive = vec![true; interactions.num_users()];
    let mut item_alive = vec![true; interactions.num_items()];

    loop {
        let mut changed = false;
        for u in 0..user_alive.len() {
            if !user_alive[u] {
                continue;
            }
            let ratings = interactions
                .user_items(u)
                .iter()
                .filter(|&&i| item_alive[i])
                .count();
            let links = social
                .followees(u)
                .iter()
                .filter(|&&b| user_alive[b])
                .count();
            if ratings < config.min_ratings || links < config.min_links {
                user_alive[u] = false;
                changed = true;
            }
        }
        for i in 0..item_alive.len() {
            if !item_alive[i] {
                continue;
            }
            let degree = interactions
                .item_users(i)
                .iter()
                .filter(|&&u| user_alive[u])
                .count();
            if degree < config.min_item_degree {
                item_alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let (user_map, kept_users) = compact(&user_alive);
    let (item_map, kept_items) = compact(&item_alive);
    if kept_users.is_empty() || kept_items.is_empty() {
        return Err(Error::Data(format!(
            "filtering removed everything ({} users, {} items left)",
            kept_users.len(),
            kept_items.len()
        )));
    }

    let by_user = kept_users
        .iter()
        .map(|&u| {
            interactions
                .user_items(u)
                .iter()
                .filter_map(|&i| item_map[i])
                .collect()
        })
        .collect();
    let followees = kept_users
        .iter()
        .map(|&u| {
            social
                .followees(u)
                .iter()
                .filter_map(|&b| user_map[b])
                .collect()
        })
        .collect();

    Ok(Filtered {
        interactions: InteractionMatrix::from_user_lists(kept_items.len(), by_user),
        social: SocialGraph::from_lists(followees),
        user_map,
        item_map,
        kept_users,
        kept_items,
    })
}

fn compact(alive: &[bool]) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut map = vec![None; alive.len()];
    let mut kept = Vec::new();
    for (old, _) in alive.iter().enumerate().filter(|(_, &a)| a) {
        map[old] = Some(kept.len());
        kept.push(old);
    }
    (map, kept)
}
