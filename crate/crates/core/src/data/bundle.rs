use sha2::{Digest, Sha256};

use super::{write_features, write_interactions, write_social};
use super::{FeatureTable, InteractionMatrix, SocialGraph};
use crate::error::{Error, Result};

/// Everything the model consumes: the three interaction splits, the follow
/// graph, and optional user / item features.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train: InteractionMatrix,
    pub validation: InteractionMatrix,
    pub test: InteractionMatrix,
    pub social: SocialGraph,
    pub user_features: Option<FeatureTable>,
    pub item_features: Option<FeatureTable>,
}

impl DatasetBundle {
    /// A bundle with all interactions in train and nothing held out.
    pub fn train_only(train: InteractionMatrix, social: SocialGraph) -> Self {
        let (m, n) = (train.num_users(), train.num_items());
        Self {
            train,
            validation: InteractionMatrix::empty(m, n),
            test: InteractionMatrix::empty(m, n),
            social,
            user_features: None,
            item_features: None,
        }
    }

    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.train.num_items()
    }

    /// Checks dimension agreement and split disjointness.
    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.num_users(), self.num_items());
        for (name, split) in [("validation", &self.validation), ("test", &self.test)] {
            if split.num_users() != m || split.num_items() != n {
                return Err(Error::Data(format!(
                    "{name} split is {}x{}, train is {m}x{n}",
                    split.num_users(),
                    split.num_items()
                )));
            }
        }
        if self.social.num_users() != m {
            return Err(Error::Data(format!(
                "social graph has {} users, interactions have {m}",
                self.social.num_users()
            )));
        }
        for (name, table, count) in [
            ("user", &self.user_features, m),
            ("item", &self.item_features, n),
        ] {
            if let Some(t) = table {
                if t.len() != count {
                    return Err(Error::Data(format!(
                        "{name} feature table has {} rows, expected {count}",
                        t.len()
                    )));
                }
            }
        }
        let pairs = [
            ("train", &self.train, "validation", &self.validation),
            ("train", &self.train, "test", &self.test),
            ("validation", &self.validation, "test", &self.test),
        ];
        for (na, a, nb, b) in pairs {
            if let Some((u, i)) = a.edges().find(|&(u, i)| b.contains(u, i)) {
                return Err(Error::Data(format!(
                    "edge ({u},{i}) appears in both {na} and {nb}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the user rated the item in any split.
    pub fn is_rated(&self, user: usize, item: usize) -> bool {
        self.train.contains(user, item)
            || self.validation.contains(user, item)
            || self.test.contains(user, item)
    }

    /// SHA-256 over the canonical text serialization of every component.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut buf = Vec::new();
        let sections: [(&str, &InteractionMatrix); 3] = [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ];
        for (name, m) in sections {
            buf.extend_from_slice(format!("[{name}]\n").as_bytes());
            write_interactions(m, &mut buf).expect("write to Vec");
        }
        buf.extend_from_slice(b"[social]\n");
        write_social(&self.social, &mut buf).expect("write to Vec");
        for (name, table) in [("user_features", &self.user_features), ("item_features", &self.item_features)] {
            buf.extend_from_slice(format!("[{name}]\n").as_bytes());
            if let Some(t) = table {
                write_features(t, &mut buf).expect("write to Vec");
            }
        }
        Sha256::digest(&buf).into()
    }
}
