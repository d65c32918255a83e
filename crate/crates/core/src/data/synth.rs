//! Seeded synthetic social-recommendation data with planted clusters.
//!
//! Users and items are assigned to balanced latent clusters. Each user likes
//! the items with the highest (perturbed) affinity to its own latent vector,
//! follows same-cluster users with probability `homophily` (uniformly random
//! users otherwise), and carries features that are a noisy projection of its
//! cluster centroid.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, StandardNormal};

use super::{split, DatasetBundle, FeatureTable, InteractionMatrix, SocialGraph, SplitConfig};
use crate::error::{Error, Result};

const LATENT_RANK: usize = 8;
const PREFERENCE_NOISE: f64 = 0.5;
const FEATURE_NOISE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub dim_user: usize,
    pub dim_item: usize,
    /// Probability that a follow edge stays inside the follower's cluster.
    pub homophily: f64,
    /// Target fraction of the user x item grid that is liked.
    pub density: f64,
    pub num_clusters: usize,
    pub links_per_user: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 200,
            items: 150,
            dim_user: 8,
            dim_item: 8,
            homophily: 0.9,
            density: 0.05,
            num_clusters: 5,
            links_per_user: 5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.items == 0 {
            return Err(Error::Config("synthetic spec needs users > 0 and items > 0".into()));
        }
        if self.num_clusters == 0 {
            return Err(Error::Config("num_clusters must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::Config(format!("homophily {} outside [0,1]", self.homophily)));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(Error::Config(format!("density {} outside (0,1)", self.density)));
        }
        Ok(())
    }
}

/// Unsplit synthetic data plus the planted cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub interactions: InteractionMatrix,
    pub social: SocialGraph,
    pub user_features: FeatureTable,
    pub item_features: FeatureTable,
    pub user_cluster: Vec<usize>,
    pub item_cluster: Vec<usize>,
}

fn balanced_clusters(n: usize, clusters: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % clusters).collect();
    labels.shuffle(rng);
    labels
}

fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

pub fn generate_raw(spec: &SyntheticSpec) -> Result<RawDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (m, n, c) = (spec.users, spec.items, spec.num_clusters);

    let user_cluster = balanced_clusters(m, c, &mut rng);
    let item_cluster = balanced_clusters(n, c, &mut rng);
    let centroids = gaussian(c, LATENT_RANK, 1.0, &mut rng);
    let user_latent = gaussian(m, LATENT_RANK, PREFERENCE_NOISE, &mut rng)
        + &centroids.select(ndarray::Axis(0), &user_cluster);
    let item_latent = gaussian(n, LATENT_RANK, PREFERENCE_NOISE, &mut rng)
        + &centroids.select(ndarray::Axis(0), &item_cluster);
    let affinity = user_latent.dot(&item_latent.t());

    // Liked items: top-n by affinity plus Gumbel noise, a soft-max draw
    // without replacement.
    let gumbel = Gumbel::new(0.0, 1.0).expect("valid gumbel");
    let target = spec.density * n as f64;
    let mut liked = Vec::with_capacity(m);
    for a in 0..m {
        let count = (target * rng.random_range(0.5..1.5)).round().clamp(1.0, n as f64) as usize;
        let mut scored: Vec<(f64, usize)> = (0..n)
            .map(|i| (affinity[[a, i]] + gumbel.sample(&mut rng), i))
            .collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        liked.push(scored.into_iter().take(count).map(|(_, i)| i).collect());
    }
    let interactions = InteractionMatrix::from_user_lists(n, liked);

    let mut members = vec![Vec::new(); c];
    for (a, &k) in user_cluster.iter().enumerate() {
        members[k].push(a);
    }
    let links = spec.links_per_user.min(m.saturating_sub(1));
    let mut followees = Vec::with_capacity(m);
    for a in 0..m {
        let own = &members[user_cluster[a]];
        let mut chosen: Vec<usize> = Vec::with_capacity(links);
        let mut attempts = 0;
        while chosen.len() < links && attempts < 50 * links.max(1) {
            attempts += 1;
            let b = if rng.random::<f64>() < spec.homophily {
                own[rng.random_range(0..own.len())]
            } else {
                rng.random_range(0..m)
            };
            if b != a && !chosen.contains(&b) {
                chosen.push(b);
            }
        }
        followees.push(chosen);
    }
    let social = SocialGraph::from_lists(followees);

    let user_features = project_features(&centroids, &user_cluster, spec.dim_user, &mut rng)?;
    let item_features = project_features(&centroids, &item_cluster, spec.dim_item, &mut rng)?;

    Ok(RawDataset {
        interactions,
        social,
        user_features,
        item_features,
        user_cluster,
        item_cluster,
    })
}

fn project_features(
    centroids: &Array2<f64>,
    labels: &[usize],
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FeatureTable> {
    let projection = gaussian(LATENT_RANK, dim, 1.0 / (LATENT_RANK as f64).sqrt(), rng);
    let clean = centroids.select(ndarray::Axis(0), labels).dot(&projection);
    FeatureTable::new(clean + gaussian(labels.len(), dim, FEATURE_NOISE, rng))
}

/// Generates raw data and splits it with default fractions seeded by
/// `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    let raw = generate_raw(spec)?;
    let mut bundle = split(
        &raw.interactions,
        &SplitConfig {
            seed: spec.seed,
            ..Default::default()
        },
    )?;
    bundle.social = raw.social;
    bundle.user_features = Some(raw.user_features);
    bundle.item_features = Some(raw.item_features);
    Ok(bundle)
}
