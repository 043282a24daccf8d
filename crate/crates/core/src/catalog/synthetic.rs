//! Seeded desk-scale corpus with a known theme structure.
//!
//! Every item belongs to one theme; each theme owns a block of genres and
//! non-genre features, so items of a theme share most of their encoding.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Catalog, FeatureId, FeatureKind, Item, ItemId, MAX_RATING, MIN_RATING};

pub const GENRES: [&str; 20] = [
    "Action",
    "Adventure",
    "Animation",
    "Biography",
    "Children",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "IMAX",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

pub fn non_genre_features() -> [FeatureId; 8] {
    [
        FeatureId::tag("twist ending"),
        FeatureId::tag("visually stunning"),
        FeatureId::tag("based on a book"),
        FeatureId::tag("dark comedy"),
        FeatureId::new(FeatureKind::Actor, "Ada Marlowe"),
        FeatureId::new(FeatureKind::Actor, "Ben Okafor"),
        FeatureId::new(FeatureKind::Director, "Chen Liu"),
        FeatureId::new(FeatureKind::Director, "Dana Ruiz"),
    ]
}

pub const BUNDLED_SEED: u64 = 20_201_019;

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub items: usize,
    pub themes: usize,
    /// Probability of adding one off-theme genre and, independently, one off-theme
    /// non-genre feature to an item.
    pub off_theme_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            items: 200,
            themes: 5,
            off_theme_rate: 0.1,
            seed: BUNDLED_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub catalog: Catalog,
    pub theme_of: BTreeMap<ItemId, usize>,
}

/// The bundled 200-item corpus (20 genres, 8 non-genre features).
pub fn bundled_corpus() -> Catalog {
    generate(&SyntheticSpec::default()).catalog
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticCorpus {
    assert!(spec.themes >= 1 && spec.themes <= 8, "1..=8 themes supported");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let non_genre = non_genre_features();
    let genres: Vec<FeatureId> = GENRES.iter().map(|g| FeatureId::genre(*g)).collect();

    let genre_core: Vec<Vec<&FeatureId>> = (0..spec.themes)
        .map(|t| genres.iter().skip(t).step_by(spec.themes).collect())
        .collect();
    let other_core: Vec<Vec<&FeatureId>> = (0..spec.themes)
        .map(|t| non_genre.iter().skip(t).step_by(spec.themes).collect())
        .collect();
    let noise = Normal::new(0.0, 0.35).expect("valid normal");

    let mut items = Vec::with_capacity(spec.items);
    let mut theme_of = BTreeMap::new();
    for i in 0..spec.items {
        let theme = i % spec.themes;
        let id = ItemId(i as u32 + 1);
        let mut features = BTreeSet::new();

        let core = &genre_core[theme];
        let n_genres = rng.random_range(2..=3).min(core.len());
        for g in core.choose_multiple(&mut rng, n_genres) {
            features.insert((*g).clone());
        }
        if rng.random_bool(spec.off_theme_rate) {
            features.insert(genres.choose(&mut rng).expect("nonempty").clone());
        }

        let core = &other_core[theme];
        let n_other = rng.random_range(1..=2).min(core.len());
        for f in core.choose_multiple(&mut rng, n_other) {
            features.insert((*f).clone());
        }
        if rng.random_bool(spec.off_theme_rate) {
            features.insert(non_genre.choose(&mut rng).expect("nonempty").clone());
        }

        let base = 2.6 + 0.3 * (theme % 4) as f64;
        let rating = (base + noise.sample(&mut rng)).clamp(MIN_RATING, MAX_RATING);
        items.push(Item {
            id,
            title: format!("Synthetic Feature {:03}", i + 1),
            features,
            global_mean_rating: Some((rating * 100.0).round() / 100.0),
        });
        theme_of.insert(id, theme);
    }
    let catalog = Catalog::new(items).expect("synthetic corpus is well-formed");
    SyntheticCorpus { catalog, theme_of }
}
