//! Item corpus and the fixed-width binary feature encoding shared by every model.

pub mod io;
pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{load_catalog, save_catalog, CatalogPaths};

/// Rating assumed for items nobody has rated yet.
pub const NEUTRAL_RATING: f64 = 3.0;
pub const MIN_RATING: f64 = 0.5;
pub const MAX_RATING: f64 = 5.0;

pub const DEFAULT_DIMENSION: usize = 28;
pub const DEFAULT_GENRE_DIMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Genre,
    Tag,
    Actor,
    Director,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId {
    pub kind: FeatureKind,
    pub name: String,
}

impl FeatureId {
    pub fn new(kind: FeatureKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
        }
    }

    pub fn genre(name: impl Into<String>) -> Self {
        Self::new(FeatureKind::Genre, name)
    }

    pub fn tag(name: impl Into<String>) -> Self {
        Self::new(FeatureKind::Tag, name)
    }

    pub fn is_genre(&self) -> bool {
        self.kind == FeatureKind::Genre
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FeatureKind::Genre => write!(f, "genre:{}", self.name),
            FeatureKind::Tag => write!(f, "tag:{}", self.name),
            FeatureKind::Actor => write!(f, "actor:{}", self.name),
            FeatureKind::Director => write!(f, "director:{}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub title: String,
    pub features: BTreeSet<FeatureId>,
    pub global_mean_rating: Option<f64>,
}

impl Item {
    /// Global mean rating, or the neutral prior when the item has never been rated.
    pub fn mean_rating(&self) -> f64 {
        self.global_mean_rating.unwrap_or(NEUTRAL_RATING)
    }

    pub fn has_feature(&self, feature: &FeatureId) -> bool {
        self.features.contains(feature)
    }
}

/// A 0/1 vector over encoding slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Encoding(Vec<u8>);

impl Encoding {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        Self(bits.into_iter().map(u8::from).collect())
    }

    /// Builds an encoding of length `len` with the listed slots set.
    pub fn with_active(len: usize, active: &[usize]) -> Self {
        let mut e = Self::zeros(len);
        for &i in active {
            e.set(i, true);
        }
        e
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i] != 0
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.0[i] = u8::from(on);
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(i, _)| i)
    }

    pub fn count_active(&self) -> usize {
        self.0.iter().filter(|&&b| b != 0).count()
    }

    pub fn hamming(&self, other: &Encoding) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }
}

/// Result of encoding one feature set: the vector plus how many features had no slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub vector: Encoding,
    pub dropped: usize,
}

/// Slot layout: the first `genre_dims` slots hold genres, the remainder the most
/// frequent non-genre features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EncodingLayout", into = "EncodingLayout")]
pub struct FeatureEncoding {
    dimension: usize,
    genre_dims: usize,
    slots: Vec<Option<FeatureId>>,
    index: HashMap<FeatureId, usize>,
}

#[derive(Serialize, Deserialize)]
struct EncodingLayout {
    dimension: usize,
    genre_dims: usize,
    slots: Vec<Option<FeatureId>>,
}

impl TryFrom<EncodingLayout> for FeatureEncoding {
    type Error = Error;

    fn try_from(layout: EncodingLayout) -> Result<Self> {
        if layout.slots.len() != layout.dimension {
            return Err(Error::ShapeMismatch {
                expected: layout.dimension,
                got: layout.slots.len(),
            });
        }
        FeatureEncoding::from_slots(layout.dimension, layout.genre_dims, layout.slots)
    }
}

impl From<FeatureEncoding> for EncodingLayout {
    fn from(enc: FeatureEncoding) -> Self {
        EncodingLayout {
            dimension: enc.dimension,
            genre_dims: enc.genre_dims,
            slots: enc.slots,
        }
    }
}

impl FeatureEncoding {
    /// Chooses slots by feature frequency over `items`: the `genre_dims` most common
    /// genres, then the most common non-genre features for the remaining slots.
    /// Frequency ties are broken by name, then kind.
    pub fn fit<'a>(
        items: impl IntoIterator<Item = &'a Item>,
        dimension: usize,
        genre_dims: usize,
    ) -> Result<Self> {
        if dimension == 0 || genre_dims >= dimension {
            return Err(Error::invalid(format!(
                "genre_dims ({genre_dims}) must be below dimension ({dimension})"
            )));
        }
        let mut counts: BTreeMap<&FeatureId, usize> = BTreeMap::new();
        for item in items {
            for f in &item.features {
                *counts.entry(f).or_default() += 1;
            }
        }
        let ranked = |genre: bool, take: usize| -> Vec<FeatureId> {
            let mut v: Vec<(&FeatureId, usize)> = counts
                .iter()
                .filter(|(f, _)| f.is_genre() == genre)
                .map(|(f, &c)| (*f, c))
                .collect();
            v.sort_by(|a, b| {
                b.1.cmp(&a.1)
                    .then_with(|| a.0.name.cmp(&b.0.name))
                    .then_with(|| a.0.kind.cmp(&b.0.kind))
            });
            v.into_iter().take(take).map(|(f, _)| f.clone()).collect()
        };

        let mut slots: Vec<Option<FeatureId>> = vec![None; dimension];
        for (i, f) in ranked(true, genre_dims).into_iter().enumerate() {
            slots[i] = Some(f);
        }
        for (i, f) in ranked(false, dimension - genre_dims).into_iter().enumerate() {
            slots[genre_dims + i] = Some(f);
        }
        Self::from_slots(dimension, genre_dims, slots)
    }

    fn from_slots(dimension: usize, genre_dims: usize, slots: Vec<Option<FeatureId>>) -> Result<Self> {
        if genre_dims >= dimension {
            return Err(Error::invalid("genre_dims must be below dimension"));
        }
        let mut index = HashMap::new();
        for (i, slot) in slots.iter().enumerate() {
            if let Some(f) = slot {
                if f.is_genre() != (i < genre_dims) {
                    return Err(Error::invalid(format!("feature {f} in wrong slot region ({i})")));
                }
                if index.insert(f.clone(), i).is_some() {
                    return Err(Error::invalid(format!("feature {f} assigned twice")));
                }
            }
        }
        Ok(Self {
            dimension,
            genre_dims,
            slots,
            index,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn genre_dims(&self) -> usize {
        self.genre_dims
    }

    pub fn slot_of(&self, feature: &FeatureId) -> Option<usize> {
        self.index.get(feature).copied()
    }

    pub fn feature_at(&self, slot: usize) -> Option<&FeatureId> {
        self.slots.get(slot).and_then(Option::as_ref)
    }

    pub fn slots(&self) -> &[Option<FeatureId>] {
        &self.slots
    }

    pub fn encode_features<'a>(&self, features: impl IntoIterator<Item = &'a FeatureId>) -> Encoded {
        let mut vector = Encoding::zeros(self.dimension);
        let mut dropped = 0;
        for f in features {
            match self.index.get(f) {
                Some(&i) => vector.set(i, true),
                None => dropped += 1,
            }
        }
        Encoded { vector, dropped }
    }

    pub fn encode(&self, item: &Item) -> Encoded {
        self.encode_features(&item.features)
    }
}

/// Immutable item corpus with its encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    items: Vec<Item>,
    by_id: HashMap<ItemId, usize>,
    encoding: FeatureEncoding,
    encoded: Vec<Encoding>,
    dropped_features: usize,
}

impl Catalog {
    /// Builds a catalog using the default 28-slot layout (20 genre slots).
    pub fn new(items: Vec<Item>) -> Result<Self> {
        Self::with_layout(items, DEFAULT_DIMENSION, DEFAULT_GENRE_DIMS)
    }

    pub fn with_layout(mut items: Vec<Item>, dimension: usize, genre_dims: usize) -> Result<Self> {
        items.sort_by_key(|i| i.id);
        for w in items.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateItem(w[0].id));
            }
        }
        for item in &items {
            if item.features.is_empty() {
                return Err(Error::invalid(format!("item {} has no features", item.id)));
            }
            if item.features.iter().any(|f| f.name.is_empty()) {
                return Err(Error::invalid(format!("item {} has an empty feature name", item.id)));
            }
        }
        let encoding = FeatureEncoding::fit(&items, dimension, genre_dims)?;
        Self::from_parts(items, encoding)
    }

    pub fn from_parts(items: Vec<Item>, encoding: FeatureEncoding) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(items.len());
        let mut encoded = Vec::with_capacity(items.len());
        let mut dropped_features = 0;
        for (i, item) in items.iter().enumerate() {
            if by_id.insert(item.id, i).is_some() {
                return Err(Error::DuplicateItem(item.id));
            }
            let e = encoding.encode(item);
            dropped_features += e.dropped;
            encoded.push(e.vector);
        }
        if dropped_features > 0 {
            log::warn!("{dropped_features} item features have no encoding slot and were dropped");
        }
        Ok(Self {
            items,
            by_id,
            encoding,
            encoded,
            dropped_features,
        })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: ItemId) -> Option<&Item> {
        self.by_id.get(&id).map(|&i| &self.items[i])
    }

    pub fn item(&self, id: ItemId) -> Result<&Item> {
        self.get(id).ok_or(Error::UnknownItem(id))
    }

    pub fn encoding(&self) -> &FeatureEncoding {
        &self.encoding
    }

    pub fn encoded(&self, id: ItemId) -> Result<&Encoding> {
        self.by_id
            .get(&id)
            .map(|&i| &self.encoded[i])
            .ok_or(Error::UnknownItem(id))
    }

    /// Encoded rows in catalog (ascending id) order.
    pub fn encoded_rows(&self) -> &[Encoding] {
        &self.encoded
    }

    /// Number of item features that did not fit into the encoding.
    pub fn dropped_features(&self) -> usize {
        self.dropped_features
    }

    /// SHA-256 over a canonical JSON rendering of items and slot layout.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.items).expect("items serialize"));
        h.update(serde_json::to_vec(&self.encoding).expect("encoding serializes"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: u32, feats: &[FeatureId]) -> Item {
        Item {
            id: ItemId(id),
            title: format!("item {id}"),
            features: feats.iter().cloned().collect(),
            global_mean_rating: None,
        }
    }

    #[test]
    fn unknown_features_are_dropped_and_counted() {
        let items = vec![item(1, &[FeatureId::genre("Drama")])];
        let cat = Catalog::new(items).unwrap();
        let e = cat
            .encoding()
            .encode_features(&[FeatureId::genre("Drama"), FeatureId::tag("nope")]);
        assert_eq!(e.dropped, 1);
        assert_eq!(e.vector.count_active(), 1);
    }

    #[test]
    fn zero_encodable_features_gives_zero_vector() {
        let cat = Catalog::new(vec![item(1, &[FeatureId::genre("Drama")])]).unwrap();
        let e = cat.encoding().encode_features(&[FeatureId::tag("absent")]);
        assert_eq!(e.vector, Encoding::zeros(DEFAULT_DIMENSION));
    }

    #[test]
    fn genre_in_slot_three_is_unit_vector() {
        // Four genres with descending frequency fill slots 0..4.
        let g = |n: &str| FeatureId::genre(n);
        let items = vec![
            item(1, &[g("A"), g("B"), g("C"), g("D")]),
            item(2, &[g("A"), g("B"), g("C")]),
            item(3, &[g("A"), g("B")]),
            item(4, &[g("A")]),
        ];
        let cat = Catalog::new(items).unwrap();
        assert_eq!(cat.encoding().slot_of(&g("D")), Some(3));
        let e = cat.encoding().encode_features(&[g("D")]).vector;
        assert_eq!(e, Encoding::with_active(DEFAULT_DIMENSION, &[3]));
    }

    #[test]
    fn non_genre_slots_keep_most_frequent_with_lexicographic_ties() {
        let t = |n: &str| FeatureId::tag(n);
        let mut items = Vec::new();
        // 10 tags; "t0" most frequent; the rest tie at frequency 1.
        for i in 0..10u32 {
            items.push(item(i + 1, &[FeatureId::genre("G"), t(&format!("t{i}")), t("t0")]));
        }
        let cat = Catalog::new(items).unwrap();
        let enc = cat.encoding();
        let kept: Vec<_> = (20..28).map(|s| enc.feature_at(s).unwrap().name.clone()).collect();
        assert_eq!(kept, ["t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7"]);
        assert!(enc.slot_of(&t("t9")).is_none());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let g = FeatureId::genre("A");
        let err = Catalog::new(vec![item(1, &[g.clone()]), item(1, &[g])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateItem(ItemId(1))));
    }

    #[test]
    fn encoding_layout_serde_round_trip() {
        let cat = synthetic::bundled_corpus();
        let json = serde_json::to_string(cat.encoding()).unwrap();
        let back: FeatureEncoding = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, cat.encoding());
    }

    #[test]
    fn hamming_zero_iff_same_encodable_set() {
        let cat = synthetic::bundled_corpus();
        let rows = cat.encoded_rows();
        for (a, ia) in rows.iter().zip(cat.items()).take(40) {
            for (b, ib) in rows.iter().zip(cat.items()).take(40) {
                let fa: BTreeSet<_> = ia.features.iter().filter(|f| cat.encoding().slot_of(f).is_some()).collect();
                let fb: BTreeSet<_> = ib.features.iter().filter(|f| cat.encoding().slot_of(f).is_some()).collect();
                assert_eq!(a.hamming(b) == 0, fa == fb);
            }
        }
    }
}
