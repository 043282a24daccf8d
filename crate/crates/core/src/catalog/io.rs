//! MovieLens-style CSV ingest and export.
//!
//! `movies.csv: movieId,title,genres` (pipe-separated genres), `tags.csv: movieId,tag`,
//! `ratings.csv: userId,movieId,rating`. Extra columns (timestamps, userId in tags) are
//! ignored. Tags prefixed `actor:` or `director:` become person features.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::{Catalog, FeatureId, FeatureKind, Item, ItemId, MAX_RATING, MIN_RATING};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CatalogPaths {
    pub movies: PathBuf,
    pub tags: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
}

impl CatalogPaths {
    /// `movies.csv` is required; `tags.csv` and `ratings.csv` are picked up when present.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        Self {
            movies: dir.join("movies.csv"),
            tags: opt("tags.csv"),
            ratings: opt("ratings.csv"),
        }
    }

    pub fn load(&self) -> Result<Catalog> {
        load_catalog(&self.movies, self.tags.as_deref(), self.ratings.as_deref())
    }
}

struct Table {
    path: PathBuf,
    reader: csv::Reader<fs::File>,
    columns: Vec<usize>,
}

impl Table {
    fn open(path: &Path, required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, 1, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, 1, e))?.clone();
        let columns = required
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h.trim().trim_start_matches('\u{feff}') == *name)
                    .ok_or_else(|| Error::Csv {
                        path: path.to_path_buf(),
                        line: 1,
                        message: format!("missing column `{name}`"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            columns,
        })
    }

    /// Visits each data row with its 1-based line number and the required fields in order.
    fn for_each(mut self, mut f: impl FnMut(u64, &[&str]) -> std::result::Result<(), String>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {}
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Err(csv_error(&self.path, line, e));
                }
            }
            let line = record.position().map_or(0, |p| p.line());
            let mut fields = Vec::with_capacity(self.columns.len());
            for &c in &self.columns {
                match record.get(c) {
                    Some(v) => fields.push(v),
                    None => {
                        return Err(Error::Csv {
                            path: self.path.clone(),
                            line,
                            message: format!("row has {} fields", record.len()),
                        })
                    }
                }
            }
            f(line, &fields).map_err(|message| Error::Csv {
                path: self.path.clone(),
                line,
                message,
            })?;
        }
    }
}

fn csv_error(path: &Path, line: u64, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn parse_id(s: &str) -> std::result::Result<ItemId, String> {
    s.trim()
        .parse::<u32>()
        .map(ItemId)
        .map_err(|_| format!("bad movieId `{s}`"))
}

fn parse_tag(raw: &str) -> Option<FeatureId> {
    let raw = raw.trim();
    let (kind, name) = if let Some(rest) = raw.strip_prefix("actor:") {
        (FeatureKind::Actor, rest.trim())
    } else if let Some(rest) = raw.strip_prefix("director:") {
        (FeatureKind::Director, rest.trim())
    } else {
        (FeatureKind::Tag, raw)
    };
    (!name.is_empty()).then(|| FeatureId::new(kind, name))
}

fn render_tag(f: &FeatureId) -> String {
    match f.kind {
        FeatureKind::Actor => format!("actor:{}", f.name),
        FeatureKind::Director => format!("director:{}", f.name),
        _ => f.name.clone(),
    }
}

/// Loads a catalog from MovieLens-format CSV files.
///
/// Without a ratings file every item falls back to the neutral prior rating.
pub fn load_catalog(movies: &Path, tags: Option<&Path>, ratings: Option<&Path>) -> Result<Catalog> {
    let mut items: BTreeMap<ItemId, Item> = BTreeMap::new();
    let mut duplicate = None;
    Table::open(movies, &["movieId", "title", "genres"])?.for_each(|_, f| {
        let id = parse_id(f[0])?;
        let title = f[1].to_string();
        let genres: BTreeSet<FeatureId> = f[2]
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(FeatureId::genre)
            .collect();
        if genres.is_empty() {
            return Err("empty genres field".into());
        }
        if items.contains_key(&id) {
            duplicate = Some(id);
            return Err(format!("duplicate movieId {id}"));
        }
        items.insert(
            id,
            Item {
                id,
                title,
                features: genres,
                global_mean_rating: None,
            },
        );
        Ok(())
    })
    .map_err(|e| duplicate.map_or(e, Error::DuplicateItem))?;

    if let Some(path) = tags {
        Table::open(path, &["movieId", "tag"])?.for_each(|_, f| {
            let id = parse_id(f[0])?;
            let item = items.get_mut(&id).ok_or_else(|| format!("tag for unknown movieId {id}"))?;
            if let Some(feature) = parse_tag(f[1]) {
                item.features.insert(feature);
            }
            Ok(())
        })?;
    }

    if let Some(path) = ratings {
        let mut sums: BTreeMap<ItemId, (f64, u32)> = BTreeMap::new();
        Table::open(path, &["userId", "movieId", "rating"])?.for_each(|_, f| {
            let id = parse_id(f[1])?;
            if !items.contains_key(&id) {
                return Err(format!("rating for unknown movieId {id}"));
            }
            let r: f64 = f[2].trim().parse().map_err(|_| format!("bad rating `{}`", f[2]))?;
            if !(MIN_RATING..=MAX_RATING).contains(&r) {
                return Err(format!("rating {r} outside [{MIN_RATING}, {MAX_RATING}]"));
            }
            let e = sums.entry(id).or_default();
            e.0 += r;
            e.1 += 1;
            Ok(())
        })?;
        for (id, (sum, n)) in sums {
            if let Some(item) = items.get_mut(&id) {
                item.global_mean_rating = Some(sum / f64::from(n));
            }
        }
    }

    Catalog::new(items.into_values().collect())
}

/// Writes `movies.csv`, `tags.csv` and `ratings.csv` into `dir`.
///
/// Each rated item gets a single ratings row holding its mean, so reloading
/// reproduces the catalog exactly.
pub fn save_catalog(catalog: &Catalog, dir: &Path) -> Result<CatalogPaths> {
    fs::create_dir_all(dir)?;
    let paths = CatalogPaths {
        movies: dir.join("movies.csv"),
        tags: Some(dir.join("tags.csv")),
        ratings: Some(dir.join("ratings.csv")),
    };
    let wrap = |e: csv::Error, p: &Path| csv_error(p, 0, e);

    let mut w = csv::Writer::from_path(&paths.movies).map_err(|e| wrap(e, &paths.movies))?;
    w.write_record(["movieId", "title", "genres"]).map_err(|e| wrap(e, &paths.movies))?;
    for item in catalog.items() {
        let genres: Vec<&str> = item
            .features
            .iter()
            .filter(|f| f.is_genre())
            .map(|f| f.name.as_str())
            .collect();
        w.write_record([item.id.to_string(), item.title.clone(), genres.join("|")])
            .map_err(|e| wrap(e, &paths.movies))?;
    }
    w.flush()?;

    let tags_path = paths.tags.as_deref().expect("set above");
    let mut w = csv::Writer::from_path(tags_path).map_err(|e| wrap(e, tags_path))?;
    w.write_record(["movieId", "tag"]).map_err(|e| wrap(e, tags_path))?;
    for item in catalog.items() {
        for f in item.features.iter().filter(|f| !f.is_genre()) {
            w.write_record([item.id.to_string(), render_tag(f)])
                .map_err(|e| wrap(e, tags_path))?;
        }
    }
    w.flush()?;

    let ratings_path = paths.ratings.as_deref().expect("set above");
    let mut w = csv::Writer::from_path(ratings_path).map_err(|e| wrap(e, ratings_path))?;
    w.write_record(["userId", "movieId", "rating"]).map_err(|e| wrap(e, ratings_path))?;
    for item in catalog.items() {
        if let Some(r) = item.global_mean_rating {
            w.write_record(["0".to_string(), item.id.to_string(), format!("{r:?}")])
                .map_err(|e| wrap(e, ratings_path))?;
        }
    }
    w.flush()?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::synthetic;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_rows_without_tags() {
        let dir = tempfile::tempdir().unwrap();
        let movies = write(
            dir.path(),
            "movies.csv",
            "movieId,title,genres\n1,Toy Story (1995),Adventure|Animation\n2,\"Heat, The\",Action\n3,Up,Animation\n",
        );
        let cat = load_catalog(&movies, None, None).unwrap();
        assert_eq!(cat.len(), 3);
        assert!(cat.items().iter().all(|i| i.features.iter().all(FeatureId::is_genre)));
        assert_eq!(cat.item(ItemId(2)).unwrap().title, "Heat, The");
        assert_eq!(cat.item(ItemId(1)).unwrap().mean_rating(), 3.0);
    }

    #[test]
    fn mean_rating_is_arithmetic_mean() {
        let dir = tempfile::tempdir().unwrap();
        let movies = write(dir.path(), "movies.csv", "movieId,title,genres\n7,A,Drama\n");
        let ratings = write(
            dir.path(),
            "ratings.csv",
            "userId,movieId,rating,timestamp\n1,7,4.0,0\n2,7,5.0,0\n",
        );
        let cat = load_catalog(&movies, None, Some(&ratings)).unwrap();
        assert_eq!(cat.item(ItemId(7)).unwrap().global_mean_rating, Some(4.5));
    }

    #[test]
    fn malformed_row_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let movies = write(dir.path(), "movies.csv", "movieId,title,genres\n1,A,Drama\nx,B,Drama\n");
        match load_catalog(&movies, None, None).unwrap_err() {
            Error::Csv { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_id_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let movies = write(dir.path(), "movies.csv", "movieId,title,genres\n1,A,Drama\n1,B,Comedy\n");
        assert!(matches!(
            load_catalog(&movies, None, None).unwrap_err(),
            Error::DuplicateItem(ItemId(1))
        ));
    }

    #[test]
    fn person_tags_become_person_features() {
        let dir = tempfile::tempdir().unwrap();
        let movies = write(dir.path(), "movies.csv", "movieId,title,genres\n1,A,Drama\n");
        let tags = write(
            dir.path(),
            "tags.csv",
            "userId,movieId,tag,timestamp\n3,1,director:Ang Lee,0\n3,1,actor:Tom Hanks,0\n3,1,slow,0\n3,1,slow,0\n",
        );
        let cat = load_catalog(&movies, Some(&tags), None).unwrap();
        let item = cat.item(ItemId(1)).unwrap();
        assert!(item.has_feature(&FeatureId::new(FeatureKind::Director, "Ang Lee")));
        assert!(item.has_feature(&FeatureId::new(FeatureKind::Actor, "Tom Hanks")));
        assert_eq!(item.features.len(), 4);
    }

    #[test]
    fn save_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cat = synthetic::bundled_corpus();
        let paths = save_catalog(&cat, dir.path()).unwrap();
        let back = paths.load().unwrap();
        assert_eq!(back, cat);
        assert_eq!(back.digest(), cat.digest());
    }
}
