//! Relation vocabularies and the structured-to-natural-language name map.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};

/// Natural-language names for the Freebase-style relation paths found in the
/// NYT family of datasets.
const NYT_RELATIONS: &[(&str, &str)] = &[
    ("/location/location/contains", "location contains"),
    ("/people/person/place_of_birth", "place of birth"),
    ("/people/deceased_person/place_of_death", "place of death"),
    ("/people/person/place_lived", "place lived"),
    ("/people/person/nationality", "nationality"),
    ("/people/person/children", "children"),
    ("/people/person/religion", "religion"),
    ("/people/person/ethnicity", "ethnicity"),
    ("/people/person/profession", "profession"),
    ("/people/ethnicity/geographic_distribution", "geographic distribution"),
    ("/people/ethnicity/people", "ethnicity people"),
    ("/people/place_of_interment/interred_here", "interred here"),
    ("/business/person/company", "company"),
    ("/business/company/founders", "founders"),
    ("/business/company/place_founded", "place founded"),
    ("/business/company/major_shareholders", "major shareholders"),
    ("/business/company/advisors", "advisors"),
    ("/business/company/industry", "industry"),
    ("/business/company_shareholder/major_shareholder_of", "major shareholder of"),
    ("/location/country/capital", "capital"),
    ("/location/country/administrative_divisions", "administrative divisions"),
    ("/location/administrative_division/country", "country"),
    ("/location/neighborhood/neighborhood_of", "neighborhood of"),
    ("/location/us_county/county_seat", "county seat"),
    ("/location/us_state/capital", "state capital"),
    ("/location/province/capital", "province capital"),
    ("/location/br_state/capital", "state capital"),
    ("/location/region/capital", "region capital"),
    ("/sports/sports_team/location", "team location"),
    ("/sports/sports_team_location/teams", "teams"),
    ("/film/film/featured_film_locations", "featured film locations"),
    ("/film/film_location/featured_in_films", "featured in films"),
];

#[derive(Debug, Clone, Default)]
pub struct RelationNormalizer {
    table: BTreeMap<String, String>,
}

impl RelationNormalizer {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Built-in table for NYT-style relation paths.
    pub fn nyt() -> Self {
        RelationNormalizer {
            table: NYT_RELATIONS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn insert(&mut self, structured: impl Into<String>, natural: impl Into<String>) {
        self.table.insert(structured.into(), natural.into());
    }

    /// Reads a two-column, tab-separated file. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `structured<TAB>natural`".into(),
            })?;
            table.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(RelationNormalizer { table })
    }

    /// Maps a structured relation path to its natural-language name.
    ///
    /// Paths missing from the table fall back to their last segment with
    /// underscores turned into spaces; anything that is not a path is returned
    /// unchanged.
    pub fn normalize(&self, raw: &str) -> Result<String> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Err(Error::Validation("empty relation name".into()));
        }
        if let Some(mapped) = self.table.get(raw) {
            return Ok(mapped.clone());
        }
        if raw.starts_with('/') {
            let last = raw.rsplit('/').find(|s| !s.is_empty()).unwrap_or(raw);
            return Ok(last.replace('_', " "));
        }
        Ok(raw.to_string())
    }
}

/// The closed set of relation names extraction may produce.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationList {
    names: Vec<String>,
    index: BTreeSet<String>,
}

impl RelationList {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list = RelationList::default();
        for n in names {
            let n = n.into();
            if list.index.insert(n.clone()) {
                list.names.push(n);
            }
        }
        list
    }

    /// One relation per line.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(
            text.lines().map(str::trim).filter(|l| !l.is_empty()),
        ))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains(name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}
