//! Objects of the hypothetical world and the seed action registry.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("object {0} cannot contain itself")]
    SelfContainment(String),
    #[error("invalid object id {0:?}: expected <name>_<index>")]
    InvalidObjectId(String),
    #[error("unknown object {0}")]
    UnknownObject(String),
}

/// `name_index`: a lowercase name (which may itself contain underscores)
/// followed by `_` and a non-negative integer, e.g. `cutting_board_0`.
pub fn is_object_id(s: &str) -> bool {
    let Some((name, index)) = s.rsplit_once('_') else {
        return false;
    };
    !name.is_empty()
        && !index.is_empty()
        && index.bytes().all(|b| b.is_ascii_digit())
        && name.starts_with(|c: char| c.is_ascii_lowercase())
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Flat material-property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: String,
    #[serde(default)]
    pub actionable_properties: Vec<String>,
    #[serde(default)]
    pub material_properties: BTreeMap<String, Scalar>,
    /// Containers of this object.
    #[serde(default)]
    pub receptacles: Vec<String>,
    /// Objects contained in this object.
    #[serde(default)]
    pub receptacles_of: Vec<String>,
}

impl WorldObject {
    pub fn new(id: impl Into<String>) -> Result<Self, WorldError> {
        let id = id.into();
        if !is_object_id(&id) {
            return Err(WorldError::InvalidObjectId(id));
        }
        Ok(Self {
            id,
            actionable_properties: Vec::new(),
            material_properties: BTreeMap::new(),
            receptacles: Vec::new(),
            receptacles_of: Vec::new(),
        })
    }
}

fn push_unique(list: &mut Vec<String>, id: &str) {
    if !list.iter().any(|x| x == id) {
        list.push(id.to_string());
    }
}

/// Records that `contained` sits inside `container`, on both sides.
/// Relinking the same pair is a no-op.
pub fn link_receptacle(
    container: &mut WorldObject,
    contained: &mut WorldObject,
) -> Result<(), WorldError> {
    if container.id == contained.id {
        return Err(WorldError::SelfContainment(container.id.clone()));
    }
    push_unique(&mut contained.receptacles, &container.id);
    push_unique(&mut container.receptacles_of, &contained.id);
    Ok(())
}

/// A set of objects keyed by id, linked through receptacle relations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldGraph {
    pub objects: BTreeMap<String, WorldObject>,
}

impl WorldGraph {
    pub fn insert(&mut self, obj: WorldObject) {
        self.objects.insert(obj.id.clone(), obj);
    }

    /// Adds a bare object for `id` if it is not present yet.
    pub fn ensure(&mut self, id: &str) -> Result<(), WorldError> {
        if !self.objects.contains_key(id) {
            self.insert(WorldObject::new(id)?);
        }
        Ok(())
    }

    pub fn link(&mut self, container: &str, contained: &str) -> Result<(), WorldError> {
        if container == contained {
            return Err(WorldError::SelfContainment(container.to_string()));
        }
        let mut a = self
            .objects
            .remove(container)
            .ok_or_else(|| WorldError::UnknownObject(container.to_string()))?;
        let Some(mut b) = self.objects.remove(contained) else {
            self.objects.insert(a.id.clone(), a);
            return Err(WorldError::UnknownObject(contained.to_string()));
        };
        let res = link_receptacle(&mut a, &mut b);
        self.insert(a);
        self.insert(b);
        res
    }

    /// True when `x ∈ y.receptacles ⇔ y ∈ x.receptacles_of` for all pairs.
    pub fn is_symmetric(&self) -> bool {
        self.objects.values().all(|o| {
            o.receptacles.iter().all(|c| {
                self.objects
                    .get(c)
                    .is_some_and(|c| c.receptacles_of.contains(&o.id))
            }) && o.receptacles_of.iter().all(|c| {
                self.objects
                    .get(c)
                    .is_some_and(|c| c.receptacles.contains(&o.id))
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Seed,
    Induced,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSignature {
    pub name: String,
    pub keyword_params: BTreeSet<String>,
    pub provenance: Provenance,
}

impl ApiSignature {
    pub fn new<I, S>(name: &str, params: I, provenance: Provenance) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        debug_assert!(is_identifier(name));
        Self {
            name: name.to_string(),
            keyword_params: params.into_iter().map(Into::into).collect(),
            provenance,
        }
    }

    /// Unions in the keyword names seen at a call site.
    pub fn observe<'a>(&mut self, keywords: impl IntoIterator<Item = &'a str>) {
        for k in keywords {
            if !self.keyword_params.contains(k) {
                self.keyword_params.insert(k.to_string());
            }
        }
    }
}

/// The seed APIs every pool starts from.
pub fn base_registry() -> Vec<ApiSignature> {
    const BASE: &[(&str, &[&str])] = &[
        ("find", &["obj"]),
        ("grab", &["obj"]),
        ("put", &["obj", "target"]),
        ("put_back", &["obj"]),
        ("open_obj", &["obj"]),
        ("close_obj", &["obj"]),
        ("turn_on", &["obj", "power", "duration"]),
        ("turn_off", &["obj"]),
        ("sleep", &["duration"]),
    ];
    BASE.iter()
        .map(|(name, params)| ApiSignature::new(name, params.iter().copied(), Provenance::Seed))
        .collect()
}
