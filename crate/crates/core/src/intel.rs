//! Gazetteer-driven concept extraction and RDF Turtle output for translated
//! threat text.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::normalize_text;

#[derive(Debug, Error)]
pub enum IntelError {
    #[error("gazetteer has no entries")]
    EmptyGazetteer,
    #[error("no concepts extracted, nothing to build")]
    EmptyIntel,
    #[error("invalid gazetteer entry: {0}")]
    InvalidEntry(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Variant order fixes the subject-block order in serialized output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConceptType {
    Intelligence,
    Means,
    Product,
    Vulnerability,
}

impl ConceptType {
    fn class_curie(self) -> &'static str {
        match self {
            ConceptType::Intelligence => "intel:Intelligence",
            ConceptType::Means => "uco:Means",
            ConceptType::Product => "uco:Product",
            ConceptType::Vulnerability => "uco:Vulnerability",
        }
    }

    fn parse(name: &str) -> Option<Self> {
        match name {
            "Means" => Some(ConceptType::Means),
            "Product" => Some(ConceptType::Product),
            "Vulnerability" => Some(ConceptType::Vulnerability),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GazetteerEntry {
    pub phrase: Vec<String>,
    pub concept_type: ConceptType,
    pub canonical_id: String,
    pub sameas: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
}

fn valid_canonical_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Gazetteer {
    pub fn new(entries: Vec<GazetteerEntry>) -> Result<Self, IntelError> {
        if entries.is_empty() {
            return Err(IntelError::EmptyGazetteer);
        }
        for entry in &entries {
            if entry.phrase.is_empty() {
                return Err(IntelError::InvalidEntry(format!(
                    "{}: empty phrase",
                    entry.canonical_id
                )));
            }
            let joined = entry.phrase.join(" ");
            if normalize_text(&joined) != entry.phrase {
                return Err(IntelError::InvalidEntry(format!(
                    "phrase not normalized: {joined:?}"
                )));
            }
            if !valid_canonical_id(&entry.canonical_id) {
                return Err(IntelError::InvalidEntry(format!(
                    "bad canonical id: {:?}",
                    entry.canonical_id
                )));
            }
            if entry.sameas.as_deref() == Some("") {
                return Err(IntelError::InvalidEntry(format!(
                    "{}: empty sameas",
                    entry.canonical_id
                )));
            }
        }
        Ok(Gazetteer { entries })
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }
}

#[derive(Debug, Deserialize)]
struct GazetteerRow {
    phrase: String,
    #[serde(rename = "type")]
    concept_type: String,
    canonical_id: String,
    #[serde(default)]
    sameas: Option<String>,
}

pub fn load_gazetteer(path: &Path) -> Result<Gazetteer, IntelError> {
    let reader = BufReader::new(File::open(path)?);
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: GazetteerRow =
            serde_json::from_str(&line).map_err(|e| IntelError::Format {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let concept_type =
            ConceptType::parse(&row.concept_type).ok_or_else(|| IntelError::Format {
                line: idx + 1,
                message: format!("unknown concept type {:?}", row.concept_type),
            })?;
        entries.push(GazetteerEntry {
            phrase: row.phrase.split_whitespace().map(str::to_string).collect(),
            concept_type,
            canonical_id: row.canonical_id,
            sameas: row.sameas,
        });
    }
    Gazetteer::new(entries)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub concept_type: ConceptType,
    pub canonical_id: String,
    pub sameas: Option<String>,
}

/// Longest-match-first, left-to-right, non-overlapping phrase matching.
pub fn extract_concepts(tokens: &[String], gazetteer: &Gazetteer) -> Vec<Concept> {
    let mut concepts = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<&GazetteerEntry> = None;
        for entry in gazetteer.entries() {
            let len = entry.phrase.len();
            if i + len > tokens.len() {
                continue;
            }
            if entry.phrase.iter().zip(&tokens[i..]).all(|(a, b)| a == b)
                && best.is_none_or(|b| len > b.phrase.len())
            {
                best = Some(entry);
            }
        }
        match best {
            Some(entry) => {
                concepts.push(Concept {
                    concept_type: entry.concept_type,
                    canonical_id: entry.canonical_id.clone(),
                    sameas: entry.sameas.clone(),
                });
                i += entry.phrase.len();
            }
            None => i += 1,
        }
    }
    concepts
}

/// Edge predicates in serialization order after the type assertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Predicate {
    HasVulnerability,
    AffectsProduct,
    HasMeans,
    SameAs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntelGraph {
    pub intel_id: String,
    pub nodes: Vec<(String, ConceptType, Option<String>)>,
    pub edges: Vec<(String, Predicate, String)>,
}

pub fn build_intel_graph(concepts: &[Concept], intel_id: &str) -> Result<IntelGraph, IntelError> {
    if concepts.is_empty() {
        return Err(IntelError::EmptyIntel);
    }
    if !valid_canonical_id(intel_id) {
        return Err(IntelError::InvalidGraph(format!(
            "bad intel id: {intel_id:?}"
        )));
    }
    let mut nodes: BTreeMap<String, (ConceptType, Option<String>)> = BTreeMap::new();
    nodes.insert(intel_id.to_string(), (ConceptType::Intelligence, None));
    for concept in concepts {
        if concept.canonical_id == intel_id {
            return Err(IntelError::InvalidGraph(format!(
                "concept id collides with intel id: {intel_id}"
            )));
        }
        match nodes.get(&concept.canonical_id) {
            Some((existing, _)) if *existing != concept.concept_type => {
                return Err(IntelError::InvalidGraph(format!(
                    "conflicting types for {}",
                    concept.canonical_id
                )));
            }
            Some(_) => {}
            None => {
                nodes.insert(
                    concept.canonical_id.clone(),
                    (concept.concept_type, concept.sameas.clone()),
                );
            }
        }
    }

    let ids_of = |t: ConceptType| -> Vec<&String> {
        nodes
            .iter()
            .filter(|(_, (ty, _))| *ty == t)
            .map(|(id, _)| id)
            .collect()
    };
    let mut edges: BTreeSet<(String, Predicate, String)> = BTreeSet::new();
    let vulnerabilities: Vec<String> =
        ids_of(ConceptType::Vulnerability).into_iter().cloned().collect();
    let products: Vec<String> = ids_of(ConceptType::Product).into_iter().cloned().collect();
    let means: Vec<String> = ids_of(ConceptType::Means).into_iter().cloned().collect();
    for v in &vulnerabilities {
        edges.insert((intel_id.to_string(), Predicate::HasVulnerability, v.clone()));
        for p in &products {
            edges.insert((v.clone(), Predicate::AffectsProduct, p.clone()));
            edges.insert((p.clone(), Predicate::HasVulnerability, v.clone()));
        }
        for m in &means {
            edges.insert((v.clone(), Predicate::HasMeans, m.clone()));
        }
    }
    for (id, (_, sameas)) in &nodes {
        if let Some(iri) = sameas {
            edges.insert((id.clone(), Predicate::SameAs, iri.clone()));
        }
    }

    let mut node_list: Vec<(String, ConceptType, Option<String>)> = nodes
        .into_iter()
        .map(|(id, (ty, sameas))| (id, ty, sameas))
        .collect();
    node_list.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
    Ok(IntelGraph {
        intel_id: intel_id.to_string(),
        nodes: node_list,
        edges: edges.into_iter().collect(),
    })
}

impl IntelGraph {
    pub fn validate(&self) -> Result<(), IntelError> {
        let intelligence: Vec<_> = self
            .nodes
            .iter()
            .filter(|(_, ty, _)| *ty == ConceptType::Intelligence)
            .collect();
        if intelligence.len() != 1 || intelligence[0].0 != self.intel_id {
            return Err(IntelError::InvalidGraph(
                "exactly one Intelligence node named by intel_id required".to_string(),
            ));
        }
        let ids: BTreeSet<&str> = self.nodes.iter().map(|(id, _, _)| id.as_str()).collect();
        if ids.len() != self.nodes.len() {
            return Err(IntelError::InvalidGraph("duplicate node ids".to_string()));
        }
        for (id, _, _) in &self.nodes {
            if !valid_canonical_id(id) {
                return Err(IntelError::InvalidGraph(format!("bad node id: {id:?}")));
            }
        }
        let mut seen = BTreeSet::new();
        for (s, p, o) in &self.edges {
            if !seen.insert((s, p, o)) {
                return Err(IntelError::InvalidGraph(format!(
                    "duplicate edge {s} {p:?} {o}"
                )));
            }
            if !ids.contains(s.as_str()) {
                return Err(IntelError::InvalidGraph(format!(
                    "edge subject not a node: {s}"
                )));
            }
            if *p != Predicate::SameAs && !ids.contains(o.as_str()) {
                return Err(IntelError::InvalidGraph(format!(
                    "edge object not a node: {o}"
                )));
            }
        }
        Ok(())
    }
}

const PREFIXES: [(&str, &str); 8] = [
    ("uco", "http://accl.umbc.edu/ns/ontology/uco#"),
    ("intel", "http://accl.umbc.edu/ns/ontology/intelligence#"),
    ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
    ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
    ("xml", "http://www.w3.org/XML/1998/namespace"),
    ("xsd", "http://www.w3.org/2001/XMLSchema#"),
    ("dbp", "http://dbpedia.org/resource#"),
    ("owl", "http://www.w3.org/2002/07/owl#"),
];

fn render_object(predicate: Predicate, object: &str) -> String {
    match predicate {
        Predicate::SameAs => {
            if object.starts_with("http://") || object.starts_with("https://") {
                format!("<{object}>")
            } else {
                object.to_string()
            }
        }
        _ => format!("<{object}>"),
    }
}

fn predicate_curie(predicate: Predicate, subject_type: ConceptType) -> &'static str {
    match predicate {
        Predicate::HasVulnerability => {
            if subject_type == ConceptType::Intelligence {
                "intel:hasVulnerability"
            } else {
                "uco:hasVulnerability"
            }
        }
        Predicate::AffectsProduct => "uco:affectsProduct",
        Predicate::HasMeans => "uco:hasMeans",
        Predicate::SameAs => "owl:sameAs",
    }
}

pub fn serialize_turtle(graph: &IntelGraph) -> Result<String, IntelError> {
    graph.validate()?;
    let mut lines: Vec<String> = PREFIXES
        .iter()
        .map(|(name, iri)| format!("@prefix {name}: <{iri}> ."))
        .collect();
    for (id, ty, _) in &graph.nodes {
        lines.push(String::new());
        let mut statements = vec![format!("<{id}> a {}", ty.class_curie())];
        let mut out_edges: Vec<_> = graph
            .edges
            .iter()
            .filter(|(s, _, _)| s == id)
            .collect();
        out_edges.sort_by(|a, b| (a.1, &a.2).cmp(&(b.1, &b.2)));
        for (_, p, o) in out_edges {
            statements.push(format!(
                "    {} {}",
                predicate_curie(*p, *ty),
                render_object(*p, o)
            ));
        }
        let last = statements.len() - 1;
        for (i, stmt) in statements.into_iter().enumerate() {
            let tail = if i == last { " ." } else { " ;" };
            lines.push(format!("{stmt}{tail}"));
        }
    }
    let mut out = lines.join("\n");
    out.push('\n');
    Ok(out)
}

pub fn save_turtle(graph: &IntelGraph, path: &Path) -> Result<(), IntelError> {
    let text = serialize_turtle(graph)?;
    let mut file = File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

/// Content-derived id matching the `Int<decimal>` shape.
pub fn intel_id_for(text: &str) -> String {
    let mut hash: u32 = 2166136261;
    for byte in text.as_bytes() {
        hash ^= u32::from(*byte);
        hash = hash.wrapping_mul(16777619);
    }
    format!("Int{hash}")
}
