//! Generated disambiguation guidelines: generation and the on-disk store.
//!
//! Layout: `<root>/<corpus>/<pair slug>.txt` holds the text verbatim and
//! `<root>/<corpus>/manifest.json` lists every pair with its provenance.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use glossa_core::instructions::{
    build_instruction_prompt, contrastive_instances, InstructionStore, TagPair,
};
use glossa_core::CorpusIndex;
use serde::{Deserialize, Serialize};

use crate::gateway::{ChatRequest, Gateway, GatewayError};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub model: String,
    pub temperature: f64,
    pub prompt_hash: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstructionSet {
    pub pair: TagPair,
    pub text: String,
    pub provenance: Provenance,
    pub instance_count: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no contrastive instances for {0} / {1}")]
    NoInstances(String, String),
    #[error("model returned an empty guideline text")]
    EmptyText,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Mines instances for `pair`, asks the model once at the instruction
/// temperature, and returns the answer verbatim with its provenance.
pub async fn generate_instructions(
    gateway: &Gateway,
    index: &CorpusIndex,
    pair: &TagPair,
    max_instances: usize,
    language: &str,
) -> Result<InstructionSet, StoreError> {
    let instances = contrastive_instances(index, pair, max_instances);
    let prompt = build_instruction_prompt(index, pair, &instances, language)
        .map_err(|_| StoreError::NoInstances(pair.a.clone(), pair.b.clone()))?;
    let request = ChatRequest::instruction_generation(prompt);
    let completion = gateway.complete(&request).await?;
    if completion.text.trim().is_empty() {
        return Err(StoreError::EmptyText);
    }
    Ok(InstructionSet {
        pair: pair.clone(),
        text: completion.text,
        provenance: Provenance {
            model: gateway.model().to_string(),
            temperature: request.temperature,
            prompt_hash: completion.prompt_hash,
            timestamp: chrono::Utc::now().to_rfc3339(),
        },
        instance_count: instances.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ManifestEntry {
    pair: TagPair,
    file: String,
    provenance: Provenance,
    instance_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Manifest {
    schema_version: u32,
    corpus: String,
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct InstructionDir {
    dir: PathBuf,
    corpus: String,
}

impl InstructionDir {
    pub fn new(root: &Path, corpus: &str) -> Self {
        InstructionDir {
            dir: root.join(corpus),
            corpus: corpus.to_string(),
        }
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn manifest_path(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    fn io(&self, path: &Path) -> impl FnOnce(io::Error) -> StoreError {
        let path = path.to_path_buf();
        move |source| StoreError::Io { path, source }
    }

    fn read_manifest(&self) -> Result<Manifest, StoreError> {
        let path = self.manifest_path();
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::Format {
                path,
                message: e.to_string(),
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Manifest {
                schema_version: MANIFEST_VERSION,
                corpus: self.corpus.clone(),
                entries: Vec::new(),
            }),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    /// All stored sets, in manifest order (sorted by pair).
    pub fn load(&self) -> Result<Vec<InstructionSet>, StoreError> {
        let manifest = self.read_manifest()?;
        manifest
            .entries
            .into_iter()
            .map(|m| {
                let path = self.dir.join(&m.file);
                let text = fs::read_to_string(&path).map_err(self.io(&path))?;
                Ok(InstructionSet {
                    pair: m.pair,
                    text,
                    provenance: m.provenance,
                    instance_count: m.instance_count,
                })
            })
            .collect()
    }

    pub fn load_store(&self) -> Result<InstructionStore, StoreError> {
        let mut store = InstructionStore::new();
        for set in self.load()? {
            store.insert(set.pair, set.text);
        }
        Ok(store)
    }

    /// Writes (or replaces) one pair's text and manifest entry.
    pub fn save(&self, set: &InstructionSet) -> Result<(), StoreError> {
        fs::create_dir_all(&self.dir).map_err(self.io(&self.dir))?;
        let file = format!("{}.txt", set.pair.slug());
        let path = self.dir.join(&file);
        fs::write(&path, &set.text).map_err(self.io(&path))?;

        let mut manifest = self.read_manifest()?;
        manifest.entries.retain(|m| m.pair.key() != set.pair.key());
        manifest.entries.push(ManifestEntry {
            pair: set.pair.clone(),
            file,
            provenance: set.provenance.clone(),
            instance_count: set.instance_count,
        });
        manifest.entries.sort_by_key(|x| x.pair.key());
        let path = self.manifest_path();
        let tmp = self.dir.join("manifest.json.tmp");
        let bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        fs::write(&tmp, bytes).map_err(self.io(&tmp))?;
        fs::rename(&tmp, &path).map_err(self.io(&path))
    }
}
