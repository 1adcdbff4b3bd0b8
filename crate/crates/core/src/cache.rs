//! Persistent store of evaluation results keyed by checkpoint content.
//!
//! Keys hash the endpoint content hashes, the exact bit patterns of the
//! coefficients, the subset filter and the dataset id. Nearby coefficients never
//! share an entry.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::tensor::SubsetFilter;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    canonical: String,
    digest: String,
}

impl CacheKey {
    pub fn new(
        endpoint_ids: &[String],
        coords: (f64, Option<f64>),
        filter: SubsetFilter,
        dataset_id: &str,
    ) -> Self {
        let a2 = coords
            .1
            .map(|v| format!("{:016x}", v.to_bits()))
            .unwrap_or_else(|| "-".into());
        let canonical = format!(
            "v1|{}|{:016x}|{}|{}|{}",
            endpoint_ids.join(","),
            coords.0.to_bits(),
            a2,
            filter,
            dataset_id
        );
        let digest = hex::encode(Sha256::digest(canonical.as_bytes()));
        Self { canonical, digest }
    }

    pub fn as_str(&self) -> &str {
        &self.digest
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    value: f64,
}

#[derive(Debug)]
pub struct ResultCache {
    dir: PathBuf,
    tmp_counter: AtomicU64,
}

impl ResultCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest))
    }

    /// Cached value, or `None` on a miss. Unreadable entries count as misses.
    pub fn lookup(&self, key: &CacheKey) -> Option<f64> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!(
                    "cache entry {} unreadable ({e}); recomputing",
                    path.display()
                );
                return None;
            }
        };
        match serde_json::from_slice::<Entry>(&bytes) {
            Ok(entry) if entry.key == key.canonical && entry.value.is_finite() => Some(entry.value),
            Ok(_) => {
                log::warn!(
                    "cache entry {} does not match its key; recomputing",
                    path.display()
                );
                None
            }
            Err(e) => {
                log::warn!(
                    "cache entry {} corrupted ({e}); recomputing",
                    path.display()
                );
                None
            }
        }
    }

    pub fn insert(&self, key: &CacheKey, value: f64) -> Result<()> {
        let entry = Entry {
            key: key.canonical.clone(),
            value,
        };
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = self
            .dir
            .join(format!(".{}.{}.{n}.tmp", key.digest, std::process::id()));
        fs::write(&tmp, serde_json::to_vec(&entry)?)?;
        fs::rename(&tmp, self.path_for(key))?;
        Ok(())
    }
}
