//! Append-only JSON-lines result cache keyed by settings hash.
//!
//! The determinism contract: a cache hit must be byte-identical to a fresh
//! recomputation, which the CLI tests exercise. The cache directory comes
//! from the RAMCOUNT_CACHE_DIR environment variable; unset means disabled.

use serde::{Deserialize, Serialize};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

pub const CACHE_ENV: &str = "RAMCOUNT_CACHE_DIR";

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    payload: String,
}

pub struct ResultCache {
    file: PathBuf,
}

impl ResultCache {
    /// Cache in the directory named by RAMCOUNT_CACHE_DIR, if set.
    pub fn from_env() -> Option<ResultCache> {
        let dir = std::env::var(CACHE_ENV).ok()?;
        Self::at(PathBuf::from(dir))
    }

    pub fn at(dir: PathBuf) -> Option<ResultCache> {
        std::fs::create_dir_all(&dir).ok()?;
        Some(ResultCache {
            file: dir.join("results.jsonl"),
        })
    }

    pub fn lookup(&self, key: &str) -> Option<String> {
        let f = std::fs::File::open(&self.file).ok()?;
        let reader = BufReader::new(f);
        let mut hit = None;
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if let Ok(entry) = serde_json::from_str::<CacheLine>(&line) {
                if entry.key == key {
                    hit = Some(entry.payload);
                }
            }
        }
        hit
    }

    pub fn store(&self, key: &str, payload: &str) {
        let line = serde_json::to_string(&CacheLine {
            key: key.to_string(),
            payload: payload.to_string(),
        })
        .expect("serializable");
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(&self.file) {
            let _ = writeln!(f, "{line}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_and_lookup() {
        let dir = std::env::temp_dir().join(format!("ramcount-cache-test-{}", std::process::id()));
        let cache = ResultCache::at(dir.clone()).unwrap();
        assert!(cache.lookup("k1").is_none());
        cache.store("k1", "payload-one");
        cache.store("k2", "payload-two");
        assert_eq!(cache.lookup("k1").as_deref(), Some("payload-one"));
        // append-only: a later store for the same key wins on lookup
        cache.store("k1", "payload-three");
        assert_eq!(cache.lookup("k1").as_deref(), Some("payload-three"));
        let _ = std::fs::remove_dir_all(dir);
    }
}
