//! JSON cache for finite-quotient closure results, keyed by modulus and root.
//! Active only when `APOLLO_CACHE_DIR` is set; unreadable entries are recomputed.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub const ENV: &str = "APOLLO_CACHE_DIR";

pub fn dir() -> Option<PathBuf> {
    std::env::var_os(ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn path(key: &str) -> Option<PathBuf> {
    dir().map(|d| d.join(format!("{key}.json")))
}

pub fn get<T: DeserializeOwned>(key: &str) -> Option<T> {
    let text = std::fs::read_to_string(path(key)?).ok()?;
    serde_json::from_str(&text).ok()
}

/// Best effort: a cache that cannot be written is skipped.
pub fn put<T: Serialize>(key: &str, value: &T) {
    let Some(p) = path(key) else { return };
    if let Some(d) = p.parent() {
        let _ = std::fs::create_dir_all(d);
    }
    if let Ok(text) = serde_json::to_string(value) {
        let _ = std::fs::write(p, text);
    }
}

/// Fetch `key`, computing and storing it on a miss.
pub fn get_or<T, E>(key: &str, compute: impl FnOnce() -> Result<T, E>) -> Result<T, E>
where
    T: Serialize + DeserializeOwned,
{
    if let Some(v) = get(key) {
        return Ok(v);
    }
    let v = compute()?;
    put(key, &v);
    Ok(v)
}

pub fn root_key(root: &[i64; 4]) -> String {
    root.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("_")
}
