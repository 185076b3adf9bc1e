use serde::Deserialize;
use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use super::{estimate_tokens, extract_code, Backend, BackendError, GenerationRequest, GenerationResult};

#[derive(Debug, Default, Deserialize)]
struct Meta {
    #[serde(default)]
    tokens: Vec<u64>,
    #[serde(default)]
    model: Option<String>,
}

#[derive(Debug, Clone)]
struct Recorded {
    text: String,
    tokens: Option<u64>,
}

/// Replays recorded completions from a fixture directory.
///
/// Layout: one sub-directory per statement name holding numbered
/// completion files (`1.lean`, `2.lean`, ...) and an optional `meta.json`
/// with `{"tokens": [...], "model": "..."}`. Sub-lemma names carry a hash
/// suffix (`thm_sub1_a1b2c3`); when no directory matches the full name
/// every such suffix is dropped and `thm_sub1` is tried.
pub struct MockBackend {
    model: String,
    table: HashMap<String, Vec<Recorded>>,
    cursor: Mutex<HashMap<String, usize>>,
    strict: bool,
    popping: bool,
}

/// `t_sub1_0a9f3c_sub2_77e1b0` becomes `t_sub1_sub2`.
fn strip_nonce(name: &str) -> Option<String> {
    let parts: Vec<&str> = name.split('_').collect();
    let is_sub = |p: &str| p.strip_prefix("sub").is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()));
    let is_nonce = |p: &str| p.len() == 6 && p.chars().all(|c| c.is_ascii_hexdigit());
    let kept: Vec<&str> = parts
        .iter()
        .enumerate()
        .filter(|(i, p)| !(*i > 0 && is_nonce(p) && is_sub(parts[i - 1])))
        .map(|(_, p)| *p)
        .collect();
    (kept.len() < parts.len()).then(|| kept.join("_"))
}

impl MockBackend {
    pub fn load(dir: &Path, strict: bool, popping: bool) -> Result<MockBackend, BackendError> {
        let err = |p: &Path, reason: String| BackendError::Fixture { path: p.display().to_string(), reason };
        let mut table = HashMap::new();
        let mut model = "mock".to_string();
        let entries = std::fs::read_dir(dir).map_err(|e| err(dir, e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| err(dir, e.to_string()))?.path();
            if !path.is_dir() {
                continue;
            }
            let key = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            let meta_path = path.join("meta.json");
            let meta: Meta = if meta_path.exists() {
                let text = std::fs::read_to_string(&meta_path).map_err(|e| err(&meta_path, e.to_string()))?;
                serde_json::from_str(&text).map_err(|e| err(&meta_path, e.to_string()))?
            } else {
                Meta::default()
            };
            if let Some(m) = meta.model {
                model = m;
            }
            let mut files: Vec<(u64, std::path::PathBuf)> = std::fs::read_dir(&path)
                .map_err(|e| err(&path, e.to_string()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()).map(|n| (n, p)))
                .collect();
            files.sort();
            let mut recorded = Vec::new();
            for (i, (_, p)) in files.iter().enumerate() {
                let text = std::fs::read_to_string(p).map_err(|e| err(p, e.to_string()))?;
                recorded.push(Recorded { text, tokens: meta.tokens.get(i).copied() });
            }
            table.insert(key, recorded);
        }
        Ok(MockBackend { model, table, cursor: Mutex::new(HashMap::new()), strict, popping })
    }

    /// Build from in-memory completions keyed by statement name.
    pub fn from_map(entries: impl IntoIterator<Item = (String, Vec<(String, u64)>)>, strict: bool, popping: bool) -> Self {
        let table = entries
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().map(|(text, t)| Recorded { text, tokens: Some(t) }).collect()))
            .collect();
        MockBackend { model: "mock".into(), table, cursor: Mutex::new(HashMap::new()), strict, popping }
    }

    fn key_for(&self, name: &str) -> Option<String> {
        if self.table.contains_key(name) {
            return Some(name.to_string());
        }
        strip_nonce(name).filter(|k| self.table.contains_key(k))
    }

    /// Completions not yet handed out for `name`.
    pub fn remaining(&self, name: &str) -> usize {
        let Some(key) = self.key_for(name) else { return 0 };
        let used = self.cursor.lock().expect("mock lock").get(&key).copied().unwrap_or(0);
        self.table[&key].len().saturating_sub(used)
    }
}

impl Backend for MockBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.validate()?;
        let name = &request.statement.name;
        let Some(key) = self.key_for(name) else {
            return Err(if self.strict { BackendError::MissingKey(name.clone()) } else { BackendError::EmptyCompletion });
        };
        let all = &self.table[&key];
        let mut cursor = self.cursor.lock().expect("mock lock");
        let start = if self.popping { cursor.get(&key).copied().unwrap_or(0) } else { 0 };
        let picked: Vec<&Recorded> = all.iter().skip(start).take(request.k).collect();
        if picked.is_empty() {
            return Err(BackendError::EmptyCompletion);
        }
        if self.popping {
            cursor.insert(key, start + picked.len());
        }
        let estimated = picked.iter().any(|r| r.tokens.is_none());
        let tokens = picked.iter().map(|r| r.tokens.unwrap_or_else(|| estimate_tokens(&r.text))).sum();
        Ok(GenerationResult {
            candidates: picked.iter().map(|r| extract_code(&r.text)).collect(),
            tokens_generated: tokens,
            model_id: self.model.clone(),
            estimated,
        })
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::GenerationMode;
    use crate::proof::TheoremStatement;

    fn req(name: &str, k: usize) -> GenerationRequest {
        let st = TheoremStatement::new("", format!("theorem {name} : True := by"), None).unwrap();
        GenerationRequest::new(st, GenerationMode::Initial, k)
    }

    fn dir() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        let t = d.path().join("t");
        std::fs::create_dir(&t).unwrap();
        std::fs::write(t.join("1.lean"), "```lean4\ntheorem t : True := by trivial\n```").unwrap();
        std::fs::write(t.join("2.lean"), "theorem t : True := by simp").unwrap();
        std::fs::write(t.join("10.lean"), "theorem t : True := by decide").unwrap();
        std::fs::write(t.join("meta.json"), r#"{"tokens": [12, 8, 5], "model": "fixture-model"}"#).unwrap();
        let s = d.path().join("t_sub1");
        std::fs::create_dir(&s).unwrap();
        std::fs::write(s.join("1.lean"), "trivial").unwrap();
        d
    }

    #[test]
    fn pops_in_numeric_order() {
        let d = dir();
        let m = MockBackend::load(d.path(), true, true).unwrap();
        let a = m.generate(&req("t", 2)).unwrap();
        assert_eq!(a.candidates, vec!["theorem t : True := by trivial\n", "theorem t : True := by simp"]);
        assert_eq!(a.tokens_generated, 20);
        assert_eq!(a.model_id, "fixture-model");
        let b = m.generate(&req("t", 5)).unwrap();
        assert_eq!(b.candidates, vec!["theorem t : True := by decide"]);
        assert!(matches!(m.generate(&req("t", 1)), Err(BackendError::EmptyCompletion)));
    }

    #[test]
    fn non_popping_is_repeatable() {
        let d = dir();
        let m = MockBackend::load(d.path(), true, false).unwrap();
        assert_eq!(m.generate(&req("t", 1)).unwrap(), m.generate(&req("t", 1)).unwrap());
    }

    #[test]
    fn missing_key_and_nonce_fallback() {
        let d = dir();
        let strict = MockBackend::load(d.path(), true, true).unwrap();
        assert!(matches!(strict.generate(&req("nope", 1)), Err(BackendError::MissingKey(_))));
        let lenient = MockBackend::load(d.path(), false, true).unwrap();
        assert!(matches!(lenient.generate(&req("nope", 1)), Err(BackendError::EmptyCompletion)));
        assert_eq!(strip_nonce("t_sub1_0a9f3c_sub2_77e1b0").as_deref(), Some("t_sub1_sub2"));
        assert_eq!(strip_nonce("mathd_algebra_332"), None);
        let r = strict.generate(&req("t_sub1_0a9f3c", 1)).unwrap();
        assert!(r.estimated);
        assert_eq!(r.tokens_generated, 1);
    }
}
