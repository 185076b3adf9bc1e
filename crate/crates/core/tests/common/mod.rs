//! Test support: the toy REPL driven in-process, without a subprocess.
#![allow(dead_code)]

use apollo::repl::{ReplSession, SessionError, Transport, TransportFault};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Duration;
use toylean::{Repl, World};

pub const HEADER: &str = "import Mathlib\nimport Aesop\nset_option maxHeartbeats 400000\nopen BigOperators Real Nat Topology Rat\n";

pub struct ToyTransport {
    world: World,
    repl: Repl,
    pub requests: usize,
    pub restarts: usize,
}

impl ToyTransport {
    pub fn new(world: World) -> Self {
        ToyTransport { repl: Repl::new(world.clone()), world, requests: 0, restarts: 0 }
    }
}

impl Transport for ToyTransport {
    fn round_trip(&mut self, request: &Value, _timeout: Duration) -> Result<Value, TransportFault> {
        self.requests += 1;
        Ok(self.repl.handle(request))
    }

    fn restart(&mut self) -> Result<(), SessionError> {
        self.restarts += 1;
        self.repl = Repl::new(self.world.clone());
        Ok(())
    }
}

pub fn toy_session(world: World) -> ReplSession<ToyTransport> {
    ReplSession::with_transport(ToyTransport::new(world), HEADER).expect("toy header compiles")
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn load_world(name: &str) -> World {
    let mut w = World::default();
    w.extend(World::load(&fixtures().join(name)).expect("world fixture"));
    w
}

pub fn toy_pool(world: World, capacity: usize) -> apollo::repl::SessionPool<ReplSession<ToyTransport>> {
    apollo::repl::SessionPool::new(capacity, move |header: &str| {
        ReplSession::with_transport(ToyTransport::new(world.clone()), header)
    })
}

/// The ten-item mock suite: dataset, world and recorded completions.
pub mod suite {
    use super::*;
    use apollo::harness::{load_dataset, BenchmarkItem};
    use apollo::llm::MockBackend;

    pub fn dir() -> PathBuf {
        fixtures().join("suite")
    }

    pub fn items() -> Vec<BenchmarkItem> {
        load_dataset(&dir().join("dataset.jsonl")).expect("suite dataset")
    }

    pub fn world() -> World {
        load_world("suite/world.json")
    }

    pub fn backend() -> MockBackend {
        MockBackend::load(&dir().join("llm"), false, true).expect("suite completions")
    }
}

/// The `mathd_algebra_332` walk-through: six failing blocks, four closed
/// by automation and two by one round of sub-lemma generation.
pub mod worked {
    use super::*;
    use apollo::harness::load_dataset;
    use apollo::llm::MockBackend;
    use apollo::proof::TheoremStatement;
    use apollo::repl::MockSession;

    pub const NAME: &str = "mathd_algebra_332";

    pub fn dir() -> PathBuf {
        fixtures().join(NAME)
    }

    pub fn statement() -> TheoremStatement {
        load_dataset(&dir().join("dataset.jsonl")).expect("dataset")[0].statement().expect("statement")
    }

    pub fn world() -> World {
        load_world("mathd_algebra_332/world.json")
    }

    pub fn backend() -> MockBackend {
        MockBackend::load(&dir().join("llm"), true, true).expect("completions")
    }

    pub fn transcript_path() -> PathBuf {
        dir().join("transcript.json")
    }

    pub fn replay_session() -> MockSession {
        MockSession::load(&transcript_path(), true).expect("recorded transcript")
    }
}

fn lean_files(dir: &str) -> Vec<(PathBuf, String)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixtures().join(dir))
        .expect("fixture dir")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "lean"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let t = std::fs::read_to_string(&p).expect("fixture file");
            (p, t)
        })
        .collect()
}

/// Round-trip corpus.
pub fn corpus() -> Vec<(PathBuf, String)> {
    lean_files("corpus")
}

/// Broken proofs for the sorrifier.
pub fn broken() -> Vec<(PathBuf, String)> {
    lean_files("broken")
}
