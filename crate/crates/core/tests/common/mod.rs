#![allow(dead_code)]

use finitype::config::AnalysisConfig;
use finitype::net::{explore, TransitionGraph};
use std::path::PathBuf;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load(name: &str) -> AnalysisConfig {
    AnalysisConfig::load(&fixture_path(name)).expect("fixture parses")
}

pub fn graph(name: &str) -> (AnalysisConfig, TransitionGraph) {
    let c = load(name);
    let g = explore(&c.ifs, &c.caps).expect("exploration succeeds");
    (c, g)
}

pub fn analysis(name: &str) -> (AnalysisConfig, TransitionGraph, finitype::loops::LoopStructure) {
    let (c, g) = graph(name);
    let ls = finitype::loops::loop_classes(&g).expect("one sink");
    (c, g, ls)
}
