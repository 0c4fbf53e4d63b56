use std::path::PathBuf;

use crossfit::harness::{DemoConfig, EpConfig, ExperimentConfig};

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_presets_validate() {
    for name in ["clustered.json", "network.json", "time_series.json"] {
        ExperimentConfig::load(&preset(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    EpConfig::load(&preset("ep_network.json")).unwrap();
    DemoConfig::load(&preset("demo_bias.json")).unwrap();
}
