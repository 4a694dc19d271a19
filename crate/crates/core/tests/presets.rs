use std::path::PathBuf;

use hif_core::synthetic::SceneSpec;
use hif_core::{load_config, HifConfig};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn street_config_matches_preset() {
    let cfg = load_config(&config("street.toml")).unwrap();
    assert_eq!(cfg.scene, Some(SceneSpec::street()));
    assert_eq!(cfg.hif, HifConfig::default());
}

#[test]
fn occlusion_config_matches_preset() {
    let cfg = load_config(&config("occlusion.toml")).unwrap();
    assert_eq!(cfg.scene, Some(SceneSpec::occlusion()));
    assert_eq!(cfg.hif, HifConfig::default());
}
