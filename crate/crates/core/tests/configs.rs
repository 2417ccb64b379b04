use scfloer::config::{preset, ExperimentConfig};

#[test]
fn shipped_configs_match_presets() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    for n in 1..=10u8 {
        let c = ExperimentConfig::load(format!("{root}/criterion-{n:02}.toml").as_ref()).unwrap();
        assert_eq!(c, preset(n).unwrap(), "criterion {n}");
    }
    let d = ExperimentConfig::load(format!("{root}/default.toml").as_ref()).unwrap();
    assert_eq!(d, ExperimentConfig::default());
}

#[test]
fn presets_satisfy_margins() {
    for n in 1..=10u8 {
        let c = preset(n).unwrap();
        assert!(scfloer::config::margin_audit(&c).iter().all(|a| a.ok), "criterion {n}");
        c.model().unwrap();
        c.profiles().unwrap();
    }
}
