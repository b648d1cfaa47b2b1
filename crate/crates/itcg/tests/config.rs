use itcg::Config;

#[test]
fn defaults_round_trip_through_toml() {
    let cfg = Config::default();
    let back = Config::parse(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    cfg.validate().unwrap();
}

#[test]
fn empty_file_means_defaults() {
    assert_eq!(Config::parse("").unwrap(), Config::default());
}

#[test]
fn every_unknown_key_is_reported() {
    let err = Config::parse("sed = 3\n[ppo]\nclip = 0.2\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("sed"), "{err}");
    assert!(err.contains("ppo.clip"), "{err}");
}

#[test]
fn fixed_length_arrays_are_strict() {
    assert!(Config::parse("[initial]\nx0 = [1.0, 2.0, 3.0]\n").is_err());
    assert!(Config::parse("[initial]\nv0 = [250.0]\n").is_err());
    assert!(Config::parse("[ppo]\nreward_weights = [1.0, 1.0]\n").is_err());
    assert!(Config::parse("[aero]\nrows = [[0.4, 1.0, 0.1]]\n").is_err());
}

#[test]
fn hash_tracks_content() {
    let mut cfg = Config::default();
    let h = cfg.hash();
    cfg.seed = 2;
    assert_ne!(cfg.hash(), h);
}

#[test]
fn invalid_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[initial]\nx0 = [-10000.0, -30000.0]\n").unwrap();
    assert!(Config::load(&path).is_err());
    std::fs::write(&path, "seed = 9223372036854775807\n").unwrap();
    assert!(Config::load(&path).is_ok());
    assert!(Config::load(&dir.path().join("missing.toml")).is_err());
}

#[test]
fn aero_table_file_resolves_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("aero.txt"),
        "# mach cl cd0 k\n0.4 30 0.3 0.5\n1.2 35 0.8 0.6\n",
    )
    .unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[aero]\ntable_file = \"aero.txt\"\n").unwrap();
    let cfg = Config::load(&path).unwrap();
    assert_eq!(
        cfg.aero.rows,
        vec![[0.4, 30.0, 0.3, 0.5], [1.2, 35.0, 0.8, 0.6]]
    );
    assert!(cfg.aero.table_file.is_none());
    // The resolved form stands alone.
    assert_eq!(Config::parse(&cfg.to_toml()).unwrap(), cfg);
}
