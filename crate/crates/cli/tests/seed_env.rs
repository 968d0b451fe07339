//! BUSM_SEED sits between the checkpoint config and explicit settings. Kept in
//! its own test binary because it mutates the process environment.

use bottomup_cli::{resolve_config, Common};

#[test]
fn environment_seed_is_a_fallback() {
    std::env::set_var("BUSM_SEED", "77");
    let cfg = resolve_config(&Common::default(), Some("seed = 5\n"), Vec::new()).unwrap();
    assert_eq!(cfg.seed, 77);

    let explicit = Common {
        seed: Some(9),
        ..Default::default()
    };
    assert_eq!(resolve_config(&explicit, None, Vec::new()).unwrap().seed, 9);

    std::env::set_var("BUSM_SEED", "not a number");
    assert!(resolve_config(&Common::default(), None, Vec::new()).is_err());
    std::env::remove_var("BUSM_SEED");
    assert_eq!(resolve_config(&Common::default(), None, Vec::new()).unwrap().seed, 1);
}
