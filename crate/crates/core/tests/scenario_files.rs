use std::path::PathBuf;

use relay_core::scenario::{load_scenario, save_scenario};

fn shipped() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_scenarios_load() {
    let files = shipped();
    assert!(files.len() >= 4, "{files:?}");
    for f in files {
        let s = load_scenario(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert_eq!(s.peer.intervals(), 360, "{}", f.display());
    }
}

#[test]
fn save_then_load_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    for f in shipped() {
        let a = load_scenario(&f).unwrap();
        let first = dir.path().join("a.json");
        save_scenario(&a, &first).unwrap();
        let b = load_scenario(&first).unwrap();
        assert_eq!(a, b, "{}", f.display());
        let second = dir.path().join("b.json");
        save_scenario(&b, &second).unwrap();
        assert_eq!(
            std::fs::read_to_string(&first).unwrap(),
            std::fs::read_to_string(&second).unwrap()
        );
    }
}
