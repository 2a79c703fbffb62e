//! The shipped scenario folders parse, and survive a write/parse round trip.

use std::path::Path;

use edgesim::io::config::{parse_inputs, write_inputs};

#[test]
fn shipped_scenarios_round_trip() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(&root).unwrap() {
        let dir = entry.unwrap().path();
        if !dir.is_dir() {
            continue;
        }
        let inputs = parse_inputs(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display()));
        let tmp = tempfile::tempdir().unwrap();
        write_inputs(tmp.path(), &inputs).unwrap();
        assert_eq!(parse_inputs(tmp.path()).unwrap(), inputs, "{}", dir.display());
        for file in std::fs::read_dir(&dir).unwrap() {
            let file = file.unwrap().path();
            let name = file.file_name().unwrap();
            assert_eq!(
                std::fs::read_to_string(&file).unwrap(),
                std::fs::read_to_string(tmp.path().join(name)).unwrap(),
                "{} is not in canonical form",
                file.display()
            );
        }
        seen += 1;
    }
    assert!(seen >= 4);
}

#[test]
fn missing_file_is_reported_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let err = parse_inputs(tmp.path()).unwrap_err().to_string();
    assert!(err.contains(".xml") || err.contains(".properties"), "{err}");
}
