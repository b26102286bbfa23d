//! The shipped 14-slot scripted exchange reproduces its documented sift
//! pattern and key.

use noisekey_core::qkd::{parse_script, run_bb84_scripted};
use noisekey_core::seed::{streams, SeedPath};
use std::path::Path;

#[test]
fn worked_example_sift_indices_and_key() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/bb84_worked_example.csv");
    let script = parse_script(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(script.len(), 14);

    let result = run_bb84_scripted(&script, SeedPath::new(1, streams::QKD, 0)).unwrap();
    let sifted_slots: Vec<usize> = result
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.sifted)
        .map(|(i, _)| i + 1) // 1-indexed
        .collect();
    assert_eq!(sifted_slots, vec![1, 4, 5, 6, 8, 9, 10, 12, 14]);

    let key: String = result
        .sifted_key_alice
        .iter()
        .map(|b| char::from(b'0' + b))
        .collect();
    assert_eq!(key, "110010010");
    assert_eq!(result.sifted_key_alice, result.sifted_key_bob);
    assert_eq!(result.qber, 0.0);
}
