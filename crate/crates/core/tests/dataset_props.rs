use std::collections::BTreeSet;

use metaverify::dataset::prompt::{check_consistency, violation_regions};
use metaverify::dataset::{build_dataset, decouple, load_jsonl, save_jsonl, stream_counts, DatasetManifest};
use metaverify::{Judgment, Stream};
use proptest::prelude::*;

fn manifest(seed: u64, n: usize, ratio: [u32; 2]) -> DatasetManifest {
    DatasetManifest {
        seed,
        n_samples: n,
        true_false_ratio: ratio,
        ..DatasetManifest::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn labels_agree_with_checker(seed in any::<u64>(), n in 1usize..40, t in 0u32..4, f in 1u32..4) {
        let data = build_dataset(&manifest(seed, n, [t, f])).unwrap();
        prop_assert_eq!(data.len(), n);
        let n_true = data.iter().filter(|s| s.label().is_true()).count();
        let want = ((2 * n as u64 * u64::from(t) + u64::from(t + f)) / (2 * u64::from(t + f))) as usize;
        prop_assert_eq!(n_true, want);
        for s in &data {
            let v = check_consistency(s.scene(), s.prompt()).unwrap();
            prop_assert_eq!(v.is_empty(), s.label().is_true());
            let flagged: BTreeSet<_> = violation_regions(&v).into_iter().collect();
            let gt: BTreeSet<_> = s.gt_regions().iter().copied().collect();
            prop_assert_eq!(flagged, gt);
        }
    }

    #[test]
    fn decouple_adds_one_grounding_copy_per_false(seed in any::<u64>(), n in 1usize..40) {
        let data = build_dataset(&manifest(seed, n, [1, 1])).unwrap();
        let d = decouple(&data).unwrap();
        let n_false = data.iter().filter(|s| s.label() == Judgment::False).count();
        prop_assert_eq!(stream_counts(&d), (n, n_false));
        prop_assert_eq!(&d[..n], &data[..]);
        for (g, orig) in d[n..].iter().zip(data.iter().filter(|s| !s.label().is_true())) {
            prop_assert_eq!(g.stream(), Stream::Grounding);
            prop_assert_eq!(g.scene(), orig.scene());
            prop_assert_eq!(g.gt_regions(), orig.gt_regions());
        }
        prop_assert_eq!(decouple(&d).is_err(), n_false > 0);
    }

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>()) {
        let a = build_dataset(&manifest(seed, 12, [1, 1])).unwrap();
        let b = build_dataset(&manifest(seed, 12, [1, 1])).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn jsonl_round_trip() {
    let data = decouple(&build_dataset(&manifest(7, 30, [1, 2])).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    save_jsonl(&data, &path).unwrap();
    assert_eq!(load_jsonl(&path).unwrap(), data);
}

#[test]
fn jsonl_rejects_invalid_samples_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let data = build_dataset(&manifest(1, 2, [1, 0])).unwrap();
    let mut text = metaverify::dataset::to_jsonl_string(&data);
    text.push_str(r#"{"scene":{"canvas":10,"objects":[]},"prompt":"0 objects.","label":"True","gt_regions":[[0,0,1,1]],"stream":"Judgment"}"#);
    text.push('\n');
    std::fs::write(&path, text).unwrap();
    let err = load_jsonl(&path).unwrap_err().to_string();
    assert!(err.starts_with("line 3"), "{err}");
}
