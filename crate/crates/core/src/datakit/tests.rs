use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::error::Error;
use crate::numcore::Tensor;

fn pubs(n: usize) -> Dataset {
    let mut spec = SyntheticSpec::new(SyntheticTask::XorCrossmodal, n, 3);
    spec.grid_size = 6;
    generate_synthetic(&spec).unwrap().dataset
}

#[test]
fn jsonl_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let mut ds = pubs(10);
    ds.publications[0].caption = Some("a caption".into());
    ds.publications[1].visual = Some(Visual::Features(vec![0.25, -1.5]));
    ds.publications[2].entity_features = Some(vec![1.0, 2.0, 3.0]);
    // above the blob threshold
    ds.publications[3].visual = Some(Visual::Grid(Tensor::from_fn(&[20, 20, 1], |i| i as f64 * 0.5)));
    write_jsonl(&ds, &path).unwrap();
    let back = load_jsonl(&path).unwrap();
    assert_eq!(back, ds);
    assert!(std::fs::read_to_string(&path).unwrap().contains("grid_blob"));
}

#[test]
fn truncated_line_names_line_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    std::fs::write(
        &path,
        "{\"id\":\"a\",\"text\":\"hi\",\"label\":\"Hate\"}\n{\"id\":\"b\",\"text\":\"yo\",\"label\":\"NoHate\"}\n{\"id\":\"c\",\"te\n",
    )
    .unwrap();
    let err = load_jsonl(&path).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
}

#[test]
fn missing_caption_and_unknown_label() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    std::fs::write(&path, "{\"id\":\"a\",\"text\":\"hi\",\"label\":\"NoHate\"}\n").unwrap();
    let ds = load_jsonl(&path).unwrap();
    assert_eq!(ds.publications[0].caption, None);
    assert_eq!(ds.label_histogram(), vec![0, 1]);

    std::fs::write(&path, "{\"id\":\"a\",\"text\":\"hi\",\"label\":\"Angry\"}\n").unwrap();
    assert!(matches!(load_jsonl(&path), Err(Error::Schema(_))));
}

#[test]
fn header_declares_label_space() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let header = serde_json::json!({"labels": LabelSpace::mmhs()});
    std::fs::write(&path, format!("{header}\n{{\"id\":\"a\",\"text\":\"x\",\"label\":\"Sexist\"}}\n")).unwrap();
    let ds = load_jsonl(&path).unwrap();
    assert_eq!(ds.labels, LabelSpace::mmhs());
    assert_eq!(ds.publications[0].label, 2);
    assert_eq!(ds.binarized().unwrap().publications[0].label, 0);
}

#[test]
fn empty_publication_is_rejected() {
    let p = Publication {
        id: "x".into(),
        visual: None,
        text: "  ".into(),
        caption: None,
        entity_features: None,
        label: 0,
    };
    assert!(matches!(Dataset::new(vec![p], LabelSpace::binary()), Err(Error::Schema(_))));
}

#[test]
fn binary_merge() {
    let s = LabelSpace::mmhs();
    let b = LabelSpace::binary();
    let merged = |name: &str| b.names[merge_to_binary(s.index_of(name).unwrap(), &s).unwrap()].clone();
    assert_eq!(merged("Racist"), HATE);
    assert_eq!(merged("No Hate"), NO_HATE);
    assert_eq!(merged("Religion-based"), HATE);
    let image: BTreeSet<usize> = (0..s.len()).map(|i| merge_to_binary(i, &s).unwrap()).collect();
    assert_eq!(image, BTreeSet::from([0, 1]));
    assert!(matches!(merge_to_binary(6, &s), Err(Error::Schema(_))));
    let emotions = LabelSpace::custom(["happy", "sad", "angry", "neutral"]).unwrap();
    assert!(matches!(merge_to_binary(0, &emotions), Err(Error::Schema(_))));
}

#[test]
fn synthetic_is_deterministic() {
    let spec = SyntheticSpec::new(SyntheticTask::XorCrossmodal, 50, 42);
    assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    let other = SyntheticSpec { seed: 43, ..spec.clone() };
    assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
}

#[test]
fn synthetic_rejects_bad_specs() {
    let base = SyntheticSpec::new(SyntheticTask::XorCrossmodal, 10, 0);
    for spec in [
        SyntheticSpec { vocab_size: 0, ..base.clone() },
        SyntheticSpec { grid_size: 5, ..base.clone() },
        SyntheticSpec { n: 0, ..base.clone() },
        SyntheticSpec { noise: -1.0, ..base.clone() },
    ] {
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))), "{spec:?}");
    }
}

#[test]
fn xor_bayes_and_balance() {
    assert_eq!(bayes_single_modality_accuracy(SyntheticTask::XorCrossmodal), (0.5, 0.5));
    assert_eq!(bayes_single_modality_accuracy(SyntheticTask::UnimodalSeparable), (1.0, 1.0));
    let spec = SyntheticSpec {
        noise: 0.0,
        ..SyntheticSpec::new(SyntheticTask::XorCrossmodal, 10_000, 1)
    };
    let data = generate_synthetic(&spec).unwrap();
    let labels: Vec<usize> = data.dataset.publications.iter().map(|p| p.label).collect();
    let balance = labels.iter().sum::<usize>() as f64 / labels.len() as f64;
    assert!((balance - 0.5).abs() <= 0.02, "{balance}");
    let a: Vec<usize> = data.visual_bits.iter().map(|&b| usize::from(b)).collect();
    let b: Vec<usize> = data.text_bits.iter().map(|&b| usize::from(b)).collect();
    assert!(mutual_information_bits(&a, &labels) < 0.01);
    assert!(mutual_information_bits(&b, &labels) < 0.01);
    assert!((mutual_information_bits(&a, &a) - 1.0).abs() < 0.01);
}

#[test]
fn hidden_bits_are_rendered() {
    let data = generate_synthetic(&SyntheticSpec::new(SyntheticTask::XorCrossmodal, 200, 9)).unwrap();
    for (i, p) in data.dataset.publications.iter().enumerate() {
        let has_rainy = p.text.split(' ').any(|w| w == "rainy");
        assert_eq!(has_rainy, data.text_bits[i]);
        let Some(Visual::Grid(g)) = &p.visual else { panic!() };
        let side = g.shape()[0];
        let (mut left, mut right) = (0.0, 0.0);
        for (k, v) in g.data().iter().enumerate() {
            if k % side < side / 2 { left += v } else { right += v }
        }
        assert_eq!(right > left, data.visual_bits[i]);
        assert_eq!(p.label, usize::from(data.visual_bits[i] ^ data.text_bits[i]));
    }
}

#[test]
fn split_sizes_and_errors() {
    let s = split_and_batch(100, [0.8, 0.1, 0.1], 32, 5).unwrap();
    assert_eq!(s.train_indices().len(), 80);
    assert_eq!(s.val_indices().len(), 10);
    assert_eq!(s.test_indices().len(), 10);
    assert_eq!(s.train.iter().map(Vec::len).collect::<Vec<_>>(), vec![32, 32, 16]);
    assert_eq!(s, split_and_batch(100, [0.8, 0.1, 0.1], 32, 5).unwrap());
    assert!(matches!(split_and_batch(10, [0.8, 0.1, 0.1], 0, 5), Err(Error::Config(_))));
    assert!(matches!(split_and_batch(10, [0.8, 0.3, 0.1], 2, 5), Err(Error::Config(_))));
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 0usize..300, a in 0.0f64..1.0, b in 0.0f64..1.0, bs in 1usize..40, seed: u64) {
        let (r0, r1) = (a, (1.0 - a) * b);
        let s = split_and_batch(n, [r0, r1, 1.0 - r0 - r1], bs, seed).unwrap();
        let mut all = s.train_indices();
        all.extend(s.val_indices());
        all.extend(s.test_indices());
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for part in [&s.train, &s.val, &s.test] {
            prop_assert!(part.iter().all(|b| !b.is_empty() && b.len() <= bs));
        }
    }
}
