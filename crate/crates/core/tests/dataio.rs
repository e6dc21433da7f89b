use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use gpc::dataio::synth::{generate_split, write_synthetic_split, SynthSplitPlan};
use gpc::dataio::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn records(n_subjects: usize, per_subject: usize) -> Vec<SampleRecord> {
    (0..n_subjects)
        .flat_map(|s| {
            (0..per_subject).map(move |k| SampleRecord {
                image_path: PathBuf::from(format!("s{s}_{k}.png")),
                subject_id: format!("s{s}"),
                zone: GazeZone::ALL[k % 7],
                condition: CaptureCondition::ALL[k % 4],
                landmarks: None,
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subject_splits_stay_disjoint_under_any_order(seed in any::<u64>(), per_subject in 1usize..12) {
        let mut recs = records(13, per_subject);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        recs.shuffle(&mut rng);
        let mut ids: Vec<String> = (0..13).map(|s| format!("s{s}")).collect();
        ids.shuffle(&mut rng);
        let assignment: HashMap<String, Split> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), if i < 9 { Split::Train } else if i < 10 { Split::Val } else { Split::Test }))
            .collect();
        let out = split_by_subject(&recs, &assignment).unwrap();
        let sets: Vec<BTreeSet<&str>> = [Split::Train, Split::Val, Split::Test].iter().map(|&s| subjects(out.get(s))).collect();
        prop_assert_eq!(sets.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![9, 1, 3]);
        for i in 0..3 {
            for j in i + 1..3 {
                prop_assert!(sets[i].is_disjoint(&sets[j]));
            }
        }
        prop_assert_eq!(out.train.len() + out.val.len() + out.test.len(), recs.len());
    }

    #[test]
    fn batches_cover_the_input_multiset(items in prop::collection::vec(0u8..5, 1..80), bs in 1usize..17, seed in any::<u64>()) {
        let mut seen: Vec<u8> = batch_iter(&items, bs, seed).unwrap().flatten().collect();
        let mut want = items.clone();
        seen.sort();
        want.sort();
        prop_assert_eq!(seen, want);
    }
}

#[test]
fn unassigned_subject_is_an_error() {
    let recs = records(2, 1);
    let assignment = HashMap::from([("s0".to_string(), Split::Train)]);
    assert!(matches!(split_by_subject(&recs, &assignment), Err(gpc::Error::UnassignedSubject(s)) if s == "s1"));
}

#[test]
fn written_synthetic_split_round_trips_through_loading() {
    let dir = tempfile::tempdir().unwrap();
    let plan = SynthSplitPlan { subjects: 2, per_zone: 1, subjects_with_glasses: 1 };
    let samples = generate_split(&SyntheticSpec::default(), &plan, &CaptureCondition::ALL, "train", 11).unwrap();
    let written = write_synthetic_split(dir.path(), "train", &samples).unwrap();
    let loaded = load_manifest(&written.manifest).unwrap();
    assert_eq!(loaded.len(), samples.len());
    let cfg = PreprocessConfig { image_size: 64, ..Default::default() };
    let from_disk = EyeDataset::from_records(&loaded, &cfg).unwrap();
    let in_memory = EyeDataset::from_synth(&samples, &cfg).unwrap();
    assert_eq!(from_disk.len(), in_memory.len());
    for i in 0..from_disk.len() {
        assert_eq!(from_disk.zones[i], in_memory.zones[i]);
        assert_eq!(from_disk.conditions[i], in_memory.conditions[i]);
        assert_eq!(from_disk.pixels(i), in_memory.pixels(i));
    }
    let truth = gpc::dataio::synth::load_ground_truth(&written.ground_truth).unwrap();
    assert_eq!(truth.len(), samples.len());
    assert_eq!(truth[0].1, samples[0].pupil_center);
}
