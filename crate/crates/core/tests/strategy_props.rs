use std::collections::{BTreeMap, BTreeSet};

use augforge::augment::{FogParams, KernelParams};
use augforge::scene_io::ConditionTag;
use augforge::search::{ParamDim, ParamSpace};
use augforge::strategy::{
    assign_loss_weights, balanced_validation, build_minibatch_groups, build_ratio_manifest,
    cv_folds, cv_folds_manifest, split_dataset, with_entries, DatasetManifest, Fractions, Ratio,
    RatioPlan, Role, SceneRef, Split, StrategyError,
};
use proptest::prelude::*;

const RATIOS: [(u32, u32); 5] = [(1, 1), (1, 2), (1, 3), (2, 1), (3, 2)];

fn scenes(n: usize, tag: ConditionTag, prefix: &str) -> Vec<SceneRef> {
    (0..n)
        .map(|i| SceneRef::new(format!("{prefix}{i:03}"), tag))
        .collect()
}

fn fog_space() -> ParamSpace {
    ParamSpace::new(vec![
        ParamDim::continuous("beta", 0.005, 0.08),
        ParamDim::continuous("airlight", 0.6, 0.95),
    ])
    .unwrap()
}

fn manifest(ratio: (u32, u32), n: usize, seed: u64) -> DatasetManifest {
    let kernel = KernelParams::Fog(FogParams::default());
    let space = fog_space();
    let plan = RatioPlan {
        ratio: Ratio::new(ratio.0, ratio.1),
        kernel: &kernel,
        space: &space,
        seed,
        flip_probability: None,
    };
    build_ratio_manifest(&scenes(n, ConditionTag::Clear, "img"), &plan).unwrap()
}

#[test]
fn ratio_counts_are_exact_on_120_images() {
    for (r, a) in RATIOS {
        let m = manifest((r, a), 120, 7);
        let real = m.count(Split::Train, Role::Real);
        let aug = m.count(Split::Train, Role::Augmented);
        assert_eq!(real, 120);
        assert_eq!(real * a as usize, aug * r as usize, "{r}:{a}");
        assert!(m.ratio.satisfied_by(real, aug));
        m.validate().unwrap();
        // every augmented entry has a real parent and a resolvable spec
        let parents: BTreeSet<&str> = m
            .entries
            .iter()
            .filter(|e| e.role == Role::Real)
            .map(|e| e.entry_id.as_str())
            .collect();
        for e in m.entries.iter().filter(|e| e.role == Role::Augmented) {
            assert!(parents.contains(e.parent_id.as_deref().unwrap()));
            assert!(m.specs.contains_key(e.spec_ref.as_deref().unwrap()));
        }
    }
}

#[test]
fn augmentations_of_one_parent_are_distinct() {
    let m = manifest((1, 3), 120, 2);
    let mut by_parent: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for e in m.entries.iter().filter(|e| e.role == Role::Augmented) {
        let spec = &m.specs[e.spec_ref.as_deref().unwrap()];
        by_parent
            .entry(e.parent_id.as_deref().unwrap())
            .or_default()
            .push(serde_json::to_string(&spec.params).unwrap());
    }
    assert_eq!(by_parent.len(), 120);
    for (p, specs) in by_parent {
        let unique: BTreeSet<&String> = specs.iter().collect();
        assert_eq!(unique.len(), specs.len(), "parent {p}");
    }
}

#[test]
fn ratio_manifest_is_seed_deterministic() {
    assert_eq!(manifest((3, 2), 120, 5), manifest((3, 2), 120, 5));
    assert_ne!(manifest((3, 2), 120, 5), manifest((3, 2), 120, 6));
}

#[test]
fn infeasible_ratio_is_rejected() {
    let kernel = KernelParams::Fog(FogParams::default());
    let space = fog_space();
    let plan = RatioPlan {
        ratio: Ratio::new(3, 2),
        kernel: &kernel,
        space: &space,
        seed: 1,
        flip_probability: None,
    };
    assert!(matches!(
        build_ratio_manifest(&scenes(121, ConditionTag::Clear, "x"), &plan),
        Err(StrategyError::InfeasibleRatio(_))
    ));
}

#[test]
fn groups_hold_one_parent_and_k_children() {
    for k in 1..=3u32 {
        let m = build_minibatch_groups(&manifest((1, k), 120, 3), k as usize).unwrap();
        let mut groups: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for e in m.entries_in(Split::Train) {
            let g = groups.entry(e.group_id.as_deref().unwrap()).or_default();
            match e.role {
                Role::Real => g.0 += 1,
                Role::Augmented => g.1 += 1,
            }
        }
        assert_eq!(groups.len(), 120);
        assert!(groups.values().all(|&c| c == (1, k as usize)), "k={k}");
        // children share their parent's group
        let group_of: BTreeMap<&str, &str> = m
            .entries
            .iter()
            .map(|e| (e.entry_id.as_str(), e.group_id.as_deref().unwrap()))
            .collect();
        for e in m.entries.iter().filter(|e| e.role == Role::Augmented) {
            assert_eq!(
                group_of[e.entry_id.as_str()],
                group_of[e.parent_id.as_deref().unwrap()]
            );
        }
    }
    // 2:1 leaves half the parents without a child
    assert!(matches!(
        build_minibatch_groups(&manifest((2, 1), 120, 3), 1),
        Err(StrategyError::UnevenAugCount { .. })
    ));
}

#[test]
fn folds_keep_families_together() {
    for (r, a) in RATIOS {
        let m = manifest((r, a), 120, 4);
        let folds = cv_folds_manifest(&m, 5, 9).unwrap();
        let parent_of: BTreeMap<&str, &str> = m
            .entries
            .iter()
            .map(|e| {
                (
                    e.entry_id.as_str(),
                    e.parent_id.as_deref().unwrap_or(&e.entry_id),
                )
            })
            .collect();
        let mut holdout_of: BTreeMap<&str, usize> = BTreeMap::new();
        for f in &folds {
            assert_eq!(f.train.len() + f.holdout.len(), m.entries.len());
            for id in &f.holdout {
                assert!(
                    holdout_of.insert(id, f.index).is_none(),
                    "{id} held out twice"
                );
            }
        }
        assert_eq!(holdout_of.len(), m.entries.len());
        for (id, fold) in &holdout_of {
            assert_eq!(
                *fold, holdout_of[parent_of[id]],
                "{id} separated from its parent"
            );
        }
    }
}

#[test]
fn loss_weights_and_balanced_validation() {
    let m = manifest((1, 1), 120, 1);
    let m = assign_loss_weights(&m, 0.3).unwrap();
    for e in &m.entries {
        let want = if e.role == Role::Augmented { 0.3 } else { 0.7 };
        assert_eq!(e.loss_weight, want);
    }
    let clear = scenes(40, ConditionTag::Clear, "vc");
    let rain = scenes(40, ConditionTag::Rain, "vr");
    let v = balanced_validation(&m, &clear, &rain, 15, 2).unwrap();
    let val: Vec<_> = v.entries_in(Split::Val).collect();
    assert_eq!(val.len(), 30);
    assert_eq!(
        val.iter()
            .filter(|e| e.condition_tag == ConditionTag::Rain)
            .count(),
        15
    );
    assert!(val.iter().all(|e| e.loss_weight
        == if e.condition_tag.is_adverse() {
            0.3
        } else {
            0.7
        }));
    assert!(matches!(
        balanced_validation(&m, &clear, &rain, 41, 2),
        Err(StrategyError::InsufficientData { .. })
    ));
    assert!(assign_loss_weights(&m, 1.0).is_err());
}

#[test]
fn manifest_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = with_entries(
        manifest((1, 2), 12, 8),
        &scenes(4, ConditionTag::Rain, "t"),
        Split::Test,
    )
    .unwrap();
    let path = dir.path().join("m.json");
    m.write(&path).unwrap();
    assert_eq!(DatasetManifest::read(&path).unwrap(), m);
}

proptest! {
    #[test]
    fn split_partitions_the_universe(
        n_clear in 0usize..60,
        n_rain in 0usize..60,
        train in 0u32..=100,
        val_share in 0u32..=100,
        seed in any::<u64>(),
    ) {
        prop_assume!(n_clear + n_rain > 0);
        let val = (100 - train) * val_share / 100;
        let test = 100 - train - val;
        let fr = Fractions::new(train as f64 / 100.0, val as f64 / 100.0, test as f64 / 100.0);
        let items: Vec<(String, ConditionTag)> = (0..n_clear)
            .map(|i| (format!("c{i}"), ConditionTag::Clear))
            .chain((0..n_rain).map(|i| (format!("r{i}"), ConditionTag::Rain)))
            .collect();
        let a = split_dataset(&items, fr, seed).unwrap();
        prop_assert_eq!(a.0.len(), items.len());
        let mut union = BTreeSet::new();
        for s in Split::ALL {
            for id in a.ids(s) {
                prop_assert!(union.insert(id.to_string()));
            }
        }
        prop_assert_eq!(union.len(), items.len());
        prop_assert_eq!(&a, &split_dataset(&items, fr, seed).unwrap());
    }

    #[test]
    fn cv_folds_partition(n in 2usize..80, k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let ids: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
        let folds = cv_folds(&ids, k, seed).unwrap();
        let mut held = BTreeSet::new();
        for f in &folds {
            prop_assert_eq!(f.train.len() + f.holdout.len(), n);
            prop_assert!(f.holdout.len() == n / k || f.holdout.len() == n / k + 1);
            for id in &f.holdout {
                prop_assert!(held.insert(id.clone()));
                prop_assert!(!f.train.contains(id));
            }
        }
        prop_assert_eq!(held.len(), n);
    }
}
