use augforge::latent::{
    latent_objective, odd_score, train_classifier, train_classifier_traced, DirLoader,
    EmbeddingLoader, EmbeddingSet, LatentError, LinearClassifier, MemoryLoader, TrainConfig,
};
use augforge::search::{grid_search, ParamDim, ParamSpace, ParamVector, DEFAULT_BUDGET};
use augforge::synthetic::separable_clusters;
use augforge::Scalar;

fn accuracy<T: Scalar>(clf: &LinearClassifier<T>, clear: &EmbeddingSet, odd: &EmbeddingSet) -> f64 {
    let half = T::of(0.5);
    let right = clear.rows().filter(|r| clf.probability(r) < half).count()
        + odd.rows().filter(|r| clf.probability(r) > half).count();
    right as f64 / (clear.len() + odd.len()) as f64
}

#[test]
fn clusters_are_separable_by_first_coordinate() {
    let (clear, odd) = separable_clusters(50, 3);
    assert_eq!((clear.len(), odd.len(), clear.dim()), (50, 50, 2));
    assert!(clear
        .rows()
        .all(|r| r[0] < 0.0 && (r[0] + 2.0).abs() <= 0.1 && r[1].abs() <= 0.1));
    assert!(odd
        .rows()
        .all(|r| r[0] > 0.0 && (r[0] - 2.0).abs() <= 0.1 && r[1].abs() <= 0.1));
}

fn check_separable<T: Scalar>() {
    for seed in [1, 2, 3, 42] {
        let (clear, odd) = separable_clusters(50, seed);
        let cfg = TrainConfig::default();
        let (clf, trace) = train_classifier_traced::<T>(&clear, &odd, &cfg).unwrap();
        assert!(clf.training_meta.iterations <= 1000);
        assert!(accuracy(&clf, &clear, &odd) >= 0.99, "seed {seed}");
        assert!(odd_score(&clf, &odd).unwrap() > T::of(0.9));
        assert!(odd_score(&clf, &clear).unwrap() < T::of(0.1));
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "loss rose from {:?} to {:?}", w[0], w[1]);
        }
        assert_eq!(*trace.last().unwrap(), clf.training_meta.final_loss);
    }
}

#[test]
fn separable_training_f64() {
    check_separable::<f64>();
}

#[test]
fn separable_training_f32() {
    check_separable::<f32>();
}

#[test]
fn large_learning_rate_still_descends() {
    let (clear, odd) = separable_clusters(50, 9);
    let cfg = TrainConfig {
        learning_rate: 1e4,
        max_iters: 200,
        ..TrainConfig::default()
    };
    let (clf, trace) = train_classifier_traced::<f64>(&clear, &odd, &cfg).unwrap();
    assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(accuracy(&clf, &clear, &odd) >= 0.99);
}

#[test]
fn training_is_deterministic() {
    let (clear, odd) = separable_clusters(30, 5);
    let a = train_classifier::<f64>(&clear, &odd, &TrainConfig::default()).unwrap();
    let b = train_classifier::<f64>(&clear, &odd, &TrainConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_configs_are_rejected() {
    let (clear, odd) = separable_clusters(5, 1);
    for cfg in [
        TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            learning_rate: f64::NAN,
            ..TrainConfig::default()
        },
        TrainConfig {
            l2: -1.0,
            ..TrainConfig::default()
        },
    ] {
        assert!(matches!(
            train_classifier::<f64>(&clear, &odd, &cfg),
            Err(LatentError::InvalidConfig(_))
        ));
    }
    let wide = EmbeddingSet::from_rows(vec![vec![0.0; 3]]).unwrap();
    assert!(matches!(
        train_classifier::<f64>(&clear, &wide, &TrainConfig::default()),
        Err(LatentError::DimensionMismatch { .. })
    ));
}

fn shifted(x: f32) -> EmbeddingSet {
    EmbeddingSet::from_rows((0..4).map(|i| vec![x + i as f32 * 0.01, 0.0]).collect()).unwrap()
}

#[test]
fn latent_objective_prefers_odd_like_embeddings() {
    let (clear, odd) = separable_clusters(50, 11);
    let clf = train_classifier::<f64>(&clear, &odd, &TrainConfig::default()).unwrap();
    let space = ParamSpace::new(vec![ParamDim::continuous("beta", 0.0, 0.1)]).unwrap();
    let mut loader = MemoryLoader::default();
    // embeddings move from the clear cluster to the odd one as beta grows
    for p in space.grid(5) {
        loader.insert(&p, shifted(-2.0 + 40.0 * p.get("beta").unwrap() as f32));
    }
    let trace = grid_search(&space, 5, DEFAULT_BUDGET, latent_objective(&clf, &loader)).unwrap();
    assert_eq!(trace.best().params.get("beta"), Some(0.1));
    let scores: Vec<f64> = trace.evaluations.iter().map(|e| e.objective).collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]), "{scores:?}");

    let missing = ParamVector(vec![("beta".into(), 0.5)]);
    assert!(matches!(
        loader.load(&missing),
        Err(LatentError::MissingEmbeddings { .. })
    ));
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (clear, odd) = separable_clusters(20, 4);
    let clf = train_classifier::<f64>(&clear, &odd, &TrainConfig::default()).unwrap();
    let clf_path = dir.path().join("clf.json");
    clf.write(&clf_path).unwrap();
    assert_eq!(LinearClassifier::<f64>::read(&clf_path).unwrap(), clf);

    let p = ParamVector(vec![("beta".into(), 0.05)]);
    let loader = DirLoader::new(dir.path());
    odd.write(&loader.path_for(&p)).unwrap();
    let back = loader.load(&p).unwrap();
    assert_eq!(back, odd);
    assert_eq!(
        odd_score(&clf, &back).unwrap(),
        odd_score(&clf, &odd).unwrap()
    );
}
