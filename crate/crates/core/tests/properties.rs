use std::collections::BTreeSet;

use musicid::eval::{
    anova_oneway, f_pvalue, kfold, score_identification, split_matrix, split_session_frames, SplitSpec,
};
use musicid::featurize::{featurize_session, frame_count, make_frames, select_features, FrameOrigin};
use musicid::forest::{gini_impurity, train_forest, Forest, Node, Samples};
use musicid::ingest::{drop_delta, parse_session, write_session_csv, ColumnMapping, Sample};
use musicid::{
    ChannelId, Condition, FeatureId, FeatureMatrix, FeatureSelection, FeatureVector, ForestParams, Session,
    SessionMeta, SignalKind, Stat,
};
use proptest::prelude::*;

fn session_from(values: &[[f64; 24]]) -> Session {
    let samples = values
        .iter()
        .enumerate()
        .map(|(t, v)| Sample { timestamp: t as f64 * 0.5, values: *v })
        .collect();
    Session::new(SessionMeta::new("u1", Condition::SameSong, 1), 0.5, samples).unwrap()
}

fn sample_values() -> impl Strategy<Value = [f64; 24]> {
    prop::array::uniform24(prop_oneof![Just(0.0), -50.0f64..50.0])
}

fn session_strategy(min: usize, max: usize) -> impl Strategy<Value = Session> {
    prop::collection::vec(sample_values(), min..max).prop_map(|v| session_from(&v))
}

fn labelled_matrix(rows: &[(usize, Vec<f64>)]) -> FeatureMatrix {
    let width = rows[0].1.len();
    let columns = FeatureId::all().into_iter().take(width).collect();
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, (label, values))| FeatureVector {
            values: values.clone(),
            origin: FrameOrigin {
                session: SessionMeta::new(format!("user{label}"), Condition::SameSong, 1),
                frame_index: i,
            },
        })
        .collect();
    FeatureMatrix { columns, rows }
}

fn labelled_rows(n_features: usize) -> impl Strategy<Value = Vec<(usize, Vec<f64>)>> {
    prop::collection::vec((0usize..3, prop::collection::vec(-10.0f64..10.0, n_features)), 6..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_count_matches_enumeration(n in 2usize..400, len in 2usize..60, hop_frac in 0.0f64..1.0) {
        let hop = 1 + ((len - 1) as f64 * hop_frac) as usize;
        prop_assume!(n >= len);
        let enumerated = (0..).map(|i| i * hop).take_while(|s| s + len <= n).count();
        prop_assert_eq!(frame_count(n, len, hop).unwrap(), enumerated);
    }

    #[test]
    fn frames_start_at_multiples_of_hop(session in session_strategy(40, 120)) {
        let frames = make_frames(&drop_delta(&session), 40, 20).unwrap();
        for (i, f) in frames.iter().enumerate() {
            prop_assert_eq!(f.start, i * 20);
            prop_assert!(f.values.iter().all(|s| s.len() == 40));
        }
    }

    #[test]
    fn feature_bounds_hold(session in session_strategy(40, 100)) {
        let m = featurize_session(&drop_delta(&session), 40, 20).unwrap();
        for row in &m.rows {
            prop_assert_eq!(row.values.len(), 80);
            for channel in ChannelId::ALL {
                for signal in SignalKind::RETAINED {
                    let get = |stat| row.values[FeatureId::new(channel, signal, stat).index()];
                    prop_assert!(get(Stat::Min) <= get(Stat::Mean) && get(Stat::Mean) <= get(Stat::Max));
                    prop_assert!((0.0..=1.0).contains(&get(Stat::Zcr)));
                }
            }
        }
    }

    #[test]
    fn positive_scaling_keeps_zcr_and_scales_the_rest(session in session_strategy(40, 80), c in 0.01f64..100.0) {
        let mut scaled = session.clone();
        for s in &mut scaled.samples {
            for v in &mut s.values {
                *v *= c;
            }
        }
        let a = featurize_session(&drop_delta(&session), 40, 20).unwrap();
        let b = featurize_session(&drop_delta(&scaled), 40, 20).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            for (i, (x, y)) in ra.values.iter().zip(&rb.values).enumerate() {
                if FeatureId::from_index(i).stat == Stat::Zcr {
                    prop_assert_eq!(x, y);
                } else {
                    prop_assert!((x * c - y).abs() <= 1e-9 * (x * c).abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn selection_is_idempotent_and_commutes(
        session in session_strategy(40, 60),
        channels in prop::collection::btree_set(prop::sample::select(ChannelId::ALL.to_vec()), 1..4),
        signals in prop::collection::btree_set(prop::sample::select(SignalKind::RETAINED.to_vec()), 1..5),
    ) {
        let m = featurize_session(&drop_delta(&session), 40, 20).unwrap();
        let by_channel = FeatureSelection::channels(channels.iter().copied());
        let by_signal = FeatureSelection::signals(signals.iter().copied());
        let once = select_features(&m, &by_channel).unwrap();
        prop_assert_eq!(&select_features(&once, &by_channel).unwrap(), &once);
        let cs = select_features(&once, &by_signal).unwrap();
        let sc = select_features(&select_features(&m, &by_signal).unwrap(), &by_channel).unwrap();
        prop_assert_eq!(cs.n_features(), channels.len() * signals.len() * 4);
        prop_assert_eq!(cs, sc);
    }

    #[test]
    fn csv_round_trip_is_exact(session in session_strategy(1, 30)) {
        let mut bytes = Vec::new();
        write_session_csv(&session, &mut bytes).unwrap();
        let parsed = parse_session(&bytes[..], session.meta.clone(), &ColumnMapping::canonical()).unwrap();
        prop_assert_eq!(parsed.dropped, 0);
        prop_assert_eq!(&parsed.session.samples, &session.samples);
        let mut again = Vec::new();
        write_session_csv(&parsed.session, &mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }

    #[test]
    fn drop_delta_keeps_everything_else(session in session_strategy(1, 20)) {
        let reduced = drop_delta(&session);
        for (t, sample) in session.samples.iter().enumerate() {
            for signal in SignalKind::RETAINED {
                for channel in ChannelId::ALL {
                    let slot = musicid::signal::reduced_slot(signal, channel).unwrap();
                    prop_assert_eq!(reduced.samples[t][slot].to_bits(), sample.get(signal, channel).to_bits());
                }
            }
        }
    }

    #[test]
    fn gini_is_bounded(counts in prop::collection::vec(0u32..50, 1..8)) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let g = gini_impurity(&counts).unwrap();
        let k = counts.len() as f64;
        prop_assert!(g >= 0.0 && g <= 1.0 - 1.0 / k + 1e-12);
        let pure = counts.iter().filter(|&&c| c > 0).count() == 1;
        prop_assert_eq!(g == 0.0, pure);
    }

    #[test]
    fn trees_respect_max_depth(rows in labelled_rows(4), depth in 1usize..6, seed in any::<u64>()) {
        let m = labelled_matrix(&rows);
        prop_assume!(m.users().len() >= 2);
        let params = ForestParams { n_trees: 5, max_depth: depth, seed, ..ForestParams::default() };
        let f = train_forest(&m, &params).unwrap();
        for t in &f.trees {
            prop_assert!(t.depth() <= depth);
            for node in t.nodes() {
                if let Node::Internal { impurity_decrease, .. } = node {
                    prop_assert!(*impurity_decrease > 0.0);
                }
            }
        }
        let s: f64 = f.feature_importance().iter().sum();
        prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_column_transform_keeps_predictions(rows in labelled_rows(3), seed in any::<u64>()) {
        let m = labelled_matrix(&rows);
        prop_assume!(m.users().len() >= 2);
        // without bootstrap every training value is a split candidate, so the
        // transformed midpoints still separate the same training rows
        let params = ForestParams { n_trees: 10, bootstrap: false, seed, ..ForestParams::default() };
        let transform = |m: &FeatureMatrix, g: &dyn Fn(f64) -> f64| {
            let mut out = m.clone();
            for r in &mut out.rows {
                r.values[1] = g(r.values[1]);
            }
            out
        };
        let base = train_forest(&m, &params).unwrap();
        // any strictly increasing map keeps decisions on the training rows
        let cubic = |x: f64| x * x * x + x;
        let moved = transform(&m, &cubic);
        let f = train_forest(&moved, &params).unwrap();
        let before: Vec<usize> = base.predict_matrix(&m).unwrap().iter().map(|p| p.class).collect();
        let after: Vec<usize> = f.predict_matrix(&moved).unwrap().iter().map(|p| p.class).collect();
        prop_assert_eq!(&before, &after);
        // an increasing affine map also keeps them on fresh points
        let affine = |x: f64| 2.0 * x + 3.0;
        let f = train_forest(&transform(&m, &affine), &params).unwrap();
        let probe = labelled_matrix(&rows.iter().map(|(l, v)| (*l, v.iter().map(|x| x + 0.37).collect())).collect::<Vec<_>>());
        let p1: Vec<usize> = base.predict_matrix(&probe).unwrap().iter().map(|p| p.class).collect();
        let p2: Vec<usize> = f.predict_matrix(&transform(&probe, &affine)).unwrap().iter().map(|p| p.class).collect();
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn single_class_prediction_ignores_row_order(values in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..20), seed in any::<u64>()) {
        let mut reversed = values.clone();
        reversed.reverse();
        let params = ForestParams { n_trees: 5, seed, ..ForestParams::default() };
        let names: Vec<String> = (0..3).map(|i| FeatureId::from_index(i).to_string()).collect();
        for data in [&values, &reversed] {
            let samples = Samples::from_rows(data, vec![0; data.len()]).unwrap();
            let f = Forest::fit(&samples, vec!["user0".into()], names.clone(), &params).unwrap();
            for x in &values {
                let p = f.predict(x).unwrap();
                prop_assert_eq!(p.class, 0);
                prop_assert_eq!(p.votes, vec![1.0]);
            }
        }
    }

    #[test]
    fn session_split_partitions_frames(n in 2usize..50, frac in 0.05f64..0.95, gap in 0usize..2) {
        let spec = SplitSpec { train_fraction: frac, gap, ..SplitSpec::default() };
        let Ok((train, test)) = split_session_frames(n, &spec) else {
            prop_assume!(false);
            unreachable!()
        };
        prop_assert!(!test.is_empty());
        prop_assert_eq!(*test.last().unwrap(), n - 1);
        prop_assert!(test.windows(2).all(|w| w[1] == w[0] + 1));
        prop_assert!(train.iter().all(|&i| i < test[0]));
        prop_assert_eq!(train.len() + test.len() + gap, n);
    }

    #[test]
    fn kfold_partitions_rows(rows in labelled_rows(2), k in 2usize..6, seed in any::<u64>()) {
        let m = labelled_matrix(&rows);
        prop_assume!(m.len() >= k);
        let folds = kfold(&m, k, seed).unwrap();
        let mut seen = BTreeSet::new();
        for f in &folds {
            for &i in &f.validation {
                prop_assert!(seen.insert(i));
            }
            prop_assert_eq!(f.train.len() + f.validation.len(), m.len());
        }
        prop_assert_eq!(seen.len(), m.len());
        let sizes: Vec<usize> = folds.iter().map(|f| f.validation.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn f_pvalue_is_bounded_and_decreasing(a in 0.0f64..30.0, b in 0.0f64..30.0, df1 in 1u64..40, df2 in 1u64..400) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (p_lo, p_hi) = (f_pvalue(lo, df1, df2).unwrap(), f_pvalue(hi, df1, df2).unwrap());
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
        prop_assert!(p_hi <= p_lo);
        if hi > lo + 1e-3 && p_lo > 1e-300 {
            prop_assert!(p_hi < p_lo);
        }
    }

    #[test]
    fn anova_is_invariant_to_shift(groups in prop::collection::vec(prop::collection::vec(-20.0f64..20.0, 2..6), 2..5), c in -1e3f64..1e3) {
        let Ok(base) = anova_oneway(&groups) else { return Ok(()) };
        let shifted: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x + c).collect()).collect();
        let moved = anova_oneway(&shifted).unwrap();
        prop_assert!((base.f_statistic - moved.f_statistic).abs() <= 1e-6 * base.f_statistic.max(1.0));
    }
}

#[test]
fn confusion_total_equals_test_size() {
    let spec = musicid::synth::CohortSpec { separation: 1.0, seed: 4, ..Default::default() };
    let m = musicid::featurize::featurize_dataset(&musicid::synth::generate_cohort(&spec).unwrap(), 40, 20).unwrap();
    let (train, test) = split_matrix(&m, &SplitSpec::default()).unwrap();
    let f = train_forest(&train, &ForestParams::default().with_trees(20)).unwrap();
    let r = score_identification(&f, &test).unwrap();
    let total: u64 = r.confusion.iter().flatten().sum();
    let trace: u64 = (0..r.confusion.len()).map(|i| r.confusion[i][i]).sum();
    assert_eq!(total, test.len() as u64);
    assert_eq!(r.n_test, total);
    assert_eq!(r.accuracy, trace as f64 / total as f64);
}
