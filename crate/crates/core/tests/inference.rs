mod common;

use std::sync::Arc;

use common::{model_with_clusters, toy, toy_set};
use prefstack::events::{identities, segment_prefix};
use prefstack::infer::{commit, replay, Engine, Resolution, Session};
use prefstack::synth::{bookcase_task, fig4_like, generate};
use prefstack::train::{train, TrainConfig};
use prefstack::{Action, Error, SecondaryActionSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn engine(groups: &[Vec<prefstack::Demonstration>]) -> Arc<Engine> {
    Arc::new(Engine::new(model_with_clusters(groups)).unwrap())
}

fn primary(i: usize) -> Action {
    Action::Primary(format!("p{i}"))
}

#[test]
fn posterior_counts_matching_members() {
    let e = engine(&[
        vec![toy("u1", &["a", ""]), toy("u2", &["a", ""]), toy("u3", &["b", ""])],
        vec![toy("u4", &["c", ""])],
    ]);
    // c1: 2/3 matching x prior 3/4; c2: 0 x 1/4
    let post = e.posterior_high(&[toy_set("a")], 1);
    assert_eq!(post, vec![1.0, 0.0]);
    assert_eq!(e.posterior_high(&[], 0), vec![0.75, 0.25]);
    // nothing matches: priors
    assert_eq!(e.posterior_high(&[toy_set("d")], 1), vec![0.75, 0.25]);
}

#[test]
fn posterior_splits_evenly_between_symmetric_clusters() {
    let e = engine(&[vec![toy("u1", &["a", "b"])], vec![toy("u2", &["a", "c"])]]);
    assert_eq!(e.posterior_high(&[toy_set("a")], 1), vec![0.5, 0.5]);
}

#[test]
fn commit_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(commit(&[1.0, 0.0], &mut rng), 0);
    for _ in 0..100 {
        assert_eq!(commit(&[0.4, 0.35, 0.25], &mut rng), 0);
    }
    let firsts = (0..1000u64)
        .filter(|&s| commit(&[0.5, 0.5], &mut ChaCha8Rng::seed_from_u64(s)) == 0)
        .count();
    let freq = firsts as f64 / 1000.0;
    assert!((freq - 0.5).abs() <= 0.05, "{freq}");
}

#[test]
fn low_posterior_follows_the_shelf_style() {
    // one side: supply then one NOOP; both sides: supply then three NOOPs
    let one_side = ["a", "", "a", "", "a", "", "a", ""];
    let both = ["a", "", "", "", "a", "", "", ""];
    let e = engine(&[vec![
        toy("b1", &one_side),
        toy("b2", &one_side),
        toy("c1", &both),
        toy("c2", &both),
    ]]);
    let ec = e.model().event_clusters(&toy_set("a")).unwrap();
    assert_eq!(ec.clusters.len(), 2);
    let one_side_cluster = ec
        .clusters
        .iter()
        .position(|c| c.members.iter().any(|m| m.user_id == "b1"))
        .unwrap();
    let observed = [toy_set("a"), SecondaryActionSet::noop(), toy_set("a")];
    let post = e.posterior_low(&toy_set("a"), &observed).unwrap();
    let mut expected = vec![0.0; 2];
    expected[one_side_cluster] = 1.0;
    assert_eq!(post, expected);
    assert_eq!(e.posterior_low(&toy_set("a"), &[]).unwrap(), vec![0.5, 0.5]);
    assert_eq!(
        e.posterior_low(&toy_set("d"), &[]),
        Err(Error::UnknownEvent(toy_set("d").to_string()))
    );
}

#[test]
fn first_prediction_is_the_unanimous_opening() {
    let task = bookcase_task();
    let corpus = generate(&fig4_like(), &task, 3).unwrap();
    let boards_first: Vec<_> = corpus
        .demos
        .iter()
        .zip(&corpus.users)
        .filter(|(_, u)| u.group.as_deref() == Some("boards-con-shelves"))
        .map(|(d, _)| d.clone())
        .collect();
    let model = train(&boards_first, &task, &TrainConfig::default()).unwrap();
    let mut s = Session::new(Arc::new(Engine::new(model).unwrap()), Resolution::TwoStage, 1);
    assert_eq!(s.predict().set, boards_first[0].steps[0].secondary);
    assert_eq!(
        boards_first[0].steps[0].secondary,
        common::set(&["bring:long_board", "bring:short_board"])
    );
}

#[test]
fn event_boundary_moves_to_the_next_event() {
    let e = engine(&[vec![toy("u1", &["a", "", "b", ""]), toy("u2", &["a", "", "b", ""])]]);
    for resolution in [Resolution::TwoStage, Resolution::EventOnly] {
        let mut s = Session::new(Arc::clone(&e), resolution, 5);
        assert_eq!(s.predict().set, toy_set("a"));
        s.observe_feedback(true, None).unwrap();
        s.observe_primary(&primary(0)).unwrap();
        // both member sequences of the event are longer than one step
        assert_eq!(s.predict().set, SecondaryActionSet::noop());
        s.observe_feedback(true, None).unwrap();
        s.observe_primary(&primary(1)).unwrap();
        // no member continues past two steps: next event of the plan
        assert_eq!(s.predict().set, toy_set("b"));
    }
}

#[test]
fn exhausted_plan_predicts_noop() {
    let e = engine(&[vec![toy("u1", &["a"]), toy("u2", &["a"])]]);
    let mut s = Session::new(e, Resolution::TwoStage, 0);
    s.predict();
    s.observe_feedback(true, None).unwrap();
    s.observe_primary(&primary(0)).unwrap();
    s.predict();
    s.observe_feedback(false, Some(toy_set("b"))).unwrap();
    s.observe_primary(&primary(1)).unwrap();
    let p = s.predict();
    assert!(p.exhausted);
    assert!(p.set.is_noop());
    assert!(s.is_exhausted());
}

#[test]
fn feedback_protocol() {
    let e = engine(&[vec![toy("u1", &["a", "b"]), toy("u2", &["a", "b"])]]);
    let mut s = Session::new(e, Resolution::TwoStage, 0);
    assert_eq!(s.observe_feedback(true, None), Err(Error::NoPendingPrediction));
    // primary without a prediction carries NOOP
    s.observe_primary(&primary(0)).unwrap();
    assert!(s.steps()[0].secondary.is_noop());

    let predicted = s.predict().set;
    assert_eq!(s.pending_prediction(), Some(&predicted));
    assert_eq!(s.observe_primary(&primary(1)), Err(Error::PendingFeedback));
    assert_eq!(s.observe_feedback(false, None), Err(Error::MissingActual));
    s.observe_feedback(false, Some(toy_set("c"))).unwrap();
    assert_eq!(s.observe_feedback(true, None), Err(Error::NoPendingPrediction));
    s.observe_primary(&primary(1)).unwrap();
    assert_eq!(s.steps()[1].secondary, toy_set("c"));

    let predicted = s.predict().set;
    s.observe_feedback(true, None).unwrap();
    s.observe_primary(&primary(2)).unwrap();
    assert_eq!(s.steps()[2].secondary, predicted);
    assert_eq!(s.transcript().len(), 2);
    assert_eq!(s.transcript()[0].accepted, Some(false));
    assert_eq!(s.transcript()[1].actual, Some(predicted));

    assert!(matches!(
        s.observe_primary(&Action::Secondary("bring:a".into())),
        Err(Error::WrongKind { .. })
    ));
    assert!(matches!(s.observe_primary(&primary(99)), Err(Error::UnknownAction(_))));
    assert!(matches!(
        s.observe_primary(&Action::Primary("bring_a".into())),
        Err(Error::WrongKind { .. })
    ));
}

#[test]
fn observed_prefix_matches_segmentation() {
    let task = bookcase_task();
    let corpus = generate(&fig4_like(), &task, 4).unwrap();
    let (held, rest) = corpus.demos.split_first().unwrap();
    let e = Arc::new(Engine::new(train(rest, &task, &TrainConfig::default()).unwrap()).unwrap());
    let mut s = Session::new(e, Resolution::TwoStage, 8);
    for (t, step) in held.steps.iter().enumerate() {
        s.predict();
        s.observe_feedback(false, Some(step.secondary.clone())).unwrap();
        s.observe_primary(&Action::Primary(step.primary.clone())).unwrap();
        let expected = identities(&segment_prefix(held, t + 1).unwrap());
        assert_eq!(s.observed_identities(), expected);
        assert!((s.posterior_high().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn clone_of_a_training_user_is_recognised() {
    let task = bookcase_task();
    let corpus = generate(&fig4_like(), &task, 6).unwrap();
    let model = train(&corpus.demos, &task, &TrainConfig::default()).unwrap();
    let target = model
        .high_clusters
        .iter()
        .position(|c| c.members.iter().any(|m| m == "u12"))
        .unwrap();
    let e = Arc::new(Engine::new(model).unwrap());
    let demo = corpus.demos.iter().find(|d| d.user_id == "u12").unwrap();
    let mut s = Session::new(e, Resolution::TwoStage, 0);
    let mut certain = false;
    for step in &demo.steps {
        s.predict();
        s.observe_feedback(false, Some(step.secondary.clone())).unwrap();
        s.observe_primary(&Action::Primary(step.primary.clone())).unwrap();
        let p = s.posterior_high()[target];
        if certain {
            assert_eq!(p, 1.0);
        }
        certain |= p == 1.0;
    }
    assert!(certain);
}

#[test]
fn event_only_follows_cluster_mates_inside_the_first_event() {
    let task = bookcase_task();
    let corpus = generate(&fig4_like(), &task, 10).unwrap();
    let (held, rest) = corpus.demos.split_first().unwrap();
    let model = train(rest, &task, &TrainConfig::default()).unwrap();
    let e = Arc::new(Engine::new(model.clone()).unwrap());
    let out = replay(&e, held, Resolution::EventOnly, 2).unwrap();
    // the frames block is the same for everyone who starts with it
    let mut s = Session::new(e, Resolution::EventOnly, 2);
    for (t, step) in held.steps.iter().enumerate().take(8) {
        let predicted = s.predict().set;
        let z = s.committed_high().unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for u in &model.high_clusters[z].members {
            *counts.entry(model.demonstration(u).unwrap().steps[t].secondary.clone()).or_insert(0) += 1;
        }
        let max = *counts.values().max().unwrap();
        assert_eq!(counts.get(&predicted), Some(&max), "step {t}");
        assert_eq!(out[t].predicted, predicted);
        s.observe_feedback(predicted == step.secondary, Some(step.secondary.clone())).unwrap();
        s.observe_primary(&Action::Primary(step.primary.clone())).unwrap();
    }
}

#[test]
fn posteriors_are_normalised_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let letters = ["", "a", "b", "ab", "c", "d"];
    for round in 0..200 {
        let clusters = rng.gen_range(1..4);
        let groups: Vec<Vec<_>> = (0..clusters)
            .map(|c| {
                (0..rng.gen_range(1..4))
                    .map(|u| {
                        let len = rng.gen_range(1..10);
                        let sets: Vec<&str> = (0..len).map(|_| letters[rng.gen_range(0..letters.len())]).collect();
                        toy(&format!("r{round}c{c}u{u}"), &sets)
                    })
                    .collect()
            })
            .collect();
        let e = engine(&groups);
        let probe = &groups[0][0];
        for t in 0..=probe.len() {
            let observed = if t == 0 { vec![] } else { identities(&segment_prefix(probe, t).unwrap()) };
            let post = e.posterior_high(&observed, t);
            assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(post.iter().all(|&p| p >= 0.0));
        }
        for ec in &e.model().low_clusters {
            let member = &ec.clusters[0].members[0].sequence;
            for m in 0..=member.len() {
                let post = e.posterior_low(&ec.identity, &member[..m]).unwrap();
                assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn sessions_are_reproducible() {
    let task = bookcase_task();
    let corpus = generate(&fig4_like(), &task, 12).unwrap();
    let (held, rest) = corpus.demos.split_last().unwrap();
    let e = Arc::new(Engine::new(train(rest, &task, &TrainConfig::default()).unwrap()).unwrap());
    for resolution in [Resolution::TwoStage, Resolution::EventOnly] {
        assert_eq!(replay(&e, held, resolution, 99).unwrap(), replay(&e, held, resolution, 99).unwrap());
    }
}
