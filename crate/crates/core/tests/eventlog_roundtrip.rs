use condmem::{run, Detection, Detector, Ensemble, EventKind, EventLog, RunConfig, TrialRecord};
use proptest::prelude::*;

fn detection() -> impl Strategy<Value = Detection> {
    (any::<bool>(), -22i32..=22, any::<bool>()).prop_map(|(a, t, background)| Detection {
        detector: if a { Detector::A } else { Detector::B },
        time_ns: 2 * t,
        background,
    })
}

fn event() -> impl Strategy<Value = EventKind> {
    prop_oneof![
        Just(EventKind::None),
        (0u32..30, 0u32..30).prop_map(|(age_l, age_r)| EventKind::Ready { age_l, age_r }),
        (any::<bool>(), 0u32..30).prop_map(|(l, age)| EventKind::Flush {
            ensemble: if l { Ensemble::L } else { Ensemble::R },
            age
        }),
    ]
}

proptest! {
    #[test]
    fn text_round_trip(
        gaps in prop::collection::vec(1u64..1000, 0..40),
        rest in prop::collection::vec((any::<bool>(), any::<bool>(), event(), prop::collection::vec(detection(), 0..4)), 40),
        seed in any::<u64>(),
    ) {
        let mut t = 0;
        let records: Vec<TrialRecord> = gaps
            .iter()
            .zip(rest)
            .map(|(g, (herald_l, herald_r, event, detections))| {
                t += g;
                TrialRecord { trial_index: t, herald_l, herald_r, event, detections }
            })
            .collect();
        let config = RunConfig { seed, n_trials: t + 1, ..Default::default() };
        let log = EventLog { config, records };
        let text = log.to_text();
        prop_assert_eq!(EventLog::parse(&text).unwrap(), log);
    }
}

#[test]
fn simulated_log_survives_a_file() {
    let cfg = RunConfig {
        n_trials: 2_000_000,
        seed: 4,
        ..Default::default()
    };
    let log = run(&cfg).unwrap();
    let path = std::env::temp_dir().join(format!("condmem-roundtrip-{}.log", std::process::id()));
    log.save(&path).unwrap();
    let back = EventLog::load(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(back, log);
    assert_eq!(back.summary(), log.summary());
}

#[test]
fn edited_header_is_rejected() {
    let log = run(&RunConfig {
        n_trials: 10_000,
        ..Default::default()
    })
    .unwrap();
    let text = log.to_text().replacen("run.seed=1", "run.seed=2", 1);
    assert!(EventLog::parse(&text).is_err());
}
