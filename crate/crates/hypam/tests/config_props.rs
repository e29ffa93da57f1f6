use std::collections::BTreeMap;

use proptest::prelude::*;
use serde_json::Value;

use hypam::config::ExperimentConfig;
use hypam::experiments::EXPERIMENTS;

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        (-1e6f64..1e6).prop_map(Value::from),
        (0u64..1_000_000).prop_map(Value::from),
        "[a-z-]{1,8}".prop_map(Value::from),
        prop::collection::vec(-10.0f64..10.0, 1..4).prop_map(Value::from),
    ]
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        "[a-z-]{1,12}",
        prop::collection::btree_map("[a-z-]{1,6}", value(), 0..6),
        any::<u64>(),
    )
        .prop_map(|(command, params, seed)| ExperimentConfig {
            command,
            params,
            seed,
            workers: None,
            out: None,
        })
}

proptest! {
    #[test]
    fn serialization_round_trips(c in config()) {
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.settings_hash(), c.settings_hash());
    }

    #[test]
    fn hash_ignores_key_order(c in config()) {
        // rebuild the JSON text with the parameter keys in reverse order
        let mut text = String::from("{\"seed\":");
        text.push_str(&c.seed.to_string());
        text.push_str(",\"params\":{");
        let entries: Vec<String> = c
            .params
            .iter()
            .rev()
            .map(|(k, v)| format!("{}:{}", Value::from(k.as_str()), v))
            .collect();
        text.push_str(&entries.join(","));
        text.push_str("},\"command\":");
        text.push_str(&Value::from(c.command.as_str()).to_string());
        text.push('}');
        let reordered = ExperimentConfig::from_json(&text).unwrap();
        prop_assert_eq!(reordered.settings_hash(), c.settings_hash());
    }

    #[test]
    fn workers_and_out_do_not_change_the_hash(c in config(), w in 1usize..16) {
        let mut d = c.clone();
        d.workers = Some(w);
        d.out = Some("elsewhere".into());
        prop_assert_eq!(d.settings_hash(), c.settings_hash());
    }

    #[test]
    fn resolved_configs_round_trip(i in 0usize..11, seed in any::<u64>()) {
        let exp = &EXPERIMENTS[i];
        let resolved = ExperimentConfig::new(exp.name, seed).resolve(exp.params).unwrap();
        let back = ExperimentConfig::from_json(&resolved.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.resolve(exp.params).unwrap(), resolved);
    }
}

#[test]
fn distinct_settings_hash_differently() {
    let mut params = BTreeMap::new();
    params.insert("t".to_string(), Value::from(2.0));
    let a = ExperimentConfig {
        command: "moments".into(),
        params: params.clone(),
        seed: 0,
        workers: None,
        out: None,
    };
    params.insert("t".to_string(), Value::from(2.5));
    let b = ExperimentConfig {
        params,
        ..a.clone()
    };
    assert_ne!(a.settings_hash(), b.settings_hash());
}
