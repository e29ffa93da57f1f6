//! The acceptance criteria as data. Each criterion names the runs it needs and the
//! checks it reads from them; runs shared between criteria are executed once.

use std::collections::BTreeMap;
use std::time::Instant;

use hypam::config::ExperimentConfig;
use hypam::output::{table_to_csv, Outcome};
use hypam::run_config;

pub enum Evidence {
    /// Checks read from experiment runs.
    Checks(Vec<(ExperimentConfig, &'static [&'static str])>),
    /// Byte-identical CSVs across reruns with different worker counts.
    Determinism(Vec<ExperimentConfig>),
}

pub struct Criterion {
    pub number: usize,
    pub title: &'static str,
    pub evidence: Evidence,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub number: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn cfg(command: &str, params: &[(&str, &str)]) -> ExperimentConfig {
    params
        .iter()
        .fold(ExperimentConfig::new(command, 0), |c, (k, v)| c.set(k, v))
}

fn checks(runs: Vec<(ExperimentConfig, &'static [&'static str])>) -> Evidence {
    Evidence::Checks(runs)
}

/// The eighteen criteria at their stated settings. Probe counts for the
/// ∀-statements (cover, support, Σφ²) are doubled.
pub fn criteria() -> Vec<Criterion> {
    let flattening = || cfg("eigen-flattening", &[]);
    let pou = || cfg("pou-check", &[("probes", "200000")]);
    let decomp = || cfg("decompose", &[("probes", "200000")]);
    let exit = || cfg("exit-fit", &[]);
    let t_list = "0.5,1,1.5,2";
    vec![
        Criterion {
            number: 1,
            title: "distance flattening slope",
            evidence: checks(vec![(cfg("geometry-flattening", &[]), &["slope"])]),
        },
        Criterion {
            number: 2,
            title: "J_t converges to J",
            evidence: checks(vec![(
                cfg("jt-convergence", &[("t", "1e4")]),
                &["max_rel_err", "rate"],
            )]),
        },
        Criterion {
            number: 3,
            title: "eigenvalue flattening",
            evidence: checks(vec![(flattening(), &["flattening", "bessel"])]),
        },
        Criterion {
            number: 4,
            title: "long-time slope",
            evidence: checks(vec![(flattening(), &["long_time"])]),
        },
        Criterion {
            number: 5,
            title: "eigenvalue derivative",
            evidence: checks(vec![(flattening(), &["derivative"])]),
        },
        Criterion {
            number: 6,
            title: "eigenvalue scaling identity",
            evidence: checks(vec![(cfg("eigen-scaling", &[]), &["scaling_identity"])]),
        },
        Criterion {
            number: 7,
            title: "decomposition inequality",
            evidence: checks(vec![(pou(), &["decomposition_inequality"])]),
        },
        Criterion {
            number: 8,
            title: "partition of unity",
            evidence: checks(vec![(
                pou(),
                &["sum_of_squares", "support", "r_law", "alpha_uniformity"],
            )]),
        },
        Criterion {
            number: 9,
            title: "packing cover and multiplicity",
            evidence: checks(vec![(decomp(), &["cover", "multiplicity"])]),
        },
        Criterion {
            number: 10,
            title: "cell diameter certificate",
            evidence: checks(vec![(decomp(), &["diameter"])]),
        },
        Criterion {
            number: 11,
            title: "exit-time bound shape",
            evidence: checks(vec![(exit(), &["shape", "richardson"])]),
        },
        Criterion {
            number: 12,
            title: "heat-kernel scaling and DM bound",
            evidence: checks(vec![(cfg("hk-scaling", &[]), &["kde", "dm_bound"])]),
        },
        Criterion {
            number: 13,
            title: "moment oracle",
            evidence: checks(vec![
                (
                    cfg(
                        "moments",
                        &[("profile", "constant"), ("p", "2"), ("t", "2")],
                    ),
                    &["collapse"],
                ),
                (
                    cfg(
                        "moments",
                        &[("profile", "gaussian-bump"), ("p", "1"), ("t", t_list)],
                    ),
                    &["ratio_increasing", "ratio_bounded"],
                ),
            ]),
        },
        Criterion {
            number: 14,
            title: "intermittency gap",
            evidence: checks(vec![
                (
                    cfg(
                        "moments",
                        &[("profile", "constant"), ("p", "2"), ("q", "1"), ("t", "2")],
                    ),
                    &["gap_exact"],
                ),
                (
                    cfg(
                        "moments",
                        &[
                            ("profile", "gaussian-bump"),
                            ("p", "2"),
                            ("q", "1"),
                            ("t", t_list),
                        ],
                    ),
                    &["gap_positive", "gap_increasing"],
                ),
            ]),
        },
        Criterion {
            number: 15,
            title: "exit-rate cross-check",
            evidence: checks(vec![(exit(), &["survival_rate"])]),
        },
        Criterion {
            number: 16,
            title: "chi closed form",
            evidence: checks(vec![
                (
                    cfg(
                        "chi",
                        &[("d", "1"), ("gamma", "2"), ("R", "6"), ("nodes", "400")],
                    ),
                    &["closed_form", "scaling"],
                ),
                (
                    cfg("chi", &[("d", "3"), ("mode", "radial")]),
                    &["closed_form"],
                ),
                (
                    cfg("chi", &[("d", "3"), ("mode", "product")]),
                    &["closed_form"],
                ),
            ]),
        },
        Criterion {
            number: 17,
            title: "Legendre direction",
            evidence: checks(vec![(
                cfg("legendre", &[]),
                &["no_violation", "ground_state"],
            )]),
        },
        Criterion {
            number: 18,
            title: "determinism",
            evidence: Evidence::Determinism(determinism_configs()),
        },
    ]
}

/// One small configuration per subcommand.
pub fn determinism_configs() -> Vec<ExperimentConfig> {
    vec![
        cfg("geometry-flattening", &[("pairs", "5")]),
        cfg("jt-convergence", &[("measures", "10")]),
        cfg(
            "eigen-flattening",
            &[
                ("n-r", "40"),
                ("n-theta", "16"),
                ("slope-nodes", "80"),
                ("derivative-probes", "2"),
                ("derivative-n-r", "20"),
                ("derivative-n-theta", "8"),
            ],
        ),
        cfg("eigen-scaling", &[("n-r", "16"), ("n-theta", "8")]),
        cfg(
            "decompose",
            &[
                ("probes", "2000"),
                ("packings", "1"),
                ("thetas", "0.4"),
                ("alphas", "0.1"),
                ("k-max", "4"),
            ],
        ),
        cfg(
            "pou-check",
            &[
                ("probes", "2000"),
                ("sup-probes", "500"),
                ("alphas", "0.1"),
                ("potentials", "3"),
                ("ineq-n-r", "24"),
                ("ineq-n-theta", "24"),
            ],
        ),
        cfg(
            "exit-fit",
            &[
                ("paths", "2000"),
                ("particles", "200"),
                ("sv-duration", "3"),
                ("t-lo", "1"),
                ("t-hi", "3"),
                ("spectral-nodes", "200"),
            ],
        ),
        cfg(
            "hk-scaling",
            &[
                ("paths", "2000"),
                ("fit-rho-step", "1"),
                ("check-rho-step", "0.1"),
            ],
        ),
        cfg(
            "moments",
            &[
                ("p", "2"),
                ("q", "1"),
                ("t", "0.5,1"),
                ("paths", "50"),
                ("dt", "0.02"),
            ],
        ),
        cfg("chi", &[("nodes", "100"), ("starts", "2")]),
        cfg("legendre", &[("nodes", "80"), ("profiles", "4")]),
    ]
}

/// CSV bytes of every table of a run, keyed by table name.
pub fn csv_bytes(config: &ExperimentConfig) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let (resolved, outcome, _) = run_config(config).map_err(|e| e.to_string())?;
    let hash = resolved.settings_hash();
    outcome
        .tables
        .iter()
        .map(|t| {
            Ok((
                t.name.clone(),
                table_to_csv(t, &hash).map_err(|e| e.to_string())?,
            ))
        })
        .collect()
}

/// Runs criteria, executing each distinct configuration once.
#[derive(Default)]
pub struct Suite {
    cache: BTreeMap<String, Result<Outcome, String>>,
}

impl Suite {
    fn outcome(&mut self, config: &ExperimentConfig) -> Result<Outcome, String> {
        let key = serde_json::to_string(config).expect("config serializes");
        self.cache
            .entry(key)
            .or_insert_with(|| {
                run_config(config)
                    .map(|(_, o, _)| o)
                    .map_err(|e| e.to_string())
            })
            .clone()
    }

    pub fn evaluate(&mut self, c: &Criterion) -> Verdict {
        let start = Instant::now();
        let mut passed = true;
        let mut parts = Vec::new();
        match &c.evidence {
            Evidence::Checks(runs) => {
                for (config, names) in runs {
                    match self.outcome(config) {
                        Ok(out) => {
                            for name in names.iter() {
                                match out.find_check(name) {
                                    Some(ch) => {
                                        passed &= ch.passed;
                                        let mark = if ch.passed { "ok" } else { "FAIL" };
                                        parts.push(format!("{name} {mark} ({})", ch.detail));
                                    }
                                    None => {
                                        passed = false;
                                        parts.push(format!(
                                            "{name} missing from {}",
                                            config.command
                                        ));
                                    }
                                }
                            }
                        }
                        Err(e) => {
                            passed = false;
                            parts.push(format!("{} failed to run: {e}", config.command));
                        }
                    }
                }
            }
            Evidence::Determinism(configs) => {
                for config in configs {
                    let mut a = config.clone();
                    a.workers = Some(1);
                    let mut b = config.clone();
                    b.workers = Some(3);
                    match (csv_bytes(&a), csv_bytes(&b)) {
                        (Ok(x), Ok(y)) if x == y && !x.is_empty() => {}
                        (Ok(_), Ok(_)) => {
                            passed = false;
                            parts.push(format!("{} CSVs differ", config.command));
                        }
                        (Err(e), _) | (_, Err(e)) => {
                            passed = false;
                            parts.push(format!("{} failed to run: {e}", config.command));
                        }
                    }
                }
                if passed {
                    parts.push(format!(
                        "{} subcommands byte-identical across reruns",
                        configs.len()
                    ));
                }
            }
        }
        Verdict {
            number: c.number,
            title: c.title,
            passed,
            detail: parts.join("; "),
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}
