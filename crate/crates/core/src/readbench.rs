//! Reading benchmark: write plans with the template writer, read them back,
//! and count exact recoveries.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{generate_context, ContextConfig, DotId, Scene};
use crate::history::{HistoryTurn, Speaker};
use crate::meaning::MeaningProgram;
use crate::perception::Config;
use crate::planner::{Plan, PlanAct};
use crate::reader::Reader;
use crate::writer::{program_for, write};

/// Utterances drawn per scene.
pub const PER_SCENE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub text: String,
    pub history: Vec<HistoryTurn>,
    pub expected: MeaningProgram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadReport {
    pub samples: usize,
    pub exact: usize,
    pub accuracy: f64,
    pub act: usize,
    pub reference: usize,
    pub polarity: usize,
    pub constraints: usize,
    /// Samples the reader refused outright.
    pub errors: usize,
    pub elapsed_ms: f64,
}

fn pair(a: DotId, b: DotId) -> Plan {
    Plan {
        act: PlanAct::New,
        config: Config::new([a, b]).expect("two distinct dots"),
        base: Config::empty(),
        ref_turn: None,
        eig: 0.0,
    }
}

fn question(scene: &Scene, p: &Plan) -> HistoryTurn {
    HistoryTurn {
        speaker: Speaker::Partner,
        text: write(p, scene, None).expect("pairs always verbalize"),
        program: Some(program_for(p, scene, None).expect("pairs always verbalize")),
    }
}

/// Draws `n` samples over fresh boards. Each sample comes with a history
/// in which its reference resolves to turn 0.
pub fn samples(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut board = 0u64;
    while out.len() < n {
        let scene = generate_context(seed.wrapping_add(board), 4, &ContextConfig::default())
            .expect("default geometry is feasible")
            .agent_scene;
        board += 1;
        let ids: Vec<DotId> = scene.ids().collect();
        let mut made = 0;
        while made < PER_SCENE && out.len() < n {
            let mut pick = ids.clone();
            pick.shuffle(&mut rng);
            let (base, other) = (pair(pick[0], pick[1]), pair(pick[2], pick[3]));
            let confirm = [None, Some(true), Some(false)][rng.random_range(0..3)];
            let yes = HistoryTurn {
                speaker: Speaker::Agent,
                text: "Yes.".into(),
                program: Some(MeaningProgram::confirmation(true, 0)),
            };
            let (plan, history) = match rng.random_range(0..3) {
                0 => (
                    pair(pick[0], pick[1]),
                    if confirm.is_some() { vec![question(&scene, &other)] } else { Vec::new() },
                ),
                k => {
                    let (act, config) = if k == 1 {
                        (PlanAct::FollowUp, base.config.extended(&[pick[2]]).expect("distinct dots"))
                    } else {
                        (PlanAct::Select, Config::single(pick[0]))
                    };
                    let history = match confirm {
                        Some(true) => vec![question(&scene, &base)],
                        Some(false) => vec![question(&scene, &base), yes, question(&scene, &other)],
                        None => vec![question(&scene, &base), yes],
                    };
                    (Plan { act, config, base: base.config.clone(), ref_turn: Some(0), eig: 0.0 }, history)
                }
            };
            if let (Ok(text), Ok(expected)) = (write(&plan, &scene, confirm), program_for(&plan, &scene, confirm)) {
                out.push(Sample { text, history, expected });
                made += 1;
            }
        }
    }
    out
}

pub fn evaluate_reader(reader: &dyn Reader, samples: &[Sample]) -> ReadReport {
    let start = Instant::now();
    let mut r = ReadReport {
        samples: samples.len(),
        exact: 0,
        accuracy: 0.0,
        act: 0,
        reference: 0,
        polarity: 0,
        constraints: 0,
        errors: 0,
        elapsed_ms: 0.0,
    };
    for s in samples {
        match reader.read(&s.text, &s.history) {
            Ok(got) => {
                let e = &s.expected;
                r.act += usize::from(got.act() == e.act());
                r.reference += usize::from(got.ref_turn() == e.ref_turn());
                r.polarity += usize::from(got.polarity() == e.polarity());
                r.constraints += usize::from(got.new_dots() == e.new_dots() && got.constraints() == e.constraints());
                r.exact += usize::from(&got == e);
            }
            Err(_) => r.errors += 1,
        }
    }
    r.accuracy = if samples.is_empty() { 0.0 } else { r.exact as f64 / samples.len() as f64 };
    r.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    r
}
