//! Built-in demo material: a mock rule table, few-shot examples, a hand-built
//! model over the default schema and a scripted five-segment session.
//!
//! Used by tests, by the service in demo mode and by `cofac` when no files are given.

use chrono::{TimeZone, Utc};

use crate::advisor::{parse_fewshot, FewShotExample, StageGoals};
use crate::backend::RuleTable;
use crate::classifier::{CbmModel, Hyperparams, Scaler};
use crate::dataset::{Segment, Utterance};
use crate::schema::{default_schema, ConceptSchema};

pub const MOCK_RULES_JSON: &str = include_str!("../data/mock_rules.json");
pub const FEWSHOT_JSON: &str = include_str!("../data/fewshot.json");

pub fn mock_rules() -> RuleTable {
    serde_json::from_str(MOCK_RULES_JSON).expect("bundled rule table parses")
}

pub fn fewshot() -> Vec<FewShotExample> {
    parse_fewshot(FEWSHOT_JSON).expect("bundled few-shot file parses")
}

/// Raw-scale weights (identity scaler) of the fixture model.
pub const FIXTURE_WEIGHTS: &[(&str, f64)] = &[
    ("Privacy Issue", 3.0),
    ("Missed Session Question", 0.5),
    ("Sad", 0.55),
    ("Afraid", 0.4),
    ("Admiration", -0.2),
    ("Passive", -0.6),
    ("Deny Changes", 0.6),
    ("Goal Difficulty Scale", 0.3),
];
pub const FIXTURE_INTERCEPT: f64 = -2.0;

/// Hand-built model over [`default_schema`].
///
/// With everything else at zero: Deny Changes 5 gives YES and 0 gives NO;
/// with Deny Changes 4, Passive 5 gives NO and Passive 0 gives YES;
/// Privacy Issue alone gives YES.
pub fn fixture_model() -> CbmModel {
    fixture_model_for(&default_schema())
}

pub fn fixture_model_for(schema: &ConceptSchema) -> CbmModel {
    let mut w = vec![0.0; schema.len()];
    for (name, c) in FIXTURE_WEIGHTS {
        if let Some(i) = schema.index_of(name) {
            w[i] = *c;
        }
    }
    let k = schema.len();
    let mut m = CbmModel::from_parts(
        schema,
        w,
        FIXTURE_INTERCEPT,
        Scaler {
            means: vec![0.0; k],
            stds: vec![1.0; k],
        },
        Hyperparams::default(),
    )
    .expect("fixture dimensions match");
    m.trained_at = Utc.timestamp_opt(1_700_000_000, 0).single().expect("valid");
    m
}

pub fn demo_goals() -> StageGoals {
    StageGoals {
        session_number: 1,
        goals: vec!["Each member sets one weekly goal".into()],
        agenda: vec!["Introductions".into(), "Goal setting".into(), "Wrap-up".into()],
    }
}

/// Lines of each 60 s segment of the scripted session.
///
/// Segment 0 and 4 stay below threshold; 1, 2 and 3 fire with an `other`,
/// `redirect` and `support` suggestion respectively.
pub const SCRIPT: [&[(&str, &str)]; 5] = [
    &[
        ("Facilitator", "Good morning everyone, welcome back."),
        ("P1", "Morning! Nice to see you all."),
    ],
    &[
        ("P2", "Before we start, can we keep what I say private?"),
        ("P2", "I don't want it repeated outside this room."),
    ],
    &[
        ("P3", "So then the hurricane took half our roof."),
        ("P3", "Honestly nothing needs to change for me, it was just bad luck."),
    ],
    &[
        ("P1", "Since my sister moved away I have been so lonely."),
        ("P1", "Most days I just sit at home."),
    ],
    &[
        ("P2", "Whatever, I don't know what my goal should be."),
        ("Facilitator", "That's fine, we can think about it together."),
    ],
];

/// The scripted session as contiguous 60 s segments starting at t=0.
pub fn demo_segments(session_id: &str) -> Vec<Segment> {
    SCRIPT
        .iter()
        .enumerate()
        .map(|(i, lines)| {
            let t0 = 60.0 * i as f64;
            let step = 60.0 / lines.len() as f64;
            Segment {
                session_id: session_id.to_string(),
                t0_s: t0,
                t1_s: t0 + 60.0,
                utterances: lines
                    .iter()
                    .enumerate()
                    .map(|(j, (speaker, text))| Utterance {
                        t0_s: t0 + step * j as f64,
                        t1_s: t0 + step * (j as f64 + 1.0),
                        speaker: speaker.to_string(),
                        text: text.to_string(),
                    })
                    .collect(),
            }
        })
        .collect()
}
