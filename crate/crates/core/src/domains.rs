//! Instance generators for the evaluation domains.
//!
//! Each generator emits domain and problem text in the accepted PDDL subset.
//! Output depends only on the spec and the seed.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default leg length (and batch size).
pub const LEG_LENGTH: u32 = 30;
const EQUIPMENT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    FlyingObserver,
    FlyingObserverConfigureInFlight,
    FactoryQa,
    FactoryQaCalibrateInFlight,
    LinearGenerator,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::FlyingObserver,
        Family::FlyingObserverConfigureInFlight,
        Family::FactoryQa,
        Family::FactoryQaCalibrateInFlight,
        Family::LinearGenerator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::FlyingObserver => "flying-observer",
            Family::FlyingObserverConfigureInFlight => "flying-observer-in-flight",
            Family::FactoryQa => "factory-qa",
            Family::FactoryQaCalibrateInFlight => "factory-qa-in-flight",
            Family::LinearGenerator => "linear-generator",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Instance parameters. Observations/legs are samples/batches in the
/// factory domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub family: Family,
    pub observations: usize,
    pub legs: usize,
    pub required: usize,
    pub storage_cap: bool,
    pub tanks: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),
}

impl InstanceSpec {
    pub fn flying_observer(observations: usize, legs: usize, required: usize) -> Self {
        InstanceSpec {
            family: Family::FlyingObserver,
            observations,
            legs,
            required,
            storage_cap: false,
            tanks: 0,
        }
    }

    /// Standard observer sizes, numbered 1 to 17. Sizes 9 to 16 are
    /// interpolated: fixed 40/88 with two more required observations each.
    pub fn sized(row: usize) -> Result<Self, DomainError> {
        let (obs, legs, req) = match row {
            1..=5 => (5 + 5 * row, 18 + 10 * row, 2 * row + 2),
            6 => (40, 78, 14),
            7..=17 => (40, 88, 2 * row + 2),
            _ => return Err(DomainError::InvalidSpec(format!("no standard size {row}"))),
        };
        Ok(Self::flying_observer(obs, legs, req))
    }

    /// Numbered instance of a family: the standard sizes for the observer
    /// and factory families, `index` tanks for the linear generator.
    pub fn numbered(family: Family, index: usize, storage_cap: bool) -> Result<Self, DomainError> {
        if family == Family::LinearGenerator {
            let spec = Self::linear_generator(index);
            spec.validate()?;
            return Ok(spec);
        }
        let row = Self::sized(index)?;
        Ok(InstanceSpec {
            family,
            storage_cap: storage_cap && matches!(family, Family::FactoryQa | Family::FactoryQaCalibrateInFlight),
            ..row
        })
    }

    pub fn configure_in_flight(observations: usize, legs: usize, required: usize) -> Self {
        InstanceSpec {
            family: Family::FlyingObserverConfigureInFlight,
            ..Self::flying_observer(observations, legs, required)
        }
    }

    pub fn factory_qa(samples: usize, batches: usize, required: usize, storage_cap: bool) -> Self {
        InstanceSpec {
            family: Family::FactoryQa,
            observations: samples,
            legs: batches,
            required,
            storage_cap,
            tanks: 0,
        }
    }

    pub fn factory_qa_in_flight(samples: usize, batches: usize, required: usize, storage_cap: bool) -> Self {
        InstanceSpec {
            family: Family::FactoryQaCalibrateInFlight,
            ..Self::factory_qa(samples, batches, required, storage_cap)
        }
    }

    pub fn linear_generator(tanks: usize) -> Self {
        InstanceSpec {
            family: Family::LinearGenerator,
            observations: 0,
            legs: 0,
            required: 0,
            storage_cap: false,
            tanks,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: &str| Err(DomainError::InvalidSpec(m.to_string()));
        match self.family {
            Family::LinearGenerator => {
                if self.tanks == 0 {
                    return bad("tank count must be positive");
                }
            }
            _ => {
                if self.observations == 0 || self.legs == 0 || self.required == 0 {
                    return bad("observations, legs and required must be positive");
                }
                if self.required > self.observations {
                    return bad("more required observations than available");
                }
                if self.observations > self.legs {
                    return bad("one observation per leg: observations exceed legs");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub domain: String,
    pub problem: String,
}

/// Generates the domain and problem text for a spec.
pub fn generate(spec: &InstanceSpec, seed: u64) -> Result<Instance, DomainError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match spec.family {
        Family::FlyingObserver => observer_like(spec, &mut rng, &OBSERVER, false),
        Family::FlyingObserverConfigureInFlight => observer_like(spec, &mut rng, &OBSERVER, true),
        Family::FactoryQa => observer_like(spec, &mut rng, &FACTORY, false),
        Family::FactoryQaCalibrateInFlight => observer_like(spec, &mut rng, &FACTORY, true),
        Family::LinearGenerator => linear_generator(spec.tanks, &mut rng),
    })
}

/// Names used by the observer-shaped domains. The factory domain is the same
/// structure with renamed symbols.
struct Vocab {
    domain: &'static str,
    leg: &'static str,
    item: &'static str,
    tool: &'static str,
    /// `(template token, name)`
    words: &'static [(&'static str, &'static str)],
}

const OBSERVER: Vocab = Vocab {
    domain: "flying-observer",
    leg: "l",
    item: "o",
    tool: "e",
    words: &[
        ("LEG", "leg"),
        ("ITEM", "observation"),
        ("TOOL", "equipment"),
        ("take-off", "take-off"),
        ("set-course", "set-course"),
        ("fly", "fly"),
        ("configure", "configure"),
        ("observe", "observe"),
        ("release", "release"),
        ("on-ground", "on-ground"),
        ("first-leg", "first-leg"),
        ("flying", "flying"),
        ("done", "done"),
        ("next", "next"),
        ("available", "available"),
        ("optionfor", "optionfor"),
        ("configuredfor", "configuredfor"),
        ("pending", "pending"),
        ("contains", "contains"),
        ("awaiting", "awaiting"),
        ("observed", "observed"),
        ("flown", "flown"),
        ("distance", "distance"),
        ("speed", "speed"),
        ("time-for", "time-for"),
        ("target-start", "target-start"),
    ],
};

const FACTORY: Vocab = Vocab {
    domain: "factory-qa",
    leg: "b",
    item: "s",
    tool: "g",
    words: &[
        ("LEG", "batch"),
        ("ITEM", "sample"),
        ("TOOL", "gauge"),
        ("take-off", "start-line"),
        ("set-course", "switch-batch"),
        ("fly", "produce"),
        ("configure", "calibrate"),
        ("observe", "take-sample"),
        ("release", "release-gauge"),
        ("on-ground", "idle"),
        ("first-leg", "first-batch"),
        ("flying", "producing"),
        ("done", "finished"),
        ("next", "next-batch"),
        ("available", "gauge-free"),
        ("optionfor", "gauge-for"),
        ("configuredfor", "calibrated-for"),
        ("pending", "in-use"),
        ("contains", "from-batch"),
        ("awaiting", "unsampled"),
        ("observed", "sampled"),
        ("flown", "parts"),
        ("distance", "batch-size"),
        ("speed", "rate"),
        ("time-for", "sample-time"),
        ("target-start", "target-count"),
    ],
};

const OBSERVER_TEMPLATE: &str = "\
(define (domain DOMAIN)
  (:requirements :typing :durative-actions :fluents :continuous-effects)
  (:types LEG ITEM TOOL)
  (:predicates (on-ground) (first-leg ?l - LEG) (flying ?l - LEG) (done ?l - LEG)
    (next ?l1 - LEG ?l2 - LEG) (available ?e - TOOL) (optionfor ?o - ITEM ?e - TOOL)
    (configuredfor ?o - ITEM) (pending ?o - ITEM ?e - TOOL) (contains ?l - LEG ?o - ITEM)
    (awaiting ?o - ITEM) (observed ?o - ITEM))
  (:functions (flown ?l - LEG) (distance ?l - LEG) (speed ?l - LEG)
    (time-for ?o - ITEM) (target-start ?o - ITEM)CAP_FUNCTIONS)
  (:durative-action take-off
    :parameters (?l - LEG)
    :duration (= ?duration 5)
    :condition (and (at start (on-ground)) (at start (first-leg ?l)))
    :effect (and (at start (not (on-ground))) (at start (assign (flown ?l) 0))
                 (at end (flying ?l))))
  (:durative-action set-course
    :parameters (?l1 - LEG ?l2 - LEG)
    :duration (= ?duration 1)
    :condition (and (at start (done ?l1)) (at start (next ?l1 ?l2)))
    :effect (and (at start (not (done ?l1)))
                 (at end (flying ?l2)) (at end (assign (flown ?l2) 0))))
  (:durative-action fly
    :parameters (?l - LEG)
    :duration (= ?duration (/ (distance ?l) (speed ?l)))
    :condition (and (at start (flying ?l))
                    (over all (<= (flown ?l) (distance ?l)))CAP_CONDITION)
    :effect (and (at end (done ?l)) (at end (not (flying ?l)))
                 (increase (flown ?l) (* #t (speed ?l)))CAP_EFFECT))
  (:durative-action configure
    :parameters (?o - ITEM ?e - TOOLFLIGHT_PARAM)
    :duration (= ?duration 1)
    :condition (and (at start (available ?e)) (at start (optionfor ?o ?e))FLIGHT_CONDITION)
    :effect (and (at start (not (available ?e)))
                 (at end (configuredfor ?o)) (at end (pending ?o ?e))))
  (:durative-action observe
    :parameters (?l - LEG ?o - ITEM)
    :duration (= ?duration (time-for ?o))
    :condition (and (at start (configuredfor ?o)) (at start (contains ?l ?o))
                    (at start (awaiting ?o))
                    (at start (>= (flown ?l) (target-start ?o)))
                    (over all (flying ?l)))
    :effect (and (at start (not (awaiting ?o))) (at end (observed ?o))))
  (:durative-action release
    :parameters (?o - ITEM ?e - TOOLFLIGHT_PARAM)
    :duration (= ?duration 1)
    :condition (and (at start (pending ?o ?e))FLIGHT_CONDITION)
    :effect (and (at start (not (configuredfor ?o))) (at start (not (pending ?o ?e)))
                 (at end (available ?e)))))
";

fn domain_text(v: &Vocab, in_flight: bool, cap: bool) -> String {
    let mut s = OBSERVER_TEMPLATE.replace("DOMAIN", v.domain);
    let cap_pieces = [
        ("CAP_FUNCTIONS", " (total-parts) (storage-cap)"),
        ("CAP_CONDITION", "\n                    (over all (<= (total-parts) (storage-cap)))"),
        ("CAP_EFFECT", "\n                 (increase (total-parts) (* #t (speed ?l)))"),
    ];
    for (k, r) in cap_pieces {
        s = s.replace(k, if cap { r } else { "" });
    }
    let (param, cond) = if in_flight {
        (" ?l - LEG", " (at start (flying ?l))")
    } else {
        ("", "")
    };
    s = s.replace("FLIGHT_PARAM", param).replace("FLIGHT_CONDITION", cond);
    // whole-token renaming; longer tokens first so `done` does not clip others
    let mut words: Vec<&(&str, &str)> = v.words.iter().collect();
    words.sort_by_key(|(k, _)| std::cmp::Reverse(k.len()));
    rename_tokens(&s, &words)
}

/// Replaces symbols that exactly equal a template token.
fn rename_tokens(text: &str, words: &[&(&str, &str)]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        let replaced = words
            .iter()
            .find(|(k, _)| *k == token.as_str())
            .map_or(token.as_str(), |(_, n)| *n);
        out.push_str(replaced);
        token.clear();
    };
    for c in text.chars() {
        if c.is_alphanumeric() || c == '-' || c == '_' {
            token.push(c);
        } else {
            flush(&mut token, &mut out);
            out.push(c);
        }
    }
    flush(&mut token, &mut out);
    out
}

struct ObservationSpec {
    leg: usize,
    duration: u32,
    target_start: u32,
    options: Vec<usize>,
}

fn observer_like(spec: &InstanceSpec, rng: &mut ChaCha8Rng, v: &Vocab, in_flight: bool) -> Instance {
    let cap = spec.storage_cap && std::ptr::eq(v, &FACTORY);
    let legs = spec.legs;
    let lengths = vec![LEG_LENGTH; legs];
    let mut chosen: Vec<usize> = (0..legs).collect::<Vec<_>>();
    chosen.shuffle(rng);
    chosen.truncate(spec.observations);
    chosen.sort_unstable();
    let mut observations = Vec::new();
    for l in chosen {
        let duration = rng.gen_range(1..=5);
        let target_start = rng.gen_range(0..=LEG_LENGTH - duration - 1);
        let mut options: Vec<usize> = (0..EQUIPMENT).collect();
        options.shuffle(rng);
        options.truncate(rng.gen_range(1..=2));
        options.sort_unstable();
        observations.push(ObservationSpec {
            leg: l,
            duration,
            target_start,
            options,
        });
    }
    let mut required: Vec<usize> = (0..observations.len()).collect();
    required.shuffle(rng);
    required.truncate(spec.required);
    required.sort_unstable();

    let leg = |i: usize| format!("{}{}", v.leg, i);
    let item = |i: usize| format!("{}{}", v.item, i);
    let tool = |i: usize| format!("{}{}", v.tool, i);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "(define (problem {}-{}-{}) (:domain {})",
        v.domain,
        legs,
        observations.len(),
        v.domain
    );
    s.push_str("  (:objects");
    for l in 0..legs {
        let _ = write!(s, " {}", leg(l));
    }
    s.push_str(" - LEG");
    for o in 0..observations.len() {
        let _ = write!(s, " {}", item(o));
    }
    s.push_str(" - ITEM");
    for e in 0..EQUIPMENT {
        let _ = write!(s, " {}", tool(e));
    }
    s.push_str(" - TOOL)\n  (:init\n    (on-ground)\n");
    let _ = writeln!(s, "    (first-leg {})", leg(0));
    for l in 1..legs {
        let _ = writeln!(s, "    (next {} {})", leg(l - 1), leg(l));
    }
    for e in 0..EQUIPMENT {
        let _ = writeln!(s, "    (available {})", tool(e));
    }
    for (l, len) in lengths.iter().enumerate() {
        let _ = writeln!(
            s,
            "    (= (flown {0}) 0) (= (distance {0}) {1}) (= (speed {0}) 1)",
            leg(l),
            len
        );
    }
    for (i, o) in observations.iter().enumerate() {
        let _ = write!(s, "    (awaiting {})", item(i));
        let _ = write!(s, " (contains {} {})", leg(o.leg), item(i));
        for e in &o.options {
            let _ = write!(s, " (optionfor {} {})", item(i), tool(*e));
        }
        let _ = writeln!(
            s,
            " (= (time-for {0}) {1}) (= (target-start {0}) {2})",
            item(i),
            o.duration,
            o.target_start
        );
    }
    if cap {
        let _ = writeln!(
            s,
            "    (= (total-parts) 0) (= (storage-cap) {})",
            lengths.iter().sum::<u32>()
        );
    }
    s.push_str("  )\n  (:goal (and");
    for i in required {
        let _ = write!(s, " (observed {})", item(i));
    }
    s.push_str(")))\n");

    let mut words: Vec<&(&str, &str)> = v.words.iter().collect();
    words.sort_by_key(|(k, _)| std::cmp::Reverse(k.len()));
    Instance {
        domain: domain_text(v, in_flight, cap),
        problem: rename_tokens(&s, &words),
    }
}

const GENERATOR_DOMAIN: &str = "\
(define (domain linear-generator)
  (:requirements :typing :durative-actions :fluents :continuous-effects)
  (:types generator tank)
  (:predicates (idle ?g - generator) (generating ?g - generator) (generator-ran)
    (available ?t - tank))
  (:functions (fuel-level ?g - generator) (capacity ?g - generator)
    (run-time ?g - generator) (refuel-time ?t - tank))
  (:durative-action generate
    :parameters (?g - generator)
    :duration (= ?duration (run-time ?g))
    :condition (and (at start (idle ?g)) (over all (>= (fuel-level ?g) 0)))
    :effect (and (at start (not (idle ?g))) (at start (generating ?g))
                 (at end (not (generating ?g))) (at end (generator-ran))
                 (decrease (fuel-level ?g) (* #t 1))))
  (:durative-action refuel
    :parameters (?g - generator ?t - tank)
    :duration (= ?duration (refuel-time ?t))
    :condition (and (at start (available ?t)) (over all (generating ?g))
                    (over all (<= (fuel-level ?g) (capacity ?g))))
    :effect (and (at start (not (available ?t)))
                 (increase (fuel-level ?g) (* #t 2)))))
";

/// Initial fuel, one short of the run time.
const GENERATOR_FUEL: u32 = 55;

fn linear_generator(tanks: usize, rng: &mut ChaCha8Rng) -> Instance {
    let times: Vec<u32> = (0..tanks).map(|_| rng.gen_range(8..=12)).collect();
    // each tank adds 2 * refuel-time; a single tank (at most 24) never covers
    // the run, any two tanks (at least the two smallest) always do
    let mut sorted = times.clone();
    sorted.sort_unstable();
    let run_time = GENERATOR_FUEL - 1 + 2 * sorted.iter().take(2).sum::<u32>();
    let mut s = String::new();
    let _ = writeln!(s, "(define (problem linear-generator-{tanks}) (:domain linear-generator)");
    s.push_str("  (:objects gen - generator");
    for t in 0..tanks {
        let _ = write!(s, " tank{t}");
    }
    s.push_str(" - tank)\n  (:init\n    (idle gen)\n");
    let _ = writeln!(
        s,
        "    (= (fuel-level gen) {GENERATOR_FUEL}) (= (capacity gen) 100) (= (run-time gen) {run_time})"
    );
    for (t, time) in times.iter().enumerate() {
        let _ = writeln!(s, "    (available tank{t}) (= (refuel-time tank{t}) {time})");
    }
    s.push_str("  )\n  (:goal (and (generator-ran))))\n");
    Instance {
        domain: GENERATOR_DOMAIN.to_string(),
        problem: s,
    }
}
