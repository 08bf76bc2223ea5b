//! Generative adversarial exam.
//!
//! 1. Each robot uploads a small random pilot sample of its memory.
//! 2. A questioner turns each pilot into an exam of `L_k` question/answer
//!    pairs about what the pilot shows.
//! 3. The server's pre-collection memory `M0` sits the exam; the fraction
//!    answered correctly is `GAE_k`.
//!
//! Questions come in three templates: presence ("Is there a fire truck?"),
//! location ("Where is the fire truck?", correct within 50 m) and reporter
//! ("Which drone sees the fire truck?").

mod remote;
mod synthetic;

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::qom;
use crate::rng::{self, Domain};

pub use remote::{RemoteBackend, RemoteConfig, DEFAULT_API_KEY_ENV};
pub use synthetic::SyntheticOracle;

/// Location answers within this planar distance of the truth are correct.
pub const LOCATION_RADIUS_M: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn planar_distance(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// One stored frame: when and where it was taken, by whom, and which
/// events it shows. The tag set stands in for the image caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryItem {
    pub timestamp_s: f64,
    pub pose: Pose,
    pub robot: usize,
    pub tags: BTreeSet<String>,
}

impl MemoryItem {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }
}

/// A memory made of borrowed segments, e.g. `M0` plus uploaded prefixes.
#[derive(Debug, Clone, Default)]
pub struct Memory<'a> {
    segments: Vec<&'a [MemoryItem]>,
}

impl<'a> Memory<'a> {
    pub fn new() -> Self {
        Self { segments: Vec::new() }
    }

    pub fn from_items(items: &'a [MemoryItem]) -> Self {
        Self { segments: vec![items] }
    }

    pub fn push(&mut self, items: &'a [MemoryItem]) {
        if !items.is_empty() {
            self.segments.push(items);
        }
    }

    pub fn with(mut self, items: &'a [MemoryItem]) -> Self {
        self.push(items);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a MemoryItem> + '_ {
        self.segments.iter().flat_map(|s| s.iter())
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Presence,
    Location,
    Reporter,
}

impl Template {
    pub const ROUND_ROBIN: [Template; 3] = [Template::Presence, Template::Location, Template::Reporter];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "presence" => Some(Template::Presence),
            "location" => Some(Template::Location),
            "reporter" => Some(Template::Reporter),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub template: Template,
    /// `None` is the "nothing observed" presence question asked when a
    /// pilot contains no events.
    pub subject: Option<String>,
}

impl Question {
    pub fn new(template: Template, subject: impl Into<String>) -> Self {
        Self { template, subject: Some(subject.into()) }
    }

    pub fn nothing_observed() -> Self {
        Self { template: Template::Presence, subject: None }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(subject) = &self.subject else {
            return f.write_str("Did the drone observe anything abnormal?");
        };
        let subject = subject.replace('_', " ");
        match self.template {
            Template::Presence => write!(f, "Is there a {subject}?"),
            Template::Location => write!(f, "Where is the {subject}?"),
            Template::Reporter => write!(f, "Which drone sees the {subject}?"),
        }
    }
}

/// Ground truth for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Presence(bool),
    Location { x: f64, y: f64, yaw: f64 },
    /// Any of these robots is an acceptable reporter.
    Reporter(BTreeSet<usize>),
}

/// What an answerer said. Location and reporter answers may list several
/// candidates retrieved from memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Presence(bool),
    Locations(Vec<[f64; 2]>),
    Reporters(BTreeSet<usize>),
    /// The answer could not be interpreted; always graded wrong.
    Unparsed(String),
}

/// Grading rule shared by exams and the ground-truth question set.
pub fn grade(expected: &Expected, answer: &Answer) -> bool {
    match (expected, answer) {
        (Expected::Presence(truth), Answer::Presence(said)) => truth == said,
        (Expected::Location { x, y, .. }, Answer::Locations(candidates)) => candidates
            .iter()
            .any(|[cx, cy]| (cx - x).hypot(cy - y) <= LOCATION_RADIUS_M),
        (Expected::Reporter(truth), Answer::Reporters(said)) => !truth.is_disjoint(said),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: Question,
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exam {
    pub robot_id: usize,
    pub qa_pairs: Vec<QaPair>,
}

impl Exam {
    pub fn len(&self) -> usize {
        self.qa_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qa_pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaeReport {
    pub scores: Vec<f64>,
    pub pilot_sizes: Vec<usize>,
    pub exams: Vec<Exam>,
}

/// Writes exams from pilot memories.
pub trait Questioner: Send + Sync {
    fn generate_exam(&self, robot_id: usize, pilot: &[MemoryItem], num_questions: usize, seed: u64) -> Result<Exam>;
}

/// Answers a question from a memory.
pub trait Answerer: Send + Sync {
    fn answer(&self, question: &Question, memory: &Memory<'_>) -> Result<Answer>;
}

/// Uniform sample of `round(ratio |D|)` items (at least one) without
/// replacement, returned in dataset order.
pub fn sample_pilot(dataset: &[MemoryItem], ratio: f64, seed: u64) -> Result<Vec<MemoryItem>> {
    sample_pilot_with(dataset, ratio, &mut rng::stream(seed, Domain::Pilot, 0))
}

fn sample_pilot_with<R: Rng + ?Sized>(dataset: &[MemoryItem], ratio: f64, rng: &mut R) -> Result<Vec<MemoryItem>> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset", "cannot sample a pilot from an empty dataset"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid("ratio", format!("must lie in (0, 1], got {ratio}")));
    }
    let size = qom::pilot_size(dataset.len(), ratio);
    if size == dataset.len() {
        return Ok(dataset.to_vec());
    }
    let mut picked = index::sample(rng, dataset.len(), size).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| dataset[i].clone()).collect())
}

pub fn generate_exam(
    robot_id: usize,
    pilot: &[MemoryItem],
    num_questions: usize,
    backend: &dyn Questioner,
    seed: u64,
) -> Result<Exam> {
    if num_questions == 0 {
        return Err(Error::invalid("num_questions", "must be >= 1"));
    }
    backend.generate_exam(robot_id, pilot, num_questions, seed)
}

/// Fraction of the exam answered correctly from `base_memory`.
pub fn practice_test(exam: &Exam, base_memory: &Memory<'_>, backend: &dyn Answerer) -> Result<f64> {
    if exam.is_empty() {
        return Err(Error::invalid("exam", "cannot score an empty exam"));
    }
    let mut correct = 0usize;
    for qa in &exam.qa_pairs {
        let answer = backend.answer(&qa.question, base_memory)?;
        if let Answer::Unparsed(raw) = &answer {
            log::warn!("robot {}: unparsed answer to {:?}: {raw}", exam.robot_id, qa.question.to_string());
        }
        if grade(&qa.expected, &answer) {
            correct += 1;
        }
    }
    Ok(correct as f64 / exam.len() as f64)
}

/// Settings for [`run_gae`].
#[derive(Debug, Clone, Copy)]
pub struct GaeSettings {
    pub pilot_ratio: f64,
    pub questions_per_robot: usize,
    pub seed: u64,
    pub execution: Execution,
}

/// Pilot, exam and practice test for every robot.
pub fn run_gae(
    datasets: &[Vec<MemoryItem>],
    base_memory: &Memory<'_>,
    settings: &GaeSettings,
    questioner: &dyn Questioner,
    answerer: &dyn Answerer,
) -> Result<GaeReport> {
    if datasets.is_empty() {
        return Err(Error::invalid("datasets", "need at least one robot"));
    }
    let robots: Vec<usize> = (0..datasets.len()).collect();
    let per_robot = parallel::map(&robots, settings.execution, |&k| {
        let mut pilot_rng = rng::stream(settings.seed, Domain::Pilot, k as u64);
        let pilot = sample_pilot_with(&datasets[k], settings.pilot_ratio, &mut pilot_rng)?;
        let exam_seed: u64 = rng::stream(settings.seed, Domain::Exam, k as u64).random();
        let exam = generate_exam(k, &pilot, settings.questions_per_robot, questioner, exam_seed)?;
        let score = practice_test(&exam, base_memory, answerer)?;
        Ok::<_, Error>((score, pilot.len(), exam))
    });

    let mut report = GaeReport { scores: Vec::new(), pilot_sizes: Vec::new(), exams: Vec::new() };
    for (k, r) in per_robot.into_iter().enumerate() {
        let (score, size, exam) = r.map_err(|e| e.for_robot(k))?;
        report.scores.push(score);
        report.pilot_sizes.push(size);
        report.exams.push(exam);
    }
    Ok(report)
}
