use std::collections::BTreeSet;

use rand::Rng;

use super::{Answer, Answerer, Exam, Expected, Memory, MemoryItem, QaPair, Question, Questioner, Template};
use crate::error::Result;
use crate::rng::{self, Domain};

/// Deterministic questioner and answerer working on tag sets.
///
/// Exams ask about tags drawn uniformly from the pilot's tag multiset, with
/// templates assigned round-robin. Answers come from exact tag matches in
/// memory, reporting every matching pose or robot as a candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticOracle;

impl Questioner for SyntheticOracle {
    fn generate_exam(&self, robot_id: usize, pilot: &[MemoryItem], num_questions: usize, seed: u64) -> Result<Exam> {
        let multiset: Vec<(&MemoryItem, &String)> =
            pilot.iter().flat_map(|item| item.tags.iter().map(move |t| (item, t))).collect();

        if multiset.is_empty() {
            let qa = QaPair { question: Question::nothing_observed(), expected: Expected::Presence(false) };
            return Ok(Exam { robot_id, qa_pairs: vec![qa; num_questions] });
        }

        let mut rng = rng::stream(seed, Domain::Exam, robot_id as u64);
        let qa_pairs = (0..num_questions)
            .map(|i| {
                let (item, tag) = multiset[rng.random_range(0..multiset.len())];
                let template = Template::ROUND_ROBIN[i % 3];
                let expected = match template {
                    Template::Presence => Expected::Presence(true),
                    Template::Location => Expected::Location { x: item.pose.x, y: item.pose.y, yaw: item.pose.yaw },
                    Template::Reporter => Expected::Reporter(BTreeSet::from([item.robot])),
                };
                QaPair { question: Question::new(template, tag.clone()), expected }
            })
            .collect();
        Ok(Exam { robot_id, qa_pairs })
    }
}

impl Answerer for SyntheticOracle {
    fn answer(&self, question: &Question, memory: &Memory<'_>) -> Result<Answer> {
        let Some(tag) = question.subject.as_deref() else {
            return Ok(Answer::Presence(false));
        };
        let mut hits = memory.iter().filter(|item| item.has_tag(tag));
        Ok(match question.template {
            Template::Presence => Answer::Presence(hits.next().is_some()),
            Template::Location => Answer::Locations(hits.map(|i| [i.pose.x, i.pose.y]).collect()),
            Template::Reporter => Answer::Reporters(hits.map(|i| i.robot).collect()),
        })
    }
}
