//! Synthetic questions whose answer follows from a single keyword in the
//! stem. Used for smoke runs and tests where no real corpus is at hand.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Choice, MCQuestion, LABELS};
use crate::rng;

/// `(keyword, answer)` pairs.
pub const LEXICON: [(&str, &str); 25] = [
    ("bark", "dog"),
    ("meow", "cat"),
    ("hive", "bee"),
    ("web", "spider"),
    ("hoot", "owl"),
    ("neigh", "horse"),
    ("moo", "cow"),
    ("oink", "pig"),
    ("quack", "duck"),
    ("roar", "lion"),
    ("trunk", "elephant"),
    ("pouch", "kangaroo"),
    ("stripes", "zebra"),
    ("slither", "snake"),
    ("shell", "turtle"),
    ("gills", "fish"),
    ("antlers", "deer"),
    ("wool", "sheep"),
    ("burrow", "rabbit"),
    ("dam", "beaver"),
    ("ink", "squid"),
    ("hump", "camel"),
    ("waddle", "penguin"),
    ("bamboo", "panda"),
    ("banana", "monkey"),
];

const STEMS: [&str; 3] = [
    "Which animal is known for {kw}?",
    "What creature comes to mind when you hear {kw}?",
    "If something is all about {kw}, what is it most likely to be?",
];

/// `n` five-choice questions with ids `kw0`, `kw1`, ...; deterministic in `seed`.
pub fn keyword_questions(n: usize, seed: u64) -> Vec<MCQuestion> {
    let mut rng = rng::stream(seed, "synthetic.keyword");
    (0..n)
        .map(|i| {
            let (kw, answer) = LEXICON[rng.random_range(0..LEXICON.len())];
            let mut texts: Vec<&str> = LEXICON.iter().map(|(_, a)| *a).filter(|a| *a != answer).collect();
            texts.shuffle(&mut rng);
            texts.truncate(LABELS.len() - 1);
            texts.push(answer);
            texts.shuffle(&mut rng);
            let gold = texts.iter().position(|t| *t == answer).expect("answer is among the choices");
            MCQuestion {
                id: format!("kw{i}"),
                stem: STEMS[rng.random_range(0..STEMS.len())].replace("{kw}", kw),
                choices: LABELS.iter().zip(&texts).map(|(&label, t)| Choice { label, text: t.to_string() }).collect(),
                answer_label: LABELS[gold],
            }
        })
        .collect()
}
