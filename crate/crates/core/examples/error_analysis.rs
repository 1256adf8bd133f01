//! Score a hand-written set of predictions: micro P/R/F1, sub-tasks and the
//! error taxonomy, with both matching modes.
//!
//! cargo run --example error_analysis

use triplink::corpus::AlignMode;
use triplink::evaluation::{error_taxonomy, micro_prf, subtask_report, EvalSentence, Mention, TripleRecord};

fn mention(text: &str, at: usize) -> Mention {
    Mention { text: text.into(), offsets: Some((at, at + text.len())) }
}

fn triple(h: (&str, usize), r: &str, t: (&str, usize)) -> TripleRecord {
    TripleRecord { head: mention(h.0, h.1), relation: r.into(), tail: mention(t.0, t.1) }
}

fn main() {
    // "Barack Obama was born in Honolulu , Hawaii , United States ."
    let sentence = EvalSentence {
        id: "0".into(),
        gold: vec![
            triple(("Barack Obama", 0), "born_in", ("Honolulu", 25)),
            triple(("Honolulu", 25), "located_in", ("Hawaii", 36)),
            triple(("Hawaii", 36), "part_of", ("United States", 45)),
        ],
        pred: vec![
            triple(("Obama", 7), "born_in", ("Honolulu", 25)),
            triple(("Hawaii", 36), "located_in", ("Honolulu", 25)),
            triple(("Barack", 0), "born_in", ("Hawaii", 36)),
        ],
    };
    let data = [sentence];
    for mode in [AlignMode::ExactSpan, AlignMode::LastWord] {
        println!("== {mode}");
        print!("{}", micro_prf(&data, mode));
        println!("{}", subtask_report(&data, mode));
        println!("{}", error_taxonomy(&data, mode));
    }
}
