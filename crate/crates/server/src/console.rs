use std::io::{BufRead, Write};
use std::sync::Arc;

use prefstack::infer::{Engine, Resolution, Session};
use prefstack::Action;

use crate::api::secondary_set;

/// Line-oriented prediction loop.
///
/// After each prediction the loop reads lines until the next primary:
/// `y` / `accept` confirms the prediction, `n <ids..>` / `reject <ids..>`
/// corrects it, any other token is taken as a primary action id (implicitly
/// accepting an unanswered prediction). `quit` or end of input stops.
pub fn run_console<R: BufRead, W: Write>(
    engine: Arc<Engine>,
    resolution: Resolution,
    seed: u64,
    input: R,
    mut out: W,
) -> anyhow::Result<Session> {
    let mut session = Session::new(engine, resolution, seed);
    let mut prediction = session.predict();
    print_prediction(&mut out, &prediction.set, prediction.exhausted)?;
    for line in input.lines() {
        let line = line?;
        let mut words = line.split_whitespace();
        let Some(cmd) = words.next() else {
            continue;
        };
        let rest: Vec<String> = words.map(str::to_string).collect();
        let result = match cmd {
            "quit" | "exit" => break,
            "y" | "yes" | "accept" => session.observe_feedback(true, None),
            "n" | "no" | "reject" => secondary_set(&rest, &session.engine().model().task)
                .and_then(|actual| session.observe_feedback(false, Some(actual))),
            primary => {
                let mut r = Ok(());
                if session.pending_prediction().is_some() {
                    r = session.observe_feedback(true, None);
                }
                r.and_then(|_| session.observe_primary(&Action::Primary(primary.to_string())))
                    .map(|_| {
                        prediction = session.predict();
                    })
                    .and_then(|_| {
                        print_prediction(&mut out, &prediction.set, prediction.exhausted)
                            .map_err(|e| prefstack::Error::Io {
                                path: "<stdout>".into(),
                                message: e.to_string(),
                            })
                    })
            }
        };
        if let Err(e) = result {
            writeln!(out, "error: {e}")?;
        }
    }
    out.flush()?;
    Ok(session)
}

fn print_prediction<W: Write>(
    out: &mut W,
    set: &prefstack::SecondaryActionSet,
    exhausted: bool,
) -> std::io::Result<()> {
    if exhausted {
        writeln!(out, "predict {set} (plan exhausted)")
    } else {
        writeln!(out, "predict {set}")
    }
}
