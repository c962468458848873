//! Plain-text matrix format for tabular games.
//!
//! Blank lines and lines starting with `#` are ignored. Data rows, in order:
//!
//! 1. header: `N |S| |A_1| ... |A_N|`
//! 2. initial distribution: one row of `|S|` probabilities
//! 3. transitions: `|S| * prod |A_i|` rows of `|S|` probabilities, ordered by
//!    state, then joint action with agent 1 most significant
//! 4. rewards: for each agent, `|S|` rows of `|A_i|` values
//! 5. observations: for each agent, one row of `|S|` observation indices
//!
//! [`write_game`] emits the section comments; values use the shortest
//! round-tripping decimal form.

use std::fmt::Write as _;

use super::tabular::{JointActions, TabularMarkovGame};
use super::{GameError, Result};
use crate::Scalar;

pub fn write_game<T: Scalar>(game: &TabularMarkovGame<T>) -> String {
    use super::MarkovGame;
    let counts = game.action_counts();
    let n = game.num_states();
    let mut out = String::new();
    let join = |row: &[T]| row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");

    out.push_str("# N |S| |A_1| ... |A_N|\n");
    let _ = writeln!(
        out,
        "{} {} {}",
        counts.len(),
        n,
        counts.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
    );
    out.push_str("# initial distribution\n");
    let _ = writeln!(out, "{}", join(game.initial()));
    out.push_str("# transitions p(s' | s, a_1..a_N)\n");
    for s in 0..n {
        for joint in JointActions::new(counts) {
            let _ = writeln!(out, "{}", join(game.transition_row(s, &joint)));
        }
    }
    for (agent, &count) in counts.iter().enumerate() {
        let _ = writeln!(out, "# rewards r_{}(s, a)", agent + 1);
        for row in game.reward_table(agent).chunks(count) {
            let _ = writeln!(out, "{}", join(row));
        }
    }
    for agent in 0..counts.len() {
        let _ = writeln!(out, "# observations o_{}(s)", agent + 1);
        let map = game.observation_map(agent);
        let _ = writeln!(out, "{}", map.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
    }
    out
}

struct Rows<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last_line: usize,
}

impl<'a> Rows<'a> {
    fn next_row<V: std::str::FromStr>(&mut self, expected: usize, what: &str) -> Result<Vec<V>> {
        for (i, line) in self.lines.by_ref() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            self.last_line = i + 1;
            let values = trimmed
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<V>().map_err(|_| GameError::Parse {
                        line: i + 1,
                        message: format!("cannot parse {tok:?} in {what}"),
                    })
                })
                .collect::<Result<Vec<V>>>()?;
            if expected != 0 && values.len() != expected {
                return Err(GameError::Parse {
                    line: i + 1,
                    message: format!("{what}: expected {expected} values, found {}", values.len()),
                });
            }
            return Ok(values);
        }
        Err(GameError::Parse {
            line: self.last_line,
            message: format!("unexpected end of input before {what}"),
        })
    }
}

pub fn parse_game<T: Scalar>(text: &str) -> Result<TabularMarkovGame<T>> {
    let mut rows = Rows {
        lines: text.lines().enumerate(),
        last_line: 0,
    };
    let header: Vec<i64> = rows.next_row(0, "header")?;
    let line = rows.last_line;
    let bad_header = |message: String| GameError::Parse { line, message };
    if header.len() < 3 {
        return Err(bad_header("header needs N, |S| and one action count per agent".into()));
    }
    if header.iter().any(|&v| v <= 0) {
        return Err(bad_header("header values must be positive".into()));
    }
    let num_agents = header[0] as usize;
    let num_states = header[1] as usize;
    if header.len() != 2 + num_agents {
        return Err(bad_header(format!(
            "header declares {num_agents} agents but lists {} action counts",
            header.len() - 2
        )));
    }
    let counts: Vec<usize> = header[2..].iter().map(|&v| v as usize).collect();
    let joint_count: usize = counts.iter().product();

    let initial = rows.next_row::<T>(num_states, "initial distribution")?;
    let mut transition = Vec::with_capacity(num_states * joint_count * num_states);
    for _ in 0..num_states * joint_count {
        transition.extend(rows.next_row::<T>(num_states, "transition row")?);
    }
    let mut rewards = Vec::with_capacity(num_agents);
    for &count in &counts {
        let mut table = Vec::with_capacity(num_states * count);
        for _ in 0..num_states {
            table.extend(rows.next_row::<T>(count, "reward row")?);
        }
        rewards.push(table);
    }
    let mut observations = Vec::with_capacity(num_agents);
    for _ in 0..num_agents {
        observations.push(rows.next_row::<usize>(num_states, "observation row")?);
    }
    let trailing: Result<Vec<String>> = rows.next_row(0, "");
    if let Ok(extra) = trailing {
        return Err(GameError::Parse {
            line: rows.last_line,
            message: format!("unexpected trailing data {:?}", extra.join(" ")),
        });
    }
    TabularMarkovGame::new(counts, initial, transition, rewards, observations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{random_instance, RandomLimits};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn round_trips_random_games(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = random_instance::<f64, _>(&mut rng, RandomLimits::default());
            let text = write_game(&inst.game);
            let parsed: TabularMarkovGame<f64> = parse_game(&text).unwrap();
            prop_assert_eq!(parsed, inst.game);
        }
    }

    #[test]
    fn parses_handwritten_fixture() {
        let text = "\
# one agent, two states
1 2 2
1 0
# s=0
1 0
0 1
# s=1
0 1
0 1
0 1
2 3
0 0
";
        let game: TabularMarkovGame<f64> = parse_game(text).unwrap();
        assert_eq!(game.transition_row(0, &[1]), &[0.0, 1.0]);
        assert_eq!(game.reward_table(0), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn reports_line_of_bad_token() {
        let text = "1 1 1\n1\nnope\n0\n0\n";
        match parse_game::<f64>(text) {
            Err(GameError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_action_count_rejected() {
        assert!(matches!(parse_game::<f64>("1 1 -2\n"), Err(GameError::Parse { line: 1, .. })));
    }

    #[test]
    fn unnormalized_row_is_invalid_game() {
        let text = "1 1 1\n1\n0.5\n0\n0\n";
        assert!(matches!(parse_game::<f64>(text), Err(GameError::InvalidGame(_))));
    }
}
