//! Text-mode game between a person and an agent.
//!
//! A move is a placement, either its action code or four `r,c` cells, and an
//! optional neutral move written `r,c>r,c`. Rows and columns count from 0.
//! `legal` lists the legal placements, `quit` leaves the game.

use std::io::{BufRead, Write};

use crate::arena::Agent;
use crate::game::{start_position, ActionCode, GameState, NeutralAction, Player, Turn, BOARD_SIDE};
use crate::rng::derive_rng;

use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlayOutcome {
    Won(Player),
    Draw,
    Quit,
}

fn parse_cell(s: &str) -> Result<usize, String> {
    let (r, c) = s
        .split_once(',')
        .ok_or_else(|| format!("`{s}` is not a cell (expected r,c)"))?;
    let r: usize = r.trim().parse().map_err(|_| format!("bad row in `{s}`"))?;
    let c: usize = c.trim().parse().map_err(|_| format!("bad column in `{s}`"))?;
    if r >= BOARD_SIDE || c >= BOARD_SIDE {
        return Err(format!("`{s}` is off the board"));
    }
    Ok(r * BOARD_SIDE + c)
}

fn cell_name(i: usize) -> String {
    format!("{},{}", i / BOARD_SIDE, i % BOARD_SIDE)
}

fn describe_placement(code: ActionCode) -> String {
    let cells = code.cells().expect("on-board code");
    let names: Vec<String> = cells.iter().map(|&c| cell_name(c)).collect();
    format!("{:>2}: {}", code.index(), names.join(" "))
}

fn describe_neutral(state: &GameState, a: NeutralAction) -> String {
    match a {
        NeutralAction::NoMove => "no neutral move".into(),
        NeutralAction::Move { piece, to } => format!(
            "neutral {}>{}",
            cell_name(state.neutral_cells()[piece as usize]),
            cell_name(to as usize)
        ),
    }
}

/// Parses one move line against `state`.
pub fn parse_turn(state: &GameState, line: &str) -> Result<Turn, String> {
    let mut placement_parts = Vec::new();
    let mut neutral_part = None;
    for tok in line.split_whitespace() {
        if tok.contains('>') {
            if neutral_part.replace(tok).is_some() {
                return Err("at most one neutral move".into());
            }
        } else {
            placement_parts.push(tok);
        }
    }
    let placement = match placement_parts.as_slice() {
        [code] if !code.contains(',') => {
            let n: usize = code.parse().map_err(|_| format!("bad action code `{code}`"))?;
            ActionCode::new(n).map_err(|e| e.to_string())?
        }
        cells if cells.len() == 4 => {
            let mut mask = 0u16;
            for c in cells {
                mask |= 1 << parse_cell(c)?;
            }
            ActionCode::from_mask(mask).ok_or("those cells do not form an L")?
        }
        _ => return Err("give an action code or four r,c cells".into()),
    };
    if !state.legal_action_mask().get(placement.index()) {
        return Err(format!("placement {} is not legal", placement.index()));
    }
    let mid = state.place_l(placement).map_err(|e| e.to_string())?;
    let neutral = match neutral_part {
        None => NeutralAction::NoMove,
        Some(tok) => {
            let (from, to) = tok.split_once('>').unwrap();
            let from = parse_cell(from)?;
            let to = parse_cell(to)?;
            let piece = mid
                .neutral_cells()
                .iter()
                .position(|&c| c == from)
                .ok_or_else(|| format!("no neutral piece on {}", cell_name(from)))?;
            let a = NeutralAction::Move {
                piece: piece as u8,
                to: to as u8,
            };
            if !mid.legal_neutral_actions().contains(&a) {
                return Err(format!("cannot move that neutral to {}", cell_name(to)));
            }
            a
        }
    };
    Ok(Turn { placement, neutral })
}

fn show(out: &mut dyn Write, state: &GameState) -> std::io::Result<()> {
    writeln!(out, "{state}")?;
    writeln!(out, "{:?} to move", state.to_move())
}

/// Plays one game from the start position; `human` is the person's side.
/// Reading end of input counts as quitting.
pub fn cmd_play(
    opponent: Agent<'_>,
    human: Player,
    seed: u64,
    turn_cap: usize,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<PlayOutcome, CliError> {
    let mut rng = derive_rng(seed, "play", 0);
    let mut state = start_position();
    writeln!(out, "you are {human:?} against {opponent:?}")?;
    for _ in 0..turn_cap {
        show(out, &state)?;
        if state.is_loss() {
            let winner = state.to_move().opponent();
            writeln!(out, "{winner:?} wins")?;
            return Ok(PlayOutcome::Won(winner));
        }
        let turn = if state.to_move() == human {
            match read_turn(&state, input, out)? {
                Some(t) => t,
                None => return Ok(PlayOutcome::Quit),
            }
        } else {
            let t = opponent.choose(&state, &mut rng);
            writeln!(
                out,
                "{} plays {}; {}",
                opponent.name(),
                describe_placement(t.placement),
                describe_neutral(&state.place_l(t.placement).unwrap(), t.neutral)
            )?;
            t
        };
        state = state.apply_turn(turn).expect("validated turn");
    }
    show(out, &state)?;
    if state.is_loss() {
        let winner = state.to_move().opponent();
        writeln!(out, "{winner:?} wins")?;
        return Ok(PlayOutcome::Won(winner));
    }
    writeln!(out, "draw after {turn_cap} turns")?;
    Ok(PlayOutcome::Draw)
}

fn read_turn(
    state: &GameState,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<Option<Turn>, CliError> {
    loop {
        write!(out, "> ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        let line = line.trim();
        match line {
            "" => continue,
            "quit" | "q" => return Ok(None),
            "legal" => {
                for code in state.legal_l_placements() {
                    writeln!(out, "{}", describe_placement(code))?;
                }
                continue;
            }
            _ => {}
        }
        match parse_turn(state, line) {
            Ok(t) => return Ok(Some(t)),
            Err(e) => {
                let codes: Vec<String> = state.legal_action_mask().iter().map(|c| c.to_string()).collect();
                writeln!(out, "{e}; legal codes: {}", codes.join(" "))?;
            }
        }
    }
}
