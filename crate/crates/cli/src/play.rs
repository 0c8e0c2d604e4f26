use std::io::{self, BufRead, Write};
use std::sync::Arc;

use spc_core::context::{Dot, DotId, GameContext};
use spc_core::engine::AgentConfig;
use spc_core::perception::{color_predicate, size_predicate};
use spc_core::reader::Reader;
use spc_core::writer::attr_word;
use spc_service::{AgentReply, ApiError, Awaiting, SceneView, Session};

const HELP: &str = "\
Type a message to the agent, or:
  select <n>   select dot n of your view and end the game
  /scene       list your dots
  /help        this text
  /quit        leave without selecting";

fn print_scene(out: &mut impl Write, scene: &SceneView) -> io::Result<()> {
    writeln!(out, "your view (radius {}):", scene.radius)?;
    for d in &scene.dots {
        let dot = Dot { id: DotId(d.id), x: d.x, y: d.y, size: d.size, color: d.color };
        writeln!(
            out,
            "  [{}] x {:+.3}  y {:+.3}  {} {}",
            d.id,
            d.x,
            d.y,
            attr_word(size_predicate(&dot)),
            attr_word(color_predicate(&dot))
        )?;
    }
    Ok(())
}

fn print_reply(out: &mut impl Write, r: &AgentReply) -> io::Result<()> {
    if let Some(t) = &r.text {
        writeln!(out, "agent: {t}")?;
    }
    if r.selected {
        writeln!(out, "agent: <selected a dot>")?;
    }
    Ok(())
}

fn io_err(e: ApiError) -> io::Error {
    io::Error::other(e.to_string())
}

/// Terminal game on `ctx`: the human plays the partner view and the agent
/// opens. Ends on a selection, `/quit`, or end of input.
pub fn run(
    input: impl BufRead,
    mut out: impl Write,
    ctx: GameContext,
    cfg: AgentConfig,
    reader: Arc<dyn Reader>,
) -> io::Result<()> {
    let (mut session, created) = Session::start("terminal".into(), ctx, cfg, reader).map_err(io_err)?;
    print_scene(&mut out, &created.scene)?;
    writeln!(out, "type /help for commands")?;
    print_reply(&mut out, &created.agent)?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("select") {
            let Ok(n) = rest.trim().parse::<u32>() else {
                writeln!(out, "usage: select <n>")?;
                continue;
            };
            match session.select(n) {
                Ok(r) => {
                    match r.agent_selection_local {
                        Some(a) => writeln!(out, "agent selected your dot [{a}]")?,
                        None => writeln!(out, "agent selected a dot you cannot see")?,
                    }
                    writeln!(
                        out,
                        "{}",
                        if r.success {
                            "success: you both chose the same shared dot"
                        } else {
                            "failure: different dots"
                        }
                    )?;
                    return Ok(());
                }
                Err(e) => writeln!(out, "{e}")?,
            }
            continue;
        }
        match line {
            "/help" => writeln!(out, "{HELP}")?,
            "/scene" => print_scene(&mut out, &session.scene_view())?,
            "/quit" => {
                writeln!(out, "left without selecting")?;
                return Ok(());
            }
            cmd if cmd.starts_with('/') => writeln!(out, "unknown command {cmd}\n{HELP}")?,
            text => match session.utterance(text) {
                Ok(r) => {
                    print_reply(&mut out, &r.agent)?;
                    if r.awaiting == Awaiting::Selection {
                        writeln!(out, "your turn to select: select <n>")?;
                    }
                }
                Err(e) => writeln!(out, "{e}")?,
            },
        }
    }
    writeln!(out, "input ended; game closed without a selection")?;
    Ok(())
}
