//! Data-logger replay protocol.
//!
//! Newline-delimited ASCII over a TCP socket. The server greets with
//! `PHYSARUMD 1`, then sends `S <t_seconds> <v_mv>` and `E <t_seconds> <label>`
//! frames in time order, paced at wall-clock `dt / speedup`, then `END`.
//! Sequential clients each get the full replay.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use crate::analyzer::{AnalysisOutcome, AnalyzeParams, StreamStatus, StreamingAnalyzer};
use crate::error::{Error, Result};
use crate::signal::{EventKind, EventMarker, Trace};

pub const GREETING: &str = "PHYSARUMD 1";

enum Frame<'a> {
    Sample(f64, f64),
    Event(f64, &'a str),
}

fn frame_schedule<'a>(trace: &Trace, events: &'a [EventMarker]) -> Vec<(f64, Frame<'a>)> {
    let mut frames: Vec<(f64, Frame)> = Vec::with_capacity(trace.len() + events.len());
    for (i, v) in trace.samples.iter().enumerate() {
        frames.push((trace.time_at(i), Frame::Sample(trace.time_at(i), *v)));
    }
    // Only chemical additions travel on the wire; the protocol has no kind
    // field and the analyzer ignores everything else.
    for e in events.iter().filter(|e| e.kind == EventKind::ChemicalAdded) {
        frames.push((e.time_s, Frame::Event(e.time_s, &e.label)));
    }
    // Samples sort before events at equal times.
    frames.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap().then_with(|| {
            let rank = |f: &Frame| match f {
                Frame::Sample(..) => 0,
                Frame::Event(..) => 1,
            };
            rank(&a.1).cmp(&rank(&b.1))
        })
    });
    frames
}

/// Replay server: binds once, then serves the full trace to each client in
/// turn.
pub struct StreamServer {
    listener: TcpListener,
}

impl StreamServer {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self> {
        let listener = TcpListener::bind(addr)
            .map_err(|e| Error::Transport(format!("bind failed: {e}")))?;
        Ok(StreamServer { listener })
    }

    pub fn local_addr(&self) -> Result<std::net::SocketAddr> {
        self.listener
            .local_addr()
            .map_err(|e| Error::Transport(format!("local_addr: {e}")))
    }

    /// Serve clients sequentially; `max_clients` of `None` loops forever.
    pub fn serve(
        &self,
        trace: &Trace,
        events: &[EventMarker],
        speedup: f64,
        max_clients: Option<usize>,
    ) -> Result<()> {
        if !(speedup > 0.0) {
            return Err(Error::Config(format!(
                "speedup must be positive, got {speedup}"
            )));
        }
        let frames = frame_schedule(trace, events);
        let mut served = 0usize;
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => return Err(Error::Transport(format!("accept failed: {e}"))),
            };
            // A disconnecting client only ends its own replay.
            let _ = replay_to_client(stream, &frames, trace.start_time_s, speedup);
            served += 1;
            if let Some(max) = max_clients {
                if served >= max {
                    break;
                }
            }
        }
        Ok(())
    }
}

fn replay_to_client(
    stream: TcpStream,
    frames: &[(f64, Frame)],
    t0: f64,
    speedup: f64,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(stream);
    writeln!(w, "{GREETING}")?;
    let wall_start = Instant::now();
    for (t, frame) in frames {
        let target = wall_start + Duration::from_secs_f64(((t - t0) / speedup).max(0.0));
        let now = Instant::now();
        if target > now {
            w.flush()?;
            std::thread::sleep(target - now);
        }
        match frame {
            Frame::Sample(t, v) => writeln!(w, "S {t:.6} {v:.6}")?,
            Frame::Event(t, label) => writeln!(w, "E {t:.6} {label}")?,
        }
    }
    writeln!(w, "END")?;
    w.flush()
}

/// Connect to a replay server, feed the incremental analyzer and return the
/// final outcome. `on_status` receives state transitions as they happen.
pub fn watch_stream(
    addr: impl ToSocketAddrs,
    params: AnalyzeParams,
    timeout: Duration,
    mut on_status: impl FnMut(&StreamStatus),
) -> Result<AnalysisOutcome> {
    let addr = addr
        .to_socket_addrs()
        .map_err(|e| Error::Transport(format!("bad address: {e}")))?
        .next()
        .ok_or_else(|| Error::Transport("address resolved to nothing".into()))?;
    let stream = TcpStream::connect_timeout(&addr, timeout)
        .map_err(|e| Error::Transport(format!("connect failed: {e}")))?;
    stream
        .set_read_timeout(Some(timeout))
        .map_err(|e| Error::Transport(format!("set timeout: {e}")))?;

    let mut reader = BufReader::new(stream);
    let mut analyzer = StreamingAnalyzer::new(params);
    let mut lineno = 0usize;
    let mut line = String::new();
    let mut ended = false;

    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::Transport(format!("read failed: {e}")))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let frame = line.trim_end_matches(['\n', '\r']);
        if lineno == 1 {
            if frame != GREETING {
                return Err(Error::Protocol {
                    line: lineno,
                    msg: format!("bad greeting: `{frame}`"),
                });
            }
            continue;
        }
        if frame == "END" {
            ended = true;
            break;
        }
        if let Some(rest) = frame.strip_prefix("S ") {
            let mut parts = rest.splitn(2, ' ');
            let t = parts.next().unwrap_or("").parse::<f64>();
            let v = parts.next().unwrap_or("").parse::<f64>();
            let (t, v) = match (t, v) {
                (Ok(t), Ok(v)) => (t, v),
                _ => {
                    return Err(Error::Protocol {
                        line: lineno,
                        msg: format!("malformed sample frame: `{frame}`"),
                    })
                }
            };
            let status = analyzer.push_sample(t, v).map_err(|e| Error::Protocol {
                line: lineno,
                msg: e.to_string(),
            })?;
            if let Some(s) = status {
                on_status(&s);
            }
        } else if let Some(rest) = frame.strip_prefix("E ") {
            let (t_str, label) = rest.split_once(' ').ok_or_else(|| Error::Protocol {
                line: lineno,
                msg: format!("malformed event frame: `{frame}`"),
            })?;
            let t = t_str.parse::<f64>().map_err(|_| Error::Protocol {
                line: lineno,
                msg: format!("malformed event time: `{t_str}`"),
            })?;
            if let Some(s) = analyzer.push_event(EventMarker::chemical_added(t, label)) {
                on_status(&s);
            }
        } else {
            return Err(Error::Protocol {
                line: lineno,
                msg: format!("unrecognized frame: `{frame}`"),
            });
        }
    }
    if !ended {
        return Err(Error::Transport(
            "stream closed before END terminator".into(),
        ));
    }
    let outcome = analyzer.finish()?;
    on_status(&StreamStatus::OutcomeReady);
    Ok(outcome)
}
