//! `qot`: run the OT tower in-process or as three TCP processes
//! (sender, receiver, broker).

use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, ValueEnum};
use qot_core::bbcs::QMode;
use qot_core::error::Error;
use qot_core::harness::adversary::Strategy;
use qot_core::primitives::bits::BitString;
use qot_core::qsim::{self, Broker, QuantumPort, RemoteBroker};
use qot_core::session::{broker_seed, guarded, session_id, Ctx};
use qot_core::stack::{ot_receive, ot_send, run_with, Mode, Preset, StackConfig};
use qot_core::transport::{block_on, Channel, Endpoint, Transcript};

const USAGE: u8 = 2;
const ABORTED: u8 = 3;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Role {
    Sender,
    Receiver,
    Broker,
    /// Both parties in one process.
    Local,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QModeArg {
    Prepare,
    Epr,
}

#[derive(Parser, Debug)]
#[command(name = "qot", version, about = "Oblivious transfer from quantum channels and one-way functions")]
struct Args {
    #[arg(long, value_enum, default_value = "local")]
    role: Role,
    /// hybrid, full, or semi:<zk|socom|pot|cds|ecom>
    #[arg(long, default_value = "full")]
    mode: String,
    /// desk or test
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// s0,s1 as hex; each must be exactly ℓ bits
    #[arg(long)]
    secrets: Option<String>,
    #[arg(long)]
    choice: Option<u8>,
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    connect: Option<String>,
    /// Broker address for sender and receiver in TCP mode.
    #[arg(long)]
    broker: Option<String>,
    /// Transcript file; for `local`, a directory receiving sender.jsonl and receiver.jsonl.
    #[arg(long)]
    transcript_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "prepare")]
    qmode: QModeArg,
    /// Corrupt one party in a local run: guess-committing-receiver,
    /// equivocating-committer, cds-single-bad-label or zk-cheater.
    #[arg(long)]
    adversary: Option<String>,
}

enum Fail {
    Usage(String),
    Abort(Error),
    Other(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        match e {
            Error::Abort { .. } | Error::PeerAbort { .. } | Error::Protocol { .. } | Error::Decode(_) | Error::Strategy(_) => Fail::Abort(e),
            Error::Precondition(m) | Error::Length(m) => Fail::Usage(m),
            e => Fail::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Fail {
        Fail::Other(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail::Usage(msg.into())
}

fn config(a: &Args) -> Result<StackConfig, Fail> {
    let preset = Preset::from_name(&a.preset).ok_or_else(|| usage(format!("unknown preset {:?}", a.preset)))?;
    let mode = Mode::from_name(&a.mode).ok_or_else(|| usage(format!("unknown mode {:?}", a.mode)))?;
    let mut cfg = StackConfig::preset(preset).with_mode(mode).with_seed(a.seed);
    cfg.qmode = match a.qmode {
        QModeArg::Prepare => QMode::Prepare,
        QModeArg::Epr => QMode::Epr,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn secrets(a: &Args, ell: usize) -> Result<(BitString, BitString), Fail> {
    let s = a.secrets.as_deref().ok_or_else(|| usage("--secrets is required"))?;
    let (x, y) = s.split_once(',').ok_or_else(|| usage("--secrets takes two comma-separated hex strings"))?;
    let parse = |h: &str| {
        if h.len() * 4 != ell {
            return Err(usage(format!("secret {h:?} must be {} hex digits ({ell} bits)", ell / 4)));
        }
        BitString::from_hex(h, ell).map_err(|e| usage(format!("secret {h:?}: {e}")))
    };
    Ok((parse(x)?, parse(y)?))
}

fn choice(a: &Args) -> Result<bool, Fail> {
    match a.choice {
        Some(0) => Ok(false),
        Some(1) => Ok(true),
        Some(c) => Err(usage(format!("--choice must be 0 or 1, got {c}"))),
        None => Err(usage("--choice is required")),
    }
}

fn adversary(name: &str) -> Result<Strategy, Fail> {
    Ok(match name {
        "guess-committing-receiver" => Strategy::guess_committing_receiver(),
        "equivocating-committer" => Strategy::equivocating_committer(),
        "cds-single-bad-label" => Strategy::cds_single_bad_label(),
        "zk-cheater" => Strategy::zk_cheater(),
        _ => return Err(usage(format!("unknown adversary {name:?}"))),
    })
}

fn write_transcript(path: &Path, t: &Transcript) -> Result<(), Fail> {
    std::fs::write(path, t.to_jsonl()).map_err(|e| Fail::Other(format!("{}: {e}", path.display())))
}

fn run_local(a: &Args, cfg: &StackConfig) -> Result<(), Fail> {
    let (s0, s1) = secrets(a, cfg.outer.ell)?;
    let c = choice(a)?;
    let strat = a.adversary.as_deref().map(adversary).transpose()?;
    let out = run_with(cfg, &s0, &s1, c, |x, y| {
        if let Some(s) = &strat {
            s.install(x, y);
        }
    })?;
    if let Some(dir) = &a.transcript_out {
        std::fs::create_dir_all(dir)?;
        write_transcript(&dir.join("sender.jsonl"), &out.transcripts[0])?;
        write_transcript(&dir.join("receiver.jsonl"), &out.transcripts[1])?;
    }
    if let Some(e) = out.error() {
        return Err(e.clone().into());
    }
    println!("{}", out.receiver.expect("no error").to_hex());
    eprintln!("done in {:.2}s", out.elapsed.as_secs_f64());
    Ok(())
}

fn connect_retry(addr: &str) -> Result<TcpStream, Fail> {
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => return Err(Fail::Other(format!("{addr}: {e}"))),
        }
    }
}

fn broker_retry(addr: &str, party: u8, session: [u8; 8]) -> Result<RemoteBroker, Fail> {
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        match RemoteBroker::connect(addr, party, session) {
            Ok(b) => return Ok(b),
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => return Err(Fail::Other(format!("broker {addr}: {e}"))),
        }
    }
}

fn run_party(a: &Args, cfg: &StackConfig, party: u8) -> Result<(), Fail> {
    if cfg.backends().needs_hub() {
        return Err(usage("TCP parties need --mode full; ideal layers only exist in a local run"));
    }
    let broker = a.broker.as_deref().ok_or_else(|| usage("--broker is required"))?;
    let input = if party == 0 { Ok(secrets(a, cfg.outer.ell)?) } else { Err(choice(a)?) };
    let stream = match (&a.listen, &a.connect) {
        (Some(l), None) => TcpListener::bind(l)?.accept()?.0,
        (None, Some(c)) => connect_retry(c)?,
        _ => return Err(usage("give exactly one of --listen or --connect")),
    };
    stream.set_nodelay(true)?;
    let session = session_id(cfg.seed);
    let q = QuantumPort::Remote(broker_retry(broker, party, session)?);
    let mut ctx = Ctx::new(party as usize, Channel::new(Endpoint::Tcp(stream), session), cfg.seed, q, cfg.lambda, cfg.zk_rounds);
    cfg.configure(&mut ctx);
    let r = match input {
        Ok((s0, s1)) => block_on(guarded(&mut ctx, async |x: &mut Ctx| ot_send(x, cfg, s0, s1).await))?.map(|()| None),
        Err(c) => block_on(guarded(&mut ctx, async |x: &mut Ctx| ot_receive(x, cfg, c).await))?.map(Some),
    };
    if let Some(p) = &a.transcript_out {
        write_transcript(p, &ctx.ch.transcript)?;
    }
    if let Some(s) = r? {
        println!("{}", s.to_hex());
    }
    Ok(())
}

fn run_broker(a: &Args, cfg: &StackConfig) -> Result<(), Fail> {
    let addr = a.listen.as_deref().ok_or_else(|| usage("the broker needs --listen"))?;
    let listener = TcpListener::bind(addr)?;
    qsim::serve(listener, Broker::new(broker_seed(cfg.seed)), 2)?;
    Ok(())
}

fn main() -> ExitCode {
    let a = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let r = config(&a).and_then(|cfg| match a.role {
        Role::Local => run_local(&a, &cfg),
        Role::Sender => run_party(&a, &cfg, 0),
        Role::Receiver => run_party(&a, &cfg, 1),
        Role::Broker => run_broker(&a, &cfg),
    });
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("qot: {m}");
            ExitCode::from(USAGE)
        }
        Err(Fail::Abort(e)) => {
            eprintln!("qot: aborted: {e}");
            ExitCode::from(ABORTED)
        }
        Err(Fail::Other(m)) => {
            eprintln!("qot: {m}");
            ExitCode::FAILURE
        }
    }
}
