//! End-to-end runs of the tower: in-process, over TCP, and aborted.

use std::net::TcpListener;

use qot_core::harness::adversary::Strategy;
use qot_core::primitives::bits::BitString;
use qot_core::qsim::{self, Broker, QuantumPort, RemoteBroker};
use qot_core::session::{broker_seed, guarded, session_id, Ctx};
use qot_core::stack::{ot_receive, ot_send, plain_ot, replay, run_with, Mode, Preset, StackConfig, SwapLayer};
use qot_core::transport::channel::ABORT;
use qot_core::transport::{block_on, Channel, Direction, Endpoint, FrameKind, Transcript};
use qot_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn secrets(seed: u64, ell: usize) -> (BitString, BitString, bool) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (BitString::random(&mut rng, ell), BitString::random(&mut rng, ell), rng.gen())
}

fn ends_with_abort(t: &Transcript) -> bool {
    t.entries.last().is_some_and(|e| e.kind == FrameKind::Control && e.message().unwrap().label == ABORT)
}

#[test]
fn equal_secrets_with_choice_one() {
    let cfg = StackConfig::preset(Preset::Desk).with_mode(Mode::Hybrid).with_seed(11);
    let s = BitString::from_hex("deadbeef", 32).unwrap();
    let out = plain_ot(&cfg, &s, &s, true).unwrap();
    assert_eq!(out.receiver.unwrap(), s);
}

#[test]
fn full_desk_run_is_serialized_and_replayable() {
    let cfg = StackConfig::preset(Preset::Desk).with_seed(5);
    let (s0, s1, c) = secrets(5, cfg.outer.ell);
    let out = plain_ot(&cfg, &s0, &s1, c).unwrap();
    out.sender.unwrap();
    assert_eq!(out.receiver.unwrap(), if c { s1.clone() } else { s0.clone() });
    for t in &out.transcripts {
        t.check_serialization().unwrap();
        assert!(t.entries.iter().all(|e| e.direction != Direction::Oracle), "full mode consults no oracle");
        assert_eq!(&Transcript::from_jsonl(&t.to_jsonl()).unwrap(), t);
    }
    replay(&cfg, &s0, &s1, c, &out.transcripts).unwrap();
}

#[test]
fn oracle_entries_appear_exactly_for_ideal_layers() {
    let base = StackConfig::preset(Preset::Desk).with_seed(6);
    let (s0, s1, c) = secrets(6, base.outer.ell);
    let hybrid = plain_ot(&base.with_mode(Mode::Hybrid), &s0, &s1, c).unwrap();
    assert!(hybrid.transcripts[0].entries.iter().any(|e| e.direction == Direction::Oracle));
    for layer in SwapLayer::ALL {
        let mut b = Mode::Full.backends();
        layer.apply(&mut b, false);
        let out = plain_ot(&base.with_mode(Mode::Custom(b)), &s0, &s1, c).unwrap();
        assert_eq!(out.receiver.unwrap(), if c { s1.clone() } else { s0.clone() }, "{}", layer.name());
        let oracles = out.transcripts[1].entries.iter().filter(|e| e.direction == Direction::Oracle).count();
        assert!(oracles > 0, "{} ideal but no oracle entries", layer.name());
        for t in &out.transcripts {
            t.check_serialization().unwrap();
        }
    }
}

#[test]
fn cheating_receiver_leaves_abort_records() {
    let cfg = StackConfig::preset(Preset::Desk).with_mode(Mode::Hybrid).with_seed(9);
    let (s0, s1, c) = secrets(9, cfg.outer.ell);
    let s = Strategy::guess_committing_receiver();
    let out = run_with(&cfg, &s0, &s1, c, |a, b| s.install(a, b)).unwrap();
    assert!(matches!(out.error(), Some(Error::Abort { .. } | Error::Protocol { .. })), "{:?}", out.error());
    assert!(out.receiver.is_err());
    assert!(ends_with_abort(&out.transcripts[0]) && ends_with_abort(&out.transcripts[1]));
}

#[test]
fn full_tower_over_tcp_with_remote_broker() {
    let cfg = StackConfig::preset(Preset::Desk).with_seed(21);
    let (s0, s1, c) = secrets(21, cfg.outer.ell);
    let bl = TcpListener::bind("127.0.0.1:0").unwrap();
    let baddr = bl.local_addr().unwrap().to_string();
    let broker = std::thread::spawn(move || qsim::serve(bl, Broker::new(broker_seed(21)), 2));
    let pl = TcpListener::bind("127.0.0.1:0").unwrap();
    let paddr = pl.local_addr().unwrap().to_string();
    let session = session_id(cfg.seed);

    let party = move |me: usize, stream: std::net::TcpStream, baddr: String| {
        let q = QuantumPort::Remote(RemoteBroker::connect(&baddr, me as u8, session).unwrap());
        let mut ctx = Ctx::new(me, Channel::new(Endpoint::Tcp(stream), session), cfg.seed, q, cfg.lambda, cfg.zk_rounds);
        cfg.configure(&mut ctx);
        ctx
    };
    let b2 = baddr.clone();
    let (x0, x1) = (s0.clone(), s1.clone());
    let sender = std::thread::spawn(move || {
        let stream = pl.accept().unwrap().0;
        let mut ctx = party(0, stream, b2);
        block_on(guarded(&mut ctx, async |x: &mut Ctx| ot_send(x, &cfg, x0, x1).await)).unwrap()
    });
    let stream = std::net::TcpStream::connect(&paddr).unwrap();
    let mut ctx = party(1, stream, baddr);
    let got = block_on(guarded(&mut ctx, async |x: &mut Ctx| ot_receive(x, &cfg, c).await)).unwrap().unwrap();
    sender.join().unwrap().unwrap();
    drop(ctx);
    broker.join().unwrap().unwrap();
    assert_eq!(got, if c { s1 } else { s0 });
}
