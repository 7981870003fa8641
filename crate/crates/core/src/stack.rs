//! The full OT tower: outer BBCS OT over the extractable commitment, which
//! runs CDS over inner parallel BBCS OTs over the plain selective-opening
//! commitment. Each layer can be swapped for its ideal functionality.

use std::time::{Duration, Instant};

use crate::bbcs::{self, PotImpl, QMode, QotParams};
use crate::error::{Error, Layer, Result};
use crate::primitives::bits::BitString;
use crate::session::{guarded, local_pair, Backends, Ctx, OuterBackend, PotBackend, SoComBackend};
use crate::socom::SoComKind;
use crate::transport::{run_pair, Transcript};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Test,
}

impl Preset {
    pub fn from_name(s: &str) -> Option<Preset> {
        match s {
            "desk" => Some(Preset::Desk),
            "test" => Some(Preset::Test),
            _ => None,
        }
    }
}

/// A layer that can run as its ideal functionality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapLayer {
    Zk,
    /// The plain so-com under the inner OTs.
    SoCom,
    /// The inner parallel OT.
    Pot,
    Cds,
    /// The extractable commitment under the outer OT.
    Ecom,
}

impl SwapLayer {
    pub const ALL: [SwapLayer; 5] = [SwapLayer::Zk, SwapLayer::SoCom, SwapLayer::Pot, SwapLayer::Cds, SwapLayer::Ecom];

    pub fn name(self) -> &'static str {
        match self {
            SwapLayer::Zk => "zk",
            SwapLayer::SoCom => "socom",
            SwapLayer::Pot => "pot",
            SwapLayer::Cds => "cds",
            SwapLayer::Ecom => "ecom",
        }
    }

    pub fn from_name(s: &str) -> Option<SwapLayer> {
        SwapLayer::ALL.into_iter().find(|l| l.name() == s)
    }

    /// Sets this layer real (`true`) or ideal in `b`.
    pub fn apply(self, b: &mut Backends, real: bool) {
        match self {
            SwapLayer::Zk => b.zk_ideal = !real,
            SwapLayer::SoCom => b.socom = if real { SoComBackend::Plain } else { SoComBackend::Ideal },
            SwapLayer::Pot => b.pot = if real { PotBackend::Real } else { PotBackend::Ideal },
            SwapLayer::Cds => b.cds_ideal = !real,
            SwapLayer::Ecom => b.outer = if real { OuterBackend::Ecom } else { OuterBackend::Ideal },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every sub-protocol is an ideal oracle; only the outer BBCS OT is real.
    Hybrid,
    /// One layer real, the rest ideal.
    SemiReal(SwapLayer),
    Full,
    Custom(Backends),
}

impl Mode {
    pub fn backends(self) -> Backends {
        match self {
            Mode::Hybrid => Backends::ideal(),
            Mode::SemiReal(l) => {
                let mut b = Backends::ideal();
                l.apply(&mut b, true);
                b
            }
            Mode::Full => Backends::real(),
            Mode::Custom(b) => b,
        }
    }

    /// `hybrid`, `full`, or `semi:<layer>`.
    pub fn from_name(s: &str) -> Option<Mode> {
        match s {
            "hybrid" => Some(Mode::Hybrid),
            "full" => Some(Mode::Full),
            _ => s.strip_prefix("semi:").and_then(SwapLayer::from_name).map(Mode::SemiReal),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StackConfig {
    pub lambda: usize,
    pub zk_rounds: usize,
    pub inner_n: usize,
    pub alpha: f64,
    pub outer: QotParams,
    pub mode: Mode,
    pub qmode: QMode,
    pub seed: u64,
}

impl StackConfig {
    pub fn preset(p: Preset) -> StackConfig {
        let (lambda, zk_rounds, inner_n, outer_n, outer_ell) = match p {
            Preset::Desk => (8, 6, 64, 128, 32),
            Preset::Test => (16, 10, 128, 256, 64),
        };
        StackConfig {
            lambda,
            zk_rounds,
            inner_n,
            alpha: 0.375,
            outer: QotParams { n: outer_n, alpha: 0.375, ell: outer_ell },
            mode: Mode::Full,
            qmode: QMode::Prepare,
            seed: 0,
        }
    }

    pub fn with_mode(mut self, m: Mode) -> StackConfig {
        self.mode = m;
        self
    }

    pub fn with_seed(mut self, s: u64) -> StackConfig {
        self.seed = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        crate::primitives::prg::CfPrg::new(self.lambda)?;
        if self.zk_rounds == 0 {
            return Err(Error::Precondition("need at least one ZK round".into()));
        }
        QotParams::new(self.inner_n, self.alpha, 2 * self.lambda)?;
        self.outer.validate()
    }

    pub fn backends(&self) -> Backends {
        self.mode.backends()
    }

    fn outer_impl(&self) -> PotImpl {
        PotImpl::Real(match self.backends().outer {
            OuterBackend::Ideal => SoComKind::Ideal,
            OuterBackend::Plain => SoComKind::Plain,
            OuterBackend::Ecom => SoComKind::Ecom,
        })
    }

    /// Copies the layer parameters into a party context.
    pub fn configure(&self, ctx: &mut Ctx) {
        ctx.backends = self.backends();
        ctx.lambda = self.lambda;
        ctx.zk_rounds = self.zk_rounds;
        ctx.inner_n = self.inner_n;
        ctx.alpha = self.alpha;
        ctx.qmode = self.qmode;
    }
}

pub async fn ot_send(ctx: &mut Ctx, cfg: &StackConfig, s0: BitString, s1: BitString) -> Result<()> {
    ctx.ch.begin(Layer::Stack);
    let r = bbcs::qot_send(ctx, &cfg.outer, cfg.outer_impl(), cfg.qmode, s0, s1).await;
    ctx.ch.end(Layer::Stack);
    r
}

pub async fn ot_receive(ctx: &mut Ctx, cfg: &StackConfig, c: bool) -> Result<BitString> {
    ctx.ch.begin(Layer::Stack);
    let r = bbcs::qot_receive(ctx, &cfg.outer, cfg.outer_impl(), c).await;
    ctx.ch.end(Layer::Stack);
    r
}

/// One finished in-process session.
#[derive(Debug)]
pub struct RunOutcome {
    pub sender: Result<()>,
    pub receiver: Result<BitString>,
    pub transcripts: [Transcript; 2],
    pub elapsed: Duration,
}

impl RunOutcome {
    /// The first error either side saw, preferring a local abort over the
    /// peer's echo of it.
    pub fn error(&self) -> Option<&Error> {
        let errs = [self.sender.as_ref().err(), self.receiver.as_ref().err()];
        errs.iter().flatten().find(|e| !matches!(e, Error::PeerAbort { .. })).or(errs.iter().flatten().next()).copied()
    }
}

/// Runs both parties of the full tower in one process.
pub fn plain_ot(cfg: &StackConfig, s0: &BitString, s1: &BitString, c: bool) -> Result<RunOutcome> {
    run_with(cfg, s0, s1, c, |_, _| {})
}

/// Like [`plain_ot`], with a chance to install hooks on (sender, receiver).
pub fn run_with(cfg: &StackConfig, s0: &BitString, s1: &BitString, c: bool, setup: impl FnOnce(&mut Ctx, &mut Ctx)) -> Result<RunOutcome> {
    cfg.validate()?;
    if s0.len() != cfg.outer.ell || s1.len() != cfg.outer.ell {
        return Err(Error::Precondition(format!("secrets must have {} bits", cfg.outer.ell)));
    }
    let start = Instant::now();
    let mut pr = local_pair(cfg.seed, cfg.lambda, cfg.zk_rounds, cfg.backends());
    cfg.configure(&mut pr.a);
    cfg.configure(&mut pr.b);
    setup(&mut pr.a, &mut pr.b);
    let (a, b) = (&mut pr.a, &mut pr.b);
    let (s0, s1) = (s0.clone(), s1.clone());
    let fa = guarded(a, async |x: &mut Ctx| ot_send(x, cfg, s0, s1).await);
    let fb = guarded(b, async |x: &mut Ctx| ot_receive(x, cfg, c).await);
    let (sender, receiver) = run_pair(&pr.progress, fa, fb)?;
    let transcripts = [std::mem::take(&mut pr.a.ch.transcript), std::mem::take(&mut pr.b.ch.transcript)];
    Ok(RunOutcome { sender, receiver, transcripts, elapsed: start.elapsed() })
}

/// Re-runs a session from its configuration and checks that both parties
/// emit exactly the recorded entries.
pub fn replay(cfg: &StackConfig, s0: &BitString, s1: &BitString, c: bool, recorded: &[Transcript; 2]) -> Result<()> {
    let again = plain_ot(cfg, s0, s1, c)?;
    for (p, (got, want)) in again.transcripts.iter().zip(recorded).enumerate() {
        if got.entries.len() != want.entries.len() {
            return Err(Error::protocol(Layer::Stack, format!("party {p}: {} entries replayed, {} recorded", got.entries.len(), want.entries.len())));
        }
        if let Some(i) = (0..got.entries.len()).find(|&i| got.entries[i] != want.entries[i]) {
            return Err(Error::protocol(Layer::Stack, format!("party {p}: entry {i} differs on replay")));
        }
    }
    Ok(())
}
