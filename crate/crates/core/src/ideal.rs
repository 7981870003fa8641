//! Ideal functionalities shared by two in-process parties: F_so-com, F_p-ot,
//! F_zk and F_cds. Used as hybrid-mode backends and as test oracles.
//!
//! Each functionality keeps one slot per invocation. Both parties number
//! their invocations independently and in the same order, so slot `idx` on
//! one side meets slot `idx` on the other.

use std::cell::{Cell, RefCell};
use std::future::poll_fn;
use std::rc::Rc;
use std::task::Poll;

use crate::error::{Error, Layer, Result};
use crate::primitives::bits::BitString;
use crate::zk::engine::Compiled;
use crate::zk::statement::Statement;

#[derive(Default, Clone, Debug)]
struct SoComSlot {
    msgs: Option<Vec<BitString>>,
    choice: Option<Vec<usize>>,
    revealed: bool,
}

#[derive(Default, Clone, Debug)]
struct PotSlot {
    inputs: Option<Vec<[BitString; 2]>>,
    choices: Option<Vec<bool>>,
}

#[derive(Default, Clone, Debug)]
struct CdsSlot {
    input: Option<(Vec<u8>, BitString)>,
    witness: Option<BitString>,
}

pub struct IdealHub {
    progress: Rc<Cell<u64>>,
    socom: RefCell<Vec<SoComSlot>>,
    pot: RefCell<Vec<PotSlot>>,
    zk: RefCell<Vec<Option<BitString>>>,
    cds: RefCell<Vec<CdsSlot>>,
    aborted: RefCell<Option<(usize, Layer, String)>>,
}

fn slot<T: Default>(v: &mut Vec<T>, idx: usize) -> &mut T {
    if v.len() <= idx {
        v.resize_with(idx + 1, T::default);
    }
    &mut v[idx]
}

impl IdealHub {
    pub fn new(progress: Rc<Cell<u64>>) -> Rc<IdealHub> {
        Rc::new(IdealHub {
            progress,
            socom: RefCell::default(),
            pot: RefCell::default(),
            zk: RefCell::default(),
            cds: RefCell::default(),
            aborted: RefCell::default(),
        })
    }

    fn bump(&self) {
        self.progress.set(self.progress.get() + 1);
    }

    /// Records that `party` aborted, so the peer's pending oracle waits end.
    pub fn note_abort(&self, party: usize, layer: Layer, reason: &str) {
        let mut a = self.aborted.borrow_mut();
        if a.is_none() {
            *a = Some((party, layer, reason.to_string()));
            self.bump();
        }
    }

    async fn wait<T>(&self, me: usize, mut f: impl FnMut() -> Option<T>) -> Result<T> {
        poll_fn(|_| {
            if let Some(v) = f() {
                self.bump();
                return Poll::Ready(Ok(v));
            }
            if let Some((p, layer, reason)) = self.aborted.borrow().clone() {
                if p != me {
                    return Poll::Ready(Err(Error::PeerAbort { layer, reason }));
                }
            }
            Poll::Pending
        })
        .await
    }

    // ---- F_so-com ----

    pub fn socom_commit(&self, idx: usize, msgs: Vec<BitString>) -> Result<()> {
        let mut v = self.socom.borrow_mut();
        let s = slot(&mut v, idx);
        if s.msgs.is_some() {
            return Err(Error::protocol(Layer::Ideal, "duplicate commit"));
        }
        s.msgs = Some(msgs);
        self.bump();
        Ok(())
    }

    /// Receipt: number of committed messages and their lengths.
    pub async fn socom_receipt(&self, me: usize, idx: usize) -> Result<Vec<usize>> {
        self.wait(me, || {
            let v = self.socom.borrow();
            v.get(idx)?.msgs.as_ref().map(|m| m.iter().map(BitString::len).collect())
        })
        .await
    }

    pub fn socom_choose(&self, idx: usize, subset: Vec<usize>) -> Result<()> {
        let mut v = self.socom.borrow_mut();
        let s = slot(&mut v, idx);
        let k = s.msgs.as_ref().map(Vec::len).ok_or_else(|| Error::protocol(Layer::Ideal, "choice before commit"))?;
        if s.choice.is_some() {
            return Err(Error::protocol(Layer::Ideal, "duplicate choice"));
        }
        if subset.iter().any(|&i| i >= k) {
            return Err(Error::protocol(Layer::Ideal, "opening index out of range"));
        }
        s.choice = Some(subset);
        self.bump();
        Ok(())
    }

    pub async fn socom_choice(&self, me: usize, idx: usize) -> Result<Vec<usize>> {
        self.wait(me, || self.socom.borrow().get(idx)?.choice.clone()).await
    }

    pub fn socom_reveal(&self, idx: usize) -> Result<()> {
        let mut v = self.socom.borrow_mut();
        let s = slot(&mut v, idx);
        if s.choice.is_none() || s.revealed {
            return Err(Error::protocol(Layer::Ideal, "reveal out of order"));
        }
        s.revealed = true;
        self.bump();
        Ok(())
    }

    /// Open: the chosen messages, in the order of the chosen subset.
    pub async fn socom_open(&self, me: usize, idx: usize) -> Result<Vec<BitString>> {
        self.wait(me, || {
            let v = self.socom.borrow();
            let s = v.get(idx)?;
            if !s.revealed {
                return None;
            }
            let m = s.msgs.as_ref()?;
            Some(s.choice.as_ref()?.iter().map(|&i| m[i].clone()).collect())
        })
        .await
    }

    /// Committed messages, visible to simulators.
    pub fn socom_messages(&self, idx: usize) -> Option<Vec<BitString>> {
        self.socom.borrow().get(idx)?.msgs.clone()
    }

    /// Simulator privilege: replace committed messages before they are
    /// revealed (the simulated committer decides them late).
    pub fn socom_amend(&self, idx: usize, updates: &[(usize, BitString)]) -> Result<()> {
        let mut v = self.socom.borrow_mut();
        let s = slot(&mut v, idx);
        if s.revealed {
            return Err(Error::protocol(Layer::Ideal, "amend after reveal"));
        }
        let m = s.msgs.as_mut().ok_or_else(|| Error::protocol(Layer::Ideal, "amend before commit"))?;
        for (i, msg) in updates {
            *m.get_mut(*i).ok_or_else(|| Error::protocol(Layer::Ideal, "amend index out of range"))? = msg.clone();
        }
        Ok(())
    }

    // ---- F_p-ot ----

    /// Sender query. A repeated query for the same slot is ignored.
    pub fn pot_send(&self, idx: usize, inputs: Vec<[BitString; 2]>) {
        let mut v = self.pot.borrow_mut();
        let s = slot(&mut v, idx);
        if s.inputs.is_none() {
            s.inputs = Some(inputs);
            self.bump();
        }
    }

    /// Receiver query; waits until the sender's query has been recorded.
    pub async fn pot_receive(&self, me: usize, idx: usize, choices: Vec<bool>) -> Result<Vec<BitString>> {
        {
            let mut v = self.pot.borrow_mut();
            let s = slot(&mut v, idx);
            if s.choices.is_none() {
                s.choices = Some(choices.clone());
            }
        }
        let out = self
            .wait(me, || {
                let v = self.pot.borrow();
                let inp = v.get(idx)?.inputs.as_ref()?;
                Some(if inp.len() != choices.len() {
                    Err(Error::protocol(Layer::Ideal, "parallel OT size mismatch"))
                } else {
                    Ok(inp.iter().zip(&choices).map(|(p, &c)| p[c as usize].clone()).collect())
                })
            })
            .await?;
        out
    }

    pub fn pot_inputs(&self, idx: usize) -> Option<Vec<[BitString; 2]>> {
        self.pot.borrow().get(idx)?.inputs.clone()
    }

    pub fn pot_choices(&self, idx: usize) -> Option<Vec<bool>> {
        self.pot.borrow().get(idx)?.choices.clone()
    }

    /// Simulator privilege: waits for the receiver's choice bits.
    pub async fn pot_choices_wait(&self, me: usize, idx: usize) -> Result<Vec<bool>> {
        self.wait(me, || self.pot_choices(idx)).await
    }

    // ---- F_zk ----

    pub fn zk_prove(&self, idx: usize, witness: BitString) {
        let mut v = self.zk.borrow_mut();
        let s = slot(&mut v, idx);
        if s.is_none() {
            *s = Some(witness);
            self.bump();
        }
    }

    /// Accepts iff the prover's witness satisfies the verifier's statement.
    pub async fn zk_verify(&self, me: usize, idx: usize, st: &Statement) -> Result<bool> {
        let w = self.wait(me, || self.zk.borrow().get(idx)?.clone()).await?;
        if w.len() != st.witness_len {
            return Ok(false);
        }
        Compiled::new(st)?.holds(&w)
    }

    /// Witness handed to F_zk, visible to simulators.
    pub fn zk_witness(&self, idx: usize) -> Option<BitString> {
        self.zk.borrow().get(idx)?.clone()
    }

    pub fn zk_calls(&self) -> usize {
        self.zk.borrow().len()
    }

    // ---- F_cds ----

    pub fn cds_send(&self, idx: usize, x: Vec<u8>, mu: BitString) {
        let mut v = self.cds.borrow_mut();
        let s = slot(&mut v, idx);
        if s.input.is_none() {
            s.input = Some((x, mu));
            self.bump();
        }
    }

    /// Receiver query: returns the sender's (x, μ). The caller applies the
    /// relation to decide between μ and ⊥; the witness is recorded for simulators.
    pub async fn cds_receive(&self, me: usize, idx: usize, w: BitString) -> Result<(Vec<u8>, BitString)> {
        {
            let mut v = self.cds.borrow_mut();
            let s = slot(&mut v, idx);
            if s.witness.is_none() {
                s.witness = Some(w);
            }
        }
        self.wait(me, || self.cds.borrow().get(idx)?.input.clone()).await
    }

    pub fn cds_witness(&self, idx: usize) -> Option<BitString> {
        self.cds.borrow().get(idx)?.witness.clone()
    }
}
