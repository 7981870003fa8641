//! Boolean circuit IR shared by the ZK engine and the garbler.
//!
//! Wires `0..n_inputs` are inputs; gate `k` drives wire `n_inputs + k`.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Xor(u32, u32),
    And(u32, u32),
    Not(u32),
    Const(bool),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanCircuit {
    n_inputs: usize,
    gates: Vec<Gate>,
    outputs: Vec<u32>,
}

impl BooleanCircuit {
    pub fn new(n_inputs: usize, gates: Vec<Gate>, outputs: Vec<u32>) -> Result<Self> {
        let c = BooleanCircuit { n_inputs, gates, outputs };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        for (k, g) in self.gates.iter().enumerate() {
            let limit = (self.n_inputs + k) as u32;
            let ok = match *g {
                Gate::Xor(a, b) | Gate::And(a, b) => a < limit && b < limit,
                Gate::Not(a) => a < limit,
                Gate::Const(_) => true,
            };
            if !ok {
                return Err(Error::Circuit(format!("gate {k} references a later wire")));
            }
        }
        let n = self.n_wires() as u32;
        if let Some(o) = self.outputs.iter().find(|&&o| o >= n) {
            return Err(Error::Circuit(format!("output wire {o} does not exist")));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[u32] {
        &self.outputs
    }

    pub fn n_wires(&self) -> usize {
        self.n_inputs + self.gates.len()
    }

    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::And(..))).count()
    }

    pub fn eval(&self, x: &[bool]) -> Result<Vec<bool>> {
        if x.len() != self.n_inputs {
            return Err(Error::Length(format!(
                "circuit expects {} inputs, got {}",
                self.n_inputs,
                x.len()
            )));
        }
        let mut w = Vec::with_capacity(self.n_wires());
        w.extend_from_slice(x);
        for g in &self.gates {
            let v = match *g {
                Gate::Xor(a, b) => w[a as usize] ^ w[b as usize],
                Gate::And(a, b) => w[a as usize] & w[b as usize],
                Gate::Not(a) => !w[a as usize],
                Gate::Const(c) => c,
            };
            w.push(v);
        }
        Ok(self.outputs.iter().map(|&o| w[o as usize]).collect())
    }

    pub fn eval_bits(&self, x: &BitString) -> Result<BitString> {
        Ok(BitString::from_bools(&self.eval(&x.to_bools())?))
    }

    /// Evaluates 64 independent inputs at once; `x[i]` holds input wire `i` across lanes.
    pub fn eval_lanes(&self, x: &[u64]) -> Result<Vec<u64>> {
        if x.len() != self.n_inputs {
            return Err(Error::Length("lane input count".into()));
        }
        let mut w = Vec::with_capacity(self.n_wires());
        w.extend_from_slice(x);
        for g in &self.gates {
            let v = match *g {
                Gate::Xor(a, b) => w[a as usize] ^ w[b as usize],
                Gate::And(a, b) => w[a as usize] & w[b as usize],
                Gate::Not(a) => !w[a as usize],
                Gate::Const(c) => {
                    if c {
                        u64::MAX
                    } else {
                        0
                    }
                }
            };
            w.push(v);
        }
        Ok(self.outputs.iter().map(|&o| w[o as usize]).collect())
    }
}

/// A builder-side bit: either a known constant or a wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bit {
    Const(bool),
    Wire(u32),
}

impl Bit {
    pub const ZERO: Bit = Bit::Const(false);
    pub const ONE: Bit = Bit::Const(true);
}

/// Circuit builder with constant folding and a few algebraic shortcuts.
#[derive(Debug)]
pub struct CircuitBuilder {
    n_inputs: usize,
    gates: Vec<Gate>,
    not_of: HashMap<u32, u32>,
}

impl CircuitBuilder {
    pub fn new(n_inputs: usize) -> Self {
        CircuitBuilder { n_inputs, gates: Vec::new(), not_of: HashMap::new() }
    }

    pub fn input(&self, i: usize) -> Bit {
        assert!(i < self.n_inputs);
        Bit::Wire(i as u32)
    }

    pub fn inputs(&self, start: usize, len: usize) -> Vec<Bit> {
        (start..start + len).map(|i| self.input(i)).collect()
    }

    fn push(&mut self, g: Gate) -> u32 {
        self.gates.push(g);
        (self.n_inputs + self.gates.len() - 1) as u32
    }

    pub fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x ^ y),
            (Bit::Const(false), w) | (w, Bit::Const(false)) => w,
            (Bit::Const(true), w) | (w, Bit::Const(true)) => self.not(w),
            (Bit::Wire(x), Bit::Wire(y)) if x == y => Bit::ZERO,
            (Bit::Wire(x), Bit::Wire(y)) => Bit::Wire(self.push(Gate::Xor(x, y))),
        }
    }

    pub fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x & y),
            (Bit::Const(false), _) | (_, Bit::Const(false)) => Bit::ZERO,
            (Bit::Const(true), w) | (w, Bit::Const(true)) => w,
            (Bit::Wire(x), Bit::Wire(y)) if x == y => a,
            (Bit::Wire(x), Bit::Wire(y)) => Bit::Wire(self.push(Gate::And(x, y))),
        }
    }

    pub fn not(&mut self, a: Bit) -> Bit {
        match a {
            Bit::Const(x) => Bit::Const(!x),
            Bit::Wire(w) => {
                if let Some(&n) = self.not_of.get(&w) {
                    return Bit::Wire(n);
                }
                let n = self.push(Gate::Not(w));
                self.not_of.insert(w, n);
                self.not_of.insert(n, w);
                Bit::Wire(n)
            }
        }
    }

    /// A CONST gate that is never folded away, so the circuit's shape does
    /// not depend on its value.
    pub fn const_gate(&mut self, v: bool) -> Bit {
        Bit::Wire(self.push(Gate::Const(v)))
    }

    pub fn xnor(&mut self, a: Bit, b: Bit) -> Bit {
        let x = self.xor(a, b);
        self.not(x)
    }

    pub fn or(&mut self, a: Bit, b: Bit) -> Bit {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `s ? b : a`, one AND.
    pub fn mux(&mut self, s: Bit, a: Bit, b: Bit) -> Bit {
        let d = self.xor(a, b);
        let t = self.and(s, d);
        self.xor(a, t)
    }

    pub fn xor_words(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(&x, &y)| self.xor(x, y)).collect()
    }

    pub fn and_words(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(&x, &y)| self.and(x, y)).collect()
    }

    pub fn and_all(&mut self, bits: &[Bit]) -> Bit {
        match bits.len() {
            0 => Bit::ONE,
            1 => bits[0],
            n => {
                let l = self.and_all(&bits[..n / 2]);
                let r = self.and_all(&bits[n / 2..]);
                self.and(l, r)
            }
        }
    }

    /// Per-bit equality flags.
    pub fn eq_bits(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(&x, &y)| self.xnor(x, y)).collect()
    }

    pub fn finish(mut self, outputs: &[Bit]) -> BooleanCircuit {
        let outs = outputs
            .iter()
            .map(|&b| match b {
                Bit::Wire(w) => w,
                Bit::Const(c) => self.push(Gate::Const(c)),
            })
            .collect();
        BooleanCircuit::new(self.n_inputs, self.gates, outs).expect("builder emits valid circuits")
    }
}

/// Rotate a little-endian word left by `r`.
pub fn rotl_word(w: &[Bit], r: usize) -> Vec<Bit> {
    let n = w.len();
    (0..n).map(|i| w[(i + n - r % n) % n]).collect()
}

pub fn const_word(v: u64, len: usize) -> Vec<Bit> {
    (0..len).map(|i| Bit::Const((v >> i) & 1 == 1)).collect()
}

/// Uniformly random well-formed circuit, used by tests and the acceptance suite.
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, n_inputs: usize, n_gates: usize, n_outputs: usize) -> BooleanCircuit {
    assert!(n_inputs > 0);
    let mut gates = Vec::with_capacity(n_gates);
    for k in 0..n_gates {
        let limit = (n_inputs + k) as u32;
        let g = match rng.gen_range(0..10) {
            0..=3 => Gate::Xor(rng.gen_range(0..limit), rng.gen_range(0..limit)),
            4..=7 => Gate::And(rng.gen_range(0..limit), rng.gen_range(0..limit)),
            8 => Gate::Not(rng.gen_range(0..limit)),
            _ => Gate::Const(rng.gen()),
        };
        gates.push(g);
    }
    let n_wires = (n_inputs + n_gates) as u32;
    let outputs = (0..n_outputs).map(|_| rng.gen_range(0..n_wires)).collect();
    BooleanCircuit::new(n_inputs, gates, outputs).expect("random circuit is well formed")
}
