//! ZK statements: a public conjunction of clauses over one shared witness.
//!
//! Each clause applies a circuit to a concatenation of witness slices and
//! public bits; the claim is that every output of every clause is 1.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;
use crate::primitives::circuit::{Bit, BooleanCircuit, CircuitBuilder, Gate};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Seg {
    Wit { start: usize, len: usize },
    Pub(BitString),
}

impl Seg {
    pub fn len(&self) -> usize {
        match self {
            Seg::Wit { len, .. } => *len,
            Seg::Pub(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn wit(start: usize, len: usize) -> Seg {
        Seg::Wit { start, len }
    }

    pub fn bit(b: bool) -> Seg {
        Seg::Pub(BitString::from_bools(&[b]))
    }

    pub fn word(v: u64, len: usize) -> Seg {
        Seg::Pub(BitString::from_u64(v, len))
    }
}

#[derive(Clone, Debug)]
pub struct Clause {
    pub circuit: Arc<BooleanCircuit>,
    pub inputs: Vec<Seg>,
}

#[derive(Clone, Debug, Default)]
pub struct Statement {
    pub witness_len: usize,
    pub clauses: Vec<Clause>,
}

impl Statement {
    pub fn new(witness_len: usize) -> Statement {
        Statement { witness_len, clauses: Vec::new() }
    }

    pub fn push(&mut self, circuit: &Arc<BooleanCircuit>, inputs: Vec<Seg>) -> Result<()> {
        let total: usize = inputs.iter().map(Seg::len).sum();
        if total != circuit.n_inputs() {
            return Err(Error::Length(format!(
                "clause supplies {total} inputs to a circuit with {}",
                circuit.n_inputs()
            )));
        }
        for s in &inputs {
            if let Seg::Wit { start, len } = s {
                if start + len > self.witness_len {
                    return Err(Error::Length("witness segment out of range".into()));
                }
            }
        }
        self.clauses.push(Clause { circuit: circuit.clone(), inputs });
        Ok(())
    }

    /// Appends all clauses of `other`, shifting its witness to follow ours.
    pub fn extend_shifted(&mut self, other: Statement) {
        let off = self.witness_len;
        self.witness_len += other.witness_len;
        for mut c in other.clauses {
            for s in c.inputs.iter_mut() {
                if let Seg::Wit { start, .. } = s {
                    *start += off;
                }
            }
            self.clauses.push(c);
        }
    }

    fn clause_inputs(&self, c: &Clause, w: &BitString) -> Vec<bool> {
        let mut x = Vec::with_capacity(c.circuit.n_inputs());
        for s in &c.inputs {
            match s {
                Seg::Wit { start, len } => x.extend((*start..start + len).map(|i| w.get(i))),
                Seg::Pub(b) => x.extend(b.iter()),
            }
        }
        x
    }

    /// Direct clause-by-clause evaluation; the reference semantics.
    pub fn holds_naive(&self, w: &BitString) -> Result<bool> {
        if w.len() != self.witness_len {
            return Err(Error::Length(format!("witness has {} bits, expected {}", w.len(), self.witness_len)));
        }
        for c in &self.clauses {
            if !c.circuit.eval(&self.clause_inputs(c, w))?.iter().all(|&b| b) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Single-output circuit over the witness: public bits become constants
    /// and all clause outputs are AND-ed together.
    pub fn to_circuit(&self) -> BooleanCircuit {
        let mut cb = CircuitBuilder::new(self.witness_len);
        let mut all = Vec::new();
        for c in &self.clauses {
            let mut wires: Vec<Bit> = Vec::with_capacity(c.circuit.n_wires());
            for s in &c.inputs {
                match s {
                    Seg::Wit { start, len } => wires.extend((*start..start + len).map(|i| cb.input(i))),
                    Seg::Pub(b) => wires.extend(b.iter().map(Bit::Const)),
                }
            }
            for g in c.circuit.gates() {
                let v = match *g {
                    Gate::Xor(a, b) => cb.xor(wires[a as usize], wires[b as usize]),
                    Gate::And(a, b) => cb.and(wires[a as usize], wires[b as usize]),
                    Gate::Not(a) => cb.not(wires[a as usize]),
                    Gate::Const(v) => Bit::Const(v),
                };
                wires.push(v);
            }
            all.extend(c.circuit.outputs().iter().map(|&o| wires[o as usize]));
        }
        let out = cb.and_all(&all);
        cb.finish(&[out])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn to_circuit_agrees_with_clauses() {
        let and = Arc::new(BooleanCircuit::new(2, vec![Gate::And(0, 1)], vec![2]).unwrap());
        let mut st = Statement::new(3);
        st.push(&and, vec![Seg::wit(0, 1), Seg::bit(true)]).unwrap();
        st.push(&and, vec![Seg::wit(1, 2)]).unwrap();
        let c = st.to_circuit();
        for v in 0..8u64 {
            let w = BitString::from_u64(v, 3);
            assert_eq!(c.eval_bits(&w).unwrap().get(0), st.holds_naive(&w).unwrap());
        }
        assert!(st.push(&and, vec![Seg::wit(2, 2)]).is_err());
        assert!(st.push(&and, vec![Seg::wit(0, 1)]).is_err());
    }
}
