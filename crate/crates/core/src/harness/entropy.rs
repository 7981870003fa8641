//! Error budget for the receiver-security argument of the BBCS OT:
//! sampling, Hoeffding and privacy-amplification terms, and whether the
//! min-entropy left after the check covers ℓ output bits plus the slack γn.

use serde::Serialize;

use super::stats::h2;
use crate::bbcs::QotParams;

/// Shipped choices for the constants the security argument leaves open.
pub const DELTA: f64 = 0.001;
pub const ETA: f64 = 0.04;
pub const GAMMA: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyBudget {
    pub n: usize,
    pub alpha: f64,
    pub delta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub ell: usize,
    pub h_delta: f64,
    pub eps_samp: f64,
    pub eps_hof: f64,
    pub eps_pa: f64,
    pub eps_total: f64,
    /// (½−η)(1−α)n − h(δ)n − ℓ
    pub margin: f64,
    pub feasible: bool,
}

impl EntropyBudget {
    pub fn new(n: usize, alpha: f64, delta: f64, eta: f64, gamma: f64, ell: usize) -> EntropyBudget {
        let nf = n as f64;
        let h_delta = h2(delta);
        let eps_samp = 6f64.sqrt() * (-alpha * nf * delta * delta / 100.0).exp();
        let eps_hof = (-2.0 * eta * eta * (1.0 - alpha) * nf).exp();
        let eps_pa = 2f64.powf(-gamma * nf / 2.0);
        let margin = (0.5 - eta) * (1.0 - alpha) * nf - h_delta * nf - ell as f64;
        EntropyBudget {
            n,
            alpha,
            delta,
            eta,
            gamma,
            ell,
            h_delta,
            eps_samp,
            eps_hof,
            eps_pa,
            eps_total: eps_samp + eps_hof + eps_pa,
            margin,
            feasible: margin >= gamma * nf && gamma > 0.0,
        }
    }

    /// Budget for an OT parameter set under the shipped δ, η, γ.
    pub fn for_params(p: &QotParams) -> EntropyBudget {
        EntropyBudget::new(p.n, p.alpha, DELTA, ETA, GAMMA, p.ell)
    }
}
