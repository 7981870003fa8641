//! Fixed-confidence checks for Monte-Carlo rates and independence claims.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sided Hoeffding half-width for n Bernoulli trials at confidence 1 − δ.
pub fn hoeffding_eps(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// One-sided Hoeffding half-width at confidence 1 − δ.
pub fn hoeffding_eps_one_sided(n: u64, delta: f64) -> f64 {
    ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Largest success count consistent with rate ≤ `p` at one-sided confidence 1 − δ.
pub fn hoeffding_ceiling(n: u64, p: f64, delta: f64) -> u64 {
    ((p + hoeffding_eps_one_sided(n, delta)) * n as f64).floor() as u64
}

/// Binary entropy in bits.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Pearson χ² test of independence on an r×c contingency table.
/// Returns (statistic, degrees of freedom, p-value).
pub fn chi2_independence(table: &[Vec<u64>]) -> (f64, usize, f64) {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    let total: u64 = table.iter().flatten().sum();
    let rs: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let cs: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let live_r = rs.iter().filter(|&&v| v > 0).count();
    let live_c = cs.iter().filter(|&&v| v > 0).count();
    let mut stat = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let e = rs[i] as f64 * cs[j] as f64 / total as f64;
            if e > 0.0 {
                let d = table[i][j] as f64 - e;
                stat += d * d / e;
            }
        }
    }
    let dof = (live_r.saturating_sub(1)) * (live_c.saturating_sub(1));
    (stat, dof, chi2_p(stat, dof))
}

/// Pearson χ² goodness of fit of `observed` counts to probabilities `probs`.
/// Cells with expected count below 5 are pooled.
pub fn chi2_gof(observed: &[u64], probs: &[f64]) -> (f64, usize, f64) {
    let n: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut po, mut pe) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n as f64;
        if e < 5.0 {
            po += o as f64;
            pe += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pe > 0.0 {
        cells.push((po, pe));
    }
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1);
    (stat, dof, chi2_p(stat, dof))
}

/// Two-sample χ² homogeneity test over the same categories.
pub fn chi2_two_sample(a: &[u64], b: &[u64]) -> (f64, usize, f64) {
    let table: Vec<Vec<u64>> = a.iter().zip(b).filter(|(x, y)| **x + **y > 0).map(|(&x, &y)| vec![x, y]).collect();
    chi2_independence(&table)
}

fn chi2_p(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(stat)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Hoeffding,
    ExactBinomial,
    ChiSquared,
    Exact,
}

/// One line of the machine-readable test report.
#[derive(Clone, Debug, Serialize)]
pub struct StatTest {
    pub test: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub estimate: f64,
    pub bound: f64,
    pub bound_kind: BoundKind,
    pub confidence: f64,
    pub seed: u64,
    pub pass: bool,
}

impl StatTest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    /// Observed rate within `tol` of `target`.
    pub fn rate_near(test: &str, n: u64, hits: u64, target: f64, tol: f64, seed: u64) -> StatTest {
        let est = hits as f64 / n as f64;
        StatTest {
            test: test.into(),
            n,
            estimate: est,
            bound: tol,
            bound_kind: BoundKind::Hoeffding,
            confidence: 0.99,
            seed,
            pass: (est - target).abs() <= tol,
        }
    }

    /// Count at most `ceiling`.
    pub fn count_at_most(test: &str, n: u64, hits: u64, ceiling: u64, kind: BoundKind, confidence: f64, seed: u64) -> StatTest {
        StatTest {
            test: test.into(),
            n,
            estimate: hits as f64,
            bound: ceiling as f64,
            bound_kind: kind,
            confidence,
            seed,
            pass: hits <= ceiling,
        }
    }

    /// χ² p-value above `alpha`.
    pub fn chi2(test: &str, n: u64, p: f64, alpha: f64, seed: u64) -> StatTest {
        StatTest {
            test: test.into(),
            n,
            estimate: p,
            bound: alpha,
            bound_kind: BoundKind::ChiSquared,
            confidence: 1.0 - alpha,
            seed,
            pass: p > alpha,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: N={} estimate={:.5} bound={:.5} ({:?}, confidence {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.test,
            self.n,
            self.estimate,
            self.bound,
            self.bound_kind,
            self.confidence
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoeffding_values() {
        // sqrt(ln(200)/10000)
        assert!((hoeffding_eps(5000, 0.01) - 0.023018).abs() < 1e-5);
        assert_eq!(hoeffding_ceiling(2000, 0.0, 0.01), 67);
    }

    #[test]
    fn chi2_reference_values() {
        // 2x2 table from a textbook example: statistic 4.0 on 1 dof, p ≈ 0.0455
        let (s, d, p) = chi2_independence(&[vec![30, 20], vec![20, 30]]);
        assert!((s - 4.0).abs() < 1e-9);
        assert_eq!(d, 1);
        assert!((p - 0.0455).abs() < 1e-3);
        let (_, d, p) = chi2_gof(&[25, 25, 25, 25], &[0.25; 4]);
        assert_eq!(d, 3);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_entropy() {
        assert_eq!(h2(0.5), 1.0);
        assert_eq!(h2(0.0), 0.0);
        assert!((h2(0.001) - 0.011408).abs() < 1e-5);
    }

    #[test]
    fn report_is_json() {
        let t = StatTest::rate_near("x", 10, 5, 0.5, 0.1, 1);
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["N"], 10);
        assert_eq!(v["pass"], true);
    }
}
