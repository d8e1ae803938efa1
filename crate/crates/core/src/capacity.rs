//! Capacity formulas for eDCNN hypothesis spaces.
//!
//! Every logarithm is natural except the covering bound, which bounds
//! `log2` of the covering number but uses natural logs inside. The
//! absolute constants `C0` and `c*` are inputs (default 1).
//!
//! Packing and covering numbers of a function class are related by the
//! standard sandwich `M(2 eps) <= N(eps) <= M(eps)`; combined with
//! [`packing_bound`] this is how a pseudo-dimension bound turns into a
//! covering bound.

use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::network::{count_neurons, count_params};

/// `C0 * L * n_params * ln(n_neurons)`.
pub fn pseudo_dim_bound(depth: usize, s: usize, d: usize, c0: f64) -> Result<f64> {
    if !(c0 > 0.0) {
        return invalid(format!("C0 must be positive, got {c0}"));
    }
    let n = count_params(depth, s, d)? as f64;
    let neurons = count_neurons(depth, s, d)? as f64;
    Ok(c0 * depth as f64 * n * neurons.ln())
}

/// `2 * ((2eR/eps) ln(2eR/eps))^pdim`, a bound on the `2 eps`-packing
/// number of a class with range `[-R, R]` and the given pseudo-dimension.
pub fn packing_bound(r: f64, eps: f64, pdim: f64) -> Result<f64> {
    if !(eps > 0.0) || !(eps <= r) {
        return invalid(format!(
            "packing bound needs 0 < eps <= R (eps = {eps}, R = {r})"
        ));
    }
    if !(pdim >= 0.0) {
        return invalid(format!("pseudo-dimension must be nonnegative, got {pdim}"));
    }
    let ratio = 2.0 * std::f64::consts::E * r / eps;
    Ok(2.0 * (ratio * ratio.ln()).powf(pdim))
}

/// `c* L^2 (Ls + d) ln(L(s + d)) ln(M/eps)`, a bound on `log2` of the
/// empirical L1 covering number of the truncated class.
pub fn covering_log2_bound(
    depth: usize,
    s: usize,
    d: usize,
    m: f64,
    eps: f64,
    cstar: f64,
) -> Result<f64> {
    count_params(depth, s, d)?;
    if !(eps > 0.0) || !(eps <= m) {
        return invalid(format!(
            "covering bound needs 0 < eps <= M (eps = {eps}, M = {m})"
        ));
    }
    if !(cstar > 0.0) {
        return invalid(format!("c* must be positive, got {cstar}"));
    }
    let l = depth as f64;
    Ok(cstar * l * l * (l * s as f64 + d as f64) * (l * (s + d) as f64).ln() * (m / eps).ln())
}

/// `M^4 L^2 (L + d) ln(L) ln(M^2 m) / m^(1 - 2 theta)`; the consistency
/// theorem needs this to vanish as `m` grows.
pub fn consistency_ratio(m: u64, theta: f64, trunc: f64, depth: usize, d: usize) -> Result<f64> {
    if !(theta > 0.0 && theta < 0.5) {
        return invalid(format!("theta must lie in (0, 1/2), got {theta}"));
    }
    if m < 2 {
        return invalid(format!("consistency ratio needs m >= 2, got {m}"));
    }
    if !(trunc >= 1.0) || !trunc.is_finite() {
        return invalid(format!("truncation level must be at least 1, got {trunc}"));
    }
    if depth < 1 {
        return invalid("depth must be at least 1");
    }
    let (mf, l) = (m as f64, depth as f64);
    Ok(
        trunc.powi(4) * l * l * (l + d as f64) * l.ln() * (trunc * trunc * mf).ln()
            / mf.powf(1.0 - 2.0 * theta),
    )
}

/// Ratio values along a sample-size grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub theta: f64,
    pub d: usize,
    pub m_grid: Vec<u64>,
    pub truncation: Vec<f64>,
    pub depth: Vec<usize>,
    pub ratios: Vec<f64>,
    /// Whether the last `ceil(n/2)` ratios are strictly decreasing.
    pub tail_decreasing: bool,
    /// Least-squares slope of `ln ratio` against `ln m` over the positive
    /// ratios; `None` when fewer than two are positive.
    pub decay_exponent: Option<f64>,
}

/// Evaluates [`consistency_ratio`] with `M = trunc_fn(m)` and
/// `L = depth_fn(m)` at each grid point.
pub fn check_schedule(
    theta: f64,
    d: usize,
    m_grid: &[u64],
    trunc_fn: impl Fn(u64) -> f64,
    depth_fn: impl Fn(u64) -> usize,
) -> Result<ScheduleReport> {
    if m_grid.len() < 3 {
        return invalid(format!(
            "grid needs at least 3 points, got {}",
            m_grid.len()
        ));
    }
    if m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("grid must be strictly increasing");
    }
    let truncation: Vec<f64> = m_grid.iter().map(|&m| trunc_fn(m)).collect();
    let depth: Vec<usize> = m_grid.iter().map(|&m| depth_fn(m)).collect();
    let ratios = m_grid
        .iter()
        .zip(&truncation)
        .zip(&depth)
        .map(|((&m, &t), &l)| consistency_ratio(m, theta, t, l, d))
        .collect::<Result<Vec<_>>>()?;
    let tail = &ratios[ratios.len() / 2..];
    let tail_decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    let points: Vec<(f64, f64)> = m_grid
        .iter()
        .zip(&ratios)
        .filter(|(_, r)| **r > 0.0)
        .map(|(m, r)| ((*m as f64).ln(), r.ln()))
        .collect();
    Ok(ScheduleReport {
        theta,
        d,
        m_grid: m_grid.to_vec(),
        truncation,
        depth,
        ratios,
        tail_decreasing,
        decay_exponent: least_squares_slope(&points),
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `n` points spaced evenly in `log10` between `10^lo` and `10^hi`, rounded.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<u64> {
    (0..n)
        .map(|i| {
            let e = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
            10f64.powf(e).round() as u64
        })
        .collect()
}

/// Counts and bound values for one architecture and sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityReport {
    #[serde(rename = "L")]
    pub depth: usize,
    pub s: usize,
    pub d: usize,
    pub m: u64,
    pub theta: f64,
    #[serde(rename = "M")]
    pub truncation: f64,
    pub eps: f64,
    pub c0: f64,
    pub cstar: f64,
    pub n_params: u64,
    pub n_neurons: u64,
    pub pdim_bound: f64,
    pub covering_log2_bound: f64,
    pub consistency_ratio: f64,
}

/// Inputs to [`capacity_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityInputs {
    pub depth: usize,
    pub s: usize,
    pub d: usize,
    pub m: u64,
    pub theta: f64,
    /// Defaults to `max(1, ln m)`.
    pub truncation: Option<f64>,
    /// Defaults to `1 / (20 M m^theta)`, the scale at which the
    /// consistency argument applies the covering bound.
    pub eps: Option<f64>,
    pub c0: f64,
    pub cstar: f64,
}

pub fn capacity_report(inp: &CapacityInputs) -> Result<CapacityReport> {
    if inp.m < 2 {
        return invalid("m must be at least 2");
    }
    let truncation = inp
        .truncation
        .unwrap_or_else(|| (inp.m as f64).ln().max(1.0));
    let eps = inp
        .eps
        .unwrap_or_else(|| 1.0 / (20.0 * truncation * (inp.m as f64).powf(inp.theta)));
    Ok(CapacityReport {
        depth: inp.depth,
        s: inp.s,
        d: inp.d,
        m: inp.m,
        theta: inp.theta,
        truncation,
        eps,
        c0: inp.c0,
        cstar: inp.cstar,
        n_params: count_params(inp.depth, inp.s, inp.d)?,
        n_neurons: count_neurons(inp.depth, inp.s, inp.d)?,
        pdim_bound: pseudo_dim_bound(inp.depth, inp.s, inp.d, inp.c0)?,
        covering_log2_bound: covering_log2_bound(
            inp.depth, inp.s, inp.d, truncation, eps, inp.cstar,
        )?,
        consistency_ratio: consistency_ratio(inp.m, inp.theta, truncation, inp.depth, inp.d)?,
    })
}

impl fmt::Display for CapacityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, String); 14] = [
            ("L", self.depth.to_string()),
            ("s", self.s.to_string()),
            ("d", self.d.to_string()),
            ("m", self.m.to_string()),
            ("theta", self.theta.to_string()),
            ("M", self.truncation.to_string()),
            ("eps", self.eps.to_string()),
            ("C0", self.c0.to_string()),
            ("c*", self.cstar.to_string()),
            ("n_params", self.n_params.to_string()),
            ("n_neurons", self.n_neurons.to_string()),
            ("pdim_bound", self.pdim_bound.to_string()),
            ("covering_log2_bound", self.covering_log2_bound.to_string()),
            ("consistency_ratio", self.consistency_ratio.to_string()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<width$}  {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_dim_examples() {
        let b = pseudo_dim_bound(2, 2, 4, 1.0).unwrap();
        assert!((b - 2.0 * 28.0 * 19f64.ln()).abs() < 1e-12);
        assert!((b - 164.88).abs() < 0.01);
        let b = pseudo_dim_bound(1, 1, 1, 1.0).unwrap();
        assert!((b - 8.318).abs() < 1e-3);
        for l in 1..50 {
            assert!(
                pseudo_dim_bound(l + 1, 3, 10, 1.0).unwrap()
                    > pseudo_dim_bound(l, 3, 10, 1.0).unwrap()
            );
        }
        assert!(pseudo_dim_bound(0, 1, 1, 1.0).is_err());
        assert!(pseudo_dim_bound(1, 1, 1, 0.0).is_err());
    }

    #[test]
    fn pseudo_dim_uses_exact_counts() {
        for (l, s, d) in [(3, 2, 7), (5, 4, 30), (1, 9, 240)] {
            let n = count_params(l, s, d).unwrap() as f64;
            let dn = count_neurons(l, s, d).unwrap() as f64;
            assert_eq!(
                pseudo_dim_bound(l, s, d, 2.5).unwrap(),
                2.5 * l as f64 * n * dn.ln()
            );
        }
    }

    #[test]
    fn packing_examples() {
        assert_eq!(packing_bound(1.5, 1.5, 0.0).unwrap(), 2.0);
        let two_e = 2.0 * std::f64::consts::E;
        let expected = 2.0 * two_e * two_e.ln();
        assert!((packing_bound(1.0, 1.0, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 18.409).abs() < 1e-3);
        let mut prev = 0.0;
        for i in 0..=99 {
            let r = 0.1 * (1.0 + i as f64);
            let v = packing_bound(r, 0.1, 3.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(packing_bound(1.0, 2.0, 1.0).is_err());
        assert!(packing_bound(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_log2_bound(3, 2, 5, 2.0, 2.0, 1.0).unwrap(), 0.0);
        let v = covering_log2_bound(2, 2, 4, std::f64::consts::E, 1.0, 1.0).unwrap();
        assert!((v - 32.0 * 12f64.ln()).abs() < 1e-12);
        assert!((v - 79.50).abs() < 0.05);
        let one = covering_log2_bound(4, 3, 9, 5.0, 0.1, 1.0).unwrap();
        let three = covering_log2_bound(4, 3, 9, 5.0, 0.1, 3.0).unwrap();
        assert!((three - 3.0 * one).abs() <= 1e-12 * three);
        assert!(covering_log2_bound(2, 2, 4, 1.0, 2.0, 1.0).is_err());
    }

    /// The same quantity evaluated as a sum of logarithms.
    fn ratio_via_logs(m: u64, theta: f64, trunc: f64, l: usize, d: usize) -> f64 {
        let (mf, lf) = (m as f64, l as f64);
        let log = 4.0 * trunc.ln()
            + 2.0 * lf.ln()
            + (lf + d as f64).ln()
            + lf.ln().ln()
            + (2.0 * trunc.ln() + mf.ln()).ln()
            - (1.0 - 2.0 * theta) * mf.ln();
        log.exp()
    }

    #[test]
    fn consistency_examples() {
        for m in [2, 10, 1000] {
            assert_eq!(consistency_ratio(m, 0.2, 3.0, 1, 30).unwrap(), 0.0);
        }
        let direct = consistency_ratio(123_457, 0.137, 4.2, 7, 19).unwrap();
        let logs = ratio_via_logs(123_457, 0.137, 4.2, 7, 19);
        assert!((direct - logs).abs() <= 1e-12 * direct);

        let at = |m: u64| {
            let l = (m as f64).powf(0.1).ceil() as usize;
            consistency_ratio(m, 0.1, (m as f64).ln(), l, 30).unwrap()
        };
        // the drop over four decades is about 5x (ceil(m^0.1) jumps 3 -> 7)
        let (early, late) = (at(10_000), at(100_000_000));
        assert!(late < early);
        assert!(early / late > 5.0 && early / late < 5.3, "{}", early / late);
        let mut prev = f64::INFINITY;
        for m in [
            100_000_000u64,
            1_000_000_000,
            10_000_000_000,
            100_000_000_000,
        ] {
            assert!(at(m) < prev);
            prev = at(m);
        }

        assert!(consistency_ratio(100, 0.0, 2.0, 2, 3).is_err());
        assert!(consistency_ratio(100, 0.5, 2.0, 2, 3).is_err());
        assert!(consistency_ratio(100, 0.6, 2.0, 2, 3).is_err());
    }

    #[test]
    fn consistency_monotone_in_m_and_theta() {
        for l in [2, 5] {
            let mut prev = 0.0;
            for i in 0..50 {
                let v = consistency_ratio(1000, 0.2, 1.0 + 0.2 * i as f64, l, 10).unwrap();
                assert!(v > prev);
                prev = v;
            }
            let mut prev = 0.0;
            for i in 1..50 {
                let v = consistency_ratio(1000, 0.01 * i as f64, 3.0, l, 10).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn schedule_scans() {
        let grid = log_grid(3.0, 9.0, 7);
        assert_eq!(
            grid,
            vec![
                1_000,
                10_000,
                100_000,
                1_000_000,
                10_000_000,
                100_000_000,
                1_000_000_000
            ]
        );
        let ln = |m: u64| (m as f64).ln();
        let good = check_schedule(0.05, 30, &grid, ln, |m| {
            (m as f64).powf(0.05).ceil() as usize
        })
        .unwrap();
        assert!(good.tail_decreasing, "{:?}", good.ratios);
        assert!(good.decay_exponent.unwrap() < 0.0);

        let flat = check_schedule(0.05, 30, &grid, ln, |_| 1).unwrap();
        assert!(flat.ratios.iter().all(|r| *r == 0.0));
        assert_eq!(flat.decay_exponent, None);

        let bad = check_schedule(0.49, 30, &grid, ln, |m| {
            (m as f64).powf(0.3).ceil() as usize
        })
        .unwrap();
        assert!(!bad.tail_decreasing);
        assert!(bad.decay_exponent.unwrap() > 0.0);

        assert!(check_schedule(0.05, 30, &grid[..2], ln, |_| 2).is_err());
        assert!(check_schedule(0.05, 30, &[10, 5, 100], ln, |_| 2).is_err());
    }

    #[test]
    fn report_fields() {
        let r = capacity_report(&CapacityInputs {
            depth: 2,
            s: 2,
            d: 4,
            m: 100,
            theta: 0.1,
            truncation: None,
            eps: None,
            c0: 1.0,
            cstar: 1.0,
        })
        .unwrap();
        assert_eq!((r.n_params, r.n_neurons), (28, 19));
        assert!((r.truncation - 100f64.ln()).abs() < 1e-15);
        assert!(r.covering_log2_bound > 0.0);
        let text = r.to_string();
        assert!(text.contains("n_params") && text.contains("28"));
        let json: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(json["n_neurons"], 19);
        assert_eq!(json["L"], 2);
    }
}
