//! Small statistics toolbox: summary stats, the paired one-sided Wilcoxon
//! signed-rank test (normal approximation with tie correction) and a
//! chi-square goodness-of-fit test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("no values to summarise"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let std = var.sqrt();
    let half = 1.959963984540054 * std / n.sqrt();
    Ok(Summary {
        n: values.len(),
        mean,
        std,
        ci95_lo: mean - half,
        ci95_hi: mean + half,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences used by the test.
    pub n: usize,
    pub w_plus: f64,
    pub z: f64,
    /// One-sided p-value for H1: differences are positive.
    pub p_one_sided: f64,
    pub mean_difference: f64,
}

/// Paired one-sided Wilcoxon signed-rank test on `a[i] - b[i]`,
/// H1: a > b. Zeros are dropped; ties get average ranks with the usual
/// variance correction; p comes from the normal approximation with
/// continuity correction.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::invalid("paired samples differ in length"));
    }
    if a.is_empty() {
        return Err(Error::invalid("no pairs"));
    }
    let mean_difference =
        a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
    let mut diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n: 0,
            w_plus: 0.0,
            z: 0.0,
            p_one_sided: 0.5,
            mean_difference,
        });
    }
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let mut ranks = vec![0.0; n];
    let mut tie_correction = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = avg_rank;
        }
        let t = (j - i + 1) as f64;
        tie_correction += t * t * t - t;
        i = j + 1;
    }
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction / 48.0;
    if var <= 0.0 {
        return Ok(WilcoxonResult {
            n,
            w_plus,
            z: 0.0,
            p_one_sided: 0.5,
            mean_difference,
        });
    }
    let z = (w_plus - mean - 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p_one_sided = 1.0 - normal.cdf(z);
    Ok(WilcoxonResult {
        n,
        w_plus,
        z,
        p_one_sided,
        mean_difference,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Chi-square goodness of fit of observed counts against expected counts.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::invalid("need matching counts over >= 2 cells"));
    }
    if expected.iter().any(|e| *e <= 0.0) {
        return Err(Error::invalid("expected counts must be positive"));
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let df = observed.len() - 1;
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::invalid(format!("chi-square dof: {e}")))?;
    Ok(ChiSquareResult {
        statistic,
        degrees_of_freedom: df,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn summary_basics() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(s.ci95_lo < 2.5 && s.ci95_hi > 2.5);
    }

    // Hand-computed small case: diffs (1, 2, 3) all positive.
    // W+ = 6, mean = 3, var = 3.5, z = (6 - 3 - 0.5)/sqrt(3.5).
    #[test]
    fn wilcoxon_small_case() {
        let r = wilcoxon_signed_rank(&[2.0, 3.0, 4.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.w_plus, 6.0);
        let z = 2.5 / 3.5f64.sqrt();
        assert!((r.z - z).abs() < 1e-12);
        assert!((r.p_one_sided - 0.0907246038607102).abs() < 1e-9);
    }

    #[test]
    fn wilcoxon_detects_shift_and_respects_null() {
        let mut rng = crate::rng::stream(1, "wilcoxon", &[]);
        let base: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.2 * rng.random::<f64>() + 0.05).collect();
        let r = wilcoxon_signed_rank(&shifted, &base).unwrap();
        assert!(r.p_one_sided < 1e-10, "p = {}", r.p_one_sided);

        let sym: Vec<f64> = base.iter().map(|v| v + rng.random::<f64>() - 0.5).collect();
        let r = wilcoxon_signed_rank(&sym, &base).unwrap();
        assert!(r.p_one_sided > 0.001 && r.p_one_sided < 0.999);
    }

    #[test]
    fn chi_square_uniform_counts() {
        let r = chi_square_gof(&[250, 250, 250, 250], &[250.0; 4]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_gof(&[300, 200, 250, 250], &[250.0; 4]).unwrap();
        assert!(r.p_value < 0.01);
    }
}
