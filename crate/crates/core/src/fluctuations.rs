//! Monte Carlo samples of Y = (Tr p(H_L) − E[Tr p(H_L)]) / (2L+1)^{d/2}
//! and tests against the predicted Gaussian limit N(0, σ(p)²).

use std::io::Write;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::budget::{saturating_pow, Budget};
use crate::error::{Error, Result};
use crate::hamiltonian::{mean_trace_poly, sample_hamiltonian, trace_poly_numeric, BoxSpec};
use crate::moments::{to_f64, MomentModel, Rational};
use crate::variance::{sigma_squared, Poly};

/// Smallest sample size accepted by [`ks_test`] and [`moment_diagnostics`].
pub const MIN_SAMPLES: usize = 50;

const KOLMOGOROV_TERMS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationConfig {
    pub poly: Poly,
    pub model: MomentModel,
    pub d: usize,
    pub radius: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDiagnostics {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_skew: f64,
    pub se_kurt: f64,
    /// Samples are numerically constant; skewness and kurtosis are set to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationReport {
    pub config: FluctuationConfig,
    /// Y for sample s = 0..N, in order.
    pub samples: Vec<f64>,
    pub predicted_sigma2: Rational,
    /// E[Tr p(H_L)], subtracted from every sampled trace.
    pub exact_mean: Rational,
    pub empirical_mean: f64,
    /// Σ Y² / N, the second moment about the exact centre.
    pub empirical_var: f64,
    pub diagnostics: Option<MomentDiagnostics>,
    /// None when the predicted limit is a point mass or N is too small.
    pub ks: Option<KsResult>,
}

impl FluctuationReport {
    /// Empirical mean in units of its standard error.
    pub fn centering_z(&self) -> f64 {
        if self.empirical_var == 0.0 {
            return 0.0;
        }
        self.empirical_mean * (self.samples.len() as f64).sqrt() / self.empirical_var.sqrt()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,value")?;
        for (i, y) in self.samples.iter().enumerate() {
            writeln!(out, "{i},{y:?}")?;
        }
        Ok(())
    }
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean_of(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    let v: Vec<f64> = xs.collect();
    pairwise_sum(&v) / n as f64
}

/// Sample s draws its potential from the stream `seed ^ s`.
pub fn run_experiment(config: FluctuationConfig, budget: Budget) -> Result<FluctuationReport> {
    let m = config.poly.require_nonconstant()?;
    if config.samples == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    let bx = BoxSpec::new(config.d, config.radius)?;
    bx.check(budget)?;
    let work = saturating_pow(2 * m as u128 + 1, config.d)
        .saturating_mul(m as u128)
        .saturating_mul(bx.volume() as u128)
        .saturating_mul(config.samples as u128);
    budget.check("Monte Carlo trace evaluations", work)?;

    let predicted_sigma2 = sigma_squared(&config.poly, config.d, &config.model, budget)?;
    let exact_mean = mean_trace_poly(&config.poly, bx, &config.model, budget)?;
    let centre = to_f64(&exact_mean);
    let scale = (bx.volume() as f64).sqrt();

    let samples = (0..config.samples)
        .into_par_iter()
        .map(|s| {
            let h = sample_hamiltonian(bx, &config.model, config.seed ^ s as u64, budget)?;
            Ok((trace_poly_numeric(&h, &config.poly)? - centre) / scale)
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = samples.len();
    let empirical_mean = mean_of(samples.iter().copied(), n);
    let empirical_var = mean_of(samples.iter().map(|y| y * y), n);
    let diagnostics = (n >= MIN_SAMPLES).then(|| moment_diagnostics(&samples));
    let sigma2 = to_f64(&predicted_sigma2);
    let ks = if sigma2 > 0.0 && n >= MIN_SAMPLES {
        Some(ks_test(&samples, sigma2)?)
    } else {
        None
    };
    Ok(FluctuationReport {
        config,
        samples,
        predicted_sigma2,
        exact_mean,
        empirical_mean,
        empirical_var,
        diagnostics,
        ks,
    })
}

/// Q(x) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²x²}, truncated after 100 terms.
/// Below x = 0.2 the true value is within 1e-12 of 1 while the truncated
/// series has not converged, so 1 is returned there.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=KOLMOGOROV_TERMS {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        sum += if j as usize % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against N(0, sigma2), with the
/// asymptotic p-value Q(√N · D).
pub fn ks_test(samples: &[f64], sigma2: f64) -> Result<KsResult> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "KS test needs a positive finite variance, got {sigma2}"
        )));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "KS test needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("positive finite standard deviation");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic,
        pvalue: kolmogorov_survival(n.sqrt() * statistic),
    })
}

/// Sample skewness and excess kurtosis (central moments about the sample
/// mean) with standard errors √(6/N) and √(24/N).
pub fn moment_diagnostics(samples: &[f64]) -> MomentDiagnostics {
    let n = samples.len();
    let nf = n as f64;
    let se_skew = (6.0 / nf).sqrt();
    let se_kurt = (24.0 / nf).sqrt();
    let mean = mean_of(samples.iter().copied(), n);
    let m2 = mean_of(samples.iter().map(|x| (x - mean).powi(2)), n);
    let scale = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if n == 0 || m2 <= (16.0 * f64::EPSILON * scale).powi(2) {
        return MomentDiagnostics {
            skewness: 0.0,
            excess_kurtosis: 0.0,
            se_skew,
            se_kurt,
            degenerate: true,
        };
    }
    let m3 = mean_of(samples.iter().map(|x| (x - mean).powi(3)), n);
    let m4 = mean_of(samples.iter().map(|x| (x - mean).powi(4)), n);
    MomentDiagnostics {
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        se_skew,
        se_kurt,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{int, rational};
    use crate::variance::degenerate_basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const B: Budget = Budget::DEFAULT;

    fn model(s: &str) -> MomentModel {
        s.parse().unwrap()
    }

    fn config(
        p: Poly,
        m: &str,
        d: usize,
        radius: usize,
        samples: usize,
        seed: u64,
    ) -> FluctuationConfig {
        FluctuationConfig {
            poly: p,
            model: model(m),
            d,
            radius,
            samples,
            seed,
        }
    }

    fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn linear_statistic_is_the_scaled_potential_sum() {
        let cfg = config(Poly::monomial(1), "discrete:2@1/3,-1@2/3", 2, 3, 60, 9);
        let r = run_experiment(cfg.clone(), B).unwrap();
        assert_eq!(r.samples.len(), 60);
        assert_eq!(r.predicted_sigma2, int(2));
        let bx = BoxSpec::new(2, 3).unwrap();
        for (s, y) in r.samples.iter().enumerate() {
            let h = sample_hamiltonian(bx, &cfg.model, 9 ^ s as u64, B).unwrap();
            let want = h.potential.iter().sum::<f64>() / 7.0;
            assert!((y - want).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_statistic_variance() {
        let n = 4000;
        let r = run_experiment(config(Poly::monomial(1), "uniform:1", 1, 50, n, 3), B).unwrap();
        let m2 = 1.0 / 3.0;
        assert!((r.empirical_var - m2).abs() <= 5.0 * (2.0 / n as f64).sqrt() * m2);
        let r =
            run_experiment(config(Poly::monomial(1), "gaussian:1", 1, 100, 5000, 17), B).unwrap();
        assert!(r.ks.unwrap().pvalue > 0.001);
        assert!(r.centering_z().abs() < 5.0);
    }

    #[test]
    fn quadratic_statistic_matches_predicted_variance() {
        let r = run_experiment(config(Poly::monomial(2), "uniform:1", 1, 200, 4000, 7), B).unwrap();
        assert_eq!(r.predicted_sigma2, rational(4, 45));
        let want = 4.0 / 45.0;
        assert!(
            (r.empirical_var - want).abs() <= 0.15 * want,
            "{}",
            r.empirical_var
        );
        assert!(r.centering_z().abs() < 5.0);
    }

    #[test]
    fn degenerate_quadratic_has_small_variance() {
        let radius = 200;
        let r = run_experiment(
            config(
                Poly::monomial(2),
                "discrete:1@1/2,-1@1/2",
                1,
                radius,
                2000,
                5,
            ),
            B,
        )
        .unwrap();
        assert_eq!(r.predicted_sigma2, int(0));
        assert!(r.empirical_var <= 25.0 / radius as f64);
        assert!(r.ks.is_none());
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = config(Poly::from_ints(&[1, -1, 2]), "gaussian:2", 2, 4, 80, 123);
        let a = run_experiment(cfg.clone(), B).unwrap();
        let b = run_experiment(cfg.clone(), B).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(
            FluctuationConfig {
                samples: 100,
                ..cfg
            },
            B,
        )
        .unwrap();
        assert_eq!(a.samples[..], c.samples[..80]);
    }

    #[test]
    fn experiment_validation() {
        assert!(
            run_experiment(config(Poly::from_ints(&[3]), "uniform:1", 1, 5, 10, 0), B).is_err()
        );
        assert!(run_experiment(config(Poly::monomial(1), "uniform:1", 1, 5, 0, 0), B).is_err());
        assert!(matches!(
            run_experiment(config(Poly::monomial(1), "uniform:1", 3, 3000, 10, 0), B),
            Err(Error::ResourceLimit { .. })
        ));
        let short = MomentModel::uniform(int(1)).unwrap().with_max_order(3);
        let cfg = FluctuationConfig {
            model: short,
            ..config(Poly::monomial(2), "uniform:1", 1, 5, 10, 0)
        };
        assert!(run_experiment(cfg, B).is_err());
    }

    #[test]
    fn ks_examples() {
        for seed in 0..3 {
            let r = ks_test(&normal_draws(5000, seed), 1.0).unwrap();
            assert!(r.pvalue > 0.001, "seed {seed}: {r:?}");
        }
        let r = ks_test(&[0.0; 100], 1.0).unwrap();
        assert_eq!(r.statistic, 0.5);
        assert!(r.pvalue < 1e-12);
        assert!(ks_test(&[0.0; 100], 0.0).is_err());
        assert!(ks_test(&[0.0; 49], 1.0).is_err());
        // draws with the wrong variance are rejected
        let wide: Vec<f64> = normal_draws(5000, 4).iter().map(|x| 1.5 * x).collect();
        assert!(ks_test(&wide, 1.0).unwrap().pvalue < 1e-6);
    }

    #[test]
    fn kolmogorov_series() {
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        // reference values of the Kolmogorov distribution
        assert!((kolmogorov_survival(1.0) - 0.26999967).abs() < 1e-7);
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(0.5) - 0.96394524).abs() < 1e-7);
        let mut prev = 1.0;
        for i in 0..300 {
            let q = kolmogorov_survival(i as f64 / 100.0);
            assert!(q <= prev + 1e-15);
            prev = q;
        }
    }

    #[test]
    fn moment_diagnostic_examples() {
        let d = moment_diagnostics(&[0.3; 60]);
        assert!(d.degenerate);
        assert_eq!(d.skewness, 0.0);
        let n = 10_000;
        let d = moment_diagnostics(&normal_draws(n, 8));
        assert!(!d.degenerate);
        assert!(d.skewness.abs() < 5.0 * d.se_skew);
        assert!(d.excess_kurtosis.abs() < 5.0 * d.se_kurt);
        assert_eq!(d.se_skew, (6.0 / n as f64).sqrt());
        let exp: Vec<f64> = (1..=1000)
            .map(|i| -(1.0 - i as f64 / 1001.0).ln())
            .collect();
        assert!(moment_diagnostics(&exp).skewness > 1.0);
    }

    #[test]
    fn odd_statistic_of_symmetric_potential_is_symmetric() {
        let r = run_experiment(config(Poly::monomial(3), "uniform:1", 1, 50, 2000, 2), B).unwrap();
        let d = r.diagnostics.unwrap();
        assert!(d.skewness.abs() < 5.0 * d.se_skew);
    }

    #[test]
    fn csv_dump() {
        let r = run_experiment(config(Poly::monomial(1), "gaussian:1", 1, 2, 3, 0), B).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,value");
        assert_eq!(lines.len(), 4);
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, r.samples[1]);
    }

    fn mean_var(p: &Poly, m: &str, radius: usize, seeds: &[u64]) -> f64 {
        let vs: Vec<f64> = seeds
            .iter()
            .map(|&s| {
                run_experiment(config(p.clone(), m, 1, radius, 400, s), B)
                    .unwrap()
                    .empirical_var
            })
            .collect();
        vs.iter().sum::<f64>() / vs.len() as f64
    }

    #[test]
    fn degenerate_and_nondegenerate_respond_differently_to_doubling() {
        let pm = "discrete:1@1/2,-1@1/2";
        let basis = degenerate_basis(&model(pm), 1);
        // q̄₂ = x² is exactly deterministic under ±1: Tr H_L² = volume + 2·#edges
        let q2 = run_experiment(config(basis[0].clone(), pm, 1, 40, 100, 1), B).unwrap();
        assert!(q2.samples.iter().all(|&y| y == 0.0));
        for q in &basis[1..] {
            let small = mean_var(q, pm, 25, &[1, 2, 3]);
            let large = mean_var(q, pm, 50, &[1, 2, 3]);
            assert!(large < 0.75 * small, "{q}: {small} → {large}");
        }
        let p = Poly::from_ints(&[0, 1, 0, 1]);
        let small = mean_var(&p, pm, 25, &[1, 2, 3]);
        let large = mean_var(&p, pm, 50, &[1, 2, 3]);
        assert!((large / small - 1.0).abs() < 0.2, "{small} → {large}");
    }
}
