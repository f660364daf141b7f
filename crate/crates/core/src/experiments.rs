//! Acceptance experiments.
//!
//! Each criterion builds its seeded instances, runs the checks at fixed
//! tolerances and reports one line. Stochastic criteria take their stream
//! from the seed passed in.

use std::fmt;
use std::time::{Duration, Instant};

use ndarray::{array, Array1, Array2};
use rand::Rng;

use crate::costs::{
    constructive_inf_rep, counterexample_cost, debias, eval_inf_rep, is_debiasable, strict_via_minimizer_sets,
    CostMatrix, InfRepresentation,
};
use crate::decomposition::{
    barycenter_decompose, entropic_interpolation, gaussian_identity_check, midpoint_barycenter, ot_infrep_check,
    saddle_value_check, UniformGrid,
};
use crate::divergences::{exact_ot_divergence, negdef_iff_mmd_nonneg, sinkhorn_divergence};
use crate::error::Result;
use crate::kernels::{embed_negative_definite, gaussian_features_mc, lse_cost, McKernelEstimate};
use crate::measures::{
    glue, kl_chain_check, kl_decomp2_check, kl_three_decomposition, random_coupling, random_tensor,
    random_three_coupling, CouplingTensor, DiscreteMeasure,
};
use crate::random::{derive_seed, random_measure, rng_from_seed, uniform_points, InstanceRng};
use crate::scalar::{ExactReal, ExtendedReal};
use crate::solvers::{eot_scalar_oracle, sinkhorn, DEFAULT_MAX_ITER};

/// Deliberate defects used to check that the suite notices them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Adds the half self-costs instead of subtracting them.
    pub debias_sign_flip: bool,
}

impl Faults {
    pub fn none() -> Self {
        Self::default()
    }

    fn debias(&self, c: &CostMatrix<f64>) -> Result<CostMatrix<f64>> {
        if !self.debias_sign_flip {
            return debias(c);
        }
        let d = c.diagonal();
        CostMatrix::from_fn(c.rows(), c.cols(), |(i, j)| c.get(i, j) + 0.5 * d[i] + 0.5 * d[j])
    }

    fn debias_exact(&self, c: &CostMatrix<ExactReal>) -> Result<CostMatrix<ExactReal>> {
        if !self.debias_sign_flip {
            return debias(c);
        }
        let d = c.diagonal();
        CostMatrix::from_fn(c.rows(), c.cols(), |(i, j)| {
            c.get(i, j).ext_add(&d[i].ext_half()).ext_add(&d[j].ext_half())
        })
    }
}

/// A named pass/fail assertion inside a criterion.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// `value <= bound`.
    pub fn at_most(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(label, value <= bound, format!("{value:.3e} (limit {bound:.1e})"))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub time_limit: Duration,
    pub stochastic: bool,
    run: fn(u64, &Faults) -> Result<Vec<Check>>,
}

#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Set when an instance could not be solved at all.
    pub error: Option<String>,
    pub elapsed: Duration,
    pub time_limit: Duration,
}

impl CriterionOutcome {
    pub fn within_time(&self) -> bool {
        self.elapsed <= self.time_limit
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.within_time() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:>2} {:<22} {:>7.3}s/{}s",
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.time_limit.as_secs()
        )?;
        if let Some(e) = &self.error {
            return write!(f, "  error: {e}");
        }
        if !self.within_time() {
            write!(f, "  over time limit")?;
        }
        let failed: Vec<_> = self.failed_checks().collect();
        if failed.is_empty() {
            let shown: Vec<String> = self
                .checks
                .iter()
                .map(|c| format!("{} {}", c.label, c.detail))
                .collect();
            write!(f, "  {}", shown.join("; "))
        } else {
            let shown: Vec<String> = failed.iter().map(|c| format!("{} {}", c.label, c.detail)).collect();
            write!(f, "  failed: {}", shown.join("; "))
        }
    }
}

pub fn run_criterion(c: &Criterion, seed: u64, faults: &Faults) -> CriterionOutcome {
    let start = Instant::now();
    let result = (c.run)(seed, faults);
    let elapsed = start.elapsed();
    let (checks, error) = match result {
        Ok(checks) => (checks, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    CriterionOutcome {
        id: c.id,
        name: c.name,
        seed,
        checks,
        error,
        elapsed,
        time_limit: c.time_limit,
    }
}

/// Seed for one criterion derived from a suite seed.
pub fn criterion_seed(seed: u64, c: &Criterion) -> u64 {
    derive_seed(seed, c.name)
}

pub fn criterion(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

pub fn criterion_by_name(name: &str) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.name == name)
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub static CRITERIA: [Criterion; 13] = [
    Criterion {
        id: 1,
        name: "counterexample",
        time_limit: secs(1),
        stochastic: false,
        run: counterexample,
    },
    Criterion {
        id: 2,
        name: "gaussian-identity",
        time_limit: secs(5),
        stochastic: true,
        run: gaussian_identity,
    },
    Criterion {
        id: 3,
        name: "decomposition",
        time_limit: secs(30),
        stochastic: true,
        run: decomposition,
    },
    Criterion {
        id: 4,
        name: "midpoint-gaussian",
        time_limit: secs(10),
        stochastic: false,
        run: midpoint_gaussian,
    },
    Criterion {
        id: 5,
        name: "interpolation",
        time_limit: secs(20),
        stochastic: false,
        run: interpolation,
    },
    Criterion {
        id: 6,
        name: "mc-factorization",
        time_limit: secs(20),
        stochastic: true,
        run: mc_factorization,
    },
    Criterion {
        id: 7,
        name: "saddle-value",
        time_limit: secs(20),
        stochastic: true,
        run: saddle_value,
    },
    Criterion {
        id: 8,
        name: "mmd-negdef",
        time_limit: secs(5),
        stochastic: true,
        run: mmd_negdef,
    },
    Criterion {
        id: 9,
        name: "kl-lemmas",
        time_limit: secs(10),
        stochastic: true,
        run: kl_lemmas,
    },
    Criterion {
        id: 10,
        name: "inf-rep-roundtrip",
        time_limit: secs(5),
        stochastic: true,
        run: inf_rep_roundtrip,
    },
    Criterion {
        id: 11,
        name: "ot-inf-rep",
        time_limit: secs(5),
        stochastic: true,
        run: ot_inf_rep,
    },
    Criterion {
        id: 12,
        name: "debias-lift",
        time_limit: secs(5),
        stochastic: true,
        run: debias_lift,
    },
    Criterion {
        id: 13,
        name: "solver-consistency",
        time_limit: secs(10),
        stochastic: true,
        run: solver_consistency,
    },
];

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn counterexample(_seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let c = counterexample_cost::<f64>();
    let mu = DiscreteMeasure::probability(array![0.5, 0.5, 0.0])?;
    let nu = DiscreteMeasure::dirac(3, 2)?;
    let r = sinkhorn_divergence(&c, &mu, &nu, 1.0, 1e-13)?;
    Ok(vec![
        Check::at_most("OT(mu,nu)=0", r.raw_xy.abs(), 1e-9),
        Check::at_most("S=-OT(mu,mu)/2", (r.debiased + 0.5 * r.self_xx).abs(), 1e-9),
        Check::new("S<-1e-3", r.debiased < -1e-3, format!("S = {:.6e}", r.debiased)),
    ])
}

fn gaussian_identity(seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let mut worst: f64 = 0.0;
    let mut all = true;
    for d in [1, 2] {
        for eps in [0.25, 1.0] {
            for _ in 0..5 {
                let p = uniform_points::<f64, _>(2, d, &mut rng);
                let (x, y) = (p.row(0).to_vec(), p.row(1).to_vec());
                let grid = UniformGrid::covering(&[&x, &y], eps, eps.sqrt() / 20.0)?;
                let r = gaussian_identity_check(&x, &y, eps, &grid)?;
                worst = worst.max(r.relative_error());
                all &= r.relative_error() <= 1e-6;
            }
        }
    }
    Ok(vec![Check::new(
        "quadrature/closed form",
        all,
        format!("max rel err {worst:.3e} (limit 1e-6)"),
    )])
}

fn decomposition(seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let (mut gap, mut split, mut ascent, mut upper, mut lse_below) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..20 {
        let nx = rng.random_range(2..=5);
        let nz = rng.random_range(4..=12);
        let eps = if k % 2 == 0 { 0.5 } else { 1.0 };
        let psi = InfRepresentation::new(Array2::from_shape_fn((nx, nz), |_| 2.0 * rng.random::<f64>()))?;
        let lambda = random_measure::<f64, _>(nz, &mut rng);
        let mu = random_measure::<f64, _>(nx, &mut rng);
        let nu = random_measure::<f64, _>(nx, &mut rng);
        let sol = barycenter_decompose(&psi, &lambda, &mu, &nu, eps, 1e-10, 10_000)?;
        gap = gap.max(sol.identity_gap());
        split = split.max((sol.value - sol.side_values.0 - sol.side_values.1 - sol.kl_term).abs());
        ascent = ascent.max(max_of(sol.objective_trace.windows(2).map(|w| w[1] - w[0])));
        upper = upper.max(sol.direct_value - sol.value);
        let lse = lse_cost(&psi, lambda.weights().as_slice().expect("contiguous"), eps)?;
        let inf = eval_inf_rep(&psi);
        lse_below = lse_below.max(max_of(inf.entries().iter().zip(lse.entries()).map(|(a, b)| a - b)));
    }
    Ok(vec![
        Check::at_most("relative gap", gap, 1e-6),
        Check::at_most("value split", split, 1e-10),
        Check::at_most("objective increase", ascent, 1e-12),
        Check::at_most("direct above value", upper, 1e-10),
        Check::at_most("inf-rep above lse", lse_below, 1e-12),
    ])
}

fn midpoint_gaussian(_seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let (x, y, eps) = ([0.0], [1.0], 1.0f64);
    let step = eps.sqrt() / 20.0;
    let grid = UniformGrid::covering(&[&x, &y], eps, step)?;
    let (_, mean, std) = midpoint_barycenter(&x, &y, eps, &grid, 1e-10, 1000)?;
    let sigma = (eps / 8.0).sqrt();
    Ok(vec![
        Check::at_most("mean", (mean[0] - 0.5).abs(), 2.0 * step),
        Check::at_most("std", (std[0] - sigma).abs(), 0.05 * sigma + step),
    ])
}

fn interpolation(_seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let (x, y, eps) = ([0.0], [2.0], 1.0f64);
    let step = eps.sqrt() / 20.0;
    let grid = UniformGrid::covering(&[&x, &y], eps, step)?;
    let records = entropic_interpolation(&x, &y, eps, &[0.25, 0.5, 0.75], &grid, 1e-10, 1000)?;
    let mut checks = Vec::new();
    for r in &records {
        checks.push(Check::at_most(
            format!("mean t={}", r.t),
            r.mean_deviation(),
            2.0 * step,
        ));
        checks.push(Check::new(
            format!("std t={}", r.t),
            r.std_deviation() <= 0.05 * r.target_std + step,
            format!(
                "std {:.4} vs target {:.4}: deviation {:.3e} (limit {:.3e}); deviation from sqrt(eps t(1-t)/2) {:.1e}",
                r.std[0],
                r.target_std,
                r.std_deviation(),
                0.05 * r.target_std + step,
                r.gibbs_std_deviation()
            ),
        ));
    }
    Ok(checks)
}

/// Entries of an estimate outside `k` standard errors of `exp(-c/eps)`.
fn mc_band(est: &McKernelEstimate<f64>, c: &CostMatrix<f64>, eps: f64, k: f64) -> (f64, bool) {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for ((i, j), v) in est.estimate.indexed_iter() {
        let exact = (-c.get(i, j) / eps).exp();
        let se = est.stderr[[i, j]];
        if se > 0.0 {
            worst = worst.max((v - exact).abs() / se);
            ok &= (v - exact).abs() <= k * se;
        } else {
            ok &= (v - exact).abs() <= 1e-12 * exact;
        }
    }
    (worst, ok)
}

/// Independent runs whose standard errors are averaged per sample size.
const SE_REPLICATES: usize = 32;

fn mc_factorization(seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let x3 = uniform_points::<f64, _>(3, 1, &mut rng);
    let x4 = uniform_points::<f64, _>(4, 1, &mut rng);
    let instances = [
        ("squared", CostMatrix::squared_euclidean(x3.view())?, 1.0),
        ("abs", CostMatrix::power_distance(x4.view(), 1.0)?, 0.5),
    ];
    let mut checks = Vec::new();
    for (name, c, eps) in &instances {
        let emb = embed_negative_definite(c)?;
        let est = gaussian_features_mc(&emb, *eps, 100_000, derive_seed(seed, name))?;
        let (worst, ok) = mc_band(&est, c, *eps, 4.0);
        checks.push(Check::new(format!("{name} 4se band"), ok, format!("max {worst:.2} se")));

        let sizes = [10_000, 40_000, 160_000];
        let mean_se = sizes
            .iter()
            .map(|&n| {
                let mut acc = Array2::<f64>::zeros((c.rows(), c.cols()));
                for r in 0..SE_REPLICATES {
                    let tag = format!("{name}-{n}-{r}");
                    acc += &gaussian_features_mc(&emb, *eps, n, derive_seed(seed, &tag))?.stderr;
                }
                Ok(acc / SE_REPLICATES as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for pair in mean_se.windows(2) {
            for (a, b) in pair[0].iter().zip(pair[1].iter()) {
                if *a > 0.0 {
                    lo = lo.min(b / a);
                    hi = hi.max(b / a);
                }
            }
        }
        checks.push(Check::new(
            format!("{name} se ratio"),
            lo >= 0.4 && hi <= 0.6,
            format!("per quadrupling in [{lo:.3}, {hi:.3}]"),
        ));
    }
    Ok(checks)
}

fn saddle_value(seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let (mut value, mut stationarity) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let pts = uniform_points::<f64, _>(5, 2, &mut rng);
        let c = CostMatrix::squared_euclidean(pts.view())?;
        let mu = random_measure::<f64, _>(5, &mut rng);
        let nu = random_measure::<f64, _>(5, &mut rng);
        let eps = if k % 2 == 0 { 0.5 } else { 1.0 };
        let r = saddle_value_check(&c, &mu, &nu, eps, 1e-13)?;
        value = value.max(r.value_error());
        stationarity = stationarity.max(r.stationarity_residual);
    }
    Ok(vec![
        Check::at_most("|L - OT|/(1+|OT|)", value, 1e-6),
        Check::at_most("stationarity", stationarity, 1e-10),
    ])
}

fn mmd_negdef(seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let p2 = uniform_points::<f64, _>(6, 2, &mut rng);
    let p1 = uniform_points::<f64, _>(6, 1, &mut rng);
    let costs = [
        CostMatrix::squared_euclidean(p2.view())?,
        CostMatrix::power_distance(p1.view(), 1.0)?,
        CostMatrix::power_distance(p1.view(), 0.5)?,
    ];
    let mut min_mmd = f64::INFINITY;
    let mut all = true;
    for (k, c) in costs.iter().enumerate() {
        let trials = if k == 0 { 500 } else { 250 };
        let cert = negdef_iff_mmd_nonneg(c, trials, derive_seed(seed, &k.to_string()))?;
        all &= cert.negative_definite;
        min_mmd = min_mmd.min(cert.min_trial_mmd.unwrap_or(f64::NEG_INFINITY));
    }
    let cubic = CostMatrix::power_distance(array![[0.0], [1.0], [2.0], [5.0]].view(), 3.0)?;
    let cert = negdef_iff_mmd_nonneg(&cubic, 0, seed)?;
    let witness = cert.counterexample.as_ref().map_or(f64::NAN, |c| c.mmd);
    Ok(vec![
        Check::new("negative definite", all, "certified"),
        Check::new("MMD >= -1e-10", min_mmd >= -1e-10, format!("min {min_mmd:.3e}")),
        Check::new(
            "cubic witness MMD < 0",
            !cert.negative_definite && witness < 0.0,
            format!("{witness:.4e}"),
        ),
    ])
}

fn three_point<R: Rng + ?Sized>(rng: &mut R) -> DiscreteMeasure<f64> {
    random_measure::<f64, R>(3, rng)
}

fn kl_lemmas(seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    kl_lemma_checks(seed, 100, 100)
}

/// KL identities on random 3×3×3 instances, with `n_candidates` random
/// three-marginal couplings per instance for the upper bound.
pub fn kl_lemma_checks(seed: u64, n_instances: usize, n_candidates: usize) -> Result<Vec<Check>> {
    let mut rng: InstanceRng = rng_from_seed(seed);
    let (mut general, mut two, mut corr, mut chain) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut inequality = true;
    for _ in 0..n_instances {
        let (mu, nu, eta, lambda) = (
            three_point(&mut rng),
            three_point(&mut rng),
            three_point(&mut rng),
            three_point(&mut rng),
        );
        let slice = |m: &DiscreteMeasure<f64>| m.weights().to_vec();
        let pi1 = CouplingTensor::from_matrix(random_coupling(&slice(&mu), &slice(&eta), &mut rng))?;
        let pi2 = CouplingTensor::from_matrix(random_coupling(&slice(&nu), &slice(&eta), &mut rng))?;

        let raw = random_tensor::<f64, _>(&[3, 3, 3], &mut rng);
        let total = raw.sum();
        let gamma = CouplingTensor::new(raw.mapv(|v| v / total))?;
        let d = kl_three_decomposition(&gamma, &gamma.marginal(0)?, &gamma.marginal(1)?, &gamma.marginal(2)?)?;
        general = general.max(d.residual().abs());

        let candidates = (0..n_candidates)
            .map(|_| random_three_coupling(&pi1, &pi2, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let r = kl_decomp2_check(&pi1, &pi2, &lambda, &candidates)?;
        two = two.max((r.sum_side - r.glued_side).abs());
        inequality &= r.inequality_holds(1e-10);

        let glued = glue(&pi1, &pi2)?;
        let g = kl_three_decomposition(&glued, &pi1.marginal(0)?, &pi2.marginal(0)?, &pi1.marginal(1)?)?;
        corr = corr.max(g.correlation_term.abs()).max(g.residual().abs());

        let alpha = CouplingTensor::from_matrix(random_coupling(&slice(&mu), &slice(&nu), &mut rng))?;
        let beta = CouplingTensor::from_matrix(random_coupling(&slice(&eta), &slice(&lambda), &mut rng))?;
        let cc = kl_chain_check(&alpha, &beta)?;
        chain = chain.max((cc.joint_kl - cc.conditional_part - cc.marginal_part).abs());
    }
    Ok(vec![
        Check::at_most("three-marginal split", general, 1e-10),
        Check::at_most("two-plan equality", two, 1e-10),
        Check::at_most("glued correlation", corr, 1e-10),
        Check::at_most("chain rule", chain, 1e-10),
        Check::new(
            "upper bound over candidates",
            inequality,
            format!("{} couplings", n_instances * n_candidates),
        ),
    ])
}

/// Random debiasable rational cost; some off-diagonal gaps are zero and
/// some rows are unreachable.
fn random_exact_debiasable<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CostMatrix<ExactReal> {
    let q = |rng: &mut R, hi: i64| ExactReal::from_ratio(rng.random_range(0..=hi), rng.random_range(1..=6));
    let diag: Vec<ExactReal> = (0..n).map(|_| q(rng, 12)).collect();
    let mut m = Array2::from_elem((n, n), ExactReal::Infinity);
    for i in 0..n {
        m[[i, i]] = diag[i].clone();
        for j in 0..i {
            let roll = rng.random_range(0..10);
            let v = match roll {
                0 => ExactReal::Infinity,
                1 | 2 => half_sum(&diag[i], &diag[j]),
                _ => half_sum(&diag[i], &diag[j]).ext_add(&q(rng, 8)),
            };
            m[[i, j]] = v.clone();
            m[[j, i]] = v;
        }
    }
    CostMatrix::new(m).expect("no -inf")
}

fn half_sum(a: &ExactReal, b: &ExactReal) -> ExactReal {
    a.ext_half().ext_add(&b.ext_half())
}

fn inf_rep_roundtrip(seed: u64, faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let (mut exact, mut agree, mut strict_count) = (0usize, 0usize, 0usize);
    let zero = ExactReal::ext_zero();
    for _ in 0..200 {
        let n = rng.random_range(2..=6);
        let c = random_exact_debiasable(n, &mut rng);
        let rep = constructive_inf_rep(&c)?;
        exact += usize::from(eval_inf_rep(&rep) == c);
        let sets = strict_via_minimizer_sets(&rep, &zero);
        let c0 = faults.debias_exact(&c)?;
        let direct = (0..n).all(|i| (0..n).all(|j| i == j || *c0.get(i, j) > zero));
        agree += usize::from(sets.verdict == direct);
        strict_count += usize::from(direct);
    }
    Ok(vec![
        Check::new("exact roundtrip", exact == 200, format!("{exact}/200")),
        Check::new(
            "strict verdicts agree",
            agree == 200,
            format!("{agree}/200 ({strict_count} strict)"),
        ),
    ])
}

fn sorted_points<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn ot_inf_rep(seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let (mut equality, mut violation) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..20 {
        let a = sorted_points(4, &mut rng);
        let b = sorted_points(4, &mut rng);
        let mut xs: Vec<f64> = a.iter().chain(&b).copied().collect();
        xs.sort_by(f64::total_cmp);
        let index = |v: f64| xs.iter().position(|x| *x == v).expect("present");
        let mut zs = Vec::new();
        for i in 0..xs.len() {
            for j in i..xs.len() {
                zs.push(0.5 * (xs[i] + xs[j]));
            }
        }
        let coords = |v: &[f64]| Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column");
        let on_support = |pts: &[f64]| -> Result<DiscreteMeasure<f64>> {
            let mut w = Array1::zeros(xs.len());
            for p in pts {
                w[index(*p)] += 0.25;
            }
            DiscreteMeasure::new(w)?.with_coordinates(coords(&xs))
        };
        let mu = on_support(&a)?;
        let nu = on_support(&b)?;
        let c = CostMatrix::from_fn(xs.len(), xs.len(), |(i, j)| (xs[i] - xs[j]).powi(2))?;
        let psi = InfRepresentation::new(Array2::from_shape_fn((xs.len(), zs.len()), |(i, k)| {
            2.0 * (xs[i] - zs[k]).powi(2)
        }))?;
        let on_z = |w: Array1<f64>| DiscreteMeasure::new(w)?.with_coordinates(coords(&zs));

        // Midpoints of the monotone plan.
        let mut w = Array1::zeros(zs.len());
        for (p, q) in a.iter().zip(&b) {
            let (i, j) = (index(*p).min(index(*q)), index(*p).max(index(*q)));
            let k = i * xs.len() - i * (i + 1) / 2 + j;
            w[k] += 0.25;
        }
        let mut candidates = vec![on_z(w)?];
        for _ in 0..10 {
            candidates.push(on_z(random_measure::<f64, _>(zs.len(), &mut rng).weights().clone())?);
        }
        let r = ot_infrep_check(&c, &psi, &mu, &nu, &candidates)?;
        equality = equality.max((r.uppers[0] - r.ot_value).abs());
        violation = violation.max(max_of(r.uppers.iter().map(|u| r.ot_value - u)));
    }
    Ok(vec![
        Check::at_most("midpoint equality", equality, 1e-10),
        Check::at_most("upper bound violation", violation, 1e-10),
    ])
}

fn debias_lift(seed: u64, faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let mut worst_s0 = f64::INFINITY;
    for k in 0..40 {
        let n = rng.random_range(3..=8);
        let x = uniform_points::<f64, _>(n, 1, &mut rng);
        let p = [1.0, 1.5, 2.0][k % 3];
        let offsets: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let base = CostMatrix::power_distance(x.view(), p)?;
        let c = CostMatrix::from_fn(n, n, |(i, j)| base.get(i, j) + offsets[i] + offsets[j])?;
        let (mu, nu) = if k % 10 == 9 {
            (DiscreteMeasure::uniform(n)?, DiscreteMeasure::uniform(n)?)
        } else {
            (
                random_measure::<f64, _>(n, &mut rng),
                random_measure::<f64, _>(n, &mut rng),
            )
        };
        let r = exact_ot_divergence(&c, &mu.with_coordinates(x.clone())?, &nu.with_coordinates(x.clone())?)?;
        worst_s0 = worst_s0.min(r.debiased);
    }

    let mut dirac = 0.0f64;
    for k in 0..10 {
        let n = 4;
        let rep = InfRepresentation::new(Array2::from_shape_fn((n, 6), |_| rng.random::<f64>()))?;
        let c = if k == 0 {
            counterexample_cost()
        } else {
            eval_inf_rep(&rep)
        };
        let c0 = faults.debias(&c)?;
        for eps in [0.1, 1.0, 10.0] {
            for i in 0..n.min(c.rows()) {
                for j in 0..n.min(c.rows()) {
                    let d = |a| DiscreteMeasure::dirac(c.rows(), a);
                    let r = sinkhorn_divergence(&c, &d(i)?, &d(j)?, eps, 1e-12)?;
                    dirac = dirac.max((r.debiased - c0.get(i, j)).abs());
                }
            }
        }
    }
    let certified = is_debiasable(&counterexample_cost::<f64>(), false, &0.0)?.verdict;
    Ok(vec![
        Check::new("S_0 >= -1e-12", worst_s0 >= -1e-12, format!("min {worst_s0:.3e}")),
        Check::at_most("dirac reduction", dirac, 2e-9),
        Check::new("counterexample cost debiasable", certified, "certified"),
    ])
}

fn solver_consistency(seed: u64, _faults: &Faults) -> Result<Vec<Check>> {
    let mut rng = rng_from_seed(seed);
    let (mut gap, mut oracle) = (0.0f64, 0.0f64);
    for k in 0..50 {
        let eps = [0.1, 0.5, 1.0][k % 3];
        let n = rng.random_range(3..=8);
        let pts = uniform_points::<f64, _>(n, 2, &mut rng);
        let c = CostMatrix::squared_euclidean(pts.view())?;
        let mu = random_measure::<f64, _>(n, &mut rng);
        let nu = random_measure::<f64, _>(n, &mut rng);
        let s = sinkhorn(&c, &mu, &nu, eps, 1e-13, DEFAULT_MAX_ITER)?;
        gap = gap.max(s.duality_gap() / (1.0 + s.primal_value.abs()));

        let c2 = CostMatrix::new(Array2::from_shape_fn((2, 2), |_| rng.random::<f64>()))?;
        let a = random_measure::<f64, _>(2, &mut rng);
        let b = random_measure::<f64, _>(2, &mut rng);
        let s2 = sinkhorn(&c2, &a, &b, eps, 1e-13, DEFAULT_MAX_ITER)?;
        let g = eot_scalar_oracle(&c2, &a, &b, eps)?;
        oracle = oracle.max((s2.primal_value - g.value).abs());
        gap = gap.max(s2.duality_gap() / (1.0 + s2.primal_value.abs()));
    }
    Ok(vec![
        Check::at_most("duality gap", gap, 1e-8),
        Check::at_most("2x2 golden section", oracle, 1e-6),
    ])
}
