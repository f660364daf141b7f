//! Executes one configured experiment.

use ndarray::{Array1, Array2};
use serde::Serialize;
use serde_json::{json, Value};

use debiasot::costs::{
    constructive_inf_rep, counterexample_cost, eval_inf_rep, is_debiasable, strict_via_minimizer_sets, CostMatrix,
    InfRepresentation,
};
use debiasot::decomposition::{
    barycenter_decompose, entropic_interpolation, gaussian_identity_check, negdef_lse_roundtrip, saddle_value_check,
    UniformGrid,
};
use debiasot::divergences::{debiased_uot, format_real, mmd_squared, sinkhorn_divergence, DivergenceReport};
use debiasot::experiments::{kl_lemma_checks, Check};
use debiasot::io::{DecompositionJson, SinkhornJson};
use debiasot::kernels::is_negative_definite;
use debiasot::measures::DiscreteMeasure;
use debiasot::random::{random_measure, rng_from_seed, uniform_points};
use debiasot::solvers::{sinkhorn, DEFAULT_MAX_ITER};

use crate::config::{Experiment, ExperimentConfig, Generator, Instance};

/// Rows of a CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub results: Value,
    pub table: Option<Table>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Failure before or during a run.
#[derive(Debug)]
pub enum RunError {
    /// The instance itself is malformed.
    Invalid(String),
    /// A solver or check could not complete.
    Failed(String),
}

type Run<T> = std::result::Result<T, RunError>;

fn invalid(e: debiasot::Error) -> RunError {
    RunError::Invalid(e.to_string())
}

fn failed(e: debiasot::Error) -> RunError {
    RunError::Failed(e.to_string())
}

/// Fixed-point tolerance of the decomposition loop.
const FIXED_POINT_TOL: f64 = 1e-10;
const DECOMPOSE_MAX_ITER: usize = 10_000;

struct Problem {
    cost: CostMatrix<f64>,
    mu: DiscreteMeasure<f64>,
    nu: DiscreteMeasure<f64>,
}

fn generated(g: &Generator, seed: u64) -> Run<Problem> {
    let mut rng = rng_from_seed(seed);
    let points = uniform_points::<f64, _>(g.n_points, g.dimension, &mut rng);
    let p = g.exponent().map_err(RunError::Invalid)?;
    let cost = if p == 2.0 {
        CostMatrix::squared_euclidean(points.view())
    } else {
        CostMatrix::power_distance(points.view(), p)
    }
    .map_err(invalid)?;
    let mu = random_measure::<f64, _>(g.n_points, &mut rng)
        .with_coordinates(points.clone())
        .map_err(invalid)?;
    let nu = random_measure::<f64, _>(g.n_points, &mut rng)
        .with_coordinates(points.clone())
        .map_err(invalid)?;
    Ok(Problem { cost, mu, nu })
}

fn problem(cfg: &ExperimentConfig) -> Run<Problem> {
    let inst = cfg
        .instance
        .as_ref()
        .ok_or_else(|| RunError::Invalid("missing instance".into()))?;
    if let Some(g) = &inst.generator {
        return generated(g, cfg.seed.unwrap_or_default());
    }
    let cost = inst
        .cost
        .as_ref()
        .ok_or_else(|| RunError::Invalid("missing cost".into()))?
        .to_cost::<f64>()
        .map_err(invalid)?;
    let measure = |m: &Option<debiasot::io::MeasureJson>, n: usize| -> Run<DiscreteMeasure<f64>> {
        match m {
            Some(m) => m.to_measure().map_err(invalid),
            None => DiscreteMeasure::uniform(n).map_err(invalid),
        }
    };
    Ok(Problem {
        mu: measure(&inst.mu, cost.rows())?,
        nu: measure(&inst.nu, cost.cols())?,
        cost,
    })
}

fn epsilons(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.epsilons.is_empty() {
        vec![1.0]
    } else {
        cfg.epsilons.clone()
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn divergence_table(reports: &[DivergenceReport<f64>]) -> Table {
    Table {
        header: DivergenceReport::<f64>::csv_header()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: reports.iter().map(DivergenceReport::csv_record).collect(),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Run<Report> {
    match cfg.experiment {
        Experiment::CheckDebias => check_debias(cfg),
        Experiment::Sinkhorn => run_sinkhorn(cfg),
        Experiment::Divergence => divergence(cfg),
        Experiment::Uot => uot(cfg),
        Experiment::Mmd => mmd(cfg),
        Experiment::Decompose => decompose(cfg),
        Experiment::Interpolate => interpolate(cfg),
        Experiment::GaussianIdentity => gaussian_identity(cfg),
        Experiment::SaddleCheck => saddle(cfg),
        Experiment::KlLemmas => kl_lemmas(cfg),
        Experiment::NegdefRoundtrip => negdef_roundtrip(cfg),
        Experiment::Counterexample => counterexample(cfg),
    }
}

fn check_debias(cfg: &ExperimentConfig) -> Run<Report> {
    let p = problem(cfg)?;
    let tol = cfg.tolerances.debias;
    let c = &p.cost;
    let plain = is_debiasable(c, false, &tol).map_err(invalid)?;
    let strict = is_debiasable(c, true, &tol).map_err(invalid)?;
    let mut checks = Vec::new();
    let mut results = json!({
        "debiasable": plain.verdict,
        "witness": plain.witness,
        "witness_value": plain.witness_value,
        "strictly_debiasable": strict.verdict,
        "strict_witness": strict.witness,
    });
    if plain.verdict {
        let rep = constructive_inf_rep(c).map_err(failed)?;
        let back = eval_inf_rep(&rep);
        let scale = 1.0 + c.max_abs_finite();
        let err = back
            .entries()
            .iter()
            .zip(c.entries())
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
            .fold(0.0, f64::max);
        checks.push(Check::at_most("inf-representation roundtrip", err, 1e-12 * scale));
        let sets = strict_via_minimizer_sets(&rep, &cfg.tolerances.argmin);
        if cfg.strict {
            checks.push(Check::new(
                "strict verdicts agree",
                sets.verdict == strict.verdict,
                format!("scan {} vs minimizer sets {}", strict.verdict, sets.verdict),
            ));
        }
        results["roundtrip_error"] = json!(err);
        results["minimizer_sets_strict"] = json!(sets.verdict);
        results["shared_column"] = json!(sets.shared_column);
    }
    Ok(Report {
        results,
        table: None,
        checks,
    })
}

fn run_sinkhorn(cfg: &ExperimentConfig) -> Run<Report> {
    let p = problem(cfg)?;
    let mut results = Vec::new();
    let mut checks = Vec::new();
    for eps in epsilons(cfg) {
        let s = sinkhorn(&p.cost, &p.mu, &p.nu, eps, cfg.tolerances.solver, DEFAULT_MAX_ITER).map_err(failed)?;
        checks.push(Check::at_most(
            format!("duality gap eps={eps}"),
            s.duality_gap().abs() / (1.0 + s.primal_value.abs()),
            cfg.tolerances.duality,
        ));
        let mut v = to_value(&SinkhornJson::from_solution(&s, cfg.include_plan));
        v["epsilon"] = json!(eps);
        results.push(v);
    }
    Ok(Report {
        results: Value::Array(results),
        table: None,
        checks,
    })
}

fn seeded(mut r: DivergenceReport<f64>, cfg: &ExperimentConfig) -> DivergenceReport<f64> {
    r.seed = cfg.seed;
    r
}

fn divergence(cfg: &ExperimentConfig) -> Run<Report> {
    let p = problem(cfg)?;
    let reports = epsilons(cfg)
        .into_iter()
        .map(|eps| {
            sinkhorn_divergence(&p.cost, &p.mu, &p.nu, eps, cfg.tolerances.solver)
                .map(|r| seeded(r, cfg))
                .map_err(failed)
        })
        .collect::<Run<Vec<_>>>()?;
    Ok(Report {
        results: to_value(&reports),
        table: Some(divergence_table(&reports)),
        checks: Vec::new(),
    })
}

fn uot(cfg: &ExperimentConfig) -> Run<Report> {
    let p = problem(cfg)?;
    let rho = cfg.rho.expect("validated");
    let reports = epsilons(cfg)
        .into_iter()
        .map(|eps| {
            debiased_uot(&p.cost, &p.mu, &p.nu, eps, rho, cfg.tolerances.solver)
                .map(|r| seeded(r, cfg))
                .map_err(failed)
        })
        .collect::<Run<Vec<_>>>()?;
    Ok(Report {
        results: to_value(&reports),
        table: Some(divergence_table(&reports)),
        checks: Vec::new(),
    })
}

fn mmd(cfg: &ExperimentConfig) -> Run<Report> {
    let p = problem(cfg)?;
    let r = seeded(mmd_squared(&p.cost, &p.mu, &p.nu).map_err(failed)?, cfg);
    let nd = is_negative_definite(&p.cost, 1e-9 * (1.0 + p.cost.max_abs_finite())).map_err(failed)?;
    let mut checks = Vec::new();
    if nd.verdict {
        checks.push(Check::new(
            "MMD >= -1e-10 for a negative definite cost",
            r.debiased >= -1e-10,
            format_real(r.debiased),
        ));
    }
    Ok(Report {
        results: json!({"report": to_value(&r), "negative_definite": nd.verdict}),
        table: Some(divergence_table(std::slice::from_ref(&r))),
        checks,
    })
}

/// `(psi, lambda, mu, nu)`.
type DecompositionInstance = (
    InfRepresentation<f64>,
    DiscreteMeasure<f64>,
    DiscreteMeasure<f64>,
    DiscreteMeasure<f64>,
);

fn decomposition_instance(cfg: &ExperimentConfig, inst: &Instance) -> Run<DecompositionInstance> {
    if let Some(g) = &inst.generator {
        let mut rng = rng_from_seed(cfg.seed.unwrap_or_default());
        let nz = g.z_points.unwrap_or(2 * g.n_points);
        let x = uniform_points::<f64, _>(g.n_points, g.dimension, &mut rng);
        let z = uniform_points::<f64, _>(nz, g.dimension, &mut rng);
        let p = g.exponent().map_err(RunError::Invalid)?;
        let psi = InfRepresentation::new(Array2::from_shape_fn((g.n_points, nz), |(i, k)| {
            let d2: f64 = x.row(i).iter().zip(z.row(k)).map(|(a, b)| (a - b).powi(2)).sum();
            2.0 * d2.powf(p / 2.0)
        }))
        .map_err(invalid)?;
        let lambda = random_measure::<f64, _>(nz, &mut rng);
        let mu = random_measure::<f64, _>(g.n_points, &mut rng);
        let nu = random_measure::<f64, _>(g.n_points, &mut rng);
        return Ok((psi, lambda, mu, nu));
    }
    let rows = inst.psi.as_ref().expect("validated");
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(RunError::Invalid("psi rows have different lengths".into()));
    }
    let psi = InfRepresentation::new(Array2::from_shape_fn((rows.len(), m), |(i, k)| rows[i][k])).map_err(invalid)?;
    let lambda = DiscreteMeasure::new(Array1::from(inst.lambda.clone().expect("validated"))).map_err(invalid)?;
    let mu = inst.mu.as_ref().expect("validated").to_measure().map_err(invalid)?;
    let nu = inst.nu.as_ref().expect("validated").to_measure().map_err(invalid)?;
    Ok((psi, lambda, mu, nu))
}

fn decompose(cfg: &ExperimentConfig) -> Run<Report> {
    let inst = cfg.instance.as_ref().expect("validated");
    let (psi, lambda, mu, nu) = decomposition_instance(cfg, inst)?;
    let mut results = Vec::new();
    let mut checks = Vec::new();
    for eps in epsilons(cfg) {
        let sol =
            barycenter_decompose(&psi, &lambda, &mu, &nu, eps, FIXED_POINT_TOL, DECOMPOSE_MAX_ITER).map_err(failed)?;
        checks.push(Check::at_most(
            format!("decomposition gap eps={eps}"),
            sol.identity_gap(),
            cfg.tolerances.decomposition,
        ));
        let mut v = to_value(&DecompositionJson::from_solution(&sol));
        v["epsilon"] = json!(eps);
        results.push(v);
    }
    Ok(Report {
        results: Value::Array(results),
        table: None,
        checks,
    })
}

fn grid_for(cfg: &ExperimentConfig, eps: f64) -> Run<(UniformGrid<f64>, f64)> {
    let step = cfg.step.unwrap_or(eps.sqrt() / 20.0);
    let x = cfg.x.as_deref().expect("validated");
    let y = cfg.y.as_deref().expect("validated");
    Ok((UniformGrid::covering(&[x, y], eps, step).map_err(invalid)?, step))
}

fn interpolate(cfg: &ExperimentConfig) -> Run<Report> {
    let (x, y) = (
        cfg.x.as_deref().expect("validated"),
        cfg.y.as_deref().expect("validated"),
    );
    let d = x.len();
    let mut header = vec!["epsilon".to_string(), "t".to_string()];
    for prefix in ["mean", "std", "target_mean"] {
        header.extend((0..d).map(|k| format!("{prefix}_{k}")));
    }
    header.extend(
        [
            "target_std",
            "gibbs_std",
            "mean_deviation",
            "std_deviation",
            "gibbs_std_deviation",
        ]
        .map(String::from),
    );
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for eps in epsilons(cfg) {
        let (grid, step) = grid_for(cfg, eps)?;
        let records = entropic_interpolation(
            x,
            y,
            eps,
            cfg.t.as_deref().expect("validated"),
            &grid,
            FIXED_POINT_TOL,
            DECOMPOSE_MAX_ITER,
        )
        .map_err(failed)?;
        for r in &records {
            let mut row = vec![format_real(eps), format_real(r.t)];
            row.extend(
                r.mean
                    .iter()
                    .chain(&r.std)
                    .chain(&r.target_mean)
                    .map(|v| format_real(*v)),
            );
            row.extend(
                [
                    r.target_std,
                    r.gibbs_std,
                    r.mean_deviation(),
                    r.std_deviation(),
                    r.gibbs_std_deviation(),
                ]
                .map(format_real),
            );
            rows.push(row);
            checks.push(Check::at_most(
                format!("mean eps={eps} t={}", r.t),
                r.mean_deviation(),
                2.0 * step,
            ));
            checks.push(Check::at_most(
                format!("std eps={eps} t={}", r.t),
                r.std_deviation(),
                0.05 * r.target_std + step,
            ));
            results.push(json!({
                "epsilon": eps, "t": r.t, "mean": r.mean, "std": r.std, "target_mean": r.target_mean,
                "target_std": r.target_std, "gibbs_std": r.gibbs_std, "value": r.value, "identity_gap": r.identity_gap,
            }));
        }
    }
    Ok(Report {
        results: Value::Array(results),
        table: Some(Table { header, rows }),
        checks,
    })
}

fn gaussian_identity(cfg: &ExperimentConfig) -> Run<Report> {
    let (x, y) = (
        cfg.x.as_deref().expect("validated"),
        cfg.y.as_deref().expect("validated"),
    );
    let mut results = Vec::new();
    let mut checks = Vec::new();
    for eps in epsilons(cfg) {
        let (grid, step) = grid_for(cfg, eps)?;
        let r = gaussian_identity_check(x, y, eps, &grid).map_err(invalid)?;
        checks.push(Check::at_most(
            format!("quadrature eps={eps}"),
            r.relative_error(),
            r.quadrature_error_bound,
        ));
        results.push(json!({
            "epsilon": eps, "step": step, "lhs": r.lhs, "rhs": r.rhs,
            "relative_error": r.relative_error(), "quadrature_error_bound": r.quadrature_error_bound,
        }));
    }
    Ok(Report {
        results: Value::Array(results),
        table: None,
        checks,
    })
}

fn saddle(cfg: &ExperimentConfig) -> Run<Report> {
    let p = problem(cfg)?;
    let mut results = Vec::new();
    let mut checks = Vec::new();
    for eps in epsilons(cfg) {
        let r = saddle_value_check(&p.cost, &p.mu, &p.nu, eps, cfg.tolerances.solver).map_err(failed)?;
        checks.push(Check::at_most(format!("saddle value eps={eps}"), r.value_error(), 1e-6));
        checks.push(Check::at_most(
            format!("stationarity eps={eps}"),
            r.stationarity_residual,
            1e-10,
        ));
        results.push(json!({
            "epsilon": eps, "ot_value": r.ot_value, "lagrangian_value": r.lagrangian_value,
            "stationarity_residual": r.stationarity_residual, "m_bound": r.m_bound,
        }));
    }
    Ok(Report {
        results: Value::Array(results),
        table: None,
        checks,
    })
}

fn kl_lemmas(cfg: &ExperimentConfig) -> Run<Report> {
    let n = cfg.instances.unwrap_or(100);
    let checks = kl_lemma_checks(cfg.seed.expect("validated"), n, 100).map_err(failed)?;
    Ok(Report {
        results: json!({"instances": n, "checks": to_value(&checks)}),
        table: None,
        checks,
    })
}

fn negdef_roundtrip(cfg: &ExperimentConfig) -> Run<Report> {
    let p = problem(cfg)?;
    let n = cfg.n_samples.unwrap_or(100_000);
    let seed = cfg.seed.expect("validated");
    let mut results = Vec::new();
    let mut checks = Vec::new();
    for eps in epsilons(cfg) {
        let r = negdef_lse_roundtrip(&p.cost, eps, n, seed).map_err(failed)?;
        checks.push(Check::at_most(
            format!("standardized error eps={eps}"),
            r.max_standardized_error,
            cfg.tolerances.mc_band,
        ));
        results.push(json!({
            "epsilon": eps, "n_samples": n, "seed": seed,
            "max_relative_error": r.max_relative_error,
            "max_standardized_error": r.max_standardized_error,
            "max_cost_error": r.max_cost_error,
        }));
    }
    Ok(Report {
        results: Value::Array(results),
        table: None,
        checks,
    })
}

fn counterexample(cfg: &ExperimentConfig) -> Run<Report> {
    let c = counterexample_cost::<f64>();
    let mu = DiscreteMeasure::probability(ndarray::array![0.5, 0.5, 0.0]).map_err(invalid)?;
    let nu = DiscreteMeasure::dirac(3, 2).map_err(invalid)?;
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for eps in epsilons(cfg) {
        let r = seeded(
            sinkhorn_divergence(&c, &mu, &nu, eps, cfg.tolerances.solver).map_err(failed)?,
            cfg,
        );
        checks.push(Check::at_most(format!("OT(mu,nu)=0 eps={eps}"), r.raw_xy.abs(), 1e-9));
        checks.push(Check::new(
            format!("debiased < 0 eps={eps}"),
            r.debiased < 0.0,
            format_real(r.debiased),
        ));
        reports.push(r);
    }
    Ok(Report {
        results: to_value(&reports),
        table: Some(divergence_table(&reports)),
        checks,
    })
}
