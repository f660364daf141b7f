//! Decomposition identities: the barycentric form of entropic OT for
//! log-sum-exp costs, the Gaussian identities, entropic interpolation, the
//! inf-representation of unregularized OT and the kernel saddle value.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::costs::{eval_inf_rep, CostMatrix, InfRepresentation};
use crate::error::{invalid, Error, Result};
use crate::kernels::{
    check_epsilon, embed_negative_definite, gaussian_features_mc, gibbs_kernel, gram_norm2, is_psd,
    log_feature_samples, lse_cost_two_sided, mean_embedding_grams,
};
use crate::measures::{kl_entries, DiscreteMeasure};
use crate::numeric::{ln0, logsumexp};
use crate::scalar::{lit, Real};
use crate::solvers::{exact_ot_bruteforce, sinkhorn, sinkhorn_warm, DEFAULT_MAX_ITER};

/// Axis-aligned uniform grid in dimension 1 or 2.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid<T> {
    lower: Vec<T>,
    counts: Vec<usize>,
    step: T,
}

impl<T: Real> UniformGrid<T> {
    /// Grid from `lower` to at least `upper` on every axis.
    pub fn new(lower: Vec<T>, upper: Vec<T>, step: T) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() > 2 {
            return Err(invalid("grid", "needs matching bounds in dimension 1 or 2"));
        }
        if !(step > T::zero() && step.is_finite()) {
            return Err(invalid("step", format!("must be positive, got {step}")));
        }
        let counts = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| {
                let span = (*u - *l) / step;
                if span < T::zero() {
                    return Err(invalid("grid", "upper bound below lower bound"));
                }
                Ok(span.ceil().to_usize().unwrap_or(0) + 1)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lower, counts, step })
    }

    /// Grid covering `[min - 5 sqrt(eps), max + 5 sqrt(eps)]` around `anchors`.
    pub fn covering(anchors: &[&[T]], epsilon: T, step: T) -> Result<Self> {
        let d = anchors.first().map(|a| a.len()).ok_or(Error::EmptySupport)?;
        let pad = lit::<T>(5.0) * epsilon.sqrt();
        let lower = (0..d)
            .map(|k| anchors.iter().fold(T::infinity(), |m, a| m.min(a[k])) - pad)
            .collect();
        let upper = (0..d)
            .map(|k| anchors.iter().fold(T::neg_infinity(), |m, a| m.max(a[k])) + pad)
            .collect();
        Self::new(lower, upper, step)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn cell_volume(&self) -> T {
        self.step.powi(self.dim() as i32)
    }

    pub fn upper(&self, axis: usize) -> T {
        self.lower[axis] + self.step * lit((self.counts[axis] - 1) as f64)
    }

    /// Grid nodes in row-major order.
    pub fn points(&self) -> Array2<T> {
        let d = self.dim();
        let mut out = Array2::zeros((self.len(), d));
        for (r, mut row) in out.rows_mut().into_iter().enumerate() {
            let mut rem = r;
            for k in (0..d).rev() {
                let idx = rem % self.counts[k];
                rem /= self.counts[k];
                row[k] = self.lower[k] + self.step * lit(idx as f64);
            }
        }
        out
    }

    /// Whether `[min - 5 sqrt(eps), max + 5 sqrt(eps)]` lies inside the grid.
    pub fn covers(&self, anchors: &[&[T]], epsilon: T) -> bool {
        let pad = lit::<T>(5.0) * epsilon.sqrt();
        let slack = self.step * lit(1e-9);
        (0..self.dim()).all(|k| {
            anchors.iter().all(|a| {
                a.len() == self.dim() && a[k] - pad >= self.lower[k] - slack && a[k] + pad <= self.upper(k) + slack
            })
        })
    }

    /// Lebesgue weights `step^d` on every node.
    pub fn lebesgue_weights(&self) -> Array1<T> {
        Array1::from_elem(self.len(), self.cell_volume())
    }
}

/// Result of the barycentric decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct BarycenterSolution<T> {
    /// Optimal measure on the Z-grid.
    pub eta: DiscreteMeasure<T>,
    /// `side_values.0 + side_values.1 + kl_term`.
    pub value: T,
    pub side_values: (T, T),
    /// `epsilon KL(eta | lambda)`.
    pub kl_term: T,
    pub iterations: usize,
    /// `|T(eta) - eta|_1` for the full Gibbs update `T`.
    pub fixed_point_residual: T,
    /// Entropic OT of the log-sum-exp cost solved directly.
    pub direct_value: T,
    /// Objective after each accepted step.
    pub objective_trace: Vec<T>,
}

impl<T: Real> BarycenterSolution<T> {
    /// `|value - direct_value| / (1 + |value|)`.
    pub fn identity_gap(&self) -> T {
        (self.value - self.direct_value).abs() / (T::one() + self.value.abs())
    }
}

/// Accuracy of the inner Sinkhorn solves.
const INNER_TOL: f64 = 1e-13;
/// Slack of the monotone acceptance test.
const DESCENT_SLACK: f64 = 1e-12;
/// Largest step along the geometric mixture; steps above 1 extrapolate.
const MAX_RELAXATION: f64 = 1e3;

struct Evaluation<T> {
    value: T,
    sides: (T, T),
    kl: T,
    v: Array1<T>,
    u: Array1<T>,
}

struct Barycenter<'a, T> {
    psi_mu: CostMatrix<T>,
    psi_nu: CostMatrix<T>,
    log_lambda: Vec<T>,
    lambda: Vec<T>,
    mu: &'a DiscreteMeasure<T>,
    nu: &'a DiscreteMeasure<T>,
    epsilon: T,
}

impl<T: Real> Barycenter<'_, T> {
    fn evaluate(&self, log_eta: &[T], warm: Option<&Evaluation<T>>) -> Result<Evaluation<T>> {
        let eta = DiscreteMeasure::new(log_eta.iter().map(|l| l.exp()).collect::<Array1<T>>())?;
        let tol = lit::<T>(INNER_TOL);
        let a = sinkhorn_warm(
            &self.psi_mu,
            self.mu,
            &eta,
            self.epsilon,
            tol,
            DEFAULT_MAX_ITER,
            warm.map(|w| &w.v),
        )?;
        let b = sinkhorn_warm(
            &self.psi_nu,
            self.nu,
            &eta,
            self.epsilon,
            tol,
            DEFAULT_MAX_ITER,
            warm.map(|w| &w.u),
        )?;
        let kl = self.epsilon * kl_entries(eta.weights().iter().copied(), self.lambda.iter().copied());
        Ok(Evaluation {
            value: a.primal_value + b.primal_value + kl,
            sides: (a.primal_value, b.primal_value),
            kl,
            v: a.g,
            u: b.g,
        })
    }

    /// Normalized log of `lambda exp(-(v + u) / epsilon)`.
    fn gibbs_target(&self, e: &Evaluation<T>) -> Vec<T> {
        let raw: Vec<T> = self
            .log_lambda
            .iter()
            .zip(e.v.iter().zip(e.u.iter()))
            .map(|(l, (v, u))| *l - (*v + *u) / self.epsilon)
            .collect();
        normalize_log(raw)
    }
}

fn normalize_log<T: Real>(raw: Vec<T>) -> Vec<T> {
    let z = logsumexp(raw.iter().copied());
    raw.into_iter().map(|v| v - z).collect()
}

fn restrict_columns<T: Real>(psi: &InfRepresentation<T>, cols: &[usize]) -> Result<CostMatrix<T>> {
    let t = psi.psi();
    CostMatrix::from_fn(t.nrows(), cols.len(), |(i, k)| t[[i, cols[k]]])
}

/// Barycentric decomposition with one table for both sides.
pub fn barycenter_decompose<T: Real>(
    psi: &InfRepresentation<T>,
    lambda: &DiscreteMeasure<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    tol: T,
    max_iter: usize,
) -> Result<BarycenterSolution<T>> {
    barycenter_decompose_two_sided(psi, psi, lambda, mu, nu, epsilon, tol, max_iter)
}

/// Minimizes `OT_a(mu, eta) + OT_b(nu, eta) + epsilon KL(eta | lambda)` over
/// probability measures `eta` on the support of `lambda`.
///
/// Each step moves `eta` toward the Gibbs update `lambda exp(-(v + u)/epsilon)`
/// along a geometric mixture, halving the step until the objective does not
/// increase. The step grows past 1 while the residual keeps falling, which
/// extrapolates along components that drift toward zero. Iteration stops once the full update moves `eta` by at most `tol`
/// in L1.
#[allow(clippy::too_many_arguments)]
pub fn barycenter_decompose_two_sided<T: Real>(
    psi_mu: &InfRepresentation<T>,
    psi_nu: &InfRepresentation<T>,
    lambda: &DiscreteMeasure<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    tol: T,
    max_iter: usize,
) -> Result<BarycenterSolution<T>> {
    check_epsilon(epsilon)?;
    for (psi, m) in [(psi_mu, mu), (psi_nu, nu)] {
        if psi.x_size() != m.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.x_size(),
                found: m.len(),
            });
        }
        if psi.z_size() != lambda.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.z_size(),
                found: lambda.len(),
            });
        }
    }
    let support: Vec<usize> = lambda.support().collect();
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    for (psi, m) in [(psi_mu, mu), (psi_nu, nu)] {
        for i in m.support() {
            if support.iter().any(|&z| !psi.psi()[[i, z]].is_finite()) {
                return Err(invalid(
                    "psi",
                    format!("row {i} must be finite on the support of lambda"),
                ));
            }
        }
    }
    let lam: Vec<T> = support.iter().map(|&z| lambda.weight(z)).collect();
    let problem = Barycenter {
        psi_mu: restrict_columns(psi_mu, &support)?,
        psi_nu: restrict_columns(psi_nu, &support)?,
        log_lambda: lam.iter().map(|w| ln0(*w)).collect(),
        lambda: lam,
        mu,
        nu,
        epsilon,
    };

    let mut log_eta = normalize_log(problem.log_lambda.clone());
    let mut current = problem.evaluate(&log_eta, None)?;
    let mut trace = vec![current.value];
    let mut theta = T::one();
    let mut residual = T::infinity();
    let mut previous = T::infinity();
    let slack = lit::<T>(DESCENT_SLACK);
    let mut iterations = 0;
    while iterations < max_iter {
        let target = problem.gibbs_target(&current);
        residual = target
            .iter()
            .zip(&log_eta)
            .map(|(t, e)| (t.exp() - e.exp()).abs())
            .sum();
        if residual <= tol {
            break;
        }
        iterations += 1;
        // An increase of the residual means the last step overshot.
        if residual > previous {
            theta *= lit(0.5);
        } else {
            theta = (theta * lit(1.5)).min(lit(MAX_RELAXATION));
        }
        previous = residual;
        loop {
            let candidate = normalize_log(
                log_eta
                    .iter()
                    .zip(&target)
                    .map(|(e, t)| (T::one() - theta) * *e + theta * *t)
                    .collect(),
            );
            let next = problem.evaluate(&candidate, Some(&current))?;
            if next.value <= current.value + slack {
                log_eta = candidate;
                current = next;
                trace.push(current.value);
                break;
            }
            theta *= lit(0.5);
            if theta < lit(1e-9) {
                return Err(Error::NotConverged {
                    iterations,
                    residual: residual.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    if residual > tol {
        return Err(Error::NotConverged {
            iterations,
            residual: residual.to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut eta_full = Array1::zeros(lambda.len());
    for (k, &z) in support.iter().enumerate() {
        eta_full[z] = log_eta[k].exp();
    }
    let direct = lse_direct(psi_mu, psi_nu, lambda, mu, nu, epsilon)?;
    Ok(BarycenterSolution {
        eta: DiscreteMeasure::new(eta_full)?,
        value: current.value,
        side_values: current.sides,
        kl_term: current.kl,
        iterations,
        fixed_point_residual: residual,
        direct_value: direct,
        objective_trace: trace,
    })
}

/// Entropic OT of the (two-sided) log-sum-exp cost.
pub fn lse_direct<T: Real>(
    psi_mu: &InfRepresentation<T>,
    psi_nu: &InfRepresentation<T>,
    lambda: &DiscreteMeasure<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
) -> Result<T> {
    let lam = lambda.weights().as_slice().expect("contiguous");
    let c = lse_cost_two_sided(psi_mu, psi_nu, lam, epsilon)?;
    Ok(sinkhorn(&c, mu, nu, epsilon, lit(INNER_TOL), DEFAULT_MAX_ITER)?.primal_value)
}

/// Quadrature of the Gaussian integral against its closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianIdentityCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub quadrature_error_bound: T,
}

impl<T: Real> GaussianIdentityCheck<T> {
    pub fn relative_error(&self) -> T {
        (self.lhs - self.rhs).abs() / self.rhs
    }

    pub fn holds(&self) -> bool {
        self.relative_error() <= self.quadrature_error_bound
    }
}

/// `int exp(-(2|z-x|^2 + 2|z-y|^2)/eps) dz` against `exp(-|x-y|^2/eps) (pi eps / 4)^(d/2)`.
pub fn gaussian_identity_check<T: Real>(
    x: &[T],
    y: &[T],
    epsilon: T,
    grid: &UniformGrid<T>,
) -> Result<GaussianIdentityCheck<T>> {
    check_epsilon(epsilon)?;
    if x.len() != grid.dim() || y.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: x.len().max(y.len()),
        });
    }
    if !grid.covers(&[x, y], epsilon) {
        return Err(Error::GridCoverage(format!(
            "grid does not contain [min - 5 sqrt(eps), max + 5 sqrt(eps)] for eps = {epsilon}"
        )));
    }
    let two = lit::<T>(2.0);
    let pts = grid.points();
    let lhs = pts
        .rows()
        .into_iter()
        .map(|z| {
            let dx: T = z.iter().zip(x).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            let dy: T = z.iter().zip(y).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            (-(two * dx + two * dy) / epsilon).exp()
        })
        .sum::<T>()
        * grid.cell_volume();
    let d = grid.dim();
    let dxy: T = x.iter().zip(y).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
    let rhs = (-dxy / epsilon).exp() * (lit::<T>(std::f64::consts::PI) * epsilon / lit(4.0)).powf(lit(d as f64 / 2.0));
    let h = grid.step();
    let aliasing =
        lit::<T>(2.0 * d as f64) * (-lit::<T>(std::f64::consts::PI.powi(2)) * epsilon / (lit::<T>(4.0) * h * h)).exp();
    Ok(GaussianIdentityCheck {
        lhs,
        rhs,
        quadrature_error_bound: aliasing.max(lit(1e-6)),
    })
}

/// One time slice of the entropic interpolation between two Dirac masses.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationRecord<T> {
    pub t: T,
    pub eta: DiscreteMeasure<T>,
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// `(1 - t) x + t y`.
    pub target_mean: Vec<T>,
    /// `sqrt(eps t (1 - t) / 4)`.
    pub target_std: T,
    /// `sqrt(eps t (1 - t) / 2)`, the spread of the Gibbs density
    /// `exp(-|z - m_t|^2 / (t (1 - t) eps))`.
    pub gibbs_std: T,
    pub value: T,
    pub identity_gap: T,
}

impl<T: Real> InterpolationRecord<T> {
    pub fn mean_deviation(&self) -> T {
        self.mean
            .iter()
            .zip(&self.target_mean)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    fn std_deviation_from(&self, target: T) -> T {
        self.std.iter().fold(T::zero(), |m, s| m.max((*s - target).abs()))
    }

    pub fn std_deviation(&self) -> T {
        self.std_deviation_from(self.target_std)
    }

    pub fn gibbs_std_deviation(&self) -> T {
        self.std_deviation_from(self.gibbs_std)
    }
}

/// Per-axis mean and standard deviation of a measure on grid nodes.
pub fn grid_moments<T: Real>(eta: &DiscreteMeasure<T>, points: &Array2<T>) -> (Vec<T>, Vec<T>) {
    let w = eta.weights();
    let mass = eta.total_mass();
    let mean: Vec<T> = points.columns().into_iter().map(|c| w.dot(&c) / mass).collect();
    let std = points
        .columns()
        .into_iter()
        .zip(&mean)
        .map(|(c, m)| {
            (c.iter()
                .zip(w.iter())
                .map(|(z, p)| *p * (*z - *m) * (*z - *m))
                .sum::<T>()
                / mass)
                .sqrt()
        })
        .collect();
    (mean, std)
}

/// Table `scale * |x_i - z|^2` over grid nodes.
pub fn quadratic_table<T: Real>(x: &[&[T]], points: &Array2<T>, scale: T) -> Result<InfRepresentation<T>> {
    InfRepresentation::new(Array2::from_shape_fn((x.len(), points.nrows()), |(i, z)| {
        let d2: T = points.row(z).iter().zip(x[i]).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
        scale * d2
    }))
}

/// Midpoint decomposition between `delta_x` and `delta_y` for `2|x - z|^2` on a grid.
pub fn midpoint_barycenter<T: Real>(
    x: &[T],
    y: &[T],
    epsilon: T,
    grid: &UniformGrid<T>,
    tol: T,
    max_iter: usize,
) -> Result<(BarycenterSolution<T>, Vec<T>, Vec<T>)> {
    if !grid.covers(&[x, y], epsilon) {
        return Err(Error::GridCoverage("grid too small for the midpoint problem".into()));
    }
    let pts = grid.points();
    let psi_x = quadratic_table(&[x], &pts, lit(2.0))?;
    let psi_y = quadratic_table(&[y], &pts, lit(2.0))?;
    let lambda = DiscreteMeasure::new(grid.lebesgue_weights())?;
    let dirac = DiscreteMeasure::dirac(1, 0)?;
    let sol = barycenter_decompose_two_sided(&psi_x, &psi_y, &lambda, &dirac, &dirac, epsilon, tol, max_iter)?;
    let (mean, std) = grid_moments(&sol.eta, &pts);
    Ok((sol, mean, std))
}

/// Entropic interpolation between `delta_x` and `delta_y` with side costs
/// `|z - x|^2 / t` and `|z - y|^2 / (1 - t)`.
pub fn entropic_interpolation<T: Real>(
    x: &[T],
    y: &[T],
    epsilon: T,
    t_values: &[T],
    grid: &UniformGrid<T>,
    tol: T,
    max_iter: usize,
) -> Result<Vec<InterpolationRecord<T>>> {
    check_epsilon(epsilon)?;
    if x.len() != grid.dim() || y.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: x.len().max(y.len()),
        });
    }
    if !grid.covers(&[x, y], epsilon) {
        return Err(Error::GridCoverage("grid too small for the interpolation".into()));
    }
    if let Some(t) = t_values.iter().find(|t| !(**t > T::zero() && **t < T::one())) {
        return Err(invalid("t", format!("must lie in (0, 1), got {t}")));
    }
    let pts = grid.points();
    let lambda = DiscreteMeasure::new(grid.lebesgue_weights())?;
    let dirac = DiscreteMeasure::dirac(1, 0)?;
    t_values
        .par_iter()
        .map(|&t| {
            let s = T::one() - t;
            let psi_x = quadratic_table(&[x], &pts, T::one() / t)?;
            let psi_y = quadratic_table(&[y], &pts, T::one() / s)?;
            let sol = barycenter_decompose_two_sided(&psi_x, &psi_y, &lambda, &dirac, &dirac, epsilon, tol, max_iter)?;
            let (mean, std) = grid_moments(&sol.eta, &pts);
            let var = epsilon * t * s;
            Ok(InterpolationRecord {
                t,
                mean,
                std,
                target_mean: x.iter().zip(y).map(|(a, b)| s * *a + t * *b).collect(),
                target_std: (var / lit(4.0)).sqrt(),
                gibbs_std: (var / lit(2.0)).sqrt(),
                value: sol.value,
                identity_gap: sol.identity_gap(),
                eta: sol.eta,
            })
        })
        .collect()
}

/// Exact OT against the inf-representation upper bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct OtInfRepCheck<T> {
    pub ot_value: T,
    pub best_upper: T,
    /// `best_upper - ot_value`.
    pub gap: T,
    pub uppers: Vec<T>,
}

/// Compares `OT_c(mu, nu)` with `OT_psi(mu, eta) + OT_psi(nu, eta)` for each
/// candidate `eta` on Z, all through the exact oracle.
pub fn ot_infrep_check<T: Real>(
    c: &CostMatrix<T>,
    psi: &InfRepresentation<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    candidate_etas: &[DiscreteMeasure<T>],
) -> Result<OtInfRepCheck<T>> {
    if candidate_etas.is_empty() {
        return Err(invalid("candidate_etas", "needs at least one candidate"));
    }
    let rebuilt = eval_inf_rep(psi);
    if rebuilt.rows() != c.rows() || rebuilt.cols() != c.cols() {
        return Err(Error::DimensionMismatch {
            expected: c.rows(),
            found: rebuilt.rows(),
        });
    }
    let scale = T::one() + c.max_abs_finite();
    let worst = rebuilt
        .entries()
        .iter()
        .zip(c.entries().iter())
        .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
    if worst > lit::<T>(1e-12) * scale {
        return Err(invalid("psi", format!("does not represent c (deviation {worst})")));
    }
    let ot_value = exact_ot_bruteforce(c, mu, nu)?.value;
    let table = CostMatrix::new(psi.psi().clone())?;
    let uppers = candidate_etas
        .iter()
        .map(|eta| Ok(exact_ot_bruteforce(&table, mu, eta)?.value + exact_ot_bruteforce(&table, nu, eta)?.value))
        .collect::<Result<Vec<T>>>()?;
    let best_upper = uppers.iter().fold(T::infinity(), |m, v| m.min(*v));
    Ok(OtInfRepCheck {
        ot_value,
        best_upper,
        gap: best_upper - ot_value,
        uppers,
    })
}

/// Saddle value of the kernel Lagrangian at the point built from Sinkhorn potentials.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleCheck<T> {
    pub ot_value: T,
    pub lagrangian_value: T,
    pub stationarity_residual: T,
    /// `exp(max finite c / eps)`.
    pub m_bound: T,
}

impl<T: Real> SaddleCheck<T> {
    pub fn value_error(&self) -> T {
        (self.lagrangian_value - self.ot_value).abs() / (T::one() + self.ot_value.abs())
    }
}

/// Evaluates the Lagrangian at `mu* = e^{f/eps} mu`, `nu* = e^{g/eps} nu`,
/// `z* = (k_{mu*} + k_{nu*}) / 2`.
pub fn saddle_value_check<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    tol: T,
) -> Result<SaddleCheck<T>> {
    let k = gibbs_kernel(c, epsilon)?;
    let psd = is_psd(&k, lit(1e-9));
    if !psd.verdict {
        return Err(Error::NotPsd(psd.min_eigenvalue.to_f64().unwrap_or(f64::NAN)));
    }
    let sol = sinkhorn(c, mu, nu, epsilon, tol, DEFAULT_MAX_ITER)?;
    let weighted = |w: &Array1<T>, pot: &Array1<T>| -> Array1<T> {
        w.iter()
            .zip(pot.iter())
            .map(|(w, p)| {
                if *w > T::zero() {
                    *w * (*p / epsilon).exp()
                } else {
                    T::zero()
                }
            })
            .collect()
    };
    let mu_star = weighted(mu.weights(), &sol.f);
    let nu_star = weighted(nu.weights(), &sol.g);
    let half = lit::<T>(0.5);
    let z = (&mu_star + &nu_star).mapv(|v| v * half);
    let linear = |w: &Array1<T>, pot: &Array1<T>| -> T {
        w.iter()
            .zip(pot.iter())
            .filter(|(w, _)| **w > T::zero())
            .map(|(w, p)| *w * *p / epsilon)
            .sum()
    };
    let grams = mean_embedding_grams(&k, &mu_star, &nu_star)?;
    let to_mu = gram_norm2(&k, &(&z - &mu_star));
    let to_nu = gram_norm2(&k, &(&z - &nu_star));
    let bracket = linear(mu.weights(), &sol.f) + linear(nu.weights(), &sol.g) + to_mu + to_nu
        - half * grams.norm2_a
        - half * grams.norm2_b
        + T::one();
    let stationarity = z.mapv(|v| v * lit(4.0)) - mu_star.mapv(|v| v * lit(2.0)) - nu_star.mapv(|v| v * lit(2.0));
    let max_c = c.max_abs_finite();
    Ok(SaddleCheck {
        ot_value: sol.primal_value,
        lagrangian_value: epsilon * bracket,
        stationarity_residual: gram_norm2(&k, &stationarity).sqrt(),
        m_bound: (max_c / epsilon).exp(),
    })
}

/// Monte-Carlo log-sum-exp reconstruction of a negative definite cost.
#[derive(Clone, Debug, PartialEq)]
pub struct LseRoundtrip<T> {
    /// `max |k_hat / k - 1|` with `k = exp(-c / eps)`.
    pub max_relative_error: T,
    /// `max |k_hat - k| / stderr` (0 where the estimate is deterministic).
    pub max_standardized_error: T,
    /// `max |c_hat - c|`.
    pub max_cost_error: T,
    pub n_samples: usize,
    pub seed: u64,
}

/// Rebuilds `c` as the log-sum-exp cost of `-eps log rho` over Gaussian samples.
pub fn negdef_lse_roundtrip<T: Real>(
    c: &CostMatrix<T>,
    epsilon: T,
    n_samples: usize,
    seed: u64,
) -> Result<LseRoundtrip<T>> {
    let emb = embed_negative_definite(c)?;
    let log_rho = log_feature_samples(&emb, epsilon, n_samples, seed)?;
    let psi = InfRepresentation::new(log_rho.mapv(|v| -epsilon * v))?;
    let lambda = vec![T::one() / lit(n_samples as f64); n_samples];
    let c_hat = crate::kernels::lse_cost(&psi, &lambda, epsilon)?;
    let mc = gaussian_features_mc(&emb, epsilon, n_samples, seed)?;
    let n = c.rows();
    let mut rel = T::zero();
    let mut standardized = T::zero();
    let mut cost_err = T::zero();
    for i in 0..n {
        for j in 0..n {
            let k = (-*c.get(i, j) / epsilon).exp();
            let k_hat = (-*c_hat.get(i, j) / epsilon).exp();
            rel = rel.max((k_hat / k - T::one()).abs());
            cost_err = cost_err.max((*c_hat.get(i, j) - *c.get(i, j)).abs());
            let se = mc.stderr[[i, j]];
            if se > T::zero() {
                standardized = standardized.max((k_hat - k).abs() / se);
            }
        }
    }
    Ok(LseRoundtrip {
        max_relative_error: rel,
        max_standardized_error: standardized,
        max_cost_error: cost_err,
        n_samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn grid_points_row_major() {
        let g = UniformGrid::new(vec![0.0, 10.0], vec![1.0, 11.0], 1.0).unwrap();
        assert_eq!(g.points(), array![[0.0, 10.0], [0.0, 11.0], [1.0, 10.0], [1.0, 11.0]]);
        assert_eq!(g.cell_volume(), 1.0);
    }

    #[test]
    fn coverage_error() {
        let g = UniformGrid::new(vec![-1.0], vec![1.0], 0.01).unwrap();
        assert!(matches!(
            gaussian_identity_check(&[0.0], &[0.0], 1.0, &g),
            Err(Error::GridCoverage(_))
        ));
    }

    #[test]
    fn gaussian_identity_coincident_points() {
        let eps = 1.0_f64;
        let g = UniformGrid::covering(&[&[0.0]], eps, eps.sqrt() / 20.0).unwrap();
        let r = gaussian_identity_check(&[0.0], &[0.0], eps, &g).unwrap();
        assert!((r.lhs - (std::f64::consts::PI / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dirac_barycenter_is_gibbs() {
        let psi = InfRepresentation::new(array![[0.3, 1.0, 0.1, 2.0]]).unwrap();
        let lambda = DiscreteMeasure::probability(array![0.25, 0.25, 0.25, 0.25]).unwrap();
        let d = DiscreteMeasure::dirac(1, 0).unwrap();
        let eps = 0.7;
        let sol = barycenter_decompose(&psi, &lambda, &d, &d, eps, 1e-12, 100).unwrap();
        let w: Vec<f64> = psi
            .psi()
            .row(0)
            .iter()
            .map(|p| 0.25 * (-2.0_f64 * p / eps).exp())
            .collect();
        let z: f64 = w.iter().sum();
        for (a, b) in sol.eta.weights().iter().zip(&w) {
            assert!((a - b / z).abs() < 1e-12);
        }
        assert!((sol.value - (-eps * z.ln())).abs() < 1e-12);
        assert!(sol.identity_gap() < 1e-12);
    }
}
