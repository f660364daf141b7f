//! Entropic OT solvers (balanced, symmetric, unbalanced), exact oracles at
//! `epsilon = 0`, the `epsilon = inf` bilinear cost and a 2×2 scalar oracle.

use itertools::Itertools;
use ndarray::{Array1, Array2};

use crate::costs::CostMatrix;
use crate::error::{invalid, Error, Result};
use crate::kernels::check_epsilon;
use crate::measures::DiscreteMeasure;
use crate::numeric::{ln0, logsumexp, xlogxy};
use crate::scalar::{lit, Real};

/// Default iteration cap for the iterative solvers.
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Converged entropic OT solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SinkhornSolution<T> {
    pub f: Array1<T>,
    pub g: Array1<T>,
    pub plan: Array2<T>,
    /// `sum c pi + epsilon KL(pi | mu ⊗ nu)`.
    pub primal_value: T,
    /// `sum f mu + sum g nu - epsilon (sum pi - 1)`.
    pub dual_value: T,
    pub iterations: usize,
    /// L1 violation of both marginals.
    pub marginal_error: T,
    pub epsilon: T,
}

impl<T: Real> SinkhornSolution<T> {
    pub fn duality_gap(&self) -> T {
        self.primal_value - self.dual_value
    }
}

struct Problem<'a, T> {
    c: &'a Array2<T>,
    log_mu: Vec<T>,
    log_nu: Vec<T>,
    mu: &'a Array1<T>,
    nu: &'a Array1<T>,
    epsilon: T,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(c: &'a CostMatrix<T>, mu: &'a DiscreteMeasure<T>, nu: &'a DiscreteMeasure<T>, epsilon: T) -> Result<Self> {
        check_epsilon(epsilon)?;
        if c.rows() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: c.rows(),
                found: mu.len(),
            });
        }
        if c.cols() != nu.len() {
            return Err(Error::DimensionMismatch {
                expected: c.cols(),
                found: nu.len(),
            });
        }
        let p = Self {
            c: c.entries(),
            log_mu: mu.weights().iter().map(|w| ln0(*w)).collect(),
            log_nu: nu.weights().iter().map(|w| ln0(*w)).collect(),
            mu: mu.weights(),
            nu: nu.weights(),
            epsilon,
        };
        p.check_feasible()?;
        Ok(p)
    }

    fn check_feasible(&self) -> Result<()> {
        let (n, m) = self.c.dim();
        for i in (0..n).filter(|&i| self.mu[i] > T::zero()) {
            if !(0..m).any(|j| self.nu[j] > T::zero() && self.c[[i, j]].is_finite()) {
                return Err(Error::Infeasible {
                    side: "first",
                    index: i,
                });
            }
        }
        for j in (0..m).filter(|&j| self.nu[j] > T::zero()) {
            if !(0..n).any(|i| self.mu[i] > T::zero() && self.c[[i, j]].is_finite()) {
                return Err(Error::Infeasible {
                    side: "second",
                    index: j,
                });
            }
        }
        Ok(())
    }

    /// `-epsilon log sum_j nu_j exp((g_j - c_ij)/epsilon)` for every row.
    fn softmin_rows(&self, g: &Array1<T>) -> Array1<T> {
        let eps = self.epsilon;
        (0..self.c.nrows())
            .map(|i| {
                let terms = (0..self.c.ncols())
                    .filter(|&j| self.log_nu[j] > T::neg_infinity() && self.c[[i, j]].is_finite())
                    .map(|j| self.log_nu[j] + (g[j] - self.c[[i, j]]) / eps);
                -eps * logsumexp(terms)
            })
            .collect()
    }

    fn softmin_cols(&self, f: &Array1<T>) -> Array1<T> {
        let eps = self.epsilon;
        (0..self.c.ncols())
            .map(|j| {
                let terms = (0..self.c.nrows())
                    .filter(|&i| self.log_mu[i] > T::neg_infinity() && self.c[[i, j]].is_finite())
                    .map(|i| self.log_mu[i] + (f[i] - self.c[[i, j]]) / eps);
                -eps * logsumexp(terms)
            })
            .collect()
    }

    fn log_ratio(&self, f: &Array1<T>, g: &Array1<T>, i: usize, j: usize) -> Option<T> {
        (self.mu[i] > T::zero() && self.nu[j] > T::zero() && self.c[[i, j]].is_finite())
            .then(|| (f[i] + g[j] - self.c[[i, j]]) / self.epsilon)
    }

    fn plan(&self, f: &Array1<T>, g: &Array1<T>) -> Array2<T> {
        Array2::from_shape_fn(self.c.dim(), |(i, j)| {
            self.log_ratio(f, g, i, j)
                .map_or(T::zero(), |lr| (lr + self.log_mu[i] + self.log_nu[j]).exp())
        })
    }

    fn marginal_errors(&self, plan: &Array2<T>) -> (T, T) {
        let rows: T = plan
            .rows()
            .into_iter()
            .zip(self.mu.iter())
            .map(|(r, m)| (r.sum() - *m).abs())
            .sum();
        let cols: T = plan
            .columns()
            .into_iter()
            .zip(self.nu.iter())
            .map(|(c, n)| (c.sum() - *n).abs())
            .sum();
        (rows, cols)
    }

    fn weighted_sum(w: &Array1<T>, pot: &Array1<T>) -> T {
        w.iter()
            .zip(pot.iter())
            .filter(|(w, _)| **w > T::zero())
            .map(|(w, p)| *w * *p)
            .sum()
    }

    fn finish(&self, mut f: Array1<T>, mut g: Array1<T>, iterations: usize, normalize: bool) -> SinkhornSolution<T> {
        if normalize {
            let shift = (Self::weighted_sum(self.mu, &f) - Self::weighted_sum(self.nu, &g)) * lit(0.5);
            f.mapv_inplace(|v| v - shift);
            g.mapv_inplace(|v| v + shift);
        }
        let plan = self.plan(&f, &g);
        let (re, ce) = self.marginal_errors(&plan);
        let mut transport = T::zero();
        let mut entropy = T::zero();
        for ((i, j), p) in plan.indexed_iter() {
            if *p > T::zero() {
                transport += *p * self.c[[i, j]];
                entropy += *p * self.log_ratio(&f, &g, i, j).expect("positive plan entry");
            }
        }
        let eps = self.epsilon;
        let mass = plan.sum();
        SinkhornSolution {
            primal_value: transport + eps * entropy,
            dual_value: Self::weighted_sum(self.mu, &f) + Self::weighted_sum(self.nu, &g) - eps * (mass - T::one()),
            f,
            g,
            plan,
            iterations,
            marginal_error: re + ce,
            epsilon: eps,
        }
    }
}

fn check_tol<T: Real>(tol: T) -> Result<()> {
    if tol > T::zero() {
        Ok(())
    } else {
        Err(invalid("tol", format!("must be positive, got {tol}")))
    }
}

/// Log-domain Sinkhorn iterations until the L1 marginal error is at most `tol`.
pub fn sinkhorn<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    tol: T,
    max_iter: usize,
) -> Result<SinkhornSolution<T>> {
    sinkhorn_warm(c, mu, nu, epsilon, tol, max_iter, None)
}

/// [`sinkhorn`] started from a given second potential.
pub fn sinkhorn_warm<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    tol: T,
    max_iter: usize,
    g0: Option<&Array1<T>>,
) -> Result<SinkhornSolution<T>> {
    mu.require_probability("mu")?;
    nu.require_probability("nu")?;
    check_tol(tol)?;
    let p = Problem::new(c, mu, nu, epsilon)?;
    let mut g = match g0 {
        Some(g0) if g0.len() == nu.len() && g0.iter().all(|v| v.is_finite()) => g0.clone(),
        _ => Array1::zeros(nu.len()),
    };
    let mut err = T::infinity();
    for it in 1..=max_iter {
        let f = p.softmin_rows(&g);
        g = p.softmin_cols(&f);
        let plan = p.plan(&f, &g);
        let (re, ce) = p.marginal_errors(&plan);
        err = re + ce;
        if err <= tol {
            return Ok(p.finish(f, g, it, true));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: err.to_f64().unwrap_or(f64::NAN),
    })
}

/// Self-transport with a single potential and the damped update
/// `f <- (f + T(f)) / 2`.
pub fn sinkhorn_symmetric<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    epsilon: T,
    tol: T,
    max_iter: usize,
) -> Result<SinkhornSolution<T>> {
    c.require_symmetric()?;
    mu.require_probability("mu")?;
    check_tol(tol)?;
    let p = Problem::new(c, mu, mu, epsilon)?;
    let half = lit::<T>(0.5);
    let mut f = Array1::zeros(mu.len());
    let mut err = T::infinity();
    for it in 1..=max_iter {
        let tf = p.softmin_rows(&f);
        f = f
            .iter()
            .zip(tf.iter())
            .map(|(a, b)| if b.is_infinite() { *b } else { (*a + *b) * half })
            .collect();
        let plan = p.plan(&f, &f);
        let (re, ce) = p.marginal_errors(&plan);
        err = re + ce;
        if err <= tol {
            return Ok(p.finish(f.clone(), f, it, false));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: err.to_f64().unwrap_or(f64::NAN),
    })
}

/// Unbalanced entropic OT restricted to probability plans.
#[derive(Clone, Debug, PartialEq)]
pub struct UnbalancedSolution<T> {
    pub f: Array1<T>,
    pub g: Array1<T>,
    /// Optimal probability plan.
    pub plan: Array2<T>,
    /// `sum c p + rho KL(p_1|mu) + rho KL(p_2|nu) + epsilon KL(p|mu ⊗ nu)`.
    pub value: T,
    /// Mass of the unnormalized scaling plan.
    pub mass: T,
    /// `(|p_1 - mu|_1, |p_2 - nu|_1)`.
    pub marginal_defects: (T, T),
    pub iterations: usize,
    pub residual: T,
    /// Dual objective after every iteration; non-decreasing.
    pub dual_trace: Vec<T>,
}

/// Objective of the unbalanced problem for a probability plan.
pub fn unbalanced_objective<T: Real>(
    c: &CostMatrix<T>,
    plan: &Array2<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    rho: T,
) -> T {
    let p1: Vec<T> = plan.rows().into_iter().map(|r| r.sum()).collect();
    let p2: Vec<T> = plan.columns().into_iter().map(|c| c.sum()).collect();
    let kl = |a: &[T], b: &Array1<T>| a.iter().zip(b.iter()).map(|(x, y)| xlogxy(*x, *y)).sum::<T>();
    let mut transport = T::zero();
    let mut entropy = T::zero();
    for ((i, j), p) in plan.indexed_iter() {
        if *p > T::zero() {
            transport += *p * *c.get(i, j);
            entropy += xlogxy(*p, mu.weight(i) * nu.weight(j));
        }
    }
    transport + rho * (kl(&p1, mu.weights()) + kl(&p2, nu.weights())) + epsilon * entropy
}

/// Scaling iterations for KL-penalized marginals; the optimal plan of the
/// mass-free problem is the normalized scaling plan.
pub fn unbalanced_sinkhorn<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    rho: T,
    tol: T,
    max_iter: usize,
) -> Result<UnbalancedSolution<T>> {
    if !(rho > T::zero() && rho.is_finite()) {
        return Err(invalid("rho", format!("must be positive and finite, got {rho}")));
    }
    check_tol(tol)?;
    for (m, name) in [(mu, "mu"), (nu, "nu")] {
        if m.total_mass() <= T::zero() {
            return Err(Error::InvalidMeasure(format!("{name} has zero mass")));
        }
    }
    let p = Problem::new(c, mu, nu, epsilon)?;
    let tau = rho / (rho + epsilon);
    let mut g: Array1<T> = Array1::zeros(nu.len());
    let mut f: Array1<T>;
    let mut trace = Vec::new();
    let mut residual = T::infinity();
    for it in 1..=max_iter {
        f = p.softmin_rows(&g).mapv(|v| tau * v);
        g = p.softmin_cols(&f).mapv(|v| tau * v);
        let plan = p.plan(&f, &g);
        let target = |w: &Array1<T>, pot: &Array1<T>, k: usize| {
            if w[k] > T::zero() {
                w[k] * (-pot[k] / rho).exp()
            } else {
                T::zero()
            }
        };
        let r1: T = plan
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (r.sum() - target(mu.weights(), &f, i)).abs())
            .sum();
        let r2: T = plan
            .columns()
            .into_iter()
            .enumerate()
            .map(|(j, col)| (col.sum() - target(nu.weights(), &g, j)).abs())
            .sum();
        residual = r1 + r2;
        let mass = plan.sum();
        let dual = rho
            * (0..mu.len())
                .map(|i| mu.weight(i) - target(mu.weights(), &f, i))
                .sum::<T>()
            + rho
                * (0..nu.len())
                    .map(|j| nu.weight(j) - target(nu.weights(), &g, j))
                    .sum::<T>()
            - epsilon * (mass - mu.total_mass() * nu.total_mass());
        trace.push(dual);
        if residual <= tol {
            let plan = plan.mapv(|v| v / mass);
            let value = unbalanced_objective(c, &plan, mu, nu, epsilon, rho);
            let d1 = plan
                .rows()
                .into_iter()
                .zip(mu.weights().iter())
                .map(|(r, m)| (r.sum() - *m).abs())
                .sum();
            let d2 = plan
                .columns()
                .into_iter()
                .zip(nu.weights().iter())
                .map(|(col, n)| (col.sum() - *n).abs())
                .sum();
            return Ok(UnbalancedSolution {
                f,
                g,
                plan,
                value,
                mass,
                marginal_defects: (d1, d2),
                iterations: it,
                residual,
                dual_trace: trace,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Which closed form produced an exact solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactMethod {
    Permutations,
    MonotoneRearrangement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactOtSolution<T> {
    pub value: T,
    pub plan: Array2<T>,
    pub method: ExactMethod,
}

fn is_uniform<T: Real>(m: &DiscreteMeasure<T>) -> bool {
    let w0 = m.weight(0);
    w0 > T::zero() && m.weights().iter().all(|w| (*w - w0).abs() <= T::epsilon() * w0)
}

/// Exact unregularized OT on small uniform instances or 1-D Monge instances.
pub fn exact_ot_bruteforce<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<ExactOtSolution<T>> {
    if c.rows() != mu.len() || c.cols() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: c.rows() * c.cols(),
            found: mu.len() * nu.len(),
        });
    }
    let n = mu.len();
    if n == nu.len() && n <= 8 && is_uniform(mu) && is_uniform(nu) {
        return Ok(permutation_ot(c, mu));
    }
    monotone_ot(c, mu, nu)
}

fn plan_value<T: Real>(c: &CostMatrix<T>, plan: &Array2<T>) -> T {
    plan.indexed_iter()
        .filter(|(_, p)| **p > T::zero())
        .map(|((i, j), p)| *p * *c.get(i, j))
        .sum()
}

fn permutation_ot<T: Real>(c: &CostMatrix<T>, mu: &DiscreteMeasure<T>) -> ExactOtSolution<T> {
    let n = mu.len();
    let mut best: Option<(T, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let v: T = perm.iter().enumerate().map(|(i, &j)| *c.get(i, j)).sum();
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, perm));
        }
    }
    let (_, perm) = best.expect("n >= 1");
    let mut plan = Array2::zeros((n, n));
    for (i, &j) in perm.iter().enumerate() {
        plan[[i, j]] = mu.weight(i);
    }
    ExactOtSolution {
        value: plan_value(c, &plan),
        plan,
        method: ExactMethod::Permutations,
    }
}

fn sorted_by_coordinate<T: Real>(m: &DiscreteMeasure<T>) -> Result<Vec<usize>> {
    let coords = m
        .coordinates()
        .filter(|x| x.ncols() == 1)
        .ok_or_else(|| Error::UnsupportedInstance("needs uniform n <= 8 or 1-D coordinates".into()))?;
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| coords[[a, 0]].partial_cmp(&coords[[b, 0]]).expect("finite coordinates"));
    Ok(idx)
}

fn monotone_ot<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<ExactOtSolution<T>> {
    let rows = sorted_by_coordinate(mu)?;
    let cols = sorted_by_coordinate(nu)?;
    if !c.is_finite() {
        return Err(Error::UnsupportedInstance(
            "monotone rearrangement needs finite costs".into(),
        ));
    }
    if (mu.total_mass() - nu.total_mass()).abs() > lit::<T>(1e-12) {
        return Err(Error::UnsupportedInstance("unequal masses".into()));
    }
    let slack = lit::<T>(1e-12) * (T::one() + c.max_abs_finite());
    for a in 0..rows.len().saturating_sub(1) {
        for b in 0..cols.len().saturating_sub(1) {
            let (i, i2, j, j2) = (rows[a], rows[a + 1], cols[b], cols[b + 1]);
            let lhs = *c.get(i, j) + *c.get(i2, j2);
            let rhs = *c.get(i, j2) + *c.get(i2, j);
            if lhs > rhs + slack {
                return Err(Error::UnsupportedInstance(
                    "cost is not a convex function of the 1-D displacement".into(),
                ));
            }
        }
    }
    let a: Vec<T> = rows.iter().map(|&i| mu.weight(i)).collect();
    let b: Vec<T> = cols.iter().map(|&j| nu.weight(j)).collect();
    let sorted = crate::measures::north_west_corner(&a, &b);
    let mut plan = Array2::zeros((mu.len(), nu.len()));
    for ((r, s), v) in sorted.indexed_iter() {
        plan[[rows[r], cols[s]]] = *v;
    }
    Ok(ExactOtSolution {
        value: plan_value(c, &plan),
        plan,
        method: ExactMethod::MonotoneRearrangement,
    })
}

/// `sum_ij c(i,j) mu_i nu_j`; `+inf` when an infinite cost carries mass.
pub fn ot_infinity<T: Real>(c: &CostMatrix<T>, mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> Result<T> {
    if c.rows() != mu.len() || c.cols() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: c.rows() * c.cols(),
            found: mu.len() * nu.len(),
        });
    }
    let mut acc = T::zero();
    for ((i, j), v) in c.entries().indexed_iter() {
        let w = mu.weight(i) * nu.weight(j);
        if w > T::zero() {
            acc += w * *v;
        }
    }
    Ok(acc)
}

/// Entropic objective `sum c pi + epsilon KL(pi | mu ⊗ nu)` of a given plan.
pub fn eot_objective<T: Real>(
    c: &CostMatrix<T>,
    plan: &Array2<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
) -> T {
    let mut acc = T::zero();
    for ((i, j), p) in plan.indexed_iter() {
        if *p > T::zero() {
            acc += *p * *c.get(i, j) + epsilon * xlogxy(*p, mu.weight(i) * nu.weight(j));
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarOracle<T> {
    pub value: T,
    /// Mass on the `(0, 0)` entry.
    pub t: T,
}

/// Golden-section search over the one-parameter family of 2×2 couplings.
pub fn eot_scalar_oracle<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
) -> Result<ScalarOracle<T>> {
    check_epsilon(epsilon)?;
    if c.rows() != 2 || c.cols() != 2 || mu.len() != 2 || nu.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: c.rows().max(c.cols()).max(mu.len()).max(nu.len()),
        });
    }
    let (m1, n1) = (mu.weight(0), nu.weight(0));
    let plan = |t: T| ndarray::array![[t, m1 - t], [n1 - t, T::one() - m1 - n1 + t]];
    let h = |t: T| eot_objective(c, &plan(t).mapv(|v| v.max(T::zero())), mu, nu, epsilon);
    let mut lo = (m1 + n1 - T::one()).max(T::zero());
    let mut hi = m1.min(n1);
    let ratio = lit::<T>((5f64.sqrt() - 1.0) / 2.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut h1, mut h2) = (h(x1), h(x2));
    let target = lit::<T>(1e-10);
    for _ in 0..500 {
        if hi - lo <= target {
            break;
        }
        if h1 <= h2 {
            hi = x2;
            x2 = x1;
            h2 = h1;
            x1 = hi - ratio * (hi - lo);
            h1 = h(x1);
        } else {
            lo = x1;
            x1 = x2;
            h1 = h2;
            x2 = lo + ratio * (hi - lo);
            h2 = h(x2);
        }
    }
    let t = (lo + hi) * lit(0.5);
    Ok(ScalarOracle { value: h(t), t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::counterexample_cost;
    use ndarray::array;

    fn measure(w: &[f64]) -> DiscreteMeasure<f64> {
        DiscreteMeasure::probability(Array1::from(w.to_vec())).unwrap()
    }

    #[test]
    fn zero_cost_gives_product() {
        let c = CostMatrix::new(Array2::<f64>::zeros((2, 3))).unwrap();
        let mu = measure(&[0.4, 0.6]);
        let nu = measure(&[0.2, 0.3, 0.5]);
        let s = sinkhorn(&c, &mu, &nu, 1.0, 1e-12, 100).unwrap();
        assert!(s.primal_value.abs() < 1e-14);
        assert!(s.f.iter().chain(s.g.iter()).all(|v| v.abs() < 1e-14));
        assert!((s.plan[[1, 2]] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn counterexample_values() {
        let c = counterexample_cost::<f64>();
        let mu = measure(&[0.5, 0.5, 0.0]);
        let nu = measure(&[0.0, 0.0, 1.0]);
        let s = sinkhorn(&c, &mu, &nu, 1.0, 1e-12, 1000).unwrap();
        assert!(s.primal_value.abs() < 1e-12);
        let sym = sinkhorn_symmetric(&c, &mu, 1.0, 1e-12, 10_000).unwrap();
        assert!(sym.primal_value > 1e-3);
    }

    #[test]
    fn two_by_two_against_oracle() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let mu = measure(&[0.5, 0.5]);
        let s = sinkhorn(&c, &mu, &mu, 1.0, 1e-13, 1000).unwrap();
        let o = eot_scalar_oracle(&c, &mu, &mu, 1.0).unwrap();
        assert!((s.primal_value - o.value).abs() < 1e-9);
    }

    #[test]
    fn ot_infinity_example() {
        let c = CostMatrix::new(array![[0.0, 2.0], [2.0, 0.0]]).unwrap();
        let mu = measure(&[0.5, 0.5]);
        assert_eq!(ot_infinity(&c, &mu, &mu).unwrap(), 1.0);
        let inf = CostMatrix::new(array![[0.0, f64::INFINITY], [f64::INFINITY, 0.0]]).unwrap();
        assert_eq!(ot_infinity(&inf, &mu, &mu).unwrap(), f64::INFINITY);
    }

    #[test]
    fn exact_single_point() {
        let c = CostMatrix::new(array![[2.5]]).unwrap();
        let mu = measure(&[1.0]);
        let s = exact_ot_bruteforce(&c, &mu, &mu).unwrap();
        assert_eq!(s.value, 2.5);
    }

    #[test]
    fn exact_unsupported() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let mu = measure(&[0.3, 0.7]);
        assert!(matches!(
            exact_ot_bruteforce(&c, &mu, &mu),
            Err(Error::UnsupportedInstance(_))
        ));
    }

    #[test]
    fn infeasible_support() {
        let inf = f64::INFINITY;
        let c = CostMatrix::new(array![[inf, inf], [0.0, 0.0]]).unwrap();
        let mu = measure(&[0.5, 0.5]);
        assert!(matches!(
            sinkhorn(&c, &mu, &mu, 1.0, 1e-9, 10),
            Err(Error::Infeasible {
                side: "first",
                index: 0
            })
        ));
    }

    #[test]
    fn max_iter_error_carries_residual() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let mu = measure(&[0.5, 0.5]);
        let nu = measure(&[0.1, 0.9]);
        match sinkhorn(&c, &mu, &nu, 0.01, 1e-15, 1) {
            Err(Error::NotConverged {
                iterations: 1,
                residual,
            }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unbalanced_zero_cost() {
        let c = CostMatrix::new(Array2::<f64>::zeros((3, 3))).unwrap();
        let mu = DiscreteMeasure::new(array![0.2, 0.5, 0.9]).unwrap();
        let s = unbalanced_sinkhorn(&c, &mu, &mu, 1.0, 1.0, 1e-12, 10_000).unwrap();
        let p = mu.normalized().unwrap();
        for ((i, j), v) in s.plan.indexed_iter() {
            assert!((v - p.weight(i) * p.weight(j)).abs() < 1e-12);
        }
    }
}
