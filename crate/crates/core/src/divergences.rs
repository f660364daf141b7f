//! Debiased divergences: Sinkhorn divergence, debiased unbalanced OT, exact
//! `epsilon = 0` divergence and squared MMD.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::Serialize;

use crate::costs::CostMatrix;
use crate::error::{Error, Result};
use crate::kernels::{embed_negative_definite, is_negative_definite};
use crate::measures::{dirichlet_weights, DiscreteMeasure};
use crate::random::rng_from_seed;
use crate::scalar::{lit, Real};
use crate::solvers::{exact_ot_bruteforce, sinkhorn, sinkhorn_symmetric, unbalanced_sinkhorn, DEFAULT_MAX_ITER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    Eps0,
    Entropic,
    Uot,
    Mmd,
}

impl DivergenceKind {
    pub fn name(self) -> &'static str {
        match self {
            DivergenceKind::Eps0 => "eps0",
            DivergenceKind::Entropic => "entropic",
            DivergenceKind::Uot => "uot",
            DivergenceKind::Mmd => "mmd",
        }
    }
}

/// `debiased = raw_xy - self_xx / 2 - self_yy / 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceReport<T> {
    pub kind: DivergenceKind,
    /// `+inf` for MMD.
    pub epsilon: T,
    pub rho: Option<T>,
    pub raw_xy: T,
    pub self_xx: T,
    pub self_yy: T,
    pub debiased: T,
    pub tol: Option<T>,
    pub seed: Option<u64>,
}

impl<T: Real> DivergenceReport<T> {
    pub fn new(kind: DivergenceKind, epsilon: T, raw_xy: T, self_xx: T, self_yy: T) -> Self {
        let half = lit::<T>(0.5);
        Self {
            kind,
            epsilon,
            rho: None,
            raw_xy,
            self_xx,
            self_yy,
            debiased: raw_xy - half * self_xx - half * self_yy,
            tol: None,
            seed: None,
        }
    }

    pub fn csv_header() -> [&'static str; 9] {
        [
            "kind", "epsilon", "rho", "raw_xy", "self_xx", "self_yy", "debiased", "tol", "seed",
        ]
    }

    /// One CSV record with 17 significant digits.
    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<T>| v.map(format_real).unwrap_or_default();
        vec![
            self.kind.name().to_string(),
            format_real(self.epsilon),
            opt(self.rho),
            format_real(self.raw_xy),
            format_real(self.self_xx),
            format_real(self.self_yy),
            format_real(self.debiased),
            opt(self.tol),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

/// Scientific notation with 17 significant digits; `inf`, `-inf`, `nan` otherwise.
pub fn format_real<T: Real>(v: T) -> String {
    let x = v.to_f64().unwrap_or(f64::NAN);
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// `S_eps(mu, nu)` with symmetric self-transport terms.
pub fn sinkhorn_divergence<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    tol: T,
) -> Result<DivergenceReport<T>> {
    let raw = sinkhorn(c, mu, nu, epsilon, tol, DEFAULT_MAX_ITER)?;
    let xx = sinkhorn_symmetric(c, mu, epsilon, tol, DEFAULT_MAX_ITER)?;
    let yy = sinkhorn_symmetric(c, nu, epsilon, tol, DEFAULT_MAX_ITER)?;
    let mut r = DivergenceReport::new(
        DivergenceKind::Entropic,
        epsilon,
        raw.primal_value,
        xx.primal_value,
        yy.primal_value,
    );
    r.tol = Some(tol);
    Ok(r)
}

/// Debiased unbalanced entropic OT.
pub fn debiased_uot<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    epsilon: T,
    rho: T,
    tol: T,
) -> Result<DivergenceReport<T>> {
    let solve = |a, b| unbalanced_sinkhorn(c, a, b, epsilon, rho, tol, DEFAULT_MAX_ITER).map(|s| s.value);
    let mut r = DivergenceReport::new(
        DivergenceKind::Uot,
        epsilon,
        solve(mu, nu)?,
        solve(mu, mu)?,
        solve(nu, nu)?,
    );
    r.rho = Some(rho);
    r.tol = Some(tol);
    Ok(r)
}

/// Unregularized divergence `S_0` from the exact oracle.
pub fn exact_ot_divergence<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<DivergenceReport<T>> {
    Ok(DivergenceReport::new(
        DivergenceKind::Eps0,
        T::zero(),
        exact_ot_bruteforce(c, mu, nu)?.value,
        exact_ot_bruteforce(c, mu, mu)?.value,
        exact_ot_bruteforce(c, nu, nu)?.value,
    ))
}

fn quadratic<T: Real>(c: &CostMatrix<T>, a: &Array1<T>, b: &Array1<T>) -> T {
    a.dot(&c.entries().dot(b))
}

fn require_finite_square<T: Real>(c: &CostMatrix<T>, n: usize) -> Result<()> {
    if c.rows() != n || c.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.rows(),
        });
    }
    if !c.is_finite() {
        return Err(Error::InvalidCost {
            row: 0,
            col: 0,
            reason: "MMD needs finite costs",
        });
    }
    Ok(())
}

/// `-(mu - nu)^T C (mu - nu) / 2`, reported through the `epsilon = inf` terms.
pub fn mmd_squared<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<DivergenceReport<T>> {
    require_finite_square(c, mu.len())?;
    require_finite_square(c, nu.len())?;
    let (a, b) = (mu.weights(), nu.weights());
    let mut r = DivergenceReport::new(
        DivergenceKind::Mmd,
        T::infinity(),
        quadratic(c, a, b),
        quadratic(c, a, a),
        quadratic(c, b, b),
    );
    let d = a - b;
    r.debiased = -lit::<T>(0.5) * quadratic(c, &d, &d);
    Ok(r)
}

/// MMD cross-checked against its feature-space form.
#[derive(Clone, Debug, PartialEq)]
pub struct MmdEmbeddingCheck<T> {
    pub mmd: T,
    /// `|m_mu - m_nu|^2` from the embedding.
    pub embedding_form: T,
    /// Inf-representation objective at the mean embedding of `(mu + nu) / 2`.
    pub psi_at_optimum: T,
    /// `ot_infinity(mu, nu)`.
    pub ot_infinity: T,
    /// Smallest `Psi(z) - Psi(z*)` over the perturbed points.
    pub min_perturbed_gap: T,
}

/// Evaluates `Psi(mu, z) + Psi(nu, z)` where
/// `Psi(mu, z) = sum mu_i (s_i + 2 |phi_i - z|^2)`.
fn psi_pair<T: Real>(emb: &crate::kernels::Embedding<T>, a: &Array1<T>, b: &Array1<T>, z: &Array1<T>) -> T {
    let two = lit::<T>(2.0);
    let side = |w: &Array1<T>| -> T {
        (0..emb.points())
            .map(|i| {
                let d2: T = emb
                    .features
                    .row(i)
                    .iter()
                    .zip(z.iter())
                    .map(|(p, q)| (*p - *q) * (*p - *q))
                    .sum();
                w[i] * (emb.offsets[i] + two * d2)
            })
            .sum()
    };
    side(a) + side(b)
}

/// Embedding cross-check of the MMD and of the minimizer of the
/// inf-representation at `epsilon = inf`.
pub fn mmd_embedding_check<T: Real>(
    c: &CostMatrix<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    n_perturb: usize,
    seed: u64,
) -> Result<MmdEmbeddingCheck<T>> {
    let mmd = mmd_squared(c, mu, nu)?.debiased;
    let emb = embed_negative_definite(c)?;
    let (a, b) = (mu.weights(), nu.weights());
    let ma = emb.mean_feature(a);
    let mb = emb.mean_feature(b);
    let embedding_form = (&ma - &mb).mapv(|v| v * v).sum();
    let z_star = (&ma + &mb).mapv(|v| v * lit(0.5));
    let psi_at_optimum = psi_pair(&emb, a, b, &z_star);
    let mut rng = rng_from_seed(seed);
    let mut min_gap = T::infinity();
    for _ in 0..n_perturb {
        let z: Array1<T> = z_star.mapv(|v| v + lit::<T>(rng.random_range(-0.5..0.5)));
        min_gap = min_gap.min(psi_pair(&emb, a, b, &z) - psi_at_optimum);
    }
    Ok(MmdEmbeddingCheck {
        mmd,
        embedding_form,
        psi_at_optimum,
        ot_infinity: crate::solvers::ot_infinity(c, mu, nu)?,
        min_perturbed_gap: min_gap,
    })
}

/// Measures with negative MMD built from a zero-sum witness.
#[derive(Clone, Debug, PartialEq)]
pub struct MmdCounterexample<T> {
    pub mu: DiscreteMeasure<T>,
    pub nu: DiscreteMeasure<T>,
    pub mmd: T,
}

/// Both directions of the negative definite / nonnegative MMD equivalence.
#[derive(Clone, Debug, PartialEq)]
pub struct NegDefMmdCertificate<T> {
    pub negative_definite: bool,
    pub trials: usize,
    /// Smallest MMD over the random trials (direction ⇐).
    pub min_trial_mmd: Option<T>,
    /// Constructed pair (direction ⇒).
    pub counterexample: Option<MmdCounterexample<T>>,
}

impl<T: Real> NegDefMmdCertificate<T> {
    pub fn consistent(&self, tol: T) -> bool {
        if self.negative_definite {
            self.min_trial_mmd.is_none_or(|m| m >= -tol)
        } else {
            self.counterexample.as_ref().is_some_and(|c| c.mmd < T::zero())
        }
    }
}

/// Splits a zero-sum vector into normalized positive and negative parts.
pub fn split_witness<T: Real>(a: &Array1<T>) -> Result<(DiscreteMeasure<T>, DiscreteMeasure<T>)> {
    let pos = a.mapv(|v| v.max(T::zero()));
    let neg = a.mapv(|v| (-v).max(T::zero()));
    let m = pos.sum().max(neg.sum());
    if m <= T::zero() {
        return Err(Error::InvalidMeasure("zero witness".into()));
    }
    let mu = DiscreteMeasure::new(pos)?.normalized()?;
    let nu = DiscreteMeasure::new(neg)?.normalized()?;
    Ok((mu, nu))
}

/// Runs random MMD trials when `c` is negative definite, and otherwise builds a
/// pair with negative MMD from the spectral witness.
pub fn negdef_iff_mmd_nonneg<T: Real>(
    c: &CostMatrix<T>,
    n_trials: usize,
    seed: u64,
) -> Result<NegDefMmdCertificate<T>> {
    let n = c.rows();
    require_finite_square(c, n)?;
    let tol = lit::<T>(1e-9) * (T::one() + c.max_abs_finite());
    let cert = is_negative_definite(c, tol)?;
    if cert.verdict {
        let mut rng = rng_from_seed(seed);
        let mut min: Option<T> = None;
        for _ in 0..n_trials {
            let mu = DiscreteMeasure::new(dirichlet_weights::<T, _>(n, &mut rng))?;
            let nu = DiscreteMeasure::new(dirichlet_weights::<T, _>(n, &mut rng))?;
            let v = mmd_squared(c, &mu, &nu)?.debiased;
            min = Some(min.map_or(v, |m: T| m.min(v)));
        }
        Ok(NegDefMmdCertificate {
            negative_definite: true,
            trials: n_trials,
            min_trial_mmd: min,
            counterexample: None,
        })
    } else {
        let (mu, nu) = split_witness(&cert.worst_vector)?;
        let mmd = mmd_squared(c, &mu, &nu)?.debiased;
        Ok(NegDefMmdCertificate {
            negative_definite: false,
            trials: 0,
            min_trial_mmd: None,
            counterexample: Some(MmdCounterexample { mu, nu, mmd }),
        })
    }
}

/// Squared MMD between every pair of Dirac masses.
pub fn dirac_mmd_matrix<T: Real>(c: &CostMatrix<T>) -> Result<Array2<T>> {
    let n = c.rows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = mmd_squared(c, &DiscreteMeasure::dirac(n, i)?, &DiscreteMeasure::dirac(n, j)?)?.debiased;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn report_identity() {
        let r = DivergenceReport::new(DivergenceKind::Entropic, 1.0, 3.0, 1.0, 2.0);
        assert_eq!(r.debiased, 1.5);
        assert_eq!(r.csv_record()[6], "1.5000000000000000e0");
    }

    #[test]
    fn two_dirac_mmd() {
        let c = CostMatrix::new(array![[0.0, 4.0], [4.0, 0.0]]).unwrap();
        let m = dirac_mmd_matrix(&c).unwrap();
        assert_eq!(m, array![[0.0, 4.0], [4.0, 0.0]]);
    }

    #[test]
    fn zero_cost_mmd() {
        let c = CostMatrix::new(Array2::<f64>::zeros((3, 3))).unwrap();
        let cert = negdef_iff_mmd_nonneg(&c, 20, 1).unwrap();
        assert!(cert.negative_definite);
        assert_eq!(cert.min_trial_mmd, Some(0.0));
    }
}
