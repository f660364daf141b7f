//! Gibbs kernels, psd and negative-definiteness certificates, Hilbert embeddings
//! of negative definite costs, Gaussian random features and log-sum-exp costs.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::costs::{is_debiasable, CostMatrix, InfRepresentation};
use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigen, zero_sum_basis};
use crate::numeric::logsumexp;
use crate::scalar::{lit, Real};

/// Symmetric matrix with nonnegative entries.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix<T> {
    entries: Array2<T>,
    epsilon: Option<T>,
}

impl<T: Real> KernelMatrix<T> {
    pub fn new(entries: Array2<T>, epsilon: Option<T>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.ncols(),
            });
        }
        for ((row, col), v) in entries.indexed_iter() {
            if !(v.is_finite() && *v >= T::zero()) {
                return Err(Error::InvalidCost {
                    row,
                    col,
                    reason: "kernel entries must be finite and nonnegative",
                });
            }
            if entries[[col, row]] != *v {
                return Err(Error::NotSymmetric { row, col });
            }
        }
        Ok(Self { entries, epsilon })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    pub fn epsilon(&self) -> Option<T> {
        self.epsilon
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[[i, j]]
    }
}

pub(crate) fn check_epsilon<T: Real>(epsilon: T) -> Result<()> {
    if epsilon > T::zero() && epsilon.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            "epsilon",
            format!("must be positive and finite, got {epsilon}"),
        ))
    }
}

/// `exp(-c / epsilon)`; `+inf` costs map to exactly zero.
pub fn gibbs_kernel<T: Real>(c: &CostMatrix<T>, epsilon: T) -> Result<KernelMatrix<T>> {
    check_epsilon(epsilon)?;
    c.require_symmetric()?;
    KernelMatrix::new(c.entries().mapv(|v| (-v / epsilon).exp()), Some(epsilon))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsdCertificate<T> {
    pub verdict: bool,
    pub min_eigenvalue: T,
}

/// Smallest eigenvalue test.
pub fn is_psd<T: Real>(k: &KernelMatrix<T>, tol: T) -> PsdCertificate<T> {
    let (vals, _) = symmetric_eigen(k.entries());
    let min_eigenvalue = vals[0];
    PsdCertificate {
        verdict: min_eigenvalue >= -tol,
        min_eigenvalue,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NegDefCertificate<T> {
    pub verdict: bool,
    /// Unit zero-sum vector maximizing `a^T C a`.
    pub worst_vector: Array1<T>,
    pub quadratic_value: T,
}

/// Largest eigenvalue of `C` restricted to zero-sum vectors.
pub fn is_negative_definite<T: Real>(c: &CostMatrix<T>, tol: T) -> Result<NegDefCertificate<T>> {
    c.require_symmetric()?;
    if let Some(((row, col), _)) = c.entries().indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidCost {
            row,
            col,
            reason: "negative definiteness needs finite entries",
        });
    }
    let n = c.rows();
    if n == 1 {
        return Ok(NegDefCertificate {
            verdict: true,
            worst_vector: Array1::zeros(1),
            quadratic_value: T::zero(),
        });
    }
    let q = zero_sum_basis::<T>(n);
    let restricted = q.t().dot(c.entries()).dot(&q);
    let sym = (&restricted + &restricted.t()) * lit::<T>(0.5);
    let (vals, vecs) = symmetric_eigen(&sym);
    let top = vals.len() - 1;
    let worst_vector = q.dot(&vecs.column(top));
    let quadratic_value = worst_vector.dot(&c.entries().dot(&worst_vector));
    Ok(NegDefCertificate {
        verdict: vals[top] <= tol,
        worst_vector,
        quadratic_value,
    })
}

/// Features `phi` and offsets `s` with `c(i,j) = s_i + s_j + |phi_i - phi_j|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<T> {
    pub features: Array2<T>,
    pub offsets: Array1<T>,
    /// Most negative Gram eigenvalue clipped to zero (0 when none was).
    pub psd_residual: T,
}

impl<T: Real> Embedding<T> {
    pub fn points(&self) -> usize {
        self.features.nrows()
    }

    pub fn rank(&self) -> usize {
        self.features.ncols()
    }

    pub fn squared_feature_distance(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.features.row(i), self.features.row(j));
        a.iter().zip(b.iter()).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
    }

    pub fn reconstruct(&self) -> Array2<T> {
        let n = self.points();
        Array2::from_shape_fn((n, n), |(i, j)| {
            self.offsets[i] + self.offsets[j] + self.squared_feature_distance(i, j)
        })
    }

    /// Largest entrywise deviation of the reconstruction from `c`.
    pub fn reconstruction_error(&self, c: &CostMatrix<T>) -> T {
        self.reconstruct()
            .iter()
            .zip(c.entries().iter())
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    /// Feature-space mean `sum_i w_i phi_i`.
    pub fn mean_feature(&self, weights: &Array1<T>) -> Array1<T> {
        weights.dot(&self.features)
    }
}

/// Classical multidimensional scaling of `c - s_i - s_j` around the first point.
///
/// Features are re-centered at their centroid, which leaves pairwise distances
/// unchanged.
pub fn embed_negative_definite<T: Real>(c: &CostMatrix<T>) -> Result<Embedding<T>> {
    c.require_symmetric()?;
    if let Some(((row, col), _)) = c.entries().indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidCost {
            row,
            col,
            reason: "embedding needs finite entries",
        });
    }
    let n = c.rows();
    let half = lit::<T>(0.5);
    let offsets: Array1<T> = (0..n).map(|i| *c.get(i, i) * half).collect();
    let d = Array2::from_shape_fn((n, n), |(i, j)| *c.get(i, j) - offsets[i] - offsets[j]);
    let gram = Array2::from_shape_fn((n, n), |(i, j)| half * (d[[i, 0]] + d[[j, 0]] - d[[i, j]]));
    let (vals, vecs) = symmetric_eigen(&gram);
    let largest = vals[n - 1].max(T::zero());
    let psd_residual = vals[0].min(T::zero());
    if psd_residual < -lit::<T>(1e-6) * largest || (largest == T::zero() && psd_residual < -lit::<T>(1e-12)) {
        return Err(Error::NotNegativeDefinite {
            clipped: psd_residual.to_f64().unwrap_or(f64::NAN),
            largest: largest.to_f64().unwrap_or(f64::NAN),
        });
    }
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > largest * lit::<T>(1e-14)).collect();
    let mut features = Array2::from_shape_fn((n, keep.len()), |(i, r)| vecs[[i, keep[r]]] * vals[keep[r]].sqrt());
    if !keep.is_empty() {
        let centroid = features.mean_axis(Axis(0)).expect("nonempty");
        features -= &centroid;
    }
    Ok(Embedding {
        features,
        offsets,
        psd_residual,
    })
}

/// Monte-Carlo kernel estimate with per-entry standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct McKernelEstimate<T> {
    pub estimate: Array2<T>,
    pub stderr: Array2<T>,
    pub n_samples: usize,
    pub seed: u64,
}

/// Samples per independently seeded stream.
pub const MC_CHUNK: usize = 4096;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be positive"));
    }
    Ok(())
}

/// Fills `out` (points × samples) with `log rho(i, z_s)` for the samples of one chunk.
fn log_rho_chunk<T: Real>(e: &Embedding<T>, epsilon: T, seed: u64, chunk: usize, len: usize) -> Array2<T> {
    let n = e.points();
    let r = e.rank();
    let scale = (lit::<T>(2.0) / epsilon).sqrt();
    let base: Vec<T> = (0..n)
        .map(|i| {
            let norm2: T = e.features.row(i).iter().map(|v| *v * *v).sum();
            -(lit::<T>(2.0) / epsilon) * norm2 - e.offsets[i] / epsilon
        })
        .collect();
    let mut rng = chunk_rng(seed, chunk);
    let mut out = Array2::zeros((n, len));
    let mut z = vec![T::zero(); r];
    for s in 0..len {
        for zk in z.iter_mut() {
            let v: f64 = StandardNormal.sample(&mut rng);
            *zk = lit(v);
        }
        for i in 0..n {
            let dot: T = e.features.row(i).iter().zip(&z).map(|(p, q)| *p * *q).sum();
            out[[i, s]] = scale * dot + base[i];
        }
    }
    out
}

fn chunks(n_samples: usize) -> Vec<(usize, usize)> {
    (0..n_samples.div_ceil(MC_CHUNK))
        .map(|c| (c, MC_CHUNK.min(n_samples - c * MC_CHUNK)))
        .collect()
}

/// `log rho(i, z_s)` for all points and samples, streamed chunk by chunk.
pub fn log_feature_samples<T: Real>(e: &Embedding<T>, epsilon: T, n_samples: usize, seed: u64) -> Result<Array2<T>> {
    check_epsilon(epsilon)?;
    check_samples(n_samples)?;
    let parts: Vec<Array2<T>> = chunks(n_samples)
        .into_par_iter()
        .map(|(c, len)| log_rho_chunk(e, epsilon, seed, c, len))
        .collect();
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(ndarray::concatenate(Axis(1), &views).expect("matching rows"))
}

/// Sample mean of `rho(i,z) rho(j,z)` over Gaussian `z`, whose expectation is
/// `exp(-c(i,j)/epsilon)`.
pub fn gaussian_features_mc<T: Real>(
    e: &Embedding<T>,
    epsilon: T,
    n_samples: usize,
    seed: u64,
) -> Result<McKernelEstimate<T>> {
    check_epsilon(epsilon)?;
    check_samples(n_samples)?;
    let n = e.points();
    // per chunk: (count, mean, M2)
    let stats: Vec<(T, Array2<T>, Array2<T>)> = chunks(n_samples)
        .into_par_iter()
        .map(|(c, len)| {
            let rho = log_rho_chunk(e, epsilon, seed, c, len).mapv(|v| v.exp());
            let mut s1 = Array2::<T>::zeros((n, n));
            let mut s2 = Array2::<T>::zeros((n, n));
            for s in 0..len {
                for i in 0..n {
                    for j in i..n {
                        let p = rho[[i, s]] * rho[[j, s]];
                        s1[[i, j]] += p;
                        s2[[i, j]] += p * p;
                    }
                }
            }
            let count = lit::<T>(len as f64);
            let mean = s1 / count;
            let m2 = &s2 - &(&mean * &mean * count);
            (count, mean, m2)
        })
        .collect();
    let mut iter = stats.into_iter();
    let (mut count, mut mean, mut m2) = iter.next().expect("at least one chunk");
    for (cb, mb, m2b) in iter {
        let total = count + cb;
        let delta = &mb - &mean;
        mean = &mean + &(&delta * (cb / total));
        m2 = &m2 + &m2b + &(&delta * &delta * (count * cb / total));
        count = total;
    }
    let nf = lit::<T>(n_samples as f64);
    let mut estimate = Array2::zeros((n, n));
    let mut stderr = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let var = if n_samples > 1 {
                (m2[[i, j]] / (nf - T::one())).max(T::zero())
            } else {
                T::infinity()
            };
            let se = if e.rank() == 0 { T::zero() } else { (var / nf).sqrt() };
            estimate[[i, j]] = mean[[i, j]];
            estimate[[j, i]] = mean[[i, j]];
            stderr[[i, j]] = se;
            stderr[[j, i]] = se;
        }
    }
    Ok(McKernelEstimate {
        estimate,
        stderr,
        n_samples,
        seed,
    })
}

fn lse_pair<T: Real>(a: ndarray::ArrayView1<T>, b: ndarray::ArrayView1<T>, log_lambda: &[T], epsilon: T) -> T {
    let terms = a
        .iter()
        .zip(b.iter())
        .zip(log_lambda)
        .filter(|((x, y), l)| x.is_finite() && y.is_finite() && **l > T::neg_infinity())
        .map(|((x, y), l)| *l - (*x + *y) / epsilon);
    let lse = logsumexp(terms);
    if lse == T::neg_infinity() {
        T::infinity()
    } else {
        -epsilon * lse
    }
}

fn log_weights<T: Real>(lambda: &[T], z: usize) -> Result<Vec<T>> {
    if lambda.len() != z {
        return Err(Error::DimensionMismatch {
            expected: z,
            found: lambda.len(),
        });
    }
    if let Some(w) = lambda.iter().find(|w| !(w.is_finite() && **w >= T::zero())) {
        return Err(Error::InvalidMeasure(format!("lambda weight {w}")));
    }
    Ok(lambda.iter().map(|w| crate::numeric::ln0(*w)).collect())
}

/// `-epsilon log sum_z lambda_z exp(-(psi(i,z) + psi(j,z)) / epsilon)`.
pub fn lse_cost<T: Real>(psi: &InfRepresentation<T>, lambda: &[T], epsilon: T) -> Result<CostMatrix<T>> {
    check_epsilon(epsilon)?;
    let table = psi.psi();
    let log_lambda = log_weights(lambda, table.ncols())?;
    let n = table.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = lse_pair(table.row(i), table.row(j), &log_lambda, epsilon);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    CostMatrix::new(out)
}

/// Rectangular variant with separate tables for the two sides.
pub fn lse_cost_two_sided<T: Real>(
    psi_a: &InfRepresentation<T>,
    psi_b: &InfRepresentation<T>,
    lambda: &[T],
    epsilon: T,
) -> Result<CostMatrix<T>> {
    check_epsilon(epsilon)?;
    let (a, b) = (psi_a.psi(), psi_b.psi());
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    let log_lambda = log_weights(lambda, a.ncols())?;
    CostMatrix::from_fn(a.nrows(), b.nrows(), |(i, j)| {
        lse_pair(a.row(i), b.row(j), &log_lambda, epsilon)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanEmbeddingGrams<T> {
    pub norm2_a: T,
    pub norm2_b: T,
    pub inner_ab: T,
}

/// Squared norms and inner product of two kernel mean embeddings.
pub fn mean_embedding_grams<T: Real>(
    k: &KernelMatrix<T>,
    a: &Array1<T>,
    b: &Array1<T>,
) -> Result<MeanEmbeddingGrams<T>> {
    for w in [a, b] {
        if w.len() != k.size() {
            return Err(Error::DimensionMismatch {
                expected: k.size(),
                found: w.len(),
            });
        }
    }
    let ka = k.entries().dot(a);
    let kb = k.entries().dot(b);
    Ok(MeanEmbeddingGrams {
        norm2_a: a.dot(&ka),
        norm2_b: b.dot(&kb),
        inner_ab: a.dot(&kb),
    })
}

/// `w^T K w` clamped at zero, for signed weight vectors.
pub fn gram_norm2<T: Real>(k: &KernelMatrix<T>, w: &Array1<T>) -> T {
    w.dot(&k.entries().dot(w)).max(T::zero())
}

/// Debiasability of `-epsilon log k` checked against the Cauchy-Schwarz form.
#[derive(Clone, Debug, PartialEq)]
pub struct LogKernelCertificate {
    pub debiasable: bool,
    pub cauchy_schwarz: bool,
    pub strictly_debiasable: bool,
    pub strict_cauchy_schwarz: bool,
    pub witness: Option<(usize, usize)>,
}

impl LogKernelCertificate {
    pub fn agree(&self) -> bool {
        self.debiasable == self.cauchy_schwarz && self.strictly_debiasable == self.strict_cauchy_schwarz
    }
}

/// Runs the cost-side scan and the kernel-side inequality independently.
///
/// With tolerance `tol` on `c0`, the matching kernel bands are
/// `k_ij^2 <= k_ii k_jj exp(2 tol / epsilon)` and, off the diagonal,
/// `k_ij^2 < k_ii k_jj exp(-2 tol / epsilon)` or `k_ij = 0`.
pub fn log_kernel_debias_check<T: Real>(k: &KernelMatrix<T>, epsilon: T, tol: T) -> Result<LogKernelCertificate> {
    check_epsilon(epsilon)?;
    let c = CostMatrix::new(k.entries().mapv(|v| -epsilon * crate::numeric::ln0(v)))?;
    let loose = is_debiasable(&c, false, &tol)?;
    let strict = is_debiasable(&c, true, &tol)?;
    let n = k.size();
    let up = (lit::<T>(2.0) * tol / epsilon).exp();
    let down = (-lit::<T>(2.0) * tol / epsilon).exp();
    let mut cauchy_schwarz = true;
    let mut strict_cauchy_schwarz = true;
    for i in 0..n {
        for j in 0..n {
            let lhs = k.get(i, j) * k.get(i, j);
            let rhs = k.get(i, i) * k.get(j, j);
            if lhs > rhs * up {
                cauchy_schwarz = false;
            }
            if i != j && !(k.get(i, j) == T::zero() || lhs < rhs * down) {
                strict_cauchy_schwarz = false;
            }
        }
    }
    Ok(LogKernelCertificate {
        debiasable: loose.verdict,
        cauchy_schwarz,
        strictly_debiasable: strict.verdict,
        strict_cauchy_schwarz,
        witness: loose.witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::counterexample_cost;
    use ndarray::array;

    #[test]
    fn gibbs_examples() {
        let inf = f64::INFINITY;
        let k = gibbs_kernel(&CostMatrix::new(array![[0.0, inf], [inf, 0.0]]).unwrap(), 1.0).unwrap();
        assert_eq!(k.entries(), &array![[1.0, 0.0], [0.0, 1.0]]);
        let k = gibbs_kernel(&counterexample_cost::<f64>(), 1.0).unwrap();
        assert_eq!(k.get(0, 1), (-1.0f64).exp());
        assert_eq!(k.get(0, 2), 1.0);
        assert!(gibbs_kernel(&counterexample_cost::<f64>(), 0.0).is_err());
    }

    #[test]
    fn identity_is_psd() {
        let k = KernelMatrix::new(Array2::<f64>::eye(3), None).unwrap();
        let cert = is_psd(&k, 1e-12);
        assert!(cert.verdict);
        assert!((cert.min_eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_distance_is_not_negative_definite() {
        let x = array![[0.0_f64], [1.0], [2.0], [5.0]];
        let c = CostMatrix::power_distance(x.view(), 3.0).unwrap();
        let cert = is_negative_definite(&c, 1e-9).unwrap();
        assert!(!cert.verdict);
        assert!(cert.worst_vector.sum().abs() < 1e-12);
        assert!(cert.quadratic_value > 0.0);
    }

    #[test]
    fn one_point_embedding() {
        let c = CostMatrix::new(array![[4.0]]).unwrap();
        let e = embed_negative_definite(&c).unwrap();
        assert_eq!(e.offsets, array![2.0]);
        assert_eq!(e.rank(), 0);
        assert_eq!(e.reconstruct(), array![[4.0]]);
    }

    #[test]
    fn rank_zero_mc_is_exact() {
        let c = CostMatrix::new(array![[2.0, 1.5], [1.5, 1.0]]).unwrap();
        let e = embed_negative_definite(&c).unwrap();
        assert_eq!(e.rank(), 0);
        let mc = gaussian_features_mc(&e, 0.5, 10, 7).unwrap();
        assert!((mc.estimate[[0, 1]] - (-1.5f64 / 0.5).exp()).abs() < 1e-15);
        assert_eq!(mc.stderr[[0, 1]], 0.0);
        assert!(gaussian_features_mc(&e, 0.5, 0, 7).is_err());
    }

    #[test]
    fn lse_single_atom() {
        let psi = InfRepresentation::new(array![[0.5, 9.0], [1.25, 3.0]]).unwrap();
        let c = lse_cost(&psi, &[1.0, 0.0], 0.7).unwrap();
        assert!((c.get(0, 1) - 1.75_f64).abs() < 1e-15);
        assert!((c.get(1, 1) - 2.5_f64).abs() < 1e-15);
    }

    #[test]
    fn grams_recover_entries() {
        let k = KernelMatrix::new(array![[1.0, 0.3], [0.3, 2.0]], None).unwrap();
        let g = mean_embedding_grams(&k, &array![1.0, 0.0], &array![0.0, 1.0]).unwrap();
        assert_eq!((g.norm2_a, g.norm2_b, g.inner_ab), (1.0, 2.0, 0.3));
    }

    #[test]
    fn injected_cauchy_schwarz_violation() {
        let k = KernelMatrix::new(array![[1.0, 2.0], [2.0, 1.0]], Some(1.0)).unwrap();
        let cert = log_kernel_debias_check(&k, 1.0, 1e-12).unwrap();
        assert!(!cert.debiasable && !cert.cauchy_schwarz && cert.agree());
        assert_eq!(cert.witness, Some((0, 1)));
    }
}
