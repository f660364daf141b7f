//! Discrete measures, couplings, KL divergence and the KL decomposition lemmas.

use ndarray::{Array1, Array2, ArrayD, ArrayView2, Axis, IxDyn};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::numeric::{l1_distance, xlogxy};
use crate::scalar::{lit, Real};

/// Tolerance for "sums to one" checks on `n` entries.
pub fn mass_tolerance<T: Real>(n: usize) -> T {
    let floor = lit::<T>(1e-12);
    let rounding = T::epsilon() * lit::<T>(4.0 * (n.max(1) as f64).sqrt());
    floor.max(rounding)
}

/// Weighted atoms on an indexed support, optionally with Euclidean coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<T> {
    weights: Array1<T>,
    coordinates: Option<Array2<T>>,
    total_mass: T,
}

impl<T: Real> DiscreteMeasure<T> {
    /// Nonnegative measure with the given weights.
    pub fn new(weights: impl Into<Array1<T>>) -> Result<Self> {
        let weights = weights.into();
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        for (i, w) in weights.iter().enumerate() {
            if !(w.is_finite() && *w >= T::zero()) {
                return Err(Error::InvalidMeasure(format!("weight {i} is {w}")));
            }
        }
        let total_mass = weights.sum();
        Ok(Self {
            weights,
            coordinates: None,
            total_mass,
        })
    }

    /// Probability measure; the weights must sum to one.
    pub fn probability(weights: impl Into<Array1<T>>) -> Result<Self> {
        let m = Self::new(weights)?;
        if !m.is_probability() {
            return Err(Error::InvalidMeasure(format!("total mass {} is not 1", m.total_mass)));
        }
        Ok(m)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let w = T::one() / lit::<T>(n as f64);
        Self::new(Array1::from_elem(n, w))
    }

    pub fn dirac(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::DimensionMismatch { expected: n, found: at });
        }
        let mut w = Array1::zeros(n);
        w[at] = T::one();
        Self::new(w)
    }

    /// Attaches one coordinate row per atom.
    pub fn with_coordinates(mut self, coordinates: Array2<T>) -> Result<Self> {
        if coordinates.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coordinates.nrows(),
            });
        }
        if coordinates.ncols() == 0 {
            return Err(Error::InvalidMeasure("coordinates of dimension 0".into()));
        }
        self.coordinates = Some(coordinates);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &Array1<T> {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn coordinates(&self) -> Option<&Array2<T>> {
        self.coordinates.as_ref()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.coordinates.as_ref().map(|c| c.ncols())
    }

    pub fn total_mass(&self) -> T {
        self.total_mass
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - T::one()).abs() <= mass_tolerance(self.len())
    }

    /// Rescaled copy with unit mass.
    pub fn normalized(&self) -> Result<Self> {
        if self.total_mass <= T::zero() {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        let mut out = Self::new(self.weights.mapv(|w| w / self.total_mass))?;
        out.coordinates = self.coordinates.clone();
        Ok(out)
    }

    /// Indices with positive weight.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(i, _)| i)
    }

    pub(crate) fn require_probability(&self, name: &'static str) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::InvalidMeasure(format!(
                "{name} must be a probability measure (mass {})",
                self.total_mass
            )))
        }
    }
}

/// KL divergence between two measures on one support, in nats.
pub fn kl_divergence<T: Real>(a: &DiscreteMeasure<T>, b: &DiscreteMeasure<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(kl_entries(a.weights().iter().copied(), b.weights().iter().copied()))
}

/// `sum a log(a/b)` over paired entries, short-circuiting to `+inf`.
pub fn kl_entries<T: Real>(a: impl IntoIterator<Item = T>, b: impl IntoIterator<Item = T>) -> T {
    let mut acc = T::zero();
    for (x, y) in a.into_iter().zip(b) {
        let t = xlogxy(x, y);
        if t == T::infinity() {
            return t;
        }
        acc += t;
    }
    acc
}

/// Joint measure stored as a dense tensor; couplings have unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTensor<T> {
    entries: ArrayD<T>,
}

impl<T: Real> CouplingTensor<T> {
    /// Validates nonnegativity and unit mass.
    pub fn new(entries: ArrayD<T>) -> Result<Self> {
        let t = Self::from_nonnegative(entries)?;
        let mass = t.mass();
        if (mass - T::one()).abs() > mass_tolerance(t.entries.len()) {
            return Err(Error::InvalidMeasure(format!("coupling mass {mass} is not 1")));
        }
        Ok(t)
    }

    /// Validates nonnegativity only.
    pub fn from_nonnegative(entries: ArrayD<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidMeasure("empty tensor".into()));
        }
        if let Some(w) = entries.iter().find(|w| !(w.is_finite() && **w >= T::zero())) {
            return Err(Error::InvalidMeasure(format!("tensor entry {w}")));
        }
        Ok(Self { entries })
    }

    pub fn from_matrix(m: Array2<T>) -> Result<Self> {
        Self::new(m.into_dyn())
    }

    pub fn entries(&self) -> &ArrayD<T> {
        &self.entries
    }

    pub fn into_entries(self) -> ArrayD<T> {
        self.entries
    }

    pub fn shape(&self) -> &[usize] {
        self.entries.shape()
    }

    pub fn ndim(&self) -> usize {
        self.entries.ndim()
    }

    pub fn mass(&self) -> T {
        self.entries.sum()
    }

    /// Two-axis view.
    pub fn as_matrix(&self) -> Result<ArrayView2<'_, T>> {
        self.entries
            .view()
            .into_dimensionality()
            .map_err(|_| Error::DimensionMismatch {
                expected: 2,
                found: self.ndim(),
            })
    }

    /// Marginal on a single axis.
    pub fn marginal(&self, axis: usize) -> Result<DiscreteMeasure<T>> {
        self.check_axis(axis)?;
        let w: Array1<T> = self.entries.axis_iter(Axis(axis)).map(|s| s.sum()).collect();
        DiscreteMeasure::new(w)
    }

    /// Marginal on the listed axes, in increasing axis order.
    pub fn marginal_axes(&self, keep: &[usize]) -> Result<CouplingTensor<T>> {
        for &a in keep {
            self.check_axis(a)?;
        }
        let mut out = self.entries.clone();
        for a in (0..self.ndim()).rev() {
            if !keep.contains(&a) {
                out = out.sum_axis(Axis(a));
            }
        }
        Ok(Self { entries: out })
    }

    /// Conditional slices along `axis`, with the marginal on that axis.
    pub fn disintegrate(&self, axis: usize) -> Result<Disintegration<T>> {
        self.check_axis(axis)?;
        let marginal = self.marginal(axis)?;
        let conditionals = self
            .entries
            .axis_iter(Axis(axis))
            .zip(marginal.weights().iter())
            .map(|(slice, &m)| {
                if m > T::zero() {
                    Conditional::Defined(slice.mapv(|v| v / m))
                } else {
                    Conditional::Undefined
                }
            })
            .collect();
        Ok(Disintegration {
            axis,
            shape: self.shape().to_vec(),
            marginal,
            conditionals,
        })
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.ndim() {
            return Err(Error::DimensionMismatch {
                expected: self.ndim(),
                found: axis,
            });
        }
        Ok(())
    }
}

/// A conditional slice of a disintegration.
#[derive(Clone, Debug, PartialEq)]
pub enum Conditional<T> {
    Defined(ArrayD<T>),
    /// The marginal weight of this index is zero.
    Undefined,
}

/// Marginal along one axis plus normalized conditional slices.
#[derive(Clone, Debug)]
pub struct Disintegration<T> {
    pub axis: usize,
    pub shape: Vec<usize>,
    pub marginal: DiscreteMeasure<T>,
    pub conditionals: Vec<Conditional<T>>,
}

impl<T: Real> Disintegration<T> {
    /// Rebuilds the joint tensor; undefined slices become zeros.
    pub fn reassemble(&self) -> ArrayD<T> {
        let mut out = ArrayD::zeros(IxDyn(&self.shape));
        for (k, mut slot) in out.axis_iter_mut(Axis(self.axis)).enumerate() {
            if let Conditional::Defined(c) = &self.conditionals[k] {
                let m = self.marginal.weight(k);
                slot.zip_mut_with(c, |o, v| *o = *v * m);
            }
        }
        out
    }
}

/// Product coupling `a_i b_j`; its mass is the product of the masses.
pub fn product_measure<T: Real>(a: &DiscreteMeasure<T>, b: &DiscreteMeasure<T>) -> CouplingTensor<T> {
    let m = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a.weight(i) * b.weight(j));
    CouplingTensor { entries: m.into_dyn() }
}

fn product3<T: Real>(a: &[T], b: &[T], c: &[T]) -> ArrayD<T> {
    ndarray::Array3::from_shape_fn((a.len(), b.len(), c.len()), |(i, j, k)| a[i] * b[j] * c[k]).into_dyn()
}

fn expect_ndim<T: Real>(t: &CouplingTensor<T>, n: usize) -> Result<()> {
    if t.ndim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: t.ndim(),
        });
    }
    Ok(())
}

fn check_marginal<T: Real>(got: &DiscreteMeasure<T>, want: &DiscreteMeasure<T>, tol: f64) -> Result<()> {
    if got.len() != want.len() {
        return Err(Error::DimensionMismatch {
            expected: want.len(),
            found: got.len(),
        });
    }
    let d = l1_distance(
        got.weights().as_slice().expect("contiguous"),
        want.weights().as_slice().expect("contiguous"),
    );
    if d > lit(tol) {
        return Err(Error::MarginalMismatch {
            discrepancy: d.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Glues `pi1` on X×Z and `pi2` on Y×Z along their common Z-marginal.
///
/// The result is `pi1(i,k) * pi2(j,k) / eta_k` on X×Y×Z, where `eta` is the
/// Z-marginal of `pi1`.
pub fn glue<T: Real>(pi1: &CouplingTensor<T>, pi2: &CouplingTensor<T>) -> Result<CouplingTensor<T>> {
    expect_ndim(pi1, 2)?;
    expect_ndim(pi2, 2)?;
    let eta1 = pi1.marginal(1)?;
    let eta2 = pi2.marginal(1)?;
    check_marginal(&eta2, &eta1, 1e-10)?;
    let a = pi1.as_matrix()?;
    let b = pi2.as_matrix()?;
    let (nx, nz) = a.dim();
    let ny = b.nrows();
    let gamma = ndarray::Array3::from_shape_fn((nx, ny, nz), |(i, j, k)| {
        let (e1, e2) = (eta1.weight(k), eta2.weight(k));
        if e1 > T::zero() && e2 > T::zero() {
            a[[i, k]] * (b[[j, k]] / e2)
        } else {
            T::zero()
        }
    });
    Ok(CouplingTensor {
        entries: gamma.into_dyn(),
    })
}

/// Terms of the three-marginal KL decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct KlThreeDecomposition<T> {
    pub lhs: T,
    pub kl_alpha: T,
    pub kl_beta: T,
    pub correlation_term: T,
}

impl<T: Real> KlThreeDecomposition<T> {
    pub fn residual(&self) -> T {
        self.lhs - (self.kl_alpha + self.kl_beta + self.correlation_term)
    }
}

/// KL(γ|μ⊗ν⊗η) split into the two pair marginals plus the conditional
/// correlation term.
pub fn kl_three_decomposition<T: Real>(
    gamma: &CouplingTensor<T>,
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
    eta: &DiscreteMeasure<T>,
) -> Result<KlThreeDecomposition<T>> {
    expect_ndim(gamma, 3)?;
    check_marginal(&gamma.marginal(0)?, mu, 1e-10)?;
    check_marginal(&gamma.marginal(1)?, nu, 1e-10)?;
    check_marginal(&gamma.marginal(2)?, eta, 1e-10)?;
    let (mw, nw, ew) = (slice(mu), slice(nu), slice(eta));

    let reference = product3(mw, nw, ew);
    let lhs = kl_entries(gamma.entries().iter().copied(), reference.iter().copied());

    let alpha = gamma.marginal_axes(&[0, 2])?;
    let beta = gamma.marginal_axes(&[1, 2])?;
    let kl_alpha = kl_entries(
        alpha.entries().iter().copied(),
        product_measure(mu, eta).entries().iter().copied(),
    );
    let kl_beta = kl_entries(
        beta.entries().iter().copied(),
        product_measure(nu, eta).entries().iter().copied(),
    );

    let dis = gamma.disintegrate(2)?;
    let mut correlation_term = T::zero();
    for (k, cond) in dis.conditionals.iter().enumerate() {
        if let Conditional::Defined(slice) = cond {
            let s: ArrayView2<T> = slice.view().into_dimensionality().expect("2-axis slice");
            let rows = s.sum_axis(Axis(1));
            let cols = s.sum_axis(Axis(0));
            let kl = kl_entries(
                s.indexed_iter().map(|(_, v)| *v),
                s.indexed_iter().map(|((i, j), _)| rows[i] * cols[j]),
            );
            correlation_term += dis.marginal.weight(k) * kl;
        }
    }
    Ok(KlThreeDecomposition {
        lhs,
        kl_alpha,
        kl_beta,
        correlation_term,
    })
}

/// Both sides of the KL chain rule and, for product inputs, the product rule.
#[derive(Clone, Debug, PartialEq)]
pub struct KlChainCheck<T> {
    pub joint_kl: T,
    pub conditional_part: T,
    pub marginal_part: T,
    /// `(KL(α|β), KL(μ1|μ2) + KL(ν1|ν2))` when both inputs are products.
    pub product_rule: Option<(T, T)>,
}

impl<T: Real> KlChainCheck<T> {
    /// Both sides agree within `tol`, or are both infinite.
    pub fn holds(&self, tol: T) -> bool {
        let close = |a: T, b: T| (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= tol;
        close(self.joint_kl, self.conditional_part + self.marginal_part)
            && self.product_rule.is_none_or(|(l, r)| close(l, r))
    }
}

/// Chain rule for KL using disintegrations along the second axis.
pub fn kl_chain_check<T: Real>(alpha: &CouplingTensor<T>, beta: &CouplingTensor<T>) -> Result<KlChainCheck<T>> {
    expect_ndim(alpha, 2)?;
    expect_ndim(beta, 2)?;
    if alpha.shape() != beta.shape() {
        return Err(Error::DimensionMismatch {
            expected: alpha.entries().len(),
            found: beta.entries().len(),
        });
    }
    let joint_kl = kl_entries(alpha.entries().iter().copied(), beta.entries().iter().copied());
    let da = alpha.disintegrate(1)?;
    let db = beta.disintegrate(1)?;
    let marginal_part = kl_divergence(&da.marginal, &db.marginal)?;
    let mut conditional_part = T::zero();
    for (y, ca) in da.conditionals.iter().enumerate() {
        let Conditional::Defined(ca) = ca else { continue };
        let term = match &db.conditionals[y] {
            Conditional::Defined(cb) => kl_entries(ca.iter().copied(), cb.iter().copied()),
            Conditional::Undefined => T::infinity(),
        };
        conditional_part += da.marginal.weight(y) * term;
    }

    let product_rule = match (product_factors(alpha)?, product_factors(beta)?) {
        (Some((m1, n1)), Some((m2, n2))) => Some((joint_kl, kl_divergence(&m1, &m2)? + kl_divergence(&n1, &n2)?)),
        _ => None,
    };
    Ok(KlChainCheck {
        joint_kl,
        conditional_part,
        marginal_part,
        product_rule,
    })
}

/// Marginals of a 2-axis tensor when it equals their product within 1e-12.
fn product_factors<T: Real>(t: &CouplingTensor<T>) -> Result<Option<(DiscreteMeasure<T>, DiscreteMeasure<T>)>> {
    let a = t.marginal(0)?;
    let b = t.marginal(1)?;
    let m = t.as_matrix()?;
    let tol = lit::<T>(1e-12);
    let is_product = m
        .indexed_iter()
        .all(|((i, j), v)| (*v - a.weight(i) * b.weight(j)).abs() <= tol);
    Ok(is_product.then_some((a, b)))
}

/// Both sides of the two-plan decomposition and the upper-bound candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct KlDecomp2Check<T> {
    pub sum_side: T,
    pub glued_side: T,
    /// `KL(γ|μ⊗ν⊗λ)` for each supplied candidate γ.
    pub candidate_values: Vec<T>,
}

impl<T: Real> KlDecomp2Check<T> {
    pub fn equality_holds(&self, tol: T) -> bool {
        (self.sum_side.is_infinite() && self.glued_side.is_infinite()) || (self.sum_side - self.glued_side).abs() <= tol
    }

    pub fn inequality_holds(&self, slack: T) -> bool {
        self.candidate_values.iter().all(|v| self.sum_side <= *v + slack)
    }
}

/// KL(π1|μ⊗η) + KL(π2|ν⊗η) + KL(η|λ) against the glued plan and candidates.
pub fn kl_decomp2_check<T: Real>(
    pi1: &CouplingTensor<T>,
    pi2: &CouplingTensor<T>,
    lambda: &DiscreteMeasure<T>,
    candidates: &[CouplingTensor<T>],
) -> Result<KlDecomp2Check<T>> {
    expect_ndim(pi1, 2)?;
    expect_ndim(pi2, 2)?;
    let mu = pi1.marginal(0)?;
    let eta = pi1.marginal(1)?;
    let nu = pi2.marginal(0)?;
    check_marginal(&pi2.marginal(1)?, &eta, 1e-10)?;
    if lambda.len() != eta.len() {
        return Err(Error::DimensionMismatch {
            expected: eta.len(),
            found: lambda.len(),
        });
    }
    let kl = |p: &CouplingTensor<T>, a: &DiscreteMeasure<T>, b: &DiscreteMeasure<T>| {
        kl_entries(
            p.entries().iter().copied(),
            product_measure(a, b).entries().iter().copied(),
        )
    };
    let sum_side = kl(pi1, &mu, &eta) + kl(pi2, &nu, &eta) + kl_divergence(&eta, lambda)?;

    let reference = product3(slice(&mu), slice(&nu), slice(lambda));
    let glued = glue(pi1, pi2)?;
    let glued_side = kl_entries(glued.entries().iter().copied(), reference.iter().copied());

    let mut candidate_values = Vec::with_capacity(candidates.len());
    for g in candidates {
        expect_ndim(g, 3)?;
        let a = g.marginal_axes(&[0, 2])?;
        let b = g.marginal_axes(&[1, 2])?;
        let da = l1_distance(
            a.entries().as_slice().expect("contiguous"),
            pi1.entries().as_slice().expect("contiguous"),
        );
        let db = l1_distance(
            b.entries().as_slice().expect("contiguous"),
            pi2.entries().as_slice().expect("contiguous"),
        );
        let d = da.max(db);
        if d > lit(1e-10) {
            return Err(Error::MarginalMismatch {
                discrepancy: d.to_f64().unwrap_or(f64::NAN),
            });
        }
        candidate_values.push(kl_entries(g.entries().iter().copied(), reference.iter().copied()));
    }
    Ok(KlDecomp2Check {
        sum_side,
        glued_side,
        candidate_values,
    })
}

fn slice<T: Real>(m: &DiscreteMeasure<T>) -> &[T] {
    m.weights().as_slice().expect("contiguous weights")
}

/// Weights drawn from a symmetric Dirichlet(1) distribution.
pub fn dirichlet_weights<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array1<T> {
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| lit::<T>(x / total)).collect()
}

/// Random probability tensor with strictly positive entries.
pub fn random_tensor<T: Real, R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> ArrayD<T> {
    let n = shape.iter().product();
    let w = dirichlet_weights::<T, R>(n, rng);
    ArrayD::from_shape_vec(IxDyn(shape), w.to_vec()).expect("shape matches")
}

/// North-west corner coupling of two equal-mass weight vectors.
pub fn north_west_corner<T: Real>(a: &[T], b: &[T]) -> Array2<T> {
    let mut plan = Array2::zeros((a.len(), b.len()));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (
        a.first().copied().unwrap_or_default(),
        b.first().copied().unwrap_or_default(),
    );
    while i < a.len() && j < b.len() {
        let m = ra.min(rb);
        plan[[i, j]] += m;
        ra -= m;
        rb -= m;
        if ra <= rb {
            i += 1;
            if i < a.len() {
                ra = a[i];
            }
        } else {
            j += 1;
            if j < b.len() {
                rb = b[j];
            }
        }
    }
    plan
}

/// Random coupling with prescribed marginals of equal mass.
///
/// Mixes the product coupling with north-west-corner couplings under random
/// row and column orders, using Dirichlet mixture weights.
pub fn random_coupling<T: Real, R: Rng + ?Sized>(a: &[T], b: &[T], rng: &mut R) -> Array2<T> {
    let vertices = 3;
    let mix = dirichlet_weights::<T, R>(vertices + 1, rng);
    let mass: T = a.iter().copied().sum();
    if mass <= T::zero() {
        return Array2::zeros((a.len(), b.len()));
    }
    let mut out = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| mix[0] * a[i] * b[j] / mass);
    for v in 0..vertices {
        let mut rows: Vec<usize> = (0..a.len()).collect();
        let mut cols: Vec<usize> = (0..b.len()).collect();
        rows.shuffle(rng);
        cols.shuffle(rng);
        let pa: Vec<T> = rows.iter().map(|&i| a[i]).collect();
        let pb: Vec<T> = cols.iter().map(|&j| b[j]).collect();
        let nw = north_west_corner(&pa, &pb);
        for ((r, c), val) in nw.indexed_iter() {
            out[[rows[r], cols[c]]] += mix[v + 1] * *val;
        }
    }
    out
}

/// Random γ on X×Y×Z whose (X,Z) and (Y,Z) marginals are `pi1` and `pi2`.
pub fn random_three_coupling<T: Real, R: Rng + ?Sized>(
    pi1: &CouplingTensor<T>,
    pi2: &CouplingTensor<T>,
    rng: &mut R,
) -> Result<CouplingTensor<T>> {
    let a = pi1.as_matrix()?;
    let b = pi2.as_matrix()?;
    let (nx, nz) = a.dim();
    let ny = b.nrows();
    let mut gamma = ndarray::Array3::zeros((nx, ny, nz));
    for k in 0..nz {
        let ak: Vec<T> = a.column(k).to_vec();
        let bk: Vec<T> = b.column(k).to_vec();
        let c = random_coupling(&ak, &bk, rng);
        gamma.index_axis_mut(Axis(2), k).assign(&c);
    }
    CouplingTensor::new(gamma.into_dyn())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kl_examples() {
        let a = DiscreteMeasure::probability(array![0.5_f64, 0.5]).unwrap();
        let b = DiscreteMeasure::probability(array![0.25, 0.75]).unwrap();
        // 0.5 ln 2 + 0.5 ln(2/3)
        let expected = 0.143_841_036_225_890_1;
        assert!((kl_divergence(&a, &b).unwrap() - expected).abs() < 1e-15);
        assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
        let d0 = DiscreteMeasure::probability(array![1.0, 0.0]).unwrap();
        let d1 = DiscreteMeasure::probability(array![0.0, 1.0]).unwrap();
        assert_eq!(kl_divergence(&d0, &d1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn kl_dimension_error() {
        let a = DiscreteMeasure::<f64>::uniform(2).unwrap();
        let b = DiscreteMeasure::<f64>::uniform(3).unwrap();
        assert!(matches!(kl_divergence(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn product_example() {
        let a = DiscreteMeasure::probability(array![0.3, 0.7]).unwrap();
        let b = DiscreteMeasure::probability(array![0.4, 0.6]).unwrap();
        let p = product_measure(&a, &b);
        let want = array![[0.12_f64, 0.18], [0.28, 0.42]];
        for (x, y) in p.entries().iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
        let d = DiscreteMeasure::<f64>::dirac(1, 0).unwrap();
        assert_eq!(
            product_measure(&d, &d).entries().iter().copied().collect::<Vec<_>>(),
            vec![1.0]
        );
    }

    #[test]
    fn disintegrate_diagonal() {
        let t = CouplingTensor::from_matrix(array![[0.5, 0.0], [0.0, 0.5]]).unwrap();
        let d = t.disintegrate(1).unwrap();
        assert_eq!(d.conditionals[0], Conditional::Defined(array![1.0, 0.0].into_dyn()));
        assert_eq!(d.conditionals[1], Conditional::Defined(array![0.0, 1.0].into_dyn()));
    }

    #[test]
    fn disintegrate_marks_zero_slices() {
        let t = CouplingTensor::from_matrix(array![[0.5, 0.0], [0.5, 0.0]]).unwrap();
        let d = t.disintegrate(1).unwrap();
        assert_eq!(d.conditionals[1], Conditional::Undefined);
        assert_eq!(d.reassemble(), t.entries().clone());
    }

    #[test]
    fn glue_products_is_triple_product() {
        let mu = DiscreteMeasure::probability(array![0.3, 0.7]).unwrap();
        let nu = DiscreteMeasure::probability(array![0.1, 0.5, 0.4]).unwrap();
        let eta = DiscreteMeasure::probability(array![0.6, 0.4]).unwrap();
        let g = glue(&product_measure(&mu, &eta), &product_measure(&nu, &eta)).unwrap();
        let want: ArrayD<f64> = product3(slice(&mu), slice(&nu), slice(&eta));
        for (x, y) in g.entries().iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn glue_rejects_mismatch() {
        let a = CouplingTensor::from_matrix(array![[0.5, 0.5]]).unwrap();
        let b = CouplingTensor::from_matrix(array![[0.25, 0.75]]).unwrap();
        match glue(&a, &b) {
            Err(Error::MarginalMismatch { discrepancy }) => assert!((discrepancy - 0.5).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn north_west_corner_marginals() {
        let a = [0.2, 0.3, 0.5];
        let b = [0.6, 0.4];
        let p = north_west_corner(&a, &b);
        let want = array![[0.2_f64, 0.0], [0.3, 0.0], [0.1, 0.4]];
        for (x, y) in p.iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
