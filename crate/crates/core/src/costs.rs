//! Cost matrices, debiasing, inf-representations and debiasability-preserving
//! combinators.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::{ExtendedReal, Real};

/// Pairwise costs with values in `(-inf, +inf]`.
///
/// Only [`debias`] may produce `-inf` entries; every other constructor rejects them.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix<E> {
    entries: Array2<E>,
    symmetric: bool,
}

impl<E: ExtendedReal> CostMatrix<E> {
    pub fn new(entries: Array2<E>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidCost {
                row: 0,
                col: 0,
                reason: "empty matrix",
            });
        }
        for ((row, col), v) in entries.indexed_iter() {
            if v.is_neg_inf() {
                return Err(Error::InvalidCost {
                    row,
                    col,
                    reason: "-inf entry",
                });
            }
            if v.is_undefined() {
                return Err(Error::InvalidCost {
                    row,
                    col,
                    reason: "NaN entry",
                });
            }
        }
        Ok(Self::from_raw(entries))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut((usize, usize)) -> E) -> Result<Self> {
        Self::new(Array2::from_shape_fn((rows, cols), f))
    }

    fn from_raw(entries: Array2<E>) -> Self {
        let symmetric = is_exactly_symmetric(&entries.view());
        Self { entries, symmetric }
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> &E {
        &self.entries[[i, j]]
    }

    pub fn entries(&self) -> &Array2<E> {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn diagonal(&self) -> Vec<E> {
        (0..self.rows().min(self.cols()))
            .map(|i| self.get(i, i).clone())
            .collect()
    }

    /// True when no entry is infinite.
    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite_ext())
    }

    pub fn map<F: ExtendedReal>(&self, f: impl FnMut(&E) -> F) -> Result<CostMatrix<F>> {
        CostMatrix::new(self.entries.map(f))
    }

    pub(crate) fn require_symmetric(&self) -> Result<()> {
        if self.symmetric {
            return Ok(());
        }
        let n = self.rows();
        if n != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.cols(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                if self.entries[[i, j]] != self.entries[[j, i]] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        unreachable!("asymmetric flag on a symmetric matrix")
    }
}

fn is_exactly_symmetric<E: ExtendedReal>(m: &ArrayView2<E>) -> bool {
    let n = m.nrows();
    n == m.ncols() && (0..n).all(|i| (0..i).all(|j| m[[i, j]] == m[[j, i]]))
}

impl<T: Real> CostMatrix<T> {
    /// `f(x_i, y_j)` over the rows of two coordinate tables.
    pub fn from_points(
        x: ArrayView2<T>,
        y: ArrayView2<T>,
        mut f: impl FnMut(ndarray::ArrayView1<T>, ndarray::ArrayView1<T>) -> T,
    ) -> Result<Self> {
        if x.ncols() != y.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: y.ncols(),
            });
        }
        Self::from_fn(x.nrows(), y.nrows(), |(i, j)| f(x.row(i), y.row(j)))
    }

    /// Squared Euclidean distances between the rows of `points`.
    pub fn squared_euclidean(points: ArrayView2<T>) -> Result<Self> {
        Self::from_points(points, points, squared_distance)
    }

    /// `|x - y|^p` between the rows of `points`.
    pub fn power_distance(points: ArrayView2<T>, p: T) -> Result<Self> {
        Self::from_points(points, points, |a, b| squared_distance(a, b).sqrt().powf(p))
    }

    /// Negated Gram matrix `-<x_i, x_j>`.
    pub fn negative_gram(points: ArrayView2<T>) -> Result<Self> {
        Self::from_points(points, points, |a, b| -a.dot(&b))
    }

    /// Largest finite absolute entry.
    pub fn max_abs_finite(&self) -> T {
        self.entries
            .iter()
            .filter(|v| v.is_finite())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

pub fn squared_distance<T: Real>(a: ndarray::ArrayView1<T>, b: ndarray::ArrayView1<T>) -> T {
    a.iter().zip(b.iter()).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
}

/// `c0(i,j) = c(i,j) - (c(i,i)/2 + c(j,j)/2)` with `inf - inf = +inf`.
///
/// The result may contain `-inf` when `c` is not debiasable.
pub fn debias<E: ExtendedReal>(c: &CostMatrix<E>) -> Result<CostMatrix<E>> {
    c.require_symmetric()?;
    let half: Vec<E> = c.diagonal().iter().map(|d| d.ext_half()).collect();
    let n = c.rows();
    let entries = Array2::from_shape_fn((n, n), |(i, j)| c.get(i, j).ext_sub(&half[i].ext_add(&half[j])));
    Ok(CostMatrix::from_raw(entries))
}

/// Outcome of a debiasability scan.
#[derive(Clone, Debug, PartialEq)]
pub struct DebiasCertificate<E> {
    pub verdict: bool,
    /// Most negative violating pair, lexicographically first on ties.
    pub witness: Option<(usize, usize)>,
    pub witness_value: Option<E>,
}

/// Checks `c0 >= -tol` everywhere, or `c0 > tol` off the diagonal when `strict`.
pub fn is_debiasable<E: ExtendedReal>(c: &CostMatrix<E>, strict: bool, tol: &E) -> Result<DebiasCertificate<E>> {
    let c0 = debias(c)?;
    let n = c.rows();
    let mut worst: Option<((usize, usize), E)> = None;
    for i in 0..n {
        for j in 0..n {
            let v = c0.get(i, j);
            let violates = if strict {
                i != j && *v <= *tol
            } else {
                v.ext_add(tol) < E::ext_zero()
            };
            if violates && worst.as_ref().is_none_or(|(_, w)| v < w) {
                worst = Some(((i, j), v.clone()));
            }
        }
    }
    Ok(match worst {
        None => DebiasCertificate {
            verdict: true,
            witness: None,
            witness_value: None,
        },
        Some((pair, value)) => DebiasCertificate {
            verdict: false,
            witness: Some(pair),
            witness_value: Some(value),
        },
    })
}

/// Table `psi` on X×Z with `c(x,y) = min_z psi(x,z) + psi(y,z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InfRepresentation<E> {
    psi: Array2<E>,
}

impl<E: ExtendedReal> InfRepresentation<E> {
    pub fn new(psi: Array2<E>) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::InvalidCost {
                row: 0,
                col: 0,
                reason: "empty table",
            });
        }
        for ((row, col), v) in psi.indexed_iter() {
            if v.is_neg_inf() || v.is_undefined() {
                return Err(Error::InvalidCost {
                    row,
                    col,
                    reason: "psi entry must be finite or +inf",
                });
            }
        }
        Ok(Self { psi })
    }

    pub fn psi(&self) -> &Array2<E> {
        &self.psi
    }

    pub fn x_size(&self) -> usize {
        self.psi.nrows()
    }

    pub fn z_size(&self) -> usize {
        self.psi.ncols()
    }
}

/// Inf-representation over ordered pairs `(u, v)`, column `u * n + v`.
pub fn constructive_inf_rep<E: ExtendedReal>(c: &CostMatrix<E>) -> Result<InfRepresentation<E>> {
    let cert = is_debiasable(c, false, &E::ext_zero())?;
    if let Some((row, col)) = cert.witness {
        return Err(Error::NotDebiasable {
            row,
            col,
            value: cert.witness_value.map_or(f64::NAN, |v| v.ext_to_f64()),
        });
    }
    let n = c.rows();
    let mut psi = Array2::from_elem((n, n * n), E::ext_infinity());
    for x in 0..n {
        for y in 0..n {
            psi[[x, x * n + y]] = c.get(x, x).ext_half();
            if x != y {
                psi[[x, y * n + x]] = c.get(x, y).ext_sub(&c.get(y, y).ext_half());
            }
        }
    }
    InfRepresentation::new(psi)
}

/// `c(i,j) = min_z psi(i,z) + psi(j,z)`.
pub fn eval_inf_rep<E: ExtendedReal>(rep: &InfRepresentation<E>) -> CostMatrix<E> {
    let psi = rep.psi();
    let n = rep.x_size();
    let mut out = Array2::from_elem((n, n), E::ext_infinity());
    for i in 0..n {
        for j in i..n {
            let mut best = E::ext_infinity();
            for z in 0..rep.z_size() {
                let v = psi[[i, z]].ext_add(&psi[[j, z]]);
                if v < best {
                    best = v;
                }
            }
            out[[j, i]] = best.clone();
            out[[i, j]] = best;
        }
    }
    CostMatrix::from_raw(out)
}

/// Strictness verdict from the diagonal argmin sets of an inf-representation.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimizerCertificate {
    pub verdict: bool,
    /// Lexicographically first pair with intersecting argmin sets.
    pub witness: Option<(usize, usize)>,
    pub shared_column: Option<usize>,
    /// `Z_{i,i}` for every `i`; empty when the row of `psi` is identically `+inf`.
    pub argmin_sets: Vec<Vec<usize>>,
}

/// Strict debiasability via pairwise disjointness of `Z_{i,i}`.
pub fn strict_via_minimizer_sets<E: ExtendedReal>(rep: &InfRepresentation<E>, tol: &E) -> MinimizerCertificate {
    let psi = rep.psi();
    let argmin_sets: Vec<Vec<usize>> = (0..rep.x_size())
        .map(|i| {
            let row = psi.row(i);
            let min = row.iter().fold(E::ext_infinity(), |m, v| m.ext_min(v));
            if min.is_pos_inf() {
                return Vec::new();
            }
            row.iter()
                .enumerate()
                .filter(|(_, v)| {
                    let gap = v.ext_sub(&min);
                    v.is_finite_ext() && gap.ext_add(&gap) <= *tol
                })
                .map(|(z, _)| z)
                .collect()
        })
        .collect();
    for i in 0..argmin_sets.len() {
        for j in i + 1..argmin_sets.len() {
            if let Some(z) = argmin_sets[i].iter().find(|z| argmin_sets[j].contains(z)) {
                return MinimizerCertificate {
                    verdict: false,
                    witness: Some((i, j)),
                    shared_column: Some(*z),
                    argmin_sets,
                };
            }
        }
    }
    MinimizerCertificate {
        verdict: true,
        witness: None,
        shared_column: None,
        argmin_sets,
    }
}

fn same_shape<E: ExtendedReal>(costs: &[CostMatrix<E>]) -> Result<(usize, usize)> {
    let first = costs.first().ok_or(Error::EmptyFamily)?;
    let shape = (first.rows(), first.cols());
    for c in costs {
        if (c.rows(), c.cols()) != shape {
            return Err(Error::DimensionMismatch {
                expected: shape.0 * shape.1,
                found: c.rows() * c.cols(),
            });
        }
    }
    Ok(shape)
}

/// `sum_w a_w c_w` with nonnegative coefficients.
pub fn sum_costs<E: ExtendedReal>(costs: &[CostMatrix<E>], coefficients: &[E]) -> Result<CostMatrix<E>> {
    let shape = same_shape(costs)?;
    if coefficients.len() != costs.len() {
        return Err(Error::DimensionMismatch {
            expected: costs.len(),
            found: coefficients.len(),
        });
    }
    if let Some(a) = coefficients.iter().find(|a| **a < E::ext_zero() || !a.is_finite_ext()) {
        return Err(Error::NegativeCoefficient(a.ext_to_f64()));
    }
    let out = Array2::from_shape_fn(shape, |(i, j)| {
        costs
            .iter()
            .zip(coefficients)
            .fold(E::ext_zero(), |acc, (c, a)| acc.ext_add(&c.get(i, j).ext_scale(a)))
    });
    CostMatrix::new(out)
}

/// Entrywise minimum of a nonempty family.
pub fn inf_costs<E: ExtendedReal>(costs: &[CostMatrix<E>]) -> Result<CostMatrix<E>> {
    let shape = same_shape(costs)?;
    let out = Array2::from_shape_fn(shape, |(i, j)| {
        costs.iter().fold(E::ext_infinity(), |acc, c| acc.ext_min(c.get(i, j)))
    });
    CostMatrix::new(out)
}

/// `c(i,j) + (g_i + g_j)`.
pub fn shift_by_g<E: ExtendedReal>(c: &CostMatrix<E>, g: &[E]) -> Result<CostMatrix<E>> {
    c.require_symmetric()?;
    if g.len() != c.rows() {
        return Err(Error::DimensionMismatch {
            expected: c.rows(),
            found: g.len(),
        });
    }
    if let Some(i) = g.iter().position(|v| v.is_neg_inf() || v.is_undefined()) {
        return Err(Error::InvalidCost {
            row: i,
            col: i,
            reason: "shift must be finite or +inf",
        });
    }
    let n = c.rows();
    CostMatrix::new(Array2::from_shape_fn((n, n), |(i, j)| {
        c.get(i, j).ext_add(&g[i].ext_add(&g[j]))
    }))
}

/// `min_{u,v} f(u,i) + f(v,j) + c(u,v)`.
pub fn inf_convolve<E: ExtendedReal>(c: &CostMatrix<E>, f: &CostMatrix<E>) -> Result<CostMatrix<E>> {
    c.require_symmetric()?;
    let n = c.rows();
    if f.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.rows(),
        });
    }
    let m = f.cols();
    // inner(u, j) = min_v f(v,j) + c(u,v)
    let inner = Array2::from_shape_fn((n, m), |(u, j)| {
        (0..n).fold(E::ext_infinity(), |acc, v| {
            acc.ext_min(&f.get(v, j).ext_add(c.get(u, v)))
        })
    });
    let mut out = Array2::from_elem((m, m), E::ext_infinity());
    for i in 0..m {
        for j in i..m {
            let v = (0..n).fold(E::ext_infinity(), |acc, u| {
                acc.ext_min(&f.get(u, i).ext_add(&inner[[u, j]]))
            });
            out[[j, i]] = v.clone();
            out[[i, j]] = v;
        }
    }
    CostMatrix::new(out)
}

/// `min_k c(i,k) + c(k,j) - c(k,k)`.
pub fn one_step_tilde<E: ExtendedReal>(c: &CostMatrix<E>) -> Result<CostMatrix<E>> {
    c.require_symmetric()?;
    let n = c.rows();
    let mut out = Array2::from_elem((n, n), E::ext_infinity());
    for i in 0..n {
        for j in i..n {
            let v = (0..n).fold(E::ext_infinity(), |acc, k| {
                acc.ext_min(&c.get(i, k).ext_add(c.get(k, j)).ext_sub(c.get(k, k)))
            });
            out[[j, i]] = v.clone();
            out[[i, j]] = v;
        }
    }
    Ok(CostMatrix::from_raw(out))
}

/// The 3-point cost of the counterexample showing that a debiasable ground
/// cost does not make entropic OT debiasable.
pub fn counterexample_cost<T: Real>() -> CostMatrix<T> {
    let (o, z) = (T::one(), T::zero());
    CostMatrix::new(ndarray::array![[z, o, z], [o, z, z], [z, z, z]]).expect("finite cost")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ExactReal;
    use ndarray::array;

    #[test]
    fn debias_rules() {
        let inf = f64::INFINITY;
        let c = CostMatrix::new(array![[2.0, inf], [inf, inf]]).unwrap();
        let c0 = debias(&c).unwrap();
        assert_eq!(*c0.get(0, 0), 0.0);
        assert_eq!(*c0.get(1, 1), inf);
        assert_eq!(*c0.get(0, 1), inf);
        let d = CostMatrix::new(array![[inf, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(*debias(&d).unwrap().get(0, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn debias_requires_symmetry() {
        let c = CostMatrix::new(array![[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(matches!(debias(&c), Err(Error::NotSymmetric { row: 1, col: 0 })));
    }

    #[test]
    fn counterexample_is_debiased() {
        let c = counterexample_cost::<f64>();
        assert_eq!(debias(&c).unwrap(), c);
        assert!(is_debiasable(&c, false, &0.0).unwrap().verdict);
        // c(0,2) = 0 with zero diagonal: not strict
        let s = is_debiasable(&c, true, &0.0).unwrap();
        assert_eq!(s.witness, Some((0, 2)));
    }

    #[test]
    fn witness_is_most_negative() {
        let c = CostMatrix::new(array![[0.0, -0.5, 0.0], [-0.5, 0.0, -0.2], [0.0, -0.2, 0.0]]).unwrap();
        let cert = is_debiasable(&c, false, &0.0).unwrap();
        assert!(!cert.verdict);
        assert_eq!(cert.witness, Some((0, 1)));
        assert_eq!(cert.witness_value, Some(-0.5));
    }

    #[test]
    fn one_by_one_roundtrip() {
        let c = CostMatrix::new(array![[3.0]]).unwrap();
        let rep = constructive_inf_rep(&c).unwrap();
        assert_eq!(rep.psi(), &array![[1.5]]);
        assert_eq!(eval_inf_rep(&rep), c);
        assert!(strict_via_minimizer_sets(&rep, &0.0).verdict);
    }

    #[test]
    fn non_debiasable_rep_fails() {
        let c = CostMatrix::new(array![[0.0, -1.0], [-1.0, 0.0]]).unwrap();
        assert!(matches!(
            constructive_inf_rep(&c),
            Err(Error::NotDebiasable { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn exact_roundtrip() {
        let q = ExactReal::from_ratio;
        let c = CostMatrix::new(array![
            [q(1, 3), q(5, 7), ExactReal::Infinity],
            [q(5, 7), q(2, 9), q(3, 5)],
            [ExactReal::Infinity, q(3, 5), q(4, 5)]
        ])
        .unwrap();
        let rep = constructive_inf_rep(&c).unwrap();
        assert_eq!(eval_inf_rep(&rep), c);
    }

    #[test]
    fn shared_column_is_not_strict() {
        let rep = InfRepresentation::new(array![[0.0, 1.0], [0.0, 2.0]]).unwrap();
        let cert = strict_via_minimizer_sets(&rep, &0.0);
        assert!(!cert.verdict);
        assert_eq!(cert.shared_column, Some(0));
        assert_eq!(*debias(&eval_inf_rep(&rep)).unwrap().get(0, 1), 0.0);
    }

    #[test]
    fn single_zero_column() {
        let rep = InfRepresentation::new(Array2::<f64>::zeros((3, 1))).unwrap();
        assert_eq!(eval_inf_rep(&rep).entries(), &Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn inf_costs_empty_is_error() {
        assert!(matches!(inf_costs::<f64>(&[]), Err(Error::EmptyFamily)));
    }

    #[test]
    fn negative_coefficient_rejected() {
        let c = CostMatrix::new(array![[0.0]]).unwrap();
        assert!(matches!(sum_costs(&[c], &[-1.0]), Err(Error::NegativeCoefficient(_))));
    }

    #[test]
    fn tilde_of_constant() {
        let c = CostMatrix::new(Array2::from_elem((3, 3), 2.5)).unwrap();
        assert_eq!(one_step_tilde(&c).unwrap(), c);
    }

    #[test]
    fn tilde_of_counterexample() {
        let c = counterexample_cost::<f64>();
        let t = one_step_tilde(&c).unwrap();
        // the route through the third point removes the unit cost
        assert_eq!(t.entries(), &Array2::<f64>::zeros((3, 3)));
        assert_eq!(t.diagonal(), c.diagonal());
    }
}
