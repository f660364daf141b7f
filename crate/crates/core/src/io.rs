//! JSON forms of measures, tensors, costs, kernels and solver results.
//!
//! Costs encode `+inf` as the string `"inf"`; tensors carry their shape next to
//! the nested entries.

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::costs::CostMatrix;
use crate::decomposition::BarycenterSolution;
use crate::error::{Error, Result};
use crate::kernels::{Embedding, KernelMatrix, McKernelEstimate};
use crate::measures::{CouplingTensor, DiscreteMeasure};
use crate::scalar::{lit, Real};
use crate::solvers::SinkhornSolution;

fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn vec_f64<T: Real>(a: &Array1<T>) -> Vec<f64> {
    a.iter().map(|v| to_f64(*v)).collect()
}

fn rows_f64<T: Real>(a: &Array2<T>) -> Vec<Vec<f64>> {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| to_f64(*v)).collect())
        .collect()
}

fn matrix<T: Real>(rows: &[Vec<f64>], what: &str) -> Result<Array2<T>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::Parse(format!("{what}: ragged rows ({} vs {m})", bad.len())));
    }
    Ok(Array2::from_shape_fn((n, m), |(i, j)| lit(rows[i][j])))
}

/// `{"weights": [...], "coordinates": [[...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<Vec<f64>>>,
}

impl MeasureJson {
    pub fn from_measure<T: Real>(m: &DiscreteMeasure<T>) -> Self {
        Self {
            weights: vec_f64(m.weights()),
            coordinates: m.coordinates().map(rows_f64),
        }
    }

    pub fn to_measure<T: Real>(&self) -> Result<DiscreteMeasure<T>> {
        let m = DiscreteMeasure::new(self.weights.iter().map(|w| lit::<T>(*w)).collect::<Array1<T>>())?;
        match &self.coordinates {
            Some(c) => m.with_coordinates(matrix(c, "coordinates")?),
            None => Ok(m),
        }
    }
}

/// A cost entry: a number or `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryJson {
    Number(f64),
    Symbol(String),
}

impl EntryJson {
    fn encode(v: f64) -> Self {
        if v == f64::INFINITY {
            Self::Symbol("inf".into())
        } else {
            Self::Number(v)
        }
    }

    fn decode(&self) -> Result<f64> {
        match self {
            Self::Number(v) => Ok(*v),
            Self::Symbol(s) if s == "inf" => Ok(f64::INFINITY),
            Self::Symbol(s) => Err(Error::Parse(format!(
                "unknown cost entry {s:?}; use a number or \"inf\""
            ))),
        }
    }
}

/// `{"entries": [[...]], "symmetric": true}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostJson {
    pub entries: Vec<Vec<EntryJson>>,
    #[serde(default)]
    pub symmetric: bool,
}

impl CostJson {
    pub fn from_cost<T: Real>(c: &CostMatrix<T>) -> Self {
        Self {
            entries: c
                .entries()
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| EntryJson::encode(to_f64(*v))).collect())
                .collect(),
            symmetric: c.is_symmetric(),
        }
    }

    pub fn to_cost<T: Real>(&self) -> Result<CostMatrix<T>> {
        let rows = self
            .entries
            .iter()
            .map(|r| r.iter().map(EntryJson::decode).collect::<Result<Vec<f64>>>())
            .collect::<Result<Vec<_>>>()?;
        let c = CostMatrix::new(matrix(&rows, "cost entries")?)?;
        if self.symmetric && !c.is_symmetric() {
            return Err(Error::Parse("cost declared symmetric but is not".into()));
        }
        Ok(c)
    }
}

/// Kernel matrices mirror the cost layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelJson {
    pub entries: Vec<Vec<f64>>,
    #[serde(default = "yes")]
    pub symmetric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

fn yes() -> bool {
    true
}

impl KernelJson {
    pub fn from_kernel<T: Real>(k: &KernelMatrix<T>) -> Self {
        Self {
            entries: rows_f64(k.entries()),
            symmetric: true,
            epsilon: k.epsilon().map(to_f64),
        }
    }

    pub fn to_kernel<T: Real>(&self) -> Result<KernelMatrix<T>> {
        KernelMatrix::new(matrix(&self.entries, "kernel entries")?, self.epsilon.map(lit))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingJson {
    pub features: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub psd_residual: f64,
}

impl EmbeddingJson {
    pub fn from_embedding<T: Real>(e: &Embedding<T>) -> Self {
        Self {
            features: rows_f64(&e.features),
            offsets: vec_f64(&e.offsets),
            psd_residual: to_f64(e.psd_residual),
        }
    }
}

/// `{"estimate": ..., "stderr": ..., "n_samples": ..., "seed": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McJson {
    pub estimate: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub n_samples: usize,
    pub seed: u64,
}

impl McJson {
    pub fn from_estimate<T: Real>(e: &McKernelEstimate<T>) -> Self {
        Self {
            estimate: rows_f64(&e.estimate),
            stderr: rows_f64(&e.stderr),
            n_samples: e.n_samples,
            seed: e.seed,
        }
    }
}

/// `{"shape": [...], "entries": nested arrays}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub shape: Vec<usize>,
    pub entries: Value,
}

fn nest(flat: &[f64], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => Value::from(flat[0]),
        Some((&n, rest)) => {
            let stride: usize = rest.iter().product();
            Value::Array(
                (0..n)
                    .map(|i| nest(&flat[i * stride..(i + 1) * stride], rest))
                    .collect(),
            )
        }
    }
}

fn flatten(v: &Value, shape: &[usize], out: &mut Vec<f64>) -> Result<()> {
    match (shape.split_first(), v) {
        (None, Value::Number(x)) => {
            out.push(x.as_f64().expect("finite json number"));
            Ok(())
        }
        (Some((&n, rest)), Value::Array(items)) if items.len() == n => {
            items.iter().try_for_each(|item| flatten(item, rest, out))
        }
        _ => Err(Error::Parse(format!("tensor entries do not match shape {shape:?}"))),
    }
}

impl TensorJson {
    pub fn from_tensor<T: Real>(t: &CouplingTensor<T>) -> Self {
        let flat: Vec<f64> = t.entries().iter().map(|v| to_f64(*v)).collect();
        Self {
            shape: t.shape().to_vec(),
            entries: nest(&flat, t.shape()),
        }
    }

    pub fn to_tensor<T: Real>(&self) -> Result<CouplingTensor<T>> {
        let mut flat = Vec::new();
        flatten(&self.entries, &self.shape, &mut flat)?;
        let a = ArrayD::from_shape_vec(IxDyn(&self.shape), flat.into_iter().map(lit::<T>).collect())
            .map_err(|e| Error::Parse(e.to_string()))?;
        CouplingTensor::new(a)
    }
}

/// Solve result; the plan is included on request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornJson {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<Vec<f64>>>,
    pub value: f64,
    pub dual_value: f64,
    pub iterations: usize,
    pub marginal_error: f64,
}

impl SinkhornJson {
    pub fn from_solution<T: Real>(s: &SinkhornSolution<T>, with_plan: bool) -> Self {
        Self {
            f: vec_f64(&s.f),
            g: vec_f64(&s.g),
            plan: with_plan.then(|| rows_f64(&s.plan)),
            value: to_f64(s.primal_value),
            dual_value: to_f64(s.dual_value),
            iterations: s.iterations,
            marginal_error: to_f64(s.marginal_error),
        }
    }
}

/// `{"value_lhs", "value_rhs", "gap", "iterations", "residual"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub value_lhs: f64,
    pub value_rhs: f64,
    pub gap: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl DecompositionJson {
    /// Left side is the direct solve of the log-sum-exp cost.
    pub fn from_solution<T: Real>(s: &BarycenterSolution<T>) -> Self {
        Self {
            value_lhs: to_f64(s.direct_value),
            value_rhs: to_f64(s.value),
            gap: to_f64(s.identity_gap()),
            iterations: s.iterations,
            residual: to_f64(s.fixed_point_residual),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cost_inf_string() {
        let c = CostMatrix::new(array![[0.0, f64::INFINITY], [f64::INFINITY, 1.0]]).unwrap();
        let s = serde_json::to_string(&CostJson::from_cost(&c)).unwrap();
        assert_eq!(s, r#"{"entries":[[0.0,"inf"],["inf",1.0]],"symmetric":true}"#);
        let back: CostJson = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_cost::<f64>().unwrap(), c);
    }

    #[test]
    fn bad_symbol() {
        let j: CostJson = serde_json::from_str(r#"{"entries":[["-inf"]]}"#).unwrap();
        assert!(matches!(j.to_cost::<f64>(), Err(Error::Parse(_))));
    }

    #[test]
    fn measure_roundtrip() {
        let m = DiscreteMeasure::probability(array![0.25, 0.75])
            .unwrap()
            .with_coordinates(array![[0.0, 1.0], [2.0, 3.0]])
            .unwrap();
        let s = serde_json::to_string(&MeasureJson::from_measure(&m)).unwrap();
        assert_eq!(s, r#"{"weights":[0.25,0.75],"coordinates":[[0.0,1.0],[2.0,3.0]]}"#);
        let back: MeasureJson = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_measure::<f64>().unwrap(), m);
    }

    #[test]
    fn tensor_roundtrip() {
        let t =
            CouplingTensor::new(ArrayD::from_shape_vec(IxDyn(&[2, 1, 2]), vec![0.1, 0.2, 0.3, 0.4]).unwrap()).unwrap();
        let j = TensorJson::from_tensor(&t);
        assert_eq!(
            serde_json::to_string(&j).unwrap(),
            r#"{"shape":[2,1,2],"entries":[[[0.1,0.2]],[[0.3,0.4]]]}"#
        );
        assert_eq!(j.to_tensor::<f64>().unwrap(), t);
    }

    #[test]
    fn tensor_shape_mismatch() {
        let j: TensorJson = serde_json::from_str(r#"{"shape":[2,2],"entries":[[0.5,0.5]]}"#).unwrap();
        assert!(j.to_tensor::<f64>().is_err());
    }
}
