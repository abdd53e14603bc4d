// SPDX-License-Identifier: Apache-2.0

//! Federated problems `F(x) = sum_j f_j(x)` and their JSON file format.
//!
//! ```json
//! { "d": 2, "m": 1,
//!   "clients": [ { "kind": "quadratic", "A": [1.0, 0.0, 0.0, 1.0], "b": [1.0, 1.0] } ],
//!   "x_true": [1.0, 1.0], "seed": 7 }
//! ```
//!
//! `A` is row-major with `len(b)` rows and `d` columns.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonfmt;
use crate::losses::{ConvexityConstants, LocalLoss, LogisticLoss, QuadraticLoss};

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedProblem {
    dim: usize,
    clients: Vec<LocalLoss>,
    pub x_true: Option<DVector<f64>>,
    pub seed: Option<u64>,
}

impl FederatedProblem {
    pub fn new(clients: Vec<LocalLoss>) -> Result<Self> {
        let dim = clients
            .first()
            .ok_or_else(|| Error::InvalidParameter("problem needs at least one client".into()))?
            .dim();
        if let Some(bad) = clients.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        Ok(Self { dim, clients, x_true: None, seed: None })
    }

    pub fn with_truth(mut self, x_true: DVector<f64>) -> Self {
        self.x_true = Some(x_true);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn clients(&self) -> &[LocalLoss] {
        &self.clients
    }

    pub fn is_least_squares(&self) -> bool {
        self.clients.iter().all(|c| c.as_quadratic().is_some())
    }

    pub fn quadratic_clients(&self) -> Option<Vec<&QuadraticLoss>> {
        self.clients.iter().map(LocalLoss::as_quadratic).collect()
    }

    pub fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }

    /// `F(x)`, summed in ascending client order.
    pub fn cost(&self, x: &DVector<f64>) -> f64 {
        self.clients.iter().map(|c| c.value(x)).sum()
    }

    /// `sum_j grad f_j(x)`.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for c in &self.clients {
            g += c.gradient(x);
        }
        g
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for c in &self.clients {
            h += c.hessian(x);
        }
        h
    }

    pub fn client_constants(&self) -> Vec<ConvexityConstants> {
        self.clients.iter().map(LocalLoss::convexity_constants).collect()
    }

    /// `(ell_*, L_*)`: smallest strong convexity and largest smoothness modulus
    /// over the clients.
    pub fn constants(&self) -> ConvexityConstants {
        let per = self.client_constants();
        let ell = per.iter().map(|c| c.ell).fold(f64::INFINITY, f64::min);
        let big_l = per.iter().map(|c| c.big_l).fold(0.0, f64::max);
        ConvexityConstants { ell: ell.min(big_l), big_l }
    }

    pub fn to_file(&self) -> ProblemFile {
        let clients = self
            .clients
            .iter()
            .map(|c| {
                let (kind, a, b) = match c {
                    LocalLoss::Quadratic(q) => (LossKind::Quadratic, q.design(), q.response()),
                    LocalLoss::Logistic(l) => (LossKind::Logistic, l.design(), l.labels()),
                };
                // nalgebra is column-major; the file is row-major.
                let rows = a.transpose().as_slice().to_vec();
                ClientFile { kind, a: rows, b: b.as_slice().to_vec() }
            })
            .collect();
        ProblemFile {
            d: self.dim,
            m: self.clients.len(),
            clients,
            x_true: self.x_true.as_ref().map(|x| x.as_slice().to_vec()),
            seed: self.seed,
        }
    }

    pub fn from_file(file: ProblemFile) -> Result<Self> {
        if file.clients.len() != file.m {
            return Err(Error::Config(format!(
                "problem declares m={} but lists {} clients",
                file.m,
                file.clients.len()
            )));
        }
        let d = file.d;
        if d == 0 {
            return Err(Error::Config("problem dimension d must be >= 1".into()));
        }
        let mut clients = Vec::with_capacity(file.m);
        for (j, c) in file.clients.into_iter().enumerate() {
            let n = c.b.len();
            if c.a.len() != n * d {
                return Err(Error::Config(format!(
                    "client {j}: A has {} entries, expected n*d = {}*{}",
                    c.a.len(),
                    n,
                    d
                )));
            }
            let a = DMatrix::from_row_slice(n, d, &c.a);
            let b = DVector::from_vec(c.b);
            clients.push(match c.kind {
                LossKind::Quadratic => LocalLoss::Quadratic(QuadraticLoss::new(a, b)?),
                LossKind::Logistic => LocalLoss::Logistic(LogisticLoss::new(a, b)?),
            });
        }
        let mut p = Self::new(clients)?;
        if let Some(x) = file.x_true {
            if x.len() != d {
                return Err(Error::Config(format!("x_true has length {}, expected {d}", x.len())));
            }
            p.x_true = Some(DVector::from_vec(x));
        }
        p.seed = file.seed;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(jsonfmt::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read problem {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Quadratic,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientFile {
    pub kind: LossKind,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub d: usize,
    pub m: usize,
    pub clients: Vec<ClientFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_true: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_client() -> FederatedProblem {
        let c1 = QuadraticLoss::new(DMatrix::from_row_slice(1, 1, &[2.0]), DVector::from_element(1, 2.0));
        let c2 = QuadraticLoss::new(DMatrix::from_row_slice(1, 1, &[1.0]), DVector::from_element(1, -1.0));
        FederatedProblem::new(vec![LocalLoss::Quadratic(c1.unwrap()), LocalLoss::Quadratic(c2.unwrap())])
            .unwrap()
    }

    #[test]
    fn constants_take_min_ell_and_max_l() {
        let c = two_client().constants();
        assert_eq!(c.ell, 1.0);
        assert_eq!(c.big_l, 4.0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let a = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, -1.0 / 3.0, 5.0, 1e-17]);
        let b = DVector::from_column_slice(&[1.0, -1.0]);
        let mut p = FederatedProblem::new(vec![
            LocalLoss::Quadratic(QuadraticLoss::new(a.clone(), b.clone()).unwrap()),
            LocalLoss::Logistic(LogisticLoss::new(a, b).unwrap()),
        ])
        .unwrap()
        .with_truth(DVector::from_column_slice(&[0.7, 0.1, 2.0 / 7.0]));
        p.seed = Some(42);
        let text = p.to_json().unwrap();
        let back = FederatedProblem::from_json(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json().unwrap(), text);
        // row-major layout on disk
        assert!(text.contains("\"A\": [\n        1.0000000000000001e-1,\n        2.0000000000000001e-1"));
    }

    #[test]
    fn rejects_malformed_files() {
        let bad = r#"{"d":2,"m":1,"clients":[{"kind":"quadratic","A":[1.0],"b":[1.0]}]}"#;
        assert!(matches!(FederatedProblem::from_json(bad), Err(Error::Config(_))));
        let bad = r#"{"d":1,"m":2,"clients":[{"kind":"quadratic","A":[1.0],"b":[1.0]}]}"#;
        assert!(FederatedProblem::from_json(bad).is_err());
        let bad = r#"{"d":1,"m":1,"clients":[{"kind":"logistic","A":[1.0],"b":[0.0]}]}"#;
        assert!(FederatedProblem::from_json(bad).is_err());
        let bad = r#"{"d":1,"m":1,"extra":3,"clients":[]}"#;
        assert!(matches!(FederatedProblem::from_json(bad), Err(Error::Json(_))));
    }
}
