//! Step-two Carnot groups described by their Kaplan matrices.
//!
//! A group is fixed by the dimensions `m = dim V1`, `k = dim V2` and the
//! skew-symmetric matrices `J(e_l)`, `l = 1..k`, written in orthonormal
//! bases. Points are stored in logarithmic coordinates `(z, sigma)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

const FLOAT_TOL: f64 = 1e-12;

/// A validated step-two Carnot group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    name: String,
    m: usize,
    k: usize,
    j: Vec<DMatrix<f64>>,
}

/// A point of the group in logarithmic coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub z: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GroupPoint {
    pub fn new(z: Vec<f64>, sigma: Vec<f64>) -> Self {
        GroupPoint { z, sigma }
    }

    pub fn identity(spec: &GroupSpec) -> Self {
        GroupPoint {
            z: vec![0.0; spec.m],
            sigma: vec![0.0; spec.k],
        }
    }

    /// Splits a flat coordinate list `z1..zm, s1..sk`.
    pub fn from_coords(spec: &GroupSpec, coords: &[f64]) -> Result<Self> {
        if coords.len() != spec.m + spec.k {
            return Err(Error::Dimension(format!(
                "expected {} coordinates (m = {}, k = {}), got {}",
                spec.m + spec.k,
                spec.m,
                spec.k,
                coords.len()
            )));
        }
        Ok(GroupPoint {
            z: coords[..spec.m].to_vec(),
            sigma: coords[spec.m..].to_vec(),
        })
    }

    pub fn coords(&self) -> Vec<f64> {
        self.z.iter().chain(&self.sigma).copied().collect()
    }

    pub fn is_identity(&self) -> bool {
        self.z.iter().chain(&self.sigma).all(|&x| x == 0.0)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecDocument {
    name: String,
    m: usize,
    k: usize,
    #[serde(rename = "J")]
    j: Vec<Value>,
}

impl GroupSpec {
    /// Builds and validates a group with floating-point tolerance `1e-12`.
    pub fn new(name: impl Into<String>, m: usize, k: usize, j: Vec<DMatrix<f64>>) -> Result<Self> {
        let spec = GroupSpec {
            name: name.into(),
            m,
            k,
            j,
        };
        spec.validate(FLOAT_TOL)?;
        Ok(spec)
    }

    /// Parses the JSON group document `{"name", "m", "k", "J"}`.
    ///
    /// Each entry of `J` is either a flat row-major list of `m*m` numbers or a
    /// list of `m` rows. When every entry is an integer the skew-symmetry and
    /// independence checks are exact; otherwise they use tolerance `1e-12`.
    pub fn parse(document: &str) -> Result<Self> {
        let doc: SpecDocument = serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.j.len() != doc.k {
            return Err(Error::Validation(format!(
                "dimension mismatch: k = {} but {} matrices given",
                doc.k,
                doc.j.len()
            )));
        }
        let mut all_integer = true;
        let mut mats = Vec::with_capacity(doc.k);
        for (l, entry) in doc.j.iter().enumerate() {
            let flat = flatten_matrix(entry, doc.m)
                .map_err(|msg| Error::Validation(format!("dimension mismatch in J[{}]: {msg}", l + 1)))?;
            for v in &flat {
                match v {
                    Value::Number(n) if n.is_i64() || n.is_u64() => {}
                    Value::Number(_) => all_integer = false,
                    _ => return Err(Error::Parse(format!("J[{}] contains a non-number", l + 1))),
                }
            }
            let data: Vec<f64> = flat.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect();
            if data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse(format!("J[{}] contains a non-finite entry", l + 1)));
            }
            mats.push(DMatrix::from_row_slice(doc.m, doc.m, &data));
        }
        let spec = GroupSpec {
            name: doc.name,
            m: doc.m,
            k: doc.k,
            j: mats,
        };
        if all_integer {
            spec.validate_exact()?;
        } else {
            spec.validate(FLOAT_TOL)?;
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let j: Vec<Value> = self
            .j
            .iter()
            .map(|mat| {
                Value::Array(
                    (0..self.m)
                        .map(|r| Value::Array((0..self.m).map(|c| Value::from(mat[(r, c)])).collect()))
                        .collect(),
                )
            })
            .collect();
        let doc = SpecDocument {
            name: self.name.clone(),
            m: self.m,
            k: self.k,
            j,
        };
        serde_json::to_string_pretty(&doc).expect("group document serializes")
    }

    fn validate_shape(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Validation(format!("m must be at least 2, got {}", self.m)));
        }
        if self.k < 1 {
            return Err(Error::Validation("k must be positive".into()));
        }
        if self.j.len() != self.k {
            return Err(Error::Validation(format!(
                "dimension mismatch: k = {} but {} matrices given",
                self.k,
                self.j.len()
            )));
        }
        for (l, mat) in self.j.iter().enumerate() {
            if mat.nrows() != self.m || mat.ncols() != self.m {
                return Err(Error::Validation(format!(
                    "dimension mismatch: J[{}] is {}x{}, expected {}x{}",
                    l + 1,
                    mat.nrows(),
                    mat.ncols(),
                    self.m,
                    self.m
                )));
            }
        }
        Ok(())
    }

    fn validate(&self, tol: f64) -> Result<()> {
        self.validate_shape()?;
        for (l, mat) in self.j.iter().enumerate() {
            let skew_err = (mat + mat.transpose()).amax();
            if skew_err > tol {
                return Err(Error::Validation(format!(
                    "J[{}] is not skew-symmetric (max |J + J^T| = {skew_err:e})",
                    l + 1
                )));
            }
        }
        if self.j.iter().all(|mat| mat.amax() == 0.0) {
            return Err(Error::Validation("all structure matrices vanish".into()));
        }
        let rank = stacked_rank(&self.j, tol);
        if rank < self.k {
            return Err(Error::Validation(format!(
                "structure matrices are linearly dependent (rank {rank} < k = {})",
                self.k
            )));
        }
        Ok(())
    }

    fn validate_exact(&self) -> Result<()> {
        self.validate_shape()?;
        for (l, mat) in self.j.iter().enumerate() {
            if mat != &(-mat.transpose()) {
                return Err(Error::Validation(format!("J[{}] is not skew-symmetric", l + 1)));
            }
        }
        if self.j.iter().all(|mat| mat.amax() == 0.0) {
            return Err(Error::Validation("all structure matrices vanish".into()));
        }
        let rank = exact_stacked_rank(&self.j)?;
        if rank < self.k {
            return Err(Error::Validation(format!(
                "structure matrices are linearly dependent (rank {rank} < k = {})",
                self.k
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Homogeneous dimension `m + 2k`.
    pub fn homogeneous_dimension(&self) -> usize {
        self.m + 2 * self.k
    }

    pub fn structure_matrices(&self) -> &[DMatrix<f64>] {
        &self.j
    }

    fn check_point(&self, g: &GroupPoint) -> Result<()> {
        if g.z.len() != self.m || g.sigma.len() != self.k {
            return Err(Error::Dimension(format!(
                "point has dimensions ({}, {}), group has ({}, {})",
                g.z.len(),
                g.sigma.len(),
                self.m,
                self.k
            )));
        }
        Ok(())
    }

    /// The Kaplan map `J(lambda) = sum_l lambda_l J(e_l)`.
    pub fn j_of(&self, lambda: &[f64]) -> DMatrix<f64> {
        assert_eq!(lambda.len(), self.k, "lambda must have k = {} entries", self.k);
        let mut out = DMatrix::zeros(self.m, self.m);
        for (l, mat) in self.j.iter().enumerate() {
            if lambda[l] != 0.0 {
                out += mat * lambda[l];
            }
        }
        out
    }

    /// `<J(e_l) z, zeta>` for every `l`.
    pub fn bracket(&self, z: &[f64], zeta: &[f64]) -> Vec<f64> {
        self.j
            .iter()
            .map(|mat| {
                let mut s = 0.0;
                for r in 0..self.m {
                    let mut row = 0.0;
                    for c in 0..self.m {
                        row += mat[(r, c)] * z[c];
                    }
                    s += row * zeta[r];
                }
                s
            })
            .collect()
    }

    /// Group law `(z + zeta, sigma + tau + 1/2 sum_l <J(e_l) z, zeta> e_l)`.
    pub fn multiply(&self, g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(g)?;
        self.check_point(h)?;
        let br = self.bracket(&g.z, &h.z);
        Ok(GroupPoint {
            z: g.z.iter().zip(&h.z).map(|(a, b)| a + b).collect(),
            sigma: (0..self.k).map(|l| g.sigma[l] + h.sigma[l] + 0.5 * br[l]).collect(),
        })
    }

    pub fn inverse(&self, g: &GroupPoint) -> GroupPoint {
        GroupPoint {
            z: g.z.iter().map(|x| -x).collect(),
            sigma: g.sigma.iter().map(|x| -x).collect(),
        }
    }

    /// Anisotropic dilation `(r z, r^2 sigma)`.
    pub fn dilate(&self, r: f64, g: &GroupPoint) -> Result<GroupPoint> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dilation factor must be positive, got {r}"
            )));
        }
        self.check_point(g)?;
        Ok(GroupPoint {
            z: g.z.iter().map(|x| r * x).collect(),
            sigma: g.sigma.iter().map(|x| r * r * x).collect(),
        })
    }

    /// `J(e_l) J(e_l') + J(e_l') J(e_l) = -2 delta_{l l'} I` entrywise to `1e-12`.
    pub fn is_heisenberg_type(&self) -> bool {
        let id = DMatrix::<f64>::identity(self.m, self.m);
        for a in 0..self.k {
            for b in a..self.k {
                let anti = &self.j[a] * &self.j[b] + &self.j[b] * &self.j[a];
                let target = if a == b {
                    &id * -2.0
                } else {
                    DMatrix::zeros(self.m, self.m)
                };
                if (anti - target).amax() > FLOAT_TOL {
                    return false;
                }
            }
        }
        true
    }

    /// The Heisenberg group `H^n` (m = 2n, k = 1).
    pub fn heisenberg(n: usize) -> Self {
        assert!(n >= 1);
        let m = 2 * n;
        let mut j = DMatrix::zeros(m, m);
        for b in 0..n {
            j[(2 * b, 2 * b + 1)] = 1.0;
            j[(2 * b + 1, 2 * b)] = -1.0;
        }
        GroupSpec::new(format!("heisenberg{n}"), m, 1, vec![j]).expect("H^n is a valid group")
    }

    /// Quaternionic H-type group: `R^4 = H` with left multiplication by `i, j, k`.
    pub fn quaternionic() -> Self {
        // basis (1, i, j, k); columns are images of basis vectors
        let li = [[0., -1., 0., 0.], [1., 0., 0., 0.], [0., 0., 0., -1.], [0., 0., 1., 0.]];
        let lj = [[0., 0., -1., 0.], [0., 0., 0., 1.], [1., 0., 0., 0.], [0., -1., 0., 0.]];
        let lk = [[0., 0., 0., -1.], [0., 0., -1., 0.], [0., 1., 0., 0.], [1., 0., 0., 0.]];
        let j = [li, lj, lk]
            .iter()
            .map(|rows| DMatrix::from_fn(4, 4, |r, c| rows[r][c]))
            .collect();
        GroupSpec::new("quaternionic", 4, 3, j).expect("quaternionic group is valid")
    }

    /// Free step-two group on `q` generators (m = q, k = q(q-1)/2).
    pub fn free_step_two(q: usize) -> Self {
        assert!(q >= 2);
        let mut j = Vec::new();
        for a in 0..q {
            for b in (a + 1)..q {
                let mut mat = DMatrix::zeros(q, q);
                mat[(a, b)] = 1.0;
                mat[(b, a)] = -1.0;
                j.push(mat);
            }
        }
        let k = j.len();
        GroupSpec::new(format!("free{q}"), q, k, j).expect("free step-two group is valid")
    }

    /// Built-in groups by name: `heisenberg<n>`, `quaternionic`, `free<q>`.
    pub fn builtin(name: &str) -> Option<Self> {
        if name == "quaternionic" {
            return Some(Self::quaternionic());
        }
        if let Some(n) = name.strip_prefix("heisenberg").and_then(|s| s.parse().ok()) {
            return (n >= 1).then(|| Self::heisenberg(n));
        }
        if let Some(q) = name.strip_prefix("free").and_then(|s| s.parse().ok()) {
            return (q >= 2).then(|| Self::free_step_two(q));
        }
        None
    }
}

fn flatten_matrix(entry: &Value, m: usize) -> std::result::Result<Vec<Value>, String> {
    let arr = entry.as_array().ok_or("matrix must be an array")?;
    if arr.len() == m * m && arr.iter().all(|v| !v.is_array()) {
        return Ok(arr.clone());
    }
    if arr.len() == m && arr.iter().all(|v| v.as_array().map(|r| r.len() == m).unwrap_or(false)) {
        return Ok(arr.iter().flat_map(|r| r.as_array().unwrap().clone()).collect());
    }
    Err(format!("expected {m}x{m} entries"))
}

/// Rank of the k x m^2 matrix whose rows are the flattened J(e_l).
fn stacked_rank(j: &[DMatrix<f64>], tol: f64) -> usize {
    let rows: Vec<Vec<f64>> = j.iter().map(|mat| mat.iter().copied().collect()).collect();
    let scale = rows.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
    let mut a = rows;
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    for c in 0..cols {
        if rank == a.len() {
            break;
        }
        let (piv, val) = (rank..a.len())
            .map(|r| (r, a[r][c].abs()))
            .fold((rank, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if val <= tol * scale {
            continue;
        }
        a.swap(rank, piv);
        for r in 0..a.len() {
            if r != rank {
                let f = a[r][c] / a[rank][c];
                if f != 0.0 {
                    let pivot_row = a[rank].clone();
                    for (x, v) in a[r].iter_mut().zip(&pivot_row).skip(c) {
                        *x -= f * v;
                    }
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Fraction-free (Bareiss) elimination on integer entries.
fn exact_stacked_rank(j: &[DMatrix<f64>]) -> Result<usize> {
    let mut a: Vec<Vec<i128>> = j.iter().map(|mat| mat.iter().map(|&v| v as i128).collect()).collect();
    let rows = a.len();
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    let mut prev: i128 = 1;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&r| a[r][c] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        for r in (rank + 1)..rows {
            for cc in (c + 1)..cols {
                let v = a[r][cc]
                    .checked_mul(a[rank][c])
                    .and_then(|x| x.checked_sub(a[r][c].checked_mul(a[rank][cc])?))
                    .ok_or_else(|| Error::Validation("integer overflow in rank check".into()))?;
                a[r][cc] = v / prev;
            }
            a[r][c] = 0;
        }
        prev = a[rank][c];
        rank += 1;
    }
    Ok(rank)
}

/// Coefficient blocks of the horizontal Laplacian
/// `Delta_z + 1/4 sum <J_l z, J_l' z> d_sl d_sl' + sum_l Theta_l d_sl`,
/// `Theta_l = sum_s <J_l z, e_s> d_zs`.
#[derive(Debug, Clone)]
pub struct HorizontalOperator {
    spec: GroupSpec,
}

impl HorizontalOperator {
    pub fn new(spec: GroupSpec) -> Self {
        HorizontalOperator { spec }
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    /// The k x k matrix `1/4 <J_l z, J_l' z>`.
    pub fn sigma_block(&self, z: &[f64]) -> DMatrix<f64> {
        let jz = self.jz(z);
        let k = self.spec.k;
        DMatrix::from_fn(k, k, |a, b| {
            0.25 * jz[a].iter().zip(&jz[b]).map(|(x, y)| x * y).sum::<f64>()
        })
    }

    /// The k x m matrix of coefficients `<J_l z, e_s>` of the mixed fields.
    pub fn theta_block(&self, z: &[f64]) -> DMatrix<f64> {
        let jz = self.jz(z);
        DMatrix::from_fn(self.spec.k, self.spec.m, |l, s| jz[l][s])
    }

    fn jz(&self, z: &[f64]) -> Vec<Vec<f64>> {
        self.spec
            .j
            .iter()
            .map(|mat| {
                (0..self.spec.m)
                    .map(|r| (0..self.spec.m).map(|c| mat[(r, c)] * z[c]).sum())
                    .collect()
            })
            .collect()
    }
}
