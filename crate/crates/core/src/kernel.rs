//! Kernels, point sets and Gram matrices.
//!
//! A [`KernelSpec`] is the declarative (serializable) description of a
//! kernel; [`Kernel`] is the validated runtime object. Everything downstream
//! of this module talks to kernels through [`KernelSource`], an indexed view
//! `entry(i, j) = K(x_i, x_j)` over a fixed point set. Two sources are
//! provided: [`KernelOnPoints`] (lazy) and [`GramMatrix`] (dense).
//!
//! The eigendecay kernel is a truncated Mercer expansion
//! `K(x, y) = sum_i C_p i^-beta phi_i(x) phi_i(y)` over the tensorized cosine
//! basis on `[0,1]^d`: `phi_m(x) = prod_k c_{m_k}(x_k)` with `c_0 = 1` and
//! `c_m(t) = sqrt(2) cos(pi m t)`. Multi-indices are ordered by total
//! frequency, then lexicographically, so `phi_1` is the constant function.
//! Every basis function is bounded by `2^{d/2}` in sup norm.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default number of retained eigenpairs for the eigendecay kernel.
pub const DEFAULT_NUM_TERMS: usize = 200;

/// Relative asymmetry tolerated in a precomputed Gram.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Negative eigenvalues of a precomputed Gram down to `-PSD_RTOL * trace / n`
/// are accepted as round-off.
pub const PSD_RTOL: f64 = 1e-8;

/// Slack on `K(x,x) <= B^2` when a norm bound is declared.
pub const NORM_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf {
        gamma: f64,
    },
    Polynomial {
        degree: u32,
        #[serde(default)]
        offset: f64,
    },
    Eigendecay {
        beta: f64,
        #[serde(default = "default_num_terms")]
        num_terms: usize,
        #[serde(default = "default_amplitude", alias = "c_p")]
        amplitude: f64,
    },
    Precomputed {
        gram: Vec<Vec<f64>>,
    },
}

fn default_num_terms() -> usize {
    DEFAULT_NUM_TERMS
}

fn default_amplitude() -> f64 {
    1.0
}

/// A point of the action set: coordinates, or an id into a precomputed Gram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point<'a> {
    Coords(&'a [f64]),
    Id(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum PointData {
    Coords { dim: usize, rows: Vec<Vec<f64>> },
    Ids { len: usize },
}

/// An ordered, nonempty list of points with an optional norm bound `B`
/// (meaning `sqrt(K(x,x)) <= B` for every point).
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: PointData,
    bound: Option<f64>,
}

impl PointSet {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let first = rows.first().ok_or_else(|| invalid("point set is empty"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(invalid("points must have at least one coordinate"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("point {i} has a non-finite coordinate")));
            }
        }
        Ok(Self {
            data: PointData::Coords { dim, rows },
            bound: None,
        })
    }

    /// Ids `0..len` into a precomputed Gram.
    pub fn ids(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(invalid("point set is empty"));
        }
        Ok(Self {
            data: PointData::Ids { len },
            bound: None,
        })
    }

    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(invalid(format!("norm bound B must be positive, got {bound}")));
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        match &self.data {
            PointData::Coords { rows, .. } => rows.len(),
            PointData::Ids { len } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate dimension, `None` for id-based sets.
    pub fn dim(&self) -> Option<usize> {
        match &self.data {
            PointData::Coords { dim, .. } => Some(*dim),
            PointData::Ids { .. } => None,
        }
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn get(&self, i: usize) -> Point<'_> {
        match &self.data {
            PointData::Coords { rows, .. } => Point::Coords(&rows[i]),
            PointData::Ids { .. } => Point::Id(i),
        }
    }

    pub fn rows(&self) -> Option<&[Vec<f64>]> {
        match &self.data {
            PointData::Coords { rows, .. } => Some(rows),
            PointData::Ids { .. } => None,
        }
    }
}

/// Tensorized cosine basis for a given dimension.
#[derive(Debug, Clone)]
struct CosineBasis {
    dim: usize,
    indices: Vec<Vec<u32>>,
    max_freq: u32,
}

impl CosineBasis {
    fn new(dim: usize, num_terms: usize) -> Self {
        let mut indices = Vec::with_capacity(num_terms);
        let mut total = 0u32;
        while indices.len() < num_terms {
            let mut prefix = Vec::with_capacity(dim);
            compositions(total, dim, &mut prefix, &mut indices, num_terms);
            total += 1;
        }
        let max_freq = indices.iter().flatten().copied().max().unwrap_or(0);
        Self {
            dim,
            indices,
            max_freq,
        }
    }

    /// `phi_i(x)` for every retained index.
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut table = vec![vec![1.0; self.max_freq as usize + 1]; self.dim];
        for (k, &t) in x.iter().enumerate() {
            for (m, v) in table[k].iter_mut().enumerate().skip(1) {
                *v = std::f64::consts::SQRT_2 * (std::f64::consts::PI * m as f64 * t).cos();
            }
        }
        self.indices
            .iter()
            .map(|idx| {
                idx.iter()
                    .enumerate()
                    .map(|(k, &m)| table[k][m as usize])
                    .product()
            })
            .collect()
    }
}

/// Appends all compositions of `total` into `parts` nonnegative parts, in
/// lexicographic order, stopping once `out` holds `cap` entries.
fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>, cap: usize) {
    if out.len() >= cap {
        return;
    }
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out, cap);
        prefix.pop();
        if out.len() >= cap {
            return;
        }
    }
}

/// Validated kernel.
#[derive(Debug)]
pub struct Kernel {
    spec: KernelSpec,
    basis: OnceLock<CosineBasis>,
}

impl Clone for Kernel {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            basis: self.basis.clone(),
        }
    }
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        match &spec {
            KernelSpec::Linear => {}
            KernelSpec::Rbf { gamma } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(invalid(format!("rbf gamma must be positive, got {gamma}")));
                }
            }
            KernelSpec::Polynomial { degree, offset } => {
                if *degree < 1 {
                    return Err(invalid("polynomial degree must be at least 1"));
                }
                if !(*offset >= 0.0 && offset.is_finite()) {
                    return Err(invalid(format!("polynomial offset must be nonnegative, got {offset}")));
                }
            }
            KernelSpec::Eigendecay {
                beta,
                num_terms,
                amplitude,
            } => {
                if !(*beta > 2.0 && beta.is_finite()) {
                    return Err(invalid(format!("eigendecay beta must exceed 2, got {beta}")));
                }
                if *num_terms < 1 {
                    return Err(invalid("eigendecay num_terms must be at least 1"));
                }
                if !(*amplitude > 0.0 && amplitude.is_finite()) {
                    return Err(invalid(format!("eigendecay amplitude must be positive, got {amplitude}")));
                }
            }
            KernelSpec::Precomputed { gram } => validate_precomputed(gram)?,
        }
        Ok(Self {
            spec,
            basis: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn is_precomputed(&self) -> bool {
        matches!(self.spec, KernelSpec::Precomputed { .. })
    }

    /// For eigendecay kernels: whether `beta <= 2 + 1/d`, where the usual
    /// growth bounds no longer apply (the kernel itself is still valid).
    pub fn weak_decay_flag(&self, dim: usize) -> bool {
        match self.spec {
            KernelSpec::Eigendecay { beta, .. } => beta <= 2.0 + 1.0 / dim as f64,
            _ => false,
        }
    }

    fn basis_for(&self, dim: usize, num_terms: usize) -> CosineBasis {
        let cached = self.basis.get_or_init(|| CosineBasis::new(dim, num_terms));
        if cached.dim == dim {
            cached.clone()
        } else {
            CosineBasis::new(dim, num_terms)
        }
    }

    /// Checks that `p` is a valid argument for this kernel.
    pub fn check_point(&self, p: Point<'_>, expected_dim: Option<usize>) -> Result<()> {
        match (&self.spec, p) {
            (KernelSpec::Precomputed { gram }, Point::Id(id)) => {
                if id >= gram.len() {
                    return Err(Error::IdOutOfRange { id, len: gram.len() });
                }
            }
            (KernelSpec::Precomputed { .. }, Point::Coords(_)) => {
                return Err(invalid("precomputed kernel takes point ids, not coordinates"));
            }
            (_, Point::Id(_)) => {
                return Err(invalid("point ids are only valid for a precomputed kernel"));
            }
            (spec, Point::Coords(x)) => {
                if let Some(d) = expected_dim {
                    if x.len() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: x.len(),
                        });
                    }
                }
                if matches!(spec, KernelSpec::Eigendecay { .. })
                    && x.iter().any(|&t| !(0.0..=1.0).contains(&t))
                {
                    return Err(Error::OutsideUnitCube { index: 0 });
                }
            }
        }
        Ok(())
    }

    /// `K(x, y)`. Symmetric in its arguments exactly.
    pub fn eval(&self, x: Point<'_>, y: Point<'_>) -> Result<f64> {
        if let (Point::Coords(a), Point::Coords(b)) = (x, y) {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    got: b.len(),
                });
            }
        }
        self.check_point(x, None)?;
        self.check_point(y, None)?;
        Ok(self.eval_unchecked(x, y))
    }

    fn eval_unchecked(&self, x: Point<'_>, y: Point<'_>) -> f64 {
        match (&self.spec, x, y) {
            (KernelSpec::Precomputed { gram }, Point::Id(i), Point::Id(j)) => {
                let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                gram[lo][hi]
            }
            (KernelSpec::Linear, Point::Coords(a), Point::Coords(b)) => dot(a, b),
            (KernelSpec::Rbf { gamma }, Point::Coords(a), Point::Coords(b)) => {
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                (-gamma * d2).exp()
            }
            (KernelSpec::Polynomial { degree, offset }, Point::Coords(a), Point::Coords(b)) => {
                (dot(a, b) + offset).powi(*degree as i32)
            }
            (KernelSpec::Eigendecay { .. }, Point::Coords(a), Point::Coords(b)) => {
                let fa = self.features_unchecked(a);
                let fb = self.features_unchecked(b);
                dot(&fa, &fb)
            }
            _ => unreachable!("point kind checked by caller"),
        }
    }

    /// Explicit finite feature map, when the kernel has one
    /// (linear, polynomial, eigendecay). `K(x,y) = <f(x), f(y)>`.
    pub fn features(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_point(Point::Coords(x), None)?;
        Ok(match &self.spec {
            KernelSpec::Linear => Some(x.to_vec()),
            KernelSpec::Polynomial { degree, offset } => Some(polynomial_features(x, *degree, *offset)),
            KernelSpec::Eigendecay { .. } => Some(self.features_unchecked(x)),
            KernelSpec::Rbf { .. } | KernelSpec::Precomputed { .. } => None,
        })
    }

    fn features_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let KernelSpec::Eigendecay {
            beta,
            num_terms,
            amplitude,
        } = self.spec
        else {
            unreachable!("eigendecay features requested for another kernel")
        };
        let basis = self.basis_for(x.len(), num_terms);
        basis
            .eval(x)
            .into_iter()
            .enumerate()
            .map(|(i, phi)| (amplitude * ((i + 1) as f64).powf(-beta)).sqrt() * phi)
            .collect()
    }
}

fn validate_precomputed(gram: &[Vec<f64>]) -> Result<()> {
    let n = gram.len();
    if n == 0 {
        return Err(invalid("precomputed gram is empty"));
    }
    for row in gram {
        if row.len() != n {
            return Err(invalid(format!(
                "precomputed gram must be square, found a row of length {} in a {n}-row matrix",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(invalid("precomputed gram has a non-finite entry"));
        }
    }
    let scale = gram
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let asymmetric = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .find(|&(i, j)| (gram[i][j] - gram[j][i]).abs() > SYMMETRY_RTOL * scale);
    if let Some((row, col)) = asymmetric {
        return Err(Error::NotSymmetric { row, col });
    }
    let mean_diag = (0..n).map(|i| gram[i][i]).sum::<f64>() / n as f64;
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        gram[lo][hi]
    });
    let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
    if min_eig < -PSD_RTOL * mean_diag.abs() {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Features of `(<x,y> + c)^p`: one coordinate per multi-index `alpha` over
/// the slots `(const, x_1, .., x_d)` with `|alpha| = p`, weighted by
/// `sqrt(multinomial(p; alpha) c^alpha_0)`.
fn polynomial_features(x: &[f64], degree: u32, offset: f64) -> Vec<f64> {
    let slots = x.len() + 1;
    let mut out = Vec::new();
    let mut alphas = Vec::new();
    compositions(degree, slots, &mut Vec::new(), &mut alphas, usize::MAX);
    let log_fact = |n: u32| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    for alpha in alphas {
        let log_coef = log_fact(degree) - alpha.iter().map(|&a| log_fact(a)).sum::<f64>();
        let mut value = (0.5 * log_coef).exp();
        if alpha[0] > 0 {
            value *= offset.powf(0.5 * alpha[0] as f64);
        }
        for (k, &a) in alpha[1..].iter().enumerate() {
            value *= x[k].powi(a as i32);
        }
        out.push(value);
    }
    out
}

/// `(sqrt(lambda_i) phi_i(x))_{i=1..num_terms}` with `lambda_i = C_p i^-beta`.
pub fn eigendecay_features(beta: f64, num_terms: usize, amplitude: f64, x: &[f64]) -> Result<Vec<f64>> {
    let kernel = Kernel::new(KernelSpec::Eigendecay {
        beta,
        num_terms,
        amplitude,
    })?;
    if x.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::OutsideUnitCube { index: 0 });
    }
    Ok(kernel.features_unchecked(x))
}

/// Upper bound on the discarded eigenvalue mass `sum_{i>N} C_p i^-beta`.
pub fn truncation_error_bound(beta: f64, num_terms: usize, amplitude: f64) -> f64 {
    amplitude * (num_terms as f64).powf(1.0 - beta) / (beta - 1.0)
}

/// Sup-norm bound `C_phi = 2^{d/2}` of the cosine basis.
pub fn cosine_basis_sup_norm(dim: usize) -> f64 {
    2f64.powf(dim as f64 / 2.0)
}

/// Indexed kernel evaluations over a fixed point set.
pub trait KernelSource: Sync {
    fn len(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn diag(&self, i: usize) -> f64 {
        self.entry(i, i)
    }

    /// `max_i sqrt(K(x_i, x_i))`.
    fn sup_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| self.diag(i).max(0.0).sqrt())
            .fold(0.0, f64::max)
    }
}

/// A kernel bound to a validated point set.
#[derive(Debug)]
pub struct KernelOnPoints<'a> {
    kernel: &'a Kernel,
    points: &'a PointSet,
    features: Option<Vec<Vec<f64>>>,
}

impl<'a> KernelOnPoints<'a> {
    /// Validates every point against the kernel and the declared bound.
    pub fn new(kernel: &'a Kernel, points: &'a PointSet) -> Result<Self> {
        if let KernelSpec::Precomputed { gram } = kernel.spec() {
            if points.dim().is_some() {
                return Err(invalid("precomputed kernel requires an id-based point set"));
            }
            if points.len() > gram.len() {
                return Err(Error::IdOutOfRange {
                    id: points.len() - 1,
                    len: gram.len(),
                });
            }
        }
        for i in 0..points.len() {
            kernel
                .check_point(points.get(i), points.dim())
                .map_err(|e| match e {
                    Error::OutsideUnitCube { .. } => Error::OutsideUnitCube { index: i },
                    other => other,
                })?;
        }
        let features = match (kernel.spec(), points.rows()) {
            (KernelSpec::Eigendecay { .. }, Some(rows)) => {
                Some(rows.iter().map(|r| kernel.features_unchecked(r)).collect())
            }
            _ => None,
        };
        let source = Self {
            kernel,
            points,
            features,
        };
        if let Some(b) = points.bound() {
            let bound_sq = b * b;
            for i in 0..points.len() {
                let value = source.entry(i, i);
                if value > bound_sq + NORM_BOUND_SLACK {
                    return Err(Error::NormBoundViolated {
                        index: i,
                        value,
                        bound_sq,
                    });
                }
            }
        }
        Ok(source)
    }

    pub fn kernel(&self) -> &Kernel {
        self.kernel
    }

    pub fn points(&self) -> &PointSet {
        self.points
    }
}

impl KernelSource for KernelOnPoints<'_> {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.features {
            Some(f) => dot(&f[i], &f[j]),
            None => self
                .kernel
                .eval_unchecked(self.points.get(i), self.points.get(j)),
        }
    }
}

/// Dense symmetric Gram matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    /// Builds the Gram of `src` restricted to `indices` (in that order).
    /// Only the upper triangle is evaluated; the lower one is mirrored.
    pub fn from_indices<K: KernelSource + ?Sized>(src: &K, indices: &[usize]) -> Self {
        let n = indices.len();
        let mut data = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = src.entry(indices[a], indices[b]);
                data[a * n + b] = v;
                data[b * n + a] = v;
            }
        }
        Self { n, data }
    }

    pub fn from_source<K: KernelSource + ?Sized>(src: &K) -> Self {
        let all: Vec<usize> = (0..src.len()).collect();
        Self::from_indices(src, &all)
    }

    /// Gram of explicit feature rows.
    pub fn from_features(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = dot(&rows[a], &rows[b]);
                data[a * n + b] = v;
                data[b * n + a] = v;
            }
        }
        Self { n, data }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

impl KernelSource for GramMatrix {
    fn len(&self) -> usize {
        self.n
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// `gram(spec, pts)`: the full Gram matrix of a point set.
pub fn gram(kernel: &Kernel, points: &PointSet) -> Result<GramMatrix> {
    let src = KernelOnPoints::new(kernel, points)?;
    Ok(GramMatrix::from_source(&src))
}

/// Convenience wrapper over [`Kernel::eval`] for a spec.
pub fn eval_kernel(spec: &KernelSpec, x: Point<'_>, y: Point<'_>) -> Result<f64> {
    Kernel::new(spec.clone())?.eval(x, y)
}
