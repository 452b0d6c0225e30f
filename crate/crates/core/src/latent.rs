//! PCA of flattened latent states and Gaussian-mixture clustering of the
//! leading component scores.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const MAGIC: &[u8; 4] = b"HNST";
pub const HEADER_LEN: usize = 16;

/// Dense row-major sample matrix. `channels` is carried through the binary
/// header; it is 0 for plain feature matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub rows: usize,
    pub cols: usize,
    pub channels: u32,
    pub data: Vec<f64>,
}

impl StateMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite entry at row {}, column {}", i / cols.max(1), i % cols.max(1))));
        }
        Ok(Self {
            rows,
            cols,
            channels: 0,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>()).collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            channels: 0,
            data,
        }
    }

    /// Little-endian: magic, u32 rows, u32 cols, u32 channels, then f32 data.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.rows as u32, self.cols as u32, self.channels] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| Error::Shape("truncated header".into()))?;
        if &header[..4] != MAGIC {
            return Err(Error::Shape("bad magic, expected HNST".into()));
        }
        let word = |k: usize| u32::from_le_bytes(header[4 * k..4 * k + 4].try_into().unwrap());
        let (rows, cols, channels) = (word(1) as usize, word(2) as usize, word(3));
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)
            .map_err(|e| Error::Shape(format!("reading payload: {e}")))?;
        if payload.len() != rows * cols * 4 {
            return Err(Error::Shape(format!(
                "payload has {} bytes, header promises {rows}x{cols} f32",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let mut m = Self::new(rows, cols, data)?;
        m.channels = channels;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Per-feature standard deviations when the data were standardized.
    pub scale: Option<Vec<f64>>,
    /// `k` unit-norm rows of length `cols`, in descending eigenvalue order.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub total_variance: f64,
}

fn prepare(x: &StateMatrix, mean: &[f64], scale: Option<&[f64]>) -> DMatrix<f64> {
    DMatrix::from_fn(x.rows, x.cols, |r, c| {
        let v = x.data[r * x.cols + c] - mean[c];
        match scale {
            Some(s) => v / s[c],
            None => v,
        }
    })
}

/// Flip each vector so that its largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1.abs() { (i, x) } else { best });
    if pivot.1 < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Gram-Schmidt against `basis`; returns `None` when `v` is (numerically) in
/// their span.
fn orthonormalize(mut v: DVector<f64>, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    for _ in 0..2 {
        for b in basis {
            let d = b.dot(&v);
            v.axpy(-d, b, 1.0);
        }
    }
    let n = v.norm();
    (n > 1e-10).then(|| v / n)
}

/// Top-`k` principal components. With fewer rows than columns the
/// eigenproblem is solved on the `rows x rows` Gram matrix.
pub fn pca_fit(x: &StateMatrix, k: usize, standardize: bool) -> Result<PcaModel> {
    let (n, d) = (x.rows, x.cols);
    if n < 2 {
        return Err(Error::Domain(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::Domain(format!("k = {k} must lie in 1..={}", (n - 1).min(d))));
    }
    let mean: Vec<f64> = (0..d).map(|c| (0..n).map(|r| x.data[r * d + c]).sum::<f64>() / n as f64).collect();
    let scale = standardize.then(|| {
        (0..d)
            .map(|c| {
                let var = (0..n).map(|r| (x.data[r * d + c] - mean[c]).powi(2)).sum::<f64>() / (n - 1) as f64;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect::<Vec<_>>()
    });
    let xc = prepare(x, &mean, scale.as_deref());
    let dof = (n - 1) as f64;
    let total_variance = xc.iter().map(|v| v * v).sum::<f64>() / dof;

    let mut pairs: Vec<(f64, DVector<f64>)> = if n < d {
        let gram = &xc * xc.transpose() / dof;
        let eig = SymmetricEigen::new(gram);
        (0..n)
            .map(|i| {
                let lambda = eig.eigenvalues[i];
                let u = eig.eigenvectors.column(i).into_owned();
                (lambda, xc.transpose() * u)
            })
            .collect()
    } else {
        let cov = xc.transpose() * &xc / dof;
        let eig = SymmetricEigen::new(cov);
        (0..d)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let lambda_max = pairs[0].0.max(0.0);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (lambda, v) in pairs.into_iter().take(k) {
        // null-space directions are arbitrary; completed from the unit basis below
        if lambda <= 1e-12 * lambda_max.max(f64::MIN_POSITIVE) {
            break;
        }
        if let Some(v) = orthonormalize(v, &basis) {
            basis.push(v);
            eigenvalues.push(lambda);
        }
    }
    let mut e = 0;
    while basis.len() < k && e < d {
        if let Some(v) = orthonormalize(DVector::from_fn(d, |i, _| f64::from(i == e)), &basis) {
            basis.push(v);
            eigenvalues.push(0.0);
        }
        e += 1;
    }

    let components: Vec<Vec<f64>> = basis
        .into_iter()
        .map(|v| {
            let mut v: Vec<f64> = v.iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    let explained_variance_ratio = eigenvalues
        .iter()
        .map(|l| if total_variance > 0.0 { l / total_variance } else { 0.0 })
        .collect();
    Ok(PcaModel {
        mean,
        scale,
        components,
        eigenvalues,
        explained_variance_ratio,
        total_variance,
    })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    fn component_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.components.len(), self.n_features(), |r, c| self.components[r][c])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Scores `(X - mean) · componentsᵀ`, one row per sample.
pub fn pca_project(model: &PcaModel, x: &StateMatrix) -> Result<DMatrix<f64>> {
    if x.cols != model.n_features() {
        return Err(Error::Shape(format!(
            "matrix has {} columns, model expects {}",
            x.cols,
            model.n_features()
        )));
    }
    let xc = prepare(x, &model.mean, model.scale.as_deref());
    Ok(xc * model.component_matrix().transpose())
}

/// Inverse of [`pca_project`] restricted to the model's subspace.
pub fn pca_reconstruct(model: &PcaModel, scores: &DMatrix<f64>) -> Result<StateMatrix> {
    if scores.ncols() != model.n_components() {
        return Err(Error::Shape(format!(
            "scores have {} columns, model has {} components",
            scores.ncols(),
            model.n_components()
        )));
    }
    let mut xr = scores * model.component_matrix();
    for c in 0..xr.ncols() {
        let s = model.scale.as_ref().map_or(1.0, |s| s[c]);
        for r in 0..xr.nrows() {
            xr[(r, c)] = xr[(r, c)] * s + model.mean[c];
        }
    }
    Ok(StateMatrix::from_dmatrix(&xr))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub max_iterations: usize,
    /// Stop when the mean log-likelihood per sample improves by less.
    pub tolerance: f64,
    pub covariance_floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-6,
            covariance_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 2]>,
    pub covariances: Vec<[[f64; 2]; 2]>,
    /// Mean log-likelihood per sample after each EM iteration.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

fn floor_covariance(m: Matrix2<f64>, floor: f64) -> [[f64; 2]; 2] {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let r = eig.eigenvectors * Matrix2::from_diagonal(&vals) * eig.eigenvectors.transpose();
    [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]]
}

fn log_gaussian(p: &[f64; 2], mean: &[f64; 2], cov: &[[f64; 2]; 2]) -> f64 {
    let (a, b, d) = (cov[0][0], cov[0][1], cov[1][1]);
    let det = a * d - b * b;
    let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
    let maha = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
    -(std::f64::consts::TAU).ln() - 0.5 * det.ln() - 0.5 * maha
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn log_joint(&self, p: &[f64; 2]) -> Vec<f64> {
        (0..self.k())
            .map(|j| self.weights[j].ln() + log_gaussian(p, &self.means[j], &self.covariances[j]))
            .collect()
    }

    /// Posterior component probabilities for each point.
    pub fn responsibilities(&self, points: &[[f64; 2]]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|p| {
                let lj = self.log_joint(p);
                let z = log_sum_exp(&lj);
                lj.iter().map(|v| (v - z).exp()).collect()
            })
            .collect()
    }

    pub fn predict(&self, points: &[[f64; 2]]) -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let lj = self.log_joint(p);
                (0..lj.len()).fold(0, |best, j| if lj[j] > lj[best] { j } else { best })
            })
            .collect()
    }

    pub fn mean_log_likelihood(&self, points: &[[f64; 2]]) -> f64 {
        points.iter().map(|p| log_sum_exp(&self.log_joint(p))).sum::<f64>() / points.len() as f64
    }
}

fn sample_covariance(points: &[[f64; 2]], weights: Option<&[f64]>) -> ([f64; 2], Matrix2<f64>) {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..points.len()).map(w).sum();
    let mut mean = [0.0; 2];
    for (i, p) in points.iter().enumerate() {
        mean[0] += w(i) * p[0];
        mean[1] += w(i) * p[1];
    }
    mean[0] /= total;
    mean[1] /= total;
    let mut cov = Matrix2::zeros();
    for (i, p) in points.iter().enumerate() {
        let d = Vector2::new(p[0] - mean[0], p[1] - mean[1]);
        cov += d * d.transpose() * w(i);
    }
    (mean, cov / total)
}

fn kmeans_pp(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let d2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    let mut dist: Vec<f64> = points.iter().map(|p| d2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in dist.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[idx];
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(d2(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn nearest_centers(points: &[[f64; 2]], centers: &[[f64; 2]]) -> Vec<usize> {
    let d2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    points
        .iter()
        .map(|p| {
            (0..centers.len())
                .min_by(|&a, &b| d2(p, &centers[a]).total_cmp(&d2(p, &centers[b])))
                .unwrap_or(0)
        })
        .collect()
}

/// Lloyd iterations until the assignment stops changing. Empty clusters keep
/// their previous center.
fn lloyd(points: &[[f64; 2]], mut centers: Vec<[f64; 2]>, max_iterations: usize) -> Vec<[f64; 2]> {
    let mut labels = nearest_centers(points, &centers);
    for _ in 0..max_iterations {
        let mut sums = vec![[0.0, 0.0, 0.0]; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            sums[l][2] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                *c = [s[0] / s[2], s[1] / s[2]];
            }
        }
        let next = nearest_centers(points, &centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    centers
}

/// EM for a full-covariance 2-D mixture. Initialization: k-means++ seeds
/// refined by Lloyd iterations, then per-cluster weights and covariances
/// (clusters with fewer than two points start from the global covariance).
pub fn gmm_fit(points: &[[f64; 2]], k: usize, seed: u64, cfg: &GmmConfig) -> Result<GmmModel> {
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::Domain(format!("{} samples for K = {k}", points.len())));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, global_cov) = sample_covariance(points, None);
    let global_cov = floor_covariance(global_cov, cfg.covariance_floor);
    let centers = lloyd(points, kmeans_pp(points, k, &mut rng), cfg.max_iterations);
    let labels = nearest_centers(points, &centers);
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means: centers,
        covariances: vec![global_cov; k],
        log_likelihood: Vec::new(),
        converged: false,
    };
    for j in 0..k {
        let w: Vec<f64> = labels.iter().map(|&l| f64::from(l == j)).collect();
        let count: f64 = w.iter().sum();
        if count >= 2.0 {
            model.weights[j] = count / n as f64;
            model.covariances[j] = floor_covariance(sample_covariance(points, Some(&w)).1, cfg.covariance_floor);
        }
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);

    let mut prev = model.mean_log_likelihood(points);
    for _ in 0..cfg.max_iterations {
        let resp = model.responsibilities(points);
        for j in 0..k {
            let w: Vec<f64> = resp.iter().map(|r| r[j]).collect();
            let nk: f64 = w.iter().sum();
            if nk < 1e-10 {
                // dead component: restart it on the worst-explained point
                let worst = (0..n)
                    .min_by(|&a, &b| {
                        let la = log_sum_exp(&model.log_joint(&points[a]));
                        let lb = log_sum_exp(&model.log_joint(&points[b]));
                        la.total_cmp(&lb)
                    })
                    .unwrap_or(0);
                model.means[j] = points[worst];
                model.covariances[j] = global_cov;
                model.weights[j] = 1.0 / n as f64;
                continue;
            }
            let (mean, cov) = sample_covariance(points, Some(&w));
            model.weights[j] = nk / n as f64;
            model.means[j] = mean;
            model.covariances[j] = floor_covariance(cov, cfg.covariance_floor);
        }
        let total: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= total);

        let ll = model.mean_log_likelihood(points);
        model.log_likelihood.push(ll);
        if ll - prev < cfg.tolerance {
            model.converged = true;
            break;
        }
        prev = ll;
    }
    Ok(model)
}

/// CSV with one row per sample: `pc1..pcK[,cluster]`.
pub fn scores_csv(scores: &DMatrix<f64>, clusters: Option<&[usize]>) -> String {
    let mut s = (1..=scores.ncols()).map(|c| format!("pc{c}")).collect::<Vec<_>>().join(",");
    if clusters.is_some() {
        s.push_str(",cluster");
    }
    s.push('\n');
    for r in 0..scores.nrows() {
        let row: Vec<String> = scores.row(r).iter().map(|v| format!("{v:.9e}")).collect();
        s.push_str(&row.join(","));
        if let Some(c) = clusters {
            s.push_str(&format!(",{}", c[r]));
        }
        s.push('\n');
    }
    s
}
