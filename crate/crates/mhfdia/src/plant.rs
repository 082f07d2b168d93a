//! Discrete LTI plant, windowed observation operators and bounded noise.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg;

/// Plants whose transition matrix is worse conditioned than this are rejected:
/// the backward observation matrix needs accurate negative powers of A.
pub const MAX_CONDITION: f64 = 1e12;

/// Discrete LTI pair (A, C) with sample period and window noise bound.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub t_s: f64,
    pub epsilon_v: f64,
}

impl PlantModel {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, t_s: f64, epsilon_v: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension("A must be square".into()));
        }
        if c.ncols() != a.nrows() {
            return Err(Error::Dimension(format!(
                "C has {} columns, state dimension is {}",
                c.ncols(),
                a.nrows()
            )));
        }
        if t_s <= 0.0 {
            return Err(Error::Config("sample period must be positive".into()));
        }
        if epsilon_v < 0.0 {
            return Err(Error::Config("noise bound must be non-negative".into()));
        }
        Ok(Self { a, c, t_s, epsilon_v })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn meas_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    /// Check 0 < rho(A) < 1.
    pub fn require_stable(&self) -> Result<()> {
        let rho = self.spectral_radius();
        if rho <= 0.0 || rho >= 1.0 {
            return Err(Error::Config(format!("plant is not asymptotically stable: rho(A) = {rho}")));
        }
        Ok(())
    }

    pub fn step(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x
    }

    pub fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
}

/// Discretize Jacobians at an equilibrium into a closed-loop plant:
/// A = (df/dx * T_s + I) + (df/du * T_s) * K, C = dg/dx.
pub fn linearize(
    df_dx: &DMatrix<f64>,
    df_du: &DMatrix<f64>,
    dg_dx: &DMatrix<f64>,
    k: &DMatrix<f64>,
    t_s: f64,
    epsilon_v: f64,
) -> Result<PlantModel> {
    let n = df_dx.nrows();
    if df_dx.ncols() != n {
        return Err(Error::Dimension("df/dx must be square".into()));
    }
    if df_du.nrows() != n {
        return Err(Error::Dimension("df/du row count must match state dimension".into()));
    }
    if k.nrows() != df_du.ncols() || k.ncols() != n {
        return Err(Error::Dimension(format!(
            "K must be {}x{}, got {}x{}",
            df_du.ncols(),
            n,
            k.nrows(),
            k.ncols()
        )));
    }
    if dg_dx.ncols() != n {
        return Err(Error::Dimension("dg/dx column count must match state dimension".into()));
    }
    if t_s <= 0.0 {
        return Err(Error::Config("sample period must be positive".into()));
    }
    let a_prime = df_dx * t_s + DMatrix::identity(n, n);
    let b_prime = df_du * t_s;
    let a = a_prime + b_prime * k;
    PlantModel::new(a, dg_dx.clone(), t_s, epsilon_v)
}

/// Window length T, backward observation matrix H and its cached SVD.
#[derive(Debug, Clone)]
pub struct HorizonObservation {
    pub t: usize,
    pub h: DMatrix<f64>,
    /// Left singular block, (T m) x n.
    pub u1: DMatrix<f64>,
    /// Left singular complement, (T m) x (T m - n).
    pub u2: DMatrix<f64>,
    /// Non-zero singular values, length n, descending.
    pub sigma: DVector<f64>,
    /// Right singular factor, n x n.
    pub v: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
}

impl HorizonObservation {
    pub fn window_dim(&self) -> usize {
        self.t * self.m
    }

    /// U1 * diag(sigma), cached products are cheap enough to form on demand.
    pub fn u1_sigma(&self) -> DMatrix<f64> {
        let mut out = self.u1.clone();
        for j in 0..self.n {
            let mut col = out.column_mut(j);
            col *= self.sigma[j];
        }
        out
    }

    /// Factor an already-stacked window observation matrix (t blocks of m
    /// rows); used when the stack comes from somewhere other than backward
    /// powers of A, e.g. a forward-iterated linearization.
    pub fn from_stacked(h: DMatrix<f64>, t: usize, m: usize) -> Result<Self> {
        if h.nrows() != t * m {
            return Err(Error::Dimension(format!(
                "stacked matrix has {} rows, expected {}",
                h.nrows(),
                t * m
            )));
        }
        let n = h.ncols();
        let (u_full, s_full, v_full) = linalg::sorted_svd(&h)?;
        let tol = s_full[0].max(1.0) * linalg::RANK_TOL;
        let rank = s_full.iter().filter(|&&x| x > tol).count();
        if rank < n {
            return Err(Error::WindowNotObservable { rank, expected: n });
        }
        let u1 = u_full.columns(0, n).clone_owned();
        let sigma = DVector::from_iterator(n, s_full.iter().take(n).cloned());
        let v = v_full.columns(0, n).clone_owned();
        let u2 = linalg::orthonormal_complement(&u1);
        Ok(Self { t, h, u1, u2, sigma, v, n, m })
    }

    /// Pseudo-inverse H^dagger = V * Sigma^-1 * U1^T.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        let mut vs = self.v.clone();
        for j in 0..self.n {
            let mut col = vs.column_mut(j);
            col /= self.sigma[j];
        }
        vs * self.u1.transpose()
    }
}

/// Stack C A^(1-T), C A^(2-T), ..., C and cache the SVD factors.
pub fn build_horizon(plant: &PlantModel, t: usize) -> Result<HorizonObservation> {
    if t < 1 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    let n = plant.state_dim();
    let m = plant.meas_dim();

    let cond = linalg::condition_number(&plant.a)?;
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::SingularTransition(format!("cond(A) = {cond:.3e}")));
    }

    // blocks built newest-first by repeated solves Z <- Z A^{-1},
    // i.e. A^T Z_next^T = Z^T
    let lu_t = plant.a.transpose().lu();
    let mut blocks = vec![plant.c.clone()];
    for _ in 1..t {
        let prev = blocks.last().unwrap();
        let xt = lu_t
            .solve(&prev.transpose())
            .ok_or_else(|| Error::SingularTransition("LU solve failed".into()))?;
        blocks.push(xt.transpose());
    }
    blocks.reverse(); // oldest block (C A^{1-T}) first

    let mut h = DMatrix::zeros(t * m, n);
    for (i, b) in blocks.iter().enumerate() {
        h.view_mut((i * m, 0), (m, n)).copy_from(b);
    }

    HorizonObservation::from_stacked(h, t, m)
}

/// Stack T per-step measurement vectors, oldest first.
pub fn stack_window(samples: &[DVector<f64>], t: usize, m: usize) -> Result<DVector<f64>> {
    if samples.len() != t {
        return Err(Error::Dimension(format!("expected {t} samples, got {}", samples.len())));
    }
    let mut out = DVector::zeros(t * m);
    for (i, s) in samples.iter().enumerate() {
        if s.len() != m {
            return Err(Error::Dimension(format!("sample {i} has dimension {}, expected {m}", s.len())));
        }
        out.rows_mut(i * m, m).copy_from(s);
    }
    Ok(out)
}

/// Split a stacked window back into T per-step vectors.
pub fn unstack_window(window: &DVector<f64>, t: usize, m: usize) -> Result<Vec<DVector<f64>>> {
    if window.len() != t * m {
        return Err(Error::Dimension(format!("window has dimension {}, expected {}", window.len(), t * m)));
    }
    Ok((0..t).map(|i| window.rows(i * m, m).clone_owned()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    UniformBall,
    TruncatedGaussian,
}

/// Seeded generator of window-stacked noise with ||v_I|| <= epsilon_v.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub epsilon_v: f64,
    rng: ChaCha12Rng,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, epsilon_v: f64, seed: u64) -> Self {
        Self { kind, epsilon_v, rng: ChaCha12Rng::seed_from_u64(seed) }
    }

    /// Draw one window-stacked noise vector of dimension `t * m`.
    pub fn sample_window(&mut self, t: usize, m: usize) -> DVector<f64> {
        let dim = t * m;
        match self.kind {
            NoiseKind::None => DVector::zeros(dim),
            NoiseKind::UniformBall => {
                if self.epsilon_v <= 0.0 {
                    return DVector::zeros(dim);
                }
                // Gaussian direction + radius ~ r^(1/dim) is uniform on the ball
                let normal = Normal::new(0.0, 1.0).unwrap();
                let mut g = DVector::from_fn(dim, |_, _| normal.sample(&mut self.rng));
                let norm = g.norm();
                if norm == 0.0 {
                    return DVector::zeros(dim);
                }
                let u: f64 = self.rng.random();
                let radius = self.epsilon_v * u.powf(1.0 / dim as f64);
                g *= radius / norm;
                g
            }
            NoiseKind::TruncatedGaussian => {
                if self.epsilon_v <= 0.0 {
                    return DVector::zeros(dim);
                }
                // per-step i.i.d. Gaussian, clipped so the stacked norm meets the bound
                let sigma = self.epsilon_v / (3.0 * (dim as f64).sqrt());
                let normal = Normal::new(0.0, sigma).unwrap();
                let mut v = DVector::from_fn(dim, |_, _| normal.sample(&mut self.rng));
                let norm = v.norm();
                if norm > self.epsilon_v {
                    v *= self.epsilon_v / norm;
                }
                v
            }
        }
    }

    /// Per-step noise draw: one m-vector whose window stack stays within the bound.
    pub fn sample_step(&mut self, t: usize, m: usize) -> DVector<f64> {
        let step_bound = if t == 0 { self.epsilon_v } else { self.epsilon_v / (t as f64).sqrt() };
        match self.kind {
            NoiseKind::None => DVector::zeros(m),
            _ => {
                let mut saved = self.epsilon_v;
                std::mem::swap(&mut saved, &mut self.epsilon_v);
                self.epsilon_v = step_bound;
                let v = self.sample_window(1, m);
                self.epsilon_v = saved;
                v
            }
        }
    }
}
