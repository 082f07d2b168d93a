//! State estimation (moving-horizon l2, Luenberger, UKF) and the
//! residual-based bad data detector.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::{HorizonObservation, PlantModel};

/// l2 moving-horizon estimator: x_hat = H^dagger y_I.
#[derive(Debug, Clone)]
pub struct MheEstimator {
    pub horizon: HorizonObservation,
    pub pseudo_inverse: DMatrix<f64>,
}

impl MheEstimator {
    pub fn new(horizon: HorizonObservation) -> Self {
        let pseudo_inverse = horizon.pseudo_inverse();
        Self { horizon, pseudo_inverse }
    }

    pub fn estimate(&self, y_window: &DVector<f64>) -> Result<DVector<f64>> {
        if y_window.len() != self.horizon.window_dim() {
            return Err(Error::Dimension(format!(
                "window has dimension {}, expected {}",
                y_window.len(),
                self.horizon.window_dim()
            )));
        }
        Ok(&self.pseudo_inverse * y_window)
    }
}

/// Residual-based bad data detector with threshold delta; alarm on strict ">".
#[derive(Debug, Clone)]
pub struct BddDetector {
    pub delta: f64,
    /// I - H H^dagger, symmetric idempotent.
    pub projector: DMatrix<f64>,
    dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BddVerdict {
    pub residual: f64,
    pub alarm: bool,
}

impl BddDetector {
    pub fn new(horizon: &HorizonObservation, delta: f64) -> Self {
        let dim = horizon.window_dim();
        let projector = DMatrix::identity(dim, dim) - &horizon.u1 * horizon.u1.transpose();
        Self { delta, projector, dim }
    }

    pub fn check(&self, y_window: &DVector<f64>) -> Result<BddVerdict> {
        if y_window.len() != self.dim {
            return Err(Error::Dimension(format!(
                "window has dimension {}, expected {}",
                y_window.len(),
                self.dim
            )));
        }
        let residual = (&self.projector * y_window).norm();
        Ok(BddVerdict { residual, alarm: residual > self.delta })
    }
}

/// Static-estimator baseline: x_hat+ = A x_hat + L (y - C x_hat).
#[derive(Debug, Clone)]
pub struct LuenbergerObserver {
    pub gain: DMatrix<f64>,
    pub plant: PlantModel,
}

impl LuenbergerObserver {
    pub fn new(plant: PlantModel, gain: DMatrix<f64>) -> Result<Self> {
        if gain.nrows() != plant.state_dim() || gain.ncols() != plant.meas_dim() {
            return Err(Error::Dimension("observer gain must be n x m".into()));
        }
        let err_dyn = &plant.a - &gain * &plant.c;
        let rho = linalg::spectral_radius(&err_dyn);
        if rho >= 1.0 {
            return Err(Error::Config(format!("observer error dynamics unstable: rho = {rho}")));
        }
        Ok(Self { gain, plant })
    }

    /// Default reproducible gain: L = 0.5 * A * C^dagger.
    pub fn with_default_gain(plant: PlantModel) -> Result<Self> {
        let c_pinv = linalg::pinv(&plant.c)?;
        let gain = 0.5 * &plant.a * c_pinv;
        Self::new(plant, gain)
    }

    pub fn step(&self, x_hat: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let innovation = y - &self.plant.c * x_hat;
        &self.plant.a * x_hat + &self.gain * innovation
    }
}

/// UKF spread parameters; beta = 2 is the Gaussian-optimal choice.
#[derive(Debug, Clone, Copy)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 2.0, kappa: 0.0 }
    }
}

/// Unscented Kalman filter state for a nonlinear system
/// x+ = f(x, u) + w, y = g(x) + v.
#[derive(Debug, Clone)]
pub struct UkfState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub params: UkfParams,
}

/// Sigma-point prediction output needed by the correction step.
#[derive(Debug, Clone)]
pub struct UkfPrediction {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub y_pred: DVector<f64>,
    pub p_yy: DMatrix<f64>,
    pub p_xy: DMatrix<f64>,
}

impl UkfState {
    pub fn new(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        params: UkfParams,
    ) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n || q.nrows() != n || q.ncols() != n {
            return Err(Error::Dimension("UKF covariance dimensions must match state".into()));
        }
        if !(params.alpha > 0.0 && params.alpha <= 1.0) || params.kappa < 0.0 {
            return Err(Error::Config("UKF spread parameters out of range".into()));
        }
        Ok(Self { mean, cov, q, r, params })
    }

    fn lambda(&self) -> f64 {
        let n = self.mean.len() as f64;
        self.params.alpha.powi(2) * (n + self.params.kappa) - n
    }

    /// Mean/covariance weights (W0m, W0c, Wi).
    pub fn weights(&self) -> (f64, f64, f64) {
        let n = self.mean.len() as f64;
        let lambda = self.lambda();
        let w0m = lambda / (n + lambda);
        let w0c = w0m + (1.0 - self.params.alpha.powi(2) + self.params.beta);
        let wi = 1.0 / (2.0 * (n + lambda));
        (w0m, w0c, wi)
    }

    /// 2n+1 sigma points via a symmetric matrix square root, negative
    /// eigenvalues clipped to zero.
    pub fn sigma_points(&self) -> Result<Vec<DVector<f64>>> {
        let n = self.mean.len();
        let lambda = self.lambda();
        let scaled = (&self.cov + self.cov.transpose()) * (0.5 * (n as f64 + lambda));
        let eig = scaled.symmetric_eigen();
        // symmetric square root: V * sqrt(D) * V^T
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            let ev = eig.eigenvalues[i].max(0.0).sqrt();
            let v = eig.eigenvectors.column(i);
            s += ev * &v * v.transpose();
        }
        let mut pts = Vec::with_capacity(2 * n + 1);
        pts.push(self.mean.clone());
        for i in 0..n {
            pts.push(&self.mean + s.column(i));
        }
        for i in 0..n {
            pts.push(&self.mean - s.column(i));
        }
        Ok(pts)
    }

    /// Propagate sigma points through the dynamics and measurement maps.
    pub fn predict<F, G>(&self, dynamics: F, measure: G) -> Result<UkfPrediction>
    where
        F: Fn(&DVector<f64>) -> DVector<f64>,
        G: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let n = self.mean.len();
        let (w0m, w0c, wi) = self.weights();
        let wm = |i: usize| if i == 0 { w0m } else { wi };
        let wc = |i: usize| if i == 0 { w0c } else { wi };

        let pts = self.sigma_points()?;
        let xs: Vec<DVector<f64>> = pts.iter().map(|p| dynamics(p)).collect();
        if xs.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged("non-finite sigma-point propagation".into()));
        }
        let mut mean = DVector::zeros(n);
        for i in 0..xs.len() {
            mean += wm(i) * &xs[i];
        }
        let mut cov = self.q.clone();
        for i in 0..xs.len() {
            let dx = &xs[i] - &mean;
            cov += wc(i) * &dx * dx.transpose();
        }

        // redraw sigma points from the predicted density so the measurement
        // statistics account for the process noise
        let predicted = UkfState {
            mean: mean.clone(),
            cov: cov.clone(),
            q: self.q.clone(),
            r: self.r.clone(),
            params: self.params,
        };
        let pts2 = predicted.sigma_points()?;
        let ys: Vec<DVector<f64>> = pts2.iter().map(|x| measure(x)).collect();
        let m = ys[0].len();
        let mut y_pred = DVector::zeros(m);
        for i in 0..ys.len() {
            y_pred += wm(i) * &ys[i];
        }
        let mut p_yy = self.r.clone();
        let mut p_xy = DMatrix::zeros(n, m);
        for i in 0..ys.len() {
            let dx = &pts2[i] - &mean;
            let dy = &ys[i] - &y_pred;
            p_yy += wc(i) * &dy * dy.transpose();
            p_xy += wc(i) * &dx * dy.transpose();
        }
        Ok(UkfPrediction { mean, cov, y_pred, p_yy, p_xy })
    }

    /// Correction: x = x- + K(y - y-), P = P- - K P_yy K^T, K = P_xy P_yy^-1.
    pub fn update(&mut self, pred: &UkfPrediction, y: &DVector<f64>) -> Result<()> {
        let chol = pred
            .p_yy
            .clone()
            .cholesky()
            .ok_or_else(|| Error::UpdateFailed("singular innovation covariance".into()))?;
        let gain = chol.solve(&pred.p_xy.transpose()).transpose();
        self.mean = &pred.mean + &gain * (y - &pred.y_pred);
        self.cov = &pred.cov - &gain * &pred.p_yy * gain.transpose();
        // symmetrize against round-off
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged("non-finite UKF mean".into()));
        }
        Ok(())
    }
}
