//! Reference attack designs used for comparison: the classic range-space
//! injection, a generalized stealth variant with an out-of-range budget, the
//! eigenvalue-problem moving-horizon baseline, and the single-step (T = 1)
//! reduction of the iterative generator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::attack::{AttackHistory, AttackStepResult, AttackSupport, GeneratorConfig, GeneratorWorkspace};
use crate::linalg;
use crate::plant::HorizonObservation;
use crate::{Error, Result};

/// Attack selector shared by the scenarios and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// The iterative moving-horizon generator.
    Mh,
    /// The eigenvalue-problem baseline.
    Eig,
    /// Range-space injection e = C a.
    Range,
    /// Generalized stealth injection with an out-of-range budget.
    Gstealth,
    /// Single-step (T = 1) reduction of the generator.
    Static,
    None,
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            AttackKind::Mh => "mh",
            AttackKind::Eig => "eig",
            AttackKind::Range => "range",
            AttackKind::Gstealth => "gstealth",
            AttackKind::Static => "static",
            AttackKind::None => "none",
        };
        f.write_str(tag)
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mh" => Ok(AttackKind::Mh),
            "eig" => Ok(AttackKind::Eig),
            "range" => Ok(AttackKind::Range),
            "gstealth" => Ok(AttackKind::Gstealth),
            "static" => Ok(AttackKind::Static),
            "none" => Ok(AttackKind::None),
            other => Err(Error::Config(format!(
                "unknown attack kind '{other}' (expected mh|eig|range|gstealth|static|none)"
            ))),
        }
    }
}

/// Which reference design a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    RangeSpace,
    GeneralizedStealth,
    StaticH,
    EigenvalueMh,
    StaticT1,
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            BaselineKind::RangeSpace => "range-space",
            BaselineKind::GeneralizedStealth => "generalized-stealth",
            BaselineKind::StaticH => "static-H",
            BaselineKind::EigenvalueMh => "eigenvalue-mh",
            BaselineKind::StaticT1 => "static-T1",
        };
        f.write_str(tag)
    }
}

/// Classic stealth injection e_i = C a_i: invisible to a single-step
/// residual test, but not to a windowed one unless the bias tracks the
/// dynamics.
pub fn range_space_attack(c: &DMatrix<f64>, a_i: &DVector<f64>) -> Result<DVector<f64>> {
    if a_i.len() != c.ncols() {
        return Err(Error::Dimension("bias dimension must match state dimension".into()));
    }
    Ok(c * a_i)
}

/// Range component plus an out-of-range component of norm delta_step.
///
/// The injected estimate shift is set directly by the bias (the range part
/// is C·bias, which a single-step estimator reads back as the row-space
/// projection of the bias); the out-of-range direction is the deterministic
/// leading direction of the orthogonal complement of range(C). The
/// construction is faithful to the per-step constraint
/// ||(I - C C^+) e_i|| <= delta_step without claiming optimality.
pub fn generalized_stealth_attack(
    c: &DMatrix<f64>,
    bias: &DVector<f64>,
    delta_step: f64,
) -> Result<DVector<f64>> {
    if bias.len() != c.ncols() {
        return Err(Error::Dimension("bias dimension must match state dimension".into()));
    }
    if delta_step < 0.0 {
        return Err(Error::Config("delta_step must be nonnegative".into()));
    }
    let mut e = c * bias;
    if delta_step > 0.0 {
        let (u, s, _) = linalg::sorted_svd(c)?;
        let smax = s.max().max(1.0);
        let rank = s.iter().filter(|&&x| x > smax * linalg::RANK_TOL).count();
        let range_basis = u.columns(0, rank).clone_owned();
        let comp = linalg::orthonormal_complement(&range_basis);
        if comp.ncols() > 0 {
            e += delta_step * comp.column(0);
        }
    }
    Ok(e)
}

/// Output of the eigenvalue-problem baseline.
#[derive(Debug, Clone)]
pub struct EigAttackResult {
    /// Current injection, dimension m, supported on the attack support.
    pub e_i: DVector<f64>,
    /// The attained |lambda|.
    pub lambda: f64,
    pub feasible: bool,
}

impl EigAttackResult {
    fn zero(m: usize) -> Self {
        Self { e_i: DVector::zeros(m), lambda: 0.0, feasible: false }
    }
}

const EIG_TOL: f64 = 1e-8;

/// Moving-horizon baseline posed as an eigenvalue-style problem:
/// maximize |lambda| over unit v subject to
/// ||lambda·U11·Sigma·v − e_hist|| <= eps_tilde, where U11 restricts U1 to
/// the supported rows of the history blocks, U12 to the supported rows of
/// the current block, and e_hist is the stacked history on its support.
/// The current injection is lambda*·U12·Sigma·v* scattered onto the
/// support. Infeasible instances return the zero attack. Lambda is capped
/// at (||e_hist|| + eps_tilde) / sigma_max(U11·Sigma): the raw program is
/// maximized along near-null gain directions where lambda diverges, so the
/// search is normalized against the strongest direction, which makes the
/// baseline deliberately conservative.
pub fn eigenvalue_mh_attack(
    horizon: &HorizonObservation,
    history: &AttackHistory,
    support: &AttackSupport,
    eps_tilde: f64,
) -> Result<EigAttackResult> {
    let m = horizon.m;
    let n = horizon.n;
    let t = horizon.t;
    if support.meas_dim() != m {
        return Err(Error::Dimension("support measurement dimension mismatch".into()));
    }
    if history.window_len() != t {
        return Err(Error::Dimension("history window length mismatch".into()));
    }
    if eps_tilde < 0.0 {
        return Err(Error::Config("eps_tilde must be nonnegative".into()));
    }

    let u1s = horizon.u1_sigma();
    let hist_rows: Vec<usize> = (0..t.saturating_sub(1))
        .flat_map(|k| support.indices().iter().map(move |&s| k * m + s))
        .collect();
    let cur_rows: Vec<usize> = support.indices().iter().map(|&s| (t - 1) * m + s).collect();
    let select = |rows: &[usize]| {
        let mut out = DMatrix::zeros(rows.len(), n);
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from(&u1s.row(r));
        }
        out
    };
    let w = select(&hist_rows); // U11·Sigma
    let u12s = select(&cur_rows); // U12·Sigma

    let stacked = history.stacked_padded();
    let h = DVector::from_iterator(hist_rows.len(), hist_rows.iter().map(|&r| stacked[r]));

    let (_, w_s, w_vr) = linalg::sorted_svd(&w)?;
    let sigma_max = w_s[0];
    if sigma_max <= linalg::RANK_TOL {
        return Err(Error::Numerical("history gain matrix is zero".into()));
    }
    let v_top = w_vr.column(0).clone_owned();

    let (lambda, v, residual) = if h.norm() <= 1e-14 {
        // centered constraint: ride the top gain direction (scaling any
        // weaker direction inflates lambda without tracking anything)
        (eps_tilde / sigma_max, v_top.clone(), eps_tilde)
    } else {
        match solve_eig_lambda(&w, &h, eps_tilde, sigma_max, &v_top)? {
            Some(sol) => sol,
            None => return Ok(EigAttackResult::zero(m)),
        }
    };
    debug_assert!(residual <= eps_tilde + 1e-6, "constraint violated: {residual} > {eps_tilde}");

    let e_support = lambda * (&u12s * &v);
    let mut e_i = DVector::zeros(m);
    for (i, &s) in support.indices().iter().enumerate() {
        e_i[s] = e_support[i];
    }
    Ok(EigAttackResult { e_i, lambda, feasible: true })
}

/// Largest lambda in [0, (||h|| + eps_tilde) / sigma_max(W)] with
/// f(lambda) = min_{||v||=1} ||lambda·W·v − h|| <= eps_tilde, or None if no
/// lambda achieves it. Golden-section locates the minimizer of f,
/// bisection the rightmost crossing. The cap normalizes lambda against the
/// strongest gain direction: without it the program is maximized along
/// near-null directions of W, where lambda grows unboundedly while
/// tracking nothing. The returned v is then rotated from the tracking
/// minimizer toward the top gain direction as far as the constraint
/// allows, so the injection couples into the estimate.
fn solve_eig_lambda(
    w: &DMatrix<f64>,
    h: &DVector<f64>,
    eps_tilde: f64,
    sigma_max: f64,
    v_top: &DVector<f64>,
) -> Result<Option<(f64, DVector<f64>, f64)>> {
    let gram = w.transpose() * w;
    let eig = gram.clone().symmetric_eigen();
    let d = eig.eigenvalues.clone();
    let q = eig.eigenvectors.clone();
    let wt_h = w.transpose() * h;
    let g_hat0 = q.transpose() * &wt_h; // rotated W^T h

    let lambda_cap = (h.norm() + eps_tilde) / sigma_max;

    let inner = |lambda: f64| -> (f64, DVector<f64>) {
        let v = min_unit_residual(&d, &q, &g_hat0, lambda);
        let r = (lambda * (w * &v) - h).norm();
        (r, v)
    };

    // golden-section for the minimizer of f on [0, lambda_cap]
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, lambda_cap);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = inner(x1).0;
    let mut f2 = inner(x2).0;
    for _ in 0..200 {
        if hi - lo < EIG_TOL * (1.0 + lambda_cap) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = inner(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = inner(x2).0;
        }
    }
    let lambda_best = 0.5 * (lo + hi);
    let (f_best, _) = inner(lambda_best);
    if f_best > eps_tilde + EIG_TOL {
        return Ok(None);
    }

    // rightmost crossing of f = eps_tilde beyond the minimizer
    let mut lo = lambda_best;
    let mut hi = lambda_cap;
    let lambda_star = if inner(hi).0 <= eps_tilde {
        hi
    } else {
        for _ in 0..200 {
            if hi - lo < EIG_TOL * (1.0 + lambda_cap) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if inner(mid).0 <= eps_tilde {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let (r_ls, v_ls) = inner(lambda_star);
    let (v, r) = rotate_toward_top(w, h, eps_tilde, lambda_star, &v_ls, r_ls, v_top);
    Ok(Some((lambda_star, v, r)))
}

/// Rotate the unit direction from the tracking minimizer toward +-v_top as
/// far as the constraint ||lambda·W·v − h|| <= eps_tilde stays satisfied;
/// keeps the minimizer when no rotation is feasible.
fn rotate_toward_top(
    w: &DMatrix<f64>,
    h: &DVector<f64>,
    eps_tilde: f64,
    lambda: f64,
    v_ls: &DVector<f64>,
    r_ls: f64,
    v_top: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let mut best = (v_ls.clone(), r_ls, (w * v_ls).norm());
    for sign in [1.0, -1.0] {
        let target = sign * v_top;
        let blend = |theta: f64| -> Option<DVector<f64>> {
            let v = (1.0 - theta) * v_ls + theta * &target;
            let norm = v.norm();
            if norm < 1e-12 {
                return None;
            }
            Some(v / norm)
        };
        let residual = |v: &DVector<f64>| (lambda * (w * v) - h).norm();
        // largest feasible rotation angle by bisection
        let feasible = |theta: f64| blend(theta).map(|v| residual(&v) <= eps_tilde + EIG_TOL);
        if feasible(1.0) == Some(true) {
            let v = blend(1.0).expect("unit blend");
            let r = residual(&v);
            let gain = (w * &v).norm();
            if gain > best.2 {
                best = (v, r, gain);
            }
            continue;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) == Some(true) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if let Some(v) = blend(lo) {
            let r = residual(&v);
            if r <= eps_tilde + EIG_TOL {
                let gain = (w * &v).norm();
                if gain > best.2 {
                    best = (v, r, gain);
                }
            }
        }
    }
    (best.0, best.1)
}

/// min_{||v||=1} ||lambda·W·v − h|| given the eigendecomposition
/// W^T W = Q diag(d) Q^T and g_hat0 = Q^T W^T h; the stationarity condition
/// (lambda^2 diag(d) + mu I) v_hat = lambda g_hat0 is solved for the
/// multiplier mu by bisection on the secular equation ||v_hat(mu)|| = 1.
fn min_unit_residual(
    d: &DVector<f64>,
    q: &DMatrix<f64>,
    g_hat0: &DVector<f64>,
    lambda: f64,
) -> DVector<f64> {
    let k = d.len();
    let b: Vec<f64> = d.iter().map(|&x| lambda * lambda * x.max(0.0)).collect();
    let g: Vec<f64> = g_hat0.iter().map(|&x| lambda * x).collect();
    let b_min = b.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu_low = -b_min;

    let norm_at = |mu: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..k {
            let denom = b[i] + mu;
            if denom.abs() > 1e-300 {
                s += (g[i] / denom).powi(2);
            }
        }
        s.sqrt()
    };

    let assemble = |mu: f64, extra: f64| -> DVector<f64> {
        let mut v_hat = DVector::zeros(k);
        for i in 0..k {
            let denom = b[i] + mu;
            if denom.abs() > 1e-300 {
                v_hat[i] = g[i] / denom;
            }
        }
        if extra != 0.0 {
            // hard case: pad with the minimum-eigenvalue direction
            for i in 0..k {
                if (b[i] - b_min).abs() <= 1e-12 * (1.0 + b_min) {
                    v_hat[i] += extra;
                    break;
                }
            }
        }
        q * v_hat
    };

    // probe just above the pole
    let shift = 1e-10 * (1.0 + b_min.abs());
    let n_edge = norm_at(mu_low + shift);
    if n_edge < 1.0 {
        let extra = (1.0 - n_edge * n_edge).max(0.0).sqrt();
        return assemble(mu_low + shift, extra);
    }

    // ||v_hat(mu)|| is decreasing for mu > mu_low; bracket and bisect
    let mut hi = mu_low + shift.max(1.0);
    while norm_at(hi) > 1.0 {
        hi = mu_low + 2.0 * (hi - mu_low);
        if !hi.is_finite() {
            return assemble(mu_low + shift, 0.0);
        }
    }
    let mut lo = mu_low + shift;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    let mu = 0.5 * (lo + hi);
    let v = assemble(mu, 0.0);
    let nv = v.norm();
    if nv > 0.0 {
        v / nv
    } else {
        v
    }
}

/// The single-step reduction: run the iterative generator on a T = 1
/// horizon with an empty history (max ||N1 v|| s.t. ||N2 v|| <= eps).
pub fn static_t1_attack(
    horizon: &HorizonObservation,
    support: &AttackSupport,
    eps: f64,
) -> Result<AttackStepResult> {
    if horizon.t != 1 {
        return Err(Error::Config("static reduction requires a T = 1 horizon".into()));
    }
    let mut ws = GeneratorWorkspace::new(horizon.clone(), support.clone())?;
    let history = AttackHistory::new(support.clone(), 1);
    let config = GeneratorConfig::new(eps, 0.0, 1e-4, 2000, 1e-6)?;
    ws.generate(&history, &config)
}
