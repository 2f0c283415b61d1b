//! Mutual-information reward between the predicted target belief and the
//! next measurement, under a limited field of view.
//!
//! The next measurement is a mixed random variable: a continuous
//! range-bearing vector when the target is detectable, or the discrete
//! no-detection atom. Its distribution given a particle belief is a
//! Gaussian mixture with one component per in-FOV particle plus an atom
//! carrying the out-of-FOV mass, so the reward reduces to
//! `-p_empty*ln(p_empty) + H_r - H(z|x)` where `H_r` is the (unnormalized)
//! mixture entropy. `H_r` has no closed form; it is approximated by
//! evaluating the log-mixture at per-component sigma points, which is exact
//! for a single component and bounded by `c*m*sigma_max^2` in general. A
//! Monte Carlo estimator serves as the ground-truth oracle, and the
//! closed-form log-mixture Hessian is exposed as a diagnostic.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::belief::{JointBeliefState, ParticleBelief};
use crate::env::{is_inside_fov, OccupancyGrid, SensorConfig};
use crate::geom::{wrap_angle, Point2};
use crate::models::{range_bearing, step_robot, NoiseModel, RobotControl, TargetState};

/// Largest supported measurement dimension (stack buffers in hot loops).
pub const MAX_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum MiError {
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("mixture has no components but p_empty < 1")]
    EmptyMixture,
    #[error("measurement dimension {0} exceeds the supported maximum {MAX_DIM}")]
    DimensionTooLarge(usize),
    #[error("sigma-point spread lambda={lambda} requires lambda + m > 0 (m={dim})")]
    BadLambda { lambda: f64, dim: usize },
}

/// Configuration of the MI approximation.
#[derive(Clone, Copy, Debug)]
pub struct MiConfig {
    /// Sigma-point spread parameter; must satisfy `lambda + m > 0`.
    pub lambda: f64,
    /// Fine-grid cell side for particle simplification, meters. 0 disables.
    pub simplify_cell: f64,
    /// Source-particle truncation radius, meters. `INFINITY` disables.
    pub truncation_radius: f64,
    /// Fold linearized process noise into the measurement covariance when
    /// predicting the observation mixture.
    pub fold_process_noise: bool,
}

impl Default for MiConfig {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            simplify_cell: 0.0,
            truncation_radius: f64::INFINITY,
            fold_process_noise: false,
        }
    }
}

/// Reward whose raw value fell below the approximation-error floor; the
/// clamped value is still usable.
pub const MI_NEGATIVE_FLOOR: f64 = -0.02;

/// 2m+1 deterministically placed points matching a Gaussian's first two
/// moments.
#[derive(Clone, Debug)]
pub struct SigmaPoints {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

/// Predicted measurement distribution for one (belief, action) pair: a
/// Gaussian mixture over the in-FOV particles plus the no-detection atom.
#[derive(Clone, Debug)]
pub struct PredictedGmm {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    /// State-space position of each component's source particle; empty for
    /// synthetic mixtures, in which case truncation is unavailable.
    sources: Vec<Point2>,
    p_empty: f64,
    sigma: DMatrix<f64>,
    /// Index of a coordinate living on the circle (the bearing), whose
    /// residuals are wrapped during density evaluation.
    bearing_dim: Option<usize>,
}

impl PredictedGmm {
    /// Synthetic mixture without source particles.
    pub fn new(
        means: Vec<DVector<f64>>,
        weights: Vec<f64>,
        sigma: DMatrix<f64>,
        p_empty: f64,
    ) -> Result<Self, MiError> {
        Self::with_sources(means, weights, Vec::new(), sigma, p_empty, None)
    }

    pub fn with_sources(
        means: Vec<DVector<f64>>,
        weights: Vec<f64>,
        sources: Vec<Point2>,
        sigma: DMatrix<f64>,
        p_empty: f64,
        bearing_dim: Option<usize>,
    ) -> Result<Self, MiError> {
        let dim = sigma.nrows();
        if dim > MAX_DIM {
            return Err(MiError::DimensionTooLarge(dim));
        }
        assert_eq!(sigma.ncols(), dim);
        assert!(means.iter().all(|m| m.len() == dim));
        assert_eq!(means.len(), weights.len());
        assert!(sources.is_empty() || sources.len() == means.len());
        let total: f64 = weights.iter().sum::<f64>() + p_empty;
        assert!(
            (total - 1.0).abs() <= 1e-9,
            "component weights + p_empty must sum to 1, got {total}"
        );
        assert!(weights.iter().all(|w| *w >= 0.0) && p_empty >= -1e-12);
        Ok(Self {
            dim,
            weights,
            means,
            sources,
            p_empty: p_empty.max(0.0),
            sigma,
            bearing_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn p_empty(&self) -> f64 {
        self.p_empty
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
}

/// `-p ln p` with the information-theoretic convention `0 ln 0 = 0`.
fn neg_p_log_p(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Symmetric positive-definite square root via eigendecomposition.
fn symmetric_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>, MiError> {
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|l| *l <= 0.0) {
        return Err(MiError::NotPositiveDefinite);
    }
    let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(&eig.eigenvectors * roots * eig.eigenvectors.transpose())
}

/// Sigma points of `N(mu, sigma)`: the mean plus symmetric offsets along
/// the columns of the scaled symmetric matrix square root.
pub fn sigma_points(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    lambda: f64,
) -> Result<SigmaPoints, MiError> {
    let m = mu.len();
    if m > MAX_DIM {
        return Err(MiError::DimensionTooLarge(m));
    }
    if lambda + m as f64 <= 0.0 {
        return Err(MiError::BadLambda { lambda, dim: m });
    }
    let root = symmetric_sqrt(&(sigma * (lambda + m as f64)))?;
    let mut points = Vec::with_capacity(2 * m + 1);
    let mut weights = Vec::with_capacity(2 * m + 1);
    points.push(mu.clone());
    weights.push(lambda / (lambda + m as f64));
    for l in 0..m {
        let col = root.column(l);
        points.push(mu + &col);
        weights.push(0.5 / (lambda + m as f64));
    }
    for l in 0..m {
        let col = root.column(l);
        points.push(mu - &col);
        weights.push(0.5 / (lambda + m as f64));
    }
    Ok(SigmaPoints {
        points,
        weights,
        lambda,
    })
}

/// Precomputed evaluator for the mixture log-density.
struct GmmEval {
    dim: usize,
    n: usize,
    means: Vec<f64>,
    log_w: Vec<f64>,
    inv_l: Vec<f64>,
    log_norm: f64,
    bearing_dim: Option<usize>,
}

impl GmmEval {
    fn new(g: &PredictedGmm) -> Result<Self, MiError> {
        let m = g.dim;
        let chol = g
            .sigma
            .clone()
            .cholesky()
            .ok_or(MiError::NotPositiveDefinite)?;
        let l = chol.l();
        let log_det: f64 = (0..m).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
        let inv = l
            .solve_lower_triangular(&DMatrix::identity(m, m))
            .ok_or(MiError::NotPositiveDefinite)?;
        let mut inv_l = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                inv_l[r * m + c] = inv[(r, c)];
            }
        }
        let mut means = Vec::with_capacity(g.means.len() * m);
        for mu in &g.means {
            means.extend(mu.iter().copied());
        }
        Ok(Self {
            dim: m,
            n: g.means.len(),
            means,
            log_w: g
                .weights
                .iter()
                .map(|w| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
                .collect(),
            inv_l,
            log_norm: -0.5 * (m as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
            bearing_dim: g.bearing_dim,
        })
    }

    /// `ln w_i + ln N(z; mu_i, Sigma)`.
    #[inline]
    fn comp_exponent(&self, z: &[f64], i: usize) -> f64 {
        let m = self.dim;
        let mu = &self.means[i * m..(i + 1) * m];
        let mut delta = [0.0f64; MAX_DIM];
        for d in 0..m {
            delta[d] = z[d] - mu[d];
        }
        if let Some(bd) = self.bearing_dim {
            delta[bd] = wrap_angle(delta[bd]);
        }
        let mut quad = 0.0;
        for r in 0..m {
            let mut y = 0.0;
            for c in 0..=r {
                y += self.inv_l[r * m + c] * delta[c];
            }
            quad += y * y;
        }
        self.log_w[i] + self.log_norm - 0.5 * quad
    }

    /// `ln p_r(z)` over all components or a truncated subset, via
    /// max-subtracted log-sum-exp.
    fn log_mixture(&self, z: &[f64], allowed: Option<&[u32]>, scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        let mut max = f64::NEG_INFINITY;
        match allowed {
            None => {
                for i in 0..self.n {
                    let e = self.comp_exponent(z, i);
                    if e > max {
                        max = e;
                    }
                    scratch.push(e);
                }
            }
            Some(idx) => {
                for &i in idx {
                    let e = self.comp_exponent(z, i as usize);
                    if e > max {
                        max = e;
                    }
                    scratch.push(e);
                }
            }
        }
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        let mut sum = 0.0;
        for &e in scratch.iter() {
            let d = e - max;
            if d > -45.0 {
                sum += d.exp();
            }
        }
        max + sum.ln()
    }
}

/// Differential entropy of `N(|, sigma)`: `0.5 ln((2 pi e)^m |Sigma|)`.
pub fn gaussian_entropy(sigma: &DMatrix<f64>) -> Result<f64, MiError> {
    let m = sigma.nrows();
    let chol = sigma.clone().cholesky().ok_or(MiError::NotPositiveDefinite)?;
    let log_det: f64 = (0..m).map(|i| chol.l()[(i, i)].ln()).sum::<f64>() * 2.0;
    Ok(0.5 * (m as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln()) + log_det))
}

/// Predict the measurement mixture for taking `action` from `state`: the
/// robot is stepped through the unicycle model, particles advance through
/// the mean (noiseless) dynamics so the reward stays a deterministic
/// function of the pair, and each particle inside the new FOV contributes
/// one Gaussian component in measurement space.
pub fn predict_gmm(
    state: &JointBeliefState,
    action: RobotControl,
    dt: f64,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
    noise: &NoiseModel,
    fold_process_noise: bool,
) -> PredictedGmm {
    let pose = step_robot(&state.robot, action, dt);
    let mut weights = Vec::new();
    let mut means = Vec::new();
    let mut sources = Vec::new();
    let robot_ok = map.contains(pose.position());
    for (s, w) in state.belief.states.iter().zip(&state.belief.weights) {
        if *w <= 0.0 {
            continue;
        }
        let inside = robot_ok
            && map.contains(s.point())
            && is_inside_fov(&pose, s.point(), sensor, map).unwrap_or(false);
        if inside {
            let (r, b) = range_bearing(&pose, s);
            means.push(DVector::from_vec(vec![r, b]));
            weights.push(*w);
            sources.push(s.point());
        }
    }
    let mut sigma = DMatrix::from_fn(2, 2, |r, c| noise.sigma[(r, c)]);
    if fold_process_noise && !means.is_empty() {
        // Linearize h at the weighted mean of the in-FOV particles and add
        // the mapped process noise to the shared covariance.
        let total: f64 = weights.iter().sum();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for (p, w) in sources.iter().zip(&weights) {
            cx += p.x * w / total;
            cy += p.y * w / total;
        }
        let dx = cx - pose.x;
        let dy = cy - pose.y;
        let r2 = (dx * dx + dy * dy).max(1e-9);
        let r = r2.sqrt();
        let jac = Matrix2::new(dx / r, dy / r, -dy / r2, dx / r2);
        let mapped = jac * noise.q * jac.transpose();
        for rr in 0..2 {
            for cc in 0..2 {
                sigma[(rr, cc)] += mapped[(rr, cc)];
            }
        }
    }
    // Normalization drift from the belief is absorbed into the atom.
    let p_empty = (1.0 - weights.iter().sum::<f64>()).clamp(0.0, 1.0);
    PredictedGmm::with_sources(means, weights, sources, sigma, p_empty, Some(1))
        .expect("mixture built from a normalized belief")
}

/// Entropy of the measurement given the target state: only in-FOV
/// particles contribute, each with the closed-form Gaussian entropy.
pub fn conditional_entropy(g: &PredictedGmm) -> f64 {
    if g.components() == 0 {
        return 0.0;
    }
    let m = g.dim as f64;
    let chol = g
        .sigma
        .clone()
        .cholesky()
        .expect("mixture covariance must be positive definite");
    let log_det: f64 = (0..g.dim).map(|i| chol.l()[(i, i)].ln()).sum::<f64>() * 2.0;
    (1.0 - g.p_empty) * (0.5 * m * ((2.0 * std::f64::consts::PI).ln() + 1.0) + 0.5 * log_det)
}

/// Sigma-point approximation of the mixed-variable measurement entropy:
/// `-p_empty ln p_empty + H_r_hat`, with `H_r_hat` the per-component
/// sigma-point average of the negative log-mixture. With a finite
/// `truncation_radius`, the inner mixture only sums components whose source
/// particles lie within that radius of the outer component's source.
pub fn sp_entropy(g: &PredictedGmm, cfg: &MiConfig) -> Result<f64, MiError> {
    let n = g.components();
    if n == 0 {
        if g.p_empty < 1.0 - 1e-9 {
            return Err(MiError::EmptyMixture);
        }
        return Ok(0.0);
    }
    let m = g.dim;
    if cfg.lambda + m as f64 <= 0.0 {
        return Err(MiError::BadLambda { lambda: cfg.lambda, dim: m });
    }
    let eval = GmmEval::new(g)?;
    let root = symmetric_sqrt(&(&g.sigma * (cfg.lambda + m as f64)))?;
    let w0 = cfg.lambda / (cfg.lambda + m as f64);
    let wl = 0.5 / (cfg.lambda + m as f64);

    let neighbors: Option<Vec<Vec<u32>>> =
        if cfg.truncation_radius.is_finite() && !g.sources.is_empty() {
            let rho = cfg.truncation_radius;
            Some(
                (0..n)
                    .map(|j| {
                        (0..n)
                            .filter(|&i| g.sources[i].distance(g.sources[j]) <= rho)
                            .map(|i| i as u32)
                            .collect()
                    })
                    .collect(),
            )
        } else {
            None
        };

    let mut scratch = Vec::with_capacity(n);
    let mut zbuf = [0.0f64; MAX_DIM];
    let mut acc = 0.0;
    for j in 0..n {
        if g.weights[j] <= 0.0 {
            continue;
        }
        let allowed = neighbors.as_ref().map(|nb| nb[j].as_slice());
        let mu = g.means[j].as_slice();
        let mut hj = w0 * eval.log_mixture(mu, allowed, &mut scratch);
        for l in 0..m {
            for sign in [1.0f64, -1.0] {
                for d in 0..m {
                    zbuf[d] = mu[d] + sign * root[(d, l)];
                }
                hj += wl * eval.log_mixture(&zbuf[..m], allowed, &mut scratch);
            }
        }
        acc += g.weights[j] * hj;
    }
    Ok(neg_p_log_p(g.p_empty) - acc)
}

/// Result of the MI reward computation. `value` is clamped to be
/// nonnegative; `raw` keeps the unclamped difference so callers can flag
/// approximation error beyond the [`MI_NEGATIVE_FLOOR`].
#[derive(Clone, Copy, Debug)]
pub struct MiValue {
    pub value: f64,
    pub raw: f64,
}

impl MiValue {
    /// True when the raw difference fell below the expected
    /// approximation-error floor and deserves a diagnostic.
    pub fn suspicious(&self) -> bool {
        self.raw < MI_NEGATIVE_FLOOR
    }
}

/// Mutual information between the post-action target belief and the next
/// measurement: `H(z) - H(z|x)` with both terms computed from the same
/// predicted mixture. Optionally simplifies the belief onto a fine grid
/// first (the SP-s estimator).
pub fn mi_reward_detailed(
    state: &JointBeliefState,
    action: RobotControl,
    dt: f64,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
    noise: &NoiseModel,
    cfg: &MiConfig,
) -> MiValue {
    let g = if cfg.simplify_cell > 0.0 {
        let simplified = JointBeliefState {
            robot: state.robot,
            belief: simplify_particles(&state.belief, cfg.simplify_cell),
        };
        predict_gmm(&simplified, action, dt, sensor, map, noise, cfg.fold_process_noise)
    } else {
        predict_gmm(state, action, dt, sensor, map, noise, cfg.fold_process_noise)
    };
    let h_z = match sp_entropy(&g, cfg) {
        Ok(h) => h,
        Err(_) => return MiValue { value: 0.0, raw: 0.0 },
    };
    let raw = h_z - conditional_entropy(&g);
    MiValue {
        value: raw.max(0.0),
        raw,
    }
}

/// Clamped MI reward; see [`mi_reward_detailed`].
pub fn mi_reward(
    state: &JointBeliefState,
    action: RobotControl,
    dt: f64,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
    noise: &NoiseModel,
    cfg: &MiConfig,
) -> f64 {
    mi_reward_detailed(state, action, dt, sensor, map, noise, cfg).value
}

/// Merge particles sharing an axis-aligned grid cell of side `cell`
/// (anchored at the world origin) into their weighted average.
pub fn simplify_particles(b: &ParticleBelief, cell: f64) -> ParticleBelief {
    assert!(cell > 0.0, "simplification cell side must be positive");
    use std::collections::BTreeMap;
    let mut bins: BTreeMap<(i64, i64), (f64, f64, f64)> = BTreeMap::new();
    for (s, w) in b.states.iter().zip(&b.weights) {
        let key = (
            (s.x / cell).floor() as i64,
            (s.y / cell).floor() as i64,
        );
        let e = bins.entry(key).or_insert((0.0, 0.0, 0.0));
        e.0 += w;
        e.1 += w * s.x;
        e.2 += w * s.y;
    }
    let mut states = Vec::with_capacity(bins.len());
    let mut weights = Vec::with_capacity(bins.len());
    for (key, (w, wx, wy)) in bins {
        if w > 0.0 {
            states.push(TargetState::new(wx / w, wy / w));
            weights.push(w);
        } else {
            // Weightless cell: keep a representative at the cell center so
            // the particle is not silently lost.
            states.push(TargetState::new(
                (key.0 as f64 + 0.5) * cell,
                (key.1 as f64 + 0.5) * cell,
            ));
            weights.push(0.0);
        }
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    ParticleBelief { states, weights }
}

/// Monte Carlo entropy estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub entropy: f64,
    pub std_err: f64,
}

/// Monte Carlo oracle for the mixed-variable measurement entropy: samples
/// from the normalized in-FOV mixture and averages the negative
/// log-density, scaled by the in-FOV mass.
pub fn mc_entropy<R: Rng + ?Sized>(
    g: &PredictedGmm,
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate, MiError> {
    assert!(n_samples >= 1);
    let n = g.components();
    if n == 0 {
        if g.p_empty < 1.0 - 1e-9 {
            return Err(MiError::EmptyMixture);
        }
        return Ok(McEstimate { entropy: 0.0, std_err: 0.0 });
    }
    let m = g.dim;
    let mass = 1.0 - g.p_empty;
    if mass <= 0.0 {
        return Ok(McEstimate { entropy: 0.0, std_err: 0.0 });
    }
    let eval = GmmEval::new(g)?;
    let chol = g
        .sigma
        .clone()
        .cholesky()
        .ok_or(MiError::NotPositiveDefinite)?;
    let l = chol.l();

    // Cumulative component weights for inverse-CDF component choice.
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in &g.weights {
        acc += w;
        cum.push(acc);
    }

    // Draw all samples serially so the estimate does not depend on the
    // worker count, then evaluate the log-density in parallel chunks that
    // are reduced in a fixed order.
    let mut samples = vec![0.0f64; n_samples * m];
    let mut xi = [0.0f64; MAX_DIM];
    for s in 0..n_samples {
        let u: f64 = rng.gen::<f64>() * mass;
        let comp = cum.partition_point(|c| *c < u).min(n - 1);
        for d in 0..m {
            xi[d] = rng.sample(StandardNormal);
        }
        let mu = &g.means[comp];
        for r in 0..m {
            let mut v = mu[r];
            for c in 0..=r {
                v += l[(r, c)] * xi[c];
            }
            samples[s * m + r] = v;
        }
    }

    let chunk = 8192 * m;
    let partials: Vec<(f64, f64)> = samples
        .par_chunks(chunk)
        .map(|block| {
            let mut scratch = Vec::with_capacity(eval.n);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for z in block.chunks_exact(m) {
                let lp = eval.log_mixture(z, None, &mut scratch);
                s1 += lp;
                s2 += lp * lp;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partials
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = s1 / n_samples as f64;
    let var = (s2 / n_samples as f64 - mean * mean).max(0.0);
    Ok(McEstimate {
        entropy: neg_p_log_p(g.p_empty) - mass * mean,
        std_err: mass * (var / n_samples as f64).sqrt(),
    })
}

/// Closed-form Hessian of the log-mixture-density at `z`; diagnostic used
/// to validate the approximation-error analysis against finite differences.
pub fn log_gmm_hessian(g: &PredictedGmm, z: &DVector<f64>) -> Result<DMatrix<f64>, MiError> {
    let n = g.components();
    if n == 0 {
        return Err(MiError::EmptyMixture);
    }
    let m = g.dim;
    assert_eq!(z.len(), m);
    let eval = GmmEval::new(g)?;
    // Normalized responsibilities via softmax; the formula is invariant to
    // the overall density scale.
    let mut expo = Vec::with_capacity(n);
    let mut max = f64::NEG_INFINITY;
    for i in 0..n {
        let e = eval.comp_exponent(z.as_slice(), i);
        if e > max {
            max = e;
        }
        expo.push(e);
    }
    if !max.is_finite() {
        return Err(MiError::EmptyMixture);
    }
    let mut resp: Vec<f64> = expo.into_iter().map(|e| (e - max).exp()).collect();
    let total: f64 = resp.iter().sum();
    for r in &mut resp {
        *r /= total;
    }

    let chol = g
        .sigma
        .clone()
        .cholesky()
        .ok_or(MiError::NotPositiveDefinite)?;
    let sigma_inv = chol.inverse();

    let mut msum = DMatrix::zeros(m, m);
    for i in 0..n {
        if resp[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            let c = resp[i] * resp[j];
            if c == 0.0 {
                continue;
            }
            let mu_i = &g.means[i];
            let mu_j = &g.means[j];
            for r in 0..m {
                for s in 0..m {
                    msum[(r, s)] += c * (mu_j[r] - mu_i[r]) * mu_j[s];
                }
            }
        }
    }
    Ok(&sigma_inv * msum * &sigma_inv - sigma_inv)
}
