//! Steady-state predictors at the optimum: GGD moments, Hessian, step-size
//! bound, gradient-noise covariance and mean-square deviation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::filter::{CostModel, Kernel, RtgaParams};
use crate::noise::{ggd_kurtosis, NoiseSpec};
use crate::signal::dot;

/// Largest filter order accepted by the Kronecker-product solver.
pub const MAX_THEORY_ORDER: usize = 64;

/// E|X|^m for a zero-mean GGD of shape `alpha` and variance `sigma²`.
pub fn ggd_abs_moment(m: f64, alpha: f64, sigma: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidShape(alpha));
    }
    if !(m >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "moment order {m} must be >= 0"
        )));
    }
    let log_ratio = ln_gamma((m + 1.0) / alpha) - ln_gamma(1.0 / alpha)
        + 0.5 * m * (ln_gamma(1.0 / alpha) - ln_gamma(3.0 / alpha));
    Ok(sigma.abs().powf(m) * log_ratio.exp())
}

/// The same expression continued to negative orders through Γ's analytic
/// continuation. Only the Taylor coefficients for b < 2 need this; the
/// value is a formal one and may be negative.
fn ggd_moment_continued(m: f64, alpha: f64, sigma: f64) -> f64 {
    if m >= 0.0 {
        let log_ratio = ln_gamma((m + 1.0) / alpha) - ln_gamma(1.0 / alpha)
            + 0.5 * m * (ln_gamma(1.0 / alpha) - ln_gamma(3.0 / alpha));
        return sigma.abs().powf(m) * log_ratio.exp();
    }
    let g1 = gamma(1.0 / alpha);
    let g3 = gamma(3.0 / alpha);
    sigma.abs().powf(m) * gamma((m + 1.0) / alpha) / g1 * (g1 / g3).powf(0.5 * m)
}

/// GGD shape whose kurtosis matches that of `e_o = v − w_oᵀu`.
///
/// Fourth cumulants add over the independent terms. The result is clamped
/// to `[0.1, 50]`.
pub fn effective_shape(w_o: &[f64], input: &NoiseSpec, output: &NoiseSpec) -> Result<f64> {
    let var_u = input.total_variance();
    let var_v = output.total_variance();
    let cum4 = |s: &NoiseSpec, var: f64| s.fourth_moment() - 3.0 * var * var;
    let var = var_v + dot(w_o, w_o) * var_u;
    if var <= 0.0 {
        return Ok(2.0);
    }
    let k4 = cum4(output, var_v) + w_o.iter().map(|w| w.powi(4)).sum::<f64>() * cum4(input, var_u);
    let target = 3.0 + k4 / (var * var);
    let (mut lo, mut hi) = (0.1f64, 50.0f64);
    if target >= ggd_kurtosis(lo) {
        return Ok(lo);
    }
    if target <= ggd_kurtosis(hi) {
        return Ok(hi);
    }
    // Kurtosis decreases in alpha; bisect in log alpha.
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if ggd_kurtosis(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    /// Input covariance R.
    pub r: DMatrix<f64>,
    pub w_o: DVector<f64>,
    pub sigma_i2: f64,
    pub sigma_o2: f64,
    /// GGD shape of the a-priori error at the optimum.
    pub alpha: f64,
    pub params: RtgaParams,
    /// Update probability 1 − P_ce.
    pub p_t: f64,
}

/// The scalar Taylor coefficients multiplying the matrix terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub h1a: f64,
    pub h2a: f64,
    /// c²ϑ^{2b−4}, the gradient-noise scale.
    pub s_scale: f64,
}

impl TheoryInputs {
    /// White unit-variance input, φ taken from the variance ratio.
    #[allow(clippy::too_many_arguments)]
    pub fn white(
        w_o: &[f64],
        sigma_i2: f64,
        sigma_o2: f64,
        alpha: f64,
        a: f64,
        b: f64,
        c: f64,
        p_t: f64,
    ) -> Result<Self> {
        let l = w_o.len();
        let t = Self {
            r: DMatrix::identity(l, l),
            w_o: DVector::from_column_slice(w_o),
            sigma_i2,
            sigma_o2,
            alpha,
            params: RtgaParams::new(a, b, c, 0.0, sigma_o2 / sigma_i2)?,
            p_t,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.w_o.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.w_o.len();
        if l == 0 || l > MAX_THEORY_ORDER {
            return Err(Error::InvalidParameter(format!(
                "theory order {l} outside 1..={MAX_THEORY_ORDER}"
            )));
        }
        if self.r.nrows() != l || self.r.ncols() != l {
            return Err(Error::Dimension {
                expected: l,
                actual: self.r.nrows(),
            });
        }
        if self.r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let scale = self.r.amax().max(f64::MIN_POSITIVE);
        for i in 0..l {
            for j in 0..i {
                if (self.r[(i, j)] - self.r[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidCovariance(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = SymmetricEigen::new(self.r.clone()).eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::InvalidCovariance(format!(
                "minimum eigenvalue {min_eig} is not positive"
            )));
        }
        if !(self.p_t > 0.0 && self.p_t <= 1.0) {
            return Err(Error::InvalidProbability(self.p_t));
        }
        if !(self.sigma_i2 >= 0.0) || !(self.sigma_o2 >= 0.0) {
            return Err(Error::InvalidParameter("noise variances must be >= 0".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidShape(self.alpha));
        }
        self.params.validate()
    }

    /// ‖w̄_o‖² = φ + ‖w_o‖².
    pub fn augmented_norm2(&self) -> f64 {
        self.params.phi + self.w_o.norm_squared()
    }

    /// ϑ^m with scale σᵢ.
    fn theta(&self, m: f64) -> f64 {
        ggd_moment_continued(m, self.alpha, self.sigma_i2.sqrt())
    }

    pub fn coefficients(&self) -> Coefficients {
        let RtgaParams { a, b, c, .. } = self.params;
        let t_2b4 = self.theta(2.0 * b - 4.0);
        let sign = if a < b { -1.0 } else { 1.0 };
        let second = if b == 2.0 {
            0.0
        } else {
            c * (b - 2.0) * self.theta(b - 4.0)
        };
        Coefficients {
            h1a: c * c * sign * t_2b4 + second,
            h2a: c * self.theta(b - 2.0),
            s_scale: c * c * t_2b4,
        }
    }

    /// Rσᵢ²/‖w̄‖² + σᵢ⁴I/‖w̄‖² − σᵢ⁴w wᵀ/‖w̄‖⁴.
    pub fn h1b(&self) -> DMatrix<f64> {
        let l = self.order();
        let nb2 = self.augmented_norm2();
        let s2 = self.sigma_i2;
        let s4 = s2 * s2;
        let outer = &self.w_o * self.w_o.transpose();
        &self.r * (s2 / nb2) + DMatrix::identity(l, l) * (s4 / nb2) - outer * (s4 / (nb2 * nb2))
    }

    /// R/‖w̄‖².
    pub fn h2b(&self) -> DMatrix<f64> {
        &self.r / self.augmented_norm2()
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn lambda_max(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

fn finite_coefficients(t: &TheoryInputs) -> Result<Coefficients> {
    let k = t.coefficients();
    if !(k.h1a.is_finite() && k.h2a.is_finite() && k.s_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Taylor coefficients undefined for b = {}, alpha = {}",
            t.params.b, t.alpha
        )));
    }
    Ok(k)
}

pub fn hessian_at_optimum(t: &TheoryInputs) -> Result<DMatrix<f64>> {
    t.validate()?;
    let k = finite_coefficients(t)?;
    Ok(symmetrize((t.h1b() * k.h1a + t.h2b() * k.h2a) * t.p_t))
}

/// Mean-stability bound 2 / {p_t[H1A·λmax(H1B) + H2A·λmax(H2B)]}.
pub fn max_step_size(t: &TheoryInputs) -> Result<f64> {
    t.validate()?;
    let k = finite_coefficients(t)?;
    let denom = t.p_t * (k.h1a * lambda_max(&t.h1b()) + k.h2a * lambda_max(&t.h2b()));
    if !(denom > 0.0) {
        return Err(Error::StabilityIndeterminate(denom));
    }
    Ok(2.0 / denom)
}

pub fn gradient_noise_covariance(t: &TheoryInputs) -> Result<DMatrix<f64>> {
    t.validate()?;
    Ok(symmetrize(t.h1b() * finite_coefficients(t)?.s_scale))
}

/// Kronecker-form steady-state MSD μ²·sᵀ(I − F)⁻¹vec(I).
pub fn steady_state_msd(t: &TheoryInputs, mu: f64) -> Result<f64> {
    let h = hessian_at_optimum(t)?;
    let s = gradient_noise_covariance(t)?;
    let l = t.order();
    let rho_a = SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .map(|lam| (1.0 - mu * lam).abs())
        .fold(0.0f64, f64::max);
    let rho_f = rho_a * rho_a;
    if !(rho_f < 1.0) {
        return Err(Error::DivergentRegime(rho_f));
    }
    let a = DMatrix::identity(l, l) - &h * mu;
    let f = a.kronecker(&a);
    let n = l * l;
    let lhs = DMatrix::identity(n, n) - f;
    let vec_i = DVector::from_iterator(
        n,
        (0..n).map(|k| if k / l == k % l { 1.0 } else { 0.0 }),
    );
    let z = lhs
        .lu()
        .solve(&vec_i)
        .ok_or(Error::DivergentRegime(rho_f))?;
    // vec is column-major, as is nalgebra's storage.
    let s_vec = DVector::from_column_slice(s.as_slice());
    Ok((mu * mu * s_vec.dot(&z)).max(0.0))
}

/// Monte-Carlo statistics of a gradient sample mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMoments {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub draws: usize,
}

/// Mean of ĝ(w_o) over independent white-input EIV draws.
pub fn empirical_gradient_at_optimum(
    w_o: &[f64],
    noise: (NoiseSpec, NoiseSpec),
    kernel: Kernel,
    params: &RtgaParams,
    n_draws: usize,
    seed: u64,
) -> Result<GradientMoments> {
    let model = CostModel::new(kernel, *params)?;
    let (su, sv) = (noise.0.sampler()?, noise.1.sampler()?);
    let l = w_o.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x_tilde = vec![0.0; l];
    let mut g = vec![0.0; l];
    let mut sum = vec![0.0; l];
    let mut sum_sq = vec![0.0; l];
    for _ in 0..n_draws {
        let mut wu = 0.0;
        for (k, xt) in x_tilde.iter_mut().enumerate() {
            let x: f64 = rng.sample(StandardNormal);
            let u = su.sample(&mut rng);
            wu += w_o[k] * u;
            *xt = x + u;
        }
        let e = sv.sample(&mut rng) - wu;
        model.gradient_into(e, &x_tilde, w_o, &mut g);
        for k in 0..l {
            sum[k] += g[k];
            sum_sq[k] += g[k] * g[k];
        }
    }
    let n = n_draws.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| {
            let var = (sq / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(GradientMoments {
        mean,
        std_error,
        draws: n_draws,
    })
}

/// Monte-Carlo average of the central-difference Jacobian of ĝ at `w_o`,
/// symmetrized. Every draw reuses its random numbers across the ± probes.
pub fn empirical_hessian_at_optimum(
    w_o: &[f64],
    noise: (NoiseSpec, NoiseSpec),
    kernel: Kernel,
    params: &RtgaParams,
    n_draws: usize,
    step: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let model = CostModel::new(kernel, *params)?;
    let (su, sv) = (noise.0.sampler()?, noise.1.sampler()?);
    let l = w_o.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; l];
    let mut x_tilde = vec![0.0; l];
    let mut w = w_o.to_vec();
    let (mut gp, mut gm) = (vec![0.0; l], vec![0.0; l]);
    let mut h = DMatrix::<f64>::zeros(l, l);
    for _ in 0..n_draws {
        for k in 0..l {
            x[k] = rng.sample(StandardNormal);
            x_tilde[k] = x[k] + su.sample(&mut rng);
        }
        let d_tilde = dot(w_o, &x) + sv.sample(&mut rng);
        for j in 0..l {
            w[j] = w_o[j] + step;
            model.gradient_into(d_tilde - dot(&w, &x_tilde), &x_tilde, &w, &mut gp);
            w[j] = w_o[j] - step;
            model.gradient_into(d_tilde - dot(&w, &x_tilde), &x_tilde, &w, &mut gm);
            w[j] = w_o[j];
            for i in 0..l {
                h[(i, j)] += (gp[i] - gm[i]) / (2.0 * step);
            }
        }
    }
    Ok(symmetrize(h / n_draws.max(1) as f64))
}
