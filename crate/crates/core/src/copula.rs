//! Gaussian copula densities, Sklar-factored joints, KL utilities and the
//! reparameterized ELBO estimator.
//!
//! The variational family used throughout the crate couples log-normal
//! marginals with a Gaussian copula, which is the same object as a
//! multivariate log-normal with log-scale covariance `D R D` (`R` the copula
//! correlation, `D` the diagonal of marginal log-scale deviations). Both
//! views are exposed here.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::special::{norm_cdf, norm_quantile};

const LN_2PI: f64 = 1.8378770664093453;

/// Correlation-scale Gaussian copula.
#[derive(Debug, Clone)]
pub struct GaussianCopula {
    sigma: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl GaussianCopula {
    /// Validates symmetry, unit diagonal and positive definiteness.
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() {
            return Err(Error::config("copula matrix must be square"));
        }
        for i in 0..sigma.nrows() {
            if (sigma[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::config(format!(
                    "copula matrix needs a unit diagonal, got {} at {i}",
                    sigma[(i, i)]
                )));
            }
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-10 {
                    return Err(Error::config("copula matrix must be symmetric"));
                }
            }
        }
        let chol = Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::numeric("copula matrix is not positive definite"))?;
        Ok(GaussianCopula { sigma, chol })
    }

    pub fn identity(p: usize) -> Self {
        GaussianCopula::new(DMatrix::identity(p, p)).expect("identity is a valid correlation")
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    fn ln_det(&self) -> f64 {
        2.0 * self.chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Log copula density at a latent Gaussian point `z`:
    /// `-½ ln|Σ| − ½ zᵀ(Σ⁻¹ − I)z`.
    pub fn log_density_at_z(&self, z: &DVector<f64>) -> f64 {
        let solved = self.chol.solve(z);
        -0.5 * self.ln_det() - 0.5 * (z.dot(&solved) - z.dot(z))
    }

    /// Copula density at a point of the open unit hypercube.
    pub fn density(&self, uvec: &[f64]) -> Result<f64> {
        if uvec.len() != self.dim() {
            return Err(Error::domain(format!(
                "expected {} components, got {}",
                self.dim(),
                uvec.len()
            )));
        }
        let mut z = DVector::zeros(uvec.len());
        for (i, &u) in uvec.iter().enumerate() {
            z[i] = norm_quantile(u)
                .map_err(|_| Error::domain(format!("copula argument {u} not inside (0,1)")))?;
        }
        Ok(self.log_density_at_z(&z).exp())
    }

    /// Draws a latent Gaussian point `z ~ N(0, Σ)`.
    pub fn sample_z(&self, rng: &mut impl Rng) -> DVector<f64> {
        let p = self.dim();
        let mut z = DVector::zeros(p);
        for i in 0..p {
            z[i] = standard_normal(rng);
        }
        self.chol.l() * z
    }
}

/// Single log-normal marginal with log-scale mean `u` and variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalMarginal {
    pub u: f64,
    pub sigma2: f64,
}

impl LogNormalMarginal {
    pub fn new(u: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !u.is_finite() || !sigma2.is_finite() {
            return Err(Error::config(format!(
                "log-normal marginal needs finite u and sigma2 > 0, got ({u}, {sigma2})"
            )));
        }
        Ok(LogNormalMarginal { u, sigma2 })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn ln_pdf(&self, theta: f64) -> Result<f64> {
        if !(theta > 0.0) {
            return Err(Error::domain(format!(
                "log-normal support is (0, inf), got {theta}"
            )));
        }
        let l = theta.ln();
        let z = (l - self.u) / self.sigma();
        Ok(-l - 0.5 * (LN_2PI + self.sigma2.ln()) - 0.5 * z * z)
    }

    pub fn pdf(&self, theta: f64) -> Result<f64> {
        Ok(self.ln_pdf(theta)?.exp())
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        norm_cdf((theta.ln() - self.u) / self.sigma())
    }

    pub fn quantile(&self, w: f64) -> Result<f64> {
        Ok((self.u + self.sigma() * norm_quantile(w)?).exp())
    }

    pub fn mean(&self) -> f64 {
        (self.u + 0.5 * self.sigma2).exp()
    }

    pub fn median(&self) -> f64 {
        self.u.exp()
    }

    pub fn variance(&self) -> f64 {
        (self.sigma2.exp() - 1.0) * (2.0 * self.u + self.sigma2).exp()
    }
}

/// Gaussian-copula-coupled log-normal joint, i.e. a multivariate log-normal.
#[derive(Debug, Clone)]
pub struct CopulaLogNormal {
    pub copula: GaussianCopula,
    pub marginals: Vec<LogNormalMarginal>,
}

impl CopulaLogNormal {
    pub fn new(copula: GaussianCopula, marginals: Vec<LogNormalMarginal>) -> Result<Self> {
        if copula.dim() != marginals.len() {
            return Err(Error::config(format!(
                "copula dimension {} does not match {} marginals",
                copula.dim(),
                marginals.len()
            )));
        }
        Ok(CopulaLogNormal { copula, marginals })
    }

    /// Builds the joint from log-scale mean vector and covariance matrix.
    pub fn from_log_scale(u: &DVector<f64>, sigma_log: &DMatrix<f64>) -> Result<Self> {
        let p = u.len();
        if sigma_log.nrows() != p || sigma_log.ncols() != p {
            return Err(Error::config("log-scale covariance shape mismatch"));
        }
        let mut corr = sigma_log.clone();
        let sd: Vec<f64> = (0..p)
            .map(|i| {
                let v = sigma_log[(i, i)];
                if v > 0.0 {
                    Ok(v.sqrt())
                } else {
                    Err(Error::config(format!("nonpositive variance at {i}")))
                }
            })
            .collect::<Result<_>>()?;
        for i in 0..p {
            for j in 0..p {
                corr[(i, j)] /= sd[i] * sd[j];
            }
            corr[(i, i)] = 1.0;
        }
        let marginals = (0..p)
            .map(|i| LogNormalMarginal::new(u[i], sigma_log[(i, i)]))
            .collect::<Result<_>>()?;
        Ok(CopulaLogNormal {
            copula: GaussianCopula::new(corr)?,
            marginals,
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn log_scale_cov(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut cov = self.copula.matrix().clone();
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] *= self.marginals[i].sigma() * self.marginals[j].sigma();
            }
        }
        cov
    }

    pub fn log_pdf(&self, theta: &DVector<f64>) -> Result<f64> {
        let p = self.dim();
        if theta.len() != p {
            return Err(Error::domain("dimension mismatch"));
        }
        let mut z = DVector::zeros(p);
        let mut marg = 0.0;
        for i in 0..p {
            if !(theta[i] > 0.0) {
                return Err(Error::domain(format!(
                    "component {i} = {} outside (0, inf)",
                    theta[i]
                )));
            }
            z[i] = (theta[i].ln() - self.marginals[i].u) / self.marginals[i].sigma();
            marg += self.marginals[i].ln_pdf(theta[i])?;
        }
        Ok(self.copula.log_density_at_z(&z) + marg)
    }

    /// Draws θ by pushing a copula sample through the marginal quantiles.
    pub fn sample(&self, rng: &mut impl Rng) -> DVector<f64> {
        let z = self.copula.sample_z(rng);
        DVector::from_iterator(
            self.dim(),
            z.iter()
                .zip(&self.marginals)
                .map(|(&zi, m)| (m.u + m.sigma() * zi).exp()),
        )
    }
}

/// Joint PDF under Sklar's factorization: copula density at the marginal
/// CDF images times the product of marginal PDFs.
pub fn sklar_joint_pdf(
    copula: &GaussianCopula,
    marginals: &[LogNormalMarginal],
    theta: &[f64],
) -> Result<f64> {
    if copula.dim() != marginals.len() || theta.len() != marginals.len() {
        return Err(Error::domain("dimension mismatch"));
    }
    let joint = CopulaLogNormal::new(copula.clone(), marginals.to_vec())?;
    Ok(joint.log_pdf(&DVector::from_column_slice(theta))?.exp())
}

/// KL divergence between two multivariate Gaussians,
/// `½[(μ₁−μ₂)ᵀΣ₂⁻¹(μ₁−μ₂) + ln(|Σ₂|/|Σ₁|) + tr(Σ₂⁻¹Σ₁) − K]`.
///
/// Because a multivariate log-normal is a deterministic transform of its
/// log-scale Gaussian, this is also the KL between two such log-normals with
/// the given log-scale parameters.
pub fn kl_mvn(
    mu1: &DVector<f64>,
    sig1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    sig2: &DMatrix<f64>,
) -> Result<f64> {
    let k = mu1.len();
    if mu2.len() != k || sig1.nrows() != k || sig2.nrows() != k {
        return Err(Error::domain("dimension mismatch"));
    }
    let chol2 = Cholesky::new(sig2.clone())
        .ok_or_else(|| Error::numeric("second covariance is not positive definite"))?;
    let chol1 = Cholesky::new(sig1.clone())
        .ok_or_else(|| Error::numeric("first covariance is not positive definite"))?;
    let diff = mu1 - mu2;
    let quad = diff.dot(&chol2.solve(&diff));
    let ln_det1 = 2.0 * chol1.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let ln_det2 = 2.0 * chol2.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = chol2.solve(sig1).trace();
    Ok(0.5 * (quad + ln_det2 - ln_det1 + trace - k as f64))
}

/// Monte Carlo decomposition of `KL(q ‖ p)` into a copula term and the sum
/// of marginal KLs, all estimated from a shared sample set drawn from `q`.
#[derive(Debug, Clone, Copy)]
pub struct KlDecomposition {
    pub total: f64,
    pub copula_term: f64,
    pub marginal_sum: f64,
    pub se_total: f64,
    pub se_copula: f64,
    pub se_marginal: f64,
    pub n_samples: usize,
}

/// Estimates the total KL, the copula term and the marginal-KL sum from one
/// shared sample set drawn from `q`.
///
/// The copula term compares both copula densities at the same uniform image
/// of each sample, so it vanishes identically when the copulas agree. The
/// decomposition identity `total = copula + marginals` is exact when the two
/// joints share their marginals, or share the independence copula.
pub fn kl_decomposition_check(
    q: &CopulaLogNormal,
    p: &CopulaLogNormal,
    n_samples: usize,
    seed: u64,
) -> Result<KlDecomposition> {
    if q.dim() != p.dim() {
        return Err(Error::domain("dimension mismatch"));
    }
    if n_samples < 10_000 {
        return Err(Error::estimation(format!(
            "need at least 1e4 samples, got {n_samples}"
        )));
    }
    const CHUNK: usize = 4096;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let dim = q.dim();

    // Per-chunk accumulators: (sum, sum of squares) for each of the three
    // integrands; chunks use independent ChaCha streams so the reduction is
    // deterministic under any thread count.
    let partials = par::map_range(n_chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        let take = CHUNK.min(n_samples - c * CHUNK);
        let mut acc = [[0.0f64; 2]; 3];
        for _ in 0..take {
            let z = q.copula.sample_z(&mut rng);
            let mut theta = DVector::zeros(dim);
            let mut lq_m = 0.0;
            let mut lp_m = 0.0;
            for i in 0..dim {
                let m = &q.marginals[i];
                theta[i] = (m.u + m.sigma() * z[i]).exp();
                lq_m += m.ln_pdf(theta[i]).expect("positive by construction");
                lp_m += p.marginals[i]
                    .ln_pdf(theta[i])
                    .expect("positive by construction");
            }
            // z re-standardized so the copula sees its uniform image exactly.
            let mut zu = DVector::zeros(dim);
            for i in 0..dim {
                zu[i] = (theta[i].ln() - q.marginals[i].u) / q.marginals[i].sigma();
            }
            let lq_c = q.copula.log_density_at_z(&zu);
            let lp_c_same_u = p.copula.log_density_at_z(&zu);
            // p's copula evaluated where p itself places the sample.
            let mut zp = DVector::zeros(dim);
            for i in 0..dim {
                zp[i] = (theta[i].ln() - p.marginals[i].u) / p.marginals[i].sigma();
            }
            let lp_c_own = p.copula.log_density_at_z(&zp);

            let total = (lq_c + lq_m) - (lp_c_own + lp_m);
            let copula_term = lq_c - lp_c_same_u;
            let marginal_term = lq_m - lp_m;
            for (slot, v) in acc.iter_mut().zip([total, copula_term, marginal_term]) {
                slot[0] += v;
                slot[1] += v * v;
            }
        }
        acc
    });

    let mut sums = [[0.0f64; 2]; 3];
    for part in &partials {
        for (s, p) in sums.iter_mut().zip(part) {
            s[0] += p[0];
            s[1] += p[1];
        }
    }
    let n = n_samples as f64;
    let stat = |s: [f64; 2]| {
        let mean = s[0] / n;
        let var = (s[1] / n - mean * mean).max(0.0);
        (mean, (var / n).sqrt())
    };
    let (total, se_total) = stat(sums[0]);
    let (copula_term, se_copula) = stat(sums[1]);
    let (marginal_sum, se_marginal) = stat(sums[2]);
    Ok(KlDecomposition {
        total,
        copula_term,
        marginal_sum,
        se_total,
        se_copula,
        se_marginal,
        n_samples,
    })
}

/// Mean/scale expansion of the copula's latent Gaussian:
/// `z̃ ~ N(μ, D Σ Dᵀ)` with positive diagonal `D`.
#[derive(Debug, Clone)]
pub struct ExpandedGaussian {
    pub mu: DVector<f64>,
    pub d: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl ExpandedGaussian {
    pub fn new(mu: DVector<f64>, d: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if d.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::config("expansion scales must be positive"));
        }
        if mu.len() != d.len() || sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return Err(Error::config("expansion dimension mismatch"));
        }
        // Validity of sigma (and hence of D Σ D) is checked here once.
        GaussianCopula::new(sigma.clone())?;
        Ok(ExpandedGaussian { mu, d, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Full covariance `D Σ Dᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut cov = self.sigma.clone();
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] *= self.d[i] * self.d[j];
            }
        }
        cov
    }
}

/// Pushes an expanded latent point through the marginal quantile transform:
/// `θᵢ = Fᵢ⁻¹(Φ((z̃ᵢ − μᵢ)/dᵢ))`, which for log-normal marginals reduces
/// exactly to `exp(uᵢ + σᵢ (z̃ᵢ − μᵢ)/dᵢ)`.
pub fn reparam_transform(
    z_tilde: &DVector<f64>,
    expanded: &ExpandedGaussian,
    marginals: &[LogNormalMarginal],
) -> Result<DVector<f64>> {
    let p = expanded.dim();
    if z_tilde.len() != p || marginals.len() != p {
        return Err(Error::domain("dimension mismatch"));
    }
    Ok(DVector::from_iterator(
        p,
        (0..p).map(|i| {
            let s = (z_tilde[i] - expanded.mu[i]) / expanded.d[i];
            (marginals[i].u + marginals[i].sigma() * s).exp()
        }),
    ))
}

/// Inverse of [`reparam_transform`].
pub fn reparam_transform_inverse(
    theta: &DVector<f64>,
    expanded: &ExpandedGaussian,
    marginals: &[LogNormalMarginal],
) -> Result<DVector<f64>> {
    let p = expanded.dim();
    if theta.len() != p || marginals.len() != p {
        return Err(Error::domain("dimension mismatch"));
    }
    let mut z = DVector::zeros(p);
    for i in 0..p {
        if !(theta[i] > 0.0) {
            return Err(Error::domain("theta components must be positive"));
        }
        let s = (theta[i].ln() - marginals[i].u) / marginals[i].sigma();
        z[i] = expanded.mu[i] + expanded.d[i] * s;
    }
    Ok(z)
}

/// Monte Carlo reparameterized ELBO estimate.
#[derive(Debug, Clone, Copy)]
pub struct ElboEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_used: usize,
    pub n_rejected: usize,
}

/// Estimates `E[log p(h(Z), X) − log q(Z) + Σ log hᵢ'(zᵢ)]` over
/// `Z ~ N(μ, DΣD)` for the non-decreasing transform built from
/// [`reparam_transform`].
///
/// Samples where the model log-joint is non-finite are rejected and counted;
/// more than 1% rejections aborts the estimate.
pub fn reparam_elbo_estimate<F>(
    model_log_joint: F,
    expanded: &ExpandedGaussian,
    marginals: &[LogNormalMarginal],
    n_samples: usize,
    seed: u64,
) -> Result<ElboEstimate>
where
    F: Fn(&DVector<f64>) -> f64 + Sync + Send,
{
    if n_samples < 1_000 {
        return Err(Error::estimation(format!(
            "need at least 1e3 samples, got {n_samples}"
        )));
    }
    let p = expanded.dim();
    if marginals.len() != p {
        return Err(Error::domain("dimension mismatch"));
    }
    let cov = expanded.covariance();
    let chol = Cholesky::new(cov)
        .ok_or_else(|| Error::numeric("expanded covariance is not positive definite"))?;
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();

    const CHUNK: usize = 1024;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let partials = par::map_range(n_chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        let take = CHUNK.min(n_samples - c * CHUNK);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut used = 0usize;
        let mut rejected = 0usize;
        for _ in 0..take {
            let mut eps = DVector::zeros(p);
            for i in 0..p {
                eps[i] = standard_normal(&mut rng);
            }
            let z_tilde = &expanded.mu + chol.l() * eps;
            let theta =
                reparam_transform(&z_tilde, expanded, marginals).expect("dimensions checked");
            let log_joint = model_log_joint(&theta);
            if !log_joint.is_finite() {
                rejected += 1;
                continue;
            }
            let diff = &z_tilde - &expanded.mu;
            let log_q = -0.5 * (p as f64 * LN_2PI + ln_det + diff.dot(&chol.solve(&diff)));
            // h'ᵢ(z̃ᵢ) = θᵢ σᵢ / dᵢ for the log-normal quantile transform.
            let log_h_prime: f64 = (0..p)
                .map(|i| theta[i].ln() + marginals[i].sigma().ln() - expanded.d[i].ln())
                .sum();
            let v = log_joint - log_q + log_h_prime;
            sum += v;
            sum2 += v * v;
            used += 1;
        }
        (sum, sum2, used, rejected)
    });

    let (mut sum, mut sum2, mut used, mut rejected) = (0.0, 0.0, 0usize, 0usize);
    for (s, s2, u, r) in partials {
        sum += s;
        sum2 += s2;
        used += u;
        rejected += r;
    }
    if rejected as f64 > 0.01 * n_samples as f64 {
        return Err(Error::estimation(format!(
            "{rejected} of {n_samples} samples had non-finite log-joint"
        )));
    }
    let n = used as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    Ok(ElboEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        n_used: used,
        n_rejected: rejected,
    })
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    use rand_distr::StandardNormal;
    rng.sample(StandardNormal)
}
