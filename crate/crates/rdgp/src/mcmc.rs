//! Adaptive random-walk Metropolis, plus the convergence and Monte Carlo
//! error diagnostics the rest of the crate relies on.
//!
//! The engine is deliberately generic: the target is any closure
//! `&[f64] -> Option<(f64, Aux)>` returning the unnormalized log density and
//! an arbitrary payload computed from quantities already in hand at the
//! evaluation (e.g. the boundary posterior moments, which would otherwise
//! require refactorizing a Gram matrix per kept draw). `None` means the
//! point has zero posterior mass or failed to factorize, and is rejected.
//!
//! Proposals are joint Gaussian steps `x' = x + λ·(s ∘ z)` so each
//! iteration costs one density evaluation. During warmup the global
//! multiplier `λ` is tuned toward [`TARGET_ACCEPT`] in small batches
//! (Robbins–Monro step sizes), and halfway through warmup the
//! per-coordinate scales `s` are replaced by empirical standard deviations
//! of the chain so far. Everything is frozen after warmup, keeping the
//! kept portion a valid Markov chain.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Acceptance rate the warmup adaptation steers toward, a standard choice
/// for multivariate random-walk Metropolis.
pub const TARGET_ACCEPT: f64 = 0.3;

/// Split-R̂ above which a run is flagged as not converged.
pub const RHAT_THRESHOLD: f64 = 1.05;

const ADAPT_BATCH: usize = 25;

/// One chain's kept output.
#[derive(Debug, Clone)]
pub struct ChainOutput<Aux> {
    pub draws: Vec<Vec<f64>>,
    pub aux: Vec<Aux>,
    /// Acceptance rate over the kept (post-warmup) portion.
    pub accept_rate: f64,
}

/// Merged multi-chain output with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct McmcRun<Aux> {
    /// Kept draws from all chains, concatenated in chain order.
    pub draws: Vec<Vec<f64>>,
    /// Payloads aligned with `draws`.
    pub aux: Vec<Aux>,
    /// Per-dimension split-R̂ over the kept draws.
    pub rhat: Vec<f64>,
    /// Post-warmup acceptance rate per chain.
    pub accept_rates: Vec<f64>,
    /// Kept draws per chain (all chains keep the same number).
    pub kept_per_chain: usize,
}

impl<Aux> McmcRun<Aux> {
    /// Whether every dimension's split-R̂ is at most [`RHAT_THRESHOLD`].
    pub fn converged(&self) -> bool {
        self.rhat.iter().all(|&r| !r.is_finite() || r <= RHAT_THRESHOLD)
    }

    /// One dimension of the merged draws as a column.
    pub fn column(&self, dim: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[dim]).collect()
    }
}

/// Deterministic per-chain seed stream (splitmix64 over the base seed).
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn standard_normals(rng: &mut ChaCha8Rng, d: usize, out: &mut Vec<f64>) {
    out.clear();
    for _ in 0..d {
        out.push(StandardNormal.sample(rng));
    }
}

/// Run one adaptive chain.
///
/// # Errors
/// [`Error::OptimizationFailure`] if the initial point itself has zero
/// posterior mass.
pub fn run_chain<Aux: Clone, F>(
    f: &F,
    init: &[f64],
    init_scales: &[f64],
    warmup: usize,
    kept: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ChainOutput<Aux>>
where
    F: Fn(&[f64]) -> Option<(f64, Aux)>,
{
    let d = init.len();
    let (mut lp, mut aux) = f(init).ok_or_else(|| {
        Error::OptimizationFailure(format!("initial point {init:?} has zero posterior density"))
    })?;
    if d == 0 {
        // Point-mass configurations (every parameter fixed) still need a
        // draw stream of the right length for downstream passes.
        return Ok(ChainOutput {
            draws: vec![Vec::new(); kept],
            aux: vec![aux; kept],
            accept_rate: 1.0,
        });
    }
    let mut x = init.to_vec();
    let mut scales: Vec<f64> = init_scales.to_vec();
    let mut log_lambda = 0.0f64;

    let mut history: Vec<f64> = Vec::with_capacity(warmup * d);
    let mut batch_accepts = 0usize;
    let mut batch_count = 0usize;
    let mut z = Vec::with_capacity(d);
    let mut proposal = vec![0.0; d];

    for i in 0..warmup {
        standard_normals(rng, d, &mut z);
        let lambda = log_lambda.exp();
        for j in 0..d {
            proposal[j] = x[j] + lambda * scales[j] * z[j];
        }
        let u: f64 = rng.random();
        if let Some((lp_new, aux_new)) = f(&proposal) {
            if u.ln() < lp_new - lp {
                x.copy_from_slice(&proposal);
                lp = lp_new;
                aux = aux_new;
                batch_accepts += 1;
            }
        }
        history.extend_from_slice(&x);

        if (i + 1) % ADAPT_BATCH == 0 {
            batch_count += 1;
            let rate = batch_accepts as f64 / ADAPT_BATCH as f64;
            log_lambda += (rate - TARGET_ACCEPT) / (batch_count as f64).sqrt();
            log_lambda = log_lambda.clamp(-12.0, 12.0);
            batch_accepts = 0;
        }

        // Switch to empirical per-coordinate scales once enough of the
        // chain has been seen, then let lambda re-tune around them.
        if i + 1 == warmup / 2 && i + 1 >= 2 * ADAPT_BATCH {
            let rows = i + 1;
            for j in 0..d {
                let col: Vec<f64> = (0..rows).map(|r| history[r * d + j]).collect();
                let sd = sample_sd(&col);
                if sd.is_finite() && sd > 0.0 {
                    scales[j] = sd;
                }
            }
            log_lambda = (2.38 / (d as f64).sqrt()).ln();
            batch_count = 0;
        }
    }

    let lambda = log_lambda.exp();
    let mut draws = Vec::with_capacity(kept);
    let mut aux_out = Vec::with_capacity(kept);
    let mut accepts = 0usize;
    for _ in 0..kept {
        standard_normals(rng, d, &mut z);
        for j in 0..d {
            proposal[j] = x[j] + lambda * scales[j] * z[j];
        }
        let u: f64 = rng.random();
        if let Some((lp_new, aux_new)) = f(&proposal) {
            if u.ln() < lp_new - lp {
                x.copy_from_slice(&proposal);
                lp = lp_new;
                aux = aux_new;
                accepts += 1;
            }
        }
        draws.push(x.clone());
        aux_out.push(aux.clone());
    }

    Ok(ChainOutput {
        draws,
        aux: aux_out,
        accept_rate: accepts as f64 / kept.max(1) as f64,
    })
}

/// Run `inits.len()` independent chains from per-chain starting points and
/// merge their kept draws in chain order. Chain `c` draws from a ChaCha8
/// stream seeded by `mix_seed(seed, c)`, so the result is bitwise
/// reproducible.
pub fn run_chains<Aux: Clone, F>(
    f: &F,
    inits: &[Vec<f64>],
    init_scales: &[f64],
    warmup: usize,
    kept: usize,
    seed: u64,
) -> Result<McmcRun<Aux>>
where
    F: Fn(&[f64]) -> Option<(f64, Aux)>,
{
    if inits.is_empty() || kept == 0 {
        return Err(Error::InvalidParameter(
            "need at least one chain and one kept iteration".into(),
        ));
    }
    let d = inits[0].len();
    let mut chains = Vec::with_capacity(inits.len());
    for (c, init) in inits.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, c as u64));
        chains.push(run_chain(f, init, init_scales, warmup, kept, &mut rng)?);
    }

    let rhat = (0..d)
        .map(|j| {
            let cols: Vec<Vec<f64>> = chains
                .iter()
                .map(|c| c.draws.iter().map(|x| x[j]).collect())
                .collect();
            split_rhat(&cols)
        })
        .collect();

    let mut draws = Vec::with_capacity(inits.len() * kept);
    let mut aux = Vec::with_capacity(inits.len() * kept);
    let mut accept_rates = Vec::with_capacity(inits.len());
    for c in chains {
        draws.extend(c.draws);
        aux.extend(c.aux);
        accept_rates.push(c.accept_rate);
    }
    Ok(McmcRun { draws, aux, rhat, accept_rates, kept_per_chain: kept })
}

/// Arithmetic mean.
pub fn sample_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (denominator `n − 1`).
pub fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = sample_mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Unbiased sample standard deviation.
pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_var(xs).sqrt()
}

/// Linear-interpolation sample quantile (the common "type 7" definition:
/// index `p·(n−1)` into the order statistics).
pub fn sample_quantile(xs: &[f64], p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "quantile level must be in [0, 1]");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    if v.is_empty() {
        return f64::NAN;
    }
    let idx = p * (v.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    v[lo] + frac * (v[hi] - v[lo])
}

/// Split-R̂ (potential scale reduction on half-chains) for one scalar
/// parameter. Values near 1 indicate the chains agree; constant chains
/// yield exactly 1.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let h = c.len() / 2;
        if h < 2 {
            return f64::NAN;
        }
        halves.push(&c[..h]);
        halves.push(&c[h..2 * h]);
    }
    let n = halves[0].len();
    let means: Vec<f64> = halves.iter().map(|h| sample_mean(h)).collect();
    let vars: Vec<f64> = halves.iter().map(|h| sample_var(h)).collect();
    let grand = sample_mean(&means);
    let b = n as f64 * sample_var(&means);
    let w = sample_mean(&vars);
    if w <= f64::EPSILON * grand.abs().max(1.0) {
        let spread = means.iter().map(|&x| (x - grand).abs()).fold(0.0, f64::max);
        return if spread <= f64::EPSILON * grand.abs().max(1.0) {
            1.0
        } else {
            f64::INFINITY
        };
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

/// Effective sample size of one sequence via the initial-positive-sequence
/// estimator of the integrated autocorrelation time (Geyer 1992): sum
/// paired autocorrelations `ρ_{2k} + ρ_{2k+1}` until a pair goes
/// non-positive.
pub fn ess(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let m = sample_mean(xs);
    let centered: Vec<f64> = xs.iter().map(|&x| x - m).collect();
    let gamma0 = centered.iter().map(|&c| c * c).sum::<f64>() / n as f64;
    if gamma0 <= 0.0 {
        return n as f64;
    }
    let rho = |t: usize| -> f64 {
        if t >= n {
            return 0.0;
        }
        let s: f64 = (0..n - t).map(|i| centered[i] * centered[i + t]).sum();
        s / (n as f64 * gamma0)
    };
    let mut pair_sum = 0.0;
    let mut k = 0usize;
    loop {
        let g = rho(2 * k) + rho(2 * k + 1);
        if g <= 0.0 || 2 * k >= n - 1 {
            break;
        }
        pair_sum += g;
        k += 1;
    }
    let iat = (2.0 * pair_sum - 1.0).max(1e-12);
    (n as f64 / iat).min(n as f64 * 2.0)
}

/// Combined effective sample size of independent chains (the sum of
/// per-chain estimates).
pub fn ess_chains(chains: &[Vec<f64>]) -> f64 {
    chains.iter().map(|c| ess(c)).sum()
}
