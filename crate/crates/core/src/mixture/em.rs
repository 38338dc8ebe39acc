use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{bic_score, log_sum_exp, GaussianComponent, MixtureModel, WindowVector, MIN_REG_COVAR, REL_REG_COVAR};
use crate::error::{Error, Result};

/// Components lighter than this are re-seeded.
const MIN_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmSettings {
    pub seed: u64,
    pub max_iter: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tol: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

impl EmSettings {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// A fit together with its per-iteration log-likelihood trace.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: MixtureModel,
    /// Log-likelihood of the parameters entering each E-step.
    pub history: Vec<f64>,
    /// Iterations whose E-step followed a component re-seed. The trace is
    /// only monotone between these points.
    pub reseeds: Vec<usize>,
    pub converged: bool,
}

impl EmFit {
    /// Largest decrease between consecutive log-likelihoods that are not
    /// separated by a re-seed (0 if the trace never decreases).
    pub fn max_decrease(&self) -> f64 {
        self.history
            .windows(2)
            .enumerate()
            .filter(|(i, _)| !self.reseeds.contains(&(i + 1)))
            .map(|(_, w)| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct BicSelection {
    pub model: MixtureModel,
    /// `(K, BIC)` for every candidate, ascending in K.
    pub candidates: Vec<(usize, f64)>,
}

fn data_matrix(data: &[WindowVector]) -> Result<DMatrix<f64>> {
    let first = data.first().ok_or(Error::Empty("training data"))?;
    let d = first.dim();
    if d == 0 {
        return Err(Error::Empty("window dimension"));
    }
    if let Some(w) = data.iter().find(|w| w.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: w.dim(),
        });
    }
    let cols: Vec<DVector<f64>> = data.iter().map(|w| w.values().clone()).collect();
    Ok(DMatrix::from_columns(&cols))
}

/// Weighted scatter `Σ wᵢ (xᵢ − μ)(xᵢ − μ)ᵀ`, symmetrized.
fn scatter(x: &DMatrix<f64>, mean: &DVector<f64>, weights: Option<&[f64]>) -> DMatrix<f64> {
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= mean;
    }
    let weighted = match weights {
        Some(w) => {
            let mut c = centered.clone();
            for (mut col, &wi) in c.column_iter_mut().zip(w) {
                col *= wi;
            }
            c
        }
        None => centered.clone(),
    };
    let s = weighted * centered.transpose();
    (&s + s.transpose()) * 0.5
}

fn kmeans_pp(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let n = x.ncols();
    let first = rng.random_range(0..n);
    let mut centers = vec![x.column(first).into_owned()];
    let mut d2: Vec<f64> = x.column_iter().map(|c| (c - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, v) in d2.iter().enumerate() {
                acc += v;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = x.column(idx).into_owned();
        for (v, col) in d2.iter_mut().zip(x.column_iter()) {
            *v = v.min((col - &c).norm_squared());
        }
        centers.push(c);
    }
    centers
}

struct Params {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

/// Returns the log-likelihood and the `n × k` responsibility matrix.
fn e_step(x: &DMatrix<f64>, p: &Params) -> Result<(f64, DMatrix<f64>)> {
    let (d, n) = x.shape();
    let k = p.weights.len();
    let mut logp = DMatrix::zeros(n, k);
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    for j in 0..k {
        let chol = Cholesky::new(p.covs[j].clone()).ok_or(Error::SingularCovariance)?;
        let l = chol.l_dirty();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mut z = x.clone();
        for mut col in z.column_iter_mut() {
            col -= &p.means[j];
        }
        l.solve_lower_triangular_unchecked_mut(&mut z);
        let c = p.weights[j].ln() - 0.5 * (d as f64 * log_2pi + log_det);
        for (i, col) in z.column_iter().enumerate() {
            logp[(i, j)] = c - 0.5 * col.norm_squared();
        }
    }
    let mut ll = 0.0;
    let mut row = vec![0.0; k];
    for i in 0..n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = logp[(i, j)];
        }
        let lse = log_sum_exp(&row);
        ll += lse;
        for j in 0..k {
            logp[(i, j)] = (row[j] - lse).exp();
        }
    }
    if !ll.is_finite() {
        return Err(Error::NonFinite("EM log-likelihood".into()));
    }
    Ok((ll, logp))
}

/// Updates `p` in place; returns true if any component had to be re-seeded.
fn m_step(x: &DMatrix<f64>, resp: &DMatrix<f64>, reg: f64, base_cov: &DMatrix<f64>, p: &mut Params) -> bool {
    let (d, n) = x.shape();
    let k = p.weights.len();
    let ident = DMatrix::<f64>::identity(d, d);
    let mut degenerate = Vec::new();
    // The "fewer than d+1 points" rule only applies when the data could
    // support every component at that size.
    let count_rule = k > 1 && n >= k * (d + 1);
    for j in 0..k {
        let r = resp.column(j);
        let nk: f64 = r.sum();
        let w = nk / n as f64;
        if k > 1 && (w < MIN_WEIGHT || (count_rule && nk < (d + 1) as f64)) {
            degenerate.push(j);
            continue;
        }
        let mean = (x * r) / nk;
        let cov = scatter(x, &mean, Some(r.as_slice())) / nk + &ident * reg;
        p.weights[j] = w;
        p.means[j] = mean;
        p.covs[j] = cov;
    }
    if degenerate.is_empty() {
        return false;
    }
    for &j in &degenerate {
        let healthy: Vec<&DVector<f64>> = (0..k)
            .filter(|i| !degenerate.contains(i) || *i < j)
            .filter(|i| *i != j)
            .map(|i| &p.means[i])
            .collect();
        let far = x
            .column_iter()
            .enumerate()
            .map(|(i, col)| {
                let dmin = healthy
                    .iter()
                    .map(|m| (col - *m).norm_squared())
                    .fold(f64::INFINITY, f64::min);
                (i, dmin)
            })
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        p.means[j] = x.column(far.0).into_owned();
        p.covs[j] = base_cov.clone();
        p.weights[j] = 1.0 / k as f64;
    }
    let total: f64 = p.weights.iter().sum();
    for w in &mut p.weights {
        *w /= total;
    }
    true
}

/// Fits a `k`-component full-covariance mixture by EM.
pub fn fit_em(data: &[WindowVector], k: usize, settings: &EmSettings) -> Result<MixtureModel> {
    fit_em_traced(data, k, settings).map(|f| f.model)
}

pub fn fit_em_traced(data: &[WindowVector], k: usize, settings: &EmSettings) -> Result<EmFit> {
    let x = data_matrix(data)?;
    let (d, n) = x.shape();
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooFewPoints { k, n });
    }

    let global_mean = x.column_mean();
    let global_cov = scatter(&x, &global_mean, None) / n as f64;
    let reg = (REL_REG_COVAR * global_cov.trace() / d as f64).max(MIN_REG_COVAR);
    let base_cov = &global_cov + DMatrix::<f64>::identity(d, d) * reg;

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut params = Params {
        weights: vec![1.0 / k as f64; k],
        means: kmeans_pp(&x, k, &mut rng),
        covs: vec![base_cov.clone(); k],
    };

    let mut history = Vec::new();
    let mut reseeds = Vec::new();
    let mut converged = false;
    let mut just_reseeded = false;
    for it in 0..settings.max_iter {
        let (ll, resp) = e_step(&x, &params)?;
        history.push(ll);
        if it > 0 && !just_reseeded {
            let prev = history[it - 1];
            if (ll - prev).abs() < settings.tol * ll.abs() {
                converged = true;
                break;
            }
        }
        just_reseeded = m_step(&x, &resp, reg, &base_cov, &mut params);
        if just_reseeded {
            reseeds.push(it + 1);
        }
    }

    let components = params
        .weights
        .into_iter()
        .zip(params.means)
        .zip(params.covs)
        .map(|((w, m), c)| GaussianComponent::new(w, m, c))
        .collect::<Result<Vec<_>>>()?;
    let mut model = MixtureModel::from_components(components)?;
    model.n_iterations = history.len();
    model.seed = settings.seed;
    model.reg_covar = reg;
    model.log_likelihood = model.total_log_likelihood(data)?;
    model.bic = bic_score(&model, data)?;
    Ok(EmFit {
        model,
        history,
        reseeds,
        converged,
    })
}

/// Fits every K in `k_min..=k_max` and keeps the lowest BIC (ties go to the
/// smaller K).
pub fn select_k_bic(data: &[WindowVector], k_min: usize, k_max: usize, settings: &EmSettings) -> Result<BicSelection> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidConfig(format!("empty K range {k_min}..={k_max}")));
    }
    if k_max > data.len() {
        return Err(Error::TooFewPoints { k: k_max, n: data.len() });
    }
    let fits: Vec<MixtureModel> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| fit_em(data, k, settings))
        .collect::<Result<_>>()?;
    let candidates = fits.iter().map(|m| (m.k(), m.bic)).collect();
    let mut best: Option<MixtureModel> = None;
    for m in fits {
        if best.as_ref().is_none_or(|b| m.bic < b.bic) {
            best = Some(m);
        }
    }
    Ok(BicSelection {
        model: best.expect("non-empty K range"),
        candidates,
    })
}
