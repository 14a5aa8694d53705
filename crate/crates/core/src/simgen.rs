//! Synthetic benchmark: scale-free feature graph, graph-structured Gaussian
//! features, centrality-stratified true features and a nonlinear binary
//! outcome.

use std::collections::BTreeSet;

use log::warn;
use nalgebra::{Cholesky, DMatrix};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::graph::{closeness_centrality, generate_ba_graph, one_hop_expand, rank_descending, FeatureGraph};
use crate::seed::{derive_seed, rng_from_seed, Rng};
use crate::{Error, Result};

pub const EDGE_WEIGHT_RANGE: (f64, f64) = (0.1, 10.0);
pub const FEATURE_MEAN_RANGE: (f64, f64) = (7.0, 13.0);
pub const BETA_RANGE: (f64, f64) = (-5.0, 5.0);
pub const INTERCEPT_MEAN: f64 = -5.0;
pub const INTERCEPT_SD: f64 = 5.0;
pub const HIGH_CENTRALITY_SHARE: f64 = 0.8;
pub const MAX_OUTCOME_ATTEMPTS: usize = 20;

/// Where edge weights go in `A*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyLayout {
    /// `A*(u, v) = A*(v, u) = w`.
    Symmetric,
    /// `A*(max(u, v), min(u, v)) = w`, so `I − A*` is unit lower-triangular.
    LowerTriangular,
}

/// One weight `w ~ U[0.1, 10]` per undirected edge, placed according to
/// `layout`.
pub fn weighted_adjacency(graph: &FeatureGraph, layout: AdjacencyLayout, rng: &mut Rng) -> Array2<f64> {
    let p = graph.node_count();
    let dist = Uniform::new_inclusive(EDGE_WEIGHT_RANGE.0, EDGE_WEIGHT_RANGE.1).expect("valid range");
    let mut a = Array2::zeros((p, p));
    for (u, v) in graph.edges() {
        if u == v {
            continue;
        }
        let w = dist.sample(rng);
        let (hi, lo) = (u.max(v), u.min(v));
        a[[hi, lo]] = w;
        if layout == AdjacencyLayout::Symmetric {
            a[[lo, hi]] = w;
        }
    }
    a
}

/// Largest diagonal jitter, relative to the mean variance, tried when
/// factorising `Σ_X`.
pub const MAX_RELATIVE_JITTER: f64 = 1e-8;

/// `Σ_X = M Mᵀ` with `M = (I − A*)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCovariance {
    pub sigma: Array2<f64>,
    pub inverse: Array2<f64>,
}

fn is_strictly_lower(a: &Array2<f64>) -> bool {
    (0..a.nrows()).all(|i| a.slice(s![i, i..]).iter().all(|&v| v == 0.0))
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn feature_covariance(a_star: &Array2<f64>) -> Result<FeatureCovariance> {
    let p = a_star.nrows();
    if a_star.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "weighted adjacency",
            expected: p,
            actual: a_star.ncols(),
        });
    }
    let m = if is_strictly_lower(a_star) {
        // Forward substitution on (I − A*) M = I: row i of M is e_i plus the
        // weighted rows of its lower-index neighbours.
        let mut m = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            let mut row = Array1::<f64>::zeros(p);
            row[i] = 1.0;
            for k in 0..i {
                let w = a_star[[i, k]];
                if w != 0.0 {
                    row.scaled_add(w, &m.row(k));
                }
            }
            m.row_mut(i).assign(&row);
        }
        m
    } else {
        let system = DMatrix::<f64>::identity(p, p) - to_dmatrix(a_star);
        let inv = system
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("I − A* is singular".into()))?;
        from_dmatrix(&inv)
    };
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("I − A* is singular or its inverse overflowed".into()));
    }
    let mut sigma = m.dot(&m.t());
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("covariance overflowed".into()));
    }
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 * (sigma[[i, j]] + sigma[[j, i]]);
            sigma[[i, j]] = v;
            sigma[[j, i]] = v;
        }
    }
    Ok(FeatureCovariance { sigma, inverse: m })
}

impl FeatureCovariance {
    /// A factor `L` with `L Lᵀ = Σ_X` and the relative jitter it needed. A
    /// unit lower-triangular `M` already is the Cholesky factor; otherwise
    /// `Σ_X` is factorised numerically.
    pub fn sampling_factor(&self) -> Result<(Array2<f64>, f64)> {
        let m = &self.inverse;
        let unit_lower = m.diag().iter().all(|&d| d == 1.0)
            && (0..m.nrows()).all(|i| m.slice(s![i, i + 1..]).iter().all(|&v| v == 0.0));
        if unit_lower {
            Ok((m.clone(), 0.0))
        } else {
            cholesky_with_jitter(&self.sigma, MAX_RELATIVE_JITTER)
        }
    }
}

/// Cholesky `Σ = L Lᵀ` on the lower triangle; `None` if `Σ` is not
/// numerically positive definite.
fn cholesky(sigma: &Array2<f64>) -> Option<Array2<f64>> {
    let c = Cholesky::new(to_dmatrix(sigma))?;
    let l = from_dmatrix(&c.l());
    l.iter().all(|v| v.is_finite()).then_some(l)
}

/// Cholesky factor with diagonal jitter. Tries no jitter first, then
/// `1e-12, 1e-11, …, max_rel_jitter` times the mean diagonal. Returns the
/// factor and the relative jitter used.
pub fn cholesky_with_jitter(sigma: &Array2<f64>, max_rel_jitter: f64) -> Result<(Array2<f64>, f64)> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "covariance",
            expected: p,
            actual: sigma.ncols(),
        });
    }
    if let Some(l) = cholesky(sigma) {
        return Ok((l, 0.0));
    }
    let scale = sigma.diag().mean().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
    let mut rel = 1e-12;
    while rel <= max_rel_jitter * (1.0 + 1e-9) {
        let mut jittered = sigma.clone();
        jittered.diag_mut().mapv_inplace(|d| d + rel * scale);
        if let Some(l) = cholesky(&jittered) {
            warn!("covariance needed relative jitter {rel:e} to factorise");
            return Ok((l, rel));
        }
        rel *= 10.0;
    }
    Err(Error::Numerical(format!(
        "Cholesky failed with relative jitter up to {max_rel_jitter:e}"
    )))
}

/// Draws `μ_j ~ U[7, 13]` once, then `n` rows `μ + z Lᵀ` with `z ~ N(0, I)`.
pub fn sample_features(factor: &Array2<f64>, n: usize, rng: &mut Rng) -> (Array2<f64>, Vec<f64>) {
    let p = factor.nrows();
    let mean_dist = Uniform::new_inclusive(FEATURE_MEAN_RANGE.0, FEATURE_MEAN_RANGE.1).expect("valid range");
    let mu: Vec<f64> = (0..p).map(|_| mean_dist.sample(rng)).collect();
    let z = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(rng));
    let mut x = z.dot(&factor.t());
    x += &Array1::from(mu.clone());
    (x, mu)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueFeatures {
    pub core: BTreeSet<usize>,
    /// Core plus its one-hop neighbourhood.
    pub important: BTreeSet<usize>,
}

/// Splits nodes into the top `⌈p/2⌉` by closeness (`H_c`) and the rest
/// (`L_c`), samples `⌈0.8 t⌉` core features from `H_c` and the remainder from
/// `L_c`, then expands the core by one hop.
pub fn select_true_features(graph: &FeatureGraph, t: usize, rng: &mut Rng) -> Result<TrueFeatures> {
    let p = graph.node_count();
    if t > p {
        return Err(Error::param(format!("cannot pick {t} true features out of {p}")));
    }
    let ranked = rank_descending(&closeness_centrality(graph));
    let (high, low) = ranked.split_at(p.div_ceil(2));
    let mut n_high = (HIGH_CENTRALITY_SHARE * t as f64).ceil() as usize;
    let mut n_low = t - n_high;
    if n_high > high.len() {
        warn!(
            "high-centrality stratum has {} nodes, moving the excess to the other stratum",
            high.len()
        );
        n_low += n_high - high.len();
        n_high = high.len();
    }
    if n_low > low.len() {
        warn!(
            "low-centrality stratum has {} nodes, moving the excess to the other stratum",
            low.len()
        );
        n_high += n_low - low.len();
        n_low = low.len();
    }
    let mut core = BTreeSet::new();
    core.extend(sample(rng, high.len(), n_high).into_iter().map(|i| high[i]));
    core.extend(sample(rng, low.len(), n_low).into_iter().map(|i| low[i]));
    let important = one_hop_expand(graph, &core);
    Ok(TrueFeatures { core, important })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `y = 1` iff `g` exceeds its empirical quantile at the threshold level
    /// (linear interpolation between order statistics).
    Quantile,
    /// `y = 1` iff min-max rescaled `g` exceeds the threshold.
    Rescale,
}

fn min_max(v: &[f64]) -> Option<Vec<f64>> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi > lo && (hi - lo).is_finite()).then(|| v.iter().map(|x| (x - lo) / (hi - lo)).collect())
}

fn quantile(v: &[f64], q: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `g = exp(φ) + φ²` on the min-max scaled linear predictor.
pub fn outcome_score(ell: &[f64]) -> Option<Vec<f64>> {
    Some(min_max(ell)?.into_iter().map(|phi| phi.exp() + phi * phi).collect())
}

/// Binary labels from a linear predictor; `None` when the predictor is
/// constant or only one class results.
pub fn label_from_linear_predictor(ell: &[f64], threshold: f64, mode: ThresholdMode) -> Option<Vec<u8>> {
    let g = outcome_score(ell)?;
    let y: Vec<u8> = match mode {
        ThresholdMode::Rescale => min_max(&g)?.into_iter().map(|v| (v > threshold) as u8).collect(),
        ThresholdMode::Quantile => {
            let q = quantile(&g, threshold);
            g.iter().map(|&v| (v > q) as u8).collect()
        }
    };
    (y.contains(&0) && y.contains(&1)).then_some(y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub y: Vec<u8>,
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub attempts: usize,
}

/// Draws `β ~ U[-5, 5]`, `β₀ ~ N(−5, 5²)` and labels the rows of `x_imp`,
/// redrawing up to 20 times while the outcome is degenerate.
pub fn generate_outcome(
    x_imp: ArrayView2<'_, f64>,
    threshold: f64,
    mode: ThresholdMode,
    rng: &mut Rng,
) -> Result<Outcome> {
    if x_imp.ncols() == 0 {
        return Err(Error::Empty("important feature set"));
    }
    let beta_dist = Uniform::new_inclusive(BETA_RANGE.0, BETA_RANGE.1).expect("valid range");
    let intercept = Normal::new(INTERCEPT_MEAN, INTERCEPT_SD).expect("valid normal");
    for attempt in 1..=MAX_OUTCOME_ATTEMPTS {
        let beta: Vec<f64> = (0..x_imp.ncols()).map(|_| beta_dist.sample(rng)).collect();
        let beta0 = intercept.sample(rng);
        let ell = x_imp.dot(&Array1::from(beta.clone())) + beta0;
        if let Some(y) = label_from_linear_predictor(ell.as_slice().expect("contiguous"), threshold, mode) {
            return Ok(Outcome {
                y,
                beta0,
                beta,
                attempts: attempt,
            });
        }
    }
    Err(Error::Numerical(format!(
        "outcome stayed degenerate after {MAX_OUTCOME_ATTEMPTS} draws"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimScenario {
    pub n: usize,
    /// Feature-to-sample ratio; `p = round(p_n · n)`.
    pub p_n: f64,
    /// Share of true features; `t = round(p_t · p)` unless overridden.
    pub p_t: f64,
    pub ba_m: usize,
    pub seed: u64,
    pub t_override: Option<usize>,
    pub threshold: f64,
    pub threshold_mode: ThresholdMode,
    pub adjacency: AdjacencyLayout,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            n: 5000,
            p_n: 0.05,
            p_t: 0.2,
            ba_m: 2,
            seed: 0,
            t_override: None,
            threshold: 0.6,
            threshold_mode: ThresholdMode::Quantile,
            adjacency: AdjacencyLayout::Symmetric,
        }
    }
}

impl SimScenario {
    pub fn p(&self) -> usize {
        (self.p_n * self.n as f64).round() as usize
    }

    pub fn t(&self) -> usize {
        self.t_override
            .unwrap_or_else(|| (self.p_t * self.p() as f64).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if self.n < 2 {
            return Err(Error::param("scenario needs at least two samples"));
        }
        if self.p_n.is_nan() || self.p_n <= 0.0 || !(0.0..=1.0).contains(&self.p_t) {
            return Err(Error::param("p_n must be positive and p_t in [0, 1]"));
        }
        if self.ba_m == 0 || self.ba_m >= p {
            return Err(Error::param(format!(
                "need 1 <= ba_m < p (ba_m = {}, p = {p})",
                self.ba_m
            )));
        }
        if self.t() == 0 || self.t() > p {
            return Err(Error::param(format!("need 1 <= t <= p (t = {}, p = {p})", self.t())));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::param("threshold must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub scenario: SimScenario,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub graph: FeatureGraph,
    pub truth: TrueFeatures,
    pub mu: Vec<f64>,
    pub outcome: Outcome,
}

impl SimDataset {
    /// 1 for features in the important set, else 0.
    pub fn ground_truth(&self) -> Vec<u8> {
        (0..self.x.ncols())
            .map(|j| self.truth.important.contains(&j) as u8)
            .collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        (0..self.x.ncols()).map(|j| format!("f{j}")).collect()
    }
}

/// Each stage draws from its own stream derived from the scenario seed.
pub fn build_scenario(scenario: &SimScenario) -> Result<SimDataset> {
    scenario.validate()?;
    let stream = |tag: &str| rng_from_seed(derive_seed(scenario.seed, 0, tag));
    let p = scenario.p();
    let graph = generate_ba_graph(p, scenario.ba_m, &mut stream("sim-graph"))?;
    let a_star = weighted_adjacency(&graph, scenario.adjacency, &mut stream("sim-weights"));
    let (factor, _) = feature_covariance(&a_star)?.sampling_factor()?;
    let (x, mu) = sample_features(&factor, scenario.n, &mut stream("sim-features"));
    let truth = select_true_features(&graph, scenario.t(), &mut stream("sim-truth"))?;
    let cols: Vec<usize> = truth.important.iter().copied().collect();
    let x_imp = x.select(Axis(1), &cols);
    let outcome = generate_outcome(
        x_imp.view(),
        scenario.threshold,
        scenario.threshold_mode,
        &mut stream("sim-outcome"),
    )?;
    let names = (0..p).map(|j| format!("f{j}")).collect();
    Ok(SimDataset {
        scenario: scenario.clone(),
        x,
        y: outcome.y.clone(),
        graph: graph.with_names(names)?,
        truth,
        mu,
        outcome,
    })
}
