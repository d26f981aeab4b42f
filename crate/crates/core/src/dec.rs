//! DEC phase II: a centroid clustering head trained on encoder latents.
//!
//! Soft assignment uses a Student-t kernel,
//! `q_ij ∝ (1 + ‖z_i − μ_j‖² / α)^(−(α+1)/2)`, and the target distribution
//! sharpens it, `p_ij ∝ q_ij² / f_j` with `f_j = Σ_i q_ij`. Training minimizes
//! `KL(P ‖ Q)` averaged over samples.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dataio::Dataset;
use crate::error::{invalid, OdxuError, Result};
use crate::nn::{self, Autoencoder, History, OptState, TrainConfig};
use crate::rng::{seeded, stream};
use crate::transfer::{early_stop_check, Phase};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringHead {
    centroids: Array2<f64>,
    alpha: f64,
}

impl ClusteringHead {
    pub fn new(centroids: Array2<f64>, alpha: f64) -> Result<Self> {
        if centroids.nrows() < 2 {
            return invalid("clustering head needs k >= 2");
        }
        if !centroids.iter().all(|v| v.is_finite()) {
            return invalid("non-finite centroid");
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return invalid(format!("alpha {alpha} must be > 0"));
        }
        Ok(Self { centroids, alpha })
    }

    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn centroids(&self) -> &Array2<f64> {
        &self.centroids
    }
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ndarray::ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;

/// k-means++ seeding followed by Lloyd iterations until the relative inertia
/// change drops below [`KMEANS_TOL`] or [`KMEANS_MAX_ITER`] is reached.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeans> {
    let n = points.nrows();
    if k == 0 || n < k {
        return invalid(format!("k-means needs n >= k (n = {n}, k = {k})"));
    }
    let mut rng = seeded(seed, stream::KMEANS);
    let d = points.ncols();
    let mut centroids = Array2::zeros((k, d));
    centroids.row_mut(0).assign(&points.row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| sq_dist(p, centroids.row(0)))
        .collect();
    for j in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            // Never re-pick a point already used as a centroid.
            while dist[chosen] == 0.0 {
                chosen = (chosen + n - 1) % n;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(j).assign(&points.row(pick));
        for (i, p) in points.rows().into_iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(p, centroids.row(j)));
        }
    }

    let mut assignments = vec![0; n];
    let mut inertia = f64::INFINITY;
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut new_inertia = 0.0;
        for (i, p) in points.rows().into_iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            assignments[i] = j;
            new_inertia += d;
        }
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (p, &j) in points.rows().into_iter().zip(&assignments) {
            sums.row_mut(j).scaled_add(1.0, &p);
            counts[j] += 1;
        }
        for (j, &n) in counts.iter().enumerate() {
            if n > 0 {
                let mean = &sums.row(j) / n as f64;
                centroids.row_mut(j).assign(&mean);
            }
        }
        let converged = inertia.is_finite()
            && (inertia - new_inertia).abs() <= KMEANS_TOL * inertia.max(f64::MIN_POSITIVE);
        inertia = new_inertia;
        if converged || inertia == 0.0 {
            break;
        }
    }
    // Final assignment against the final centroids.
    inertia = 0.0;
    for (i, p) in points.rows().into_iter().enumerate() {
        let (j, d) = nearest(p, &centroids);
        assignments[i] = j;
        inertia += d;
    }
    Ok(KMeans {
        centroids,
        assignments,
        inertia,
        iterations,
    })
}

pub fn init_head(latents: ArrayView2<f64>, k: usize, seed: u64) -> Result<ClusteringHead> {
    if latents.nrows() < k {
        return invalid(format!(
            "cannot initialize {k} clusters from {} latent rows",
            latents.nrows()
        ));
    }
    ClusteringHead::new(kmeans(latents, k, seed)?.centroids, 1.0)
}

/// Student-t kernel weights before row normalization.
fn kernel(head: &ClusteringHead, latents: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (n, k) = (latents.nrows(), head.k());
    let a = head.alpha;
    let mut w = Array2::zeros((n, k));
    let mut inv = Array2::zeros((n, k));
    for (i, z) in latents.rows().into_iter().enumerate() {
        for (j, mu) in head.centroids.rows().into_iter().enumerate() {
            let base = 1.0 + sq_dist(z, mu) / a;
            inv[[i, j]] = 1.0 / base;
            w[[i, j]] = base.powf(-(a + 1.0) / 2.0);
        }
    }
    (w, inv)
}

fn normalize_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let s = row.sum();
        row /= s;
    }
}

pub fn soft_assign(head: &ClusteringHead, latents: ArrayView2<f64>) -> Array2<f64> {
    let (mut q, _) = kernel(head, latents);
    normalize_rows(&mut q);
    q
}

pub fn target_dist(q: &Array2<f64>) -> Array2<f64> {
    let freq = q.sum_axis(Axis(0));
    let mut p = q.mapv(|v| v * v);
    for mut row in p.rows_mut() {
        row /= &freq;
    }
    normalize_rows(&mut p);
    p
}

/// `Σ_ij p_ij ln(p_ij / q_ij)` with `0 ln 0 = 0`.
pub fn kl_divergence(p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv / qv).ln())
        .sum()
}

/// Per-sample mean KL, the quantity `cluster_train` minimizes and reports.
pub fn mean_kl(head: &ClusteringHead, latents: ArrayView2<f64>, p: &Array2<f64>) -> f64 {
    let q = soft_assign(head, latents);
    kl_divergence(p, &q) / latents.nrows().max(1) as f64
}

/// Gradients of [`mean_kl`] with `p` held fixed: returns (d/dμ, d/dz).
///
/// `∂/∂μ_j = −(α+1)/α · 1/n Σ_i (p_ij − q_ij)(z_i − μ_j) / (1 + ‖z_i − μ_j‖²/α)`
/// and `∂/∂z_i` is the same sum over `j` with opposite sign.
pub fn kl_gradients(head: &ClusteringHead, latents: ArrayView2<f64>, p: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (mut q, inv) = kernel(head, latents);
    normalize_rows(&mut q);
    let n = latents.nrows().max(1) as f64;
    let scale = (head.alpha + 1.0) / head.alpha / n;
    let mut g_mu = Array2::zeros(head.centroids.dim());
    let mut g_z = Array2::zeros(latents.dim());
    for (i, z) in latents.rows().into_iter().enumerate() {
        for (j, mu) in head.centroids.rows().into_iter().enumerate() {
            let coef = scale * (p[[i, j]] - q[[i, j]]) * inv[[i, j]];
            let diff = &z - &mu;
            g_mu.row_mut(j).scaled_add(-coef, &diff);
            g_z.row_mut(i).scaled_add(coef, &diff);
        }
    }
    (g_mu, g_z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub train: TrainConfig,
    /// Epochs between target-distribution refreshes.
    pub update_interval: usize,
    /// Keep the encoder fixed (default). Unfreezing is an ablation.
    pub freeze_encoder: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                learning_rate: 0.01,
                batch_size: 256,
                max_epochs: 50,
                ..TrainConfig::default()
            },
            update_interval: 1,
            freeze_encoder: true,
        }
    }
}

/// Optimizes the centroids on fixed latents. Each history entry is the
/// per-sample KL after that epoch, against the target in force during it.
pub fn cluster_train(
    head: ClusteringHead,
    latents: ArrayView2<f64>,
    cfg: &ClusterConfig,
) -> Result<(ClusteringHead, History)> {
    cfg.train.validate()?;
    if cfg.update_interval == 0 {
        return invalid("update interval must be >= 1");
    }
    if latents.ncols() != head.dim() {
        return Err(OdxuError::DimensionMismatch {
            expected: head.dim(),
            got: latents.ncols(),
        });
    }
    let n = latents.nrows();
    if n == 0 {
        return invalid("clustering needs latent rows");
    }
    let mut head = head;
    let mut rng = seeded(cfg.train.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..n).collect();
    let mut opt = OptState::new(cfg.train.optimizer, [head.centroids.shape().to_vec()]);
    let mut history = History::default();
    let mut p = target_dist(&soft_assign(&head, latents));

    for epoch in 0..cfg.train.max_epochs {
        if epoch > 0 && epoch % cfg.update_interval == 0 {
            p = target_dist(&soft_assign(&head, latents));
        }
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(cfg.train.batch_size).enumerate() {
            let zb = latents.select(Axis(0), chunk);
            let pb = p.select(Axis(0), chunk);
            let (g_mu, _) = kl_gradients(&head, zb.view(), &pb);
            if !g_mu.iter().all(|v| v.is_finite()) {
                return Err(OdxuError::NonFinite {
                    phase: "clustering",
                    epoch,
                    batch,
                });
            }
            opt.begin_step();
            opt.update(
                0,
                cfg.train.learning_rate,
                head.centroids.view_mut().into_dyn(),
                g_mu.view().into_dyn(),
            );
        }
        let loss = mean_kl(&head, latents, &p);
        if !loss.is_finite() {
            return Err(OdxuError::NonFinite {
                phase: "clustering",
                epoch,
                batch: 0,
            });
        }
        history.losses.push(loss);
        if let Some(stop) = &cfg.train.stop {
            if early_stop_check(&history.losses, stop, Phase::Cluster) {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((head, history))
}

/// Full phase II. With a frozen encoder (the default) latents are computed
/// once and only the centroids move; otherwise the KL gradient also flows
/// into the encoder.
pub fn dec_train(
    ae: Autoencoder,
    head: ClusteringHead,
    data: &Dataset,
    cfg: &ClusterConfig,
) -> Result<(Autoencoder, ClusteringHead, History)> {
    if cfg.freeze_encoder {
        let z = nn::encode(&ae, data);
        let (head, hist) = cluster_train(head, z.view(), cfg)?;
        return Ok((ae, head, hist));
    }
    cfg.train.validate()?;
    if data.is_empty() {
        return invalid("clustering needs data");
    }
    let x = data.feature_matrix();
    let mut ae = ae;
    let mut head = head;
    let mut rng = seeded(cfg.train.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut shapes = vec![head.centroids.shape().to_vec()];
    for l in ae.encoder.layers() {
        shapes.push(l.weights.shape().to_vec());
        shapes.push(l.bias.shape().to_vec());
    }
    let mut opt = OptState::new(cfg.train.optimizer, shapes);
    let mut history = History::default();
    let mut z = ae.encoder.forward(x.view());
    let mut p = target_dist(&soft_assign(&head, z.view()));

    for epoch in 0..cfg.train.max_epochs {
        if epoch > 0 && epoch % cfg.update_interval == 0 {
            p = target_dist(&soft_assign(&head, z.view()));
        }
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(cfg.train.batch_size).enumerate() {
            let xb = x.select(Axis(0), chunk);
            let trace = nn::forward_trace(&ae.encoder.layers, xb.view());
            let pb = p.select(Axis(0), chunk);
            let (g_mu, g_z) = kl_gradients(&head, trace.output.view(), &pb);
            if !g_mu.iter().chain(g_z.iter()).all(|v| v.is_finite()) {
                return Err(OdxuError::NonFinite {
                    phase: "clustering",
                    epoch,
                    batch,
                });
            }
            let (grads, _) = nn::backward(&ae.encoder.layers, &trace, g_z);
            let lr = cfg.train.learning_rate;
            opt.begin_step();
            opt.update(0, lr, head.centroids.view_mut().into_dyn(), g_mu.view().into_dyn());
            for (i, (layer, g)) in ae.encoder.layers.iter_mut().zip(&grads).enumerate() {
                opt.update(1 + 2 * i, lr, layer.weights.view_mut().into_dyn(), g.weights.view().into_dyn());
                opt.update(2 + 2 * i, lr, layer.bias.view_mut().into_dyn(), g.bias.view().into_dyn());
            }
        }
        z = ae.encoder.forward(x.view());
        history.losses.push(mean_kl(&head, z.view(), &p));
        if let Some(stop) = &cfg.train.stop {
            if early_stop_check(&history.losses, stop, Phase::Cluster) {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((ae, head, history))
}

/// Downstream features: the encoder latents. The head only shapes training.
pub fn latent_features(ae: &Autoencoder, _head: &ClusteringHead, records: &Dataset) -> Array2<f64> {
    nn::encode(ae, records)
}

pub fn hard_assign(q: &Array2<f64>) -> Vec<usize> {
    q.rows()
        .into_iter()
        .map(|r| crate::argmax(r.iter().copied()))
        .collect()
}

/// Fraction of samples whose cluster's majority label matches their own.
pub fn purity(assignments: &[usize], labels: &[usize]) -> f64 {
    use std::collections::BTreeMap;
    let mut table: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&a, &l) in assignments.iter().zip(labels) {
        *table.entry(a).or_default().entry(l).or_default() += 1;
    }
    let hits: usize = table.values().map(|m| m.values().max().copied().unwrap_or(0)).sum();
    hits as f64 / assignments.len().max(1) as f64
}
