//! Compact (μ/μ_w, λ) covariance-matrix-adaptation evolution strategy.
//!
//! Standard rank-one plus rank-μ update with cumulative step-size
//! adaptation. Latent dimensions here are small (one per active member
//! group), so the covariance is re-decomposed every generation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub(super) struct CmaEs {
    n: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c1: f64,
    c_mu: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scale: DVector<f64>,
    inv_sqrt: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: usize,
}

impl CmaEs {
    pub(super) fn new(mean: Vec<f64>, sigma: f64, lambda: usize, mu: usize) -> Self {
        let n = mean.len();
        let nf = n as f64;
        let mut weights: Vec<f64> = (0..mu)
            .map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * ((mu_eff - 1.0) / (nf + 1.0)).max(0.0).sqrt().max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c1 = 2.0 / ((nf + 1.3) * (nf + 1.3) + mu_eff);
        let c_mu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0) * (nf + 2.0) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        let _ = lambda;
        CmaEs {
            n,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c1,
            c_mu,
            chi_n,
            mean: DVector::from_vec(mean),
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scale: DVector::from_element(n, 1.0),
            inv_sqrt: DMatrix::identity(n, n),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            generation: 0,
        }
    }

    pub(super) fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let scaled = DVector::from_fn(self.n, |i, _| self.scale[i] * z[i]);
        let step = &self.basis * scaled;
        (0..self.n).map(|i| self.mean[i] + self.sigma * step[i]).collect()
    }

    /// Update from the μ selected parents, best first. Returns false when
    /// the distribution degenerated and the caller should restart.
    pub(super) fn update(&mut self, parents: &[&[f64]]) -> bool {
        let n = self.n;
        let nf = n as f64;
        let mu = self.mu.min(parents.len());
        if mu == 0 {
            return false;
        }

        // selected steps in sampling space, with injected outliers clipped
        let clip = 2.0 * nf.sqrt() + 2.0;
        let mut steps: Vec<DVector<f64>> = Vec::with_capacity(mu);
        for parent in parents.iter().take(mu) {
            let mut y = DVector::from_fn(n, |i, _| (parent[i] - self.mean[i]) / self.sigma);
            let mut whitened = self.inv_sqrt.clone() * &y;
            let norm = whitened.norm();
            if norm > clip {
                y *= clip / norm;
                whitened *= clip / norm;
            }
            steps.push(y);
            let _ = whitened;
        }

        let mut y_w = DVector::zeros(n);
        for (w, y) in self.weights.iter().zip(steps.iter()) {
            y_w += y * *w;
        }

        self.mean += &y_w * self.sigma;

        let csn = (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();
        self.path_sigma = &self.path_sigma * (1.0 - self.c_sigma) + self.inv_sqrt.clone() * &y_w * csn;
        let exponent = (self.c_sigma / self.d_sigma) * (self.path_sigma.norm() / self.chi_n - 1.0);
        self.sigma *= exponent.clamp(-1.0, 1.0).exp();
        if !self.sigma.is_finite() || self.sigma < 1e-12 || self.sigma > 1e8 {
            return false;
        }

        self.generation += 1;
        let decay = (1.0 - self.c_sigma).powi(2 * self.generation as i32);
        let h_sigma = self.path_sigma.norm() / (1.0 - decay).max(1e-12).sqrt()
            < (1.4 + 2.0 / (nf + 1.0)) * self.chi_n;
        let ccn = (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt();
        self.path_c = &self.path_c * (1.0 - self.c_c)
            + if h_sigma { &y_w * ccn } else { DVector::zeros(n) };

        let delta_h = if h_sigma {
            0.0
        } else {
            self.c_c * (2.0 - self.c_c)
        };
        let mut new_cov = &self.cov * (1.0 - self.c1 - self.c_mu + self.c1 * delta_h);
        new_cov += &self.path_c * self.path_c.transpose() * self.c1;
        for (w, y) in self.weights.iter().zip(steps.iter()) {
            new_cov += y * y.transpose() * (self.c_mu * *w);
        }
        // keep exactly symmetric against rounding drift
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (new_cov[(i, j)] + new_cov[(j, i)]);
                new_cov[(i, j)] = avg;
                new_cov[(j, i)] = avg;
            }
        }
        self.cov = new_cov;

        let eigen = self.cov.clone().symmetric_eigen();
        let mut max_ev = 0.0f64;
        let mut min_ev = f64::INFINITY;
        for &ev in eigen.eigenvalues.iter() {
            max_ev = max_ev.max(ev);
            min_ev = min_ev.min(ev);
        }
        if !(min_ev > 0.0) || !max_ev.is_finite() || max_ev / min_ev > 1e14 {
            return false;
        }
        self.scale = eigen.eigenvalues.map(|ev| ev.sqrt());
        self.basis = eigen.eigenvectors;
        let inv_scaled = DMatrix::from_fn(n, n, |i, j| self.basis[(i, j)] / self.scale[j]);
        self.inv_sqrt = &inv_scaled * self.basis.transpose();
        true
    }
}
