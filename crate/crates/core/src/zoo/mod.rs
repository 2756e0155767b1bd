//! Concrete models: reduced rank regression, a regular Gaussian location
//! model and a conjugate Bernoulli–Beta coin.

mod bernoulli;
mod gaussian;
mod reduced_rank;

pub use bernoulli::{
    count_ones, exact_bayes_training_loss_bernoulli, exact_functional_variance_bernoulli,
    exact_gibbs_training_loss_bernoulli, make_bernoulli_beta, tempered_beta_posterior, trigamma,
    BernoulliBetaConfig, BernoulliBetaModel,
};
pub use gaussian::{make_regular_gaussian, RegularGaussianConfig, RegularGaussianModel};
pub use reduced_rank::{make_reduced_rank, ReducedRankConfig, ReducedRankModel};

pub(crate) fn standard_normal(rng: &mut dyn rand::RngCore) -> f64 {
    rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_dataset, Model};

    /// Importance check `E_q[p(x|w)/q(x)] = 1` with `q` as proposal.
    fn normalization_ratio(model: &dyn Model, w: &[f64], n: usize) -> (f64, f64) {
        let data = sample_dataset(model, n, 99).unwrap();
        let r: Vec<f64> = data
            .iter()
            .map(|x| (-model.log_density_ratio(x, w).unwrap()).exp())
            .collect();
        let mean = r.iter().sum::<f64>() / n as f64;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, (var / n as f64).sqrt())
    }

    #[test]
    fn densities_integrate_to_one() {
        let g1 =
            make_regular_gaussian(RegularGaussianConfig::well_specified(1, 1.0, 1e-3)).unwrap();
        let g2 =
            make_regular_gaussian(RegularGaussianConfig::well_specified(2, 1.0, 1e-3)).unwrap();
        let coin = make_bernoulli_beta(BernoulliBetaConfig {
            p0: 0.4,
            a0: 2.0,
            b0: 3.0,
        })
        .unwrap();
        let cases: [(&dyn Model, Vec<f64>); 3] = [
            (&g1, vec![0.3]),
            (&g2, vec![0.2, -0.25]),
            (&coin, vec![0.55]),
        ];
        for (model, w) in cases {
            let (mean, se) = normalization_ratio(model, &w, 200_000);
            assert!(
                (mean - 1.0).abs() < 3.0 * se.max(1e-12),
                "{}: {mean} ± {se}",
                model.name()
            );
        }
    }
}
