//! Quadratic-transform surrogate of the sum rate and the FP+RCG phase update.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{compose_unchecked, CMatrix, CVector, ChannelSet};
use crate::error::Result;
use crate::manifold::{rcg_maximize, QuadraticObjective, RcgControls};
use crate::mu_solver::combiner::sinr_and_sum_rate;

/// Auxiliary variables `μ_k` (SINR surrogate) and `ν_k` of the quadratic transform.
#[derive(Debug, Clone, PartialEq)]
pub struct FpAuxiliary {
    pub mu: Vec<f64>,
    pub nu: Vec<Complex64>,
}

/// Received amplitudes `u_{k,j} = √P_j w_kᴴh_j` and totals `ϱ_k = Σ_j |u_{k,j}|² + σ²‖w_k‖²`.
pub fn fp_terms(w: &CMatrix, h: &CMatrix, powers: &[f64], noise: f64) -> (DMatrix<Complex64>, Vec<f64>) {
    let mut u = w.adjoint() * h;
    for (j, mut col) in u.column_iter_mut().enumerate() {
        col *= Complex64::new(powers[j].sqrt(), 0.0);
    }
    let rho = (0..h.ncols())
        .map(|k| u.row(k).iter().map(|x| x.norm_sqr()).sum::<f64>() + noise * w.column(k).norm_squared())
        .collect();
    (u, rho)
}

/// `μ_k = γ_k`, `ν_k = √(1+μ_k) u_{k,k} / ϱ_k`.
pub fn fp_auxiliary_update(sinrs: &[f64], u: &DMatrix<Complex64>, rho: &[f64]) -> FpAuxiliary {
    let nu = (0..sinrs.len())
        .map(|k| u[(k, k)] * ((1.0 + sinrs[k]).sqrt() / rho[k]))
        .collect();
    FpAuxiliary { mu: sinrs.to_vec(), nu }
}

/// `g_{k,j} = conj(h_{R,j}) ⊙ (H_RBᴴ w_k)`, so that `w_kᴴ H_RB diag(v) h_{R,j} = g_{k,j}ᴴ v`.
fn cascade_vectors(channels: &ChannelSet, w: &CMatrix) -> Vec<Vec<CVector>> {
    let t = channels.irs_bs.adjoint() * w;
    (0..w.ncols())
        .map(|k| {
            (0..channels.num_users())
                .map(|j| {
                    channels
                        .incident
                        .column(j)
                        .map(|x| x.conj())
                        .component_mul(&t.column(k))
                })
                .collect()
        })
        .collect()
}

/// Quadratic `vᴴQv + 2Re{qᴴv}` equal to the surrogate up to a `v`-independent constant.
///
/// `Q` is stored as a weighted sum of negated rank-one terms.
pub fn fp_quadratic_build(
    aux: &FpAuxiliary,
    channels: &ChannelSet,
    w: &CMatrix,
    powers: &[f64],
) -> Result<QuadraticObjective> {
    let k_count = channels.num_users();
    let n = channels.num_elements();
    let g = cascade_vectors(channels, w);
    let b = w.adjoint() * &channels.direct;
    let mut vectors = Vec::with_capacity(k_count * k_count);
    let mut weights = Vec::with_capacity(k_count * k_count);
    let mut linear = CVector::zeros(n);
    for k in 0..k_count {
        let nu2 = aux.nu[k].norm_sqr();
        let lead = aux.nu[k] * (((1.0 + aux.mu[k]) * powers[k]).sqrt() / LN_2);
        linear.axpy(lead, &g[k][k], Complex64::new(1.0, 0.0));
        for j in 0..k_count {
            let weight = nu2 * powers[j] / LN_2;
            if weight == 0.0 {
                continue;
            }
            linear.axpy(-b[(k, j)] * weight, &g[k][j], Complex64::new(1.0, 0.0));
            vectors.push(g[k][j].clone());
            weights.push(weight);
        }
    }
    if vectors.is_empty() {
        vectors.push(CVector::zeros(n));
        weights.push(0.0);
    }
    QuadraticObjective::low_rank(vectors, weights, linear)
}

/// Full surrogate `Σ_k [ln(1+μ_k) − μ_k + 2√(1+μ_k)Re{ν_k* u_{k,k}} − |ν_k|²ϱ_k] / ln 2` at `v`.
pub fn fp_surrogate(
    aux: &FpAuxiliary,
    channels: &ChannelSet,
    w: &CMatrix,
    powers: &[f64],
    noise: f64,
    v: &CVector,
) -> f64 {
    let h = compose_unchecked(&channels.direct, &channels.irs_bs, v, &channels.incident);
    let (u, rho) = fp_terms(w, &h, powers, noise);
    (0..channels.num_users())
        .map(|k| {
            let mu = aux.mu[k];
            ((1.0 + mu).ln() - mu + 2.0 * (1.0 + mu).sqrt() * (aux.nu[k].conj() * u[(k, k)]).re
                - aux.nu[k].norm_sqr() * rho[k])
                / LN_2
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct FpOutcome {
    pub v: CVector,
    /// True sum rate after each accepted outer iteration, starting at `v0`.
    pub rates: Vec<f64>,
    pub rejected: usize,
}

/// Up to `iterations` rounds of {auxiliary update, quadratic build, RCG}.
///
/// A candidate is kept only if the true sum rate with `W` fixed does not decrease.
pub fn fp_rcg_phase_update(
    channels: &ChannelSet,
    w: &CMatrix,
    powers: &[f64],
    noise: f64,
    v0: &CVector,
    iterations: usize,
    rcg: &RcgControls,
) -> Result<FpOutcome> {
    let rate_of = |v: &CVector| {
        let h = compose_unchecked(&channels.direct, &channels.irs_bs, v, &channels.incident);
        (sinr_and_sum_rate(w, &h, powers, noise), h)
    };
    let mut v = v0.clone();
    let ((mut sinrs, mut rate), mut h) = rate_of(&v);
    let mut rates = vec![rate];
    let mut rejected = 0;
    for _ in 0..iterations {
        let (u, rho) = fp_terms(w, &h, powers, noise);
        let aux = fp_auxiliary_update(&sinrs, &u, &rho);
        let obj = fp_quadratic_build(&aux, channels, w, powers)?;
        let cand = rcg_maximize(&obj, &v, rcg).v;
        let ((s_new, r_new), h_new) = rate_of(&cand);
        if r_new.is_finite() && r_new >= rate {
            let gain = r_new - rate;
            v = cand;
            sinrs = s_new;
            rate = r_new;
            h = h_new;
            rates.push(rate);
            if gain <= 1e-12 * rate.abs() {
                break;
            }
        } else {
            rejected += 1;
            break;
        }
    }
    Ok(FpOutcome { v, rates, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Scenario;
    use crate::geometry::{ArrayGeometry, EulerOrientation, BORESIGHT_REF};
    use crate::harness::config::{build_geometry, ScenarioConfig};
    use crate::manifold::{hermitian_max_eigenvalue, random_phases};
    use crate::mu_solver::combiner::mmse_combiners;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, users: usize, side: usize) -> (ArrayGeometry, Scenario, ChannelSet, CMatrix) {
        let mut cfg = ScenarioConfig::default();
        cfg.irs_side = side;
        cfg.users = users;
        let geom = build_geometry(&cfg).unwrap();
        let sc = crate::testutil::irs_facing_users(&cfg, users, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_phases(side * side, &mut rng);
        let f = vec![BORESIGHT_REF; 16];
        let cs = ChannelSet::build(&sc, &geom, &f, EulerOrientation::reference(), &v).unwrap();
        let w = mmse_combiners(&cs.composite, &sc.powers, sc.noise);
        (geom, sc, cs, w)
    }

    #[test]
    fn auxiliary_substitution() {
        let u = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let aux = fp_auxiliary_update(&[1.0], &u, &[2.0]);
        assert_eq!(aux.mu, vec![1.0]);
        assert!((aux.nu[0] - Complex64::new(2f64.sqrt() / 2.0, 0.0)).norm() < 1e-15);
        let zero = DMatrix::from_element(1, 1, Complex64::new(0.0, 0.0));
        assert_eq!(
            fp_auxiliary_update(&[0.0], &zero, &[1.0]).nu[0],
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn surrogate_equals_rate_at_auxiliary_point() {
        let (_, sc, cs, w) = instance(3, 4, 7);
        let (sinrs, rate) = sinr_and_sum_rate(&w, &cs.composite, &sc.powers, sc.noise);
        let (u, rho) = fp_terms(&w, &cs.composite, &sc.powers, sc.noise);
        let aux = fp_auxiliary_update(&sinrs, &u, &rho);
        let s = fp_surrogate(&aux, &cs, &w, &sc.powers, sc.noise, &cs.phases);
        assert!((s - rate).abs() < 1e-9 * rate);
    }

    #[test]
    fn quadratic_matches_surrogate_up_to_constant() {
        for seed in 0..5 {
            let (_, sc, cs, w) = instance(seed, 4, 7);
            let (sinrs, _) = sinr_and_sum_rate(&w, &cs.composite, &sc.powers, sc.noise);
            let (u, rho) = fp_terms(&w, &cs.composite, &sc.powers, sc.noise);
            let aux = fp_auxiliary_update(&sinrs, &u, &rho);
            let obj = fp_quadratic_build(&aux, &cs, &w, &sc.powers).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
            let diffs: Vec<f64> = (0..10)
                .map(|_| {
                    let v = random_phases(49, &mut rng);
                    fp_surrogate(&aux, &cs, &w, &sc.powers, sc.noise, &v) - obj.value(&v)
                })
                .collect();
            for d in &diffs {
                assert!((d - diffs[0]).abs() < 1e-8, "{diffs:?}");
            }
        }
    }

    #[test]
    fn quadratic_is_negative_semidefinite() {
        for seed in 0..50 {
            let (_, sc, cs, w) = instance(seed, 3, 5);
            let (sinrs, _) = sinr_and_sum_rate(&w, &cs.composite, &sc.powers, sc.noise);
            let (u, rho) = fp_terms(&w, &cs.composite, &sc.powers, sc.noise);
            let aux = fp_auxiliary_update(&sinrs, &u, &rho);
            let obj = fp_quadratic_build(&aux, &cs, &w, &sc.powers).unwrap();
            assert!(hermitian_max_eigenvalue(&obj.form.to_dense(25)) <= 1e-9);
        }
    }

    #[test]
    fn zero_nu_leaves_signal_term_only() {
        let (_, sc, cs, w) = instance(1, 1, 5);
        let aux = FpAuxiliary {
            mu: vec![0.5],
            nu: vec![Complex64::new(0.0, 0.0)],
        };
        let obj = fp_quadratic_build(&aux, &cs, &w, &sc.powers).unwrap();
        assert_eq!(obj.form.to_dense(25), DMatrix::zeros(25, 25));
        assert_eq!(obj.linear, CVector::zeros(25));
    }

    #[test]
    fn phase_update_is_monotone_and_respects_budget() {
        let (_, sc, cs, w) = instance(8, 4, 7);
        let out0 = fp_rcg_phase_update(&cs, &w, &sc.powers, sc.noise, &cs.phases, 0, &RcgControls::default()).unwrap();
        assert_eq!(out0.v, cs.phases);
        let out = fp_rcg_phase_update(&cs, &w, &sc.powers, sc.noise, &cs.phases, 10, &RcgControls::default()).unwrap();
        assert!(out.rates.windows(2).all(|p| p[1] >= p[0]));
        assert!(out.rates.last().unwrap() > &out.rates[0]);
        assert!(out.v.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    }
}
