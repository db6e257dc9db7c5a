//! Analytic derivatives of the composite channel w.r.t. `f_m` and `ψ`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use super::model::{CMatrix, ChannelSet};
use super::scenario::Scenario;
use crate::geometry::{euler_rotation, euler_rotation_partial, ArrayGeometry, EulerAxis};

const J: Complex64 = Complex64::new(0.0, 1.0);

fn scale(v: &Vector3<f64>, c: Complex64) -> [Complex64; 3] {
    [c * v[0], c * v[1], c * v[2]]
}

/// `∂[h_k]_m / ∂f_mᵀ` for every user, as complex `1 × 3` rows.
///
/// Only row `m` of `h_k` depends on `f_m`. The direct term and all `N`
/// reflected terms use the boundary-clipped `√G` derivative.
pub fn channel_derivative_boresight(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    channels: &ChannelSet,
    m: usize,
) -> Vec<[Complex64; 3]> {
    let f_m = channels.boresights[m];
    let kc = geom.wavenumber();
    let amp = scenario.direct_amplitude();
    let off = geom.bs_offsets[m];
    let n_count = channels.num_elements();
    let k_count = channels.num_users();

    let mut out = vec![[Complex64::new(0.0, 0.0); 3]; k_count];
    for (k, row) in out.iter_mut().enumerate() {
        for p in &scenario.users[k].direct {
            let ds = scenario.bs_pattern.sqrt_gain_derivative(-f_m.dot(&p.direction));
            if ds == 0.0 {
                continue;
            }
            let c = p.gain * Complex64::from_polar(amp * ds, -kc * p.direction.dot(&off));
            let t = scale(&(-p.direction), c);
            for i in 0..3 {
                row[i] += t[i];
            }
        }
    }

    // Reflected: Σ_n v_n [h_{R,k}]_n · base_{m,n} · d√G_BS · (−d̂_{n,m}).
    for n in 0..n_count {
        let idx = channels.link.index(m, n);
        let dir = &channels.link.direction[idx];
        let ds = scenario.bs_pattern.sqrt_gain_derivative(-f_m.dot(dir));
        if ds == 0.0 {
            continue;
        }
        let c = channels.link.base[idx] * channels.phases[n] * ds;
        let t = scale(&(-dir), c);
        for (k, row) in out.iter_mut().enumerate() {
            let r = channels.incident[(n, k)];
            if r == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..3 {
                row[i] += t[i] * r;
            }
        }
    }
    out
}

/// `∂h_k/∂ψ_i` for `i = α, β, φ`, each an `M × K` matrix.
pub fn channel_derivative_orientation(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    channels: &ChannelSet,
) -> [CMatrix; 3] {
    let psi = channels.orientation();
    let kc = geom.wavenumber();
    let lambda = geom.wavelength;
    let m_count = channels.num_antennas();
    let n_count = channels.num_elements();
    let k_count = channels.num_users();
    let r = euler_rotation(psi);
    let dr: [Matrix3<f64>; 3] = EulerAxis::ALL.map(|ax| euler_rotation_partial(psi, ax));
    let normal = channels.link.normal;
    let dnormal: [Vector3<f64>; 3] = dr.map(|d| d * geom.reference_normal);
    let rotated: Vec<Vector3<f64>> = geom.irs_reference_offsets.iter().map(|o| r * o).collect();
    let drotated: Vec<[Vector3<f64>; 3]> = geom
        .irs_reference_offsets
        .iter()
        .map(|o| [dr[0] * o, dr[1] * o, dr[2] * o])
        .collect();

    // ∂h_R/∂ψ_i (N × K).
    let mut d_incident = [
        CMatrix::zeros(n_count, k_count),
        CMatrix::zeros(n_count, k_count),
        CMatrix::zeros(n_count, k_count),
    ];
    for (k, user) in scenario.users.iter().enumerate() {
        for p in &user.reflected {
            let q = &p.direction;
            let (s, ds) = scenario.irs_pattern.sqrt_gain_with_derivative(-normal.dot(q));
            if s == 0.0 && ds == 0.0 {
                continue;
            }
            let dcos: [f64; 3] = std::array::from_fn(|i| -dnormal[i].dot(q));
            for n in 0..n_count {
                let a = p.gain * Complex64::from_polar(1.0, -kc * q.dot(&rotated[n]));
                for i in 0..3 {
                    let dphase = -kc * q.dot(&drotated[n][i]);
                    d_incident[i][(n, k)] += a * (ds * dcos[i] + J * (s * dphase));
                }
            }
        }
    }

    let mut out = [
        CMatrix::zeros(m_count, k_count),
        CMatrix::zeros(m_count, k_count),
        CMatrix::zeros(m_count, k_count),
    ];
    // H diag(v) ∂h_R.
    for i in 0..3 {
        let mut weighted = d_incident[i].clone();
        for mut col in weighted.column_iter_mut() {
            col.component_mul_assign(&channels.phases);
        }
        out[i] = &channels.irs_bs * weighted;
    }

    // (∂H/∂ψ_i) diag(v) h_R.
    let mut y = channels.incident.clone();
    for mut col in y.column_iter_mut() {
        col.component_mul_assign(&channels.phases);
    }
    for m in 0..m_count {
        let f_m = channels.boresights[m];
        for n in 0..n_count {
            let idx = channels.link.index(m, n);
            let d = channels.link.distance[idx];
            let dir = channels.link.direction[idx];
            let (sr, dsr) = scenario.irs_pattern.sqrt_gain_with_derivative(normal.dot(&dir));
            let (sb, dsb) = scenario.bs_pattern.sqrt_gain_with_derivative(-f_m.dot(&dir));
            if sr == 0.0 && sb == 0.0 {
                continue;
            }
            let e = Complex64::from_polar(lambda / (4.0 * std::f64::consts::PI * d), -kc * d);
            let radial = Complex64::new(-1.0 / d, -kc) * (sr * sb);
            for i in 0..3 {
                let drn = &drotated[n][i];
                let along = dir.dot(drn);
                let dd = -along;
                let ddir = -(drn - dir * along) / d;
                let dcos_r = dnormal[i].dot(&dir) + normal.dot(&ddir);
                let dcos_b = -f_m.dot(&ddir);
                let dh = e * (Complex64::new(dsr * dcos_r * sb + sr * dsb * dcos_b, 0.0) + radial * dd);
                if dh == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..k_count {
                    out[i][(m, k)] += dh * y[(n, k)];
                }
            }
        }
    }
    out
}

/// `∂d_{n,m}/∂ψ_i = −d̂_{n,m}ᵀ (∂R/∂ψ_i) r̄_n`.
pub fn pair_distance_partial(
    geom: &ArrayGeometry,
    psi: crate::geometry::EulerOrientation,
    m: usize,
    n: usize,
    axis: EulerAxis,
) -> f64 {
    let r_n = geom.irs_center + euler_rotation(psi) * geom.irs_reference_offsets[n];
    let dir = (geom.antenna_position(m) - r_n).normalize();
    -dir.dot(&(euler_rotation_partial(psi, axis) * geom.irs_reference_offsets[n]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::model::CVector;
    use crate::channel::scenario::sample_scenario;
    use crate::geometry::{boresight_vector, BoresightAngles, EulerOrientation};
    use crate::harness::config::{build_geometry, ScenarioConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (ScenarioConfig, ArrayGeometry, Scenario) {
        let mut cfg = ScenarioConfig::default();
        cfg.irs_side = 7;
        let geom = build_geometry(&cfg).unwrap();
        let sc = sample_scenario(&cfg, seed).unwrap();
        (cfg, geom, sc)
    }

    fn random_state(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (Vec<Vector3<f64>>, EulerOrientation, CVector) {
        let f = (0..m)
            .map(|_| {
                boresight_vector(BoresightAngles::new(
                    rng.random_range(0.05..0.9),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ))
            })
            .collect();
        let psi = EulerOrientation::new(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
        );
        let v = CVector::from_fn(n, |_, _| {
            Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        });
        (f, psi, v)
    }

    #[test]
    fn boresight_derivative_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        for seed in 0..10 {
            let (_, geom, sc) = setup(seed);
            let (f, psi, v) = random_state(&mut rng, 16, 49);
            let cs = ChannelSet::build(&sc, &geom, &f, psi, &v).unwrap();
            for m in [0, 7, 15] {
                let grad = channel_derivative_boresight(&sc, &geom, &cs, m);
                let h = 1e-6;
                for dir in 0..3 {
                    let mut fp = f.clone();
                    let mut fm = f.clone();
                    fp[m][dir] += h;
                    fm[m][dir] -= h;
                    let cp = ChannelSet::build(&sc, &geom, &fp, psi, &v).unwrap();
                    let cm = ChannelSet::build(&sc, &geom, &fm, psi, &v).unwrap();
                    for k in 0..sc.num_users() {
                        let fd = (cp.composite[(m, k)] - cm.composite[(m, k)]) / (2.0 * h);
                        let scale = grad[k].iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
                        assert!((fd - grad[k][dir]).norm() <= 1e-4 * scale, "m {m} dir {dir} k {k}");
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn boresight_derivative_direct_only() {
        let (_, geom, sc) = setup(3);
        let f = vec![Vector3::y(); 16];
        let v = CVector::from_element(49, Complex64::new(1.0, 0.0));
        let mut cs = ChannelSet::build(&sc, &geom, &f, EulerOrientation::reference(), &v).unwrap();
        cs.incident.fill(Complex64::new(0.0, 0.0));
        let grad = channel_derivative_boresight(&sc, &geom, &cs, 2);
        let kc = geom.wavenumber();
        for k in 0..sc.num_users() {
            let mut want = [Complex64::new(0.0, 0.0); 3];
            for p in &sc.users[k].direct {
                let c = -f[2].dot(&p.direction);
                let ds = if c > 1e-6 { 6.0 * 26f64.sqrt() * c.powi(5) } else { 0.0 };
                let ph = -kc * p.direction.dot(&geom.bs_offsets[2]);
                let coef = p.gain * sc.direct_amplitude() * ds * Complex64::new(ph.cos(), ph.sin());
                for i in 0..3 {
                    want[i] += coef * (-p.direction[i]);
                }
            }
            for i in 0..3 {
                assert!((grad[k][i] - want[i]).norm() <= 1e-12 * want[i].norm().max(1e-300));
            }
        }
    }

    #[test]
    fn boresight_derivative_zero_beyond_hemisphere() {
        let (_, geom, sc) = setup(3);
        // Boresight pointing toward −y: every arrival lies behind the element.
        let mut f = vec![Vector3::y(); 16];
        let v = CVector::from_element(49, Complex64::new(1.0, 0.0));
        let mut cs = ChannelSet::build(&sc, &geom, &f, EulerOrientation::reference(), &v).unwrap();
        f[4] = -Vector3::y();
        cs.set_boresight(&sc, &geom, 4, f[4]);
        let grad = channel_derivative_boresight(&sc, &geom, &cs, 4);
        let direct_behind = sc
            .users
            .iter()
            .all(|u| u.direct.iter().all(|p| -f[4].dot(&p.direction) <= 1e-6));
        let reflected_behind = cs.link.direction[cs.link.index(4, 0)..cs.link.index(5, 0)]
            .iter()
            .all(|d| -f[4].dot(d) <= 1e-6);
        assert!(direct_behind && reflected_behind);
        assert!(grad.iter().all(|r| r.iter().all(|x| x.norm() == 0.0)));
    }

    #[test]
    fn orientation_derivative_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..10 {
            let (_, geom, sc) = setup(seed + 100);
            let (f, psi, v) = random_state(&mut rng, 16, 49);
            if geom.visibility(psi) < 1e-6 {
                continue;
            }
            let cs = ChannelSet::build(&sc, &geom, &f, psi, &v).unwrap();
            let grad = channel_derivative_orientation(&sc, &geom, &cs);
            let h = 1e-6;
            for ax in EulerAxis::ALL {
                let mut p = psi.to_array();
                let mut q = psi.to_array();
                p[ax.index()] += h;
                q[ax.index()] -= h;
                let cp = ChannelSet::build(&sc, &geom, &f, EulerOrientation::from_array(p), &v).unwrap();
                let cm = ChannelSet::build(&sc, &geom, &f, EulerOrientation::from_array(q), &v).unwrap();
                let fd = (&cp.composite - &cm.composite) / Complex64::new(2.0 * h, 0.0);
                let an = &grad[ax.index()];
                let err = (&fd - an).norm();
                assert!(
                    err <= 1e-4 * an.norm().max(1e-300),
                    "seed {seed} axis {ax:?}: {err} vs {}",
                    an.norm()
                );
            }
        }
    }

    #[test]
    fn orientation_derivative_zero_without_incident() {
        let (_, geom, sc) = setup(5);
        let f = vec![Vector3::y(); 16];
        let v = CVector::from_element(49, Complex64::new(1.0, 0.0));
        let mut zeroed = sc.clone();
        for u in &mut zeroed.users {
            u.reflected.clear();
        }
        let cs = ChannelSet::build(&zeroed, &geom, &f, EulerOrientation::new(0.1, 0.1, 0.1), &v).unwrap();
        let grad = channel_derivative_orientation(&zeroed, &geom, &cs);
        assert!(grad.iter().all(|g| g.norm() == 0.0));
    }

    #[test]
    fn distance_partial_matches_fd() {
        let (_, geom, _) = setup(0);
        let psi = EulerOrientation::new(0.3, -0.2, 0.4);
        let h = 1e-6;
        for (m, n) in [(0, 0), (5, 17), (15, 48)] {
            for ax in EulerAxis::ALL {
                let dist = |p: EulerOrientation| {
                    let r_n = geom.irs_center + euler_rotation(p) * geom.irs_reference_offsets[n];
                    (geom.antenna_position(m) - r_n).norm()
                };
                let mut a = psi.to_array();
                let mut b = psi.to_array();
                a[ax.index()] += h;
                b[ax.index()] -= h;
                let fd = (dist(EulerOrientation::from_array(a)) - dist(EulerOrientation::from_array(b))) / (2.0 * h);
                let an = pair_distance_partial(&geom, psi, m, n, ax);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-6));
            }
        }
    }
}
