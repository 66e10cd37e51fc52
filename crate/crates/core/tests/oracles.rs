//! Reduced-form values for the four presets, computed independently with
//! scipy (`0.5 * (Q + 2I - sqrtm(Q @ Q + 4Q))`, `Q = Σ_η Σ_ε⁻¹`) and frozen here.

use meta_smooth::linalg::{spectral_radius, Matrix};
use meta_smooth::meta::canonical_weights;
use meta_smooth::model::{params_to_autocov, structural_to_reduced};
use meta_smooth::simulate::preset;

const THETA: [&[f64]; 4] = [
    &[0.47136324728998835, 0.07147070028600916, 0.03275740429775421, 0.32246595502746933],
    &[0.8407257235148962, 0.03646596956422016, 0.0167135693836009, 0.7647549535894375],
    &[
        0.47924852830179776,
        0.07556102336247794,
        -0.06802809431889312,
        0.02526597353873029,
        0.31773054446505067,
        0.06974062816797272,
        -0.0491738620047137,
        0.05347953828868665,
        0.45515963549402527,
    ],
    &[
        0.8425302275751609,
        0.04115877530053021,
        -0.03282220110321802,
        0.01503632832688074,
        0.7588048146464355,
        0.03801189460065174,
        -0.02231064348594422,
        0.03052886756277343,
        0.8309339645885172,
    ],
];

const RADIUS: [f64; 4] = [0.4857053413036895, 0.8480433846221456, 0.5241048399288168, 0.863416750803466];

#[test]
fn preset_theta_matches_reference() {
    for (k, expected) in THETA.iter().enumerate() {
        let r = structural_to_reduced(&preset(k as u32 + 1).unwrap()).unwrap();
        let n = r.dim();
        let want = Matrix::from_row_slice(n, n, expected);
        let err = (&r.theta - &want).norm() / want.norm();
        assert!(err < 1e-12, "model {}: {err:e}", k + 1);
        assert!((spectral_radius(&r.theta).unwrap() - RADIUS[k]).abs() < 1e-12);
    }
}

#[test]
fn preset_sigma_u_is_theta_inverse_sigma_eps() {
    for k in 1..=4 {
        let p = preset(k).unwrap();
        let r = structural_to_reduced(&p).unwrap();
        let lhs = &r.theta * &r.sigma_u;
        assert!((&lhs - &p.sigma_eps).norm() / p.sigma_eps.norm() < 1e-12);
    }
}

#[test]
fn every_aggregate_of_a_preset_is_invertible() {
    for k in 1..=4 {
        let r = structural_to_reduced(&preset(k).unwrap()).unwrap();
        let g = params_to_autocov(&r).unwrap();
        let n = r.dim();
        for w in canonical_weights(n).weights() {
            let v = nalgebra::DVector::from_vec(w.to_vector(n));
            let g0 = v.dot(&(&g.gamma0 * &v));
            let g1 = v.dot(&(&g.gamma1 * &v));
            assert!(g1.abs() / g0 < 0.5, "model {k}, weight {w}: {}", g1.abs() / g0);
        }
    }
}
