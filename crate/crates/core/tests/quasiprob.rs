mod oracles;

use std::f64::consts::PI;

use ndarray::Array1;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcqd::linalg::DensityMatrix;
use tcqd::quasiprob::{p_heatmap, p_reconstruct, qd_direct_q, qd_normalization, qd_point, AngleTuple, QdKind};
use tcqd::{Execution, C64};

/// `sin(θ/2) e^{-iφ} |e⟩ + cos(θ/2) |g⟩`, excited level first.
fn spin_half_coherent(theta: f64, phi: f64) -> [C64; 2] {
    [
        C64::from_polar((theta / 2.0).sin(), -phi),
        C64::new((theta / 2.0).cos(), 0.0),
    ]
}

fn q_oracle(rho: &DensityMatrix, theta: &[f64], phi: &[f64]) -> f64 {
    let n = theta.len();
    let d = 1usize << n;
    let omega: Vec<C64> = (0..d)
        .map(|i| {
            (0..n)
                .map(|k| spin_half_coherent(theta[k], phi[k])[(i >> (n - 1 - k)) & 1])
                .product()
        })
        .collect();
    let m = rho.matrix();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += omega[i].conj() * m[[i, j]] * omega[j];
        }
    }
    acc.re * (2.0 / (4.0 * PI)).powi(n as i32)
}

fn random_angles<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    let theta = (0..n).map(|_| rng.gen_range(0.0..PI)).collect();
    let phi = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    (theta, phi)
}

#[test]
fn fifty_random_states_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..50 {
        let n = 1 + trial % 2;
        let rho = oracles::random_density(&mut rng, 1 << n);
        for kind in QdKind::ALL {
            let v = qd_normalization(&rho, kind, 8).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "trial {trial} {kind:?}: {v}");
        }
    }
}

#[test]
fn q_agrees_with_coherent_state_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for _ in 0..10 {
            let rho = oracles::random_density(&mut rng, 1 << n);
            let (theta, phi) = random_angles(&mut rng, n);
            let angles = AngleTuple::new(theta.clone(), phi.clone()).unwrap();
            let expansion = qd_point(&rho, &angles, QdKind::Q).unwrap();
            let direct = qd_direct_q(&rho, &angles).unwrap();
            let oracle = q_oracle(&rho, &theta, &phi);
            assert!((expansion - direct).abs() < 1e-9, "N={n}: {expansion} vs {direct}");
            assert!((expansion - oracle).abs() < 1e-9, "N={n}: {expansion} vs {oracle}");
        }
    }
}

#[test]
fn p_reconstructs_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in 1..=2 {
        for _ in 0..5 {
            let rho = oracles::random_density(&mut rng, 1 << n);
            let rec = p_reconstruct(&rho, 4).unwrap();
            let err = oracles::max_abs(&(rec.matrix() - rho.matrix()));
            assert!(err < 1e-8, "N={n}: {err}");
        }
    }
}

#[test]
fn excited_spin_has_negative_w_and_p_at_a_pole() {
    let rho = DensityMatrix::from_pure(&Array1::from(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]));
    let poles = [0.0, PI].map(|th| AngleTuple::new(vec![th], vec![0.0]).unwrap());
    for kind in [QdKind::W, QdKind::P] {
        let lowest = poles
            .iter()
            .map(|a| qd_point(&rho, a, kind).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(lowest < 0.0, "{kind:?}: {lowest}");
    }
    assert!(qd_point(&rho, &poles[0], QdKind::Q).unwrap().abs() < 1e-15);
}

#[test]
fn pure_spin_reaches_the_w_kernel_extremes() {
    let rho = DensityMatrix::from_pure(&Array1::from(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]));
    let w: Vec<f64> = [0.0, PI]
        .iter()
        .map(|th| qd_point(&rho, &AngleTuple::new(vec![*th], vec![0.0]).unwrap(), QdKind::W).unwrap())
        .collect();
    let (lo, hi) = (w[0].min(w[1]), w[0].max(w[1]));
    assert!((lo - (1.0 - 3f64.sqrt()) / (4.0 * PI)).abs() < 1e-14, "{lo}");
    assert!((hi - (1.0 + 3f64.sqrt()) / (4.0 * PI)).abs() < 1e-14, "{hi}");
}

#[test]
fn four_spin_product_state_factorizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let singles: Vec<DensityMatrix> = (0..4).map(|_| oracles::random_density(&mut rng, 2)).collect();
    let joint = singles.iter().skip(1).fold(singles[0].clone(), |acc, s| acc.kron(s));
    let (theta, phi) = random_angles(&mut rng, 4);
    for kind in QdKind::ALL {
        let whole = qd_point(&joint, &AngleTuple::new(theta.clone(), phi.clone()).unwrap(), kind).unwrap();
        let product: f64 = singles
            .iter()
            .enumerate()
            .map(|(k, s)| qd_point(s, &AngleTuple::new(vec![theta[k]], vec![phi[k]]).unwrap(), kind).unwrap())
            .product();
        assert!((whole - product).abs() < 1e-12 * product.abs().max(1.0), "{kind:?}");
    }
}

#[test]
fn heatmap_modes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let rho = oracles::random_density(&mut rng, 16);
    let ts = [0.25, 0.6, 2.0 / 3.0, 0.75];
    let ps = [0.75, 1.0 / 3.0, 0.25, 1.0 / 6.0];
    let seq = p_heatmap(&rho, &ts, &ps, (13, 20), Execution::Sequential).unwrap();
    let par = p_heatmap(&rho, &ts, &ps, (13, 20), Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let (i, k) = (5, 7);
    let theta: Vec<f64> = ts.iter().map(|s| s * seq.thetas[i]).collect();
    let phi: Vec<f64> = ps.iter().map(|s| s * seq.phis[k]).collect();
    let point = qd_point(&rho, &AngleTuple::new(theta, phi).unwrap(), QdKind::P).unwrap();
    assert!((seq.get(i, k) - point).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_is_non_negative(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = oracles::random_density(&mut rng, 1 << n);
        let (theta, phi) = random_angles(&mut rng, n);
        let q = qd_point(&rho, &AngleTuple::new(theta, phi).unwrap(), QdKind::Q).unwrap();
        prop_assert!(q >= -1e-14);
    }

    #[test]
    fn w_stays_inside_the_kernel_spectrum(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = oracles::random_density(&mut rng, 1 << n);
        let (theta, phi) = random_angles(&mut rng, n);
        let w = qd_point(&rho, &AngleTuple::new(theta, phi).unwrap(), QdKind::W).unwrap();
        let (lo, hi) = (1.0 - 3f64.sqrt(), 1.0 + 3f64.sqrt());
        let scale = (4.0 * PI).powi(n as i32);
        prop_assert!(w >= lo * hi.powi(n as i32 - 1) / scale - 1e-12);
        prop_assert!(w <= hi.powi(n as i32) / scale + 1e-12);
    }

    #[test]
    fn distributions_are_real_and_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = oracles::random_density(&mut rng, 4);
        let (theta, phi) = random_angles(&mut rng, 2);
        let angles = AngleTuple::new(theta, phi).unwrap();
        for kind in QdKind::ALL {
            let v = qd_point(&rho, &angles, kind).unwrap();
            prop_assert!(v.is_finite() && v.abs() < 1.0);
        }
    }
}
