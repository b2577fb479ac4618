use htcp_core::classify::{
    check_det_condition, check_p_pair, check_p_pair_via_left_inverse, check_p_tensor, check_r0_pair, check_r_pair,
    check_strong_p_pair, det_certificate_from_p_witness, det_residual, left_inverse_order2, p_pair_residual,
    p_tensor_residual, p_witness_from_det_certificate, permutation_conjugate, r0_residual, strong_p_residual, Outcome,
    Verdict,
};
use htcp_core::generate::{dominant_tensor, random_tensor};
use htcp_core::newton::start_rng;
use htcp_core::spectra::{b_eigen, h_eigen, z_eigen};
use htcp_core::{Matrix, SolverConfig, Tensor, Vector};
use proptest::prelude::*;
use rand::Rng;

fn cfg() -> SolverConfig {
    SolverConfig { multistart_count: 32, ..Default::default() }
}

fn odd_example() -> (Tensor, Tensor) {
    let a = Tensor::zeros(3, 2)
        .and_then(|t| t.with_entry(&[0, 0, 0], 1.0))
        .and_then(|t| t.with_entry(&[0, 1, 1], 1.0))
        .unwrap();
    let b = a.scale(-1.0);
    (a, b)
}

/// Pair `k` of a mixed batch: odd `k` dominant (likely P), even `k` uniform.
fn even_pair(seed: u64, k: usize) -> (Tensor, Tensor) {
    let mut rng = start_rng(seed, k as u64);
    let (m, n) = (if k % 4 < 2 { 2 } else { 4 }, 1 + k % 2);
    if k % 2 == 1 {
        (dominant_tensor(&mut rng, m, n).unwrap(), dominant_tensor(&mut rng, m, n).unwrap())
    } else {
        (random_tensor(&mut rng, m, n).unwrap(), random_tensor(&mut rng, m, n).unwrap())
    }
}

fn stacked_norm(v: &Verdict, names: &[&str]) -> f64 {
    names.iter().map(|n| v.vector(n).unwrap().norm_squared()).sum::<f64>().sqrt()
}

/// Re-derives the residual of a refutation witness from scratch.
fn assert_sound(v: &Verdict, a: &Tensor, b: &Tensor, tol: f64) {
    use htcp_core::classify::Property::*;
    if !v.is_refuted() {
        return;
    }
    let get = |n: &str| v.vector(n).expect("witness vector");
    let (res, norm) = match v.property {
        R0Pair => (r0_residual(a, b, &get("x"), &get("y")).unwrap(), stacked_norm(v, &["x", "y"])),
        PPair => (p_pair_residual(a, b, &get("x"), &get("y")).unwrap(), stacked_norm(v, &["x", "y"])),
        PTensor => (p_tensor_residual(a, &get("x")).unwrap(), get("x").norm()),
        PDet => {
            let (d1, d2) = (get("d1"), get("d2"));
            assert!((&d1 + &d2).iter().all(|v| *v > 0.0) && d1.iter().chain(d2.iter()).all(|v| *v >= 0.0));
            (det_residual(a, b, &d1, &d2, &get("u")).unwrap(), get("u").norm())
        }
        StrongPPair => {
            let (x1, y1, x2, y2) = (get("x1"), get("y1"), get("x2"), get("y2"));
            let diff = ((&x1 - &x2).norm_squared() + (&y1 - &y2).norm_squared()).sqrt();
            (strong_p_residual(a, b, &x1, &y1, &x2, &y2).unwrap(), diff)
        }
        RPair | PLeftInverse => return,
    };
    assert!(res <= tol, "{:?} witness residual {res}", v.property);
    assert!(norm >= 0.5, "{:?} witness norm {norm}", v.property);
}

#[test]
fn odd_example_holds_as_p_pair_but_breaks_the_det_condition() {
    let (a, b) = odd_example();
    let v = check_p_pair(&a, &b, &SolverConfig::default()).unwrap();
    assert_eq!(v.outcome, Outcome::HoldsWithCertificate);
    let eye = Tensor::from_matrix(&Matrix::identity(2, 2)).unwrap();
    let c = a.shao_product(&eye).unwrap().add(&b.shao_product(&eye).unwrap()).unwrap();
    assert!(c.is_zero());
    assert!(check_det_condition(&a, &b, &SolverConfig::default()).is_err());
}

#[test]
fn permutation_conjugation_keeps_p_verdict() {
    let (a, b) = odd_example();
    let swap = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let (pa, pb) = (permutation_conjugate(&a, &swap).unwrap(), permutation_conjugate(&b, &swap).unwrap());
    assert_eq!(permutation_conjugate(&pa, &swap.transpose()).unwrap(), a);
    assert!(check_p_pair(&pa, &pb, &SolverConfig::default()).unwrap().holds());
    assert!(permutation_conjugate(&a, &Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).is_err());
}

#[test]
fn left_inverse_of_matrix_times_identity() {
    let n = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
    let a = Tensor::identity(4, 2).unwrap().left_mul_matrix(&n).unwrap();
    let m = left_inverse_order2(&a).unwrap();
    assert!((m - n.try_inverse().unwrap()).amax() <= 1e-9);
    assert!(left_inverse_order2(&odd_example().0).is_none());
}

#[test]
fn r_pair_clauses_on_identity_pair() {
    let i = Tensor::identity(4, 2).unwrap();
    let v = check_r_pair(&i, &i, &Vector::from_element(2, 1.0), &SolverConfig::default()).unwrap();
    assert!(v.holds(), "{v:?}");
    let v = check_r_pair(&i, &i, &Vector::zeros(2), &SolverConfig::default()).unwrap();
    assert!(!v.holds());
    assert!(v.failed_clause.is_some());
}

#[test]
fn refutations_are_sound_on_random_pairs() {
    let cfg = cfg();
    for k in 0..24 {
        let mut rng = start_rng(11, k);
        let m = 2 + k as usize % 3;
        let n = 1 + (k as usize / 3) % 3;
        let a = random_tensor(&mut rng, m, n).unwrap();
        let b = random_tensor(&mut rng, m, n).unwrap();
        let mut verdicts = vec![
            check_r0_pair(&a, &b, &cfg).unwrap(),
            check_p_pair(&a, &b, &cfg).unwrap(),
            check_p_tensor(&a, &cfg).unwrap(),
            check_strong_p_pair(&a, &b, &cfg).unwrap(),
        ];
        if m.is_multiple_of(2) {
            verdicts.push(check_det_condition(&a, &b, &cfg).unwrap());
        }
        for v in &verdicts {
            assert_sound(v, &a, &b, cfg.tol_residual);
        }
    }
}

#[test]
fn r0_refutation_implies_p_refutation() {
    let cfg = cfg();
    for k in 0..50 {
        let (a, b) = even_pair(21, k);
        if check_r0_pair(&a, &b, &cfg).unwrap().is_refuted() {
            assert!(check_p_pair(&a, &b, &cfg).unwrap().is_refuted(), "pair {k}");
        }
    }
}

#[test]
fn left_inverse_route_agrees_with_direct_p_check() {
    let cfg = cfg();
    let mut compared = 0;
    for k in 0..50u64 {
        let mut rng = start_rng(31, k);
        let (m, n) = (if k % 2 == 0 { 2 } else { 4 }, 1 + (k as usize / 2) % 2);
        let mut nm = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        nm += Matrix::identity(n, n) * 2.0 * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let a = Tensor::identity(m, n).unwrap().left_mul_matrix(&nm).unwrap();
        let b = if k % 3 == 0 { random_tensor(&mut rng, m, n) } else { dominant_tensor(&mut rng, m, n) }.unwrap();
        let direct = check_p_pair(&a, &b, &cfg).unwrap();
        let via = check_p_pair_via_left_inverse(&a, &b, &cfg).unwrap();
        if direct.is_conclusive() && via.is_conclusive() {
            compared += 1;
            assert_eq!(direct.is_refuted(), via.is_refuted(), "pair {k}");
        }
        assert!(!(direct.is_refuted() && via.holds()) && !(direct.holds() && via.is_refuted()), "pair {k}");
    }
    assert!(compared >= 20, "only {compared} conclusive comparisons");
}

#[test]
fn eigen_screens_never_contradict_p_verdicts() {
    let cfg = cfg();
    for k in 0..50 {
        let (a, b) = even_pair(41, k);
        if check_p_pair(&a, &b, &cfg).unwrap().is_refuted() {
            continue;
        }
        for t in [&a, &b] {
            let h = h_eigen(t, &cfg).unwrap();
            assert!(h.pairs.iter().all(|p| p.lambda.abs() > 1e-6), "pair {k}: H-eigenvalue 0");
            let z = z_eigen(t, &cfg).unwrap();
            assert!(z.pairs.iter().all(|p| p.lambda.abs() > 1e-6), "pair {k}: Z-eigenvalue 0");
        }
        let be = b_eigen(&a, &b, &cfg).unwrap();
        assert!(be.pairs.iter().all(|p| p.lambda > -1e-6), "pair {k}: negative B-eigenvalue");
    }
}

#[test]
fn det_and_p_witnesses_convert_both_ways() {
    let cfg = cfg();
    let mut p_refuted = 0;
    let mut det_refuted = 0;
    for k in 0..40 {
        let (a, b) = even_pair(51, 2 * k);
        let p = check_p_pair(&a, &b, &cfg).unwrap();
        if p.is_refuted() {
            p_refuted += 1;
            let (x, y) = (p.vector("x").unwrap(), p.vector("y").unwrap());
            let (d1, d2, u) = det_certificate_from_p_witness(&x, &y).unwrap();
            assert!((&d1 + &d2).iter().all(|v| *v > 0.0));
            assert!(det_residual(&a, &b, &d1, &d2, &u).unwrap() <= 1e-8, "pair {k}");
        }
        let d = check_det_condition(&a, &b, &cfg).unwrap();
        if d.is_refuted() {
            det_refuted += 1;
            let (d1, d2, u) = (d.vector("d1").unwrap(), d.vector("d2").unwrap(), d.vector("u").unwrap());
            let (x, y) = p_witness_from_det_certificate(&d1, &d2, &u).unwrap();
            assert!(p_pair_residual(&a, &b, &x, &y).unwrap() <= 1e-8, "pair {k}");
            assert!(x.norm() + y.norm() > 0.0);
        }
        assert!(!(p.is_refuted() && d.holds()) && !(p.holds() && d.is_refuted()), "pair {k}");
    }
    assert!(p_refuted > 0 && det_refuted > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_a_is_never_r0(m in 2usize..=4, n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = start_rng(seed, 0);
        let b = random_tensor(&mut rng, m, n).unwrap();
        let v = check_r0_pair(&Tensor::zeros(m, n).unwrap(), &b, &cfg()).unwrap();
        prop_assert!(v.is_refuted());
        assert_sound(&v, &Tensor::zeros(m, n).unwrap(), &b, 1e-9);
    }

    #[test]
    fn odd_order_fails_parity_gates(n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = start_rng(seed, 0);
        let a = random_tensor(&mut rng, 3, n).unwrap();
        let b = random_tensor(&mut rng, 3, n).unwrap();
        let c = cfg();
        let strong = check_strong_p_pair(&a, &b, &c).unwrap();
        prop_assert!(strong.is_refuted());
        assert_sound(&strong, &a, &b, c.tol_residual);
        let pt = check_p_tensor(&a, &c).unwrap();
        prop_assert!(pt.is_refuted());
        assert_sound(&pt, &a, &b, c.tol_residual);
    }
}
