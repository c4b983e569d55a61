use std::f64::consts::PI;

use approx::assert_relative_eq;
use cspi::correction::{expand_model, CorrectionOptions};
use cspi::models::{self, CoherentPoint, HilbertConfig, ModelSpec};
use cspi::oracle;
use cspi::semiclassics::{assemble_kernel, det_ratio, Discretization, HessianBlocks};
use cspi::spectral::{self, delta_f_sum, matsubara_grid, unwrap_log};
use cspi::C64;
use proptest::prelude::*;

fn site_blocks(u: f64, mu: f64, dt: f64) -> HessianBlocks {
    let e = expand_model(&ModelSpec::site(u, mu), dt, &CorrectionOptions::default()).unwrap();
    e.modes[0].blocks.clone()
}

/// `2(1 - cos x)(1 - mu dt) / (beta omega)^2`, written out independently of the library.
fn site_ratio(mu: f64, omega: f64, beta: f64, dt: f64) -> f64 {
    2.0 * (1.0 - (omega * dt).cos()) * (1.0 - mu * dt) / (beta * omega).powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boson_overlap_is_hermitian_and_bounded(
        n1 in 0.0..4.0f64, p1 in -PI..PI, n2 in 0.0..4.0f64, p2 in -PI..PI,
    ) {
        let m = ModelSpec::site(1.0, 0.5);
        let h = HilbertConfig::for_occupation(4.0);
        let (a, b) = (CoherentPoint::boson(n1, p1), CoherentPoint::boson(n2, p2));
        let ab = models::overlap(&m, &a, &b, &h).unwrap();
        let ba = models::overlap(&m, &b, &a, &h).unwrap();
        prop_assert!((ab - ba.conj()).norm() < 1e-13);
        prop_assert!(ab.norm() <= 1.0 + 1e-13);
        // |<a|b>|^2 = exp(-|alpha - beta|^2) with alpha = sqrt(n) e^{i phi}
        let d = C64::from_polar(n1.sqrt(), p1) - C64::from_polar(n2.sqrt(), p2);
        prop_assert!((ab.norm_sqr() - (-d.norm_sqr()).exp()).abs() < 1e-12);
        prop_assert!((models::overlap(&m, &a, &a, &h).unwrap() - 1.0).norm() < 1e-13);
    }

    #[test]
    fn spin_overlap_matches_closed_form(
        two_s in 1usize..6, t1 in 0.0..PI, p1 in -PI..PI, t2 in 0.0..PI, p2 in -PI..PI,
    ) {
        let s = two_s as f64 / 2.0;
        let m = ModelSpec::spin(s);
        let h = HilbertConfig::default();
        let ab = models::overlap(&m, &CoherentPoint::spin(t1, p1), &CoherentPoint::spin(t2, p2), &h).unwrap();
        // |<n1|n2>| = ((1 + n1.n2)/2)^S
        let n = |t: f64, p: f64| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
        let (u, v) = (n(t1, p1), n(t2, p2));
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        prop_assert!((ab.norm() - ((1.0 + dot) / 2.0).powf(s)).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_phase_periodic(n in 0.1..3.0f64, p in -PI..PI, q in -PI..PI) {
        let m = ModelSpec::site(1.0, 0.5);
        let h = HilbertConfig::for_occupation(3.0);
        let a = CoherentPoint::boson(n, p);
        let b = CoherentPoint::boson(n, q);
        let c = CoherentPoint::boson(n, q + 2.0 * PI);
        let x = models::overlap(&m, &a, &b, &h).unwrap();
        let y = models::overlap(&m, &a, &c, &h).unwrap();
        prop_assert!((x - y).norm() < 1e-12);
    }

    #[test]
    fn constant_ratio_sum(c in 0.01..100.0f64, beta in 0.1..50.0f64, half in 0usize..200) {
        let d = Discretization::new(beta, 2 * half + 1).unwrap();
        let got = delta_f_sum(|_| C64::new(c, 0.0), &d).unwrap();
        let want = d.n_t() as f64 / (2.0 * beta) * c.ln();
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn sum_is_symmetric_under_reflection(a in 1.0..3.0f64, b in -0.9..0.9f64, half in 0usize..60) {
        let d = Discretization::new(3.0, 2 * half + 1).unwrap();
        let f = |w: f64| C64::new(a + b * (w * 0.1).tanh(), 0.0);
        let g = |w: f64| f(-w);
        let x = delta_f_sum(f, &d).unwrap();
        let y = delta_f_sum(g, &d).unwrap();
        prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        // against a plain ordered sum over the grid
        let plain: f64 = matsubara_grid(&d).iter().map(|&w| 0.5 * f(w).re.ln()).sum::<f64>() / 3.0;
        prop_assert!((x - plain).abs() <= 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn grid_is_sign_symmetric(beta in 0.1..100.0f64, half in 0usize..500) {
        let d = Discretization::new(beta, 2 * half + 1).unwrap();
        let g = matsubara_grid(&d);
        prop_assert_eq!(g.len(), d.n_t());
        prop_assert!(g.iter().zip(g.iter().rev()).all(|(a, b)| *a == -*b));
        prop_assert!(g.iter().all(|w| w.abs() < PI / d.dt()));
    }

    #[test]
    fn unwrapped_logs_exponentiate_back(
        amp in prop::collection::vec(0.1..10.0f64, 2..40), step in -2.5..2.5f64,
    ) {
        let vals: Vec<C64> = amp
            .iter()
            .enumerate()
            .map(|(j, &r)| C64::from_polar(r, step * j as f64))
            .collect();
        let u = unwrap_log(&vals, PI).unwrap();
        for (l, v) in u.logs.iter().zip(&vals) {
            prop_assert!((l.exp() - v).norm() <= 1e-12 * v.norm());
        }
        for w in u.logs.windows(2) {
            prop_assert!((w[1].im - w[0].im).abs() < PI);
        }
        prop_assert!((u.logs.last().unwrap().im - step * (vals.len() - 1) as f64).abs() < 1e-9);
    }

    #[test]
    fn spin_free_energy_closed_form(two_s in 1usize..9, beta in 0.05..40.0f64) {
        let s = two_s as f64 / 2.0;
        let r = oracle::exact_thermal(&ModelSpec::spin(s), beta, &HilbertConfig::default()).unwrap();
        let levels: Vec<f64> = (0..=two_s).map(|k| (k as f64 - s).powi(2)).collect();
        let e0 = levels.iter().copied().fold(f64::INFINITY, f64::min);
        let z: f64 = levels.iter().map(|e| (-beta * (e - e0)).exp()).sum();
        prop_assert!((r.f - (e0 - z.ln() / beta)).abs() < 1e-12 * r.f.abs().max(1.0));
    }

    #[test]
    fn site_entropy_and_monotone_occupation(mu in -1.0..4.0f64, beta in 0.1..30.0f64) {
        let h = HilbertConfig::new(30);
        let m = ModelSpec::site(1.0, mu);
        let r = oracle::exact_thermal(&m, beta, &h).unwrap();
        let entropy = beta * (r.observables["energy"] - r.f);
        prop_assert!(entropy >= -1e-10);
        let n0 = oracle::exact_occupation(&m, beta, &h).unwrap();
        let n1 = oracle::exact_occupation(&ModelSpec::site(1.0, mu + 0.05), beta, &h).unwrap();
        prop_assert!(n1 >= n0 - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn site_determinant_matches_closed_form(
        u in 0.5..2.0f64, mu_u in 0.2..3.0f64, dt in 0.005..0.1f64, x in 0.05..3.1f64, sign in prop::bool::ANY,
    ) {
        let mu = (mu_u * u).min(0.49 / dt);
        let beta = 101.0 * dt;
        let d = Discretization::new(beta, 101).unwrap();
        let b = site_blocks(u, mu, dt);
        let omega = if sign { x / dt } else { -x / dt };
        let got = det_ratio(&b, C64::new(omega, 0.0), &d);
        let want = site_ratio(mu, omega, beta, dt);
        prop_assert!(((got - want) / want).norm() <= 1e-8, "{} vs {}", got, want);
    }

    #[test]
    fn kernel_determinant_is_real_and_periodic(
        mu in 0.2..2.0f64, w in -40.0..40.0f64, two_s in 2usize..6,
    ) {
        let dt = 0.05;
        let opts = CorrectionOptions::default();
        for model in [ModelSpec::site(1.0, mu), ModelSpec::spin(two_s as f64 / 2.0)] {
            let b = expand_model(&model, dt, &opts).unwrap().modes[0].blocks.clone();
            let g = assemble_kernel(&b, C64::new(w, 0.0));
            let det = g.determinant();
            prop_assert!(det.im.abs() <= 1e-12 * det.norm().max(1.0), "{:?}", det);
            let shifted = assemble_kernel(&b, C64::new(w + 2.0 * PI / dt, 0.0));
            prop_assert!((g - shifted).camax() <= 1e-12);
        }
    }
}

#[test]
fn lattice_hamiltonian_is_hermitian() {
    let m = ModelSpec::lattice(1.0, 0.7, 0.1, 1, 3);
    let h = models::hamiltonian_matrix(&m, &HilbertConfig::new(3)).unwrap();
    assert_eq!(h.nrows(), 64);
    assert!((&h - h.adjoint()).camax() < 1e-14);
}

#[test]
fn hessian_truncation_is_second_order() {
    use cspi::numdiff::FdScheme;
    use cspi::semiclassics::{find_saddle, hessian_blocks};
    let m = ModelSpec::site(1.0, 0.7);
    let h = HilbertConfig::for_occupation(3.0);
    let saddle = find_saddle(&m, &h).unwrap();
    let reference = hessian_blocks(&m, &saddle, 0.05, &h, FdScheme::new(0.05, 3)).unwrap();
    let err = |step| {
        let b = hessian_blocks(&m, &saddle, 0.05, &h, FdScheme::new(step, 0)).unwrap();
        (&b.l2 - &reference.l2)
            .camax()
            .max((&b.l2d - &reference.l2d).camax())
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "observed order {order}: {e1:.3e} {e2:.3e}");
}

#[test]
fn sum_rule_exponential_matches_geometric_sum() {
    let d = Discretization::new(2.0, 21).unwrap();
    let dt = d.dt();
    let r =
        spectral::sum_rule_residual(|w| (C64::i() * w * dt).exp(), &d, &Default::default(), &[])
            .unwrap();
    // sum_n e^{2 pi i n / N_t} over a full period vanishes except at N_t = 1
    assert!(r.grid_sum.norm() < 1e-13);
    assert_relative_eq!(r.contour.re, 0.0, epsilon = 1e-6);
}
