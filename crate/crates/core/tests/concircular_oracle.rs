//! Concircular fields on the stereographic unit sphere, checked against the
//! height function `f = (1 − r²)/(1 + r²)`, which has `Hess f = −f g`.
//! Its gradient is `ζ = −x`, so `ψ = −f`, `α = 0` and `A = dψ = −df`.

use finsler_core::check::Tolerance;
use finsler_core::concircular::{fit_and_battery, fit_and_verify, CandidateField, FitVerdict, PSI_MIN};
use finsler_core::metric::MetricModel;

fn sphere(n: usize) -> MetricModel {
    let r2: Vec<String> = (1..=n).map(|i| format!("x{i}^2")).collect();
    let d = format!("4/(1 + {})^2", r2.join(" + "));
    let a: Vec<String> = (0..n * n)
        .map(|k| if k / n == k % n { d.clone() } else { "0".into() })
        .collect();
    let a: Vec<&str> = a.iter().map(String::as_str).collect();
    MetricModel::riemannian(n, &a).unwrap()
}

fn height(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 - r2) / (1.0 + r2)
}

fn dheight(x: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    x.iter().map(|v| -4.0 * v / (1.0 + r2).powi(2)).collect()
}

#[test]
fn gradient_of_height_matches_oracle() {
    let m = sphere(3);
    let corpus = m.sample_corpus(40, 3).unwrap();
    let zeta = CandidateField::new("grad f", 3, &["-x1", "-x2", "-x3"], true).unwrap();
    let (fit, bat) = fit_and_battery(&m, &zeta, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
    assert!(fit.concircular && !fit.concurrent, "{:?}", fit.verdict);
    assert!(fit.fit_h.residual < 1e-9);
    for s in &fit.samples {
        assert!((s.psi_hat + height(&s.at.x)).abs() < 1e-9);
        assert!(s.alpha_hat.iter().all(|a| a.abs() < 1e-9));
        let df = dheight(&s.at.x);
        for k in 0..3 {
            assert!((s.a_form[k] + df[k]).abs() < 1e-8);
        }
    }
    assert!(bat.pass, "{:#?}", bat.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    assert!(bat.residual("R(X,Y)zeta = A(Y)X - A(X)Y").unwrap() < 1e-8);
    assert!(fit.berwald.agrees && fit.berwald.max_fit_difference < 1e-9);
}

#[test]
fn rescaled_gradient_has_nonzero_alpha() {
    // ζ' = e^{x1} ζ: α = dx1, ψ = −f e^{x1}
    let m = sphere(3);
    let corpus = m.sample_corpus(25, 8).unwrap();
    let zeta = CandidateField::new(
        "rescaled",
        3,
        &["-x1*exp(x1)", "-x2*exp(x1)", "-x3*exp(x1)"],
        true,
    )
    .unwrap();
    let (fit, bat) = fit_and_battery(&m, &zeta, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
    assert!(fit.concircular);
    for s in &fit.samples {
        assert!((s.psi_hat + height(&s.at.x) * s.at.x[0].exp()).abs() < 1e-9);
        assert!((s.alpha_hat[0] - 1.0).abs() < 1e-9);
    }
    assert!(bat.pass, "{:#?}", bat.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    assert!(bat.max_residual() < 1e-6);
}

#[test]
fn perturbed_gradient_is_rejected() {
    let m = sphere(3);
    let corpus = m.sample_corpus(20, 9).unwrap();
    let zeta = CandidateField::new("bent", 3, &["-x1 + 1e-3*x2^2", "-x2", "-x3 + 1e-3*sin(3*x1)"], true).unwrap();
    let fit = fit_and_verify(&m, &zeta, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
    assert_eq!(fit.verdict, FitVerdict::NotConcircular);
    assert!(fit.fit_h.residual > 1e-4);
}

#[test]
fn forced_battery_on_randers_sees_torsion() {
    // −x is not concircular for this Randers metric; forcing the battery
    // shows the T(X, ζ) = 0 consequence failing by a wide margin.
    let m = MetricModel::randers(3, None, &["0.2 + 0.1*x1", "0.1*x2*x3", "-0.15"]).unwrap();
    let corpus = m.sample_corpus(15, 4).unwrap();
    let zeta = CandidateField::new("neg", 3, &["-x1", "-x2", "-x3"], true).unwrap();
    let (fit, bat) = fit_and_battery(&m, &zeta, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
    assert!(!fit.concircular && !bat.applicable && !bat.pass);
    assert!(bat.residual("T(X,zeta) = T(zeta,X) = 0").unwrap() > 1e-4);
}

#[test]
fn closed_form_constant_in_flat_and_round_cases() {
    // On the unit sphere R(X,Y)ζ = g(X,ζ)Y − g(Y,ζ)X, so A = −ω and
    // k₀ = −A(m)/g(m,ζ) = 1 wherever it is defined.
    let m = sphere(3);
    let corpus = m.sample_corpus(20, 12).unwrap();
    let zeta = CandidateField::new("grad f", 3, &["-x1", "-x2", "-x3"], true).unwrap();
    let fit = fit_and_verify(&m, &zeta, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
    for s in &fit.samples {
        let g = m.base_matrix(&s.at.x).unwrap().unwrap();
        let gmz: f64 = (0..3).map(|i| g[(i, i)] * s.m_field[i] * s.zeta[i]).sum();
        let am: f64 = (0..3).map(|i| s.a_form[i] * s.m_field[i]).sum();
        assert!((-am / gmz - 1.0).abs() < 1e-7);
        assert!((s.lambda.unwrap() + 1.0).abs() < 1e-8);
    }
}
