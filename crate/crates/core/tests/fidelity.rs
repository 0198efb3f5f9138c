//! Jet partials of `L²` against Richardson differences for each shipped family.

use finsler_core::metric::{derivative_fidelity, MetricModel};

fn families() -> Vec<(&'static str, MetricModel)> {
    let sphere = "4/(1 + x1^2 + x2^2 + x3^2)^2";
    vec![
        ("euclidean", MetricModel::euclidean(3).unwrap()),
        (
            "riemannian",
            MetricModel::riemannian(3, &[sphere, "0", "0", "0", sphere, "0", "0", "0", sphere]).unwrap(),
        ),
        (
            "randers",
            MetricModel::randers(3, None, &["0.2 + 0.1*x1", "0.1*x2*x3", "-0.15"]).unwrap(),
        ),
        (
            "expression",
            MetricModel::expression(
                3,
                "(1 + 0.1*x1^2)*((y1^2 + y2^2 + y3^2)^2 + 0.5*(y1^4 + y2^4 + y3^4))^(1/4)",
            )
            .unwrap(),
        ),
    ]
}

#[test]
fn every_family_agrees_with_finite_differences() {
    for (name, m) in families() {
        let corpus = m.sample_corpus(100, 7).unwrap();
        let r = derivative_fidelity(&m, &corpus, 4).unwrap();
        // orders 1 through 4 over six variables
        assert_eq!(r.partials, 209);
        assert!(r.max_rel_error < 1e-5, "{name}: {r:?}");
    }
}
