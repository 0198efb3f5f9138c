//! Zeroth-layer tensors against brute-force finite differences and
//! eigen-decompositions.

use finsler_core::metric::{
    angular_metric, cartan_tensor, contracted_torsion, fundamental_tensor, JetPoint, MetricModel,
};
use nalgebra::DMatrix;

fn randers_lsq(y: &[f64]) -> f64 {
    let l = (y[0] * y[0] + y[1] * y[1]).sqrt() + 0.3 * y[0];
    l * l
}

/// Central-difference Hessian of `½L²` in `y`.
fn brute_g(y: &[f64], h: f64) -> [[f64; 2]; 2] {
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let f = |si: f64, sj: f64| {
                let mut v = y.to_vec();
                v[i] += si * h;
                v[j] += sj * h;
                randers_lsq(&v)
            };
            g[i][j] = 0.5 * (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    g
}

#[test]
fn randers_fundamental_tensor_matches_brute_force_hessian() {
    let m = MetricModel::randers(2, None, &["0.3", "0"]).unwrap();
    let p = JetPoint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
    let g = fundamental_tensor(&m, &p).unwrap();
    let oracle = brute_g(&p.y, 1e-4);
    for i in 0..2 {
        for j in 0..2 {
            assert!((g.get(&[i, j]) - oracle[i][j]).abs() < 1e-6, "{i}{j}");
        }
    }
    // closed form at this point: g = diag(1.3², 1.3)
    assert!((g.get(&[0, 0]) - 1.69).abs() < 1e-12);
    assert!((g.get(&[1, 1]) - 1.3).abs() < 1e-12);
}

#[test]
fn randers_cartan_tensor_matches_differenced_fundamental_tensor() {
    let m = MetricModel::randers(2, None, &["0.3", "0"]).unwrap();
    let y = [0.6, -0.8];
    let p = JetPoint::new(vec![0.0, 0.0], y.to_vec());
    let t = cartan_tensor(&m, &p).unwrap();
    assert!(t.max_abs() > 1e-3);
    let h = 1e-4;
    for k in 0..2 {
        let mut yp = y;
        let mut ym = y;
        yp[k] += h;
        ym[k] -= h;
        let (gp, gm) = (brute_g(&yp, 1e-4), brute_g(&ym, 1e-4));
        for i in 0..2 {
            for j in 0..2 {
                let oracle = 0.5 * (gp[i][j] - gm[i][j]) / (2.0 * h);
                assert!((t.get(&[i, j, k]) - oracle).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn angular_metric_on_euclidean_plane() {
    let m = MetricModel::euclidean(2).unwrap();
    let h = angular_metric(&m, &JetPoint::new(vec![0.2, 0.1], vec![1.0, 0.0])).unwrap();
    assert_eq!(h.components(), &[0.0, 0.0, 0.0, 1.0]);
}

#[test]
fn angular_metric_is_degenerate_exactly_along_y() {
    let d = "4/(1 + x1^2 + x2^2 + x3^2)^2";
    let m = MetricModel::riemannian(3, &[d, "0", "0", "0", d, "0", "0", "0", d]).unwrap();
    for p in m.sample_corpus(20, 5).unwrap() {
        let h = angular_metric(&m, &p).unwrap();
        let mat = DMatrix::from_row_slice(3, 3, h.components());
        let eig = mat.clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        assert!(vals[0].abs() < 1e-12);
        assert!(vals[1] > 1e-3);
        let hy = &mat * nalgebra::DVector::from_column_slice(&p.y);
        assert!(hy.amax() < 1e-9 * mat.amax());
    }
}

#[test]
fn layer_consistency_on_randers() {
    let m = MetricModel::randers(3, None, &["0.2 + 0.1*x1", "0.1*x2*x3", "-0.15"]).unwrap();
    for p in m.sample_corpus(50, 17).unwrap() {
        let g = fundamental_tensor(&m, &p).unwrap();
        let t = cartan_tensor(&m, &p).unwrap();
        let l = m.l(&p.x, &p.y).unwrap();
        let mut gyy = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                gyy += g.get(&[i, j]) * p.y[i] * p.y[j];
                let ty: f64 = (0..3).map(|k| t.get(&[i, j, k]) * p.y[k]).sum();
                assert!(ty.abs() < 1e-9);
            }
        }
        assert!((gyy - l * l).abs() < 1e-9 * l * l);
        let (c, _, c2) = contracted_torsion(&m, &p).unwrap();
        assert!(c2 > 0.0);
        let cy: f64 = (0..3).map(|i| c.get(&[i]) * p.y[i]).sum();
        assert!(cy.abs() < 1e-9);
    }
}

#[test]
fn riemannian_has_no_torsion_trace() {
    let m = MetricModel::riemannian(2, &["1 + x1^2", "0.1*x2", "0.1*x2", "2"]).unwrap();
    let p = m.sample_corpus(1, 1).unwrap().remove(0);
    let (c, cbar, c2) = contracted_torsion(&m, &p).unwrap();
    assert!(c.max_abs() < 1e-12 && cbar.max_abs() < 1e-12 && c2.abs() < 1e-20);
}
