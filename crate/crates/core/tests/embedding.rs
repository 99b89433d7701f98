use journey_core::embedding::{double_center, eigendecompose, mds};
use journey_core::DistanceMatrix;
use proptest::prelude::*;

fn planar(points: &[(f64, f64)]) -> DistanceMatrix {
    let n = points.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
            values[i * n + j] = (dx * dx + dy * dy).sqrt();
        }
    }
    DistanceMatrix::from_values((0..n).map(|i| i.to_string()).collect(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn planar_round_trip(pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..31)) {
        let m = planar(&pts);
        let n = m.len();
        let dce = double_center(&m);
        let scale = dce.frobenius().max(1.0);
        prop_assert!(dce.row_sums().iter().all(|s| s.abs() <= 1e-9 * scale));

        let eig = eigendecompose(&dce).unwrap();
        let rebuilt = eig.reconstruct();
        let worst = dce.values().iter().zip(&rebuilt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-8 * scale, "reconstruction error {worst}");
        for (idx, v) in eig.vectors.iter().enumerate() {
            let norm: f64 = v.iter().map(|x| x * x).sum();
            prop_assert!((norm - 1.0).abs() < 1e-9);
            for w in &eig.vectors[idx + 1..] {
                let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                prop_assert!(dot.abs() < 1e-9);
            }
        }

        let e = mds(&m).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((e.distance(i, j) - m.get(i, j)).abs() <= 1e-6, "pair {i},{j}");
            }
        }
        prop_assert!(e.lambda1 >= e.lambda2);
    }
}
