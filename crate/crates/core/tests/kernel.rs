use drbfpu::domain::Point;
use drbfpu::kernel::{local_weights, unisolvency_check, LocalOperator, PhsKernel, PolyBasis};
use proptest::prelude::*;

fn plus_stencil(h: f64) -> Vec<Point> {
    vec![[0.0, 0.0, 0.0], [h, 0.0, 0.0], [-h, 0.0, 0.0], [0.0, h, 0.0], [0.0, -h, 0.0]]
}

#[test]
fn plus_stencil_is_not_unisolvent_for_quadratics() {
    // xy vanishes on all five points
    let pts = plus_stencil(0.1);
    assert!(!unisolvency_check(&pts, &PolyBasis::new(2, 2), &[0.0; 3], 0.1));
    assert!(unisolvency_check(&pts, &PolyBasis::new(1, 2), &[0.0; 3], 0.1));
}

#[test]
fn plus_stencil_laplacian_weights_with_cubic_kernel() {
    // Symmetry forces (a, a, a, a, -4a); the saddle rows then give a = 9 / (4√2 h²).
    let h = 0.05;
    let pts = plus_stencil(h);
    let kernel = PhsKernel::new(3, 2).unwrap();
    let w = local_weights(&pts, &[0.0; 3], h, &kernel, &PolyBasis::new(1, 2), &LocalOperator::Laplacian, &[0.0; 3])
        .unwrap();
    let a = 9.0 / (4.0 * 2f64.sqrt() * h * h);
    let expected = [-4.0 * a, a, a, a, a];
    for (x, y) in w.iter().zip(expected) {
        assert!((x - y).abs() <= 1e-8 * a, "{w:?}");
    }
}

#[test]
fn collinear_points_are_not_unisolvent_for_linears() {
    let pts = vec![[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [1.0, 1.0, 0.0]];
    assert!(!unisolvency_check(&pts, &PolyBasis::new(1, 2), &[0.5, 0.5, 0.0], 1.0));
}

fn cloud(dim: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 25..40).prop_map(move |mut v| {
        for p in &mut v {
            for c in p.iter_mut().skip(dim) {
                *c = 0.0;
            }
        }
        v
    })
}

fn separated(pts: &[Point], tol: f64) -> bool {
    pts.iter().enumerate().all(|(i, p)| pts[i + 1..].iter().all(|q| drbfpu::domain::dist(p, q) > tol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identity_at_trial_point_is_cardinal(pts in cloud(2), pick in 0usize..25) {
        prop_assume!(separated(&pts, 0.05));
        let kernel = PhsKernel::new(6, 2).unwrap();
        let basis = PolyBasis::new(3, 2);
        prop_assume!(unisolvency_check(&pts, &basis, &[0.0; 3], 1.0));
        let w = local_weights(&pts, &[0.0; 3], 1.0, &kernel, &basis, &LocalOperator::Identity, &pts[pick]).unwrap();
        for (j, v) in w.iter().enumerate() {
            let target = if j == pick { 1.0 } else { 0.0 };
            prop_assert!((v - target).abs() < 1e-8, "j={} w={}", j, v);
        }
    }

    #[test]
    fn laplacian_weights_follow_the_scaling_law(
        pts in cloud(2),
        level in 1i32..8,
        shift in prop::array::uniform2(-12i32..12),
        y in prop::array::uniform2(-0.5f64..0.5),
    ) {
        // dyadic scale, shift and coordinates keep the affine map exact in floating point
        let q = |v: f64| (v * 1048576.0).round() / 1048576.0;
        let pts: Vec<Point> = pts.iter().map(|p| [q(p[0]), q(p[1]), 0.0]).collect();
        prop_assume!(separated(&pts, 0.05));
        let kernel = PhsKernel::new(6, 2).unwrap();
        let basis = PolyBasis::new(3, 2);
        prop_assume!(unisolvency_check(&pts, &basis, &[0.0; 3], 1.0));
        let h = 2f64.powi(-level);
        let c = [0.0; 3];
        let c2 = [shift[0] as f64 / 4.0, shift[1] as f64 / 4.0, 0.0];
        let small: Vec<Point> = pts.iter().map(|p| [h * p[0] + c2[0], h * p[1] + c2[1], 0.0]).collect();
        let y1 = [q(y[0]), q(y[1]), 0.0];
        let y2 = [h * y1[0] + c2[0], h * y1[1] + c2[1], 0.0];
        let w1 = local_weights(&pts, &c, 1.0, &kernel, &basis, &LocalOperator::Laplacian, &y1).unwrap();
        let w2 = local_weights(&small, &c2, h, &kernel, &basis, &LocalOperator::Laplacian, &y2).unwrap();
        let scale = w1.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in w1.iter().zip(&w2) {
            prop_assert!((a - h * h * b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn weights_reproduce_polynomial_derivatives_3d(pts in cloud(3), y in prop::array::uniform3(-0.5f64..0.5)) {
        prop_assume!(separated(&pts, 0.1));
        let kernel = PhsKernel::new(5, 3).unwrap();
        let basis = PolyBasis::new(2, 3);
        prop_assume!(unisolvency_check(&pts, &basis, &[0.0; 3], 1.0));
        // p = 1 + x - 2yz + 3z^2 - xy
        let p = |x: &Point| 1.0 + x[0] - 2.0 * x[1] * x[2] + 3.0 * x[2] * x[2] - x[0] * x[1];
        let cases = [
            (LocalOperator::Laplacian, 6.0),
            (LocalOperator::gradient(0), 1.0 - y[1]),
            (LocalOperator::gradient(2), -2.0 * y[1] + 6.0 * y[2]),
            (LocalOperator::PartialDeriv([1, 1, 0]), -1.0),
            (LocalOperator::Identity, p(&y)),
        ];
        for (op, exact) in cases {
            let w = local_weights(&pts, &[0.0; 3], 1.0, &kernel, &basis, &op, &y).unwrap();
            let approx: f64 = w.iter().zip(&pts).map(|(w, x)| w * p(x)).sum();
            prop_assert!((approx - exact).abs() < 1e-8 * (1.0 + exact.abs()), "{:?}: {} vs {}", op, approx, exact);
        }
    }

    #[test]
    fn kernel_laplacian_matches_finite_differences(r in 0.2f64..2.0, k in 3u32..9, dim in 2usize..4) {
        let kernel = PhsKernel::new(k, dim).unwrap();
        let e = 1e-4;
        let f = |x: &Point| kernel.eval(drbfpu::domain::norm(x));
        let x = [r / 3f64.sqrt(), -r / 3f64.sqrt(), if dim == 3 { r / 3f64.sqrt() } else { 0.0 }];
        let r_actual = drbfpu::domain::norm(&x);
        let mut fd = 0.0;
        for i in 0..dim {
            let mut a = x;
            let mut b = x;
            a[i] += e;
            b[i] -= e;
            fd += (f(&a) - 2.0 * f(&x) + f(&b)) / (e * e);
        }
        let exact = kernel.laplacian(r_actual);
        prop_assert!((fd - exact).abs() < 1e-4 * (1.0 + exact.abs()));
        let op = kernel.op_eval(&LocalOperator::Laplacian, &x);
        prop_assert!((op - exact).abs() < 1e-12 * (1.0 + exact.abs()));
    }
}
