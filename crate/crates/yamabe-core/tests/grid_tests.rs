use approx::assert_relative_eq;
use proptest::prelude::*;
use yamabe_core::constants::Constants;
use yamabe_core::grid::{LaplaceOps, RadialGrid};

#[test]
fn geometric_grid_shape() {
    let g = RadialGrid::geometric(0.1, 1.01, 50.0).unwrap();
    assert!(g.len() >= 16);
    assert_eq!(*g.nodes().last().unwrap(), 50.0);
    assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    // first node sits at half the (rescaled) base spacing
    assert_relative_eq!(g.nodes()[0], g.h0() / 2.0, max_relative = 1e-12);
}

#[test]
fn rejects_bad_parameters() {
    assert!(RadialGrid::geometric(-0.1, 1.0, 10.0).is_err());
    assert!(RadialGrid::geometric(0.1, 0.9, 10.0).is_err());
    assert!(RadialGrid::geometric(0.1, 1.2, 10.0).is_err());
    assert!(RadialGrid::geometric(5.0, 1.0, 10.0).is_err()); // too few nodes
}

#[test]
fn truncate_keeps_prefix() {
    let g = RadialGrid::geometric(0.05, 1.005, 100.0).unwrap();
    let t = g.truncate(30.0).unwrap();
    assert!(t.len() < g.len());
    assert_eq!(t.nodes(), &g.nodes()[..t.len()]);
    assert!(t.r_max() <= 30.0 * (1.0 + 1e-12));
    assert!(g.truncate(0.1).is_err());
}

#[test]
fn nearest_node_lookup() {
    let g = RadialGrid::geometric(0.1, 1.0, 10.0).unwrap();
    for (i, &r) in g.nodes().iter().enumerate() {
        assert_eq!(g.nearest(r), i);
    }
    assert_eq!(g.nearest(0.0), 0);
    assert_eq!(g.nearest(1e9), g.len() - 1);
}

#[test]
fn trapezoid_exact_on_linear() {
    let g = RadialGrid::geometric(0.1, 1.003, 20.0).unwrap();
    let f: Vec<f64> = g.nodes().iter().map(|&r| 3.0 * r + 1.0).collect();
    let r0 = g.nodes()[0];
    let r1 = g.r_max();
    let exact = 1.5 * (r1 * r1 - r0 * r0) + (r1 - r0);
    assert_relative_eq!(g.trapezoid(&f), exact, max_relative = 1e-13);
}

#[test]
fn laplacian_exact_on_kernel_profiles() {
    for n in [3u32, 4, 5] {
        let c = Constants::new(n).unwrap();
        let g = RadialGrid::geometric(0.05, 1.005, 40.0).unwrap();
        let ops = LaplaceOps::new(&g, &c);

        // constants: zero to rounding
        let ones = vec![1.0; g.len()];
        let lap = ops.apply(&ones, 0.0);
        for v in &lap[..g.len() - 1] {
            assert!(v.abs() < 1e-12, "n={n}: constant not annihilated: {v:e}");
        }

        // harmonic tail r^{2-n} with its analytic origin flux (2-n)
        let nf = n as f64;
        let h: Vec<f64> = g.nodes().iter().map(|&r| r.powf(2.0 - nf)).collect();
        let lap = ops.apply(&h, 2.0 - nf);
        for (i, v) in lap[..g.len() - 1].iter().enumerate() {
            let scale = g.nodes()[i].powf(-nf);
            assert!(
                v.abs() < 1e-9 * scale.max(1.0),
                "n={n}: harmonic profile not annihilated at node {i}: {v:e}"
            );
        }

        // r^2 maps to 2n exactly by the volume construction
        let sq: Vec<f64> = g.nodes().iter().map(|&r| r * r).collect();
        let lap = ops.apply(&sq, 0.0);
        for v in &lap[..g.len() - 1] {
            assert_relative_eq!(*v, 2.0 * nf, max_relative = 1e-11);
        }
    }
}

#[test]
fn laplacian_second_order_on_gaussian() {
    // D0 e^{-r^2} = (4 r^2 - 2n) e^{-r^2}
    let c = Constants::new(3).unwrap();
    let mut errs = Vec::new();
    for h0 in [0.04, 0.02, 0.01] {
        let g = RadialGrid::geometric(h0, 1.0, 8.0).unwrap();
        let ops = LaplaceOps::new(&g, &c);
        let f: Vec<f64> = g.nodes().iter().map(|&r| (-r * r).exp()).collect();
        let lap = ops.apply(&f, 0.0);
        let mut e = 0.0f64;
        for (i, &r) in g.nodes().iter().enumerate().take(g.len() - 1) {
            let exact = (4.0 * r * r - 6.0) * (-r * r).exp();
            e = e.max((lap[i] - exact).abs());
        }
        errs.push(e);
    }
    let order = (errs[0] / errs[2]).ln() / 4f64.ln();
    assert!(order > 1.9, "measured order {order}, errors {errs:?}");
}

proptest! {
    #[test]
    fn grid_invariants(h0 in 0.01f64..0.2, s in 1.0f64..1.05, rm in 20.0f64..200.0) {
        let g = RadialGrid::geometric(h0, s, rm).unwrap();
        prop_assert!(g.len() >= 16);
        prop_assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(*g.nodes().last().unwrap(), rm);
        prop_assert!(g.nodes()[0] > 0.0);
        // spacing ratio never exceeds the stretch factor (plus rounding)
        let hs: Vec<f64> = g.nodes().windows(2).map(|w| w[1] - w[0]).collect();
        for w in hs.windows(2) {
            prop_assert!(w[1] / w[0] <= s * (1.0 + 1e-9));
        }
    }

    #[test]
    fn laplacian_annihilates_constants(h0 in 0.02f64..0.1, s in 1.0f64..1.02, n in 3u32..6) {
        let c = Constants::new(n).unwrap();
        let g = RadialGrid::geometric(h0, s, 30.0).unwrap();
        let ops = LaplaceOps::new(&g, &c);
        let f = vec![2.5; g.len()];
        let lap = ops.apply(&f, 0.0);
        for v in &lap[..g.len() - 1] {
            prop_assert!(v.abs() < 1e-11);
        }
    }
}
