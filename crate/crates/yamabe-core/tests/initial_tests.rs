use approx::assert_relative_eq;
use std::io::Write;
use yamabe_core::constants::Constants;
use yamabe_core::geometry::scalar_curvature;
use yamabe_core::grid::RadialGrid;
use yamabe_core::initial::*;

fn grid() -> RadialGrid {
    RadialGrid::geometric(0.01, 1.003, 50.0).unwrap()
}

#[test]
fn schwarzschild_profile_values() {
    let c = Constants::new(3).unwrap();
    let g = grid();
    let data = build_schwarzschild(&g, &c, 1.0).unwrap();
    for (i, &r) in g.nodes().iter().enumerate() {
        assert_relative_eq!(data.w0[i], 1.0 + 1.0 / (2.0 * r), max_relative = 1e-14);
        assert_eq!(data.u[i], 1.0);
        assert_relative_eq!(data.big_u[i], data.w0[i], max_relative = 1e-15);
    }
    assert_relative_eq!(data.w0_origin_flux, -0.5, max_relative = 1e-14);
    assert!(build_schwarzschild(&g, &c, -1.0).is_err());
}

#[test]
fn schwarzschild_zero_mass_is_flat() {
    let c = Constants::new(5).unwrap();
    let g = grid();
    let data = build_schwarzschild(&g, &c, 0.0).unwrap();
    assert!(data.w0.iter().all(|&v| v == 1.0));
    assert_eq!(data.w0_origin_flux, 0.0);
}

#[test]
fn set_u_refreshes_product() {
    let c = Constants::new(3).unwrap();
    let g = grid();
    let mut data = build_schwarzschild(&g, &c, 1.0).unwrap();
    let u: Vec<f64> = g.nodes().iter().map(|&r| 1.0 + 0.1 * (-r).exp()).collect();
    data.set_u(u.clone());
    for i in 0..g.len() {
        assert_relative_eq!(data.big_u[i], u[i] * data.w0[i], max_relative = 1e-15);
    }
    assert_relative_eq!(data.big_u_origin_flux(), u[0] * data.w0_origin_flux, max_relative = 1e-15);
}

#[test]
fn bump_matches_harmonic_tail_and_cap() {
    for n in [3u32, 4, 5] {
        let c = Constants::new(n).unwrap();
        let g = grid();
        let nf = n as f64;
        let (amp, rc, w) = (0.1, 2.0, 1.0);
        let data = build_bump(&g, &c, amp, rc, w, 0.0).unwrap();
        let (ra, rb) = (rc - w, rc + w);
        let c0 = rb.powf(2.0 - nf) * (1.0 + 0.6 * (nf - 2.0) * (rb - ra) / rb);
        for (i, &r) in g.nodes().iter().enumerate() {
            if r <= ra {
                assert_relative_eq!(data.w0[i], 1.0 + amp * c0, max_relative = 1e-14);
            } else if r >= rb {
                assert_relative_eq!(data.w0[i], 1.0 + amp * r.powf(2.0 - nf), max_relative = 1e-14);
            } else {
                // inside the blend the profile stays between the flat floor
                // and the cap value
                assert!(data.w0[i] > 1.0);
                assert!(data.w0[i] < 1.0 + amp * c0 + 1e-12);
            }
        }
    }
}

#[test]
fn bump_rejects_bad_parameters() {
    let c = Constants::new(3).unwrap();
    let g = grid();
    assert!(build_bump(&g, &c, -0.1, 2.0, 1.0, 0.0).is_err());
    assert!(build_bump(&g, &c, 0.1, 2.0, -1.0, 0.0).is_err());
    assert!(build_bump(&g, &c, 0.1, 2.0, 2.5, 0.0).is_err());
    assert!(build_bump(&g, &c, 0.1, 2.0, 1.0, -0.5).is_err());
}

#[test]
fn bump_scalar_curvature_nonnegative_and_compact() {
    for n in [3u32, 4, 5] {
        let c = Constants::new(n).unwrap();
        let g = grid();
        let data = build_bump(&g, &c, 0.1, 2.0, 1.0, 0.0).unwrap();
        let rep = verify_nonneg_scalar(&data, &g, &c).unwrap();
        assert!(rep.pass, "n={n}: {rep:?}");
        assert!(rep.max_abs_r > 0.0);
        // curvature is supported in the cap region: far field is harmonic
        let r_field = scalar_curvature(&g, &c, &data.w0, data.w0_origin_flux).unwrap();
        for (i, &r) in g.nodes().iter().enumerate().take(g.len() - 1) {
            if r > 5.0 {
                assert!(r_field[i].abs() < 1e-7, "n={n} r={r}: R = {:e}", r_field[i]);
            }
        }
    }
}

#[test]
fn tailed_bump_keeps_hypotheses() {
    let c = Constants::new(3).unwrap();
    let g = grid();
    let data = build_bump(&g, &c, 0.05, 2.0, 1.0, 0.05).unwrap();
    let rep = verify_nonneg_scalar(&data, &g, &c).unwrap();
    assert!(rep.pass, "{rep:?}");
    // the tail keeps curvature strictly positive in the far field
    let r_field = scalar_curvature(&g, &c, &data.w0, data.w0_origin_flux).unwrap();
    let i = g.nearest(20.0);
    assert!(r_field[i] > 0.0);
}

#[test]
fn sign_flipped_datum_fails_hypotheses() {
    let c = Constants::new(3).unwrap();
    let g = grid();
    let bump = build_bump(&g, &c, 0.1, 2.0, 1.0, 0.0).unwrap();
    // mirror the bump below 1: w0 = 2 - bump has D0 w0 >= 0, so R_{g0} <= 0
    let w0: Vec<f64> = bump.w0.iter().map(|&v| 2.0 - v).collect();
    let mut data = bump.clone();
    data.w0 = w0.clone();
    data.set_u(vec![1.0; g.len()]);
    let rep = verify_nonneg_scalar(&data, &g, &c).unwrap();
    assert!(!rep.pass);
    assert!(rep.min_r < 0.0);
}

fn write_profile(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn profile_ingestion_round_trip() {
    let c = Constants::new(3).unwrap();
    let g = grid();
    // smooth profile sampled densely; resampled values must track it
    let mut text = String::from("# synthetic profile\nr,w0\n");
    let mut r = 0.001;
    while r < 60.0 {
        text.push_str(&format!("{r},{}\n", 1.0 + 1.0 / (2.0 + r)));
        r += 0.002;
    }
    let f = write_profile(&text);
    let data = load_profile(f.path(), &g, &c).unwrap();
    for (i, &rr) in g.nodes().iter().enumerate() {
        assert_relative_eq!(data.w0[i], 1.0 + 1.0 / (2.0 + rr), max_relative = 1e-6);
    }
}

#[test]
fn profile_ingestion_rejections() {
    let c = Constants::new(3).unwrap();
    let g = grid();
    // missing header
    let f = write_profile("1.0,1.5\n2.0,1.4\n");
    assert!(load_profile(f.path(), &g, &c).is_err());
    // zero w0 entry
    let f = write_profile("r,w0\n1.0,1.5\n2.0,0.0\n3.0,1.2\n4.0,1.1\n30.0,1.0\n");
    assert!(load_profile(f.path(), &g, &c).is_err());
    // non-monotone radii
    let f = write_profile("r,w0\n1.0,1.5\n3.0,1.4\n2.0,1.3\n4.0,1.2\n30.0,1.1\n");
    assert!(load_profile(f.path(), &g, &c).is_err());
    // insufficient radial extent (grid reaches 50, profile stops at 10)
    let f = write_profile("r,w0\n1.0,1.5\n2.0,1.4\n3.0,1.3\n10.0,1.2\n");
    assert!(load_profile(f.path(), &g, &c).is_err());
    // malformed number
    let f = write_profile("r,w0\n1.0,1.5\n2.0,abc\n3.0,1.2\n30.0,1.1\n");
    assert!(load_profile(f.path(), &g, &c).is_err());
}
