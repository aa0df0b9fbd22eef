//! The simulation designs: declared jumps, sampling distribution moments,
//! and the curvature diagnostics built on them.

use rdgp::dgp::{
    generate_replication, second_derivative_profile, sliding_window_mle_ratio, Dgp, NOISE_SD,
};
use rdgp::model::Arm;

#[test]
fn the_jump_is_the_intercept_gap() {
    for d in Dgp::ALL {
        let s = d.spec();
        assert_eq!(d.true_tau(), s.treatment[0] - s.control[0]);
        // μ is evaluated at the boundary from the treatment side.
        let jump = d.mean(0.0) - s.control[0];
        assert!((jump - d.true_tau()).abs() < 1e-12, "{}", d.name());
    }
    assert_eq!(Dgp::Lee.true_tau(), 0.52 - 0.48);
    assert_eq!(Dgp::Quad.true_tau(), 0.0);
    assert_eq!(Dgp::Cubic.true_tau(), 0.0);
    assert!((Dgp::Cate1.true_tau() - 0.1).abs() < 1e-12);
    assert!((Dgp::Cate2.true_tau() - 0.1).abs() < 1e-12);
    assert!((Dgp::Ludwig.true_tau() - -3.35).abs() < 1e-12);
    assert!((Dgp::Curvature.true_tau() - 0.04).abs() < 1e-12);
}

#[test]
fn names_round_trip() {
    for d in Dgp::ALL {
        assert_eq!(Dgp::parse(d.name()).unwrap(), d);
        assert_eq!(Dgp::parse(&d.name().to_ascii_uppercase()).unwrap(), d);
    }
    assert!(Dgp::parse("nope").is_err());
}

#[test]
fn mean_evaluates_the_side_polynomials() {
    // Quad: 3x² left, 4x² right; Cubic: 3x³ left, 4x³ right.
    assert!((Dgp::Quad.mean(-0.5) - 0.75).abs() < 1e-15);
    assert!((Dgp::Quad.mean(0.5) - 1.0).abs() < 1e-15);
    assert!((Dgp::Cubic.mean(-0.5) - -0.375).abs() < 1e-15);
    assert!((Dgp::Cubic.mean(0.5) - 0.5).abs() < 1e-15);

    // Lee at x = 0.1, ascending powers.
    let want: f64 = [0.52, 0.84, -3.00, 7.99, -9.01, 3.56]
        .iter()
        .enumerate()
        .map(|(j, c)| c * 0.1f64.powi(j as i32))
        .sum();
    assert!((Dgp::Lee.mean(0.1) - want).abs() < 1e-14);
}

#[test]
fn opposite_curvature_designs_disagree_in_slope_not_sign_conventions() {
    // Quad's arms curve the same way with different magnitudes; Cubic's
    // arms have slopes of the same sign approaching the boundary from the
    // two sides (x² is even, x³ odd).
    let eps = 0.05;
    let quad_left = (Dgp::Quad.mean(-eps) - Dgp::Quad.mean(-2.0 * eps)) / eps;
    let quad_right = (Dgp::Quad.mean(2.0 * eps) - Dgp::Quad.mean(eps)) / eps;
    assert!(quad_left < 0.0 && quad_right > 0.0);

    let cubic_left = (Dgp::Cubic.mean(-eps) - Dgp::Cubic.mean(-2.0 * eps)) / eps;
    let cubic_right = (Dgp::Cubic.mean(2.0 * eps) - Dgp::Cubic.mean(eps)) / eps;
    assert!(cubic_left > 0.0 && cubic_right > 0.0);
}

#[test]
fn second_derivative_matches_finite_differences() {
    let h = 1e-5;
    for d in Dgp::ALL {
        for &x in &[-0.7, -0.3, -0.15, 0.15, 0.4, 0.8] {
            let fd = (d.mean(x + h) - 2.0 * d.mean(x) + d.mean(x - h)) / (h * h);
            let an = d.mean_second_derivative(x);
            assert!(
                (fd - an).abs() < 1e-4 * (1.0 + an.abs()),
                "{} at {x}: fd {fd} vs analytic {an}",
                d.name()
            );
        }
    }
}

#[test]
fn profile_is_the_pointwise_absolute_second_derivative() {
    let grid = [-0.8, -0.5, -0.2, 0.2, 0.5, 0.8];
    for d in [Dgp::Lee, Dgp::Ludwig, Dgp::Quad] {
        let prof = second_derivative_profile(d, &grid);
        assert_eq!(prof.len(), grid.len());
        for (&x, &p) in grid.iter().zip(&prof) {
            assert_eq!(p, d.mean_second_derivative(x).abs());
            assert!(p >= 0.0);
        }
    }
}

#[test]
fn replications_are_deterministic_and_well_shaped() {
    let a = generate_replication(Dgp::Lee, 300, 7).unwrap();
    let b = generate_replication(Dgp::Lee, 300, 7).unwrap();
    assert_eq!(a.x(), b.x());
    assert_eq!(a.y(), b.y());
    assert_eq!(a.n(), 300);
    assert_eq!(a.boundary(), 0.0);
    assert!(a.x().iter().all(|&x| (-1.0..1.0).contains(&x)));

    let c = generate_replication(Dgp::Lee, 300, 8).unwrap();
    assert_ne!(a.x(), c.x());

    // P(x ≥ 0) = P(Beta(2,4) ≥ ½) = 0.1875: about four-fifths control.
    let (xt, _) = a.arm_xy(Arm::Treatment);
    let (xc, _) = a.arm_xy(Arm::Control);
    assert!(xt.len() > 25 && xc.len() > 200, "{} / {}", xt.len(), xc.len());
}

#[test]
fn sampling_moments_match_the_design() {
    // E[x] = 2·(2/6) − 1 = −1/3, Var[x] = 4·Var(Beta(2,4)) = 4·8/252.
    let data = generate_replication(Dgp::Quad, 5000, 42).unwrap();
    let n = data.n() as f64;
    let mean_x = data.x().iter().sum::<f64>() / n;
    let var_x = 4.0 * (2.0 * 4.0) / (36.0 * 7.0);
    let se_mean = (var_x / n).sqrt();
    assert!(
        (mean_x - (-1.0 / 3.0)).abs() < 3.0 * se_mean,
        "mean {mean_x}, SE {se_mean}"
    );

    // Residual sd: subtract the known mean and check against NOISE_SD.
    let resid: Vec<f64> = data
        .x()
        .iter()
        .zip(data.y())
        .map(|(&x, &y)| y - Dgp::Quad.mean(x))
        .collect();
    let rm = resid.iter().sum::<f64>() / n;
    let rv = resid.iter().map(|r| (r - rm) * (r - rm)).sum::<f64>() / (n - 1.0);
    // SE of a sample sd ≈ sd/√(2(n−1)).
    let se_sd = NOISE_SD / (2.0 * (n - 1.0)).sqrt();
    assert!(
        (rv.sqrt() - NOISE_SD).abs() < 3.0 * se_sd,
        "residual sd {} vs {NOISE_SD}",
        rv.sqrt()
    );
}

#[test]
fn window_ratio_respects_the_valid_center_band() {
    let centers = [-1.0, -0.95, -0.5, -0.1, -0.05, 0.0, 0.05, 0.1, 0.5, 0.9, 0.95];
    let out = sliding_window_mle_ratio(Dgp::Lee, &centers);
    assert_eq!(out.len(), centers.len());
    for (&c, r) in centers.iter().zip(&out) {
        let valid = (-0.9..=-0.1).contains(&c) || (0.1..=0.9).contains(&c);
        if valid {
            let v = r.expect("in-band window should fit");
            assert!(v > 0.0 && v.is_finite(), "ratio at {c}: {v}");
        } else {
            assert!(r.is_none(), "center {c} outside the band");
        }
    }
}

#[test]
fn window_ratio_tracks_local_signal_scale() {
    // Lee's control arm explodes toward x = −1 (quintic with large
    // coefficients) and is nearly linear around −0.2; the ratio must
    // reflect that ordering.
    let out = sliding_window_mle_ratio(Dgp::Lee, &[-0.85, -0.2]);
    let steep = out[0].unwrap();
    let flat = out[1].unwrap();
    assert!(
        steep > flat,
        "steep window {steep} should exceed flat window {flat}"
    );
}
