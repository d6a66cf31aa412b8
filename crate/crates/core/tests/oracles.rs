//! Published values and exact identities checked end to end.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use qwrg_core::analysis::jacobian::{exponents, jacobian_eigs, ScalingReport};
use qwrg_core::analysis::pole_model::PoleModel;
use qwrg_core::analysis::poles::{find_family_poles, fit_theta_scaling, PoleOptions};
use qwrg_core::analysis::series::{extract_series, x11_order_check, SeriesOptions};
use qwrg_core::network::build_dsg;
use qwrg_core::Family;

#[test]
fn walk_dimensions() {
    let dsg = ScalingReport::from_eigenvalues(&jacobian_eigs(Family::Dsg, None).unwrap()).unwrap();
    assert!((dsg.d_f - 1.5849625).abs() < 1e-6 && (dsg.d_w - 1.1609640).abs() < 1e-6);
    let mk3 = ScalingReport::from_eigenvalues(&jacobian_eigs(Family::Mk3, None).unwrap()).unwrap();
    assert!((mk3.d_f - 1.4036775).abs() < 1e-6 && (mk3.d_w - 1.0980793).abs() < 1e-6);
    let (df, dw) = exponents(2.0, 2.0, 2.0).unwrap();
    assert_eq!((df, dw), (1.0, 1.0));
}

#[test]
fn gasket_site_count() {
    for g in 1..=5 {
        assert_eq!(build_dsg(g).unwrap().num_sites, 3usize.pow(g));
    }
}

#[test]
fn line_smallest_pole_at_16_sites() {
    let set = find_family_poles(Family::Line, 4, Some(FRAC_PI_4), 4096, &PoleOptions::default()).unwrap();
    let w = set.smallest_angle().unwrap();
    assert!((w - SQRT_2 * PI / 16.0).abs() / w < 0.02, "{w}");
    // residue is exactly −e^{iω}/N, so its modulus is 1/N
    assert!((set.residues[0].norm() - 1.0 / 16.0).abs() < 1e-6);
}

#[test]
fn gasket_pole_angles_shrink_by_root_five() {
    let pts: Vec<(u32, f64)> = (3..=6)
        .map(|k| {
            let s = find_family_poles(Family::Dsg, k, None, 4096, &PoleOptions::default()).unwrap();
            (k, s.smallest_angle().unwrap())
        })
        .collect();
    let fit = fit_theta_scaling(&pts).unwrap();
    for r in fit.per_step_ratios {
        assert!((r / 5f64.sqrt() - 1.0).abs() < 0.1, "{r}");
    }
}

#[test]
fn gasket_second_order_ratio() {
    let fit = extract_series(Family::Dsg, 8, None, &SeriesOptions::default()).unwrap();
    assert!((fit.alpha2_ratio.re - 0.5).abs() < 0.025);
}

#[test]
fn gasket_zeta_one_growth() {
    let t = x11_order_check(Family::Dsg, &[3, 4, 5, 6, 7, 8], None, &SeriesOptions::default()).unwrap();
    assert_eq!(t.rates[2].matched, "lambda2");
    assert_eq!(t.rates[0].matched, "1/lambda1");
}

#[test]
fn line_pole_model_reproduces_leading_coefficient() {
    let k = 5;
    let n = 32.0;
    let set = find_family_poles(Family::Line, k, Some(FRAC_PI_4), 4096, &PoleOptions::default()).unwrap();
    let fit = extract_series(Family::Line, k, Some(FRAC_PI_4), &SeriesOptions::default()).unwrap();
    let model = PoleModel::from_pole_set(&set, fit.x11.get(-1)).unwrap();
    let lead = model.laurent(0)[0];
    assert!((lead + 1.0 / n).abs() < 1e-9);
    // S₀ grows like N, S₂ stays bounded
    assert!(model.s_m(0) > 0.2 * model.h as f64);
}
