use std::f64::consts::PI;

use num::complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stokeskit::formal::ConnectionSpec;
use stokeskit::geometry::StokesDiagram;
use stokeskit::integrator::{integrate_vec, reverse_path, PathPiece};
use stokeskit::laurent::LaurentPoly;
use stokeskit::linalg::{char_poly, identity, max_abs_diff, CMat};
use stokeskit::numstokes::{
    integrate, numeric_monodromy, stokes_matrices, stokes_matrices_with_diagnostics, IntegrationConfig,
    Realization,
};
use stokeskit::stokesdata::glue_monodromy;

fn system(rows: &[Vec<String>]) -> ConnectionSpec {
    ConnectionSpec::System(rows.iter().map(|r| r.iter().map(|t| LaurentPoly::parse(t).unwrap()).collect()).collect())
}

fn op(text: &str) -> ConnectionSpec {
    ConnectionSpec::operator(text).unwrap()
}

fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_entry_diff(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| max_entry(&(x - y))).fold(0.0, f64::max)
}

/// Diagonal part `phi_i' + lambda_i / x` with an O(1) holomorphic coupling,
/// so that the Stokes multipliers stay moderate.
pub fn random_coupled(rng: &mut ChaCha8Rng) -> ConnectionSpec {
    let r: i64 = rng.gen_range(1..=2);
    let c1: i64 = rng.gen_range(-2..=2);
    let c2 = c1 + if rng.gen_bool(0.5) { 1 } else { -1 };
    let lam = |rng: &mut ChaCha8Rng| rng.gen_range(-2..=2);
    let small = |rng: &mut ChaCha8Rng| {
        let k: i64 = rng.gen_range(1..=2);
        if rng.gen_bool(0.5) { k } else { -k }
    };
    let diag = |c: i64, l: i64| format!("{}*x^{}+{}/4*x^-1", -c * r, -r - 1, l);
    let rows = vec![
        vec![diag(c1, lam(rng)), format!("{}/2+{}/4*x", small(rng), small(rng))],
        vec![format!("{}/2+{}/4*x^2", small(rng), small(rng)), diag(c2, lam(rng))],
    ];
    system(&rows)
}

/// The monodromy oracle runs on a circle where the exponentials separate by
/// O(1); closer to 0 the transported frame is too ill-conditioned.
fn check_identity(c: &ConnectionSpec, dual: &ConnectionSpec, rho: f64) -> f64 {
    let cfg = IntegrationConfig::default();
    let s = stokes_matrices(c, &cfg).unwrap();
    let g = char_poly(&glue_monodromy(&s).unwrap());
    let fine = IntegrationConfig { rtol: 1e-12, ..cfg };
    let m = char_poly(&numeric_monodromy(dual, rho, 0.3, &fine).unwrap());
    max_abs_diff(&g, &m)
}

#[test]
fn decoupled_system_has_trivial_stokes_matrices() {
    let c = system(&[vec!["-x^-3".into(), "0".into()], vec!["0".into(), "0".into()]]);
    let s = stokes_matrices(&c, &IntegrationConfig::default()).unwrap();
    assert_eq!(s.matrices.len(), 4);
    for a in &s.matrices {
        assert!(max_entry(&(a - identity(2))) < 1e-8);
    }
}

#[test]
fn airy_type_matrices_are_unipotent() {
    let c = op("x^5*D^2-1");
    let cfg = IntegrationConfig::default();
    let (s, d) = stokes_matrices_with_diagnostics(&c, &cfg).unwrap();
    assert_eq!(s.matrices.len(), 3);
    assert!(d.max_off_shape < 1e3 * cfg.rtol);
    for a in &s.matrices {
        assert!((a[(0, 0)] - 1.0).norm() < 1e-8 && (a[(1, 1)] - 1.0).norm() < 1e-8);
        assert!(a[(0, 1)].norm() < 1e-12 || a[(1, 0)].norm() < 1e-12);
    }
}

/// The solutions recessive on the three overlap bisectors are linearly
/// dependent; the coefficients of that relation, found by direct integration,
/// have the modulus of the Stokes multipliers.
#[test]
fn airy_type_multiplier_matches_three_solution_relation() {
    let c = op("x^5*D^2-1");
    let cfg = IntegrationConfig::default();
    let (s, d) = stokes_matrices_with_diagnostics(&c, &cfg).unwrap();
    let multipliers: Vec<f64> = s.matrices.iter().map(|a| a[(0, 1)].norm().max(a[(1, 0)].norm())).collect();

    let real = Realization::new(&c, &cfg).unwrap();
    let diagram = StokesDiagram::new(&real.formal.factors()).unwrap();
    let common = diagram.mid(0).angle;
    let mut rec = Vec::new();
    for k in 0..3 {
        let theta = diagram.mid(k).angle;
        let seed = real.seed(d.rho_seed, theta, &cfg);
        let j = (0..2)
            .min_by(|&a, &b| {
                let ea = real.columns[a].re_phi(d.rho_seed, theta);
                let eb = real.columns[b].re_phi(d.rho_seed, theta);
                ea.partial_cmp(&eb).unwrap()
            })
            .unwrap();
        let path = [
            PathPiece::radial(theta, d.rho_seed, d.rho_match),
            PathPiece::Arc { rho: d.rho_match, from: theta, to: common },
        ];
        rec.push(integrate_vec(&|x| real.rhs.matrix(x), &path, &seed.column(j).into_owned(), &cfg.tolerance()).unwrap());
    }
    // r_2 = alpha r_0 + beta r_1
    let basis = CMat::from_columns(&[rec[0].clone(), rec[1].clone()]);
    let coef = basis.lu().solve(&rec[2]).unwrap();
    for z in coef.iter() {
        for m in &multipliers {
            assert!((z.norm() - m).abs() < 1e-6, "{} vs {}", z.norm(), m);
        }
    }
}

#[test]
fn single_factor_gives_formal_data_only() {
    let s = stokes_matrices(&op("x^3*D+1"), &IntegrationConfig::default()).unwrap();
    assert!(s.matrices.is_empty());
    assert_eq!(s.formal.items.len(), 1);
}

#[test]
fn monodromy_identity_named_cases() {
    let diag = system(&[vec!["-x^-3".into(), "0".into()], vec!["0".into(), "0".into()]]);
    assert!(check_identity(&diag, &diag.dual().unwrap(), 1.0) < 1e-6);
    let rank1 = op("x^3*D+1");
    assert!(check_identity(&rank1, &rank1, 0.5) < 1e-6);
    let airy = op("x^5*D^2-1");
    assert!(check_identity(&airy, &airy, 1.0) < 1e-6);
}

#[test]
fn monodromy_identity_random_coupled_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let c = random_coupled(&mut rng);
        let err = check_identity(&c, &c.dual().unwrap(), 1.0);
        assert!(err < 1e-6, "{c:?}: {err}");
    }
}

#[test]
fn raw_matrices_are_triangular() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = IntegrationConfig::default();
    let mut cases = vec![op("x^5*D^2-1")];
    cases.extend((0..4).map(|_| random_coupled(&mut rng)));
    for c in cases {
        let (_, d) = stokes_matrices_with_diagnostics(&c, &cfg).unwrap();
        assert!(d.max_off_shape < 1e3 * cfg.rtol, "{}", d.max_off_shape);
    }
}

#[test]
fn seeding_robustness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = IntegrationConfig::default();
    let mut cases = vec![op("x^5*D^2-1")];
    cases.extend((0..3).map(|_| random_coupled(&mut rng)));
    for c in cases {
        let (s, d) = stokes_matrices_with_diagnostics(&c, &cfg).unwrap();
        let half = IntegrationConfig { rho_seed: Some(d.rho_seed / 2.0), rho_match: Some(d.rho_match), ..cfg.clone() };
        let more = IntegrationConfig { n_asym: cfg.n_asym + 2, ..cfg.clone() };
        for other in [half, more] {
            let s2 = stokes_matrices(&c, &other).unwrap();
            assert!(max_entry_diff(&s.matrices, &s2.matrices) < 1e-6);
        }
    }
}

#[test]
fn exponential_transport() {
    let c = op("D-1");
    let path = [PathPiece::Segment { from: Complex64::new(1.0, 0.0), to: Complex64::new(2.0, 0.0) }];
    let y = integrate(&c, &path, &identity(1), &IntegrationConfig::default()).unwrap();
    assert!((y[(0, 0)] - std::f64::consts::E).norm() < 1e-9);
}

#[test]
fn euler_loop_eigenvalue() {
    let m = numeric_monodromy(&op("x*D-1/2"), 1.0, 0.0, &IntegrationConfig::default()).unwrap();
    assert!((m[(0, 0)] + 1.0).norm() < 1e-9);
}

#[test]
fn single_valued_solution_has_trivial_monodromy() {
    let m = numeric_monodromy(&op("x^3*D+1"), 0.7, 0.0, &IntegrationConfig::default()).unwrap();
    assert!((m[(0, 0)] - 1.0).norm() < 1e-8);
}

#[test]
fn reversed_path_inverts_transport() {
    let c = op("x^5*D^2-1");
    let path = vec![
        PathPiece::radial(0.4, 1.0, 1.6),
        PathPiece::Arc { rho: 1.6, from: 0.4, to: 2.9 },
        PathPiece::Segment { from: Complex64::from_polar(1.6, 2.9), to: Complex64::new(-0.4, 1.0) },
    ];
    let cfg = IntegrationConfig::default();
    let y = integrate(&c, &path, &identity(2), &cfg).unwrap();
    let back = integrate(&c, &reverse_path(&path), &y, &cfg).unwrap();
    assert!(max_entry(&(back - identity(2))) < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn monodromy_spectrum_is_homotopy_invariant(seed in 0u64..1000, rho in 0.7f64..1.5, theta in 0.0f64..(2.0 * PI)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_coupled(&mut rng);
        let cfg = IntegrationConfig::default();
        let a = char_poly(&numeric_monodromy(&c, 1.0, 0.0, &cfg).unwrap());
        let b = char_poly(&numeric_monodromy(&c, rho, theta, &cfg).unwrap());
        prop_assert!(max_abs_diff(&a, &b) < 1e-7);
    }
}
