mod common;

use std::f64::consts::PI;

use num::complex::Complex64;
use num::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stokeskit::factors::{ExponentialFactor, Polar};
use stokeskit::formal::{formal_type, newton_polygon, ConnectionSpec, FormalItem, FormalType};
use stokeskit::geometry::{dominance, sector_cover, stokes_directions, Direction, EpsPolicy, Sector, StokesDiagram};
use stokeskit::laurent::{DifferentialOperator, LaurentPoly};
use stokeskit::linalg::{char_poly, CMat};
use stokeskit::rational::{rat, CRat};
use stokeskit::sheafmodel::{
    hom_exists, hom_exists_bruteforce, hom_shape, sublevel_contains, BruteGrid, Point, ShapeTag,
};
use stokeskit::stokesdata::{
    extract_from_cover, formal_monodromy, glue_monodromy, validate, StokesStructure, StokesStructureJson,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coeff(rng: &mut ChaCha8Rng) -> CRat {
    CRat::new(rat(rng.gen_range(-6..=6), rng.gen_range(1..=4)), rat(rng.gen_range(-6..=6), rng.gen_range(1..=4)))
}

fn ramified_factor(rng: &mut ChaCha8Rng) -> ExponentialFactor {
    let m = rng.gen_range(1..=3u32);
    let terms: Vec<(i64, CRat)> = (0..rng.gen_range(0..=4)).map(|_| (rng.gen_range(-7..=2), coeff(rng))).collect();
    ExponentialFactor::new(m, terms)
}

fn random_poly(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> LaurentPoly {
    loop {
        let mut terms = Vec::new();
        for k in lo..=hi {
            if rng.gen_bool(0.5) {
                terms.push((k, coeff(rng)));
            }
        }
        let p = LaurentPoly::new(terms);
        if !p.is_zero() {
            return p;
        }
    }
}

fn random_operator(rng: &mut ChaCha8Rng) -> DifferentialOperator {
    let order = rng.gen_range(1..=3usize);
    DifferentialOperator::new((0..=order).map(|i| (i, random_poly(rng, -3, 3))))
}

fn slopes(op: &DifferentialOperator) -> Vec<BigRational> {
    newton_polygon(op).unwrap().slopes.into_iter().map(|s| s.slope).collect()
}

fn unramified_formal(rng: &mut ChaCha8Rng) -> FormalType {
    // systems are decomposed automatically up to rank 2
    let count = rng.gen_range(1..=2);
    let fs = common::random_family(rng, count, 3);
    let mut budget = 2;
    let mut items = Vec::new();
    for (k, f) in fs.into_iter().enumerate() {
        let left = count - k - 1;
        let rank = rng.gen_range(1..=(budget - left).min(2));
        budget -= rank;
        let exponents = (0..rank).map(|_| Complex64::new(rng.gen_range(-3..4) as f64 / 4.0, 0.0)).collect();
        items.push(FormalItem { factor: f, rank, exponents });
    }
    FormalType { items, ramification: 1 }
}

fn random_lines(rng: &mut ChaCha8Rng) -> Vec<Direction> {
    let n = rng.gen_range(1..=8);
    loop {
        let mut v: Vec<Direction> = if rng.gen_bool(0.5) {
            let den = rng.gen_range(1..=12);
            (0..n).map(|_| Direction::from_pi_multiple(rat(rng.gen_range(0..2 * den), den))).collect()
        } else {
            (0..n).map(|_| Direction::approx(rng.gen_range(0.0..2.0 * PI))).collect()
        };
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        if !v.is_empty() {
            return v;
        }
    }
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = a.iter().chain(b).map(|z| z.norm()).fold(1.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ---- factors ----

    #[test]
    fn render_then_parse_is_identity(seed in any::<u64>()) {
        let f = ramified_factor(&mut rng(seed));
        let back = ExponentialFactor::parse(&f.to_string()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn parse_then_render_normalizes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let text: Vec<String> = (0..r.gen_range(1..=5))
            .map(|_| format!("{}*x^({}/{})", coeff(&mut r), r.gen_range(-6..=2), [1, 2][r.gen_range(0..2)]))
            .collect();
        let f = ExponentialFactor::parse(&text.join(" + ")).unwrap();
        let g = ExponentialFactor::parse(&f.to_string()).unwrap();
        prop_assert_eq!(g.to_string(), f.to_string());
    }

    #[test]
    fn combination_laws(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (ramified_factor(&mut r), ramified_factor(&mut r), ramified_factor(&mut r));
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.add(&ExponentialFactor::zero()), a.clone());
        prop_assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn pullback_multiplies_order(seed in any::<u64>(), m in 1u32..=6) {
        let f = ramified_factor(&mut rng(seed));
        prop_assert_eq!(f.ramify_pullback(m).order(), f.order() * rat(m as i64, 1));
    }

    #[test]
    fn evaluation_is_additive(seed in any::<u64>(), lr in -3.0f64..0.0, theta in -10.0f64..10.0) {
        let mut r = rng(seed);
        let (a, b) = (ramified_factor(&mut r), ramified_factor(&mut r));
        let x = Polar::new(10f64.powf(lr), theta);
        let (va, vb) = (a.evaluate_polar(x).unwrap(), b.evaluate_polar(x).unwrap());
        let vs = a.add(&b).evaluate_polar(x).unwrap();
        prop_assert!((vs - va - vb).norm() <= 1e-12 * (va.norm() + vb.norm()).max(1e-300));
    }

    // ---- formal ----

    #[test]
    fn slopes_survive_rescaling(seed in any::<u64>()) {
        let op = random_operator(&mut rng(seed));
        let s = slopes(&op);
        prop_assert_eq!(slopes(&op.rescale(&CRat::from_int(2))), s.clone());
        prop_assert_eq!(slopes(&op.rescale(&CRat::i())), s);
    }

    #[test]
    fn pullback_multiplies_slopes(seed in any::<u64>(), m in 2u32..=3) {
        let mut r = rng(seed);
        let op = DifferentialOperator::new([(1, random_poly(&mut r, 0, 3)), (0, random_poly(&mut r, -3, 2))]);
        let scaled: Vec<BigRational> = slopes(&op).into_iter().map(|s| s * rat(m as i64, 1)).collect();
        prop_assert_eq!(slopes(&op.pullback(m)), scaled);
    }

    #[test]
    fn diagonal_realization_round_trips(seed in any::<u64>()) {
        let ft = unramified_formal(&mut rng(seed));
        let c = ConnectionSpec::System(ft.to_system().unwrap());
        let back = formal_type(&c).unwrap();
        prop_assert!(back.same_as(&ft.normalized(), 1e-9), "{:?} vs {:?}", back, ft);
        prop_assert_eq!(back.rank(), c.rank());
    }

    #[test]
    fn rank_one_operators_have_rank_one_type(seed in any::<u64>()) {
        let mut r = rng(seed);
        let op = DifferentialOperator::new([(1, random_poly(&mut r, 0, 4)), (0, random_poly(&mut r, -2, 2))]);
        let ft = formal_type(&ConnectionSpec::Operator(op)).unwrap();
        prop_assert_eq!(ft.rank(), 1);
    }

    #[test]
    fn rank_one_dual_negates_factor(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut a = random_poly(&mut r, -4, 2);
        a.add_term(-r.gen_range(2..=4), &CRat::from_int(r.gen_range(1..=5)));
        prop_assume!(a.valuation().unwrap() <= -2);
        let c = ConnectionSpec::System(vec![vec![a]]);
        let phi = formal_type(&c).unwrap().items[0].factor.clone();
        let dual = formal_type(&c.dual().unwrap()).unwrap().items[0].factor.clone();
        prop_assert!(phi.has_pole());
        prop_assert_eq!(dual.pole_part(), phi.neg().pole_part());
    }

    // ---- geometry ----

    #[test]
    fn dominance_is_constant_between_lines_and_flips_across(seed in any::<u64>()) {
        let mut r = rng(seed);
        let order = r.gen_range(1..=4);
        let exact = r.gen_bool(0.5);
        let delta = common::random_pole_part(&mut r, order, exact);
        let lines = stokes_directions(&delta).unwrap();
        let n = lines.len();
        let mut signs = Vec::new();
        for k in 0..n {
            let (a, b) = (lines[k].angle, if k + 1 < n { lines[k + 1].angle } else { lines[0].angle + 2.0 * PI });
            let s: Vec<i8> = (1..=32).map(|j| dominance(&delta, &Direction::approx(a + (b - a) * j as f64 / 33.0))).collect();
            prop_assert!(s[0] != 0 && s.iter().all(|&x| x == s[0]), "arc {k}: {s:?}");
            signs.push(s[0]);
        }
        for k in 0..n {
            prop_assert_eq!(signs[k], -signs[(k + 1) % n]);
        }
    }

    #[test]
    fn dominance_is_odd(seed in any::<u64>(), theta in 0.0f64..(2.0 * PI)) {
        let mut r = rng(seed);
        let order = r.gen_range(1..=4);
        let delta = common::random_pole_part(&mut r, order, true);
        for t in [Direction::approx(theta), Direction::from_pi_multiple(rat(r.gen_range(0..48), 24))] {
            prop_assert_eq!(dominance(&delta.neg(), &t), -dominance(&delta, &t));
        }
    }

    #[test]
    fn sector_cover_postconditions(seed in any::<u64>()) {
        let lines = random_lines(&mut rng(seed));
        let cover = sector_cover(&lines, &EpsPolicy::QuarterMinGap).unwrap();
        let n = lines.len();
        prop_assert_eq!(cover.len(), n);
        for (k, s) in cover.iter().enumerate() {
            // containment and exclusivity
            for (j, l) in lines.iter().enumerate() {
                prop_assert_eq!(s.contains(l), j == k || n == 1);
            }
            // the overlap with the next sector sits strictly between L_k and L_{k+1}
            let next = &cover[(k + 1) % n];
            let next = if k + 1 == n { next.shifted(1) } else { next.clone() };
            let lk1 = if k + 1 < n { lines[k + 1].clone() } else { lines[0].add(&Direction::turns(1)) };
            prop_assert!(next.lo > lines[k] && s.hi < lk1 && next.lo < s.hi);
        }
        // full cover, sampled
        for j in 0..720 {
            let t = Direction::approx(j as f64 * PI / 360.0 + 1e-7);
            prop_assert!(cover.iter().any(|s| s.contains(&t)));
        }
    }

    // ---- sheaf model ----

    #[test]
    fn sublevel_sets_grow_with_c(seed in any::<u64>(), c in -50.0f64..50.0, dc in 0.0f64..10.0,
                                 rho in 1e-3f64..1.0, theta in 0.0f64..(2.0 * PI), t in -100.0f64..100.0) {
        let f = common::random_factor(&mut rng(seed), 3);
        let (x, t) = (Point::Finite(Complex64::from_polar(rho, theta)), Point::Finite(Complex64::new(t, 0.0)));
        if sublevel_contains(&f, c, x, t) {
            prop_assert!(sublevel_contains(&f, c + dc + 1e-9, x, t));
        }
    }

    #[test]
    fn shapes_compose_and_grow_when_shrinking(seed in any::<u64>(), lo in 0.0f64..(2.0 * PI), w in 0.01f64..(2.0 * PI),
                                              a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let mut r = rng(seed);
        let count = r.gen_range(2..=4);
        let fs = common::random_family(&mut r, count, 3);
        let s = Sector::from_angles(lo, lo + w);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let inner = Sector::from_angles(lo + a * w, lo + b * w + 1e-3 * w);
        let outer = hom_shape(&fs, &s);
        let shrunk = hom_shape(&fs, &inner);
        prop_assert!(outer.is_closed_under_composition());
        prop_assert!(shrunk.is_closed_under_composition());
        prop_assert!(outer.allowed.is_subset(&shrunk.allowed));
    }

    #[test]
    fn negation_transposes_shape(seed in any::<u64>(), lo in 0.0f64..(2.0 * PI), w in 0.01f64..(2.0 * PI)) {
        let mut r = rng(seed);
        let count = r.gen_range(2..=4);
        let fs = common::random_family(&mut r, count, 3);
        let neg: Vec<_> = fs.iter().map(|f| f.neg()).collect();
        let s = Sector::from_angles(lo, lo + w);
        let a = hom_shape(&fs, &s).allowed;
        let b = hom_shape(&neg, &s).allowed;
        prop_assert_eq!(b, a.iter().map(|&(i, j)| (j, i)).collect());
    }

    #[test]
    fn hom_matches_bruteforce(seed in any::<u64>(), lo in 0.0f64..(2.0 * PI), w in 0.05f64..(2.0 * PI)) {
        let mut r = rng(seed);
        let fs = common::random_family(&mut r, 2, 3);
        let delta = fs[0].sub(&fs[1]);
        let lines = stokes_directions(&delta).unwrap();
        // keep both ends of the arc away from the Stokes directions, where sampling cannot decide
        let clear = |t: f64| lines.iter().all(|l| {
            let d = (t - l.angle).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d) > 0.05
        });
        prop_assume!(clear(lo) && clear(lo + w));
        let s = Sector::from_angles(lo, lo + w);
        let grid = BruteGrid::default();
        prop_assert_eq!(hom_exists(&fs[0], &fs[1], &s), hom_exists_bruteforce(&fs[0], &fs[1], &s, &grid));
        prop_assert_eq!(hom_exists(&fs[1], &fs[0], &s), hom_exists_bruteforce(&fs[1], &fs[0], &s, &grid));
    }

    #[test]
    fn two_factor_cover_shapes_are_never_full(seed in any::<u64>()) {
        let fs = common::random_family(&mut rng(seed), 2, 3);
        let d = StokesDiagram::new(&fs).unwrap();
        for k in 0..d.n_lines() {
            for s in [d.cover[k].clone(), d.overlap(k)] {
                let tag = hom_shape(&fs, &s).tag;
                prop_assert!(matches!(tag, ShapeTag::Diag | ShapeTag::UpperLike | ShapeTag::LowerLike), "{:?}", tag);
            }
            prop_assert_eq!(hom_shape(&fs, &d.cover[k]).tag, ShapeTag::Diag);
        }
    }

    // ---- Stokes structures ----

    #[test]
    fn monodromy_spectrum_ignores_base(seed in any::<u64>()) {
        let s = common::random_structure(&mut rng(seed));
        let p = char_poly(&glue_monodromy(&s).unwrap());
        for b in 1..=s.diagram.n_lines().max(1) {
            let q = char_poly(&glue_monodromy(&s.rebase(b).unwrap()).unwrap());
            prop_assert!(rel_diff(&p, &q) < 1e-9);
        }
    }

    #[test]
    fn extraction_output_validates(seed in any::<u64>()) {
        let (s, trivs) = common::random_structure_with_cover(&mut rng(seed));
        let e = extract_from_cover(&trivs, s.formal.clone()).unwrap();
        prop_assert!(validate(&e).is_empty());
    }

    #[test]
    fn single_piece_monodromy_is_formal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = common::random_factor(&mut r, 3);
        let rank = r.gen_range(1..=4);
        let exponents = (0..rank).map(|_| Complex64::new(r.gen_range(-4..4) as f64 / 8.0, r.gen_range(-2..2) as f64 / 8.0)).collect();
        let ft = FormalType { items: vec![FormalItem { factor: f, rank, exponents }], ramification: 1 };
        let s = StokesStructure::new(ft.clone(), vec![], 1).unwrap();
        prop_assert_eq!(s.diagram.n_lines(), 0);
        prop_assert_eq!(glue_monodromy(&s).unwrap(), formal_monodromy(&ft).unwrap());
    }

    #[test]
    fn full_matrices_violate_the_shape(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = common::random_structure(&mut r);
        prop_assume!(s.formal.items.len() >= 2 && !s.matrices.is_empty());
        let n = s.rank();
        let k = r.gen_range(0..s.matrices.len());
        let mut m = s.matrices.clone();
        m[k] = loop {
            let full = CMat::from_fn(n, n, |_, _| common::random_c(&mut r, 1.0) + Complex64::new(0.1, 0.0));
            if stokeskit::linalg::is_invertible(&full) {
                break full;
            }
        };
        let bad = StokesStructure { matrices: m, ..s };
        prop_assert!(!validate(&bad).is_empty());
    }

    #[test]
    fn structure_json_round_trips(seed in any::<u64>()) {
        let s = common::random_structure(&mut rng(seed));
        let text = serde_json::to_string(&s.to_json()).unwrap();
        let j: StokesStructureJson = serde_json::from_str(&text).unwrap();
        let back = StokesStructure::from_json(&j).unwrap();
        prop_assert_eq!(back.base, s.base);
        prop_assert_eq!(back.matrices, s.matrices);
        prop_assert!(back.formal.same_as(&s.formal, 0.0));
    }
}
