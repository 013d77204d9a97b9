use num_complex::Complex64 as C64;
use proptest::prelude::*;

use entbound::cli::{format_number, perturb_couplings};
use entbound::model::SpinModel;
use entbound::sdp::CutLp;
use entbound::states::{log_negativity, log_negativity_pure, DensityOperator, StateVector};
use entbound::witness::{
    bell_overlap, flip_sites, flip_sites_mixed, witness_bound, Branch, WitnessData,
};

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
        .prop_filter_map("zero vector", move |v| {
            let amps = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
            StateVector::from_unnormalized(n, amps).ok()
        })
}

fn mixed(n: usize) -> impl Strategy<Value = DensityOperator> {
    (prop::collection::vec(state(n), 1..4), prop::collection::vec(0.05f64..1.0, 3)).prop_map(
        |(states, w)| {
            let w: Vec<f64> = w[..states.len()].to_vec();
            let total: f64 = w.iter().sum();
            let w: Vec<f64> = w.iter().map(|x| x / total).collect();
            DensityOperator::mixture(&states, &w).unwrap()
        },
    )
}

/// Optimum of `max cᵀw, Gw <= h, |w_i| <= W` in two variables over all
/// vertices of the feasible polygon.
fn vertex_optimum(c: [f64; 2], cuts: &[([f64; 2], f64)], w_max: f64) -> f64 {
    let mut rows: Vec<([f64; 2], f64)> = cuts.to_vec();
    rows.extend([
        ([1.0, 0.0], w_max),
        ([-1.0, 0.0], w_max),
        ([0.0, 1.0], w_max),
        ([0.0, -1.0], w_max),
    ]);
    let feasible = |w: [f64; 2]| {
        rows.iter()
            .all(|(g, h)| g[0] * w[0] + g[1] * w[1] <= h + 1e-9 * (1.0 + h.abs()))
    };
    let mut best = f64::NEG_INFINITY;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            let ((g1, h1), (g2, h2)) = (rows[a], rows[b]);
            let det = g1[0] * g2[1] - g1[1] * g2[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let w = [(h1 * g2[1] - h2 * g1[1]) / det, (g1[0] * h2 - g2[0] * h1) / det];
            if feasible(w) {
                best = best.max(c[0] * w[0] + c[1] * w[1]);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn negativity_ignores_local_flips(psi in state(4), mask in 0usize..16) {
        let a = log_negativity_pure(&psi).unwrap();
        let b = log_negativity_pure(&flip_sites(&psi, mask)).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn mixed_negativity_ignores_local_flips(rho in mixed(4), mask in 0usize..16) {
        let a = log_negativity(&rho).unwrap();
        let b = log_negativity(&flip_sites_mixed(&rho, mask)).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn pure_and_mixed_negativity_agree(psi in state(4)) {
        let a = log_negativity_pure(&psi).unwrap();
        let b = log_negativity(&psi.to_density().unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn bounds_never_exceed_negativity(
        rho in mixed(4),
        p in 0.2f64..3.0,
        b in 0.05f64..2.5,
        w1 in -10.0f64..10.0,
        parity: bool,
    ) {
        let exact = log_negativity(&rho).unwrap();
        for branch in [Branch::Ferro, Branch::Antiferro] {
            prop_assert!(bell_overlap(&rho, branch).unwrap().bound_bits <= exact + 1e-8);
        }
        let m = SpinModel::algebraic(4, p, -1.0, b).unwrap();
        let data = WitnessData::from_state(&m, &rho).unwrap();
        let w = witness_bound(&m, &data, w1, parity, Branch::Ferro).unwrap();
        prop_assert!(w.bound_bits <= exact + 1e-8);
        prop_assert!(w.bound_bits >= 0.0);
    }

    #[test]
    fn lp_value_bounds_the_vertex_optimum(
        c in prop::array::uniform2(-1.0f64..1.0),
        cuts in prop::collection::vec((prop::array::uniform2(-1.0f64..1.0), 0.0f64..2.0), 1..8),
        w_max in 0.5f64..5.0,
    ) {
        let mut lp = CutLp::new(c.to_vec(), w_max).unwrap();
        for (g, h) in &cuts {
            lp.add_cut(g.to_vec(), *h).unwrap();
        }
        let sol = lp.solve(200).unwrap();
        let opt = vertex_optimum(c, &cuts, w_max);
        let scale = 1.0 + opt.abs();
        prop_assert!(sol.value >= opt - 1e-9 * scale, "{} < {}", sol.value, opt);
        prop_assert!(sol.value <= opt + 1e-6 * scale, "{} >> {}", sol.value, opt);
    }

    #[test]
    fn numbers_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL) {
        let s = format_number(Some(x));
        prop_assert_eq!(s.parse::<f64>().unwrap(), x + 0.0);
        prop_assert_eq!(format_number(Some(x)), s);
    }

    #[test]
    fn perturbation_stays_within_its_band(seed: u64, pct in 0.0f64..10.0, p in 0.2f64..3.0) {
        let m = SpinModel::algebraic(6, p, -1.0, 0.0).unwrap();
        let j = m.couplings();
        let q = perturb_couplings(j, pct, seed);
        prop_assert_eq!(&q, &q.transpose());
        prop_assert_eq!(&q, &perturb_couplings(j, pct, seed));
        for (a, b) in j.iter().zip(q.iter()) {
            prop_assert!((b - a).abs() <= a.abs() * pct / 100.0 + 1e-15);
        }
    }
}

#[test]
fn blank_for_missing_numbers() {
    assert_eq!(format_number(None), "");
    assert_eq!(format_number(Some(f64::NAN)), "");
    assert_eq!(format_number(Some(-0.0)), format_number(Some(0.0)));
}
