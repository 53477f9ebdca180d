use std::f64::consts::PI;

use proptest::prelude::*;
use rispart::channel::RisGeometry;
use rispart::partition::*;

fn plan_strategy() -> impl Strategy<Value = (usize, usize, Vec<usize>, Vec<(f64, f64)>, Vec<f64>)> {
    (1usize..=12, 1usize..=12).prop_flat_map(|(nx, ny)| {
        let s_max = ny.min(4);
        (1..=s_max).prop_flat_map(move |s| {
            (
                Just(nx),
                Just(ny),
                prop::collection::vec(1usize..=ny, s - 1),
                prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), s),
                prop::collection::vec(0.0f64..2.0 * PI, s),
            )
        })
    })
}

fn realize(ny: usize, raw_cuts: &[usize]) -> Vec<usize> {
    let mut cuts: Vec<usize> = raw_cuts.iter().map(|c| c % ny).collect();
    cuts.sort_unstable();
    let mut counts = Vec::new();
    let mut last = 0;
    for c in cuts.into_iter().chain(std::iter::once(ny)) {
        counts.push(c - last);
        last = c;
    }
    counts
}

fn build(nx: usize, ny: usize, cuts: &[usize], grads: &[(f64, f64)], psi: &[f64]) -> (RisGeometry, PartitionPlan) {
    let ris = RisGeometry::half_wavelength(nx, ny).unwrap();
    let counts = realize(ny, cuts);
    let s = counts.len();
    let plan = PartitionPlan::with_columns(
        counts,
        grads.iter().map(|&(x, y)| PhaseGradient::new(x, y)).collect(),
        (0..s).map(|i| (i, i)).collect(),
        psi.to_vec(),
        s,
        s,
    )
    .unwrap();
    (ris, plan)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_equals_direct_sum((nx, ny, cuts, grads, psi) in plan_strategy(), zx in -2.0f64..2.0, zy in -2.0f64..2.0) {
        let (ris, plan) = build(nx, ny, &cuts, &grads, &psi);
        let theta = build_theta(&plan, &ris).unwrap();
        let mut probes: Vec<PhaseGradient> = plan.gradients().to_vec();
        probes.push(PhaseGradient::new(zx, zy));
        for z in probes {
            let a = gain_direct_sum(&theta, &ris, z);
            let b = gain_closed_form(&plan, &ris, z).unwrap();
            prop_assert!((a - b).norm() < 1e-10);
            prop_assert!(b.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn theta_is_unit_modulus((nx, ny, cuts, grads, psi) in plan_strategy()) {
        let (ris, plan) = build(nx, ny, &cuts, &grads, &psi);
        let theta = build_theta(&plan, &ris).unwrap();
        prop_assert_eq!(theta.len(), nx * ny);
        prop_assert!(theta.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rounding_preserves_column_total(raw in prop::collection::vec(0.0f64..1.0, 1..6), ny in 1usize..200) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let t: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let r = round_partition(&t, ny).unwrap();
        prop_assert_eq!(r.counts.iter().sum::<usize>(), ny);
        for (s, &c) in r.counts.iter().enumerate() {
            if t[s] == 0.0 { prop_assert_eq!(c, 0); }
            if c == 0 && t[s] > 0.0 { prop_assert!(r.dropped.contains(&s)); }
            // largest remainder never moves a count by a full column from its quota
            if r.dropped.is_empty() {
                prop_assert!((c as f64 - t[s] * ny as f64).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn asymptotic_gain_ignores_position(
        t_raw in prop::collection::vec(0.05f64..1.0, 2..5),
        grads in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
        psi in prop::collection::vec(0.0f64..std::f64::consts::TAU, 4),
        rot in 0usize..4,
    ) {
        let s = t_raw.len();
        let total: f64 = t_raw.iter().sum();
        let t: Vec<f64> = t_raw.iter().map(|x| x / total).collect();
        let g: Vec<PhaseGradient> = grads[..s].iter().map(|&(x, y)| PhaseGradient::new(x, y)).collect();
        let pairs: Vec<(usize, usize)> = (0..s).map(|i| (i, i)).collect();
        let a = PartitionPlan::new(t.clone(), g.clone(), pairs.clone(), psi[..s].to_vec(), s, s).unwrap();
        let order: Vec<usize> = (0..s).map(|i| (i + rot) % s).collect();
        let b = PartitionPlan::new(
            order.iter().map(|&i| t[i]).collect(),
            order.iter().map(|&i| g[i]).collect(),
            order.iter().map(|&i| pairs[i]).collect(),
            order.iter().map(|&i| psi[i]).collect(),
            s,
            s,
        ).unwrap();
        for z in &g {
            prop_assert!((gain_asymptotic(&a, *z) - gain_asymptotic(&b, *z)).norm() < 1e-15);
        }
    }

    #[test]
    fn pairing_validity_matches_counts(entries in prop::collection::vec(0u8..2, 12)) {
        let result = PairingMatrix::new(3, 4, &entries);
        let rows_ok = (0..3).all(|u| (0..4).filter(|&v| entries[u * 4 + v] == 1).count() <= 1);
        let cols_ok = (0..4).all(|v| (0..3).filter(|&u| entries[u * 4 + v] == 1).count() <= 1);
        prop_assert_eq!(result.is_ok(), rows_ok && cols_ok);
        if let Ok(m) = result {
            prop_assert_eq!(m.count(), entries.iter().filter(|&&e| e == 1).count());
            prop_assert_eq!(m.pairs().len(), m.count());
        }
    }
}

#[test]
fn horizontal_tiles_reproduce_plan_gain() {
    use rand::Rng;
    let mut rng = rispart::channel::realization_rng(21, 0);
    let ris = RisGeometry::half_wavelength(16, 16).unwrap();
    for _ in 0..10 {
        // column stripes of whole tile columns (4 tiles per stripe unit)
        let s = rng.random_range(1..=3);
        let mut cols = vec![1usize; s];
        for _ in 0..(4 - s) {
            cols[rng.random_range(0..s)] += 1;
        }
        let grads: Vec<PhaseGradient> = (0..s)
            .map(|_| PhaseGradient::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        let psi: Vec<f64> = (0..s).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let mu: Vec<f64> = cols.iter().map(|&c| c as f64 / 4.0).collect();
        let tiles = TilePlan::from_fractions(&ris, 0.5, &mu, grads.clone(), psi.clone()).unwrap();
        let plan = PartitionPlan::with_columns(
            cols.iter().map(|c| c * 4).collect(),
            grads.clone(),
            (0..s).map(|i| (i, i)).collect(),
            psi,
            s,
            s,
        )
        .unwrap();
        for _ in 0..3 {
            let z = PhaseGradient::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let a = tile_plan_gain(&tiles, &ris, z);
            let b = gain_closed_form(&plan, &ris, z).unwrap();
            assert!((a - b).norm() < 1e-10);
        }
    }
}
