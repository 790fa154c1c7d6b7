use neolithic::analysis::{broaden_timing, great_circle_km, ols, quantile};
use neolithic::climate::Potential;
use neolithic::dynamics::{fitness_gradients, trait_rates, ParameterSet, RegionState};
use neolithic::engine::Simulator;
use neolithic::exchange::{influence_flux, FluxSet};
use neolithic::mesh::{self, BuildOptions, Grid, Scales};
use neolithic::synthetic;
use proptest::prelude::*;

fn state() -> impl Strategy<Value = RegionState> {
    (0.01..50.0f64, 0.05..20.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(p, t, q, f)| RegionState {
        density: p,
        technology: t,
        farming: q,
        economies: f,
    })
}

fn potential() -> impl Strategy<Value = Potential> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..5.0f64).prop_map(|(fep, tli, pae)| Potential {
        fep,
        tli,
        lae: pae / 4.0,
        pae,
    })
}

fn two_pass(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx, my - sxy / sxx * mx)
}

proptest! {
    #[test]
    fn quantile_is_monotone_in_p(values in prop::collection::vec(-1e4..1e4f64, 1..60), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantile(&values, lo).unwrap() <= quantile(&values, hi).unwrap());
    }

    #[test]
    fn quantile_ignores_order(mut values in prop::collection::vec(-1e4..1e4f64, 1..60), p in 0.0..=1.0f64, seed in any::<u64>()) {
        let q = quantile(&values, p).unwrap();
        let n = values.len();
        for i in (1..n).rev() {
            values.swap(i, (seed.rotate_left(i as u32) as usize) % (i + 1));
        }
        prop_assert_eq!(q, quantile(&values, p).unwrap());
    }

    #[test]
    fn quantile_stays_within_range(values in prop::collection::vec(-1e4..1e4f64, 1..60), p in 0.0..=1.0f64) {
        let q = quantile(&values, p).unwrap();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(q >= min && q <= max);
    }

    #[test]
    fn ols_matches_two_pass(xs in prop::collection::vec(0.0..5000.0f64, 3..200), slope in 0.1..3.0f64, noise in prop::collection::vec(-300.0..300.0f64, 200)) {
        let points: Vec<(f64, f64)> = xs.iter().zip(&noise).map(|(&x, &e)| (x, slope * x + e)).collect();
        let spread = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - xs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1.0);
        let fit = ols(points.iter().copied()).unwrap();
        let (s, i) = two_pass(&points);
        prop_assert!((fit.slope - s).abs() <= 1e-12 * s.abs().max(1e-3));
        prop_assert!((fit.intercept - i).abs() <= 1e-12 * i.abs().max(s.abs() * 5000.0));
        prop_assert!((0.0..=1.0).contains(&fit.r2));
    }

    #[test]
    fn distance_is_symmetric(lon1 in -180.0..180.0f64, lat1 in -90.0..=90.0f64, lon2 in -180.0..180.0f64, lat2 in -90.0..=90.0f64) {
        let d = great_circle_km((lon1, lat1), (lon2, lat2));
        prop_assert_eq!(d, great_circle_km((lon2, lat2), (lon1, lat1)));
        prop_assert!((0.0..=std::f64::consts::PI * 6371.0 + 1e-9).contains(&d));
    }

    #[test]
    fn distance_obeys_triangle_inequality(a in (-180.0..180.0f64, -89.0..89.0f64), b in (-180.0..180.0f64, -89.0..89.0f64), c in (-180.0..180.0f64, -89.0..89.0f64)) {
        prop_assert!(great_circle_km(a, c) <= great_circle_km(a, b) + great_circle_km(b, c) + 1e-6);
    }

    #[test]
    fn broadened_timing_sums_to_one(year in 3000.0..10000.0f64, area in 1e3..1e6f64, beta in 0.01..2.0f64, bin in 10.0..500.0f64) {
        let density = broaden_timing(year, area, beta, 1.0).unwrap();
        let total: f64 = density.binned(bin).iter().map(|b| b.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
    }

    #[test]
    fn flux_is_antisymmetric(a in state(), b in state(), coupling in 1e-4..1.0f64, sigma in 0.0..1.0f64) {
        let ab = influence_flux(&a, &b, coupling, sigma);
        let ba = influence_flux(&b, &a, coupling, sigma);
        prop_assert!((ab + ba).abs() <= 1e-12 * ab.abs().max(1e-300));
    }

    #[test]
    fn flux_follows_influence(a in state(), b in state(), coupling in 1e-4..1.0f64) {
        let f = influence_flux(&a, &b, coupling, 0.5);
        prop_assert_eq!(f > 0.0, b.influence() > a.influence());
    }

    #[test]
    fn trait_rates_share_gradient_signs(s in state(), env in potential()) {
        let params = ParameterSet::default();
        let g = fitness_gradients(&s, &env, &params);
        let r = trait_rates(&g, &params);
        prop_assert_eq!(r.technology.signum(), g.technology.signum());
        prop_assert_eq!(r.farming.signum(), g.farming.signum());
        prop_assert_eq!(r.economies.signum(), g.economies.signum());
    }

    #[test]
    fn migration_conserves_people(seed in 0u64..1000, states in prop::collection::vec(state(), 12), steps in 1usize..40) {
        let graph = synthetic::random_graph(12, 8, seed);
        let params = ParameterSet { mu: 0.0, rho: 0.0, delta_t: 0.0, delta_q: 0.0, delta_f: 0.0, ..ParameterSet::default() };
        let mut sim = Simulator::new(&graph, params, states, vec![Potential::default(); 12]).unwrap();
        let before = graph.population_mass(sim.states());
        for k in 0..steps {
            sim.step(0.02, k as f64, None).unwrap();
        }
        let after = graph.population_mass(sim.states());
        prop_assert!((after - before).abs() <= 1e-12 * before);
    }

    #[test]
    fn steps_stay_admissible(seed in 0u64..1000, states in prop::collection::vec(state(), 8), envs in prop::collection::vec(potential(), 8)) {
        let graph = synthetic::random_graph(8, 4, seed);
        let params = ParameterSet::default();
        let mut sim = Simulator::new(&graph, params, states, envs).unwrap();
        for k in 0..50 {
            if let Err(e) = sim.step(1.0, k as f64, None) {
                prop_assert!(e.is_numerical(), "{}", e);
                break;
            }
            for s in sim.states() {
                prop_assert!(s.density >= 0.0 && s.technology >= params.t_min);
                prop_assert!((0.0..=1.0).contains(&s.farming) && (0.0..=1.0).contains(&s.economies));
            }
        }
    }

    #[test]
    fn fluxes_are_edgewise(seed in 0u64..1000, states in prop::collection::vec(state(), 10)) {
        let graph = synthetic::random_graph(10, 6, seed);
        let fluxes = FluxSet::compute(&graph, &states, 0.01, 0.1);
        prop_assert_eq!(fluxes.demic.len(), graph.edges.len());
        for (e, f) in graph.edges.iter().zip(&fluxes.demic) {
            let reverse = influence_flux(&states[e.b], &states[e.a], graph.coupling(e), 0.01);
            prop_assert!((f + reverse).abs() <= 1e-12 * f.abs().max(1e-300));
        }
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(a in (0.0..1500.0f64, 0.0..6000.0f64), b in (0.0..1500.0f64, 0.0..6000.0f64), sn in 1.0..500.0f64, sg in 1.0..2000.0f64) {
        let sc = Scales { npp: sn, gdd: sg };
        let s = mesh::similarity(a.0, a.1, b.0, b.1, &sc);
        prop_assert_eq!(s, mesh::similarity(b.0, b.1, a.0, a.1, &sc));
        prop_assert!(s > 0.0 && s <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn regions_partition_the_grid(rows in 2usize..9, cols in 2usize..9, npp in prop::collection::vec(100.0..1200.0f64, 64), frac in 0.05..0.6f64) {
        let mut pts = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                pts.push((20.0 + 0.5 * c as f64, 40.0 + 0.5 * r as f64, npp[(r * cols + c) % 64], 2000.0));
            }
        }
        let grid = Grid::new(&pts, None).unwrap();
        let total: f64 = grid.areas().iter().sum();
        let opts = BuildOptions { target_area: frac * total, ..BuildOptions::default() };
        let out = mesh::build_regions(&grid, &opts).unwrap();
        let mut seen = vec![false; grid.len()];
        for (id, r) in out.regions.iter().enumerate() {
            prop_assert_eq!(r.id, id);
            prop_assert!(mesh::is_contiguous(&grid, r, &out.cell_region));
            for &c in &r.cells {
                prop_assert!(!seen[c]);
                seen[c] = true;
                prop_assert_eq!(out.cell_region[c], id);
            }
            let area: f64 = r.cells.iter().map(|&c| grid.cells()[c].area).sum();
            prop_assert!((area - r.area).abs() <= 1e-9 * area);
        }
        prop_assert!(seen.iter().all(|&s| s));
        for e in &out.edges {
            prop_assert!(e.a < e.b && e.length > 0.0);
        }
    }
}
