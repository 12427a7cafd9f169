use manifold_mtf::data::{generate_synthetic, load_dataset, save_dataset, MultiAspectDataset, SyntheticSpec};
use manifold_mtf::graphs::GraphSet;
use manifold_mtf::solver::{self, update_all_s, update_ratio, SolverConfig};

fn planted(sizes: Vec<usize>, clusters: usize, noise: f64, seed: u64) -> MultiAspectDataset {
    generate_synthetic(&SyntheticSpec {
        sizes,
        clusters,
        block_strength: 1.0,
        noise,
        sparsity: 0.5,
        seed,
    })
    .unwrap()
}

#[test]
fn saved_dataset_loads_back_identically() {
    let ds = planted(vec![30, 25, 20], 3, 0.1, 4);
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(&manifest).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn noiseless_planted_clusters_are_recovered() {
    for seed in 0..3 {
        let ds = planted(vec![40, 30, 50], 3, 0.0, seed);
        let cfg = SolverConfig { clusters: 3, seed, ..Default::default() };
        let sol = solver::cluster(&ds, &cfg).unwrap();
        assert_eq!(sol.metrics.len(), 3);
        for (h, m) in &sol.metrics {
            assert_eq!(m.accuracy, 1.0, "seed {seed} type {h}");
            assert!((m.nmi - 1.0).abs() < 1e-9, "seed {seed} type {h}: {}", m.nmi);
        }
    }
}

#[test]
fn every_iteration_keeps_rows_normalized_and_nonnegative() {
    let ds = planted(vec![40, 30, 35], 3, 0.2, 7);
    let cfg = SolverConfig {
        clusters: 3,
        max_iters: 1,
        rel_tol: f64::MIN_POSITIVE,
        ..Default::default()
    };
    let graphs = GraphSet::build(&ds, cfg.k, cfg.p, cfg.lambda, cfg.delta).unwrap();
    let mut state = solver::init_factors(&ds, &cfg).unwrap();
    for step in 0..40 {
        state = solver::iterate(&ds, &graphs, &cfg, state).unwrap().state;
        for (h, g) in state.g.iter().enumerate() {
            assert!(g.is_nonnegative() && g.is_finite(), "step {step} type {h}");
            for (i, s) in g.row_sums().into_iter().enumerate() {
                assert!((s - 1.0).abs() < 1e-9, "step {step} type {h} row {i}: {s}");
            }
        }
    }
}

#[test]
fn without_inter_weight_the_inter_term_vanishes() {
    let ds = planted(vec![30, 30, 30], 2, 0.1, 1);
    let cfg = SolverConfig { clusters: 2, delta: 0.0, max_iters: 50, ..Default::default() };
    let rep = solver::solve(&ds, &cfg).unwrap();
    for o in &rep.trace {
        assert_eq!(o.inter, 0.0);
        assert!((o.total - o.reconstruction - o.intra).abs() <= 1e-12 * o.total.abs().max(1.0));
    }
}

#[test]
fn converged_factors_satisfy_the_fixed_point_condition() {
    let ds = planted(vec![40, 40, 40], 3, 0.1, 2);
    let cfg = SolverConfig { clusters: 3, seed: 2, max_iters: 50_000, rel_tol: 1e-9, ..Default::default() };
    let graphs = GraphSet::build(&ds, cfg.k, cfg.p, cfg.lambda, cfg.delta).unwrap();
    let rep = solver::solve_with_graphs(&ds, &graphs, &cfg).unwrap();
    assert!(rep.converged, "no convergence after {} iterations", rep.iterations);

    let mut state = rep.state;
    update_all_s(&mut state, &ds).unwrap();
    let mut worst = 0.0f64;
    for h in 0..ds.m() {
        let ratio = update_ratio(h, &state, &ds, &graphs.aggregates, cfg.delta, cfg.zero_floor).unwrap();
        let g = &state.g[h];
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                if g[(i, j)] > 1e-6 {
                    worst = worst.max((ratio[(i, j)] - 1.0).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-3, "largest |ratio - 1| = {worst:e}");
}
