use apollonian_search::search::{InitSet, RestrictedSearch};
use apollonian_search::spectral::MAX_DENSE_DIM;
use apollonian_search::walk::{apply_shift, uniform_state};
use apollonian_search::{
    build_apollonian, dense_step_matrix, eigen_analysis, project_last_generation, restricted_search,
    verify_fact1, ArcSpace, CoinSpec, Error, NodeId,
};
use nalgebra::DVector;

fn space(k: u32) -> ArcSpace {
    ArcSpace::build(build_apollonian(k).unwrap())
}

#[test]
fn plus_one_dimension_is_cycle_rank_plus_one() {
    // Common +1 vectors of S and C: the uniform state. Common -1 vectors:
    // antisymmetric circulations, one per independent cycle (E - N + 1).
    for k in 0..=4 {
        let arcs = space(k);
        let (analysis, _) = verify_fact1(&arcs, &[], 0, 1).unwrap();
        let g = arcs.graph();
        assert_eq!(analysis.report().plus_one_dim, g.edge_count() - g.node_count() + 2, "K={k}");
        assert_eq!(
            analysis.report().x_prime_dim,
            arcs.len() - analysis.report().plus_one_dim + 1
        );
    }
}

#[test]
fn eigenphases_come_in_conjugate_pairs_on_the_unit_circle() {
    let arcs = space(3);
    let u = dense_step_matrix(&arcs, CoinSpec::marked(NodeId(5))).unwrap();
    let start = uniform_state::<f64>(&arcs).into_amplitudes();
    let r = eigen_analysis(&u, &start).unwrap().report().clone();
    assert!(r.max_modulus_deviation < 1e-10);
    let mut neg: Vec<f64> = r.eigenphases.iter().map(|p| -p).collect();
    neg.sort_by(f64::total_cmp);
    // Phases at pi map to -pi; fold them back before comparing.
    let fold = |x: f64| if (x + std::f64::consts::PI).abs() < 1e-9 { -x } else { x };
    let mut a: Vec<f64> = r.eigenphases.iter().copied().map(fold).collect();
    let mut b: Vec<f64> = neg.into_iter().map(fold).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn sigma_anchors() {
    // K=1 is the complete graph on four nodes: 3-regular, adjacency
    // eigenvalue -1, so the walk phase satisfies cos(theta) = -1/3.
    let expected = [
        (1, (-1.0f64 / 3.0).acos()),
        (2, 1.392_973_185_630_186),
        (3, 1.010_795_468_406_872),
    ];
    for (k, sigma) in expected {
        let (analysis, _) = verify_fact1(&space(k), &[], 0, 1).unwrap();
        let r = analysis.report();
        assert!(r.sigma > 0.0 && !r.degenerate);
        assert!((r.sigma - sigma).abs() < 1e-9, "K={k}: {}", r.sigma);
    }
}

#[test]
fn uniform_start_is_fixed() {
    for k in 0..=4 {
        let (analysis, _) = verify_fact1(&space(k), &[], 0, 1).unwrap();
        assert!(analysis.report().start_fixed_residual < 1e-10);
        assert!((analysis.report().start_plus_one_weight - 1.0).abs() < 1e-10);
    }
}

#[test]
fn invariant_subspace_checks_every_node() {
    for k in 0..=4 {
        let arcs = space(k);
        let nodes: Vec<NodeId> = arcs.graph().nodes().collect();
        let (analysis, checks) = verify_fact1(&arcs, &nodes, 4, 7).unwrap();
        assert_eq!(checks.len(), nodes.len());
        for c in &checks {
            assert!(c.passed, "K={k} {c:?}");
        }
        for row in &analysis.report().overlap_table {
            assert!((row.x_prime_weight - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn dense_cap_is_a_capacity_error() {
    let arcs = space(8);
    assert!(arcs.len() > MAX_DENSE_DIM);
    assert!(matches!(
        dense_step_matrix(&arcs, CoinSpec::unmarked()),
        Err(Error::Capacity(_))
    ));
}

#[test]
fn projection_of_restricted_start_and_its_shift() {
    for k in 1..=6 {
        let arcs = space(k);
        let s = InitSet::LastGeneration.state::<f64>(&arcs).unwrap();
        let p = project_last_generation(&s, &arcs).unwrap();
        assert!((p.success_prob - 1.0).abs() < 1e-12);
        let shifted = apply_shift(&s, &arcs).unwrap();
        let p = project_last_generation(&shifted, &arcs).unwrap();
        assert!(p.success_prob.abs() < 1e-12);
        assert!(p.conditional_state().is_err());
    }
}

#[test]
fn unnormalized_state_is_rejected() {
    let arcs = space(2);
    let s = apollonian_search::WalkState::from_amplitudes(vec![0.5; arcs.len()]);
    assert!(project_last_generation(&s, &arcs).is_err());
}

#[test]
fn protocol_frequencies_within_three_sigma() {
    let arcs = space(3);
    let marked = arcs.graph().last_generation()[4];
    for init in [InitSet::Full, InitSet::LastGeneration] {
        let prepared = RestrictedSearch::<f64>::prepare(&arcs, marked, 6, init).unwrap();
        let n = 4000;
        let summary = prepared.trials(n, 99);
        let p = prepared.marked_probability();
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        let freq = summary.hits as f64 / n as f64;
        assert!((freq - p).abs() <= 3.0 * sd + 1e-12, "{init:?}: {freq} vs {p}");

        let q = prepared.first_projection_probability();
        let sd = (q * (1.0 - q) / n as f64).sqrt();
        let freq = summary.first_attempt_successes as f64 / n as f64;
        assert!((freq - q).abs() <= 3.0 * sd + 1e-12);
    }
}

#[test]
fn single_runs_are_reproducible() {
    let arcs = space(4);
    let m = arcs.graph().last_generation()[0];
    let a = restricted_search(&arcs, m, 10, InitSet::Full, Some(3)).unwrap();
    let b = restricted_search(&arcs, m, 10, InitSet::Full, Some(3)).unwrap();
    assert_eq!(a, b);
    assert!(restricted_search(&arcs, NodeId(999), 10, InitSet::Full, None).is_err());
}

#[test]
fn overlap_weights_sum_consistently() {
    let arcs = space(2);
    let nodes: Vec<NodeId> = arcs.graph().nodes().collect();
    let (analysis, _) = verify_fact1(&arcs, &nodes, 0, 1).unwrap();
    let basis = analysis.plus_one_basis();
    for row in &analysis.report().overlap_table {
        let t = DVector::from_vec(
            apollonian_search::walk::marked_target_state::<f64>(&arcs, row.node)
                .unwrap()
                .into_amplitudes(),
        );
        let w = (basis.transpose() * &t).norm_squared();
        assert!((w - row.plus_one_weight).abs() < 1e-10);
    }
}
