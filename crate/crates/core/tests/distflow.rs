use ces_core::feeder::{add_distflow, evaluate_flows, Line, NodalInjection, RadialOrder};
use ces_core::FeederGraph;
use ces_milp::{solve_lp, MilpProblem, SolveStatus, SolverOptions};
use proptest::prelude::*;

fn graph(n: usize, lines: &[(usize, usize, f64, f64)]) -> FeederGraph {
    FeederGraph {
        n_nodes: n,
        lines: lines.iter().map(|&(alpha, beta, r_pu, x_pu)| Line { alpha, beta, r_pu, x_pu }).collect(),
        prosumers_at: vec![Vec::new(); n],
        s_base_kva: 100.0,
        v_base_kv: 0.4,
    }
}

/// Solves the DistFlow rows of one operating point as an LP with a zero
/// objective; the rows determine every column.
fn solve_rows(order: &RadialOrder, p: &[f64], q: &[f64], u0: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = p.len();
    let mut pb = MilpProblem::new();
    let inj = NodalInjection { p_const: p.to_vec(), q_const: q.to_vec(), p_terms: vec![Vec::new(); n] };
    let cols = add_distflow(&mut pb, order, &inj, u0, (f64::NEG_INFINITY, f64::INFINITY), "0,0");
    pb.add_objective("zero", Vec::new(), 0.0);
    let res = solve_lp(&pb, "zero", &SolverOptions::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    let pick = |c: &[usize]| c.iter().map(|&j| res.values[j]).collect::<Vec<_>>();
    (pick(&cols.p_line), pick(&cols.q_line), pick(&cols.u_node))
}

#[test]
fn zero_injection_is_a_fixed_point() {
    let g = graph(7, &[(0, 1, 0.01, 0.01), (1, 2, 0.02, 0.01), (2, 3, 0.01, 0.03), (3, 4, 0.1, 0.05), (2, 5, 0.01, 0.01), (5, 6, 0.01, 0.0)]);
    let order = g.validate_radial().unwrap();
    let zero = vec![0.0; 7];
    let u0 = 1.0;
    let direct = evaluate_flows(&order, &zero, &zero, u0);
    assert!(direct.p_line.iter().chain(&direct.q_line).all(|&v| v == 0.0));
    assert!(direct.u_node.iter().all(|&u| u == u0));
    let (p, q, u) = solve_rows(&order, &zero, &zero, u0);
    assert!(p.iter().chain(&q).all(|v| v.abs() <= 1e-12));
    assert!(u.iter().all(|v| (v - u0).abs() <= 1e-12));
}

#[test]
fn single_line_drop_by_hand() {
    let g = graph(2, &[(0, 1, 0.01, 0.02)]);
    let order = g.validate_radial().unwrap();
    let (p, q) = (vec![0.0, 1.0], vec![0.0, 0.5]);
    let u0 = 1.0;
    let hand = u0 - 2.0 * (0.01 * 1.0 + 0.02 * 0.5);
    let direct = evaluate_flows(&order, &p, &q, u0);
    assert!((direct.u_node[1] - hand).abs() <= 1e-12);
    assert!((direct.u_node[1] - (u0 - 0.04)).abs() <= 1e-12);
    let (_, _, u) = solve_rows(&order, &p, &q, u0);
    assert!((u[1] - hand).abs() <= 1e-12, "{}", u[1]);
}

#[test]
fn root_flow_of_a_star_is_the_sum_of_children() {
    let g = graph(4, &[(0, 1, 0.01, 0.01), (1, 2, 0.01, 0.01), (1, 3, 0.01, 0.01)]);
    let order = g.validate_radial().unwrap();
    let p = vec![0.0, 0.0, 0.3, -0.7];
    let q = vec![0.0, 0.1, 0.05, 0.2];
    let (pl, ql, _) = solve_rows(&order, &p, &q, 1.0);
    let root = order.feeding_line[1].unwrap();
    assert!((pl[root] - (-0.4)).abs() <= 1e-12);
    assert!((ql[root] - 0.35).abs() <= 1e-12);
}

/// Random tree on `n` nodes: node `k` hangs off a uniformly chosen earlier node.
fn random_tree() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>, Vec<(f64, f64)>)> {
    (2usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<prop::sample::Index>(), n - 1),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec((0.0f64..0.1, 0.0f64..0.1), n - 1),
        )
            .prop_map(move |(idx, p, q, z)| ((1..n).map(|k| idx[k - 1].index(k)).collect(), p, q, z))
    })
}

/// Sum of absorptions in the subtree of `b` by explicit descent.
fn subtree_sum(parent: &[usize], v: &[f64], b: usize) -> f64 {
    let n = v.len();
    (1..n)
        .filter(|&k| {
            let mut a = k;
            while a != 0 && a != b {
                a = parent[a - 1];
            }
            a == b
        })
        .map(|k| v[k])
        .sum()
}

proptest! {
    #[test]
    fn flows_telescope_on_random_trees((parent, p, q, z) in random_tree()) {
        let n = p.len();
        let lines: Vec<(usize, usize, f64, f64)> = (1..n).map(|k| (parent[k - 1], k, z[k - 1].0, z[k - 1].1)).collect();
        let order = graph(n, &lines).validate_radial().unwrap();
        let st = evaluate_flows(&order, &p, &q, 1.0);
        for (k, l) in order.lines.iter().enumerate() {
            prop_assert!((st.p_line[k] - subtree_sum(&parent, &p, l.beta)).abs() < 1e-12);
            prop_assert!((st.q_line[k] - subtree_sum(&parent, &q, l.beta)).abs() < 1e-12);
        }
        let total: f64 = p[1..].iter().sum();
        let root: f64 = order.children[0].iter().map(|&k| st.p_line[k]).sum();
        prop_assert!((root - total).abs() < 1e-12);
        let (pl, ql, u) = solve_rows(&order, &p, &q, 1.0);
        for k in 0..order.lines.len() {
            prop_assert!((pl[k] - st.p_line[k]).abs() < 1e-9 && (ql[k] - st.q_line[k]).abs() < 1e-9);
        }
        for a in 0..n {
            prop_assert!((u[a] - st.u_node[a]).abs() < 1e-9);
        }
    }
}
