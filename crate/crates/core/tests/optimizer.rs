use relay_core::comms::link_snrs;
use relay_core::dynamics::feasibility_audit;
use relay_core::objective::{step_cost, trajectory_cost};
use relay_core::optimizer::{initial_guess, solve, solve_from, transcribe, InitStrategy, SolverParams};
use relay_core::scenario::{synth_peer, PeerSource, PeerSpec};
use relay_core::{Attitude, GainModel, Scenario, Trajectory, Vec3};

const BS: Vec3 = Vec3::new(1.0, 3.0, 1.5);
const START: Vec3 = Vec3::new(0.0, 3.0, 1.5);

fn scenario(spec: PeerSpec, horizon: f64, ts: f64) -> Scenario {
    let peer = synth_peer(&spec, horizon, ts, 9.81).unwrap();
    Scenario::with_peer(BS, START, peer, PeerSource::Synthetic(spec)).unwrap()
}

fn hover(position: Vec3, horizon: f64) -> Scenario {
    scenario(PeerSpec::Hover { position }, horizon, 0.05)
}

/// Cost of one relay position against a hovering peer.
fn static_cost(s: &Scenario, p: Vec3, model: GainModel) -> f64 {
    let peer = s.peer.knots()[0].position;
    let (xi_uav, xi_bs) =
        link_snrs(p, Attitude::HOVER, peer, Attitude::HOVER, s.bs_position, &s.budget, model).unwrap();
    step_cost(xi_bs, xi_uav, &s.cost)
}

/// Exhaustive search over a 6 x 6 x 3 m box at 0.05 m.
fn grid_minimizer(s: &Scenario, model: GainModel) -> (Vec3, f64) {
    let h = 0.05;
    let mut best = (Vec3::ZERO, f64::INFINITY);
    for i in 0..=120 {
        for j in 0..=120 {
            for l in 0..=60 {
                let p = Vec3::new(i as f64 * h, j as f64 * h, l as f64 * h);
                if p == s.bs_position || p == s.peer.knots()[0].position {
                    continue;
                }
                let c = static_cost(s, p, model);
                if c < best.1 {
                    best = (p, c);
                }
            }
        }
    }
    best
}

fn final_position(traj: &Trajectory) -> Vec3 {
    traj.knots().last().unwrap().position
}

#[test]
fn decision_vector_sizes() {
    let s = hover(Vec3::new(4.0, 3.0, 1.5), 18.0);
    assert_eq!(transcribe(&s).unwrap().num_vars(), 3240);
    let s = hover(Vec3::new(4.0, 3.0, 1.5), 0.05);
    assert_eq!(transcribe(&s).unwrap().num_vars(), 9);
}

#[test]
fn decoding_pins_the_start_state() {
    let s = hover(Vec3::new(4.0, 3.0, 1.5), 1.0);
    let layout = transcribe(&s).unwrap();
    let z: Vec<f64> = (0..layout.num_vars()).map(|i| (i as f64 * 0.37).sin()).collect();
    let traj = layout.decode(&z, s.gravity);
    let k0 = traj.knots()[0];
    assert_eq!(k0.position, START);
    assert_eq!(k0.velocity, Vec3::ZERO);
    assert_eq!(k0.acceleration, Vec3::ZERO);
    let back = layout.encode(&traj).unwrap();
    assert_eq!(back.len(), z.len());
    for (a, b) in back.iter().zip(&z) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn hold_guess_stays_at_start() {
    let s = hover(Vec3::new(4.0, 3.0, 1.5), 2.0);
    let g = initial_guess(&s, InitStrategy::Hold);
    for k in g.knots() {
        assert_eq!(k.position, START);
        assert_eq!(k.velocity, Vec3::ZERO);
        assert_eq!(k.acceleration, Vec3::ZERO);
    }
}

#[test]
fn midpoint_guess_settles_on_the_midpoint() {
    let s = hover(Vec3::new(4.0, 3.0, 1.5), 18.0);
    let g = initial_guess(&s, InitStrategy::MidpointTrack);
    assert_eq!(g.knots()[0].position, START);
    for k in g.knots().iter().filter(|k| k.t > 5.0) {
        assert!((k.position - Vec3::new(2.5, 3.0, 1.5)).norm() < 1e-12, "{:?}", k.position);
    }
}

#[test]
fn midpoint_guess_velocity_is_half_the_peer_velocity() {
    let spec = PeerSpec::Line {
        start: Vec3::new(4.0, 1.0, 1.5),
        velocity: Vec3::new(1.0, 0.0, 0.0),
    };
    let mut s = scenario(spec, 10.0, 0.05);
    s.relay_start = Vec3::new(2.5, 2.0, 1.5);
    let g = initial_guess(&s, InitStrategy::MidpointTrack);
    for k in g.knots().iter().filter(|k| k.t > 0.05) {
        assert!((k.velocity - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-9, "{:?}", k.velocity);
    }
}

#[test]
fn midpoint_guess_respects_limits() {
    let s = scenario(PeerSpec::default_lissajous(Vec3::new(4.0, 3.0, 1.5)), 18.0, 0.05);
    let g = initial_guess(&s, InitStrategy::MidpointTrack);
    for k in g.knots() {
        for j in 0..3 {
            assert!(k.velocity.axis(j).abs() <= s.v_max.axis(j));
            assert!(k.acceleration.axis(j).abs() <= s.a_max.axis(j));
        }
    }
}

#[test]
fn exact_model_is_rejected_for_optimization() {
    let s = hover(Vec3::new(4.0, 3.0, 1.5), 1.0);
    assert!(solve(&s, GainModel::Exact, &SolverParams::default()).is_err());
}

#[test]
fn coincident_start_is_a_setup_error_naming_the_step() {
    let mut s = hover(Vec3::new(4.0, 3.0, 1.5), 1.0);
    s.relay_start = BS;
    let params = SolverParams {
        initial_guess: InitStrategy::Hold,
        ..SolverParams::default()
    };
    let err = solve(&s, GainModel::PatternAgnostic, &params).unwrap_err().to_string();
    assert!(err.contains("step 0"), "{err}");
}

#[test]
fn final_cost_matches_trajectory_cost() {
    let s = scenario(PeerSpec::default_lissajous(Vec3::new(4.0, 3.0, 1.5)), 3.0, 0.05);
    for model in [GainModel::Approx, GainModel::PatternAgnostic] {
        let r = solve(&s, model, &s.solver).unwrap();
        let direct = trajectory_cost(r.trajectory(), &s.peer, &s.link_setup(), model, &s.cost).unwrap();
        assert!((direct - r.final_cost).abs() <= 1e-9 * direct, "{direct} vs {}", r.final_cost);
    }
}

#[test]
fn reported_violation_matches_an_independent_audit() {
    let s = scenario(PeerSpec::default_lissajous(Vec3::new(4.0, 3.0, 1.5)), 3.0, 0.05);
    let r = solve(&s, GainModel::Approx, &s.solver).unwrap();
    let audit = feasibility_audit(r.trajectory(), s.v_max, s.a_max, s.solver.intra_samples).unwrap();
    assert_eq!(audit.max_excess(), r.max_constraint_violation);
    assert_eq!(r.feasible, r.max_constraint_violation <= 1e-3);
}

#[test]
fn solve_is_deterministic() {
    let s = scenario(PeerSpec::default_lissajous(Vec3::new(4.0, 3.0, 1.5)), 3.0, 0.05);
    let a = solve(&s, GainModel::Approx, &s.solver).unwrap();
    let b = solve(&s, GainModel::Approx, &s.solver).unwrap();
    assert_eq!(a.trajectory(), b.trajectory());
    assert_eq!(a.cost_history, b.cost_history);
    assert_eq!(a.round_starts, b.round_starts);
    assert_eq!(a.final_cost.to_bits(), b.final_cost.to_bits());
    assert_eq!(a.iterations_used, b.iterations_used);
}

#[test]
fn cost_history_is_monotone_within_rounds() {
    let s = scenario(PeerSpec::default_lissajous(Vec3::new(4.0, 3.0, 1.5)), 3.0, 0.05);
    let r = solve(&s, GainModel::Approx, &s.solver).unwrap();
    let mut bounds = r.round_starts.clone();
    bounds.push(r.cost_history.len());
    for w in bounds.windows(2) {
        let round = &r.cost_history[w[0]..w[1]];
        assert!(round.windows(2).all(|p| p[1] <= p[0]), "{round:?}");
    }
}

#[test]
fn static_peer_matches_grid_search() {
    let s = hover(Vec3::new(4.0, 3.0, 2.5), 18.0);
    for model in [GainModel::Approx, GainModel::PatternAgnostic] {
        let (grid_p, grid_c) = grid_minimizer(&s, model);
        let r = solve(&s, model, &s.solver).unwrap();
        assert!(r.feasible);
        let p = final_position(r.trajectory());
        let solver_c = static_cost(&s, p, model);
        println!("{model:?}: solver {p:?} cost {solver_c}, grid {grid_p:?} cost {grid_c}");
        for j in 0..3 {
            assert!((p.axis(j) - grid_p.axis(j)).abs() <= 0.05, "{model:?}: {p:?} vs {grid_p:?}");
        }
        let cell_variation = (0..3)
            .flat_map(|j| [-0.05, 0.05].map(move |h| (j, h)))
            .map(|(j, h)| {
                let mut q = grid_p;
                q.set_axis(j, q.axis(j) + h);
                (static_cost(&s, q, model) - grid_c).abs()
            })
            .fold(0.0f64, f64::max);
        assert!((solver_c - grid_c).abs() <= cell_variation, "{model:?}: {solver_c} vs {grid_c}");
    }
}

#[test]
fn starting_at_the_optimum_never_raises_the_cost() {
    let s = hover(Vec3::new(4.0, 3.0, 2.5), 6.0);
    let (opt, _) = grid_minimizer(&s, GainModel::PatternAgnostic);
    let mut s = s;
    s.relay_start = opt;
    let guess = initial_guess(&s, InitStrategy::Hold);
    let r = solve_from(&s, GainModel::PatternAgnostic, &s.solver, &guess).unwrap();
    let first = r.cost_history[0];
    assert!(r.cost_history.iter().all(|&c| c <= first), "{:?}", &r.cost_history[..5]);
}

#[test]
fn models_agree_on_horizontal_geometry() {
    let mut s = hover(Vec3::new(4.0, 3.0, 1.5), 6.0);
    s.relay_start = Vec3::new(2.5, 3.0, 1.5);
    let a = solve(&s, GainModel::Approx, &s.solver).unwrap();
    let b = solve(&s, GainModel::PatternAgnostic, &s.solver).unwrap();
    let rel = (a.final_cost - b.final_cost).abs() / b.final_cost;
    assert!(rel <= 1e-6, "{} vs {}", a.final_cost, b.final_cost);
}
