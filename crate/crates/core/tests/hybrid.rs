use mpm_hybrid::hybrid::{
    refine, run, ExactPredictor, HybridConfig, Phase, PreviousFramePredictor, SurrogatePredictor, TrajectoryStatus,
    ZeroPredictor,
};
use mpm_hybrid::mpm::{SceneConfig, SceneTemplate, Simulation};
use mpm_hybrid::nn::{ModelConfig, SurrogateModel};
use mpm_hybrid::solvers::{solve, SolveOptions, SolverKind};

fn dam_break(n: usize) -> SceneConfig {
    SceneTemplate::DamBreak.build(n, 1, 0, 500.0)
}

fn config(scene: SceneConfig, n_physical: usize, m_predicted: usize) -> HybridConfig {
    HybridConfig {
        n_physical,
        m_predicted,
        refine_tol: 1e-3,
        refine_solver: SolverKind::GaussSeidel,
        model: None,
        scene,
    }
}

#[test]
fn no_predicted_frames_is_a_physical_run() {
    let cfg = config(dam_break(10), 6, 0);
    let traj = run(&cfg, &mut ZeroPredictor).unwrap();
    assert!(traj.is_complete());
    let mut sim = Simulation::new(cfg.scene.clone()).unwrap();
    for _ in 0..6 {
        sim.step().unwrap();
    }
    assert_eq!(traj.simulation.particles, sim.particles);
    assert_eq!(traj.tensors.len(), 6);
    assert!(traj.records.iter().all(|r| r.phase == Phase::Physical));
}

#[test]
fn exact_prediction_needs_no_refinement() {
    let traj = run(&config(dam_break(12), 2, 8), &mut ExactPredictor).unwrap();
    assert!(traj.is_complete());
    for r in traj.records.iter().filter(|r| r.phase == Phase::Predicted) {
        assert_eq!(r.refine_iters, 0, "frame {}", r.frame);
    }
}

#[test]
fn zero_prediction_reduces_to_cold_solve() {
    let mut sim = Simulation::new(dam_break(12)).unwrap();
    for _ in 0..3 {
        sim.step().unwrap();
    }
    let prep = sim.prepare().unwrap();
    let sys = &prep.system;
    let (_, warm) = refine(&sys.template(), sys, 1e-3, SolverKind::GaussSeidel).unwrap();
    let cold = solve(SolverKind::GaussSeidel, sys.matrix(), &sys.rhs, &vec![0.0; sys.len()], SolveOptions::tol(1e-3)).unwrap();
    assert_eq!(warm.solution, cold.solution);
    assert_eq!(warm.iterations, cold.iterations);
}

#[test]
fn previous_frame_warm_start_beats_cold_start() {
    let warm = run(&config(dam_break(16), 1, 49), &mut PreviousFramePredictor).unwrap();
    let cold = run(&config(dam_break(16), 1, 49), &mut ZeroPredictor).unwrap();
    assert!(warm.is_complete() && cold.is_complete());
    let (w, c) = (warm.total_iterations(Phase::Predicted), cold.total_iterations(Phase::Predicted));
    assert!((w as f64) < 0.7 * c as f64, "warm {w} cold {c}");
}

#[test]
fn hybrid_runs_are_reproducible_and_within_tolerance() {
    let cfg = config(dam_break(12), 4, 12);
    let a = run(&cfg, &mut PreviousFramePredictor).unwrap();
    let b = run(&cfg, &mut PreviousFramePredictor).unwrap();
    assert_eq!(a.tensors, b.tensors);
    assert_eq!(a.simulation.particles, b.simulation.particles);
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.refine_iters, x.residual.to_bits(), x.div_max.to_bits()), (y.refine_iters, y.residual.to_bits(), y.div_max.to_bits()));
        assert!(x.residual <= 1e-3, "frame {} residual {}", x.frame, x.residual);
    }
}

#[test]
fn refined_divergence_stays_near_physical() {
    let hybrid = run(&config(dam_break(16), 4, 26), &mut PreviousFramePredictor).unwrap();
    let physical = run(&config(dam_break(16), 30, 0), &mut ZeroPredictor).unwrap();
    let worst = |t: &mpm_hybrid::hybrid::Trajectory| t.records.iter().map(|r| r.div_max).fold(0.0, f64::max);
    assert!(worst(&hybrid) <= 10.0 * worst(&physical), "{} vs {}", worst(&hybrid), worst(&physical));
}

#[test]
fn untrained_surrogate_still_yields_converged_frames() {
    let model = SurrogateModel::new(ModelConfig::default()).unwrap();
    let mut p = SurrogatePredictor { model };
    let traj = run(&config(dam_break(12), 4, 2), &mut p).unwrap();
    assert!(traj.is_complete(), "{:?}", traj.status);
    assert!(traj.records.iter().all(|r| r.residual <= 1e-3));
}

#[test]
fn short_history_is_rejected() {
    let mut p = SurrogatePredictor {
        model: SurrogateModel::new(ModelConfig::default()).unwrap(),
    };
    assert!(run(&config(dam_break(12), 2, 2), &mut p).is_err());
}

#[test]
fn refinement_failure_truncates_the_trajectory() {
    let mut cfg = config(dam_break(10), 2, 3);
    cfg.refine_tol = 1e-15;
    let traj = run(&cfg, &mut ZeroPredictor).unwrap();
    assert_eq!(traj.records.len(), 2);
    match &traj.status {
        TrajectoryStatus::Failed { frame, message } => {
            assert_eq!(*frame, 2);
            assert!(message.contains("frame 2"), "{message}");
        }
        s => panic!("{s:?}"),
    }
}
