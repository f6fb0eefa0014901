mod common;

use common::{oracle_select, random_planner_scene};
use orientbot_core::parallel::Exec;
use orientbot_core::planner::{
    generate_candidates, load_grid, occupancy_term, plan, score_candidates, select_best, OccupancyGrid,
    PlannerConfig, Point2, Pose2D,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn selection_matches_exhaustive_rescoring() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut viable = 0;
    for scene in 0..200 {
        let (grid, robot, target) = random_planner_scene(&mut rng);
        let bearings = [8, 12, 16, 24][scene % 4];
        let cands = generate_candidates(&target, bearings).unwrap();
        let cfg = PlannerConfig { bearings_per_ring: bearings, ..Default::default() };
        let scored = score_candidates(&cands, robot, &target, &grid, cfg, Exec::Parallel).unwrap();
        let (oracle, winner) = oracle_select(&cands, robot, &target, &grid, 1.0);
        for (s, o) in scored.iter().zip(&oracle) {
            assert_eq!(s.observed_class.index(), o.class, "scene {scene}");
            assert!((s.breakdown.total - o.total).abs() <= 1e-12 * o.total.abs().max(1.0), "scene {scene}");
        }
        let got = select_best(&cands, robot, &target, &grid, cfg, Exec::Sequential).unwrap();
        match (got, winner) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                viable += 1;
                assert_eq!(g.candidate, cands[w], "scene {scene}");
            }
            (g, w) => panic!("scene {scene}: planner {g:?}, oracle {w:?}"),
        }
    }
    assert!(viable > 150, "only {viable} scenes had a viable candidate");
}

#[test]
fn selection_ignores_candidate_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (grid, robot, target) = random_planner_scene(&mut rng);
        let mut cands = generate_candidates(&target, 16).unwrap();
        let cfg = PlannerConfig::default();
        let a = select_best(&cands, robot, &target, &grid, cfg, Exec::Sequential).unwrap();
        cands.shuffle(&mut rng);
        let b = select_best(&cands, robot, &target, &grid, cfg, Exec::Sequential).unwrap();
        assert_eq!(a.map(|s| s.candidate), b.map(|s| s.candidate));
    }
}

#[test]
fn selection_ignores_distance_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (grid, robot, target) = random_planner_scene(&mut rng);
        let cands = generate_candidates(&target, 16).unwrap();
        let base = select_best(&cands, robot, &target, &grid, PlannerConfig::default(), Exec::Sequential).unwrap();
        let c: f64 = rng.gen_range(0.01..100.0);
        let cfg = PlannerConfig { distance_scale: c, ..Default::default() };
        let scaled = select_best(&cands, robot, &target, &grid, cfg, Exec::Sequential).unwrap();
        assert_eq!(base.map(|s| s.candidate), scaled.map(|s| s.candidate), "scale {c}");
    }
}

#[test]
fn sequential_and_parallel_scoring_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let (grid, robot, target) = random_planner_scene(&mut rng);
        let cands = generate_candidates(&target, 16).unwrap();
        let cfg = PlannerConfig::default();
        assert_eq!(
            score_candidates(&cands, robot, &target, &grid, cfg, Exec::Sequential).unwrap(),
            score_candidates(&cands, robot, &target, &grid, cfg, Exec::Parallel).unwrap()
        );
    }
}

#[test]
fn facing_robot_on_empty_grid_selects_frontal_class() {
    let grid = OccupancyGrid::new(200, 200, 0.1, Point2::new(-10.0, -10.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let robot = Point2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let t = Point2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if t.distance(robot) < 0.5 {
            continue;
        }
        let heading = (robot.y - t.y).atan2(robot.x - t.x).to_degrees();
        let target = Pose2D::new(t.x, t.y, heading);
        let trace = plan(robot, &target, &grid, PlannerConfig::default(), Exec::Sequential).unwrap();
        assert_eq!(trace.selection().unwrap().observed_class.index(), 0);
    }
}

#[test]
fn bundled_room_selects_frontal_two_metre_candidate() {
    let grid = load_grid(fixture("empty_room.pgm")).unwrap();
    let target = Pose2D::new(3.0, 0.0, 180.0);
    let robot = Point2::new(0.0, 0.0);
    let trace = plan(robot, &target, &grid, PlannerConfig::default(), Exec::Parallel).unwrap();
    let (_, winner) = oracle_select(
        &trace.candidates.iter().map(|c| c.candidate).collect::<Vec<_>>(),
        robot,
        &target,
        &grid,
        1.0,
    );
    let sel = trace.selection().unwrap();
    assert_eq!(trace.selected, winner);
    assert_eq!(sel.candidate.radius, 2.0);
    assert_eq!(sel.observed_class.index(), 0);
    assert!(sel.candidate.position.distance(Point2::new(1.0, 0.0)) < 1e-12);
}

#[test]
fn occupancy_and_obstacle_terms_are_binary() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let (grid, robot, target) = random_planner_scene(&mut rng);
        for s in plan(robot, &target, &grid, PlannerConfig::default(), Exec::Sequential).unwrap().candidates {
            let b = s.breakdown;
            assert!(b.occupancy == 0.0 || b.occupancy == 1.0);
            assert!(b.obstacle == 0.0 || b.obstacle == 1.0);
            assert_eq!(b.total, b.orientation * b.distance * b.radius * b.occupancy * b.obstacle);
            if grid.contains(s.candidate.position) {
                assert_eq!(occupancy_term(s.candidate.position, robot, &grid).unwrap(), b.occupancy);
            }
        }
    }
}
