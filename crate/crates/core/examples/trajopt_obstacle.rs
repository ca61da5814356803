//! Joint-space trajectory around a sphere in front of the arm.

use nalgebra::DVector;
use nvflow::kinematics::RobotModel;
use nvflow::trajopt::{audit_clearance, init_trajectory, optimize_trajectory, Obstacle, TrajOptProblem};
use nvflow::geometry::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let robot = RobotModel::panda_fixture();
    let q_start = DVector::from_vec(vec![-0.6, -0.285, 0.0, -1.956, 0.0, 1.571, 0.785]);
    let q_end = DVector::from_vec(vec![0.6, -0.285, 0.0, -1.956, 0.0, 1.571, 0.785]);
    let mut problem = TrajOptProblem::new(robot, q_start, q_end, 41);
    problem.obstacles = vec![Obstacle::sphere(Vec3::new(0.4472, 0.0, 0.465), 0.08)];

    let straight = init_trajectory(&problem.q_start, &problem.q_end, problem.steps)?;
    let before = audit_clearance(&problem.model, &straight, &problem.obstacles, problem.swept_samples);
    let start = std::time::Instant::now();
    let r = optimize_trajectory(&problem)?;
    println!("straight line clearance {:.4} m", before.unwrap_or(f64::INFINITY));
    println!(
        "optimized: clearance {:.4} m (eps {}), cost {:.3} -> {:.3}, {} iterations, {:.2}s",
        r.min_clearance.unwrap_or(f64::INFINITY),
        problem.eps_safe,
        r.initial_cost,
        r.final_cost,
        r.iterations,
        start.elapsed().as_secs_f64()
    );
    println!("terms {:?}", r.costs);
    Ok(())
}
