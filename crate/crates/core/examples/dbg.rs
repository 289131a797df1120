use hetvfc::conic::*;
fn main() {
    let mut p = ConicProgram::new();
    let x = p.add_block("x", 1);
    let y = p.add_block("y", 1);
    p.set_objective(x, -2.0);
    p.set_objective(y, -1.0);
    p.set_bounds(x, 0.0, 10.0);
    p.set_bounds(y, 0.0, 10.0);
    p.add_quadratic("xq", vec![(x, 1.0)], vec![], 4.0);
    p.add_quadratic("yq", vec![(y, 1.0)], vec![], 9.0);
    p.add_linear_ineq("couple", vec![(x, 1.0), (y, 1.0)], 4.0);
    let r = solve_ipm(&p, &IpmSettings::default(), None).unwrap();
    println!("status={:?} x={:?} obj={} nt={}", r.status, r.x, r.objective, r.newton_iterations);
}
