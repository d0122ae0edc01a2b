use shapeflow::fem::{solve_torsion, solve_principal_eigen, ElementDegree};
use shapeflow::geometry::shapes;
use shapeflow::mesh::triangulate;
use shapeflow::functionals::torsional_rigidity;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let poly = shapes::regular_ngon(256, 1.0).unwrap();
    let t0 = Instant::now();
    let mesh = Arc::new(triangulate(&poly, 0.05).unwrap());
    println!("mesh: {} tris, h={:.4}, levels={}, {:?}", mesh.num_triangles(), mesh.h, mesh.levels, t0.elapsed());
    let t0 = Instant::now();
    let f = solve_torsion(&mesh, ElementDegree::P2).unwrap();
    let t = torsional_rigidity(&f);
    println!("T = {t:.8} vs pi/8 = {:.8}, err {:.2e}, solve {:?}", std::f64::consts::PI/8.0, (t - std::f64::consts::PI/8.0).abs(), t0.elapsed());

    // eigen on one-level-coarser mesh
    let t0 = Instant::now();
    let mesh4 = Arc::new(triangulate(&poly, 0.1).unwrap());
    println!("mesh4: {} tris, levels={}, {:?}", mesh4.num_triangles(), mesh4.levels, t0.elapsed());
    let t0 = Instant::now();
    let e = solve_principal_eigen(&mesh4, ElementDegree::P2).unwrap();
    println!("lambda1 = {:.6} vs j01^2 = 5.783186, err {:.2e}, iters {}, solve {:?}", e.lambda1, (e.lambda1 - 5.783185962946785f64).abs(), e.iterations, t0.elapsed());
}
