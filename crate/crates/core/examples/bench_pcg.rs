use shapeflow::fem::{ElementDegree, FemSpace};
use shapeflow::geometry::shapes;
use shapeflow::mesh::triangulate;
use shapeflow::sparse::{pcg, IncompleteCholesky, Jacobi};
use std::sync::Arc;
use std::time::Instant;

fn main() {
    for levels_target in [0.2, 0.1, 0.05] {
        let poly = shapes::regular_ngon(256, 1.0).unwrap();
        let mesh = Arc::new(triangulate(&poly, levels_target).unwrap());
        let space = FemSpace::build(mesh.clone(), ElementDegree::P2);
        let (k, f) = shapeflow::fem::debug_assemble(&space);
        let n = k.n;
        println!("== target {levels_target}: {} tris, {} interior dofs, nnz {}", mesh.num_triangles(), n, k.values.len());

        let t0 = Instant::now();
        let ic = IncompleteCholesky::new(&k);
        println!("  ic0 factor: {:?} ok={}", t0.elapsed(), ic.is_some());
        if let Some(ic) = ic {
            let mut x = vec![0.0; n];
            let t0 = Instant::now();
            let it = pcg(&k, &f, &mut x, &ic, 1e-10, 100000).unwrap();
            println!("  ic0 pcg:    {} iters, {:?}", it, t0.elapsed());
        }
        let jac = Jacobi::new(&k);
        let mut x = vec![0.0; n];
        let t0 = Instant::now();
        let it = pcg(&k, &f, &mut x, &jac, 1e-10, 100000).unwrap();
        println!("  jacobi pcg: {} iters, {:?}", it, t0.elapsed());
    }
}
