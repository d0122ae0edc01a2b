use shapeflow::fem::{ElementDegree, FemSpace};
use shapeflow::geometry::shapes;
use shapeflow::mesh::triangulate;
use shapeflow::sparse::{pcg, IncompleteCholesky, Jacobi};
use std::sync::Arc;
use std::time::Instant;

fn main() {
    for (deg, name) in [(ElementDegree::P1, "P1"), (ElementDegree::P2, "P2")] {
        let poly = shapes::regular_ngon(64, 1.0).unwrap();
        let mesh = Arc::new(triangulate(&poly, 0.05).unwrap());
        let space = FemSpace::build(mesh.clone(), deg);
        let (k, f) = shapeflow::fem::debug_assemble(&space);
        let n = k.n;
        println!("== {name}: {} tris, {} dofs, nnz {}", mesh.num_triangles(), n, k.values.len());
        if let Some(ic) = IncompleteCholesky::new(&k) {
            let mut x = vec![0.0; n];
            let t0 = Instant::now();
            let it = pcg(&k, &f, &mut x, &ic, 1e-10, 100000).unwrap();
            println!("  ic0 pcg:    {} iters, {:?}", it, t0.elapsed());
        } else { println!("  ic0 breakdown"); }
        let jac = Jacobi::new(&k);
        let mut x = vec![0.0; n];
        let t0 = Instant::now();
        let it = pcg(&k, &f, &mut x, &jac, 1e-10, 100000).unwrap();
        println!("  jacobi pcg: {} iters, {:?}", it, t0.elapsed());
    }
}
