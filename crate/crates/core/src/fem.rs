//! P1/P2 Lagrange finite elements on triangle meshes: the torsion problem
//! `-Laplace u = 1, u = 0 on the boundary`, the principal Dirichlet
//! eigenpair, and boundary traces of the squared gradient.
//!
//! Boundary `|grad u|^2` is taken from the adjacent element's interior
//! gradient at a 2-point Gauss rule per boundary edge; for Dirichlet fields
//! this equals the squared normal derivative up to discretization error.

use crate::error::{Error, Result};
use crate::geometry::{SideTag, Vec2};
use crate::mesh::Mesh;
use crate::sparse::{default_preconditioner, pcg, Csr};
use std::collections::HashMap;
use std::sync::Arc;

/// Polynomial degree of the Lagrange space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementDegree {
    P1,
    P2,
}

impl ElementDegree {
    pub fn from_u8(d: u8) -> Result<Self> {
        match d {
            1 => Ok(ElementDegree::P1),
            2 => Ok(ElementDegree::P2),
            _ => Err(Error::SolveFailure(format!("unsupported degree {d}"))),
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            ElementDegree::P1 => 1,
            ElementDegree::P2 => 2,
        }
    }

    fn dofs_per_tri(self) -> usize {
        match self {
            ElementDegree::P1 => 3,
            ElementDegree::P2 => 6,
        }
    }
}

/// What a solved field represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldRole {
    Torsion,
    Eigenfunction,
}

/// Degree-of-freedom layout for one mesh/degree pair.
///
/// Vertex dofs come first (same indices as mesh vertices); P2 appends one dof
/// per undirected mesh edge, numbered in deterministic triangle-traversal
/// order.
pub struct FemSpace {
    pub mesh: Arc<Mesh>,
    pub degree: ElementDegree,
    /// Per triangle: [v0, v1, v2, m01, m12, m20] (last three unused for P1).
    pub tri_dofs: Vec<[usize; 6]>,
    pub num_dofs: usize,
    pub dof_coords: Vec<Vec2>,
    pub is_boundary: Vec<bool>,
    /// Interior dof ids in increasing order.
    pub interior: Vec<usize>,
    /// Dof -> position in `interior`, `u32::MAX` for boundary dofs.
    pub interior_pos: Vec<u32>,
    /// Per boundary edge (mesh order): adjacent triangle index.
    pub boundary_tri: Vec<usize>,
}

impl FemSpace {
    pub fn build(mesh: Arc<Mesh>, degree: ElementDegree) -> Arc<FemSpace> {
        let nv = mesh.vertices.len();
        let mut tri_dofs = Vec::with_capacity(mesh.triangles.len());
        let mut edge_ids: HashMap<(u32, u32), usize> = HashMap::new();
        let mut edge_coords: Vec<Vec2> = Vec::new();
        let mut edge_tri: HashMap<(u32, u32), usize> = HashMap::new();
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let mut dofs = [0usize; 6];
            dofs[..3].copy_from_slice(t);
            for (k, (a, b)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                .into_iter()
                .enumerate()
            {
                let key = ((a.min(b)) as u32, (a.max(b)) as u32);
                edge_tri.insert(key, ti);
                let id = match edge_ids.get(&key) {
                    Some(&id) => id,
                    None => {
                        let id = edge_ids.len();
                        edge_ids.insert(key, id);
                        edge_coords.push(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
                        id
                    }
                };
                dofs[3 + k] = nv + id;
            }
            tri_dofs.push(dofs);
        }
        let num_dofs = match degree {
            ElementDegree::P1 => nv,
            ElementDegree::P2 => nv + edge_ids.len(),
        };
        let mut dof_coords = mesh.vertices.clone();
        if degree == ElementDegree::P2 {
            dof_coords.extend_from_slice(&edge_coords);
        }
        let mut is_boundary = vec![false; num_dofs];
        let mut boundary_tri = Vec::with_capacity(mesh.boundary.len());
        for e in &mesh.boundary {
            let [a, b] = e.v;
            is_boundary[a] = true;
            is_boundary[b] = true;
            let key = ((a.min(b)) as u32, (a.max(b)) as u32);
            if degree == ElementDegree::P2 {
                is_boundary[nv + edge_ids[&key]] = true;
            }
            boundary_tri.push(edge_tri[&key]);
        }
        // Interior dofs in reverse Cuthill-McKee order: shrinks the factor
        // envelope for the IC(0) preconditioner and keeps matvec accesses
        // local.
        let interior = rcm_interior_order(num_dofs, &is_boundary, &tri_dofs, degree);
        let mut interior_pos = vec![u32::MAX; num_dofs];
        for (p, &d) in interior.iter().enumerate() {
            interior_pos[d] = p as u32;
        }
        Arc::new(FemSpace {
            mesh,
            degree,
            tri_dofs,
            num_dofs,
            dof_coords,
            is_boundary,
            interior,
            interior_pos,
            boundary_tri,
        })
    }

}

/// Reverse Cuthill-McKee ordering of the interior dofs, with element
/// couplings as the graph. Deterministic: BFS from a pseudo-peripheral
/// min-degree start, neighbors visited by (degree, index).
fn rcm_interior_order(
    num_dofs: usize,
    is_boundary: &[bool],
    tri_dofs: &[[usize; 6]],
    degree: ElementDegree,
) -> Vec<usize> {
    let nd = degree.dofs_per_tri();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for t in tri_dofs {
        for a in 0..nd {
            if is_boundary[t[a]] {
                continue;
            }
            for b in 0..nd {
                if a != b && !is_boundary[t[b]] {
                    pairs.push((t[a] as u32, t[b] as u32));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let interior: Vec<usize> = (0..num_dofs).filter(|&i| !is_boundary[i]).collect();
    let mut local = vec![u32::MAX; num_dofs];
    for (p, &d) in interior.iter().enumerate() {
        local[d] = p as u32;
    }
    let n = interior.len();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (a, b) in pairs {
        adj[local[a as usize] as usize].push(local[b as usize]);
    }
    for row in adj.iter_mut() {
        row.sort_unstable();
    }
    let degree_of = |i: usize| adj[i].len() as u32;

    let bfs = |start: usize, visited: &mut [bool], order: &mut Vec<u32>| {
        let base = order.len();
        visited[start] = true;
        order.push(start as u32);
        let mut head = base;
        while head < order.len() {
            let u = order[head] as usize;
            head += 1;
            let mut next: Vec<u32> = adj[u]
                .iter()
                .copied()
                .filter(|&v| !visited[v as usize])
                .collect();
            next.sort_unstable_by_key(|&v| (degree_of(v as usize), v));
            for v in next {
                if !visited[v as usize] {
                    visited[v as usize] = true;
                    order.push(v);
                }
            }
        }
    };

    let mut order: Vec<u32> = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for i in 0..n {
        if visited[i] {
            continue;
        }
        // Pseudo-peripheral start: BFS once from the component's min-degree
        // node, restart from the farthest node found.
        let mut probe = vec![false; n];
        let mut comp: Vec<u32> = Vec::new();
        bfs(i, &mut probe, &mut comp);
        let mut start = i;
        let mut best_deg = u32::MAX;
        for &c in &comp {
            let d = degree_of(c as usize);
            if d < best_deg {
                best_deg = d;
                start = c as usize;
            }
        }
        let mut probe2 = vec![false; n];
        let mut pass = Vec::new();
        bfs(start, &mut probe2, &mut pass);
        let far = *pass.last().unwrap() as usize;
        bfs(far, &mut visited, &mut order);
    }
    order.reverse();
    order.into_iter().map(|p| interior[p as usize]).collect()
}

/// Finite-element solution bound to its space.
pub struct Field {
    pub space: Arc<FemSpace>,
    pub role: FieldRole,
    /// One value per dof; Dirichlet dofs are exactly zero.
    pub values: Vec<f64>,
}

/// Principal Dirichlet eigenpair.
pub struct EigenResult {
    pub lambda1: f64,
    pub field: Field,
    /// `||K v - lambda M v|| / ||M v||` in the discrete 2-norms.
    pub residual: f64,
    pub iterations: usize,
}

/// One boundary quadrature record.
#[derive(Clone, Debug)]
pub struct TracePoint {
    pub pos: Vec2,
    pub normal: Vec2,
    pub flux_sq: f64,
    pub weight: f64,
    /// Index into [`BoundaryTrace::side_tags`].
    pub side: usize,
}

/// Squared-gradient samples along the whole boundary; the sole input to all
/// boundary integrals.
#[derive(Clone, Debug)]
pub struct BoundaryTrace {
    pub points: Vec<TracePoint>,
    pub side_tags: Vec<SideTag>,
    pub role: FieldRole,
}

impl BoundaryTrace {
    pub fn side_index(&self, tag: &SideTag) -> Result<usize> {
        self.side_tags
            .iter()
            .position(|t| t == tag)
            .ok_or_else(|| Error::UnknownTag(tag.as_str().to_owned()))
    }
}

// ---------------------------------------------------------------------------
// Reference element
// ---------------------------------------------------------------------------

/// Degree-4 6-point rule in barycentric coordinates; weights sum to one.
const QUAD_DEG4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.108_103_018_168_070;
    const B1: f64 = 0.445_948_490_915_965;
    const W1: f64 = 0.223_381_589_678_011;
    const A2: f64 = 0.816_847_572_980_459;
    const B2: f64 = 0.091_576_213_509_771;
    const W2: f64 = 0.109_951_743_655_322;
    [
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

fn shape_values(degree: ElementDegree, l: [f64; 3]) -> [f64; 6] {
    match degree {
        ElementDegree::P1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
        ElementDegree::P2 => [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ],
    }
}

/// Gradients of the shape functions given the (constant) barycentric
/// gradients of the triangle.
fn shape_gradients(degree: ElementDegree, l: [f64; 3], gl: [Vec2; 3]) -> [Vec2; 6] {
    match degree {
        ElementDegree::P1 => [gl[0], gl[1], gl[2], Vec2::zeros(), Vec2::zeros(), Vec2::zeros()],
        ElementDegree::P2 => [
            gl[0] * (4.0 * l[0] - 1.0),
            gl[1] * (4.0 * l[1] - 1.0),
            gl[2] * (4.0 * l[2] - 1.0),
            4.0 * (gl[0] * l[1] + gl[1] * l[0]),
            4.0 * (gl[1] * l[2] + gl[2] * l[1]),
            4.0 * (gl[2] * l[0] + gl[0] * l[2]),
        ],
    }
}

/// Barycentric gradients and area of a triangle.
fn barycentric_gradients(p: [Vec2; 3]) -> ([Vec2; 3], f64) {
    let det = (p[1] - p[0]).x * (p[2] - p[0]).y - (p[1] - p[0]).y * (p[2] - p[0]).x;
    let area = 0.5 * det;
    let g = [
        Vec2::new(p[1].y - p[2].y, p[2].x - p[1].x) / det,
        Vec2::new(p[2].y - p[0].y, p[0].x - p[2].x) / det,
        Vec2::new(p[0].y - p[1].y, p[1].x - p[0].x) / det,
    ];
    (g, area)
}

fn barycentric_coords(p: [Vec2; 3], x: Vec2) -> [f64; 3] {
    let area = |a: Vec2, b: Vec2, c: Vec2| 0.5 * ((b - a).x * (c - a).y - (b - a).y * (c - a).x);
    let total = area(p[0], p[1], p[2]);
    [
        area(x, p[1], p[2]) / total,
        area(p[0], x, p[2]) / total,
        area(p[0], p[1], x) / total,
    ]
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

struct System {
    stiffness: Csr,
    mass: Option<Csr>,
    load: Vec<f64>,
}

/// Assemble the interior-dof stiffness (and optionally mass) system.
fn assemble(space: &FemSpace, with_mass: bool) -> System {
    let nd = space.degree.dofs_per_tri();
    let ni = space.interior.len();
    // Sparsity pattern: interior-interior couplings of every element.
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(space.tri_dofs.len() * nd * nd);
    for t in &space.tri_dofs {
        for a in 0..nd {
            let ia = space.interior_pos[t[a]];
            if ia == u32::MAX {
                continue;
            }
            for b in 0..nd {
                let ib = space.interior_pos[t[b]];
                if ib == u32::MAX {
                    continue;
                }
                pairs.push((ia, ib));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); ni];
    for (i, j) in pairs {
        adj[i as usize].push(j);
    }
    let mut stiffness = Csr::from_adjacency(&adj);
    let mut mass = with_mass.then(|| Csr::from_adjacency(&adj));
    let mut load = vec![0.0; ni];

    for (ti, t) in space.tri_dofs.iter().enumerate() {
        let tri = space.mesh.triangles[ti];
        let p = [
            space.mesh.vertices[tri[0]],
            space.mesh.vertices[tri[1]],
            space.mesh.vertices[tri[2]],
        ];
        let (gl, area) = barycentric_gradients(p);
        let mut ke = [[0.0f64; 6]; 6];
        let mut me = [[0.0f64; 6]; 6];
        let mut fe = [0.0f64; 6];
        for (lq, w) in QUAD_DEG4 {
            let n = shape_values(space.degree, lq);
            let g = shape_gradients(space.degree, lq, gl);
            let wq = w * area;
            for a in 0..nd {
                fe[a] += wq * n[a];
                for b in 0..nd {
                    ke[a][b] += wq * g[a].dot(&g[b]);
                    if with_mass {
                        me[a][b] += wq * n[a] * n[b];
                    }
                }
            }
        }
        for a in 0..nd {
            let ia = space.interior_pos[t[a]];
            if ia == u32::MAX {
                continue;
            }
            load[ia as usize] += fe[a];
            for b in 0..nd {
                let ib = space.interior_pos[t[b]];
                if ib == u32::MAX {
                    continue;
                }
                stiffness.add(ia as usize, ib as usize, ke[a][b]);
                if let Some(m) = mass.as_mut() {
                    m.add(ia as usize, ib as usize, me[a][b]);
                }
            }
        }
    }
    System {
        stiffness,
        mass,
        load,
    }
}

#[doc(hidden)]
pub fn debug_assemble(space: &FemSpace) -> (Csr, Vec<f64>) {
    let sys = assemble(space, false);
    (sys.stiffness, sys.load)
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

/// Relative residual for the torsion linear solve.
const TORSION_TOL: f64 = 1e-10;
/// Relative Rayleigh-quotient increment at which inverse iteration stops.
const EIGEN_RQ_TOL: f64 = 1e-12;
/// Discrete eigen residual bound.
const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
const EIGEN_MAX_ITER: usize = 500;
const PCG_MAX_ITER: usize = 50_000;

/// Solve the torsion problem on a mesh.
pub fn solve_torsion(mesh: &Arc<Mesh>, degree: ElementDegree) -> Result<Field> {
    solve_torsion_on(&FemSpace::build(mesh.clone(), degree))
}

/// Preconditioner choice: IC(0) pays off on the P1 matrices (M-matrices);
/// on P2 stiffness the positive off-diagonal couplings make the zero-fill
/// factor weaker than plain diagonal scaling.
fn preconditioner_for(
    degree: ElementDegree,
    a: &Csr,
) -> Box<dyn crate::sparse::Preconditioner + Send + Sync> {
    match degree {
        ElementDegree::P1 => default_preconditioner(a),
        ElementDegree::P2 => Box::new(crate::sparse::Jacobi::new(a)),
    }
}

/// Solve the torsion problem on a prebuilt space.
pub fn solve_torsion_on(space: &Arc<FemSpace>) -> Result<Field> {
    let sys = assemble(space, false);
    let ni = space.interior.len();
    if ni == 0 {
        return Err(Error::SolveFailure("mesh has no interior dofs".into()));
    }
    let prec = preconditioner_for(space.degree, &sys.stiffness);
    let mut u = vec![0.0; ni];
    pcg(
        &sys.stiffness,
        &sys.load,
        &mut u,
        prec.as_ref(),
        TORSION_TOL,
        PCG_MAX_ITER,
    )?;
    let mut values = vec![0.0; space.num_dofs];
    for (p, &d) in space.interior.iter().enumerate() {
        values[d] = u[p];
    }
    let min_interior = space
        .interior
        .iter()
        .map(|&d| values[d])
        .fold(f64::INFINITY, f64::min);
    if !(min_interior > 0.0) {
        return Err(Error::SolveFailure(format!(
            "torsion maximum principle violated: min interior value {min_interior:.3e}"
        )));
    }
    Ok(Field {
        space: space.clone(),
        role: FieldRole::Torsion,
        values,
    })
}

/// Smallest Dirichlet eigenpair by inverse power iteration on the
/// stiffness/mass pair, normalized to unit L2 norm, positive interior sign.
pub fn solve_principal_eigen(mesh: &Arc<Mesh>, degree: ElementDegree) -> Result<EigenResult> {
    solve_principal_eigen_on(&FemSpace::build(mesh.clone(), degree))
}

pub fn solve_principal_eigen_on(space: &Arc<FemSpace>) -> Result<EigenResult> {
    let sys = assemble(space, true);
    let k = &sys.stiffness;
    let m = sys.mass.as_ref().expect("mass assembled");
    let ni = space.interior.len();
    if ni == 0 {
        return Err(Error::SolveFailure("mesh has no interior dofs".into()));
    }
    let prec = preconditioner_for(space.degree, k);

    let m_norm = |v: &[f64], tmp: &mut Vec<f64>| -> f64 {
        m.matvec(v, tmp);
        v.iter().zip(tmp.iter()).map(|(a, b)| a * b).sum::<f64>().sqrt()
    };

    let mut x = vec![1.0; ni];
    let mut tmp = vec![0.0; ni];
    let nx = m_norm(&x, &mut tmp);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut y = vec![0.0; ni];
    let mut mx = vec![0.0; ni];
    let mut lambda = f64::NAN;
    let mut residual = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    // Inexact inverse iteration: inner solves tighten with the Rayleigh
    // increments; the final acceptance is the true discrete residual.
    let mut inner_tol = 1e-6;
    for it in 1..=EIGEN_MAX_ITER {
        iterations = it;
        m.matvec(&x, &mut mx);
        // Warm start: y ~ x / lambda from the previous cycle.
        if lambda.is_finite() && lambda > 0.0 {
            for i in 0..ni {
                y[i] = x[i] / lambda;
            }
        } else {
            y.fill(0.0);
        }
        pcg(k, &mx, &mut y, prec.as_ref(), inner_tol, PCG_MAX_ITER)?;
        // Rayleigh quotient of y: y'Ky / y'My with Ky = Mx up to solver tol.
        let ymx: f64 = y.iter().zip(mx.iter()).map(|(a, b)| a * b).sum();
        let ymy = {
            m.matvec(&y, &mut tmp);
            y.iter().zip(tmp.iter()).map(|(a, b)| a * b).sum::<f64>()
        };
        let lambda_new = ymx / ymy;
        let delta = (lambda_new - lambda).abs();
        lambda = lambda_new;
        let ny = ymy.sqrt();
        for i in 0..ni {
            x[i] = y[i] / ny;
        }
        if delta.is_finite() {
            inner_tol = (1e-2 * delta / lambda).clamp(1e-13, 1e-6);
        }
        if delta <= EIGEN_RQ_TOL * lambda {
            // Discrete residual check in the 2-norms.
            k.matvec(&x, &mut tmp);
            m.matvec(&x, &mut mx);
            let mut rr = 0.0;
            let mut mm = 0.0;
            for i in 0..ni {
                let r = tmp[i] - lambda * mx[i];
                rr += r * r;
                mm += mx[i] * mx[i];
            }
            residual = (rr / mm).sqrt();
            if residual <= EIGEN_RESIDUAL_TOL {
                converged = true;
                break;
            }
            inner_tol = (inner_tol * 1e-2).max(1e-13);
        }
    }
    if !converged {
        return Err(Error::SolveFailure(format!(
            "inverse iteration did not converge in {EIGEN_MAX_ITER} iterations \
             (lambda {lambda:.6e}, residual {residual:.3e})"
        )));
    }

    let mut values = vec![0.0; space.num_dofs];
    for (p, &d) in space.interior.iter().enumerate() {
        values[d] = x[p];
    }
    // Fix the sign: positive at the dof nearest the domain centroid.
    let centroid = mesh_centroid(&space.mesh);
    let mut best = space.interior[0];
    let mut best_d = f64::INFINITY;
    for &d in &space.interior {
        let dist = (space.dof_coords[d] - centroid).norm_squared();
        if dist < best_d {
            best_d = dist;
            best = d;
        }
    }
    if values[best] < 0.0 {
        values.iter_mut().for_each(|v| *v = -*v);
    }
    let min_interior = space
        .interior
        .iter()
        .map(|&d| values[d])
        .fold(f64::INFINITY, f64::min);
    if !(min_interior > 0.0) {
        return Err(Error::SolveFailure(format!(
            "eigenfunction changes sign: min interior value {min_interior:.3e}"
        )));
    }
    Ok(EigenResult {
        lambda1: lambda,
        field: Field {
            space: space.clone(),
            role: FieldRole::Eigenfunction,
            values,
        },
        residual,
        iterations,
    })
}

fn mesh_centroid(mesh: &Mesh) -> Vec2 {
    let mut c = Vec2::zeros();
    let mut total = 0.0;
    for t in &mesh.triangles {
        let p = [
            mesh.vertices[t[0]],
            mesh.vertices[t[1]],
            mesh.vertices[t[2]],
        ];
        let a = 0.5 * ((p[1] - p[0]).x * (p[2] - p[0]).y - (p[1] - p[0]).y * (p[2] - p[0]).x);
        c += a * (p[0] + p[1] + p[2]) / 3.0;
        total += a;
    }
    c / total
}

// ---------------------------------------------------------------------------
// Boundary traces
// ---------------------------------------------------------------------------

/// Two-point Gauss rule positions on [0, 1].
const EDGE_GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Squared boundary gradient sampled at a 2-point Gauss rule per boundary
/// edge, taken from the adjacent element's gradient.
pub fn boundary_flux_sq(field: &Field) -> BoundaryTrace {
    let space = &field.space;
    let mesh = &space.mesh;
    let mut points = Vec::with_capacity(2 * mesh.boundary.len());
    for (ei, e) in mesh.boundary.iter().enumerate() {
        let p0 = mesh.vertices[e.v[0]];
        let p1 = mesh.vertices[e.v[1]];
        let tangent = p1 - p0;
        let len = tangent.norm();
        let normal = Vec2::new(tangent.y, -tangent.x) / len;
        let ti = space.boundary_tri[ei];
        for xi in EDGE_GAUSS {
            let pos = p0 + xi * tangent;
            let g = element_gradient(field, ti, pos);
            points.push(TracePoint {
                pos,
                normal,
                flux_sq: g.norm_squared(),
                weight: 0.5 * len,
                side: e.side,
            });
        }
    }
    BoundaryTrace {
        points,
        side_tags: mesh.side_tags.clone(),
        role: field.role,
    }
}

/// Gradient of the field inside triangle `ti` at point `pos`.
pub fn element_gradient(field: &Field, ti: usize, pos: Vec2) -> Vec2 {
    let space = &field.space;
    let tri = space.mesh.triangles[ti];
    let p = [
        space.mesh.vertices[tri[0]],
        space.mesh.vertices[tri[1]],
        space.mesh.vertices[tri[2]],
    ];
    let (gl, _) = barycentric_gradients(p);
    let l = barycentric_coords(p, pos);
    let g = shape_gradients(space.degree, l, gl);
    let t = &space.tri_dofs[ti];
    let mut grad = Vec2::zeros();
    for a in 0..space.degree.dofs_per_tri() {
        grad += g[a] * field.values[t[a]];
    }
    grad
}

/// `|grad u|` at a specific point of a tagged polygon side, evaluated from
/// the adjacent element of the boundary sub-edge containing the point.
pub fn boundary_gradient_at(field: &Field, tag: &SideTag, point: Vec2) -> Result<f64> {
    let space = &field.space;
    let mesh = &space.mesh;
    let side = mesh.tag_index(tag)?;
    let mut best: Option<(f64, usize, Vec2)> = None;
    for (ei, e) in mesh.boundary.iter().enumerate() {
        if e.side != side {
            continue;
        }
        let p0 = mesh.vertices[e.v[0]];
        let p1 = mesh.vertices[e.v[1]];
        let t = p1 - p0;
        let s = ((point - p0).dot(&t) / t.norm_squared()).clamp(0.0, 1.0);
        let proj = p0 + s * t;
        let dist = (point - proj).norm();
        if best.as_ref().map_or(true, |(d, _, _)| dist < *d) {
            best = Some((dist, space.boundary_tri[ei], proj));
        }
    }
    let (_, ti, proj) = best.ok_or_else(|| Error::UnknownTag(tag.as_str().to_owned()))?;
    Ok(element_gradient(field, ti, proj).norm())
}

/// Integral of the field over the mesh (exact quadrature of the FE function).
pub fn integrate(field: &Field) -> f64 {
    let space = &field.space;
    let nd = space.degree.dofs_per_tri();
    let mut total = 0.0;
    for (ti, t) in space.tri_dofs.iter().enumerate() {
        let tri = space.mesh.triangles[ti];
        let p = [
            space.mesh.vertices[tri[0]],
            space.mesh.vertices[tri[1]],
            space.mesh.vertices[tri[2]],
        ];
        let (_, area) = barycentric_gradients(p);
        for (lq, w) in QUAD_DEG4 {
            let n = shape_values(space.degree, lq);
            let mut v = 0.0;
            for a in 0..nd {
                v += n[a] * field.values[t[a]];
            }
            total += w * area * v;
        }
    }
    total
}

/// L2 norm squared of the field.
pub fn l2_norm_sq(field: &Field) -> f64 {
    let space = &field.space;
    let nd = space.degree.dofs_per_tri();
    let mut total = 0.0;
    for (ti, t) in space.tri_dofs.iter().enumerate() {
        let tri = space.mesh.triangles[ti];
        let p = [
            space.mesh.vertices[tri[0]],
            space.mesh.vertices[tri[1]],
            space.mesh.vertices[tri[2]],
        ];
        let (_, area) = barycentric_gradients(p);
        for (lq, w) in QUAD_DEG4 {
            let n = shape_values(space.degree, lq);
            let mut v = 0.0;
            for a in 0..nd {
                v += n[a] * field.values[t[a]];
            }
            total += w * area * v * v;
        }
    }
    total
}

/// Dirichlet energy of the field.
pub fn dirichlet_energy(field: &Field) -> f64 {
    let space = &field.space;
    let nd = space.degree.dofs_per_tri();
    let mut total = 0.0;
    for (ti, t) in space.tri_dofs.iter().enumerate() {
        let tri = space.mesh.triangles[ti];
        let p = [
            space.mesh.vertices[tri[0]],
            space.mesh.vertices[tri[1]],
            space.mesh.vertices[tri[2]],
        ];
        let (gl, area) = barycentric_gradients(p);
        for (lq, w) in QUAD_DEG4 {
            let g = shape_gradients(space.degree, lq, gl);
            let mut v = Vec2::zeros();
            for a in 0..nd {
                v += g[a] * field.values[t[a]];
            }
            total += w * area * v.norm_squared();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use crate::mesh::triangulate;
    use approx::assert_relative_eq;

    fn square_space(target_h: f64, degree: ElementDegree) -> Arc<FemSpace> {
        let mesh = Arc::new(triangulate(&shapes::unit_square(), target_h).unwrap());
        FemSpace::build(mesh, degree)
    }

    #[test]
    fn p2_dof_counts() {
        let space = square_space(0.5, ElementDegree::P2);
        // 16 triangles: V = 13, E = 28 -> 41 dofs.
        assert_eq!(space.mesh.num_triangles(), 16);
        assert_eq!(space.num_dofs, 41);
    }

    #[test]
    fn trace_weights_sum_to_side_lengths() {
        let mesh = Arc::new(triangulate(&shapes::rectangle(2.0, 1.0).unwrap(), 0.3).unwrap());
        let field = solve_torsion(&mesh, ElementDegree::P2).unwrap();
        let trace = boundary_flux_sq(&field);
        let mut sums = vec![0.0; trace.side_tags.len()];
        for p in &trace.points {
            sums[p.side] += p.weight;
            assert!(p.flux_sq >= 0.0);
        }
        let expect = [2.0, 1.0, 2.0, 1.0];
        for (s, e) in sums.iter().zip(expect) {
            assert_relative_eq!(*s, e, max_relative = 1e-12);
        }
    }

    #[test]
    fn coarse_square_torsion_value() {
        let mesh = Arc::new(triangulate(&shapes::unit_square(), 0.1).unwrap());
        let field = solve_torsion(&mesh, ElementDegree::P2).unwrap();
        let t = integrate(&field);
        assert_relative_eq!(t, 0.035144, max_relative = 2e-3);
    }

    #[test]
    fn square_eigenvalue_p2() {
        let mesh = Arc::new(triangulate(&shapes::unit_square(), 0.08).unwrap());
        let eig = solve_principal_eigen(&mesh, ElementDegree::P2).unwrap();
        let expected = 2.0 * std::f64::consts::PI.powi(2);
        assert!((eig.lambda1 - expected).abs() < 0.05, "{}", eig.lambda1);
        assert!(eig.residual <= 1e-8);
        // Unit L2 norm and positivity.
        assert_relative_eq!(l2_norm_sq(&eig.field), 1.0, max_relative = 1e-10);
        // Rayleigh quotient reproduces lambda.
        assert_relative_eq!(
            dirichlet_energy(&eig.field) / l2_norm_sq(&eig.field),
            eig.lambda1,
            max_relative = 1e-10
        );
    }

    #[test]
    fn p1_converges_to_p2_torsion() {
        let mesh = Arc::new(triangulate(&shapes::unit_square(), 0.05).unwrap());
        let f1 = solve_torsion(&mesh, ElementDegree::P1).unwrap();
        let t1 = integrate(&f1);
        assert_relative_eq!(t1, 0.035144, max_relative = 1e-2);
    }

    #[test]
    fn degenerate_degree_rejected() {
        assert!(ElementDegree::from_u8(3).is_err());
    }
}
