//! Domain and boundary evaluations of the two shape functionals: the
//! torsional rigidity `T` and the first Dirichlet eigenvalue `lambda_1`,
//! their scale-free normalizations, the Pohozaev boundary forms, and
//! per-side gradient statistics.

use crate::error::{Error, Result};
use crate::fem::{
    boundary_flux_sq, solve_principal_eigen_on, solve_torsion_on, BoundaryTrace, ElementDegree,
    FemSpace, Field, FieldRole,
};
use crate::geometry::{Polygon, SideTag};
use crate::mesh::triangulate;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Bundle of functional values for one polygon at one mesh resolution.
#[derive(Clone, Debug)]
pub struct FunctionalReport {
    pub area: f64,
    pub t_domain: f64,
    pub t_pohozaev: f64,
    pub lambda1: f64,
    pub lambda1_pohozaev: f64,
    /// `T / area^2`.
    pub t_normalized: f64,
    /// `lambda_1 * area`.
    pub lambda1_normalized: f64,
    /// Side tag -> average of `|grad u|^2` over the side (torsion field).
    pub side_average: BTreeMap<SideTag, f64>,
    /// `|T_domain - T_pohozaev| / T_domain`.
    pub consistency_gap_t: f64,
    /// Same gap for lambda_1.
    pub consistency_gap_lambda: f64,
    /// Mesh quality info carried along for flagging.
    pub mesh_min_angle: f64,
    pub mesh_h: f64,
}

/// Torsional rigidity as the domain integral of the torsion field.
pub fn torsional_rigidity(field: &Field) -> f64 {
    debug_assert_eq!(field.role, FieldRole::Torsion);
    crate::fem::integrate(field)
}

/// Pohozaev boundary form of `T` at n = 2:
/// `T = (1/4) * int |grad u|^2 (x . nu) ds`.
pub fn pohozaev_t(trace: &BoundaryTrace) -> f64 {
    0.25
        * trace
            .points
            .iter()
            .map(|p| p.weight * p.flux_sq * p.pos.dot(&p.normal))
            .sum::<f64>()
}

/// Pohozaev boundary form of `lambda_1` at n = 2:
/// `lambda_1 = (1/2) * int |grad v|^2 (x . nu) ds` for the L2-normalized
/// eigenfunction.
pub fn pohozaev_lambda1(trace: &BoundaryTrace) -> f64 {
    0.5 * trace
        .points
        .iter()
        .map(|p| p.weight * p.flux_sq * p.pos.dot(&p.normal))
        .sum::<f64>()
}

/// Average of `|grad u|^2` over the side carrying `tag`.
pub fn side_average_flux(trace: &BoundaryTrace, tag: &SideTag) -> Result<f64> {
    let side = trace.side_index(tag)?;
    let mut num = 0.0;
    let mut len = 0.0;
    for p in trace.points.iter().filter(|p| p.side == side) {
        num += p.weight * p.flux_sq;
        len += p.weight;
    }
    if len == 0.0 {
        return Err(Error::UnknownTag(tag.as_str().to_owned()));
    }
    Ok(num / len)
}

/// Integral (not average) of `|grad u|^2` over the side carrying `tag`.
pub fn side_flux_integral(trace: &BoundaryTrace, tag: &SideTag) -> Result<f64> {
    let side = trace.side_index(tag)?;
    Ok(trace
        .points
        .iter()
        .filter(|p| p.side == side)
        .map(|p| p.weight * p.flux_sq)
        .sum())
}

/// Everything `report` produces beyond the plain report struct: the fields
/// and traces, for callers that keep computing with them.
pub struct Solved {
    pub report: FunctionalReport,
    pub space: Arc<FemSpace>,
    pub torsion: Field,
    pub torsion_trace: BoundaryTrace,
    pub eigen_field: Field,
    pub eigen_trace: BoundaryTrace,
}

/// Mesh the polygon, solve both problems, and evaluate every functional.
/// All normalized quantities use the polygon's exact area.
pub fn solve_all(p: &Polygon, target_h: f64, degree: ElementDegree) -> Result<Solved> {
    let mesh = Arc::new(triangulate(p, target_h)?);
    let space = FemSpace::build(mesh, degree);
    let area = p.area();

    let torsion = solve_torsion_on(&space)?;
    let torsion_trace = boundary_flux_sq(&torsion);
    let t_domain = torsional_rigidity(&torsion);
    let t_pohozaev = pohozaev_t(&torsion_trace);

    let eig = solve_principal_eigen_on(&space)?;
    let eigen_trace = boundary_flux_sq(&eig.field);
    let lambda1 = eig.lambda1;
    let lambda1_pohozaev = pohozaev_lambda1(&eigen_trace);

    let mut side_average = BTreeMap::new();
    for tag in &space.mesh.side_tags {
        side_average.insert(tag.clone(), side_average_flux(&torsion_trace, tag)?);
    }

    let report = FunctionalReport {
        area,
        t_domain,
        t_pohozaev,
        lambda1,
        lambda1_pohozaev,
        t_normalized: t_domain / (area * area),
        lambda1_normalized: lambda1 * area,
        side_average,
        consistency_gap_t: (t_domain - t_pohozaev).abs() / t_domain,
        consistency_gap_lambda: (lambda1 - lambda1_pohozaev).abs() / lambda1,
        mesh_min_angle: space.mesh.min_angle,
        mesh_h: space.mesh.h,
    };
    Ok(Solved {
        report,
        space,
        torsion,
        torsion_trace,
        eigen_field: eig.field,
        eigen_trace,
    })
}

/// Plain report without keeping the fields.
pub fn report(p: &Polygon, target_h: f64, degree: ElementDegree) -> Result<FunctionalReport> {
    Ok(solve_all(p, target_h, degree)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use approx::assert_relative_eq;

    #[test]
    fn square_side_averages_symmetric() {
        let solved = solve_all(&shapes::unit_square(), 0.08, ElementDegree::P2).unwrap();
        let avgs: Vec<f64> = solved.report.side_average.values().copied().collect();
        assert_eq!(avgs.len(), 4);
        for w in avgs.windows(2) {
            assert!(
                (w[0] - w[1]).abs() <= 1e-8 * w[0].abs(),
                "asymmetric averages {w:?}"
            );
        }
    }

    #[test]
    fn torsion_scaling_law() {
        // T(alpha * Omega) = alpha^4 T(Omega) checked on the square, alpha = 2.
        let small = solve_all(&shapes::unit_square(), 0.05, ElementDegree::P2).unwrap();
        let big_poly = crate::geometry::normalize_area(&shapes::unit_square(), 4.0).unwrap();
        let big = solve_all(&big_poly, 0.1, ElementDegree::P2).unwrap();
        assert_relative_eq!(
            big.report.t_domain,
            16.0 * small.report.t_domain,
            max_relative = 1e-6
        );
        // Scale invariance of the normalized quantities.
        assert_relative_eq!(
            big.report.t_normalized,
            small.report.t_normalized,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            big.report.lambda1_normalized,
            small.report.lambda1_normalized,
            max_relative = 1e-6
        );
    }

    #[test]
    fn pohozaev_consistency_on_square() {
        let solved = solve_all(&shapes::unit_square(), 0.05, ElementDegree::P2).unwrap();
        assert!(
            solved.report.consistency_gap_t < 1e-3,
            "gap {}",
            solved.report.consistency_gap_t
        );
        assert!(
            solved.report.consistency_gap_lambda < 1e-2,
            "gap {}",
            solved.report.consistency_gap_lambda
        );
    }

    #[test]
    fn unknown_tag_is_reported() {
        let solved = solve_all(&shapes::unit_square(), 0.5, ElementDegree::P2).unwrap();
        assert!(side_average_flux(&solved.torsion_trace, &SideTag::new("nope")).is_err());
    }
}
