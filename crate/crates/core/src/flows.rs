//! Shape derivatives along the affine deformation families, the closed-form
//! proof expressions they must match, finite-difference oracles with full
//! remeshing, monotonicity scans, and the rectangle continuous-Steiner-
//! symmetrization pipeline.
//!
//! Derivative identities here are boundary-integral identities, so the
//! normalized assembly uses the Pohozaev boundary forms of `T` and
//! `lambda_1`; symmetric cancellations (square, diamond) are then exact at
//! the discrete level instead of holding only up to the domain/boundary
//! consistency gap.

use crate::error::{Error, Result};
use crate::fem::{
    solve_principal_eigen_on, solve_torsion_on, BoundaryTrace, ElementDegree, FemSpace, FieldRole,
};
use crate::functionals::{side_average_flux, solve_all, torsional_rigidity, FunctionalReport};
use crate::geometry::{
    apply_flow, median_cot_theta, shapes, AffineFlow, CriticalKind, Polygon, SideTag,
    TriangleConfig, Vec2,
};
use crate::mesh::{triangulate, triangulate_levels};
use rayon::prelude::*;
use std::sync::Arc;

/// Mesh size policy for scans and oracles.
#[derive(Clone, Copy, Debug)]
pub enum TargetH {
    Absolute(f64),
    /// Fraction of the (flowed) polygon diameter.
    RelativeToDiameter(f64),
}

impl TargetH {
    pub fn resolve(&self, p: &Polygon) -> f64 {
        match self {
            TargetH::Absolute(h) => *h,
            TargetH::RelativeToDiameter(r) => r * p.diameter(),
        }
    }
}

/// Configuration for scans and finite-difference oracles.
#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub target_h: TargetH,
    pub degree: ElementDegree,
    /// Base step of the derivative oracle; the actual step is
    /// `fd_step * (1 + |t|)`.
    pub fd_step: f64,
    /// Rows whose mesh min-angle falls below this are flagged (radians).
    pub min_angle_flag: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            target_h: TargetH::RelativeToDiameter(0.02),
            degree: ElementDegree::P2,
            fd_step: 1e-3,
            min_angle_flag: 5f64.to_radians(),
        }
    }
}

/// One scan row: functional values and all derivative forms at one time.
#[derive(Clone, Debug)]
pub struct ScanRow {
    pub t: f64,
    pub area: f64,
    pub torsion: f64,
    pub lambda1: f64,
    pub t_norm: f64,
    pub lambda1_norm: f64,
    /// d/dt (T / area^2), boundary form.
    pub d_t_norm: f64,
    /// Same quantity by central finite differences with full remeshing.
    pub d_t_norm_fd: f64,
    /// d/dt (lambda_1 * area), boundary form.
    pub d_lambda1_norm: f64,
    /// Closed proof-expression value where the kind defines one.
    pub proof_form: Option<f64>,
    pub flagged: bool,
    /// Empty when the row is clean; otherwise the flag reason.
    pub note: String,
}

/// `d/dt T(F_t(Omega)) = int |grad u|^2 (eta . nu) ds` over the flowed
/// boundary.
pub fn shape_derivative_t(trace: &BoundaryTrace, f: &AffineFlow, t: f64) -> f64 {
    debug_assert_eq!(trace.role, FieldRole::Torsion);
    trace
        .points
        .iter()
        .map(|p| p.weight * p.flux_sq * f.velocity(t, p.pos).dot(&p.normal))
        .sum()
}

/// `d/dt lambda_1(F_t(Omega)) = -int |grad v|^2 (eta . nu) ds`.
pub fn shape_derivative_lambda1(trace: &BoundaryTrace, f: &AffineFlow, t: f64) -> f64 {
    debug_assert_eq!(trace.role, FieldRole::Eigenfunction);
    -trace
        .points
        .iter()
        .map(|p| p.weight * p.flux_sq * f.velocity(t, p.pos).dot(&p.normal))
        .sum::<f64>()
}

/// Exact `d/dt |F_t(Omega)| = int eta . nu ds`: the velocity is affine, so
/// the endpoint trapezoid rule per edge is exact.
pub fn area_derivative(p: &Polygon, f: &AffineFlow, t: f64) -> Result<f64> {
    if !f.admissible(t) {
        return Err(Error::DegenerateFlowTime {
            t,
            reason: format!("outside admissible range of {}", f.kind_name()),
        });
    }
    let mut total = 0.0;
    for i in 0..p.len() {
        let (a, b) = p.edge(i);
        let len = (b - a).norm();
        let nu = p.outer_normal(i);
        total += 0.5 * len * (f.velocity(t, a).dot(&nu) + f.velocity(t, b).dot(&nu));
    }
    Ok(total)
}

/// Quotient-rule assembly of the normalized derivatives from the raw
/// boundary forms: `d(T/A^2) = (dT A - 2 T dA)/A^3`,
/// `d(lambda A) = dL A + lambda dA`. Uses the Pohozaev forms of T and
/// lambda_1 (see module docs).
pub fn normalized_derivatives(
    report: &FunctionalReport,
    d_t: f64,
    d_lambda: f64,
    d_area: f64,
) -> (f64, f64) {
    let a = report.area;
    let d_t_norm = (d_t * a - 2.0 * report.t_pohozaev * d_area) / (a * a * a);
    let d_lambda_norm = d_lambda * a + report.lambda1_pohozaev * d_area;
    (d_t_norm, d_lambda_norm)
}

/// Evaluate the closed-form proof expression of `d/dt (T/area^2)` for the
/// kinds whose proofs display one. The trace must come from the torsion
/// field on the canonically placed flowed polygon `p_t`.
pub fn proof_form_derivative(
    f: &AffineFlow,
    trace: &BoundaryTrace,
    p_t: &Polygon,
    t: f64,
) -> Result<f64> {
    debug_assert_eq!(trace.role, FieldRole::Torsion);
    let area = p_t.area();
    match f {
        AffineFlow::HeightStretch => {
            // (1/(2(1+t)^3)) int |grad u|^2 (-x, y) . nu ds, divided by the
            // squared area of the area-fixed family.
            let s = 1.0 + t;
            let integral: f64 = trace
                .points
                .iter()
                .map(|p| p.weight * p.flux_sq * Vec2::new(-p.pos.x, p.pos.y).dot(&p.normal))
                .sum();
            let omega0 = area / s;
            Ok(integral / (2.0 * s.powi(3)) / (omega0 * omega0))
        }
        AffineFlow::HeightCompress => {
            let s = 1.0 - t;
            let integral: f64 = trace
                .points
                .iter()
                .map(|p| p.weight * p.flux_sq * Vec2::new(p.pos.x, -p.pos.y).dot(&p.normal))
                .sum();
            let omega0 = area / s;
            Ok(integral / (2.0 * s.powi(3)) / (omega0 * omega0))
        }
        AffineFlow::RhombusDiagonal => {
            // 2 cos(theta_t)/(1+t)^3 int_{CD_t} |grad u|^2 (y - x tan(theta_t)) ds
            // with tan(theta_t) = 1 + t; four-fold symmetry reduces the full
            // boundary to the CD side.
            let s = 1.0 + t;
            let tan_theta = s;
            let cos_theta = 1.0 / (1.0 + tan_theta * tan_theta).sqrt();
            let side = trace.side_index(&SideTag::new("CD"))?;
            let integral: f64 = trace
                .points
                .iter()
                .filter(|p| p.side == side)
                .map(|p| p.weight * p.flux_sq * (p.pos.y - p.pos.x * tan_theta))
                .sum();
            let omega0 = area / s;
            Ok(2.0 * cos_theta * integral / s.powi(3) / (omega0 * omega0))
        }
        AffineFlow::LegStretch { alpha } => {
            // (1/2)(1+t)^-3 sin(beta_t) int_{B_t C} |grad u|^2 (x - y cot(theta_t)) ds
            // written with cot to stay finite when theta_t approaches pi/2.
            let s = 1.0 + t;
            let verts = p_t.vertices();
            let (a_pt, b_pt, c_pt) = (verts[0], verts[1], verts[2]);
            let u = a_pt - b_pt;
            let v = c_pt - b_pt;
            let beta = (u.x * v.y - u.y * v.x).atan2(u.dot(&v)).abs();
            let cot_theta = median_cot_theta(*alpha, beta);
            let side = trace.side_index(&SideTag::new("BC"))?;
            let integral: f64 = trace
                .points
                .iter()
                .filter(|p| p.side == side)
                .map(|p| p.weight * p.flux_sq * (p.pos.x - p.pos.y * cot_theta))
                .sum();
            let omega0 = area / s;
            Ok(0.5 * beta.sin() * integral / s.powi(3) / (omega0 * omega0))
        }
        AffineFlow::RectangleSide => {
            // (avg_{B_t C_t} - avg_{C_t D}) / (2 (1+t)^2 b^2) with b the fixed
            // short-side length; the two averages are per-side means of
            // |grad u|^2.
            let s = 1.0 + t;
            let avg_bc = side_average_flux(trace, &SideTag::new("BC"))?;
            let avg_cd = side_average_flux(trace, &SideTag::new("CD"))?;
            let b = p_t.side_length(&SideTag::new("BC"))?;
            Ok((avg_bc - avg_cd) / (2.0 * s * s * b * b))
        }
        other => Err(Error::UnsupportedKind(other.kind_name().to_owned())),
    }
}

/// Quantity a finite-difference oracle can differentiate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Torsion,
    Lambda1,
    TorsionNormalized,
    Lambda1Normalized,
}

fn quantity_value(
    q: Quantity,
    p: &Polygon,
    levels: usize,
    degree: ElementDegree,
) -> Result<f64> {
    let mesh = Arc::new(triangulate_levels(p, levels)?);
    let space = FemSpace::build(mesh, degree);
    let area = p.area();
    Ok(match q {
        Quantity::Torsion => torsional_rigidity(&solve_torsion_on(&space)?),
        Quantity::TorsionNormalized => {
            torsional_rigidity(&solve_torsion_on(&space)?) / (area * area)
        }
        Quantity::Lambda1 => solve_principal_eigen_on(&space)?.lambda1,
        Quantity::Lambda1Normalized => solve_principal_eigen_on(&space)?.lambda1 * area,
    })
}

/// Central finite difference of the fully re-meshed, re-solved quantity
/// along the flow. The refinement level is frozen from the center time so
/// the discretization error varies smoothly across `t +- h_fd`.
pub fn fd_derivative(
    q: Quantity,
    p: &Polygon,
    f: &AffineFlow,
    t: f64,
    h_fd: f64,
    cfg: &ScanConfig,
) -> Result<f64> {
    let p_t = apply_flow(f, t, p)?;
    let levels = triangulate(&p_t, cfg.target_h.resolve(&p_t))?.levels;
    let plus = apply_flow(f, t + h_fd, p)?;
    let minus = apply_flow(f, t - h_fd, p)?;
    let v_plus = quantity_value(q, &plus, levels, cfg.degree)?;
    let v_minus = quantity_value(q, &minus, levels, cfg.degree)?;
    Ok((v_plus - v_minus) / (2.0 * h_fd))
}

fn scan_row(p: &Polygon, f: &AffineFlow, t: f64, cfg: &ScanConfig) -> Result<ScanRow> {
    let p_t = apply_flow(f, t, p)?;
    let solved = solve_all(&p_t, cfg.target_h.resolve(&p_t), cfg.degree)?;
    let report = &solved.report;
    let d_t = shape_derivative_t(&solved.torsion_trace, f, t);
    let d_l = shape_derivative_lambda1(&solved.eigen_trace, f, t);
    let d_a = area_derivative(&p_t, f, t)?;
    let (d_t_norm, d_lambda1_norm) = normalized_derivatives(report, d_t, d_l, d_a);
    let h_fd = cfg.fd_step * (1.0 + t.abs());
    let d_t_norm_fd = fd_derivative(Quantity::TorsionNormalized, p, f, t, h_fd, cfg)?;
    let proof_form = match proof_form_derivative(f, &solved.torsion_trace, &p_t, t) {
        Ok(v) => Some(v),
        Err(Error::UnsupportedKind(_)) => None,
        Err(e) => return Err(e),
    };
    let flagged = report.mesh_min_angle < cfg.min_angle_flag;
    Ok(ScanRow {
        t,
        area: report.area,
        torsion: report.t_domain,
        lambda1: report.lambda1,
        t_norm: report.t_normalized,
        lambda1_norm: report.lambda1_normalized,
        d_t_norm,
        d_t_norm_fd,
        d_lambda1_norm,
        proof_form,
        flagged,
        note: if flagged { "minangle".to_owned() } else { String::new() },
    })
}

/// One row per grid time, in grid order; rows are independent work items.
/// A row that fails comes back flagged with NaN values and the error text,
/// never aborting the rest of the scan.
pub fn monotonicity_scan(
    p: &Polygon,
    f: &AffineFlow,
    t_grid: &[f64],
    cfg: &ScanConfig,
) -> Vec<ScanRow> {
    t_grid
        .par_iter()
        .map(|&t| {
            scan_row(p, f, t, cfg).unwrap_or_else(|e| ScanRow {
                t,
                area: f64::NAN,
                torsion: f64::NAN,
                lambda1: f64::NAN,
                t_norm: f64::NAN,
                lambda1_norm: f64::NAN,
                d_t_norm: f64::NAN,
                d_t_norm_fd: f64::NAN,
                d_lambda1_norm: f64::NAN,
                proof_form: None,
                flagged: true,
                note: format!("error: {e}"),
            })
        })
        .collect()
}

/// Uniform open grid of `n` interior points of `(lo, hi)`: excludes both
/// endpoints, matching the open-interval theorem statements.
pub fn open_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64)
        .collect()
}

/// Closed-from-above grid `lo + k (hi - lo)/n`, k = 1..n (includes `hi`).
pub fn half_open_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

// ---------------------------------------------------------------------------
// Canonical scan setups
// ---------------------------------------------------------------------------

/// Canonical polygon + flow + critical time for the height-stretch theorem.
pub fn stretch_setup(cfg: &TriangleConfig) -> Result<(Polygon, AffineFlow, f64)> {
    let t1 = crate::geometry::critical_time(cfg, CriticalKind::Stretch)?;
    Ok((cfg.polygon()?, AffineFlow::HeightStretch, t1))
}

/// Canonical polygon + flow + critical time for the height-compress theorem.
pub fn compress_setup(cfg: &TriangleConfig) -> Result<(Polygon, AffineFlow, f64)> {
    let t2 = crate::geometry::critical_time(cfg, CriticalKind::Compress)?;
    Ok((cfg.polygon()?, AffineFlow::HeightCompress, t2))
}

/// Canonical isosceles polygon + leg-stretch flow.
pub fn leg_stretch_setup(alpha: f64) -> Result<(Polygon, AffineFlow)> {
    let cfg = TriangleConfig::isosceles(alpha)?;
    Ok((cfg.polygon()?, AffineFlow::LegStretch { alpha }))
}

/// Unit diamond + diagonal-stretch flow (`q = 1 + t`).
pub fn rhombus_setup() -> (Polygon, AffineFlow) {
    (
        shapes::rhombus(1.0, 0.0).expect("unit diamond is valid"),
        AffineFlow::RhombusDiagonal,
    )
}

/// Unit square + side-stretch flow.
pub fn rectangle_setup() -> (Polygon, AffineFlow) {
    (shapes::unit_square(), AffineFlow::RectangleSide)
}

// ---------------------------------------------------------------------------
// Continuous Steiner symmetrization pipeline for rectangles
// ---------------------------------------------------------------------------

/// State of the rectangle symmetrization family at parameter `s`.
#[derive(Clone, Copy, Debug)]
pub struct CssState {
    pub s: f64,
    /// Distance from the moving corner to the symmetrization line.
    pub lambda: f64,
}

impl CssState {
    pub fn new(s: f64) -> Result<CssState> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::HypothesisViolated(format!(
                "css parameter must lie in (0, 1], got {s}"
            )));
        }
        Ok(CssState {
            s,
            lambda: css_lambda(s),
        })
    }

    pub fn xi(&self, t: f64) -> f64 {
        let s = self.s;
        let l = self.lambda;
        let cos_diag = s * s / (s * s + 1.0 / (s * s)).sqrt();
        (t * t * l * l + s * s + 2.0 * t * l * cos_diag).sqrt()
    }
}

/// `lambda(s) = (1/2) (1 - s^4)/(1 + s^4) sqrt(s^-2 + s^2)`.
pub fn css_lambda(s: f64) -> f64 {
    let s4 = s.powi(4);
    0.5 * (1.0 - s4) / (1.0 + s4) * (1.0 / (s * s) + s * s).sqrt()
}

/// `xi(s; t) = |A_t B_t|`, the side of the sheared rectangle family.
pub fn css_xi(s: f64, t: f64) -> Result<f64> {
    Ok(CssState::new(s)?.xi(t))
}

/// Rectangle `R(x) = [0, x] x [0, 1/x]`.
pub fn css_rectangle(x: f64) -> Result<Polygon> {
    shapes::rectangle(x, 1.0 / x)
}

/// Torsional rigidity of `R(x)` by FEM.
pub fn torsion_of_rectangle(x: f64, cfg: &ScanConfig) -> Result<f64> {
    let p = css_rectangle(x)?;
    let mesh = Arc::new(triangulate(&p, cfg.target_h.resolve(&p))?);
    let space = FemSpace::build(mesh, cfg.degree);
    Ok(torsional_rigidity(&solve_torsion_on(&space)?))
}

#[derive(Clone, Debug)]
pub struct CssRow {
    pub t: f64,
    pub xi: f64,
    /// `min(xi, 1/xi)`: R(xi) and R(1/xi) are congruent; folding into (0, 1]
    /// keeps the comparison inside the monotone branch.
    pub s_prime: f64,
    pub torsion_s: f64,
    pub torsion_s_prime: f64,
}

#[derive(Clone, Debug)]
pub struct CssReport {
    pub s: f64,
    pub rows: Vec<CssRow>,
}

impl CssReport {
    /// Did `T(R(s'))` exceed `T(R(s))` on every row with `t > 0`?
    pub fn all_increased(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.t > 0.0)
            .all(|r| r.torsion_s_prime > r.torsion_s)
    }
}

/// For each `t` in the grid, compute `xi(s; t)`, fold into `(0, 1]`, and
/// compare `T(R(s'))` against `T(R(s))` by FEM.
pub fn css_verify(s: f64, t_grid: &[f64], cfg: &ScanConfig) -> Result<CssReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::HypothesisViolated(format!(
            "css_verify needs s in (0, 1), got {s}"
        )));
    }
    let state = CssState::new(s)?;
    let torsion_s = torsion_of_rectangle(s, cfg)?;
    let rows: Vec<Result<CssRow>> = t_grid
        .par_iter()
        .map(|&t| {
            let xi = state.xi(t);
            let s_prime = if xi > 1.0 { 1.0 / xi } else { xi };
            let torsion_s_prime = torsion_of_rectangle(s_prime, cfg)?;
            Ok(CssRow {
                t,
                xi,
                s_prime,
                torsion_s,
                torsion_s_prime,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CssReport { s, rows })
}

/// Tabulate `T(R(s))` over an s-grid (monotonicity exhibit).
pub fn css_s_table(s_grid: &[f64], cfg: &ScanConfig) -> Result<Vec<(f64, f64)>> {
    let rows: Vec<Result<(f64, f64)>> = s_grid
        .par_iter()
        .map(|&s| Ok((s, torsion_of_rectangle(s, cfg)?)))
        .collect();
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn css_xi_examples() {
        // t = 0 returns s for any s.
        for &s in &[0.3, 0.5, 0.9, 1.0] {
            assert_relative_eq!(css_xi(s, 0.0).unwrap(), s, max_relative = 1e-14);
        }
        // s = 1: lambda vanishes, xi stays 1.
        assert_relative_eq!(css_lambda(1.0), 0.0, epsilon = 1e-15);
        for &t in &[0.2, 0.7, 1.0] {
            assert_relative_eq!(css_xi(1.0, t).unwrap(), 1.0, max_relative = 1e-14);
        }
        // Independent diagonal oracle at s = 0.5, t = 1: the sheared family
        // ends at the rhombus with diagonals d1 = |BD|, d2 = 2 area / d1, and
        // side length (1/2) sqrt(d1^2 + d2^2).
        let s: f64 = 0.5;
        let d1 = (s * s + 1.0 / (s * s)).sqrt();
        let d2 = 2.0 / d1;
        let oracle = 0.5 * (d1 * d1 + d2 * d2).sqrt();
        assert_relative_eq!(css_xi(s, 1.0).unwrap(), oracle, epsilon = 1e-10);
        assert_relative_eq!(oracle, 1.139_207_670_992, max_relative = 1e-10);
    }

    #[test]
    fn css_xi_strictly_increasing_in_t() {
        for &s in &[0.3, 0.5, 0.7, 0.95] {
            let state = CssState::new(s).unwrap();
            let mut prev = state.xi(0.0);
            for k in 1..=20 {
                let xi = state.xi(k as f64 / 20.0);
                assert!(xi > prev, "xi not increasing at s={s}");
                prev = xi;
            }
        }
    }

    #[test]
    fn area_derivative_exact_forms() {
        let sq = shapes::unit_square();
        let a = sq.area();
        for &t in &[0.0, 0.5, 1.5] {
            let p_t = apply_flow(&AffineFlow::HeightStretch, t, &sq).unwrap();
            let da = area_derivative(&p_t, &AffineFlow::HeightStretch, t).unwrap();
            assert_relative_eq!(da, p_t.area() / (1.0 + t), max_relative = 1e-12);
            let _ = a;
        }
        let centered = shapes::centered_square(1.0);
        let da = area_derivative(
            &centered,
            &AffineFlow::Translate {
                direction: Vec2::new(0.3, -1.0),
            },
            0.7,
        )
        .unwrap();
        assert_relative_eq!(da, 0.0, epsilon = 1e-14);
        let da = area_derivative(&centered, &AffineFlow::Scale, 0.0).unwrap();
        assert_relative_eq!(da, 2.0 * centered.area(), max_relative = 1e-12);
    }

    #[test]
    fn grids() {
        let g = open_grid(0.0, 1.0, 9);
        assert_eq!(g.len(), 9);
        assert!(g[0] > 0.0 && g[8] < 1.0);
        assert_relative_eq!(g[4], 0.5, max_relative = 1e-14);
        let h = half_open_grid(0.0, 2.0, 8);
        assert_eq!(h.len(), 8);
        assert_relative_eq!(h[7], 2.0, max_relative = 1e-14);
        assert_relative_eq!(h[0], 0.25, max_relative = 1e-14);
    }
}
