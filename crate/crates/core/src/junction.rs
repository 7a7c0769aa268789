//! Zero-length waveguide junction containing one full-height conducting
//! cylindrical post: projection-system assembly and least-squares solution
//! for its generalized scattering matrix.
//!
//! The continuity conditions (tangential E and H across the aperture
//! segments, vanishing tangential E on the post wall) are projected onto the
//! hat basis of each boundary segment. Stacking the projections gives the
//! overdetermined block system `L b = R a`; the scattering matrix is the
//! least-squares solution of `L S = R`.

use std::f64::consts::PI;

use faer::{c64, Mat};

use crate::basis::{
    cylinder_wall_integral, sine_hat_integral, ArcGeometry, ExpSign, SegmentGrid, SineKernel,
};
use crate::error::{Error, Result};
use crate::modes::Waveguide;
use crate::quadrature::GaussLegendre;
use crate::smatrix::ScatteringMatrix;

/// Gauss-Legendre order per hat subinterval for the post-wall integrals.
pub const DEFAULT_QUADRATURE_ORDER: usize = 12;
/// Default ratio of active basis functions to modes in the sizing policy.
pub const DEFAULT_BASIS_FACTOR: f64 = 1.6;
/// Smallest subinterval count the sizing policy assigns to any segment.
pub const MIN_SUBINTERVALS: usize = 4;

/// One conducting cylindrical post of radius `r` whose center sits at
/// distance `h` from the `x = 0` wall, in a zero-length junction. The post
/// spans the full height of the guide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostJunction {
    pub wg: Waveguide,
    pub h: f64,
    pub r: f64,
}

impl PostJunction {
    pub fn new(wg: Waveguide, h: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!(
                "post radius must be positive, got {r}"
            )));
        }
        if !(r < h) || !(r < wg.a - h) {
            return Err(Error::invalid(format!(
                "post (h = {h}, r = {r}) must lie strictly inside the guide of width {}",
                wg.a
            )));
        }
        Ok(PostJunction { wg, h, r })
    }

    /// Aperture segment between the `x = 0` wall and the post.
    pub fn segment_d(&self) -> (f64, f64) {
        (0.0, self.h - self.r)
    }

    /// Aperture segment between the post and the `x = a` wall.
    pub fn segment_u(&self) -> (f64, f64) {
        (self.h + self.r, self.wg.a)
    }

    /// Port-I half of the post wall: `x = h + r sin(phi)`,
    /// `z = r cos(phi)`, `phi` in `[pi/2, 3pi/2]`.
    pub fn arc_port_one(&self) -> ArcGeometry {
        ArcGeometry {
            x_center: self.h,
            x_amp: self.r,
            z_amp: self.r,
        }
    }

    /// Port-II half in primed coordinates: `x' = a - h - r sin(phi)`,
    /// `z' = -r cos(phi)`, `phi` in `[-pi/2, pi/2]`.
    pub fn arc_port_two(&self) -> ArcGeometry {
        ArcGeometry {
            x_center: self.wg.a - self.h,
            x_amp: -self.r,
            z_amp: -self.r,
        }
    }

    pub fn arc_one_range() -> (f64, f64) {
        (0.5 * PI, 1.5 * PI)
    }

    pub fn arc_two_range() -> (f64, f64) {
        (-0.5 * PI, 0.5 * PI)
    }

    /// Same post described from the opposite wall (`h -> a - h`).
    pub fn mirrored(&self) -> Self {
        PostJunction {
            wg: self.wg,
            h: self.wg.a - self.h,
            r: self.r,
        }
    }
}

/// Hat-basis subinterval counts for the three segment families. Both
/// half-cylinder arcs share `k_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Discretization {
    pub k_d: usize,
    pub k_u: usize,
    pub k_c: usize,
}

impl Discretization {
    pub fn new(k_d: usize, k_u: usize, k_c: usize) -> Result<Self> {
        if k_d < 1 || k_u < 1 || k_c < 1 {
            return Err(Error::invalid(
                "every segment needs at least one subinterval",
            ));
        }
        Ok(Discretization { k_d, k_u, k_c })
    }

    /// Sizing policy: distribute subintervals proportionally to segment
    /// length (the arc weighted by its physical length `pi*r`) so that
    /// `k_d + k_u + k_c + 1 ~ factor * modes`, at least
    /// [`MIN_SUBINTERVALS`] per segment.
    pub fn for_modes_with_factor(
        junction: &PostJunction,
        modes: usize,
        factor: f64,
    ) -> Result<Self> {
        if modes < 1 {
            return Err(Error::invalid("mode count must be >= 1"));
        }
        if !(factor > 0.0) {
            return Err(Error::invalid(format!(
                "basis factor must be positive, got {factor}"
            )));
        }
        let budget = ((factor * modes as f64).ceil() - 1.0).max(3.0);
        let len_d = junction.h - junction.r;
        let len_u = junction.wg.a - junction.h - junction.r;
        let len_arc = PI * junction.r;
        let total = len_d + len_u + len_arc;
        let count = |len: f64| ((budget * len / total).round() as usize).max(MIN_SUBINTERVALS);
        Discretization::new(count(len_d), count(len_u), count(len_arc))
    }

    /// Sizing policy at the default overdetermination factor.
    pub fn for_modes(junction: &PostJunction, modes: usize) -> Result<Self> {
        Self::for_modes_with_factor(junction, modes, DEFAULT_BASIS_FACTOR)
    }

    /// Definiteness of the projected system: `modes < k_u + k_d + k_c + 1`.
    pub fn check_definiteness(&self, modes: usize) -> Result<()> {
        let active = self.k_d + self.k_u + self.k_c + 1;
        if modes >= active {
            return Err(Error::Underdetermined {
                rows: 2 * active,
                unknowns: 2 * modes,
            });
        }
        Ok(())
    }
}

/// Active test functions of every boundary segment plus the resulting
/// equation count.
///
/// The hat at the `x = 0` metal wall (`k = 0` on the lower segment) and the
/// one at `x = a` (`k = K_u` on the upper segment) are dropped; both arcs
/// keep all of their hats, including the ones touching the aperture at
/// `x = h +/- r`.
#[derive(Debug, Clone)]
pub struct RowPlan {
    pub grid_d: SegmentGrid,
    pub grid_u: SegmentGrid,
    pub grid_c1: SegmentGrid,
    pub grid_c2: SegmentGrid,
    pub rows: usize,
}

impl RowPlan {
    /// Overdetermination margin against the `2M` unknowns.
    pub fn margin(&self, modes: usize) -> isize {
        self.rows as isize - 2 * modes as isize
    }
}

/// Enumerate the active equations for a junction discretization.
pub fn active_rows(
    junction: &PostJunction,
    disc: &Discretization,
    modes: usize,
) -> Result<RowPlan> {
    disc.check_definiteness(modes)?;
    let (d0, d1) = junction.segment_d();
    let (u0, u1) = junction.segment_u();
    let (c0, c1) = PostJunction::arc_one_range();
    let (e0, e1) = PostJunction::arc_two_range();
    let grid_d = SegmentGrid::with_active_ends(d0, d1, disc.k_d, false, true)?;
    let grid_u = SegmentGrid::with_active_ends(u0, u1, disc.k_u, true, false)?;
    let grid_c1 = SegmentGrid::new(c0, c1, disc.k_c)?;
    let grid_c2 = SegmentGrid::new(e0, e1, disc.k_c)?;
    let rows = 2 * grid_d.active_count()
        + 2 * grid_u.active_count()
        + grid_c1.active_count()
        + grid_c2.active_count();
    Ok(RowPlan {
        grid_d,
        grid_u,
        grid_c1,
        grid_c2,
        rows,
    })
}

/// Assemble the stacked projection matrices `L` and `R` of the junction
/// system `L b = R a` at frequency `f`.
///
/// Straight-segment blocks use the closed-form sine integrals; post-wall
/// blocks use per-subinterval Gauss-Legendre quadrature with `rule`.
pub fn assemble(
    junction: &PostJunction,
    disc: &Discretization,
    modes: usize,
    f: f64,
    rule: &GaussLegendre,
) -> Result<(Mat<c64>, Mat<c64>)> {
    let plan = active_rows(junction, disc, modes)?;
    let params = junction.wg.mode_set(modes, f)?;
    let width = junction.wg.a;

    let mut l = Mat::<c64>::zeros(plan.rows, 2 * modes);
    let mut r = Mat::<c64>::zeros(plan.rows, 2 * modes);
    let mut row = 0;

    // Aperture segments: one H-continuity row block, then one E-continuity
    // row block per segment, in the stacking order of the block system.
    for grid in [&plan.grid_d, &plan.grid_u] {
        let h_base = row;
        let e_base = row + grid.active_count();
        for (i, k) in grid.active_nodes().enumerate() {
            for (col, mp) in params.iter().enumerate() {
                let s_direct = sine_hat_integral(grid, k, mp.p, SineKernel::Direct)?;
                let s_mirror = sine_hat_integral(grid, k, mp.p, SineKernel::Mirrored { width })?;
                let pg = mp.p * mp.g;
                let pg_z = pg / mp.z;
                // Submatrix entries: H = -(pG/Z) * integral, E = pG * integral.
                let h_i = -pg_z * s_direct;
                let h_ii = -pg_z * s_mirror;
                let e_i = pg * s_direct;
                let e_ii = pg * s_mirror;

                // H continuity with the port-II axis flip (i_x' = -i_x):
                // H_x^I + H_x'^II = 0, so both port blocks carry the same
                // sign, and the rows repeat identically in L and R.
                l[(h_base + i, col)] = -h_i;
                l[(h_base + i, modes + col)] = -h_ii;
                r[(h_base + i, col)] = -h_i;
                r[(h_base + i, modes + col)] = -h_ii;

                // E rows flip the port-I/port-II signs between L and R.
                l[(e_base + i, col)] = e_i;
                l[(e_base + i, modes + col)] = -e_ii;
                r[(e_base + i, col)] = -e_i;
                r[(e_base + i, modes + col)] = e_ii;
            }
        }
        row = e_base + grid.active_count();
    }

    // Post-wall rows: outgoing kernel e^{+gamma z} in L, incoming kernel
    // e^{-gamma z} (negated) in R. Port I couples only to port-I columns,
    // port II only to port-II columns.
    let arcs = [
        (&plan.grid_c1, junction.arc_port_one(), 0),
        (&plan.grid_c2, junction.arc_port_two(), modes),
    ];
    for (grid, arc, col_off) in arcs {
        for k in grid.active_nodes() {
            for (col, mp) in params.iter().enumerate() {
                let b_kernel = cylinder_wall_integral(grid, k, mp, &arc, ExpSign::Plus, rule)?;
                let a_kernel = cylinder_wall_integral(grid, k, mp, &arc, ExpSign::Minus, rule)?;
                l[(row, col_off + col)] = b_kernel;
                r[(row, col_off + col)] = -a_kernel;
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, plan.rows);

    Ok((l, r))
}

/// Relative pivot threshold of the rank-revealing least-squares solve.
///
/// The wall-condition operator restricted to the port-sum coefficient
/// combinations has an exponentially decaying spectrum, so the pivoted
/// triangular factor always trails into machine noise for realistic mode
/// counts. Directions below the threshold carry couplings at or below the
/// roundoff level of the assembled system and are truncated (their solution
/// components set to zero) rather than divided out.
pub const RANK_TRUNCATION: f64 = 1e-12;

/// Solution of one junction system together with quality diagnostics.
#[derive(Debug, Clone)]
pub struct JunctionSolution {
    pub smatrix: ScatteringMatrix,
    /// `||L S - R|| / ||R||` over the whole equilibrated system. Dominated
    /// by the strongly evanescent excitation columns, whose wall demands
    /// grow like `e^{gamma r}` and sit beyond the reach of any basis; their
    /// back-action on observables is suppressed by the guide sections of a
    /// cascade.
    pub relative_residual: f64,
    /// Largest per-column relative residual over the two fundamental-mode
    /// excitation columns; the meaningful solution-quality signal.
    pub fundamental_residual: f64,
    /// Numerical rank retained by the solver (out of `2 * modes`).
    pub rank: usize,
    /// Ratio of the largest to the smallest row norm of `L` before
    /// equilibration.
    pub row_norm_spread: f64,
}

/// Least-squares solve of `L S = R` by rank-revealing column-pivoted QR.
///
/// Every equation is first scaled to a unit `L`-row norm (the same factor on
/// both sides, so each equation is unchanged). Without this the H-continuity
/// rows, whose kernels are smaller by `1/Z_m`, would be sacrificed by the
/// least-squares objective in favor of the E rows.
///
/// Pivots below [`RANK_TRUNCATION`] relative to the leading pivot are
/// truncated basic-solution style: the corresponding solution rows are zero.
/// The deficiency is reported as [`Error::RankDeficient`] only when it eats
/// into more than half of the unknowns, which signals too few or ill-placed
/// basis functions rather than the intrinsic noise floor of the wall
/// operator.
pub(crate) fn lstsq_scattering(
    l: &Mat<c64>,
    r: &Mat<c64>,
    modes: usize,
) -> Result<JunctionSolution> {
    let unknowns = 2 * modes;
    debug_assert_eq!(l.ncols(), unknowns);
    if l.nrows() < unknowns {
        return Err(Error::Underdetermined {
            rows: l.nrows(),
            unknowns,
        });
    }

    let mut row_norms = Vec::with_capacity(l.nrows());
    for i in 0..l.nrows() {
        let norm: f64 = (0..l.ncols())
            .map(|j| l[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        row_norms.push(if norm > 0.0 { norm } else { 1.0 });
    }
    let l = Mat::from_fn(l.nrows(), l.ncols(), |i, j| l[(i, j)] / row_norms[i]);
    let r = Mat::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] / row_norms[i]);
    let (l, r) = (&l, &r);

    let qr = l.col_piv_qr();
    let rfact = qr.thin_R();
    let scale = rfact[(0, 0)].norm();
    let tol = RANK_TRUNCATION * scale;
    let rank = (0..unknowns)
        .take_while(|&i| rfact[(i, i)].norm() > tol)
        .count();
    if rank <= modes {
        return Err(Error::RankDeficient {
            rank,
            required: unknowns,
        });
    }

    // Basic solution: solve the leading rank x rank triangular block for the
    // pivot-leading unknowns, zero the rest, then undo the permutation.
    let q = qr.compute_thin_Q();
    let c = q.adjoint() * r;
    let nrhs = r.ncols();
    let mut y = Mat::<c64>::zeros(unknowns, nrhs);
    for j in 0..nrhs {
        for i in (0..rank).rev() {
            let mut acc = c[(i, j)];
            for k in (i + 1)..rank {
                acc -= rfact[(i, k)] * y[(k, j)];
            }
            y[(i, j)] = acc / rfact[(i, i)];
        }
    }
    let perm = qr.P().arrays().0;
    let mut s = Mat::<c64>::zeros(unknowns, nrhs);
    for (i, &pi) in perm.iter().enumerate() {
        for j in 0..nrhs {
            s[(pi, j)] = y[(i, j)];
        }
    }

    // Residuals of the equilibrated system (all equations weighted equally).
    let resid = l * &s - r;
    let relative_residual = resid.norm_l2() / r.norm_l2();
    let col_resid = |j: usize| {
        let num: f64 = (0..resid.nrows()).map(|i| resid[(i, j)].norm_sqr()).sum();
        let den: f64 = (0..r.nrows()).map(|i| r[(i, j)].norm_sqr()).sum();
        (num / den).sqrt()
    };
    let fundamental_residual = col_resid(0).max(col_resid(modes));

    let mut min_row = f64::INFINITY;
    let mut max_row: f64 = 0.0;
    for &norm in &row_norms {
        min_row = min_row.min(norm);
        max_row = max_row.max(norm);
    }

    Ok(JunctionSolution {
        smatrix: ScatteringMatrix::from_mat(modes, s)?,
        relative_residual,
        fundamental_residual,
        rank,
        row_norm_spread: max_row / min_row,
    })
}

/// Scattering matrix of the junction at frequency `f`, using `rule` for the
/// post-wall quadrature.
pub fn solve_junction_with_rule(
    junction: &PostJunction,
    disc: &Discretization,
    modes: usize,
    f: f64,
    rule: &GaussLegendre,
) -> Result<JunctionSolution> {
    let (l, r) = assemble(junction, disc, modes, f, rule)?;
    let mut sol = lstsq_scattering(&l, &r, modes)?;
    sol.smatrix.normalize_port_two_frame();
    Ok(sol)
}

/// Scattering matrix of the junction at the default quadrature order.
pub fn solve_junction(
    junction: &PostJunction,
    disc: &Discretization,
    modes: usize,
    f: f64,
) -> Result<JunctionSolution> {
    let rule = GaussLegendre::new(DEFAULT_QUADRATURE_ORDER)?;
    solve_junction_with_rule(junction, disc, modes, f, &rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::propagating_count;
    use num_complex::Complex64;

    fn wr62_post(d_from_axis: f64, r: f64) -> PostJunction {
        let wg = Waveguide::wr62();
        PostJunction::new(wg, wg.a / 2.0 + d_from_axis, r).unwrap()
    }

    #[test]
    fn geometry_validation() {
        let wg = Waveguide::wr62();
        assert!(PostJunction::new(wg, 3e-3, 2e-3).is_ok());
        // Touching or crossing a wall is rejected.
        assert!(PostJunction::new(wg, 2e-3, 2e-3).is_err());
        assert!(PostJunction::new(wg, wg.a - 1e-3, 2e-3).is_err());
        assert!(PostJunction::new(wg, 8e-3, 0.0).is_err());
        assert!(PostJunction::new(wg, 8e-3, 9e-3).is_err());
    }

    #[test]
    fn row_plan_counts_match_quoted_index_ranges() {
        let j = wr62_post(3e-3, 2e-3);
        let disc = Discretization::new(10, 10, 10).unwrap();
        let plan = active_rows(&j, &disc, 15).unwrap();
        // 2*K_d + 2*K_u + 2*(K_c + 1)
        assert_eq!(plan.rows, 20 + 20 + 22);
        assert_eq!(plan.margin(15), 62 - 30);
        // L_d keeps k = 1..K_d, L_u keeps k = 0..K_u-1, arcs keep all.
        assert_eq!(plan.grid_d.active_nodes().collect::<Vec<_>>()[0], 1);
        assert_eq!(
            *plan
                .grid_u
                .active_nodes()
                .collect::<Vec<_>>()
                .last()
                .unwrap(),
            9
        );
        assert_eq!(plan.grid_c1.active_count(), 11);
        assert_eq!(plan.grid_c2.active_count(), 11);
    }

    #[test]
    fn definiteness_violation_is_underdetermined() {
        let j = wr62_post(3e-3, 2e-3);
        let disc = Discretization::new(2, 2, 2).unwrap();
        match active_rows(&j, &disc, 8) {
            Err(Error::Underdetermined {
                rows: 14,
                unknowns: 16,
            }) => {}
            other => panic!("expected Underdetermined, got {other:?}"),
        }
        // M = 6 < 2+2+2+1 passes.
        assert!(active_rows(&j, &disc, 6).is_ok());
    }

    #[test]
    fn single_subinterval_segment_contributes_one_hat() {
        let j = wr62_post(3e-3, 2e-3);
        let disc = Discretization::new(1, 4, 4).unwrap();
        let plan = active_rows(&j, &disc, 5).unwrap();
        assert_eq!(plan.grid_d.active_nodes().collect::<Vec<_>>(), vec![1]);
        assert_eq!(plan.rows, 2 + 2 * 4 + 2 * 5);
    }

    #[test]
    fn sizing_policy_is_proportional_and_definite() {
        let j = wr62_post(3e-3, 2e-3);
        for modes in [10, 30, 60, 70] {
            let disc = Discretization::for_modes(&j, modes).unwrap();
            assert!(disc.check_definiteness(modes).is_ok(), "M = {modes}");
            // Longer segment gets at least as many subintervals.
            assert!(disc.k_d >= disc.k_u);
            assert!(disc.k_d >= MIN_SUBINTERVALS);
            assert!(disc.k_u >= MIN_SUBINTERVALS);
            assert!(disc.k_c >= MIN_SUBINTERVALS);
        }
    }

    #[test]
    fn straight_segment_blocks_obey_mirror_column_signs() {
        // For p_m = m*pi/a the port-II kernel equals (-1)^{m+1} times the
        // port-I kernel on the same subdomain. In L the H rows carry the
        // same sign on both ports while the E rows oppose them, so
        // port_ii = +/- sign * port_i depending on the row family.
        let j = wr62_post(3e-3, 2e-3);
        let disc = Discretization::new(6, 6, 6).unwrap();
        let modes = 8;
        let rule = GaussLegendre::new(DEFAULT_QUADRATURE_ORDER).unwrap();
        let (l, _r) = assemble(&j, &disc, modes, 15e9, &rule).unwrap();
        let plan = active_rows(&j, &disc, modes).unwrap();
        let nd = plan.grid_d.active_count();
        let nu = plan.grid_u.active_count();
        let is_h_row = |i: usize| i < nd || (2 * nd..2 * nd + nu).contains(&i);
        for i in 0..(2 * nd + 2 * nu) {
            for m in 1..=modes {
                let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                let port_i = l[(i, m - 1)];
                let port_ii = l[(i, modes + m - 1)];
                let expect = if is_h_row(i) {
                    sign * port_i
                } else {
                    -sign * port_i
                };
                assert!(
                    (port_ii - expect).norm() <= 1e-10 * port_i.norm().max(1e-30),
                    "row {i} mode {m}"
                );
            }
        }
    }

    #[test]
    fn assembled_shapes_match_plan() {
        let j = wr62_post(3e-3, 2e-3);
        let disc = Discretization::new(7, 5, 6).unwrap();
        let modes = 9;
        let plan = active_rows(&j, &disc, modes).unwrap();
        let rule = GaussLegendre::new(DEFAULT_QUADRATURE_ORDER).unwrap();
        let (l, r) = assemble(&j, &disc, modes, 15e9, &rule).unwrap();
        assert_eq!(l.nrows(), plan.rows);
        assert_eq!(l.ncols(), 2 * modes);
        assert_eq!(r.nrows(), plan.rows);
        assert_eq!(r.ncols(), 2 * modes);

        // One kernel feeds both sides on the aperture: at z = 0 the a- and
        // b-coefficients share e^{0}, so H rows repeat identically in L and
        // R while E rows flip sign.
        let nd = plan.grid_d.active_count();
        let nu = plan.grid_u.active_count();
        let is_h_row = |i: usize| i < nd || (2 * nd..2 * nd + nu).contains(&i);
        for i in 0..(2 * nd + 2 * nu) {
            for col in 0..2 * modes {
                let expect = if is_h_row(i) {
                    l[(i, col)]
                } else {
                    -l[(i, col)]
                };
                assert_eq!(r[(i, col)], expect, "row {i} col {col}");
            }
        }
    }

    #[test]
    fn residual_tracks_mode_truncation_not_test_refinement() {
        // The fundamental-column residual measures how well M modes satisfy
        // the continuity conditions: it saturates as the test grid refines
        // at fixed M, and drops as M grows.
        let j = wr62_post(3e-3, 2e-3);
        let f = 15e9;

        let fres = |k: usize, modes: usize| {
            let disc = Discretization::new(k, k, k).unwrap();
            solve_junction(&j, &disc, modes, f)
                .unwrap()
                .fundamental_residual
        };
        let coarse = fres(30, 20);
        let fine = fres(60, 20);
        let finer = fres(90, 20);
        assert!((fine - finer).abs() <= 0.05 * fine, "{fine} vs {finer}");
        assert!((coarse - finer).abs() <= 0.2 * finer);

        let auto = |modes: usize| {
            let disc = Discretization::for_modes(&j, modes).unwrap();
            solve_junction(&j, &disc, modes, f)
                .unwrap()
                .fundamental_residual
        };
        let (r20, r40, r60) = (auto(20), auto(40), auto(60));
        assert!(r40 < r20 && r60 < r40, "{r20} {r40} {r60}");
    }

    #[test]
    fn identity_seam() {
        // Solving L X = L must return the identity to machine precision.
        let j = wr62_post(3e-3, 2e-3);
        let modes = 10;
        let disc = Discretization::for_modes(&j, modes).unwrap();
        let rule = GaussLegendre::new(DEFAULT_QUADRATURE_ORDER).unwrap();
        let (l, _r) = assemble(&j, &disc, modes, 15e9, &rule).unwrap();
        let sol = lstsq_scattering(&l, &l, modes).unwrap();
        for i in 0..2 * modes {
            for jj in 0..2 * modes {
                let expect = if i == jj { 1.0 } else { 0.0 };
                let got = sol.smatrix.get(i, jj);
                assert!(
                    (got - Complex64::new(expect, 0.0)).norm() < 1e-10,
                    "({i},{jj}) = {got}"
                );
            }
        }
        assert!(sol.relative_residual < 1e-12);
    }

    #[test]
    fn duplicated_columns_are_rank_deficient() {
        // Synthetic system whose port-II columns repeat the port-I ones:
        // numerical rank is half the unknowns, which the solver rejects.
        let modes = 4;
        let rows = 12;
        let l = Mat::from_fn(rows, 2 * modes, |i, j| {
            let base = (j % modes) as f64;
            c64::new((i as f64 + 1.0) * (base + 1.0), i as f64 - base)
        });
        let r = Mat::from_fn(rows, 2 * modes, |i, j| c64::new(i as f64, j as f64));
        match lstsq_scattering(&l, &r, modes) {
            Err(Error::RankDeficient { rank, required }) => {
                assert!(rank <= modes);
                assert_eq!(required, 2 * modes);
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn energy_conservation_single_post() {
        // Lossless junction: |S11|^2 + |S21|^2 = 1 for the propagating mode.
        let j = wr62_post(3e-3, 2e-3);
        let modes = 60;
        let disc = Discretization::for_modes(&j, modes).unwrap();
        let f = 15e9;
        let sol = solve_junction(&j, &disc, modes, f).unwrap();
        assert_eq!(propagating_count(&j.wg, modes, f).unwrap(), 1);
        let s11 = sol.smatrix.get(0, 0).norm();
        let s21 = sol.smatrix.get(modes, 0).norm();
        let power = s11 * s11 + s21 * s21;
        assert!((power - 1.0).abs() <= 1e-3, "|S11|^2 + |S21|^2 = {power}");
        assert!(sol.fundamental_residual < 1e-2);
        // Passivity bound on the propagating sub-block.
        let top = sol.smatrix.propagating_max_singular_value(1).unwrap();
        assert!(top <= 1.0 + 1e-3, "top singular value {top}");
    }

    #[test]
    fn propagating_block_is_reciprocal() {
        // One propagating mode in band: S21 = S12 within discretization
        // error under the power normalization.
        let j = wr62_post(3e-3, 2e-3);
        let modes = 50;
        let disc = Discretization::for_modes(&j, modes).unwrap();
        for f in [12.4e9, 15.0e9, 18.0e9] {
            let s = solve_junction(&j, &disc, modes, f).unwrap().smatrix;
            let s21 = s.get(modes, 0);
            let s12 = s.get(0, modes);
            assert!(
                (s21 - s12).norm() <= 1e-3,
                "f = {f}: S21 = {s21}, S12 = {s12}"
            );
        }
    }

    #[test]
    fn mirrored_junction_swaps_ports() {
        let j = wr62_post(3e-3, 2e-3);
        let m = j.mirrored();
        let modes = 40;
        let f = 15e9;
        let disc = Discretization::for_modes(&j, modes).unwrap();
        let disc_m = Discretization::for_modes(&m, modes).unwrap();
        let a = solve_junction(&j, &disc, modes, f).unwrap().smatrix;
        let b = solve_junction(&m, &disc_m, modes, f).unwrap().smatrix;
        // Fundamental-mode magnitudes with ports exchanged.
        let tol = 2e-3;
        assert!((a.get(modes, 0).norm() - b.get(modes, 0).norm()).abs() < tol);
        assert!((a.get(0, 0).norm() - b.get(modes, modes).norm()).abs() < tol);
        assert!((a.get(modes, modes).norm() - b.get(0, 0).norm()).abs() < tol);
    }

    #[test]
    fn centered_post_relates_upper_and_lower_blocks() {
        // With h = a/2 and K_d = K_u the two aperture segments are mirror
        // images: the E blocks agree up to row reversal and the modal
        // (-1)^{m+1} column signs.
        let wg = Waveguide::wr62();
        let j = PostJunction::new(wg, wg.a / 2.0, 2e-3).unwrap();
        let disc = Discretization::new(8, 8, 8).unwrap();
        let modes = 6;
        let rule = GaussLegendre::new(DEFAULT_QUADRATURE_ORDER).unwrap();
        let (l, _) = assemble(&j, &disc, modes, 15e9, &rule).unwrap();
        let plan = active_rows(&j, &disc, modes).unwrap();
        let nd = plan.grid_d.active_count();
        let nu = plan.grid_u.active_count();
        assert_eq!(nd, nu);
        let e_d_base = nd; // after the d-segment H block
        let e_u_base = 2 * nd + nu; // after d blocks and the u H block

        // d-grid active hats are k = 1..K_d at nodes x_k; u-grid active hats
        // are k = 0..K_u-1 at nodes h + r + k*delta. Under x -> a - x the
        // d-hat at index i (k = i+1) maps to the u-hat at index nu-1-i.
        for i in 0..nd {
            for m in 1..=modes {
                let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                let e_d = l[(e_d_base + i, m - 1)];
                let e_u = l[(e_u_base + (nu - 1 - i), m - 1)];
                assert!(
                    (e_u - sign * e_d).norm() <= 1e-10 * e_d.norm().max(1e-30),
                    "i={i} m={m}: {e_u} vs {e_d}"
                );
            }
        }
    }
}
