//! Method-independent oracles used by the test and acceptance suites:
//! adaptive quadrature for checking the analytic integrals, and a
//! point-collocation solver that cross-checks the projection solver without
//! touching any of its basis-integral machinery.

use faer::{c64, Mat};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::junction::{lstsq_scattering, Discretization, JunctionSolution, PostJunction};
use crate::quadrature::GaussLegendre;

/// Panel budget of the adaptive quadrature; refinement beyond this count
/// reports [`Error::NoConvergence`].
pub const MAX_PANELS: usize = 30_000;

const ORACLE_ORDER: usize = 21;

struct Panel {
    err: f64,
    lo: f64,
    hi: f64,
    /// Sum of the two half-panel estimates (the kept value).
    value: Complex64,
    /// Roundoff level of this panel's samples.
    noise: f64,
}

/// Adaptive Gauss-Legendre quadrature of `f` over `[lo, hi]` to the given
/// relative tolerance. Worst-panel-first bisection with a global error
/// estimate; terminates at the integrand's roundoff floor when the request
/// is tighter than floating point supports.
pub fn quadrature_oracle<F: Fn(f64) -> Complex64>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<Complex64> {
    if !(rel_tol >= 1e-14) {
        return Err(Error::invalid(format!(
            "oracle tolerance must be >= 1e-14, got {rel_tol}"
        )));
    }
    if !(lo < hi) {
        return Err(Error::invalid(format!("bad interval [{lo}, {hi}]")));
    }
    let rule = GaussLegendre::new(ORACLE_ORDER)?;

    let estimate = |lo: f64, hi: f64| -> (Complex64, f64) {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut peak = 0.0f64;
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            let v = f(mid + half * x);
            peak = peak.max(v.norm());
            acc += w * v;
        }
        (half * acc, peak)
    };
    let make_panel = |lo: f64, hi: f64| -> Panel {
        let mid = 0.5 * (lo + hi);
        let (whole, peak) = estimate(lo, hi);
        let (left, pl) = estimate(lo, mid);
        let (right, pr) = estimate(mid, hi);
        let value = left + right;
        let peak = peak.max(pl).max(pr);
        Panel {
            err: (whole - value).norm(),
            lo,
            hi,
            value,
            noise: 100.0 * f64::EPSILON * (hi - lo) * peak,
        }
    };

    // Magnitude scale for the absolute budget: the coarse estimate, with a
    // floor for heavily cancelling integrands.
    let (coarse, f_scale) = estimate(lo, hi);
    let scale = coarse
        .norm()
        .max(1e-3 * (hi - lo) * f_scale)
        .max(f64::MIN_POSITIVE);
    let budget = rel_tol * scale;

    // Worst panel first. Ordering is on the error estimate alone; ties are
    // resolved by the deterministic heap layout.
    struct ByErr(Panel);
    impl PartialEq for ByErr {
        fn eq(&self, other: &Self) -> bool {
            self.0.err == other.0.err
        }
    }
    impl Eq for ByErr {}
    impl PartialOrd for ByErr {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for ByErr {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.err.total_cmp(&other.0.err)
        }
    }

    let mut heap = std::collections::BinaryHeap::new();
    let root = make_panel(lo, hi);
    let mut total_value = root.value;
    let mut total_err = root.err;
    let mut total_noise = root.noise;
    heap.push(ByErr(root));

    while total_err > budget.max(total_noise) {
        if heap.len() >= MAX_PANELS {
            return Err(Error::NoConvergence {
                max_depth: MAX_PANELS,
            });
        }
        let worst = heap.pop().expect("heap nonempty while error remains").0;
        let mid = 0.5 * (worst.lo + worst.hi);
        // A panel whose estimate sits at its own roundoff level, or that
        // can no longer be split in f64, is reclassified as noise; further
        // bisection cannot improve it.
        if worst.err <= worst.noise || !(worst.lo < mid && mid < worst.hi) {
            total_err -= worst.err;
            total_noise += (worst.err - worst.noise).max(0.0);
            continue;
        }
        let a = make_panel(worst.lo, mid);
        let b = make_panel(mid, worst.hi);
        total_value += a.value + b.value - worst.value;
        total_err += a.err + b.err - worst.err;
        total_noise += a.noise + b.noise - worst.noise;
        heap.push(ByErr(a));
        heap.push(ByErr(b));
    }
    Ok(total_value)
}

/// Match-point counts per boundary segment for the collocation oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Collocation {
    /// Points on the lower aperture segment.
    pub n_d: usize,
    /// Points on the upper aperture segment.
    pub n_u: usize,
    /// Points on each half-cylinder arc.
    pub n_c: usize,
}

impl Collocation {
    pub fn new(n_d: usize, n_u: usize, n_c: usize) -> Result<Self> {
        if n_d < 1 || n_u < 1 || n_c < 1 {
            return Err(Error::invalid(
                "every segment needs at least one match point",
            ));
        }
        Ok(Collocation { n_d, n_u, n_c })
    }

    /// Twice the equation count of the projection discretization.
    pub fn doubled_from(disc: &Discretization) -> Self {
        Collocation {
            n_d: 2 * disc.k_d,
            n_u: 2 * disc.k_u,
            n_c: 2 * (disc.k_c + 1),
        }
    }

    /// Total number of collocation equations (E and H rows on the apertures,
    /// one E row per arc point on each arc).
    pub fn equations(&self) -> usize {
        2 * self.n_d + 2 * self.n_u + 2 * self.n_c
    }
}

fn midpoints(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / n as f64;
    (0..n).map(move |i| lo + (i as f64 + 0.5) * step)
}

/// Scattering matrix of a single-post junction by pointwise enforcement of
/// the continuity conditions at segment midpoints, solved in the
/// least-squares sense.
///
/// This path evaluates the raw field kernels directly; it shares no
/// integral machinery with the projection solver it validates.
pub fn collocation_smatrix(
    junction: &PostJunction,
    modes: usize,
    pts: &Collocation,
    f: f64,
) -> Result<JunctionSolution> {
    let rows = pts.equations();
    if rows < 2 * modes {
        return Err(Error::Underdetermined {
            rows,
            unknowns: 2 * modes,
        });
    }
    let params = junction.wg.mode_set(modes, f)?;
    let a_width = junction.wg.a;

    let mut l = Mat::<c64>::zeros(rows, 2 * modes);
    let mut r = Mat::<c64>::zeros(rows, 2 * modes);
    let mut row = 0;

    // Aperture points: H continuity then E continuity per point.
    let (d0, d1) = junction.segment_d();
    let (u0, u1) = junction.segment_u();
    let aperture = midpoints(d0, d1, pts.n_d).chain(midpoints(u0, u1, pts.n_u));
    for x in aperture {
        for (col, mp) in params.iter().enumerate() {
            let pg = mp.p * mp.g;
            let pg_z = pg / mp.z;
            let s_i = (mp.p * x).sin();
            let s_ii = (mp.p * (a_width - x)).sin();

            // Tangential H with the port-II axis flip: H_x^I + H_x'^II = 0:
            //   (pG/Z) s_I (b_I - a_I) + (pG/Z) s_II (b_II - a_II) = 0
            l[(row, col)] = pg_z * s_i;
            l[(row, modes + col)] = pg_z * s_ii;
            r[(row, col)] = pg_z * s_i;
            r[(row, modes + col)] = pg_z * s_ii;

            // E_y^I(x, 0) = E_y^II(x', 0):
            //   pG s_I (a_I + b_I) = pG s_II (a_II + b_II)
            l[(row + 1, col)] = pg * s_i;
            l[(row + 1, modes + col)] = -pg * s_ii;
            r[(row + 1, col)] = -pg * s_i;
            r[(row + 1, modes + col)] = pg * s_ii;
        }
        row += 2;
    }

    // Post-wall points: E = 0 on each arc, in that port's own coordinates.
    let (c0, c1) = PostJunction::arc_one_range();
    let arc1 = junction.arc_port_one();
    for phi in midpoints(c0, c1, pts.n_c) {
        for (col, mp) in params.iter().enumerate() {
            let pg_sin = mp.p * mp.g * (mp.p * arc1.x(phi)).sin();
            let z = arc1.z(phi);
            l[(row, col)] = pg_sin * (mp.gamma * z).exp();
            r[(row, col)] = -pg_sin * (-mp.gamma * z).exp();
        }
        row += 1;
    }
    let (e0, e1) = PostJunction::arc_two_range();
    let arc2 = junction.arc_port_two();
    for phi in midpoints(e0, e1, pts.n_c) {
        for (col, mp) in params.iter().enumerate() {
            let pg_sin = mp.p * mp.g * (mp.p * arc2.x(phi)).sin();
            let z = arc2.z(phi);
            l[(row, modes + col)] = pg_sin * (mp.gamma * z).exp();
            r[(row, modes + col)] = -pg_sin * (-mp.gamma * z).exp();
        }
        row += 1;
    }
    debug_assert_eq!(row, rows);

    let mut sol = lstsq_scattering(&l, &r, modes)?;
    sol.smatrix.normalize_port_two_frame();
    Ok(sol)
}
