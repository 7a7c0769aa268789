//! Local first-order (hat) basis functions on uniformly discretized boundary
//! segments, with closed-form sine/cosine kernel integrals on straight
//! segments and fixed-order Gauss-Legendre quadrature on cylinder arcs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modes::ModeParams;
use crate::quadrature::GaussLegendre;

/// Uniform discretization of one boundary segment into `K` subintervals.
///
/// Nodes are `t_k = t0 + k*(t_end - t0)/K`. The unit of `t` is whatever the
/// segment uses (meters on the aperture segments, radians on the arcs). The
/// activity flags mark whether the edge hats at `t0` / `t_end` belong to the
/// active test set; the hats themselves always exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGrid {
    t0: f64,
    t_end: f64,
    k: usize,
    include_first: bool,
    include_last: bool,
}

impl SegmentGrid {
    /// Grid with every node active.
    pub fn new(t0: f64, t_end: f64, k: usize) -> Result<Self> {
        Self::with_active_ends(t0, t_end, k, true, true)
    }

    pub fn with_active_ends(
        t0: f64,
        t_end: f64,
        k: usize,
        include_first: bool,
        include_last: bool,
    ) -> Result<Self> {
        if !(t0 < t_end) {
            return Err(Error::invalid(format!(
                "segment must satisfy t0 < t_end (got [{t0}, {t_end}])"
            )));
        }
        if k < 1 {
            return Err(Error::invalid("segment needs at least one subinterval"));
        }
        Ok(SegmentGrid {
            t0,
            t_end,
            k,
            include_first,
            include_last,
        })
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t_end
    }

    /// Number of subintervals `K`.
    pub fn subintervals(&self) -> usize {
        self.k
    }

    /// Number of nodes, `K + 1`.
    pub fn node_count(&self) -> usize {
        self.k + 1
    }

    /// Uniform node spacing.
    pub fn delta(&self) -> f64 {
        (self.t_end - self.t0) / self.k as f64
    }

    /// Node coordinate `t_i`; `node(K)` is exactly `t_end`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.k);
        self.t0 + (self.t_end - self.t0) * (i as f64 / self.k as f64)
    }

    pub fn is_active(&self, i: usize) -> bool {
        i <= self.k && (i > 0 || self.include_first) && (i < self.k || self.include_last)
    }

    /// Indices of the active hats, in ascending order.
    pub fn active_nodes(&self) -> std::ops::RangeInclusive<usize> {
        let first = if self.include_first { 0 } else { 1 };
        let last = if self.include_last {
            self.k
        } else {
            self.k - 1
        };
        first..=last
    }

    pub fn active_count(&self) -> usize {
        self.node_count() - usize::from(!self.include_first) - usize::from(!self.include_last)
    }

    /// Support interval of hat `i`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            self.node(0)
        } else {
            self.node(i - 1)
        };
        let hi = if i == self.k {
            self.node(self.k)
        } else {
            self.node(i + 1)
        };
        (lo, hi)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i > self.k {
            return Err(Error::invalid(format!(
                "hat index {i} out of range 0..={}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Value of hat `k` at coordinate `t`: 1 at its node, linear to 0 at the
/// neighboring nodes, identically 0 outside its support.
pub fn hat_eval(grid: &SegmentGrid, k: usize, t: f64) -> Result<f64> {
    grid.check_index(k)?;
    let (lo, hi) = grid.support(k);
    if t < lo || t > hi {
        return Ok(0.0);
    }
    Ok((1.0 - (t - grid.node(k)).abs() / grid.delta()).max(0.0))
}

/// Kernel selector for the straight-segment integrals: `sin(p t)` or the
/// port-II image `sin(p (width - t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SineKernel {
    Direct,
    Mirrored { width: f64 },
}

/// `1 - cos(x)` without cancellation.
fn one_minus_cos(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    2.0 * s * s
}

/// `x - sin(x)` without cancellation.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.25 {
        let x2 = x * x;
        let series = 1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0)));
        x * x2 / 6.0 * series
    } else {
        x - x.sin()
    }
}

/// Elementary closed forms over one subinterval of width `delta`:
/// contributions of the rising ramp `(t-x0)/delta` and the falling ramp
/// `1-(t-x0)/delta` against `sin(p t)` and `cos(p t)`, anchored at the
/// subinterval start `x0`.
struct RampIntegrals {
    /// `int cos(p u) (1 - u/delta) du` over `[0, delta]`.
    fall_even: f64,
    /// `int sin(p u) (1 - u/delta) du`.
    fall_odd: f64,
    /// `int cos(p u) (u/delta) du`.
    rise_even: f64,
    /// `int sin(p u) (u/delta) du`.
    rise_odd: f64,
}

fn ramp_integrals(p: f64, delta: f64) -> RampIntegrals {
    let x = p * delta;
    let inv = 1.0 / (p * p * delta);
    let a = one_minus_cos(x) * inv;
    let b = x_minus_sin(x) * inv;
    RampIntegrals {
        fall_even: a,
        fall_odd: b,
        rise_even: x.sin() / p - a,
        rise_odd: x * a - b,
    }
}

fn sine_cosine_hat_integrals(grid: &SegmentGrid, k: usize, p: f64) -> (f64, f64) {
    let delta = grid.delta();
    let r = ramp_integrals(p, delta);
    let mut sine = 0.0;
    let mut cosine = 0.0;
    if k > 0 {
        // Rising ramp on [t_{k-1}, t_k].
        let x0 = grid.node(k - 1);
        let (s0, c0) = (p * x0).sin_cos();
        sine += s0 * r.rise_even + c0 * r.rise_odd;
        cosine += c0 * r.rise_even - s0 * r.rise_odd;
    }
    if k < grid.subintervals() {
        // Falling ramp on [t_k, t_{k+1}].
        let x0 = grid.node(k);
        let (s0, c0) = (p * x0).sin_cos();
        sine += s0 * r.fall_even + c0 * r.fall_odd;
        cosine += c0 * r.fall_even - s0 * r.fall_odd;
    }
    (sine, cosine)
}

/// Closed-form `int sin(p t) alpha_k(t) dt` over the hat's support (or the
/// mirrored kernel `sin(p (width - t))`). No numerical quadrature involved.
pub fn sine_hat_integral(grid: &SegmentGrid, k: usize, p: f64, kernel: SineKernel) -> Result<f64> {
    grid.check_index(k)?;
    if !(p > 0.0) {
        return Err(Error::invalid(format!(
            "wavenumber must be positive, got {p}"
        )));
    }
    let (sine, cosine) = sine_cosine_hat_integrals(grid, k, p);
    Ok(match kernel {
        SineKernel::Direct => sine,
        // sin(p(w - t)) = sin(pw) cos(pt) - cos(pw) sin(pt)
        SineKernel::Mirrored { width } => {
            let (sw, cw) = (p * width).sin_cos();
            sw * cosine - cw * sine
        }
    })
}

/// Closed-form `int cos(p t) alpha_k(t) dt`.
pub fn cosine_hat_integral(grid: &SegmentGrid, k: usize, p: f64) -> Result<f64> {
    grid.check_index(k)?;
    if !(p > 0.0) {
        return Err(Error::invalid(format!(
            "wavenumber must be positive, got {p}"
        )));
    }
    Ok(sine_cosine_hat_integrals(grid, k, p).1)
}

/// Half-cylinder wall parameterized by the angle `phi`:
/// `x(phi) = x_center + x_amp*sin(phi)`, `z(phi) = z_amp*cos(phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcGeometry {
    pub x_center: f64,
    pub x_amp: f64,
    pub z_amp: f64,
}

impl ArcGeometry {
    pub fn x(&self, phi: f64) -> f64 {
        self.x_center + self.x_amp * phi.sin()
    }

    pub fn z(&self, phi: f64) -> f64 {
        self.z_amp * phi.cos()
    }
}

/// Sign of the exponent in the wall kernel `e^{+/- gamma z}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpSign {
    Plus,
    Minus,
}

/// `int p G e^{+/- gamma z(phi)} sin(p x(phi)) alpha_k(phi) dphi` by
/// Gauss-Legendre quadrature per hat subinterval (the hat kink splits the
/// support into one panel per subinterval, so each panel is smooth).
pub fn cylinder_wall_integral(
    grid: &SegmentGrid,
    k: usize,
    mode: &ModeParams,
    arc: &ArcGeometry,
    sign: ExpSign,
    rule: &GaussLegendre,
) -> Result<Complex64> {
    grid.check_index(k)?;
    let s = match sign {
        ExpSign::Plus => 1.0,
        ExpSign::Minus => -1.0,
    };
    let delta = grid.delta();
    let t_k = grid.node(k);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut panel = |lo: f64, hi: f64| {
        acc += rule.integrate(lo, hi, |phi| {
            let alpha = 1.0 - (phi - t_k).abs() / delta;
            let kernel = (s * mode.gamma * arc.z(phi)).exp() * (mode.p * arc.x(phi)).sin();
            kernel * alpha
        });
    };
    if k > 0 {
        panel(grid.node(k - 1), t_k);
    }
    if k < grid.subintervals() {
        panel(t_k, grid.node(k + 1));
    }
    Ok(mode.p * mode.g * acc)
}
