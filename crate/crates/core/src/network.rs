//! Cascading of junction scattering matrices with uniform guide sections
//! into multi-post structures, and frequency sweeps over such networks.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::junction::{
    solve_junction_with_rule, Discretization, PostJunction, DEFAULT_BASIS_FACTOR,
    DEFAULT_QUADRATURE_ORDER,
};
use crate::modes::Waveguide;
use crate::quadrature::GaussLegendre;
use crate::smatrix::ScatteringMatrix;

/// One element of a cascaded structure. Junction reference planes coincide
/// at the post-center plane, so a uniform section of length `l` between two
/// posts is exactly the spacing of their centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkElement {
    Junction(PostJunction),
    UniformGuide { length: f64 },
}

/// Ordered left-to-right sequence of junctions and uniform guide sections
/// in a common waveguide.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    wg: Waveguide,
    elements: Vec<NetworkElement>,
}

impl Network {
    pub fn new(wg: Waveguide, elements: Vec<NetworkElement>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::invalid("network needs at least one element"));
        }
        let mut last_post: Option<(usize, f64)> = None; // (index, radius)
        let mut gap = 0.0;
        for (idx, el) in elements.iter().enumerate() {
            match el {
                NetworkElement::UniformGuide { length } => {
                    if !(*length >= 0.0) {
                        return Err(Error::invalid(format!(
                            "guide section {idx} has negative length {length}"
                        )));
                    }
                    gap += length;
                }
                NetworkElement::Junction(j) => {
                    if j.wg != wg {
                        return Err(Error::invalid(format!(
                            "junction {idx} uses a different waveguide than the network"
                        )));
                    }
                    if let Some((prev, r_prev)) = last_post {
                        if gap < r_prev + j.r {
                            return Err(Error::invalid(format!(
                                "posts {prev} and {idx} overlap: spacing {gap} < sum of radii {}",
                                r_prev + j.r
                            )));
                        }
                    }
                    last_post = Some((idx, j.r));
                    gap = 0.0;
                }
            }
        }
        Ok(Network { wg, elements })
    }

    pub fn waveguide(&self) -> &Waveguide {
        &self.wg
    }

    pub fn elements(&self) -> &[NetworkElement] {
        &self.elements
    }

    /// The same structure traversed right-to-left with every post offset
    /// mirrored across the guide axis.
    pub fn mirrored_reversed(&self) -> Self {
        let elements = self
            .elements
            .iter()
            .rev()
            .map(|el| match el {
                NetworkElement::Junction(j) => NetworkElement::Junction(j.mirrored()),
                g => *g,
            })
            .collect();
        Network {
            wg: self.wg,
            elements,
        }
    }
}

/// Scattering matrix of a uniform guide section: `S11 = S22 = 0`,
/// `S12 = S21 = diag(e^{-gamma_m length})`.
pub fn uniform_guide_smatrix(
    wg: &Waveguide,
    length: f64,
    modes: usize,
    f: f64,
) -> Result<ScatteringMatrix> {
    if !(length >= 0.0) {
        return Err(Error::invalid(format!(
            "guide length must be nonnegative, got {length}"
        )));
    }
    let params = wg.mode_set(modes, f)?;
    let n = 2 * modes;
    let mut s = Mat::<c64>::zeros(n, n);
    for (i, mp) in params.iter().enumerate() {
        let t = (-mp.gamma * length).exp();
        s[(i, modes + i)] = t;
        s[(modes + i, i)] = t;
    }
    ScatteringMatrix::from_mat(modes, s)
}

/// Redheffer star product of two generalized scattering matrices sharing a
/// mode count: the returned matrix maps `[a_I,left; a_II,right]` to
/// `[b_I,left; b_II,right]`, retaining every evanescent interaction.
pub fn cascade(left: &ScatteringMatrix, right: &ScatteringMatrix) -> Result<ScatteringMatrix> {
    if left.modes() != right.modes() {
        return Err(Error::invalid(format!(
            "cascade requires equal mode counts ({} vs {})",
            left.modes(),
            right.modes()
        )));
    }
    let m = left.modes();
    let a11 = left.s11();
    let a12 = left.s12();
    let a21 = left.s21();
    let a22 = left.s22();
    let b11 = right.s11();
    let b12 = right.s12();
    let b21 = right.s21();
    let b22 = right.s22();

    // Feedback operator F = I - A22 B11 (equivalently I - S11_right S22_left
    // seen from the interface).
    let feedback = Mat::<c64>::identity(m, m) - a22 * b11;
    let lu = feedback.partial_piv_lu();

    // t1 = F^-1 A21, t2 = F^-1 A22 B12.
    let t1 = lu.solve(a21);
    let t2 = lu.solve(a22 * b12);

    // Numerical singularity check on the feedback solve.
    let resid = (&feedback * &t1 - a21).norm_l2();
    let scale = a21.norm_l2().max(1e-300);
    if !resid.is_finite() || resid > 1e-8 * scale {
        return Err(Error::SingularCascade {
            residual: resid / scale,
        });
    }

    let b11t1 = b11 * &t1;
    let s11 = a11 + a12 * &b11t1;
    let s21 = b21 * &t1;
    let s12 = a12 * (b12 + b11 * &t2);
    let s22 = b22 + b21 * &t2;

    let n = 2 * m;
    let mut s = Mat::<c64>::zeros(n, n);
    for j in 0..m {
        for i in 0..m {
            s[(i, j)] = s11[(i, j)];
            s[(i, m + j)] = s12[(i, j)];
            s[(m + i, j)] = s21[(i, j)];
            s[(m + i, m + j)] = s22[(i, j)];
        }
    }
    ScatteringMatrix::from_mat(m, s).map_err(|_| Error::SingularCascade {
        residual: f64::INFINITY,
    })
}

/// Numerical settings for network solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    /// Modes retained per port (and between cascaded elements).
    pub modes: usize,
    /// How junction discretizations are chosen.
    pub disc: DiscPolicy,
    /// Gauss-Legendre order for the post-wall integrals.
    pub quadrature_order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscPolicy {
    /// Size each junction's grids from its own geometry.
    Auto { factor: f64 },
    /// Shared explicit subinterval counts for every junction.
    Explicit(Discretization),
}

impl Numerics {
    pub fn new(modes: usize) -> Self {
        Numerics {
            modes,
            disc: DiscPolicy::Auto {
                factor: DEFAULT_BASIS_FACTOR,
            },
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
        }
    }

    pub fn with_disc(mut self, disc: Discretization) -> Self {
        self.disc = DiscPolicy::Explicit(disc);
        self
    }

    pub fn with_quadrature_order(mut self, order: usize) -> Self {
        self.quadrature_order = order;
        self
    }

    fn discretization(&self, junction: &PostJunction) -> Result<Discretization> {
        match self.disc {
            DiscPolicy::Auto { factor } => {
                Discretization::for_modes_with_factor(junction, self.modes, factor)
            }
            DiscPolicy::Explicit(d) => Ok(d),
        }
    }
}

/// Scattering matrix of the whole network at frequency `f`: a left-to-right
/// fold of [`cascade`] over the element matrices. Junction solutions are
/// cached by geometry within the call, since filters repeat post shapes.
pub fn solve_network(net: &Network, num: &Numerics, f: f64) -> Result<ScatteringMatrix> {
    let rule = GaussLegendre::new(num.quadrature_order)?;
    let mut cache: Vec<(u64, u64, ScatteringMatrix)> = Vec::new();
    let mut acc: Option<ScatteringMatrix> = None;
    for el in net.elements() {
        let s = match el {
            NetworkElement::Junction(j) => {
                let key = (j.h.to_bits(), j.r.to_bits());
                match cache.iter().find(|(h, r, _)| (*h, *r) == key) {
                    Some((_, _, s)) => s.clone(),
                    None => {
                        let disc = num.discretization(j)?;
                        let s = solve_junction_with_rule(j, &disc, num.modes, f, &rule)?.smatrix;
                        cache.push((key.0, key.1, s.clone()));
                        s
                    }
                }
            }
            NetworkElement::UniformGuide { length } => {
                uniform_guide_smatrix(net.waveguide(), *length, num.modes, f)?
            }
        };
        acc = Some(match acc {
            None => s,
            Some(prev) => cascade(&prev, &s)?,
        });
    }
    Ok(acc.expect("network has at least one element"))
}

/// One frequency point of a sweep.
#[derive(Debug)]
pub struct SweepPoint {
    pub f_hz: f64,
    pub outcome: PointOutcome,
}

/// Result of one sweep point. Cutoff collisions and per-point solver
/// failures are recorded rather than aborting the sweep.
#[derive(Debug)]
pub enum PointOutcome {
    Solved(ScatteringMatrix),
    SkippedCutoff { mode: usize },
    Failed(Error),
}

impl SweepPoint {
    pub fn smatrix(&self) -> Option<&ScatteringMatrix> {
        match &self.outcome {
            PointOutcome::Solved(s) => Some(s),
            _ => None,
        }
    }
}

fn solve_point(net: &Network, num: &Numerics, f: f64) -> SweepPoint {
    let outcome = match solve_network(net, num, f) {
        Ok(s) => PointOutcome::Solved(s),
        Err(Error::CutoffSingular { m, .. }) => PointOutcome::SkippedCutoff { mode: m },
        Err(e) => PointOutcome::Failed(e),
    };
    SweepPoint { f_hz: f, outcome }
}

/// The `n_points` uniformly spaced frequencies of a sweep.
pub fn sweep_frequencies(f_start: f64, f_stop: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(f_start > 0.0) || !(f_stop > f_start) {
        return Err(Error::invalid(format!(
            "sweep range must satisfy 0 < f_start < f_stop (got {f_start}..{f_stop})"
        )));
    }
    if n_points == 0 {
        return Err(Error::invalid("sweep needs at least one point"));
    }
    if n_points == 1 {
        return Ok(vec![f_start]);
    }
    let span = f_stop - f_start;
    let last = (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| f_start + span * (i as f64 / last))
        .collect())
}

/// Sweep the network over uniformly spaced frequencies, sequentially.
/// Results are in ascending frequency order.
pub fn frequency_sweep_serial(
    net: &Network,
    num: &Numerics,
    f_start: f64,
    f_stop: f64,
    n_points: usize,
) -> Result<Vec<SweepPoint>> {
    let freqs = sweep_frequencies(f_start, f_stop, n_points)?;
    Ok(freqs.iter().map(|&f| solve_point(net, num, f)).collect())
}

/// Sweep with the frequency points evaluated in parallel. Points are
/// independent pure solves, and the output is ordered by frequency, so the
/// result is identical to the serial sweep.
#[cfg(feature = "parallel")]
pub fn frequency_sweep_parallel(
    net: &Network,
    num: &Numerics,
    f_start: f64,
    f_stop: f64,
    n_points: usize,
) -> Result<Vec<SweepPoint>> {
    use rayon::prelude::*;
    let freqs = sweep_frequencies(f_start, f_stop, n_points)?;
    Ok(freqs
        .par_iter()
        .map(|&f| solve_point(net, num, f))
        .collect())
}

/// Sweep the network, in parallel when the `parallel` feature is enabled.
pub fn frequency_sweep(
    net: &Network,
    num: &Numerics,
    f_start: f64,
    f_stop: f64,
    n_points: usize,
) -> Result<Vec<SweepPoint>> {
    #[cfg(feature = "parallel")]
    {
        frequency_sweep_parallel(net, num, f_start, f_stop, n_points)
    }
    #[cfg(not(feature = "parallel"))]
    {
        frequency_sweep_serial(net, num, f_start, f_stop, n_points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wr62() -> Waveguide {
        Waveguide::wr62()
    }

    fn post(d_from_axis: f64, r: f64) -> PostJunction {
        let wg = wr62();
        PostJunction::new(wg, wg.a / 2.0 + d_from_axis, r).unwrap()
    }

    /// Deterministic pseudo-random passive scattering matrices for algebra
    /// tests (contraction enforced by rescaling).
    fn random_passive(modes: usize, seed: u64) -> ScatteringMatrix {
        let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
        let mut next = move || {
            // splitmix64
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z = z ^ (z >> 31);
            (z as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let n = 2 * modes;
        let raw = Mat::from_fn(n, n, |_, _| c64::new(next(), next()));
        let top = raw.singular_values().unwrap()[0];
        let scaled = Mat::from_fn(n, n, |i, j| raw[(i, j)] * (0.95 / top));
        ScatteringMatrix::from_mat(modes, scaled).unwrap()
    }

    #[test]
    fn zero_length_guide_is_identity_through() {
        let s = uniform_guide_smatrix(&wr62(), 0.0, 5, 15e9).unwrap();
        let id = ScatteringMatrix::identity_through(5);
        for i in 0..10 {
            for j in 0..10 {
                assert!((s.get(i, j) - id.get(i, j)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn guide_transmission_phase_and_decay() {
        let wg = wr62();
        let len = 10e-3;
        let s = uniform_guide_smatrix(&wg, len, 5, 15e9).unwrap();
        // Propagating fundamental: unit magnitude, phase -Im(gamma)*l.
        let g1 = wg.mode_params(1, 15e9).unwrap().gamma;
        let t = s.get(5, 0);
        assert!((t.norm() - 1.0).abs() < 1e-12);
        let expect_phase = -g1.im * len;
        let diff = (t.arg() - expect_phase).rem_euclid(2.0 * std::f64::consts::PI);
        assert!(diff < 1e-9 || (2.0 * std::f64::consts::PI - diff) < 1e-9);
        // Evanescent mode 5 decays.
        let g5 = wg.mode_params(5, 15e9).unwrap().gamma;
        let t5 = s.get(9, 4);
        assert!((t5.norm() - (-g5.re * len).exp()).abs() < 1e-12);
        assert!(t5.norm() < 1.0);
        // Reflection blocks are zero.
        assert_eq!(s.get(0, 0).norm(), 0.0);
    }

    #[test]
    fn cascade_neutral_element() {
        let a = random_passive(6, 7);
        let id = ScatteringMatrix::identity_through(6);
        let left = cascade(&a, &id).unwrap();
        let right = cascade(&id, &a).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert!((left.get(i, j) - a.get(i, j)).norm() < 1e-12);
                assert!((right.get(i, j) - a.get(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cascade_of_guides_adds_lengths() {
        let wg = wr62();
        let modes = 8;
        let f = 15e9;
        let s1 = uniform_guide_smatrix(&wg, 3e-3, modes, f).unwrap();
        let s2 = uniform_guide_smatrix(&wg, 4.5e-3, modes, f).unwrap();
        let sum = uniform_guide_smatrix(&wg, 7.5e-3, modes, f).unwrap();
        let got = cascade(&s1, &s2).unwrap();
        for i in 0..2 * modes {
            for j in 0..2 * modes {
                assert!((got.get(i, j) - sum.get(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cascade_is_associative() {
        let a = random_passive(5, 11);
        let b = random_passive(5, 22);
        let c = random_passive(5, 33);
        let left = cascade(&cascade(&a, &b).unwrap(), &c).unwrap();
        let right = cascade(&a, &cascade(&b, &c).unwrap()).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..10 {
            for j in 0..10 {
                num += (left.get(i, j) - right.get(i, j)).norm_sqr();
                den += right.get(i, j).norm_sqr();
            }
        }
        assert!(num.sqrt() <= 1e-10 * den.sqrt());
    }

    #[test]
    fn cascade_preserves_passivity() {
        let a = random_passive(4, 101);
        let b = random_passive(4, 202);
        let c = cascade(&a, &b).unwrap();
        let top = c.propagating_max_singular_value(4).unwrap();
        assert!(top <= 1.0 + 1e-9, "top singular value {top}");
    }

    #[test]
    fn cascade_rejects_mode_mismatch() {
        let a = random_passive(3, 1);
        let b = random_passive(4, 2);
        assert!(matches!(cascade(&a, &b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn singular_feedback_is_detected() {
        // Build S22_left = S11_right = I so the feedback operator vanishes.
        let modes = 3;
        let n = 2 * modes;
        let mut m = Mat::<c64>::zeros(n, n);
        for i in 0..modes {
            m[(modes + i, modes + i)] = c64::new(1.0, 0.0); // S22 = I
        }
        let left = ScatteringMatrix::from_mat(modes, m.clone()).unwrap();
        let mut m2 = Mat::<c64>::zeros(n, n);
        for i in 0..modes {
            m2[(i, i)] = c64::new(1.0, 0.0); // S11 = I
        }
        let right = ScatteringMatrix::from_mat(modes, m2).unwrap();
        assert!(matches!(
            cascade(&left, &right),
            Err(Error::SingularCascade { .. })
        ));
    }

    #[test]
    fn network_validation() {
        let wg = wr62();
        assert!(Network::new(wg, vec![]).is_err());

        // Posts of radius 2 mm spaced 3 mm apart overlap.
        let p = post(3e-3, 2e-3);
        let q = post(-5e-3, 2e-3);
        let bad = Network::new(
            wg,
            vec![
                NetworkElement::Junction(p),
                NetworkElement::UniformGuide { length: 3e-3 },
                NetworkElement::Junction(q),
            ],
        );
        assert!(bad.is_err());

        // 5 mm spacing clears the 4 mm sum of radii.
        let ok = Network::new(
            wg,
            vec![
                NetworkElement::Junction(p),
                NetworkElement::UniformGuide { length: 5e-3 },
                NetworkElement::Junction(q),
            ],
        );
        assert!(ok.is_ok());

        // Adjacent junctions with no guide between them overlap outright.
        let bad2 = Network::new(
            wg,
            vec![NetworkElement::Junction(p), NetworkElement::Junction(q)],
        );
        assert!(bad2.is_err());

        let other = Waveguide::new(20e-3, 8e-3, 1.0, 1.0).unwrap();
        let foreign = PostJunction::new(other, 10e-3, 2e-3).unwrap();
        assert!(Network::new(wg, vec![NetworkElement::Junction(foreign)]).is_err());
    }

    #[test]
    fn single_junction_network_equals_junction_solve() {
        let j = post(3e-3, 2e-3);
        let modes = 30;
        let num = Numerics::new(modes);
        let net = Network::new(wr62(), vec![NetworkElement::Junction(j)]).unwrap();
        let via_net = solve_network(&net, &num, 15e9).unwrap();
        let disc = Discretization::for_modes(&j, modes).unwrap();
        let direct = crate::junction::solve_junction(&j, &disc, modes, 15e9)
            .unwrap()
            .smatrix;
        for i in 0..2 * modes {
            for jj in 0..2 * modes {
                assert_eq!(via_net.get(i, jj), direct.get(i, jj));
            }
        }
    }

    #[test]
    fn sweep_frequencies_are_uniform_and_inclusive() {
        let f = sweep_frequencies(12.4e9, 18.0e9, 5).unwrap();
        assert_eq!(f.len(), 5);
        assert_eq!(f[0], 12.4e9);
        assert_eq!(f[4], 18.0e9);
        assert!((f[2] - 15.2e9).abs() < 1.0);
        assert_eq!(sweep_frequencies(12.4e9, 18.0e9, 1).unwrap(), vec![12.4e9]);
        assert!(sweep_frequencies(18e9, 12e9, 5).is_err());
        assert!(sweep_frequencies(12e9, 18e9, 0).is_err());
    }

    #[test]
    fn single_point_sweep_matches_solve_network() {
        let j = post(3e-3, 2e-3);
        let net = Network::new(wr62(), vec![NetworkElement::Junction(j)]).unwrap();
        let num = Numerics::new(20);
        let sweep = frequency_sweep_serial(&net, &num, 15e9, 16e9, 1).unwrap();
        assert_eq!(sweep.len(), 1);
        let s = sweep[0].smatrix().expect("point solved");
        let direct = solve_network(&net, &num, 15e9).unwrap();
        assert_eq!(s.get(20, 0), direct.get(20, 0));
    }

    #[test]
    fn sweep_records_cutoff_points_instead_of_aborting() {
        let j = post(3e-3, 2e-3);
        let net = Network::new(wr62(), vec![NetworkElement::Junction(j)]).unwrap();
        let num = Numerics::new(10);
        let fc2 = wr62().cutoff_frequency(2).unwrap();
        // Three points, the middle one exactly on the m = 2 cutoff.
        let sweep = frequency_sweep_serial(&net, &num, fc2 - 1e9, fc2 + 1e9, 3).unwrap();
        assert_eq!(sweep.len(), 3);
        assert!(sweep[0].smatrix().is_some());
        assert!(matches!(
            sweep[1].outcome,
            PointOutcome::SkippedCutoff { mode: 2 }
        ));
        assert!(sweep[2].smatrix().is_some());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_sweep_is_bitwise_identical_to_serial() {
        let p1 = post(3e-3, 2e-3);
        let p2 = post(-5e-3, 2e-3);
        let net = Network::new(
            wr62(),
            vec![
                NetworkElement::Junction(p1),
                NetworkElement::UniformGuide { length: 15e-3 },
                NetworkElement::Junction(p2),
            ],
        )
        .unwrap();
        let num = Numerics::new(20);
        let serial = frequency_sweep_serial(&net, &num, 12.4e9, 18e9, 7).unwrap();
        let parallel = frequency_sweep_parallel(&net, &num, 12.4e9, 18e9, 7).unwrap();
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a.f_hz.to_bits(), b.f_hz.to_bits());
            let sa = a.smatrix().unwrap();
            let sb = b.smatrix().unwrap();
            for i in 0..sa.dim() {
                for j in 0..sa.dim() {
                    let (x, y) = (sa.get(i, j), sb.get(i, j));
                    assert_eq!(x.re.to_bits(), y.re.to_bits());
                    assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
        }
    }

    #[test]
    fn two_post_network_conserves_power() {
        let p1 = post(3e-3, 2e-3);
        let p2 = post(-5e-3, 2e-3);
        let net = Network::new(
            wr62(),
            vec![
                NetworkElement::Junction(p1),
                NetworkElement::UniformGuide { length: 15e-3 },
                NetworkElement::Junction(p2),
            ],
        )
        .unwrap();
        let num = Numerics::new(40);
        let s = solve_network(&net, &num, 15e9).unwrap();
        let s11 = s.get(0, 0);
        let s21 = s.get(40, 0);
        let power = s11.norm_sqr() + s21.norm_sqr();
        assert!((power - 1.0).abs() < 2e-3, "power {power}");
    }
}
