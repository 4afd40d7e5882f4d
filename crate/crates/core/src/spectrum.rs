//! Stokes rays, separating rays, sectors and ray-crossing sequences.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

pub const TOL_ANGLE: f64 = 1e-12;

/// Branch (-pi, pi].
pub fn canonical_angle(a: f64) -> f64 {
    let mut a = a % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

fn arg(z: C64) -> f64 {
    let a = z.arg();
    if a == -PI {
        PI
    } else {
        a
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    u: Vec<C64>,
}

impl Spectrum {
    pub fn new(u: Vec<C64>) -> Result<Self> {
        for i in 0..u.len() {
            for j in i + 1..u.len() {
                if (u[i] - u[j]).norm() <= 1e-14 * (1.0 + u[i].norm().max(u[j].norm())) {
                    return Err(Error::DegenerateSpectrum(i + 1, j + 1));
                }
            }
        }
        Ok(Spectrum { u })
    }

    /// Cube roots of unity (1, w, w^2).
    pub fn roots_of_unity(n: usize) -> Self {
        let u = (0..n).map(|k| C64::from_polar(1.0, TAU * k as f64 / n as f64)).collect();
        Spectrum { u }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self) -> &[C64] {
        &self.u
    }

    pub fn rotated(&self, phi: f64) -> Self {
        let r = C64::from_polar(1.0, phi);
        Spectrum { u: self.u.iter().map(|z| z * r).collect() }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Spectrum { u: perm.iter().map(|&i| self.u[i]).collect() }
    }

    /// Angle of R_{jl}, 0-based indices.
    pub fn ray_angle(&self, j: usize, l: usize) -> f64 {
        canonical_angle(arg(self.u[j] - self.u[l]) - FRAC_PI_2)
    }

    /// Sorted by real part descending, ties by imaginary part descending.
    pub fn is_admissibly_ordered(&self) -> bool {
        self.u.windows(2).all(|w| order_key(w[0], w[1]) == std::cmp::Ordering::Less)
    }
}

fn order_key(a: C64, b: C64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub angle: f64,
    pub pair: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatingRay {
    pub theta: f64,
    pub pair: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayArrangement {
    pub rays: Vec<Ray>,
    pub separating: Vec<SeparatingRay>,
    pub m: usize,
}

impl RayArrangement {
    /// theta_k for any k >= 1 (1-based), continued by theta_{k+2m} = theta_k + 2pi.
    pub fn theta(&self, k: i64) -> f64 {
        let p = self.separating.len() as i64;
        let q = (k - 1).div_euclid(p);
        let r = (k - 1).rem_euclid(p) as usize;
        self.separating[r].theta + TAU * q as f64
    }

    /// Label of R_k, cyclic in k.
    pub fn label(&self, k: i64) -> (usize, usize) {
        let p = self.separating.len() as i64;
        self.separating[(k - 1).rem_euclid(p) as usize].pair
    }

    pub fn min_gap(&self) -> f64 {
        let p = self.separating.len() as i64;
        (1..=p).map(|k| self.theta(k + 1) - self.theta(k)).fold(f64::INFINITY, f64::min)
    }
}

/// All n(n-1) labeled Stokes rays and the separating-ray numbering.
pub fn stokes_rays(spec: &Spectrum, strict: bool) -> Result<RayArrangement> {
    let n = spec.n();
    let mut rays = Vec::with_capacity(n * n.saturating_sub(1));
    for j in 0..n {
        for l in 0..n {
            if j != l {
                rays.push(Ray { angle: spec.ray_angle(j, l), pair: (j + 1, l + 1) });
            }
        }
    }
    if strict {
        if let Some((a, b)) = coinciding_pair(&rays, TOL_ANGLE) {
            return Err(Error::NonGenericRays(a, b));
        }
    }
    let mut separating: Vec<SeparatingRay> = rays
        .iter()
        .map(|r| {
            let mut theta = (-r.angle).rem_euclid(TAU) + 0.0;
            if TAU - theta <= TOL_ANGLE {
                theta = 0.0;
            }
            SeparatingRay { theta, pair: r.pair }
        })
        .collect();
    separating.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.pair.cmp(&b.pair)));
    rays.sort_by(|a, b| a.angle.total_cmp(&b.angle).then(a.pair.cmp(&b.pair)));
    Ok(RayArrangement { rays, separating, m: n * n.saturating_sub(1) / 2 })
}

fn coinciding_pair(rays: &[Ray], tol: f64) -> Option<((usize, usize), (usize, usize))> {
    for (i, a) in rays.iter().enumerate() {
        for b in &rays[i + 1..] {
            let d = canonical_angle(a.angle - b.angle).abs();
            if d <= tol {
                return Some((a.pair, b.pair));
            }
        }
    }
    None
}

/// Condition (PD): all ordered-pair ray angles distinct modulo 2pi.
pub fn check_pd(spec: &Spectrum) -> bool {
    check_pd_tol(spec, TOL_ANGLE)
}

pub fn check_pd_tol(spec: &Spectrum, tol: f64) -> bool {
    match stokes_rays(spec, false) {
        Ok(arr) => coinciding_pair(&arr.rays, tol).is_none(),
        Err(_) => false,
    }
}

/// Open interval of admissible delta for an admissibly ordered spectrum.
///
/// Two requirements: every jump entry decays along both contour rays
/// (all rays R_{jl}, j < l, lie strictly inside (-pi + delta/2, delta/2)),
/// and the ordering stays strict on the overlap (-pi, -pi + delta).
pub fn delta_interval(spec: &Spectrum) -> Result<(f64, f64)> {
    if !spec.is_admissibly_ordered() {
        return Err(Error::NoAdmissibleDelta);
    }
    let n = spec.n();
    let mut lo: f64 = 0.0;
    let mut hi: f64 = FRAC_PI_2;
    for j in 0..n {
        for l in j + 1..n {
            let r = spec.ray_angle(j, l);
            lo = lo.max(2.0 * r);
            hi = hi.min(r + PI).min(2.0 * (r + PI));
        }
    }
    if hi - lo <= TOL_ANGLE {
        return Err(Error::NoAdmissibleDelta);
    }
    Ok((lo, hi))
}

/// Deterministic midpoint of the feasible interval.
pub fn choose_delta(spec: &Spectrum) -> Result<f64> {
    if spec.n() <= 1 {
        return Ok(FRAC_PI_4);
    }
    let (lo, hi) = delta_interval(spec)?;
    Ok(0.5 * (lo + hi))
}

/// Angular distance from the contour rays to the nearest place where a jump
/// entry stops decaying.
pub fn decay_margin(spec: &Spectrum, delta: f64) -> f64 {
    let n = spec.n();
    let mut margin = FRAC_PI_2;
    for j in 0..n {
        for l in j + 1..n {
            let r = spec.ray_angle(j, l);
            margin = margin.min(delta / 2.0 - r).min(r + PI - delta / 2.0);
        }
    }
    margin
}

/// Permutation `p` with `u[p[0]], u[p[1]], ...` admissibly ordered.
pub fn admissible_order(spec: &Spectrum, delta: Option<f64>) -> Result<Vec<usize>> {
    let mut p: Vec<usize> = (0..spec.n()).collect();
    p.sort_by(|&a, &b| order_key(spec.u[a], spec.u[b]));
    let sorted = spec.permuted(&p);
    if spec.n() > 1 {
        let (lo, hi) = delta_interval(&sorted)?;
        if let Some(d) = delta {
            if !(d > lo && d < hi) {
                return Err(Error::NoAdmissibleDelta);
            }
        }
    }
    Ok(p)
}

/// Sector data attached to an admissible spectrum and its delta.
#[derive(Clone, Debug)]
pub struct SectorSpec {
    pub delta: f64,
    pub arrangement: RayArrangement,
}

impl SectorSpec {
    pub fn new(spec: &Spectrum) -> Result<Self> {
        let delta = choose_delta(spec)?;
        Ok(SectorSpec { delta, arrangement: stokes_rays(spec, true)? })
    }

    /// Argument range of Omega_k at infinity.
    pub fn omega_inf(&self, k: i64) -> (f64, f64) {
        let s = (k - 1) as f64 * PI;
        (-PI - s, self.delta - s)
    }

    /// Argument range of Omega_j.
    pub fn omega(&self, j: i64) -> (f64, f64) {
        let m = self.arrangement.m as i64;
        (-self.arrangement.theta(m + j), -self.arrangement.theta(j) + self.delta)
    }

    pub fn contour_minus(&self) -> f64 {
        -PI + self.delta / 2.0
    }

    pub fn contour_plus(&self) -> f64 {
        self.delta / 2.0
    }
}

/// Adjacent transpositions l_1, l_2, ... met while rotating the coordinate by phi.
pub fn crossing_sequence(spec: &Spectrum, phi: f64) -> Result<Vec<usize>> {
    if !(phi > 0.0 && phi <= TAU) {
        return Err(Error::BadRotation(phi));
    }
    if !spec.is_admissibly_ordered() {
        return Err(Error::NoAdmissibleDelta);
    }
    let arr = stokes_rays(spec, true)?;
    let full = phi == TAU;
    if !full {
        for s in &arr.separating {
            if (phi - s.theta).abs() <= TOL_ANGLE {
                return Err(Error::RayCollision { phi, theta: s.theta });
            }
        }
    }
    let mut order: Vec<usize> = (1..=spec.n()).collect();
    let mut seq = Vec::new();
    for s in &arr.separating {
        if s.theta >= phi {
            break;
        }
        let (a, b) = s.pair;
        let pa = order.iter().position(|&v| v == a).expect("label present");
        let pb = order.iter().position(|&v| v == b).expect("label present");
        assert_eq!(pb, pa + 1, "ray {:?} does not label adjacent positions in {:?}", s.pair, order);
        seq.push(pa + 1);
        order.swap(pa, pb);
    }
    if full {
        debug_assert!(order.iter().enumerate().all(|(i, &v)| v == i + 1));
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn omega3() -> Spectrum {
        Spectrum::roots_of_unity(3)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn cube_roots_ray_12() {
        let s = omega3();
        // direct: arg(1 - w) = -pi/6
        let direct = (s.u()[0] - s.u()[1]).arg() - FRAC_PI_2;
        assert!(close(s.ray_angle(0, 1), direct));
        assert!(close(s.ray_angle(0, 1), -2.0 * PI / 3.0));
    }

    #[test]
    fn two_point_rays() {
        let s = Spectrum::new(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]).unwrap();
        let arr = stokes_rays(&s, true).unwrap();
        assert_eq!(arr.m, 1);
        let angles: Vec<f64> = arr.rays.iter().map(|r| r.angle).collect();
        assert!(close(angles[0], -FRAC_PI_2) && close(angles[1], FRAC_PI_2));
    }

    #[test]
    fn cube_roots_gaps_are_equal() {
        let arr = stokes_rays(&omega3(), true).unwrap();
        assert_eq!(arr.rays.len(), 6);
        for w in arr.rays.windows(2) {
            assert!(close(w[1].angle - w[0].angle, PI / 3.0));
        }
        assert!(close(arr.min_gap(), PI / 3.0));
    }

    #[test]
    fn pd_examples() {
        let line = Spectrum::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(2.0, 0.0)]).unwrap();
        assert!(!check_pd(&line));
        assert!(check_pd(&omega3()));
        assert!(check_pd(&Spectrum::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap()));
        assert!(matches!(stokes_rays(&line, true), Err(Error::NonGenericRays(..))));
    }

    #[test]
    fn degenerate_rejected() {
        let e = Spectrum::new(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(e, Err(Error::DegenerateSpectrum(1, 2)));
    }

    #[test]
    fn admissible_order_examples() {
        let s = Spectrum::new(vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        assert_eq!(admissible_order(&s, Some(0.1)).unwrap(), vec![1, 0]);
        assert_eq!(admissible_order(&omega3(), None).unwrap(), vec![0, 1, 2]);
        let t = Spectrum::new(vec![C64::new(0.0, 1.0), C64::new(0.0, -1.0)]).unwrap();
        assert_eq!(admissible_order(&t, None).unwrap(), vec![0, 1]);
    }

    #[test]
    fn delta_examples() {
        let s = Spectrum::new(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]).unwrap();
        assert!(close(choose_delta(&s).unwrap(), FRAC_PI_4));
        let one = Spectrum::new(vec![C64::new(2.0, 0.0)]).unwrap();
        assert!(close(choose_delta(&one).unwrap(), FRAC_PI_4));
        let w = omega3();
        let d = choose_delta(&w).unwrap();
        // brute force over pairs: every j<l ray strictly inside (-pi + d/2, d/2)
        for j in 0..3 {
            for l in j + 1..3 {
                let r = w.ray_angle(j, l);
                assert!(r < d / 2.0 && r > -PI + d / 2.0);
                assert!((w.u()[j] - w.u()[l]).arg() - d / 2.0 < FRAC_PI_2);
            }
        }
        assert!(close(d, PI / 6.0));
        let bad = w.permuted(&[2, 1, 0]);
        assert_eq!(choose_delta(&bad), Err(Error::NoAdmissibleDelta));
    }

    #[test]
    fn lemma_r1_adjacent_and_upper_rays_in_lower_half() {
        let arr = stokes_rays(&omega3(), true).unwrap();
        let (a, b) = arr.separating[0].pair;
        assert_eq!(b, a + 1);
        for r in &arr.rays {
            if r.pair.0 < r.pair.1 {
                assert!(r.angle > -PI && r.angle <= 0.0);
            }
        }
    }

    #[test]
    fn crossing_examples() {
        let s = Spectrum::new(vec![C64::new(1.0, 0.3), C64::new(-1.0, 0.0)]).unwrap();
        assert_eq!(crossing_sequence(&s, TAU).unwrap(), vec![1, 1]);
        let w = omega3();
        let seq = crossing_sequence(&w, TAU).unwrap();
        assert_eq!(seq.len(), 6);
        assert_eq!(seq, vec![2, 1, 2, 1, 2, 1]);
        let s2 = Spectrum::new(vec![C64::new(1.0, -0.5), C64::new(-1.0, 0.0)]).unwrap();
        let arr = stokes_rays(&s2, true).unwrap();
        assert!(crossing_sequence(&s2, arr.theta(1) / 2.0).unwrap().is_empty());
        assert!(matches!(crossing_sequence(&w, PI / 3.0), Err(Error::RayCollision { .. })));
    }

    #[test]
    fn sectors_for_cube_roots() {
        let sec = SectorSpec::new(&omega3()).unwrap();
        let (lo, hi) = sec.omega(1);
        let (lo_inf, hi_inf) = sec.omega_inf(1);
        assert!(close(lo, lo_inf) && close(hi, hi_inf));
        let (lo2, _) = sec.omega(1 + sec.arrangement.m as i64);
        assert!(close(lo2, sec.omega_inf(2).0));
    }

    fn arb_spectrum() -> impl Strategy<Value = Spectrum> {
        (2usize..=5)
            .prop_flat_map(|n| prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n))
            .prop_filter_map("generic", |pts| {
                let s = Spectrum::new(pts.into_iter().map(|(a, b)| C64::new(a, b)).collect()).ok()?;
                let p = admissible_order(&s, None).ok()?;
                let s = s.permuted(&p);
                check_pd_tol(&s, 1e-6).then_some(s)
            })
    }

    proptest! {
        #[test]
        fn full_turn_has_2m_entries(s in arb_spectrum()) {
            let seq = crossing_sequence(&s, TAU).unwrap();
            prop_assert_eq!(seq.len(), s.n() * (s.n() - 1));
        }

        #[test]
        fn upper_labels_lie_in_lower_half_plane(s in arb_spectrum()) {
            for j in 0..s.n() {
                for l in j + 1..s.n() {
                    let a = s.ray_angle(j, l);
                    prop_assert!(a > -PI && a <= 0.0);
                }
            }
        }

        #[test]
        fn rays_rotate_with_spectrum(s in arb_spectrum(), phi in -3.0f64..3.0) {
            let r = s.rotated(phi);
            for j in 0..s.n() {
                for l in 0..s.n() {
                    if j != l {
                        let d = canonical_angle(r.ray_angle(j, l) - s.ray_angle(j, l) - phi);
                        prop_assert!(d.abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn separating_numbering_is_cyclic(s in arb_spectrum(), k in 1i64..20) {
            let arr = stokes_rays(&s, true).unwrap();
            let p = 2 * arr.m as i64;
            prop_assert_eq!(arr.label(k + p), arr.label(k));
            prop_assert!((arr.theta(k + p) - arr.theta(k) - TAU).abs() < 1e-12);
        }
    }
}
