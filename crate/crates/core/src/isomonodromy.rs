//! Numerical Stokes factors of the linear system in mu built from (x, G, G_x).
//!
//! Canonical sectorial solutions are fixed at large |mu| by a truncated formal
//! series and carried inward along two antipodal rays; subdominance of the
//! columns is tracked by QR flags. Factors come from comparing neighbouring
//! sectors on a common circle.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::braid::Unitriangular;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ode::{dopri5, OdeOptions};
use crate::rh_solver::MetricCurve;
use crate::spectrum::{canonical_angle, stokes_rays, RayArrangement, Spectrum};
use crate::C64;

#[derive(Clone, Debug)]
pub struct OdeSystem {
    pub x: f64,
    pub u: Vec<C64>,
    pub g: CMat,
    pub gx: CMat,
    g_inv: CMat,
    /// (x/2) G^{-1} G_x
    b: CMat,
    /// x G^{-1} conj(A) G
    c: CMat,
}

impl OdeSystem {
    pub fn new(spec: &Spectrum, x: f64, g: CMat, gx: CMat) -> Result<Self> {
        let n = spec.n();
        if g.nrows() != n || gx.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.nrows() });
        }
        let g_inv = linalg::inv(&g).ok_or(Error::SingularMetric)?;
        if g_inv.iter().any(|z| !z.is_finite()) {
            return Err(Error::SingularMetric);
        }
        let abar = CMat::from_diagonal(&DVector::from_iterator(n, spec.u().iter().map(|z| z.conj())));
        let b = &g_inv * &gx * C64::new(x / 2.0, 0.0);
        let c = &g_inv * abar * &g * C64::new(x, 0.0);
        Ok(OdeSystem { x, u: spec.u().to_vec(), g, gx, g_inv, b, c })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    fn coef(&self, mu: C64) -> CMat {
        let mut m = &self.b / mu + &self.c;
        let q = C64::new(self.x, 0.0) / (mu * mu);
        for i in 0..self.n() {
            m[(i, i)] -= q * self.u[i];
        }
        m
    }

    /// -mu^{-2} x A + mu^{-1} (x/2) G^{-1} G_x + x G^{-1} conj(A) G.
    pub fn coefficient(&self, mu: C64) -> Result<CMat> {
        if mu == C64::new(0.0, 0.0) {
            return Err(Error::Parse("coefficient has a pole at mu = 0".into()));
        }
        Ok(self.coef(mu))
    }

    /// Coefficients F_0 = I, F_1, ... of G Psi = (sum F_k mu^{-k}) e^{mu x conj(A)}.
    pub fn formal_series(&self, terms: usize) -> Vec<CMat> {
        let n = self.n();
        let bt = &self.gx * &self.g_inv * C64::new(self.x / 2.0, 0.0);
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.u[i];
        }
        let ct = &self.g * a * &self.g_inv * C64::new(-self.x, 0.0);
        let ub: Vec<C64> = self.u.iter().map(|z| z.conj() * self.x).collect();
        let mut f = vec![linalg::eye(n)];
        for k in 0..terms {
            let fk = &f[k];
            let prev = if k >= 1 { f[k - 1].clone() } else { CMat::zeros(n, n) };
            let rhs = fk * C64::new(-(k as f64), 0.0) - &bt * fk - &ct * &prev;
            let mut next = CMat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        next[(i, j)] = rhs[(i, j)] / (ub[i] - ub[j]);
                    }
                }
            }
            let t = &bt * &next + &ct * fk;
            for i in 0..n {
                next[(i, i)] = -t[(i, i)] / (C64::new(k as f64 + 1.0, 0.0) + bt[(i, i)]);
            }
            f.push(next);
        }
        f
    }

    /// G^{-1} (sum_{k <= terms} F_k mu^{-k}) e^{mu x conj(A)}.
    pub fn psi_inf(&self, f: &[CMat], mu: C64, terms: usize) -> CMat {
        let n = self.n();
        let mut s = CMat::zeros(n, n);
        let mut p = C64::new(1.0, 0.0);
        for fk in f.iter().take(terms + 1) {
            s += fk * p;
            p /= mu;
        }
        let mut out = &self.g_inv * s;
        for j in 0..n {
            let e = (mu * self.x * self.u[j].conj()).exp();
            for i in 0..n {
                out[(i, j)] *= e;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct IsoOptions {
    pub rtol: f64,
    pub atol: f64,
    /// radius of the matching circle
    pub r0: f64,
    /// start radius of the ray integrations; default 25 / (x min|u_i - u_j|)
    pub r_start: Option<f64>,
    pub chunks: usize,
    /// entries of a factor below this are structural zeros
    pub entry_floor: f64,
    pub tol_iso: f64,
    pub margin_angle: f64,
    pub strict: bool,
}

impl Default for IsoOptions {
    fn default() -> Self {
        IsoOptions {
            rtol: 1e-12,
            atol: 1e-14,
            r0: 1.0,
            r_start: None,
            chunks: 24,
            entry_floor: 1e-6,
            tol_iso: 1e-4,
            margin_angle: 0.05,
            strict: true,
        }
    }
}

impl IsoOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }
}

/// Solution of Psi' = M Psi along mu = t e^{i alpha}, from t = r_start to r_end.
pub fn integrate_ray(sys: &OdeSystem, alpha: f64, r_start: f64, r_end: f64, y0: CMat, opts: &IsoOptions) -> Result<CMat> {
    let d = C64::from_polar(1.0, alpha);
    let (y, _) = dopri5(|t, y| sys.coef(d * t) * y * d, r_start, r_end, y0, &opts.ode())?;
    Ok(y)
}

/// Transport along |mu| = r from angle a to angle b, starting at I.
pub fn integrate_arc(sys: &OdeSystem, r: f64, a: f64, b: f64, opts: &IsoOptions) -> Result<CMat> {
    let (y, _) = dopri5(
        |t, y| {
            let mu = C64::from_polar(r, t);
            sys.coef(mu) * y * (C64::new(0.0, 1.0) * mu)
        },
        a,
        b,
        linalg::eye(sys.n()),
        &opts.ode(),
    )?;
    Ok(y)
}

struct Flag {
    q: CMat,
    logd: Vec<C64>,
    order: Vec<usize>,
}

fn qr_step(y: &CMat) -> (CMat, Vec<C64>) {
    let qr = y.clone().qr();
    let r = qr.r();
    let d = (0..y.ncols()).map(|i| r[(i, i)]).collect();
    (qr.q(), d)
}

/// Columns sorted from most to least recessive at infinity along alpha,
/// carried in to radius r0 with QR between chunks.
fn flag_at(sys: &OdeSystem, f: &[CMat], terms: usize, alpha: f64, r_start: f64, opts: &IsoOptions) -> Result<Flag> {
    let n = sys.n();
    let mu = C64::from_polar(r_start, alpha);
    let p = sys.psi_inf(f, mu, terms);
    let c: Vec<f64> = sys.u.iter().map(|u| (mu * sys.x * u.conj()).re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| c[a].total_cmp(&c[b]));
    let mut q = CMat::zeros(n, n);
    let mut logd = Vec::with_capacity(n);
    for (i, &o) in order.iter().enumerate() {
        let col = p.column(o);
        let nrm = col.norm();
        q.set_column(i, &(col / C64::new(nrm, 0.0)));
        logd.push(C64::new(nrm.ln(), 0.0));
    }
    let (mut q, d) = qr_step(&q);
    for (l, di) in logd.iter_mut().zip(d) {
        *l += di.ln();
    }
    let k = opts.chunks.max(1);
    for c in 0..k {
        let a = r_start + (opts.r0 - r_start) * c as f64 / k as f64;
        let b = r_start + (opts.r0 - r_start) * (c + 1) as f64 / k as f64;
        let y = integrate_ray(sys, alpha, a, b, q, opts)?;
        let (q2, d) = qr_step(&y);
        q = q2;
        for (l, di) in logd.iter_mut().zip(d) {
            *l += di.ln();
        }
    }
    Ok(Flag { q, logd, order })
}

fn null_vector(m: &CMat) -> DVector<C64> {
    let (r, c) = m.shape();
    let mut sq = CMat::zeros(c.max(r), c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let idx = svd.singular_values.argmin().0;
    vt.row(idx).adjoint()
}

/// Ray directions bounding sector j: the bisector of the Stokes rays
/// -theta_j, -theta_{j-1} and its opposite.
pub fn sector_angles(arr: &RayArrangement, j: i64) -> (f64, f64) {
    let hi = -arr.theta(j) + 0.5 * (arr.theta(j) - arr.theta(j - 1));
    (hi, hi - PI)
}

fn distance_to_rays(arr: &RayArrangement, alpha: f64) -> f64 {
    arr.separating
        .iter()
        .map(|s| canonical_angle(alpha + s.theta).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Canonical solution of sector j normalized at the matching circle.
fn sector_solution(
    sys: &OdeSystem,
    arr: &RayArrangement,
    f: &[CMat],
    terms: usize,
    j: i64,
    r_start: f64,
    opts: &IsoOptions,
) -> Result<CMat> {
    let n = sys.n();
    let (hi, lo) = sector_angles(arr, j);
    let upper = flag_at(sys, f, terms, hi, r_start, opts)?;
    let lower = flag_at(sys, f, terms, lo, r_start, opts)?;
    let t = integrate_arc(sys, opts.r0, lo, hi, opts)?;
    let q2 = t * &lower.q;
    let mut psi = CMat::zeros(n, n);
    for i in 0..n {
        let k = i + 1;
        let mut m = CMat::zeros(n, n + 1);
        m.view_mut((0, 0), (n, k)).copy_from(&upper.q.columns(0, k));
        m.view_mut((0, k), (n, n - k + 1)).copy_from(&(-q2.columns(0, n - k + 1)));
        let v = null_vector(&m);
        let p = upper.q.columns(0, k) * v.rows(0, k);
        let a = upper.q.adjoint() * &p;
        let col = p * (upper.logd[i].exp() / a[i]);
        psi.set_column(upper.order[i], &col);
    }
    Ok(psi)
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorReport {
    pub index: usize,
    pub label: (usize, usize),
    pub entry: [f64; 2],
    pub spurious: f64,
    pub diag_error: f64,
    pub det_error: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NumericStokesReport {
    pub x: f64,
    pub r_start: f64,
    pub terms: usize,
    pub factors: Vec<FactorReport>,
    #[serde(skip)]
    pub k: Vec<CMat>,
    #[serde(skip)]
    pub s_rec: CMat,
    pub s_rec_entries: Vec<Vec<[f64; 2]>>,
    pub halfturn_residual: f64,
    pub structure_ok: bool,
    pub min_ray_distance: f64,
}

fn entries(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn recover_stokes(sys: &OdeSystem, arr: &RayArrangement, opts: &IsoOptions) -> Result<NumericStokesReport> {
    let n = sys.n();
    let m = arr.m;
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            gap = gap.min((sys.u[i] - sys.u[j]).norm());
        }
    }
    let r_start = opts.r_start.unwrap_or((25.0 / (sys.x * gap)).max(2.0 * opts.r0));
    // optimal truncation of the divergent series sits near |mu| x gap terms
    let terms = ((sys.x * gap * r_start) as usize).clamp(1, 200);
    let f = sys.formal_series(terms);

    let mut min_dist = f64::INFINITY;
    for j in 1..=(2 * m + 1) as i64 {
        let (hi, lo) = sector_angles(arr, j);
        min_dist = min_dist.min(distance_to_rays(arr, hi)).min(distance_to_rays(arr, lo));
    }
    if min_dist < opts.margin_angle {
        return Err(Error::StiffnessFailure(format!("integration ray within {min_dist:.3e} of a Stokes ray")));
    }

    let psis = (1..=(2 * m + 1) as i64)
        .map(|j| sector_solution(sys, arr, &f, terms, j, r_start, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut ks = Vec::with_capacity(2 * m);
    let mut factors = Vec::with_capacity(2 * m);
    let mut structure_ok = true;
    for j in 0..2 * m {
        let (a, _) = sector_angles(arr, j as i64 + 1);
        let (b, _) = sector_angles(arr, j as i64 + 2);
        let t = integrate_arc(sys, opts.r0, a, b, opts)?;
        let lhs = t * &psis[j];
        let mut k = lhs.lu().solve(&psis[j + 1]).ok_or(Error::SingularMetric)?;
        let (la, lb) = arr.label(j as i64 + 1);
        let (pa, pb) = (la - 1, lb - 1);
        let mut spurious: f64 = 0.0;
        let mut diag_error: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r == c {
                    diag_error = diag_error.max((k[(r, c)] - 1.0).norm());
                } else if (r, c) != (pa, pb) {
                    spurious = spurious.max(k[(r, c)].norm());
                }
            }
        }
        let det_error = (linalg::det(&k) - 1.0).norm();
        let ok = spurious < opts.entry_floor && diag_error < opts.entry_floor;
        if !ok {
            structure_ok = false;
            if opts.strict {
                return Err(Error::StructureViolation {
                    factor: j + 1,
                    detail: format!("spurious {spurious:.3e}, diagonal {diag_error:.3e} at x = {}", sys.x),
                });
            }
        }
        factors.push(FactorReport {
            index: j + 1,
            label: (la, lb),
            entry: [k[(pa, pb)].re, k[(pa, pb)].im],
            spurious,
            diag_error,
            det_error,
            ok,
        });
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                if (k[(r, c)] - target).norm() < opts.entry_floor {
                    k[(r, c)] = target;
                }
            }
        }
        ks.push(k);
    }
    let s_rec = ks[..m].iter().fold(linalg::eye(n), |acc, k| acc * k);
    let halfturn_residual = halfturn_residual(&ks);
    Ok(NumericStokesReport {
        x: sys.x,
        r_start,
        terms,
        factors,
        s_rec_entries: entries(&s_rec),
        k: ks,
        s_rec,
        halfturn_residual,
        structure_ok,
        min_ray_distance: min_dist,
    })
}

/// max_j |K_{m+j} - (K_j^{-1})^t| over a full sweep of 2m factors.
pub fn halfturn_residual(ks: &[CMat]) -> f64 {
    let m = ks.len() / 2;
    let mut worst: f64 = 0.0;
    for j in 0..m {
        let want = linalg::inv(&ks[j]).map(|i| i.transpose());
        worst = worst.max(want.map_or(f64::INFINITY, |w| linalg::dist(&ks[m + j], &w)));
    }
    worst
}

pub fn halfturn_symmetry_check(report: &NumericStokesReport, tol: f64) -> bool {
    report.k.len() == 2 * (report.k.len() / 2) && halfturn_residual(&report.k) < tol
}

#[derive(Clone, Debug, Serialize)]
pub struct IsoReport {
    pub deviation: f64,
    pub input_error: Option<f64>,
    pub per_x: Vec<NumericStokesReport>,
    pub halfturn_ok: bool,
    pub structure_ok: bool,
    pub pass: bool,
}

/// Stokes data at the selected curve points and their spread across x.
pub fn verify_isomonodromy(
    curve: &MetricCurve,
    indices: &[usize],
    input: Option<&Unitriangular>,
    opts: &IsoOptions,
) -> Result<IsoReport> {
    if indices.len() < 2 {
        return Err(Error::Parse("need at least two x values".into()));
    }
    let arr = stokes_rays(&curve.spec, true)?;
    let mut per_x = Vec::with_capacity(indices.len());
    for &i in indices {
        let g = curve.g.get(i).ok_or(Error::IndexOutOfRange { index: i, max: curve.g.len() })?;
        let sys = OdeSystem::new(&curve.spec, curve.xs[i], g.clone(), curve.gx[i].clone())?;
        per_x.push(recover_stokes(&sys, &arr, opts)?);
    }
    let mut deviation: f64 = 0.0;
    for a in 0..per_x.len() {
        for b in a + 1..per_x.len() {
            deviation = deviation.max(linalg::dist(&per_x[a].s_rec, &per_x[b].s_rec));
        }
    }
    let input_error = input.map(|s| {
        let sf = linalg::from_real(&s.to_f64());
        per_x.iter().map(|r| linalg::dist(&r.s_rec, &sf)).fold(0.0, f64::max)
    });
    let halfturn_ok = per_x.iter().all(|r| halfturn_symmetry_check(r, opts.tol_iso));
    let structure_ok = per_x.iter().all(|r| r.structure_ok);
    let pass = deviation < opts.tol_iso && input_error.is_none_or(|e| e < opts.tol_iso) && halfturn_ok && structure_ok;
    Ok(IsoReport { deviation, input_error, per_x, halfturn_ok, structure_ok, pass })
}

/// Index of the curve point closest to x in log scale.
pub fn nearest_index(xs: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if (v.ln() - x.ln()).abs() < (xs[best].ln() - x.ln()).abs() {
            best = i;
        }
    }
    best
}
