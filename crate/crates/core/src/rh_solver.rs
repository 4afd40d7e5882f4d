//! Collocation solver for the Riemann-Hilbert problem on the two contour rays.
//!
//! Y = I + C[V] with density V supported on the truncated line, nodes uniform
//! in log|mu|. The collocation equation for U = Y_- at node j reads
//! U_j - sum_k W_jk U_k (J_k - I) = I, V = U (J - I).

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::braid::Unitriangular;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::rh_kernel::{hermitian_witness, positivity_certificate, JumpData, SampleOptions, Side};
use crate::spectrum::{decay_margin, Spectrum};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Auto,
    Direct,
    Neumann,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol_jump: f64,
    pub tol_trunc: f64,
    /// Overrides the automatic log-spacing of nodes.
    pub step: Option<f64>,
    pub method: Method,
    pub force: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_jump: 1e-10, tol_trunc: 1e-16, step: None, method: Method::Auto, force: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContourDiscretization {
    pub delta: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub h: f64,
    pub nodes_per_ray: usize,
    pub quadrature: String,
    /// log-moduli shared by both rays
    #[serde(skip)]
    pub s: Vec<f64>,
    /// Gamma_- nodes first, then Gamma_+
    #[serde(skip)]
    pub z: Vec<C64>,
    #[serde(skip)]
    pub w: Vec<C64>,
}

impl ContourDiscretization {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn side(&self, k: usize) -> Side {
        if k < self.nodes_per_ray {
            Side::Minus
        } else {
            Side::Plus
        }
    }
}

/// Node step for a given decay margin: sinc interpolation between nodes
/// converges like exp(-pi margin / h).
pub fn auto_step(margin: f64, tol_jump: f64) -> f64 {
    PI * margin / ((1.0 / tol_jump).ln() + 4.0)
}

pub fn discretize(jd: &JumpData, opts: &SolverOptions) -> Result<ContourDiscretization> {
    let margin = decay_margin(&jd.spec, jd.delta);
    let h = opts.step.unwrap_or_else(|| auto_step(margin, opts.tol_jump));
    let mut disc = ContourDiscretization {
        delta: jd.delta,
        r_min: 1.0,
        r_max: 1.0,
        h,
        nodes_per_ray: 0,
        quadrature: "trapezoid in log|mu|".into(),
        s: Vec::new(),
        z: Vec::new(),
        w: Vec::new(),
    };
    if jd.is_trivial() {
        return Ok(disc);
    }
    let r_max = jd.truncation_radius(opts.tol_trunc);
    let smax = r_max.ln();
    let half = (smax / h).ceil() as i64;
    let s: Vec<f64> = (-half..=half).map(|k| k as f64 * h).collect();
    let d = jd.ray_dir();
    let mut z = Vec::with_capacity(2 * s.len());
    let mut w = Vec::with_capacity(2 * s.len());
    for &sk in &s {
        let zk = -d * sk.exp();
        z.push(zk);
        w.push(-zk * h);
    }
    for &sk in &s {
        let zk = d * sk.exp();
        z.push(zk);
        w.push(zk * h);
    }
    if !opts.force {
        for &zk in &z {
            let wit = hermitian_witness(jd, zk)?;
            if !wit.cholesky_ok {
                return Err(Error::CertificationMissing(format!(
                    "reflected jump sum not positive at mu = {zk}, x = {}",
                    jd.x
                )));
            }
        }
    }
    disc.r_min = (-(half as f64) * h).exp();
    disc.r_max = (half as f64 * h).exp();
    disc.nodes_per_ray = s.len();
    disc.s = s;
    disc.z = z;
    disc.w = w;
    Ok(disc)
}

#[derive(Clone, Debug, Serialize)]
pub struct RhSolution {
    #[serde(skip)]
    pub jd: JumpData,
    pub disc: ContourDiscretization,
    #[serde(skip)]
    pub v: Vec<CMat>,
    pub method: String,
    pub iterations: usize,
    #[serde(skip)]
    pub g: CMat,
    #[serde(skip)]
    pub y0_prime: CMat,
}

fn two_pi_i() -> C64 {
    C64::new(0.0, 2.0 * PI)
}

/// Collocation weight W_jk of the boundary value Y_- at node j.
fn weight(disc: &ContourDiscretization, j: usize, k: usize) -> C64 {
    if j == k {
        return C64::new(-0.5, 0.0);
    }
    let k_ray = disc.nodes_per_ray;
    let same = (j < k_ray) == (k < k_ray);
    let dz = (disc.z[k] - disc.z[j]) * two_pi_i();
    if same {
        // alternating-point rule for the principal value
        if (j as i64 - k as i64).rem_euclid(2) == 1 {
            2.0 * disc.w[k] / dz
        } else {
            C64::new(0.0, 0.0)
        }
    } else {
        disc.w[k] / dz
    }
}

fn jumps(jd: &JumpData, disc: &ContourDiscretization) -> Vec<CMat> {
    let e = linalg::eye(jd.n());
    (0..disc.len()).map(|k| jd.line_jump(disc.side(k), disc.z[k]) - &e).collect()
}

fn solve_direct(n: usize, disc: &ContourDiscretization, d: &[CMat]) -> Vec<CMat> {
    let nn = disc.len();
    let dim = nn * n;
    let mut m = Mat::<C64>::zeros(dim, dim);
    for j in 0..nn {
        for k in 0..nn {
            let wjk = weight(disc, j, k);
            if wjk == C64::new(0.0, 0.0) {
                continue;
            }
            for a in 0..n {
                for b in 0..n {
                    m[(j * n + a, k * n + b)] -= wjk * d[k][(b, a)];
                }
            }
        }
    }
    for i in 0..dim {
        m[(i, i)] += C64::new(1.0, 0.0);
    }
    let mut rhs = Mat::<C64>::zeros(dim, n);
    for j in 0..nn {
        for r in 0..n {
            rhs[(j * n + r, r)] = C64::new(1.0, 0.0);
        }
    }
    let lu = m.partial_piv_lu();
    lu.solve_in_place(&mut rhs);
    (0..nn).map(|j| CMat::from_fn(n, n, |r, a| rhs[(j * n + a, r)])).collect()
}

/// Fixed-point iteration U <- I + W (U D); None when it fails to contract.
fn solve_neumann(n: usize, disc: &ContourDiscretization, d: &[CMat]) -> Option<(Vec<CMat>, usize)> {
    let nn = disc.len();
    let e = linalg::eye(n);
    let mut u = vec![e.clone(); nn];
    let w: Vec<Vec<C64>> = (0..nn).map(|j| (0..nn).map(|k| weight(disc, j, k)).collect()).collect();
    let mut prev_change = f64::INFINITY;
    let mut growth = 0;
    for it in 1..=400 {
        let p: Vec<CMat> = u.iter().zip(d).map(|(uk, dk)| uk * dk).collect();
        let mut change: f64 = 0.0;
        let mut next = Vec::with_capacity(nn);
        for (j, wj) in w.iter().enumerate() {
            let mut acc = e.clone();
            for (k, wjk) in wj.iter().enumerate() {
                if *wjk != C64::new(0.0, 0.0) {
                    acc += &p[k] * *wjk;
                }
            }
            change = change.max(linalg::dist(&acc, &u[j]));
            next.push(acc);
        }
        u = next;
        if !change.is_finite() {
            return None;
        }
        if change < 1e-15 {
            return Some((u, it));
        }
        if change > prev_change {
            growth += 1;
            if growth > 3 {
                return None;
            }
        }
        prev_change = change;
    }
    None
}

pub fn solve_rh(jd: &JumpData, disc: &ContourDiscretization, opts: &SolverOptions) -> Result<RhSolution> {
    let n = jd.n();
    if disc.is_empty() {
        return Ok(RhSolution {
            jd: jd.clone(),
            disc: disc.clone(),
            v: Vec::new(),
            method: "trivial".into(),
            iterations: 0,
            g: linalg::eye(n),
            y0_prime: CMat::zeros(n, n),
        });
    }
    let d = jumps(jd, disc);
    let sup = d.iter().map(linalg::max_abs).fold(0.0, f64::max);
    let want_neumann = match opts.method {
        Method::Neumann => true,
        Method::Direct => false,
        Method::Auto => sup < 0.5,
    };
    let (u, method, iterations) = match want_neumann.then(|| solve_neumann(n, disc, &d)).flatten() {
        Some((u, it)) => (u, "neumann".to_string(), it),
        None if opts.method == Method::Neumann => {
            return Err(Error::SolveFailure { x: jd.x, reason: "Neumann iteration diverged".into() });
        }
        None => {
            let m = if want_neumann { "direct (Neumann fallback)" } else { "direct" };
            (solve_direct(n, disc, &d), m.to_string(), 1)
        }
    };
    let v: Vec<CMat> = u.iter().zip(&d).map(|(uk, dk)| uk * dk).collect();
    if v.iter().any(|m| m.iter().any(|z| !z.is_finite())) {
        return Err(Error::SolveFailure { x: jd.x, reason: "non-finite density".into() });
    }
    let mut g = linalg::eye(n);
    let mut gp = CMat::zeros(n, n);
    for ((vk, zk), wk) in v.iter().zip(&disc.z).zip(&disc.w) {
        g += vk * (wk / (zk * two_pi_i()));
        gp += vk * (wk / (zk * zk * two_pi_i()));
    }
    let sol = RhSolution { jd: jd.clone(), disc: disc.clone(), v, method, iterations, g, y0_prime: gp };
    let jr = sol.jump_residual();
    if !(jr < opts.tol_jump.sqrt()) {
        return Err(Error::SolveFailure { x: jd.x, reason: format!("jump residual {jr:.3e}") });
    }
    Ok(sol)
}

impl RhSolution {
    pub fn n(&self) -> usize {
        self.jd.n()
    }

    fn cauchy(&self, mu: C64) -> CMat {
        let mut y = linalg::eye(self.n());
        for ((vk, zk), wk) in self.v.iter().zip(&self.disc.z).zip(&self.disc.w) {
            y += vk * (wk / ((zk - mu) * two_pi_i()));
        }
        y
    }

    /// Y off the contour; Y(0) is the limiting integral.
    pub fn eval_y(&self, mu: C64) -> Result<CMat> {
        if mu == C64::new(0.0, 0.0) {
            return Ok(self.g.clone());
        }
        if !self.disc.is_empty() {
            let r = mu.norm();
            let guard = (4.0 * self.disc.h).min(0.5);
            let near = r > 0.5 * self.disc.r_min && r < 2.0 * self.disc.r_max;
            for d in [self.jd.ray_dir(), -self.jd.ray_dir()] {
                let p = mu * d.conj();
                if near && p.re > 0.0 && p.im.abs() < guard * r {
                    return Err(Error::NearContour(format!("{mu}")));
                }
            }
        }
        Ok(self.cauchy(mu))
    }

    /// G = Y(0).
    pub fn metric(&self) -> &CMat {
        &self.g
    }

    /// G_x = 2 G [A, G^{-1} Y'(0)].
    pub fn metric_derivative(&self) -> CMat {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(self.jd.spec.u().to_vec()));
        let gi = linalg::inv(&self.g).unwrap_or_else(|| CMat::from_element(self.n(), self.n(), C64::new(f64::NAN, 0.0)));
        let inner = gi * &self.y0_prime;
        (&self.g * linalg::commutator(&a, &inner)) * C64::new(2.0, 0.0)
    }

    /// sup over midpoints between nodes of |V - Y_-(J - I)|, with V sinc-interpolated.
    pub fn jump_residual(&self) -> f64 {
        if self.disc.is_empty() {
            return 0.0;
        }
        let disc = &self.disc;
        let k_ray = disc.nodes_per_ray;
        let e = linalg::eye(self.n());
        let dir = self.jd.ray_dir();
        let mut worst: f64 = 0.0;
        for (side, off, sign) in [(Side::Minus, 0, -1.0), (Side::Plus, k_ray, 1.0)] {
            for i in 0..k_ray - 1 {
                let sm = disc.s[i] + 0.5 * disc.h;
                let zt = dir * (sign * sm.exp());
                let mut vt = CMat::zeros(self.n(), self.n());
                for k in 0..k_ray {
                    let x = (sm - disc.s[k]) / disc.h;
                    let sinc = (PI * x).sin() / (PI * x);
                    vt += &self.v[off + k] * C64::new(sinc, 0.0);
                }
                let ym = self.cauchy(zt) - &vt * C64::new(0.5, 0.0);
                let jt = self.jd.line_jump(side, zt) - &e;
                worst = worst.max(linalg::dist(&vt, &(ym * jt)));
            }
        }
        worst
    }

    /// |Y(mu) - I| far out along the bisector of the contour.
    pub fn normalization_residual(&self) -> f64 {
        let mu = self.jd.ray_dir() * C64::new(0.0, 1e12 * self.disc.r_max.max(1.0));
        linalg::dist(&self.cauchy(mu), &linalg::eye(self.n()))
    }

    pub fn symmetry_residuals(&self) -> SymmetryReport {
        let mut rep = SymmetryReport { neg: 0.0, refl: 0.0 };
        let gbar_inv = match linalg::inv(&linalg::conj(&self.g)) {
            Some(m) => m,
            None => return SymmetryReport { neg: f64::INFINITY, refl: f64::INFINITY },
        };
        for side in [1.0, -1.0] {
            let dir = self.jd.ray_dir() * C64::new(0.0, side);
            for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
                let mu = dir * r;
                let y = self.cauchy(mu);
                let neg = linalg::inv(&self.cauchy(-mu)).map(|m| m.transpose());
                rep.neg = rep.neg.max(neg.map_or(f64::INFINITY, |m| linalg::dist(&m, &y)));
                let refl = &gbar_inv * linalg::conj(&self.cauchy(mu.conj().inv()));
                rep.refl = rep.refl.max(linalg::dist(&refl, &y));
            }
        }
        rep
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SymmetryReport {
    /// |Y(-mu)^{-t} - Y(mu)|
    pub neg: f64,
    /// |conj(Y(0))^{-1} conj(Y(1/conj(mu))) - Y(mu)|
    pub refl: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PointReport {
    pub x: f64,
    pub method: String,
    pub nodes: usize,
    pub jump_residual: f64,
    pub normalization_residual: f64,
    pub symmetry: SymmetryReport,
    pub hermitian: f64,
    pub orthogonality: f64,
    pub det_error: f64,
    pub cholesky_ok: bool,
}

/// |G - conj(G)^t|, |G conj(G) - I|, |det G - 1|, Cholesky of G.
pub fn metric_checks(g: &CMat) -> (f64, f64, f64, bool) {
    let n = g.nrows();
    let herm = linalg::dist(g, &g.adjoint());
    let orth = linalg::dist(&(g * linalg::conj(g)), &linalg::eye(n));
    let det = (linalg::det(g) - 1.0).norm();
    (herm, orth, det, linalg::cholesky_ok(g))
}

pub fn point_report(sol: &RhSolution) -> PointReport {
    let (hermitian, orthogonality, det_error, cholesky_ok) = metric_checks(&sol.g);
    PointReport {
        x: sol.jd.x,
        method: sol.method.clone(),
        nodes: sol.disc.len(),
        jump_residual: sol.jump_residual(),
        normalization_residual: sol.normalization_residual(),
        symmetry: sol.symmetry_residuals(),
        hermitian,
        orthogonality,
        det_error,
        cholesky_ok,
    }
}

#[derive(Clone, Debug)]
pub struct MetricCurve {
    pub spec: Spectrum,
    pub xs: Vec<f64>,
    pub g: Vec<CMat>,
    /// G_x from the expansion of Y at 0
    pub gx: Vec<CMat>,
    pub points: Vec<PointReport>,
}

impl MetricCurve {
    pub fn n(&self) -> usize {
        self.spec.n()
    }

    /// sup over interior points of |central difference of G - G_x|.
    pub fn gx_crosscheck(&self) -> Option<f64> {
        if self.xs.len() < 3 {
            return None;
        }
        let mut worst: f64 = 0.0;
        for i in 1..self.xs.len() - 1 {
            let fd = (&self.g[i + 1] - &self.g[i - 1]) / C64::new(self.xs[i + 1] - self.xs[i - 1], 0.0);
            worst = worst.max(linalg::dist(&fd, &self.gx[i]));
        }
        Some(worst)
    }

    pub fn all_checks_below(&self, tol: &Tolerances) -> bool {
        self.points.iter().all(|p| tol.accepts(p))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tolerances {
    pub jump: f64,
    pub symmetry: f64,
    pub orthogonality: f64,
    pub det: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { jump: 1e-10, symmetry: 1e-8, orthogonality: 1e-8, det: 1e-10 }
    }
}

impl Tolerances {
    pub fn accepts(&self, p: &PointReport) -> bool {
        p.jump_residual < self.jump
            && p.normalization_residual < self.jump
            && p.symmetry.neg < self.symmetry
            && p.symmetry.refl < self.symmetry
            && p.hermitian < self.orthogonality
            && p.orthogonality < self.orthogonality
            && p.det_error < self.det
            && p.cholesky_ok
    }
}

/// Solves at one x after the caller has settled certification.
pub fn solve_at(spec: &Spectrum, s: &Unitriangular, x: f64, opts: &SolverOptions) -> Result<RhSolution> {
    let jd = JumpData::new(spec, s, x)?;
    let disc = discretize(&jd, opts)?;
    solve_rh(&jd, &disc, opts)
}

pub fn metric_curve(spec: &Spectrum, s: &Unitriangular, xs: &[f64], opts: &SolverOptions) -> Result<MetricCurve> {
    if !opts.force {
        let cert = positivity_certificate(spec, s, &SampleOptions::default())?;
        if !cert.certified() {
            return Err(Error::CertificationMissing(format!("positivity verdict {:?}", cert.verdict)));
        }
    }
    let inner = SolverOptions { force: true, ..opts.clone() };
    let mut curve = MetricCurve { spec: spec.clone(), xs: Vec::new(), g: Vec::new(), gx: Vec::new(), points: Vec::new() };
    for &x in xs {
        let sol = solve_at(spec, s, x, &inner)?;
        curve.points.push(point_report(&sol));
        curve.gx.push(sol.metric_derivative());
        curve.g.push(sol.g);
        curve.xs.push(x);
    }
    Ok(curve)
}

pub fn log_grid(x_min: f64, x_max: f64, count: usize) -> Vec<f64> {
    crate::rh_kernel::logspace(x_min, x_max, count)
}

#[derive(Clone, Debug, Serialize)]
pub struct TtReport {
    pub sup: f64,
    pub order: usize,
    pub per_point: Vec<Option<f64>>,
}

/// Residual of (x G^{-1} G_x)_x = 4x [A, G^{-1} conj(A) G] with a central
/// stencil of the given order (2 or 4) in log x.
pub fn tt_residual_order(curve: &MetricCurve, order: usize) -> Result<TtReport> {
    let k = curve.xs.len();
    if k < 5 {
        return Err(Error::GridTooCoarse(format!("{k} points, need at least 5")));
    }
    let tau: Vec<f64> = curve.xs.iter().map(|x| x.ln()).collect();
    let h = tau[1] - tau[0];
    if h <= 0.0 || tau.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0)) {
        return Err(Error::GridTooCoarse("x grid is not uniform in log x".into()));
    }
    let n = curve.n();
    let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(curve.spec.u().to_vec()));
    let abar = linalg::conj(&a);
    let mut hs = Vec::with_capacity(k);
    let mut ginv = Vec::with_capacity(k);
    for i in 0..k {
        let gi = linalg::inv(&curve.g[i]).ok_or(Error::SingularMetric)?;
        hs.push(&gi * &curve.gx[i] * C64::new(curve.xs[i], 0.0));
        ginv.push(gi);
    }
    let reach = match order {
        2 => 1,
        4 => 2,
        other => return Err(Error::Parse(format!("stencil order {other}"))),
    };
    let mut per_point = vec![None; k];
    let mut sup: f64 = 0.0;
    for i in reach..k - reach {
        let dh = if order == 2 {
            (&hs[i + 1] - &hs[i - 1]) / C64::new(2.0 * h, 0.0)
        } else {
            (-&hs[i + 2] + &hs[i + 1] * C64::new(8.0, 0.0) - &hs[i - 1] * C64::new(8.0, 0.0) + &hs[i - 2])
                / C64::new(12.0 * h, 0.0)
        };
        let lhs = dh / C64::new(curve.xs[i], 0.0);
        let inner = &ginv[i] * &abar * &curve.g[i];
        let rhs = linalg::commutator(&a, &inner) * C64::new(4.0 * curve.xs[i], 0.0);
        let r = linalg::dist(&lhs, &rhs);
        debug_assert_eq!(lhs.nrows(), n);
        per_point[i] = Some(r);
        sup = sup.max(r);
    }
    Ok(TtReport { sup, order, per_point })
}

pub fn tt_residual(curve: &MetricCurve) -> Result<TtReport> {
    tt_residual_order(curve, 4)
}

fn csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["x".to_string()];
    for name in ["G", "Gx"] {
        for i in 1..=n {
            for j in 1..=n {
                h.push(format!("{name}{i}{j}_re"));
                h.push(format!("{name}{i}{j}_im"));
            }
        }
    }
    for c in [
        "nodes",
        "jump_residual",
        "normalization_residual",
        "symmetry_neg",
        "symmetry_refl",
        "hermitian",
        "orthogonality",
        "det_error",
        "cholesky_ok",
        "tt_residual",
    ] {
        h.push(c.into());
    }
    h
}

pub fn write_curve_csv<W: Write>(curve: &MetricCurve, tt: Option<&TtReport>, out: W) -> Result<()> {
    let n = curve.n();
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    w.write_record(csv_header(n)).map_err(io)?;
    for (i, p) in curve.points.iter().enumerate() {
        let mut row = vec![curve.xs[i].to_string()];
        for m in [&curve.g[i], &curve.gx[i]] {
            for a in 0..n {
                for b in 0..n {
                    row.push(m[(a, b)].re.to_string());
                    row.push(m[(a, b)].im.to_string());
                }
            }
        }
        let ttv = tt.and_then(|t| t.per_point[i]).map_or(String::new(), |v| v.to_string());
        row.extend([
            p.nodes.to_string(),
            p.jump_residual.to_string(),
            p.normalization_residual.to_string(),
            p.symmetry.neg.to_string(),
            p.symmetry.refl.to_string(),
            p.hermitian.to_string(),
            p.orthogonality.to_string(),
            p.det_error.to_string(),
            (p.cholesky_ok as u8).to_string(),
            ttv,
        ]);
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_curve_csv(path: &Path, spec: &Spectrum) -> Result<MetricCurve> {
    let n = spec.n();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r.headers().map_err(|e| Error::Parse(format!("csv: {e}")))?.iter().map(String::from).collect();
    let want = csv_header(n);
    if header.len() < 1 + 4 * n * n || header[..1 + 4 * n * n] != want[..1 + 4 * n * n] {
        return Err(Error::DimensionMismatch { expected: n, got: ((header.len().saturating_sub(1)) as f64 / 4.0).sqrt() as usize });
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut curve = MetricCurve { spec: spec.clone(), xs: Vec::new(), g: Vec::new(), gx: Vec::new(), points: Vec::new() };
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("csv: {e}")))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Parse("csv: short row".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("csv: {e}")))
        };
        let opt = |name: &str| col(name).and_then(|i| rec.get(i)).and_then(|s| s.parse::<f64>().ok()).unwrap_or(f64::NAN);
        let x = num(0)?;
        let mut mats = Vec::new();
        for blk in 0..2 {
            let mut m = CMat::zeros(n, n);
            for a in 0..n {
                for b in 0..n {
                    let base = 1 + blk * 2 * n * n + 2 * (a * n + b);
                    m[(a, b)] = C64::new(num(base)?, num(base + 1)?);
                }
            }
            mats.push(m);
        }
        curve.xs.push(x);
        curve.gx.push(mats.pop().expect("two blocks"));
        curve.g.push(mats.pop().expect("two blocks"));
        curve.points.push(PointReport {
            x,
            method: "csv".into(),
            nodes: opt("nodes") as usize,
            jump_residual: opt("jump_residual"),
            normalization_residual: opt("normalization_residual"),
            symmetry: SymmetryReport { neg: opt("symmetry_neg"), refl: opt("symmetry_refl") },
            hermitian: opt("hermitian"),
            orthogonality: opt("orthogonality"),
            det_error: opt("det_error"),
            cholesky_ok: opt("cholesky_ok") == 1.0,
        });
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ade::cartan_seed;

    fn two() -> Spectrum {
        Spectrum::new(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]).unwrap()
    }

    fn a1() -> Unitriangular {
        Unitriangular::from_upper(2, &[-1])
    }

    #[test]
    fn identity_short_circuits() {
        let jd = JumpData::new(&Spectrum::roots_of_unity(3), &Unitriangular::identity(3), 1.0).unwrap();
        let disc = discretize(&jd, &SolverOptions::default()).unwrap();
        assert!(disc.is_empty());
        let sol = solve_rh(&jd, &disc, &SolverOptions::default()).unwrap();
        assert_eq!(sol.g, linalg::eye(3));
        assert_eq!(sol.eval_y(C64::new(0.3, 2.0)).unwrap(), linalg::eye(3));
        assert_eq!(sol.symmetry_residuals(), SymmetryReport { neg: 0.0, refl: 0.0 });
    }

    #[test]
    fn truncation_matches_envelope() {
        let jd = JumpData::new(&two(), &a1(), 1.0).unwrap();
        let tol = 1e-12;
        let opts = SolverOptions { tol_trunc: tol, ..Default::default() };
        let disc = discretize(&jd, &opts).unwrap();
        // |a| = exp(-2x (r + 1/r) cos(delta/2)) = tol
        let k = tol.ln().abs() / (2.0 * (jd.delta / 2.0).cos());
        let r = 0.5 * (k + (k * k - 4.0).sqrt());
        assert!(disc.r_max >= r && disc.r_max < r * (disc.h).exp() * 1.000001);
        assert!((disc.r_min * disc.r_max - 1.0).abs() < 1e-12);
        let d2 = discretize(&jd.at_x(2.0), &opts).unwrap();
        let w1 = disc.r_max.ln();
        let w2 = d2.r_max.ln();
        assert!(w1 - w2 > 0.6 && w1 - w2 < 0.75, "{w1} {w2}");
    }

    #[test]
    fn refuses_indefinite_data() {
        let s = Unitriangular::from_upper(2, &[-3]);
        let jd = JumpData::new(&two(), &s, 0.05).unwrap();
        assert!(matches!(discretize(&jd, &SolverOptions::default()), Err(Error::CertificationMissing(_))));
        assert!(discretize(&jd, &SolverOptions { force: true, ..Default::default() }).is_ok());
    }

    #[test]
    fn a1_solution_is_a_metric() {
        let sol = solve_at(&two(), &a1(), 0.7, &SolverOptions::default()).unwrap();
        let p = point_report(&sol);
        assert!(Tolerances::default().accepts(&p), "{p:?}");
        assert!(linalg::dist(&sol.eval_y(C64::new(0.0, 0.0)).unwrap(), &sol.g) == 0.0);
        // real spectrum: G is real symmetric with G conj(G) = I
        assert!(sol.g[(0, 1)].norm() > 1e-3);
    }

    #[test]
    fn near_contour_guard() {
        let sol = solve_at(&two(), &a1(), 1.0, &SolverOptions::default()).unwrap();
        let on = sol.jd.ray_dir() * 0.8;
        assert!(matches!(sol.eval_y(on), Err(Error::NearContour(_))));
        assert!(sol.eval_y(on * C64::new(0.0, 1.0)).is_ok());
    }

    #[test]
    fn decay_at_infinity_like_one_over_mu() {
        let sol = solve_at(&two(), &a1(), 0.5, &SolverOptions::default()).unwrap();
        let dir = sol.jd.ray_dir() * C64::new(0.0, 1.0);
        let e = linalg::eye(2);
        let d1 = linalg::dist(&sol.eval_y(dir * 1e4).unwrap(), &e);
        let d2 = linalg::dist(&sol.eval_y(dir * 1e5).unwrap(), &e);
        assert!((d1 / d2 - 10.0).abs() < 0.01, "{d1} {d2}");
    }

    #[test]
    fn neumann_and_direct_agree_at_large_x() {
        let jd = JumpData::new(&two(), &a1(), 10.0).unwrap();
        let disc = discretize(&jd, &SolverOptions::default()).unwrap();
        let a = solve_rh(&jd, &disc, &SolverOptions { method: Method::Neumann, ..Default::default() }).unwrap();
        let b = solve_rh(&jd, &disc, &SolverOptions { method: Method::Direct, ..Default::default() }).unwrap();
        assert_eq!(a.method, "neumann");
        assert!(linalg::dist(&a.g, &b.g) < 1e-8);
        let auto = solve_rh(&jd, &disc, &SolverOptions::default()).unwrap();
        assert_eq!(auto.method, "neumann");
        // |G - I| sits below the jump envelope at r = 1
        assert!(linalg::dist(&a.g, &linalg::eye(2)) <= jd.deviation_at(1.0));
    }

    #[test]
    fn refinement_changes_g_below_error() {
        let opts = SolverOptions::default();
        let a = solve_at(&two(), &a1(), 0.6, &opts).unwrap();
        let fine = SolverOptions { step: Some(a.disc.h / 2.0), ..opts };
        let b = solve_at(&two(), &a1(), 0.6, &fine).unwrap();
        assert!(linalg::dist(&a.g, &b.g) < 10.0 * a.jump_residual().max(1e-14));
    }

    #[test]
    fn gx_matches_finite_differences() {
        let opts = SolverOptions::default();
        let h = 1e-4;
        let x = 0.9;
        let mid = solve_at(&two(), &a1(), x, &opts).unwrap();
        let lo = solve_at(&two(), &a1(), x - h, &opts).unwrap();
        let hi = solve_at(&two(), &a1(), x + h, &opts).unwrap();
        let fd = (&hi.g - &lo.g) / C64::new(2.0 * h, 0.0);
        assert!(linalg::dist(&fd, &mid.metric_derivative()) < 1e-6);
    }

    #[test]
    fn diagonal_curve_has_zero_tt_residual() {
        let spec = Spectrum::roots_of_unity(3);
        let xs = log_grid(0.5, 5.0, 9);
        let e = linalg::eye(3);
        let curve = MetricCurve {
            spec,
            g: vec![e.clone(); 9],
            gx: vec![CMat::zeros(3, 3); 9],
            points: Vec::new(),
            xs: xs.clone(),
        };
        assert_eq!(tt_residual(&curve).unwrap().sup, 0.0);
        let short = MetricCurve { xs: xs[..4].to_vec(), ..curve.clone() };
        assert!(matches!(tt_residual(&short), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let spec = two();
        let curve = metric_curve(&spec, &a1(), &log_grid(0.8, 1.2, 5), &SolverOptions::default()).unwrap();
        let tt = tt_residual(&curve).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&curve, Some(&tt), &mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, &buf).unwrap();
        let back = read_curve_csv(&p, &spec).unwrap();
        assert_eq!(back.xs, curve.xs);
        assert_eq!(back.g, curve.g);
        assert_eq!(back.gx, curve.gx);
        assert_eq!(back.points[2].jump_residual, curve.points[2].jump_residual);
        assert!(read_curve_csv(&p, &Spectrum::roots_of_unity(3)).is_err());
    }

    #[test]
    fn cartan_a3_metric_is_hermitian() {
        let s = cartan_seed("A3".parse().unwrap()).unwrap();
        let sol = solve_at(&Spectrum::roots_of_unity(3), &s, 1.0, &SolverOptions::default()).unwrap();
        let p = point_report(&sol);
        assert!(Tolerances::default().accepts(&p), "{p:?}");
    }
}
