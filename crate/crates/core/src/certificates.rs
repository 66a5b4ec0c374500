//! Analytic inputs for the solvers: field-of-values gaps, shift-rotations,
//! strip-resolvent bounds, nodewise inverse profiles and Kronecker conditioning.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{imag, numerical_range_boundary, numerical_range_margin, ComplexMatrix};
use crate::quadrature::QuadratureGrid;

/// Safety factor applied to sampled strip bounds.
pub const SAMPLED_SAFETY: f64 = 1.2;
/// Sampled resolvent norms above this are treated as spectrum inside the strip.
pub const DIVERGENCE_CAP: f64 = 1e8;
/// Largest `n·m` accepted by [`conditioning_report`].
pub const KRON_DIM_CAP: usize = 4096;
/// Default number of rotation angles when sampling numerical ranges.
pub const DEFAULT_ANGLES: usize = 256;

const PROFILE_RTOL: f64 = 1e-10;

/// Margin certificate produced by the optimal shift-rotation.
///
/// The transformed pair is `A = λ η (A0 - ω I)`, `B = λ η (B0 + ω I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FovCertificate {
    pub mu: f64,
    pub eta: Complex64,
    pub omega: Complex64,
    pub lambda: f64,
    pub delta: f64,
    pub n_angles: usize,
}

impl FovCertificate {
    /// Certificate for data already satisfying `H(A), H(B) ⪰ mu` (identity transform).
    pub fn identity(mu: f64) -> Self {
        Self { mu, eta: Complex64::new(1.0, 0.0), omega: Complex64::new(0.0, 0.0), lambda: 1.0, delta: 2.0 * mu, n_angles: 0 }
    }

    /// The same certificate after an extra positive rescaling of the pair.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self { lambda: self.lambda * lambda, mu: self.mu * lambda, ..self.clone() }
    }

    /// Applies the shift-rotation and scaling to the original pair.
    pub fn transform(&self, a0: &ComplexMatrix, b0: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
        let f = self.eta * self.lambda;
        (a0.shifted(-self.omega).scale(f), b0.shifted(self.omega).scale(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripProvenance {
    FovFormula,
    Diagonalizable,
    Sampled,
    WeightedFov,
}

/// Bound `gamma ≥ sup_{|Re z| ≤ a} ||(zI - M)^{-1}||`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripCertificate {
    pub a: f64,
    pub gamma: f64,
    pub provenance: StripProvenance,
}

impl StripCertificate {
    /// Sampled bounds are grid estimates, not proofs.
    pub fn heuristic(&self) -> bool {
        self.provenance == StripProvenance::Sampled
    }
}

/// Certificate attached to a problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    Fov(FovCertificate),
    Strip(StripCertificate),
}

/// Optimal shift-rotation turning a FoV gap `dist(W(A0), -W(B0)) = δ > 0` into
/// margins `H(A), H(B) ⪰ δ/2`.
///
/// The closest pair of the sampled hulls fixes an initial direction, which is then
/// refined on the exact support functions. The reported `delta` is the refined,
/// exactly attained separation.
pub fn optimal_shift_rotation(a0: &ComplexMatrix, b0: &ComplexMatrix, n_angles: usize) -> Result<FovCertificate> {
    let pa = numerical_range_boundary(a0, n_angles)?;
    let pb: Vec<Complex64> = numerical_range_boundary(b0, n_angles)?.into_iter().map(|z| -z).collect();
    let hull_a = convex_hull(&pa);
    let hull_b = convex_hull(&pb);
    let (a_star, b_star, dist) = closest_pair(&hull_a, &hull_b);
    if !(dist > 0.0) || !separated(&hull_a, &hull_b, a_star - b_star) {
        return Err(Error::NoGap);
    }
    let theta0 = -(a_star - b_star).arg();
    let separation = |theta: f64| -> Result<(f64, f64)> {
        Ok((numerical_range_margin(a0, theta)?, numerical_range_margin(b0, theta)?))
    };
    let g = |theta: f64| separation(theta).map(|(x, y)| x + y);
    let width = 2.0 * PI / n_angles as f64;
    let (mut lo, mut hi) = (theta0 - width, theta0 + width);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1)?, g(x2)?);
    for _ in 0..80 {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1)?;
        }
    }
    let candidate = if g1 >= g2 { x1 } else { x2 };
    let theta = if g(candidate)? > g(theta0)? { candidate } else { theta0 };
    let (ma, mb) = separation(theta)?;
    let delta = ma + mb;
    if !(delta > 0.0) {
        return Err(Error::NoGap);
    }
    let eta = Complex64::from_polar(1.0, theta);
    let mid = eta * (a_star + b_star) / 2.0;
    let eta_omega = Complex64::new((ma - mb) / 2.0, mid.im);
    Ok(FovCertificate { mu: delta / 2.0, eta, omega: eta_omega / eta, lambda: 1.0, delta, n_angles })
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Counter-clockwise convex hull (monotone chain); may degenerate to one or two points.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup_by(|a, b| (*a - *b).norm() <= 1e-14);
    if pts.len() <= 2 {
        return pts;
    }
    let scale = pts.iter().map(|p| p.norm()).fold(1e-300, f64::max);
    let tol = 1e-14 * scale * scale;
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= tol {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 2 {
        // all points collinear within tolerance: keep the extreme pair
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

fn closest_on_segment(p: Complex64, a: Complex64, b: Complex64) -> Complex64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a;
    }
    let s = ((p - a).re * d.re + (p - a).im * d.im) / len2;
    a + d * s.clamp(0.0, 1.0)
}

fn edges(poly: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    match poly.len() {
        0 => vec![],
        1 => vec![(poly[0], poly[0])],
        2 => vec![(poly[0], poly[1])],
        n => (0..n).map(|i| (poly[i], poly[(i + 1) % n])).collect(),
    }
}

/// Closest pair `(p, q)` between two convex polygons, assuming they are disjoint.
///
/// Ties keep the first candidate in vertex order.
pub fn closest_pair(p: &[Complex64], q: &[Complex64]) -> (Complex64, Complex64, f64) {
    let mut best = (p[0], q[0], f64::INFINITY);
    for &v in p {
        for (a, b) in edges(q) {
            let c = closest_on_segment(v, a, b);
            let d = (v - c).norm();
            if d < best.2 {
                best = (v, c, d);
            }
        }
    }
    for &v in q {
        for (a, b) in edges(p) {
            let c = closest_on_segment(v, a, b);
            let d = (v - c).norm();
            if d < best.2 {
                best = (c, v, d);
            }
        }
    }
    best
}

/// Whether the direction `dir` strictly separates `p` (ahead) from `q`.
fn separated(p: &[Complex64], q: &[Complex64], dir: Complex64) -> bool {
    let u = dir / dir.norm();
    let proj = |z: &Complex64| z.re * u.re + z.im * u.im;
    let min_p = p.iter().map(proj).fold(f64::INFINITY, f64::min);
    let max_q = q.iter().map(proj).fold(f64::NEG_INFINITY, f64::max);
    min_p > max_q
}

/// Augmented matrix `[[A, C], [0, -B]]`.
pub fn augmented(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.ensure_square()?;
    b.ensure_square()?;
    if c.rows() != a.rows() || c.cols() != b.rows() {
        return Err(Error::Dimension(format!(
            "C is {}x{}, expected {}x{}",
            c.rows(),
            c.cols(),
            a.rows(),
            b.rows()
        )));
    }
    ComplexMatrix::from_blocks(a, c, &ComplexMatrix::zeros(b.rows(), a.rows()), &-b)
}

/// Maximal scaling `λ = 1/||M'||` so that the augmented matrix has unit norm.
pub fn normalize_problem(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    c: &ComplexMatrix,
) -> Result<(ComplexMatrix, ComplexMatrix, ComplexMatrix, f64)> {
    let norm = augmented(a, b, c)?.operator_norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("augmented matrix is zero".into()));
    }
    let lambda = 1.0 / norm;
    if lambda == 1.0 {
        return Ok((a.clone(), b.clone(), c.clone(), 1.0));
    }
    Ok((a.scale_real(lambda), b.scale_real(lambda), c.scale_real(lambda), lambda))
}

/// `γ = 2/(μ-a) + ||C||/(μ-a)²` for an augmented matrix with FoV margins `mu`.
pub fn strip_bound_fov(mu: f64, a: f64, norm_c: f64) -> Result<StripCertificate> {
    if !(a > 0.0 && a < mu) {
        return Err(Error::InvalidParameter(format!("need 0 < a < mu, got a = {a}, mu = {mu}")));
    }
    if !(norm_c >= 0.0) {
        return Err(Error::InvalidParameter("norm_C must be nonnegative".into()));
    }
    let g = mu - a;
    Ok(StripCertificate { a, gamma: 2.0 / g + norm_c / (g * g), provenance: StripProvenance::FovFormula })
}

/// Reduced strip bound for a generalized problem under weighted FoV margins:
/// `√κ(E)/(μ-a) + √κ(D)/(μ-a) + √(κ(E)κ(D)) ||C̃||/(μ-a)²`.
pub fn strip_bound_weighted_fov(kappa_e: f64, kappa_d: f64, mu: f64, a: f64, norm_c: f64) -> Result<StripCertificate> {
    if !(a > 0.0 && a < mu) {
        return Err(Error::InvalidParameter(format!("need 0 < a < mu, got a = {a}, mu = {mu}")));
    }
    let g = mu - a;
    let (se, sd) = (kappa_e.sqrt(), kappa_d.sqrt());
    Ok(StripCertificate { a, gamma: se / g + sd / g + se * sd * norm_c / (g * g), provenance: StripProvenance::WeightedFov })
}

/// Grid estimate of the strip supremum on `[-a, a] × [-2, 2]`, times [`SAMPLED_SAFETY`].
///
/// Sample counts are rounded up to odd numbers so `z = 0` and the edges `±a` are on the grid.
pub fn strip_bound_sampled(m: &ComplexMatrix, a: f64, re_samples: usize, im_samples: usize) -> Result<StripCertificate> {
    strip_bound_sampled_with(m, a, re_samples, im_samples, SAMPLED_SAFETY)
}

pub fn strip_bound_sampled_with(
    m: &ComplexMatrix,
    a: f64,
    re_samples: usize,
    im_samples: usize,
    safety: f64,
) -> Result<StripCertificate> {
    m.ensure_square()?;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!("a = {a} outside (0, 1)")));
    }
    if m.operator_norm() > 1.0 + 1e-12 {
        return Err(Error::Hypothesis("strip sampling needs ||M|| <= 1".into()));
    }
    let min_re = m.eigenvalues()?.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    if min_re <= a {
        return Err(Error::ImaginaryAxis { min_re });
    }
    let odd = |n: usize| if n % 2 == 0 { n + 1 } else { n.max(3) };
    let (nr, ni) = (odd(re_samples), odd(im_samples));
    let points: Vec<Complex64> = (0..nr)
        .flat_map(|i| {
            let re = -a + 2.0 * a * i as f64 / (nr - 1) as f64;
            (0..ni).map(move |j| Complex64::new(re, -2.0 + 4.0 * j as f64 / (ni - 1) as f64))
        })
        .collect();
    let worst = points
        .par_iter()
        .map(|&z| {
            let s = (-m).shifted(z).sigma_min();
            (if s > 0.0 { 1.0 / s } else { f64::INFINITY }, z)
        })
        .reduce(|| (0.0, Complex64::new(0.0, 0.0)), |x, y| if y.0 > x.0 || (y.0 == x.0 && key(y.1) < key(x.1)) { y } else { x });
    if !(worst.0 <= DIVERGENCE_CAP) {
        return Err(Error::Divergence { norm: worst.0, re: worst.1.re, im: worst.1.im });
    }
    Ok(StripCertificate { a, gamma: (worst.0 * safety).max(1.0), provenance: StripProvenance::Sampled })
}

fn key(z: Complex64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

/// `γ = κ(V)/d` for diagonalizable `M`, `d = min |Re λ| - a`.
pub fn strip_bound_diagonalizable(m: &ComplexMatrix, a: f64) -> Result<StripCertificate> {
    let data = m.spectral_data()?;
    let d = data.imaginary_axis_gap() - a;
    if !(d > 0.0) {
        return Err(Error::ImaginaryAxis { min_re: data.imaginary_axis_gap() });
    }
    let kappa = data
        .kappa_v
        .ok_or_else(|| Error::Hypothesis("eigenvector matrix is ill-conditioned or unavailable".into()))?;
    Ok(StripCertificate { a, gamma: (kappa / d).max(1.0), provenance: StripProvenance::Diagonalizable })
}

/// `W(A) ⊂ {Re ≥ mu, |Im| ≤ tau}`, checked exactly through the Hermitian and
/// skew-Hermitian parts.
pub fn band_check(a: &ComplexMatrix, mu: f64, tau: f64, tol: f64) -> Result<bool> {
    Ok(numerical_range_margin(a, 0.0)? >= mu - tol && imaginary_extent(a)? <= tau + tol)
}

/// `max |Im w|` over `w ∈ W(A)`.
pub fn imaginary_extent(a: &ComplexMatrix) -> Result<f64> {
    let skew = (a - &a.adjoint()).scale(Complex64::new(0.0, -0.5));
    let ev = skew.hermitian_eigenvalues()?;
    Ok(ev.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    SylvesterPlain,
    SylvesterBanded,
    SylvesterExact,
    SingleFamily,
}

/// Which single-family sum a profile belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sqrt,
    GeomMean,
    Hamiltonian,
    Direct,
}

/// Upper bounds on the scaled shifted-inverse norms at every node.
///
/// Sylvester kinds: `rho_a_plus[k] ≥ (1+t_k)||(A + i t_k E)^{-1}||` and likewise for the
/// other three families, with `theta = Σ w_k (ρ⁻_A ρ⁺_B + ρ⁺_A ρ⁻_B)`.
/// Single-family kinds: `rho[j]` bounds the `j`-th scaled inverse and
/// `theta = Σ weights[j] rho[j]`. Pair families store the `-i t` entries first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodewiseProfile {
    pub kind: ProfileKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<Family>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rho_a_plus: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rho_a_minus: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rho_b_plus: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rho_b_minus: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rho: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(rename = "R_A", skip_serializing_if = "Option::is_none", default)]
    pub r_a: Option<f64>,
    #[serde(rename = "R_B", skip_serializing_if = "Option::is_none", default)]
    pub r_b: Option<f64>,
    #[serde(rename = "R_max")]
    pub r_max: f64,
    pub theta: f64,
}

/// Left and right data of a (possibly generalized) Sylvester problem.
/// `None` weights stand for the identity.
#[derive(Clone, Copy, Debug)]
pub struct PencilPair<'a> {
    pub a: &'a ComplexMatrix,
    pub e: Option<&'a ComplexMatrix>,
    pub b: &'a ComplexMatrix,
    pub d: Option<&'a ComplexMatrix>,
}

/// Inputs for [`build_profile`].
#[derive(Clone, Copy, Debug)]
pub enum ProfileParams<'a> {
    /// Constant entries `r_A`, `r_B` (e.g. `3/μ`, `3γ`).
    SylvesterPlain { r_a: f64, r_b: f64, check: Option<PencilPair<'a>> },
    /// `ρ = (1+t)/√(μ² + (t-τ)₊²)` under `W(A), W(B) ⊂ {Re ≥ μ, |Im| ≤ τ}`.
    SylvesterBanded { mu: f64, tau: f64, check: Option<PencilPair<'a>> },
    /// Exact nodewise norms.
    SylvesterExact { pair: PencilPair<'a> },
    /// `ρ = (1+t²)/(μ+t²)` for `(A + t²I)/(1+t²)`.
    Sqrt { mu: f64, a: Option<&'a ComplexMatrix> },
    /// `ρ = (1+s²)/(μ_B + μ_A s²)`, `s = t/χ`, for `(B + s²A)/(1+s²)`.
    GeomMean { mu_a: f64, mu_b: f64, chi: f64, ab: Option<(&'a ComplexMatrix, &'a ComplexMatrix)> },
    /// `(1+t)(M ∓ i t)^{-1}`; constant `r` when given, exact norms otherwise.
    ShiftPair { family: Family, r: Option<f64>, m: Option<&'a ComplexMatrix> },
}

fn sylvester_weights(grid: &QuadratureGrid) -> Vec<f64> {
    grid.nodes.iter().map(|t| grid.h * t / (2.0 * PI * (1.0 + t) * (1.0 + t))).collect()
}

/// `scale / σ_min(A + shift·E)`.
fn scaled_inverse_norm(a: &ComplexMatrix, e: Option<&ComplexMatrix>, shift: Complex64, scale: f64, node: i64) -> Result<f64> {
    let m = match e {
        Some(e) => a + &e.scale(shift),
        None => a.shifted(shift),
    };
    let s = m.sigma_min();
    if !(s > 0.0) {
        return Err(Error::SingularNode { node, sigma_min: s });
    }
    Ok(scale / s)
}

/// Exact `(1+t)||(X ± i t W)^{-1}||` on every node, returned as `(plus, minus)`.
fn exact_pencil_norms(grid: &QuadratureGrid, x: &ComplexMatrix, w: Option<&ComplexMatrix>) -> Result<(Vec<f64>, Vec<f64>)> {
    let pairs: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t = grid.nodes[i];
            let k = grid.index(i);
            Ok((
                scaled_inverse_norm(x, w, imag(t), 1.0 + t, k)?,
                scaled_inverse_norm(x, w, imag(-t), 1.0 + t, k)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

fn check_dominates(bounds: &[f64], actual: &[f64], offset: usize) -> Result<()> {
    for (i, (b, x)) in bounds.iter().zip(actual).enumerate() {
        if *b < x * (1.0 - PROFILE_RTOL) {
            return Err(Error::ProfileInvalid { index: offset + i, bound: *b, actual: *x });
        }
    }
    Ok(())
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn sylvester_profile(
    kind: ProfileKind,
    grid: &QuadratureGrid,
    rho: [Vec<f64>; 4],
    check: Option<PencilPair<'_>>,
) -> Result<NodewiseProfile> {
    let [ap, am, bp, bm] = rho;
    if let Some(p) = check {
        let (xap, xam) = exact_pencil_norms(grid, p.a, p.e)?;
        let (xbp, xbm) = exact_pencil_norms(grid, p.b, p.d)?;
        let n = grid.len();
        check_dominates(&ap, &xap, 0)?;
        check_dominates(&am, &xam, n)?;
        check_dominates(&bp, &xbp, 2 * n)?;
        check_dominates(&bm, &xbm, 3 * n)?;
    }
    let weights = sylvester_weights(grid);
    let theta = (0..grid.len()).map(|k| weights[k] * (am[k] * bp[k] + ap[k] * bm[k])).sum();
    let r_a = max_of(&ap).max(max_of(&am));
    let r_b = max_of(&bp).max(max_of(&bm));
    Ok(NodewiseProfile {
        kind,
        family: None,
        rho_a_plus: ap,
        rho_a_minus: am,
        rho_b_plus: bp,
        rho_b_minus: bm,
        rho: vec![],
        weights,
        r_a: Some(r_a),
        r_b: Some(r_b),
        r_max: r_a.max(r_b),
        theta,
    })
}

fn single_profile(family: Family, rho: Vec<f64>, weights: Vec<f64>, actual: Option<Vec<f64>>) -> Result<NodewiseProfile> {
    if let Some(x) = actual {
        check_dominates(&rho, &x, 0)?;
    }
    let theta = rho.iter().zip(&weights).map(|(r, w)| r * w).sum();
    Ok(NodewiseProfile {
        kind: ProfileKind::SingleFamily,
        family: Some(family),
        rho_a_plus: vec![],
        rho_a_minus: vec![],
        rho_b_plus: vec![],
        rho_b_minus: vec![],
        r_max: max_of(&rho),
        rho,
        weights,
        r_a: None,
        r_b: None,
        theta,
    })
}

/// Per-entry weights of the pair families, `-i t` entries first.
pub fn shift_pair_weights(family: Family, grid: &QuadratureGrid) -> Vec<f64> {
    let denom = match family {
        Family::Hamiltonian => PI,
        _ => 2.0 * PI,
    };
    let w: Vec<f64> = grid.nodes.iter().map(|t| grid.h * t / (denom * (1.0 + t))).collect();
    [w.clone(), w].concat()
}

/// Builds and, when matrices are supplied, validates a nodewise profile.
pub fn build_profile(params: ProfileParams<'_>, grid: &QuadratureGrid) -> Result<NodewiseProfile> {
    let n = grid.len();
    let positive = |name: &str, x: f64| {
        if x > 0.0 && x.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{name} = {x} must be positive")))
        }
    };
    match params {
        ProfileParams::SylvesterPlain { r_a, r_b, check } => {
            positive("r_A", r_a)?;
            positive("r_B", r_b)?;
            sylvester_profile(ProfileKind::SylvesterPlain, grid, [vec![r_a; n], vec![r_a; n], vec![r_b; n], vec![r_b; n]], check)
        }
        ProfileParams::SylvesterBanded { mu, tau, check } => {
            positive("mu", mu)?;
            if !(tau >= 0.0) {
                return Err(Error::InvalidParameter(format!("tau = {tau} must be nonnegative")));
            }
            let rho: Vec<f64> = grid
                .nodes
                .iter()
                .map(|t| (1.0 + t) / (mu * mu + (t - tau).max(0.0).powi(2)).sqrt())
                .collect();
            sylvester_profile(ProfileKind::SylvesterBanded, grid, [rho.clone(), rho.clone(), rho.clone(), rho], check)
        }
        ProfileParams::SylvesterExact { pair } => {
            let (ap, am) = exact_pencil_norms(grid, pair.a, pair.e)?;
            let (bp, bm) = exact_pencil_norms(grid, pair.b, pair.d)?;
            sylvester_profile(ProfileKind::SylvesterExact, grid, [ap, am, bp, bm], None)
        }
        ProfileParams::Sqrt { mu, a } => {
            positive("mu", mu)?;
            let rho = grid.nodes.iter().map(|t| (1.0 + t * t) / (mu + t * t)).collect();
            let weights = grid.nodes.iter().map(|t| 2.0 * grid.h * t / (PI * (1.0 + t * t))).collect();
            let actual = a
                .map(|a| {
                    (0..n)
                        .into_par_iter()
                        .map(|i| {
                            let t = grid.nodes[i];
                            scaled_inverse_norm(a, None, Complex64::new(t * t, 0.0), 1.0 + t * t, grid.index(i))
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .transpose()?;
            single_profile(Family::Sqrt, rho, weights, actual)
        }
        ProfileParams::GeomMean { mu_a, mu_b, chi, ab } => {
            positive("mu_A", mu_a)?;
            positive("mu_B", mu_b)?;
            positive("chi", chi)?;
            let s: Vec<f64> = grid.nodes.iter().map(|t| t / chi).collect();
            let rho = s.iter().map(|s| (1.0 + s * s) / (mu_b + mu_a * s * s)).collect();
            let weights = s.iter().map(|s| 2.0 * grid.h * s / (PI * (1.0 + s * s))).collect();
            let actual = ab
                .map(|(a, b)| {
                    (0..n)
                        .into_par_iter()
                        .map(|i| {
                            let s2 = s[i] * s[i];
                            scaled_inverse_norm(b, Some(a), Complex64::new(s2, 0.0), 1.0 + s2, grid.index(i))
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .transpose()?;
            single_profile(Family::GeomMean, rho, weights, actual)
        }
        ProfileParams::ShiftPair { family, r, m } => {
            if matches!(family, Family::Sqrt | Family::GeomMean) {
                return Err(Error::InvalidParameter("shift-pair profile needs the hamiltonian or direct family".into()));
            }
            let weights = shift_pair_weights(family, grid);
            let exact = m
                .map(|m| exact_pencil_norms(grid, m, None).map(|(plus, minus)| [minus, plus].concat()))
                .transpose()?;
            match (r, exact) {
                (Some(r), actual) => {
                    positive("r", r)?;
                    single_profile(family, vec![r; 2 * n], weights, actual)
                }
                (None, Some(rho)) => single_profile(family, rho, weights, None),
                (None, None) => Err(Error::InvalidParameter("shift-pair profile needs r or the matrix".into())),
            }
        }
    }
}

/// Kronecker-sum conditioning of the vectorized Sylvester operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub sigma_min_kron: f64,
    pub kron_norm: f64,
    pub kappa2: f64,
    pub sep_lower: f64,
    pub mu: f64,
}

/// `K = I ⊗ A + Bᵀ ⊗ I` with its extreme singular values.
pub fn kron_sum(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.ensure_square()?;
    let m = b.ensure_square()?;
    if n * m > KRON_DIM_CAP {
        return Err(Error::DimensionCap { dim: n * m, cap: KRON_DIM_CAP });
    }
    Ok(ComplexMatrix::identity(m).kron(a) + b.transpose().kron(&ComplexMatrix::identity(n)))
}

pub fn conditioning_report(a: &ComplexMatrix, b: &ComplexMatrix, mu: f64) -> Result<ConditioningReport> {
    let k = kron_sum(a, b)?;
    let sv = k.singular_values();
    let kron_norm = sv[0];
    let sigma_min_kron = *sv.last().expect("nonempty");
    Ok(ConditioningReport { sigma_min_kron, kron_norm, kappa2: kron_norm / sigma_min_kron, sep_lower: 2.0 * mu, mu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{normal_with_spectrum, random_accretive, random_matrix, random_unitary, rng};
    use crate::oracle::sylvester_kron_solve;
    use crate::quadrature::{build_grid, weight_sums, Step};
    use rand::Rng;

    fn diag(v: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(v)
    }

    #[test]
    fn shift_rotation_hermitian_intervals() {
        let cert = optimal_shift_rotation(&diag(&[1.0, 2.0]), &diag(&[3.0, 4.0]), 64).unwrap();
        assert!((cert.delta - 4.0).abs() < 1e-12);
        assert!((cert.eta - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!((cert.omega - Complex64::new(-1.0, 0.0)).norm() < 1e-9);
        let (a, b) = cert.transform(&diag(&[1.0, 2.0]), &diag(&[3.0, 4.0]));
        assert!((numerical_range_margin(&a, 0.0).unwrap() - 2.0).abs() < 1e-9);
        assert!((numerical_range_margin(&b, 0.0).unwrap() - 2.0).abs() < 1e-9);
        assert!((cert.mu - cert.lambda * cert.delta / 2.0).abs() < 1e-12);
    }

    #[test]
    fn shift_rotation_symmetric_real_axis() {
        // W(A0) = W(B0) = [0.5, 1.5] symmetric about 1 = mu + 1 with mu = 0
        let a0 = diag(&[0.5, 1.5]);
        let cert = optimal_shift_rotation(&a0, &a0, 64).unwrap();
        assert!(cert.omega.im.abs() < 1e-9);
        assert!((cert.eta.re.abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shift_rotation_random_normal_pair() {
        let mut g = rng(31);
        let za: Vec<Complex64> = (0..4).map(|_| Complex64::new(g.gen_range(0.3..1.0), g.gen_range(-0.5..0.5))).collect();
        let zb: Vec<Complex64> = (0..4).map(|_| Complex64::new(g.gen_range(0.3..1.0), g.gen_range(-0.5..0.5))).collect();
        // rotate and shift so that the gap between W(A0) and -W(B0) is exactly 0.6
        let rot = Complex64::from_polar(1.0, 0.7);
        let a0 = normal_with_spectrum(&mut g, &za.iter().map(|z| (z - 0.3 + 0.3) * rot + 1.0).collect::<Vec<_>>());
        let b0 = normal_with_spectrum(&mut g, &zb.iter().map(|z| z * rot - 1.0).collect::<Vec<_>>());
        let cert = optimal_shift_rotation(&a0, &b0, 256).unwrap();
        let (a, b) = cert.transform(&a0, &b0);
        let (ma, mb) = (numerical_range_margin(&a, 0.0).unwrap(), numerical_range_margin(&b, 0.0).unwrap());
        assert!(ma >= cert.delta / 2.0 - 1e-9 && mb >= cert.delta / 2.0 - 1e-9);
        assert!(cert.delta >= 0.6 - 1e-6, "delta = {}", cert.delta);
        assert!((cert.eta.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shift_rotation_no_gap() {
        let a0 = diag(&[1.0, -1.0]);
        assert_eq!(optimal_shift_rotation(&a0, &a0, 64), Err(Error::NoGap));
    }

    #[test]
    fn shift_rotation_preserves_solution() {
        let mut g = rng(32);
        for _ in 0..20 {
            let a0 = random_accretive(&mut g, 3, 0.2).shifted(Complex64::new(1.0, 0.5));
            let b0 = random_accretive(&mut g, 2, 0.2).shifted(Complex64::new(-0.3, -1.0));
            let c0 = random_matrix(&mut g, 3, 2);
            let Ok(cert) = optimal_shift_rotation(&a0, &b0, 128) else { continue };
            let (a, b) = cert.transform(&a0, &b0);
            let c = c0.scale(cert.eta * cert.lambda);
            let x0 = sylvester_kron_solve(&a0, &b0, &c0).unwrap().value;
            let x = sylvester_kron_solve(&a, &b, &c).unwrap().value;
            assert!((&x0 - &x).operator_norm() <= 1e-9 * (1.0 + x0.operator_norm()));
        }
    }

    #[test]
    fn normalize_examples() {
        let (a, b, c, l) = normalize_problem(&diag(&[2.0]), &diag(&[2.0]), &diag(&[0.0])).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(a, diag(&[1.0]));
        let _ = (b, c);
        let (a1, _, _, l1) = normalize_problem(&diag(&[1.0]), &diag(&[0.5]), &diag(&[0.0])).unwrap();
        assert_eq!((l1, a1), (1.0, diag(&[1.0])));
        let mut g = rng(37);
        let (a, b, c) = (random_matrix(&mut g, 6, 6), random_matrix(&mut g, 6, 6), random_matrix(&mut g, 6, 6));
        let (a, b, c, _) = normalize_problem(&a, &b, &c).unwrap();
        assert!((augmented(&a, &b, &c).unwrap().operator_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strip_fov_examples() {
        let s = strip_bound_fov(0.5, 0.25, 1.0).unwrap();
        assert!((s.gamma - 24.0).abs() < 1e-12);
        for mu in [0.05, 0.2, 0.7, 1.0] {
            assert!(strip_bound_fov(mu, mu / 2.0, 1.0).unwrap().gamma <= 8.0 / (mu * mu) + 1e-12);
        }
        assert!((strip_bound_fov(0.5, 0.25, 0.0).unwrap().gamma - 8.0).abs() < 1e-12);
        assert!(strip_bound_fov(0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn strip_sampled_examples() {
        let s = strip_bound_sampled(&diag(&[0.8, -0.8]), 0.4, 41, 81).unwrap();
        assert!(s.gamma >= 2.5);
        assert!(s.gamma <= 2.5 * SAMPLED_SAFETY * (1.0 + 1e-9));
        assert!(s.heuristic());
        let s = strip_bound_sampled(&diag(&[1.0, -1.0]), 0.5, 21, 41).unwrap();
        assert!(s.gamma.is_finite() && s.gamma >= 1.0);
        assert!(matches!(strip_bound_sampled(&diag(&[0.1, -0.8]), 0.4, 21, 41), Err(Error::ImaginaryAxis { .. })));
    }

    #[test]
    fn strip_sampled_below_diagonalizable_bound() {
        let mut g = rng(38);
        for _ in 0..10 {
            let spec: Vec<Complex64> = (0..4)
                .map(|i| Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 } * g.gen_range(0.6..0.9), g.gen_range(-0.3..0.3)))
                .collect();
            let s = random_unitary(&mut g, 4) + diag(&[0.3, 0.3, 0.3, 0.3]);
            let m = &(&s * &ComplexMatrix::from_diagonal(&spec)) * &s.inverse().unwrap();
            let m = m.scale_real(1.0 / m.operator_norm().max(1.0));
            let a = 0.3;
            let Ok(diag_bound) = strip_bound_diagonalizable(&m, a) else { continue };
            let sampled = strip_bound_sampled(&m, a, 21, 41).unwrap();
            assert!(sampled.gamma / SAMPLED_SAFETY <= diag_bound.gamma * (1.0 + 1e-9));
        }
    }

    #[test]
    fn fov_formula_dominates_sampling() {
        let mut g = rng(39);
        for _ in 0..10 {
            let (a, b, c) = crate::ensemble::fov_triple(&mut g, 3, 2, 0.3);
            let m = augmented(&a, &b, &c).unwrap();
            let fov = strip_bound_fov(0.3, 0.15, c.operator_norm()).unwrap();
            let sampled = strip_bound_sampled(&m, 0.15, 15, 41).unwrap();
            assert!(fov.gamma >= sampled.gamma / SAMPLED_SAFETY);
        }
    }

    #[test]
    fn profile_examples() {
        let grid = build_grid(6, 0.2, 0.5, Step::Balanced).unwrap();
        let p = build_profile(ProfileParams::SylvesterPlain { r_a: 15.0, r_b: 15.0, check: None }, &grid).unwrap();
        assert!(p.rho_a_plus.iter().all(|&r| r == 15.0));
        assert_eq!(p.r_max, 15.0);
        let lam = weight_sums(&grid).lambda_syl;
        assert!((p.theta - 225.0 * lam).abs() <= 1e-12 * p.theta);

        let g0 = QuadratureGrid { nodes: vec![grid.node(0)], ..grid.clone() };
        let sq = build_profile(ProfileParams::Sqrt { mu: 0.25, a: None }, &g0).unwrap();
        assert!((sq.rho[0] - 1.6).abs() < 1e-15 && (sq.r_max - 1.6).abs() < 1e-15);
        let sq = build_profile(ProfileParams::Sqrt { mu: 0.25, a: None }, &build_grid(40, 0.2, 0.5, Step::Balanced).unwrap()).unwrap();
        assert!(sq.r_max <= 4.0 && sq.r_max > 3.9);

        let mu = 0.3;
        let banded = build_profile(ProfileParams::SylvesterBanded { mu, tau: 0.0, check: None }, &grid).unwrap();
        for (k, t) in grid.nodes.iter().enumerate() {
            assert!((banded.rho_a_plus[k] - (1.0 + t) / (mu * mu + t * t).sqrt()).abs() < 1e-12);
        }
        assert!(banded.theta <= 1.0 / mu);
    }

    #[test]
    fn profiles_validate() {
        let mut g = rng(40);
        let grid = build_grid(8, 0.2, 0.5, Step::Balanced).unwrap();
        for _ in 0..10 {
            let mu = 0.2;
            let a = random_accretive(&mut g, 3, mu);
            let b = random_accretive(&mut g, 2, mu);
            let pair = PencilPair { a: &a, e: None, b: &b, d: None };
            build_profile(ProfileParams::SylvesterPlain { r_a: 3.0 / mu, r_b: 3.0 / mu, check: Some(pair) }, &grid).unwrap();
            let exact = build_profile(ProfileParams::SylvesterExact { pair }, &grid).unwrap();
            assert!(exact.r_max <= 3.0 / mu);
            build_profile(ProfileParams::Sqrt { mu, a: Some(&a) }, &grid).unwrap();
            let (ga, gb) = (random_accretive(&mut g, 2, 0.2), random_accretive(&mut g, 2, 0.3));
            build_profile(ProfileParams::GeomMean { mu_a: 0.2, mu_b: 0.3, chi: 0.7, ab: Some((&ga, &gb)) }, &grid).unwrap();
        }
        let a = diag(&[0.1, 0.5]);
        let pair = PencilPair { a: &a, e: None, b: &a, d: None };
        let err = build_profile(ProfileParams::SylvesterPlain { r_a: 2.0, r_b: 2.0, check: Some(pair) }, &grid);
        assert!(matches!(err, Err(Error::ProfileInvalid { .. })));
    }

    #[test]
    fn conditioning_examples() {
        let r = conditioning_report(&diag(&[0.3, 0.5]), &diag(&[0.2]), 0.2).unwrap();
        assert!((r.sigma_min_kron - 0.5).abs() < 1e-14 && r.sigma_min_kron >= r.sep_lower);
        assert!((r.kappa2 - r.kron_norm / r.sigma_min_kron).abs() < 1e-12);

        let mut g = rng(41);
        let a = crate::ensemble::random_hpd(&mut g, 3, 0.2, 0.9);
        let b = crate::ensemble::random_hpd(&mut g, 2, 0.2, 0.6);
        let r = conditioning_report(&a, &b, 0.2).unwrap();
        assert!((r.sigma_min_kron - 0.4).abs() < 1e-12);

        for _ in 0..20 {
            let mu = 0.1;
            let a = random_accretive(&mut g, 3, mu);
            let b = random_accretive(&mut g, 3, mu);
            let r = conditioning_report(&a, &b, mu).unwrap();
            assert!(r.sigma_min_kron >= 2.0 * mu - 1e-10);
            assert!(r.kappa2 <= (a.operator_norm() + b.operator_norm()) / (2.0 * mu) + 1e-9);
        }
        let big = ComplexMatrix::identity(65);
        assert!(matches!(conditioning_report(&big, &big, 0.1), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn kron_conditioning_invariant_under_preprocessing() {
        let mut g = rng(42);
        for _ in 0..10 {
            let a0 = random_accretive(&mut g, 3, 0.2).shifted(Complex64::new(0.4, 1.0));
            let b0 = random_accretive(&mut g, 2, 0.2).shifted(Complex64::new(-0.1, -1.0));
            let Ok(cert) = optimal_shift_rotation(&a0, &b0, 128) else { continue };
            let (a, b) = cert.scaled(0.37).transform(&a0, &b0);
            let k0 = conditioning_report(&a0, &b0, cert.mu).unwrap().kappa2;
            let k1 = conditioning_report(&a, &b, cert.mu).unwrap().kappa2;
            assert!((k0 - k1).abs() <= 1e-10 * k0);
        }
    }
}
