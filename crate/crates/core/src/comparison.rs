//! Constant-curvature comparison functions, the Laplacian of the distance function
//! from Jacobi volume factors, the volume density ratio, and diameter experiments.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{apply_j, ChartPoint, MetricModel, TangentVector};
use crate::connections::Flavor;
use crate::curvature::{curvature, ricci_real_sb};
use crate::error::{Error, Result};
use crate::geodesy::{
    adapted_frame, distance_shoot, exp_map, integrate_geodesic, normal_jacobians, normalize, parallel_frame,
    NormalJacobian, ShootOptions,
};
use crate::linalg::{CMatrix, RMatrix, C64};
use crate::variational::{myers_fields, myers_sum, second_variation_sb, sine_bump, synge_field, CurveGeometry};

/// Largest RK4 step for normal Jacobian integrations.
pub const JACOBI_STEP: f64 = 1e-3;

/// Laplacian margins above this (negative) value pass.
pub const MARGIN_TOL: f64 = -1e-4;

/// Slack allowed per grid step when checking that `λ` does not increase.
pub const MONOTONE_SLACK: f64 = 1e-5;

/// Radius at which `λ → 1` is checked, and the allowed deviation.
pub const LIMIT_RADIUS: f64 = 1e-2;
pub const LIMIT_TOL: f64 = 1e-3;

/// `sn_K`, the solution of `f″ + K f = 0`, `f(0) = 0`, `f′(0) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelSpace {
    pub k: f64,
}

impl ModelSpace {
    pub fn new(k: f64) -> Self {
        Self { k }
    }

    pub fn sn(&self, t: f64) -> f64 {
        let k = self.k;
        if k * t * t == 0.0 {
            t
        } else if k > 0.0 {
            (k.sqrt() * t).sin() / k.sqrt()
        } else {
            ((-k).sqrt() * t).sinh() / (-k).sqrt()
        }
    }

    pub fn sn_prime(&self, t: f64) -> f64 {
        let k = self.k;
        if k * t * t == 0.0 {
            1.0
        } else if k > 0.0 {
            (k.sqrt() * t).cos()
        } else {
            ((-k).sqrt() * t).cosh()
        }
    }

    /// First zero of `sn_K` after 0, infinite for `K ≤ 0`.
    pub fn first_zero(&self) -> f64 {
        if self.k > 0.0 {
            PI / self.k.sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// `sn′_K / sn_K`, defined on `(0, π/√K)`.
    pub fn quotient(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || t >= self.first_zero() {
            return Err(Error::PoleError(t));
        }
        Ok(self.sn_prime(t) / self.sn(t))
    }

    /// `(2n−1) sn′_K / sn_K`, the Laplacian comparison bound in real dimension `2n`.
    pub fn laplacian_bound(&self, n: usize, t: f64) -> Result<f64> {
        Ok((2 * n - 1) as f64 * self.quotient(t)?)
    }
}

fn check_radius(model: &MetricModel, rho: f64) -> Result<()> {
    if rho > model.injectivity_bound {
        return Err(Error::BeyondInjectivityBound { length: rho, bound: model.injectivity_bound });
    }
    if !(rho > 0.0) {
        return Err(Error::PoleError(rho));
    }
    Ok(())
}

fn positive_det(jac: &NormalJacobian) -> Result<f64> {
    let det = jac.det();
    if !(det > 0.0) {
        return Err(Error::ConjugatePoint { rho: jac.rho, det });
    }
    Ok(det)
}

/// `Δr` at `exp_p(ρω)` as `tr(A′A⁻¹)` of the normal Jacobi block.
pub fn laplacian_distance(model: &MetricModel, p: &ChartPoint, dir: &TangentVector, rho: f64) -> Result<f64> {
    check_radius(model, rho)?;
    let jac = normal_jacobians(model, p, dir, &[rho], JACOBI_STEP)?.remove(0);
    positive_det(&jac)?;
    jac.log_det_derivative()
}

/// `Δr` as the five-point `ρ`-derivative of `log det A`, for cross-checking the trace route.
pub fn laplacian_distance_stencil(model: &MetricModel, p: &ChartPoint, dir: &TangentVector, rho: f64, h: f64) -> Result<f64> {
    check_radius(model, rho + 2.0 * h)?;
    check_radius(model, rho - 2.0 * h)?;
    let radii: Vec<f64> = (-2..=2).map(|k| rho + k as f64 * h).collect();
    let logs: Vec<f64> = normal_jacobians(model, p, dir, &radii, JACOBI_STEP.min(h / 4.0))?
        .iter()
        .map(|j| positive_det(j).map(f64::ln))
        .collect::<Result<_>>()?;
    Ok((logs[0] - 8.0 * logs[1] + 8.0 * logs[3] - logs[4]) / (12.0 * h))
}

/// `λ(ρ, ω) = det A / sn_K^{2n−1}(ρ)`.
pub fn volume_density(model: &MetricModel, p: &ChartPoint, rho: f64, dir: &TangentVector, k: f64) -> Result<f64> {
    check_radius(model, rho)?;
    let jac = normal_jacobians(model, p, dir, &[rho], JACOBI_STEP)?.remove(0);
    density_ratio(&jac, ModelSpace::new(k), model.n())
}

fn density_ratio(jac: &NormalJacobian, space: ModelSpace, n: usize) -> Result<f64> {
    let det = positive_det(jac)?;
    let sn = space.sn(jac.rho);
    if !(sn > 0.0) {
        return Err(Error::PoleError(jac.rho));
    }
    Ok(det / sn.powi(2 * n as i32 - 1))
}

/// `i`-th Halton coordinate in base `base`.
fn halton(mut i: usize, base: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Default direction count for a `n`-dimensional chart.
pub fn default_direction_count(n: usize) -> usize {
    if n == 1 {
        32
    } else {
        128
    }
}

/// Unit directions at `p`, expressed in a `g`-orthonormal basis: equally spaced angles
/// on the circle, otherwise Halton points pushed through Box-Muller onto the sphere.
pub fn direction_grid(model: &MetricModel, p: &ChartPoint, count: usize) -> Result<Vec<TangentVector>> {
    let n = model.n();
    let dim = 2 * n;
    let e1 = normalize(model, p, &TangentVector::coordinate(n, 0))?;
    let frame = adapted_frame(model, p, &e1)?;
    let combine = |coef: &[f64]| {
        let len = coef.iter().map(|c| c * c).sum::<f64>().sqrt();
        frame
            .iter()
            .zip(coef)
            .fold(TangentVector::zero(n), |acc, (e, c)| acc.add(&e.scaled(c / len)))
    };
    if dim == 2 {
        return Ok((0..count)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / count as f64;
                combine(&[th.cos(), th.sin()])
            })
            .collect());
    }
    Ok((1..=count)
        .map(|i| {
            let coef: Vec<f64> = (0..dim / 2)
                .flat_map(|pair| {
                    let u1 = halton(i, PRIMES[(2 * pair) % PRIMES.len()]).max(f64::MIN_POSITIVE);
                    let u2 = halton(i, PRIMES[(2 * pair + 1) % PRIMES.len()]);
                    let r = (-2.0 * u1.ln()).sqrt();
                    [r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin()]
                })
                .collect();
            combine(&coef)
        })
        .collect())
}

/// One `(ρ, ω)` sample of the Laplacian comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonSample {
    pub rho: f64,
    /// Real coordinates of the unit direction.
    pub direction: Vec<f64>,
    pub delta_r: Option<f64>,
    pub bound: Option<f64>,
    pub lambda: Option<f64>,
    pub error: Option<String>,
}

impl ComparisonSample {
    /// `bound − Δr`
    pub fn margin(&self) -> Option<f64> {
        Some(self.bound? - self.delta_r?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    pub laplacian_ok: bool,
    pub lambda_monotone: bool,
    pub lambda_limit_one: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub k: f64,
    pub point: Vec<f64>,
    pub samples: Vec<ComparisonSample>,
    /// `|λ(ρ₀) − 1|` per direction at the limit radius `ρ₀`.
    pub limit_deviation: Vec<Option<f64>>,
    pub verdicts: Verdicts,
}

impl ComparisonReport {
    pub fn min_margin(&self) -> f64 {
        self.samples.iter().filter_map(ComparisonSample::margin).fold(f64::INFINITY, f64::min)
    }

    pub fn max_lambda_deviation(&self) -> f64 {
        self.samples.iter().filter_map(|s| s.lambda).map(|l| (l - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn error_count(&self) -> usize {
        self.samples.iter().filter(|s| s.error.is_some()).count()
    }
}

/// Evaluates `Δr`, the comparison bound and `λ` on a radius grid along each direction.
///
/// Per-sample failures are recorded in the sample and excluded from the verdicts.
pub fn laplacian_comparison_check(
    model: &MetricModel,
    p: &ChartPoint,
    k: f64,
    rhos: &[f64],
    directions: &[TangentVector],
) -> Result<ComparisonReport> {
    model.eval_metric(p)?;
    let space = ModelSpace::new(k);
    let n = model.n();
    let mut radii: Vec<f64> = rhos.to_vec();
    radii.sort_by(f64::total_cmp);
    let per_direction: Vec<(Vec<ComparisonSample>, Option<f64>)> = directions
        .par_iter()
        .map(|dir| direction_samples(model, p, space, n, &radii, dir))
        .collect();
    let mut samples = Vec::with_capacity(radii.len() * directions.len());
    let mut limit_deviation = Vec::with_capacity(directions.len());
    let mut lambda_monotone = true;
    for (row, limit) in per_direction {
        let lambdas: Vec<f64> = row.iter().filter_map(|s| s.lambda).collect();
        lambda_monotone &= lambdas.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
        limit_deviation.push(limit);
        samples.extend(row);
    }
    let laplacian_ok = samples.iter().filter_map(ComparisonSample::margin).all(|m| m >= MARGIN_TOL);
    let lambda_limit_one = limit_deviation.iter().all(|d| d.is_some_and(|d| d <= LIMIT_TOL));
    Ok(ComparisonReport {
        k,
        point: p.to_real(),
        samples,
        limit_deviation,
        verdicts: Verdicts { laplacian_ok, lambda_monotone, lambda_limit_one },
    })
}

fn direction_samples(
    model: &MetricModel,
    p: &ChartPoint,
    space: ModelSpace,
    n: usize,
    radii: &[f64],
    dir: &TangentVector,
) -> (Vec<ComparisonSample>, Option<f64>) {
    let blank = |rho: f64, error: Option<String>| ComparisonSample {
        rho,
        direction: dir.x.clone(),
        delta_r: None,
        bound: None,
        lambda: None,
        error,
    };
    // One integration through the limit radius and every grid radius inside the bound.
    let mut run: Vec<f64> = radii.iter().copied().filter(|&r| r > 0.0 && r <= model.injectivity_bound).collect();
    let limit_slot = run.partition_point(|&r| r < LIMIT_RADIUS);
    run.insert(limit_slot, LIMIT_RADIUS);
    let jacobians = match normal_jacobians(model, p, dir, &run, JACOBI_STEP) {
        Ok(j) => j,
        Err(e) => return (radii.iter().map(|&r| blank(r, Some(e.to_string()))).collect(), None),
    };
    let limit = density_ratio(&jacobians[limit_slot], space, n).ok().map(|l| (l - 1.0).abs());
    let mut by_radius = jacobians.into_iter().enumerate().filter(|(i, _)| *i != limit_slot).map(|(_, j)| j);
    let mut next = by_radius.next();
    let row = radii
        .iter()
        .map(|&rho| {
            if let Err(e) = check_radius(model, rho) {
                return blank(rho, Some(e.to_string()));
            }
            let jac = next.take().expect("one Jacobian per admissible radius");
            next = by_radius.next();
            let eval = || -> Result<(f64, f64, f64)> {
                let lambda = density_ratio(&jac, space, n)?;
                let delta_r = jac.log_det_derivative()?;
                let bound = space.laplacian_bound(n, rho)?;
                Ok((delta_r, bound, lambda))
            };
            match eval() {
                Ok((delta_r, bound, lambda)) => ComparisonSample {
                    rho,
                    direction: dir.x.clone(),
                    delta_r: Some(delta_r),
                    bound: Some(bound),
                    lambda: Some(lambda),
                    error: None,
                },
                Err(e) => blank(rho, Some(e.to_string())),
            }
        })
        .collect();
    (row, limit)
}

/// Which curvature quantity bounds `K` from below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSource {
    /// `min 𝔯ic(V,V̄) / ((2n−1)|V|²)`
    HolomorphicRicci,
    /// `min Ric(X,X) / ((2n−1)|X|²)`
    RealRicci,
    /// `min HSC`
    Hsc,
}

/// Sampled curvature minima; an estimate, never a certified global bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KEstimate {
    pub samples: usize,
    pub min_holomorphic_ricci: f64,
    pub min_real_ricci: f64,
    pub min_hsc: f64,
    pub argmin_holomorphic_ricci: Vec<f64>,
    pub argmin_real_ricci: Vec<f64>,
    pub argmin_hsc: Vec<f64>,
}

impl KEstimate {
    pub fn k(&self, source: KSource) -> f64 {
        match source {
            KSource::HolomorphicRicci => self.min_holomorphic_ricci,
            KSource::RealRicci => self.min_real_ricci,
            KSource::Hsc => self.min_hsc,
        }
    }

    /// The estimate for `source`, or [`Error::InconclusiveK`] unless it is positive.
    pub fn certified(&self, source: KSource) -> Result<f64> {
        let k = self.k(source);
        if k > 0.0 && k.is_finite() {
            Ok(k)
        } else {
            Err(Error::InconclusiveK(k))
        }
    }
}

/// Smallest eigenvalue of `A` relative to the positive form `B` (both Hermitian).
fn min_relative_eigenvalue_c(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let chol = b.clone().cholesky().ok_or_else(|| Error::SingularMetric("Hermitian form".into()))?;
    let l_inv = chol.l().try_inverse().ok_or_else(|| Error::SingularMetric("Hermitian form".into()))?;
    let c = &l_inv * a * l_inv.adjoint();
    let c = (&c + c.adjoint()) * C64::from(0.5);
    Ok(c.symmetric_eigenvalues().min())
}

fn min_relative_eigenvalue_r(a: &RMatrix, b: &RMatrix) -> Result<f64> {
    let chol = b.clone().cholesky().ok_or_else(|| Error::SingularMetric("real form".into()))?;
    let l_inv = chol.l().try_inverse().ok_or_else(|| Error::SingularMetric("real form".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(c.symmetric_eigenvalues().min())
}

/// Per-point curvature minima: the two Ricci quantities exactly (as generalized
/// eigenvalues), HSC over `hsc_directions` sampled unit directions.
pub fn pointwise_minima(model: &MetricModel, p: &ChartPoint, hsc_directions: usize) -> Result<(f64, f64, f64)> {
    let n = model.n();
    let count = (2 * n - 1) as f64;
    let r = curvature(Flavor::StromingerBismut, model, p)?;
    let ev = model.eval_metric(p)?;
    // 𝔯ic(V) = Σ M_{kj} v^k v̄^j = v* Mᵀ v and |V|² = v* Hᵀ v.
    let hol = min_relative_eigenvalue_c(&r.contracted_ricci_matrix().transpose(), &ev.h.transpose())? / count;
    let dim = 2 * n;
    let mut ric = RMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let (ea, eb) = (TangentVector::coordinate(n, a), TangentVector::coordinate(n, b));
            let sym = 0.5 * (ricci_real_sb(model, p, &ea, &eb)? + ricci_real_sb(model, p, &eb, &ea)?);
            ric[(a, b)] = sym;
            ric[(b, a)] = sym;
        }
    }
    let real = min_relative_eigenvalue_r(&ric, &ev.g_real)? / count;
    let hsc = direction_grid(model, p, hsc_directions.max(1))?
        .iter()
        .map(|x| r.hsc(x))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok((hol, real, hsc))
}

/// Curvature minima over `points`.
pub fn estimate_k(model: &MetricModel, points: &[ChartPoint], hsc_directions: usize) -> Result<KEstimate> {
    let minima: Vec<(f64, f64, f64)> =
        points.par_iter().map(|p| pointwise_minima(model, p, hsc_directions)).collect::<Result<_>>()?;
    let argmin = |key: fn(&(f64, f64, f64)) -> f64| -> (f64, Vec<f64>) {
        minima
            .iter()
            .zip(points)
            .map(|(m, p)| (key(m), p))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or((f64::INFINITY, Vec::new()), |(v, p)| (v, p.to_real()))
    };
    let (min_holomorphic_ricci, argmin_holomorphic_ricci) = argmin(|m| m.0);
    let (min_real_ricci, argmin_real_ricci) = argmin(|m| m.1);
    let (min_hsc, argmin_hsc) = argmin(|m| m.2);
    Ok(KEstimate {
        samples: points.len(),
        min_holomorphic_ricci,
        min_real_ricci,
        min_hsc,
        argmin_holomorphic_ricci,
        argmin_real_ricci,
        argmin_hsc,
    })
}

/// `J·p` read as a tangent vector: on Fubini-Study its geodesic is a bounded great circle.
pub fn tangential_direction(p: &ChartPoint) -> Result<TangentVector> {
    let v = apply_j(&TangentVector::from_real(p.to_real()));
    if v.euclidean_norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(v)
}

/// Test-field second variations along one geodesic longer than `π/√K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFieldSample {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub length: f64,
    /// `Σ_j I(V_j, V_j)` over the Myers fields.
    pub myers_sum: f64,
    /// `∫((2n−1)f′² − f² Ric^SB(γ′,γ′))`.
    pub myers_ricci_integral: f64,
    /// `I(V, V)` for the Synge field `sin(πt/L)Jγ′`.
    pub synge_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiameterEstimate {
    pub estimate: f64,
    pub bound: f64,
    pub relative_gap: f64,
    pub shots: usize,
    pub failed_shots: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiameterReport {
    pub k: f64,
    /// False when `K ≤ 0`: no diameter bound exists.
    pub applicable: bool,
    pub test_fields: Vec<TestFieldSample>,
    pub diameter: Option<DiameterEstimate>,
}

#[derive(Clone, Debug)]
pub struct DiameterConfig {
    /// Test-field geodesics have length `length_factor·π/√K`.
    pub length_factor: f64,
    pub starts: Vec<ChartPoint>,
    /// Shoot from each start to `exp(L u)` for these multiples `L/(π/√K)`.
    pub shot_fractions: Vec<f64>,
    /// Angles (in the `J`-plane of the tangential direction) of the shot directions.
    pub shot_angles: Vec<f64>,
    pub estimate_diameter: bool,
    pub shoot: ShootOptions,
}

impl Default for DiameterConfig {
    fn default() -> Self {
        Self {
            length_factor: 1.05,
            starts: Vec::new(),
            shot_fractions: vec![0.998, 1.002],
            shot_angles: vec![0.0, PI / 4.0, -PI / 4.0, PI],
            estimate_diameter: false,
            shoot: ShootOptions::default(),
        }
    }
}

/// Along geodesics of length slightly above `π/√K`, evaluates the Myers and Synge test
/// fields; optionally estimates the diameter as the largest shooting distance to points
/// `exp_p(L u)` with `L` near `π/√K`.
pub fn myers_diameter_experiment(model: &MetricModel, k: f64, config: &DiameterConfig) -> Result<DiameterReport> {
    if !(k > 0.0) {
        return Ok(DiameterReport { k, applicable: false, test_fields: Vec::new(), diameter: None });
    }
    let bound = PI / k.sqrt();
    let length = config.length_factor * bound;
    let test_fields = config
        .starts
        .par_iter()
        .map(|p| test_field_sample(model, p, length))
        .collect::<Result<Vec<_>>>()?;
    let diameter = if config.estimate_diameter { Some(estimate_diameter(model, bound, config)?) } else { None };
    Ok(DiameterReport { k, applicable: true, test_fields, diameter })
}

fn test_field_sample(model: &MetricModel, p: &ChartPoint, length: f64) -> Result<TestFieldSample> {
    let u = normalize(model, p, &tangential_direction(p)?)?;
    let steps = ((length / 1e-3).ceil() as usize).max(1000);
    let curve = integrate_geodesic(model, p, &u, length, steps)?;
    let geom = CurveGeometry::new(model, &curve)?;
    let seed = adapted_frame(model, p, &u)?;
    let frame = parallel_frame(Flavor::StromingerBismut, model, &curve, &seed)?;
    let (f, df) = sine_bump(&curve);
    let fields = myers_fields(&curve, &frame, &f, &df)?;
    let sum = myers_sum(&geom, &fields, &f, &df)?;
    let synge = synge_field(model, &curve)?;
    Ok(TestFieldSample {
        start: p.to_real(),
        direction: u.x.clone(),
        length,
        myers_sum: sum.index_sum,
        myers_ricci_integral: sum.ricci_integral,
        synge_value: second_variation_sb(&geom, &synge, &synge)?,
    })
}

fn estimate_diameter(model: &MetricModel, bound: f64, config: &DiameterConfig) -> Result<DiameterEstimate> {
    let mut targets = Vec::new();
    for p in &config.starts {
        let base = normalize(model, p, &tangential_direction(p)?)?;
        let frame = adapted_frame(model, p, &base)?;
        let n = model.n();
        for &angle in &config.shot_angles {
            // Rotate within the complex line spanned by the tangential direction.
            let u = frame[0].scaled(angle.cos()).add(&frame[n].scaled(angle.sin()));
            for &fraction in &config.shot_fractions {
                targets.push((p.clone(), u.scaled(fraction * bound)));
            }
        }
    }
    let lengths: Vec<Option<f64>> = targets
        .par_iter()
        .map(|(p, v)| {
            let q = exp_map(model, p, v, 4000).ok()?;
            distance_shoot(model, p, &q, &config.shoot).ok().map(|s| s.length)
        })
        .collect();
    let failed_shots = lengths.iter().filter(|l| l.is_none()).count();
    let estimate = lengths.iter().flatten().copied().fold(0.0, f64::max);
    if failed_shots == lengths.len() {
        return Err(Error::NoConvergence { best_error: f64::INFINITY });
    }
    Ok(DiameterEstimate {
        estimate,
        bound,
        relative_gap: (estimate - bound).abs() / bound,
        shots: lengths.len(),
        failed_shots,
    })
}
