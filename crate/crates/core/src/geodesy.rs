//! Geodesics, exponential map, shooting distance, parallel transport, parallel
//! frames and Jacobi fields.
//!
//! All integrations are fixed-step RK4. Fields along a curve that come from a
//! geodesic are integrated jointly with the geodesic itself, so midpoint stages see
//! the exact RK4 trajectory rather than an interpolant.

use std::sync::Arc;

use crate::chart::{apply_j, ChartPoint, MetricModel, TangentVector};
use crate::connections::{christoffel, Flavor};
use crate::curvature::{curvature, CurvatureField};
use crate::error::{Error, Result};
use crate::linalg::{bilinear, solve_real, RMatrix, C64, ZERO};
use crate::numerics::{derivative, rk4, rk4_step};

/// Position and velocity of a prescribed (non-geodesic) curve at time `t`.
pub type PathFn = Arc<dyn Fn(f64) -> (ChartPoint, TangentVector) + Send + Sync>;

#[derive(Clone)]
pub enum CurveSource {
    Geodesic { start: ChartPoint, velocity: TangentVector },
    Path(PathFn),
}

impl std::fmt::Debug for CurveSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurveSource::Geodesic { start, velocity } => {
                f.debug_struct("Geodesic").field("start", start).field("velocity", velocity).finish()
            }
            CurveSource::Path(_) => f.write_str("Path(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Curve {
    pub t: Vec<f64>,
    pub points: Vec<ChartPoint>,
    pub velocities: Vec<TangentVector>,
    /// `max_t |∇^LC_{γ′}γ′|`, with the acceleration taken from the sampled velocities.
    pub geodesic_residual: f64,
    /// `max_t |∇^SB_{γ′}γ′|`, same sampling.
    pub sb_residual: f64,
    pub source: CurveSource,
}

impl Curve {
    pub fn n(&self) -> usize {
        self.points[0].dim()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.t.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        *self.t.last().expect("nonempty curve")
    }

    pub fn speeds(&self, model: &MetricModel) -> Result<Vec<f64>> {
        self.points.iter().zip(&self.velocities).map(|(p, v)| model.norm(p, v)).collect()
    }

    /// Largest deviation of `|γ′|` from its initial value.
    pub fn speed_drift(&self, model: &MetricModel) -> Result<f64> {
        let s = self.speeds(model)?;
        Ok(s.iter().map(|v| (v - s[0]).abs()).fold(0.0, f64::max))
    }

    /// Samples a prescribed curve on a uniform grid of `[a, b]`.
    pub fn from_path(model: &MetricModel, a: f64, b: f64, steps: usize, path: PathFn) -> Result<Curve> {
        let h = (b - a) / steps as f64;
        let t: Vec<f64> = (0..=steps).map(|k| a + k as f64 * h).collect();
        let (points, velocities): (Vec<_>, Vec<_>) = t.iter().map(|&s| path(s)).unzip();
        for (k, p) in points.iter().enumerate() {
            if !model.contains(p) {
                return Err(Error::DomainExit { time: t[k] });
            }
        }
        let mut curve = Curve {
            t,
            points,
            velocities,
            geodesic_residual: 0.0,
            sb_residual: 0.0,
            source: CurveSource::Path(path),
        };
        curve.measure_residuals(model)?;
        Ok(curve)
    }

    fn measure_residuals(&mut self, model: &MetricModel) -> Result<()> {
        if self.len() < 5 {
            return Ok(());
        }
        let max = |r: Vec<f64>| r.into_iter().fold(0.0, f64::max);
        self.geodesic_residual = max(self.pointwise_residuals(model, Flavor::LeviCivita)?);
        self.sb_residual = max(self.pointwise_residuals(model, Flavor::StromingerBismut)?);
        Ok(())
    }

    /// `|∇_{γ′}γ′|` at every node, with the acceleration taken from the sampled velocities.
    pub fn pointwise_residuals(&self, model: &MetricModel, flavor: Flavor) -> Result<Vec<f64>> {
        let vel: Vec<Vec<f64>> = self.velocities.iter().map(|v| v.x.clone()).collect();
        let acc = derivative(&vel, self.step())?;
        self.points
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let v = &self.velocities[k].x;
                let gam = christoffel(flavor, model, p)?.contract_real(v, v);
                let r = TangentVector::from_real(acc[k].iter().zip(&gam).map(|(a, g)| a + g).collect());
                model.norm(p, &r)
            })
            .collect()
    }
}

/// Default RK4 step count for a curve of length `length`.
pub fn default_steps(length: f64) -> usize {
    ((length.abs() / 1e-3).ceil() as usize).max(1000)
}

const MAX_STEP: f64 = 0.05;

/// `∇^LC_v v = 0` solved for the coordinate acceleration in real coordinates:
/// `g ẍ = −(∂_v g) v + ½ ∇_x g(v, v)`.
///
/// This avoids the complex Christoffel tables, which [`Curve::geodesic_residual`] uses
/// to check the result.
pub fn geodesic_acceleration(model: &MetricModel, p: &ChartPoint, v: &[f64]) -> Result<Vec<f64>> {
    let n = p.dim();
    let m = 2 * n;
    let ev = model.eval_metric(p)?;
    let part = model.metric_partials(p, false)?;
    let i = crate::linalg::I;
    // ∂g/∂x^a from ∂_{x^k} = ∂_k + ∂_k̄ and ∂_{y^k} = i(∂_k − ∂_k̄).
    let dg: Vec<RMatrix> = (0..m)
        .map(|a| {
            let dh = if a < n {
                &part.first.dz[a] + &part.first.dzbar[a]
            } else {
                (&part.first.dz[a - n] - &part.first.dzbar[a - n]) * i
            };
            crate::chart::real_metric_from_h(&dh)
        })
        .collect();
    let vv = nalgebra::DVector::from_column_slice(v);
    let mut rhs = nalgebra::DVector::zeros(m);
    for (a, dga) in dg.iter().enumerate() {
        rhs -= dga * &vv * v[a];
        rhs[a] += 0.5 * vv.dot(&(dga * &vv));
    }
    let chol = ev.g_real.cholesky().ok_or_else(|| Error::SingularMetric(p.to_string()))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

fn geodesic_rhs(model: &MetricModel, y: &[f64], n: usize) -> Result<Vec<f64>> {
    let m = 2 * n;
    let p = ChartPoint::from_real(&y[..m]);
    let v = &y[m..2 * m];
    let acc = geodesic_acceleration(model, &p, v)?;
    let mut out = Vec::with_capacity(2 * m);
    out.extend_from_slice(v);
    out.extend(acc);
    Ok(out)
}

/// Geodesic with `γ(0) = p`, `γ′(0) = v` on `[0, length]` in `steps` RK4 steps.
pub fn integrate_geodesic(
    model: &MetricModel,
    p: &ChartPoint,
    v: &TangentVector,
    length: f64,
    steps: usize,
) -> Result<Curve> {
    if v.euclidean_norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let h = length / steps.max(1) as f64;
    if steps == 0 || !(h > 0.0) || h > MAX_STEP {
        return Err(Error::StepTooLarge { step: h, length });
    }
    if !model.contains(p) {
        return Err(Error::DomainError(p.to_string()));
    }
    let n = p.dim();
    let m = 2 * n;
    let mut y0 = p.to_real();
    y0.extend_from_slice(&v.x);
    let states = rk4(y0, 0.0, h, steps, |_, y| geodesic_rhs(model, y, n))?;
    let mut curve = Curve {
        t: (0..=steps).map(|k| k as f64 * h).collect(),
        points: states.iter().map(|y| ChartPoint::from_real(&y[..m])).collect(),
        velocities: states.iter().map(|y| TangentVector::from_real(y[m..].to_vec())).collect(),
        geodesic_residual: 0.0,
        sb_residual: 0.0,
        source: CurveSource::Geodesic { start: p.clone(), velocity: v.clone() },
    };
    if let Some(k) = curve.points.iter().position(|q| !model.contains(q)) {
        return Err(Error::DomainExit { time: curve.t[k] });
    }
    curve.measure_residuals(model)?;
    Ok(curve)
}

/// `exp_p(v)` by integrating the geodesic over `t ∈ [0, 1]`.
pub fn exp_map(model: &MetricModel, p: &ChartPoint, v: &TangentVector, steps: usize) -> Result<ChartPoint> {
    if v.euclidean_norm() == 0.0 {
        return Ok(p.clone());
    }
    let n = p.dim();
    let mut y = p.to_real();
    y.extend_from_slice(&v.x);
    let h = 1.0 / steps as f64;
    for k in 0..steps {
        y = rk4_step(k as f64 * h, &y, h, &mut |_, s| geodesic_rhs(model, s, n))?;
    }
    let q = ChartPoint::from_real(&y[..2 * n]);
    if !model.contains(&q) {
        return Err(Error::DomainExit { time: 1.0 });
    }
    Ok(q)
}

/// Step-halving study of the geodesic integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rk4Convergence {
    /// Slope of `log err` against `log h`; not finite when the coarse error is at roundoff.
    pub order: f64,
    /// Endpoint error at the coarsest step.
    pub coarse_error: f64,
}

/// Endpoint errors at `coarse, 2·coarse, 4·coarse, 8·coarse` steps against a
/// `64·coarse` reference, regressed on `log h`.
pub fn rk4_convergence(
    model: &MetricModel,
    p: &ChartPoint,
    v: &TangentVector,
    length: f64,
    coarse: usize,
) -> Result<Rk4Convergence> {
    let end = |steps: usize| -> Result<Vec<f64>> {
        let c = integrate_geodesic(model, p, v, length, steps)?;
        let mut y = c.points.last().expect("nonempty curve").to_real();
        y.extend_from_slice(&c.velocities.last().expect("nonempty curve").x);
        Ok(y)
    };
    let reference = end(64 * coarse)?;
    let mut xs = Vec::new();
    let mut errors = Vec::new();
    for k in 0..4 {
        let steps = coarse << k;
        let e = end(steps)?;
        errors.push(e.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        xs.push((length / steps as f64).ln());
    }
    let coarse_error = errors[0];
    if coarse_error < ROUNDOFF_ERROR {
        return Ok(Rk4Convergence { order: f64::NAN, coarse_error });
    }
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(Rk4Convergence { order: sxy / sxx, coarse_error })
}

/// Below this coarse endpoint error the integrator is exact and has no observable order.
const ROUNDOFF_ERROR: f64 = 1e-12;

/// Observed convergence order of the geodesic integrator; see [`rk4_convergence`].
pub fn rk4_order(model: &MetricModel, p: &ChartPoint, v: &TangentVector, length: f64, coarse: usize) -> Result<f64> {
    Ok(rk4_convergence(model, p, v, length, coarse)?.order)
}

/// Integrates an auxiliary linear-in-time system `y′ = f(γ, γ′, y)` along `curve`,
/// returning the state at every node.
pub(crate) fn integrate_along<F>(model: &MetricModel, curve: &Curve, y0: Vec<f64>, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&ChartPoint, &[f64], &[f64]) -> Result<Vec<f64>>,
{
    let n = curve.n();
    let m = 2 * n;
    let h = curve.step();
    let t0 = curve.start();
    match &curve.source {
        CurveSource::Geodesic { start, velocity } => {
            let aux = y0.len();
            let mut full = start.to_real();
            full.extend_from_slice(&velocity.x);
            full.extend(y0);
            let states = rk4(full, t0, h, curve.steps(), |_, y| {
                let p = ChartPoint::from_real(&y[..m]);
                let mut out = geodesic_rhs(model, &y[..2 * m], n)?;
                out.extend(f(&p, &y[m..2 * m], &y[2 * m..])?);
                Ok(out)
            })?;
            Ok(states.into_iter().map(|y| y[2 * m..2 * m + aux].to_vec()).collect())
        }
        CurveSource::Path(path) => rk4(y0, t0, h, curve.steps(), |t, y| {
            let (p, v) = path(t);
            f(&p, &v.x, y)
        }),
    }
}

/// Samples of a vector field along a curve, with optional coordinate `t`-derivatives.
#[derive(Clone, Debug)]
pub struct FieldAlongCurve {
    pub samples: Vec<TangentVector>,
    pub derivatives: Option<Vec<TangentVector>>,
}

impl FieldAlongCurve {
    pub fn new(samples: Vec<TangentVector>) -> Self {
        Self { samples, derivatives: None }
    }

    pub fn with_derivatives(samples: Vec<TangentVector>, derivatives: Vec<TangentVector>) -> Self {
        Self { samples, derivatives: Some(derivatives) }
    }

    pub fn from_fn(curve: &Curve, f: impl Fn(f64) -> TangentVector) -> Self {
        Self::new(curve.t.iter().map(|&t| f(t)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn check_grid(&self, curve: &Curve) -> Result<()> {
        if self.samples.len() != curve.len() {
            return Err(Error::GridMismatch { expected: curve.len(), found: self.samples.len() });
        }
        if let Some(d) = &self.derivatives {
            if d.len() != curve.len() {
                return Err(Error::GridMismatch { expected: curve.len(), found: d.len() });
            }
        }
        Ok(())
    }

    /// Coordinate derivatives, supplied or else from the sampled-derivative stencil.
    pub fn coordinate_derivatives(&self, curve: &Curve) -> Result<Vec<TangentVector>> {
        self.check_grid(curve)?;
        if let Some(d) = &self.derivatives {
            return Ok(d.clone());
        }
        let raw: Vec<Vec<f64>> = self.samples.iter().map(|v| v.x.clone()).collect();
        Ok(derivative(&raw, curve.step())?.into_iter().map(TangentVector::from_real).collect())
    }

    /// `∇_{γ′} V = dV/dt + Γ(γ′, V)` at every node.
    pub fn covariant_derivative(&self, flavor: Flavor, model: &MetricModel, curve: &Curve) -> Result<Vec<TangentVector>> {
        let d = self.coordinate_derivatives(curve)?;
        curve
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let g = christoffel(flavor, model, p)?.contract_real(&curve.velocities[k].x, &self.samples[k].x);
                Ok(d[k].add(&TangentVector::from_real(g)))
            })
            .collect()
    }

    pub fn apply_j(&self) -> Self {
        Self {
            samples: self.samples.iter().map(apply_j).collect(),
            derivatives: self.derivatives.as_ref().map(|d| d.iter().map(apply_j).collect()),
        }
    }

    pub fn scaled_by(&self, f: &[f64], df: Option<&[f64]>) -> Self {
        let samples: Vec<_> = self.samples.iter().zip(f).map(|(v, s)| v.scaled(*s)).collect();
        let derivatives = match (&self.derivatives, df) {
            (Some(d), Some(df)) => Some(
                (0..self.samples.len())
                    .map(|k| d[k].scaled(f[k]).add(&self.samples[k].scaled(df[k])))
                    .collect(),
            ),
            _ => None,
        };
        Self { samples, derivatives }
    }
}

fn transport_rhs(flavor: Flavor, model: &MetricModel, p: &ChartPoint, vel: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let conn = christoffel(flavor, model, p)?;
    let m = vel.len();
    let mut out = Vec::with_capacity(y.len());
    for chunk in y.chunks(m) {
        out.extend(conn.contract_real(vel, chunk).into_iter().map(|v| -v));
    }
    Ok(out)
}

/// Parallel transport of `v0` along `curve`; the derivative samples are `−Γ(γ′, V)`.
pub fn parallel_transport(flavor: Flavor, model: &MetricModel, curve: &Curve, v0: &TangentVector) -> Result<FieldAlongCurve> {
    Ok(parallel_transport_many(flavor, model, curve, std::slice::from_ref(v0))?.remove(0))
}

pub fn parallel_transport_many(
    flavor: Flavor,
    model: &MetricModel,
    curve: &Curve,
    seeds: &[TangentVector],
) -> Result<Vec<FieldAlongCurve>> {
    let m = 2 * curve.n();
    let y0: Vec<f64> = seeds.iter().flat_map(|v| v.x.iter().copied()).collect();
    let states = integrate_along(model, curve, y0, |p, vel, y| transport_rhs(flavor, model, p, vel, y))?;
    let mut fields = Vec::with_capacity(seeds.len());
    for j in 0..seeds.len() {
        let samples: Vec<TangentVector> =
            states.iter().map(|s| TangentVector::from_real(s[j * m..(j + 1) * m].to_vec())).collect();
        let derivatives = curve
            .points
            .iter()
            .zip(&curve.velocities)
            .zip(&samples)
            .map(|((p, vel), v)| Ok(TangentVector::from_real(transport_rhs(flavor, model, p, &vel.x, &v.x)?)))
            .collect::<Result<Vec<_>>>()?;
        fields.push(FieldAlongCurve::with_derivatives(samples, derivatives));
    }
    Ok(fields)
}

/// Real `2n×2n` transport matrices `M(t)` with `V(t) = M(t) V(a)`.
#[derive(Clone, Debug)]
pub struct TransportOperator {
    pub flavor: Flavor,
    pub matrices: Vec<RMatrix>,
}

impl TransportOperator {
    /// `max_t ‖M(t)ᵀ g(γ(t)) M(t) − g(γ(a))‖_max`
    pub fn isometry_defect(&self, model: &MetricModel, curve: &Curve) -> Result<f64> {
        let g0 = model.eval_metric(&curve.points[0])?.g_real;
        let mut worst: f64 = 0.0;
        for (mt, p) in self.matrices.iter().zip(&curve.points) {
            let g = model.eval_metric(p)?.g_real;
            let d = mt.transpose() * g * mt - &g0;
            worst = worst.max(d.amax());
        }
        Ok(worst)
    }

    /// `max_t ‖M J − J M‖_max`
    pub fn j_commutation_defect(&self) -> f64 {
        let n = self.matrices[0].nrows() / 2;
        let j = crate::chart::j_matrix(n);
        self.matrices.iter().map(|mt| (mt * &j - &j * mt).amax()).fold(0.0, f64::max)
    }
}

pub fn transport_operator(flavor: Flavor, model: &MetricModel, curve: &Curve) -> Result<TransportOperator> {
    let n = curve.n();
    let seeds: Vec<TangentVector> = (0..2 * n).map(|a| TangentVector::coordinate(n, a)).collect();
    let fields = parallel_transport_many(flavor, model, curve, &seeds)?;
    let matrices = (0..curve.len())
        .map(|k| RMatrix::from_fn(2 * n, 2 * n, |r, c| fields[c].samples[k].x[r]))
        .collect();
    Ok(TransportOperator { flavor, matrices })
}

fn inner(g: &RMatrix, a: &TangentVector, b: &TangentVector) -> f64 {
    bilinear(g, &a.x, &b.x)
}

/// Orthonormal basis `(e_1..e_n, Je_1..Je_n)` at `p` with `e_1 = u/|u|`, completed by
/// Gram-Schmidt over the coordinate vectors.
pub fn adapted_frame(model: &MetricModel, p: &ChartPoint, u: &TangentVector) -> Result<Vec<TangentVector>> {
    let n = p.dim();
    let g = model.eval_metric(p)?.g_real;
    let mut base: Vec<TangentVector> = Vec::with_capacity(n);
    let mut spanned: Vec<TangentVector> = Vec::with_capacity(2 * n);
    let candidates = std::iter::once(u.clone()).chain((0..2 * n).map(|a| TangentVector::coordinate(n, a)));
    for cand in candidates {
        if base.len() == n {
            break;
        }
        let mut w = cand;
        for e in &spanned {
            w = w.sub(&e.scaled(inner(&g, &w, e)));
        }
        let len = inner(&g, &w, &w).sqrt();
        if len < 1e-8 {
            if base.is_empty() {
                return Err(Error::ZeroVector);
            }
            continue;
        }
        let e = w.scaled(1.0 / len);
        let je = apply_j(&e);
        spanned.push(e.clone());
        spanned.push(je);
        base.push(e);
    }
    let mut frame = base.clone();
    frame.extend(base.iter().map(apply_j));
    Ok(frame)
}

/// Gram matrix `g(F_i, F_j)` at node `k` for a frame along a curve.
pub fn frame_gram(model: &MetricModel, curve: &Curve, frame: &[FieldAlongCurve], k: usize) -> Result<RMatrix> {
    let g = model.eval_metric(&curve.points[k])?.g_real;
    let m = frame.len();
    Ok(RMatrix::from_fn(m, m, |i, j| inner(&g, &frame[i].samples[k], &frame[j].samples[k])))
}

/// Transports a seed frame satisfying orthonormality, `Je_i = e_{i+n}` and `e_1 = γ′(a)`.
pub fn parallel_frame(flavor: Flavor, model: &MetricModel, curve: &Curve, seed: &[TangentVector]) -> Result<Vec<FieldAlongCurve>> {
    let n = curve.n();
    if seed.len() != 2 * n {
        return Err(Error::BadSeedFrame(format!("expected {} vectors, got {}", 2 * n, seed.len())));
    }
    let g = model.eval_metric(&curve.points[0])?.g_real;
    for i in 0..2 * n {
        for j in 0..2 * n {
            let want = if i == j { 1.0 } else { 0.0 };
            let got = inner(&g, &seed[i], &seed[j]);
            if (got - want).abs() > 1e-8 {
                return Err(Error::BadSeedFrame(format!("g(e{}, e{}) = {got}", i + 1, j + 1)));
            }
        }
    }
    for i in 0..n {
        let d = apply_j(&seed[i]).sub(&seed[i + n]).euclidean_norm();
        if d > 1e-8 {
            return Err(Error::BadSeedFrame(format!("J e{} differs from e{} by {d:e}", i + 1, i + n + 1)));
        }
    }
    let d = seed[0].sub(&curve.velocities[0]).euclidean_norm();
    if d > 1e-8 * (1.0 + curve.velocities[0].euclidean_norm()) {
        return Err(Error::BadSeedFrame(format!("e1 differs from the initial velocity by {d:e}")));
    }
    parallel_transport_many(flavor, model, curve, seed)
}

/// `S_{AD} = Σ R_{ABCD} u^B u^C`, the Jacobi operator of `u` in complex indices.
fn jacobi_operator(r: &CurvatureField, u: &[C64]) -> Vec<Vec<C64>> {
    let m = u.len();
    let mut s = vec![vec![ZERO; m]; m];
    for (a, row) in s.iter_mut().enumerate() {
        for b in 0..m {
            if u[b] == ZERO {
                continue;
            }
            for c in 0..m {
                let w = u[b] * u[c];
                if w == ZERO {
                    continue;
                }
                for (d, v) in row.iter_mut().enumerate() {
                    *v += r.r.get(a, b, c, d) * w;
                }
            }
        }
    }
    s
}

/// Jacobi fields in an LC-parallel orthonormal frame: the state holds the frame, then
/// `(x, x′)` frame components per field.
struct JacobiSystem {
    n: usize,
    fields: usize,
}

impl JacobiSystem {
    fn m(&self) -> usize {
        2 * self.n
    }

    fn rhs(&self, model: &MetricModel, p: &ChartPoint, vel: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let m = self.m();
        let frame_len = m * m;
        let mut out = transport_rhs(Flavor::LeviCivita, model, p, vel, &y[..frame_len])?;
        let r = curvature(Flavor::LeviCivita, model, p)?;
        let s = jacobi_operator(&r, &crate::chart::complexify(vel));
        let frame_c: Vec<Vec<C64>> = y[..frame_len].chunks(m).map(crate::chart::complexify).collect();
        // k[b][a] = R(E_b, γ′, γ′, E_a)
        let mut k = vec![vec![0.0; m]; m];
        for b in 0..m {
            for a in 0..m {
                let mut v = ZERO;
                for (aa, row) in s.iter().enumerate() {
                    for (dd, sv) in row.iter().enumerate() {
                        v += frame_c[b][aa] * sv * frame_c[a][dd];
                    }
                }
                k[b][a] = v.re;
            }
        }
        for f in 0..self.fields {
            let base = frame_len + f * 2 * m;
            let x = &y[base..base + m];
            let xp = &y[base + m..base + 2 * m];
            out.extend_from_slice(xp);
            for a in 0..m {
                out.push(-(0..m).map(|b| k[b][a] * x[b]).sum::<f64>());
            }
        }
        Ok(out)
    }
}

/// Jacobi field data expressed in the transported frame at every node.
#[derive(Clone, Debug)]
pub struct JacobiSolution {
    /// Frame vectors `E_a(t_k)`.
    pub frame: Vec<Vec<TangentVector>>,
    /// `x[f][k][a]`: component `a` of field `f` at node `k`.
    pub x: Vec<Vec<Vec<f64>>>,
    /// Covariant-derivative components.
    pub xp: Vec<Vec<Vec<f64>>>,
}

impl JacobiSolution {
    pub fn field(&self, f: usize) -> Vec<TangentVector> {
        self.x[f].iter().zip(&self.frame).map(|(c, frame)| combine(frame, c)).collect()
    }

    pub fn covariant_derivative(&self, f: usize) -> Vec<TangentVector> {
        self.xp[f].iter().zip(&self.frame).map(|(c, frame)| combine(frame, c)).collect()
    }
}

fn combine(frame: &[TangentVector], c: &[f64]) -> TangentVector {
    let mut out = TangentVector::zero(frame[0].n());
    for (e, s) in frame.iter().zip(c) {
        out = out.add(&e.scaled(*s));
    }
    out
}

fn orthonormal_frame_at(model: &MetricModel, curve: &Curve) -> Result<Vec<TangentVector>> {
    adapted_frame(model, &curve.points[0], &curve.velocities[0])
}

/// Solves the Jacobi equation along a geodesic for several initial data at once.
/// Initial data are `(J(a), ∇J(a))` pairs of real vectors.
pub fn jacobi_solve(model: &MetricModel, curve: &Curve, initial: &[(TangentVector, TangentVector)]) -> Result<JacobiSolution> {
    let n = curve.n();
    let m = 2 * n;
    let frame0 = orthonormal_frame_at(model, curve)?;
    let g = model.eval_metric(&curve.points[0])?.g_real;
    let mut y0: Vec<f64> = frame0.iter().flat_map(|e| e.x.iter().copied()).collect();
    for (j0, j0p) in initial {
        y0.extend(frame0.iter().map(|e| inner(&g, j0, e)));
        y0.extend(frame0.iter().map(|e| inner(&g, j0p, e)));
    }
    let sys = JacobiSystem { n, fields: initial.len() };
    let states = integrate_along(model, curve, y0, |p, vel, y| sys.rhs(model, p, vel, y))?;
    let frame = states
        .iter()
        .map(|s| s[..m * m].chunks(m).map(|c| TangentVector::from_real(c.to_vec())).collect())
        .collect();
    let mut x = vec![Vec::with_capacity(states.len()); initial.len()];
    let mut xp = vec![Vec::with_capacity(states.len()); initial.len()];
    for s in &states {
        for f in 0..initial.len() {
            let base = m * m + f * 2 * m;
            x[f].push(s[base..base + m].to_vec());
            xp[f].push(s[base + m..base + 2 * m].to_vec());
        }
    }
    Ok(JacobiSolution { frame, x, xp })
}

/// Jacobi field with `J(a) = j0`, `∇J(a) = j0_prime`; derivative samples are coordinate derivatives.
pub fn jacobi_field(model: &MetricModel, curve: &Curve, j0: &TangentVector, j0_prime: &TangentVector) -> Result<FieldAlongCurve> {
    let sol = jacobi_solve(model, curve, &[(j0.clone(), j0_prime.clone())])?;
    let samples = sol.field(0);
    let cov = sol.covariant_derivative(0);
    let derivatives = curve
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let g = christoffel(Flavor::LeviCivita, model, p)?.contract_real(&curve.velocities[k].x, &samples[k].x);
            Ok(cov[k].sub(&TangentVector::from_real(g)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldAlongCurve::with_derivatives(samples, derivatives))
}

/// Jacobi field vanishing at `a` with prescribed value at the final node.
#[derive(Clone, Debug)]
pub struct JacobiBoundaryValue {
    pub field: FieldAlongCurve,
    pub residual: f64,
}

pub fn jacobi_boundary_value(model: &MetricModel, curve: &Curve, target: &TangentVector) -> Result<JacobiBoundaryValue> {
    let n = curve.n();
    let m = 2 * n;
    let frame0 = orthonormal_frame_at(model, curve)?;
    let initial: Vec<_> = frame0.iter().map(|e| (TangentVector::zero(n), e.clone())).collect();
    let sol = jacobi_solve(model, curve, &initial)?;
    let last = curve.len() - 1;
    let ends: Vec<TangentVector> = (0..m).map(|f| sol.field(f)[last].clone()).collect();
    let a = RMatrix::from_fn(m, m, |r, c| ends[c].x[r]);
    let coef = solve_real(&a, &target.x).ok_or(Error::ConjugatePoint { rho: curve.end(), det: a.determinant() })?;
    let j0p = combine(&frame0, &coef);
    let field = jacobi_field(model, curve, &TangentVector::zero(n), &j0p)?;
    let residual = field.samples[last].sub(target).euclidean_norm();
    Ok(JacobiBoundaryValue { field, residual })
}

/// Normal block of `d exp_p` along the unit geodesic in direction `dir`, expressed in
/// parallel orthonormal frames: `A_{ij}(ρ) = ⟨J_i(ρ), E_j(ρ)⟩`, `J_i(0) = 0`, `∇J_i(0) = e_i ⟂ γ′`.
#[derive(Clone, Debug)]
pub struct NormalJacobian {
    pub rho: f64,
    pub a: RMatrix,
    /// `∇_{γ′}` of the same fields, in the same frame.
    pub a_prime: RMatrix,
}

impl NormalJacobian {
    pub fn det(&self) -> f64 {
        self.a.determinant()
    }

    /// `tr(A′ A⁻¹)`, the mean-curvature (Laplacian of distance) of the geodesic sphere.
    pub fn log_det_derivative(&self) -> Result<f64> {
        let inv = self.a.clone().try_inverse().ok_or(Error::ConjugatePoint { rho: self.rho, det: self.det() })?;
        Ok((&self.a_prime * inv).trace())
    }
}

/// Unit vector along `dir` in the metric at `p`.
pub fn normalize(model: &MetricModel, p: &ChartPoint, dir: &TangentVector) -> Result<TangentVector> {
    let len = model.norm(p, dir)?;
    if !(len > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(dir.scaled(1.0 / len))
}

/// Normal Jacobians at each radius of the increasing list `rhos`; steps are at most `max_step`.
pub fn normal_jacobians(model: &MetricModel, p: &ChartPoint, dir: &TangentVector, rhos: &[f64], max_step: f64) -> Result<Vec<NormalJacobian>> {
    let n = p.dim();
    let m = 2 * n;
    let u = normalize(model, p, dir)?;
    let frame0 = adapted_frame(model, p, &u)?;
    let sys = JacobiSystem { n, fields: m - 1 };
    let mut y: Vec<f64> = p.to_real();
    y.extend_from_slice(&u.x);
    y.extend(frame0.iter().flat_map(|e| e.x.iter().copied()));
    // Frame components: field f starts at 0 with derivative e_{f+1} (the frame vector after e_1 = u).
    let mut frame_order: Vec<usize> = (0..m).collect();
    frame_order.retain(|&k| k != 0);
    for &k in &frame_order {
        y.extend(std::iter::repeat_n(0.0, m));
        y.extend((0..m).map(|a| if a == k { 1.0 } else { 0.0 }));
    }
    let rhs = |_: f64, s: &[f64]| -> Result<Vec<f64>> {
        let pt = ChartPoint::from_real(&s[..m]);
        let mut out = geodesic_rhs(model, &s[..2 * m], n)?;
        out.extend(sys.rhs(model, &pt, &s[m..2 * m], &s[2 * m..])?);
        Ok(out)
    };
    let mut rhs = rhs;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let span = rho - t;
        if span < 0.0 {
            return Err(Error::DomainError(format!("radii must increase, got {rho} after {t}")));
        }
        let steps = (span / max_step).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            y = rk4_step(t, &y, h, &mut rhs)?;
            t += h;
        }
        t = rho;
        let base = 2 * m + m * m;
        // Component along E_a for a ≠ 0 (drop the radial direction).
        let a = RMatrix::from_fn(m - 1, m - 1, |i, j| y[base + i * 2 * m + frame_order[j]]);
        let ap = RMatrix::from_fn(m - 1, m - 1, |i, j| y[base + i * 2 * m + m + frame_order[j]]);
        out.push(NormalJacobian { rho, a, a_prime: ap });
    }
    Ok(out)
}

pub fn exp_jacobian(model: &MetricModel, p: &ChartPoint, rho: f64, dir: &TangentVector) -> Result<NormalJacobian> {
    let steps = default_steps(rho) as f64;
    Ok(normal_jacobians(model, p, dir, &[rho], rho / steps)?.remove(0))
}

/// Shooting controls.
#[derive(Clone, Debug)]
pub struct ShootOptions {
    pub max_length: f64,
    pub steps: usize,
    pub max_iterations: usize,
    /// Fail with [`Error::BeyondInjectivityBound`] instead of returning an uncertified length.
    pub require_certified: bool,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { max_length: f64::INFINITY, steps: 400, max_iterations: 60, require_certified: false }
    }
}

#[derive(Clone, Debug)]
pub struct Shot {
    pub length: f64,
    /// Unit initial direction at `p`.
    pub direction: TangentVector,
    pub endpoint_error: f64,
    /// The length lies below the model's injectivity bound, so the shot is minimal.
    pub certified: bool,
    pub converged_starts: usize,
}

fn shoot_residual(model: &MetricModel, p: &ChartPoint, q: &[f64], w: &[f64], steps: usize) -> Result<Vec<f64>> {
    let end = exp_map(model, p, &TangentVector::from_real(w.to_vec()), steps)?.to_real();
    Ok(end.iter().zip(q).map(|(a, b)| a - b).collect())
}

/// Orthonormal (Euclidean) basis of the complement of the unit vector `u`.
fn complement_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let dim = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
    for k in 0..dim {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        for b in std::iter::once(u).chain(basis.iter().map(|b| b.as_slice())) {
            let d = crate::linalg::dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let len = crate::linalg::norm(&v);
        if len > 1e-6 {
            basis.push(v.iter().map(|x| x / len).collect());
        }
        if basis.len() == dim - 1 {
            break;
        }
    }
    basis
}

/// Initial velocity `r·u` with `u` the normalized `u0 + Σ c_k b_k`.
fn polar_velocity(r: f64, u0: &[f64], basis: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let mut u = u0.to_vec();
    for (b, ck) in basis.iter().zip(c) {
        u.iter_mut().zip(b).for_each(|(x, y)| *x += ck * y);
    }
    let len = crate::linalg::norm(&u);
    u.iter().map(|x| r * x / len).collect()
}

/// Gauss-Newton on `exp_p(r·u) = q` in speed/direction coordinates, with backtracking
/// and a damped fallback.
///
/// Cartesian unknowns couple direction changes into the speed at second order, which
/// near a conjugate point swamps the distance to the fold.
fn refine(model: &MetricModel, p: &ChartPoint, q: &[f64], w0: Vec<f64>, opts: &ShootOptions, tol: f64) -> Option<(Vec<f64>, f64)> {
    let dim = w0.len();
    let mut r = crate::linalg::norm(&w0);
    if r == 0.0 {
        return None;
    }
    let mut u: Vec<f64> = w0.iter().map(|x| x / r).collect();
    let mut f = shoot_residual(model, p, q, &w0, opts.steps).ok()?;
    let mut err = crate::linalg::norm(&f);
    let mut checkpoint = err;
    for iter in 0..opts.max_iterations {
        if err <= 1e-4 * tol {
            break;
        }
        // Starts heading for another basin stall; give up on them early.
        if iter > 0 && iter % STALL_WINDOW == 0 {
            if err > 0.5 * checkpoint && err > tol {
                break;
            }
            checkpoint = err;
        }
        let basis = complement_basis(&u);
        let zero = vec![0.0; dim - 1];
        let eps_r = 1e-7 * (1.0 + r);
        let eps_c = 1e-7;
        let mut jac = RMatrix::zeros(dim, dim);
        for col in 0..dim {
            let w = if col == 0 {
                polar_velocity(r + eps_r, &u, &basis, &zero)
            } else {
                let mut c = zero.clone();
                c[col - 1] = eps_c;
                polar_velocity(r, &u, &basis, &c)
            };
            let fc = shoot_residual(model, p, q, &w, opts.steps).ok()?;
            let eps = if col == 0 { eps_r } else { eps_c };
            for row in 0..dim {
                jac[(row, col)] = (fc[row] - f[row]) / eps;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let rhs: Vec<f64> = (&jt * nalgebra::DVector::from_column_slice(&f)).iter().map(|v| -v).collect();
        let mut accepted = false;
        let trials = NEWTON_FRACTIONS.iter().map(|&a| (a, 0.0)).chain((0..10).map(|k| (1.0, 1e-6 * 10f64.powi(k))));
        for (fraction, damping) in trials {
            let mut a = jtj.clone();
            for d in 0..dim {
                a[(d, d)] += damping * (1.0 + jtj[(d, d)]);
            }
            let Some(step) = solve_real(&a, &rhs) else { continue };
            let r_new = r + fraction * step[0];
            if !(r_new > 0.0) {
                continue;
            }
            let c: Vec<f64> = step[1..].iter().map(|x| fraction * x).collect();
            let trial = polar_velocity(r_new, &u, &basis, &c);
            if let Ok(ft) = shoot_residual(model, p, q, &trial, opts.steps) {
                let et = crate::linalg::norm(&ft);
                if et < err {
                    r = r_new;
                    u = trial.iter().map(|x| x / r).collect();
                    f = ft;
                    err = et;
                    accepted = true;
                    break;
                }
            }
        }
        if !accepted {
            break;
        }
    }
    (err <= tol).then(|| (u.iter().map(|x| r * x).collect(), err))
}

/// Sphere-grid start directions in `ℝ^{2n}`.
fn start_directions(dim: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        return (0..16)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let mut out = Vec::new();
    for a in 0..dim {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[a] = s;
            out.push(v);
        }
    }
    // Corners of the cube with an even number of minus signs, scaled to unit length.
    let scale = 1.0 / (dim as f64).sqrt();
    for mask in 0u32..(1 << dim) {
        if mask.count_ones() % 2 == 0 {
            out.push((0..dim).map(|b| if mask & (1 << b) != 0 { -scale } else { scale }).collect());
        }
    }
    out.truncate(16.max(2 * dim));
    out
}

const STALL_WINDOW: usize = 8;

const NEWTON_FRACTIONS: [f64; 6] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];

const START_SCALES: [f64; 8] = [0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0];

/// Shortest geodesic from `p` to `q` found by multi-start shooting.
pub fn distance_shoot(model: &MetricModel, p: &ChartPoint, q: &ChartPoint, opts: &ShootOptions) -> Result<Shot> {
    if !model.contains(p) {
        return Err(Error::DomainError(p.to_string()));
    }
    if !model.contains(q) {
        return Err(Error::DomainError(q.to_string()));
    }
    let n = p.dim();
    let qr = q.to_real();
    let pr = p.to_real();
    let chord: Vec<f64> = qr.iter().zip(&pr).map(|(a, b)| a - b).collect();
    let chord_len = crate::linalg::norm(&chord);
    if chord_len == 0.0 {
        return Ok(Shot {
            length: 0.0,
            direction: TangentVector::zero(n),
            endpoint_error: 0.0,
            certified: true,
            converged_starts: 1,
        });
    }
    let tol = 1e-8 * (1.0 + q.norm());
    let mut starts = vec![chord.clone()];
    starts.extend(start_directions(2 * n).into_iter().map(|d| d.iter().map(|v| v * chord_len).collect()));
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut best_error = f64::INFINITY;
    let mut converged = 0;
    for dir in starts {
        // Coarse scan of the initial speed; Gauss-Newton starts from the closest landing.
        let mut seed: Option<(f64, Vec<f64>)> = None;
        for scale in START_SCALES {
            let w: Vec<f64> = dir.iter().map(|v| v * scale).collect();
            if let Ok(f0) = shoot_residual(model, p, &qr, &w, opts.steps) {
                let e = crate::linalg::norm(&f0);
                best_error = best_error.min(e);
                if seed.as_ref().is_none_or(|(b, _)| e < *b) {
                    seed = Some((e, w));
                }
            }
        }
        let Some((_, w0)) = seed else { continue };
        let Some((w, err)) = refine(model, p, &qr, w0, opts, tol) else { continue };
        best_error = best_error.min(err);
        let length = model.norm(p, &TangentVector::from_real(w.clone()))?;
        if length > opts.max_length {
            continue;
        }
        converged += 1;
        if best.as_ref().is_none_or(|(l, _, _)| length < *l) {
            best = Some((length, w, err));
        }
    }
    let Some((length, w, err)) = best else {
        return Err(Error::NoConvergence { best_error });
    };
    let bound = model.injectivity_bound;
    let certified = length <= bound;
    if !certified && opts.require_certified {
        return Err(Error::BeyondInjectivityBound { length, bound });
    }
    Ok(Shot {
        length,
        direction: TangentVector::from_real(w.iter().map(|v| v / length).collect()),
        endpoint_error: err,
        certified,
        converged_starts: converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::models::model_from_str;

    fn fs1() -> MetricModel {
        model_from_str("fubini_study(1,1.0)").unwrap()
    }

    #[test]
    fn flat_geodesic_is_a_straight_line() {
        let m = model_from_str("flat(2)").unwrap();
        let v = TangentVector::coordinate(2, 0);
        let curve = integrate_geodesic(&m, &ChartPoint::origin(2), &v, 1.0, 1000).unwrap();
        let end = &curve.points[1000];
        assert!((end.z[0] - c(1.0, 0.0)).norm() < 1e-14);
        // |∂/∂x¹| = √2 under the normalization g = 2 Re h.
        assert!((m.norm(end, &curve.velocities[1000]).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!(curve.geodesic_residual < 1e-12);
    }

    #[test]
    fn fubini_study_equator_closes_after_one_period() {
        // K = 2 for fubini_study(1,1.0); |z| = 1 is a great circle of length 2π/√K.
        let m = fs1();
        let p = ChartPoint::new(vec![c(1.0, 0.0)]);
        let u = normalize(&m, &p, &TangentVector::from_real(vec![0.0, 1.0])).unwrap();
        let period = 2.0 * std::f64::consts::PI / 2f64.sqrt();
        let curve = integrate_geodesic(&m, &p, &u, period, 4000).unwrap();
        assert!((curve.points.last().unwrap().z[0] - p.z[0]).norm() < 1e-9);
        let half = &curve.points[2000];
        assert!((half.z[0] - c(-1.0, 0.0)).norm() < 1e-9);
        assert!(curve.geodesic_residual < 1e-8);
        assert!(curve.sb_residual < 1e-8);
    }

    #[test]
    fn hopf_speed_drift_is_tiny() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.2), c(0.3, -0.4)]);
        let u = normalize(&m, &p, &TangentVector::from_real(vec![0.3, 1.0, -0.5, 0.2])).unwrap();
        let curve = integrate_geodesic(&m, &p, &u, 1.0, 1000).unwrap();
        assert!(curve.speed_drift(&m).unwrap() < 1e-8);
        assert!(curve.geodesic_residual < 1e-6);
        assert!(curve.sb_residual < 1e-6);
    }

    #[test]
    fn integrate_geodesic_rejects_bad_steps() {
        let m = fs1();
        let v = TangentVector::coordinate(1, 0);
        assert!(matches!(
            integrate_geodesic(&m, &ChartPoint::origin(1), &v, 1.0, 2),
            Err(Error::StepTooLarge { .. })
        ));
        assert_eq!(integrate_geodesic(&m, &ChartPoint::origin(1), &TangentVector::zero(1), 1.0, 100).unwrap_err(), Error::ZeroVector);
    }

    #[test]
    fn leaving_the_chart_reports_exit_time() {
        // 0 and ∞ are antipodal, so radial geodesics leave every chart ball before arclength π/√K ≈ 2.22.
        let m = fs1();
        let u = normalize(&m, &ChartPoint::origin(1), &TangentVector::coordinate(1, 0)).unwrap();
        match integrate_geodesic(&m, &ChartPoint::origin(1), &u, 3.0, 3000) {
            Err(Error::DomainExit { time }) => assert!(time > 2.0 && time < 2.23, "{time}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_transport_is_identity() {
        let m = model_from_str("flat(2)").unwrap();
        let v = TangentVector::from_real(vec![0.3, 0.1, -0.2, 0.5]);
        let curve = integrate_geodesic(&m, &ChartPoint::origin(2), &v, 1.0, 1000).unwrap();
        let w = TangentVector::from_real(vec![1.0, 2.0, 3.0, 4.0]);
        let t = parallel_transport(Flavor::StromingerBismut, &m, &curve, &w).unwrap();
        assert!(t.samples.iter().all(|s| s == &w));
    }

    #[test]
    fn hopf_transports_are_isometric_and_differ() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.0), c(0.2, 0.3)]);
        let u = normalize(&m, &p, &TangentVector::from_real(vec![0.2, 0.7, -0.4, 0.1])).unwrap();
        let curve = integrate_geodesic(&m, &p, &u, 1.0, 1000).unwrap();
        let sb = transport_operator(Flavor::StromingerBismut, &m, &curve).unwrap();
        let lc = transport_operator(Flavor::LeviCivita, &m, &curve).unwrap();
        assert!(sb.isometry_defect(&m, &curve).unwrap() < 1e-8);
        assert!(lc.isometry_defect(&m, &curve).unwrap() < 1e-8);
        assert!(sb.j_commutation_defect() < 1e-8);
        let gap = (sb.matrices.last().unwrap() - lc.matrices.last().unwrap()).amax();
        assert!(gap > 1e-3, "{gap}");
    }

    #[test]
    fn kahler_transports_agree() {
        let m = model_from_str("fubini_study(2,1.0)").unwrap();
        let p = ChartPoint::new(vec![c(0.1, 0.0), c(0.2, -0.1)]);
        let u = normalize(&m, &p, &TangentVector::from_real(vec![0.5, 0.1, 0.2, -0.3])).unwrap();
        let curve = integrate_geodesic(&m, &p, &u, 0.8, 1000).unwrap();
        let sb = transport_operator(Flavor::StromingerBismut, &m, &curve).unwrap();
        let lc = transport_operator(Flavor::LeviCivita, &m, &curve).unwrap();
        assert!((sb.matrices.last().unwrap() - lc.matrices.last().unwrap()).amax() < 1e-8);
    }

    #[test]
    fn parallel_frame_stays_adapted() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(0.8, 0.3), c(-0.2, 0.5)]);
        let u = normalize(&m, &p, &TangentVector::from_real(vec![1.0, 0.0, 0.3, 0.2])).unwrap();
        let curve = integrate_geodesic(&m, &p, &u, 1.0, 1000).unwrap();
        let seed = adapted_frame(&m, &p, &u).unwrap();
        let frame = parallel_frame(Flavor::StromingerBismut, &m, &curve, &seed).unwrap();
        let last = curve.len() - 1;
        let gram = frame_gram(&m, &curve, &frame, last).unwrap();
        assert!((gram - RMatrix::identity(4, 4)).amax() < 1e-8);
        for k in [0, 500, last] {
            for i in 0..2 {
                assert!(apply_j(&frame[i].samples[k]).sub(&frame[i + 2].samples[k]).euclidean_norm() < 1e-8);
            }
        }
    }

    #[test]
    fn bad_seed_frames_are_rejected() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let u = normalize(&m, &p, &TangentVector::coordinate(2, 0)).unwrap();
        let curve = integrate_geodesic(&m, &p, &u, 0.2, 1000).unwrap();
        let mut seed = adapted_frame(&m, &p, &u).unwrap();
        seed.swap(1, 3);
        assert!(matches!(parallel_frame(Flavor::StromingerBismut, &m, &curve, &seed), Err(Error::BadSeedFrame(_))));
        assert!(matches!(parallel_frame(Flavor::StromingerBismut, &m, &curve, &seed[..3]), Err(Error::BadSeedFrame(_))));
    }

    #[test]
    fn flat_jacobi_fields_are_affine() {
        let m = model_from_str("flat(1)").unwrap();
        let v = TangentVector::from_real(vec![1.0, 0.0]);
        let curve = integrate_geodesic(&m, &ChartPoint::origin(1), &v, 1.0, 1000).unwrap();
        let j0 = TangentVector::from_real(vec![0.1, 0.2]);
        let j1 = TangentVector::from_real(vec![0.0, 1.0]);
        let f = jacobi_field(&m, &curve, &j0, &j1).unwrap();
        for (k, t) in curve.t.iter().enumerate() {
            assert!(f.samples[k].sub(&j0.add(&j1.scaled(*t))).euclidean_norm() < 1e-12);
        }
    }

    #[test]
    fn fubini_study_normal_jacobi_field_follows_sine() {
        let m = fs1();
        let k: f64 = 2.0;
        let p = ChartPoint::new(vec![c(0.2, -0.1)]);
        let u = normalize(&m, &p, &TangentVector::from_real(vec![0.4, 0.9])).unwrap();
        let curve = integrate_geodesic(&m, &p, &u, 1.5, 1500).unwrap();
        let e = apply_j(&u);
        let f = jacobi_field(&m, &curve, &TangentVector::zero(1), &e).unwrap();
        for idx in (0..curve.len()).step_by(100) {
            let t = curve.t[idx];
            let expect = (k.sqrt() * t).sin() / k.sqrt();
            assert!((m.norm(&curve.points[idx], &f.samples[idx]).unwrap() - expect).abs() < 1e-5);
        }
    }

    #[test]
    fn jacobi_boundary_value_hits_target() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.1), c(0.2, 0.0)]);
        let u = normalize(&m, &p, &TangentVector::from_real(vec![0.1, 0.4, 1.0, 0.0])).unwrap();
        let curve = integrate_geodesic(&m, &p, &u, 1.0, 1000).unwrap();
        let seed = adapted_frame(&m, &p, &u).unwrap();
        let frame = parallel_frame(Flavor::StromingerBismut, &m, &curve, &seed).unwrap();
        let target = frame[1].samples.last().unwrap().clone();
        let bv = jacobi_boundary_value(&m, &curve, &target).unwrap();
        assert!(bv.residual < 1e-7);
        assert!(bv.field.samples[0].euclidean_norm() < 1e-14);
    }

    #[test]
    fn exp_jacobian_is_linear_near_zero() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.0), c(0.3, 0.2)]);
        let rho = 1e-3;
        let nj = exp_jacobian(&m, &p, rho, &TangentVector::from_real(vec![0.3, 0.2, 0.1, 0.9])).unwrap();
        let dev = (&nj.a - RMatrix::identity(3, 3) * rho).amax();
        assert!(dev < 1e-7, "{dev}");
    }

    #[test]
    fn rk4_order_is_four() {
        let m = model_from_str("hopf(2)").unwrap();
        let p = ChartPoint::new(vec![c(1.0, 0.2), c(-0.4, 0.3)]);
        let v = TangentVector::from_real(vec![0.3, 0.8, -0.5, 0.2]);
        let order = rk4_order(&m, &p, &v, 2.0, 40).unwrap();
        assert!(order > 3.8 && order < 4.3, "{order}");
    }

    #[test]
    fn flat_distance_is_chart_length() {
        let m = model_from_str("flat(2)").unwrap();
        let q = ChartPoint::new(vec![c(0.3, -0.4), c(0.0, 1.2)]);
        let shot = distance_shoot(&m, &ChartPoint::origin(2), &q, &ShootOptions::default()).unwrap();
        assert!((shot.length - 2f64.sqrt() * q.norm()).abs() < 1e-8);
        let zero = distance_shoot(&m, &q, &q, &ShootOptions::default()).unwrap();
        assert_eq!(zero.length, 0.0);
    }

    #[test]
    fn fubini_study_near_antipodal_distance() {
        // 1 and −1 are antipodal; nudge the target so a unique minimizer exists.
        let m = fs1();
        let p = ChartPoint::new(vec![c(1.0, 0.0)]);
        let q = ChartPoint::new(vec![c(-1.0, 0.002)]);
        let shot = distance_shoot(&m, &p, &q, &ShootOptions::default()).unwrap();
        let diam = std::f64::consts::PI / 2f64.sqrt();
        assert!(shot.length < diam && shot.length > 0.995 * diam, "{}", shot.length);
        assert!(!shot.certified);
        let strict = ShootOptions { require_certified: true, ..ShootOptions::default() };
        assert!(matches!(distance_shoot(&m, &p, &q, &strict), Err(Error::BeyondInjectivityBound { .. })));
    }
}
