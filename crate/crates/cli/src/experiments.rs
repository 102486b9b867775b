//! The verification suites. Each experiment appends cases to a report; case ids are
//! prefixed by the experiment name and cases are assembled in index order, so the
//! report does not depend on scheduling.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use hsb_core::chart::ChartPoint;
use hsb_core::comparison::{
    default_direction_count, direction_grid, estimate_k, laplacian_comparison_check, myers_diameter_experiment,
    tangential_direction, ComparisonReport, DiameterConfig, KEstimate,
};
use hsb_core::connections::{
    christoffel, connection_difference_defect, defining_relation_residuals, trace_torsion,
};
use hsb_core::curvature::{balanced_identities, curvature, kahler_curvature_gap, torsion_magnitude};
use hsb_core::geodesy::{
    default_steps, integrate_geodesic, normalize, rk4_convergence, transport_operator, Curve,
};
use hsb_core::models::{fubini_study_hsc, registry};
use hsb_core::sampling::{Purpose, SeedSource};
use hsb_core::selftest::{run_self_test, OMEGA_TOL, RICCI_TOL};
use hsb_core::variational::{
    general_boundary_term, index_form, mixed_partial_energy_fd, second_variation_sb, second_variation_sb_parts,
    synge_direction, synge_field, CurveGeometry, SurfaceFn, TrigPolynomialField, VariationSurface,
};
use hsb_core::{Flavor, MetricModel, TangentVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentId, ExperimentParams, KSetting, Tolerances};
use crate::error::CliError;
use crate::report::{Case, CaseKind, Header, Report, Table, TOOL_VERSION};

/// Deterministic re-draws when a seeded curve or surface leaves the chart.
const ATTEMPTS: u64 = 8;
const SELF_TEST_SAMPLES: usize = 5;
const GEODESY_CURVES: usize = 4;
const GEODESY_LENGTH: f64 = 1.0;
const RK4_COARSE: usize = 40;
const HSC_DIRECTIONS: usize = 16;
/// Myers and Synge starts closer than this to the chart origin are re-drawn.
const MIN_START_RADIUS: f64 = 0.25;
const NEGATIVE_CONTROL_FACTOR: f64 = 1.1;
const MAX_COMPARISON_RADIUS: f64 = 0.6;

pub struct Context {
    pub config: ExperimentConfig,
    pub model: MetricModel,
    pub seeds: SeedSource,
    k: OnceLock<Result<(f64, Option<KEstimate>), String>>,
    comparison: OnceLock<Result<ComparisonRun, (String, String)>>,
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        config.validate()?;
        let model = registry(&config.model)?;
        let seeds = SeedSource::new(config.seed);
        Ok(Self { config, model, seeds, k: OnceLock::new(), comparison: OnceLock::new() })
    }

    fn params(&self) -> &ExperimentParams {
        &self.config.params
    }

    fn tol(&self) -> &Tolerances {
        &self.config.tolerances
    }

    fn n(&self) -> usize {
        self.model.n()
    }

    fn is_fubini_study(&self) -> bool {
        fubini_study_hsc(&self.config.model).is_some()
    }

    /// `K` from the config, or the sampled minimum of the configured curvature source.
    fn k(&self) -> Result<(f64, Option<KEstimate>), String> {
        self.k
            .get_or_init(|| match self.params().k {
                KSetting::Value(k) => Ok((k, None)),
                KSetting::Auto(_) => {
                    let points = self.seeds.points(&self.model, self.params().k_samples.max(1));
                    let est = estimate_k(&self.model, &points, HSC_DIRECTIONS).map_err(|e| e.to_string())?;
                    Ok((est.k(self.params().k_source), Some(est)))
                }
            })
            .clone()
    }

    fn stream_key(attempt: u64, index: u64) -> u64 {
        (attempt << 32) | index
    }

    /// Runs `f` on stream keys for `index` until one attempt succeeds.
    fn with_retries<T>(&self, index: u64, f: impl Fn(u64) -> hsb_core::Result<T>) -> hsb_core::Result<T> {
        let mut last = None;
        for attempt in 0..ATTEMPTS {
            match f(Self::stream_key(attempt, index)) {
                Ok(v) => return Ok(v),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn point(&self, key: u64) -> ChartPoint {
        self.model.random_point(&mut self.seeds.stream(Purpose::Points, key))
    }

    /// Unit-speed geodesic from the seeded point and direction of `key`.
    fn seeded_geodesic(&self, key: u64, length: f64, steps: usize) -> hsb_core::Result<Curve> {
        let p = self.point(key);
        let u = normalize(&self.model, &p, &self.seeds.vector(self.n(), key))?;
        integrate_geodesic(&self.model, &p, &u, length, steps)
    }

    fn trig_field(&self, key: u64, slot: u64, proper: bool) -> TrigPolynomialField {
        let mut rng = self.seeds.stream(Purpose::Fields, 4 * key + slot);
        TrigPolynomialField::random(&mut rng, 2 * self.n(), self.params().degree, self.params().amplitude, proper)
    }

    /// A seeded start away from the chart origin, with its unit tangential direction.
    fn seeded_start(&self, key: u64) -> hsb_core::Result<(ChartPoint, TangentVector)> {
        let p = self.point(key);
        if p.norm() < MIN_START_RADIUS {
            return Err(hsb_core::Error::DomainError(format!("start {p} too close to the chart origin")));
        }
        let u = normalize(&self.model, &p, &tangential_direction(&p)?)?;
        Ok((p, u))
    }
}

pub fn header(config: &ExperimentConfig) -> Header {
    Header {
        tool_version: TOOL_VERSION.into(),
        config_hash: config.hash(),
        model: config.model.to_string(),
        experiment: config.experiment.to_string(),
        seed: config.seed,
        generator: "chacha8".into(),
    }
}

/// Runs the configured experiment, preceded by the per-model convention self-test.
pub fn run(config: &ExperimentConfig) -> Result<Report, CliError> {
    let ids: Vec<ExperimentId> = match config.experiment {
        ExperimentId::FullSuite => ExperimentId::ALL.into_iter().filter(|&e| e != ExperimentId::FullSuite).collect(),
        id => vec![id],
    };
    run_many(config, &ids, config.experiment.name())
}

/// Runs `ids` in order into one report whose header names `label`.
pub fn run_many(config: &ExperimentConfig, ids: &[ExperimentId], label: &str) -> Result<Report, CliError> {
    let ctx = Context::new(config.clone())?;
    let mut header = header(config);
    header.experiment = label.to_string();
    let mut report = Report::new(header);
    self_test(&ctx, &mut report);
    for &id in ids {
        run_one(&ctx, id, &mut report);
    }
    Ok(report)
}

fn run_one(ctx: &Context, id: ExperimentId, report: &mut Report) {
    match id {
        ExperimentId::Identities => identities(ctx, report),
        ExperimentId::Thm11 => thm11(ctx, report),
        ExperimentId::Thm12 => thm12(ctx, report),
        ExperimentId::Myers => myers(ctx, report),
        ExperimentId::Synge => synge(ctx, report),
        ExperimentId::Laplacian => laplacian(ctx, report),
        ExperimentId::Volume => volume(ctx, report),
        ExperimentId::FullSuite => unreachable!("expanded by run"),
    }
}

fn self_test(ctx: &Context, report: &mut Report) {
    match run_self_test(&ctx.model, &ctx.seeds, SELF_TEST_SAMPLES) {
        Ok(r) => {
            report.push(Case::at_most("self_test.omega", r.omega_gap, 0.0, OMEGA_TOL));
            report.push(Case::at_most("self_test.ricci", r.ricci_gap, 0.0, RICCI_TOL));
        }
        Err(e) => report.push(Case::failed("self_test", CaseKind::UpperBound, None, e)),
    }
}

/// Running maximum of a per-sample quantity, remembering the first error.
#[derive(Default)]
struct MaxOf {
    value: f64,
    error: Option<String>,
}

impl MaxOf {
    fn add(&mut self, v: hsb_core::Result<f64>) {
        match v {
            Ok(x) => self.value = self.value.max(x),
            Err(e) => {
                self.error.get_or_insert_with(|| e.to_string());
            }
        }
    }

    fn at_most(self, id: &str, tolerance: f64) -> Case {
        match self.error {
            Some(e) => Case::failed(id, CaseKind::UpperBound, Some(tolerance), e),
            None => Case::at_most(id, self.value, 0.0, tolerance),
        }
    }

    fn at_least(self, id: &str, bound: f64) -> Case {
        match self.error {
            Some(e) => Case::failed(id, CaseKind::LowerBound, Some(0.0), e),
            None => Case::at_least(id, self.value, bound, 0.0),
        }
    }

    fn diagnostic(self, id: &str) -> Case {
        match self.error {
            Some(e) => Case { error: Some(e), ..Case::diagnostic(id, f64::NAN) },
            None => Case::diagnostic(id, self.value),
        }
    }
}

fn identities(ctx: &Context, report: &mut Report) {
    let (model, tol, n) = (&ctx.model, ctx.tol(), ctx.n());
    let points = ctx.seeds.points(model, ctx.params().points);
    let triple = |i: usize| {
        let k = 3 * i as u64;
        (ctx.seeds.vector(n, k), ctx.seeds.vector(n, k + 1), ctx.seeds.vector(n, k + 2))
    };

    #[derive(Default)]
    struct PointMaxima {
        skew_sb: MaxOf,
        skew_lc: MaxOf,
        vanishing: MaxOf,
        defn: MaxOf,
        torsion_d_omega: MaxOf,
        difference: MaxOf,
        kahler_torsion: MaxOf,
        kahler_d_omega: MaxOf,
        kahler_connection: MaxOf,
        kahler_curvature: MaxOf,
        bianchi: MaxOf,
        interchange: MaxOf,
    }
    let mut m = PointMaxima::default();
    for (i, p) in points.iter().enumerate() {
        let (x, y, z) = triple(i);
        let sb = curvature(Flavor::StromingerBismut, model, p);
        let lc = curvature(Flavor::LeviCivita, model, p);
        m.skew_sb.add(sb.as_ref().map(|r| r.skew_defect()).map_err(Clone::clone));
        m.skew_lc.add(lc.as_ref().map(|r| r.skew_defect()).map_err(Clone::clone));
        m.vanishing.add(sb.as_ref().map(|r| r.type_vanishing_defect()).map_err(Clone::clone));
        let defn = defining_relation_residuals(model, p, &x, &y, &z);
        m.defn.add(defn.clone().map(|d| d.r_defn));
        m.torsion_d_omega.add(defn.map(|d| d.r_torsion));
        m.difference.add(connection_difference_defect(model, p));
        if model.tags.kahler_expected {
            m.kahler_torsion.add(torsion_magnitude(model, p));
            m.kahler_d_omega.add(model.d_omega(p, &x, &y, &z).map(f64::abs));
            m.kahler_connection.add(christoffel(Flavor::StromingerBismut, model, p).and_then(|s| {
                Ok(s.gamma.max_abs_diff(&christoffel(Flavor::LeviCivita, model, p)?.gamma))
            }));
            m.kahler_curvature.add(kahler_curvature_gap(model, p));
        } else {
            let w = ctx.seeds.vector(n, 3 * points.len() as u64 + i as u64);
            m.bianchi.add(sb.as_ref().map(|r| r.first_bianchi_defect(&x, &y, &z)).map_err(Clone::clone));
            m.interchange.add(sb.as_ref().map(|r| r.pair_interchange_defect(&x, &y, &z, &w)).map_err(Clone::clone));
        }
    }
    report.push(m.skew_sb.at_most("identities.skew_symmetry.sb", tol.skew));
    report.push(m.skew_lc.at_most("identities.skew_symmetry.lc", tol.skew));
    report.push(m.vanishing.at_most("identities.type_vanishing.sb", tol.type_vanishing));
    report.push(m.defn.at_most("identities.defining_relation", tol.defining_relation));
    report.push(m.torsion_d_omega.at_most("identities.torsion_d_omega", tol.torsion_d_omega));
    report.push(m.difference.at_most("identities.connection_difference", tol.connection_difference));
    if model.tags.kahler_expected {
        report.push(m.kahler_torsion.at_most("identities.kahler.torsion", tol.kahler));
        report.push(m.kahler_d_omega.at_most("identities.kahler.d_omega", tol.kahler));
        report.push(m.kahler_connection.at_most("identities.kahler.connection_gap", tol.kahler));
        report.push(m.kahler_curvature.at_most("identities.kahler.curvature_gap", tol.kahler));
    } else if n >= 2 {
        // In complex dimension one R^SB has a single independent component and both defects vanish.
        report.push(m.bianchi.at_least("identities.witness.first_bianchi", tol.witness));
        report.push(m.interchange.at_least("identities.witness.pair_interchange", tol.witness));
    } else {
        report.push(m.bianchi.diagnostic("identities.witness.first_bianchi"));
        report.push(m.interchange.diagnostic("identities.witness.pair_interchange"));
    }
    balanced(ctx, &points, report);
    geodesy(ctx, report);
}

fn balanced(ctx: &Context, points: &[ChartPoint], report: &mut Report) {
    let (model, tol) = (&ctx.model, ctx.tol());
    let ids = [
        "identities.balanced.trace_torsion",
        "identities.balanced.holomorphic_trace",
        "identities.balanced.hermitian_ricci",
        "identities.balanced.ricci_identity",
    ];
    match balanced_identities(model, points) {
        Ok(b) => {
            let values = [b.max_trace_torsion(), b.max_holomorphic_trace(), b.max_hermitian_defect(), b.max_ricci_identity()];
            let tols = [tol.trace_torsion, tol.holomorphic_trace, tol.hermitian_ricci, tol.hermitian_ricci];
            for ((id, v), t) in ids.iter().zip(values).zip(tols) {
                report.push(if b.balanced_expected { Case::at_most(*id, v, 0.0, t) } else { Case::diagnostic(*id, v) });
            }
        }
        Err(e) => report.push(Case::failed("identities.balanced", CaseKind::UpperBound, None, e)),
    }
    if ctx.config.model.name == "hopf" {
        // η_k = (1 − n) z̄_k / |z|², so η = (1 − n, 0, …) at the first unit vector.
        let n = ctx.n();
        let mut x = vec![0.0; 2 * n];
        x[0] = 1.0;
        let p = ChartPoint::from_real(&x);
        let case = trace_torsion(model, &p).map(|eta| {
            let expected = |k: usize| if k == 0 { 1.0 - n as f64 } else { 0.0 };
            eta.eta.iter().enumerate().map(|(k, e)| (e - expected(k)).norm()).fold(0.0, f64::max)
        });
        report.push(Case::from_result(
            "identities.balanced.hopf_trace_torsion_reference",
            CaseKind::Equality,
            tol.trace_torsion,
            case.map(|gap| (gap, 0.0)),
        ));
    }
}

fn geodesy(ctx: &Context, report: &mut Report) {
    let (model, tol) = (&ctx.model, ctx.tol());
    let steps = default_steps(GEODESY_LENGTH);
    let curves: Vec<hsb_core::Result<Curve>> = (0..GEODESY_CURVES as u64)
        .into_par_iter()
        .map(|i| ctx.with_retries(i, |key| ctx.seeded_geodesic(key, GEODESY_LENGTH, steps)))
        .collect();
    let mut coincidence = MaxOf::default();
    let mut speed = MaxOf::default();
    let mut iso_sb = MaxOf::default();
    let mut iso_lc = MaxOf::default();
    let mut commute = MaxOf::default();
    for c in &curves {
        match c {
            Ok(c) => {
                coincidence.add(Ok(c.sb_residual.max(c.geodesic_residual)));
                speed.add(c.speed_drift(model).map(|d| d / GEODESY_LENGTH));
                let sb = transport_operator(Flavor::StromingerBismut, model, c);
                iso_sb.add(sb.as_ref().map_err(Clone::clone).and_then(|t| t.isometry_defect(model, c)).map(|d| d / GEODESY_LENGTH));
                commute.add(sb.map(|t| t.j_commutation_defect()));
                let lc = transport_operator(Flavor::LeviCivita, model, c);
                iso_lc.add(lc.and_then(|t| t.isometry_defect(model, c)).map(|d| d / GEODESY_LENGTH));
            }
            Err(e) => {
                for m in [&mut coincidence, &mut speed, &mut iso_sb, &mut iso_lc, &mut commute] {
                    m.add(Err(e.clone()));
                }
            }
        }
    }
    report.push(coincidence.at_most("identities.geodesy.coincidence", tol.coincidence));
    report.push(speed.at_most("identities.geodesy.speed_drift_per_length", tol.coincidence));
    report.push(iso_sb.at_most("identities.geodesy.isometry_drift_per_length.sb", tol.isometry_drift));
    report.push(iso_lc.at_most("identities.geodesy.isometry_drift_per_length.lc", tol.isometry_drift));
    report.push(commute.at_most("identities.geodesy.j_commutation.sb", tol.j_commutation));
    let id = "identities.geodesy.rk4_order";
    let order = match &curves[0] {
        Ok(c) => {
            let hsb_core::geodesy::CurveSource::Geodesic { start, velocity } = &c.source else {
                unreachable!("seeded curves are geodesics")
            };
            rk4_convergence(model, start, velocity, GEODESY_LENGTH, RK4_COARSE)
        }
        Err(e) => Err(e.clone()),
    };
    report.push(match order {
        // Straight lines are integrated exactly and have no measurable order.
        Ok(c) if !c.order.is_finite() => Case::diagnostic("identities.geodesy.rk4_coarse_error", c.coarse_error),
        Ok(c) => Case::at_least(id, c.order, tol.rk4_order, 0.0),
        Err(e) => Case::failed(id, CaseKind::LowerBound, Some(0.0), e),
    });
}

fn relative_tolerance(tol: &Tolerances, value: f64) -> f64 {
    (tol.thm11_relative * value.abs()).max(tol.thm11_absolute)
}

/// `α(t, s₁, s₂) = γ(t) + s₁V(t) + s₂W(t) + s₁s₂U(t)` in chart coordinates, evaluated on the curve grid.
fn trig_surface(curve: &Curve, fields: [TrigPolynomialField; 3]) -> SurfaceFn {
    let base = curve.points.clone();
    let (a, h, len) = (curve.start(), curve.step(), curve.end() - curve.start());
    Arc::new(move |t: f64, s1: f64, s2: f64| {
        let k = (((t - a) / h).round().max(0.0) as usize).min(base.len() - 1);
        let tau = (t - a) / len;
        let [v, w, u] = [0, 1, 2].map(|j| fields[j].at(tau, len).0);
        let dx: Vec<f64> = (0..v.len()).map(|i| s1 * v[i] + s2 * w[i] + s1 * s2 * u[i]).collect();
        base[k].offset(&dx, 1.0)
    })
}

fn thm11(ctx: &Context, report: &mut Report) {
    let (model, p, tol) = (&ctx.model, ctx.params(), ctx.tol());
    let cases: Vec<Vec<Case>> = (0..p.cases as u64)
        .into_par_iter()
        .map(|i| {
            let outcome = ctx.with_retries(i, |key| {
                let curve = ctx.seeded_geodesic(key, p.geodesic_length, p.geodesic_steps)?;
                let geom = CurveGeometry::new(model, &curve)?;
                let v = ctx.trig_field(key, 0, true).along(&curve);
                let w = ctx.trig_field(key, 1, true).along(&curve);
                let proper_rhs = second_variation_sb(&geom, &v, &w)?;
                let proper = VariationSurface::linear_fields(curve.clone(), v, w)?;
                let proper_lhs = mixed_partial_energy_fd(model, &proper, p.fd_delta)?;
                let fields = [0, 1, 2].map(|slot| ctx.trig_field(key, slot + 2, false));
                let general = VariationSurface::closed_form(curve.clone(), trig_surface(&curve, fields), false)?;
                let (gv, gw) = general.variation_fields();
                let general_rhs = second_variation_sb(&geom, &gv, &gw)? + general_boundary_term(&geom, &general)?;
                let general_lhs = mixed_partial_energy_fd(model, &general, p.fd_delta)?;
                Ok([(proper_lhs, proper_rhs), (general_lhs, general_rhs)])
            });
            let ids = [format!("thm11.{i}.proper"), format!("thm11.{i}.general")];
            match outcome {
                Ok(pairs) => ids
                    .into_iter()
                    .zip(pairs)
                    .map(|(id, (lhs, rhs))| Case::equality(id, lhs, rhs, relative_tolerance(tol, lhs)))
                    .collect(),
                Err(e) => ids.into_iter().map(|id| Case::failed(id, CaseKind::Equality, None, &e)).collect(),
            }
        })
        .collect();
    report.extend(cases.into_iter().flatten());
}

fn thm12(ctx: &Context, report: &mut Report) {
    let (model, p, tol) = (&ctx.model, ctx.params(), ctx.tol());
    let cases: Vec<Vec<Case>> = (0..p.cases as u64)
        .into_par_iter()
        .map(|i| {
            let outcome = ctx.with_retries(i, |key| {
                let curve = ctx.seeded_geodesic(key, p.geodesic_length, p.geodesic_steps)?;
                let geom = CurveGeometry::new(model, &curve)?;
                let v = ctx.trig_field(key, 0, false).along(&curve);
                let w = ctx.trig_field(key, 1, false).along(&curve);
                Ok((index_form(&geom, &v, &w)?, index_form(&geom, &w, &v)?, index_form(&geom, &v, &v)?))
            });
            let ids = [
                format!("thm12.{i}.reconciliation"),
                format!("thm12.{i}.symmetry"),
                format!("thm12.{i}.boundary_vv"),
            ];
            match outcome {
                Ok((vw, wv, vv)) => vec![
                    Case::equality(ids[0].clone(), vw.value_lc, vw.value_sb_bulk + vw.boundary_term, tol.thm12),
                    Case::equality(ids[1].clone(), vw.value_lc, wv.value_lc, tol.symmetry),
                    Case::at_most(ids[2].clone(), vv.boundary_term.abs(), 0.0, tol.boundary_zero),
                ],
                Err(e) => ids.into_iter().map(|id| Case::failed(id, CaseKind::Equality, None, &e)).collect(),
            }
        })
        .collect();
    report.extend(cases.into_iter().flatten());
}

fn resolved_k(ctx: &Context, prefix: &str, report: &mut Report) -> Option<f64> {
    match ctx.k() {
        Ok((k, estimate)) => {
            report.detail(&format!("{prefix}.k"), k);
            if let Some(est) = estimate {
                report.detail(&format!("{prefix}.k_estimate"), est);
            }
            Some(k)
        }
        Err(e) => {
            report.push(Case::failed(format!("{prefix}.k"), CaseKind::Diagnostic, None, e));
            None
        }
    }
}

fn myers(ctx: &Context, report: &mut Report) {
    let (model, p, tol) = (&ctx.model, ctx.params(), ctx.tol());
    let Some(k) = resolved_k(ctx, "myers", report) else { return };
    if !(k > 0.0) {
        report.push(Case::diagnostic("myers.not_applicable", k));
        return;
    }
    let cases: Vec<Vec<Case>> = (0..p.starts as u64)
        .into_par_iter()
        .map(|j| {
            let outcome = ctx.with_retries(j, |key| {
                let (start, _) = ctx.seeded_start(key)?;
                let config =
                    DiameterConfig { length_factor: p.length_factor, starts: vec![start], ..Default::default() };
                Ok(myers_diameter_experiment(model, k, &config)?.test_fields.remove(0))
            });
            let ids = [format!("myers.{j}.sum_vs_ricci"), format!("myers.{j}.sum_negative"), format!("myers.{j}.synge_negative")];
            match outcome {
                Ok(s) => vec![
                    Case::equality(ids[0].clone(), s.myers_sum, s.myers_ricci_integral, tol.myers),
                    Case::at_most(ids[1].clone(), s.myers_sum, 0.0, 0.0),
                    Case::at_most(ids[2].clone(), s.synge_value, 0.0, 0.0),
                ],
                Err(e) => ids.into_iter().map(|id| Case::failed(id, CaseKind::Equality, None, &e)).collect(),
            }
        })
        .collect();
    report.extend(cases.into_iter().flatten());

    if p.estimate_diameter.unwrap_or(ctx.is_fubini_study()) {
        // The diameter is governed by the largest sectional curvature, known exactly on Fubini-Study.
        let k_diameter = fubini_study_hsc(&ctx.config.model).unwrap_or(k);
        let outcome = ctx.with_retries(0, |key| {
            let (start, _) = ctx.seeded_start(key)?;
            let config = DiameterConfig {
                length_factor: p.length_factor,
                starts: vec![start],
                estimate_diameter: true,
                ..Default::default()
            };
            let report = myers_diameter_experiment(model, k_diameter, &config)?;
            report.diameter.ok_or(hsb_core::Error::NoConvergence { best_error: f64::INFINITY })
        });
        match outcome {
            Ok(d) => {
                report.push(Case::equality("myers.diameter", d.estimate, d.bound, tol.diameter_relative * d.bound));
                report.detail("myers.diameter", d);
            }
            Err(e) => report.push(Case::failed("myers.diameter", CaseKind::Equality, None, e)),
        }
    }
}

fn synge(ctx: &Context, report: &mut Report) {
    let (model, p, tol) = (&ctx.model, ctx.params(), ctx.tol());
    let Some(k) = resolved_k(ctx, "synge", report) else { return };
    let length = if k > 0.0 { p.length_factor * PI / k.sqrt() } else { p.geodesic_length };
    let hsc = fubini_study_hsc(&ctx.config.model);
    let cases: Vec<Vec<Case>> = (0..p.starts as u64)
        .into_par_iter()
        .map(|j| {
            let outcome = ctx.with_retries(j, |key| {
                let (start, u) = ctx.seeded_start(key)?;
                let curve = integrate_geodesic(model, &start, &u, length, default_steps(length))?;
                let geom = CurveGeometry::new(model, &curve)?;
                let parallel = geom.covariant_residual(Flavor::StromingerBismut, &synge_direction(model, &curve)?)?;
                let v = synge_field(model, &curve)?;
                let parts = second_variation_sb_parts(&geom, &v, &v)?;
                Ok((parallel, parts))
            });
            let mut ids = vec![format!("synge.{j}.parallel"), format!("synge.{j}.torsion_term")];
            if k > 0.0 {
                ids.push(format!("synge.{j}.negative"));
            }
            if hsc.is_some() {
                ids.push(format!("synge.{j}.closed_form"));
            }
            match outcome {
                Ok((parallel, parts)) => {
                    let mut out = vec![
                        Case::at_most(ids[0].clone(), parallel, 0.0, tol.transport),
                        Case::at_most(ids[1].clone(), parts.torsion.abs(), 0.0, tol.torsion_term),
                    ];
                    if k > 0.0 {
                        out.push(Case::at_most(ids[2].clone(), parts.total(), 0.0, 0.0));
                    }
                    if let Some(h) = hsc {
                        // ∫((π/L)²cos² − HSC·sin²) over the sine bump.
                        let expected = 0.5 * length * ((PI / length).powi(2) - h);
                        out.push(Case::equality(ids.last().unwrap().clone(), parts.total(), expected, tol.synge_closed_form));
                    }
                    out
                }
                Err(e) => ids.into_iter().map(|id| Case::failed(id, CaseKind::UpperBound, None, &e)).collect(),
            }
        })
        .collect();
    report.extend(cases.into_iter().flatten());
}

#[derive(Serialize)]
struct ComparisonSummary<'a> {
    k: f64,
    point: &'a [f64],
    directions: usize,
    rhos: Vec<f64>,
    verdicts: hsb_core::comparison::Verdicts,
    sample_errors: usize,
}

struct ComparisonRun {
    k: f64,
    point: ChartPoint,
    directions: usize,
    report: ComparisonReport,
    /// Margins at `K·NEGATIVE_CONTROL_FACTOR`, when requested.
    inflated: Option<ComparisonReport>,
    saturation_tol: Option<f64>,
}

/// Seeded default base point for the comparison sweeps; rays from points far out in the
/// chart can leave it before the largest radius.
fn comparison_point(ctx: &Context) -> hsb_core::Result<ChartPoint> {
    ctx.with_retries(0, |key| {
        let p = ctx.point(key);
        if p.norm() > MAX_COMPARISON_RADIUS {
            return Err(hsb_core::Error::DomainError(format!("base point {p} too far from the chart origin")));
        }
        Ok(p)
    })
}

fn compute_comparison(ctx: &Context) -> Result<ComparisonRun, (String, String)> {
    let (model, p, tol) = (&ctx.model, ctx.params(), ctx.tol());
    let (k, _) = ctx.k().map_err(|e| ("k".to_string(), e))?;
    let point = match &p.point {
        Some(x) if x.len() == 2 * ctx.n() => ChartPoint::from_real(x),
        Some(x) => {
            return Err(("point".into(), format!("point has {} real coordinates, expected {}", x.len(), 2 * ctx.n())))
        }
        None => comparison_point(ctx).map_err(|e| ("point".to_string(), e.to_string()))?,
    };
    let count = if p.directions == 0 { default_direction_count(ctx.n()) } else { p.directions };
    let rhos = p.rho_grid.values();
    let run = direction_grid(model, &point, count).and_then(|dirs| {
        let base = laplacian_comparison_check(model, &point, k, &rhos, &dirs)?;
        let inflated = (p.negative_control && k > 0.0)
            .then(|| laplacian_comparison_check(model, &point, k * NEGATIVE_CONTROL_FACTOR, &rhos, &dirs))
            .transpose()?;
        Ok((base, inflated, dirs.len()))
    });
    let (report, inflated, directions) = run.map_err(|e| ("comparison".to_string(), e.to_string()))?;
    let flat = ctx.config.model.name == "flat";
    let model_space = flat
        || (ctx.n() == 1 && fubini_study_hsc(&ctx.config.model).is_some_and(|h| (h - k).abs() <= 1e-12 * h));
    let saturation_tol = p
        .expect_saturation
        .unwrap_or(model_space)
        .then_some(if flat { tol.flat_saturation } else { tol.saturation });
    Ok(ComparisonRun { k, point, directions, report, inflated, saturation_tol })
}

/// The shared sweep behind `laplacian` and `volume`, with its summary and sample table.
fn comparison_run<'a>(ctx: &'a Context, prefix: &str, report: &mut Report) -> Option<&'a ComparisonRun> {
    let run = match ctx.comparison.get_or_init(|| compute_comparison(ctx)) {
        Ok(run) => run,
        Err((what, e)) => {
            report.push(Case::failed(format!("{prefix}.{what}"), CaseKind::Diagnostic, None, e.clone()));
            return None;
        }
    };
    if let Ok((_, Some(est))) = ctx.k() {
        report.detail("comparison.k_estimate", est);
    }
    report.detail(
        "comparison",
        ComparisonSummary {
            k: run.k,
            point: &run.point.to_real(),
            directions: run.directions,
            rhos: ctx.params().rho_grid.values(),
            verdicts: run.report.verdicts,
            sample_errors: run.report.error_count(),
        },
    );
    let mut table = Table::new(
        ["rho".to_string()]
            .into_iter()
            .chain((0..2 * ctx.n()).map(|a| format!("dir_{a}")))
            .chain(["delta_r", "bound", "margin", "lambda"].map(String::from)),
    );
    for s in &run.report.samples {
        let mut row: Vec<Option<f64>> = vec![Some(s.rho)];
        row.extend(s.direction.iter().map(|&d| Some(d)));
        row.extend([s.delta_r, s.bound, s.margin(), s.lambda]);
        table.push_optional(row);
    }
    report.tables.insert("comparison".to_string(), table);
    Some(run)
}

fn laplacian(ctx: &Context, report: &mut Report) {
    let tol = ctx.tol();
    let Some(run) = comparison_run(ctx, "laplacian", report) else { return };
    let r = &run.report;
    report.push(Case::diagnostic("laplacian.sample_errors", r.error_count() as f64));
    report.push(Case::at_least("laplacian.comparison", r.min_margin(), 0.0, tol.laplacian_margin));
    if let Some(t) = run.saturation_tol {
        let worst = r.samples.iter().filter_map(|s| s.margin()).map(f64::abs).fold(0.0, f64::max);
        report.push(Case::at_most("laplacian.saturation", worst, 0.0, t));
    }
    if let Some(inflated) = &run.inflated {
        // The control passes when the comparison fails at the inflated K.
        report.push(Case::at_most("laplacian.negative_control", inflated.min_margin(), -tol.laplacian_margin, 0.0));
        report.detail("laplacian.negative_control_k", run.k * NEGATIVE_CONTROL_FACTOR);
    }
}

fn volume(ctx: &Context, report: &mut Report) {
    let tol = ctx.tol();
    let Some(run) = comparison_run(ctx, "volume", report) else { return };
    let r = &run.report;
    let mut increase: f64 = f64::NEG_INFINITY;
    for pair in r.samples.windows(2) {
        if pair[0].direction == pair[1].direction {
            if let (Some(a), Some(b)) = (pair[0].lambda, pair[1].lambda) {
                increase = increase.max(b - a);
            }
        }
    }
    // A grid with one radius per direction has nothing to compare.
    let increase = if increase.is_finite() { increase } else { 0.0 };
    report.push(Case::diagnostic("volume.sample_errors", r.error_count() as f64));
    report.push(Case::at_most("volume.monotone", increase, 0.0, tol.monotone_slack));
    // Directions whose ray failed are counted in sample_errors; none at all is a failure.
    let limit = r.limit_deviation.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let limit = if limit.is_finite() { limit } else { f64::INFINITY };
    report.push(Case::at_most("volume.limit_one", limit, 0.0, tol.limit_one));
    if let Some(t) = run.saturation_tol {
        report.push(Case::at_most("volume.identity", r.max_lambda_deviation(), 0.0, t));
    }
}
