//! Fixtures shared by the benchmarks: one registered model per family and a fixed
//! interior point with a unit direction.

use hsb_core::geodesy::normalize;
use hsb_core::{model_from_str, ChartPoint, MetricModel, TangentVector};

pub const MODELS: [&str; 4] = ["flat(2)", "fubini_study(2,1.0)", "hopf(2)", "fs_perturbed(2,0.1)"];

pub struct Fixture {
    pub spec: &'static str,
    pub model: MetricModel,
    pub point: ChartPoint,
    pub direction: TangentVector,
}

pub fn fixture(spec: &'static str) -> Fixture {
    let model = model_from_str(spec).expect("registered model");
    let n = model.n();
    let mut x: Vec<f64> = (0..2 * n).map(|a| 0.2 + 0.05 * a as f64).collect();
    x[0] = 0.5;
    let point = ChartPoint::from_real(&x);
    let dir = TangentVector::from_real((0..2 * n).map(|a| if a % 2 == 0 { 1.0 } else { -0.5 }).collect());
    let direction = normalize(&model, &point, &dir).expect("nonzero direction");
    Fixture { spec, model, point, direction }
}

pub fn fixtures() -> Vec<Fixture> {
    MODELS.iter().map(|&s| fixture(s)).collect()
}
