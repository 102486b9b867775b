//! Startup checks of the two convention-sensitive formulas: the complex form of `ω`
//! against `g(JX, Y)`, and the complexified Ricci contraction against a real-frame sum.

use serde::Serialize;

use crate::chart::MetricModel;
use crate::curvature::ricci_real_routes;
use crate::error::{Error, Result};
use crate::sampling::SeedSource;

pub const OMEGA_TOL: f64 = 1e-12;
pub const RICCI_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub samples: usize,
    /// Largest `|ω_complex(X,Y) − g(JX,Y)|`, relative to `1 + |g(JX,Y)|`.
    pub omega_gap: f64,
    /// Largest gap between the two Ricci routes, same scaling.
    pub ricci_gap: f64,
}

/// Runs both checks at `samples` seeded points and fails with [`Error::SelfTest`] on a mismatch.
pub fn run_self_test(model: &MetricModel, seeds: &SeedSource, samples: usize) -> Result<SelfTestReport> {
    let n = model.n();
    let points = seeds.points(model, samples);
    let (mut omega_gap, mut ricci_gap) = (0.0f64, 0.0f64);
    for (i, p) in points.iter().enumerate() {
        let x = seeds.vector(n, 2 * i as u64);
        let y = seeds.vector(n, 2 * i as u64 + 1);
        let real = model.fundamental_form(p, &x, &y)?;
        let complex = model.fundamental_form_complex(p, &x.complexified(), &y.complexified())?;
        omega_gap = omega_gap.max((complex - real).norm() / (1.0 + real.abs()));
        let routes = ricci_real_routes(model, p, &x, &y)?;
        let gap = (routes.complexified.re - routes.real_frame).abs().max(routes.complexified.im.abs());
        ricci_gap = ricci_gap.max(gap / (1.0 + routes.real_frame.abs()));
    }
    if omega_gap > OMEGA_TOL {
        return Err(Error::SelfTest(format!("fundamental form conventions disagree by {omega_gap:e} on {}", model.spec)));
    }
    if ricci_gap > RICCI_TOL {
        return Err(Error::SelfTest(format!("Ricci routes disagree by {ricci_gap:e} on {}", model.spec)));
    }
    Ok(SelfTestReport { samples, omega_gap, ricci_gap })
}
