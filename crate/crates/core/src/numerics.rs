//! Fixed-step RK4, composite quadrature and sampled derivatives on uniform grids.

use crate::error::{Error, Result};

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F>(t: f64, y: &[f64], h: f64, f: &mut F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let at = |base: &[f64], k: &[f64], s: f64| -> Vec<f64> { base.iter().zip(k).map(|(b, k)| b + s * k).collect() };
    let exit = |e: Error, time: f64| match e {
        Error::DomainError(_) | Error::SingularMetric(_) => Error::DomainExit { time },
        other => other,
    };
    let k1 = f(t, y).map_err(|e| exit(e, t))?;
    let k2 = f(t + 0.5 * h, &at(y, &k1, 0.5 * h)).map_err(|e| exit(e, t + 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &at(y, &k2, 0.5 * h)).map_err(|e| exit(e, t + 0.5 * h))?;
    let k4 = f(t + h, &at(y, &k3, h)).map_err(|e| exit(e, t + h))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrates `steps` RK4 steps and returns all `steps + 1` states.
///
/// Failures of `f` with a domain or metric error become [`Error::DomainExit`] at the stage time.
pub fn rk4<F>(y0: Vec<f64>, t0: f64, h: f64, steps: usize, mut f: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0);
    for k in 0..steps {
        let next = rk4_step(t0 + k as f64 * h, &out[k], h, &mut f)?;
        out.push(next);
    }
    Ok(out)
}

/// Composite Simpson on a uniform grid; an odd interval count closes with the 3/8 rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let (even_end, tail) = if n.is_multiple_of(2) { (n, 0.0) } else { (n - 3, three_eighths(&values[n - 3..], h)) };
            let mut s = 0.0;
            if even_end > 0 {
                s = values[0] + values[even_end];
                for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
                    s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
                }
                s *= h / 3.0;
            }
            s + tail
        }
    }
}

fn three_eighths(v: &[f64], h: f64) -> f64 {
    3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3])
}

/// `d/dt` of uniformly sampled vectors: 4th-order central differences inside,
/// 3rd-order one-sided four-point stencils at the two nodes next to each end.
///
/// Needs at least five samples.
pub fn derivative(samples: &[Vec<f64>], h: f64) -> Result<Vec<Vec<f64>>> {
    let len = samples.len();
    if len < 5 {
        return Err(Error::GridMismatch { expected: 5, found: len });
    }
    let dim = samples[0].len();
    let last = len - 1;
    let combo = |idx: [usize; 4], w: [f64; 4], scale: f64| -> Vec<f64> {
        (0..dim)
            .map(|c| idx.iter().zip(w).map(|(&i, w)| w * samples[i][c]).sum::<f64>() / scale)
            .collect()
    };
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let d = if i == 0 {
            combo([0, 1, 2, 3], [-11.0, 18.0, -9.0, 2.0], 6.0 * h)
        } else if i == 1 {
            combo([0, 1, 2, 3], [-2.0, -3.0, 6.0, -1.0], 6.0 * h)
        } else if i == last {
            combo([last, last - 1, last - 2, last - 3], [11.0, -18.0, 9.0, -2.0], 6.0 * h)
        } else if i == last - 1 {
            combo([last, last - 1, last - 2, last - 3], [2.0, 3.0, -6.0, 1.0], 6.0 * h)
        } else {
            combo([i - 2, i - 1, i + 1, i + 2], [1.0, -8.0, 8.0, -1.0], 12.0 * h)
        };
        out.push(d);
    }
    Ok(out)
}
