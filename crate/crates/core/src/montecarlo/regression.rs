use crate::error::{Error, Result};

/// Slope of `log error` against `log delta` with its standard error.
///
/// Rows are `(delta, error, stderr)`. Weights are `(error / stderr)^2`, the
/// inverse delta-method variance of `log error`, and the slope variance is
/// `1 / Sxx`. If any stderr is zero the fit is unweighted and the variance
/// comes from the residuals.
pub fn fit_order(rows: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if rows.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 rows, got {}",
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| !(r.0 > 0.0 && r.1 > 0.0)) {
        return Err(Error::Degenerate(format!(
            "delta and error must be positive, got delta = {}, error = {}",
            r.0, r.1
        )));
    }
    let weighted = rows.iter().all(|r| r.2 > 0.0 && r.2.is_finite());
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let ws: Vec<f64> = rows
        .iter()
        .map(|r| if weighted { (r.1 / r.2).powi(2) } else { 1.0 })
        .collect();
    let sw: f64 = ws.iter().sum();
    let xbar = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ybar = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws
        .iter()
        .zip(&xs)
        .map(|(w, x)| w * (x - xbar).powi(2))
        .sum();
    let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(spread > 1e-12) || !(sxx > 0.0) {
        return Err(Error::Degenerate("all stepsizes are equal".into()));
    }
    let sxy: f64 = ws
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(w, (x, y))| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let se = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let intercept = ybar - slope * xbar;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let dof = rows.len() as f64 - 2.0;
        (rss / dof / sxx).sqrt()
    };
    Ok((slope, se))
}
