//! Second-order polynomial logistic regression fitted by iteratively
//! reweighted least squares, with backward stepwise AIC term elimination.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::LearnError;

/// One polynomial term over a feature vector. Indices refer to positions in
/// the model's feature list, not task ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Intercept,
    Linear(usize),
    Quadratic(usize),
    Interaction(usize, usize),
}

impl Term {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Term::Intercept => 1.0,
            Term::Linear(i) => x[i],
            Term::Quadratic(i) => x[i] * x[i],
            Term::Interaction(i, j) => x[i] * x[j],
        }
    }

    /// Partial derivative with respect to coordinate `axis`.
    pub fn derivative(&self, x: &[f64], axis: usize) -> f64 {
        match *self {
            Term::Intercept => 0.0,
            Term::Linear(i) => {
                if i == axis {
                    1.0
                } else {
                    0.0
                }
            }
            Term::Quadratic(i) => {
                if i == axis {
                    2.0 * x[i]
                } else {
                    0.0
                }
            }
            Term::Interaction(i, j) => {
                if i == axis {
                    x[j]
                } else if j == axis {
                    x[i]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mentions(&self, axis: usize) -> bool {
        match *self {
            Term::Intercept => false,
            Term::Linear(i) | Term::Quadratic(i) => i == axis,
            Term::Interaction(i, j) => i == axis || j == axis,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Term::Intercept => write!(f, "1"),
            Term::Linear(i) => write!(f, "v{i}"),
            Term::Quadratic(i) => write!(f, "v{i}^2"),
            Term::Interaction(i, j) => write!(f, "v{i}*v{j}"),
        }
    }
}

impl FromStr for Term {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, LearnError> {
        let bad = || LearnError::Numeric(format!("malformed term `{s}`"));
        if s == "1" {
            return Ok(Term::Intercept);
        }
        if let Some((a, b)) = s.split_once('*') {
            let i = a.strip_prefix('v').ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let j = b.strip_prefix('v').ok_or_else(bad)?.parse().map_err(|_| bad())?;
            return Ok(Term::Interaction(i, j));
        }
        if let Some(a) = s.strip_suffix("^2") {
            let i = a.strip_prefix('v').ok_or_else(bad)?.parse().map_err(|_| bad())?;
            return Ok(Term::Quadratic(i));
        }
        let i = s.strip_prefix('v').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        Ok(Term::Linear(i))
    }
}

/// The complete second-order term set over `dim` features: intercept, all
/// linear and quadratic terms, and all pairwise interactions.
pub fn full_terms(dim: usize) -> Vec<Term> {
    let mut terms = vec![Term::Intercept];
    terms.extend((0..dim).map(Term::Linear));
    terms.extend((0..dim).map(Term::Quadratic));
    for i in 0..dim {
        for j in i + 1..dim {
            terms.push(Term::Interaction(i, j));
        }
    }
    terms
}

/// Numerically stable logistic function, clamped so the result stays strictly
/// inside (0, 1) for any finite input.
pub fn sigmoid(eta: f64) -> f64 {
    let e = eta.clamp(-36.0, 36.0);
    if e >= 0.0 {
        1.0 / (1.0 + (-e).exp())
    } else {
        let t = e.exp();
        t / (1.0 + t)
    }
}

/// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Design matrix: one column per term, evaluated on raw feature rows.
pub fn build_design(rows: &[Vec<f64>], terms: &[Term]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), terms.len(), |r, c| terms[c].eval(&rows[r]))
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Coefficients in raw feature units, aligned with the term list.
    pub coefficients: Vec<f64>,
    pub ridge_fallback: bool,
    pub log_likelihood: f64,
    pub aic: f64,
}

const MAX_IRLS_STEPS: usize = 100;
const IRLS_TOLERANCE: f64 = 1e-8;
const RIDGE_PENALTY: f64 = 1e-6;

/// Fits logistic coefficients on a prebuilt design matrix. Column 0 must be
/// the intercept. Columns are standardized internally; the returned
/// coefficients are mapped back to raw units.
pub fn fit_logistic(design: &DMatrix<f64>, y: &[f64]) -> Result<FitOutcome, LearnError> {
    match irls(design, y, 0.0) {
        Ok(beta) => Ok(summarize(design, y, beta, false)),
        Err(_) => {
            let beta = irls(design, y, RIDGE_PENALTY)
                .map_err(|e| LearnError::Numeric(format!("ridge fallback failed: {e}")))?;
            Ok(summarize(design, y, beta, true))
        }
    }
}

fn summarize(design: &DMatrix<f64>, y: &[f64], beta: DVector<f64>, ridge: bool) -> FitOutcome {
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let ll = log_likelihood(design, y, &coefficients);
    let k = coefficients.len() as f64;
    FitOutcome {
        coefficients,
        ridge_fallback: ridge,
        log_likelihood: ll,
        aic: 2.0 * k - 2.0 * ll,
    }
}

pub fn log_likelihood(design: &DMatrix<f64>, y: &[f64], coefficients: &[f64]) -> f64 {
    let beta = DVector::from_column_slice(coefficients);
    let eta = design * beta;
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| -yi * softplus(-e) - (1.0 - yi) * softplus(e))
        .sum()
}

/// Runs IRLS in standardized column space and maps the solution back to raw
/// units. Errors signal likely separation (divergence or a singular system).
fn irls(design: &DMatrix<f64>, y: &[f64], ridge: f64) -> Result<DVector<f64>, String> {
    let n = design.nrows();
    let p = design.ncols();
    if n == 0 {
        return Err("empty design".into());
    }

    // Standardize non-intercept columns to zero mean, unit variance.
    let mut xs = design.clone();
    let mut means = vec![0.0; p];
    let mut stds = vec![1.0; p];
    for c in 1..p {
        let col = xs.column(c);
        let m = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        let s = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        means[c] = m;
        stds[c] = s;
        for r in 0..n {
            xs[(r, c)] = (design[(r, c)] - m) / s;
        }
    }

    let mut beta = DVector::zeros(p);
    for _ in 0..MAX_IRLS_STEPS {
        let eta = &xs * &beta;
        let mut a = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        for r in 0..n {
            let pr = sigmoid(eta[r]);
            let w = (pr * (1.0 - pr)).max(1e-10);
            let z = eta[r] + (y[r] - pr) / w;
            let row = xs.row(r);
            for i in 0..p {
                let wxi = w * row[i];
                b[i] += wxi * z;
                for j in i..p {
                    a[(i, j)] += wxi * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                a[(i, j)] = a[(j, i)];
            }
        }
        if ridge > 0.0 {
            for i in 1..p {
                a[(i, i)] += ridge;
            }
        }

        let next: DVector<f64> = a
            .cholesky()
            .map(|ch| ch.solve(&b))
            .ok_or("singular weighted system")?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err("non-finite coefficients".into());
        }
        if next.amax() > 1e6 {
            return Err("diverging coefficients".into());
        }
        let delta = (&next - &beta).amax();
        beta = next;
        if delta < IRLS_TOLERANCE {
            break;
        }
    }

    if ridge == 0.0 {
        // Perfect separation: every instance confidently on its own side.
        // The clamp in `sigmoid` lets IRLS stabilize on a saturated solution
        // instead of diverging, so detect it from the fitted scores.
        let eta = &xs * &beta;
        let separated = eta
            .iter()
            .zip(y)
            .all(|(&e, &yi)| (yi > 0.5) == (e > 0.0) && e.abs() > 2.0);
        if separated {
            return Err("perfect separation".into());
        }
    }

    // Map standardized coefficients back to raw units.
    let mut raw = DVector::zeros(p);
    let mut intercept = beta[0];
    for c in 1..p {
        raw[c] = beta[c] / stds[c];
        intercept -= beta[c] * means[c] / stds[c];
    }
    raw[0] = intercept;
    Ok(raw)
}

/// Backward stepwise elimination: repeatedly drops the non-intercept term
/// whose removal lowers AIC the most, until no removal helps. The returned
/// trace holds the AIC of the full fit followed by one entry per removal.
pub fn backward_aic(
    rows: &[Vec<f64>],
    y: &[f64],
    terms: Vec<Term>,
) -> Result<(Vec<Term>, FitOutcome, Vec<f64>), LearnError> {
    let mut terms = terms;
    let mut fit = fit_logistic(&build_design(rows, &terms), y)?;
    let mut trace = vec![fit.aic];
    loop {
        let mut best: Option<(usize, FitOutcome)> = None;
        for drop in 1..terms.len() {
            let mut candidate = terms.clone();
            candidate.remove(drop);
            let Ok(outcome) = fit_logistic(&build_design(rows, &candidate), y) else {
                continue;
            };
            if outcome.aic < best.as_ref().map_or(fit.aic, |(_, o)| o.aic) {
                best = Some((drop, outcome));
            }
        }
        match best {
            Some((drop, outcome)) => {
                assert!(outcome.aic < fit.aic, "AIC step must strictly descend");
                terms.remove(drop);
                fit = outcome;
                trace.push(fit.aic);
            }
            None => break,
        }
    }
    Ok((terms, fit, trace))
}
