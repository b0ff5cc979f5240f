use super::{Graph, NumericsError, ParamId, ParamStore, Var};

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Max over coordinates of `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
    pub max_rel_error: f64,
    /// Parameter name and coordinate where the max was attained.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

pub const DEFAULT_STEP: f64 = 1e-5;

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences `(f(θ+h) − f(θ−h)) / 2h` on every coordinate of
/// `params`.
pub fn grad_check<E, F>(
    store: &ParamStore,
    params: &[ParamId],
    h: f64,
    mut f: F,
) -> Result<GradCheck, E>
where
    E: From<NumericsError>,
    F: FnMut(&mut Graph, &ParamStore) -> Result<Var, E>,
{
    let mut work = store.clone();
    let mut g = Graph::new();
    let out = f(&mut g, &work)?;
    let base = g.value(out).item();
    if !base.is_finite() {
        return Err(NumericsError::NonFinite("objective").into());
    }
    let grads = g.backward(out);
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };

    for &id in params {
        let analytic = g
            .param_var(id)
            .and_then(|v| grads.get(v).cloned())
            .unwrap_or_else(|| super::Tensor::zeros(work.value(id).shape()));
        if !analytic.is_finite() {
            return Err(NumericsError::NonFinite("analytic gradient").into());
        }
        for k in 0..analytic.len() {
            let orig = work.value(id).data()[k];
            work.get_mut(id).value.data_mut()[k] = orig + h;
            let plus = eval(&mut f, &work)?;
            work.get_mut(id).value.data_mut()[k] = orig - h;
            let minus = eval(&mut f, &work)?;
            work.get_mut(id).value.data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            if !numeric.is_finite() {
                return Err(NumericsError::NonFinite("finite difference").into());
            }
            let a = analytic.data()[k];
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.coordinates += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((work.get(id).name.clone(), k));
            }
        }
    }
    Ok(report)
}

fn eval<E, F>(f: &mut F, store: &ParamStore) -> Result<f64, E>
where
    E: From<NumericsError>,
    F: FnMut(&mut Graph, &ParamStore) -> Result<Var, E>,
{
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    Ok(g.value(out).item())
}
