use super::{Error, Graph, ParamStore, Var};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor so that near-zero gradients are compared absolutely.
    pub abs_floor: f64,
    /// Check at most this many evenly spaced coordinates per parameter.
    pub max_coords_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-5,
            abs_floor: 1e-6,
            max_coords_per_param: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index where the worst error occurred.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Compares the analytic gradient of a scalar objective against central
/// finite differences, one coordinate of one parameter at a time.
///
/// `objective` is replayed on a fresh [`Graph`] for every perturbation, so it
/// must be deterministic (freeze any dropout noise).
pub fn grad_check<F>(
    store: &mut ParamStore,
    objective: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, Error>
where
    F: Fn(&mut Graph<'_>) -> Result<Var, Error>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let out = objective(&mut g)?;
        if g.value(out).len() != 1 {
            return Err(Error::Dimension {
                op: "grad_check",
                operand: "objective",
                detail: format!("expected a scalar, got {:?}", g.value(out).shape()),
            });
        }
        g.backward(out)
    };
    let eval = |store: &ParamStore| -> Result<f64, Error> {
        let mut g = Graph::new(store);
        let out = objective(&mut g)?;
        Ok(g.value(out).item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
        tolerance: opts.tolerance,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.get(id).value.len();
        let stride = match opts.max_coords_per_param {
            Some(cap) if cap > 0 && n > cap => n.div_ceil(cap),
            _ => 1,
        };
        for i in (0..n).step_by(stride) {
            let a = analytic.get(id).map_or(0.0, |g| g.data()[i]);
            let orig = store.get(id).value.data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + opts.step;
            let up = eval(store);
            store.get_mut(id).value.data_mut()[i] = orig - opts.step;
            let down = eval(store);
            store.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (up? - down?) / (2.0 * opts.step);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.abs_floor);
            report.coordinates += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((store.get(id).name.clone(), i));
            }
        }
    }
    Ok(report)
}
