use core::fmt;

use super::Manifold;
use crate::prelude::*;

type MetricFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type DomainFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A user-supplied chart: metric closure plus domain predicate.
/// Christoffel symbols come from finite differences of the metric.
pub struct MetricChart {
    name: String,
    dim: usize,
    metric: Box<MetricFn>,
    domain: Box<DomainFn>,
}

impl MetricChart {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        metric: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        MetricChart { name: name.into(), dim, metric: Box::new(metric), domain: Box::new(domain) }
    }
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl Manifold for MetricChart {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.is_finite()) && (self.domain)(x)
    }

    fn metric_into(&self, x: &[f64], out: &mut [f64]) {
        (self.metric)(x, out)
    }
}
