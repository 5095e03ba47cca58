//! Composite Gauss-Legendre rules on piecewise-smooth intervals.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

/// Nodes below this count per panel are never used.
pub const MIN_PANEL_NODES: usize = 8;

fn reference_rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("rule cache").get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(
        GaussLegendre::new(n.max(2))
            .expect("degree >= 2")
            .into_node_weight_pairs(),
    );
    cache
        .lock()
        .expect("rule cache")
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// n-point Gauss-Legendre nodes and weights mapped to [a, b].
pub fn panel(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    reference_rule(n)
        .iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Composite rule over consecutive `breaks`, with `density` nodes per unit
/// length on each panel (at least [`MIN_PANEL_NODES`]). Zero-length panels
/// are skipped.
pub fn composite(breaks: &[f64], density: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-15 * w[1].abs().max(w[0].abs()).max(1e-300) {
            continue;
        }
        let n = ((density * len).ceil() as usize).max(MIN_PANEL_NODES);
        out.extend(panel(w[0], w[1], n));
    }
    out
}
