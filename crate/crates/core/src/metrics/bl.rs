//! Exact dual bounded-Lipschitz distance between finitely supported measures.
//!
//! The distance is the value of the linear program
//!
//! ```text
//! maximize   Σ_i f_i (μ_i − ν_i)
//! subject to |f_i| ≤ 1,  |f_i − f_j| ≤ ‖x_i − x_j‖
//! ```
//!
//! over the union of the two supports. Any feasible assignment extends to a
//! function on all of ℝ^d with the same bounds (McShane extension, clipped), so
//! the optimum is the supremum over the whole test class.
//!
//! Two solvers are provided. On the real line only adjacent constraints are
//! active, and the program is a chain solved exactly by a breakpoint sweep over
//! the concave value function. In higher dimension the program is solved via
//! its dual, a transport problem between the positive and negative parts of
//! `μ − ν` under the truncated cost `min(‖x − y‖, 2)`, by successive shortest
//! augmenting paths.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

pub const DEFAULT_SUPPORT_CAP: usize = 2000;

const MASS_EPS: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlMethod {
    /// Chain sweep in one dimension, transport otherwise.
    Auto,
    Chain,
    Transport,
}

#[derive(Clone, Copy, Debug)]
pub struct BlSolver {
    /// Largest combined support accepted by the transport solver.
    pub cap: usize,
    pub method: BlMethod,
}

impl Default for BlSolver {
    fn default() -> Self {
        Self {
            cap: DEFAULT_SUPPORT_CAP,
            method: BlMethod::Auto,
        }
    }
}

pub fn bl_distance_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    BlSolver::default().distance(mu, nu)
}

impl BlSolver {
    pub fn with_method(method: BlMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Whether [`BlSolver::distance`] will accept this pair.
    pub fn accepts(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
        match self.resolve(mu.dim()) {
            BlMethod::Chain => mu.dim() == 1,
            _ => mu.len() + nu.len() <= self.cap || signed_difference(mu, nu).1.len() <= self.cap,
        }
    }

    fn resolve(&self, dim: usize) -> BlMethod {
        match self.method {
            BlMethod::Auto if dim == 1 => BlMethod::Chain,
            BlMethod::Auto => BlMethod::Transport,
            m => m,
        }
    }

    pub fn distance(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
        if mu.dim() != nu.dim() {
            return Err(Error::DimensionMismatch(format!(
                "measures live in dimensions {} and {}",
                mu.dim(),
                nu.dim()
            )));
        }
        let dim = mu.dim();
        let method = self.resolve(dim);
        if method == BlMethod::Chain && dim != 1 {
            return Err(Error::DimensionMismatch("chain solver needs one-dimensional atoms".into()));
        }
        let (points, mut signed) = signed_difference(mu, nu);
        // BL(μ, ν) = BL(ν, μ): solve one canonical orientation.
        if signed.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0) {
            signed.iter_mut().for_each(|v| *v = -*v);
        }
        let n = signed.len();
        if method == BlMethod::Transport && n > self.cap {
            return Err(Error::SupportTooLarge { size: n, cap: self.cap });
        }
        let value = match method {
            BlMethod::Chain => chain_value(&points, &signed),
            _ => transport_value(dim, &points, &signed),
        };
        Ok(value.clamp(0.0, 2.0))
    }
}

/// Union support with exactly coinciding atoms merged, and `μ − ν` on it.
///
/// Points come out in a fixed order and the masses are summed per measure,
/// so swapping the arguments negates `signed` exactly.
pub(crate) fn signed_difference(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> (Vec<f64>, Vec<f64>) {
    let dim = mu.dim();
    let mut mass: BTreeMap<Vec<u64>, (Vec<f64>, f64, f64)> = BTreeMap::new();
    // +0.0 and -0.0 are the same point.
    let key = |x: &[f64]| -> Vec<u64> { x.iter().map(|v| (v + 0.0).to_bits()).collect() };
    for (x, w) in mu.iter() {
        mass.entry(key(x)).or_insert_with(|| (x.to_vec(), 0.0, 0.0)).1 += w;
    }
    for (x, w) in nu.iter() {
        mass.entry(key(x)).or_insert_with(|| (x.to_vec(), 0.0, 0.0)).2 += w;
    }
    let mut points = Vec::with_capacity(dim * mass.len());
    let mut signed = Vec::with_capacity(mass.len());
    for (x, a, b) in mass.into_values() {
        points.extend_from_slice(&x);
        signed.push(a - b);
    }
    (points, signed)
}

#[derive(Clone, Copy, Debug)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Sorted multiset of slope breakpoints with a lazy translation.
#[derive(Default)]
struct Breakpoints {
    map: BTreeMap<Key, f64>,
    offset: f64,
}

impl Breakpoints {
    fn insert(&mut self, pos: f64, weight: f64) {
        if weight > 0.0 {
            *self.map.entry(Key(pos - self.offset)).or_insert(0.0) += weight;
        }
    }
    fn first(&self) -> Option<(f64, f64)> {
        self.map.first_key_value().map(|(k, w)| (k.0 + self.offset, *w))
    }
    fn last(&self) -> Option<(f64, f64)> {
        self.map.last_key_value().map(|(k, w)| (k.0 + self.offset, *w))
    }
    fn pop_first(&mut self) -> Option<(f64, f64)> {
        self.map.pop_first().map(|(k, w)| (k.0 + self.offset, w))
    }
    fn pop_last(&mut self) -> Option<(f64, f64)> {
        self.map.pop_last().map(|(k, w)| (k.0 + self.offset, w))
    }
    fn add_to_first(&mut self, delta: f64) {
        if let Some(mut e) = self.map.first_entry() {
            *e.get_mut() += delta;
        }
    }
    fn add_to_last(&mut self, delta: f64) {
        if let Some(mut e) = self.map.last_entry() {
            *e.get_mut() += delta;
        }
    }
}

/// Maximizes `Σ c_i f_i` over `|f_i| ≤ 1`, `|f_{i+1} − f_i| ≤ x_{i+1} − x_i`.
///
/// The running value function `V_i(f)` (best partial objective given `f_i = f`)
/// is concave and piecewise linear on `[-1, 1]`. It is kept as the height of its
/// flat top plus two breakpoint sets: `left` holds slope decrements to the left
/// of the top, `right` those to its right. Relaxing the Lipschitz link over a
/// gap `g` widens the top by `g` on each side; adding `c f` tilts the function
/// and the top is found again by walking breakpoints.
fn chain_value(points: &[f64], signed: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..signed.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));

    let mut left = Breakpoints::default();
    let mut right = Breakpoints::default();
    let mut top = 0.0;
    let mut prev: Option<f64> = None;

    for &i in &order {
        let x = points[i];
        let c = signed[i];
        if let Some(p) = prev {
            let gap = x - p;
            left.offset -= gap;
            right.offset += gap;
            while left.first().is_some_and(|(pos, _)| pos <= -1.0) {
                left.pop_first();
            }
            while right.last().is_some_and(|(pos, _)| pos >= 1.0) {
                right.pop_last();
            }
        }
        prev = Some(x);

        if c > 0.0 {
            // Walk right from the top's right end while the slope stays positive.
            let mut pos = right.first().map_or(1.0, |(p, _)| p);
            let mut val = top + c * pos;
            let mut slope = c;
            loop {
                let Some((r, w)) = right.first() else {
                    val += slope * (1.0 - pos);
                    left.insert(1.0, slope);
                    break;
                };
                val += slope * (r - pos);
                pos = r;
                if w <= slope {
                    right.pop_first();
                    left.insert(r, w);
                    slope -= w;
                    if slope <= 0.0 {
                        break;
                    }
                } else {
                    left.insert(r, slope);
                    right.add_to_first(-slope);
                    break;
                }
            }
            top = val;
        } else if c < 0.0 {
            let mut pos = left.last().map_or(-1.0, |(p, _)| p);
            let mut val = top + c * pos;
            let mut slope = -c;
            loop {
                let Some((l, w)) = left.last() else {
                    val += slope * (pos + 1.0);
                    right.insert(-1.0, slope);
                    break;
                };
                val += slope * (pos - l);
                pos = l;
                if w <= slope {
                    left.pop_last();
                    right.insert(l, w);
                    slope -= w;
                    if slope <= 0.0 {
                        break;
                    }
                } else {
                    right.insert(l, slope);
                    left.add_to_last(-slope);
                    break;
                }
            }
            top = val;
        }
    }
    top
}

/// Optimal transport of the positive part of `signed` onto the negative part
/// under the cost `min(‖x − y‖, 2)`.
fn transport_value(dim: usize, points: &[f64], signed: &[f64]) -> f64 {
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let sources: Vec<usize> = (0..signed.len()).filter(|&i| signed[i] > MASS_EPS).collect();
    let sinks: Vec<usize> = (0..signed.len()).filter(|&i| signed[i] < -MASS_EPS).collect();
    let (n, m) = (sources.len(), sinks.len());
    if n == 0 || m == 0 {
        return 0.0;
    }
    let mut cost = vec![0.0; n * m];
    for (a, &i) in sources.iter().enumerate() {
        for (b, &j) in sinks.iter().enumerate() {
            let d2: f64 = pt(i).iter().zip(pt(j)).map(|(u, v)| (u - v) * (u - v)).sum();
            cost[a * m + b] = d2.sqrt().min(2.0);
        }
    }
    let mut supply: Vec<f64> = sources.iter().map(|&i| signed[i]).collect();
    let mut demand: Vec<f64> = sinks.iter().map(|&j| -signed[j]).collect();
    let mut flow = vec![0.0; n * m];

    // Node layout: 0..n sources, n..n+m sinks, n+m super-sink. The super-source
    // is implicit: every source with residual supply starts at distance 0 and
    // keeps potential 0 relative to it.
    let sink_node = n + m;
    let total = n + m + 1;
    let mut potential = vec![0.0f64; total];
    let mut dist = vec![f64::INFINITY; total];
    let mut done = vec![false; total];
    let mut parent = vec![usize::MAX; total];

    loop {
        let remaining: f64 = supply.iter().sum::<f64>().min(demand.iter().sum());
        if remaining <= 1e-14 {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        done.iter_mut().for_each(|d| *d = false);
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        for a in 0..n {
            if supply[a] > MASS_EPS {
                // Reduced cost of the super-source arc.
                dist[a] = (-potential[a]).max(0.0);
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..total {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX || u == sink_node {
                break;
            }
            done[u] = true;
            if u < n {
                for b in 0..m {
                    let v = n + b;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[u * m + b] + potential[u] - potential[v]).max(0.0);
                    if best + rc < dist[v] {
                        dist[v] = best + rc;
                        parent[v] = u;
                    }
                }
            } else {
                let b = u - n;
                if demand[b] > MASS_EPS && !done[sink_node] {
                    let rc = (potential[u] - potential[sink_node]).max(0.0);
                    if best + rc < dist[sink_node] {
                        dist[sink_node] = best + rc;
                        parent[sink_node] = u;
                    }
                }
                for a in 0..n {
                    if done[a] || flow[a * m + b] <= MASS_EPS {
                        continue;
                    }
                    let rc = (-cost[a * m + b] + potential[u] - potential[a]).max(0.0);
                    if best + rc < dist[a] {
                        dist[a] = best + rc;
                        parent[a] = u;
                    }
                }
            }
        }
        let reach = dist[sink_node];
        if !reach.is_finite() {
            break;
        }
        for v in 0..total {
            potential[v] += dist[v].min(reach);
        }

        // Trace back and find the bottleneck.
        let last_sink = parent[sink_node];
        let mut amount = demand[last_sink - n];
        let mut v = last_sink;
        loop {
            let u = parent[v];
            if u == usize::MAX {
                amount = amount.min(supply[v]);
                break;
            }
            if v < n {
                // Reverse arc sink u -> source v cancels flow on (v, u).
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        let mut v = last_sink;
        demand[last_sink - n] -= amount;
        loop {
            let u = parent[v];
            if u == usize::MAX {
                supply[v] -= amount;
                break;
            }
            if v < n {
                flow[v * m + (u - n)] -= amount;
            } else {
                flow[u * m + (v - n)] += amount;
            }
            v = u;
        }
    }
    flow.iter().zip(&cost).map(|(f, c)| f * c).sum()
}
