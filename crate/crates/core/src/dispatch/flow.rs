//! Exact dispatch solver.
//!
//! Measured in stored energy (`x = eta_ch * p_ch`, `y = p_dis / eta_dis`), the
//! dispatch LP is a min-cost flow on the time chain: a source feeds hour `t`
//! through its charge arc, hour `t` drains to a sink through its discharge arc,
//! and the stock `s_t` moves from hour `t` to `t + 1` on a zero-cost storage arc
//! of capacity `E`. The initial stock enters at hour 0 and the final stock
//! leaves through a terminal arc to the sink.
//!
//! Successive shortest paths solves it exactly. On a chain every simple
//! source-sink path is "charge at `i`, move along the chain, discharge at `j`",
//! so the shortest path is found with two linear scans per augmentation.
//! The forced flows (initial stock, terminal floor) use a second cost tier that
//! dominates money lexicographically, which routes them first without a big-M.

use super::{DispatchError, EssParams};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost {
    tier: i32,
    money: f64,
}

impl Cost {
    const fn new(tier: i32, money: f64) -> Self {
        Self { tier, money }
    }

    fn add(self, other: Cost) -> Cost {
        Cost::new(self.tier + other.tier, self.money + other.money)
    }

    fn lt(self, other: Cost) -> bool {
        self.tier < other.tier || (self.tier == other.tier && self.money < other.money)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Charge(usize),
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sink {
    Discharge(usize),
    Terminal,
}

type SinkChoice = Option<(Cost, Sink)>;

fn better(a: SinkChoice, b: SinkChoice) -> SinkChoice {
    match (a, b) {
        (Some((ca, _)), Some((cb, _))) if cb.lt(ca) => b,
        (None, _) => b,
        _ => a,
    }
}

struct Network<'a> {
    n: usize,
    capacity: f64,
    cap_x: f64,
    cap_y: f64,
    initial: f64,
    floor: f64,
    cost_x: &'a [f64],
    cost_y: &'a [f64],
    tol: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    initial_used: f64,
}

impl Network<'_> {
    fn sink_at(&self, j: usize) -> SinkChoice {
        let mut best = None;
        if self.y[j] < self.cap_y - self.tol {
            best = Some((Cost::new(0, self.cost_y[j]), Sink::Discharge(j)));
        }
        if j == self.n - 1 {
            let last = self.s[j];
            let terminal = if last < self.floor - self.tol {
                Some((Cost::new(-1, 0.0), Sink::Terminal))
            } else if last < self.capacity - self.tol {
                Some((Cost::new(0, 0.0), Sink::Terminal))
            } else {
                None
            };
            best = better(best, terminal);
        }
        best
    }

    fn sources_at(&self, i: usize) -> [Option<(Cost, Source)>; 2] {
        let charge = (self.x[i] < self.cap_x - self.tol)
            .then(|| (Cost::new(0, self.cost_x[i]), Source::Charge(i)));
        let initial = (i == 0 && self.initial_used < self.initial - self.tol)
            .then_some((Cost::new(-1, 0.0), Source::Initial));
        [initial, charge]
    }

    /// Bottleneck of the path `source(i) -> chain -> sink`.
    fn bottleneck(&self, i: usize, source: Source, sink: Sink) -> f64 {
        let mut delta = match source {
            Source::Charge(_) => self.cap_x - self.x[i],
            Source::Initial => self.initial - self.initial_used,
        };
        match sink {
            Sink::Discharge(j) => {
                delta = delta.min(self.cap_y - self.y[j]);
                if j > i {
                    for t in i..j {
                        delta = delta.min(self.capacity - self.s[t]);
                    }
                } else {
                    for t in j..i {
                        delta = delta.min(self.s[t]);
                    }
                }
            }
            Sink::Terminal => {
                let last = self.s[self.n - 1];
                let terminal = if last < self.floor - self.tol {
                    self.floor - last
                } else {
                    self.capacity - last
                };
                delta = delta.min(terminal);
                for t in i..self.n - 1 {
                    delta = delta.min(self.capacity - self.s[t]);
                }
            }
        }
        delta
    }

    fn augment(&mut self, i: usize, source: Source, sink: Sink, delta: f64) {
        let snap = |v: &mut f64, hi: f64, tol: f64| {
            if *v > hi - tol {
                *v = hi;
            } else if *v < tol {
                *v = 0.0;
            }
        };
        match source {
            Source::Charge(_) => {
                self.x[i] += delta;
                snap(&mut self.x[i], self.cap_x, self.tol);
            }
            Source::Initial => {
                self.initial_used += delta;
                snap(&mut self.initial_used, self.initial, self.tol);
            }
        }
        let range = match sink {
            Sink::Discharge(j) => {
                self.y[j] += delta;
                snap(&mut self.y[j], self.cap_y, self.tol);
                if j >= i {
                    (i, j, delta)
                } else {
                    (j, i, -delta)
                }
            }
            Sink::Terminal => (i, self.n, delta),
        };
        let (lo, hi, d) = range;
        for t in lo..hi {
            self.s[t] += d;
            snap(&mut self.s[t], self.capacity, self.tol);
        }
    }
}

/// Returns hourly `(p_ch, p_dis)` maximizing `sum c_t (p_dis - p_ch) - penalty * throughput`.
pub(super) fn solve(
    coeffs: &[f64],
    ess: &EssParams,
    soc0: f64,
    terminal_floor: Option<f64>,
    penalty: f64,
) -> Result<(Vec<f64>, Vec<f64>), DispatchError> {
    let n = coeffs.len();
    if n == 0 {
        return Err(DispatchError::EmptyHorizon);
    }
    let capacity = ess.capacity;
    let cap_x = ess.eta_ch * ess.p_ch_max;
    let cap_y = ess.p_dis_max / ess.eta_dis;
    let cost_x: Vec<f64> = coeffs.iter().map(|c| (c + penalty) / ess.eta_ch).collect();
    let cost_y: Vec<f64> = coeffs
        .iter()
        .map(|c| -(c - penalty) * ess.eta_dis)
        .collect();
    let money_scale = coeffs.iter().fold(penalty, |m, c| m.max(c.abs()));
    let money_tol = 1e-12 * money_scale;
    let floor = terminal_floor.map_or(0.0, |f| (f * capacity).min(capacity));

    let mut net = Network {
        n,
        capacity,
        cap_x,
        cap_y,
        initial: soc0 * capacity,
        floor,
        cost_x: &cost_x,
        cost_y: &cost_y,
        tol: 1e-12 * capacity.max(cap_x).max(cap_y),
        x: vec![0.0; n],
        y: vec![0.0; n],
        s: vec![0.0; n],
        initial_used: 0.0,
    };

    let max_iterations = 200 * n + 10_000;
    let mut left: Vec<SinkChoice> = vec![None; n];
    let mut right: Vec<SinkChoice> = vec![None; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_iterations {
            return Err(DispatchError::SolverStalled {
                iterations: max_iterations,
            });
        }

        // best sink reachable from each hour, moving backward / forward in time
        left[0] = net.sink_at(0);
        for t in 1..n {
            let carried = if net.s[t - 1] > net.tol {
                left[t - 1]
            } else {
                None
            };
            left[t] = better(net.sink_at(t), carried);
        }
        right[n - 1] = net.sink_at(n - 1);
        for t in (0..n - 1).rev() {
            let carried = if net.s[t] < capacity - net.tol {
                right[t + 1]
            } else {
                None
            };
            right[t] = better(net.sink_at(t), carried);
        }

        let mut best: Option<(Cost, usize, Source, Sink)> = None;
        for i in 0..n {
            let Some((sink_cost, sink)) = better(left[i], right[i]) else {
                continue;
            };
            for (src_cost, source) in net.sources_at(i).into_iter().flatten() {
                let total = src_cost.add(sink_cost);
                if best.is_none_or(|(c, ..)| total.lt(c)) {
                    best = Some((total, i, source, sink));
                }
            }
        }

        let Some((cost, i, source, sink)) = best else {
            break;
        };
        if !cost.lt(Cost::new(0, -money_tol)) {
            break;
        }
        let delta = net.bottleneck(i, source, sink);
        if delta <= 0.0 {
            // Only reachable through tolerance edge cases; the path is saturated.
            break;
        }
        net.augment(i, source, sink, delta);
    }

    if net.initial_used < net.initial - net.tol {
        return Err(DispatchError::Infeasible { floor: soc0 });
    }
    if net.s[n - 1] < floor - 1e-9 * capacity {
        return Err(DispatchError::Infeasible {
            floor: terminal_floor.unwrap_or(0.0),
        });
    }

    // Same-hour charge and discharge only pays when the hourly loop is profitable.
    for t in 0..n {
        let both = net.x[t].min(net.y[t]);
        if both > 0.0 && cost_x[t] + cost_y[t] > 0.0 {
            net.x[t] -= both;
            net.y[t] -= both;
        }
    }
    let p_ch = net
        .x
        .iter()
        .map(|x| (x / ess.eta_ch).min(ess.p_ch_max))
        .collect();
    let p_dis = net
        .y
        .iter()
        .map(|y| (y * ess.eta_dis).min(ess.p_dis_max))
        .collect();
    Ok((p_ch, p_dis))
}
