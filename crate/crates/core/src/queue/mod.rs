//! Event-driven simulation of the M/Ph/n+M queue and its diffusion scaling.
//!
//! Customers waiting for service are booked under the phase drawn at their
//! arrival, so `X` always sums to the number of customers in the system.

mod compare;

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::em::{Provenance, SampleSet};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::PhaseTypeService;
use crate::seed::{self, SeedRole, SimRng};

pub use compare::{queue_compare_sweep, steady_state_compare, CompareRow, QueueCompareReport};

/// Parameters of one queue run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueConfig {
    pub n: usize,
    /// Service law, rescaled to mean one on construction.
    pub pt: PhaseTypeService,
    pub alpha: f64,
    pub beta: f64,
    /// Replaces `n - beta sqrt(n)` when set; zero disables arrivals.
    pub lambda_override: Option<f64>,
    /// Simulated time horizon.
    pub horizon: f64,
    /// Time discarded before grid sampling starts.
    pub burn_in: f64,
    /// Grid spacing of the recorded samples.
    pub spacing: f64,
    pub seed: u64,
    /// Replication index used for seed derivation.
    pub replication: u64,
    /// Per-phase starting counts; defaults to `round(n gamma)`.
    pub initial: Option<Vec<u64>>,
    pub record_events: bool,
}

impl QueueConfig {
    /// Defaults: burn-in 50, spacing 1, replication 0, no event log.
    pub fn new(n: usize, pt: &PhaseTypeService, alpha: f64, beta: f64, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            n,
            pt: pt.normalize_mean()?,
            alpha,
            beta,
            lambda_override: None,
            horizon,
            burn_in: 50.0,
            spacing: 1.0,
            seed,
            replication: 0,
            initial: None,
            record_events: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Horizon giving `samples` grid points after the burn-in.
    pub fn horizon_for(burn_in: f64, spacing: f64, samples: usize) -> f64 {
        burn_in + spacing * (samples as f64 - 1.0).max(0.0)
    }

    pub fn dim(&self) -> usize {
        self.pt.dim()
    }

    pub fn lambda_n(&self) -> f64 {
        self.lambda_override
            .unwrap_or_else(|| self.n as f64 - self.beta * (self.n as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("server count must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::BadAlpha(self.alpha));
        }
        let lambda = self.lambda_n();
        match self.lambda_override {
            Some(l) if l >= 0.0 && l.is_finite() => {}
            None if lambda > 0.0 && lambda.is_finite() => {}
            _ => return Err(Error::InvalidParameter(format!("arrival rate must be positive, got {lambda}"))),
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter("horizon must be finite and non-negative".into()));
        }
        if !(self.burn_in >= 0.0 && self.spacing > 0.0) {
            return Err(Error::InvalidParameter("burn_in must be >= 0 and spacing > 0".into()));
        }
        if let Some(init) = &self.initial {
            if init.len() != self.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "initial counts have length {}, model has {}",
                    init.len(),
                    self.dim()
                )));
            }
        }
        Ok(())
    }

    fn initial_counts(&self) -> Vec<u64> {
        self.initial.clone().unwrap_or_else(|| {
            let gamma = self.pt.gamma();
            gamma.iter().map(|g| (self.n as f64 * g).round() as u64).collect()
        })
    }
}

/// Customers in service by phase, the FCFS waiting line, and the per-phase
/// counts `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    servers: usize,
    /// Customer ids currently served in each phase.
    in_service: Vec<Vec<u64>>,
    /// `(customer id, initial phase)` in arrival order.
    waiting: VecDeque<(u64, usize)>,
    x: Vec<u64>,
    busy: usize,
    next_id: u64,
}

impl QueueState {
    pub fn empty(dim: usize, servers: usize) -> Self {
        Self {
            servers,
            in_service: vec![Vec::new(); dim],
            waiting: VecDeque::new(),
            x: vec![0; dim],
            busy: 0,
            next_id: 0,
        }
    }

    /// Places `counts[k]` customers in phase `k`, serving while servers are
    /// free and queueing the rest.
    pub fn with_counts(counts: &[u64], servers: usize) -> Self {
        let mut st = Self::empty(counts.len(), servers);
        for (k, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                st.admit(k);
            }
        }
        st
    }

    /// Per-phase counts `X`.
    pub fn counts(&self) -> &[u64] {
        &self.x
    }

    pub fn total(&self) -> u64 {
        self.x.iter().sum()
    }

    pub fn busy(&self) -> usize {
        self.busy
    }

    pub fn in_service(&self, k: usize) -> usize {
        self.in_service[k].len()
    }

    pub fn waiting(&self) -> usize {
        self.waiting.len()
    }

    /// Checks the bookkeeping identities.
    pub fn is_consistent(&self) -> bool {
        let served: usize = self.in_service.iter().map(Vec::len).sum();
        let total = self.total() as usize;
        served == self.busy && served == total.min(self.servers) && served + self.waiting.len() == total
    }

    /// Total event rate `lambda + sum_k v_k S_k + alpha W` in this state.
    pub fn total_rate(&self, lambda: f64, rates: &[f64], alpha: f64) -> f64 {
        let served: f64 = self.in_service.iter().zip(rates).map(|(s, v)| v * s.len() as f64).sum();
        lambda + served + alpha * self.waiting.len() as f64
    }

    fn admit(&mut self, phase: usize) {
        let id = self.next_id;
        self.next_id += 1;
        self.x[phase] += 1;
        if self.busy < self.servers {
            self.in_service[phase].push(id);
            self.busy += 1;
        } else {
            self.waiting.push_back((id, phase));
        }
    }
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueCounters {
    pub arrivals: u64,
    pub departures: u64,
    pub abandonments: u64,
    pub phase_transitions: u64,
    /// Customers present at the start.
    pub initial_in_system: u64,
    pub in_system_at_horizon: u64,
    pub events: u64,
    /// Largest number of busy servers seen after any event.
    pub max_busy: usize,
    /// Time average of `busy / n` over `[0, horizon]`.
    pub busy_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Transition,
    Departure,
    Abandonment,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::Transition => "transition",
            EventKind::Departure => "departure",
            EventKind::Abandonment => "abandonment",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    /// 1-based phase the event concerns (the new phase for transitions).
    pub phase: usize,
    pub total_in_system: u64,
}

/// Grid samples of `X` from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePath {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major counts, one row per grid time.
    pub counts: Vec<u64>,
    pub counters: QueueCounters,
    pub events: Option<Vec<EventRecord>>,
    pub seed: u64,
    pub replication: u64,
    pub burn_in: f64,
    pub spacing: f64,
}

impl QueuePath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, j: usize) -> &[u64] {
        &self.counts[j * self.dim..(j + 1) * self.dim]
    }

    /// Every `k`-th grid sample of the totals `e'X`.
    pub fn totals(&self, every: usize) -> Vec<u64> {
        (0..self.len()).step_by(every.max(1)).map(|j| self.row(j).iter().sum()).collect()
    }
}

/// Writes the event log as CSV `time,event_type,phase,total_in_system`.
pub fn write_event_log<W: Write>(events: &[EventRecord], header: Option<&str>, mut w: W) -> Result<()> {
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    writeln!(w, "time,event_type,phase,total_in_system")?;
    for e in events {
        writeln!(w, "{},{},{},{}", fmt_f64(e.time), e.kind.as_str(), e.phase, e.total_in_system)?;
    }
    Ok(())
}

/// Exponential holding time with the given total rate; infinite at rate 0.
pub fn holding_time(rng: &mut SimRng, total_rate: f64) -> f64 {
    if total_rate > 0.0 {
        rng.sample::<f64, _>(Exp1) / total_rate
    } else {
        f64::INFINITY
    }
}

fn pick_weighted(weights: &[f64], mut u: f64) -> usize {
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // Rounding can leave u just above the last weight.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Simulates the CTMC by the next-event method: the holding time is
/// exponential with the total rate, and the event is chosen in proportion to
/// its rate. `X` is recorded at `burn_in + j * spacing` up to the horizon.
pub fn simulate_queue(config: &QueueConfig) -> Result<QueuePath> {
    config.validate()?;
    let d = config.dim();
    let n = config.n;
    let lambda = config.lambda_n();
    let p: Vec<f64> = config.pt.p().iter().copied().collect();
    let v: Vec<f64> = config.pt.rates().iter().copied().collect();
    let routing = config.pt.routing();
    // Row k of the routing, plus the exit probability in the last slot.
    let route: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut row: Vec<f64> = (0..d).map(|j| routing[(k, j)]).collect();
            let exit = (1.0 - row.iter().sum::<f64>()).max(0.0);
            row.push(exit);
            row
        })
        .collect();

    let seed_value = seed::derive_seed(config.seed, SeedRole::Replication, config.replication);
    let mut rng = <SimRng as rand::SeedableRng>::seed_from_u64(seed_value);
    let mut st = QueueState::with_counts(&config.initial_counts(), n);
    let mut counters = QueueCounters {
        initial_in_system: st.total(),
        max_busy: st.busy,
        ..Default::default()
    };
    let mut events = config.record_events.then(Vec::new);
    let mut times = Vec::new();
    let mut counts = Vec::new();
    let mut next_grid = config.burn_in;
    let mut t = 0.0;
    let mut busy_integral = 0.0;
    let mut svc_rates = vec![0.0; d];

    loop {
        for k in 0..d {
            svc_rates[k] = v[k] * st.in_service[k].len() as f64;
        }
        let svc_total: f64 = svc_rates.iter().sum();
        let abandon_total = config.alpha * st.waiting.len() as f64;
        let total_rate = lambda + svc_total + abandon_total;
        let dt = holding_time(&mut rng, total_rate);
        let t_next = t + dt;
        while next_grid <= config.horizon && next_grid < t_next {
            times.push(next_grid);
            counts.extend_from_slice(&st.x);
            next_grid += config.spacing;
        }
        if t_next > config.horizon {
            busy_integral += st.busy as f64 * (config.horizon - t);
            break;
        }
        busy_integral += st.busy as f64 * dt;
        t = t_next;
        counters.events += 1;

        let u = rng.random::<f64>() * total_rate;
        let (kind, phase) = if u < lambda {
            let k = pick_weighted(&p, rng.random::<f64>());
            st.admit(k);
            counters.arrivals += 1;
            (EventKind::Arrival, k)
        } else if u < lambda + svc_total {
            let k = pick_weighted(&svc_rates, u - lambda);
            let slot = rng.random_range(0..st.in_service[k].len());
            let id = st.in_service[k].swap_remove(slot);
            let j = pick_weighted(&route[k], rng.random::<f64>());
            st.x[k] -= 1;
            if j < d {
                st.in_service[j].push(id);
                st.x[j] += 1;
                counters.phase_transitions += 1;
                (EventKind::Transition, j)
            } else {
                st.busy -= 1;
                counters.departures += 1;
                if let Some((wid, wphase)) = st.waiting.pop_front() {
                    // Already counted under its initial phase.
                    st.in_service[wphase].push(wid);
                    st.busy += 1;
                }
                (EventKind::Departure, k)
            }
        } else {
            let slot = rng.random_range(0..st.waiting.len());
            let (_, k) = st.waiting.remove(slot).expect("slot within queue");
            st.x[k] -= 1;
            counters.abandonments += 1;
            (EventKind::Abandonment, k)
        };
        if !t.is_finite() {
            return Err(Error::NonFinite { step: counters.events as usize });
        }
        debug_assert!(st.is_consistent());
        counters.max_busy = counters.max_busy.max(st.busy);
        if let Some(log) = events.as_mut() {
            log.push(EventRecord {
                time: t,
                kind,
                phase: phase + 1,
                total_in_system: st.total(),
            });
        }
    }
    counters.in_system_at_horizon = st.total();
    counters.busy_fraction = if config.horizon > 0.0 {
        busy_integral / (n as f64 * config.horizon)
    } else {
        st.busy as f64 / n as f64
    };
    Ok(QueuePath {
        dim: d,
        times,
        counts,
        counters,
        events,
        seed: seed_value,
        replication: config.replication,
        burn_in: config.burn_in,
        spacing: config.spacing,
    })
}

/// `(X - n gamma) / sqrt(n)` for every grid sample. The resulting set uses
/// the replication as chain id and the grid index as step index; its
/// provenance records the grid spacing in place of a step size.
pub fn diffusion_scale(path: &QueuePath, n: usize, gamma: &[f64]) -> Result<SampleSet> {
    if gamma.len() != path.dim {
        return Err(Error::DimensionMismatch(format!(
            "gamma has length {}, path has dimension {}",
            gamma.len(),
            path.dim
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let nf = n as f64;
    let sn = nf.sqrt();
    let points: Vec<f64> = path
        .counts
        .chunks_exact(path.dim)
        .flat_map(|row| row.iter().zip(gamma).map(move |(&x, g)| (x as f64 - nf * g) / sn))
        .collect();
    let mut set = SampleSet::from_rows(
        path.dim,
        points,
        Provenance {
            eta: path.spacing,
            burn_in: path.burn_in.ceil() as u64,
            thin: 1,
            seeds: vec![path.seed],
            generator: seed::GENERATOR.to_string(),
        },
    );
    set.chain_ids = vec![path.replication; path.len()];
    set.step_indices = (0..path.len() as u64).collect();
    Ok(set)
}

/// Inverse of [`diffusion_scale`] on raw row-major points: `n gamma + sqrt(n) y`.
pub fn diffusion_unscale(points: &[f64], n: usize, gamma: &[f64]) -> Result<Vec<f64>> {
    let d = gamma.len();
    if d == 0 || !points.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch("points do not match gamma".into()));
    }
    let nf = n as f64;
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, y)| nf * gamma[i % d] + nf.sqrt() * y)
        .collect())
}

/// Stationary law of the one-phase queue as a birth-death chain with birth
/// rate `lambda` and death rate `min(k, n) v + (k - n)^+ alpha`, truncated at
/// `k_max` (the tail beyond is reported as the missing mass `1 - sum`).
pub fn birth_death_stationary(lambda: f64, n: usize, v: f64, alpha: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && v > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidParameter("rates must be positive".into()));
    }
    // Work in logs; unnormalized weights first.
    let mut logw = Vec::with_capacity(k_max + 1);
    logw.push(0.0f64);
    for k in 1..=k_max {
        let death = k.min(n) as f64 * v + k.saturating_sub(n) as f64 * alpha;
        logw.push(logw[k - 1] + lambda.ln() - death.ln());
    }
    // Tail mass beyond k_max: the death rate keeps growing, so extend until
    // terms are negligible to get the normalizer right.
    let mut log_tail_terms = Vec::new();
    let mut last = logw[k_max];
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut k = k_max;
    loop {
        k += 1;
        let death = k.min(n) as f64 * v + k.saturating_sub(n) as f64 * alpha;
        last += lambda.ln() - death.ln();
        if last < top - 50.0 {
            break;
        }
        log_tail_terms.push(last);
    }
    let z: f64 = logw.iter().chain(&log_tail_terms).map(|l| (l - top).exp()).sum();
    Ok(logw.iter().map(|l| (l - top).exp() / z).collect())
}
