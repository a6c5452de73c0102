//! Forward pass bookkeeping shared by the adjoint methods: full storage or
//! uniform checkpoints, and state lookup for the reverse pass.

use std::cell::{Cell, RefCell};

use crate::error::{Error, Result};
use crate::problem::{node_tolerance, LossSpec, Node, OdeProblem, SolverStats};
use crate::solvers::{dense_eval_nodes, hermite, CheckpointStore, FieldSystem, Integrator, SolverConfig};

use super::quadrature::{gauss_legendre_rule, integrate_with};

pub(crate) enum Keep {
    All,
    Checkpoints(usize),
    Nothing,
}

pub(crate) struct ForwardPass {
    pub nodes: Option<Vec<Node<f64>>>,
    pub store: Option<CheckpointStore<f64>>,
    pub final_state: Vec<f64>,
    /// `u(tᵢ)` at every observation time.
    pub obs_states: Vec<Vec<f64>>,
    /// Accepted-step index of the node each observation sits on, if any.
    pub obs_nodes: Vec<Option<usize>>,
    pub steps: usize,
    pub loss: f64,
    pub stats: SolverStats,
}

pub(crate) fn field_system(problem: &OdeProblem) -> FieldSystem<'_, f64> {
    FieldSystem {
        field: problem.field.as_ref(),
        params: problem.params.clone(),
        n: problem.n(),
    }
}

#[allow(clippy::too_many_arguments)]
fn observe(
    times: &[f64],
    next: &mut usize,
    a: &Node<f64>,
    b: &Node<f64>,
    step_b: usize,
    tol: f64,
    fixed: bool,
    out: &mut ForwardPass,
) -> Result<()> {
    while *next < times.len() && times[*next] <= b.t + tol {
        let t = times[*next];
        let (u, node) = if (t - b.t).abs() <= tol {
            (b.u.clone(), Some(step_b))
        } else if (t - a.t).abs() <= tol {
            (a.u.clone(), Some(step_b.saturating_sub(1)))
        } else if fixed {
            return Err(Error::UnsupportedConfiguration(format!(
                "observation time {t} is not a node of the fixed-step grid"
            )));
        } else {
            (hermite(a, b, t), None)
        };
        out.obs_states.push(u);
        out.obs_nodes.push(node);
        *next += 1;
    }
    Ok(())
}

/// Runs the forward solve once, evaluating the loss on the fly.
///
/// Integrated losses are accumulated per step by Gauss–Legendre on the
/// Hermite interpolant.
pub(crate) fn forward_pass(
    problem: &OdeProblem,
    loss: &LossSpec,
    cfg: &SolverConfig,
    keep: Keep,
    quadrature_order: usize,
) -> Result<ForwardPass> {
    let sys = field_system(problem);
    let (t0, t1) = problem.tspan;
    let tol = node_tolerance(problem.tspan);
    let fixed = !cfg.method.is_adaptive();
    let mut it = Integrator::new(&sys, cfg, t0, t1, problem.u0.clone())?;
    let mut out = ForwardPass {
        nodes: matches!(keep, Keep::All).then(Vec::new),
        store: match keep {
            Keep::Checkpoints(k) => Some(CheckpointStore::new(problem.tspan, k)?),
            _ => None,
        },
        final_state: Vec::new(),
        obs_states: Vec::new(),
        obs_nodes: Vec::new(),
        steps: 0,
        loss: 0.0,
        stats: SolverStats::default(),
    };
    let rule = gauss_legendre_rule(quadrature_order)?;
    let times = loss.observation_times().to_vec();
    let mut next = 0;
    let mut prev = it.state().node();
    if let Some(s) = out.store.as_mut() {
        s.offer(it.state());
    }
    if let Some(n) = out.nodes.as_mut() {
        n.push(prev.clone());
    }
    observe(&times, &mut next, &prev, &prev, 0, tol, fixed, &mut out)?;
    while !it.is_done() {
        it.advance()?;
        let node = it.state().node();
        if let Some(s) = out.store.as_mut() {
            s.offer(it.state());
        }
        observe(&times, &mut next, &prev, &node, it.state().step, tol, fixed, &mut out)?;
        if let LossSpec::Integrated { integrand } = loss {
            let v = integrate_with(
                &rule,
                |t| {
                    let u = hermite(&prev, &node, t);
                    Ok(vec![integrand.eval_f64(t, &u, &problem.params)])
                },
                prev.t,
                node.t,
            )?;
            out.loss += v[0];
        }
        if let Some(n) = out.nodes.as_mut() {
            n.push(node.clone());
        }
        prev = node;
    }
    for (i, u) in out.obs_states.iter().enumerate() {
        out.loss += loss.observation_term(i, u);
    }
    out.final_state = prev.u;
    out.steps = it.state().step;
    out.stats = it.stats;
    Ok(out)
}

/// Forward states for the reverse pass, from full storage or rebuilt
/// segment by segment from checkpoints.
pub(crate) struct StateSource<'a> {
    sys: FieldSystem<'a, f64>,
    cfg: SolverConfig,
    tspan: (f64, f64),
    nodes: Option<Vec<Node<f64>>>,
    store: Option<CheckpointStore<f64>>,
    /// Up to two rebuilt segments; reverse steps may straddle a boundary.
    cache: RefCell<Vec<(usize, Vec<Node<f64>>)>>,
    pub recomputed_steps: Cell<usize>,
    pub rhs_evaluations: Cell<usize>,
    peak: Cell<usize>,
}

impl<'a> StateSource<'a> {
    pub fn new(problem: &'a OdeProblem, cfg: &SolverConfig, fwd: &mut ForwardPass) -> Self {
        let nodes = fwd.nodes.take();
        let store = fwd.store.take();
        let base = nodes.as_ref().map_or(0, Vec::len) + store.as_ref().map_or(0, |s| s.snapshots.len());
        Self {
            sys: field_system(problem),
            cfg: cfg.clone(),
            tspan: problem.tspan,
            nodes,
            store,
            cache: RefCell::new(Vec::new()),
            recomputed_steps: Cell::new(0),
            rhs_evaluations: Cell::new(0),
            peak: Cell::new(base),
        }
    }

    pub fn peak_stored_states(&self) -> usize {
        self.peak.get()
    }

    pub fn segments(&self) -> usize {
        match &self.store {
            Some(s) => s.segments(),
            None => 1,
        }
    }

    /// Replays segment `i` from its snapshot.
    pub fn rebuild_segment(&self, i: usize) -> Result<Vec<Node<f64>>> {
        let store = match &self.store {
            Some(s) => s,
            None => return Ok(self.nodes.clone().unwrap_or_default()),
        };
        let (start, end) = (&store.snapshots[i], &store.snapshots[i + 1]);
        let mut it = Integrator::resume(&self.sys, &self.cfg, self.tspan.0, self.tspan.1, start.clone());
        let mut nodes = vec![start.node()];
        while it.state().step < end.step {
            it.advance()?;
            nodes.push(it.state().node());
        }
        self.recomputed_steps
            .set(self.recomputed_steps.get() + end.step - start.step);
        self.rhs_evaluations
            .set(self.rhs_evaluations.get() + it.stats.rhs_evaluations);
        Ok(nodes)
    }

    fn segment_of(store: &CheckpointStore<f64>, t: f64) -> usize {
        let k = store.snapshots.partition_point(|s| s.t <= t);
        k.saturating_sub(1).min(store.segments().saturating_sub(1))
    }

    /// `u(t)` by Hermite interpolation of the stored or rebuilt nodes.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let t = t.clamp(self.tspan.0, self.tspan.1);
        if let Some(nodes) = &self.nodes {
            return dense_eval_nodes(nodes, t);
        }
        let store = self.store.as_ref().expect("checkpoint store");
        let seg = Self::segment_of(store, t);
        let mut cache = self.cache.borrow_mut();
        if let Some((_, nodes)) = cache.iter().find(|(s, _)| *s == seg) {
            return dense_eval_nodes(nodes, t);
        }
        let nodes = self.rebuild_segment(seg)?;
        let u = dense_eval_nodes(&nodes, t)?;
        if cache.len() == 2 {
            cache.remove(0);
        }
        cache.push((seg, nodes));
        let held: usize = cache.iter().map(|(_, n)| n.len()).sum();
        self.peak.set(self.peak.get().max(store.snapshots.len() + held));
        Ok(u)
    }

    /// Records `extra` rebuilt states held alongside the checkpoints.
    pub fn note_held(&self, extra: usize) {
        if let Some(store) = &self.store {
            self.peak.set(self.peak.get().max(store.snapshots.len() + extra));
        }
    }
}
