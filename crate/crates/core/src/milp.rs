//! Small mixed-integer linear programming engine: best-bound branch and
//! bound with plunging on top of `minilp` LP relaxations. Child nodes are
//! re-optimized from the parent basis with the dual simplex.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use minilp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for row feasibility of integral candidates.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
}

impl From<minilp::Error> for MilpError {
    fn from(e: minilp::Error) -> Self {
        match e {
            minilp::Error::Infeasible => MilpError::Infeasible,
            minilp::Error::Unbounded => MilpError::Unbounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    Le,
    Ge,
    Eq,
}

impl RowOp {
    fn to_minilp(self) -> ComparisonOp {
        match self {
            RowOp::Le => ComparisonOp::Le,
            RowOp::Ge => ComparisonOp::Ge,
            RowOp::Eq => ComparisonOp::Eq,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            RowOp::Le => "<=",
            RowOp::Ge => ">=",
            RowOp::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub op: RowOp,
    pub rhs: f64,
}

/// Minimization problem with bounded, optionally integer variables.
/// Integer variables with a smaller `priority` are branched on first.
#[derive(Debug, Clone, Default)]
pub struct MilpProblem {
    names: Vec<String>,
    obj: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    integer: Vec<bool>,
    priority: Vec<u8>,
    rows: Vec<Row>,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, obj: f64, lo: f64, hi: f64) -> usize {
        self.push_var(name.into(), obj, lo, hi, false, u8::MAX)
    }

    pub fn add_integer(
        &mut self,
        name: impl Into<String>,
        obj: f64,
        lo: f64,
        hi: f64,
        priority: u8,
    ) -> usize {
        self.push_var(name.into(), obj, lo, hi, true, priority)
    }

    fn push_var(
        &mut self,
        name: String,
        obj: f64,
        lo: f64,
        hi: f64,
        integer: bool,
        priority: u8,
    ) -> usize {
        self.names.push(name);
        self.obj.push(obj);
        self.lo.push(lo);
        self.hi.push(hi);
        self.integer.push(integer);
        self.priority.push(priority);
        self.obj.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        op: RowOp,
        rhs: f64,
    ) {
        self.rows.push(Row {
            name: name.into(),
            terms,
            op,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, &v) in x.iter().enumerate() {
            worst = worst.max(self.lo[i] - v).max(v - self.hi[i]);
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(j, c)| c * x[j]).sum();
            let gap = match row.op {
                RowOp::Le => lhs - row.rhs,
                RowOp::Ge => row.rhs - lhs,
                RowOp::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    fn to_minilp(&self) -> (Problem, Vec<Variable>) {
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<Variable> = (0..self.num_vars())
            .map(|i| p.add_var(self.obj[i], (self.lo[i], self.hi[i])))
            .collect();
        for row in &self.rows {
            if row.terms.is_empty() {
                continue;
            }
            let terms: Vec<(Variable, f64)> =
                row.terms.iter().map(|&(j, c)| (vars[j], c)).collect();
            p.add_constraint(terms.as_slice(), row.op.to_minilp(), row.rhs);
        }
        (p, vars)
    }

    /// Solves the LP relaxation, returning objective and values.
    pub fn solve_relaxation(&self) -> Result<(f64, Vec<f64>), MilpError> {
        for row in &self.rows {
            if row.terms.is_empty() && !empty_row_ok(row) {
                return Err(MilpError::Infeasible);
            }
        }
        let (p, _) = self.to_minilp();
        let sol = p.solve()?;
        Ok((sol.objective(), values(&sol)))
    }

    /// CPLEX LP-format text of the problem.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ generated by hubcap\nMinimize\n obj:");
        let mut first = true;
        for (i, &c) in self.obj.iter().enumerate() {
            if c != 0.0 {
                write_term(&mut out, c, &self.names[i], first);
                first = false;
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.name);
            if row.terms.is_empty() {
                out.push_str(" 0");
            }
            for (k, &(j, c)) in row.terms.iter().enumerate() {
                write_term(&mut out, c, &self.names[j], k == 0);
            }
            let _ = writeln!(out, " {} {}", row.op.symbol(), fmt_num(row.rhs));
        }
        out.push_str("Bounds\n");
        for i in 0..self.num_vars() {
            let hi = if self.hi[i].is_finite() {
                fmt_num(self.hi[i])
            } else {
                "+inf".to_string()
            };
            let _ = writeln!(
                out,
                " {} <= {} <= {}",
                fmt_num(self.lo[i]),
                self.names[i],
                hi
            );
        }
        let general: Vec<&str> = (0..self.num_vars())
            .filter(|&i| self.integer[i])
            .map(|i| self.names[i].as_str())
            .collect();
        if !general.is_empty() {
            out.push_str("General\n");
            for chunk in general.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

fn empty_row_ok(row: &Row) -> bool {
    match row.op {
        RowOp::Le => 0.0 <= row.rhs + FEAS_TOL,
        RowOp::Ge => 0.0 >= row.rhs - FEAS_TOL,
        RowOp::Eq => row.rhs.abs() <= FEAS_TOL,
    }
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn write_term(out: &mut String, c: f64, name: &str, first: bool) {
    match (c < 0.0, first) {
        (true, _) => out.push_str(" -"),
        (false, false) => out.push_str(" +"),
        (false, true) => {}
    }
    let mag = c.abs();
    if mag == 1.0 {
        let _ = write!(out, " {name}");
    } else {
        let _ = write!(out, " {} {name}", fmt_num(mag));
    }
}

fn values(sol: &Solution) -> Vec<f64> {
    sol.iter().map(|(_, &v)| v).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    /// Incumbent proven within the gap tolerance.
    Optimal,
    /// Time limit hit; the best incumbent (if any) is returned.
    TimedOut,
    /// Node limit hit; the best incumbent (if any) is returned.
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    /// Integral incumbent, if one was found.
    pub values: Option<Vec<f64>>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub root_bound: f64,
    /// Global lower bound after each improvement; nondecreasing.
    pub bound_history: Vec<f64>,
}

/// Relative gap used throughout: `(incumbent - bound) / max(1, |incumbent|)`.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

type Heuristic<'a> = Box<dyn Fn(&[f64]) -> Option<Vec<f64>> + 'a>;
type TieKey<'a> = Box<dyn Fn(&[f64]) -> Vec<i64> + 'a>;

/// Branch-and-bound configuration and hooks.
pub struct BranchAndBound<'a> {
    pub gap_tol: f64,
    pub int_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// LP states kept in memory for open nodes; others are rebuilt from the root.
    pub max_stored_states: usize,
    root_heuristic: Option<Heuristic<'a>>,
    tie_key: Option<TieKey<'a>>,
}

impl std::fmt::Debug for BranchAndBound<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BranchAndBound")
            .field("gap_tol", &self.gap_tol)
            .field("int_tol", &self.int_tol)
            .field("time_limit", &self.time_limit)
            .field("node_limit", &self.node_limit)
            .finish()
    }
}

impl Default for BranchAndBound<'_> {
    fn default() -> Self {
        BranchAndBound {
            gap_tol: 1e-6,
            int_tol: 1e-6,
            time_limit: None,
            node_limit: None,
            max_stored_states: 256,
            root_heuristic: None,
            tie_key: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Decision {
    Le(usize, f64),
    Ge(usize, f64),
}

struct Node {
    bound: f64,
    seq: usize,
    decisions: Vec<Decision>,
    state: Option<Solution>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    values: Vec<f64>,
    objective: f64,
    key: Vec<i64>,
}

impl<'a> BranchAndBound<'a> {
    pub fn new(gap_tol: f64, time_limit: Option<Duration>) -> Self {
        BranchAndBound {
            gap_tol,
            time_limit,
            ..Default::default()
        }
    }

    /// Hook that turns the root LP solution into a feasible integral point.
    pub fn with_root_heuristic(mut self, f: impl Fn(&[f64]) -> Option<Vec<f64>> + 'a) -> Self {
        self.root_heuristic = Some(Box::new(f));
        self
    }

    /// Among incumbents with equal objective, keep the lexicographically
    /// smallest key.
    pub fn with_tie_key(mut self, f: impl Fn(&[f64]) -> Vec<i64> + 'a) -> Self {
        self.tie_key = Some(Box::new(f));
        self
    }

    pub fn solve(&self, problem: &MilpProblem) -> Result<MilpOutcome, MilpError> {
        let start = Instant::now();
        for row in &problem.rows {
            if row.terms.is_empty() && !empty_row_ok(row) {
                return Err(MilpError::Infeasible);
            }
        }
        let (lp, vars) = problem.to_minilp();
        let root = lp.solve()?;
        let root_bound = root.objective();

        let mut search = Search {
            bb: self,
            problem,
            vars: &vars,
            root: &root,
            incumbent: None,
            heap: BinaryHeap::new(),
            seq: 0,
            stored: 0,
            nodes: 0,
            bound_history: vec![root_bound],
        };

        if let Some(h) = &self.root_heuristic {
            if let Some(x) = h(&values(&root)) {
                search.offer(x);
            }
        }

        let mut next = Some(Node {
            bound: root_bound,
            seq: 0,
            decisions: Vec::new(),
            state: Some(root.clone()),
        });
        let mut status = MilpStatus::Optimal;
        loop {
            let node = match next.take() {
                Some(n) => n,
                None => match search.heap.pop() {
                    Some(n) => {
                        if n.state.is_some() {
                            search.stored -= 1;
                        }
                        n
                    }
                    None => break,
                },
            };
            if search.prunable(node.bound) {
                continue;
            }
            // global bound covers the node in hand plus everything queued
            let open_min = search
                .heap
                .peek()
                .map_or(node.bound, |n| n.bound.min(node.bound));
            search.record_bound(open_min);
            if search.gap_closed(open_min) {
                break;
            }
            if self.time_limit.is_some_and(|t| start.elapsed() >= t) {
                search.heap.push(node);
                status = MilpStatus::TimedOut;
                break;
            }
            if self.node_limit.is_some_and(|n| search.nodes >= n) {
                search.heap.push(node);
                status = MilpStatus::NodeLimit;
                break;
            }
            search.nodes += 1;
            next = search.expand(node);
        }

        let bound = match (&search.incumbent, search.heap.peek()) {
            (Some(inc), None) if status == MilpStatus::Optimal => inc.objective,
            (_, Some(n)) => n.bound.min(
                search
                    .incumbent
                    .as_ref()
                    .map_or(f64::INFINITY, |i| i.objective),
            ),
            (Some(inc), None) => inc.objective,
            (None, None) => f64::INFINITY,
        };
        let bound = bound.max(*search.bound_history.last().unwrap_or(&f64::NEG_INFINITY));
        let (values, objective) = match search.incumbent {
            Some(inc) => (Some(inc.values), inc.objective),
            None if status == MilpStatus::Optimal => return Err(MilpError::Infeasible),
            None => (None, f64::INFINITY),
        };
        let bound = bound.min(objective);
        let mut bound_history = search.bound_history;
        if bound_history.last().is_some_and(|&b| bound > b) {
            bound_history.push(bound);
        }
        Ok(MilpOutcome {
            status,
            gap: relative_gap(objective, bound),
            values,
            objective,
            bound,
            nodes: search.nodes,
            root_bound,
            bound_history,
        })
    }
}

struct Search<'s, 'a> {
    bb: &'s BranchAndBound<'a>,
    problem: &'s MilpProblem,
    vars: &'s [Variable],
    root: &'s Solution,
    incumbent: Option<Incumbent>,
    heap: BinaryHeap<Node>,
    seq: usize,
    stored: usize,
    nodes: usize,
    bound_history: Vec<f64>,
}

impl Search<'_, '_> {
    fn prune_tol(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(0.0, |i| self.bb.gap_tol * i.objective.abs().max(1.0))
    }

    fn prunable(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some(inc) => bound >= inc.objective - self.prune_tol(),
            None => false,
        }
    }

    fn gap_closed(&self, open_min: f64) -> bool {
        self.incumbent
            .as_ref()
            .is_some_and(|inc| relative_gap(inc.objective, open_min) <= self.bb.gap_tol)
    }

    fn record_bound(&mut self, b: f64) {
        let last = *self.bound_history.last().unwrap_or(&f64::NEG_INFINITY);
        if b > last + 1e-12 * last.abs().max(1.0) {
            self.bound_history.push(b);
        }
    }

    /// Rounds integer variables and keeps the point if it is feasible and
    /// improves on (or ties and beats the key of) the incumbent.
    fn offer(&mut self, mut x: Vec<f64>) {
        for (i, v) in x.iter_mut().enumerate() {
            if self.problem.integer[i] {
                *v = v.round();
            }
            *v = v.clamp(self.problem.lo[i], self.problem.hi[i]);
        }
        if self.problem.max_violation(&x) > FEAS_TOL {
            return;
        }
        let objective = self.problem.objective_value(&x);
        let key = self.bb.tie_key.as_ref().map_or_else(Vec::new, |k| k(&x));
        let better = match &self.incumbent {
            None => true,
            Some(inc) => {
                let tie = 1e-9 * inc.objective.abs().max(1.0);
                objective < inc.objective - tie
                    || (objective <= inc.objective + tie && key < inc.key)
            }
        };
        if better {
            self.incumbent = Some(Incumbent {
                values: x,
                objective,
                key,
            });
        }
    }

    fn restore(&self, node: &mut Node) -> Option<Solution> {
        if let Some(s) = node.state.take() {
            return Some(s);
        }
        let mut sol = self.root.clone();
        for &d in &node.decisions {
            sol = self.apply(sol, d, &node.decisions).ok()?;
        }
        Some(sol)
    }

    fn current_bounds(&self, var: usize, decisions: &[Decision]) -> (f64, f64) {
        let (mut lo, mut hi) = (self.problem.lo[var], self.problem.hi[var]);
        for d in decisions {
            match *d {
                Decision::Le(v, b) if v == var => hi = hi.min(b),
                Decision::Ge(v, b) if v == var => lo = lo.max(b),
                _ => {}
            }
        }
        (lo, hi)
    }

    fn apply(
        &self,
        sol: Solution,
        d: Decision,
        decisions: &[Decision],
    ) -> Result<Solution, minilp::Error> {
        let (var, value, op) = match d {
            Decision::Le(v, b) => (v, b, ComparisonOp::Le),
            Decision::Ge(v, b) => (v, b, ComparisonOp::Ge),
        };
        let (lo, hi) = self.current_bounds(var, decisions);
        if lo == hi {
            sol.fix_var(self.vars[var], lo)
        } else {
            sol.add_constraint(&[(self.vars[var], 1.0)], op, value)
        }
    }

    fn pick_branch(&self, x: &[f64]) -> Option<usize> {
        let tol = self.bb.int_tol;
        let mut best: Option<(u8, f64, usize)> = None;
        for (i, &v) in x.iter().enumerate() {
            if !self.problem.integer[i] {
                continue;
            }
            let frac = v - v.floor();
            if frac <= tol || frac >= 1.0 - tol {
                continue;
            }
            let closeness = (frac - 0.5).abs();
            let cand = (self.problem.priority[i], closeness, i);
            let take = match best {
                None => true,
                Some((p, c, _)) => cand.0 < p || (cand.0 == p && closeness < c - 1e-12),
            };
            if take {
                best = Some(cand);
            }
        }
        best.map(|(_, _, i)| i)
    }

    /// Branches on `node`; returns the child to plunge into next, if any.
    fn expand(&mut self, mut node: Node) -> Option<Node> {
        let sol = self.restore(&mut node)?;
        let x = values(&sol);
        let Some(var) = self.pick_branch(&x) else {
            self.offer(x);
            return None;
        };
        let v = x[var];
        let down = Decision::Le(var, v.floor());
        let up = Decision::Ge(var, v.ceil());
        // explore the nearer rounding first
        let order = if v - v.floor() <= 0.5 {
            [down, up]
        } else {
            [up, down]
        };

        let mut children = Vec::with_capacity(2);
        for d in order {
            let mut decisions = node.decisions.clone();
            decisions.push(d);
            let Ok(child) = self.apply(sol.clone(), d, &decisions) else {
                continue;
            };
            let bound = child.objective().max(node.bound);
            if self.prunable(bound) {
                continue;
            }
            let cx = values(&child);
            if self.pick_branch(&cx).is_none() {
                // integral leaf: no need to queue it
                self.offer(cx);
                continue;
            }
            self.seq += 1;
            children.push(Node {
                bound,
                seq: self.seq,
                decisions,
                state: Some(child),
            });
        }
        drop(sol);
        let mut plunge = None;
        for child in children {
            if plunge.is_none() {
                plunge = Some(child);
                continue;
            }
            self.push(child);
        }
        plunge
    }

    fn push(&mut self, mut node: Node) {
        if self.stored >= self.bb.max_stored_states {
            node.state = None;
        } else if node.state.is_some() {
            self.stored += 1;
        }
        self.heap.push(node);
    }
}
