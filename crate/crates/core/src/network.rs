//! Decomposition of an acyclic network of signalized intersections.
//!
//! Every queue is analyzed in isolation; the coupling is carried entirely by
//! the arrival processes: the joint output law of a parent queue, shifted by
//! the travel time and the parent's green offset, becomes (part of) the input
//! mixture of the child. Independent parents superpose by pgf multiplication.
//! Cross-cycle dependence created by the shifts is deliberately ignored —
//! the child treats successive cycles as independent — which is the sole
//! approximation of the method; the simulator quantifies its error.
//!
//! All intersections share one cycle length. Each node's green period starts
//! `green_start` slots into the common cycle (0 for the main line, the
//! preceding red time for side roads), and departures take `travel` slots to
//! reach the child.

use crate::arrival::{ArrivalProcess, Scenario, SlotDistribution};
use crate::error::{Error, Result};
use crate::output::{output_pgf, OutputProcess};
use crate::solver::{solve_queue, QueueSolution, SignalPlan};

/// One signalized queue in the network.
#[derive(Debug, Clone)]
pub struct NetworkNode {
    pub name: String,
    pub plan: SignalPlan,
    /// Slot of the common cycle at which this node's green begins.
    pub green_start: usize,
    /// External arrivals in the node's local frame, if any.
    pub external: Option<ArrivalProcess>,
    /// Upstream queues whose output feeds this node.
    pub feeds: Vec<FeedEdge>,
}

/// Edge from a parent queue into a node.
#[derive(Debug, Clone, Copy)]
pub struct FeedEdge {
    /// Index of the parent node.
    pub from: usize,
    /// Travel time in slots from parent to child.
    pub travel: usize,
}

/// A directed acyclic network with a common cycle length.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub cycle: usize,
    pub nodes: Vec<NetworkNode>,
}

/// Per-queue results of the decomposition.
#[derive(Debug)]
pub struct SolvedNode {
    pub name: String,
    pub plan: SignalPlan,
    /// The derived input mixture actually fed to the solver.
    pub input: ArrivalProcess,
    pub solution: QueueSolution,
    pub output: OutputProcess,
    /// Occupation rate `E[Y] / g`.
    pub rho: f64,
}

/// Decomposition result for the whole network, in node order.
#[derive(Debug)]
pub struct NetworkSolution {
    pub nodes: Vec<SolvedNode>,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cycle == 0 {
            return Err(Error::InvalidParameter("cycle length must be >= 1".into()));
        }
        for node in &self.nodes {
            if node.plan.cycle() != self.cycle {
                return Err(Error::CycleMismatch {
                    left: self.cycle,
                    right: node.plan.cycle(),
                });
            }
            if node.green_start >= self.cycle {
                return Err(Error::InvalidParameter(format!(
                    "green offset {} of `{}` exceeds the cycle",
                    node.green_start, node.name
                )));
            }
            if let Some(ext) = &node.external {
                if ext.cycle_length() != self.cycle {
                    return Err(Error::CycleMismatch {
                        left: self.cycle,
                        right: ext.cycle_length(),
                    });
                }
            }
            for feed in &node.feeds {
                if feed.from >= self.nodes.len() {
                    return Err(Error::UnknownNode(format!("#{}", feed.from)));
                }
            }
        }
        Ok(())
    }

    /// Topological order of the node indices; fails on cycles.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for feed in &node.feeds {
                indegree[i] += 1;
                children[feed.from].push(i);
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &child in &children[i] {
                indegree[child] -= 1;
                if indegree[child] == 0 {
                    ready.push(child);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            return Err(Error::CyclicNetwork(self.nodes[stuck].name.clone()));
        }
        Ok(order)
    }
}

/// Place a parent's green-slot output into the child's cycle frame.
///
/// Parent green slot `k` (1-based) lands in child slot
/// `mod(k - 1 + offset + travel, c) + 1`; slots receiving nothing get a
/// zero-arrival law. The mixture structure is preserved component by
/// component.
pub fn embed_output(
    output: &OutputProcess,
    travel: usize,
    offset: usize,
    cycle: usize,
) -> Result<ArrivalProcess> {
    let g = output.green();
    if g > cycle {
        return Err(Error::InvalidParameter(format!(
            "cannot embed {g} green slots into a cycle of {cycle}"
        )));
    }
    let scenarios = output
        .mixture()
        .scenarios()
        .iter()
        .map(|comp| {
            let mut slots = vec![SlotDistribution::ZERO; cycle];
            for (k, slot) in comp.slots.iter().enumerate() {
                slots[(k + offset + travel) % cycle] = *slot;
            }
            Scenario {
                weight: comp.weight,
                slots,
            }
        })
        .collect();
    ArrivalProcess::new(cycle, scenarios)
}

/// Solve every queue of the network in topological order.
///
/// Each node's input is the superposition of its external arrivals and the
/// embedded outputs of its parents; `eps_weight` is the compaction threshold
/// applied after superposition (0 keeps the mixture lossless).
pub fn analyze_network(spec: &NetworkSpec, eps_weight: f64) -> Result<NetworkSolution> {
    spec.validate()?;
    let order = spec.topological_order()?;
    let mut solved: Vec<Option<SolvedNode>> = (0..spec.nodes.len()).map(|_| None).collect();

    for &idx in &order {
        let node = &spec.nodes[idx];
        let mut input: Option<ArrivalProcess> = node.external.clone();
        for feed in &node.feeds {
            let parent = solved[feed.from]
                .as_ref()
                .expect("parents precede children in topological order");
            let parent_start = spec.nodes[feed.from].green_start;
            let offset = (parent_start + spec.cycle - node.green_start) % spec.cycle;
            let embedded = embed_output(&parent.output, feed.travel, offset, spec.cycle)?;
            input = Some(match input {
                Some(acc) => acc.superpose(&embedded)?,
                None => embedded,
            });
        }
        let input = input
            .unwrap_or_else(|| ArrivalProcess::zero(spec.cycle))
            .compact(eps_weight);

        let solution = solve_queue(node.plan, input.clone()).map_err(|e| match e {
            Error::Unstable {
                mean_arrivals,
                green,
                rho,
                ..
            } => Error::Unstable {
                queue: node.name.clone(),
                mean_arrivals,
                green,
                rho,
            },
            other => other,
        })?;
        let output = output_pgf(&solution)?;
        let rho = solution.rho();
        solved[idx] = Some(SolvedNode {
            name: node.name.clone(),
            plan: node.plan,
            input,
            solution,
            output,
            rho,
        });
    }

    Ok(NetworkSolution {
        nodes: solved.into_iter().map(Option::unwrap).collect(),
    })
}

impl NetworkSolution {
    /// Human-readable dump of the derived input mixture of node `i`.
    pub fn derived_input_report(&self, i: usize) -> Result<String> {
        use std::fmt::Write;
        let node = self
            .nodes
            .get(i)
            .ok_or_else(|| Error::UnknownNode(format!("#{i}")))?;
        let mut out = String::new();
        writeln!(out, "input mixture of `{}` ({} scenarios)", node.name, node.input.scenarios().len()).unwrap();
        writeln!(out, "  rho = {:.6}, mean arrivals per cycle = {:.6}", node.rho, node.input.total_mean()).unwrap();
        for scen in node.input.scenarios() {
            let mut desc = String::new();
            for (slot_idx, slot) in scen.slots.iter().enumerate() {
                if slot.shift == 0 && slot.rate == 0.0 {
                    continue;
                }
                if !desc.is_empty() {
                    desc.push(' ');
                }
                if slot.rate == 0.0 {
                    write!(desc, "s{}:+{}", slot_idx + 1, slot.shift).unwrap();
                } else if slot.shift == 0 {
                    write!(desc, "s{}:P({:.4})", slot_idx + 1, slot.rate).unwrap();
                } else {
                    write!(desc, "s{}:+{}&P({:.4})", slot_idx + 1, slot.shift, slot.rate).unwrap();
                }
            }
            if desc.is_empty() {
                desc.push_str("(no arrivals)");
            }
            writeln!(out, "  w = {:.6}  {}", scen.weight, desc).unwrap();
        }
        Ok(out)
    }

    /// Mean queue length over an arbitrary slot per node.
    pub fn mean_xbar(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.solution.mean_xbar()).collect()
    }
}

/// Line network of `n` main-flow queues with optional side roads, all sharing
/// one cycle.
///
/// Main queue `i` (0-based) receives the output of main queue `i-1` and of the
/// side queue attached to intersection `i-1`, both delayed by `travel` slots.
/// Side queues get green `side_green_start` slots into the cycle and carry
/// their own external Poisson traffic. This is the layout of the reference
/// line-network experiments; arbitrary DAGs can be built directly from
/// [`NetworkSpec`].
pub fn line_network(
    n: usize,
    plan: SignalPlan,
    travel: usize,
    main_external: ArrivalProcess,
    side: Option<SideRoads>,
) -> Result<NetworkSpec> {
    let cycle = plan.cycle();
    let mut nodes = Vec::new();
    for i in 0..n {
        let mut feeds = Vec::new();
        if i > 0 {
            feeds.push(FeedEdge {
                from: nodes.len() - 1,
                travel,
            });
        }
        nodes.push(NetworkNode {
            name: format!("q{}", i + 1),
            plan,
            green_start: 0,
            external: if i == 0 { Some(main_external.clone()) } else { None },
            feeds,
        });
    }
    if let Some(side) = side {
        let side_plan = SignalPlan::new(side.green, cycle - side.green)?;
        // side road at intersection i feeds main queue i+1
        for i in 0..n.saturating_sub(1) {
            let side_idx = nodes.len();
            nodes.push(NetworkNode {
                name: format!("s{}", i + 1),
                plan: side_plan,
                green_start: side.green_start,
                external: Some(ArrivalProcess::poisson(cycle, side.rate)?),
                feeds: Vec::new(),
            });
            nodes[i + 1].feeds.push(FeedEdge {
                from: side_idx,
                travel,
            });
        }
    }
    Ok(NetworkSpec { cycle, nodes })
}

/// Side-road description for [`line_network`].
#[derive(Debug, Clone, Copy)]
pub struct SideRoads {
    pub green: usize,
    /// Red slots preceding the side green within the common cycle.
    pub green_start: usize,
    pub rate: f64,
}
