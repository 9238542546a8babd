//! JSON configuration schema and its translation into core model objects.
//!
//! Rates and weights are decimal strings (optionally `p/q` fractions) so that
//! configs stay exact and language-neutral; plain JSON numbers are rejected by
//! the schema on purpose.

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use fctl_core::network::{FeedEdge, NetworkNode, NetworkSpec};
use fctl_core::output::output_pgf;
use fctl_core::solver::{solve_queue, SignalPlan};
use fctl_core::{ArrivalProcess, Scenario, SlotDistribution};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub name: String,
    pub kind: Kind,
    // single-queue fields
    #[serde(default)]
    pub plan: Option<PlanSpec>,
    #[serde(default)]
    pub arrivals: Option<ArrivalSpec>,
    // network fields
    #[serde(default)]
    pub cycle_length: Option<usize>,
    #[serde(default)]
    pub travel_time: Option<usize>,
    #[serde(default)]
    pub default_plan: Option<PlanSpec>,
    #[serde(default)]
    pub intersections: Option<Vec<IntersectionSpec>>,
    // common options
    #[serde(default)]
    pub epsilon_weight: Option<String>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub simulation: Option<SimSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Single,
    Network,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub green: usize,
    pub red: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub cycles: Option<u64>,
    #[serde(default)]
    pub warmup_cycles: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub replications: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionSpec {
    pub name: String,
    #[serde(default)]
    pub plan: Option<PlanSpec>,
    #[serde(default)]
    pub arrivals: Option<ArrivalSpec>,
    #[serde(default)]
    pub side: Option<SideSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideSpec {
    pub name: String,
    pub green: usize,
    /// Red slots preceding the side green within the shared cycle.
    pub offset: usize,
    pub arrivals: ArrivalSpec,
}

/// An arrival process; exactly one construction form per node.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSpec {
    /// I.i.d. Poisson arrivals per slot.
    Poisson { rate: String },
    /// Explicit scenario mixture.
    Scenarios(Vec<ScenarioSpec>),
    /// Independent superposition of other processes.
    Superpose(Vec<ArrivalSpec>),
    /// Joint output of an isolated Poisson-fed queue with `green` green
    /// slots, embedded so its first output slot lands at `start_slot`
    /// (1-based).
    FctlOutput {
        rate: String,
        green: usize,
        start_slot: usize,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub weight: String,
    pub slots: Vec<SlotSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    #[serde(default)]
    pub shift: u32,
    #[serde(default)]
    pub rate: Option<String>,
}

/// Parse a decimal string or `p/q` fraction of decimals.
pub fn parse_number(text: &str) -> Result<f64> {
    let value = if let Some((num, den)) = text.split_once('/') {
        let n: f64 = num.trim().parse().with_context(|| format!("bad numerator in `{text}`"))?;
        let d: f64 = den.trim().parse().with_context(|| format!("bad denominator in `{text}`"))?;
        if d == 0.0 {
            bail!("zero denominator in `{text}`");
        }
        n / d
    } else {
        text.trim().parse().with_context(|| format!("bad number `{text}`"))?
    };
    if !value.is_finite() {
        bail!("non-finite number `{text}`");
    }
    Ok(value)
}

impl PlanSpec {
    pub fn build(&self) -> Result<SignalPlan> {
        Ok(SignalPlan::new(self.green, self.red)?)
    }
}

impl ArrivalSpec {
    /// Realize the process on a cycle of `c` slots.
    pub fn build(&self, cycle: usize) -> Result<ArrivalProcess> {
        match self {
            ArrivalSpec::Poisson { rate } => {
                let rate = parse_number(rate)?;
                Ok(ArrivalProcess::poisson(cycle, rate)?)
            }
            ArrivalSpec::Scenarios(list) => {
                if list.is_empty() {
                    bail!("scenario list must not be empty");
                }
                let mut scenarios = Vec::with_capacity(list.len());
                for (i, spec) in list.iter().enumerate() {
                    if spec.slots.len() != cycle {
                        bail!(
                            "scenario {i}: {} slots, expected the cycle length {cycle}",
                            spec.slots.len()
                        );
                    }
                    let weight = parse_number(&spec.weight)
                        .with_context(|| format!("scenario {i} weight"))?;
                    let slots = spec
                        .slots
                        .iter()
                        .map(|s| {
                            let rate = s.rate.as_deref().map(parse_number).transpose()?.unwrap_or(0.0);
                            Ok(SlotDistribution::new(s.shift, rate)?)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    scenarios.push(Scenario::new(weight, slots)?);
                }
                Ok(ArrivalProcess::new(cycle, scenarios)?)
            }
            ArrivalSpec::Superpose(parts) => {
                if parts.is_empty() {
                    bail!("superpose needs at least one component");
                }
                let mut acc: Option<ArrivalProcess> = None;
                for part in parts {
                    let p = part.build(cycle)?;
                    acc = Some(match acc {
                        Some(a) => a.superpose(&p)?,
                        None => p,
                    });
                }
                Ok(acc.unwrap())
            }
            ArrivalSpec::FctlOutput {
                rate,
                green,
                start_slot,
            } => {
                let rate = parse_number(rate)?;
                if *green == 0 || *green > cycle {
                    bail!("fctl_output green {green} out of range for cycle {cycle}");
                }
                if *start_slot == 0 || *start_slot > cycle {
                    bail!("fctl_output start_slot {start_slot} must be in 1..={cycle}");
                }
                let plan = SignalPlan::new(*green, cycle - *green)?;
                let upstream = solve_queue(plan, ArrivalProcess::poisson(cycle, rate)?)?;
                let output = output_pgf(&upstream)?;
                Ok(fctl_core::network::embed_output(
                    &output,
                    0,
                    start_slot - 1,
                    cycle,
                )?)
            }
        }
    }
}

/// A parsed run: either one queue or a network spec, plus run defaults.
pub struct ParsedConfig {
    pub name: String,
    pub target: Target,
    pub epsilon_weight: f64,
    pub levels: usize,
    pub sim: fctl_core::SimConfig,
}

pub enum Target {
    Single {
        plan: SignalPlan,
        arrivals: ArrivalProcess,
    },
    Network(NetworkSpec),
}

pub fn load(path: &std::path::Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let file: ConfigFile = serde_json::from_str(&text)
        .with_context(|| format!("schema violation in {}", path.display()))?;
    if file.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported schema_version {} (this build reads {})",
            file.schema_version,
            SCHEMA_VERSION
        );
    }
    let epsilon_weight = file
        .epsilon_weight
        .as_deref()
        .map(parse_number)
        .transpose()?
        .unwrap_or(0.0);
    if epsilon_weight < 0.0 {
        bail!("epsilon_weight must be nonnegative");
    }
    let levels = file.levels.unwrap_or(6);

    let defaults = fctl_core::SimConfig::default();
    let sim = match &file.simulation {
        Some(s) => fctl_core::SimConfig {
            cycles: s.cycles.unwrap_or(defaults.cycles),
            warmup_cycles: s.warmup_cycles.unwrap_or(defaults.warmup_cycles),
            seed: s.seed.unwrap_or(defaults.seed),
            replications: s.replications.unwrap_or(defaults.replications),
        },
        None => defaults,
    };

    let target = match file.kind {
        Kind::Single => {
            for (field, present) in [
                ("cycle_length", file.cycle_length.is_some()),
                ("travel_time", file.travel_time.is_some()),
                ("default_plan", file.default_plan.is_some()),
                ("intersections", file.intersections.is_some()),
            ] {
                if present {
                    bail!("field `{field}` is only valid for kind = network");
                }
            }
            let plan = file
                .plan
                .as_ref()
                .ok_or_else(|| anyhow!("kind = single requires `plan`"))?
                .build()?;
            let arrivals = file
                .arrivals
                .as_ref()
                .ok_or_else(|| anyhow!("kind = single requires `arrivals`"))?
                .build(plan.cycle())?;
            Target::Single { plan, arrivals }
        }
        Kind::Network => {
            for (field, present) in [
                ("plan", file.plan.is_some()),
                ("arrivals", file.arrivals.is_some()),
            ] {
                if present {
                    bail!("field `{field}` is only valid for kind = single");
                }
            }
            let cycle_length = file
                .cycle_length
                .ok_or_else(|| anyhow!("kind = network requires `cycle_length`"))?;
            let travel_time = file
                .travel_time
                .ok_or_else(|| anyhow!("kind = network requires `travel_time`"))?;
            let default_plan = file
                .default_plan
                .as_ref()
                .ok_or_else(|| anyhow!("kind = network requires `default_plan`"))?;
            let intersections = file
                .intersections
                .as_ref()
                .ok_or_else(|| anyhow!("kind = network requires `intersections`"))?;
            if intersections.is_empty() {
                bail!("network needs at least one intersection");
            }
            let c = cycle_length;
            let mut nodes: Vec<NetworkNode> = Vec::new();
            let mut prev_main: Option<usize> = None;
            let mut pending_side: Option<usize> = None;
            for spec in intersections {
                let plan = spec.plan.as_ref().unwrap_or(default_plan).build()?;
                if plan.cycle() != c {
                    bail!(
                        "intersection `{}`: plan cycle {} differs from network cycle {c}",
                        spec.name,
                        plan.cycle()
                    );
                }
                let mut feeds = Vec::new();
                if let Some(parent) = prev_main {
                    feeds.push(FeedEdge {
                        from: parent,
                        travel: travel_time,
                    });
                }
                if let Some(side_idx) = pending_side.take() {
                    feeds.push(FeedEdge {
                        from: side_idx,
                        travel: travel_time,
                    });
                }
                let external = spec
                    .arrivals
                    .as_ref()
                    .map(|a| a.build(c))
                    .transpose()?;
                if external.is_none() && feeds.is_empty() {
                    bail!(
                        "intersection `{}` has neither external arrivals nor an upstream feed",
                        spec.name
                    );
                }
                let main_idx = nodes.len();
                nodes.push(NetworkNode {
                    name: spec.name.clone(),
                    plan,
                    green_start: 0,
                    external,
                    feeds,
                });
                prev_main = Some(main_idx);

                if let Some(side) = &spec.side {
                    if side.green == 0 || side.green >= c {
                        bail!("side `{}`: green {} out of range", side.name, side.green);
                    }
                    if side.offset >= c {
                        bail!("side `{}`: offset {} out of range", side.name, side.offset);
                    }
                    let side_plan = SignalPlan::new(side.green, c - side.green)?;
                    let side_idx = nodes.len();
                    nodes.push(NetworkNode {
                        name: side.name.clone(),
                        plan: side_plan,
                        green_start: side.offset,
                        external: Some(side.arrivals.build(c)?),
                        feeds: Vec::new(),
                    });
                    pending_side = Some(side_idx);
                }
            }
            if pending_side.is_some() {
                bail!("the last intersection has a side road feeding nothing");
            }
            let spec = NetworkSpec { cycle: c, nodes };
            spec.validate()?;
            Target::Network(spec)
        }
    };

    Ok(ParsedConfig {
        name: file.name,
        target,
        epsilon_weight,
        levels,
        sim,
    })
}
