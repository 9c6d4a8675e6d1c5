//! Driving a session over a sequence of shots and reporting on it.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ast::{FactSet, Program, Rule};
use crate::engine::{EngineConfig, Session, ShotStats};
use crate::error::Result;
use crate::ground::{GroundProgram, RuleSet, SimplifiedRule};
use crate::oracle::{self, Interpretation};
use crate::text::{render_ground_program, render_rules, RenderOptions};

/// Per-shot record; field names are part of the stats format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotReport {
    pub shot_index: usize,
    pub rules_added: usize,
    pub rules_restored: usize,
    pub rules_deleted: usize,
    pub atoms_removed_type3: usize,
    pub live_rule_count: usize,
    pub deleted_rule_count: usize,
    pub grounding_time_ms: f64,
    pub solving_time_ms: Option<f64>,
    pub answer_set_count: Option<usize>,
}

impl From<ShotStats> for ShotReport {
    fn from(s: ShotStats) -> Self {
        ShotReport {
            shot_index: s.shot_index,
            rules_added: s.rules_added,
            rules_restored: s.rules_restored,
            rules_deleted: s.rules_deleted,
            atoms_removed_type3: s.atoms_removed_type3,
            live_rule_count: s.live_rule_count,
            deleted_rule_count: s.deleted_rule_count,
            grounding_time_ms: s.grounding_time_ms,
            solving_time_ms: None,
            answer_set_count: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StatsFormat {
    /// One JSON object per line.
    #[default]
    Lines,
    /// A single JSON array.
    Document,
}

/// Serializes reports. An empty slice yields an empty string in both formats.
pub fn emit_stats(reports: &[ShotReport], format: StatsFormat) -> String {
    if reports.is_empty() {
        return String::new();
    }
    match format {
        StatsFormat::Lines => {
            let mut out = String::new();
            for r in reports {
                out.push_str(&serde_json::to_string(r).expect("plain data"));
                out.push('\n');
            }
            out
        }
        StatsFormat::Document => serde_json::to_string_pretty(reports).expect("plain data") + "\n",
    }
}

/// Rules of `g` reachable from `facts`: the least set `R` such that a rule
/// belongs to `R` when its current positive body lies in `F ∪ Heads(R)`.
pub fn filter_relevant(g: &GroundProgram, facts: &FactSet) -> RuleSet {
    let mut missing: HashMap<&Rule, usize> = HashMap::new();
    let mut reached: BTreeSet<_> = BTreeSet::new();
    let mut queue: Vec<_> = Vec::new();
    let mut out = RuleSet::new();
    let fire = |s: &SimplifiedRule, queue: &mut Vec<_>, out: &mut RuleSet| {
        queue.extend(s.head().iter().cloned());
        out.insert(s.clone());
    };
    for s in g.iter() {
        let n = s.pos().iter().filter(|a| !facts.contains(a)).count();
        if n == 0 {
            fire(s, &mut queue, &mut out);
        } else {
            missing.insert(s.hom().as_ref(), n);
        }
    }
    reached.extend(facts.atoms.iter().cloned());
    while let Some(a) = queue.pop() {
        if !reached.insert(a.clone()) {
            continue;
        }
        for id in g.with_body_atom(&a) {
            if let Some(n) = missing.get_mut(id.as_ref()) {
                *n -= 1;
                if *n == 0 {
                    fire(g.get(&id).unwrap(), &mut queue, &mut out);
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub config: EngineConfig,
    /// Compute answer sets of `G_i ∪ F_i` with the exact oracle.
    pub solve: bool,
    pub max_solve_atoms: usize,
    /// Restrict emitted and solved rules to those reachable from `F_i`.
    pub filter: bool,
    /// Render the ground program of every shot.
    pub render: Option<RenderOptions>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            config: EngineConfig::default(),
            solve: false,
            max_solve_atoms: 20,
            filter: false,
            render: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ShotOutput {
    pub report: ShotReport,
    pub ground: Option<String>,
    pub answer_sets: Option<BTreeSet<Interpretation>>,
}

/// A session plus the per-shot post-processing selected by [`RunOptions`].
pub struct Runner {
    session: Session,
    options: RunOptions,
}

impl Runner {
    pub fn new(program: Program, options: RunOptions) -> Result<Self> {
        Ok(Runner {
            session: Session::new(program, options.config)?,
            options,
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn shot(&mut self, facts: &FactSet) -> Result<ShotOutput> {
        let stats = self.session.incr_inst(facts)?;
        let mut report = ShotReport::from(stats);
        let g = self.session.program();
        let filtered = self.options.filter.then(|| filter_relevant(g, facts));

        let ground = self.options.render.map(|opts| match &filtered {
            Some(rules) => render_rules(rules, opts.body),
            None => render_ground_program(g, Some(self.session.deleted()), &opts),
        });

        let mut answer_sets = None;
        if self.options.solve {
            let start = Instant::now();
            let mut rules = match &filtered {
                Some(rules) => oracle::as_ground_rules(rules),
                None => oracle::as_ground_rules(g.iter()),
            };
            rules.extend(facts.as_rules());
            let sets = oracle::answer_sets(&rules, self.options.max_solve_atoms)?;
            report.solving_time_ms = Some(start.elapsed().as_secs_f64() * 1000.0);
            report.answer_set_count = Some(sets.len());
            answer_sets = Some(sets);
        }
        Ok(ShotOutput {
            report,
            ground,
            answer_sets,
        })
    }
}

/// Runs every shot in order.
pub fn run_shots(
    program: Program,
    shots: &[FactSet],
    options: RunOptions,
) -> Result<Vec<ShotOutput>> {
    let mut runner = Runner::new(program, options)?;
    shots.iter().map(|f| runner.shot(f)).collect()
}
