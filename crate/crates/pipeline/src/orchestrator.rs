//! Task allocation loop. The Task Master logic lives here as code: seed
//! the applicable initial tasks, run each iteration's tasks concurrently,
//! fold findings into shared state, grant follow-up requests, and stop as
//! soon as the goals are met or the iteration cap forces a decision.
//!
//! Termination does not depend on agent behavior. Each analytical agent
//! runs at most once per triage, so at most six task executions ever
//! happen, and the iteration cap bounds the loop even when agents keep
//! requesting work that can never satisfy them.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use droidtriage_apk::ApkFeatureBundle;

use crate::agents::DecisionOutcome;
use crate::model::{AgentFinding, AgentId, Evidence, FraudCategory, TaskKind};

pub const SKIP_NO_ICON: &str = "no icon";
pub const SKIP_NO_CERTIFICATE: &str = "no certificate";

const RULE_PRIORITIZE_CONTENT: &str = "prioritize_content_inspection";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("policy max_iterations must be at least 1")]
    BadPolicy,
    #[error("internal invariant breached: {0}")]
    InvariantBreach(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Normal,
    Elevated,
}

/// Where a task came from: the seeding pass, another agent's request, or
/// a named escalation rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOrigin {
    Initial,
    Requested(AgentId),
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Task {
    pub kind: TaskKind,
    pub priority: Priority,
    pub origin: TaskOrigin,
}

impl Task {
    fn initial(kind: TaskKind) -> Task {
        Task {
            kind,
            priority: Priority::Normal,
            origin: TaskOrigin::Initial,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Policy {
    pub max_iterations: u32,
}

impl Default for Policy {
    fn default() -> Policy {
        Policy { max_iterations: 3 }
    }
}

/// One follow-up request: which kind, who asked, and in which iteration
/// the asking finding was integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeedRecord {
    pub kind: TaskKind,
    pub requested_by: AgentId,
    pub at_iteration: u32,
}

/// Blackboard shared by the loop: findings keyed by agent, completion
/// bookkeeping, recorded follow-up requests, and the skip list for absent
/// modalities.
pub struct SharedState {
    pub bundle: Arc<ApkFeatureBundle>,
    pub findings: BTreeMap<AgentId, AgentFinding>,
    pub completed_kinds: BTreeSet<TaskKind>,
    pub completed_at: BTreeMap<TaskKind, u32>,
    pub needs: Vec<NeedRecord>,
    pub skipped: Vec<(TaskKind, String)>,
    pub iteration: u32,
    pub max_iterations: u32,
}

impl SharedState {
    pub fn new(bundle: Arc<ApkFeatureBundle>, policy: &Policy) -> SharedState {
        let skipped = initial_skips(&bundle);
        SharedState {
            bundle,
            findings: BTreeMap::new(),
            completed_kinds: BTreeSet::new(),
            completed_at: BTreeMap::new(),
            needs: Vec::new(),
            skipped,
            iteration: 0,
            max_iterations: policy.max_iterations,
        }
    }

    pub fn skipped_kinds(&self) -> BTreeSet<TaskKind> {
        self.skipped.iter().map(|(k, _)| *k).collect()
    }

    /// Folds one finding in: marks the kind complete at the current
    /// iteration and records its follow-up requests.
    pub fn integrate(&mut self, kind: TaskKind, finding: AgentFinding) {
        self.completed_kinds.insert(kind);
        self.completed_at.entry(kind).or_insert(self.iteration);
        for need in &finding.needs {
            self.needs.push(NeedRecord {
                kind: *need,
                requested_by: finding.agent_id,
                at_iteration: self.iteration,
            });
        }
        self.findings.insert(finding.agent_id, finding);
    }
}

/// Seeds the loop: package and permission analysis always run; icon and
/// certificate checks run only when the modality exists. Content and link
/// analysis are granted on demand, never seeded.
pub fn initial_tasks(bundle: &ApkFeatureBundle) -> Vec<Task> {
    let mut tasks = vec![
        Task::initial(TaskKind::PackageTrace),
        Task::initial(TaskKind::PermissionAnalysis),
    ];
    if bundle.icon.is_some() {
        tasks.push(Task::initial(TaskKind::IconAnalysis));
    }
    if bundle.certificate.is_some() {
        tasks.push(Task::initial(TaskKind::CertificateCheck));
    }
    tasks.sort_by_key(|t| t.kind);
    tasks
}

/// The skip list matching [`initial_tasks`]: one entry per absent
/// modality, with a stable human-readable reason.
pub fn initial_skips(bundle: &ApkFeatureBundle) -> Vec<(TaskKind, String)> {
    let mut skips = Vec::new();
    if bundle.icon.is_none() {
        skips.push((TaskKind::IconAnalysis, SKIP_NO_ICON.to_string()));
    }
    if bundle.certificate.is_none() {
        skips.push((TaskKind::CertificateCheck, SKIP_NO_CERTIFICATE.to_string()));
    }
    skips
}

/// A follow-up request is met once its kind is skipped or completed in a
/// strictly later iteration than the request. Completion in the same
/// iteration does not count: the requester demonstrably did not see that
/// result.
fn need_met(state: &SharedState, skipped: &BTreeSet<TaskKind>, record: &NeedRecord) -> bool {
    skipped.contains(&record.kind)
        || state
            .completed_at
            .get(&record.kind)
            .is_some_and(|done| *done > record.at_iteration)
}

fn goals_met(state: &SharedState) -> bool {
    let skipped = state.skipped_kinds();
    let mut applicable: BTreeSet<TaskKind> = initial_tasks(&state.bundle)
        .into_iter()
        .map(|t| t.kind)
        .collect();
    applicable.extend(state.needs.iter().map(|r| r.kind));
    applicable.retain(|k| !skipped.contains(k));

    applicable.iter().all(|k| state.completed_kinds.contains(k))
        && state.needs.iter().all(|r| need_met(state, &skipped, r))
}

/// True when a decision may be taken: every applicable task has completed
/// and every follow-up request is met, or the iteration cap is reached,
/// which forces a decision unconditionally.
pub fn can_decide(state: &SharedState) -> bool {
    state.iteration >= state.max_iterations || goals_met(state)
}

/// Grants recorded requests that are still open: the union of needs minus
/// completed minus skipped kinds, one task per kind. A content analysis
/// requested by the Permission Analyst is elevated (messaging or contact
/// access makes bait text the next most telling signal); elevated tasks
/// sort first.
pub fn next_tasks(state: &SharedState) -> Vec<Task> {
    let skipped = state.skipped_kinds();
    let mut wanted: BTreeMap<TaskKind, Task> = BTreeMap::new();
    for record in &state.needs {
        if state.completed_kinds.contains(&record.kind) || skipped.contains(&record.kind) {
            continue;
        }
        let elevated = record.kind == TaskKind::ContentAnalysis
            && record.requested_by == AgentId::PermissionAnalyst;
        match wanted.entry(record.kind) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(Task {
                    kind: record.kind,
                    priority: if elevated { Priority::Elevated } else { Priority::Normal },
                    origin: if elevated {
                        TaskOrigin::Rule(RULE_PRIORITIZE_CONTENT.to_string())
                    } else {
                        TaskOrigin::Requested(record.requested_by)
                    },
                });
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                if elevated && slot.get().priority == Priority::Normal {
                    slot.insert(Task {
                        kind: record.kind,
                        priority: Priority::Elevated,
                        origin: TaskOrigin::Rule(RULE_PRIORITIZE_CONTENT.to_string()),
                    });
                }
            }
        }
    }
    let mut tasks: Vec<Task> = wanted.into_values().collect();
    tasks.sort_by_key(|t| (t.priority != Priority::Elevated, t.kind));
    tasks
}

/// Execution backend for the loop: run one analytical task, and turn the
/// accumulated findings into an outcome.
pub trait AgentRunner: Sync {
    fn run_task(&self, kind: TaskKind, bundle: &ApkFeatureBundle) -> AgentFinding;
    fn decide(&self, findings: &BTreeMap<AgentId, AgentFinding>) -> DecisionOutcome;
}

impl AgentRunner for crate::agents::AgentSuite {
    fn run_task(&self, kind: TaskKind, bundle: &ApkFeatureBundle) -> AgentFinding {
        self.run_kind(kind, bundle)
    }

    fn decide(&self, findings: &BTreeMap<AgentId, AgentFinding>) -> DecisionOutcome {
        crate::agents::AgentSuite::decide(self, findings)
    }
}

/// Compact per-agent record embedded in the trace.
#[derive(Debug, Clone, Serialize)]
pub struct FindingSummary {
    pub agent_id: AgentId,
    pub risk_score: Option<f64>,
    pub category_hint: Option<FraudCategory>,
    pub needs: Vec<TaskKind>,
    pub dropped_needs: usize,
}

impl FindingSummary {
    fn of(finding: &AgentFinding) -> FindingSummary {
        FindingSummary {
            agent_id: finding.agent_id,
            risk_score: finding.risk_score,
            category_hint: finding.category_hint,
            needs: finding.needs.clone(),
            dropped_needs: finding.dropped_needs,
        }
    }
}

/// Ordered triage log: one setup event, one event per loop pass, and a
/// final decision event.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Setup {
        initial_tasks: Vec<Task>,
        skipped: Vec<(TaskKind, String)>,
    },
    Iteration {
        iteration: u32,
        tasks: Vec<Task>,
        findings: Vec<FindingSummary>,
        rules_fired: Vec<String>,
    },
    Decision {
        iteration: u32,
        fraud_probability: Option<f64>,
        category: FraudCategory,
        forced: bool,
    },
}

/// Final triage result. `fraud_probability` is absent when every agent
/// abstained; the category is legitimate whenever the probability is
/// below 0.5 or absent.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub fraud_probability: Option<f64>,
    pub category: FraudCategory,
    pub low_confidence: bool,
    pub rationale: Vec<Evidence>,
    pub trace: Vec<TraceEvent>,
}

impl Verdict {
    pub fn is_fraud(&self) -> bool {
        self.category.is_fraud()
    }

    /// The skip list recorded at setup.
    pub fn skipped(&self) -> &[(TaskKind, String)] {
        match self.trace.first() {
            Some(TraceEvent::Setup { skipped, .. }) => skipped,
            _ => &[],
        }
    }
}

/// Runs tasks of one iteration concurrently, in task order. A panicking
/// agent is converted into an abstention so a single bad execution never
/// aborts the triage.
fn execute_tasks(
    agents: &dyn AgentRunner,
    bundle: &ApkFeatureBundle,
    tasks: &[Task],
) -> Vec<AgentFinding> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = tasks
            .iter()
            .map(|task| scope.spawn(move || agents.run_task(task.kind, bundle)))
            .collect();
        handles
            .into_iter()
            .zip(tasks)
            .map(|(handle, task)| match handle.join() {
                Ok(mut finding) => {
                    // The map is keyed by task assignment, not by whatever
                    // id a misbehaving runner claims.
                    finding.agent_id = task.kind.agent();
                    finding
                }
                Err(_) => AgentFinding::abstention(
                    task.kind.agent(),
                    Evidence::new("error", "agent panicked"),
                ),
            })
            .collect()
    })
}

/// Full triage of one feature bundle: seed, iterate, decide. The decision
/// runs exactly once, last, and the cap forces it after at most
/// `policy.max_iterations` loop passes.
pub fn run_pipeline(
    bundle: Arc<ApkFeatureBundle>,
    agents: &dyn AgentRunner,
    policy: &Policy,
) -> Result<Verdict, PipelineError> {
    if policy.max_iterations == 0 {
        return Err(PipelineError::BadPolicy);
    }
    let mut state = SharedState::new(bundle.clone(), policy);
    let mut trace = vec![TraceEvent::Setup {
        initial_tasks: initial_tasks(&bundle),
        skipped: state.skipped.clone(),
    }];

    while !can_decide(&state) {
        state.iteration += 1;
        let tasks = if state.iteration == 1 {
            initial_tasks(&bundle)
        } else {
            next_tasks(&state)
        };
        let findings = execute_tasks(agents, &bundle, &tasks);

        let mut rules_fired: Vec<String> = Vec::new();
        for task in &tasks {
            if let TaskOrigin::Rule(rule) = &task.origin {
                if !rules_fired.contains(rule) {
                    rules_fired.push(rule.clone());
                }
            }
        }
        let mut summaries = Vec::with_capacity(findings.len());
        for (task, finding) in tasks.iter().zip(findings) {
            if state.findings.contains_key(&finding.agent_id) {
                return Err(PipelineError::InvariantBreach("agent executed twice"));
            }
            summaries.push(FindingSummary::of(&finding));
            state.integrate(task.kind, finding);
        }
        trace.push(TraceEvent::Iteration {
            iteration: state.iteration,
            tasks,
            findings: summaries,
            rules_fired,
        });
    }

    let forced = !goals_met(&state);
    let outcome = agents.decide(&state.findings);
    // Verdict invariant: below the threshold (or with no probability at
    // all) the category is legitimate, whatever the decider said.
    let category = match outcome.fraud_probability {
        Some(p) if p >= 0.5 => outcome.category,
        _ => FraudCategory::Legitimate,
    };
    trace.push(TraceEvent::Decision {
        iteration: state.iteration,
        fraud_probability: outcome.fraud_probability,
        category,
        forced,
    });
    Ok(Verdict {
        fraud_probability: outcome.fraud_probability,
        category,
        low_confidence: outcome.low_confidence,
        rationale: outcome.rationale,
        trace,
    })
}
