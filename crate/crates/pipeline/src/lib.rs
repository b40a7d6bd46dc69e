//! Fraud triage over extracted APK features: a fixed team of analytical
//! agents coordinated by an iterative task loop, runnable either as pure
//! rules or through a chat-completion backend.

mod agents;
mod gateway;
mod model;
mod orchestrator;

pub use agents::{
    decide_from_findings, hamming, noisy_or, package_prefix, registry, role, run_certificate_checker,
    run_content_analyst, run_icon_analyst, run_link_analyst, run_package_tracer,
    run_permission_analyst, tool_context, user_prompt, AgentRole, AgentSuite, CorpusApp,
    CorpusIndex, DecisionOutcome, ReferenceIcon, ReferenceIconSet, RiskLexicon, RoleKind,
    RuleContext, SuiteMode, TableError, TermEntry, AGENT_WEIGHTS,
};
pub use gateway::{
    complete, parse_agent_output, render_prompt, Backend, ChatExchange, GatewayError, LiveBackend,
    PromptTemplate, ScriptedBackend,
};
pub use model::{AgentFinding, AgentId, Evidence, FraudCategory, TaskKind};
pub use orchestrator::{
    can_decide, initial_skips, initial_tasks, next_tasks, run_pipeline, AgentRunner,
    FindingSummary, NeedRecord, PipelineError, Policy, Priority, SharedState, Task, TaskOrigin,
    TraceEvent, Verdict, SKIP_NO_CERTIFICATE, SKIP_NO_ICON,
};
