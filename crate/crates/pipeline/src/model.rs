//! Shared domain vocabulary: agent roles, fraud taxonomy, task kinds, and
//! the structured finding every agent returns.

use serde::{Deserialize, Serialize};

/// The eight roles of the triage team. Enum order is the canonical
/// presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentId {
    TaskMaster,
    PackageTracer,
    IconAnalyst,
    PermissionAnalyst,
    ContentAnalyst,
    CertificateChecker,
    LinkAnalyst,
    DecisionMaker,
}

impl AgentId {
    pub const ALL: [AgentId; 8] = [
        AgentId::TaskMaster,
        AgentId::PackageTracer,
        AgentId::IconAnalyst,
        AgentId::PermissionAnalyst,
        AgentId::ContentAnalyst,
        AgentId::CertificateChecker,
        AgentId::LinkAnalyst,
        AgentId::DecisionMaker,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::TaskMaster => "task_master",
            AgentId::PackageTracer => "package_tracer",
            AgentId::IconAnalyst => "icon_analyst",
            AgentId::PermissionAnalyst => "permission_analyst",
            AgentId::ContentAnalyst => "content_analyst",
            AgentId::CertificateChecker => "certificate_checker",
            AgentId::LinkAnalyst => "link_analyst",
            AgentId::DecisionMaker => "decision_maker",
        }
    }
}

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed fraud taxonomy. Enum order doubles as the documented tie-break
/// order wherever scores draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FraudCategory {
    Legitimate,
    Gambling,
    Scam,
    SexualContent,
    OtherFraud,
}

impl FraudCategory {
    pub const ALL: [FraudCategory; 5] = [
        FraudCategory::Legitimate,
        FraudCategory::Gambling,
        FraudCategory::Scam,
        FraudCategory::SexualContent,
        FraudCategory::OtherFraud,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FraudCategory::Legitimate => "legitimate",
            FraudCategory::Gambling => "gambling",
            FraudCategory::Scam => "scam",
            FraudCategory::SexualContent => "sexual_content",
            FraudCategory::OtherFraud => "other_fraud",
        }
    }

    pub fn is_fraud(self) -> bool {
        self != FraudCategory::Legitimate
    }
}

impl std::fmt::Display for FraudCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FraudCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FraudCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown fraud category `{s}`"))
    }
}

/// The six assignable analytical tasks. Deciding is not a task: the
/// Decision Maker runs outside the allocation loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PackageTrace,
    IconAnalysis,
    PermissionAnalysis,
    ContentAnalysis,
    CertificateCheck,
    LinkAnalysis,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::PackageTrace,
        TaskKind::IconAnalysis,
        TaskKind::PermissionAnalysis,
        TaskKind::ContentAnalysis,
        TaskKind::CertificateCheck,
        TaskKind::LinkAnalysis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::PackageTrace => "package_trace",
            TaskKind::IconAnalysis => "icon_analysis",
            TaskKind::PermissionAnalysis => "permission_analysis",
            TaskKind::ContentAnalysis => "content_analysis",
            TaskKind::CertificateCheck => "certificate_check",
            TaskKind::LinkAnalysis => "link_analysis",
        }
    }

    /// The analytical agent this kind of task is always assigned to.
    pub fn agent(self) -> AgentId {
        match self {
            TaskKind::PackageTrace => AgentId::PackageTracer,
            TaskKind::IconAnalysis => AgentId::IconAnalyst,
            TaskKind::PermissionAnalysis => AgentId::PermissionAnalyst,
            TaskKind::ContentAnalysis => AgentId::ContentAnalyst,
            TaskKind::CertificateCheck => AgentId::CertificateChecker,
            TaskKind::LinkAnalysis => AgentId::LinkAnalyst,
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown task kind `{s}`"))
    }
}

/// One piece of evidence as a (kind, detail) pair; serializes as a two
/// element array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence(pub String, pub String);

impl Evidence {
    pub fn new(kind: impl Into<String>, detail: impl Into<String>) -> Evidence {
        Evidence(kind.into(), detail.into())
    }

    pub fn kind(&self) -> &str {
        &self.0
    }

    pub fn detail(&self) -> &str {
        &self.1
    }
}

/// Structured result of one agent execution. A missing risk score is an
/// abstention: the agent ran but contributed no signal (missing modality,
/// unparsable output, transport failure), and it is excluded from
/// aggregation weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentFinding {
    pub agent_id: AgentId,
    pub risk_score: Option<f64>,
    pub category_hint: Option<FraudCategory>,
    pub evidence: Vec<Evidence>,
    pub needs: Vec<TaskKind>,
    pub raw_response: String,
    /// How many unknown `needs` entries were dropped during parsing.
    pub dropped_needs: usize,
}

impl AgentFinding {
    pub fn new(agent_id: AgentId, risk_score: f64) -> AgentFinding {
        debug_assert!((0.0..=1.0).contains(&risk_score));
        AgentFinding {
            agent_id,
            risk_score: Some(risk_score),
            category_hint: None,
            evidence: Vec::new(),
            needs: Vec::new(),
            raw_response: String::new(),
            dropped_needs: 0,
        }
    }

    pub fn abstention(agent_id: AgentId, reason: Evidence) -> AgentFinding {
        AgentFinding {
            agent_id,
            risk_score: None,
            category_hint: None,
            evidence: vec![reason],
            needs: Vec::new(),
            raw_response: String::new(),
            dropped_needs: 0,
        }
    }

    pub fn is_abstention(&self) -> bool {
        self.risk_score.is_none()
    }

    pub fn with_hint(mut self, hint: FraudCategory) -> AgentFinding {
        self.category_hint = Some(hint);
        self
    }

    pub fn with_evidence(mut self, evidence: Vec<Evidence>) -> AgentFinding {
        self.evidence = evidence;
        self
    }

    pub fn with_needs(mut self, needs: Vec<TaskKind>) -> AgentFinding {
        self.needs = needs;
        self
    }
}
