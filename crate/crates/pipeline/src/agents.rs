//! The triage team: role registry, bundled rule tables, the six
//! analytical agents, and verdict aggregation.
//!
//! Every agent exists in two interchangeable executions. Rule mode is a
//! pure function of the feature bundle, the tables, the corpus index and
//! the wall clock. Chat mode feeds the same deterministic tool results to
//! a model through the gateway and parses the reply; any gateway failure
//! degrades to an abstention so one flaky call never aborts a triage run.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, LazyLock};

use chrono::{DateTime, Utc};
use serde::Deserialize;
use thiserror::Error;

use droidtriage_apk::ApkFeatureBundle;

use crate::gateway::{
    complete, parse_agent_output, render_prompt, Backend, ChatExchange, PromptTemplate,
};
use crate::model::{AgentFinding, AgentId, Evidence, FraudCategory, TaskKind};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("entry `{entry}` has weight {weight}, expected (0, 1]")]
    BadWeight { entry: String, weight: f64 },
    #[error("lexicon term `{0}` is not lowercase")]
    NotLowercase(String),
    #[error("reference icon hash `{0}` is not 16 hex digits")]
    BadHash(String),
    #[error("reference icon hash `{0:016x}` appears twice")]
    DuplicateHash(u64),
    #[error("reference icon set is empty")]
    EmptyIconSet,
}

/// Probability that at least one of several independent indicators is a
/// true signal: `1 - prod(1 - w)`.
pub fn noisy_or(weights: impl IntoIterator<Item = f64>) -> f64 {
    let survive: f64 = weights.into_iter().map(|w| 1.0 - w).product();
    (1.0 - survive).clamp(0.0, 1.0)
}

/// Bit disagreement between two 64-bit perceptual hashes.
pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// First two dot components of a package name; the granularity at which
/// fraud families reuse identifiers.
pub fn package_prefix(package: &str) -> String {
    let mut parts = package.splitn(3, '.');
    match (parts.next(), parts.next()) {
        (Some(a), Some(b)) => format!("{a}.{b}"),
        _ => package.to_string(),
    }
}

fn url_host(url: &str) -> Option<&str> {
    let rest = url.split_once("://")?.1;
    let end = rest.find(['/', ':']).unwrap_or(rest.len());
    let host = &rest[..end];
    (!host.is_empty()).then_some(host)
}

fn dn_component<'a>(dn: &'a str, key: &str) -> Option<&'a str> {
    dn.split(", ")
        .find_map(|part| part.strip_prefix(key)?.strip_prefix('='))
}

#[derive(Debug, Clone, Deserialize)]
pub struct TermEntry {
    pub weight: f64,
    pub category: FraudCategory,
}

/// Term and permission weight tables used by the rule-mode agents and by
/// the fixture generator when it plants indicators.
#[derive(Debug, Clone, Deserialize)]
pub struct RiskLexicon {
    pub terms: BTreeMap<String, TermEntry>,
    pub dangerous_permissions: BTreeMap<String, f64>,
}

impl RiskLexicon {
    pub fn from_json(text: &str) -> Result<RiskLexicon, TableError> {
        let lexicon: RiskLexicon = serde_json::from_str(text)?;
        for (term, entry) in &lexicon.terms {
            if term.is_empty() || *term != term.to_lowercase() {
                return Err(TableError::NotLowercase(term.clone()));
            }
            if !(entry.weight > 0.0 && entry.weight <= 1.0) {
                return Err(TableError::BadWeight {
                    entry: term.clone(),
                    weight: entry.weight,
                });
            }
        }
        for (name, weight) in &lexicon.dangerous_permissions {
            if !(*weight > 0.0 && *weight <= 1.0) {
                return Err(TableError::BadWeight {
                    entry: name.clone(),
                    weight: *weight,
                });
            }
        }
        Ok(lexicon)
    }

    pub fn builtin() -> &'static RiskLexicon {
        static BUILTIN: LazyLock<RiskLexicon> = LazyLock::new(|| {
            RiskLexicon::from_json(include_str!("../data/lexicon.json"))
                .expect("bundled lexicon is valid")
        });
        &BUILTIN
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceIcon {
    pub ahash64: u64,
    pub category: FraudCategory,
    pub label: String,
}

/// Perceptual hashes of icons recurring across known fraud families.
#[derive(Debug, Clone)]
pub struct ReferenceIconSet {
    pub entries: Vec<ReferenceIcon>,
}

impl ReferenceIconSet {
    pub fn from_json(text: &str) -> Result<ReferenceIconSet, TableError> {
        #[derive(Deserialize)]
        struct RawSet {
            entries: Vec<RawIcon>,
        }
        #[derive(Deserialize)]
        struct RawIcon {
            ahash64: String,
            category: FraudCategory,
            label: String,
        }
        let raw: RawSet = serde_json::from_str(text)?;
        if raw.entries.is_empty() {
            return Err(TableError::EmptyIconSet);
        }
        let mut entries = Vec::with_capacity(raw.entries.len());
        let mut seen = std::collections::BTreeSet::new();
        for icon in raw.entries {
            if icon.ahash64.len() != 16 {
                return Err(TableError::BadHash(icon.ahash64));
            }
            let hash = u64::from_str_radix(&icon.ahash64, 16)
                .map_err(|_| TableError::BadHash(icon.ahash64.clone()))?;
            if !seen.insert(hash) {
                return Err(TableError::DuplicateHash(hash));
            }
            entries.push(ReferenceIcon {
                ahash64: hash,
                category: icon.category,
                label: icon.label,
            });
        }
        Ok(ReferenceIconSet { entries })
    }

    pub fn builtin() -> &'static ReferenceIconSet {
        static BUILTIN: LazyLock<ReferenceIconSet> = LazyLock::new(|| {
            ReferenceIconSet::from_json(include_str!("../data/reference_icons.json"))
                .expect("bundled icon set is valid")
        });
        &BUILTIN
    }

    /// Closest entry by Hamming distance; ties go to the earlier entry.
    pub fn nearest(&self, hash: u64) -> (&ReferenceIcon, u32) {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (hamming(hash, e.ahash64), i, e))
            .min_by_key(|(d, i, _)| (*d, *i))
            .map(|(d, _, e)| (e, d))
            .expect("icon set is never empty")
    }
}

#[derive(Debug, Clone)]
pub struct CorpusApp {
    pub id: String,
    pub label: FraudCategory,
}

/// Cross-application lookup over labeled corpus entries: shared signing
/// certificates, shared URL hosts, shared package prefixes. Built from
/// training data only; the app under analysis must not be in here.
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    certs: HashMap<String, Vec<CorpusApp>>,
    hosts: HashMap<String, Vec<CorpusApp>>,
    prefixes: HashMap<String, Vec<CorpusApp>>,
    len: usize,
}

impl CorpusIndex {
    pub fn new() -> CorpusIndex {
        CorpusIndex::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn add(&mut self, id: &str, label: FraudCategory, bundle: &ApkFeatureBundle) {
        let app = CorpusApp {
            id: id.to_string(),
            label,
        };
        if let Some(cert) = &bundle.certificate {
            self.certs
                .entry(cert.sha256_fingerprint.clone())
                .or_default()
                .push(app.clone());
        }
        let mut hosts: Vec<&str> = bundle.urls.iter().filter_map(|u| url_host(u)).collect();
        hosts.sort_unstable();
        hosts.dedup();
        for host in hosts {
            self.hosts
                .entry(host.to_string())
                .or_default()
                .push(app.clone());
        }
        self.prefixes
            .entry(package_prefix(&bundle.manifest.package_name))
            .or_default()
            .push(app);
        self.len += 1;
    }

    pub fn cert_matches(&self, fingerprint: &str) -> &[CorpusApp] {
        self.certs.get(fingerprint).map_or(&[], Vec::as_slice)
    }

    pub fn host_matches(&self, host: &str) -> &[CorpusApp] {
        self.hosts.get(host).map_or(&[], Vec::as_slice)
    }

    pub fn prefix_matches(&self, prefix: &str) -> &[CorpusApp] {
        self.prefixes.get(prefix).map_or(&[], Vec::as_slice)
    }
}

/// Everything a rule-mode agent reads besides the bundle itself.
#[derive(Clone, Copy)]
pub struct RuleContext<'a> {
    pub lexicon: &'a RiskLexicon,
    pub icons: &'a ReferenceIconSet,
    pub index: &'a CorpusIndex,
    pub now: DateTime<Utc>,
}

/// Flags package identity that either trips the lexicon or does not look
/// like a reverse-DNS name. A prefix collision with the corpus is not
/// risk by itself but warrants a link analysis pass.
pub fn run_package_tracer(bundle: &ApkFeatureBundle, ctx: &RuleContext) -> AgentFinding {
    let package = &bundle.manifest.package_name;
    let label_lower = bundle.manifest.app_label.to_lowercase();
    let package_lower = package.to_lowercase();

    let mut evidence = vec![
        Evidence::new("package", package.clone()),
        Evidence::new("label", bundle.manifest.app_label.clone()),
    ];
    let mut hint: Option<(f64, FraudCategory)> = None;
    let mut matched = false;
    for (term, entry) in &ctx.lexicon.terms {
        if label_lower.contains(term.as_str()) || package_lower.contains(term.as_str()) {
            matched = true;
            evidence.push(Evidence::new("term", term.clone()));
            if hint.is_none_or(|(w, _)| entry.weight > w) {
                hint = Some((entry.weight, entry.category));
            }
        }
    }
    let shaped = reverse_dns_shaped(package);
    if !shaped {
        evidence.push(Evidence::new("shape", "package name is not reverse-dns shaped"));
    }

    let mut needs = Vec::new();
    let prefix = package_prefix(package);
    let collisions = ctx.index.prefix_matches(&prefix).len();
    if collisions > 0 {
        evidence.push(Evidence::new(
            "prefix",
            format!("{prefix} shared with {collisions} corpus entries"),
        ));
        needs.push(TaskKind::LinkAnalysis);
    }

    let risk = if matched || !shaped { 0.6 } else { 0.1 };
    let mut finding = AgentFinding::new(AgentId::PackageTracer, risk)
        .with_evidence(evidence)
        .with_needs(needs);
    if let Some((_, category)) = hint {
        finding = finding.with_hint(category);
    }
    finding
}

fn reverse_dns_shaped(package: &str) -> bool {
    let mut segments = 0;
    for segment in package.split('.') {
        segments += 1;
        let bytes = segment.as_bytes();
        let head_ok = bytes.first().is_some_and(|b| b.is_ascii_lowercase());
        let tail_ok = bytes
            .iter()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'_');
        if !(head_ok && tail_ok) {
            return false;
        }
    }
    segments >= 2
}

/// Scores the launcher icon by distance to the nearest known fraud-family
/// icon: 0 bits apart is risk 1.0, 16 or more is 0.0. A category hint is
/// only trustworthy up close (distance 10 or less).
pub fn run_icon_analyst(bundle: &ApkFeatureBundle, ctx: &RuleContext) -> AgentFinding {
    let Some(icon) = &bundle.icon else {
        return AgentFinding::abstention(AgentId::IconAnalyst, Evidence::new("icon", "no icon"));
    };
    let (entry, distance) = ctx.icons.nearest(icon.ahash64);
    let risk = (1.0 - f64::from(distance) / 16.0).max(0.0);
    let mut finding = AgentFinding::new(AgentId::IconAnalyst, risk).with_evidence(vec![
        Evidence::new("icon_hash", format!("{:016x}", icon.ahash64)),
        Evidence::new(
            "nearest_reference",
            format!("{} at distance {}", entry.label, distance),
        ),
    ]);
    if distance <= 10 {
        finding = finding.with_hint(entry.category);
    }
    finding
}

/// Combines dangerous-permission weights with a noisy-or. Messaging or
/// contacts access is grounds to demand a content pass.
pub fn run_permission_analyst(bundle: &ApkFeatureBundle, ctx: &RuleContext) -> AgentFinding {
    let matched: Vec<(&String, f64)> = bundle
        .manifest
        .permissions
        .iter()
        .filter_map(|p| ctx.lexicon.dangerous_permissions.get(p).map(|w| (p, *w)))
        .collect();

    let risk = noisy_or(matched.iter().map(|(_, w)| *w));
    let mut evidence: Vec<Evidence> = matched
        .iter()
        .map(|(name, _)| Evidence::new("permission", (*name).clone()))
        .collect();
    if evidence.is_empty() {
        evidence.push(Evidence::new("permission", "no dangerous permissions"));
    }
    let wants_content = matched
        .iter()
        .any(|(name, _)| name.contains("SMS") || name.contains("CONTACTS"));
    let needs = if wants_content {
        vec![TaskKind::ContentAnalysis]
    } else {
        Vec::new()
    };
    AgentFinding::new(AgentId::PermissionAnalyst, risk)
        .with_evidence(evidence)
        .with_needs(needs)
}

/// Scans executable strings, harvested URLs and the app label for lexicon
/// terms; risk is the noisy-or of matched weights and the hint is the
/// category with the largest matched mass.
pub fn run_content_analyst(bundle: &ApkFeatureBundle, ctx: &RuleContext) -> AgentFinding {
    let label = bundle.manifest.app_label.to_lowercase();
    let urls = bundle.urls.join("\n").to_lowercase();
    let dex = bundle.dex_strings.strings.join("\n").to_lowercase();

    let mut weights = Vec::new();
    let mut evidence = Vec::new();
    let mut mass: BTreeMap<FraudCategory, f64> = BTreeMap::new();
    for (term, entry) in &ctx.lexicon.terms {
        let source = if label.contains(term.as_str()) {
            "label"
        } else if urls.contains(term.as_str()) {
            "url"
        } else if dex.contains(term.as_str()) {
            "dex_string"
        } else {
            continue;
        };
        weights.push(entry.weight);
        evidence.push(Evidence::new(source, term.clone()));
        *mass.entry(entry.category).or_insert(0.0) += entry.weight;
    }

    let risk = noisy_or(weights.iter().copied());
    if evidence.is_empty() {
        evidence.push(Evidence::new("content", "no lexicon matches"));
    }
    let mut finding =
        AgentFinding::new(AgentId::ContentAnalyst, risk).with_evidence(evidence);
    if let Some(category) = heaviest_category(&mass) {
        finding = finding.with_hint(category);
    }
    finding
}

/// Largest accumulated mass wins; ties resolve to the earlier category in
/// enum order because iteration is ordered and only strict improvements
/// replace the leader.
fn heaviest_category(mass: &BTreeMap<FraudCategory, f64>) -> Option<FraudCategory> {
    let mut best: Option<(f64, FraudCategory)> = None;
    for (category, total) in mass {
        if *total > 0.0 && best.is_none_or(|(w, _)| *total > w) {
            best = Some((*total, *category));
        }
    }
    best.map(|(_, c)| c)
}

/// Certificate hygiene flags combined with a noisy-or: expired 0.5,
/// self-signed 0.3, validity span over 30 years 0.2, placeholder subject
/// 0.4. Calling this without a certificate is a caller bug; the
/// orchestrator records such bundles as skipped instead.
pub fn run_certificate_checker(bundle: &ApkFeatureBundle, ctx: &RuleContext) -> AgentFinding {
    let cert = bundle
        .certificate
        .as_ref()
        .expect("certificate checker requires a certificate");

    const PLACEHOLDERS: [&str; 4] = ["Android", "Test", "Unknown", "Debug"];
    let mut flags: Vec<(&'static str, f64)> = Vec::new();
    if ctx.now < cert.not_before || ctx.now > cert.not_after {
        flags.push(("expired", 0.5));
    }
    if cert.self_signed {
        flags.push(("self_signed", 0.3));
    }
    if cert.not_after - cert.not_before > chrono::Duration::days(10950) {
        flags.push(("validity_span_over_30y", 0.2));
    }
    if dn_component(&cert.subject_dn, "CN").is_some_and(|cn| PLACEHOLDERS.contains(&cn)) {
        flags.push(("placeholder_subject", 0.4));
    }

    let risk = noisy_or(flags.iter().map(|(_, w)| *w));
    let mut evidence = vec![Evidence::new("subject", cert.subject_dn.clone())];
    if flags.is_empty() {
        evidence.push(Evidence::new("certificate", "no risk flags"));
    } else {
        evidence.extend(flags.iter().map(|(name, _)| Evidence::new("flag", *name)));
    }
    AgentFinding::new(AgentId::CertificateChecker, risk).with_evidence(evidence)
}

/// Looks the app's shareable artifacts up in the corpus index and scores
/// by the worst link type: the fraction of linked corpus apps that are
/// fraudulent, maximized over certificate, host and prefix links.
pub fn run_link_analyst(bundle: &ApkFeatureBundle, ctx: &RuleContext) -> AgentFinding {
    if ctx.index.is_empty() {
        return AgentFinding::new(AgentId::LinkAnalyst, 0.0)
            .with_evidence(vec![Evidence::new("corpus", "no corpus context")]);
    }

    let mut groups: Vec<(&'static str, Vec<&CorpusApp>)> = Vec::new();
    if let Some(cert) = &bundle.certificate {
        let apps: Vec<&CorpusApp> = ctx.index.cert_matches(&cert.sha256_fingerprint).iter().collect();
        if !apps.is_empty() {
            groups.push(("certificate_link", apps));
        }
    }
    let mut hosts: Vec<&str> = bundle.urls.iter().filter_map(|u| url_host(u)).collect();
    hosts.sort_unstable();
    hosts.dedup();
    let mut host_apps: Vec<&CorpusApp> = hosts
        .iter()
        .flat_map(|h| ctx.index.host_matches(h).iter())
        .collect();
    host_apps.sort_by(|a, b| a.id.cmp(&b.id));
    host_apps.dedup_by(|a, b| a.id == b.id);
    if !host_apps.is_empty() {
        groups.push(("host_link", host_apps));
    }
    let prefix_apps: Vec<&CorpusApp> = ctx
        .index
        .prefix_matches(&package_prefix(&bundle.manifest.package_name))
        .iter()
        .collect();
    if !prefix_apps.is_empty() {
        groups.push(("prefix_link", prefix_apps));
    }

    if groups.is_empty() {
        return AgentFinding::new(AgentId::LinkAnalyst, 0.0)
            .with_evidence(vec![Evidence::new("corpus", "no shared artifacts")]);
    }

    let mut risk: f64 = 0.0;
    let mut evidence = Vec::new();
    let mut mass: BTreeMap<FraudCategory, f64> = BTreeMap::new();
    for (kind, apps) in &groups {
        let fraudulent = apps.iter().filter(|a| a.label.is_fraud()).count();
        risk = risk.max(fraudulent as f64 / apps.len() as f64);
        for app in apps {
            evidence.push(Evidence::new(*kind, format!("{} ({})", app.id, app.label)));
            if app.label.is_fraud() {
                *mass.entry(app.label).or_insert(0.0) += 1.0;
            }
        }
    }
    let mut finding = AgentFinding::new(AgentId::LinkAnalyst, risk).with_evidence(evidence);
    if risk > 0.0 {
        if let Some(category) = heaviest_category(&mass) {
            finding = finding.with_hint(category);
        }
    }
    finding
}

/// Aggregation weights of the decision rule. Content carries the most
/// because planted text is the most direct signal.
pub const AGENT_WEIGHTS: [(AgentId, f64); 6] = [
    (AgentId::ContentAnalyst, 0.25),
    (AgentId::PermissionAnalyst, 0.20),
    (AgentId::IconAnalyst, 0.15),
    (AgentId::CertificateChecker, 0.15),
    (AgentId::LinkAnalyst, 0.15),
    (AgentId::PackageTracer, 0.10),
];

/// What the Decision Maker hands back to the orchestrator.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    pub fraud_probability: Option<f64>,
    pub category: FraudCategory,
    pub rationale: Vec<Evidence>,
    pub low_confidence: bool,
}

/// Weighted mean of non-abstaining risk scores, renormalized over the
/// weights actually present. At 0.5 or above the verdict is fraud and the
/// category is the risk-weighted majority of hints (ties to the earlier
/// enum value, no hints at all means other_fraud); below 0.5 or with
/// every agent abstaining the category is legitimate. Reading findings
/// through a fixed weight order makes the outcome independent of
/// insertion order.
pub fn decide_from_findings(findings: &BTreeMap<AgentId, AgentFinding>) -> DecisionOutcome {
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut contributors = 0usize;
    let mut mass: BTreeMap<FraudCategory, f64> = BTreeMap::new();
    let mut rationale = Vec::new();
    for (agent, weight) in AGENT_WEIGHTS {
        let Some(finding) = findings.get(&agent) else {
            continue;
        };
        let Some(risk) = finding.risk_score else {
            continue;
        };
        numerator += weight * risk;
        denominator += weight;
        contributors += 1;
        if let Some(hint) = finding.category_hint {
            if hint.is_fraud() {
                *mass.entry(hint).or_insert(0.0) += risk;
            }
        }
        rationale.extend(finding.evidence.iter().cloned());
    }

    if denominator == 0.0 {
        return DecisionOutcome {
            fraud_probability: None,
            category: FraudCategory::Legitimate,
            rationale: vec![Evidence::new("decision", "no agent findings to aggregate")],
            low_confidence: true,
        };
    }

    let probability = numerator / denominator;
    let category = if probability >= 0.5 {
        heaviest_category(&mass).unwrap_or(FraudCategory::OtherFraud)
    } else {
        FraudCategory::Legitimate
    };
    rationale.push(Evidence::new(
        "decision",
        format!("fraud probability {probability:.4} from {contributors} agents"),
    ));
    DecisionOutcome {
        fraud_probability: Some(probability),
        category,
        rationale,
        low_confidence: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleKind {
    Analytical,
    DecisionMaking,
}

/// One registered team role: its identity, what it is for, and the prompt
/// skeleton used in chat mode.
#[derive(Debug, Clone)]
pub struct AgentRole {
    pub id: AgentId,
    pub kind: RoleKind,
    pub template: PromptTemplate,
}

const ANSWER_SHAPE: &str = "Reply with exactly one JSON object shaped like \
{\"risk_score\": 0.0, \"category_hint\": \"gambling|scam|sexual_content|other_fraud\", \
\"evidence\": [[\"kind\", \"detail\"]], \"needs\": []}. Omit category_hint when unsure; \
needs may list follow-up tasks from: package_trace, icon_analysis, permission_analysis, \
content_analysis, certificate_check, link_analysis.";

fn make_template(preamble: &str, task: &str, tools: &[&str]) -> PromptTemplate {
    PromptTemplate {
        role_preamble: preamble.to_string(),
        task_description: format!("{task} {ANSWER_SHAPE}"),
        allowed_tools: tools.iter().map(|t| t.to_string()).collect(),
        context_slot: "context".to_string(),
    }
}

/// The whole team, exactly eight roles. The Task Master coordinates and
/// the Decision Maker aggregates; the other six do the analysis.
pub fn registry() -> &'static [AgentRole; 8] {
    static REGISTRY: LazyLock<[AgentRole; 8]> = LazyLock::new(|| {
        [
            AgentRole {
                id: AgentId::TaskMaster,
                kind: RoleKind::DecisionMaking,
                template: make_template(
                    "You are the Task Master coordinating an Android application fraud \
                     triage team.",
                    "Review the findings so far and name the follow-up tasks still worth \
                     running.",
                    &[],
                ),
            },
            AgentRole {
                id: AgentId::PackageTracer,
                kind: RoleKind::Analytical,
                template: make_template(
                    "You are the Package Tracer on an Android application fraud triage \
                     team.",
                    "Judge whether the package identity and display label look like a \
                     fraud campaign asset.",
                    &["package_metadata"],
                ),
            },
            AgentRole {
                id: AgentId::IconAnalyst,
                kind: RoleKind::Analytical,
                template: make_template(
                    "You are the Icon Analyst on an Android application fraud triage \
                     team.",
                    "Judge how closely the launcher icon matches known fraud-family \
                     icons.",
                    &["icon_hash_compare"],
                ),
            },
            AgentRole {
                id: AgentId::PermissionAnalyst,
                kind: RoleKind::Analytical,
                template: make_template(
                    "You are the Permission Analyst on an Android application fraud \
                     triage team.",
                    "Judge whether the requested permissions fit a fraud playbook such \
                     as SMS interception or contact exfiltration.",
                    &["permission_table_lookup"],
                ),
            },
            AgentRole {
                id: AgentId::ContentAnalyst,
                kind: RoleKind::Analytical,
                template: make_template(
                    "You are the Content Analyst on an Android application fraud triage \
                     team.",
                    "Judge the embedded strings, URLs and label text for fraud bait.",
                    &["string_scan", "url_harvest"],
                ),
            },
            AgentRole {
                id: AgentId::CertificateChecker,
                kind: RoleKind::Analytical,
                template: make_template(
                    "You are the Certificate Checker on an Android application fraud \
                     triage team.",
                    "Judge the signing certificate for hygiene problems typical of \
                     throwaway fraud signing keys.",
                    &["certificate_inspect"],
                ),
            },
            AgentRole {
                id: AgentId::LinkAnalyst,
                kind: RoleKind::Analytical,
                template: make_template(
                    "You are the Link Analyst on an Android application fraud triage \
                     team.",
                    "Judge whether shared certificates, hosts or package prefixes tie \
                     this app to known corpus apps.",
                    &["corpus_lookup"],
                ),
            },
            AgentRole {
                id: AgentId::DecisionMaker,
                kind: RoleKind::DecisionMaking,
                template: make_template(
                    "You are the Decision Maker on an Android application fraud triage \
                     team.",
                    "Weigh every finding and deliver the final fraud probability and \
                     category.",
                    &[],
                ),
            },
        ]
    });
    &REGISTRY
}

pub fn role(agent: AgentId) -> &'static AgentRole {
    registry()
        .iter()
        .find(|r| r.id == agent)
        .expect("all agent ids are registered")
}

/// Deterministic tool output serialized as the context section of a chat
/// prompt. Chat mode sees exactly what rule mode computes.
pub fn tool_context(kind: TaskKind, bundle: &ApkFeatureBundle, ctx: &RuleContext) -> String {
    let value = match kind {
        TaskKind::PackageTrace => serde_json::json!({
            "package": bundle.manifest.package_name,
            "label": bundle.manifest.app_label,
            "version_code": bundle.manifest.version_code,
            "version_name": bundle.manifest.version_name,
            "activities": bundle.manifest.activities.len(),
            "services": bundle.manifest.services.len(),
            "prefix_shared_with": ctx
                .index
                .prefix_matches(&package_prefix(&bundle.manifest.package_name))
                .len(),
        }),
        TaskKind::IconAnalysis => match &bundle.icon {
            Some(icon) => {
                let neighbors: Vec<serde_json::Value> = ctx
                    .icons
                    .entries
                    .iter()
                    .map(|e| {
                        serde_json::json!({
                            "label": e.label,
                            "category": e.category,
                            "distance": hamming(icon.ahash64, e.ahash64),
                        })
                    })
                    .collect();
                serde_json::json!({
                    "ahash64": format!("{:016x}", icon.ahash64),
                    "width": icon.width,
                    "height": icon.height,
                    "references": neighbors,
                })
            }
            None => serde_json::json!({ "icon": null }),
        },
        TaskKind::PermissionAnalysis => serde_json::json!({
            "permissions": bundle.manifest.permissions,
            "dangerous": bundle
                .manifest
                .permissions
                .iter()
                .filter(|p| ctx.lexicon.dangerous_permissions.contains_key(*p))
                .collect::<Vec<_>>(),
        }),
        TaskKind::ContentAnalysis => {
            let label = bundle.manifest.app_label.to_lowercase();
            let urls = bundle.urls.join("\n").to_lowercase();
            let dex = bundle.dex_strings.strings.join("\n").to_lowercase();
            let matches: Vec<&String> = ctx
                .lexicon
                .terms
                .keys()
                .filter(|t| {
                    label.contains(t.as_str())
                        || urls.contains(t.as_str())
                        || dex.contains(t.as_str())
                })
                .collect();
            serde_json::json!({
                "label": bundle.manifest.app_label,
                "urls": bundle.urls,
                "dex_string_count": bundle.dex_strings.strings.len(),
                "lexicon_matches": matches,
            })
        }
        TaskKind::CertificateCheck => match &bundle.certificate {
            Some(cert) => serde_json::json!({
                "subject": cert.subject_dn,
                "issuer": cert.issuer_dn,
                "serial": cert.serial_hex,
                "not_before": cert.not_before.to_rfc3339(),
                "not_after": cert.not_after.to_rfc3339(),
                "self_signed": cert.self_signed,
                "fingerprint": cert.sha256_fingerprint,
            }),
            None => serde_json::json!({ "certificate": null }),
        },
        TaskKind::LinkAnalysis => {
            let cert_links = bundle
                .certificate
                .as_ref()
                .map_or(0, |c| ctx.index.cert_matches(&c.sha256_fingerprint).len());
            let mut hosts: Vec<&str> = bundle.urls.iter().filter_map(|u| url_host(u)).collect();
            hosts.sort_unstable();
            hosts.dedup();
            let host_links: usize = hosts.iter().map(|h| ctx.index.host_matches(h).len()).sum();
            serde_json::json!({
                "certificate_links": cert_links,
                "host_links": host_links,
                "prefix_links": ctx
                    .index
                    .prefix_matches(&package_prefix(&bundle.manifest.package_name))
                    .len(),
                "corpus_size": ctx.index.len(),
            })
        }
    };
    serde_json::to_string(&value).expect("context values always serialize")
}

/// Renders the chat-mode user prompt for one agent given its context
/// section.
pub fn user_prompt(agent: AgentId, context: &str) -> String {
    let slots: BTreeMap<String, String> = [("context".to_string(), context.to_string())].into();
    render_prompt(&role(agent).template, &slots).expect("registry templates only need context")
}

const SYSTEM_TEXT: &str =
    "You are part of an automated Android application fraud triage pipeline.";

/// How the suite executes its agents.
pub enum SuiteMode {
    Rule,
    Chat {
        backend: Arc<dyn Backend>,
        temperature: f64,
    },
}

/// The assembled team plus the data it consults. One suite is shared
/// across all triage runs of a session; it owns no per-run state.
pub struct AgentSuite {
    pub lexicon: Arc<RiskLexicon>,
    pub icons: Arc<ReferenceIconSet>,
    pub index: Arc<CorpusIndex>,
    pub now: DateTime<Utc>,
    mode: SuiteMode,
}

impl AgentSuite {
    pub fn rule(
        lexicon: Arc<RiskLexicon>,
        icons: Arc<ReferenceIconSet>,
        index: Arc<CorpusIndex>,
        now: DateTime<Utc>,
    ) -> AgentSuite {
        AgentSuite {
            lexicon,
            icons,
            index,
            now,
            mode: SuiteMode::Rule,
        }
    }

    /// Rule-mode suite over the bundled tables and an empty corpus index.
    pub fn builtin_rule(now: DateTime<Utc>) -> AgentSuite {
        AgentSuite::rule(
            Arc::new(RiskLexicon::builtin().clone()),
            Arc::new(ReferenceIconSet::builtin().clone()),
            Arc::new(CorpusIndex::new()),
            now,
        )
    }

    pub fn chat(
        lexicon: Arc<RiskLexicon>,
        icons: Arc<ReferenceIconSet>,
        index: Arc<CorpusIndex>,
        now: DateTime<Utc>,
        backend: Arc<dyn Backend>,
        temperature: f64,
    ) -> AgentSuite {
        AgentSuite {
            lexicon,
            icons,
            index,
            now,
            mode: SuiteMode::Chat { backend, temperature },
        }
    }

    pub fn rule_context(&self) -> RuleContext<'_> {
        RuleContext {
            lexicon: &self.lexicon,
            icons: &self.icons,
            index: &self.index,
            now: self.now,
        }
    }

    /// Executes the analytical agent for one task kind.
    pub fn run_kind(&self, kind: TaskKind, bundle: &ApkFeatureBundle) -> AgentFinding {
        let ctx = self.rule_context();
        match &self.mode {
            SuiteMode::Rule => match kind {
                TaskKind::PackageTrace => run_package_tracer(bundle, &ctx),
                TaskKind::IconAnalysis => run_icon_analyst(bundle, &ctx),
                TaskKind::PermissionAnalysis => run_permission_analyst(bundle, &ctx),
                TaskKind::ContentAnalysis => run_content_analyst(bundle, &ctx),
                TaskKind::CertificateCheck => run_certificate_checker(bundle, &ctx),
                TaskKind::LinkAnalysis => run_link_analyst(bundle, &ctx),
            },
            SuiteMode::Chat { backend, temperature } => {
                let agent = kind.agent();
                let context = tool_context(kind, bundle, &ctx);
                self.chat_finding(backend.as_ref(), *temperature, agent, &context)
            }
        }
    }

    /// Aggregates findings into the final outcome.
    pub fn decide(&self, findings: &BTreeMap<AgentId, AgentFinding>) -> DecisionOutcome {
        match &self.mode {
            SuiteMode::Rule => decide_from_findings(findings),
            SuiteMode::Chat { backend, temperature } => {
                let summaries: Vec<serde_json::Value> = findings
                    .values()
                    .map(|f| {
                        serde_json::json!({
                            "agent": f.agent_id,
                            "risk_score": f.risk_score,
                            "category_hint": f.category_hint,
                            "evidence": f.evidence,
                        })
                    })
                    .collect();
                let context = serde_json::to_string(&serde_json::json!({ "findings": summaries }))
                    .expect("findings always serialize");
                let finding = self.chat_finding(
                    backend.as_ref(),
                    *temperature,
                    AgentId::DecisionMaker,
                    &context,
                );
                match finding.risk_score {
                    Some(probability) => {
                        let category = if probability >= 0.5 {
                            finding
                                .category_hint
                                .filter(|c| c.is_fraud())
                                .unwrap_or(FraudCategory::OtherFraud)
                        } else {
                            FraudCategory::Legitimate
                        };
                        DecisionOutcome {
                            fraud_probability: Some(probability),
                            category,
                            rationale: finding.evidence,
                            low_confidence: false,
                        }
                    }
                    // Decision chat failed; fall back to the deterministic
                    // aggregation so the findings are not thrown away, and
                    // say so.
                    None => {
                        let mut outcome = decide_from_findings(findings);
                        outcome.low_confidence = true;
                        outcome.rationale.extend(finding.evidence);
                        outcome
                    }
                }
            }
        }
    }

    fn chat_finding(
        &self,
        backend: &dyn Backend,
        temperature: f64,
        agent: AgentId,
        context: &str,
    ) -> AgentFinding {
        let user_text = user_prompt(agent, context);
        let exchange = ChatExchange::new(SYSTEM_TEXT, user_text).with_temperature(temperature);
        let done = match complete(backend, agent, &exchange) {
            Ok(done) => done,
            Err(e) => {
                return AgentFinding::abstention(agent, Evidence::new("error", e.to_string()));
            }
        };
        let text = done.response_text.unwrap_or_default();
        match parse_agent_output(agent, &text) {
            Ok(finding) => finding,
            Err(e) => {
                let mut finding =
                    AgentFinding::abstention(agent, Evidence::new("error", e.to_string()));
                finding.raw_response = text;
                finding
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use droidtriage_apk::{
        ApkFeatureBundle, CertificateInfo, DexStringTable, Fingerprints, IconAsset, IconFormat,
        ManifestInfo,
    };

    fn manifest(package: &str, label: &str, permissions: &[&str]) -> ManifestInfo {
        ManifestInfo {
            package_name: package.to_string(),
            version_code: 1,
            version_name: "1.0".to_string(),
            app_label: label.to_string(),
            permissions: permissions.iter().map(|p| p.to_string()).collect(),
            activities: vec![format!("{package}.MainActivity")],
            services: vec![],
            icon_ref: None,
        }
    }

    fn bundle(package: &str, label: &str, permissions: &[&str]) -> ApkFeatureBundle {
        ApkFeatureBundle {
            manifest: manifest(package, label, permissions),
            certificate: None,
            icon: None,
            dex_strings: DexStringTable::default(),
            urls: vec![],
            fingerprints: Fingerprints::over(package.as_bytes()),
        }
    }

    fn icon(hash: u64) -> IconAsset {
        IconAsset {
            raw_bytes: vec![],
            width: 16,
            height: 16,
            format: IconFormat::Png,
            ahash64: hash,
        }
    }

    fn cert(subject: &str, issuer: &str, from: &str, to: &str) -> CertificateInfo {
        let parse = |s: &str| {
            chrono::DateTime::parse_from_rfc3339(s)
                .unwrap()
                .with_timezone(&Utc)
        };
        CertificateInfo {
            subject_dn: subject.to_string(),
            issuer_dn: issuer.to_string(),
            serial_hex: "01".to_string(),
            not_before: parse(from),
            not_after: parse(to),
            sha256_fingerprint: format!("{:064x}", subject.len()),
            self_signed: subject == issuer,
        }
    }

    fn now() -> DateTime<Utc> {
        chrono::DateTime::parse_from_rfc3339("2026-01-01T00:00:00Z")
            .unwrap()
            .with_timezone(&Utc)
    }

    fn rule_ctx<'a>(index: &'a CorpusIndex) -> RuleContext<'a> {
        RuleContext {
            lexicon: RiskLexicon::builtin(),
            icons: ReferenceIconSet::builtin(),
            index,
            now: now(),
        }
    }

    #[test]
    fn builtin_tables_pin_the_documented_weights() {
        let lex = RiskLexicon::builtin();
        assert_eq!(lex.dangerous_permissions["android.permission.SEND_SMS"], 0.5);
        assert_eq!(lex.dangerous_permissions["android.permission.READ_CONTACTS"], 0.4);
        assert_eq!(lex.terms["casino"].weight, 0.6);
        assert_eq!(lex.terms["casino"].category, FraudCategory::Gambling);
        assert_eq!(lex.terms["jackpot"].weight, 0.5);
    }

    #[test]
    fn builtin_icon_references_are_well_separated() {
        let icons = ReferenceIconSet::builtin();
        assert_eq!(icons.entries.len(), 4);
        for (i, a) in icons.entries.iter().enumerate() {
            for b in &icons.entries[i + 1..] {
                assert!(hamming(a.ahash64, b.ahash64) >= 32);
            }
        }
    }

    #[test]
    fn table_validation_rejects_bad_weights_and_case() {
        let bad_weight = r#"{"terms": {"x": {"weight": 1.5, "category": "scam"}},
                             "dangerous_permissions": {}}"#;
        assert!(matches!(
            RiskLexicon::from_json(bad_weight),
            Err(TableError::BadWeight { .. })
        ));
        let bad_case = r#"{"terms": {"Casino": {"weight": 0.5, "category": "gambling"}},
                           "dangerous_permissions": {}}"#;
        assert!(matches!(
            RiskLexicon::from_json(bad_case),
            Err(TableError::NotLowercase(_))
        ));
    }

    #[test]
    fn noisy_or_matches_documented_arithmetic() {
        assert!((noisy_or([0.5, 0.4]) - 0.70).abs() < 1e-12);
        assert!((noisy_or([0.6, 0.5]) - 0.80).abs() < 1e-12);
        assert_eq!(noisy_or([]), 0.0);
        assert_eq!(noisy_or([1.0, 0.2]), 1.0);
    }

    #[test]
    fn tracer_flags_lexicon_label_on_shaped_package() {
        let b = bundle("a.a.a", "Lucky Bets", &[]);
        let index = CorpusIndex::new();
        let f = run_package_tracer(&b, &rule_ctx(&index));
        assert_eq!(f.risk_score, Some(0.6));
        assert!(f.evidence.iter().any(|e| e.kind() == "term" && e.detail() == "bet"));
        assert!(f.needs.is_empty());
    }

    #[test]
    fn tracer_scores_benign_identity_low() {
        let b = bundle("com.example.notes", "Notes", &[]);
        let index = CorpusIndex::new();
        let f = run_package_tracer(&b, &rule_ctx(&index));
        assert_eq!(f.risk_score, Some(0.1));
        assert_eq!(f.category_hint, None);
    }

    #[test]
    fn tracer_flags_malformed_package_shape() {
        let b = bundle("MyApp", "Plain", &[]);
        let index = CorpusIndex::new();
        let f = run_package_tracer(&b, &rule_ctx(&index));
        assert_eq!(f.risk_score, Some(0.6));
        assert!(f.evidence.iter().any(|e| e.kind() == "shape"));
    }

    #[test]
    fn tracer_requests_link_analysis_on_prefix_collision() {
        let mut index = CorpusIndex::new();
        index.add(
            "other-app",
            FraudCategory::Scam,
            &bundle("com.scamco.pay", "Pay", &[]),
        );
        let b = bundle("com.scamco.win", "Win", &[]);
        let f = run_package_tracer(&b, &rule_ctx(&index));
        assert_eq!(f.needs, vec![TaskKind::LinkAnalysis]);
    }

    #[test]
    fn icon_analyst_abstains_without_an_icon() {
        let b = bundle("com.example.app", "App", &[]);
        let index = CorpusIndex::new();
        let f = run_icon_analyst(&b, &rule_ctx(&index));
        assert!(f.is_abstention());
        assert_eq!(f.evidence, vec![Evidence::new("icon", "no icon")]);
    }

    #[test]
    fn icon_analyst_scores_by_distance() {
        let index = CorpusIndex::new();
        let ctx = rule_ctx(&index);
        let gambling_hash = 0x0000_0000_ffff_ffff_u64;

        let mut b = bundle("com.example.app", "App", &[]);
        b.icon = Some(icon(gambling_hash));
        let f = run_icon_analyst(&b, &ctx);
        assert_eq!(f.risk_score, Some(1.0));
        assert_eq!(f.category_hint, Some(FraudCategory::Gambling));

        b.icon = Some(icon(gambling_hash ^ 0x00ff)); // 8 bits away
        let f = run_icon_analyst(&b, &ctx);
        assert_eq!(f.risk_score, Some(0.5));
        assert_eq!(f.category_hint, Some(FraudCategory::Gambling));

        b.icon = Some(icon(gambling_hash ^ 0x0fff)); // 12 bits away
        let f = run_icon_analyst(&b, &ctx);
        assert_eq!(f.risk_score, Some(0.25));
        assert_eq!(f.category_hint, None);

        b.icon = Some(icon(0)); // 32 from every reference
        let f = run_icon_analyst(&b, &ctx);
        assert_eq!(f.risk_score, Some(0.0));
        assert_eq!(f.category_hint, None);
    }

    #[test]
    fn permission_analyst_reproduces_documented_example() {
        let b = bundle(
            "com.example.app",
            "App",
            &[
                "android.permission.INTERNET",
                "android.permission.READ_CONTACTS",
                "android.permission.SEND_SMS",
            ],
        );
        let index = CorpusIndex::new();
        let f = run_permission_analyst(&b, &rule_ctx(&index));
        assert!((f.risk_score.unwrap() - 0.70).abs() < 1e-12);
        assert_eq!(f.needs, vec![TaskKind::ContentAnalysis]);
        let named: Vec<&str> = f.evidence.iter().map(Evidence::detail).collect();
        assert!(named.contains(&"android.permission.SEND_SMS"));
        assert!(named.contains(&"android.permission.READ_CONTACTS"));
        assert!(!named.contains(&"android.permission.INTERNET"));
    }

    #[test]
    fn permission_analyst_is_quiet_on_benign_sets() {
        let b = bundle("com.example.app", "App", &["android.permission.INTERNET"]);
        let index = CorpusIndex::new();
        let f = run_permission_analyst(&b, &rule_ctx(&index));
        assert_eq!(f.risk_score, Some(0.0));
        assert!(f.needs.is_empty());
    }

    #[test]
    fn content_analyst_reproduces_documented_example() {
        let mut b = bundle("com.example.app", "App", &[]);
        b.dex_strings.strings = vec!["play casino now".into(), "win the jackpot".into()];
        let index = CorpusIndex::new();
        let f = run_content_analyst(&b, &rule_ctx(&index));
        assert!((f.risk_score.unwrap() - 0.80).abs() < 1e-12);
        assert_eq!(f.category_hint, Some(FraudCategory::Gambling));
    }

    #[test]
    fn content_analyst_reports_source_kind() {
        let mut b = bundle("com.example.app", "Adult Stories", &[]);
        b.urls = vec!["https://nude.example/x".into()];
        let index = CorpusIndex::new();
        let f = run_content_analyst(&b, &rule_ctx(&index));
        assert!(f
            .evidence
            .iter()
            .any(|e| e.kind() == "label" && e.detail() == "adult"));
        assert!(f.evidence.iter().any(|e| e.kind() == "url" && e.detail() == "nude"));
        assert_eq!(f.category_hint, Some(FraudCategory::SexualContent));
    }

    #[test]
    fn certificate_checker_reproduces_documented_example() {
        let mut b = bundle("com.example.app", "App", &[]);
        b.certificate = Some(cert(
            "CN=Test",
            "CN=Test",
            "2020-01-01T00:00:00Z",
            "2030-01-01T00:00:00Z",
        ));
        let index = CorpusIndex::new();
        let f = run_certificate_checker(&b, &rule_ctx(&index));
        assert!((f.risk_score.unwrap() - 0.58).abs() < 1e-12);
        let flags: Vec<&str> = f
            .evidence
            .iter()
            .filter(|e| e.kind() == "flag")
            .map(Evidence::detail)
            .collect();
        assert_eq!(flags, vec!["self_signed", "placeholder_subject"]);
    }

    #[test]
    fn certificate_checker_flags_expiry_and_span() {
        let mut b = bundle("com.example.app", "App", &[]);
        b.certificate = Some(cert(
            "CN=Vendor Ltd",
            "CN=Some CA",
            "1980-01-01T00:00:00Z",
            "2020-01-01T00:00:00Z",
        ));
        let index = CorpusIndex::new();
        let f = run_certificate_checker(&b, &rule_ctx(&index));
        let flags: Vec<&str> = f
            .evidence
            .iter()
            .filter(|e| e.kind() == "flag")
            .map(Evidence::detail)
            .collect();
        assert_eq!(flags, vec!["expired", "validity_span_over_30y"]);
        assert!((f.risk_score.unwrap() - 0.60).abs() < 1e-12);
    }

    #[test]
    fn clean_certificate_scores_zero() {
        let mut b = bundle("com.example.app", "App", &[]);
        b.certificate = Some(cert(
            "CN=Vendor Ltd, O=Vendor",
            "CN=Signing Authority",
            "2024-01-01T00:00:00Z",
            "2029-01-01T00:00:00Z",
        ));
        let index = CorpusIndex::new();
        let f = run_certificate_checker(&b, &rule_ctx(&index));
        assert_eq!(f.risk_score, Some(0.0));
    }

    #[test]
    fn link_analyst_reports_empty_corpus() {
        let b = bundle("com.example.app", "App", &[]);
        let index = CorpusIndex::new();
        let f = run_link_analyst(&b, &rule_ctx(&index));
        assert_eq!(f.risk_score, Some(0.0));
        assert_eq!(f.evidence, vec![Evidence::new("corpus", "no corpus context")]);
    }

    #[test]
    fn link_analyst_scores_worst_link_type() {
        let mut index = CorpusIndex::new();
        index.add(
            "scam-1",
            FraudCategory::Scam,
            &bundle("com.scamco.one", "One", &[]),
        );
        index.add(
            "scam-2",
            FraudCategory::Scam,
            &bundle("com.scamco.two", "Two", &[]),
        );
        index.add(
            "clean-1",
            FraudCategory::Legitimate,
            &bundle("org.quiet.notes", "Notes", &[]),
        );
        let b = bundle("com.scamco.three", "Three", &[]);
        let f = run_link_analyst(&b, &rule_ctx(&index));
        assert_eq!(f.risk_score, Some(1.0));
        assert_eq!(f.category_hint, Some(FraudCategory::Scam));
        assert_eq!(f.evidence.iter().filter(|e| e.kind() == "prefix_link").count(), 2);
    }

    #[test]
    fn link_analyst_links_shared_hosts() {
        let mut index = CorpusIndex::new();
        let mut fraud = bundle("net.alpha.app", "Alpha", &[]);
        fraud.urls = vec!["https://bait.example/landing".into()];
        index.add("fraud-1", FraudCategory::OtherFraud, &fraud);
        let mut clean = bundle("net.beta.app", "Beta", &[]);
        clean.urls = vec!["https://bait.example/promo".into()];
        index.add("clean-1", FraudCategory::Legitimate, &clean);

        let mut b = bundle("net.gamma.app", "Gamma", &[]);
        b.urls = vec!["https://bait.example/x".into()];
        let f = run_link_analyst(&b, &rule_ctx(&index));
        assert_eq!(f.risk_score, Some(0.5));
    }

    #[test]
    fn decide_reproduces_documented_sum() {
        let mut findings = BTreeMap::new();
        for (agent, risk) in [
            (AgentId::ContentAnalyst, 0.8),
            (AgentId::PermissionAnalyst, 0.7),
            (AgentId::CertificateChecker, 0.58),
            (AgentId::IconAnalyst, 0.0),
            (AgentId::LinkAnalyst, 0.0),
            (AgentId::PackageTracer, 0.0),
        ] {
            findings.insert(agent, AgentFinding::new(agent, risk));
        }
        let outcome = decide_from_findings(&findings);
        assert!((outcome.fraud_probability.unwrap() - 0.427).abs() < 1e-12);
        assert_eq!(outcome.category, FraudCategory::Legitimate);
        assert!(!outcome.low_confidence);
    }

    #[test]
    fn decide_renormalizes_over_present_agents() {
        let mut findings = BTreeMap::new();
        findings.insert(
            AgentId::ContentAnalyst,
            AgentFinding::new(AgentId::ContentAnalyst, 0.8)
                .with_hint(FraudCategory::Gambling),
        );
        findings.insert(
            AgentId::PackageTracer,
            AgentFinding::abstention(AgentId::PackageTracer, Evidence::new("error", "timeout")),
        );
        let outcome = decide_from_findings(&findings);
        // 0.25 * 0.8 / 0.25 with the abstention carrying no weight.
        assert!((outcome.fraud_probability.unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(outcome.category, FraudCategory::Gambling);
    }

    #[test]
    fn decide_with_no_findings_is_low_confidence_legitimate() {
        let outcome = decide_from_findings(&BTreeMap::new());
        assert_eq!(outcome.fraud_probability, None);
        assert_eq!(outcome.category, FraudCategory::Legitimate);
        assert!(outcome.low_confidence);

        let mut all_abstain = BTreeMap::new();
        for (agent, _) in AGENT_WEIGHTS {
            all_abstain.insert(
                agent,
                AgentFinding::abstention(agent, Evidence::new("error", "no output")),
            );
        }
        let outcome = decide_from_findings(&all_abstain);
        assert_eq!(outcome.fraud_probability, None);
        assert!(outcome.low_confidence);
    }

    #[test]
    fn fraud_without_hints_lands_in_other_fraud() {
        let mut findings = BTreeMap::new();
        findings.insert(
            AgentId::ContentAnalyst,
            AgentFinding::new(AgentId::ContentAnalyst, 0.9),
        );
        let outcome = decide_from_findings(&findings);
        assert!(outcome.fraud_probability.unwrap() >= 0.5);
        assert_eq!(outcome.category, FraudCategory::OtherFraud);
    }

    #[test]
    fn hint_ties_resolve_in_enum_order() {
        let mut findings = BTreeMap::new();
        findings.insert(
            AgentId::ContentAnalyst,
            AgentFinding::new(AgentId::ContentAnalyst, 0.9).with_hint(FraudCategory::Scam),
        );
        findings.insert(
            AgentId::IconAnalyst,
            AgentFinding::new(AgentId::IconAnalyst, 0.9).with_hint(FraudCategory::Gambling),
        );
        let outcome = decide_from_findings(&findings);
        assert_eq!(outcome.category, FraudCategory::Gambling);
    }

    #[test]
    fn registry_holds_exactly_eight_distinct_roles() {
        let registry = registry();
        let ids: std::collections::BTreeSet<AgentId> =
            registry.iter().map(|r| r.id).collect();
        assert_eq!(ids.len(), 8);
        for role in registry.iter() {
            let expected = matches!(role.id, AgentId::TaskMaster | AgentId::DecisionMaker);
            assert_eq!(role.kind == RoleKind::DecisionMaking, expected);
            if role.kind == RoleKind::Analytical {
                assert!(!role.template.allowed_tools.is_empty());
            }
        }
    }

    #[test]
    fn icon_prompt_starts_with_the_role_preamble() {
        let prompt = user_prompt(AgentId::IconAnalyst, "icon ahash=00ff");
        assert!(prompt.starts_with("You are the Icon Analyst"));
        assert!(prompt.ends_with("Context:\nicon ahash=00ff"));
    }

    #[test]
    fn suite_rule_mode_dispatches_all_kinds() {
        let suite = AgentSuite::builtin_rule(now());
        let mut b = bundle("com.example.app", "App", &[]);
        b.certificate = Some(cert(
            "CN=V",
            "CN=CA",
            "2024-01-01T00:00:00Z",
            "2029-01-01T00:00:00Z",
        ));
        b.icon = Some(icon(0));
        for kind in TaskKind::ALL {
            let f = suite.run_kind(kind, &b);
            assert_eq!(f.agent_id, kind.agent());
        }
    }
}
