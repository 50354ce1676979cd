//! Prompt templates with `{slot}` placeholders and the expert-demonstration
//! store.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{Component, ReasoningSample, SampleError, TaskKind};
use crate::molgraph::Role;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("template '{template}' uses slot '{slot}' which has no value")]
    MissingSlot { template: String, slot: String },
    #[error("unknown demonstration '{0}'")]
    UnknownDemo(String),
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("no demonstration for task {0}")]
    NoDemoForTask(TaskKind),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("demo store line {line}: {reason}")]
    DemoStore { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub text: String,
}

impl Template {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Template {
        Template {
            id: id.into(),
            text: text.into(),
        }
    }

    /// Slot names in order of appearance.
    pub fn slots(&self) -> Vec<&str> {
        segments(&self.text)
            .into_iter()
            .filter_map(|s| match s {
                Segment::Slot(name) => Some(name),
                Segment::Text(_) => None,
            })
            .collect()
    }

    pub fn render(&self, values: &BTreeMap<String, String>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.text.len() * 2);
        for seg in segments(&self.text) {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => match values.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(PromptError::MissingSlot {
                            template: self.id.clone(),
                            slot: name.to_string(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

enum Segment<'a> {
    Text(&'a str),
    Slot(&'a str),
}

/// `{name}` with `name` made of lowercase letters and underscores is a slot;
/// any other brace is literal text.
fn segments(text: &str) -> Vec<Segment<'_>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let name_len = bytes[i + 1..]
                .iter()
                .take_while(|b| b.is_ascii_lowercase() || **b == b'_')
                .count();
            let close = i + 1 + name_len;
            if name_len > 0 && bytes.get(close) == Some(&b'}') {
                if start < i {
                    out.push(Segment::Text(&text[start..i]));
                }
                out.push(Segment::Slot(&text[i + 1..close]));
                i = close + 1;
                start = i;
                continue;
            }
        }
        i += 1;
    }
    if start < text.len() {
        out.push(Segment::Text(&text[start..]));
    }
    out
}

const GENERATION_HEADER: &str = "\
You are an expert chemist writing down how you would work through a problem \
shown to you as an image. Put your reasoning inside <think></think> and your \
final result inside <answer></answer>.";

const GROUNDING_RULES: &str = "\
Write as someone looking at the picture: open by describing what the image \
shows (for example \"Looking at the image, I see...\") rather than reciting \
strings you were handed, and work toward the result from there. Keep the \
reasoning focused and reasonably short.";

fn builtin_templates() -> Vec<Template> {
    let generation = |task: &str, body: &str| {
        Template::new(
            format!("{task}/default"),
            format!("{GENERATION_HEADER}\n\nWorked example:\n{{expert_demos}}\n\n{body}\n\n{GROUNDING_RULES}"),
        )
    };
    vec![
        generation(
            "mol_recognition",
            "The image shows a single molecule. So that reading errors cannot derail you, here \
             is what it contains: {molecule}\nGive the structure as <SMILES>...</SMILES> inside \
             the answer block.",
        ),
        generation(
            "rxn_recognition",
            "The image shows a complete reaction scheme. For reference, its components are:\n\
             Reactants: {reactants}\nSolvents/Agents: {agents}\nProducts: {products}\n\
             Transcribe the whole scheme as reaction SMILES (reactants>agents>products) inside \
             <SMILES>...</SMILES> in the answer block.",
        ),
        generation(
            "rxn_prediction",
            "The image shows the starting materials and conditions of a reaction. Their \
             structures, given as text to rule out recognition slips:\n\
             Reactants: {reactants}\nSolvents/Agents: {agents}\n\
             The recorded product is {products}. Treat it as unknown while reasoning: derive it \
             from the starting materials step by step and report it as <SMILES>...</SMILES> in \
             the answer block.",
        ),
        generation(
            "mol_to_iupac",
            "The image shows a single molecule: {molecule}\nIts systematic name is {ground_truth}. \
             Reason as if you had to work the name out yourself, from the parent chain or ring \
             through the substituents, and give it as <IUPAC>...</IUPAC> in the answer block.",
        ),
        Template::new(
            "caption/default",
            "You are an expert chemist describing a molecule drawn in an image.\n\n\
             Example description:\n{expert_demos}\n\n\
             The drawn molecule is {molecule}. Describe what the image depicts: the ring \
             systems, chains, functional groups and how they connect, in enough detail that \
             another chemist could redraw the structure from your words alone. Do not write \
             SMILES or any other line notation.",
        ),
        Template::new(
            "verify/mol_recognition",
            "Below is a chemist's analysis of a molecule drawn in an image. Using only this \
             analysis, write down the molecule it describes as <SMILES>...</SMILES>.\n\n\
             Analysis:\n{reasoning}",
        ),
        Template::new(
            "verify/rxn_recognition",
            "Below is a chemist's analysis of a reaction scheme drawn in an image. Using only \
             this analysis, write the complete scheme as reaction SMILES inside \
             <SMILES>...</SMILES>.\n\nAnalysis:\n{reasoning}",
        ),
        Template::new(
            "verify/rxn_prediction",
            "A reaction starts from these materials:\nReactants: {reactants}\n\
             Solvents/Agents: {agents}\nBelow is a chemist's reasoning about the outcome. Follow \
             it and give the main product as <SMILES>...</SMILES>.\n\nReasoning:\n{reasoning}",
        ),
        Template::new(
            "verify/mol_to_iupac",
            "Below is a chemist's analysis of a molecule drawn in an image. Using only this \
             analysis, give the systematic IUPAC name of the molecule as <IUPAC>...</IUPAC>.\n\n\
             Analysis:\n{reasoning}",
        ),
        Template::new(
            "verify/caption",
            "Here is a description of a molecule:\n{caption}\n\nWrite the molecule it describes \
             as <SMILES>...</SMILES>.",
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateStore {
    templates: Vec<Template>,
}

impl Default for TemplateStore {
    fn default() -> Self {
        TemplateStore {
            templates: builtin_templates(),
        }
    }
}

impl TemplateStore {
    pub fn get(&self, id: &str) -> Result<&Template, PromptError> {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    /// Adds or replaces a template.
    pub fn insert(&mut self, template: Template) {
        match self.templates.iter_mut().find(|t| t.id == template.id) {
            Some(slot) => *slot = template,
            None => self.templates.push(template),
        }
    }

    pub fn generation_id(task: TaskKind) -> String {
        format!("{task}/default")
    }

    pub fn verifier_id(task: TaskKind) -> String {
        format!("verify/{task}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demo {
    pub id: String,
    pub task: TaskKind,
    pub text: String,
}

const BUILTIN_DEMOS: &str = include_str!("demos.jsonl");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoStore {
    demos: Vec<Demo>,
}

impl Default for DemoStore {
    fn default() -> Self {
        DemoStore::parse(BUILTIN_DEMOS).expect("built-in demonstrations are valid")
    }
}

impl DemoStore {
    /// One JSON object `{id, task, text}` per line.
    pub fn parse(text: &str) -> Result<DemoStore, PromptError> {
        let mut demos: Vec<Demo> = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let demo: Demo = serde_json::from_str(line).map_err(|e| PromptError::DemoStore {
                line: k + 1,
                reason: e.to_string(),
            })?;
            if demos.iter().any(|d| d.id == demo.id) {
                return Err(PromptError::DemoStore {
                    line: k + 1,
                    reason: format!("duplicate id '{}'", demo.id),
                });
            }
            demos.push(demo);
        }
        Ok(DemoStore { demos })
    }

    pub fn from_file(path: &Path) -> Result<DemoStore, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::DemoStore {
            line: 0,
            reason: e.to_string(),
        })?;
        DemoStore::parse(&text)
    }

    pub fn get(&self, id: &str) -> Result<&Demo, PromptError> {
        self.demos
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| PromptError::UnknownDemo(id.to_string()))
    }

    pub fn for_task(&self, task: TaskKind) -> impl Iterator<Item = &Demo> {
        self.demos.iter().filter(move |d| d.task == task)
    }

    /// Demonstration assigned to a sample: chosen among the task's demos by
    /// a stable hash of the sample id.
    pub fn assign(&self, task: TaskKind, sample_id: &str) -> Option<&Demo> {
        let pool: Vec<&Demo> = self.for_task(task).collect();
        if pool.is_empty() {
            return None;
        }
        let h = sample_id
            .bytes()
            .fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
        Some(pool[(h % pool.len() as u64) as usize])
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }
}

fn record(component: &Component, iupac: Option<&str>, groups: &[String]) -> String {
    format!(
        "{{\"SMILES\": {}, \"IUPAC\": {}, \"Function Groups\": {}}}",
        serde_json::Value::String(component.smiles.clone()),
        iupac.map_or(serde_json::Value::Null, |s| serde_json::Value::String(s.into())),
        serde_json::to_string(groups).expect("strings serialize"),
    )
}

fn records(sample: &ReasoningSample, components: &[Component], role: Option<Role>) -> String {
    components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.role == role)
        .map(|(i, c)| {
            let name = sample.anchors.iupac_names.get(i).and_then(|n| n.as_deref());
            let groups = sample
                .anchors
                .functional_groups
                .get(i)
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            record(c, name, groups)
        })
        .collect::<Vec<_>>()
        .join(".")
}

/// Slot values available when generating for `sample`.
pub fn generation_slots(sample: &ReasoningSample, demos: &DemoStore) -> Result<BTreeMap<String, String>, PromptError> {
    let components = sample.components()?;
    let mut v = BTreeMap::new();
    let demo = match &sample.anchors.demo_id {
        Some(id) => demos.get(id)?,
        None => demos
            .assign(sample.task, &sample.id)
            .ok_or(PromptError::NoDemoForTask(sample.task))?,
    };
    v.insert("expert_demos".into(), demo.text.clone());
    v.insert("query".into(), sample.query.clone());
    v.insert("ground_truth".into(), sample.ground_truth.clone());
    match sample.task {
        TaskKind::RxnRecognition | TaskKind::RxnPrediction => {
            v.insert("reactants".into(), records(sample, &components, Some(Role::Reactant)));
            v.insert("agents".into(), records(sample, &components, Some(Role::Agent)));
            v.insert("products".into(), records(sample, &components, Some(Role::Product)));
        }
        _ => {
            v.insert("molecule".into(), records(sample, &components, None));
        }
    }
    Ok(v)
}

/// Slot values for the independent verifier: the ground truth, and any
/// text that spells it out, is left out.
pub fn verifier_slots(sample: &ReasoningSample, reasoning: &str) -> Result<BTreeMap<String, String>, PromptError> {
    let mut v = BTreeMap::new();
    v.insert("reasoning".into(), reasoning.to_string());
    if sample.task == TaskKind::Caption {
        v.insert("caption".into(), reasoning.to_string());
    }
    if sample.task == TaskKind::RxnPrediction {
        let components = sample.components()?;
        let plain = |role| {
            components
                .iter()
                .filter(|c| c.role == Some(role))
                .map(|c| c.smiles.as_str())
                .collect::<Vec<_>>()
                .join(".")
        };
        v.insert("reactants".into(), plain(Role::Reactant));
        v.insert("agents".into(), plain(Role::Agent));
    }
    Ok(v)
}

pub fn build_prompt(sample: &ReasoningSample, template: &Template, demos: &DemoStore) -> Result<String, PromptError> {
    template.render(&generation_slots(sample, demos)?)
}
