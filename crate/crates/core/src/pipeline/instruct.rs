//! Direct question-answer records without a reasoning block, with the
//! target wrapped in the answer delimiters.

use serde::{Deserialize, Serialize};

use super::sample::{ReasoningSample, TaskKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstructError {
    #[error("sample {id}: missing {anchor}")]
    MissingAnchor { id: String, anchor: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub id: String,
    pub task: TaskKind,
    pub instruction: String,
    pub image_ref: Option<String>,
    pub target: String,
}

fn instruction_for(task: TaskKind) -> &'static str {
    match task {
        TaskKind::MolRecognition => "Write the SMILES of the molecule shown in the image.",
        TaskKind::RxnRecognition => "Write the reaction shown in the image as reaction SMILES.",
        TaskKind::RxnPrediction => "Predict the main product of the reaction shown in the image and give its SMILES.",
        TaskKind::MolToIupac => "Give the IUPAC name of the molecule shown in the image.",
        TaskKind::Caption => "Describe the molecule shown in the image.",
    }
}

pub fn reformat_instruction(sample: &ReasoningSample) -> Result<InstructionRecord, InstructError> {
    let missing = |anchor| InstructError::MissingAnchor {
        id: sample.id.clone(),
        anchor,
    };
    let target = match sample.task {
        TaskKind::MolRecognition | TaskKind::RxnRecognition | TaskKind::RxnPrediction => {
            format!("<SMILES>{}</SMILES>", sample.ground_truth.trim())
        }
        TaskKind::MolToIupac => {
            let name = sample
                .anchors
                .iupac_names
                .first()
                .and_then(|n| n.as_deref())
                .filter(|n| !n.trim().is_empty())
                .ok_or_else(|| missing("IUPAC name"))?;
            format!("<IUPAC>{}</IUPAC>", name.trim())
        }
        TaskKind::Caption => sample
            .generated_text
            .as_deref()
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| missing("caption"))?
            .trim()
            .to_string(),
    };
    Ok(InstructionRecord {
        id: sample.id.clone(),
        task: sample.task,
        instruction: instruction_for(sample.task).to_string(),
        image_ref: sample.image_ref.clone(),
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recognition_target() {
        let s = ReasoningSample::new("m", TaskKind::MolRecognition, "CCO", "CCO");
        assert_eq!(reformat_instruction(&s).unwrap().target, "<SMILES>CCO</SMILES>");
    }

    #[test]
    fn naming_needs_the_anchor() {
        let mut s = ReasoningSample::new("m", TaskKind::MolToIupac, "CCO", "ethanol");
        assert!(matches!(
            reformat_instruction(&s),
            Err(InstructError::MissingAnchor { .. })
        ));
        s.anchors.iupac_names = vec![Some("ethanol".into())];
        let r = reformat_instruction(&s).unwrap();
        assert_eq!(r.target, "<IUPAC>ethanol</IUPAC>");
        assert!(!r.target.contains("<think>"));
    }
}
