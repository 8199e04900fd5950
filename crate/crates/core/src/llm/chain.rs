use thiserror::Error;

use super::gateway::{CallError, Gateway};
use super::template::{PromptTemplate, Record, Variables};

/// Maps one step's output (and its inputs) to the next step's variables.
pub type Adapter = Box<dyn Fn(&Record, &Variables) -> Variables + Send + Sync>;

pub struct ChainStep {
    pub template: PromptTemplate,
    /// Ignored on the last step.
    pub adapter: Adapter,
}

impl ChainStep {
    pub fn new(
        template: PromptTemplate,
        adapter: impl Fn(&Record, &Variables) -> Variables + Send + Sync + 'static,
    ) -> Self {
        ChainStep {
            template,
            adapter: Box::new(adapter),
        }
    }

    pub fn last(template: PromptTemplate) -> Self {
        Self::new(template, |_, v| v.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub records: Vec<Record>,
    pub exchange_ids: Vec<u64>,
}

impl ChainOutcome {
    pub fn final_record(&self) -> &Record {
        self.records.last().expect("chains have at least one step")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("chain has no steps")]
    Empty,
    #[error("step {step} ({template_id}) failed: {source}")]
    Step {
        /// 1-based.
        step: usize,
        template_id: String,
        #[source]
        source: CallError,
    },
}

/// Run templates in sequence, feeding each record through its adapter.
pub fn chain(gateway: &Gateway, steps: &[ChainStep], input: Variables) -> Result<ChainOutcome, ChainError> {
    if steps.is_empty() {
        return Err(ChainError::Empty);
    }
    let mut vars = input;
    let mut outcome = ChainOutcome {
        records: Vec::with_capacity(steps.len()),
        exchange_ids: Vec::new(),
    };
    for (i, step) in steps.iter().enumerate() {
        let out = gateway
            .call_structured(&step.template, &vars)
            .map_err(|source| ChainError::Step {
                step: i + 1,
                template_id: step.template.template_id.clone(),
                source,
            })?;
        outcome.exchange_ids.extend(&out.exchange_ids);
        if i + 1 < steps.len() {
            vars = (step.adapter)(&out.record, &vars);
        }
        outcome.records.push(out.record);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::backend::{FixtureTable, StubBackend};
    use crate::llm::gateway::{GatewayError, GatewayLimits};
    use crate::llm::template::{vars, Decoding, FieldSpec, OutputSchema};

    fn t(id: &str, instr: &str, field: &str) -> PromptTemplate {
        PromptTemplate {
            template_id: id.into(),
            role_preamble: "p".into(),
            instructions: instr.into(),
            few_shot: vec![],
            output_schema: OutputSchema(vec![FieldSpec::string(field)]),
            decoding: Decoding::default(),
        }
    }

    #[test]
    fn feeds_records_forward_and_names_failing_step() {
        let a = t("a", "say {x}", "y");
        let b = t("b", "echo {y}", "z");
        let mut table = FixtureTable::new();
        table.record(&a.render(&vars([("x", "1")])).unwrap(), r#"{"y":"two"}"#);
        table.record(&b.render(&vars([("y", "two")])).unwrap(), r#"{"z":"three"}"#);
        let limits = GatewayLimits {
            backoff_base_ms: 0,
            ..Default::default()
        };
        let gw = Gateway::new(StubBackend::new(table), limits);
        let steps = [
            ChainStep::new(a, |r, _| vars([("y", r.text("y").unwrap())])),
            ChainStep::last(b),
        ];
        let out = chain(&gw, &steps, vars([("x", "1")])).unwrap();
        assert_eq!(out.final_record().text("z"), Some("three"));
        assert_eq!(out.exchange_ids, [1, 2]);

        let err = chain(&gw, &steps, vars([("x", "9")])).unwrap_err();
        assert!(matches!(
            err,
            ChainError::Step {
                step: 1,
                source: CallError::Gateway(GatewayError::MissingFixture { .. }),
                ..
            }
        ));
        assert_eq!(chain(&gw, &[], Variables::new()), Err(ChainError::Empty));
    }
}
