use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptId {
    TaskName,
    Themes,
    GroupSummary,
}

/// Instruction text followed by the input text. `{n}` is replaced by the
/// requested theme count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: PromptId,
    pub instruction: &'static str,
}

pub const TASK_NAME: PromptTemplate = PromptTemplate {
    id: PromptId::TaskName,
    instruction: "Find a theme for the following text, and the generated theme is limited to within 5 words.",
};

pub const THEMES: PromptTemplate = PromptTemplate {
    id: PromptId::Themes,
    instruction: "Your task is to find {n} themes for the following text, Limit each theme to 5 words",
};

pub const GROUP_SUMMARY: PromptTemplate = PromptTemplate {
    id: PromptId::GroupSummary,
    instruction: "Write a brief summary of the following sentences in at most 25 words.",
};

impl PromptTemplate {
    pub fn render(&self, text: &str, n: usize) -> String {
        format!("{}\n\n{}", self.instruction.replace("{n}", &n.to_string()), text)
    }
}
