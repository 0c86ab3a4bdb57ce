//! Prompt template with five sections (capacity/role, insight, statement,
//! personality, experiment) and named placeholder substitution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search_space::{Genotype, NUM_EDGES, NUM_OPERATIONS};

pub const PLACEHOLDER_NAMES: [&str; 4] = [
    "number_of_operations",
    "number_of_edges",
    "best_solution",
    "best_accuracy",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template section '{0}' must not be empty")]
    EmptySection(&'static str),
    #[error("unresolved placeholder '{{{0}}}'")]
    UnresolvedPlaceholder(String),
}

/// The five prompt sections. Empty optional sections are omitted from the
/// rendered prompt; `statement` and `experiment` must be non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub capacity_role: String,
    pub insight: String,
    pub statement: String,
    pub personality: String,
    pub experiment: String,
}

impl PromptTemplate {
    pub fn new(
        capacity_role: impl Into<String>,
        insight: impl Into<String>,
        statement: impl Into<String>,
        personality: impl Into<String>,
        experiment: impl Into<String>,
    ) -> Result<PromptTemplate, PromptError> {
        let tpl = PromptTemplate {
            capacity_role: capacity_role.into(),
            insight: insight.into(),
            statement: statement.into(),
            personality: personality.into(),
            experiment: experiment.into(),
        };
        if tpl.statement.trim().is_empty() {
            return Err(PromptError::EmptySection("statement"));
        }
        if tpl.experiment.trim().is_empty() {
            return Err(PromptError::EmptySection("experiment"));
        }
        Ok(tpl)
    }

    fn sections(&self) -> [&str; 5] {
        [
            &self.capacity_role,
            &self.insight,
            &self.statement,
            &self.personality,
            &self.experiment,
        ]
    }
}

impl Default for PromptTemplate {
    /// The standard single-solution prompt.
    fn default() -> PromptTemplate {
        PromptTemplate::new(
            "Act as a combinatorial optimizer for adversarial robustness \
             neural architecture search.",
            "The objective of this task is to maximize the accuracy.",
            "There are {number_of_operations} possible operations and \
             {number_of_edges} edges that need to be deployed. You need to \
             specify a {number_of_edges}-bit array where the value in each \
             index is an integer within [0, {number_of_operations}). The \
             current best solution is {best_solution} with the best accuracy \
             {best_accuracy}.",
            "",
            "Give me one solution in the array-like format.",
        )
        .expect("default template is valid")
    }
}

/// Values substituted into the template each iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub number_of_operations: usize,
    pub number_of_edges: usize,
    pub best_solution: Genotype,
    pub best_accuracy: f64,
}

impl PromptContext {
    pub fn new(best_solution: Genotype, best_accuracy: f64) -> PromptContext {
        PromptContext {
            number_of_operations: NUM_OPERATIONS,
            number_of_edges: NUM_EDGES,
            best_solution,
            best_accuracy,
        }
    }
}

/// Substitutes every placeholder and joins the non-empty sections with
/// newlines. The genotype is rendered in its canonical bracketed form and
/// the accuracy with two decimal places. Any `{name}` left after
/// substitution is an error.
pub fn render_prompt(tpl: &PromptTemplate, ctx: &PromptContext) -> Result<String, PromptError> {
    let substitutions = [
        ("{number_of_operations}", ctx.number_of_operations.to_string()),
        ("{number_of_edges}", ctx.number_of_edges.to_string()),
        ("{best_solution}", ctx.best_solution.to_string()),
        ("{best_accuracy}", format!("{:.2}", ctx.best_accuracy)),
    ];
    let mut rendered_sections = Vec::with_capacity(5);
    for section in tpl.sections() {
        if section.trim().is_empty() {
            continue;
        }
        let mut text = section.to_string();
        for (pattern, value) in &substitutions {
            text = text.replace(pattern, value);
        }
        if let Some(name) = find_placeholder(&text) {
            return Err(PromptError::UnresolvedPlaceholder(name));
        }
        rendered_sections.push(text);
    }
    Ok(rendered_sections.join("\n"))
}

/// First `{name}` span left in the text, if any.
fn find_placeholder(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut start = None;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'{' => start = Some(i),
            b'}' => {
                if let Some(s) = start.take() {
                    return Some(text[s + 1..i].to_string());
                }
            }
            _ => {}
        }
    }
    None
}
