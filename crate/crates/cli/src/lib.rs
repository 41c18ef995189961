//! Command-line front end for the ACT-R confluence analyzer: model file
//! parsing, report rendering, simulation and translation output.

pub mod parser;
pub mod report;

use std::collections::BTreeMap;

use actr_confluence_core::actr::{actr_step, ActrModel};
use actr_confluence_core::confluence::{check_confluence, CheckOptions, Verdict};
use actr_confluence_core::translate::{translate_rule, translate_state};

pub use parser::{parse_model, print_model, ParseError};
pub use report::{to_json_report, JsonConfig, JsonReport};

/// Output format of the reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
}

/// What to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Check,
    Translate,
    Simulate,
    Validate,
}

/// A complete run configuration, mirroring the command line.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: String,
    pub max_steps: usize,
    pub universe_padding: usize,
    pub output_format: OutputFormat,
    /// Accepted for compatibility: the unified-store semantics always
    /// retains cleared chunks in the store, so this flag does not change
    /// results.
    pub clear_to_dm: bool,
    pub show_all_overlaps: bool,
}

impl RunConfig {
    pub fn new(command: Command, input_path: impl Into<String>) -> RunConfig {
        RunConfig {
            command,
            input_path: input_path.into(),
            max_steps: 1000,
            universe_padding: 2,
            output_format: OutputFormat::Text,
            clear_to_dm: false,
            show_all_overlaps: false,
        }
    }
}

/// Exit status contract: 0 confluent/ok, 1 not confluent, 2 unknown,
/// 3 input error.
pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_CONFLUENT: u8 = 1;
pub const EXIT_UNKNOWN: u8 = 2;
pub const EXIT_INPUT_ERROR: u8 = 3;

/// Runs one command on an already-loaded source, returning the report
/// text and the exit status.
pub fn run_on_source(source: &str, config: &RunConfig) -> (String, u8) {
    let model = match parse_model(source) {
        Ok(m) => m,
        Err(e) => return (format!("error: {e}\n"), EXIT_INPUT_ERROR),
    };
    let normalized = match model.set_normal_form() {
        Ok(m) => m,
        Err(e) => return (format!("error: {e}\n"), EXIT_INPUT_ERROR),
    };
    match config.command {
        Command::Validate => (validate_summary(&model), EXIT_OK),
        Command::Translate => {
            let mut out = String::new();
            for rule in &normalized.rules {
                out.push_str(&format!("{}\n", translate_rule(rule, &normalized.buffers)));
            }
            (out, EXIT_OK)
        }
        Command::Simulate => (simulate(&normalized, config.max_steps), EXIT_OK),
        Command::Check => {
            let opts = CheckOptions {
                max_steps: config.max_steps,
                universe_padding: config.universe_padding,
                ..CheckOptions::default()
            };
            let report = check_confluence(&normalized, &opts);
            let code = match report.verdict {
                Verdict::Confluent => EXIT_OK,
                Verdict::NotConfluent => EXIT_NOT_CONFLUENT,
                Verdict::Unknown => EXIT_UNKNOWN,
            };
            let text = match config.output_format {
                OutputFormat::Text => report::render_text(&report, config.show_all_overlaps),
                OutputFormat::Json => {
                    let json = to_json_report(
                        &report,
                        JsonConfig {
                            command: "check".into(),
                            input: config.input_path.clone(),
                            max_steps: config.max_steps,
                            universe_padding: config.universe_padding,
                            format: "json".into(),
                            clear_to_dm: config.clear_to_dm,
                            all_overlaps: config.show_all_overlaps,
                        },
                        config.show_all_overlaps,
                    );
                    let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
                    s.push('\n');
                    s
                }
            };
            (text, code)
        }
    }
}

/// Loads the input file and runs the command.
pub fn run(config: &RunConfig) -> (String, u8) {
    match std::fs::read_to_string(&config.input_path) {
        Ok(source) => run_on_source(&source, config),
        Err(e) => (
            format!("error: cannot read {}: {e}\n", config.input_path),
            EXIT_INPUT_ERROR,
        ),
    }
}

fn validate_summary(model: &ActrModel) -> String {
    let declared_types = model.types.len().saturating_sub(1); // nil is built in
    let declared_chunks = model
        .initial
        .store
        .chunks()
        .filter(|c| c.id != actr_confluence_core::NIL_ID)
        .count();
    format!(
        "ok: {} rules, {} types, {} chunks, {} buffers\n",
        model.rules.len(),
        declared_types,
        declared_chunks,
        model.buffers.len()
    )
}

/// Breadth-first derivation tree of the reference interpreter, printed to
/// quiescence or until the node budget is spent.
fn simulate(model: &ActrModel, max_steps: usize) -> String {
    let mut out = String::new();
    let mut states = vec![model.initial.clone()];
    let mut dumps = vec![translate_state(&model.initial).dump()];
    let mut index: BTreeMap<String, usize> = BTreeMap::from([(dumps[0].clone(), 0)]);
    let mut edges: Vec<Vec<(String, usize)>> = vec![Vec::new()];
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut expanded = 0usize;
    let mut truncated = false;

    while let Some(idx) = queue.pop_front() {
        if expanded >= max_steps {
            truncated = true;
            break;
        }
        expanded += 1;
        for (rule, succ) in actr_step(&states[idx].clone(), model) {
            let dump = translate_state(&succ).dump();
            let target = match index.get(&dump) {
                Some(t) => *t,
                None => {
                    let t = states.len();
                    states.push(succ);
                    dumps.push(dump.clone());
                    index.insert(dump, t);
                    edges.push(Vec::new());
                    queue.push_back(t);
                    t
                }
            };
            edges[idx].push((rule, target));
        }
    }

    for (i, dump) in dumps.iter().enumerate() {
        let tag = if edges[i].is_empty() { "  (quiescent)" } else { "" };
        out.push_str(&format!("state {i}: {dump}{tag}\n"));
        for (rule, target) in &edges[i] {
            out.push_str(&format!("  {rule} -> state {target}\n"));
        }
    }
    if truncated {
        out.push_str(&format!("(stopped after {max_steps} expansions)\n"));
    }
    out
}
