use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chartalk_core::agent::{
    assemble_system_prompt, chat, replay_log, AgentMode, AgentProfile, ChatEvent, ChatSession, LlmProvider,
    MockTranscript, OpenAiProvider, PromptBundle, ProviderConfig, ScriptedProvider,
};
use chartalk_core::chart::{ChartDocument, ChartSpec, ElementId};
use chartalk_core::markup::{parse_citations, validate};
use chartalk_core::semantics::KnowledgeFile;
use chartalk_service::pipeline::render_chart;
use chartalk_service::store::pretty;
use chartalk_service::{serve, AppState, ServiceConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chartalk", version, about = "Distribution charts you can talk to")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a chart to SVG and write its knowledge file next to it.
    Render {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "chart.svg")]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        /// TOML config file; CHARTALK_* variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
        #[arg(long)]
        storage: Option<PathBuf>,
        /// Answer with a scripted transcript instead of a model.
        #[arg(long)]
        mock: Option<PathBuf>,
    },
    /// Ask one question about a chart and print the checked answer.
    Ask {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Scripted transcript; without it the chat-completions API is used.
        #[arg(long)]
        mock: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        mode: AgentMode,
        #[arg(long)]
        description: Option<String>,
        question: String,
    },
    /// Check the citations of a transcript against a chart's id list.
    Validate {
        /// Session log (.jsonl), session JSON, or mock transcript.
        transcript: PathBuf,
        /// Knowledge file written by `render` or served by the API.
        #[arg(long)]
        knowledge: PathBuf,
    },
}

type CliResult = Result<ExitCode, String>;

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_chart(csv: &Path, spec: &Path) -> Result<ChartDocument, String> {
    let spec: ChartSpec = serde_json::from_str(&read(spec)?).map_err(|e| format!("{}: {e}", spec.display()))?;
    let bytes = std::fs::read(csv).map_err(|e| format!("{}: {e}", csv.display()))?;
    let (doc, _) = render_chart(&bytes, &spec).map_err(|e| e.to_string())?;
    Ok(doc)
}

fn knowledge_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "chart".into());
    out.with_file_name(format!("{stem}.knowledge.json"))
}

fn render(csv: &Path, spec_path: &Path, out: &Path) -> CliResult {
    let spec: ChartSpec =
        serde_json::from_str(&read(spec_path)?).map_err(|e| format!("{}: {e}", spec_path.display()))?;
    let bytes = std::fs::read(csv).map_err(|e| format!("{}: {e}", csv.display()))?;
    let (doc, knowledge) = render_chart(&bytes, &spec).map_err(|e| e.to_string())?;
    let kpath = knowledge_path(out);
    std::fs::write(out, &doc.svg).map_err(|e| format!("{}: {e}", out.display()))?;
    std::fs::write(&kpath, pretty(&knowledge)).map_err(|e| format!("{}: {e}", kpath.display()))?;
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} and {} ({} elements)", out.display(), kpath.display(), doc.id_list.len());
    Ok(ExitCode::SUCCESS)
}

fn mock_provider(path: &Path) -> Result<ScriptedProvider, String> {
    let script = MockTranscript::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(ScriptedProvider::new(script))
}

async fn ask(
    csv: &Path,
    spec: &Path,
    mock: Option<&Path>,
    mode: AgentMode,
    description: Option<String>,
    question: &str,
) -> CliResult {
    let doc = load_chart(csv, spec)?;
    let provider: Box<dyn LlmProvider> = match mock {
        Some(p) => Box::new(mock_provider(p)?),
        None => Box::new(OpenAiProvider::new(ProviderConfig::from_env())),
    };
    let bundle = PromptBundle::from_document(&doc, description, None).map_err(|e| e.to_string())?;
    let profile = AgentProfile::with_mode(mode);
    let prompt = assemble_system_prompt(&bundle, &profile).map_err(|e| e.to_string())?;
    let mut session = ChatSession::new("cli", "cli", profile, prompt);
    let turn = chat(&mut session, &doc, question, provider.as_ref(), |ev| {
        if let ChatEvent::Error { message } = ev {
            eprintln!("error: {message}");
        }
        true
    })
    .await
    .map_err(|e| e.to_string())?;
    println!("{}", turn.assistant.source());
    for c in turn.validation.valid.iter() {
        println!("  [{}] {} ok", c.ordinal.unwrap_or_default(), c.id);
    }
    for c in turn.validation.unknown.iter() {
        println!("  [{}] {} unknown", c.ordinal.unwrap_or_default(), c.id);
    }
    Ok(ExitCode::SUCCESS)
}

/// Assistant texts of a transcript in any of the accepted formats.
fn assistant_texts(text: &str) -> Result<Vec<String>, String> {
    if let Ok(s) = serde_json::from_str::<ChatSession>(text) {
        return Ok(s.turns.iter().map(|t| t.assistant.source()).collect());
    }
    if let Ok(m) = MockTranscript::from_json(text) {
        return Ok(m
            .replies
            .iter()
            .map(|r| match &r.text {
                Some(t) => t.clone(),
                None => r.chunks.concat(),
            })
            .collect());
    }
    let s = replay_log(text).map_err(|e| format!("not a session log, session or mock transcript: {e}"))?;
    Ok(s.turns.iter().map(|t| t.assistant.source()).collect())
}

fn validate_transcript(transcript: &Path, knowledge: &Path) -> CliResult {
    let k: KnowledgeFile =
        serde_json::from_str(&read(knowledge)?).map_err(|e| format!("{}: {e}", knowledge.display()))?;
    let ids: Vec<ElementId> = k.id_list;
    let mut unknown = 0;
    let mut total = 0;
    for (i, text) in assistant_texts(&read(transcript)?)?.iter().enumerate() {
        let report = validate(&parse_citations(text), &ids);
        total += report.valid.len() + report.unknown.len();
        for c in &report.unknown {
            unknown += 1;
            println!(
                "turn {}: citation {} `{}` is not an element of this chart",
                i + 1,
                c.ordinal.unwrap_or_default(),
                c.id
            );
        }
    }
    println!("{total} citations, {unknown} unknown");
    Ok(if unknown == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

async fn run_server(
    config: Option<PathBuf>,
    listen: Option<std::net::SocketAddr>,
    storage: Option<PathBuf>,
    mock: Option<PathBuf>,
) -> CliResult {
    let mut cfg = ServiceConfig::load(config.as_deref()).map_err(|e| e.to_string())?;
    if let Some(l) = listen {
        cfg.listen = l;
    }
    if let Some(s) = storage {
        cfg.storage_dir = s;
    }
    if let Some(m) = mock {
        cfg.provider.kind = chartalk_service::config::ProviderKind::Mock;
        cfg.provider.mock_transcript = Some(m);
    }
    let listen = cfg.listen;
    let state = AppState::from_config(cfg).map_err(|e| e.to_string())?;
    serve(state, listen).await.map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Render { csv, spec, out } => render(&csv, &spec, &out),
        Command::Serve {
            config,
            listen,
            storage,
            mock,
        } => run_server(config, listen, storage, mock).await,
        Command::Ask {
            csv,
            spec,
            mock,
            mode,
            description,
            question,
        } => ask(&csv, &spec, mock.as_deref(), mode, description, &question).await,
        Command::Validate { transcript, knowledge } => validate_transcript(&transcript, &knowledge),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
