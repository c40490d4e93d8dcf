use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cogpath_core::classifier::{classify_post, ClassifierBackend, MockClassifier, RemoteClassifier};
use cogpath_core::corpus::{
    bundled_manifest, filter_posts, load_corpus, split_posts, AnnotationRecord, Corpus, DatasetManifest, FilterConfig,
    Split, DEFAULT_RATIOS,
};
use cogpath_core::llm::{LlmClassifier, LlmClient, LlmSummarizer, PromptTemplate};
use cogpath_core::metrics::{
    classification_report, evaluate_summaries, ClassificationReport, SummaryScores, Tokenizer,
};
use cogpath_core::pathway::{
    extract_pathway, IdentitySummarizer, PathwayConfig, PathwayExport, RemoteSummarizer, SummarizerBackend,
};
use cogpath_core::{CategoryScheme, ParentCategory, SentenceLabel};
use cogpath_service::ServiceConfig;
use serde::Serialize;
use serde_json::Value;

use crate::config::FileConfig;
use crate::{BackendKind, Command, GlobalArgs, TokenizerArg, UsageError};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_ADDR: &str = "127.0.0.1:8080";

/// Flags merged over the config file.
struct Ctx {
    file: FileConfig,
    seed: u64,
    backend: BackendKind,
    out: Option<PathBuf>,
    fixture: Option<PathBuf>,
    scheme: CategoryScheme,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl Ctx {
    fn new(global: &GlobalArgs) -> Result<Self> {
        let file = FileConfig::load(global.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
        let backend = match global.backend {
            Some(b) => b,
            None => match file.backend.as_deref() {
                None | Some("mock") => BackendKind::Mock,
                Some("remote") => BackendKind::Remote,
                Some("llm") => BackendKind::Llm,
                Some(other) => return Err(usage(format!("unknown backend {other:?} in config"))),
            },
        };
        Ok(Self {
            seed: global.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            backend,
            out: global.out.clone(),
            fixture: global.fixture.clone(),
            scheme: CategoryScheme::canonical(),
            file,
        })
    }

    fn pathway_config(&self) -> Result<PathwayConfig> {
        let mut c = PathwayConfig::default();
        if let Some(s) = &self.file.pathway.separator {
            c.separator = s.clone();
        }
        if let Some(b) = self.file.pathway.batch_size {
            if b == 0 {
                return Err(usage("pathway.batch_size must be positive"));
            }
            c.batch_size = b;
        }
        Ok(c)
    }

    fn load(&self, path: &Path) -> Result<Corpus> {
        load_corpus(path, &self.scheme).with_context(|| format!("reading {}", path.display()))
    }

    fn backends(&self, input: &Corpus) -> Result<(Box<dyn ClassifierBackend>, Box<dyn SummarizerBackend>)> {
        match self.backend {
            BackendKind::Mock => {
                let mock = match &self.fixture {
                    Some(path) => MockClassifier::from_annotations(&self.load(path)?.annotations),
                    None => MockClassifier::from_annotations(&input.annotations),
                };
                Ok((Box::new(mock), Box::new(IdentitySummarizer)))
            }
            BackendKind::Remote => {
                let remote =
                    self.file.remote.as_ref().ok_or_else(|| usage("backend remote needs a [remote] section"))?;
                let token = match &remote.token_env {
                    Some(name) => Some(
                        std::env::var(name).map_err(|_| usage(format!("environment variable {name} is not set")))?,
                    ),
                    None => None,
                };
                Ok((
                    Box::new(RemoteClassifier::new(&remote.url, token.clone())),
                    Box::new(RemoteSummarizer::new(&remote.url, token)),
                ))
            }
            BackendKind::Llm => {
                let config = self.file.llm.clone().ok_or_else(|| usage("backend llm needs an [llm] section"))?;
                let client = match &self.file.pathway.prompt_template {
                    Some(path) => {
                        let template = PromptTemplate::load(path).map_err(|e| usage(e.to_string()))?;
                        LlmClient::with_template(config, template)
                    }
                    None => LlmClient::new(config),
                }
                .map_err(|e| usage(e.to_string()))?;
                let client = Arc::new(client);
                Ok((
                    Box::new(LlmClassifier::new(Arc::clone(&client))),
                    Box::new(LlmSummarizer::new(client, self.scheme.clone())),
                ))
            }
        }
    }

    fn write_out(&self, bytes: &[u8]) -> Result<()> {
        if let Some(path) = &self.out {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_out(text.as_bytes())
    }

    fn write_lines<T: Serialize>(&self, values: impl IntoIterator<Item = T>) -> Result<()> {
        let mut text = String::new();
        for v in values {
            text.push_str(&serde_json::to_string(&v)?);
            text.push('\n');
        }
        self.write_out(text.as_bytes())
    }
}

fn require_posts(corpus: &Corpus, path: &Path) -> Result<()> {
    if corpus.posts.is_empty() {
        bail!("{} contains no posts", path.display());
    }
    Ok(())
}

pub fn run(command: Command, global: &GlobalArgs) -> Result<()> {
    let ctx = Ctx::new(global)?;
    match command {
        Command::Segment { input } => segment(&ctx, &input),
        Command::Split { input, min_words, ascii_filter } => split(&ctx, &input, min_words, ascii_filter),
        Command::Classify { input } => classify(&ctx, &input),
        Command::Extract { input } => extract(&ctx, &input),
        Command::EvalCls { pred, gold } => {
            let report = eval_cls(&ctx, &pred, &gold)?;
            print!("{}", report.render());
            ctx.write_json(&report)
        }
        Command::EvalSum { pred, gold, tokenizer } => {
            let scores = eval_sum(&ctx, &pred, &gold, tokenizer)?;
            print!("{}", scores.render("model"));
            ctx.write_json(&scores)
        }
        Command::ValidateManifest { manifest, corpus } => validate_manifest(&ctx, manifest, corpus),
        Command::Report { manifest, cls_pred, cls_gold, sum_pred, sum_gold, tokenizer, model } => {
            report(&ctx, manifest, cls_pred.zip(cls_gold), sum_pred.zip(sum_gold), tokenizer, &model)
        }
        Command::Serve { addr, store } => serve(&ctx, addr, store),
    }
}

fn segment(ctx: &Ctx, input: &Path) -> Result<()> {
    let corpus = ctx.load(input)?;
    require_posts(&corpus, input)?;
    let mut sentences = Vec::new();
    println!("{:<24} {:>9}", "Post", "Sentences");
    for post in &corpus.posts {
        let s = post.segment().sentences;
        println!("{:<24} {:>9}", post.id, s.len());
        sentences.extend(s);
    }
    println!("{:<24} {:>9}", "Total", sentences.len());
    ctx.write_lines(&sentences)
}

#[derive(Serialize)]
struct SplitOutput<'a> {
    seed: u64,
    counts: cogpath_core::corpus::SplitCounts,
    assignments: &'a BTreeMap<String, Split>,
    excluded: Vec<cogpath_core::corpus::Exclusion>,
}

fn split(ctx: &Ctx, input: &Path, min_words: Option<usize>, ascii_filter: bool) -> Result<()> {
    let corpus = ctx.load(input)?;
    require_posts(&corpus, input)?;
    let (posts, excluded) = if min_words.is_some() || ascii_filter {
        let config = FilterConfig { min_words: min_words.unwrap_or(0), ascii_filter };
        let outcome = filter_posts(corpus.posts.clone(), config);
        (outcome.retained, outcome.excluded)
    } else {
        (corpus.posts.clone(), Vec::new())
    };
    if posts.is_empty() {
        bail!("no posts left after filtering");
    }
    let assignment = split_posts(&posts, DEFAULT_RATIOS, ctx.seed)?;
    let counts = assignment.counts();
    println!("{:<8} {:>7}", "Split", "Posts");
    for s in Split::ALL {
        println!("{:<8} {:>7}", s.name(), counts.get(s));
    }
    println!("{:<8} {:>7}", "Total", counts.total());
    if !excluded.is_empty() {
        println!("excluded {} posts", excluded.len());
    }
    if !corpus.annotations.is_empty() {
        println!();
        print!("{}", DatasetManifest::from_corpus(&corpus, &assignment).render());
    }
    ctx.write_json(&SplitOutput { seed: ctx.seed, counts, assignments: &assignment.assignments, excluded })
}

fn classify(ctx: &Ctx, input: &Path) -> Result<()> {
    let corpus = ctx.load(input)?;
    require_posts(&corpus, input)?;
    let (classifier, _) = ctx.backends(&corpus)?;
    let batch = ctx.pathway_config()?.batch_size;
    let mut records = Vec::new();
    println!("{:<24} {:>9} {:>9}", "Post", "Sentences", "Labelled");
    for post in &corpus.posts {
        let segmented = post.segment();
        let predictions = classify_post(&segmented, classifier.as_ref(), &ctx.scheme, batch)
            .with_context(|| format!("classifying post {}", post.id))?;
        let labelled = predictions.iter().filter(|p| !p.label.is_empty()).count();
        println!("{:<24} {:>9} {:>9}", post.id, predictions.len(), labelled);
        for (s, p) in segmented.sentences.iter().zip(&predictions) {
            records.push(AnnotationRecord::from_label(s, &p.label));
        }
    }
    ctx.write_lines(&records)
}

fn extract(ctx: &Ctx, input: &Path) -> Result<()> {
    let corpus = ctx.load(input)?;
    require_posts(&corpus, input)?;
    let (classifier, summarizer) = ctx.backends(&corpus)?;
    let config = ctx.pathway_config()?;
    let mut exports = Vec::new();
    println!("{:<24} {:>9}  Pathway", "Post", "Sentences");
    for post in &corpus.posts {
        let extraction = extract_pathway(post, classifier.as_ref(), summarizer.as_ref(), &ctx.scheme, &config)
            .with_context(|| format!("extracting post {}", post.id))?;
        let parents: Vec<&str> = extraction.pathway.composites.keys().map(|p| p.code()).collect();
        let mut line = format!("{:<24} {:>9}  {}", post.id, extraction.sentences.len(), parents.join(" "));
        if !extraction.pathway.failures.is_empty() {
            let failed: Vec<&str> = extraction.pathway.failures.keys().map(|p| p.code()).collect();
            let _ = write!(line, "  (summary failed: {})", failed.join(" "));
        }
        println!("{line}");
        exports.push(PathwayExport::from(&extraction.pathway));
    }
    ctx.write_lines(&exports)
}

fn eval_cls(ctx: &Ctx, pred: &Path, gold: &Path) -> Result<ClassificationReport> {
    let gold = ctx.load(gold)?.annotations;
    let pred = ctx.load(pred)?.annotations;
    if gold.is_empty() {
        bail!("gold file has no annotations");
    }
    let mut by_key: BTreeMap<(String, usize), SentenceLabel> =
        pred.into_iter().map(|a| ((a.sentence.post_id, a.sentence.index), a.gold)).collect();
    let mut gold_labels = Vec::with_capacity(gold.len());
    let mut pred_labels = Vec::with_capacity(gold.len());
    for a in gold {
        let key = (a.sentence.post_id.clone(), a.sentence.index);
        let p = by_key.remove(&key).with_context(|| format!("no prediction for sentence {}", a.sentence.key()))?;
        gold_labels.push(a.gold);
        pred_labels.push(p);
    }
    if let Some(((post, index), _)) = by_key.into_iter().next() {
        bail!("prediction for sentence {post}#{index} has no gold label");
    }
    Ok(classification_report(&gold_labels, &pred_labels)?)
}

fn tokenizer(arg: TokenizerArg) -> Tokenizer {
    match arg {
        TokenizerArg::Auto => Tokenizer::Auto,
        TokenizerArg::Chars => Tokenizer::Chars,
        TokenizerArg::Words => Tokenizer::Words,
    }
}

/// Reads predicted summaries keyed by (post, parent). Accepts pathway exports,
/// `{post_id, parent, summary}` lines and summary-pair records.
fn read_predicted_summaries(ctx: &Ctx, path: &Path) -> Result<BTreeMap<(String, ParentCategory), String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    let mut insert = |line: usize, post: String, parent: ParentCategory, summary: String| {
        let key = (post, parent);
        if out.contains_key(&key) {
            bail!("line {line}: duplicate summary for {}/{}", key.0, key.1.code());
        }
        out.insert(key, summary);
        Ok(())
    };
    let parent_of = |line: usize, s: &str| -> Result<ParentCategory> {
        match ctx.scheme.normalize(s) {
            Ok(cogpath_core::Category::Parent(p)) => Ok(p),
            _ => bail!("line {line}: unknown parent {s:?}"),
        }
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).with_context(|| format!("line {line}"))?;
        if value.get("pathway").is_some() {
            let export: PathwayExport = serde_json::from_value(value).with_context(|| format!("line {line}"))?;
            for (parent, entry) in export.pathway {
                if let Some(summary) = entry.summary {
                    insert(line, export.post_id.clone(), parent, summary)?;
                }
            }
        } else {
            let field = |name: &str| value.get(name).and_then(Value::as_str);
            let post = field("post_id").with_context(|| format!("line {line}: missing post_id"))?;
            let parent = parent_of(line, field("parent").with_context(|| format!("line {line}: missing parent"))?)?;
            let summary = field("summary")
                .or_else(|| field("reference_summary"))
                .with_context(|| format!("line {line}: missing summary"))?;
            insert(line, post.to_string(), parent, summary.to_string())?;
        }
    }
    Ok(out)
}

/// Pairs every gold summary with its prediction. A missing prediction scores
/// as an empty candidate; predictions without a reference are ignored.
fn eval_sum(ctx: &Ctx, pred: &Path, gold: &Path, tok: TokenizerArg) -> Result<SummaryScores> {
    let gold = ctx.load(gold)?.summary_pairs;
    if gold.is_empty() {
        bail!("gold file has no summary pairs");
    }
    let predicted = read_predicted_summaries(ctx, pred)?;
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::with_capacity(gold.len());
    let mut missing = 0;
    for g in &gold {
        let key = (g.post_id.clone(), g.parent);
        if !seen.insert(key.clone()) {
            bail!("duplicate reference summary for {}/{}", g.post_id, g.parent.code());
        }
        let candidate = predicted.get(&key).cloned().unwrap_or_else(|| {
            missing += 1;
            String::new()
        });
        pairs.push((candidate, g.reference_summary.clone()));
    }
    if missing > 0 {
        eprintln!("warning: {missing} of {} references have no predicted summary", gold.len());
    }
    Ok(evaluate_summaries(&pairs, tokenizer(tok))?)
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

fn validate_manifest(ctx: &Ctx, manifest: Option<PathBuf>, corpus: Option<PathBuf>) -> Result<()> {
    let manifest = match (manifest, corpus) {
        (Some(path), _) => load_manifest(&path)?,
        (None, Some(path)) => {
            let corpus = ctx.load(&path)?;
            require_posts(&corpus, &path)?;
            let assignment = split_posts(&corpus.posts, DEFAULT_RATIOS, ctx.seed)?;
            DatasetManifest::from_corpus(&corpus, &assignment)
        }
        (None, None) => bundled_manifest(),
    };
    let report = manifest.validate();
    print!("{}", report.render());
    ctx.write_json(&report)?;
    if !report.all_passed() {
        bail!("{} manifest checks failed", report.failures().count());
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportOutput {
    manifest: DatasetManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summarization: Option<SummaryScores>,
}

fn report(
    ctx: &Ctx,
    manifest: Option<PathBuf>,
    cls: Option<(PathBuf, PathBuf)>,
    sum: Option<(PathBuf, PathBuf)>,
    tok: TokenizerArg,
    model: &str,
) -> Result<()> {
    let manifest = match manifest {
        Some(path) => load_manifest(&path)?,
        None => bundled_manifest(),
    };
    print!("{}", manifest.render());
    let classification = match cls {
        Some((pred, gold)) => {
            let r = eval_cls(ctx, &pred, &gold)?;
            println!();
            print!("{}", r.render());
            Some(r)
        }
        None => None,
    };
    let summarization = match sum {
        Some((pred, gold)) => {
            let s = eval_sum(ctx, &pred, &gold, tok)?;
            println!();
            print!("{}", s.render(model));
            Some(s)
        }
        None => None,
    };
    ctx.write_json(&ReportOutput { manifest, classification, summarization })
}

fn serve(ctx: &Ctx, addr: Option<String>, store: Option<PathBuf>) -> Result<()> {
    let section = &ctx.file.service;
    let addr = addr.or_else(|| section.addr.clone()).unwrap_or_else(|| DEFAULT_ADDR.to_string());
    let addr = addr.parse().map_err(|_| usage(format!("invalid address {addr:?}")))?;
    let auth_token = match &section.auth_token_env {
        Some(name) => Some(std::env::var(name).map_err(|_| usage(format!("environment variable {name} is not set")))?),
        None => None,
    };
    let defaults = ServiceConfig::default();
    let config = ServiceConfig {
        store_path: store.or_else(|| section.store_path.clone()).unwrap_or(defaults.store_path),
        auth_token,
        cors_origins: section.cors_origins.clone(),
        remote: ctx.file.remote.clone(),
        llm: ctx.file.llm.clone(),
        batch_size: ctx.pathway_config()?.batch_size,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(cogpath_service::serve(config, addr))?;
    Ok(())
}
