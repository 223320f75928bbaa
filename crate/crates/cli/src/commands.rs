//! The five subcommands. Each reads its inputs, does the work (in parallel
//! where records are independent), and writes its reports in input order
//! from a single thread.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use walkguard_core::ead::{read_stream, write_decisions, EpochStats};
use walkguard_core::grpo::normalize_rewards;
use walkguard_core::metrics::keyword_density;
use walkguard_core::rewards::KeywordCount;
use walkguard_core::{
    rouge_l, rouge_n, simulate_stream, summarize_rewards, train_classifier, trf_score, FrameScorer,
    MlpClassifier, RewardVector, TelemetrySeries,
};

use crate::config::RunConfig;
use crate::samples::{read_samples, Corpus, RecordError};
use crate::scoring::{reference_model, Resources, Scorer};
use crate::{Outcome, ScoringArgs};

pub const SCORES_HEADER: [&str; 8] = [
    "id",
    "group_id",
    "candidate",
    "simplicity",
    "fluency",
    "accuracy",
    "keywords",
    "composite",
];

pub const ADVANTAGES_HEADER: [&str; 11] = [
    "id",
    "group_id",
    "candidate",
    "composite",
    "advantage",
    "group_mean",
    "group_std",
    "simplicity_advantage",
    "fluency_advantage",
    "accuracy_advantage",
    "keywords_advantage",
];

pub const METRICS_HEADER: [&str; 10] = [
    "id",
    "rouge1_f",
    "rouge2_f",
    "rougeL_f",
    "keyword_density",
    "simplicity",
    "fluency",
    "accuracy",
    "keywords",
    "composite",
];

fn create_out_dir(out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> anyhow::Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn load_corpus(path: &Path) -> anyhow::Result<Corpus> {
    read_samples(open(path)?).with_context(|| format!("reading samples {}", path.display()))
}

fn sorted_errors(mut errors: Vec<RecordError>) -> Vec<RecordError> {
    errors.sort_by_key(|e| e.line);
    errors
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    id: &'a str,
    candidate: usize,
    output_length: usize,
    ideal_length: usize,
    /// `None` when some token has probability zero.
    perplexity: Option<f64>,
    ngram_diversity: f64,
    cos_sim: f64,
    mta: f64,
    keywords: &'a [String],
    keyword_counts: &'a [KeywordCount],
}

fn reward_cells(r: &RewardVector) -> [String; 5] {
    [r.simplicity, r.fluency, r.accuracy, r.keywords, r.composite].map(|v| v.to_string())
}

/// Writes `scores.csv`, `diagnostics.jsonl` and `errors.jsonl`.
pub fn score(args: &ScoringArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let resources = Resources::load(
        &args.embeddings,
        args.stopwords.as_deref(),
        args.logprobs.as_deref(),
    )?;
    let corpus = load_corpus(&args.samples)?;
    let model = match resources.logprobs {
        Some(_) => None,
        None => reference_model(&corpus, cfg)?,
    };
    let scorer = Scorer {
        config: cfg,
        resources: &resources,
        model: model.as_ref(),
    };
    let results = scorer.score_all(&corpus.records);

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut errors = corpus.errors.clone();
    for (rec, scored, errs) in &results {
        errors.extend(errs.iter().cloned());
        let Some(scored) = scored else { continue };
        for c in &scored.candidates {
            let mut row = vec![rec.id.clone(), rec.group().to_owned(), c.index.to_string()];
            row.extend(reward_cells(&c.reward));
            rows.push(row);
            let d = &c.reward.diagnostics;
            diagnostics.push(Diagnostics {
                id: &rec.id,
                candidate: c.index,
                output_length: d.output_length,
                ideal_length: d.ideal_length,
                perplexity: d.perplexity.is_finite().then_some(d.perplexity),
                ngram_diversity: d.ngram_diversity,
                cos_sim: d.cos_sim,
                mta: d.mta,
                keywords: scored.keywords.keywords.keywords(),
                keyword_counts: &d.keyword_counts,
            });
        }
    }
    let errors = sorted_errors(errors);

    create_out_dir(&args.out)?;
    write_file(
        &args.out.join("scores.csv"),
        &csv_bytes(&SCORES_HEADER, rows.iter().cloned())?,
    )?;
    write_file(&args.out.join("diagnostics.jsonl"), &jsonl(&diagnostics)?)?;
    write_file(&args.out.join("errors.jsonl"), &jsonl(&errors)?)?;
    println!(
        "scored {} candidates from {} samples; {} record errors",
        rows.len(),
        corpus.records.len(),
        errors.len()
    );
    for e in &errors {
        eprintln!(
            "line {}: {}: {}",
            e.line,
            e.id.as_deref().unwrap_or("?"),
            e.error
        );
    }
    Ok(Outcome {
        record_errors: errors.len(),
    })
}

#[derive(Debug, Clone, Deserialize)]
struct ScoreRow {
    id: String,
    group_id: String,
    candidate: usize,
    simplicity: f64,
    fluency: f64,
    accuracy: f64,
    keywords: f64,
    composite: f64,
}

impl ScoreRow {
    fn components(&self) -> [f64; 4] {
        [self.simplicity, self.fluency, self.accuracy, self.keywords]
    }
}

/// Writes `advantages.csv` sorted by group, id and candidate, and appends one
/// telemetry step. Rows are sorted before any arithmetic, so the output does
/// not depend on the row order of the score report.
pub fn advantages(
    scores: &Path,
    group_size: Option<usize>,
    telemetry: Option<&Path>,
    out: &Path,
    cfg: &RunConfig,
) -> anyhow::Result<Outcome> {
    let mut rdr = csv::Reader::from_reader(open(scores)?);
    let header = rdr.headers()?.clone();
    if header.iter().ne(SCORES_HEADER) {
        bail!(
            "{}: expected header {}",
            scores.display(),
            SCORES_HEADER.join(",")
        );
    }
    let mut rows = Vec::new();
    for (i, row) in rdr.deserialize::<ScoreRow>().enumerate() {
        rows.push(row.with_context(|| format!("{}: row {}", scores.display(), i + 2))?);
    }
    let missing: Vec<&str> = rows
        .iter()
        .filter(|r| r.group_id.trim().is_empty())
        .map(|r| r.id.as_str())
        .collect();
    if !missing.is_empty() {
        bail!("rows without a group id: {}", missing.join(", "));
    }
    if rows.is_empty() {
        bail!("{} has no scored candidates", scores.display());
    }

    let mut groups: BTreeMap<&str, Vec<&ScoreRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry(&r.group_id).or_default().push(r);
    }
    if let Some(g) = group_size {
        let wrong: Vec<String> = groups
            .iter()
            .filter(|(_, m)| m.len() != g)
            .map(|(id, m)| format!("{id} ({})", m.len()))
            .collect();
        if !wrong.is_empty() {
            bail!("groups whose size is not {g}: {}", wrong.join(", "));
        }
    }

    let eps = cfg.advantage_epsilon;
    let mut table = Vec::new();
    let mut ordered = Vec::new();
    for (group, members) in &mut groups {
        members.sort_by(|a, b| (&a.id, a.candidate).cmp(&(&b.id, b.candidate)));
        if let Some(w) = members
            .windows(2)
            .find(|w| (&w[0].id, w[0].candidate) == (&w[1].id, w[1].candidate))
        {
            bail!(
                "candidate {} of {} appears twice in group {group}",
                w[0].candidate,
                w[0].id
            );
        }
        let composite: Vec<f64> = members.iter().map(|r| r.composite).collect();
        let adv = normalize_rewards(&composite, eps).with_context(|| format!("group {group}"))?;
        let per_component = (0..4)
            .map(|k| {
                let v: Vec<f64> = members.iter().map(|r| r.components()[k]).collect();
                normalize_rewards(&v, eps).with_context(|| format!("group {group}"))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        for (i, r) in members.iter().enumerate() {
            let mut row = vec![
                r.id.clone(),
                r.group_id.clone(),
                r.candidate.to_string(),
                r.composite.to_string(),
                adv.advantages[i].to_string(),
                adv.group_mean.to_string(),
                adv.group_std.to_string(),
            ];
            row.extend(per_component.iter().map(|c| c.advantages[i].to_string()));
            table.push(row);
            ordered.push((r.composite, r.components()));
        }
    }

    create_out_dir(out)?;
    write_file(
        &out.join("advantages.csv"),
        &csv_bytes(&ADVANTAGES_HEADER, table)?,
    )?;

    let telemetry_path = telemetry.map_or_else(|| out.join("telemetry.csv"), Path::to_path_buf);
    let mut series = if telemetry_path.exists() {
        TelemetrySeries::read_csv(open(&telemetry_path)?)
            .with_context(|| format!("reading telemetry {}", telemetry_path.display()))?
    } else {
        TelemetrySeries::new()
    };
    let record = summarize_rewards(series.last_step().map_or(1, |s| s + 1), ordered)?;
    series.append(record)?;
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    write_file(&telemetry_path, &buf)?;

    println!(
        "{} groups, {} candidates; step {} reward mean {} std {}",
        groups.len(),
        rows.len(),
        record.step,
        record.reward_mean,
        record.reward_std
    );
    Ok(Outcome::default())
}

#[derive(Serialize)]
struct TriggerSummary {
    rule: &'static str,
    window: usize,
    frames: usize,
    triggers: usize,
    trigger_rate: f64,
    /// Present only when every frame carries `danger_true`.
    trf: Option<f64>,
}

/// Writes `triggers.jsonl` and `summary.json`.
pub fn trigger_sim(
    stream: &Path,
    classifier: Option<&Path>,
    out: &Path,
    cfg: &RunConfig,
) -> anyhow::Result<Outcome> {
    let frames = read_stream(open(stream)?)
        .with_context(|| format!("reading stream {}", stream.display()))?;
    let clf = classifier
        .map(|p| {
            MlpClassifier::read_from(open(p)?)
                .with_context(|| format!("reading classifier {}", p.display()))
        })
        .transpose()?;
    let scorer = clf.as_ref().map(|c| c as &dyn FrameScorer);
    let decisions = simulate_stream(&frames, scorer, &cfg.policy)?;

    let truth: Option<Vec<_>> = frames.iter().map(|f| f.true_level).collect();
    let trf = match truth {
        Some(t) if !t.is_empty() => {
            let pred: Vec<_> = decisions.iter().map(|d| d.danger_pred).collect();
            Some(trf_score(&pred, &t)?)
        }
        _ => {
            if frames.iter().any(|f| f.true_level.is_some()) {
                log::warn!("some frames lack danger_true; TRF not computed");
            }
            None
        }
    };
    let triggers = decisions.iter().filter(|d| d.trigger).count();
    let summary = TriggerSummary {
        rule: cfg.policy.rule.name(),
        window: cfg.policy.window,
        frames: decisions.len(),
        triggers,
        trigger_rate: if decisions.is_empty() {
            0.0
        } else {
            triggers as f64 / decisions.len() as f64
        },
        trf,
    };

    create_out_dir(out)?;
    let mut buf = Vec::new();
    write_decisions(&mut buf, &decisions)?;
    write_file(&out.join("triggers.jsonl"), &buf)?;
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write_file(&out.join("summary.json"), &json)?;

    print!(
        "rule {} window {}: {} triggers in {} frames (rate {})",
        summary.rule, summary.window, triggers, summary.frames, summary.trigger_rate
    );
    match trf {
        Some(v) => println!(", TRF {v}"),
        None => println!(),
    }
    Ok(Outcome::default())
}

/// Writes `classifier.txt` and `loss_history.csv`.
pub fn train_ead(stream: &Path, out: &Path, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let frames = read_stream(open(stream)?)
        .with_context(|| format!("reading stream {}", stream.display()))?;
    let mut data = Vec::with_capacity(frames.len());
    let mut unusable = Vec::new();
    for f in &frames {
        match (&f.features, f.true_level) {
            (Some(x), Some(y)) => data.push((x.clone(), y)),
            _ => unusable.push(f.frame_id.as_str()),
        }
    }
    if !unusable.is_empty() {
        bail!(
            "frames without features or danger_true: {}",
            unusable.join(", ")
        );
    }
    let trained = train_classifier(&data, &cfg.train).context("training aborted")?;

    create_out_dir(out)?;
    let mut buf = Vec::new();
    trained.classifier.write_to(&mut buf)?;
    write_file(&out.join("classifier.txt"), &buf)?;
    let rows = trained.history.iter().map(
        |EpochStats {
             epoch,
             loss,
             accuracy,
         }| [epoch.to_string(), loss.to_string(), accuracy.to_string()],
    );
    write_file(
        &out.join("loss_history.csv"),
        &csv_bytes(&["epoch", "loss", "accuracy"], rows)?,
    )?;

    for s in &trained.history {
        println!("epoch {}: loss {} accuracy {}", s.epoch, s.loss, s.accuracy);
    }
    if let Some(acc) = trained.final_accuracy() {
        println!("final accuracy {acc}");
    }
    Ok(Outcome::default())
}

/// Writes `metrics.csv` with a trailing `MEAN` row over valid samples, and
/// `errors.jsonl`. Keyword density counts output tokens that belong to the
/// synonym set of any keyword, divided by the output length.
pub fn evaluate(args: &ScoringArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let resources = Resources::load(
        &args.embeddings,
        args.stopwords.as_deref(),
        args.logprobs.as_deref(),
    )?;
    let mut corpus = load_corpus(&args.samples)?;
    // Fitted before the one-output filter so that `evaluate` and `score` see
    // the same language model for the same samples file.
    let model = match resources.logprobs {
        Some(_) => None,
        None => reference_model(&corpus, cfg)?,
    };
    let mut errors = std::mem::take(&mut corpus.errors);
    corpus.records.retain(|(line, rec)| {
        if rec.candidates.len() == 1 {
            return true;
        }
        errors.push(RecordError {
            line: *line,
            id: Some(rec.id.clone()),
            error: format!(
                "expected exactly one output, found {}",
                rec.candidates.len()
            ),
        });
        false
    });
    let scorer = Scorer {
        config: cfg,
        resources: &resources,
        model: model.as_ref(),
    };

    let mut rows: Vec<(String, [f64; 9])> = Vec::new();
    for (rec, scored, errs) in scorer.score_all(&corpus.records) {
        errors.extend(errs);
        let Some(s) = scored else { continue };
        let c = &s.candidates[0];
        let r1 = rouge_n(&c.tokens, &s.reference, 1)?.f1;
        let r2 = rouge_n(&c.tokens, &s.reference, 2)?.f1;
        let rl = rouge_l(&c.tokens, &s.reference).f1;
        let kd = keyword_density(&c.tokens, &s.keywords.keywords, &s.keywords.synonyms);
        let r = &c.reward;
        rows.push((
            rec.id.clone(),
            [
                r1,
                r2,
                rl,
                kd,
                r.simplicity,
                r.fluency,
                r.accuracy,
                r.keywords,
                r.composite,
            ],
        ));
    }
    let errors = sorted_errors(errors);

    let mut table: Vec<Vec<String>> = rows
        .iter()
        .map(|(id, v)| {
            std::iter::once(id.clone())
                .chain(v.iter().map(f64::to_string))
                .collect()
        })
        .collect();
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let mean = (0..9).map(|k| (rows.iter().map(|(_, v)| v[k]).sum::<f64>() / n).to_string());
        table.push(std::iter::once("MEAN".to_owned()).chain(mean).collect());
    }

    create_out_dir(&args.out)?;
    write_file(
        &args.out.join("metrics.csv"),
        &csv_bytes(&METRICS_HEADER, table)?,
    )?;
    write_file(&args.out.join("errors.jsonl"), &jsonl(&errors)?)?;
    println!(
        "evaluated {} samples; {} record errors; keyword density = synonym-set tokens / output tokens",
        rows.len(),
        errors.len()
    );
    for e in &errors {
        eprintln!(
            "line {}: {}: {}",
            e.line,
            e.id.as_deref().unwrap_or("?"),
            e.error
        );
    }
    Ok(Outcome {
        record_errors: errors.len(),
    })
}
