use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use super::{usage, CliError, RankInput, RunConfig};
use crate::artifact;
use crate::classifier::{load_model, save_model, train, Example, MlpModel};
use crate::corpus::{
    apply_grouping, corpus_stats, generate_synthetic, load_catalog, load_corpus, load_split, save_catalog,
    save_corpus, save_split, select, split_corpus, Certificate, LabelCatalog, Problem, Split,
};
use crate::error::{Error, Result};
use crate::features::{
    bow_vectorize, build_vocabulary, load_embeddings, load_vocabulary, lookup_embedding, ook_vectorize,
    save_vocabulary, ClassIndex, EmbeddingTable, FeatureKind, FeatureVector, Vocabulary,
};
use crate::metrics::{prf1, AveragingMode, ClassificationReport, LabelSets, RankingReport, POSITIVE_CORRELATION_THRESHOLD};
use crate::ranker::{
    evaluate_groups, load_rank_model, ranks_from_scores, save_pairs, save_rank_model, score, train_rank,
    RankGroup, RankModel,
};

type CliResult = std::result::Result<(), CliError>;

/// Corpus with grouping applied, and the catalog used.
fn load_data(cfg: &RunConfig) -> std::result::Result<(Vec<Certificate>, LabelCatalog), CliError> {
    let corpus = load_corpus(RunConfig::require(&cfg.paths.corpus, "corpus")?)?;
    let catalog = match &cfg.paths.catalog {
        Some(p) => load_catalog(p)?,
        None => LabelCatalog::identity(
            corpus
                .iter()
                .flat_map(|c| c.problems.iter().map(|p| p.class_id.clone()))
                .collect::<BTreeSet<_>>(),
        ),
    };
    catalog.check_corpus(&corpus)?;
    let grouped = apply_grouping(&corpus, &catalog)?;
    Ok((grouped, catalog))
}

fn label_index(catalog: &LabelCatalog) -> ClassIndex {
    ClassIndex::from_classes(catalog.grouped_ids())
}

struct Parts<'a> {
    train: Vec<&'a Certificate>,
    validation: Vec<&'a Certificate>,
    test: Vec<&'a Certificate>,
}

fn load_parts<'a>(cfg: &RunConfig, corpus: &'a [Certificate]) -> std::result::Result<Parts<'a>, CliError> {
    let split: Split = load_split(RunConfig::require(&cfg.paths.split, "split")?)?;
    Ok(Parts {
        train: select(corpus, &split.train)?,
        validation: select(corpus, &split.validation)?,
        test: select(corpus, &split.test)?,
    })
}

fn write_report<T: Serialize>(cfg: &RunConfig, kind: &str, value: &T) -> Result<()> {
    match &cfg.paths.report {
        Some(p) => artifact::write_json(p, kind, value),
        None => Ok(()),
    }
}

fn flag(rho: f64) -> &'static str {
    if rho > POSITIVE_CORRELATION_THRESHOLD {
        "yes"
    } else {
        "no"
    }
}

/// Findings-text encoder for the classifier.
enum TextEncoder {
    Bow(Vocabulary),
    Embedding(EmbeddingTable),
}

impl TextEncoder {
    fn for_kind(cfg: &RunConfig, kind: FeatureKind) -> std::result::Result<Self, CliError> {
        match kind {
            FeatureKind::Bow => Ok(TextEncoder::Bow(load_vocabulary(RunConfig::require(&cfg.paths.vocab, "vocab")?)?)),
            FeatureKind::Embedding => Ok(TextEncoder::Embedding(load_embeddings(RunConfig::require(
                &cfg.paths.embeddings,
                "embeddings",
            )?)?)),
            FeatureKind::Ook => Err(CliError::Usage(
                "one-of-K features encode a class, not findings text; use bow or embedding".into(),
            )),
        }
    }

    fn dim(&self) -> usize {
        match self {
            TextEncoder::Bow(v) => v.len(),
            TextEncoder::Embedding(t) => t.dim,
        }
    }

    /// `key` is the embedding lookup key.
    fn encode(&self, text: &str, key: &str) -> Result<FeatureVector> {
        match self {
            TextEncoder::Bow(v) => bow_vectorize(&v.scheme.tokenize(text), v),
            TextEncoder::Embedding(t) => lookup_embedding(key, t),
        }
    }

    fn encode_cert(&self, cert: &Certificate) -> Result<FeatureVector> {
        self.encode(&cert.findings_text, &cert.id)
    }

    fn check_model(&self, model: &MlpModel) -> Result<()> {
        if self.dim() != model.input_dim {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

fn examples(certs: &[&Certificate], enc: &TextEncoder, index: &ClassIndex) -> Result<Vec<Example>> {
    certs
        .iter()
        .map(|cert| {
            let mut y = vec![0.0; index.len()];
            for label in cert.label_set() {
                let k = index.get(&label).ok_or(Error::UnmappedClass(label))?;
                y[k] = 1.0;
            }
            Ok(Example {
                x: enc.encode_cert(cert)?,
                y,
            })
        })
        .collect()
}

/// Per-problem encoder for the ranker.
struct ProblemEncoder<'a> {
    kind: FeatureKind,
    index: Option<&'a ClassIndex>,
    vocab: Option<Vocabulary>,
    table: Option<EmbeddingTable>,
}

impl<'a> ProblemEncoder<'a> {
    fn for_model(cfg: &RunConfig, model: &'a RankModel) -> std::result::Result<Self, CliError> {
        let mut enc = ProblemEncoder {
            kind: model.feature_kind,
            index: None,
            vocab: None,
            table: None,
        };
        match model.feature_kind {
            FeatureKind::Ook => {
                enc.index = Some(
                    model
                        .class_index
                        .as_ref()
                        .ok_or_else(|| Error::Format("one-of-K ranker lacks its class index".into()))?,
                );
            }
            FeatureKind::Bow => {
                let tokens = model
                    .vocabulary
                    .clone()
                    .ok_or_else(|| Error::Format("bag-of-words ranker lacks its vocabulary".into()))?;
                enc.vocab = Some(Vocabulary::from_ordered(tokens, model.tokenizer.unwrap_or_default())?);
            }
            FeatureKind::Embedding => {
                enc.table = Some(load_embeddings(RunConfig::require(&cfg.paths.embeddings, "embeddings")?)?);
            }
        }
        Ok(enc)
    }

    fn encode(&self, class_id: &str, text: &str) -> Result<FeatureVector> {
        match self.kind {
            FeatureKind::Ook => {
                let idx = self.index.expect("set for ook");
                if idx.get(class_id).is_none() {
                    log::warn!("class {class_id:?} was not seen by the ranker; using a zero vector");
                }
                Ok(ook_vectorize(class_id, idx))
            }
            FeatureKind::Bow => {
                let v = self.vocab.as_ref().expect("set for bow");
                bow_vectorize(&v.scheme.tokenize(text), v)
            }
            FeatureKind::Embedding => lookup_embedding(text, self.table.as_ref().expect("set for embedding")),
        }
    }

    fn encode_problem(&self, p: &Problem) -> Result<FeatureVector> {
        self.encode(&p.class_id, &p.surface_text)
    }
}

pub fn gen_synth(cfg: &RunConfig) -> CliResult {
    cfg.synth.validate().map_err(usage)?;
    let corpus_path = RunConfig::require(&cfg.paths.corpus, "corpus")?;
    let catalog_path = RunConfig::require(&cfg.paths.catalog, "catalog")?;
    let (corpus, catalog) = generate_synthetic(&cfg.synth)?;
    save_corpus(corpus_path, &corpus)?;
    save_catalog(catalog_path, &catalog)?;
    println!(
        "wrote {} certificates to {} and {} classes to {}",
        corpus.len(),
        corpus_path.display(),
        catalog.classes.len(),
        catalog_path.display()
    );
    Ok(())
}

pub fn build_features(cfg: &RunConfig, pairs_path: Option<&Path>) -> CliResult {
    if cfg.min_count == 0 {
        return Err(CliError::Usage("--min-count must be at least 1".into()));
    }
    if cfg.split_ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(CliError::Usage("split ratios must be finite and nonnegative".into()));
    }
    let split_path = RunConfig::require(&cfg.paths.split, "split")?;
    let vocab_path = RunConfig::require(&cfg.paths.vocab, "vocab")?;
    let (corpus, catalog) = load_data(cfg)?;
    let split = split_corpus(&corpus, cfg.ratios(), cfg.split_seed)?;
    save_split(split_path, &split)?;

    let train = select(&corpus, &split.train)?;
    let docs: Vec<Vec<String>> = train.iter().map(|c| cfg.tokenizer.tokenize(&c.findings_text)).collect();
    let vocab = build_vocabulary(&docs, cfg.min_count)?.with_scheme(cfg.tokenizer);
    if vocab.is_empty() {
        log::warn!("no token reaches min_count {}; the vocabulary is empty", cfg.min_count);
    }
    save_vocabulary(vocab_path, &vocab)?;

    if let Some(p) = pairs_path {
        let index = label_index(&catalog);
        let mut pairs = Vec::new();
        for cert in &train {
            let group = RankGroup::from_certificate(cert, |p| Ok(ook_vectorize(&p.class_id, &index)))?;
            pairs.extend(group.pairs());
        }
        save_pairs(p, &pairs)?;
        println!("pairs       {}", pairs.len());
    }
    let (a, b, c) = split.sizes();
    println!("split       {a} / {b} / {c}");
    println!("vocabulary  {} tokens (min_count {})", vocab.len(), cfg.min_count);
    Ok(())
}

pub fn train_classifier(cfg: &RunConfig) -> CliResult {
    cfg.train.validate().map_err(usage)?;
    let model_path = RunConfig::require(&cfg.paths.classifier, "classifier")?;
    if cfg.feature_kind == FeatureKind::Ook {
        return Err(TextEncoder::for_kind(cfg, FeatureKind::Ook).err().expect("ook is rejected"));
    }
    let (corpus, catalog) = load_data(cfg)?;
    let parts = load_parts(cfg, &corpus)?;
    let enc = TextEncoder::for_kind(cfg, cfg.feature_kind)?;
    let index = label_index(&catalog);
    let tr = examples(&parts.train, &enc, &index)?;
    let va = examples(&parts.validation, &enc, &index)?;
    let (model, report) = train(&tr, &va, &index, cfg.feature_kind, &cfg.train)?;
    save_model(model_path, &model)?;
    write_report(cfg, "classifier-grid", &report)?;

    println!("{:>8} {:>7} {:>5} {:>9} {:>9} {:>9}", "hidden", "epochs", "best", "val_P", "val_R", "val_F1");
    for e in &report.entries {
        match &e.failure {
            Some(why) => println!("{:>8} {:>7} failed: {why}", e.hidden_dim, e.epochs_run),
            None => println!(
                "{:>8} {:>7} {:>5} {:>9.4} {:>9.4} {:>9.4}",
                e.hidden_dim, e.epochs_run, e.best_epoch, e.precision, e.recall, e.f1
            ),
        }
    }
    println!("selected hidden size {} (validation F1 {:.4})", report.selected_hidden_dim, report.best_val_f1);
    Ok(())
}

pub fn train_ranker(cfg: &RunConfig) -> CliResult {
    cfg.rank.validate().map_err(usage)?;
    let model_path = RunConfig::require(&cfg.paths.ranker, "ranker")?;
    let (corpus, catalog) = load_data(cfg)?;
    let parts = load_parts(cfg, &corpus)?;

    // A blank model carries the encoding; weights come from training.
    let mut template = RankModel::new(Vec::new(), 0.0);
    template.feature_kind = cfg.rank_feature_kind;
    match cfg.rank_feature_kind {
        FeatureKind::Ook => template.class_index = Some(label_index(&catalog)),
        FeatureKind::Bow => {
            let docs: Vec<Vec<String>> = parts
                .train
                .iter()
                .flat_map(|c| c.problems.iter().map(|p| cfg.tokenizer.tokenize(&p.surface_text)))
                .collect();
            template.vocabulary = Some(build_vocabulary(&docs, 1)?.tokens().to_vec());
            template.tokenizer = Some(cfg.tokenizer);
        }
        FeatureKind::Embedding => {}
    }
    let enc = ProblemEncoder::for_model(cfg, &template)?;
    let groups = |certs: &[&Certificate]| -> Result<Vec<RankGroup>> {
        certs
            .iter()
            .map(|c| RankGroup::from_certificate(c, |p| enc.encode_problem(p)))
            .collect()
    };
    let train_pairs: Vec<_> = groups(&parts.train)?.iter().map(RankGroup::pairs).collect();
    let val_groups = groups(&parts.validation)?;
    let (trained, report) = train_rank(&train_pairs, &val_groups, &cfg.rank)?;
    let model = RankModel {
        dim: trained.dim,
        c_value: trained.c_value,
        w: trained.w,
        ..template
    };
    model.validate()?;
    save_rank_model(model_path, &model)?;
    write_report(cfg, "ranker-grid", &report)?;

    println!("training pairs {}", report.n_pairs);
    println!("{:>8} {:>7} {:>12} {:>11} {:>9}", "C", "epochs", "objective", "misordered", "val_rho");
    for e in &report.entries {
        match &e.failure {
            Some(why) => println!("{:>8} {:>7} failed: {why}", e.c_value, e.epochs_run),
            None => println!(
                "{:>8} {:>7} {:>12.4} {:>11} {:>9.4}",
                e.c_value, e.epochs_run, e.objective_final, e.train_misordered_pairs, e.val_mean_rho
            ),
        }
    }
    println!(
        "selected C {} (validation mean rho {:.4}, exceeds {}: {})",
        report.selected_c,
        report.best_val_rho,
        POSITIVE_CORRELATION_THRESHOLD,
        flag(report.best_val_rho)
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    partition: String,
    n_documents: usize,
    rank_input: RankInput,
    #[serde(skip_serializing_if = "Option::is_none")]
    example_based: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    micro: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ranking: Option<RankingReport>,
}

pub fn evaluate(cfg: &RunConfig, test: bool) -> CliResult {
    if cfg.paths.classifier.is_none() && cfg.paths.ranker.is_none() {
        return Err(CliError::Usage("evaluate needs --classifier, --ranker or both".into()));
    }
    if cfg.rank_input == RankInput::Predicted && cfg.paths.classifier.is_none() {
        return Err(CliError::Usage("--rank-input predicted needs --classifier".into()));
    }
    let threshold = cfg.train.decision_threshold;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::Usage("--threshold must lie in (0, 1)".into()));
    }
    let (corpus, _) = load_data(cfg)?;
    let parts = load_parts(cfg, &corpus)?;
    let certs = if test { parts.test } else { parts.validation };

    let mut report = EvaluationReport {
        partition: if test { "test" } else { "validation" }.into(),
        n_documents: certs.len(),
        rank_input: cfg.rank_input,
        example_based: None,
        micro: None,
        ranking: None,
    };

    let mut predicted: Option<LabelSets> = None;
    if let Some(path) = &cfg.paths.classifier {
        let model = load_model(path)?;
        let enc = TextEncoder::for_kind(cfg, model.feature_kind)?;
        enc.check_model(&model)?;
        let mut pred = LabelSets::new();
        let mut gold = LabelSets::new();
        for cert in &certs {
            pred.insert(cert.id.clone(), model.predict_labels(&enc.encode_cert(cert)?, threshold)?);
            gold.insert(cert.id.clone(), cert.label_set());
        }
        report.example_based = Some(prf1(&pred, &gold, AveragingMode::ExampleBased)?);
        report.micro = Some(prf1(&pred, &gold, AveragingMode::Micro)?);
        predicted = Some(pred);
    }
    if let Some(path) = &cfg.paths.ranker {
        let model = load_rank_model(path)?;
        let enc = ProblemEncoder::for_model(cfg, &model)?;
        let mut groups = Vec::with_capacity(certs.len());
        for cert in &certs {
            let kept: Vec<Problem> = match (&predicted, cfg.rank_input) {
                (Some(pred), RankInput::Predicted) => cert
                    .problems
                    .iter()
                    .filter(|p| pred[&cert.id].contains(&p.class_id))
                    .cloned()
                    .collect(),
                _ => cert.problems.clone(),
            };
            let view = Certificate {
                id: cert.id.clone(),
                findings_text: String::new(),
                problems: kept,
            };
            groups.push(RankGroup::from_certificate(&view, |p| enc.encode_problem(p))?);
        }
        report.ranking = Some(evaluate_groups(&model, &groups)?);
    }
    write_report(cfg, "evaluation", &report)?;

    println!("partition {} ({} documents)", report.partition, report.n_documents);
    for (name, r) in [("example-based", &report.example_based), ("micro", &report.micro)] {
        if let Some(r) = r {
            println!("{name:<14} P {:.4}  R {:.4}  F1 {:.4}", r.precision, r.recall, r.f1);
        }
    }
    if let Some(r) = &report.ranking {
        println!(
            "ranking ({} lists) mean rho {:.4} over {} documents, {} excluded; exceeds {}: {}",
            match cfg.rank_input {
                RankInput::Gold => "gold",
                RankInput::Predicted => "predicted",
            },
            r.mean_rho,
            r.per_document.len(),
            r.n_excluded,
            POSITIVE_CORRELATION_THRESHOLD,
            flag(r.mean_rho)
        );
    }
    Ok(())
}

pub fn predict(cfg: &RunConfig, text: &str) -> CliResult {
    let threshold = cfg.train.decision_threshold;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::Usage("--threshold must lie in (0, 1)".into()));
    }
    let classifier = load_model(RunConfig::require(&cfg.paths.classifier, "classifier")?)?;
    let ranker = load_rank_model(RunConfig::require(&cfg.paths.ranker, "ranker")?)?;
    if text.trim().is_empty() {
        log::warn!("empty findings text; the plan is empty");
        return Ok(());
    }
    let catalog = match &cfg.paths.catalog {
        Some(p) => Some(load_catalog(p)?),
        None => None,
    };
    let enc = TextEncoder::for_kind(cfg, classifier.feature_kind)?;
    enc.check_model(&classifier)?;
    let labels = classifier.predict_labels(&enc.encode(text, text)?, threshold)?;

    let penc = ProblemEncoder::for_model(cfg, &ranker)?;
    let names: BTreeMap<&str, &str> = labels
        .iter()
        .map(|l| {
            let name = catalog.as_ref().and_then(|c| c.name(l)).unwrap_or(l);
            (l.as_str(), name)
        })
        .collect();
    let mut items = Vec::with_capacity(labels.len());
    for l in &labels {
        let x = penc.encode(l, names[l.as_str()])?;
        items.push((l.as_str(), score(&ranker, &x)?));
    }
    let scores: Vec<f64> = items.iter().map(|(_, s)| *s).collect();
    let ranks = ranks_from_scores(&scores);
    let mut plan: Vec<(u32, &str, f64)> = items.iter().zip(&ranks).map(|(&(l, s), &r)| (r, l, s)).collect();
    plan.sort_by_key(|&(r, _, _)| r);
    for (r, l, s) in plan {
        println!("{r}\t{l}\t{}\t{s:.6}", names[l]);
    }
    Ok(())
}

pub fn stats(cfg: &RunConfig) -> CliResult {
    let (corpus, _) = load_data(cfg)?;
    let s = corpus_stats(&corpus)?;
    write_report(cfg, "stats", &s)?;
    println!("certificates          {}", s.n_certificates);
    println!("problems              {}", s.n_problems);
    println!("mean problems/cert    {:.4}", s.mean_problems);
    println!("distinct labels       {}", s.distinct_labels);
    Ok(())
}
