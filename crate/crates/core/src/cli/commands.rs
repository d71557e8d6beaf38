//! Subcommand implementations.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SynthKind};
use super::output::Output;
use super::{Cli, Command, DecomposeArgs, InputArgs, TestArgs};
use crate::concepts::{
    concept_arithmetic, decompose, detect_spurious, interpret, loading_peakedness, reconstruction_fidelity,
    remove_and_reconstruct, score_rows, top_indices, DecomposeParams, ScoredImage, ScoredText,
};
use crate::embedding_io::{
    load_corpus, load_matrix, load_model, normalize, npy, EmbeddingMatrix, MatrixFormat, TextCorpus,
};
use crate::eval::metrics::{group_metrics, metrics_table, zero_shot_predict, GroupMetrics, PromptSet};
use crate::eval::{fidelity_curve, synth};
use crate::hypotest::{rank_sweep, test_svd, SweepEntry, TestParams};
use crate::linalg::Matrix;
use crate::rng::{domain, substream};
use crate::spectra::truncated_svd;
use crate::{Error, Result};

macro_rules! set {
    ($cfg:ident . $($field:ident).+ = $value:expr) => {
        if let Some(v) = $value {
            $cfg.$($field).+ = v;
        }
    };
    ($cfg:ident . $($field:ident).+ = some $value:expr) => {
        if let Some(v) = $value {
            $cfg.$($field).+ = Some(v);
        }
    };
}

fn apply_input(cfg: &mut RunConfig, a: InputArgs) {
    set!(cfg.input = some a.input);
    set!(cfg.meta = some a.meta);
}

fn apply_decomp(cfg: &mut RunConfig, a: DecomposeArgs) {
    set!(cfg.k = a.k);
    set!(cfg.norm_mode = a.norm_mode);
    set!(cfg.eps = a.eps);
    set!(cfg.varimax.tol = a.tol);
    set!(cfg.varimax.max_iter = a.max_iter);
    set!(cfg.varimax.restarts = a.restarts);
}

fn apply_test(cfg: &mut RunConfig, a: TestArgs) {
    set!(cfg.n_resample = a.n_resample);
    set!(cfg.p_convention = a.p_convention);
    set!(cfg.drop_leading = a.drop_leading);
    set!(cfg.resample_method = a.resample_method);
    set!(cfg.test_varimax.tol = a.test_tol);
    set!(cfg.test_varimax.max_iter = a.test_max_iter);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Test,
    Ranksweep,
    Decompose,
    Interpret,
    Arith,
    Spurious,
    Reconstruct,
    Fidelity,
    Zershot,
    Synth,
}

/// Fold the subcommand's flags into `cfg`.
fn merge(cfg: &mut RunConfig, command: Command) -> Kind {
    match command {
        Command::Test { input, decomp, test } => {
            apply_input(cfg, input);
            apply_decomp(cfg, decomp);
            apply_test(cfg, test);
            Kind::Test
        }
        Command::Ranksweep { input, decomp, test, ks } => {
            apply_input(cfg, input);
            apply_decomp(cfg, decomp);
            apply_test(cfg, test);
            set!(cfg.ks = ks);
            Kind::Ranksweep
        }
        Command::Decompose { input, decomp } => {
            apply_input(cfg, input);
            apply_decomp(cfg, decomp);
            Kind::Decompose
        }
        Command::Interpret {
            model,
            texts,
            text_embeddings,
            r,
        } => {
            set!(cfg.model = some model.model);
            set!(cfg.texts = some texts);
            set!(cfg.text_embeddings = some text_embeddings);
            set!(cfg.r = r);
            Kind::Interpret
        }
        Command::Arith {
            model,
            terms,
            input,
            texts,
            text_embeddings,
            r,
        } => {
            set!(cfg.model = some model.model);
            set!(cfg.terms = terms.map(|t| t.0));
            apply_input(cfg, input);
            set!(cfg.texts = some texts);
            set!(cfg.text_embeddings = some text_embeddings);
            set!(cfg.r = r);
            Kind::Arith
        }
        Command::Spurious {
            model,
            target_texts,
            target_embeddings,
            spurious_texts,
            spurious_embeddings,
            margin,
        } => {
            set!(cfg.model = some model.model);
            set!(cfg.target_texts = some target_texts);
            set!(cfg.target_embeddings = some target_embeddings);
            set!(cfg.spurious_texts = some spurious_texts);
            set!(cfg.spurious_embeddings = some spurious_embeddings);
            set!(cfg.margin = margin);
            Kind::Spurious
        }
        Command::Reconstruct {
            model,
            remove,
            invert_scaling,
            input,
        } => {
            set!(cfg.model = some model.model);
            set!(cfg.remove = remove);
            set!(cfg.invert_scaling = invert_scaling);
            apply_input(cfg, input);
            Kind::Reconstruct
        }
        Command::Fidelity { input, decomp, ks } => {
            apply_input(cfg, input);
            apply_decomp(cfg, decomp);
            set!(cfg.ks = ks);
            Kind::Fidelity
        }
        Command::Zershot {
            input,
            prompts,
            prompt_embeddings,
            model,
            remove,
        } => {
            apply_input(cfg, input);
            set!(cfg.prompts = some prompts);
            set!(cfg.prompt_embeddings = some prompt_embeddings);
            set!(cfg.model = some model.model);
            set!(cfg.remove = remove);
            Kind::Zershot
        }
        Command::Synth { kind, n, d, k, noise } => {
            set!(cfg.synth_kind = kind);
            set!(cfg.n = n);
            set!(cfg.d = d);
            set!(cfg.k = k);
            set!(cfg.noise = noise);
            Kind::Synth
        }
    }
}

#[cfg(feature = "parallel")]
fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        // A pool may already exist when the CLI runs in-process more than once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_threads: Option<usize>) -> Result<()> {
    Ok(())
}

/// Resolve the configuration, run the subcommand and write its artifacts.
pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    set!(cfg.seed = cli.seed);
    let kind = merge(&mut cfg, cli.command);
    cfg.validate()?;
    set_threads(cli.threads)?;

    let mut out = Output::new(&cli.output_dir, cli.format, cfg.hash()?, cfg.seed)?;
    match kind {
        Kind::Test => cmd_test(&cfg, &mut out)?,
        Kind::Ranksweep => cmd_ranksweep(&cfg, &mut out)?,
        Kind::Decompose => cmd_decompose(&cfg, &mut out)?,
        Kind::Interpret => cmd_interpret(&cfg, &mut out)?,
        Kind::Arith => cmd_arith(&cfg, &mut out)?,
        Kind::Spurious => cmd_spurious(&cfg, &mut out)?,
        Kind::Reconstruct => cmd_reconstruct(&cfg, &mut out)?,
        Kind::Fidelity => cmd_fidelity(&cfg, &mut out)?,
        Kind::Zershot => cmd_zershot(&cfg, &mut out)?,
        Kind::Synth => cmd_synth(&cfg, &mut out)?,
    }
    if cli.verify {
        let n = out.verify()?;
        eprintln!("verified {n} artifacts");
    }
    Ok(())
}

#[derive(Deserialize, Default)]
struct MetaSidecar {
    ids: Option<Vec<String>>,
    labels: Option<Vec<usize>>,
    groups: Option<Vec<String>>,
}

fn load_input(cfg: &RunConfig) -> Result<EmbeddingMatrix> {
    let path = cfg.require(&cfg.input, "input")?;
    let mut m = load_matrix(path, MatrixFormat::from_path(path))?;
    if cfg.meta.is_some() {
        let meta_path = cfg.require(&cfg.meta, "meta")?;
        let text = std::fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
        let meta: MetaSidecar = serde_json::from_str(&text)?;
        if let Some(ids) = meta.ids {
            let source = m.source().to_string();
            let (labels, groups) = (m.labels().map(<[usize]>::to_vec), m.groups().map(<[String]>::to_vec));
            m = EmbeddingMatrix::new(m.into_data(), Some(ids), source)?;
            if let Some(l) = labels {
                m = m.with_labels(l)?;
            }
            if let Some(g) = groups {
                m = m.with_groups(g)?;
            }
        }
        if let Some(labels) = meta.labels {
            m = m.with_labels(labels)?;
        }
        if let Some(groups) = meta.groups {
            m = m.with_groups(groups)?;
        }
    }
    Ok(m)
}

fn load_pair(
    cfg: &RunConfig,
    texts: &Option<std::path::PathBuf>,
    emb: &Option<std::path::PathBuf>,
    flags: (&str, &str),
) -> Result<TextCorpus> {
    load_corpus(cfg.require(texts, flags.0)?, cfg.require(emb, flags.1)?)
}

fn decompose_params(cfg: &RunConfig) -> DecomposeParams {
    DecomposeParams {
        norm_mode: cfg.norm_mode,
        eps: cfg.eps,
        varimax: cfg.varimax,
        canonical: true,
    }
}

fn test_params(cfg: &RunConfig) -> TestParams {
    TestParams {
        n_resample: cfg.n_resample,
        seed: cfg.seed,
        p_convention: cfg.p_convention,
        varimax: cfg.test_varimax,
        resample_method: cfg.resample_method,
    }
}

fn cmd_test(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let a = load_input(cfg)?;
    let (normalized, _) = normalize(&a, cfg.norm_mode, cfg.eps)?;
    let svd = truncated_svd(&normalized, cfg.k)?;
    let report = test_svd(&svd, cfg.drop_leading, &test_params(cfg))?;
    out.json("test_report", "test_report", &report)?;
    out.markdown("test_report", &report.to_markdown())
}

/// Default rank grid: five evenly spaced ranks up to `k`.
fn default_ks(k: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (1..=5).map(|i| (k * i / 5).max(2)).collect();
    ks.dedup();
    ks
}

#[derive(Serialize)]
struct SweepBody<'a> {
    dropped_leading: bool,
    entries: &'a [SweepEntry],
}

fn cmd_ranksweep(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let a = load_input(cfg)?;
    let ks = if cfg.ks.is_empty() { default_ks(cfg.k) } else { cfg.ks.clone() };
    let max_k = ks.iter().copied().max().unwrap_or(2) + cfg.drop_leading as usize;
    let (normalized, _) = normalize(&a, cfg.norm_mode, cfg.eps)?;
    let svd = truncated_svd(&normalized, max_k)?;
    let entries = rank_sweep(&svd, &ks, cfg.drop_leading, &test_params(cfg))?;
    out.json(
        "ranksweep",
        "rank_sweep",
        &SweepBody {
            dropped_leading: cfg.drop_leading,
            entries: &entries,
        },
    )?;
    let mut md = String::from("# Rank sweep\n\n| k | TS1 | p_kur | TS2 | p_var | TS3 |\n|---|---|---|---|---|---|\n");
    for e in &entries {
        let r = &e.report;
        let _ = writeln!(
            md,
            "| {} | {:.5} | {:.4} | {:.6e} | {:.4} | {:.3} |",
            e.k, r.ts1_obs, r.p_kur, r.ts2_obs, r.p_var, r.ts3_obs
        );
    }
    out.markdown("ranksweep", &md)
}

#[derive(Serialize)]
struct DecomposeSummary {
    n: usize,
    d: usize,
    k: usize,
    norm_mode: crate::embedding_io::NormMode,
    seed: u64,
    singular_values: Vec<f64>,
    concept_energy: Vec<f64>,
    peakedness_before: f64,
    peakedness_after: f64,
    fidelity: f64,
}

fn cmd_decompose(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let a = load_input(cfg)?;
    let params = decompose_params(cfg);
    let model = decompose(&a, cfg.k, &params, cfg.seed)?;
    let (normalized, _) = normalize(&a, cfg.norm_mode, cfg.eps)?;
    let recon = model.reconstruct_normalized();
    let ud = {
        let mut m = Matrix::zeros(0, 0);
        if let Ok(svd) = truncated_svd(&normalized, model.k()) {
            m = svd.scaled_u();
        }
        m
    };
    let summary = DecomposeSummary {
        n: a.n(),
        d: a.d(),
        k: model.k(),
        norm_mode: cfg.norm_mode,
        seed: cfg.seed,
        singular_values: model.singular_values.clone(),
        concept_energy: model.z.column_iter().map(|c| c.norm_squared()).collect(),
        peakedness_before: loading_peakedness(&ud),
        peakedness_after: loading_peakedness(&model.z),
        fidelity: reconstruction_fidelity(&normalized, &recon)?,
    };
    out.model("model.rsm", &model)?;
    out.json("decompose", "decompose_summary", &summary)?;
    let mut md = format!(
        "# Concept decomposition\n\n- samples: {}, dimensions: {}, concepts: {}\n- reconstruction fidelity: {:.6}\n- loading peakedness: {:.4} before rotation, {:.4} after\n\n| concept | energy | singular value |\n|---|---|---|\n",
        summary.n, summary.d, summary.k, summary.fidelity, summary.peakedness_before, summary.peakedness_after
    );
    for (j, e) in summary.concept_energy.iter().enumerate() {
        let _ = writeln!(md, "| {j} | {e:.6e} | {:.6e} |", summary.singular_values[j]);
    }
    out.markdown("decompose", &md)
}

fn load_model_arg(cfg: &RunConfig) -> Result<crate::concepts::ConceptModel> {
    load_model(cfg.require(&cfg.model, "model")?)
}

fn cmd_interpret(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let model = load_model_arg(cfg)?;
    let corpus = load_pair(cfg, &cfg.texts, &cfg.text_embeddings, ("texts", "text-embeddings"))?;
    let concepts = interpret(&model, &corpus, cfg.r)?;
    out.json("interpret", "interpretation", &concepts)?;
    let mut md = String::from("# Concept gallery\n");
    for c in &concepts {
        let _ = writeln!(md, "\n## Concept {}\n\n| rank | image id | loading | description | score |\n|---|---|---|---|---|", c.index);
        for (i, (img, txt)) in c.top_images.iter().zip(&c.top_texts).enumerate() {
            let _ = writeln!(
                md,
                "| {} | {} | {:.4e} | {} | {:.4e} |",
                i + 1,
                img.id,
                img.score,
                txt.text.replace('|', "\\|"),
                txt.score
            );
        }
    }
    out.markdown("interpret", &md)
}

#[derive(Serialize)]
struct ArithBody {
    terms: Vec<(usize, f64)>,
    direction: Vec<f64>,
    top_samples: Vec<ScoredImage>,
    top_texts: Vec<ScoredText>,
}

fn cmd_arith(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let model = load_model_arg(cfg)?;
    let direction = concept_arithmetic(&model, &cfg.terms)?;
    let mut body = ArithBody {
        terms: cfg.terms.clone(),
        direction: direction.iter().copied().collect(),
        top_samples: Vec::new(),
        top_texts: Vec::new(),
    };
    if cfg.input.is_some() {
        let a = load_input(cfg)?;
        let scores = score_rows(a.data(), &direction)?;
        body.top_samples = top_indices(scores.iter().copied(), cfg.r.min(scores.len()))
            .into_iter()
            .map(|i| ScoredImage {
                id: a.ids()[i].clone(),
                score: scores[i],
            })
            .collect();
    }
    if cfg.texts.is_some() {
        let corpus = load_pair(cfg, &cfg.texts, &cfg.text_embeddings, ("texts", "text-embeddings"))?;
        let scores = score_rows(&corpus.embeddings, &direction)?;
        body.top_texts = top_indices(scores.iter().copied(), cfg.r.min(scores.len()))
            .into_iter()
            .map(|i| ScoredText {
                text: corpus.descriptions[i].clone(),
                score: scores[i],
            })
            .collect();
    }
    out.json("arith", "concept_arithmetic", &body)?;
    let terms: Vec<String> = cfg.terms.iter().map(|(j, w)| format!("{w:+} x concept {j}")).collect();
    let mut md = format!("# Concept arithmetic\n\nDirection: {}\n", terms.join(" "));
    if !body.top_samples.is_empty() {
        md.push_str("\n| rank | sample | score |\n|---|---|---|\n");
        for (i, s) in body.top_samples.iter().enumerate() {
            let _ = writeln!(md, "| {} | {} | {:.4e} |", i + 1, s.id, s.score);
        }
    }
    if !body.top_texts.is_empty() {
        md.push_str("\n| rank | description | score |\n|---|---|---|\n");
        for (i, s) in body.top_texts.iter().enumerate() {
            let _ = writeln!(md, "| {} | {} | {:.4e} |", i + 1, s.text, s.score);
        }
    }
    out.markdown("arith", &md)
}

fn cmd_spurious(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let model = load_model_arg(cfg)?;
    let target = load_pair(cfg, &cfg.target_texts, &cfg.target_embeddings, ("target-texts", "target-embeddings"))?;
    let spurious = load_pair(cfg, &cfg.spurious_texts, &cfg.spurious_embeddings, ("spurious-texts", "spurious-embeddings"))?;
    let report = detect_spurious(&model, &target, &spurious, cfg.margin)?;
    out.json("spurious", "spurious_report", &report)?;
    let mut md = format!(
        "# Spurious concepts\n\nFlagged (margin {}): {:?}\n\n| concept | target sim | spurious sim | flagged |\n|---|---|---|---|\n",
        report.margin, report.concept_indices
    );
    for j in 0..report.target_sim.len() {
        let _ = writeln!(
            md,
            "| {j} | {:.4} | {:.4} | {} |",
            report.target_sim[j],
            report.spurious_sim[j],
            report.concept_indices.contains(&j)
        );
    }
    out.markdown("spurious", &md)
}

#[derive(Serialize)]
struct ReconstructBody {
    removed: Vec<usize>,
    invert_scaling: bool,
    n: usize,
    d: usize,
    fidelity_normalized: Option<f64>,
    fidelity_original: Option<f64>,
}

fn cmd_reconstruct(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let model = load_model_arg(cfg)?;
    let recon = remove_and_reconstruct(&model, &cfg.remove, cfg.invert_scaling)?;
    let mut body = ReconstructBody {
        removed: cfg.remove.clone(),
        invert_scaling: cfg.invert_scaling,
        n: recon.n(),
        d: recon.d(),
        fidelity_normalized: None,
        fidelity_original: None,
    };
    if cfg.input.is_some() {
        let a = load_input(cfg)?;
        let (normalized, _) = normalize(&a, model.scaling.mode, cfg.eps)?;
        let in_normalized = remove_and_reconstruct(&model, &cfg.remove, false)?;
        body.fidelity_normalized = Some(reconstruction_fidelity(&normalized, in_normalized.data())?);
        let in_original = remove_and_reconstruct(&model, &cfg.remove, true)?;
        body.fidelity_original = Some(reconstruction_fidelity(a.data(), in_original.data())?);
    }
    out.matrix("reconstruction.rsm", &recon, "reconstruction")?;
    out.json("reconstruct", "reconstruction", &body)?;
    let fmt = |f: Option<f64>| f.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    let md = format!(
        "# Reconstruction\n\n- removed concepts: {:?}\n- scaling inverted: {}\n- fidelity (normalized space): {}\n- fidelity (original space): {}\n",
        body.removed,
        body.invert_scaling,
        fmt(body.fidelity_normalized),
        fmt(body.fidelity_original)
    );
    out.markdown("reconstruct", &md)
}

fn cmd_fidelity(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let a = load_input(cfg)?;
    let ks = if cfg.ks.is_empty() { default_ks(cfg.k.min(a.n().min(a.d()))) } else { cfg.ks.clone() };
    let curve = fidelity_curve(&a, &ks, &decompose_params(cfg), cfg.seed)?;
    out.json("fidelity", "fidelity_curve", &curve)?;
    let mut md = String::from("# Reconstruction fidelity\n\n| k | fidelity |\n|---|---|\n");
    for p in &curve {
        let _ = writeln!(md, "| {} | {:.8} |", p.k, p.fidelity);
    }
    out.markdown("fidelity", &md)
}

#[derive(Serialize)]
struct ZeroShotRow {
    name: String,
    metrics: GroupMetrics,
}

fn cmd_zershot(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let a = load_input(cfg)?;
    let labels = a
        .labels()
        .ok_or_else(|| Error::InvalidArgument("zero-shot evaluation needs labels (rawbin attrs or --meta)".into()))?
        .to_vec();
    let groups = a.groups();
    let prompt_corpus = load_pair(cfg, &cfg.prompts, &cfg.prompt_embeddings, ("prompts", "prompt-embeddings"))?;
    let prompts = PromptSet::new(prompt_corpus.descriptions, prompt_corpus.embeddings)?;
    let mut rows = vec![ZeroShotRow {
        name: "ZS".into(),
        metrics: group_metrics(&zero_shot_predict(a.data(), &prompts)?, &labels, groups)?,
    }];
    if cfg.model.is_some() {
        let model = load_model_arg(cfg)?;
        for (name, remove) in [("SVD-recon", Vec::new()), ("Concept removal", cfg.remove.clone())] {
            if name == "Concept removal" && remove.is_empty() {
                continue;
            }
            let recon = remove_and_reconstruct(&model, &remove, true)?;
            rows.push(ZeroShotRow {
                name: name.into(),
                metrics: group_metrics(&zero_shot_predict(recon.data(), &prompts)?, &labels, groups)?,
            });
        }
    }
    out.json("zeroshot", "zero_shot", &rows)?;
    let table: Vec<(String, GroupMetrics)> = rows.iter().map(|r| (r.name.clone(), r.metrics.clone())).collect();
    let mut md = format!("# Zero-shot evaluation\n\n{}", metrics_table(&table));
    if rows.len() > 1 {
        let last = &rows[rows.len() - 1].metrics;
        let _ = writeln!(
            md,
            "\nWorst-group change versus ZS: {:+.1} points; average change: {:+.1} points.",
            100.0 * (last.worst_group_acc - rows[0].metrics.worst_group_acc),
            100.0 * (last.avg_acc - rows[0].metrics.avg_acc)
        );
    }
    out.markdown("zeroshot", &md)
}

fn write_corpus(out: &Output, stem: &str, corpus: &TextCorpus) -> Result<()> {
    let mut jsonl = String::new();
    for t in &corpus.descriptions {
        jsonl.push_str(&serde_json::json!({ "text": t }).to_string());
        jsonl.push('\n');
    }
    out.raw(&format!("{stem}.jsonl"), jsonl.as_bytes())?;
    out.raw(&format!("{stem}.npy"), &npy::write(&corpus.embeddings))?;
    Ok(())
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Serialize)]
struct SynthTruth {
    kind: SynthKind,
    n: usize,
    d: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dictionary: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<synth::KurtosisFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    background_direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spurious: Option<synth::SpuriousConfig>,
}

fn cmd_synth(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let mut rng = substream(cfg.seed, domain::SYNTH, 0);
    let mut truth = SynthTruth {
        kind: cfg.synth_kind,
        n: cfg.n,
        d: cfg.d,
        seed: cfg.seed,
        mean_direction: None,
        dictionary: None,
        family: None,
        class_direction: None,
        background_direction: None,
        spurious: None,
    };
    let data = match cfg.synth_kind {
        SynthKind::Gaussian => EmbeddingMatrix::new(synth::gaussian_null(cfg.n, cfg.d, &mut rng)?, None, "gaussian")?,
        SynthKind::Gmm => {
            let (m, comp) = synth::gmm(cfg.n, cfg.d, &mut rng)?;
            let mut mu = vec![0.0; cfg.d];
            mu[0] = 1.0;
            truth.mean_direction = Some(mu);
            EmbeddingMatrix::new(m, None, "gmm")?.with_labels(comp)?
        }
        SynthKind::Planted => {
            let p = synth::planted_concepts(cfg.n, cfg.d, cfg.k, cfg.family, cfg.noise, &mut rng)?;
            truth.dictionary = Some(rows_of(&p.y));
            truth.family = Some(cfg.family);
            EmbeddingMatrix::new(p.a, None, "planted")?
        }
        SynthKind::Spurious => {
            let mut sc = cfg.spurious;
            sc.n = cfg.n;
            sc.d = cfg.d;
            let bench = synth::spurious_benchmark(&sc, &mut rng)?;
            truth.class_direction = Some(bench.class_direction.iter().copied().collect());
            truth.background_direction = Some(bench.background_direction.iter().copied().collect());
            truth.spurious = Some(sc);
            let prompts = TextCorpus::new(bench.prompts.class_names.clone(), bench.prompts.embeddings.clone())?;
            write_corpus(out, "prompts", &prompts)?;
            write_corpus(out, "target_texts", &bench.target_texts)?;
            write_corpus(out, "spurious_texts", &bench.spurious_texts)?;
            bench.embeddings
        }
    };
    out.matrix("data.rsm", &data, "synthetic")?;
    out.json("truth", "synth_truth", &truth)?;
    let md = format!(
        "# Synthetic data\n\n- kind: {:?}\n- shape: {} x {}\n- seed: {}\n- files: data.rsm, truth.json{}\n",
        cfg.synth_kind,
        cfg.n,
        cfg.d,
        cfg.seed,
        if cfg.synth_kind == SynthKind::Spurious {
            ", prompts.{jsonl,npy}, target_texts.{jsonl,npy}, spurious_texts.{jsonl,npy}"
        } else {
            ""
        }
    );
    out.markdown("synth", &md)
}
