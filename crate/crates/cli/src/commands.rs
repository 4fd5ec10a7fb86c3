use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use isoalign::alignment::EpochStats;
use isoalign::corpus::{domain_similarity, read_tokens, term_distribution, translate_tokens};
use isoalign::graph::NeighborScope;
use isoalign::retrieval::{breakdown_report, read_word_classes, EvalReport};
use isoalign::stats::Correlation;
use isoalign::synth::{correlation_suite, make_pair, SuiteConfig, SuiteRow, SynthSpec, Transform};
use isoalign::{
    adversarial_init, identical_seed, load_vec, procrustes, refine, translate, AdversarialConfig,
    BilingualDictionary, EmbeddingSpace, GraphOptions, LoadOptions, MutualNnConfig, Provenance, RefineConfig,
    RetrievalConfig, SampleConfig, TranslationMatrix,
};
use serde::Serialize;

use crate::manifest::{emit, Recorder};
use crate::{AlignArgs, AlignMode, DiagnoseArgs, DomainsimArgs, EvaluateArgs, RetrievalArgs, Scope, SpaceArgs, SynthArgs, TransformArg};

fn load_space(rec: &mut Recorder, path: &Path, max_vocab: Option<usize>) -> Result<EmbeddingSpace> {
    let bytes = rec.read_input(path)?;
    let opts = LoadOptions {
        max_vocab,
        ..Default::default()
    };
    let loaded = load_vec(bytes.as_slice(), &opts).with_context(|| format!("parsing {}", path.display()))?;
    if loaded.duplicates > 0 {
        log::warn!("{}: skipped {} duplicate words", path.display(), loaded.duplicates);
    }
    Ok(loaded.space.normalize()?)
}

fn load_spaces(rec: &mut Recorder, a: &SpaceArgs) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
    let src = load_space(rec, &a.src, a.max_vocab)?;
    let tgt = load_space(rec, &a.tgt, a.max_vocab)?;
    Ok((src, tgt))
}

fn load_dict(rec: &mut Recorder, path: &Path, provenance: Provenance) -> Result<BilingualDictionary> {
    let bytes = rec.read_input(path)?;
    BilingualDictionary::read(bytes.as_slice(), provenance).with_context(|| format!("parsing {}", path.display()))
}

fn retrieval_config(r: &RetrievalArgs) -> RetrievalConfig {
    RetrievalConfig {
        method: r.retrieval.into(),
        k: r.csls_k,
        candidates: None,
    }
}

#[derive(Serialize)]
struct SampleRow<'a> {
    delta: f64,
    k: usize,
    isomorphic: Option<bool>,
    source_words: &'a [String],
    target_words: &'a [String],
}

#[derive(Serialize)]
struct DiagnoseBody<'a> {
    pairs_available: usize,
    mean_delta: f64,
    isomorphic_count: usize,
    isomorphism_checked: usize,
    samples: Vec<SampleRow<'a>>,
}

pub fn diagnose(a: &DiagnoseArgs, no_timings: bool) -> Result<()> {
    let mut rec = Recorder::new("diagnose", a, Some(a.seed), no_timings)?;
    let (src, tgt) = load_spaces(&mut rec, &a.spaces)?;
    let gold = load_dict(&mut rec, &a.gold, Provenance::Gold)?;
    let cfg = SampleConfig {
        num_samples: a.samples,
        sample_size: a.sample_size,
        seed: a.seed,
        graph: GraphOptions {
            scope: match a.neighbor_scope {
                Scope::NodeSet => NeighborScope::NodeSet,
                Scope::FullVocabulary => NeighborScope::FullVocabulary,
            },
            ..Default::default()
        },
        ..Default::default()
    };
    let report = rec.time("sample", || isoalign::sampled_subgraph_similarity(&src, &tgt, &gold, &cfg))?;
    let body = DiagnoseBody {
        pairs_available: report.pairs_available,
        mean_delta: report.mean_delta,
        isomorphic_count: report.isomorphic_count(),
        isomorphism_checked: report.samples.iter().filter(|s| s.isomorphic.is_some()).count(),
        samples: report
            .samples
            .iter()
            .map(|s| SampleRow {
                delta: s.similarity.delta,
                k: s.similarity.k_used,
                isomorphic: s.isomorphic,
                source_words: &s.source_words,
                target_words: &s.target_words,
            })
            .collect(),
    };
    emit(&rec.finish(), &body, a.out.as_deref())
}

#[derive(Serialize)]
struct AlignBody {
    mode: AlignMode,
    seed_pairs: Option<usize>,
    procrustes_pairs_used: Option<usize>,
    dictionary_sizes: Vec<usize>,
    orthogonality_residual: f64,
    adversarial_trace: Option<Vec<EpochStats>>,
    matrix: String,
}

pub fn align(a: &AlignArgs, no_timings: bool) -> Result<()> {
    let mut rec = Recorder::new("align", a, Some(a.seed), no_timings)?;
    let (src, tgt) = load_spaces(&mut rec, &a.spaces)?;
    let retrieval = retrieval_config(&a.retrieval);

    let mut seed_pairs = None;
    let mut procrustes_pairs_used = None;
    let mut adversarial_trace = None;
    let w0 = match a.mode {
        AlignMode::Identical | AlignMode::SeedFile => {
            let seed = match (&a.mode, &a.seed_dict) {
                (AlignMode::SeedFile, Some(path)) => {
                    let d = load_dict(&mut rec, path, Provenance::Gold)?;
                    if d.is_empty() {
                        return Err(isoalign::Error::EmptySeed(format!("{} has no pairs", path.display())).into());
                    }
                    d
                }
                _ => identical_seed(&src, &tgt)?,
            };
            seed_pairs = Some(seed.len());
            let fit = rec.time("procrustes", || procrustes(&src, &tgt, &seed))?;
            procrustes_pairs_used = Some(fit.pairs_used);
            fit.matrix
        }
        AlignMode::Adversarial => {
            let cfg = AdversarialConfig {
                epochs: a.epochs,
                seed: a.seed,
                ..Default::default()
            };
            let run = rec.time("adversarial", || adversarial_init(&src, &tgt, &cfg))?;
            adversarial_trace = Some(run.trace);
            run.matrix
        }
    };
    let cfg = RefineConfig {
        iterations: a.iterations,
        mutual: MutualNnConfig {
            top_frequent: a.top_frequent,
            retrieval,
        },
    };
    let refined = rec.time("refine", || refine(&src, &tgt, &w0, &cfg))?;
    let w = refined.matrix;

    let mut out = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    w.write(&mut out)?;
    out.flush()?;

    let body = AlignBody {
        mode: a.mode,
        seed_pairs,
        procrustes_pairs_used,
        dictionary_sizes: refined.dictionary_sizes,
        orthogonality_residual: w.orthogonality_residual(),
        adversarial_trace,
        matrix: a.out.display().to_string(),
    };
    emit(&rec.finish(), &body, a.report.as_deref())
}

#[derive(Serialize)]
struct EvaluateBody {
    #[serde(flatten)]
    report: EvalReport,
    skipped_queries: Vec<String>,
}

pub fn evaluate(a: &EvaluateArgs, no_timings: bool) -> Result<()> {
    let mut rec = Recorder::new("evaluate", a, None, no_timings)?;
    let (src, tgt) = load_spaces(&mut rec, &a.spaces)?;
    let w_bytes = rec.read_input(&a.matrix)?;
    let w = TranslationMatrix::read(w_bytes.as_slice()).with_context(|| format!("parsing {}", a.matrix.display()))?;
    let gold = load_dict(&mut rec, &a.gold, Provenance::Gold)?;
    let classes = match &a.word_classes {
        Some(p) => {
            let bytes = rec.read_input(p)?;
            Some(read_word_classes(bytes.as_slice()).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let cfg = retrieval_config(&a.retrieval);
    let translation = rec.time("translate", || translate(gold.sources(), &src, &tgt, &w, &cfg))?;
    let breakdown = breakdown_report(&translation, &gold, &src, &tgt, classes.as_ref())?;

    if let Some(path) = &a.out {
        let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(out, "query\tpredicted\tscore\tcorrect\tgroups")?;
        for r in &breakdown.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.query,
                r.predicted,
                r.score,
                r.correct as u8,
                r.groups.join(",")
            )?;
        }
        out.flush()?;
    }
    let body = EvaluateBody {
        report: breakdown.report,
        skipped_queries: translation.skipped_oov,
    };
    emit(&rec.finish(), &body, a.report.as_deref())
}

#[derive(Serialize)]
struct DomainsimBody {
    js: f64,
    dsim: f64,
    vocabulary_a: usize,
    vocabulary_b: usize,
    untranslated_tokens: Option<usize>,
}

pub fn domainsim(a: &DomainsimArgs, no_timings: bool) -> Result<()> {
    let mut rec = Recorder::new("domainsim", a, None, no_timings)?;
    let mut tokens_a = read_tokens(rec.read_input(&a.corpus_a)?.as_slice())?;
    let tokens_b = read_tokens(rec.read_input(&a.corpus_b)?.as_slice())?;
    let mut untranslated = None;
    if let Some(path) = &a.dict {
        let dict = load_dict(&mut rec, path, Provenance::Gold)?;
        let (translated, dropped) = translate_tokens(&tokens_a, &dict);
        tokens_a = translated;
        untranslated = Some(dropped);
    }
    let p = term_distribution(&tokens_a, a.max_vocab).with_context(|| format!("corpus {}", a.corpus_a.display()))?;
    let q = term_distribution(&tokens_b, a.max_vocab).with_context(|| format!("corpus {}", a.corpus_b.display()))?;
    let sim = domain_similarity(&p, &q);
    let body = DomainsimBody {
        js: sim.js,
        dsim: sim.dsim,
        vocabulary_a: p.len(),
        vocabulary_b: q.len(),
        untranslated_tokens: untranslated,
    };
    emit(&rec.finish(), &body, a.out.as_deref())
}

#[derive(Serialize)]
struct SynthBody {
    spec: SynthSpec,
    files: Vec<String>,
    suite: Option<Vec<SuiteRow>>,
    correlation: Option<Correlation>,
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> isoalign::Result<()>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn synth(a: &SynthArgs, no_timings: bool) -> Result<()> {
    let mut rec = Recorder::new("synth", a, Some(a.seed), no_timings)?;
    let spec = SynthSpec {
        n: a.n,
        d: a.d,
        noise_sigma: a.noise,
        transform: match a.transform {
            TransformArg::Rotation => Transform::Rotation,
            TransformArg::RotationScaling => Transform::RotationScaling,
        },
        domain_shift: a.domain_shift,
        shared_fraction: a.shared_fraction,
        seed: a.seed,
    };
    let pair = rec.time("generate", || make_pair(&spec))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut files = vec!["src.vec", "tgt.vec", "gold.txt", "true_w.txt"];
    write_file(&a.out.join("src.vec"), |o| pair.src.write_vec(o))?;
    write_file(&a.out.join("tgt.vec"), |o| pair.tgt.write_vec(o))?;
    write_file(&a.out.join("gold.txt"), |o| pair.gold.write(o))?;
    write_file(&a.out.join("true_w.txt"), |o| pair.true_w.write(o))?;

    let (suite, correlation) = if a.no_suite {
        (None, None)
    } else {
        let retrieval = retrieval_config(&a.retrieval);
        let cfg = SuiteConfig {
            refine: RefineConfig {
                iterations: a.iterations,
                mutual: MutualNnConfig {
                    retrieval,
                    ..Default::default()
                },
            },
            retrieval,
            sampling: SampleConfig {
                num_samples: a.samples,
                sample_size: a.sample_size,
                seed: a.seed,
                ..Default::default()
            },
            ..Default::default()
        };
        let report = rec.time("suite", || correlation_suite(&a.noise_levels, &spec, &cfg))?;
        fs::write(a.out.join("suite.csv"), report.to_csv())?;
        files.push("suite.csv");
        (Some(report.rows), Some(report.correlation))
    };

    let body = SynthBody {
        spec,
        files: files.into_iter().map(str::to_owned).collect(),
        suite,
        correlation,
    };
    emit(&rec.finish(), &body, Some(&a.out.join("report.json")))
}
