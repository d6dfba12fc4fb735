//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqrec::corpus::{build_sequences, make_split, EvalSplit, DEFAULT_GAP_SECONDS};
use seqrec::embed::objective::{cbow_gradients, cbow_loss, skipgram_gradients, skipgram_loss};
use seqrec::embed::{self, build_vocab, train, EmbeddingModel, Hyperparams, TrainingCorpus};
use seqrec::harness::synthetic::{generate, SyntheticCorpus, SyntheticSpec};
use seqrec::harness::{run, run_with_model, train_embeddings, write_reports, ConfigType, EvalConfig, HarnessError, RunPlan};
use seqrec::recindex::{CandidateIndex, IndexEntry, RecError};
use seqrec::rouge::{baseline_scores, lcs_length, rouge_l, rouge_n, EvalInstance};
use seqrec::subseq::{subword_buckets, SeqToken};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took <= limit {
        Ok(took)
    } else {
        Err(format!("took {took:?}, limit {limit:?}"))
    }
}

fn items(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn rouge_worked_example() -> Outcome {
    let start = Instant::now();
    let reference = items("Loc123 Loc456 Loc7 Loc8 Loc91");
    let system = items("Loc7 Loc8 Loc123 Loc456 Loc91 Loc7");
    let inst = EvalInstance::new(vec![reference.as_slice()], &system).map_err(|e| e.to_string())?;
    let r2 = rouge_n(&inst, 2).map_err(|e| e.to_string())?;
    let rl = rouge_l(&inst);
    let (reluctant, strict) = baseline_scores(&inst);
    within(Duration::from_secs(1), start)?;
    let close = |x: f64, want: f64, tol: f64| (x - want).abs() <= tol;
    check(
        lcs_length(&reference, &system) == 3
            && close(r2.precision, 0.40, 1e-12)
            && close(r2.recall, 0.50, 1e-12)
            && close(r2.f_measure, 0.44, 0.005)
            && close(rl.precision, 0.50, 1e-12)
            && close(rl.recall, 0.60, 1e-12)
            && close(rl.f_measure, 0.54, 0.005)
            && reluctant.recall == 1.0
            && strict.recall == 0.0,
        format!(
            "ROUGE-2 P={:.2} R={:.2} F={:.4}; ROUGE-L P={:.2} R={:.2} F={:.4}",
            r2.precision, r2.recall, r2.f_measure, rl.precision, rl.recall, rl.f_measure
        ),
    )
}

/// Longest common subsequence by trying every subsequence of `a`.
fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    (0u32..1 << a.len())
        .filter(|mask| {
            let mut rest = b.iter();
            (0..a.len())
                .filter(|i| mask & (1 << i) != 0)
                .all(|i| rest.any(|&x| x == a[i]))
        })
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

fn all_strings(max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..3u8 {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn lcs_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let strings = all_strings(8);
    // Every pair of strings up to length 4 exhaustively, plus 10^4 random
    // pairs drawn from all strings up to length 8.
    let short: Vec<&Vec<u8>> = strings.iter().filter(|s| s.len() <= 4).collect();
    let mut pairs = 0;
    for a in &short {
        for b in &short {
            if lcs_length(a, b) != brute_lcs(a, b) {
                return Err(format!("mismatch on {a:?} / {b:?}"));
            }
            pairs += 1;
        }
    }
    for _ in 0..10_000 {
        let a = &strings[rng.gen_range(0..strings.len())];
        let b = &strings[rng.gen_range(0..strings.len())];
        if lcs_length(a, b) != brute_lcs(a, b) {
            return Err(format!("mismatch on {a:?} / {b:?}"));
        }
        pairs += 1;
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!("{pairs} pairs agree ({took:.2?})"))
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let dim = rng.gen_range(1..=8);
        let vec_of = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let n_out = rng.gen_range(2..=6);
        let mut outputs: Vec<Vec<f64>> = (0..n_out).map(|_| vec_of(&mut rng)).collect();
        let cbow = case % 2 == 1;
        let shape: Vec<usize> = if cbow {
            (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..=4)).collect()
        } else {
            vec![rng.gen_range(1..=6)]
        };
        let mut tokens: Vec<Vec<Vec<f64>>> = shape.iter().map(|&n| (0..n).map(|_| vec_of(&mut rng)).collect()).collect();

        let loss = |tokens: &[Vec<Vec<f64>>], outputs: &[Vec<f64>]| -> f64 {
            let outs: Vec<&[f64]> = outputs.iter().map(Vec::as_slice).collect();
            let toks: Vec<Vec<&[f64]>> = tokens.iter().map(|t| t.iter().map(Vec::as_slice).collect()).collect();
            if cbow {
                cbow_loss(&toks, &outs)
            } else {
                skipgram_loss(&toks[0], &outs)
            }
        };
        let grads = {
            let outs: Vec<&[f64]> = outputs.iter().map(Vec::as_slice).collect();
            let toks: Vec<Vec<&[f64]>> = tokens.iter().map(|t| t.iter().map(Vec::as_slice).collect()).collect();
            if cbow {
                cbow_gradients(&toks, &outs)
            } else {
                skipgram_gradients(&toks[0], &outs)
            }
        };
        let mut analytic: Vec<f64> = grads.rows.concat();
        analytic.extend(grads.outputs.concat());

        let mut numeric = Vec::with_capacity(analytic.len());
        for t in 0..tokens.len() {
            for r in 0..tokens[t].len() {
                for d in 0..dim {
                    let orig = tokens[t][r][d];
                    tokens[t][r][d] = orig + h;
                    let up = loss(&tokens, &outputs);
                    tokens[t][r][d] = orig - h;
                    let down = loss(&tokens, &outputs);
                    tokens[t][r][d] = orig;
                    numeric.push((up - down) / (2.0 * h));
                }
            }
        }
        for o in 0..outputs.len() {
            for d in 0..dim {
                let orig = outputs[o][d];
                outputs[o][d] = orig + h;
                let up = loss(&tokens, &outputs);
                outputs[o][d] = orig - h;
                let down = loss(&tokens, &outputs);
                outputs[o][d] = orig;
                numeric.push((up - down) / (2.0 * h));
            }
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    let took = within(Duration::from_secs(10), start)?;
    check(worst < 1e-4, format!("worst relative error {worst:.2e} over 100 instances ({took:.2?})"))
}

fn small_model() -> Result<EmbeddingModel, String> {
    let tok = |s: &str| SeqToken::from_items(&items(s)).unwrap();
    let corpus = TrainingCorpus {
        sentences: vec![
            vec![tok("a b"), tok("c"), tok("a b c")],
            vec![tok("d e"), tok("c"), tok("a b")],
        ],
    };
    let hp = Hyperparams {
        dim: 8,
        bucket_count: 1000,
        epochs: 3,
        seed: 4,
        ..Hyperparams::default()
    };
    let vocab = build_vocab(&corpus, 1).map_err(|e| e.to_string())?;
    train(&corpus, vocab, &hp).map_err(|e| e.to_string())
}

fn oov_composition() -> Outcome {
    let model = small_model()?;
    let unseen = items("x y a q");
    let token = SeqToken::from_items(&unseen).map_err(|e| e.to_string())?;
    if model.vocab().index_of(token.text()).is_some() {
        return Err("test token is unexpectedly in the vocabulary".into());
    }
    let composed = embed::compose(&model, &token).map_err(|e| e.to_string())?;
    let buckets = subword_buckets(&unseen, model.ngrams(), model.bucket_count());
    let mut mean = vec![0f64; model.dim()];
    for &b in &buckets {
        for (m, &x) in mean.iter_mut().zip(model.bucket_row(b)) {
            *m += f64::from(x);
        }
    }
    let n = buckets.len() as f64;
    let worst = composed
        .iter()
        .zip(&mean)
        .map(|(&c, &m)| (f64::from(c) - m / n).abs() / (m / n).abs().max(1e-30))
        .fold(0.0, f64::max);
    check(
        worst <= f64::from(f32::EPSILON),
        format!("{} grams, worst relative deviation {worst:.2e}", buckets.len()),
    )
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
    let na: f64 = a.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn topk_exactness() -> Outcome {
    let model = small_model()?;
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ties = 0;
    for case in 0..100 {
        let n = rng.gen_range(1..=1000);
        // Coarse integer coordinates make exact ties frequent.
        let span = if case % 2 == 0 { 2 } else { 50 };
        let mut entries = Vec::with_capacity(n);
        for i in 0..n {
            let vector: Vec<f32> = (0..dim).map(|_| rng.gen_range(-span..=span) as f32).collect();
            entries.push(IndexEntry {
                token: SeqToken::from_items(&[format!("s{i:04}")]).unwrap(),
                vector,
                owner: "u".into(),
            });
        }
        let index = CandidateIndex::from_entries(&model, entries.clone()).map_err(|e| e.to_string())?;
        let query_vec: Vec<f32> = (0..dim).map(|_| rng.gen_range(-span..=span) as f32).collect();
        let query_text = format!("s{:04}", rng.gen_range(0..n + 5));
        let query = SeqToken::from_items(&[query_text.as_str()]).unwrap();
        let k = rng.gen_range(1..=20);
        let got = index.recommend_vector(query, &query_vec, k).map_err(|e| e.to_string())?;

        let mut all: Vec<(f64, String)> = entries
            .iter()
            .filter(|e| e.token.text() != query_text)
            .map(|e| (embed::similarity(&query_vec, &e.vector).unwrap(), e.token.text().to_owned()))
            .collect();
        for ((s, _), e) in all.iter().zip(entries.iter().filter(|e| e.token.text() != query_text)) {
            if (s - cosine(&query_vec, &e.vector)).abs() > 1e-9 {
                return Err(format!("case {case}: similarity disagrees with reference cosine"));
            }
        }
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        all.truncate(k);
        ties += all.windows(2).filter(|w| w[0].0 == w[1].0).count();
        let got_pairs: Vec<(f64, String)> = got.ranked.iter().map(|s| (s.score, s.text.clone())).collect();
        if got_pairs != all {
            return Err(format!("case {case}: top-{k} differs from full scan"));
        }
    }
    check(ties > 0, format!("100 indexes agree with full scan, {ties} tied neighbours"))
}

struct Synthetic {
    corpus: SyntheticCorpus,
    split: EvalSplit,
    config: EvalConfig,
}

fn synthetic() -> Result<Synthetic, String> {
    let corpus = generate(&SyntheticSpec::default());
    let profiles = build_sequences(&corpus.interactions, DEFAULT_GAP_SECONDS).map_err(|e| e.to_string())?;
    let split = make_split(&profiles, 0.5).map_err(|e| e.to_string())?;
    let mut config = EvalConfig::default();
    config.hp.dim = 32;
    config.hp.bucket_count = 100_000;
    config.hp.ngrams.max_n = 3;
    config.hp.seed = 17;
    Ok(Synthetic { corpus, split, config })
}

fn cold_start_property(data: &Synthetic, model: &EmbeddingModel, trained_in: Duration) -> Outcome {
    let start = Instant::now();
    let mut config = data.config.clone();
    config.config_type = ConfigType::I;
    let one = run_with_model(&config, &data.split, model).map_err(|e| e.to_string())?;
    config.config_type = ConfigType::II;
    let two = run_with_model(&config, &data.split, model).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(300).saturating_sub(trained_in), start)? + trained_in;
    let users = data.corpus.user_topic.len();
    let ratio = two.rouge1_recall / one.rouge1_recall;
    check(
        users >= 500 && data.corpus.item_topic.values().collect::<HashSet<_>>().len() >= 20 && ratio >= 1.2,
        format!(
            "{users} users; ROUGE-1 recall I={:.4} II={:.4} (x{ratio:.3}); cold-start users I={} II={} ({took:.2?})",
            one.rouge1_recall, two.rouge1_recall, one.cold_start_users, two.cold_start_users
        ),
    )
}

fn semantic_clustering(data: &Synthetic, model: &EmbeddingModel) -> Outcome {
    let mut labelled: Vec<(usize, Vec<f64>)> = Vec::new();
    for token in model.vocab().tokens() {
        let Some(topic) = data.corpus.majority_topic(token.items()) else { continue };
        let v = model.compose(token).map_err(|e| e.to_string())?;
        let norm = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if norm > 1e-12 {
            labelled.push((topic, v.iter().map(|&x| f64::from(x) / norm).collect()));
        }
    }
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..labelled.len() {
        for j in i + 1..labelled.len() {
            let c: f64 = labelled[i].1.iter().zip(&labelled[j].1).map(|(a, b)| a * b).sum();
            if labelled[i].0 == labelled[j].0 {
                intra += c;
                n_intra += 1;
            } else {
                inter += c;
                n_inter += 1;
            }
        }
    }
    let (intra, inter) = (intra / n_intra.max(1) as f64, inter / n_inter.max(1) as f64);
    check(
        n_intra > 0 && n_inter > 0 && intra - inter >= 0.1,
        format!(
            "{} sequences; intra {intra:.4} vs inter {inter:.4} (gap {:.4})",
            labelled.len(),
            intra - inter
        ),
    )
}

fn determinism(data: &Synthetic) -> Outcome {
    let mut config = data.config.clone();
    config.config_type = ConfigType::III;
    config.hp.epochs = 2;
    let csv = || -> Result<Vec<u8>, String> {
        let report = run(&config, &data.split).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_reports(&mut buf, &[report]).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let (a, b) = (csv()?, csv()?);
    check(a == b, format!("two runs, {} CSV bytes each, identical={}", a.len(), a == b))
}

fn leakage_guard(data: &Synthetic, model: &EmbeddingModel) -> Outcome {
    let mut plan = RunPlan::new(&data.split, ConfigType::II, 0.5).map_err(|e| e.to_string())?;
    plan.build_index(model).map_err(|e| format!("clean pool rejected: {e}"))?;
    let injected = data.split.part_d.last().ok_or("part D is empty")?;
    plan.candidates.push(injected);
    match plan.build_index(model) {
        Err(HarnessError::Rec(RecError::Leakage { token })) => Ok(format!("injected {token} rejected at build time")),
        Err(e) => Err(format!("unexpected error {e}")),
        Ok(_) => Err("index built with a test sequence in the pool".into()),
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "ROUGE worked example", rouge_worked_example()),
        (2, "LCS oracle equivalence", lcs_oracle()),
        (3, "gradient check", gradient_check()),
        (4, "OOV composition", oov_composition()),
        (5, "top-k exactness", topk_exactness()),
    ];
    match synthetic() {
        Ok(data) => {
            let start = Instant::now();
            match train_embeddings(&data.config, &data.split) {
                Ok(model) => {
                    let trained_in = start.elapsed();
                    results.push((6, "cold-start property", cold_start_property(&data, &model, trained_in)));
                    results.push((7, "semantic clustering", semantic_clustering(&data, &model)));
                    results.push((8, "determinism", determinism(&data)));
                    results.push((9, "leakage guard", leakage_guard(&data, &model)));
                }
                Err(e) => {
                    for (n, name) in [(6, "cold-start property"), (7, "semantic clustering"), (8, "determinism"), (9, "leakage guard")] {
                        results.push((n, name, Err(format!("training failed: {e}"))));
                    }
                }
            }
        }
        Err(e) => {
            for (n, name) in [(6, "cold-start property"), (7, "semantic clustering"), (8, "determinism"), (9, "leakage guard")] {
                results.push((n, name, Err(format!("corpus generation failed: {e}"))));
            }
        }
    }
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n} [PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} [FAIL] {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
