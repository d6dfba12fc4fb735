use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective;
use super::{EmbedError, EmbeddingModel, Hyperparams, Matrix, NegativeSampler, TrainMode, TrainingCorpus, Vocabulary};

/// The learning rate never decays below this fraction of its initial value.
const MIN_LR_FRACTION: f64 = 1e-4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean loss per update, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    pub updates: u64,
}

impl EmbeddingModel {
    /// Model with input rows drawn uniformly from `±0.5/dim` and zero context
    /// rows. Draws from the same generator stream `train` starts with.
    pub fn initialize(vocab: Vocabulary, hp: &Hyperparams) -> Result<Self, EmbedError> {
        hp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        Ok(init_with(vocab, hp, &mut rng))
    }
}

fn init_with(vocab: Vocabulary, hp: &Hyperparams, rng: &mut ChaCha8Rng) -> EmbeddingModel {
    let rows = vocab.len() + hp.bucket_count as usize;
    let bound = 0.5 / hp.dim as f32;
    let data = (0..rows * hp.dim).map(|_| rng.gen_range(-bound..=bound)).collect();
    let input = Matrix::from_vec(rows, hp.dim, data);
    let context = Matrix::zeros(vocab.len(), hp.dim);
    EmbeddingModel::from_parts(hp.clone(), vocab, input, context)
}

pub fn train(corpus: &TrainingCorpus, vocab: Vocabulary, hp: &Hyperparams) -> Result<EmbeddingModel, EmbedError> {
    train_with_report(corpus, vocab, hp).map(|(model, _)| model)
}

/// Trains and also returns per-epoch mean losses.
pub fn train_with_report(
    corpus: &TrainingCorpus,
    vocab: Vocabulary,
    hp: &Hyperparams,
) -> Result<(EmbeddingModel, TrainReport), EmbedError> {
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let EmbeddingModel {
        hp,
        vocab,
        mut input,
        mut context,
        token_buckets,
    } = init_with(vocab, hp, &mut rng);

    let sentences: Vec<Vec<usize>> = corpus
        .sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.index_of(t.text())).collect())
        .collect();
    let per_epoch: u64 = sentences.iter().map(|s| update_count(s.len(), hp.window, hp.mode)).sum();
    let keep_prob = hp.subsample.map(|t| {
        let total = vocab.total_count() as f64;
        vocab
            .counts()
            .iter()
            .map(|&c| {
                let ratio = t / (c as f64 / total);
                (ratio.sqrt() + ratio).min(1.0)
            })
            .collect()
    });
    let processed = AtomicU64::new(0);
    let plan = Plan {
        hp: &hp,
        vocab_len: vocab.len(),
        token_buckets: &token_buckets,
        sampler: vocab.sampler(),
        keep_prob,
        total_updates: (per_epoch * hp.epochs as u64).max(1),
        processed: &processed,
    };

    let mut report = TrainReport::default();
    if hp.threads == 1 {
        let indexed: Vec<(usize, &[usize])> = sentences.iter().map(Vec::as_slice).enumerate().collect();
        for epoch in 0..hp.epochs {
            let (loss, n) = plan.run(&mut input, &mut context, &indexed, epoch, &mut rng)?;
            report.push_epoch(loss, n);
        }
    } else {
        let shared_input = AtomicMatrix::from(input);
        let shared_context = AtomicMatrix::from(context);
        let shards = shard(&sentences, hp.threads);
        let mut rngs: Vec<ChaCha8Rng> = (0..shards.len())
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(hp.seed);
                r.set_stream(i as u64 + 1);
                r
            })
            .collect();
        for epoch in 0..hp.epochs {
            let results: Vec<Result<(f64, u64), EmbedError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = shards
                    .iter()
                    .zip(rngs.iter_mut())
                    .map(|(shard, rng)| {
                        let plan = &plan;
                        let (mut inp, mut ctx) = (&shared_input, &shared_context);
                        scope.spawn(move || plan.run(&mut inp, &mut ctx, shard, epoch, rng))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            });
            let (mut loss, mut n) = (0.0, 0);
            for r in results {
                let (l, c) = r?;
                loss += l;
                n += c;
            }
            report.push_epoch(loss, n);
        }
        input = shared_input.into_matrix();
        context = shared_context.into_matrix();
    }

    let model = EmbeddingModel::from_parts(hp, vocab, input, context);
    Ok((model, report))
}

impl TrainReport {
    fn push_epoch(&mut self, loss_sum: f64, updates: u64) {
        self.updates += updates;
        self.epoch_losses
            .push(if updates == 0 { 0.0 } else { loss_sum / updates as f64 });
    }
}

fn update_count(len: usize, window: usize, mode: TrainMode) -> u64 {
    (0..len)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(len.saturating_sub(1));
            let ctx = (hi - lo) as u64;
            match mode {
                TrainMode::SkipGram => ctx,
                TrainMode::Cbow => u64::from(ctx > 0),
            }
        })
        .sum()
}

fn shard(sentences: &[Vec<usize>], threads: usize) -> Vec<Vec<(usize, &[usize])>> {
    let mut shards = vec![Vec::new(); threads.min(sentences.len()).max(1)];
    let n = shards.len();
    for (i, s) in sentences.iter().enumerate() {
        shards[i * n / sentences.len().max(1)].push((i, s.as_slice()));
    }
    shards
}

/// Row storage the update loop reads from and adds into.
trait Params {
    fn copy_row(&self, row: usize, out: &mut [f32]);
    /// `row += alpha * x`
    fn add_row(&mut self, row: usize, alpha: f32, x: &[f32]);
}

impl Params for Matrix {
    fn copy_row(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(self.row(row));
    }

    fn add_row(&mut self, row: usize, alpha: f32, x: &[f32]) {
        for (r, &v) in self.row_mut(row).iter_mut().zip(x) {
            *r += alpha * v;
        }
    }
}

/// Shared matrix for lock-free training. Reads and writes are individually
/// atomic but read-modify-write sequences are not, so concurrent updates to
/// the same row may be lost.
struct AtomicMatrix {
    rows: usize,
    cols: usize,
    data: Vec<AtomicU32>,
}

impl From<Matrix> for AtomicMatrix {
    fn from(m: Matrix) -> Self {
        let (rows, cols) = (m.rows(), m.cols());
        AtomicMatrix {
            rows,
            cols,
            data: m.into_vec().into_iter().map(|x| AtomicU32::new(x.to_bits())).collect(),
        }
    }
}

impl AtomicMatrix {
    fn into_matrix(self) -> Matrix {
        let data = self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }
}

impl Params for &AtomicMatrix {
    fn copy_row(&self, row: usize, out: &mut [f32]) {
        let cells = &self.data[row * self.cols..(row + 1) * self.cols];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add_row(&mut self, row: usize, alpha: f32, x: &[f32]) {
        let cells = &self.data[row * self.cols..(row + 1) * self.cols];
        for (c, &v) in cells.iter().zip(x) {
            let cur = f32::from_bits(c.load(Ordering::Relaxed));
            c.store((cur + alpha * v).to_bits(), Ordering::Relaxed);
        }
    }
}

struct Plan<'a> {
    hp: &'a Hyperparams,
    vocab_len: usize,
    token_buckets: &'a [Vec<u32>],
    sampler: &'a NegativeSampler,
    keep_prob: Option<Vec<f64>>,
    total_updates: u64,
    processed: &'a AtomicU64,
}

/// Per-worker buffers reused across updates.
struct Scratch {
    rows: Vec<usize>,
    /// Start of each context token's rows within `rows` (CBOW).
    spans: Vec<(usize, usize)>,
    row: Vec<f32>,
    hidden: Vec<f32>,
    outputs: Vec<f32>,
    output_ids: Vec<usize>,
    coefs: Vec<f32>,
    grad: Vec<f32>,
}

impl Scratch {
    fn new(dim: usize, negatives: usize) -> Self {
        Scratch {
            rows: Vec::new(),
            spans: Vec::new(),
            row: vec![0.0; dim],
            hidden: vec![0.0; dim],
            outputs: Vec::with_capacity((negatives + 1) * dim),
            output_ids: Vec::with_capacity(negatives + 1),
            coefs: Vec::with_capacity(negatives + 1),
            grad: vec![0.0; dim],
        }
    }
}

impl Plan<'_> {
    fn rows_of(&self, token: usize, out: &mut Vec<usize>) {
        out.push(token);
        out.extend(self.token_buckets[token].iter().map(|&b| self.vocab_len + b as usize));
    }

    fn next_lr(&self) -> f32 {
        let done = self.processed.fetch_add(1, Ordering::Relaxed) as f64;
        let frac = (1.0 - done / self.total_updates as f64).max(MIN_LR_FRACTION);
        (self.hp.lr * frac) as f32
    }

    /// One epoch over `sentences`; returns the summed loss and update count.
    fn run<P: Params>(
        &self,
        input: &mut P,
        context: &mut P,
        sentences: &[(usize, &[usize])],
        epoch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, u64), EmbedError> {
        let hp = self.hp;
        let mut scratch = Scratch::new(hp.dim, hp.negatives);
        let mut kept = Vec::new();
        let (mut loss_sum, mut updates) = (0f64, 0u64);
        for &(sentence_id, sentence) in sentences {
            let sentence = match &self.keep_prob {
                None => sentence,
                Some(keep) => {
                    kept.clear();
                    kept.extend(sentence.iter().copied().filter(|&t| rng.gen::<f64>() < keep[t]));
                    kept.as_slice()
                }
            };
            for pos in 0..sentence.len() {
                let lo = pos.saturating_sub(hp.window);
                let hi = (pos + hp.window).min(sentence.len() - 1);
                let diag = |_| EmbedError::NonFiniteLoss {
                    epoch,
                    sentence: sentence_id,
                    position: pos,
                };
                match hp.mode {
                    TrainMode::SkipGram => {
                        for ctx in (lo..=hi).filter(|&j| j != pos) {
                            let loss = self.skipgram_update(input, context, sentence[pos], sentence[ctx], rng, &mut scratch);
                            check_finite(loss).map_err(diag)?;
                            loss_sum += f64::from(loss);
                            updates += 1;
                        }
                    }
                    TrainMode::Cbow => {
                        if hi > lo {
                            let window = (lo..=hi).filter(|&j| j != pos).map(|j| sentence[j]);
                            let loss = self.cbow_update(input, context, window, sentence[pos], rng, &mut scratch);
                            check_finite(loss).map_err(diag)?;
                            loss_sum += f64::from(loss);
                            updates += 1;
                        }
                    }
                }
            }
        }
        Ok((loss_sum, updates))
    }

    fn draw_outputs(&self, target: usize, rng: &mut ChaCha8Rng, scratch: &mut Scratch) {
        scratch.output_ids.clear();
        scratch.output_ids.push(target);
        if self.vocab_len < 2 {
            return;
        }
        for _ in 0..self.hp.negatives {
            let neg = loop {
                let s = self.sampler.sample(rng);
                if s != target {
                    break s;
                }
            };
            scratch.output_ids.push(neg);
        }
    }

    /// Shared tail of both modes: scores the outputs against `scratch.hidden`,
    /// updates the output rows and leaves the hidden gradient in `scratch.grad`.
    fn output_step<P: Params>(&self, context: &mut P, lr: f32, scratch: &mut Scratch) -> f32 {
        let dim = self.hp.dim;
        scratch.outputs.clear();
        for &id in &scratch.output_ids {
            context.copy_row(id, &mut scratch.row);
            scratch.outputs.extend_from_slice(&scratch.row);
        }
        let loss = objective::forward(&scratch.hidden, &scratch.outputs, &mut scratch.coefs);
        objective::hidden_gradient(&scratch.coefs, &scratch.outputs, &mut scratch.grad);
        debug_assert_eq!(scratch.outputs.len(), scratch.output_ids.len() * dim);
        for (&id, &coef) in scratch.output_ids.iter().zip(&scratch.coefs) {
            context.add_row(id, -lr * coef, &scratch.hidden);
        }
        loss
    }

    fn skipgram_update<P: Params>(
        &self,
        input: &mut P,
        context: &mut P,
        center: usize,
        target: usize,
        rng: &mut ChaCha8Rng,
        scratch: &mut Scratch,
    ) -> f32 {
        let lr = self.next_lr();
        scratch.rows.clear();
        self.rows_of(center, &mut scratch.rows);
        scratch.hidden.iter_mut().for_each(|x| *x = 0.0);
        for &r in &scratch.rows {
            input.copy_row(r, &mut scratch.row);
            for (h, &v) in scratch.hidden.iter_mut().zip(&scratch.row) {
                *h += v;
            }
        }
        let n = scratch.rows.len() as f32;
        scratch.hidden.iter_mut().for_each(|h| *h /= n);

        self.draw_outputs(target, rng, scratch);
        let loss = self.output_step(context, lr, scratch);
        for &r in &scratch.rows {
            input.add_row(r, -lr / n, &scratch.grad);
        }
        loss
    }

    fn cbow_update<P: Params>(
        &self,
        input: &mut P,
        context: &mut P,
        window: impl Iterator<Item = usize>,
        center: usize,
        rng: &mut ChaCha8Rng,
        scratch: &mut Scratch,
    ) -> f32 {
        let lr = self.next_lr();
        let dim = self.hp.dim;
        scratch.rows.clear();
        scratch.spans.clear();
        for token in window {
            let start = scratch.rows.len();
            self.rows_of(token, &mut scratch.rows);
            scratch.spans.push((start, scratch.rows.len()));
        }
        let mut composed = vec![0f32; dim];
        scratch.hidden.iter_mut().for_each(|x| *x = 0.0);
        for &(start, end) in &scratch.spans {
            composed.iter_mut().for_each(|x| *x = 0.0);
            for &r in &scratch.rows[start..end] {
                input.copy_row(r, &mut scratch.row);
                for (c, &v) in composed.iter_mut().zip(&scratch.row) {
                    *c += v;
                }
            }
            let n = (end - start) as f32;
            for (h, &c) in scratch.hidden.iter_mut().zip(&composed) {
                *h += c / n;
            }
        }
        let tokens = scratch.spans.len() as f32;
        scratch.hidden.iter_mut().for_each(|h| *h /= tokens);

        self.draw_outputs(center, rng, scratch);
        let loss = self.output_step(context, lr, scratch);
        for &(start, end) in &scratch.spans {
            let share = lr / (tokens * (end - start) as f32);
            for &r in &scratch.rows[start..end] {
                input.add_row(r, -share, &scratch.grad);
            }
        }
        loss
    }
}

fn check_finite(loss: f32) -> Result<(), ()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{build_vocab, objective::sigmoid, similarity};
    use crate::subseq::{NgramRange, SeqToken};

    fn tok(items: &[&str]) -> SeqToken {
        SeqToken::from_items(items).unwrap()
    }

    fn small_hp() -> Hyperparams {
        Hyperparams {
            dim: 16,
            bucket_count: 5_000,
            epochs: 5,
            seed: 42,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn update_counts() {
        assert_eq!(update_count(1, 5, TrainMode::SkipGram), 0);
        assert_eq!(update_count(3, 1, TrainMode::SkipGram), 4);
        assert_eq!(update_count(3, 5, TrainMode::SkipGram), 6);
        assert_eq!(update_count(3, 1, TrainMode::Cbow), 3);
        assert_eq!(update_count(1, 1, TrainMode::Cbow), 0);
    }

    #[test]
    fn repeated_pair_converges() {
        let (t1, t2) = (tok(&["a", "b"]), tok(&["c"]));
        let corpus = TrainingCorpus {
            sentences: vec![vec![t1.clone(), t2.clone()]; 20],
        };
        let hp = Hyperparams {
            epochs: 50,
            ..small_hp()
        };
        let vocab = build_vocab(&corpus, 1).unwrap();
        let model = train(&corpus, vocab, &hp).unwrap();
        let h = model.compose(&t1).unwrap();
        let ctx = model.context_row(model.vocab().index_of(t2.text()).unwrap());
        let p = sigmoid(objective::dot(&h, ctx));
        assert!(p > 0.9, "p = {p}");
    }

    #[test]
    fn no_pairs_leaves_initialization() {
        let corpus = TrainingCorpus {
            sentences: vec![vec![tok(&["a"])], vec![tok(&["b", "c"])]],
        };
        let hp = Hyperparams {
            epochs: 1,
            ..small_hp()
        };
        let vocab = build_vocab(&corpus, 1).unwrap();
        let (model, report) = train_with_report(&corpus, vocab.clone(), &hp).unwrap();
        assert_eq!(report.updates, 0);
        assert_eq!(model, EmbeddingModel::initialize(vocab, &hp).unwrap());
        let bound = 0.5 / hp.dim as f32;
        assert!(model.input_vectors().as_slice().iter().all(|x| x.abs() <= bound));
        assert!(model.context_vectors().as_slice().iter().all(|&x| x == 0.0));
    }

    fn family_corpus(families: usize, users: usize, seed: u64) -> TrainingCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sentences = (0..users)
            .map(|u| {
                let fam = u % families;
                (0..6)
                    .map(|_| {
                        let len = rng.gen_range(2..5);
                        let items: Vec<String> =
                            (0..len).map(|_| format!("f{fam}i{}", rng.gen_range(0..6))).collect();
                        SeqToken::from_items(&items).unwrap()
                    })
                    .collect()
            })
            .collect();
        TrainingCorpus { sentences }
    }

    #[test]
    fn loss_decreases() {
        for mode in [TrainMode::SkipGram, TrainMode::Cbow] {
            let corpus = family_corpus(4, 40, 1);
            let hp = Hyperparams {
                mode,
                epochs: 8,
                ..small_hp()
            };
            let vocab = build_vocab(&corpus, 1).unwrap();
            let (_, report) = train_with_report(&corpus, vocab, &hp).unwrap();
            assert!(report.updates >= 100);
            let (first, last) = (report.epoch_losses[0], *report.epoch_losses.last().unwrap());
            assert!(last <= first * 1.01, "{mode}: {first} -> {last}");
        }
    }

    #[test]
    fn deterministic_single_thread() {
        let corpus = family_corpus(3, 20, 2);
        let hp = small_hp();
        let a = train(&corpus, build_vocab(&corpus, 1).unwrap(), &hp).unwrap();
        let b = train(&corpus, build_vocab(&corpus, 1).unwrap(), &hp).unwrap();
        let bits = |m: &EmbeddingModel| -> Vec<u32> {
            m.input_vectors().as_slice().iter().map(|x| x.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a, b);
    }

    #[test]
    fn families_cluster() {
        let corpus = family_corpus(4, 60, 3);
        let hp = Hyperparams {
            epochs: 10,
            ..small_hp()
        };
        let model = train(&corpus, build_vocab(&corpus, 1).unwrap(), &hp).unwrap();
        let tokens: Vec<(usize, Vec<f32>)> = corpus
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(u, s)| s.iter().map(move |t| (u % 4, t)))
            .map(|(f, t)| (f, model.compose(t).unwrap()))
            .collect();
        let (mut intra, mut inter) = ((0.0, 0), (0.0, 0));
        for i in 0..tokens.len() {
            for j in i + 1..tokens.len() {
                let s = similarity(&tokens[i].1, &tokens[j].1).unwrap();
                if tokens[i].0 == tokens[j].0 {
                    intra = (intra.0 + s, intra.1 + 1);
                } else {
                    inter = (inter.0 + s, inter.1 + 1);
                }
            }
        }
        let (intra, inter) = (intra.0 / intra.1 as f64, inter.0 / inter.1 as f64);
        assert!(intra > inter, "intra {intra} inter {inter}");
    }

    #[test]
    fn parallel_training_is_finite_and_learns() {
        let corpus = family_corpus(4, 80, 4);
        let hp = Hyperparams {
            threads: 4,
            epochs: 6,
            ..small_hp()
        };
        let (model, report) = train_with_report(&corpus, build_vocab(&corpus, 1).unwrap(), &hp).unwrap();
        assert!(model.input_vectors().as_slice().iter().all(|x| x.is_finite()));
        assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
    }

    #[test]
    fn subsampling_runs() {
        let corpus = family_corpus(2, 20, 5);
        let hp = Hyperparams {
            subsample: Some(1e-3),
            ..small_hp()
        };
        let model = train(&corpus, build_vocab(&corpus, 1).unwrap(), &hp).unwrap();
        assert!(model.input_vectors().as_slice().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_bad_hyperparams() {
        let corpus = family_corpus(2, 4, 6);
        let hp = Hyperparams {
            epochs: 0,
            ..small_hp()
        };
        assert!(matches!(
            train(&corpus, build_vocab(&corpus, 1).unwrap(), &hp),
            Err(EmbedError::InvalidHyperparams(_))
        ));
        let hp = Hyperparams {
            ngrams: NgramRange { min_n: 3, max_n: 2, with_boundaries: true },
            ..small_hp()
        };
        assert!(train(&corpus, build_vocab(&corpus, 1).unwrap(), &hp).is_err());
    }

    #[test]
    fn diverging_learning_rate_is_reported() {
        let corpus = family_corpus(2, 30, 7);
        let hp = Hyperparams {
            lr: 1e30,
            epochs: 3,
            ..small_hp()
        };
        let err = train(&corpus, build_vocab(&corpus, 1).unwrap(), &hp).unwrap_err();
        assert!(matches!(err, EmbedError::NonFiniteLoss { .. }), "{err}");
    }
}
