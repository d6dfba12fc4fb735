//! Negative-sampling objective, generic over the float type so the trainer
//! (f32) and the finite-difference checks (f64) run the same arithmetic.
//!
//! For a hidden vector `h` and output vectors `o_0` (the observed target)
//! and `o_1..o_K` (negatives) the loss is
//! `softplus(-h·o_0) + Σ_k softplus(h·o_k)`. Its derivative with respect to
//! `h·o_k` is `σ(h·o_k) - label_k`, called the coefficient of output `k`.

use num_traits::Float;

/// `ln(1 + e^x)` without overflow.
pub fn softplus<F: Float>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Writes the arithmetic mean of `rows` into `out`.
pub fn mean_rows<F: Float>(rows: &[&[F]], out: &mut [F]) {
    out.iter_mut().for_each(|x| *x = F::zero());
    for row in rows {
        for (o, &v) in out.iter_mut().zip(row.iter()) {
            *o = *o + v;
        }
    }
    let n = F::from(rows.len()).expect("row count fits the float type");
    out.iter_mut().for_each(|x| *x = *x / n);
}

/// Loss of one positive/negatives group and the per-output coefficients.
/// `outputs` holds the output vectors back to back, the positive target
/// first.
pub fn forward<F: Float>(hidden: &[F], outputs: &[F], coefs: &mut Vec<F>) -> F {
    coefs.clear();
    let mut loss = F::zero();
    for (k, out) in outputs.chunks_exact(hidden.len()).enumerate() {
        let score = dot(hidden, out);
        if k == 0 {
            loss = loss + softplus(-score);
            coefs.push(sigmoid(score) - F::one());
        } else {
            loss = loss + softplus(score);
            coefs.push(sigmoid(score));
        }
    }
    loss
}

/// Gradient of the loss with respect to the hidden vector: `Σ_k coef_k o_k`.
pub fn hidden_gradient<F: Float>(coefs: &[F], outputs: &[F], out: &mut [F]) {
    let dim = out.len();
    out.iter_mut().for_each(|x| *x = F::zero());
    for (&c, o) in coefs.iter().zip(outputs.chunks_exact(dim)) {
        for (g, &v) in out.iter_mut().zip(o.iter()) {
            *g = *g + c * v;
        }
    }
}

fn flatten<F: Float>(outputs: &[&[F]]) -> Vec<F> {
    outputs.iter().flat_map(|o| o.iter().copied()).collect()
}

/// Full gradients of one update, for checking.
#[derive(Clone, Debug)]
pub struct Gradients<F> {
    pub loss: F,
    /// One entry per input row averaged into the hidden vector.
    pub rows: Vec<Vec<F>>,
    pub outputs: Vec<Vec<F>>,
}

/// Loss when the hidden vector is the mean of `rows`.
pub fn skipgram_loss<F: Float>(rows: &[&[F]], outputs: &[&[F]]) -> F {
    let mut hidden = vec![F::zero(); outputs[0].len()];
    mean_rows(rows, &mut hidden);
    forward(&hidden, &flatten(outputs), &mut Vec::new())
}

/// Analytic gradients of [`skipgram_loss`]. Each input row receives
/// `1/|rows|` of the hidden gradient.
pub fn skipgram_gradients<F: Float>(rows: &[&[F]], outputs: &[&[F]]) -> Gradients<F> {
    let dim = outputs[0].len();
    let mut hidden = vec![F::zero(); dim];
    mean_rows(rows, &mut hidden);
    let flat = flatten(outputs);
    let mut coefs = Vec::new();
    let loss = forward(&hidden, &flat, &mut coefs);
    let mut grad_h = vec![F::zero(); dim];
    hidden_gradient(&coefs, &flat, &mut grad_h);
    let share = F::one() / F::from(rows.len()).expect("row count fits the float type");
    Gradients {
        loss,
        rows: rows
            .iter()
            .map(|_| grad_h.iter().map(|&g| g * share).collect())
            .collect(),
        outputs: coefs
            .iter()
            .map(|&c| hidden.iter().map(|&h| c * h).collect())
            .collect(),
    }
}

/// Loss when the hidden vector is the mean over context tokens of each
/// token's mean row.
pub fn cbow_loss<F: Float>(tokens: &[Vec<&[F]>], outputs: &[&[F]]) -> F {
    let dim = outputs[0].len();
    let hidden = cbow_hidden(tokens, dim);
    forward(&hidden, &flatten(outputs), &mut Vec::new())
}

fn cbow_hidden<F: Float>(tokens: &[Vec<&[F]>], dim: usize) -> Vec<F> {
    let mut hidden = vec![F::zero(); dim];
    let mut composed = vec![F::zero(); dim];
    for rows in tokens {
        mean_rows(rows, &mut composed);
        for (h, &c) in hidden.iter_mut().zip(&composed) {
            *h = *h + c;
        }
    }
    let n = F::from(tokens.len()).expect("token count fits the float type");
    hidden.iter_mut().for_each(|h| *h = *h / n);
    hidden
}

/// Analytic gradients of [`cbow_loss`]; `rows` is flattened token by token.
pub fn cbow_gradients<F: Float>(tokens: &[Vec<&[F]>], outputs: &[&[F]]) -> Gradients<F> {
    let dim = outputs[0].len();
    let hidden = cbow_hidden(tokens, dim);
    let flat = flatten(outputs);
    let mut coefs = Vec::new();
    let loss = forward(&hidden, &flat, &mut coefs);
    let mut grad_h = vec![F::zero(); dim];
    hidden_gradient(&coefs, &flat, &mut grad_h);
    let n_tokens = F::from(tokens.len()).expect("token count fits the float type");
    let mut rows = Vec::new();
    for token_rows in tokens {
        let share = F::one() / (n_tokens * F::from(token_rows.len()).expect("fits"));
        for _ in token_rows {
            rows.push(grad_h.iter().map(|&g| g * share).collect());
        }
    }
    Gradients {
        loss,
        rows,
        outputs: coefs
            .iter()
            .map(|&c| hidden.iter().map(|&h| c * h).collect())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na.max(nb) < 1e-12 {
            diff
        } else {
            diff / na.max(nb)
        }
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert!((softplus(0.0f64) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(1000.0f64), 1000.0);
        assert!(softplus(-1000.0f64) >= 0.0);
        assert_eq!(sigmoid(0.0f32), 0.5);
        assert!(sigmoid(-800.0f64).is_finite());
        assert!((sigmoid(3.0f64) + sigmoid(-3.0f64) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cbow_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..30 {
            let dim = rng.gen_range(1..=8);
            let rand_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
            };
            let shape: Vec<usize> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(1..4)).collect();
            let mut token_rows: Vec<Vec<Vec<f64>>> = shape
                .iter()
                .map(|&n| (0..n).map(|_| rand_vec(&mut rng)).collect())
                .collect();
            let outputs: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng)).collect();
            let out_refs: Vec<&[f64]> = outputs.iter().map(|v| v.as_slice()).collect();

            let grads = {
                let refs: Vec<Vec<&[f64]>> =
                    token_rows.iter().map(|r| r.iter().map(|v| v.as_slice()).collect()).collect();
                cbow_gradients(&refs, &out_refs)
            };
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            let mut flat = 0;
            for t in 0..token_rows.len() {
                for r in 0..token_rows[t].len() {
                    for d in 0..dim {
                        let orig = token_rows[t][r][d];
                        let eval = |v: f64, rows: &mut Vec<Vec<Vec<f64>>>| {
                            rows[t][r][d] = v;
                            let refs: Vec<Vec<&[f64]>> =
                                rows.iter().map(|r| r.iter().map(|v| v.as_slice()).collect()).collect();
                            cbow_loss(&refs, &out_refs)
                        };
                        let plus = eval(orig + h, &mut token_rows);
                        let minus = eval(orig - h, &mut token_rows);
                        token_rows[t][r][d] = orig;
                        numeric.push((plus - minus) / (2.0 * h));
                        analytic.push(grads.rows[flat][d]);
                    }
                    flat += 1;
                }
            }
            assert!(rel_err(&analytic, &numeric) < 1e-4);
        }
    }
}
