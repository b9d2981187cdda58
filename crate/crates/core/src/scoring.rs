//! Initial confidence scores computed from caller-supplied logits or
//! per-token log-probabilities. No model inference happens here.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Unnormalized next-token logits with a token-to-position index.
#[derive(Debug, Clone, Default)]
pub struct TokenLogits {
    values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl TokenLogits {
    pub fn new<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut out = TokenLogits::default();
        for (tok, v) in pairs {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput);
            }
            out.index.insert(tok.into(), out.values.len());
            out.values.push(v);
        }
        Ok(out)
    }

    pub fn get(&self, token: &str) -> Result<f64> {
        self.index
            .get(token)
            .map(|&i| self.values[i])
            .ok_or_else(|| Error::UnknownColumn(token.to_string()))
    }

    /// True/False score using the named tokens.
    pub fn true_false(&self, true_token: &str, false_token: &str) -> Result<f64> {
        true_false_score(self.get(true_token)?, self.get(false_token)?)
    }
}

/// Per-token log-probabilities for a prompt followed by an answer.
#[derive(Debug, Clone)]
pub struct SequenceLogProbs {
    logprobs: Vec<f64>,
    prompt_len: usize,
}

impl SequenceLogProbs {
    /// `logprobs[t]` is log p(x_{t+1} | x_{..t}) for every position of the
    /// concatenated sequence; the first `prompt_len` belong to the prompt.
    pub fn new(logprobs: Vec<f64>, prompt_len: usize) -> Result<Self> {
        for (i, &lp) in logprobs.iter().enumerate() {
            if !lp.is_finite() {
                return Err(Error::NonFiniteInput);
            }
            if lp > 0.0 {
                return Err(Error::PositiveLogProb(i));
            }
        }
        if prompt_len >= logprobs.len() {
            return Err(Error::EmptyAnswerSpan { prompt_len, total_len: logprobs.len() });
        }
        Ok(SequenceLogProbs { logprobs, prompt_len })
    }

    pub fn total_len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn prompt_len(&self) -> usize {
        self.prompt_len
    }

    pub fn answer(&self) -> &[f64] {
        &self.logprobs[self.prompt_len..]
    }
}

/// s_true / (s_true + s_false) for the two-way softmax, computed without
/// overflow.
pub fn true_false_score(logit_true: f64, logit_false: f64) -> Result<f64> {
    if !logit_true.is_finite() || !logit_false.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let d = logit_false - logit_true;
    Ok(if d <= 0.0 {
        1.0 / (1.0 + d.exp())
    } else {
        let e = (-d).exp();
        e / (1.0 + e)
    })
}

/// Exponential of the mean answer-span log-probability.
pub fn inverse_perplexity_score(seq: &SequenceLogProbs) -> f64 {
    let span = seq.answer();
    let mean = span.iter().sum::<f64>() / span.len() as f64;
    mean.exp()
}

/// Largest component of the softmax over the answer-choice logits.
pub fn multiple_choice_score(answer_logits: &[f64]) -> Result<f64> {
    if answer_logits.len() < 2 {
        return Err(Error::TooFewChoices(answer_logits.len()));
    }
    if answer_logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let max = answer_logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // the arg-max term contributes exp(0) = 1 to the normaliser
    let z: f64 = answer_logits.iter().map(|&l| (l - max).exp()).sum();
    Ok(1.0 / z)
}
