use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::ModelIoError;
use crate::corpus::parse_line;
use crate::engine::ModelState;
use crate::kernels::{formula3, precompute_terms, HyperParams};
use crate::rng::{stream, Domain};
use crate::samplers::linear_sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferMode {
    /// Gibbs sampling; θ averaged over the second half of the sweeps.
    Gibbs,
    /// Argmax instead of sampling; ties go to the lowest topic.
    RtLda,
}

impl fmt::Display for InferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferMode::Gibbs => "gibbs",
            InferMode::RtLda => "rtlda",
        })
    }
}

impl FromStr for InferMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gibbs" => Ok(InferMode::Gibbs),
            "rtlda" | "rt-lda" => Ok(InferMode::RtLda),
            _ => Err(format!("unknown inference mode {s:?} (expected gibbs or rtlda)")),
        }
    }
}

/// Parses one query document: a libsvm body with an optional label.
pub fn parse_infer_line(line: &str) -> Result<Vec<(u32, u32)>, String> {
    parse_line(line, true)
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}

/// Topic proportions `θ_k = (N_kd + α_k)/(N_d + Σα)` of a query document
/// against frozen word-topic counts. Word ids ≥ W are dropped with a
/// warning.
pub fn infer_document(
    state: &ModelState,
    hyper: &HyperParams,
    doc: &[(u32, u32)],
    iterations: u32,
    mode: InferMode,
    seed: u64,
) -> Result<Vec<f64>, ModelIoError> {
    let w_count = state.vocab_size();
    let mut tokens: Vec<u32> = Vec::new();
    for &(w, c) in doc {
        if (w as usize) < w_count {
            tokens.extend(std::iter::repeat_n(w, c as usize));
        } else {
            log::warn!("skipping unknown word id {}", w as u64 + 1);
        }
    }
    if tokens.is_empty() {
        return Err(ModelIoError::EmptyDocument);
    }
    let k = state.k();
    let terms = precompute_terms(state.global(), w_count, hyper);
    let alpha_k = &terms.alpha_k;
    let alpha_sum: f64 = alpha_k.iter().sum();
    let n_d = tokens.len() as f64;
    let mut n_kd = vec![0u32; k];
    let mut z = vec![0u32; tokens.len()];
    let mut p = vec![0.0; k];
    let fill = |p: &mut [f64], w: u32, n_kd: &[u32]| {
        let row = state.word_counts(w);
        for (j, slot) in p.iter_mut().enumerate() {
            *slot = formula3(
                row.get(j) as f64,
                n_kd[j] as f64,
                state.global()[j] as f64,
                alpha_k[j],
                hyper.beta,
                terms.w_beta,
            );
        }
    };
    let theta_of = |n_kd: &[u32]| -> Vec<f64> {
        (0..k)
            .map(|j| (n_kd[j] as f64 + alpha_k[j]) / (n_d + alpha_sum))
            .collect()
    };

    match mode {
        InferMode::RtLda => {
            for (i, &w) in tokens.iter().enumerate() {
                fill(&mut p, w, &n_kd);
                z[i] = argmax(&p) as u32;
                n_kd[z[i] as usize] += 1;
            }
            for _ in 0..iterations {
                for (i, &w) in tokens.iter().enumerate() {
                    n_kd[z[i] as usize] -= 1;
                    fill(&mut p, w, &n_kd);
                    z[i] = argmax(&p) as u32;
                    n_kd[z[i] as usize] += 1;
                }
            }
            Ok(theta_of(&n_kd))
        }
        InferMode::Gibbs => {
            let mut rng = stream(seed, Domain::Inference, &[0]);
            for zi in z.iter_mut() {
                *zi = rng.random_range(0..k as u32);
                n_kd[*zi as usize] += 1;
            }
            if iterations == 0 {
                return Ok(theta_of(&n_kd));
            }
            let keep = iterations.div_ceil(2);
            let mut acc = vec![0.0; k];
            for sweep in 0..iterations {
                for (i, &w) in tokens.iter().enumerate() {
                    n_kd[z[i] as usize] -= 1;
                    fill(&mut p, w, &n_kd);
                    let total: f64 = p.iter().sum();
                    z[i] = linear_sample(&p, rng.random::<f64>() * total) as u32;
                    n_kd[z[i] as usize] += 1;
                }
                if sweep >= iterations - keep {
                    for (a, t) in acc.iter_mut().zip(theta_of(&n_kd)) {
                        *a += t;
                    }
                }
            }
            Ok(acc.into_iter().map(|a| a / keep as f64).collect())
        }
    }
}
