//! Discrete hidden Markov model: scaled Baum-Welch and Viterbi.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hmm<T> {
    pub initial: Vec<T>,
    /// `transition[i][j]` = P(next = j | current = i)
    pub transition: Vec<Vec<T>>,
    /// `emission[i][k]` = P(symbol k | state i)
    pub emission: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub states: usize,
    pub symbols: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when the log-likelihood gains less than this.
    pub tolerance: f64,
    /// Probability floor applied after each re-estimation.
    pub floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { states: 3, symbols: 3, seed: 7, max_iter: 200, tolerance: 1e-6, floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<T> {
    pub hmm: Hmm<T>,
    pub log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize<T: Real>(row: &mut [T], floor: T) {
    for x in row.iter_mut() {
        if *x < floor {
            *x = floor;
        }
    }
    let s = row.iter().fold(T::zero(), |a, &b| a + b);
    for x in row.iter_mut() {
        *x = *x / s;
    }
}

impl<T: Real> Hmm<T> {
    pub fn new(initial: Vec<T>, transition: Vec<Vec<T>>, emission: Vec<Vec<T>>) -> Result<Hmm<T>, AnalysisError> {
        let n = initial.len();
        let m = emission.first().map_or(0, Vec::len);
        if n == 0 || transition.len() != n || emission.len() != n {
            return Err(AnalysisError::Shape("HMM matrices disagree on the number of states".into()));
        }
        if transition.iter().any(|r| r.len() != n) || emission.iter().any(|r| r.len() != m) || m == 0 {
            return Err(AnalysisError::Shape("ragged HMM matrix".into()));
        }
        Ok(Hmm { initial, transition, emission })
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }

    pub fn symbols(&self) -> usize {
        self.emission[0].len()
    }

    /// Starting point for EM: state i leans towards symbol i (mod symbols)
    /// and towards staying put, with seeded jitter.
    pub fn seeded(states: usize, symbols: usize, seed: u64) -> Hmm<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = |x: f64| T::from_f64(x).unwrap();
        let mut jitter = move || t(rng.gen_range(0.0..0.05));
        let floor = T::zero();
        let mut initial: Vec<T> = (0..states).map(|_| t(1.0) + jitter()).collect();
        normalize(&mut initial, floor);
        let transition = (0..states)
            .map(|i| {
                let mut r: Vec<T> = (0..states).map(|j| if i == j { t(0.8) } else { t(0.2 / states as f64) } + jitter()).collect();
                normalize(&mut r, floor);
                r
            })
            .collect();
        let emission = (0..states)
            .map(|i| {
                let mut r: Vec<T> =
                    (0..symbols).map(|k| if k == i % symbols { t(0.7) } else { t(0.3 / symbols as f64) } + jitter()).collect();
                normalize(&mut r, floor);
                r
            })
            .collect();
        Hmm { initial, transition, emission }
    }

    fn check(&self, seq: &[usize]) -> Result<(), AnalysisError> {
        if seq.is_empty() {
            return Err(AnalysisError::Empty);
        }
        match seq.iter().find(|&&s| s >= self.symbols()) {
            Some(s) => Err(AnalysisError::Shape(format!("symbol {s} out of range"))),
            None => Ok(()),
        }
    }

    /// Scaled forward pass: normalized alphas and the per-step scale factors.
    fn forward(&self, seq: &[usize]) -> (Vec<Vec<T>>, Vec<T>) {
        let n = self.states();
        let mut alpha = Vec::with_capacity(seq.len());
        let mut scales = Vec::with_capacity(seq.len());
        let mut a: Vec<T> = (0..n).map(|i| self.initial[i] * self.emission[i][seq[0]]).collect();
        for (t, &o) in seq.iter().enumerate() {
            if t > 0 {
                let prev: &Vec<T> = &alpha[t - 1];
                a = (0..n)
                    .map(|j| {
                        let s = (0..n).fold(T::zero(), |acc, i| acc + prev[i] * self.transition[i][j]);
                        s * self.emission[j][o]
                    })
                    .collect();
            }
            let c = a.iter().fold(T::zero(), |x, &y| x + y);
            let c = if c > T::zero() { c } else { T::min_positive_value() };
            a.iter_mut().for_each(|x| *x = *x / c);
            scales.push(c);
            alpha.push(a.clone());
        }
        (alpha, scales)
    }

    fn backward(&self, seq: &[usize], scales: &[T]) -> Vec<Vec<T>> {
        let n = self.states();
        let len = seq.len();
        let mut beta = vec![vec![T::one(); n]; len];
        for t in (0..len - 1).rev() {
            for i in 0..n {
                let s = (0..n).fold(T::zero(), |acc, j| {
                    acc + self.transition[i][j] * self.emission[j][seq[t + 1]] * beta[t + 1][j]
                });
                beta[t][i] = s / scales[t + 1];
            }
        }
        beta
    }

    pub fn log_likelihood(&self, seq: &[usize]) -> Result<T, AnalysisError> {
        self.check(seq)?;
        let (_, scales) = self.forward(seq);
        Ok(scales.iter().fold(T::zero(), |a, &c| a + c.ln()))
    }

    /// Most likely state path and its log probability.
    pub fn viterbi(&self, seq: &[usize]) -> Result<(Vec<usize>, T), AnalysisError> {
        self.check(seq)?;
        let n = self.states();
        let ln = |x: T| x.ln();
        let mut delta: Vec<T> = (0..n).map(|i| ln(self.initial[i]) + ln(self.emission[i][seq[0]])).collect();
        let mut back = vec![vec![0usize; n]; seq.len()];
        for (t, &o) in seq.iter().enumerate().skip(1) {
            let mut next = vec![T::neg_infinity(); n];
            for j in 0..n {
                for i in 0..n {
                    let v = delta[i] + ln(self.transition[i][j]);
                    if v > next[j] {
                        next[j] = v;
                        back[t][j] = i;
                    }
                }
                next[j] = next[j] + ln(self.emission[j][o]);
            }
            delta = next;
        }
        let (mut state, mut best) = (0, T::neg_infinity());
        for (i, &d) in delta.iter().enumerate() {
            if d > best {
                best = d;
                state = i;
            }
        }
        let mut path = vec![0; seq.len()];
        for t in (0..seq.len()).rev() {
            path[t] = state;
            state = back[t][state];
        }
        Ok((path, best))
    }

    /// Baum-Welch over several independent sequences.
    pub fn fit(sequences: &[Vec<usize>], opts: &FitOptions) -> Result<FitReport<T>, AnalysisError> {
        if sequences.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let mut hmm = Hmm::<T>::seeded(opts.states, opts.symbols, opts.seed);
        for s in sequences {
            hmm.check(s)?;
        }
        let (n, m) = (opts.states, opts.symbols);
        let floor = T::from_f64(opts.floor).unwrap();
        let tol = T::from_f64(opts.tolerance).unwrap();
        let mut prev_ll = T::neg_infinity();
        let mut ll = prev_ll;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iter {
            iterations += 1;
            let mut init_acc = vec![T::zero(); n];
            let mut trans_acc = vec![vec![T::zero(); n]; n];
            let mut emit_acc = vec![vec![T::zero(); m]; n];
            ll = T::zero();
            for seq in sequences {
                let (alpha, scales) = hmm.forward(seq);
                let beta = hmm.backward(seq, &scales);
                ll = scales.iter().fold(ll, |a, &c| a + c.ln());
                for t in 0..seq.len() {
                    let gamma: Vec<T> = (0..n).map(|i| alpha[t][i] * beta[t][i]).collect();
                    let g_sum = gamma.iter().fold(T::zero(), |a, &b| a + b);
                    for i in 0..n {
                        let g = gamma[i] / g_sum;
                        if t == 0 {
                            init_acc[i] = init_acc[i] + g;
                        }
                        emit_acc[i][seq[t]] = emit_acc[i][seq[t]] + g;
                    }
                    if t + 1 < seq.len() {
                        for i in 0..n {
                            for j in 0..n {
                                let xi = alpha[t][i]
                                    * hmm.transition[i][j]
                                    * hmm.emission[j][seq[t + 1]]
                                    * beta[t + 1][j]
                                    / scales[t + 1];
                                trans_acc[i][j] = trans_acc[i][j] + xi;
                            }
                        }
                    }
                }
            }
            normalize(&mut init_acc, floor);
            for row in trans_acc.iter_mut().chain(emit_acc.iter_mut()) {
                normalize(row, floor);
            }
            hmm = Hmm { initial: init_acc, transition: trans_acc, emission: emit_acc };
            if ll - prev_ll < tol {
                converged = true;
                break;
            }
            prev_ll = ll;
        }
        Ok(FitReport { hmm, log_likelihood: ll, iterations, converged })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> Hmm<f64> {
        Hmm::new(
            vec![0.6, 0.4],
            vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            vec![vec![0.5, 0.4, 0.1], vec![0.1, 0.3, 0.6]],
        )
        .unwrap()
    }

    /// Brute-force sum over every state path.
    fn brute_likelihood(h: &Hmm<f64>, seq: &[usize]) -> f64 {
        let n = h.states();
        let paths = n.pow(seq.len() as u32);
        (0..paths)
            .map(|mut code| {
                let path: Vec<usize> = (0..seq.len())
                    .map(|_| {
                        let s = code % n;
                        code /= n;
                        s
                    })
                    .collect();
                let mut p = h.initial[path[0]] * h.emission[path[0]][seq[0]];
                for t in 1..seq.len() {
                    p *= h.transition[path[t - 1]][path[t]] * h.emission[path[t]][seq[t]];
                }
                p
            })
            .sum()
    }

    #[test]
    fn forward_matches_brute_force() {
        let h = two_state();
        let seq = [0, 2, 1, 2, 0, 0];
        let ll = h.log_likelihood(&seq).unwrap();
        assert!((ll - brute_likelihood(&h, &seq).ln()).abs() < 1e-12);
    }

    #[test]
    fn viterbi_matches_brute_force() {
        let h = two_state();
        let seq = [0, 2, 2, 1, 0];
        let (path, lp) = h.viterbi(&seq).unwrap();
        let mut best = (f64::NEG_INFINITY, vec![]);
        for code in 0..(1 << seq.len()) {
            let p: Vec<usize> = (0..seq.len()).map(|t| (code >> t) & 1).collect();
            let mut v = (h.initial[p[0]] * h.emission[p[0]][seq[0]]).ln();
            for t in 1..seq.len() {
                v += (h.transition[p[t - 1]][p[t]] * h.emission[p[t]][seq[t]]).ln();
            }
            if v > best.0 {
                best = (v, p);
            }
        }
        assert_eq!(path, best.1);
        assert!((lp - best.0).abs() < 1e-12);
    }

    #[test]
    fn em_does_not_decrease_likelihood() {
        let seqs = vec![vec![0, 0, 1, 1, 1, 2, 2, 2, 1, 1], vec![2, 2, 2, 1, 1, 0, 0, 0]];
        let mut last = f64::NEG_INFINITY;
        for iters in 1..8 {
            let opts = FitOptions { max_iter: iters, tolerance: -1.0, ..FitOptions::default() };
            let fit = Hmm::<f64>::fit(&seqs, &opts).unwrap();
            let ll: f64 = seqs.iter().map(|s| fit.hmm.log_likelihood(s).unwrap()).sum();
            assert!(ll >= last - 1e-9, "{ll} < {last}");
            last = ll;
        }
    }

    #[test]
    fn fit_is_deterministic_and_works_in_f32() {
        let seqs = vec![vec![0, 1, 1, 2, 2, 2, 1]];
        let a = Hmm::<f64>::fit(&seqs, &FitOptions::default()).unwrap();
        let b = Hmm::<f64>::fit(&seqs, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = Hmm::<f32>::fit(&seqs, &FitOptions::default()).unwrap();
        assert!((c.log_likelihood as f64 - a.log_likelihood).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_symbols() {
        assert!(two_state().viterbi(&[0, 3]).is_err());
        assert!(two_state().viterbi(&[]).is_err());
    }
}
