//! J-block environment families indexed by constant-weight sign codewords.

use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::bump::BumpLoss;
use super::gvar::{block_gvar, gradient_distance, single_switch_upper, NormOptions};
use crate::drift::block_partition;
use crate::error::{Error, Result};
use crate::rng::SeededStream;

/// Packing size target: log|U| ≥ 0.0625·J.
pub const PACKING_RATE: f64 = 0.0625;

pub fn packing_target(j: usize) -> usize {
    (PACKING_RATE * j as f64).exp().ceil() as usize
}

pub fn min_distance_target(j: usize) -> usize {
    j.div_ceil(16)
}

pub fn hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Smallest pairwise Hamming distance by exhaustive scan (`usize::MAX` for < 2 words).
pub fn min_pairwise_distance(words: &[Vec<i8>]) -> usize {
    let mut best = usize::MAX;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            best = best.min(hamming(&words[i], &words[j]));
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct PackingOptions {
    pub max_codewords: usize,
    pub max_trials: usize,
}

impl Default for PackingOptions {
    fn default() -> Self {
        PackingOptions {
            max_codewords: 64,
            max_trials: 200_000,
        }
    }
}

/// Randomized greedy packing of {±1}^J words with exactly J/2 positive entries
/// and pairwise Hamming distance ≥ ⌈J/16⌉.
pub fn constant_weight_packing(
    j: usize,
    opts: &PackingOptions,
    stream: &mut SeededStream,
) -> Result<Vec<Vec<i8>>> {
    if j < 2 || !j.is_multiple_of(2) {
        return Err(Error::param(format!("J must be even and >= 2, got {j}")));
    }
    let target = packing_target(j);
    let dmin = min_distance_target(j).max(1);
    let cap = opts.max_codewords.max(target);
    let mut words: Vec<Vec<i8>> = Vec::new();
    let mut idx: Vec<usize> = (0..j).collect();
    for _ in 0..opts.max_trials {
        if words.len() >= cap {
            break;
        }
        for i in (1..j).rev() {
            idx.swap(i, stream.below(i + 1));
        }
        let mut w = vec![-1i8; j];
        for &k in &idx[..j / 2] {
            w[k] = 1;
        }
        if words.iter().all(|v| hamming(v, &w) >= dmin) {
            words.push(w);
        }
    }
    if words.len() < target {
        return Err(Error::Packing(format!(
            "found {} codewords, need {target}; retry with another seed",
            words.len()
        )));
    }
    Ok(words)
}

mod exponent {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFamily {
    #[serde(rename = "T")]
    pub t_len: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "Delta_T")]
    pub delta_t: usize,
    pub a: f64,
    pub r: f64,
    pub mu: f64,
    pub d: usize,
    #[serde(with = "exponent")]
    pub p: f64,
    #[serde(with = "exponent")]
    pub q: f64,
    pub codewords: Vec<Vec<i8>>,
    #[serde(rename = "C_psi")]
    pub c_psi: f64,
    /// ‖∇g₊ − ∇g₋‖_{L^p([−1,1]^d)} by quadrature.
    pub single_switch: f64,
    /// Largest unnormalized GVar_{p,q} over the family.
    #[serde(rename = "V_T")]
    pub v_t: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FamilyOptions {
    pub seed: u64,
    pub packing: PackingOptions,
    pub norm: Option<NormOptions>,
}

pub fn switches(word: &[i8]) -> usize {
    word.windows(2).filter(|w| w[0] != w[1]).count()
}

#[allow(clippy::too_many_arguments)]
pub fn build_block_family(
    t_len: usize,
    j: usize,
    mu: f64,
    a: f64,
    r: f64,
    d: usize,
    p: f64,
    q: f64,
    opts: &FamilyOptions,
) -> Result<BlockFamily> {
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(Error::param("p and q must be >= 1"));
    }
    block_partition(t_len, j)?;
    let plus = BumpLoss::localized(mu, a, r, 1.0, d)?;
    let mut stream = SeededStream::new(opts.seed, 0);
    let codewords = constant_weight_packing(j, &opts.packing, &mut stream)?;
    let norm = opts.norm.clone().unwrap_or_else(|| NormOptions::new(p, d));
    let norm = NormOptions { p, ..norm };
    let single_switch = gradient_distance(&plus, &plus.with_sign(-1.0), &norm)?.value;
    let v_t = codewords
        .iter()
        .map(|w| block_gvar(single_switch, switches(w), q, false, t_len))
        .fold(0.0, f64::max);
    Ok(BlockFamily {
        t_len,
        j,
        delta_t: t_len / j,
        a,
        r,
        mu,
        d,
        p,
        q,
        codewords,
        c_psi: plus.c_psi,
        single_switch,
        v_t,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyCheck {
    pub size: usize,
    pub size_target: usize,
    pub min_distance: usize,
    pub distance_target: usize,
    pub weights_ok: bool,
    pub blocks_ok: bool,
    pub gvar_max: f64,
    /// single_switch_upper · J^{1/q}
    pub gvar_bound: f64,
    pub convex_regime: bool,
    pub passed: bool,
}

impl BlockFamily {
    pub fn plus(&self) -> Result<BumpLoss> {
        BumpLoss::localized(self.mu, self.a, self.r, 1.0, self.d)
    }

    pub fn blocks(&self) -> Result<Vec<Range<usize>>> {
        block_partition(self.t_len, self.j)
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Per-time signs of codeword `k`.
    pub fn signs(&self, k: usize) -> Result<Vec<f64>> {
        let word = self
            .codewords
            .get(k)
            .ok_or_else(|| Error::param(format!("codeword {k} out of range")))?;
        let mut out = vec![0.0; self.t_len];
        for (b, range) in self.blocks()?.into_iter().enumerate() {
            for t in range {
                out[t] = f64::from(word[b]);
            }
        }
        Ok(out)
    }

    pub fn environment(&self, k: usize) -> Result<BlockEnvironment> {
        let plus = self.plus()?;
        Ok(BlockEnvironment {
            minus: plus.with_sign(-1.0),
            plus,
            signs: self.signs(k)?,
        })
    }

    pub fn verify(&self) -> Result<FamilyCheck> {
        let plus = self.plus()?;
        let size = self.codewords.len();
        let size_target = packing_target(self.j);
        let distance_target = min_distance_target(self.j);
        let min_distance = min_pairwise_distance(&self.codewords);
        let weights_ok = self.codewords.iter().all(|w| {
            w.len() == self.j
                && w.iter().all(|&x| x == 1 || x == -1)
                && w.iter().filter(|&&x| x == 1).count() == self.j / 2
        });
        let blocks = self.blocks()?;
        let blocks_ok = blocks
            .iter()
            .all(|r| r.len() == self.delta_t || r.len() == self.delta_t + 1)
            && self.delta_t == self.t_len / self.j;
        let gvar_max = self
            .codewords
            .iter()
            .map(|w| block_gvar(self.single_switch, switches(w), self.q, false, self.t_len))
            .fold(0.0, f64::max);
        let j_factor = if self.q.is_infinite() {
            1.0
        } else {
            (self.j as f64).powf(1.0 / self.q)
        };
        let gvar_bound = single_switch_upper(&plus, self.p) * j_factor;
        let passed = size >= size_target
            && (size < 2 || min_distance >= distance_target)
            && weights_ok
            && blocks_ok
            && gvar_max <= gvar_bound;
        Ok(FamilyCheck {
            size,
            size_target,
            min_distance,
            distance_target,
            weights_ok,
            blocks_ok,
            gvar_max,
            gvar_bound,
            convex_regime: plus.is_convex_regime(),
            passed,
        })
    }

    /// Fano lower bound on the testing error over this family.
    pub fn fano_error_lower(&self, kl_max: f64) -> Result<f64> {
        super::fano_bound(self.codewords.len(), kl_max)
    }
}

/// A time-indexed sequence of losses G_0..G_{T−1}.
pub trait LossSequence {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn gradient(&self, t: usize, theta: &[f64], out: &mut [f64]);
    fn value(&self, t: usize, theta: &[f64]) -> f64;
    fn sign(&self, t: usize) -> f64;
}

/// Blockwise-constant bump losses g_{u_j} on block B_j.
#[derive(Clone, Debug)]
pub struct BlockEnvironment {
    pub plus: BumpLoss,
    pub minus: BumpLoss,
    pub signs: Vec<f64>,
}

impl BlockEnvironment {
    pub fn loss(&self, t: usize) -> &BumpLoss {
        if self.signs[t] > 0.0 {
            &self.plus
        } else {
            &self.minus
        }
    }
}

impl LossSequence for BlockEnvironment {
    fn len(&self) -> usize {
        self.signs.len()
    }

    fn gradient(&self, t: usize, theta: &[f64], out: &mut [f64]) {
        let (_, g) = self.loss(t).value_and_gradient_slice(theta);
        out.copy_from_slice(&g);
    }

    fn value(&self, t: usize, theta: &[f64]) -> f64 {
        self.loss(t).value(theta)
    }

    fn sign(&self, t: usize) -> f64 {
        self.signs[t]
    }
}
