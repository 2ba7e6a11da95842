//! Exact secrecy audit by exhaustive enumeration.
//!
//! Every source of randomness in a run (observable fine-gain bits and free
//! local input bits) is laid out in one `B`-bit assignment word. All `2^B`
//! assignments are pushed through the protocol code, and the resulting
//! `(key, eve view)` pairs are tallied as integer counts. Probabilities are
//! therefore dyadic rationals `count / 2^B`, and perfect secrecy is decided
//! by the integer identity `count(s, e) * 2^B == count(s) * count(e)` rather
//! than by a floating-point threshold.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::detmodel::{ChannelTopology, Coherence, GainMode, RoundGains};
use crate::error::{Error, Result};
use crate::gf2lin::{t_lt, BitVec};
use crate::protocols::{extract_secure_key, run_round, Scheme};

pub const DEFAULT_ENUM_CAP: u32 = 24;

/// Hard ceiling independent of the configurable cap; counts are `u64`.
const MAX_ENUM_BITS: u32 = 40;

const CHUNK_LOG2: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumOptions {
    /// Largest `B` that will be enumerated.
    pub cap: u32,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl Default for EnumOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ENUM_CAP,
            workers: None,
        }
    }
}

impl EnumOptions {
    pub fn with_cap(cap: u32) -> Self {
        Self { cap, workers: None }
    }
}

/// Exact joint distribution of a key and Eve's view, as integer counts over
/// `2^enumerated_bits` equally likely assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointDistribution {
    enumerated_bits: u32,
    cells: BTreeMap<(BitVec, BitVec), u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marginal {
    Key,
    Eve,
    Joint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutualInformation {
    pub bits: f64,
    pub exactly_zero: bool,
}

impl JointDistribution {
    /// Builds a distribution from explicit cells; counts must sum to `2^bits`.
    pub fn from_cells(enumerated_bits: u32, cells: impl IntoIterator<Item = ((BitVec, BitVec), u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, c) in cells {
            *map.entry(k).or_insert(0) += c;
        }
        let dist = Self {
            enumerated_bits,
            cells: map,
        };
        if dist.cells.values().sum::<u64>() != dist.total_weight() {
            return Err(Error::InvalidParams(format!(
                "cell counts do not sum to 2^{enumerated_bits}"
            )));
        }
        Ok(dist)
    }

    pub fn enumerated_bits(&self) -> u32 {
        self.enumerated_bits
    }

    pub fn total_weight(&self) -> u64 {
        1u64 << self.enumerated_bits
    }

    pub fn cells(&self) -> &BTreeMap<(BitVec, BitVec), u64> {
        &self.cells
    }

    pub fn key_marginal(&self) -> BTreeMap<BitVec, u64> {
        let mut m = BTreeMap::new();
        for ((k, _), &c) in &self.cells {
            *m.entry(k.clone()).or_insert(0) += c;
        }
        m
    }

    pub fn eve_marginal(&self) -> BTreeMap<BitVec, u64> {
        let mut m = BTreeMap::new();
        for ((_, e), &c) in &self.cells {
            *m.entry(e.clone()).or_insert(0) += c;
        }
        m
    }

    fn counts(&self, which: Marginal) -> Vec<u64> {
        match which {
            Marginal::Key => self.key_marginal().into_values().collect(),
            Marginal::Eve => self.eve_marginal().into_values().collect(),
            Marginal::Joint => self.cells.values().copied().collect(),
        }
    }

    /// Shannon entropy in bits of the selected marginal.
    pub fn entropy(&self, which: Marginal) -> f64 {
        entropy_of_counts(self.enumerated_bits, &self.counts(which))
    }

    pub fn exact_entropy(&self, which: Marginal) -> ExactEntropy {
        ExactEntropy::from_counts(self.enumerated_bits, &self.counts(which))
    }

    /// `I(key; eve)`, with exact zero decided by integer independence.
    pub fn mutual_information(&self) -> MutualInformation {
        let total = u128::from(self.total_weight());
        let keys = self.key_marginal();
        let eves = self.eve_marginal();
        let cells_cover_product = self.cells.len() == keys.len() * eves.len();
        let exactly_zero = cells_cover_product
            && self.cells.iter().all(|((k, e), &c)| {
                u128::from(c) * total == u128::from(keys[k]) * u128::from(eves[e])
            });
        let bits = if exactly_zero {
            0.0
        } else {
            let exact = self.exact_entropy(Marginal::Key) + self.exact_entropy(Marginal::Eve)
                - self.exact_entropy(Marginal::Joint);
            exact.to_f64()
        };
        MutualInformation { bits, exactly_zero }
    }
}

/// `H = B - (1/2^B) * sum c log2 c`, exact for power-of-two counts.
fn entropy_of_counts(bits: u32, counts: &[u64]) -> f64 {
    let total = (1u64 << bits) as f64;
    let s: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64).log2())
        .sum();
    let h = f64::from(bits) - s / total;
    if h.abs() < 1e-12 {
        0.0
    } else {
        h
    }
}

/// An entropy held exactly as `(1/T) * sum_p a_p log2(p)` over primes `p`,
/// with integer coefficients `a_p` and a power-of-two total `T`.
///
/// Logarithms of distinct primes are linearly independent over the
/// rationals, so two such values are equal iff their scaled coefficients
/// agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactEntropy {
    total: u64,
    coeffs: BTreeMap<u64, i128>,
}

fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

impl ExactEntropy {
    pub fn zero(total: u64) -> Self {
        Self {
            total,
            coeffs: BTreeMap::new(),
        }
    }

    /// Entropy of the distribution `counts / 2^bits`.
    pub fn from_counts(bits: u32, counts: &[u64]) -> Self {
        let total = 1u64 << bits;
        let mut coeffs: BTreeMap<u64, i128> = BTreeMap::new();
        // T log2 T
        if bits > 0 {
            *coeffs.entry(2).or_insert(0) += i128::from(total) * i128::from(bits);
        }
        let mut cache: HashMap<u64, Vec<(u64, u32)>> = HashMap::new();
        for &c in counts.iter().filter(|&&c| c > 1) {
            let f = cache.entry(c).or_insert_with(|| factorize(c));
            for &(p, e) in f.iter() {
                *coeffs.entry(p).or_insert(0) -= i128::from(c) * i128::from(e);
            }
        }
        let mut out = Self { total, coeffs };
        out.normalize();
        out
    }

    fn normalize(&mut self) {
        self.coeffs.retain(|_, a| *a != 0);
    }

    fn rescaled(&self, total: u64) -> Self {
        debug_assert!(total.is_multiple_of(self.total));
        let k = i128::from(total / self.total);
        Self {
            total,
            coeffs: self.coeffs.iter().map(|(&p, &a)| (p, a * k)).collect(),
        }
    }

    fn common(a: &Self, b: &Self) -> (Self, Self) {
        let t = a.total.max(b.total);
        (a.rescaled(t), b.rescaled(t))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn to_f64(&self) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .map(|(&p, &a)| a as f64 * (p as f64).log2())
            .sum();
        let v = s / self.total as f64;
        if self.is_zero() {
            0.0
        } else {
            v
        }
    }

    /// Exact equality of the represented real numbers.
    pub fn exactly_equals(&self, other: &Self) -> bool {
        let (a, b) = Self::common(self, other);
        a.coeffs == b.coeffs
    }
}

impl std::ops::Add for ExactEntropy {
    type Output = ExactEntropy;
    fn add(self, rhs: Self) -> Self {
        let (mut a, b) = Self::common(&self, &rhs);
        for (p, v) in b.coeffs {
            *a.coeffs.entry(p).or_insert(0) += v;
        }
        a.normalize();
        a
    }
}

impl std::ops::Sub for ExactEntropy {
    type Output = ExactEntropy;
    fn sub(self, rhs: Self) -> Self {
        let (mut a, b) = Self::common(&self, &rhs);
        for (p, v) in b.coeffs {
            *a.coeffs.entry(p).or_insert(0) -= v;
        }
        a.normalize();
        a
    }
}

/// Layout of the `B` enumerated bits for one audited run.
#[derive(Debug, Clone, Copy)]
struct FreeBits {
    gain_epochs: usize,
    fine: usize,
    eve1: usize,
    eve2: usize,
    observable: usize,
    input_a: usize,
    input_b: usize,
    rounds: usize,
    coherence: Coherence,
}

impl FreeBits {
    fn new(scheme: Scheme, topology: &ChannelTopology, rounds: usize, coherence: Coherence) -> Self {
        let layout = topology.gain_layout();
        let (input_a, input_b) = scheme.free_input_bits(topology);
        Self {
            gain_epochs: match coherence {
                Coherence::EveryRound => rounds,
                Coherence::Never => 1,
            },
            fine: layout.fine,
            eve1: layout.eve1,
            eve2: layout.eve2,
            observable: layout.observable(),
            input_a,
            input_b,
            rounds,
            coherence,
        }
    }

    fn total(&self) -> usize {
        self.gain_epochs * self.observable + self.rounds * (self.input_a + self.input_b)
    }
}

struct BitCursor {
    word: u64,
}

impl BitCursor {
    fn take(&mut self, n: usize) -> BitVec {
        let v = BitVec::from_lsb_word(self.word, n);
        self.word = if n >= 64 { 0 } else { self.word >> n };
        v
    }
}

/// Outcome of running the protocol on one assignment.
struct Outcome {
    full_key: BitVec,
    secure_key: Option<BitVec>,
    eve_view: BitVec,
    mismatch: bool,
}

fn evaluate(
    scheme: Scheme,
    topology: &ChannelTopology,
    layout: &FreeBits,
    assignment: u64,
) -> Result<Outcome> {
    let mut cur = BitCursor { word: assignment };
    let tl = topology.gain_layout();
    let epochs: Vec<RoundGains> = (0..layout.gain_epochs)
        .map(|_| {
            let fine = cur.take(layout.fine);
            let eve1 = cur.take(layout.eve1);
            let eve2 = cur.take(layout.eve2);
            RoundGains::assemble(
                topology,
                &fine,
                &BitVec::zeros(tl.extra_a),
                &BitVec::zeros(tl.extra_b),
                &eve1,
                &eve2,
            )
        })
        .collect();
    let extract = scheme.extracts_secure_key(topology);
    let mut full_key = BitVec::empty();
    let mut s_b = BitVec::empty();
    let mut secure_key = extract.then(BitVec::empty);
    let mut eve_view = BitVec::empty();
    for r in 0..layout.rounds {
        let gains = match layout.coherence {
            Coherence::EveryRound => &epochs[r],
            Coherence::Never => &epochs[0],
        };
        let x_a = scheme.encode_input(topology.n_a, topology.n_1, &cur.take(layout.input_a));
        let x_b = scheme.encode_input(topology.n_b, topology.n_2, &cur.take(layout.input_b));
        let (record, keys) = run_round(scheme, topology, gains, x_a, x_b)?;
        if let Some(sk) = secure_key.as_mut() {
            sk.extend(&extract_secure_key(&keys.s_a, topology)?);
        }
        full_key.extend(&keys.s_a);
        s_b.extend(&keys.s_b);
        eve_view.extend(&record.y_e_odd);
        eve_view.extend(&record.y_e_even);
    }
    Ok(Outcome {
        mismatch: full_key != s_b,
        full_key,
        secure_key,
        eve_view,
    })
}

#[derive(Default)]
struct Tally {
    full: HashMap<(BitVec, BitVec), u64>,
    secure: HashMap<(BitVec, BitVec), u64>,
    mismatches: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        let (mut big, small) = if self.full.len() >= other.full.len() {
            (std::mem::take(&mut self), other)
        } else {
            (other, std::mem::take(&mut self))
        };
        for (k, c) in small.full {
            *big.full.entry(k).or_insert(0) += c;
        }
        for (k, c) in small.secure {
            *big.secure.entry(k).or_insert(0) += c;
        }
        big.mismatches += small.mismatches;
        big
    }
}

/// Full enumeration result for one audited configuration.
#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Full key `s_A` against Eve's view.
    pub full: JointDistribution,
    /// Secure key against Eve's view, when secure extraction applies.
    pub secure: Option<JointDistribution>,
    /// Assignments where `s_A != s_B`.
    pub mismatches: u64,
}

/// Number of enumerated bits `B` for a configuration.
pub fn enumeration_bits(scheme: Scheme, topology: &ChannelTopology, n_rounds: usize, coherence: Coherence) -> u32 {
    FreeBits::new(scheme, topology, n_rounds, coherence).total() as u32
}

/// Runs the protocol on all `2^B` assignments.
pub fn enumerate(
    scheme: Scheme,
    topology: &ChannelTopology,
    n_rounds: usize,
    coherence: Coherence,
    opts: EnumOptions,
) -> Result<Enumeration> {
    scheme.validate(topology)?;
    if n_rounds == 0 {
        return Err(Error::NoRounds);
    }
    let layout = FreeBits::new(scheme, topology, n_rounds, coherence);
    let b = layout.total() as u32;
    if b > opts.cap.min(MAX_ENUM_BITS) {
        return Err(Error::EnumerationCap {
            required: b,
            cap: opts.cap.min(MAX_ENUM_BITS),
        });
    }
    let total = 1u64 << b;
    let chunk = 1u64 << CHUNK_LOG2.min(b);
    let n_chunks = total / chunk;

    let work = || -> Result<Tally> {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| -> Result<Tally> {
                let mut t = Tally::default();
                for a in c * chunk..(c + 1) * chunk {
                    let o = evaluate(scheme, topology, &layout, a)?;
                    t.mismatches += u64::from(o.mismatch);
                    if let Some(sk) = o.secure_key {
                        *t.secure.entry((sk, o.eve_view.clone())).or_insert(0) += 1;
                    }
                    *t.full.entry((o.full_key, o.eve_view)).or_insert(0) += 1;
                }
                Ok(t)
            })
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
    };
    let tally = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let full = JointDistribution::from_cells(b, tally.full)?;
    let secure = if scheme.extracts_secure_key(topology) {
        Some(JointDistribution::from_cells(b, tally.secure)?)
    } else {
        None
    };
    Ok(Enumeration {
        full,
        secure,
        mismatches: tally.mismatches,
    })
}

/// Joint distribution of the full key `s_A` and Eve's view.
pub fn enumerate_joint(
    scheme: Scheme,
    topology: &ChannelTopology,
    n_rounds: usize,
    coherence: Coherence,
    opts: EnumOptions,
) -> Result<JointDistribution> {
    Ok(enumerate(scheme, topology, n_rounds, coherence, opts)?.full)
}

pub fn entropy(dist: &JointDistribution, which: Marginal) -> f64 {
    dist.entropy(which)
}

pub fn mutual_information(dist: &JointDistribution) -> MutualInformation {
    dist.mutual_information()
}

/// Exact audit of one configuration. Rates are per channel use (two uses
/// per round).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecrecyReport {
    pub key_len_bits: usize,
    pub key_entropy_bits: f64,
    /// Leakage `I(y_E^n; key)` of the audited key: the secure key when
    /// secure extraction applies, otherwise the full key.
    pub leakage_bits: f64,
    pub leakage_is_exactly_zero: bool,
    pub mismatch_prob: f64,
    pub r_d: f64,
    /// Present when the audited key has exactly zero leakage.
    pub r_sd: Option<f64>,
    pub enumerated_bits: u32,
    #[serde(skip)]
    pub rounds: usize,
    #[serde(skip)]
    pub secure_extraction: bool,
}

impl SecrecyReport {
    pub fn channel_uses(&self) -> usize {
        2 * self.rounds
    }

    /// `log|s_A| - H(s_A)`, the distance of the key from uniform.
    pub fn uniformity_gap_bits(&self) -> f64 {
        self.key_len_bits as f64 - self.key_entropy_bits
    }

    /// Success in the command-line sense: keys always agree and, when a
    /// secure key is extracted, it leaks nothing.
    pub fn passes(&self) -> bool {
        self.mismatch_prob == 0.0 && (!self.secure_extraction || self.leakage_is_exactly_zero)
    }

    /// CSV fields `r_d, r_sd, key_entropy, leakage, mismatch`; an absent
    /// `r_sd` is an empty field.
    pub fn csv_fields(&self) -> [String; 5] {
        [
            fmt_num(self.r_d),
            self.r_sd.map(fmt_num).unwrap_or_default(),
            fmt_num(self.key_entropy_bits),
            fmt_num(self.leakage_bits),
            fmt_num(self.mismatch_prob),
        ]
    }
}

/// Shortest round-trip decimal rendering.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for SecrecyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<26}{}", "key_len_bits", self.key_len_bits)?;
        writeln!(f, "{:<26}{}", "key_entropy_bits", fmt_num(self.key_entropy_bits))?;
        writeln!(f, "{:<26}{}", "uniformity_gap_bits", fmt_num(self.uniformity_gap_bits()))?;
        writeln!(f, "{:<26}{}", "leakage_bits", fmt_num(self.leakage_bits))?;
        writeln!(f, "{:<26}{}", "leakage_is_exactly_zero", self.leakage_is_exactly_zero)?;
        writeln!(f, "{:<26}{}", "mismatch_prob", fmt_num(self.mismatch_prob))?;
        writeln!(f, "{:<26}{}", "r_d", fmt_num(self.r_d))?;
        writeln!(
            f,
            "{:<26}{}",
            "r_sd",
            self.r_sd.map(fmt_num).unwrap_or_else(|| "-".to_string())
        )?;
        write!(f, "{:<26}{}", "enumerated_bits", self.enumerated_bits)
    }
}

/// Enumerates a configuration and summarises keys, leakage and rates.
pub fn audit(
    scheme: Scheme,
    topology: &ChannelTopology,
    n_rounds: usize,
    coherence: Coherence,
    opts: EnumOptions,
) -> Result<SecrecyReport> {
    let e = enumerate(scheme, topology, n_rounds, coherence, opts)?;
    let uses = (2 * n_rounds) as f64;
    let key_entropy_bits = e.full.entropy(Marginal::Key);
    let audited = e.secure.as_ref().unwrap_or(&e.full);
    let mi = audited.mutual_information();
    let audited_entropy = audited.entropy(Marginal::Key);
    Ok(SecrecyReport {
        key_len_bits: topology.shared_levels() * n_rounds,
        key_entropy_bits,
        leakage_bits: mi.bits,
        leakage_is_exactly_zero: mi.exactly_zero,
        mismatch_prob: e.mismatches as f64 / e.full.total_weight() as f64,
        r_d: key_entropy_bits / uses,
        r_sd: mi.exactly_zero.then_some(audited_entropy / uses),
        enumerated_bits: e.full.enumerated_bits(),
        rounds: n_rounds,
        secure_extraction: e.secure.is_some(),
    })
}

/// Both sides of the entropy chain for product signalling against a static
/// eavesdropper who hears every level.
#[derive(Debug, Clone)]
pub struct ChainCheck {
    /// `I(x'_A, x'_B; X_B y_B)`.
    pub lhs: f64,
    /// `H(X_B X_A k) - H(k)`.
    pub rhs: f64,
    pub lhs_exact: ExactEntropy,
    pub rhs_exact: ExactEntropy,
}

impl ChainCheck {
    pub fn exactly_equal(&self) -> bool {
        self.lhs_exact.exactly_equals(&self.rhs_exact)
    }
}

/// Enumerates one product-signalling round with `n_a = n_b = n_1 = n_2`,
/// random fine gain and identity Eve gains.
pub fn entropy_chain_check(topology: &ChannelTopology) -> Result<ChainCheck> {
    let n = topology.n_a;
    if topology.n_b != n || topology.n_1 != n || topology.n_2 != n {
        return Err(Error::InvalidTopology(
            "entropy chain check needs n_a = n_b = n_1 = n_2".into(),
        ));
    }
    let topology = ChannelTopology::with_modes(n, n, n, n, GainMode::StaticIdentity, GainMode::RandomGain)?;
    let free = n - 1;
    let b = (3 * free) as u32;
    if b > MAX_ENUM_BITS {
        return Err(Error::EnumerationCap {
            required: b,
            cap: MAX_ENUM_BITS,
        });
    }
    let mut joint: HashMap<(BitVec, BitVec), u64> = HashMap::new();
    let mut product: HashMap<BitVec, u64> = HashMap::new();
    let mut channel: HashMap<BitVec, u64> = HashMap::new();
    for a in 0..(1u64 << b) {
        let mut cur = BitCursor { word: a };
        let fine = cur.take(free);
        let x_a = Scheme::Product.encode_input(n, n, &cur.take(free));
        let x_b = Scheme::Product.encode_input(n, n, &cur.take(free));
        let e = BitVec::empty();
        let gains = RoundGains::assemble(&topology, &fine, &e, &e, &e, &e);
        let (record, keys) = run_round(Scheme::Product, &topology, &gains, x_a.clone(), x_b.clone())?;
        let eve = BitVec::concat([&record.y_e_odd, &record.y_e_even]);
        *joint.entry((keys.s_b, eve)).or_insert(0) += 1;

        // X_B X_A k computed from the matrices, not from the protocol path.
        let k = gains.k_matrix.first_col().clone();
        let xbxa = t_lt(&x_b)?.mul_mat(&t_lt(&x_a)?)?;
        *product.entry(xbxa.mul_vec(&k)?).or_insert(0) += 1;
        *channel.entry(k).or_insert(0) += 1;
    }
    let joint = JointDistribution::from_cells(b, joint)?;
    let lhs_exact = joint.exact_entropy(Marginal::Key) + joint.exact_entropy(Marginal::Eve)
        - joint.exact_entropy(Marginal::Joint);
    let rhs_exact = ExactEntropy::from_counts(b, &product.into_values().collect::<Vec<_>>())
        - ExactEntropy::from_counts(b, &channel.into_values().collect::<Vec<_>>());
    Ok(ChainCheck {
        lhs: lhs_exact.to_f64(),
        rhs: rhs_exact.to_f64(),
        lhs_exact,
        rhs_exact,
    })
}
