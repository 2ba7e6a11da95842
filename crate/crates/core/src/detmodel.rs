//! Deterministic channel layer.
//!
//! A real gain `h = 2^N * h_hat` with `h_hat in [1, 2)` is split into a
//! coarse part `N` (bit levels above the noise floor) and a fine mantissa
//! whose fractional bits fill the first column of the channel matrix below
//! its implied leading one. Alice and Bob share the fine bits (reciprocity)
//! but may have different coarse gains; Eve observes the top `n_1` / `n_2`
//! levels of each transmission through her own gain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2lin::{BitVec, LtToeplitz};
use crate::rng::{self, Stream};

/// Which SNR-to-levels correspondence to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelModel {
    /// `N = ceil(log2(snr) / 2)^+` for a real Gaussian channel.
    #[default]
    Real,
    /// `N = ceil(log2(snr))^+` for a complex Gaussian channel.
    Complex,
}

/// Number of bit levels a channel with the given SNR delivers above noise.
pub fn snr_to_levels(snr: f64, model: LevelModel) -> Result<u32> {
    if !snr.is_finite() || snr <= 0.0 {
        return Err(Error::InvalidSnr(snr));
    }
    let log = snr.log2();
    let scaled = match model {
        LevelModel::Real => 0.5 * log,
        LevelModel::Complex => log,
    };
    Ok(scaled.ceil().max(0.0) as u32)
}

/// Coarse/fine decomposition of one channel gain.
///
/// The fine mantissa is `1.h_1 h_2 ...`; only the fractional bits are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GainRealization {
    pub coarse_levels: u32,
    pub fine_bits: BitVec,
}

impl GainRealization {
    /// `[1, h_1, ..., h_k]`, the first column of the channel matrix.
    pub fn full_column(&self) -> BitVec {
        let mut col = BitVec::from_01(&[1]);
        col.extend(&self.fine_bits);
        col
    }

    pub fn matrix(&self) -> LtToeplitz {
        LtToeplitz::from_first_col(self.full_column()).expect("column has an implied leading one")
    }

    /// The quantized mantissa, in `[1, 2)`.
    pub fn mantissa(&self) -> f64 {
        let mut value = 1.0;
        let mut weight = 0.5;
        for b in self.fine_bits.iter() {
            if b {
                value += weight;
            }
            weight *= 0.5;
        }
        value
    }

    /// `2^coarse * mantissa`.
    pub fn magnitude(&self) -> f64 {
        2f64.powi(self.coarse_levels as i32) * self.mantissa()
    }
}

/// Quantizes a normalized gain magnitude `h >= 1` to `levels` bit levels.
///
/// The coarse exponent is `floor(log2 h)` capped at `levels`; the fine bits
/// are the first `levels - 1` fractional bits of `h / 2^floor(log2 h)`.
pub fn quantize_gain(h: f64, levels: u32) -> Result<GainRealization> {
    if !h.is_finite() || h < 1.0 {
        return Err(Error::GainBelowOne(h));
    }
    if levels == 0 {
        return Err(Error::ZeroLevels);
    }
    let exponent = h.log2().floor() as i32;
    // Guard against log2 rounding across a power of two.
    let exponent = if 2f64.powi(exponent) > h {
        exponent - 1
    } else if 2f64.powi(exponent + 1) <= h {
        exponent + 1
    } else {
        exponent
    };
    let mut frac = h / 2f64.powi(exponent) - 1.0;
    let n_fine = (levels - 1) as usize;
    let mut fine_bits = BitVec::zeros(n_fine);
    for i in 0..n_fine {
        frac *= 2.0;
        if frac >= 1.0 {
            fine_bits.set(i, true);
            frac -= 1.0;
        }
    }
    Ok(GainRealization {
        coarse_levels: (exponent as u32).min(levels),
        fine_bits,
    })
}

/// How a gain is modelled across the enumeration/sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// Gain is the identity and known to everyone.
    StaticIdentity,
    /// Fine bits are uniform and independent of everything else.
    RandomGain,
}

/// How often channel gains are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Coherence {
    #[default]
    EveryRound,
    /// Drawn once for the whole run (long coherence time).
    Never,
}

/// Coarse levels of the four links plus how each gain is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelTopology {
    /// Alice -> Bob levels.
    pub n_a: usize,
    /// Bob -> Alice levels.
    pub n_b: usize,
    /// Alice -> Eve levels.
    pub n_1: usize,
    /// Bob -> Eve levels.
    pub n_2: usize,
    pub eve_mode: GainMode,
    /// Legitimate channel. `StaticIdentity` is the "static gain at all
    /// transceivers" setting.
    pub legit_mode: GainMode,
}

impl ChannelTopology {
    /// Random legitimate and Eve gains.
    pub fn new(n_a: usize, n_b: usize, n_1: usize, n_2: usize) -> Result<Self> {
        Self::with_modes(n_a, n_b, n_1, n_2, GainMode::RandomGain, GainMode::RandomGain)
    }

    pub fn with_modes(
        n_a: usize,
        n_b: usize,
        n_1: usize,
        n_2: usize,
        eve_mode: GainMode,
        legit_mode: GainMode,
    ) -> Result<Self> {
        let t = Self {
            n_a,
            n_b,
            n_1,
            n_2,
            eve_mode,
            legit_mode,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n_a", self.n_a), ("n_b", self.n_b), ("n_1", self.n_1), ("n_2", self.n_2)] {
            if v == 0 {
                return Err(Error::InvalidTopology(format!("{name} must be positive")));
            }
        }
        let m = self.shared_levels();
        if self.n_1 > m || self.n_2 > m {
            return Err(Error::InvalidTopology(format!(
                "eve levels (n_1={}, n_2={}) must not exceed min(n_a, n_b)={m}",
                self.n_1, self.n_2
            )));
        }
        Ok(())
    }

    /// `min(n_a, n_b)`: levels both legitimate parties receive.
    pub fn shared_levels(&self) -> usize {
        self.n_a.min(self.n_b)
    }

    /// `min(n_1, n_2)`.
    pub fn eve_levels(&self) -> usize {
        self.n_1.min(self.n_2)
    }

    pub(crate) fn gain_layout(&self) -> GainLayout {
        let m = self.shared_levels();
        let legit = self.legit_mode == GainMode::RandomGain;
        let eve = self.eve_mode == GainMode::RandomGain;
        GainLayout {
            fine: if legit { m - 1 } else { 0 },
            extra_a: if legit { self.n_a - m } else { 0 },
            extra_b: if legit { self.n_b - m } else { 0 },
            eve1: if eve { self.n_1 - 1 } else { 0 },
            eve2: if eve { self.n_2 - 1 } else { 0 },
        }
    }
}

/// Sizes of the random bit fields making up one gain draw, in draw order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct GainLayout {
    pub fine: usize,
    pub extra_a: usize,
    pub extra_b: usize,
    pub eve1: usize,
    pub eve2: usize,
}

impl GainLayout {
    pub fn total(&self) -> usize {
        self.fine + self.extra_a + self.extra_b + self.eve1 + self.eve2
    }

    /// Bits that can influence the keys or Eve's view. The extra fine bits
    /// of the longer legitimate matrix only touch levels below
    /// `min(n_a, n_b)`, which no key or Eve observation reads.
    pub fn observable(&self) -> usize {
        self.fine + self.eve1 + self.eve2
    }
}

/// Gain matrices for one communication round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundGains {
    /// Fine bits shared by `K` and `K'` (length `min(n_a, n_b) - 1`).
    pub fine: BitVec,
    /// Alice -> Bob.
    pub k_matrix: LtToeplitz,
    /// Bob -> Alice.
    pub k_prime_matrix: LtToeplitz,
    /// Alice -> Eve.
    pub eve1: LtToeplitz,
    /// Bob -> Eve.
    pub eve2: LtToeplitz,
}

fn leading_one(rest: &BitVec) -> LtToeplitz {
    let mut col = BitVec::from_01(&[1]);
    col.extend(rest);
    LtToeplitz::from_first_col(col).expect("non-empty")
}

impl RoundGains {
    /// Builds gains from explicit fine bits. Field lengths must follow
    /// [`ChannelTopology::gain_layout`]; static gains ignore their fields.
    pub(crate) fn assemble(
        topology: &ChannelTopology,
        fine: &BitVec,
        extra_a: &BitVec,
        extra_b: &BitVec,
        eve1: &BitVec,
        eve2: &BitVec,
    ) -> Self {
        let m = topology.shared_levels();
        let (fine, k_matrix, k_prime_matrix) = match topology.legit_mode {
            GainMode::StaticIdentity => (
                BitVec::zeros(m - 1),
                LtToeplitz::identity(topology.n_a).expect("n_a > 0"),
                LtToeplitz::identity(topology.n_b).expect("n_b > 0"),
            ),
            GainMode::RandomGain => {
                debug_assert_eq!(fine.len(), m - 1);
                let mut col_a = fine.clone();
                col_a.extend(extra_a);
                let mut col_b = fine.clone();
                col_b.extend(extra_b);
                (fine.clone(), leading_one(&col_a), leading_one(&col_b))
            }
        };
        let (eve1, eve2) = match topology.eve_mode {
            GainMode::StaticIdentity => (
                LtToeplitz::identity(topology.n_1).expect("n_1 > 0"),
                LtToeplitz::identity(topology.n_2).expect("n_2 > 0"),
            ),
            GainMode::RandomGain => (leading_one(eve1), leading_one(eve2)),
        };
        Self {
            fine,
            k_matrix,
            k_prime_matrix,
            eve1,
            eve2,
        }
    }

    /// Number of random bits in one gain draw for `topology`.
    pub fn draw_len(topology: &ChannelTopology) -> usize {
        topology.gain_layout().total()
    }

    /// Builds gains from one flat draw of [`RoundGains::draw_len`] bits, in
    /// the order: shared fine bits, extra bits of `K`, extra bits of `K'`,
    /// Eve's two gains. Static gains consume no bits.
    pub fn from_draw(topology: &ChannelTopology, bits: &BitVec) -> Result<Self> {
        let want = Self::draw_len(topology);
        if bits.len() != want {
            return Err(Error::DimensionMismatch {
                left: bits.len(),
                right: want,
            });
        }
        Ok(Self::from_flat(topology, bits))
    }

    fn from_flat(topology: &ChannelTopology, bits: &BitVec) -> Self {
        let l = topology.gain_layout();
        let mut at = 0;
        let mut take = |n: usize| {
            let s = bits.slice(at, at + n);
            at += n;
            s
        };
        let fine = take(l.fine);
        let extra_a = take(l.extra_a);
        let extra_b = take(l.extra_b);
        let eve1 = take(l.eve1);
        let eve2 = take(l.eve2);
        Self::assemble(topology, &fine, &extra_a, &extra_b, &eve1, &eve2)
    }
}

/// Draws the gains of one round from the counter-based generator.
///
/// The result depends only on `(seed, round)`.
pub fn sample_round_gains(topology: &ChannelTopology, seed: u64, round: u64) -> RoundGains {
    let mut rng = rng::stream_rng(seed, Stream::Gains, round);
    let bits = rng::uniform_bits(&mut rng, topology.gain_layout().total());
    RoundGains::from_flat(topology, &bits)
}

/// Gains for `n_rounds` rounds; with [`Coherence::Never`] the round-0 draw
/// is reused throughout.
pub fn sample_gains(
    topology: &ChannelTopology,
    seed: u64,
    n_rounds: usize,
    coherence: Coherence,
) -> Vec<RoundGains> {
    (0..n_rounds as u64)
        .map(|r| {
            let epoch = match coherence {
                Coherence::EveryRound => r,
                Coherence::Never => 0,
            };
            sample_round_gains(topology, seed, epoch)
        })
        .collect()
}

/// Receiver observation `y = gain * x`.
pub fn apply_channel(gain: &LtToeplitz, x: &BitVec) -> Result<BitVec> {
    gain.mul_vec(x)
}

/// Eve's observation: her gain applied to the top `gain.dim()` levels of `x`.
pub fn eve_observe(x: &BitVec, eve_gain: &LtToeplitz) -> Result<BitVec> {
    if eve_gain.dim() > x.len() {
        return Err(Error::DimensionMismatch {
            left: eve_gain.dim(),
            right: x.len(),
        });
    }
    eve_gain.mul_vec(&x.truncate(eve_gain.dim())?)
}
