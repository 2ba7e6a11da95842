//! Key generation schemes without a public channel.
//!
//! One round is two channel uses: Alice transmits `x_a` (Bob observes
//! `y_b = K x_a`, Eve observes the top `n_1` levels through `H_1`), then
//! Bob transmits `x_b` (Alice observes `y_a = K' x_b`, Eve observes the top
//! `n_2` levels through `H_2`).
//!
//! - **Pilot**: both send `e_1`; each observation is the channel column, and
//!   its top `min(n_a, n_b)` levels are the key.
//! - **Product**: both send random words with a leading one and multiply the
//!   truncated observation by the Toeplitz matrix of their own truncated
//!   word. Both sides end up with the truncated product `x_a * x_b * k`.
//! - **Mixed**: like product, but the levels Eve can hear carry the pilot
//!   pattern `1 0 ... 0` and only the levels below her floor are random.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detmodel::{eve_observe, ChannelTopology, GainMode, RoundGains};
use crate::error::{Error, Result};
use crate::gf2lin::{t_lt, BitVec};
use crate::rng::{self, Stream};
use crate::secrecy::SecrecyReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Pilot,
    Product,
    Mixed,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Pilot => "pilot",
            Scheme::Product => "product",
            Scheme::Mixed => "mixed",
        })
    }
}

impl Scheme {
    /// Checks that the scheme is defined on `topology`.
    pub fn validate(&self, topology: &ChannelTopology) -> Result<()> {
        topology.validate()?;
        if *self == Scheme::Mixed {
            if topology.eve_mode != GainMode::StaticIdentity {
                return Err(Error::SchemeNotApplicable(
                    "mixed signalling is defined for a static eavesdropper gain".into(),
                ));
            }
            if topology.n_a == topology.n_1 && topology.n_b == topology.n_2 {
                return Err(Error::SchemeNotApplicable(
                    "mixed signalling needs n_a > n_1 or n_b > n_2 (no private levels)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Free local random bits per round for Alice and Bob.
    pub fn free_input_bits(&self, topology: &ChannelTopology) -> (usize, usize) {
        match self {
            Scheme::Pilot => (0, 0),
            Scheme::Product => (topology.n_a - 1, topology.n_b - 1),
            Scheme::Mixed => (topology.n_a - topology.n_1, topology.n_b - topology.n_2),
        }
    }

    /// Transmitted word of length `len` built from `free` local bits.
    /// `eve_len` is the number of top levels the eavesdropper hears.
    pub fn encode_input(&self, len: usize, eve_len: usize, free: &BitVec) -> BitVec {
        let mut x = BitVec::unit(len).expect("len > 0");
        let offset = match self {
            Scheme::Pilot => return x,
            Scheme::Product => 1,
            Scheme::Mixed => eve_len,
        };
        debug_assert_eq!(free.len(), len - offset);
        for (i, b) in free.iter().enumerate() {
            x.set(offset + i, b);
        }
        x
    }

    /// Whether secure extraction by level slicing applies.
    pub fn extracts_secure_key(&self, topology: &ChannelTopology) -> bool {
        *self == Scheme::Product && topology.eve_mode == GainMode::StaticIdentity
    }
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub gains: RoundGains,
    pub x_a: BitVec,
    pub x_b: BitVec,
    pub y_a: BitVec,
    pub y_b: BitVec,
    pub y_e_odd: BitVec,
    pub y_e_even: BitVec,
}

/// Per-round keys computed independently at Alice and Bob.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundKeys {
    pub s_a: BitVec,
    pub s_b: BitVec,
}

/// Runs one round with explicit inputs.
pub fn run_round(
    scheme: Scheme,
    topology: &ChannelTopology,
    gains: &RoundGains,
    x_a: BitVec,
    x_b: BitVec,
) -> Result<(RoundRecord, RoundKeys)> {
    let m = topology.shared_levels();
    let y_b = gains.k_matrix.mul_vec(&x_a)?;
    let y_a = gains.k_prime_matrix.mul_vec(&x_b)?;
    let y_e_odd = eve_observe(&x_a, &gains.eve1)?;
    let y_e_even = eve_observe(&x_b, &gains.eve2)?;
    let keys = match scheme {
        Scheme::Pilot => RoundKeys {
            s_a: y_a.truncate(m)?,
            s_b: y_b.truncate(m)?,
        },
        Scheme::Product | Scheme::Mixed => RoundKeys {
            s_a: t_lt(&x_a.truncate(m)?)?.mul_vec(&y_a.truncate(m)?)?,
            s_b: t_lt(&x_b.truncate(m)?)?.mul_vec(&y_b.truncate(m)?)?,
        },
    };
    let record = RoundRecord {
        gains: gains.clone(),
        x_a,
        x_b,
        y_a,
        y_b,
        y_e_odd,
        y_e_even,
    };
    Ok((record, keys))
}

/// Seeds of the two local randomness sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LocalSeeds {
    pub alice: u64,
    pub bob: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub scheme: Scheme,
    pub topology: ChannelTopology,
    pub seeds: LocalSeeds,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub s_a: BitVec,
    pub s_b: BitVec,
    pub bits_per_round: usize,
}

impl KeyPair {
    pub fn agree(&self) -> bool {
        self.s_a == self.s_b
    }

    pub fn rounds(&self) -> usize {
        self.s_a.len().checked_div(self.bits_per_round).unwrap_or(0)
    }

    /// Alice's key for round `r`.
    pub fn round_key(&self, r: usize) -> BitVec {
        self.s_a.slice(r * self.bits_per_round, (r + 1) * self.bits_per_round)
    }
}

/// Runs `scheme` over the given per-round gains; local inputs come from
/// the counter-based generator addressed by `(seed, round)`.
pub fn run(
    scheme: Scheme,
    topology: &ChannelTopology,
    gains: &[RoundGains],
    seeds: LocalSeeds,
) -> Result<(Transcript, KeyPair)> {
    scheme.validate(topology)?;
    if gains.is_empty() {
        return Err(Error::NoRounds);
    }
    let (free_a, free_b) = scheme.free_input_bits(topology);
    let mut rounds = Vec::with_capacity(gains.len());
    let mut s_a = BitVec::empty();
    let mut s_b = BitVec::empty();
    for (r, g) in gains.iter().enumerate() {
        let bits_a = rng::uniform_bits(&mut rng::stream_rng(seeds.alice, Stream::Alice, r as u64), free_a);
        let bits_b = rng::uniform_bits(&mut rng::stream_rng(seeds.bob, Stream::Bob, r as u64), free_b);
        let x_a = scheme.encode_input(topology.n_a, topology.n_1, &bits_a);
        let x_b = scheme.encode_input(topology.n_b, topology.n_2, &bits_b);
        let (record, keys) = run_round(scheme, topology, g, x_a, x_b)?;
        s_a.extend(&keys.s_a);
        s_b.extend(&keys.s_b);
        rounds.push(record);
    }
    Ok((
        Transcript {
            scheme,
            topology: *topology,
            seeds,
            rounds,
        },
        KeyPair {
            s_a,
            s_b,
            bits_per_round: topology.shared_levels(),
        },
    ))
}

/// Pilot signalling: both parties transmit `e_1`.
pub fn run_pilot(topology: &ChannelTopology, gains: &[RoundGains]) -> Result<(Transcript, KeyPair)> {
    run(Scheme::Pilot, topology, gains, LocalSeeds::default())
}

/// Product signalling with uniformly random leading-one inputs.
pub fn run_product(
    topology: &ChannelTopology,
    gains: &[RoundGains],
    seeds: LocalSeeds,
) -> Result<(Transcript, KeyPair)> {
    run(Scheme::Product, topology, gains, seeds)
}

/// Mixed common/private signalling against a static eavesdropper.
pub fn run_mixed(
    topology: &ChannelTopology,
    gains: &[RoundGains],
    seeds: LocalSeeds,
) -> Result<(Transcript, KeyPair)> {
    run(Scheme::Mixed, topology, gains, seeds)
}

/// Secure part of one product-signalling round key: the levels strictly
/// below `min(n_1, n_2)`. Empty when Eve hears every shared level.
pub fn extract_secure_key(key_round: &BitVec, topology: &ChannelTopology) -> Result<BitVec> {
    if topology.eve_mode != GainMode::StaticIdentity {
        return Err(Error::SchemeNotApplicable(
            "secure extraction is defined for a static eavesdropper gain".into(),
        ));
    }
    let m = topology.shared_levels();
    if key_round.len() != m {
        return Err(Error::DimensionMismatch {
            left: key_round.len(),
            right: m,
        });
    }
    Ok(key_round.slice(topology.eve_levels(), m))
}

/// Secure extraction applied round by round to a full key.
pub fn extract_secure_keys(keys: &KeyPair, topology: &ChannelTopology) -> Result<BitVec> {
    let mut out = BitVec::empty();
    for r in 0..keys.rounds() {
        out.extend(&extract_secure_key(&keys.round_key(r), topology)?);
    }
    Ok(out)
}

/// Key rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    /// Key length divided by channel uses.
    pub nominal_r_d: f64,
    /// Exact `H(s_A) / n` when an audit is supplied, otherwise nominal.
    pub r_d: f64,
    pub r_sd: Option<f64>,
    pub exact: bool,
}

pub fn rate_report(keys: &KeyPair, n_channel_uses: usize, audited: Option<&SecrecyReport>) -> RateReport {
    let n = n_channel_uses.max(1) as f64;
    let nominal = keys.s_a.len() as f64 / n;
    match audited {
        Some(rep) => RateReport {
            nominal_r_d: nominal,
            r_d: rep.key_entropy_bits / n,
            r_sd: rep.r_sd.map(|r| r * rep.channel_uses() as f64 / n),
            exact: true,
        },
        None => RateReport {
            nominal_r_d: nominal,
            r_d: nominal,
            r_sd: None,
            exact: false,
        },
    }
}

impl Transcript {
    pub fn channel_uses(&self) -> usize {
        2 * self.rounds.len()
    }

    /// Re-derives every observation from the recorded gains and inputs.
    pub fn verify(&self) -> Result<bool> {
        for r in &self.rounds {
            if r.gains.k_matrix.mul_vec(&r.x_a)? != r.y_b
                || r.gains.k_prime_matrix.mul_vec(&r.x_b)? != r.y_a
                || eve_observe(&r.x_a, &r.gains.eve1)? != r.y_e_odd
                || eve_observe(&r.x_b, &r.gains.eve2)? != r.y_e_even
            {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Line-oriented text form: a `#` header with the dimensions, then one
    /// line per round with hex words in the order round, fine, x_a, x_b,
    /// y_a, y_b, y_e_odd, y_e_even.
    pub fn to_text(&self) -> String {
        let t = &self.topology;
        let mut out = format!(
            "# detkey-transcript v1 scheme={} n_a={} n_b={} n_1={} n_2={} seed_a={} seed_b={}\n",
            self.scheme, t.n_a, t.n_b, t.n_1, t.n_2, self.seeds.alice, self.seeds.bob
        );
        for (i, r) in self.rounds.iter().enumerate() {
            writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                i,
                r.gains.fine.to_hex(),
                r.x_a.to_hex(),
                r.x_b.to_hex(),
                r.y_a.to_hex(),
                r.y_b.to_hex(),
                r.y_e_odd.to_hex(),
                r.y_e_even.to_hex()
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn lines(&self) -> Vec<TranscriptLine> {
        self.rounds
            .iter()
            .enumerate()
            .map(|(i, r)| TranscriptLine {
                round: i as u64,
                fine: r.gains.fine.clone(),
                x_a: r.x_a.clone(),
                x_b: r.x_b.clone(),
                y_a: r.y_a.clone(),
                y_b: r.y_b.clone(),
                y_e_odd: r.y_e_odd.clone(),
                y_e_even: r.y_e_even.clone(),
            })
            .collect()
    }
}

/// One parsed line of the transcript text form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptLine {
    pub round: u64,
    pub fine: BitVec,
    pub x_a: BitVec,
    pub x_b: BitVec,
    pub y_a: BitVec,
    pub y_b: BitVec,
    pub y_e_odd: BitVec,
    pub y_e_even: BitVec,
}

/// Parses [`Transcript::to_text`] output.
pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptLine>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::MalformedTranscript {
        line: 1,
        reason: "missing header".into(),
    })?;
    let dim = |key: &str| -> Result<usize> {
        header
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::MalformedTranscript {
                line: 1,
                reason: format!("header lacks {key}"),
            })
    };
    if !header.starts_with("# detkey-transcript v1") {
        return Err(Error::MalformedTranscript {
            line: 1,
            reason: "unrecognised header".into(),
        });
    }
    let (n_a, n_b, n_1, n_2) = (dim("n_a")?, dim("n_b")?, dim("n_1")?, dim("n_2")?);
    let lens = [n_a.min(n_b).saturating_sub(1), n_a, n_b, n_b, n_a, n_1, n_2];
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::MalformedTranscript { line: idx + 1, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(bad(format!("expected 8 fields, found {}", fields.len())));
        }
        let round = fields[0].parse().map_err(|_| bad("bad round index".into()))?;
        let mut words = Vec::with_capacity(7);
        for (f, &len) in fields[1..].iter().zip(&lens) {
            words.push(BitVec::from_hex(f, len).map_err(|e| bad(e.to_string()))?);
        }
        let mut w = words.into_iter();
        let mut next = || w.next().expect("seven words");
        out.push(TranscriptLine {
            round,
            fine: next(),
            x_a: next(),
            x_b: next(),
            y_a: next(),
            y_b: next(),
            y_e_odd: next(),
            y_e_even: next(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detmodel::{sample_gains, Coherence};

    fn bv(bits: &[u8]) -> BitVec {
        BitVec::from_01(bits)
    }

    fn gains_with_fine(t: &ChannelTopology, fine: &BitVec) -> RoundGains {
        let l = t.gain_layout();
        RoundGains::assemble(
            t,
            fine,
            &BitVec::zeros(l.extra_a),
            &BitVec::zeros(l.extra_b),
            &BitVec::zeros(l.eve1),
            &BitVec::zeros(l.eve2),
        )
    }

    #[test]
    fn pilot_key_is_channel_column() {
        let t = ChannelTopology::new(4, 4, 2, 2).unwrap();
        let g = gains_with_fine(&t, &bv(&[1, 0, 1]));
        let (tr, keys) = run_pilot(&t, &[g]).unwrap();
        assert_eq!(keys.s_a, bv(&[1, 1, 0, 1]));
        assert!(keys.agree());
        assert_eq!(keys.bits_per_round, 4);
        assert!(tr.verify().unwrap());
    }

    #[test]
    fn pilot_nominal_rate() {
        let t = ChannelTopology::new(8, 6, 2, 2).unwrap();
        let gains = sample_gains(&t, 3, 5, Coherence::EveryRound);
        let (tr, keys) = run_pilot(&t, &gains).unwrap();
        let rep = rate_report(&keys, tr.channel_uses(), None);
        assert_eq!(rep.nominal_r_d, 3.0);
        assert!(!rep.exact);
    }

    #[test]
    fn pilot_with_zero_fine_bits() {
        let t = ChannelTopology::new(3, 3, 1, 1).unwrap();
        let g = gains_with_fine(&t, &bv(&[0, 0]));
        let (_, keys) = run_pilot(&t, &[g.clone(), g]).unwrap();
        assert_eq!(keys.s_a, bv(&[1, 0, 0, 1, 0, 0]));
    }

    #[test]
    fn product_two_level_identity_gains() {
        let t = ChannelTopology::with_modes(2, 2, 1, 1, GainMode::StaticIdentity, GainMode::StaticIdentity).unwrap();
        let g = gains_with_fine(&t, &BitVec::empty());
        for a in [false, true] {
            for b in [false, true] {
                let x_a = BitVec::from_bits(&[true, a]);
                let x_b = BitVec::from_bits(&[true, b]);
                let (_, keys) = run_round(Scheme::Product, &t, &g, x_a, x_b).unwrap();
                assert_eq!(keys.s_a, BitVec::from_bits(&[true, a ^ b]));
                assert_eq!(keys.s_a, keys.s_b);
                assert_eq!(extract_secure_key(&keys.s_a, &t).unwrap(), BitVec::from_bits(&[a ^ b]));
            }
        }
    }

    #[test]
    fn product_keys_agree_across_topologies() {
        for n_a in 1..=6 {
            for n_b in 1..=6 {
                let m = n_a.min(n_b);
                let t = ChannelTopology::new(n_a, n_b, m, 1).unwrap();
                let gains = sample_gains(&t, (n_a * 10 + n_b) as u64, 8, Coherence::EveryRound);
                let (tr, keys) = run_product(&t, &gains, LocalSeeds { alice: 1, bob: 2 }).unwrap();
                assert!(keys.agree());
                assert_eq!(keys.s_a.len(), 8 * m);
                assert!(tr.verify().unwrap());
            }
        }
    }

    #[test]
    fn product_with_pilot_inputs_degenerates_to_pilot() {
        let t = ChannelTopology::new(5, 7, 2, 3).unwrap();
        let gains = sample_gains(&t, 11, 6, Coherence::EveryRound);
        let (_, pilot) = run_pilot(&t, &gains).unwrap();
        let mut s = BitVec::empty();
        for g in &gains {
            let (_, k) = run_round(
                Scheme::Product,
                &t,
                g,
                BitVec::unit(t.n_a).unwrap(),
                BitVec::unit(t.n_b).unwrap(),
            )
            .unwrap();
            s.extend(&k.s_a);
        }
        assert_eq!(s, pilot.s_a);
    }

    #[test]
    fn mixed_input_layout_and_eve_view() {
        let t = ChannelTopology::with_modes(5, 5, 2, 3, GainMode::StaticIdentity, GainMode::RandomGain).unwrap();
        let gains = sample_gains(&t, 4, 10, Coherence::EveryRound);
        let (tr, keys) = run_mixed(&t, &gains, LocalSeeds { alice: 8, bob: 9 }).unwrap();
        assert!(keys.agree());
        for r in &tr.rounds {
            assert!(r.x_a.get(0) && !r.x_a.get(1));
            assert!(r.x_b.get(0) && !r.x_b.get(1) && !r.x_b.get(2));
            assert_eq!(r.y_e_odd, bv(&[1, 0]));
            assert_eq!(r.y_e_even, bv(&[1, 0, 0]));
        }
    }

    #[test]
    fn mixed_rejects_invalid_settings() {
        let no_private = ChannelTopology::with_modes(3, 3, 3, 3, GainMode::StaticIdentity, GainMode::RandomGain).unwrap();
        let g = sample_gains(&no_private, 0, 1, Coherence::EveryRound);
        assert!(matches!(
            run_mixed(&no_private, &g, LocalSeeds::default()),
            Err(Error::SchemeNotApplicable(_))
        ));
        let random_eve = ChannelTopology::new(4, 4, 2, 2).unwrap();
        let g = sample_gains(&random_eve, 0, 1, Coherence::EveryRound);
        assert!(run_mixed(&random_eve, &g, LocalSeeds::default()).is_err());
    }

    #[test]
    fn secure_extraction_lengths() {
        let t = ChannelTopology::with_modes(8, 8, 3, 3, GainMode::StaticIdentity, GainMode::StaticIdentity).unwrap();
        let key = BitVec::from_lsb_word(0xa5, 8);
        assert_eq!(extract_secure_key(&key, &t).unwrap(), key.slice(3, 8));
        let full = ChannelTopology::with_modes(4, 4, 4, 4, GainMode::StaticIdentity, GainMode::StaticIdentity).unwrap();
        assert!(extract_secure_key(&BitVec::unit(4).unwrap(), &full).unwrap().is_empty());
        assert!(extract_secure_key(&BitVec::unit(3).unwrap(), &full).is_err());
    }

    #[test]
    fn run_needs_rounds() {
        let t = ChannelTopology::new(2, 2, 1, 1).unwrap();
        assert_eq!(run_pilot(&t, &[]).unwrap_err(), Error::NoRounds);
    }

    #[test]
    fn transcript_text_round_trip() {
        let t = ChannelTopology::new(7, 5, 3, 2).unwrap();
        let gains = sample_gains(&t, 21, 4, Coherence::EveryRound);
        let (tr, _) = run_product(&t, &gains, LocalSeeds { alice: 5, bob: 6 }).unwrap();
        let text = tr.to_text();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(parse_transcript(&text).unwrap(), tr.lines());
        assert!(parse_transcript("# nope\n").is_err());
        let broken = text.replace(" ", "  ").replacen("0 ", "x ", 1);
        assert!(parse_transcript(&broken).is_err());
    }
}
