//! Gaussian-model evaluations.
//!
//! The mutual-information lower bound for product signalling with Gaussian
//! inputs `X_A, X_B ~ N(0, P)`, gain `K ~ N(0, s_k)` and noise variance
//! `s_z` is
//!
//! ```text
//!   E_K log2(1 + K^2 P / s_z)
//! - 1/2 E log2(1 + X_A^2 s_k / s_z) - 1/2 E log2(1 + X_B^2 s_k / s_z)
//! + 1/2 E log2(1 + X_A^2 X_B^2 s_k^2 / ((X_A^2 + X_B^2) s_k s_z + s_z^2))
//! ```
//!
//! in bits. It is evaluated two independent ways: counter-based Monte Carlo
//! and adaptive Gauss-Kronrod quadrature over the half line (all integrands
//! are even), so either can check the other.

use std::collections::BinaryHeap;
use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Standard deviations kept before the Gaussian tail is dropped.
const TAIL_CUTOFF: f64 = 10.0;

const MC_CHUNK: usize = 1 << 16;

/// Subinterval budget per adaptive integral.
const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    /// Input power `P`.
    pub p: f64,
    /// Channel-gain variance.
    pub sigma_k_sq: f64,
    /// Noise variance.
    pub sigma_z_sq: f64,
}

impl GaussianParams {
    pub fn new(p: f64, sigma_k_sq: f64, sigma_z_sq: f64) -> Result<Self> {
        let params = Self {
            p,
            sigma_k_sq,
            sigma_z_sq,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(Error::InvalidParams(format!("p must be positive, got {}", self.p)));
        }
        if !(self.sigma_k_sq.is_finite() && self.sigma_k_sq >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma_k_sq must be nonnegative, got {}",
                self.sigma_k_sq
            )));
        }
        if !(self.sigma_z_sq.is_finite() && self.sigma_z_sq > 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma_z_sq must be positive, got {}",
                self.sigma_z_sq
            )));
        }
        Ok(())
    }

    /// `log2(1 + k^2 P / s_z)`.
    fn channel_term(&self, k: f64) -> f64 {
        (k * k * self.p / self.sigma_z_sq).ln_1p() * LOG2_E
    }

    /// `1/2 log2(1 + x^2 s_k / s_z)`.
    fn local_term(&self, x: f64) -> f64 {
        0.5 * (x * x * self.sigma_k_sq / self.sigma_z_sq).ln_1p() * LOG2_E
    }

    /// `1/2 log2(1 + a^2 b^2 s_k^2 / ((a^2 + b^2) s_k s_z + s_z^2))`.
    fn product_term(&self, a: f64, b: f64) -> f64 {
        let (a2, b2) = (a * a, b * b);
        let sk = self.sigma_k_sq;
        let sz = self.sigma_z_sq;
        let ratio = a2 * b2 * sk * sk / ((a2 + b2) * sk * sz + sz * sz);
        0.5 * ratio.ln_1p() * LOG2_E
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    Quadrature,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MonteCarlo => "mc",
            Method::Quadrature => "quad",
        })
    }
}

/// Evaluated bound with its four expectation terms (in order: channel,
/// Alice-local, Bob-local, product), so that
/// `value = terms[0] - terms[1] - terms[2] + terms[3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEstimate {
    pub value: f64,
    /// Standard error for Monte Carlo; error estimate for quadrature.
    pub std_error: f64,
    pub terms: [f64; 4],
    pub method: Method,
}

impl BoundEstimate {
    /// The bound may be negative; a key rate cannot.
    pub fn clamped(&self) -> f64 {
        self.value.max(0.0)
    }

    pub fn csv_header() -> &'static str {
        "p,sigma_k_sq,sigma_z_sq,method,value,std_error,term1,term2,term3,term4"
    }

    pub fn csv_row(&self, params: &GaussianParams) -> String {
        let f = |v: f64| format!("{v:?}");
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            f(params.p),
            f(params.sigma_k_sq),
            f(params.sigma_z_sq),
            self.method,
            f(self.value),
            f(self.std_error),
            f(self.terms[0]),
            f(self.terms[1]),
            f(self.terms[2]),
            f(self.terms[3])
        )
    }

    fn zero(method: Method) -> Self {
        Self {
            value: 0.0,
            std_error: 0.0,
            terms: [0.0; 4],
            method,
        }
    }
}

fn combine(terms: [f64; 4]) -> f64 {
    terms[0] - terms[1] - terms[2] + terms[3]
}

/// Running mean and sum of squared deviations (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Per-chunk accumulators: four terms plus the combined integrand.
type ChunkStats = [Moments; 5];

fn mc_chunk(params: &GaussianParams, seed: u64, chunk: usize, len: usize) -> ChunkStats {
    let mut rng = rng::stream_rng(seed, Stream::Gaussian, chunk as u64);
    let sk = params.sigma_k_sq.sqrt();
    let sp = params.p.sqrt();
    let mut stats = ChunkStats::default();
    for _ in 0..len {
        let zk: f64 = StandardNormal.sample(&mut rng);
        let za: f64 = StandardNormal.sample(&mut rng);
        let zb: f64 = StandardNormal.sample(&mut rng);
        let (k, xa, xb) = (sk * zk, sp * za, sp * zb);
        let t = [
            params.channel_term(k),
            params.local_term(xa),
            params.local_term(xb),
            params.product_term(xa, xb),
        ];
        for (s, v) in stats.iter_mut().zip(t) {
            s.push(v);
        }
        stats[4].push(combine(t));
    }
    stats
}

/// Monte Carlo estimate from `n_samples` i.i.d. draws of `(K, X_A, X_B)`.
///
/// Samples are generated in fixed-size chunks, each addressed by its index
/// in the counter-based generator, and chunk statistics are merged in index
/// order; the result is bit-identical for a given seed whatever the number
/// of worker threads.
pub fn theorem1_mc(params: &GaussianParams, n_samples: usize, seed: u64) -> Result<BoundEstimate> {
    params.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidParams("n_samples must be at least 1".into()));
    }
    let n_chunks = n_samples.div_ceil(MC_CHUNK);
    let chunks: Vec<ChunkStats> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            mc_chunk(params, seed, c, len)
        })
        .collect();
    let total = chunks.into_iter().fold(ChunkStats::default(), |acc, c| {
        let mut out = acc;
        for (o, s) in out.iter_mut().zip(c) {
            *o = o.merge(s);
        }
        out
    });
    let terms = [total[0].mean, total[1].mean, total[2].mean, total[3].mean];
    Ok(BoundEstimate {
        value: combine(terms),
        std_error: total[4].std_error(),
        terms,
        method: Method::MonteCarlo,
    })
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Debug, PartialEq)]
struct Panel {
    err: f64,
    a: f64,
    b: f64,
    est: f64,
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`:
/// repeatedly bisects the panel with the largest error estimate until the
/// total error is within `max(rel_tol * |I|, abs_tol)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    let (est, err) = gk15(&f, a, b);
    heap.push(Panel { err, a, b, est });
    let (mut total, mut total_err) = (est, err);
    loop {
        if !(total.is_finite() && total_err.is_finite()) {
            return Err(Error::NoConvergence {
                estimate: total,
                error_estimate: total_err,
            });
        }
        if total_err <= (rel_tol * total.abs()).max(abs_tol) {
            return Ok((total, total_err));
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence {
                estimate: total,
                error_estimate: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            return Err(Error::NoConvergence {
                estimate: total,
                error_estimate: total_err,
            });
        }
        let (e1, r1) = gk15(&f, worst.a, mid);
        let (e2, r2) = gk15(&f, mid, worst.b);
        heap.push(Panel { err: r1, a: worst.a, b: mid, est: e1 });
        heap.push(Panel { err: r2, a: mid, b: worst.b, est: e2 });
        // Re-sum from scratch so rounding does not drift over many splits.
        total = heap.iter().map(|p| p.est).sum();
        total_err = heap.iter().map(|p| p.err).sum();
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E g(Z)` for standard normal `Z` and even `g`.
fn even_expectation<G: Fn(f64) -> f64>(g: G, rel_tol: f64) -> Result<(f64, f64)> {
    let (v, e) = integrate_adaptive(|z| g(z) * std_normal_pdf(z), 0.0, TAIL_CUTOFF, rel_tol, 1e-300)?;
    Ok((2.0 * v, 2.0 * e))
}

/// Bound evaluated by adaptive quadrature. Terms one to three are 1-D
/// integrals; the product term is a nested 2-D integral over the positive
/// quadrant.
pub fn theorem1_quadrature(params: &GaussianParams, rel_tol: f64) -> Result<BoundEstimate> {
    params.validate()?;
    if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
        return Err(Error::InvalidParams(format!("rel_tol must lie in (0, 1e-2], got {rel_tol}")));
    }
    if params.sigma_k_sq == 0.0 {
        return Ok(BoundEstimate::zero(Method::Quadrature));
    }
    let sk = params.sigma_k_sq.sqrt();
    let sp = params.p.sqrt();
    let (t1, e1) = even_expectation(|z| params.channel_term(sk * z), rel_tol)?;
    let (t2, e2) = even_expectation(|z| params.local_term(sp * z), rel_tol)?;

    let inner_tol = rel_tol * 0.1;
    let inner = |u: f64| -> f64 {
        let xa = sp * u;
        // Inner failures surface as NaN and are caught by the outer check.
        even_expectation(|v| params.product_term(xa, sp * v), inner_tol)
            .map(|(v, _)| v)
            .unwrap_or(f64::NAN)
    };
    let (t4, e4) = even_expectation(inner, rel_tol)?;
    if !t4.is_finite() {
        return Err(Error::NoConvergence {
            estimate: f64::NAN,
            error_estimate: f64::INFINITY,
        });
    }
    let terms = [t1, t2, t2, t4];
    Ok(BoundEstimate {
        value: combine(terms),
        std_error: e1 + 2.0 * e2 + e4,
        terms,
        method: Method::Quadrature,
    })
}

/// Pilot-signalling key rate in bits per channel use,
/// `1/4 min(log2 snr_a, log2 snr_b)`, zero when either SNR is at most one.
pub fn pilot_rate_gaussian(snr_a: f64, snr_b: f64) -> f64 {
    if !(snr_a > 1.0 && snr_b > 1.0) {
        return 0.0;
    }
    0.25 * snr_a.log2().min(snr_b.log2())
}

/// Secure rate with static gains everywhere,
/// `1/4 (min(log2 snr_a, log2 snr_b) - min(log2 snr_e1, log2 snr_e2))`,
/// with each logarithm clamped at zero and the result clamped at zero.
///
/// The quarter factor applies to both minima, matching half the level
/// difference under `N = ceil(log2(snr) / 2)`.
pub fn static_secure_rate_gaussian(snr_a: f64, snr_b: f64, snr_e1: f64, snr_e2: f64) -> f64 {
    let lg = |s: f64| if s > 1.0 { s.log2() } else { 0.0 };
    let legit = lg(snr_a).min(lg(snr_b));
    let eve = lg(snr_e1).min(lg(snr_e2));
    (0.25 * (legit - eve)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detmodel::{snr_to_levels, LevelModel};

    #[test]
    fn params_validation() {
        assert!(GaussianParams::new(1.0, 0.0, 1.0).is_ok());
        assert!(GaussianParams::new(0.0, 1.0, 1.0).is_err());
        assert!(GaussianParams::new(1.0, -1.0, 1.0).is_err());
        assert!(GaussianParams::new(1.0, 1.0, 0.0).is_err());
        assert!(GaussianParams::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_gain_variance_gives_zero() {
        let p = GaussianParams::new(2.0, 0.0, 1.0).unwrap();
        let mc = theorem1_mc(&p, 10_000, 1).unwrap();
        assert_eq!(mc.value, 0.0);
        assert_eq!(mc.terms, [0.0; 4]);
        let q = theorem1_quadrature(&p, 1e-6).unwrap();
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn mc_is_deterministic_and_worker_independent() {
        let p = GaussianParams::new(1.0, 1.0, 1.0).unwrap();
        let a = theorem1_mc(&p, 200_000, 9).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| theorem1_mc(&p, 200_000, 9).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, theorem1_mc(&p, 200_000, 10).unwrap());
    }

    #[test]
    fn symmetric_local_terms_agree() {
        let p = GaussianParams::new(4.0, 1.0, 0.5).unwrap();
        let n = 400_000;
        let mc = theorem1_mc(&p, n, 3).unwrap();
        // Both local terms share a distribution; their sample-mean
        // difference has std error sqrt(2) * sd / sqrt(n).
        let mut m = Moments::default();
        for c in 0..n.div_ceil(MC_CHUNK) {
            let s = mc_chunk(&p, 3, c, MC_CHUNK.min(n - c * MC_CHUNK));
            m = m.merge(s[1]);
        }
        let se_diff = std::f64::consts::SQRT_2 * m.std_error();
        assert!((mc.terms[1] - mc.terms[2]).abs() < 4.0 * se_diff);
    }

    #[test]
    fn quadrature_known_one_dimensional_integrals() {
        // E Z^2 = 1
        let (v, _) = even_expectation(|z| z * z, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let (v, _) = integrate_adaptive(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_budget_exhaustion_is_reported() {
        // Divergent at the left end.
        let r = integrate_adaptive(|x: f64| 1.0 / x, 0.0, 1.0, 1e-8, 0.0);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
        let r = integrate_adaptive(|_| f64::NAN, 0.0, 1.0, 1e-8, 0.0);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn quadrature_rejects_bad_tolerance() {
        let p = GaussianParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(theorem1_quadrature(&p, 0.0).is_err());
        assert!(theorem1_quadrature(&p, 0.1).is_err());
    }

    #[test]
    fn channel_term_power_scaling() {
        let base = GaussianParams::new(1.0, 1.0, 1.0).unwrap();
        let quad = GaussianParams::new(4.0, 1.0, 1.0).unwrap();
        let a = theorem1_quadrature(&base, 1e-8).unwrap().terms[0];
        let b = theorem1_quadrature(&quad, 1e-8).unwrap().terms[0];
        assert!(b > a && b - a <= 2.0);
    }

    #[test]
    fn value_is_sum_of_terms() {
        let p = GaussianParams::new(0.5, 4.0, 1.0).unwrap();
        for est in [theorem1_quadrature(&p, 1e-6).unwrap(), theorem1_mc(&p, 50_000, 2).unwrap()] {
            let t = est.terms;
            assert!((est.value - (t[0] - t[1] - t[2] + t[3])).abs() < 1e-12);
            assert!(t[3] >= 0.0);
        }
    }

    #[test]
    fn csv_row_layout() {
        let p = GaussianParams::new(1.0, 0.0, 1.0).unwrap();
        let row = theorem1_quadrature(&p, 1e-6).unwrap().csv_row(&p);
        assert_eq!(row, "1.0,0.0,1.0,quad,0.0,0.0,0.0,0.0,0.0,0.0");
        assert_eq!(BoundEstimate::csv_header().split(',').count(), row.split(',').count());
    }

    #[test]
    fn pilot_rate_examples() {
        assert_eq!(pilot_rate_gaussian(256.0, 256.0), 2.0);
        assert_eq!(pilot_rate_gaussian(4.0, 256.0), 0.5);
        assert_eq!(pilot_rate_gaussian(1.0, 256.0), 0.0);
        assert_eq!(pilot_rate_gaussian(0.5, 0.5), 0.0);
    }

    #[test]
    fn static_secure_rate_examples() {
        assert_eq!(static_secure_rate_gaussian(256.0, 256.0, 4.0, 4.0), 1.5);
        assert_eq!(static_secure_rate_gaussian(16.0, 16.0, 64.0, 64.0), 0.0);
        assert_eq!(static_secure_rate_gaussian(64.0, 256.0, 1.0, 1.0), pilot_rate_gaussian(64.0, 256.0));
    }

    #[test]
    fn pilot_rate_matches_level_mapping() {
        for k in 1..=8 {
            let snr = 4f64.powi(k);
            let levels = snr_to_levels(snr, LevelModel::Real).unwrap();
            assert_eq!(pilot_rate_gaussian(snr, snr), f64::from(levels) / 2.0);
        }
    }
}
