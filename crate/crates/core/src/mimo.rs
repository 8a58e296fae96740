//! Multi-receiver models: maximal-ratio combining and magnitude-only MIMO
//! detection by Gerchberg-Saxton alternating projections.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y = |H x + r|` with `H` of shape receivers × users.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannel {
    h: DMatrix<Complex64>,
    reference: DVector<Complex64>,
}

impl MimoChannel {
    pub fn new(h: DMatrix<Complex64>, reference: DVector<Complex64>) -> Result<Self> {
        let (k, m) = h.shape();
        if m == 0 || k < m {
            return Err(Error::Validation(format!(
                "need K ≥ M ≥ 1, got K = {k}, M = {m}"
            )));
        }
        if reference.len() != k {
            return Err(Error::Validation(format!(
                "reference has {} entries for {k} receivers",
                reference.len()
            )));
        }
        if h.iter()
            .chain(reference.iter())
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::Validation("channel entries must be finite".into()));
        }
        Ok(Self { h, reference })
    }

    /// i.i.d. CN(0, 1) gains; each `|r_k|` is `reference_ratio` times the
    /// mean row norm of `H`, with a uniformly random phase.
    pub fn random(receivers: usize, users: usize, reference_ratio: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = DMatrix::from_fn(receivers, users, |_, _| complex_gaussian(&mut rng, 1.0));
        let mean_row = if receivers == 0 {
            0.0
        } else {
            h.row_iter().map(|r| r.norm()).sum::<f64>() / receivers as f64
        };
        let reference = DVector::from_fn(receivers, |_, _| {
            Complex64::from_polar(
                reference_ratio * mean_row,
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        });
        Self::new(h, reference)
    }

    pub fn receivers(&self) -> usize {
        self.h.nrows()
    }

    pub fn users(&self) -> usize {
        self.h.ncols()
    }

    pub fn gains(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn reference(&self) -> &DVector<Complex64> {
        &self.reference
    }

    /// `H x + r`.
    pub fn field(&self, x: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if x.len() != self.users() {
            return Err(Error::Validation(format!(
                "{} symbols for {} users",
                x.len(),
                self.users()
            )));
        }
        Ok(&self.h * x + &self.reference)
    }
}

/// Sample of CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// `|H x + r| + n`, `n ~ N(0, σ²)` per receiver, clipped at zero.
pub fn magnitude_observe(
    ch: &MimoChannel,
    x: &DVector<Complex64>,
    sigma: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Validation(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    let w = ch.field(x)?;
    if sigma == 0.0 {
        return Ok(w.map(|v| v.norm()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("σ checked above");
    Ok(w.map(|v| (v.norm() + normal.sample(&mut rng)).max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectInit {
    /// `z⁰ = y ⊙ phase(r)`.
    ReferencePhase,
    /// `z⁰ = y ⊙ e^{jθ}` with uniform random phases.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub init: DetectInit,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
            init: DetectInit::ReferencePhase,
        }
    }
}

impl DetectOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Validation("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Validation("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsResult {
    /// Iterate with the smallest data-fit residual.
    pub x: DVector<Complex64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖y − |H x_t + r|‖` for every iterate.
    pub residuals: Vec<f64>,
}

/// Unit phasor of `v`; `phase(0) = 1`.
fn phase(v: Complex64) -> Complex64 {
    let n = v.norm();
    if n == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        v / n
    }
}

fn pseudo_inverse(h: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let m = h.ncols();
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-10 * h.nrows().max(m) as f64;
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    if rank < m || smax == 0.0 {
        return Err(Error::Rank { rank, users: m });
    }
    svd.pseudo_inverse(eps)
        .map_err(|_| Error::Rank { rank, users: m })
}

/// Gerchberg-Saxton detection of `x` from `y = |H x + r|`.
///
/// Alternates a least-squares fit `x_t = H⁺(z_t − r)` with the magnitude
/// projection `z_{t+1} = y ⊙ phase(H x_t + r)`. Stops once the relative step
/// `‖x_{t+1} − x_t‖/‖x_t‖` falls to `tol`; otherwise returns the best iterate
/// after `max_iter` steps with `converged = false`.
pub fn gs_detect(y: &DVector<f64>, ch: &MimoChannel, opts: &DetectOptions) -> Result<GsResult> {
    opts.validate()?;
    if y.len() != ch.receivers() {
        return Err(Error::Validation(format!(
            "{} observations for {} receivers",
            y.len(),
            ch.receivers()
        )));
    }
    if y.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Validation(
            "observations must be finite and non-negative".into(),
        ));
    }
    let pinv = pseudo_inverse(&ch.h)?;
    let r = &ch.reference;
    let mut z: DVector<Complex64> = match opts.init {
        DetectInit::ReferencePhase => DVector::from_fn(y.len(), |k, _| phase(r[k]) * y[k]),
        DetectInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DVector::from_fn(y.len(), |k, _| {
                Complex64::from_polar(y[k], rng.random_range(0.0..std::f64::consts::TAU))
            })
        }
    };

    let residual = |w: &DVector<Complex64>| -> f64 {
        w.iter()
            .zip(y.iter())
            .map(|(v, m)| (m - v.norm()).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut x = &pinv * (&z - r);
    let mut w = &ch.h * &x + r;
    let mut residuals = vec![residual(&w)];
    let mut best = (residuals[0], x.clone());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        for k in 0..z.len() {
            z[k] = phase(w[k]) * y[k];
        }
        let next = &pinv * (&z - r);
        let step = (&next - &x).norm();
        let scale = x.norm();
        x = next;
        w = &ch.h * &x + r;
        let res = residual(&w);
        let prev = *residuals.last().expect("seeded above");
        debug_assert!(
            res <= prev * (1.0 + 1e-9) + 1e-12 * y.norm(),
            "GS residual rose from {prev} to {res}"
        );
        residuals.push(res);
        if res < best.0 {
            best = (res, x.clone());
        }
        if step <= opts.tol * scale || (scale == 0.0 && step == 0.0) {
            converged = true;
            break;
        }
    }
    Ok(GsResult {
        x: best.1,
        converged,
        iterations,
        residuals,
    })
}

/// Hard decisions from [`gs_detect_symbols`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDecision {
    /// Constellation index per user.
    pub symbols: Vec<usize>,
    /// Continuous GS solution the decisions were sliced from.
    pub x: DVector<Complex64>,
    /// `‖y − |H ŝ + r|‖` of the sliced symbols.
    pub residual: f64,
}

fn nearest_point(v: Complex64, constellation: &[Complex64]) -> usize {
    constellation
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (v - c).norm_sqr()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("constellation is non-empty")
        .0
}

fn magnitude_residual(ch: &MimoChannel, y: &DVector<f64>, x: &DVector<Complex64>) -> Result<f64> {
    let w = ch.field(x)?;
    Ok(w.iter()
        .zip(y.iter())
        .map(|(v, m)| (m - v.norm()).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Multi-start GS followed by slicing onto `constellation`.
///
/// With few receivers the magnitudes `y` can admit several exact solutions
/// (for one user and two receivers, the two intersections of two circles),
/// and GS converges to whichever basin it starts in. This runs GS from the
/// reference-phase start plus `restarts` seeded random starts, slices each
/// solution, and keeps the sliced symbol vector that best explains `y`.
pub fn gs_detect_symbols(
    y: &DVector<f64>,
    ch: &MimoChannel,
    opts: &DetectOptions,
    constellation: &[Complex64],
    restarts: usize,
    seed: u64,
) -> Result<SymbolDecision> {
    if constellation.is_empty() {
        return Err(Error::Validation("empty constellation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<DetectInit> = std::iter::once(DetectInit::ReferencePhase)
        .chain((0..restarts).map(|_| DetectInit::Random(rng.random())))
        .collect();
    let mut best: Option<SymbolDecision> = None;
    for init in starts {
        let out = gs_detect(y, ch, &DetectOptions { init, ..*opts })?;
        let symbols: Vec<usize> = out
            .x
            .iter()
            .map(|v| nearest_point(*v, constellation))
            .collect();
        let sliced =
            DVector::from_iterator(symbols.len(), symbols.iter().map(|&i| constellation[i]));
        let residual = magnitude_residual(ch, y, &sliced)?;
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(SymbolDecision {
                symbols,
                x: out.x,
                residual,
            });
        }
    }
    Ok(best.expect("the reference-phase start always runs"))
}

/// Constellation point minimising `‖y − |h s + r|‖` for a single user.
pub fn exhaustive_detect(
    y: &DVector<f64>,
    ch: &MimoChannel,
    constellation: &[Complex64],
) -> Result<usize> {
    if ch.users() != 1 {
        return Err(Error::Validation(
            "exhaustive search is implemented for one user".into(),
        ));
    }
    if constellation.is_empty() {
        return Err(Error::Validation("empty constellation".into()));
    }
    let mut best = (f64::INFINITY, 0);
    for (i, s) in constellation.iter().enumerate() {
        let w = ch.field(&DVector::from_element(1, *s))?;
        let cost: f64 = w
            .iter()
            .zip(y.iter())
            .map(|(v, m)| (m - v.norm()).powi(2))
            .sum();
        if cost < best.0 {
            best = (cost, i);
        }
    }
    Ok(best.1)
}

/// Normalized mean square error `‖x̂ − x‖²/‖x‖²`.
pub fn nmse(estimate: &DVector<Complex64>, truth: &DVector<Complex64>) -> f64 {
    (estimate - truth).norm_squared() / truth.norm_squared()
}

/// NMSE after removing the best common phase rotation of `estimate`.
pub fn nmse_up_to_phase(estimate: &DVector<Complex64>, truth: &DVector<Complex64>) -> f64 {
    let c = estimate.dotc(truth);
    nmse(&(estimate * phase(c)), truth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combined {
    pub estimate: Complex64,
    /// `Σ|h_k|²/σ_k² · signal_power`.
    pub snr: f64,
}

/// Maximal-ratio combining with weights `h_k*/σ_k²`, normalized so that the
/// estimate is unbiased.
pub fn simo_combine(
    y: &[Complex64],
    h: &[Complex64],
    sigma: &[f64],
    signal_power: f64,
) -> Result<Combined> {
    if y.is_empty() || y.len() != h.len() || y.len() != sigma.len() {
        return Err(Error::Validation(
            "combining needs matching, non-empty branch lists".into(),
        ));
    }
    if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Validation(
            "branch noise levels must be positive".into(),
        ));
    }
    let gain: f64 = h
        .iter()
        .zip(sigma)
        .map(|(g, s)| g.norm_sqr() / (s * s))
        .sum();
    if gain == 0.0 {
        return Err(Error::DegenerateCombining);
    }
    let num: Complex64 = y
        .iter()
        .zip(h)
        .zip(sigma)
        .map(|((v, g), s)| g.conj() * v / (s * s))
        .sum();
    Ok(Combined {
        estimate: num / gain,
        snr: gain * signal_power,
    })
}

/// Monte-Carlo post-combining SNR with `branches` equal-gain, equal-noise
/// receivers: unit QPSK symbols, unit-magnitude gains with random phases,
/// complex noise of variance `1/snr_single`. Returns `P/E|ŝ − s|²`.
pub fn simo_measured_snr(
    branches: usize,
    snr_single: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if branches == 0 || trials == 0 || !(snr_single > 0.0) {
        return Err(Error::Validation(
            "need branches ≥ 1, trials ≥ 1 and a positive SNR".into(),
        ));
    }
    let sigma = (1.0 / snr_single).sqrt();
    const CHUNK: usize = 1024;
    let chunks = trials.div_ceil(CHUNK);
    let errors: Vec<Result<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(trials - c * CHUNK);
            let mut acc = 0.0;
            let sig = vec![sigma; branches];
            for _ in 0..n {
                let s = crate::transduction::psk_point(
                    rng.random_range(0..4),
                    4,
                    std::f64::consts::FRAC_PI_4,
                );
                let h: Vec<Complex64> = (0..branches)
                    .map(|_| {
                        Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
                    })
                    .collect();
                let y: Vec<Complex64> = h
                    .iter()
                    .map(|g| g * s + complex_gaussian(&mut rng, sigma * sigma))
                    .collect();
                let out = simo_combine(&y, &h, &sig, 1.0)?;
                acc += (out.estimate - s).norm_sqr();
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for e in errors {
        total += e?;
    }
    Ok(trials as f64 / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transduction::psk_point;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qpsk(m: usize, seed: u64) -> DVector<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(m, |_, _| psk_point(rng.random_range(0..4), 4, FRAC_PI_4))
    }

    #[test]
    fn observe_basics() {
        let ch = MimoChannel::random(4, 2, 3.0, 1).unwrap();
        let y0 = magnitude_observe(&ch, &DVector::zeros(2), 0.0, 0).unwrap();
        for k in 0..4 {
            assert_eq!(y0[k], ch.reference()[k].norm());
        }
        let one =
            MimoChannel::new(DMatrix::from_element(1, 1, c(1.0, 0.0)), DVector::zeros(1)).unwrap();
        let y = magnitude_observe(&one, &DVector::from_element(1, c(0.0, -2.0)), 0.0, 0).unwrap();
        assert_eq!(y[0], 2.0);
        let noisy = magnitude_observe(&ch, &qpsk(2, 3), 5.0, 9).unwrap();
        assert!(noisy.iter().all(|v| *v >= 0.0));
        assert_eq!(noisy, magnitude_observe(&ch, &qpsk(2, 3), 5.0, 9).unwrap());
        assert!(magnitude_observe(&ch, &qpsk(3, 3), 0.0, 0).is_err());
    }

    #[test]
    fn gs_recovers_noiseless_qpsk() {
        let ch = MimoChannel::random(16, 4, 3.0, 42).unwrap();
        let x = qpsk(4, 7);
        let y = magnitude_observe(&ch, &x, 0.0, 0).unwrap();
        let out = gs_detect(&y, &ch, &DetectOptions::default()).unwrap();
        assert!(nmse(&out.x, &x) <= 1e-6, "nmse {}", nmse(&out.x, &x));
        assert!(out
            .residuals
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12));
    }

    #[test]
    fn gs_fixed_point_at_zero() {
        let ch = MimoChannel::random(8, 2, 3.0, 5).unwrap();
        let y = ch.reference().map(|v| v.norm());
        let out = gs_detect(&y, &ch, &DetectOptions::default()).unwrap();
        assert!(out.x.norm() < 1e-12);
        assert!(out.converged);
    }

    #[test]
    fn gs_rank_error() {
        let h =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        let ch = MimoChannel::new(h, DVector::from_element(2, c(1.0, 0.0))).unwrap();
        let r = gs_detect(
            &DVector::from_element(2, 1.0),
            &ch,
            &DetectOptions::default(),
        );
        assert!(matches!(r, Err(Error::Rank { users: 2, .. })));
    }

    #[test]
    fn gs_global_phase_without_reference() {
        let base = MimoChannel::random(16, 2, 0.0, 11).unwrap();
        let x = qpsk(2, 2);
        let y = magnitude_observe(&base, &x, 0.0, 0).unwrap();
        let opts = DetectOptions {
            max_iter: 2000,
            init: DetectInit::Random(3),
            ..DetectOptions::default()
        };
        let out = gs_detect(&y, &base, &opts).unwrap();
        assert!(
            nmse_up_to_phase(&out.x, &x) < 1e-4,
            "{}",
            nmse_up_to_phase(&out.x, &x)
        );
    }

    #[test]
    fn mrc_algebra() {
        let one = simo_combine(&[c(2.0, 1.0)], &[c(0.5, 0.0)], &[0.1], 1.0).unwrap();
        assert!((one.estimate - c(4.0, 2.0)).norm() < 1e-12);
        assert!((one.snr - 25.0).abs() < 1e-9);
        let k = 6;
        let many = simo_combine(
            &vec![c(1.0, 0.0); k],
            &vec![c(0.5, 0.0); k],
            &vec![0.1; k],
            1.0,
        )
        .unwrap();
        assert!((many.snr - k as f64 * one.snr).abs() < 1e-9);
        assert!(matches!(
            simo_combine(&[c(1.0, 0.0)], &[c(0.0, 0.0)], &[1.0], 1.0),
            Err(Error::DegenerateCombining)
        ));
    }

    #[test]
    fn measured_snr_tracks_branches() {
        let s1 = simo_measured_snr(1, 10.0, 4000, 1).unwrap();
        let s4 = simo_measured_snr(4, 10.0, 4000, 1).unwrap();
        assert!((s1 / 10.0 - 1.0).abs() < 0.1, "{s1}");
        assert!((s4 / s1 - 4.0).abs() < 0.4, "{s4} {s1}");
    }
}
