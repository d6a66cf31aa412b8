//! Time evolution of walk states, return-amplitude series at the origin, and
//! spectral extraction of the dominant oscillation period.

use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::network::Propagator;

/// Norm tolerance for states handed to the evolution routines.
pub const NORM_TOL: f64 = 1e-10;

/// Prefactor `c` of the default observation window `T = ⌈c·N^x⌉`.
pub const WINDOW_PREFACTOR: f64 = 32.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("state dimension {state} does not match propagator dimension {prop}")]
    DimensionMismatch { state: usize, prop: usize },
    #[error("initial state is not normalized: ‖ψ‖ = {0:.12}")]
    NotNormalized(f64),
    #[error("origin site {site} out of range for {num_sites} sites")]
    OriginOutOfRange { site: usize, num_sites: usize },
    #[error("observable component {component} exceeds coin dimension {coin_dim}")]
    InvalidComponent { component: usize, coin_dim: usize },
    #[error("series of length {len} too short for spectral analysis (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },
    #[error("no spectral peak above the noise floor: {0}")]
    NoPeriod(String),
    #[error("malformed series CSV at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub amplitudes: Vec<Complex64>,
    pub coin_dim: usize,
    pub t: u64,
}

impl WalkState {
    /// Wraps amplitudes at `t = 0` after checking `‖ψ‖ = 1`.
    pub fn new(amplitudes: Vec<Complex64>, coin_dim: usize) -> Result<Self, EvolutionError> {
        let s = Self { amplitudes, coin_dim, t: 0 };
        let n = s.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(EvolutionError::NotNormalized(n));
        }
        Ok(s)
    }

    /// State concentrated on `site` with the normalized coin spinor `spinor`.
    pub fn localized(num_sites: usize, site: usize, spinor: &[Complex64]) -> Result<Self, EvolutionError> {
        if site >= num_sites {
            return Err(EvolutionError::OriginOutOfRange { site, num_sites });
        }
        let d = spinor.len();
        let mut amps = vec![Complex64::new(0.0, 0.0); num_sites * d];
        amps[site * d..(site + 1) * d].copy_from_slice(spinor);
        Self::new(amps, d)
    }

    pub fn num_sites(&self) -> usize {
        self.amplitudes.len() / self.coin_dim
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn spinor(&self, site: usize) -> &[Complex64] {
        &self.amplitudes[site * self.coin_dim..(site + 1) * self.coin_dim]
    }

    /// `ρ(x, t) = Σ_c |ψ_{x,t,c}|²`.
    pub fn site_probability(&self, site: usize) -> f64 {
        self.spinor(site).iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Uniform coin state `(1, …, 1)/√d`.
pub fn uniform_spinor(d: usize) -> Vec<Complex64> {
    vec![Complex64::new(1.0 / (d as f64).sqrt(), 0.0); d]
}

fn check_dims(prop: &Propagator, psi: &WalkState) -> Result<(), EvolutionError> {
    if psi.amplitudes.len() != prop.dim() || psi.coin_dim != prop.coin_dim {
        return Err(EvolutionError::DimensionMismatch { state: psi.amplitudes.len(), prop: prop.dim() });
    }
    Ok(())
}

/// Trajectory `ψ_0, …, ψ_T` with `ψ_{t+1} = 𝒰ψ_t`.
pub fn evolve(prop: &Propagator, psi0: &WalkState, steps: usize) -> Result<Vec<WalkState>, EvolutionError> {
    check_dims(prop, psi0)?;
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(psi0.clone());
    for _ in 0..steps {
        let last = traj.last().expect("trajectory is never empty");
        let next = WalkState { amplitudes: prop.apply(&last.amplitudes), coin_dim: last.coin_dim, t: last.t + 1 };
        traj.push(next);
    }
    Ok(traj)
}

/// Advances `steps` times without storing intermediate states; `adjoint`
/// evolves with `𝒰†` instead.
pub fn evolve_final(
    prop: &Propagator,
    psi0: &WalkState,
    steps: usize,
    adjoint: bool,
) -> Result<WalkState, EvolutionError> {
    check_dims(prop, psi0)?;
    let mut cur = psi0.amplitudes.clone();
    let mut next = vec![Complex64::new(0.0, 0.0); cur.len()];
    for _ in 0..steps {
        if adjoint {
            prop.apply_adjoint_into(&cur, &mut next);
        } else {
            prop.apply_into(&cur, &mut next);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let t = if adjoint { psi0.t.saturating_sub(steps as u64) } else { psi0.t + steps as u64 };
    Ok(WalkState { amplitudes: cur, coin_dim: psi0.coin_dim, t })
}

/// Scalar recorded at the origin each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `⟨ψ_IC | ψ_{0,t}⟩`.
    Projection,
    /// A single spinor component `ψ_{0,t,c}`.
    Component(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub times: Vec<u64>,
    pub overlap: Vec<Complex64>,
    pub probability: Vec<f64>,
}

/// Launches `spinor` from `origin` and records the origin observable and
/// return probability for `t = 0..=steps`.
pub fn return_series(
    prop: &Propagator,
    origin: usize,
    spinor: &[Complex64],
    steps: usize,
    observable: Observable,
) -> Result<ReturnSeries, EvolutionError> {
    if let Observable::Component(c) = observable {
        if c >= prop.coin_dim {
            return Err(EvolutionError::InvalidComponent { component: c, coin_dim: prop.coin_dim });
        }
    }
    let psi0 = WalkState::localized(prop.num_sites, origin, spinor)?;
    check_dims(prop, &psi0)?;
    let d = prop.coin_dim;
    let mut out = ReturnSeries {
        times: Vec::with_capacity(steps + 1),
        overlap: Vec::with_capacity(steps + 1),
        probability: Vec::with_capacity(steps + 1),
    };
    let mut cur = psi0.amplitudes;
    let mut next = vec![Complex64::new(0.0, 0.0); cur.len()];
    for t in 0..=steps {
        let at0 = &cur[origin * d..(origin + 1) * d];
        let obs = match observable {
            Observable::Projection => spinor.iter().zip(at0).map(|(a, b)| a.conj() * b).sum(),
            Observable::Component(c) => at0[c],
        };
        out.times.push(t as u64);
        out.overlap.push(obs);
        out.probability.push(at0.iter().map(|a| a.norm_sqr()).sum());
        if t < steps {
            prop.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    Ok(out)
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn real_overlap(&self) -> Vec<f64> {
        self.overlap.iter().map(|c| c.re).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,re_overlap,im_overlap,prob\n");
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.overlap[i].re, self.overlap[i].im, self.probability[i]
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, EvolutionError> {
        let mut out = ReturnSeries { times: vec![], overlap: vec![], probability: vec![] };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "t,re_overlap,im_overlap,prob" => {}
            _ => return Err(EvolutionError::Parse { line: 1, reason: "missing header".into() }),
        }
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || EvolutionError::Parse { line: i + 1, reason: "expected four numeric fields".into() };
            if f.len() != 4 {
                return Err(bad());
            }
            let t = f[0].trim().parse::<u64>().map_err(|_| bad())?;
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            out.times.push(t);
            out.overlap.push(Complex64::new(num(f[1])?, num(f[2])?));
            out.probability.push(num(f[3])?);
        }
        Ok(out)
    }
}

/// How the dominant spectral line is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakSelection {
    /// Highest peak of the power spectrum.
    Strongest,
    /// Lowest-frequency local maximum whose power exceeds
    /// `min_peak_to_floor` times the median spectral power.
    Slowest { min_peak_to_floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodOptions {
    pub selection: PeakSelection,
    /// Lowest FFT bin considered; 4 enforces a window of at least four periods.
    pub min_bin: usize,
    /// Required peak power over median power for [`PeakSelection::Strongest`].
    pub min_strength: f64,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        Self { selection: PeakSelection::Strongest, min_bin: 4, min_strength: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodFit {
    pub period: f64,
    /// Angular frequency, `2π/period`.
    pub frequency: f64,
    /// Interpolated bin position of the peak.
    pub bin: f64,
    /// Peak power divided by the median spectral power.
    pub peak_to_floor: f64,
    pub samples: usize,
}

/// Dominant period of the real part of the origin observable.
pub fn fit_period(series: &ReturnSeries, opts: &PeriodOptions) -> Result<PeriodFit, EvolutionError> {
    fit_period_signal(&series.real_overlap(), opts)
}

/// Dominant period of a real signal: mean removal, Hann window, FFT, and a
/// parabola through the log-power at the peak and its two neighbours.
pub fn fit_period_signal(signal: &[f64], opts: &PeriodOptions) -> Result<PeriodFit, EvolutionError> {
    let n = signal.len();
    let min_len = 4 * opts.min_bin.max(2) + 4;
    if n < min_len {
        return Err(EvolutionError::SeriesTooShort { len: n, min: min_len });
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = signal
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            Complex64::new((x - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let power: Vec<f64> = buf[..=half].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    let scale = signal.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    if !(total > 1e-24 * scale * n as f64) {
        return Err(EvolutionError::NoPeriod("signal has no fluctuating component".into()));
    }
    let mut sorted: Vec<f64> = power[1..half].to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let floor = sorted[sorted.len() / 2].max(f64::MIN_POSITIVE);

    let lo = opts.min_bin.max(1);
    let hi = half.saturating_sub(1);
    if lo >= hi {
        return Err(EvolutionError::SeriesTooShort { len: n, min: min_len });
    }
    let is_local_max = |k: usize| power[k] >= power[k - 1] && power[k] >= power[k + 1];
    let bin = match opts.selection {
        PeakSelection::Strongest => {
            let k = (lo..=hi)
                .max_by(|&a, &b| power[a].total_cmp(&power[b]))
                .expect("non-empty bin range");
            if power[k] / floor < opts.min_strength {
                return Err(EvolutionError::NoPeriod(format!(
                    "strongest peak only {:.2} × median power",
                    power[k] / floor
                )));
            }
            k
        }
        PeakSelection::Slowest { min_peak_to_floor } => (lo..=hi)
            .find(|&k| is_local_max(k) && power[k] > min_peak_to_floor * floor)
            .ok_or_else(|| {
                EvolutionError::NoPeriod(format!("no local maximum above {min_peak_to_floor} × median power"))
            })?,
    };
    let (pm, p0, pp) = (power[bin - 1].ln(), power[bin].ln(), power[bin + 1].ln());
    let denom = pm - 2.0 * p0 + pp;
    let delta = if denom.is_finite() && denom < 0.0 { (0.5 * (pm - pp) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let pos = bin as f64 + delta;
    let period = n as f64 / pos;
    Ok(PeriodFit {
        period,
        frequency: 2.0 * std::f64::consts::PI / period,
        bin: pos,
        peak_to_floor: power[bin] / floor,
        samples: n,
    })
}

/// Observation window `⌈c·N^exponent⌉`.
pub fn period_window(num_sites: usize, exponent: f64, prefactor: f64) -> usize {
    (prefactor * (num_sites as f64).powf(exponent)).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::raw_hopping;
    use crate::network::{assemble_propagator, build_dsg, build_loop};
    use crate::Family;
    use std::f64::consts::{FRAC_PI_4, PI};

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn dsg_prop(g: u32) -> Propagator {
        assemble_propagator(&build_dsg(g).unwrap(), &raw_hopping(Family::Dsg, ONE, None).unwrap()).unwrap()
    }

    #[test]
    fn zero_steps_is_identity() {
        let prop = dsg_prop(2);
        let psi = WalkState::localized(9, 0, &uniform_spinor(3)).unwrap();
        let traj = evolve(&prop, &psi, 0).unwrap();
        assert_eq!(traj.len(), 1);
        assert!((traj[0].site_probability(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hadamard_return_after_two_steps() {
        let prop = assemble_propagator(
            &build_loop(64).unwrap(),
            &raw_hopping(Family::Line, ONE, Some(FRAC_PI_4)).unwrap(),
        )
        .unwrap();
        let s = return_series(&prop, 0, &[ONE, Complex64::new(0.0, 0.0)], 2, Observable::Projection).unwrap();
        assert!((s.probability[0] - 1.0).abs() < 1e-15);
        assert!((s.probability[2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn norm_conserved_on_dsg() {
        let prop = dsg_prop(3);
        let psi = WalkState::localized(27, 5, &uniform_spinor(3)).unwrap();
        let end = evolve_final(&prop, &psi, 1000, false).unwrap();
        assert!((end.norm() - 1.0).abs() < 1e-10);
        assert_eq!(end.t, 1000);
    }

    #[test]
    fn adjoint_reverses_evolution() {
        let prop = dsg_prop(3);
        let psi = WalkState::localized(27, 0, &uniform_spinor(3)).unwrap();
        let fwd = evolve_final(&prop, &psi, 300, false).unwrap();
        let back = evolve_final(&prop, &fwd, 300, true).unwrap();
        let err = back.amplitudes.iter().zip(&psi.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        assert_eq!(back.t, 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let prop = dsg_prop(2);
        let unnorm = vec![ONE; 27];
        assert!(matches!(WalkState::new(unnorm, 3), Err(EvolutionError::NotNormalized(_))));
        let small = WalkState::localized(3, 0, &uniform_spinor(3)).unwrap();
        assert!(matches!(evolve(&prop, &small, 1), Err(EvolutionError::DimensionMismatch { .. })));
        assert!(return_series(&prop, 0, &uniform_spinor(3), 4, Observable::Component(3)).is_err());
    }

    #[test]
    fn synthetic_cosine_period() {
        let sig: Vec<f64> = (0..1024).map(|t| (2.0 * PI * t as f64 / 64.0).cos()).collect();
        let fit = fit_period_signal(&sig, &PeriodOptions::default()).unwrap();
        assert!((fit.period - 64.0).abs() < 0.5, "{}", fit.period);
        let slow = PeriodOptions { selection: PeakSelection::Slowest { min_peak_to_floor: 10.0 }, ..Default::default() };
        assert!((fit_period_signal(&sig, &slow).unwrap().period - 64.0).abs() < 0.5);
    }

    #[test]
    fn constant_signal_has_no_period() {
        let sig = vec![0.7; 512];
        assert!(matches!(fit_period_signal(&sig, &PeriodOptions::default()), Err(EvolutionError::NoPeriod(_))));
    }

    #[test]
    fn slowest_picks_lower_line() {
        // weak slow line plus strong fast line
        let sig: Vec<f64> = (0..4096)
            .map(|t| {
                let t = t as f64;
                0.3 * (2.0 * PI * t / 200.0).cos() + (2.0 * PI * t / 9.0).cos()
            })
            .collect();
        let strongest = fit_period_signal(&sig, &PeriodOptions::default()).unwrap();
        assert!((strongest.period - 9.0).abs() < 0.5);
        let slow = PeriodOptions { selection: PeakSelection::Slowest { min_peak_to_floor: 10.0 }, ..Default::default() };
        assert!((fit_period_signal(&sig, &slow).unwrap().period - 200.0).abs() < 2.0);
    }

    #[test]
    fn csv_roundtrip() {
        let prop = dsg_prop(2);
        let s = return_series(&prop, 0, &uniform_spinor(3), 20, Observable::Projection).unwrap();
        let back = ReturnSeries::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn window_formula() {
        assert_eq!(period_window(9, 0.5, 32.0), 96);
    }
}
