//! Ground-truth SIMO Wiener system simulation: source generation, FIR
//! filtering, memoryless monotone nonlinearities and additive Gaussian
//! noise, plus CSV import/export of the observed branch outputs.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Benchmark impulse responses used throughout the experiments, one row per
/// channel (values drawn once from N(0,1) and fixed).
pub const BENCH_CHANNELS: [[f64; 5]; 5] = [
    [0.4115, 0.4165, 0.2249, -0.0233, -2.1971],
    [-0.5734, 0.1021, -0.1259, -0.4176, 0.6657],
    [1.4255, 0.6457, -0.9509, -0.1657, -0.2512],
    [0.2846, -0.3880, 0.5373, 0.7983, 0.4093],
    [-0.8769, -0.3056, -0.1160, 0.8130, -0.8007],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Zero-mean unit-variance white Gaussian samples.
    GaussianIid,
    /// White Gaussian samples shaped by the 20-tap low-pass filter of
    /// [`design_lowpass`].
    Colored,
    /// Uniform samples on {-1, +1}.
    Binary,
}

#[derive(Debug, Clone)]
pub struct SourceSignal {
    pub samples: Vec<f64>,
    pub kind: SourceKind,
}

impl SourceSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// An FIR channel `h[0..L-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirChannel {
    pub taps: Vec<f64>,
}

impl FirChannel {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Empty("channel taps"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("channel taps"));
        }
        if taps.iter().all(|&t| t == 0.0) {
            return Err(Error::Degenerate("all channel taps are zero"));
        }
        Ok(Self { taps })
    }

    pub fn order(&self) -> usize {
        self.taps.len()
    }
}

/// Returns one of the five built-in benchmark channels (`id` in 1..=5).
pub fn bench_channel(id: usize) -> Result<FirChannel> {
    if !(1..=5).contains(&id) {
        return Err(Error::InvalidConfig(format!(
            "channel id must be in 1..=5, got {id}"
        )));
    }
    FirChannel::new(BENCH_CHANNELS[id - 1].to_vec())
}

/// Memoryless monotone nonlinearity applied at a branch output.
#[derive(Debug, Clone, Copy)]
pub enum Nonlinearity {
    /// `tanh(0.8 y) + 0.1 y` — a smooth saturation (increasing).
    SmoothSaturation,
    /// `-0.1 sin(3 y) - 0.33 y` — a stairway shape (decreasing).
    Stairway,
    /// `1.5 y - 2.5 (1 - e^-y)/(1 + e^-y)` — a smooth deadzone (increasing).
    SmoothDeadzone,
    Identity,
    Custom(fn(f64) -> f64),
}

impl Nonlinearity {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Nonlinearity::SmoothSaturation => (0.8 * y).tanh() + 0.1 * y,
            Nonlinearity::Stairway => -0.1 * (3.0 * y).sin() - 0.33 * y,
            Nonlinearity::SmoothDeadzone => 1.5 * y - 2.5 * (1.0 - (-y).exp()) / (1.0 + (-y).exp()),
            Nonlinearity::Identity => y,
            Nonlinearity::Custom(f) => f(y),
        }
    }

    /// Numerically inverts the (monotone) forward map by bisection.
    ///
    /// The bracket is expanded geometrically until it straddles `x`, then
    /// bisected to an interval width of 1e-12.
    pub fn invert(&self, x: f64) -> f64 {
        if let Nonlinearity::Identity = self {
            return x;
        }
        let increasing = self.eval(1.0) > self.eval(-1.0);
        let mut lo = -1.0f64;
        let mut hi = 1.0f64;
        let target = |y: f64| {
            if increasing {
                self.eval(y) - x
            } else {
                x - self.eval(y)
            }
        };
        let mut guard = 0;
        while target(lo) > 0.0 && guard < 200 {
            lo *= 2.0;
            guard += 1;
        }
        let mut guard = 0;
        while target(hi) < 0.0 && guard < 200 {
            hi *= 2.0;
            guard += 1;
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if target(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Noise applied to each branch output.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    None,
    /// Per-branch noise standard deviation derived from the requested SNR,
    /// referenced to the noiseless output power of that branch.
    SnrDb(f64),
    /// Explicit per-branch standard deviations.
    StdPerBranch(Vec<f64>),
}

/// Ground-truth system: P branches of (FIR channel, nonlinearity) plus an
/// output noise specification. Channels are zero-padded to a common length.
#[derive(Debug, Clone)]
pub struct WienerSimoSystem {
    branches: Vec<(FirChannel, Nonlinearity)>,
    pub noise: NoiseSpec,
}

impl WienerSimoSystem {
    pub fn new(branches: Vec<(FirChannel, Nonlinearity)>, noise: NoiseSpec) -> Result<Self> {
        if branches.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 branches, got {}",
                branches.len()
            )));
        }
        let order = branches.iter().map(|(h, _)| h.order()).max().unwrap();
        let branches: Vec<_> = branches
            .into_iter()
            .map(|(mut h, f)| {
                h.taps.resize(order, 0.0);
                (h, f)
            })
            .collect();
        // No two channels may be proportional; proportional branches carry
        // no diversity and make the system unidentifiable.
        for i in 0..branches.len() {
            for j in (i + 1)..branches.len() {
                let a = &branches[i].0.taps;
                let b = &branches[j].0.taps;
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if dot.abs() >= na * nb * (1.0 - 1e-10) {
                    return Err(Error::Degenerate("proportional channels"));
                }
            }
        }
        if let NoiseSpec::StdPerBranch(stds) = &noise {
            if stds.len() != branches.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} noise levels for {} branches",
                    stds.len(),
                    branches.len()
                )));
            }
        }
        Ok(Self { branches, noise })
    }

    /// Convenience constructor from benchmark channel ids and nonlinearities.
    pub fn from_bench(ids: &[usize], nls: &[Nonlinearity], noise: NoiseSpec) -> Result<Self> {
        if ids.len() != nls.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} channel ids vs {} nonlinearities",
                ids.len(),
                nls.len()
            )));
        }
        let branches = ids
            .iter()
            .zip(nls)
            .map(|(&id, &nl)| Ok((bench_channel(id)?, nl)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(branches, noise)
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn order(&self) -> usize {
        self.branches[0].0.order()
    }

    pub fn channel(&self, i: usize) -> &FirChannel {
        &self.branches[i].0
    }

    pub fn nonlinearity(&self, i: usize) -> &Nonlinearity {
        &self.branches[i].1
    }
}

/// Output of [`simulate`]: observed branch outputs `x_i`, the noiseless
/// intermediate signals `y_i` (for testing and oracle use only), and the
/// noise standard deviation actually applied per branch.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub observed: Vec<Vec<f64>>,
    pub intermediate: Vec<Vec<f64>>,
    pub noise_std: Vec<f64>,
}

/// Generates a source signal of length `n`, deterministically from `seed`.
pub fn generate_source(kind: SourceKind, n: usize, seed: u64) -> Result<SourceSignal> {
    if n == 0 {
        return Err(Error::Empty("source length"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let samples = match kind {
        SourceKind::GaussianIid => (0..n)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect::<Vec<f64>>(),
        SourceKind::Binary => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if z >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect(),
        SourceKind::Colored => {
            let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            convolve_zero_prehistory(&design_lowpass().taps, &white)
        }
    };
    Ok(SourceSignal { samples, kind })
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Designs the fixed 20-tap Kaiser-windowed low-pass filter used to color
/// source signals: stopband edge at 0.7*pi rad/sample, 60 dB stopband
/// attenuation, unit DC gain, linear phase.
pub fn design_lowpass() -> FirChannel {
    const NT: usize = 20;
    const ATTEN: f64 = 60.0;
    let beta = 0.1102 * (ATTEN - 8.7);
    // Kaiser transition width for 20 taps at 60 dB; the 6-dB point sits
    // half a transition below the 0.7*pi stopband edge.
    let transition = (ATTEN - 7.95) / (2.285 * (NT as f64 - 1.0));
    let cutoff = 0.7 * std::f64::consts::PI - transition / 2.0;

    let half: Vec<f64> = (0..NT / 2)
        .map(|k| {
            let t = k as f64 - (NT as f64 - 1.0) / 2.0; // -9.5 .. -0.5
            let ideal = (cutoff * t).sin() / (std::f64::consts::PI * t);
            let w = bessel_i0(beta * (1.0 - (t / 9.5).powi(2)).max(0.0).sqrt()) / bessel_i0(beta);
            ideal * w
        })
        .collect();
    let mut taps = vec![0.0; NT];
    for k in 0..NT / 2 {
        taps[k] = half[k];
        taps[NT - 1 - k] = half[k]; // exact linear-phase symmetry
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    FirChannel { taps }
}

/// Convolution with zero prehistory: `out[n] = sum_l taps[l] * s[n-l]`
/// with `s[k] = 0` for `k < 0`; output has the same length as `s`.
pub fn convolve_zero_prehistory(taps: &[f64], s: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut out = vec![0.0; n];
    for (l, &h) in taps.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        for k in 0..n.saturating_sub(l) {
            out[k + l] += h * s[k];
        }
    }
    out
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Runs the source through every branch of the system.
///
/// `y_i[n] = sum_l h_i[l] s[n-l]` with zero prehistory, then
/// `x_i[n] = f_i(y_i[n]) + std_i w_i[n]` with independent standard normal
/// `w_i` drawn deterministically from `seed`.
pub fn simulate(
    system: &WienerSimoSystem,
    source: &SourceSignal,
    seed: u64,
) -> Result<SimulationOutput> {
    let n = source.len();
    let order = system.order();
    if n < order {
        return Err(Error::TooShort {
            need: order,
            got: n,
        });
    }
    let p = system.branch_count();
    let mut intermediate = Vec::with_capacity(p);
    let mut clean = Vec::with_capacity(p);
    for i in 0..p {
        let y = convolve_zero_prehistory(&system.channel(i).taps, &source.samples);
        let x: Vec<f64> = y.iter().map(|&v| system.nonlinearity(i).eval(v)).collect();
        intermediate.push(y);
        clean.push(x);
    }
    let noise_std: Vec<f64> = match &system.noise {
        NoiseSpec::None => vec![0.0; p],
        NoiseSpec::SnrDb(snr) => {
            if snr.is_infinite() {
                vec![0.0; p]
            } else {
                clean
                    .iter()
                    .map(|x| rms(x) * 10f64.powf(-snr / 20.0))
                    .collect()
            }
        }
        NoiseSpec::StdPerBranch(stds) => stds.clone(),
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let observed = clean
        .iter()
        .zip(&noise_std)
        .map(|(x, &std)| {
            x.iter()
                .map(|&v| {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    v + std * w
                })
                .collect()
        })
        .collect();
    Ok(SimulationOutput {
        observed,
        intermediate,
        noise_std,
    })
}

/// Writes branch outputs as CSV: header `x1,...,xP`, one column per branch.
pub fn write_signals_csv<P: AsRef<Path>>(path: P, outputs: &[Vec<f64>]) -> Result<()> {
    if outputs.is_empty() {
        return Err(Error::Empty("outputs"));
    }
    let n = outputs[0].len();
    if outputs.iter().any(|o| o.len() != n) {
        return Err(Error::DimensionMismatch(
            "branch outputs have different lengths".into(),
        ));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=outputs.len()).map(|i| format!("x{i}")).collect();
    writeln!(f, "{}", header.join(","))?;
    for row in 0..n {
        let line: Vec<String> = outputs.iter().map(|o| format!("{}", o[row])).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads branch outputs written by [`write_signals_csv`].
pub fn read_signals_csv<P: AsRef<Path>>(path: P) -> Result<Vec<Vec<f64>>> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or(Error::Parse("empty signal file".into()))??;
    let p = header.split(',').count();
    let mut outputs = vec![Vec::new(); p];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, got {}",
                lineno + 2,
                p,
                fields.len()
            )));
        }
        for (i, field) in fields.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            outputs[i].push(v);
        }
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_channels_match_reference_digits() {
        let h1 = bench_channel(1).unwrap();
        assert_eq!(h1.taps, vec![0.4115, 0.4165, 0.2249, -0.0233, -2.1971]);
        let h5 = bench_channel(5).unwrap();
        assert_eq!(h5.taps, vec![-0.8769, -0.3056, -0.1160, 0.8130, -0.8007]);
        assert!(bench_channel(0).is_err());
        assert!(bench_channel(6).is_err());
    }

    #[test]
    fn binary_source_is_in_range() {
        let s = generate_source(SourceKind::Binary, 4, 1).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.samples.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn gaussian_source_statistics() {
        let s = generate_source(SourceKind::GaussianIid, 10_000, 7).unwrap();
        let mean = s.samples.iter().sum::<f64>() / 10_000.0;
        let var = s.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9_999.0;
        assert!(mean.abs() < 4.0 / 100.0, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn zero_length_source_errors() {
        assert!(generate_source(SourceKind::GaussianIid, 0, 1).is_err());
    }

    // Hann-windowed periodogram; a rectangular window leaks too much to
    // resolve a 40 dB stopband.
    fn spectrum_db(signal: &[f64], omega: f64) -> f64 {
        let n = signal.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, &v) in signal.iter().enumerate() {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1.0)).cos();
            re += w * v * (omega * k as f64).cos();
            im -= w * v * (omega * k as f64).sin();
        }
        10.0 * ((re * re + im * im) / n).log10()
    }

    #[test]
    fn colored_source_has_attenuated_stopband() {
        let s = generate_source(SourceKind::Colored, 256, 3).unwrap();
        let pi = std::f64::consts::PI;
        // Passband average over the clearly flat region.
        let pass: Vec<f64> = (1..=30)
            .map(|k| spectrum_db(&s.samples, 0.01 * pi * k as f64))
            .collect();
        let pass_avg = pass.iter().sum::<f64>() / pass.len() as f64;
        for k in 0..=29 {
            let omega = (0.70 + 0.01 * k as f64) * pi;
            let level = spectrum_db(&s.samples, omega);
            assert!(
                level <= pass_avg - 40.0,
                "periodogram at {:.2}pi is {:.1} dB vs passband {:.1} dB",
                omega / pi,
                level,
                pass_avg
            );
        }
    }

    #[test]
    fn lowpass_dc_gain_and_symmetry() {
        let h = design_lowpass().taps;
        assert_eq!(h.len(), 20);
        let dc: f64 = h.iter().sum();
        assert!((dc - 1.0).abs() < 0.01);
        for k in 0..10 {
            assert!((h[k] - h[19 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn lowpass_deep_stopband_at_reference_frequency() {
        // DTFT oracle: evaluate the frequency response of the designed taps.
        let h = design_lowpass().taps;
        let pi = std::f64::consts::PI;
        let mag = |omega: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &t) in h.iter().enumerate() {
                re += t * (omega * k as f64).cos();
                im -= t * (omega * k as f64).sin();
            }
            (re * re + im * im).sqrt()
        };
        let dc = mag(0.0);
        assert!(mag(0.9 * pi) <= dc * 10f64.powf(-60.0 / 20.0) * 10.0);
        // The whole declared stopband must actually attenuate.
        for k in 0..=30 {
            let omega = (0.70 + 0.01 * k as f64) * pi;
            assert!(mag(omega) <= dc * 10f64.powf(-50.0 / 20.0));
        }
    }

    #[test]
    fn simulate_passthrough() {
        let sys = WienerSimoSystem::new(
            vec![
                (
                    FirChannel::new(vec![1.0, 0.0]).unwrap(),
                    Nonlinearity::Identity,
                ),
                (
                    FirChannel::new(vec![0.0, 1.0]).unwrap(),
                    Nonlinearity::Identity,
                ),
            ],
            NoiseSpec::None,
        )
        .unwrap();
        let src = SourceSignal {
            samples: vec![1.0, 2.0, 3.0],
            kind: SourceKind::GaussianIid,
        };
        let out = simulate(&sys, &src, 0).unwrap();
        assert_eq!(out.observed[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(out.observed[1], vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn simulate_hand_convolution_with_zero_prehistory() {
        let y = convolve_zero_prehistory(&[1.0, 1.0], &[1.0, 1.0, 1.0]);
        assert_eq!(y, vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn simulate_matches_direct_convolution_oracle() {
        let src = generate_source(SourceKind::GaussianIid, 64, 5).unwrap();
        let sys = WienerSimoSystem::from_bench(
            &[1, 2],
            &[Nonlinearity::Identity, Nonlinearity::Identity],
            NoiseSpec::None,
        )
        .unwrap();
        let out = simulate(&sys, &src, 9).unwrap();
        for i in 0..2 {
            let taps = &sys.channel(i).taps;
            for n in 0..64 {
                let mut acc = 0.0;
                for (l, &h) in taps.iter().enumerate() {
                    if n >= l {
                        acc += h * src.samples[n - l];
                    }
                }
                assert_eq!(out.observed[i][n], acc);
            }
        }
    }

    #[test]
    fn nonlinearities_vanish_at_zero() {
        for nl in [
            Nonlinearity::SmoothSaturation,
            Nonlinearity::Stairway,
            Nonlinearity::SmoothDeadzone,
        ] {
            assert_eq!(nl.eval(0.0), 0.0);
        }
    }

    #[test]
    fn smooth_saturation_at_one() {
        let v = Nonlinearity::SmoothSaturation.eval(1.0);
        assert!((v - 0.7640367702678490).abs() < 1e-15);
    }

    #[test]
    fn stairway_is_strictly_decreasing() {
        // Derivative bound: -0.3 cos(3y) - 0.33 <= -0.03 everywhere.
        let nl = Nonlinearity::Stairway;
        let mut prev = nl.eval(-5.0);
        for k in 1..=1000 {
            let y = -5.0 + 10.0 * k as f64 / 1000.0;
            let v = nl.eval(y);
            assert!(v < prev, "not decreasing at y = {y}");
            prev = v;
        }
    }

    #[test]
    fn builtin_nonlinearities_are_strictly_monotone_on_grid() {
        for (nl, increasing) in [
            (Nonlinearity::SmoothSaturation, true),
            (Nonlinearity::Stairway, false),
            (Nonlinearity::SmoothDeadzone, true),
        ] {
            let mut prev = nl.eval(-5.0);
            for k in 1..=1000 {
                let y = -5.0 + 10.0 * k as f64 / 1000.0;
                let v = nl.eval(y);
                if increasing {
                    assert!(v > prev);
                } else {
                    assert!(v < prev);
                }
                prev = v;
            }
        }
    }

    #[test]
    fn inverse_roundtrip() {
        for nl in [
            Nonlinearity::SmoothSaturation,
            Nonlinearity::Stairway,
            Nonlinearity::SmoothDeadzone,
        ] {
            assert!(nl.invert(0.0).abs() < 1e-9);
            for &y in &[-2.0, -0.3, 0.7, 1.9] {
                let x = nl.eval(y);
                assert!((nl.invert(x) - y).abs() < 1e-9, "roundtrip failed at {y}");
            }
        }
    }

    #[test]
    fn noise_is_deterministic_given_seed() {
        let src = generate_source(SourceKind::GaussianIid, 128, 2).unwrap();
        let sys = WienerSimoSystem::from_bench(
            &[1, 2],
            &[Nonlinearity::SmoothSaturation, Nonlinearity::Stairway],
            NoiseSpec::SnrDb(20.0),
        )
        .unwrap();
        let a = simulate(&sys, &src, 42).unwrap();
        let b = simulate(&sys, &src, 42).unwrap();
        assert_eq!(a.observed, b.observed);
        let c = simulate(&sys, &src, 43).unwrap();
        assert_ne!(a.observed, c.observed);
    }

    #[test]
    fn snr_sets_noise_relative_to_branch_power() {
        let src = generate_source(SourceKind::GaussianIid, 4096, 11).unwrap();
        let sys = WienerSimoSystem::from_bench(
            &[1, 2],
            &[Nonlinearity::Identity, Nonlinearity::Identity],
            NoiseSpec::SnrDb(20.0),
        )
        .unwrap();
        let out = simulate(&sys, &src, 1).unwrap();
        for i in 0..2 {
            let signal_rms = rms(&out.intermediate[i]);
            assert!((out.noise_std[i] / signal_rms - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn proportional_channels_rejected() {
        let r = WienerSimoSystem::new(
            vec![
                (
                    FirChannel::new(vec![1.0, 2.0]).unwrap(),
                    Nonlinearity::Identity,
                ),
                (
                    FirChannel::new(vec![-2.0, -4.0]).unwrap(),
                    Nonlinearity::Identity,
                ),
            ],
            NoiseSpec::None,
        );
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn signals_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("signals.csv");
        let outputs = vec![vec![1.0, -0.5, 3.25e-7], vec![0.0, 2.0, -1.0]];
        write_signals_csv(&path, &outputs).unwrap();
        let back = read_signals_csv(&path).unwrap();
        assert_eq!(outputs, back);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2\n"));
    }
}
