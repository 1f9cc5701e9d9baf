use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::profile::DeviceProfile;
use super::SynthError;
use crate::numerology::{
    active_bins, DEFAULT_PROBE_PERIOD_NS, FFT_SIZE, N_PRB, SUBCARRIER_SPACING_HZ, TIME_EST_LEN,
};
use crate::trace_format::{C16Word, DeviceLabel, SrsProbe};

/// Peak component magnitude after per-probe scaling, as a fraction of full scale.
pub const Q15_HEADROOM: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub device: DeviceProfile,
    pub n_probes: usize,
    pub probe_period_ns: u64,
    pub start_timestamp_ns: u64,
    pub rnti: u16,
    pub label: DeviceLabel,
    pub seed: u64,
}

impl SessionSpec {
    pub fn new(device: DeviceProfile, n_probes: usize, label: DeviceLabel, seed: u64) -> Self {
        SessionSpec {
            device,
            n_probes,
            probe_period_ns: DEFAULT_PROBE_PERIOD_NS,
            start_timestamp_ns: 0,
            rnti: 0x4601,
            label,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_probes == 0 {
            return Err(SynthError::Config("n_probes must be at least 1".into()));
        }
        if self.probe_period_ns == 0 {
            return Err(SynthError::Config("probe_period_ns must be positive".into()));
        }
        if self.label == DeviceLabel::Unknown {
            return Err(SynthError::Config("session label must be legit or attack".into()));
        }
        self.device.validate(self.probe_period_ns)
    }
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// First-order Gauss–Markov evolution of complex tap gains:
/// `g(n) = ρ g(n-1) + sqrt(1-ρ²) w(n)`, `w ~ CN(0, P)`, started from the
/// stationary distribution.
#[derive(Debug, Clone)]
pub struct TapProcess {
    rho: f64,
    sigma: Vec<f64>,
    gains: Vec<Complex64>,
}

impl TapProcess {
    pub fn new<R: Rng>(profile: &DeviceProfile, rho: f64, rng: &mut R) -> Self {
        let sigma: Vec<f64> = profile.taps.iter().map(|t| t.mean_power.sqrt()).collect();
        let gains = profile
            .taps
            .iter()
            .zip(&sigma)
            .map(|(t, &s)| Complex64::from_polar(s, t.phase0) * complex_normal(rng))
            .collect();
        TapProcess { rho, sigma, gains }
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn step<R: Rng>(&mut self, rng: &mut R) {
        let innov = (1.0 - self.rho * self.rho).max(0.0).sqrt();
        for (g, &s) in self.gains.iter_mut().zip(&self.sigma) {
            *g = *g * self.rho + complex_normal(rng) * (s * innov);
        }
    }
}

/// Per-session generator state: tap process, steering vectors and FFT plan.
struct Synthesizer {
    profile: DeviceProfile,
    steering: Vec<Vec<Complex64>>,
    taps: TapProcess,
    ifft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    snr_tilt_db: f64,
    rng: ChaCha8Rng,
}

impl Synthesizer {
    fn new(spec: &SessionSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let rho = spec.device.correlation(spec.probe_period_ns);
        let taps = TapProcess::new(&spec.device, rho, &mut rng);
        let steering = spec
            .device
            .taps
            .iter()
            .map(|t| {
                (0..FFT_SIZE)
                    .map(|k| {
                        let phase = -2.0 * PI * ((k * t.delay_index) % FFT_SIZE) as f64
                            / FFT_SIZE as f64;
                        Complex64::from_polar(1.0, phase)
                    })
                    .collect()
            })
            .collect();
        let snr_tilt_db = rng.random_range(-2.0..2.0);
        Synthesizer {
            profile: spec.device.clone(),
            steering,
            taps,
            ifft: FftPlanner::new().plan_fft_inverse(FFT_SIZE),
            snr_tilt_db,
            rng,
        }
    }

    /// Channel response on the full grid with the device impairments applied
    /// in the order IQ imbalance, cubic PA term, CFO common-phase rotation.
    fn impaired_response(&self) -> Result<Vec<Complex64>, SynthError> {
        let mut h = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
        for (g, s) in self.taps.gains().iter().zip(&self.steering) {
            for (hk, sk) in h.iter_mut().zip(s) {
                *hk += g * sk;
            }
        }
        let power: f64 =
            h[active_bins()].iter().map(|z| z.norm_sqr()).sum::<f64>() / active_bins().len() as f64;
        if !(power.is_finite() && power > 0.0) {
            return Err(SynthError::QuantizationOverflow(
                "channel response has no energy on the active bins".into(),
            ));
        }
        let norm = power.sqrt().recip();
        h.iter_mut().for_each(|z| *z *= norm);

        let p = &self.profile;
        let mu = (Complex64::new(1.0, 0.0)
            + Complex64::from_polar(p.iq_gain_imbalance, -p.iq_phase_imbalance_rad))
            * 0.5;
        let nu = (Complex64::new(1.0, 0.0)
            - Complex64::from_polar(p.iq_gain_imbalance, p.iq_phase_imbalance_rad))
            * 0.5;
        let cpe = Complex64::from_polar(1.0, PI * p.cfo_hz / SUBCARRIER_SPACING_HZ);
        // Mirror about the grid centre; the active window maps onto itself.
        let out = (0..FFT_SIZE)
            .map(|k| {
                let x = mu * h[k] + nu * h[FFT_SIZE - 1 - k].conj();
                let y = x * (1.0 + p.pa_coeff3 * x.norm_sqr());
                y * cpe
            })
            .collect();
        Ok(out)
    }

    fn next_probe(&mut self, spec: &SessionSpec, n: usize) -> Result<SrsProbe, SynthError> {
        if n > 0 {
            self.taps.step(&mut self.rng);
        }
        let full = self.impaired_response()?;

        let mut freq_est = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
        freq_est[active_bins()].copy_from_slice(&full[active_bins()]);

        let mut time = full;
        self.ifft.process(&mut time);
        time.resize(TIME_EST_LEN, Complex64::new(0.0, 0.0));

        let freq_est = quantize_scaled(&freq_est)?;
        let time_est = quantize_scaled(&time)?;

        let p = &self.profile;
        let snr_per_rb = (0..N_PRB)
            .map(|rb| {
                let pos = (rb as f64 - (N_PRB as f64 - 1.0) / 2.0) / (N_PRB as f64 / 2.0);
                let noise: f64 = self.rng.sample::<f64, _>(StandardNormal) * 0.5;
                ((p.snr_db_mean + self.snr_tilt_db * pos + noise) * 10.0).round() / 10.0
            })
            .collect();
        let jitter: f64 = self.rng.sample(StandardNormal);
        let toa_ns = (p.toa_mean_ns + p.toa_jitter_ns * jitter).round();

        Ok(SrsProbe {
            freq_est,
            time_est,
            snr_per_rb,
            toa_ns,
            timestamp_ns: spec.start_timestamp_ns + n as u64 * spec.probe_period_ns,
            rnti: spec.rnti,
            device_label: spec.label,
        })
    }
}

/// Scales so the largest real or imaginary component sits at the headroom
/// level, then rounds to Q15. Returns the decoded values.
fn quantize_scaled(v: &[Complex64]) -> Result<Vec<Complex64>, SynthError> {
    let peak = v.iter().fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()));
    if !(peak.is_finite() && peak > 0.0) {
        return Err(SynthError::QuantizationOverflow(format!(
            "peak component {peak} cannot be scaled into Q15"
        )));
    }
    let scale = Q15_HEADROOM / peak;
    v.iter()
        .map(|&z| {
            let s = z * scale;
            if s.re.abs() > 1.0 || s.im.abs() > 1.0 {
                return Err(SynthError::QuantizationOverflow(format!(
                    "component {s} exceeds Q15 range after scaling"
                )));
            }
            Ok(C16Word::quantize(s).to_complex())
        })
        .collect()
}

/// Generates the probes of one session. Deterministic for a fixed seed.
pub fn gen_session(spec: &SessionSpec) -> Result<Vec<SrsProbe>, SynthError> {
    spec.validate()?;
    let mut synth = Synthesizer::new(spec);
    (0..spec.n_probes)
        .map(|n| synth.next_probe(spec, n))
        .collect()
}
