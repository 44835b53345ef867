//! Multipath block-fading channel generation and per-subcarrier responses.
//!
//! Four link types connect the nodes: forward (access point to device),
//! backward (device to access point), legacy (access point to legacy user),
//! and interference (device to legacy user). Each is a short tapped delay
//! line with independent Rayleigh taps whose expected powers follow an
//! exponential decay profile scaled by distance-based path loss. Frequency
//! responses are the tap DFT evaluated at each subcarrier bin:
//!
//! ```text
//! F[k] = sum_l f[l] * exp(-j*2*pi*k*l / N)
//! ```
//!
//! Taps are few (L <= 8) and N is moderate, so responses are computed by
//! direct summation rather than an FFT; this is exact at any N.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Stream tags for deriving independent per-link RNG substreams from one
/// master seed. Each (tag, device) pair owns a stream, so adding devices
/// never reshuffles the draws of earlier ones.
const STREAM_FORWARD: u64 = 1;
const STREAM_BACKWARD: u64 = 2;
const STREAM_LEGACY: u64 = 3;
const STREAM_INTERFERENCE: u64 = 4;

mod complex_pairs {
    //! Serialize complex tap vectors as `[re, im]` pairs.

    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(taps: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = taps.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

/// Time-domain taps of one link realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathChannel {
    /// Complex tap gains, tap `l` delayed by `l` samples.
    #[serde(with = "complex_pairs")]
    pub taps: Vec<Complex64>,
}

impl MultipathChannel {
    pub fn new(taps: Vec<Complex64>) -> Self {
        Self { taps }
    }

    /// Number of paths.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Total tap power `sum_l |f_l|^2`.
    pub fn power(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    /// DFT of the taps at each of the `n` subcarrier bins.
    ///
    /// Requires `n >= taps.len()`: with fewer bins than paths the cyclic
    /// prefix assumption behind the per-subcarrier model breaks down.
    pub fn freq_response(&self, n: usize) -> Result<Vec<Complex64>, Error> {
        if self.taps.is_empty() {
            return Err(Error::invalid("channel has no taps"));
        }
        if n < self.taps.len() {
            return Err(Error::invalid(format!(
                "subcarrier count {} is smaller than path count {}",
                n,
                self.taps.len()
            )));
        }
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, tap) in self.taps.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (k as f64) * (l as f64) / (n as f64);
                acc += tap * Complex64::from_polar(1.0, phase);
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Statistical description of the propagation environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelGenConfig {
    /// Path counts per link type.
    pub paths_forward: usize,
    pub paths_backward: usize,
    pub paths_legacy: usize,
    pub paths_interference: usize,
    /// Access-point-to-device distance in meters, one entry per device.
    pub dist_fap_bd: Vec<f64>,
    /// Device-to-legacy-user distance in meters, one entry per device.
    pub dist_bd_lu: Vec<f64>,
    /// Access-point-to-legacy-user distance in meters.
    pub dist_fap_lu: f64,
    /// First-path power gain at 1 m (default 1e-3).
    pub first_path_gain_coeff: f64,
    /// Path-loss exponent applied to distance (default 2).
    pub pathloss_exponent: f64,
    /// Exponential decay rate of expected tap power versus tap index
    /// (default 1.0, i.e. tap l carries exp(-l) of the first-path gain).
    pub pdp_decay: f64,
    /// Master RNG seed.
    pub seed: u64,
}

impl ChannelGenConfig {
    /// Defaults matching the simulated indoor deployment: two devices at
    /// 2.5 m and 4 m, legacy user at 15 m from everything, 4-path
    /// device links, 8-path legacy link, 6-path interference link.
    pub fn indoor_default(seed: u64) -> Self {
        Self {
            paths_forward: 4,
            paths_backward: 4,
            paths_legacy: 8,
            paths_interference: 6,
            dist_fap_bd: vec![2.5, 4.0],
            dist_bd_lu: vec![15.0, 15.0],
            dist_fap_lu: 15.0,
            first_path_gain_coeff: 1e-3,
            pathloss_exponent: 2.0,
            pdp_decay: 1.0,
            seed,
        }
    }

    pub fn validate(&self, num_devices: usize) -> Result<(), Error> {
        if self.paths_forward == 0
            || self.paths_backward == 0
            || self.paths_legacy == 0
            || self.paths_interference == 0
        {
            return Err(Error::invalid("path counts must be >= 1"));
        }
        if self.dist_fap_bd.len() < num_devices || self.dist_bd_lu.len() < num_devices {
            return Err(Error::invalid(format!(
                "need distances for {} devices, got {}/{}",
                num_devices,
                self.dist_fap_bd.len(),
                self.dist_bd_lu.len()
            )));
        }
        let all_dists = self
            .dist_fap_bd
            .iter()
            .chain(self.dist_bd_lu.iter())
            .chain(std::iter::once(&self.dist_fap_lu));
        for &d in all_dists {
            if !(d > 0.0) {
                return Err(Error::invalid("distances must be positive"));
            }
        }
        if self.pdp_decay < 0.0 {
            return Err(Error::invalid("pdp_decay must be >= 0"));
        }
        if !(self.first_path_gain_coeff > 0.0) || !(self.pathloss_exponent >= 0.0) {
            return Err(Error::invalid("invalid path-loss parameters"));
        }
        Ok(())
    }

    /// Expected power of tap `l` on a link of length `dist` meters.
    pub fn tap_power(&self, dist: f64, l: usize) -> f64 {
        self.first_path_gain_coeff * dist.powf(-self.pathloss_exponent) * (-self.pdp_decay * l as f64).exp()
    }

    /// Expected total link power `sum_l E|f_l|^2`.
    pub fn link_power(&self, dist: f64, paths: usize) -> f64 {
        (0..paths).map(|l| self.tap_power(dist, l)).sum()
    }
}

/// One channel realization: taps plus per-subcarrier responses for every
/// link in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Subcarrier count the responses were evaluated at.
    pub subcarriers: usize,
    pub forward_taps: Vec<MultipathChannel>,
    pub backward_taps: Vec<MultipathChannel>,
    pub legacy_taps: MultipathChannel,
    pub interference_taps: Vec<MultipathChannel>,
    /// Per-device, per-subcarrier response of the forward link.
    pub forward: Vec<Vec<Complex64>>,
    pub backward: Vec<Vec<Complex64>>,
    pub legacy: Vec<Complex64>,
    pub interference: Vec<Vec<Complex64>>,
}

/// Serialized form: taps only, responses are recomputed on load.
#[derive(Serialize, Deserialize)]
struct ChannelSetData {
    subcarriers: usize,
    forward_taps: Vec<MultipathChannel>,
    backward_taps: Vec<MultipathChannel>,
    legacy_taps: MultipathChannel,
    interference_taps: Vec<MultipathChannel>,
}

impl ChannelSet {
    /// Build a channel set from explicit taps, computing all responses.
    pub fn from_taps(
        subcarriers: usize,
        forward_taps: Vec<MultipathChannel>,
        backward_taps: Vec<MultipathChannel>,
        legacy_taps: MultipathChannel,
        interference_taps: Vec<MultipathChannel>,
    ) -> Result<Self, Error> {
        let m = forward_taps.len();
        if backward_taps.len() != m || interference_taps.len() != m {
            return Err(Error::invalid("per-device tap lists must have equal length"));
        }
        let resp =
            |chans: &[MultipathChannel]| -> Result<Vec<Vec<Complex64>>, Error> {
                chans.iter().map(|c| c.freq_response(subcarriers)).collect()
            };
        let forward = resp(&forward_taps)?;
        let backward = resp(&backward_taps)?;
        let interference = resp(&interference_taps)?;
        let legacy = legacy_taps.freq_response(subcarriers)?;
        Ok(Self {
            subcarriers,
            forward_taps,
            backward_taps,
            legacy_taps,
            interference_taps,
            forward,
            backward,
            legacy,
            interference,
        })
    }

    /// Number of devices this realization covers.
    pub fn num_devices(&self) -> usize {
        self.forward_taps.len()
    }

    /// Squared-magnitude link gains used by all throughput/energy formulas.
    pub fn gains(&self) -> LinkGains {
        let m = self.num_devices();
        let n = self.subcarriers;
        let mut backscatter = vec![vec![0.0; n]; m];
        let mut forward = vec![vec![0.0; n]; m];
        let mut interference = vec![vec![0.0; n]; m];
        for i in 0..m {
            for k in 0..n {
                let f = self.forward[i][k];
                backscatter[i][k] = (f * self.backward[i][k]).norm_sqr();
                forward[i][k] = f.norm_sqr();
                interference[i][k] = (f * self.interference[i][k]).norm_sqr();
            }
        }
        let legacy = self.legacy.iter().map(|h| h.norm_sqr()).collect();
        LinkGains {
            backscatter,
            forward,
            legacy,
            interference,
        }
    }

    /// JSON round-trip helpers; taps only, stored as `[re, im]` pairs, so a
    /// saved realization replays bit-exactly.
    pub fn to_json(&self) -> String {
        let data = ChannelSetData {
            subcarriers: self.subcarriers,
            forward_taps: self.forward_taps.clone(),
            backward_taps: self.backward_taps.clone(),
            legacy_taps: self.legacy_taps.clone(),
            interference_taps: self.interference_taps.clone(),
        };
        serde_json::to_string(&data).expect("channel serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, Error> {
        let data: ChannelSetData =
            serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_taps(
            data.subcarriers,
            data.forward_taps,
            data.backward_taps,
            data.legacy_taps,
            data.interference_taps,
        )
    }
}

/// Precomputed squared channel magnitudes.
///
/// All resource-allocation formulas depend on the channels only through
/// these nonnegative gains.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    /// `|F[m][k] * G[m][k]|^2`: round-trip device gain.
    pub backscatter: Vec<Vec<f64>>,
    /// `|F[m][k]|^2`: forward gain, drives energy harvesting.
    pub forward: Vec<Vec<f64>>,
    /// `|H[k]|^2`: legacy-user gain.
    pub legacy: Vec<f64>,
    /// `|F[m][k] * V[m][k]|^2`: device-to-legacy-user interference gain.
    pub interference: Vec<Vec<f64>>,
}

impl LinkGains {
    pub fn num_devices(&self) -> usize {
        self.backscatter.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.legacy.len()
    }
}

fn substream(seed: u64, tag: u64, device: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((tag << 32) | device);
    rng
}

/// Draw one tapped-delay-line realization: tap `l` is circularly-symmetric
/// complex Gaussian with variance `tap_power(dist, l)`.
fn draw_taps(rng: &mut ChaCha12Rng, cfg: &ChannelGenConfig, dist: f64, paths: usize) -> MultipathChannel {
    let taps = (0..paths)
        .map(|l| {
            let std = (cfg.tap_power(dist, l) / 2.0).sqrt();
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            Complex64::new(re * std, im * std)
        })
        .collect();
    MultipathChannel::new(taps)
}

/// Generate a full channel realization for `num_devices` devices over
/// `subcarriers` bins. Reproducible: the same config yields the same set.
pub fn generate_channels(
    cfg: &ChannelGenConfig,
    num_devices: usize,
    subcarriers: usize,
) -> Result<ChannelSet, Error> {
    cfg.validate(num_devices)?;
    let draw = |tag: u64, dist: f64, paths: usize, device: usize| {
        let mut rng = substream(cfg.seed, tag, device as u64);
        draw_taps(&mut rng, cfg, dist, paths)
    };
    let forward_taps: Vec<_> = (0..num_devices)
        .map(|i| draw(STREAM_FORWARD, cfg.dist_fap_bd[i], cfg.paths_forward, i))
        .collect();
    let backward_taps: Vec<_> = (0..num_devices)
        .map(|i| draw(STREAM_BACKWARD, cfg.dist_fap_bd[i], cfg.paths_backward, i))
        .collect();
    let interference_taps: Vec<_> = (0..num_devices)
        .map(|i| draw(STREAM_INTERFERENCE, cfg.dist_bd_lu[i], cfg.paths_interference, i))
        .collect();
    let legacy_taps = draw(STREAM_LEGACY, cfg.dist_fap_lu, cfg.paths_legacy, 0);
    ChannelSet::from_taps(
        subcarriers,
        forward_taps,
        backward_taps,
        legacy_taps,
        interference_taps,
    )
}

/// Closed-form average receive SNR (linear) at the access point for device
/// 1, `total_power / noise * sum_l E|g_l f_l|^2`, evaluated from the
/// configured power-delay profiles. Forward and backward taps are
/// independent, so the expectation factorizes per path.
pub fn average_receive_snr(cfg: &ChannelGenConfig, total_power: f64, noise_power: f64) -> Result<f64, Error> {
    cfg.validate(1)?;
    if !(noise_power > 0.0) {
        return Err(Error::invalid("noise power must be positive"));
    }
    let d = cfg.dist_fap_bd[0];
    let paths = cfg.paths_forward.min(cfg.paths_backward);
    let cross: f64 = (0..paths)
        .map(|l| cfg.tap_power(d, l) * cfg.tap_power(d, l))
        .sum();
    Ok(total_power / noise_power * cross)
}

/// Noise power that calibrates the network to a target average receive SNR
/// in dB, inverting [`average_receive_snr`].
pub fn noise_for_target_snr(cfg: &ChannelGenConfig, total_power: f64, snr_db: f64) -> Result<f64, Error> {
    let unit = average_receive_snr(cfg, total_power, 1.0)?;
    Ok(unit / 10f64.powf(snr_db / 10.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_cfg(seed: u64) -> ChannelGenConfig {
        ChannelGenConfig::indoor_default(seed)
    }

    #[test]
    fn single_tap_is_flat() {
        let ch = MultipathChannel::new(vec![c(1.0, 0.0)]);
        let resp = ch.freq_response(4).unwrap();
        for r in resp {
            assert!((r - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn pure_delay_is_phase_ramp() {
        let ch = MultipathChannel::new(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let resp = ch.freq_response(4).unwrap();
        let expect = [c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)];
        for (r, e) in resp.iter().zip(expect.iter()) {
            assert!((r - e).norm() < 1e-12, "{r} vs {e}");
        }
    }

    #[test]
    fn matches_direct_summation_oracle() {
        // Independent oracle: naive O(N*L) summation with from_polar.
        let ch = MultipathChannel::new(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let n = 8;
        let resp = ch.freq_response(n).unwrap();
        for k in 0..n {
            let mut acc = c(0.0, 0.0);
            for (l, tap) in ch.taps.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * l) as f64 / n as f64;
                acc += tap * c(ang.cos(), ang.sin());
            }
            let rel = (resp[k] - acc).norm() / acc.norm().max(1e-300);
            assert!(rel <= 1e-12);
        }
        // Spot value at k=1: 0.6 + 0.8j * exp(-j*pi/4).
        let expect = c(0.6, 0.0) + c(0.0, 0.8) * Complex64::from_polar(1.0, -std::f64::consts::PI / 4.0);
        assert!((resp[1] - expect).norm() < 1e-14);
    }

    #[test]
    fn rejects_fewer_bins_than_paths() {
        let ch = MultipathChannel::new(vec![c(1.0, 0.0); 4]);
        assert!(ch.freq_response(3).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = test_cfg(7);
        let a = generate_channels(&cfg, 2, 16).unwrap();
        let b = generate_channels(&cfg, 2, 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adding_devices_keeps_earlier_links() {
        let cfg = ChannelGenConfig {
            dist_fap_bd: vec![2.5, 4.0, 3.0],
            dist_bd_lu: vec![15.0, 15.0, 15.0],
            ..test_cfg(3)
        };
        let one = generate_channels(&cfg, 1, 8).unwrap();
        let three = generate_channels(&cfg, 3, 8).unwrap();
        assert_eq!(one.forward_taps[0], three.forward_taps[0]);
        assert_eq!(one.backward_taps[0], three.backward_taps[0]);
        assert_eq!(one.interference_taps[0], three.interference_taps[0]);
        assert_eq!(one.legacy_taps, three.legacy_taps);
    }

    #[test]
    fn first_tap_power_matches_pathloss_law() {
        // Sample-mean oracle over 1e5 draws: E|first tap|^2 = 1e-3 * 2.5^-2.
        let cfg = test_cfg(11);
        let mut rng = substream(cfg.seed, 99, 0);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let ch = draw_taps(&mut rng, &cfg, 2.5, cfg.paths_forward);
            acc += ch.taps[0].norm_sqr();
        }
        let mean = acc / n as f64;
        let expect = 1.6e-4;
        assert!(
            (mean - expect).abs() / expect < 0.02,
            "mean {mean} vs {expect}"
        );
    }

    #[test]
    fn single_path_total_power_is_first_path_power() {
        let cfg = ChannelGenConfig {
            paths_forward: 1,
            pdp_decay: 3.7,
            ..test_cfg(5)
        };
        assert_eq!(
            cfg.link_power(2.0, 1),
            cfg.tap_power(2.0, 0),
            "single path carries exactly the first-path gain"
        );
    }

    #[test]
    fn parseval_consistency() {
        // (1/N) sum_k |F_k|^2 == sum_l |f_l|^2 for every generated link.
        let cfg = test_cfg(13);
        let set = generate_channels(&cfg, 2, 32).unwrap();
        let check = |taps: &MultipathChannel, resp: &[Complex64]| {
            let freq: f64 = resp.iter().map(|x| x.norm_sqr()).sum::<f64>() / resp.len() as f64;
            let time = taps.power();
            assert!((freq - time).abs() <= 1e-12 * time.max(1e-300), "{freq} vs {time}");
        };
        for i in 0..2 {
            check(&set.forward_taps[i], &set.forward[i]);
            check(&set.backward_taps[i], &set.backward[i]);
            check(&set.interference_taps[i], &set.interference[i]);
        }
        check(&set.legacy_taps, &set.legacy);
    }

    #[test]
    fn average_snr_zero_power() {
        let cfg = test_cfg(1);
        assert_eq!(average_receive_snr(&cfg, 0.0, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn average_snr_single_path_factorizes() {
        // One path per link with E|f|^2 = a, E|g|^2 = b gives P*a*b/noise.
        let cfg = ChannelGenConfig {
            paths_forward: 1,
            paths_backward: 1,
            ..test_cfg(1)
        };
        let a = cfg.tap_power(cfg.dist_fap_bd[0], 0);
        let got = average_receive_snr(&cfg, 2.0, 0.5).unwrap();
        assert!((got - 2.0 * a * a / 0.5).abs() < 1e-18);
    }

    #[test]
    fn average_snr_matches_monte_carlo() {
        // Closed form vs sample mean of |g_l f_l|^2 over 1e5 realizations.
        let cfg = test_cfg(21);
        let total_power = 1.0;
        let noise = 1e-9;
        let closed = average_receive_snr(&cfg, total_power, noise).unwrap();
        let mut rng = substream(cfg.seed, 98, 0);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let f = draw_taps(&mut rng, &cfg, cfg.dist_fap_bd[0], cfg.paths_forward);
            let g = draw_taps(&mut rng, &cfg, cfg.dist_fap_bd[0], cfg.paths_backward);
            acc += f
                .taps
                .iter()
                .zip(g.taps.iter())
                .map(|(a, b)| (a * b).norm_sqr())
                .sum::<f64>();
        }
        let sampled = total_power / noise * acc / n as f64;
        assert!(
            (sampled - closed).abs() / closed < 0.05,
            "sampled {sampled} vs closed {closed}"
        );
    }

    #[test]
    fn noise_calibration_inverts_snr() {
        let cfg = test_cfg(2);
        let sigma2 = noise_for_target_snr(&cfg, 1.0, 20.0).unwrap();
        let snr = average_receive_snr(&cfg, 1.0, sigma2).unwrap();
        assert!((10.0 * snr.log10() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let cfg = test_cfg(17);
        let set = generate_channels(&cfg, 2, 16).unwrap();
        let json = set.to_json();
        let back = ChannelSet::from_json(&json).unwrap();
        assert_eq!(set, back);
        assert_eq!(json, back.to_json(), "reserialization is byte-identical");
    }
}
