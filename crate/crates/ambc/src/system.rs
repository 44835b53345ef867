//! Closed-form physical-layer expressions and a symbol-level Monte-Carlo
//! check of the combining SNR.
//!
//! Rates are in bps/Hz (base-2 logs throughout) and are normalized to the
//! frame duration, which is fixed to 1 s so harvested energies are plain
//! Joules per frame. With time fraction `tau[m]`, reflection coefficient
//! `alpha[m]`, and subcarrier powers `P[m][k]`:
//!
//! * device throughput: `(tau/N) * log2(1 + alpha/noise * sum_k b[k] P[k])`
//!   with round-trip gain `b = |F G|^2`;
//! * legacy-user throughput treats the backscatter as interference:
//!   `(1/N) * sum_m tau_m sum_k log2(1 + |H|^2 P / (alpha |F V|^2 P + noise))`;
//! * harvested energy collects the unreflected share in the device's own
//!   slot plus everything incident during other slots.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, LinkGains};
use crate::error::Error;

/// Base-2 `log(1 + x)`, accurate for small arguments.
#[inline]
pub(crate) fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Scenario constants shared by every solver.
///
/// `cp_len` is carried for scenario fidelity; the rate formulas deliberately
/// omit the cyclic-prefix prelog penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of backscatter devices (M).
    pub num_devices: usize,
    /// Number of OFDM subcarriers (N).
    pub num_subcarriers: usize,
    /// Cyclic prefix length in samples.
    pub cp_len: usize,
    /// Total transmit power budget in W.
    pub total_power: f64,
    /// Per-subcarrier peak power in W.
    pub peak_power: f64,
    /// Receiver noise power in W.
    pub noise_power: f64,
    /// Energy-harvesting efficiency per device, each in [0, 1].
    pub harvest_eff: Vec<f64>,
    /// Legacy-user throughput floor in bps/Hz.
    pub lu_rate_min: f64,
    /// Minimum harvested energy per device in J (frame-normalized).
    pub energy_min: Vec<f64>,
    /// Outer-loop convergence threshold.
    pub epsilon: f64,
}

impl SystemConfig {
    /// Two-device configuration used by the simulation campaign: N = 64
    /// subcarriers, 1 W budget, peak power 20x the uniform level, 50%
    /// harvesters, 10 uJ energy floors, 1 bps/Hz legacy floor.
    pub fn indoor_default() -> Self {
        let m = 2;
        let n = 64;
        Self {
            num_devices: m,
            num_subcarriers: n,
            cp_len: 16,
            total_power: 1.0,
            peak_power: 20.0 / (m * n) as f64,
            noise_power: 1e-9,
            harvest_eff: vec![0.5; m],
            lu_rate_min: 1.0,
            energy_min: vec![1e-5; m],
            epsilon: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.num_devices == 0 || self.num_subcarriers == 0 {
            return Err(Error::invalid("need at least one device and subcarrier"));
        }
        if !(self.total_power > 0.0) || !(self.peak_power > 0.0) || !(self.noise_power > 0.0) {
            return Err(Error::invalid("powers and noise must be positive"));
        }
        if self.harvest_eff.len() != self.num_devices || self.energy_min.len() != self.num_devices {
            return Err(Error::invalid("per-device vectors must have num_devices entries"));
        }
        if self.harvest_eff.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
            return Err(Error::invalid("harvest efficiencies must lie in [0, 1]"));
        }
        if self.energy_min.iter().any(|&e| e < 0.0) || self.lu_rate_min < 0.0 {
            return Err(Error::invalid("constraint floors must be nonnegative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        Ok(())
    }
}

/// Decision variables of the full-duplex network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Backscatter time fraction per device; sums to at most 1.
    pub time: Vec<f64>,
    /// Power reflection coefficient per device, each in [0, 1].
    pub reflect: Vec<f64>,
    /// Subcarrier transmit power per device slot, `power[m][k]` in W.
    pub power: Vec<Vec<f64>>,
}

impl Allocation {
    /// Uniform starting point: equal slots, half reflection, flat power
    /// `1/(M*N)` on every subcarrier.
    pub fn uniform(sys: &SystemConfig) -> Self {
        let m = sys.num_devices;
        let n = sys.num_subcarriers;
        Self {
            time: vec![1.0 / m as f64; m],
            reflect: vec![0.5; m],
            power: vec![vec![1.0 / (m * n) as f64; n]; m],
        }
    }

    /// Largest violation of the joint feasibility constraints, normalized
    /// per constraint family so rates, energies, and powers are comparable.
    /// Zero (up to rounding) means feasible.
    pub fn max_violation(&self, gains: &LinkGains, sys: &SystemConfig) -> f64 {
        let mut worst: f64 = 0.0;
        let mut push = |violation: f64, scale: f64| {
            worst = worst.max(violation / scale.max(1e-30));
        };
        for m in 0..sys.num_devices {
            push(-self.time[m], 1.0);
            push(self.reflect[m] - 1.0, 1.0);
            push(-self.reflect[m], 1.0);
            for k in 0..sys.num_subcarriers {
                push(self.power[m][k] - sys.peak_power, sys.peak_power);
                push(-self.power[m][k], sys.peak_power);
            }
            let energy = harvested_energy(m, self, gains, sys);
            push(sys.energy_min[m] - energy, sys.energy_min[m].max(1e-12));
        }
        push(self.time.iter().sum::<f64>() - 1.0, 1.0);
        let spent: f64 = (0..sys.num_devices)
            .map(|m| self.time[m] * self.power[m].iter().sum::<f64>())
            .sum();
        push(spent - sys.total_power, sys.total_power);
        push(
            sys.lu_rate_min - lu_throughput(self, gains, sys),
            sys.lu_rate_min.max(1.0),
        );
        worst
    }
}

/// Decoding SNR of device `m`'s backscatter link after maximum-ratio
/// combining: `alpha/noise * sum_k |F_k G_k|^2 P_k`.
pub fn bd_snr(m: usize, alpha: f64, power: &[f64], gains: &LinkGains, sys: &SystemConfig) -> f64 {
    let cross: f64 = gains.backscatter[m]
        .iter()
        .zip(power.iter())
        .map(|(b, p)| b * p)
        .sum();
    alpha / sys.noise_power * cross
}

/// Throughput of device `m` in bps/Hz, normalized to the frame duration.
pub fn bd_throughput(m: usize, alloc: &Allocation, gains: &LinkGains, sys: &SystemConfig) -> f64 {
    let snr = bd_snr(m, alloc.reflect[m], &alloc.power[m], gains, sys);
    alloc.time[m] / sys.num_subcarriers as f64 * log2_1p(snr)
}

/// Legacy-user throughput in bps/Hz with the backscatter treated as
/// interference.
pub fn lu_throughput(alloc: &Allocation, gains: &LinkGains, sys: &SystemConfig) -> f64 {
    let n = sys.num_subcarriers;
    let mut total = 0.0;
    for m in 0..sys.num_devices {
        if alloc.time[m] == 0.0 {
            continue;
        }
        let mut slot = 0.0;
        for k in 0..n {
            let p = alloc.power[m][k];
            let interference = alloc.reflect[m] * gains.interference[m][k] * p;
            slot += log2_1p(gains.legacy[k] * p / (interference + sys.noise_power));
        }
        total += alloc.time[m] * slot;
    }
    total / n as f64
}

/// Energy harvested by device `m` over the whole frame in J: the
/// unreflected share of its own slot plus full incident power in all other
/// slots, scaled by its harvester efficiency.
pub fn harvested_energy(m: usize, alloc: &Allocation, gains: &LinkGains, sys: &SystemConfig) -> f64 {
    let mut acc = 0.0;
    for k in 0..sys.num_subcarriers {
        let own = alloc.time[m] * alloc.power[m][k] * (1.0 - alloc.reflect[m]);
        let others: f64 = (0..sys.num_devices)
            .filter(|&r| r != m)
            .map(|r| alloc.time[r] * alloc.power[r][k])
            .sum();
        acc += gains.forward[m][k] * (own + others);
    }
    sys.harvest_eff[m] * acc
}

/// Symbol-level Monte-Carlo estimate of the combining SNR.
///
/// Simulates the frequency-domain backscatter pipeline per OFDM symbol:
/// unit-modulus access-point symbols on each powered subcarrier, a
/// unit-modulus device symbol spanning the OFDM symbol, AWGN injection, and
/// maximum-ratio combining of the per-subcarrier observations. Returns the
/// measured SNR of the device-symbol estimate, which should match
/// [`bd_snr`]. Zero-power subcarriers are excluded from the combiner;
/// requesting a measurement with no powered subcarrier is an error.
pub fn verify_snr_monte_carlo(
    m: usize,
    alpha: f64,
    power: &[f64],
    ch: &ChannelSet,
    sys: &SystemConfig,
    n_symbols: usize,
    rng: &mut impl Rng,
) -> Result<f64, Error> {
    let active: Vec<usize> = (0..sys.num_subcarriers).filter(|&k| power[k] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::invalid(
            "cannot combine: every subcarrier has zero power",
        ));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("cannot measure SNR with zero reflection"));
    }
    let noise_std = (sys.noise_power / 2.0).sqrt();
    let unit_phase = |rng: &mut dyn rand::RngCore| {
        let angle = rand::Rng::gen_range(rng, 0.0..std::f64::consts::TAU);
        Complex64::from_polar(1.0, angle)
    };
    let mut err_power = 0.0;
    for _ in 0..n_symbols {
        let device_symbol = unit_phase(rng);
        let mut num = Complex64::new(0.0, 0.0);
        let mut denom = 0.0;
        for &k in &active {
            let ap_symbol = unit_phase(rng);
            // Per-subcarrier branch gain seen by the device symbol.
            let branch = (alpha * power[k]).sqrt() * ch.forward[m][k] * ch.backward[m][k] * ap_symbol;
            let noise = Complex64::new(
                rng.sample::<f64, _>(rand_distr::StandardNormal) * noise_std,
                rng.sample::<f64, _>(rand_distr::StandardNormal) * noise_std,
            );
            let observed = branch * device_symbol + noise;
            num += branch.conj() * observed;
            denom += branch.norm_sqr();
        }
        let estimate = num / denom;
        err_power += (estimate - device_symbol).norm_sqr();
    }
    // Unit-modulus symbols: signal power is exactly 1.
    Ok(n_symbols as f64 / err_power)
}
