//! Physical system parameters of the closed loop and the builders that turn
//! them into CGF models.
//!
//! A scenario describes six wireless links (high-level and low-level command,
//! two periodic-feedback hops, compressed data, valuable information), the
//! edge/agent compute parameters, and a compression cost model. The builders
//! assemble the continuous, lattice and Gaussian-smoothed CGFs used by the
//! latency layer, with all scaled gamma rates precomputed so the saddlepoint
//! engine only sees canonical terms.

use crate::dist::{CgfModel, GammaTerm, GaussianTerm, LatticeTerm};
use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Closed-form constants of Eq.-19-style deadline-constrained capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadlineConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Two-antenna maximum-ratio-combining fit.
pub const DEADLINE_CONSTANTS: DeadlineConstants =
    DeadlineConstants { c1: 2.8771, c2: 1.8771, c3: 3.411 };

/// The six links of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
pub enum LinkId {
    #[serde(rename = "HL")]
    Hl,
    #[serde(rename = "LL")]
    Ll,
    #[serde(rename = "PF1")]
    Pf1,
    #[serde(rename = "PF2")]
    Pf2,
    #[serde(rename = "CD")]
    Cd,
    #[serde(rename = "VI")]
    Vi,
}

impl LinkId {
    pub const ALL: [LinkId; 6] =
        [LinkId::Hl, LinkId::Ll, LinkId::Pf1, LinkId::Pf2, LinkId::Cd, LinkId::Vi];
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LinkId::Hl => "HL",
            LinkId::Ll => "LL",
            LinkId::Pf1 => "PF1",
            LinkId::Pf2 => "PF2",
            LinkId::Cd => "CD",
            LinkId::Vi => "VI",
        };
        f.write_str(s)
    }
}

/// One wireless link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Bandwidth in Hz.
    pub bandwidth: f64,
    /// Average transmit power in W.
    pub power: f64,
    /// Transmitter-receiver distance in m.
    pub distance: f64,
    /// Path-loss exponent.
    pub path_loss_exp: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    /// Per-packet outage probability in [0, 1).
    pub outage_prob: f64,
    /// Number of packets carried per transaction.
    pub packets: u32,
    /// Packet size in bits.
    pub packet_bits: f64,
}

impl LinkConfig {
    fn validate(&self, id: LinkId) -> Result<()> {
        let pos = [
            ("bandwidth", self.bandwidth),
            ("power", self.power),
            ("distance", self.distance),
            ("path_loss_exp", self.path_loss_exp),
            ("noise_psd", self.noise_psd),
            ("packet_bits", self.packet_bits),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("link {id}: {name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.outage_prob) {
            return Err(Error::config(format!(
                "link {id}: outage_prob must lie in [0, 1), got {}",
                self.outage_prob
            )));
        }
        if self.packets < 1 {
            return Err(Error::config(format!("link {id}: packets must be >= 1")));
        }
        Ok(())
    }

    /// Received SNR numerator over noise power: `d^-l P / (N0 B)`.
    pub fn mean_snr(&self) -> f64 {
        self.distance.powf(-self.path_loss_exp) * self.power / (self.noise_psd * self.bandwidth)
    }
}

/// Fixed transmission rate such that a Rayleigh-faded packet fails with the
/// link's outage probability (bits/s). A zero outage probability yields the
/// degenerate rate 0.
pub fn outage_rate(link: &LinkConfig) -> f64 {
    link.bandwidth * (1.0 - link.mean_snr() * (-link.outage_prob).ln_1p()).log2()
}

/// Per-packet transmission time `packet_bits / outage_rate` (s).
pub fn packet_time(link: &LinkConfig) -> f64 {
    link.packet_bits / outage_rate(link)
}

/// Deadline-constrained capacity (bits/s) with explicit fit constants.
pub fn deadline_capacity_with(link: &LinkConfig, tau: f64, c: &DeadlineConstants) -> f64 {
    link.bandwidth
        * (1.0 + c.c1 * link.mean_snr() / (c.c2 + tau.powf(-c.c3))).log2()
}

/// Deadline-constrained capacity (bits/s) under the built-in fit.
pub fn deadline_capacity(link: &LinkConfig, tau: f64) -> f64 {
    deadline_capacity_with(link, tau, &DEADLINE_CONSTANTS)
}

/// The per-link constant `phi` of the feedback power expressions:
/// `[N0 B / (c1 d^-l) (2^(n_pf/(T_s B)) - 1)]^(-1/(c3+1))`.
pub fn pf_phi(link: &LinkConfig, t_s: f64, n_pf: f64) -> f64 {
    let c = &DEADLINE_CONSTANTS;
    let num = link.noise_psd * link.bandwidth / (c.c1 * link.distance.powf(-link.path_loss_exp));
    (num * ((n_pf / (t_s * link.bandwidth)).exp2() - 1.0)).powf(-1.0 / (c.c3 + 1.0))
}

/// Average power needed to sustain rate `n_pf / T_s` within per-packet
/// deadline `tau`: `phi^(-c3-1) (c2 + tau^-c3)`.
pub fn pf_power_for_deadline(link: &LinkConfig, tau: f64, t_s: f64, n_pf: f64) -> f64 {
    let c = &DEADLINE_CONSTANTS;
    pf_phi(link, t_s, n_pf).powf(-c.c3 - 1.0) * (c.c2 + tau.powf(-c.c3))
}

/// Compute parameters of the edge server and the remote agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeConfig {
    /// Gamma shape of per-bit cycle counts at the edge server.
    pub mec_shape: f64,
    /// Gamma shape of per-bit compression cycle counts at the agent.
    pub ra_shape: f64,
    /// Gamma rate of the command feature-extraction task.
    #[serde(rename = "rate_LL")]
    pub rate_ll: f64,
    /// Gamma rate of the feedback feature-extraction task.
    #[serde(rename = "rate_VI")]
    pub rate_vi: f64,
    /// Edge-server clock in cycles/s.
    pub mec_freq: f64,
    /// Agent clock in cycles/s.
    pub ra_freq: f64,
    /// Total command size processed at the edge (bits).
    pub hl_total_bits: f64,
    /// Raw event-triggered data size (bits).
    pub et_bits: f64,
}

/// Which empirical cycles-per-bit law the compression model follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompressionKind {
    /// `exp(psi k) - exp(psi)`, decompression scaled by `omega0`.
    Exp,
    /// `w1 (w2 k^w3 + w4)` for compression, `w5 (w6 k^w7 + w8)` for
    /// decompression.
    Power,
}

/// Expected CPU cycles per bit for compression and decompression as a
/// function of the compression ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionModel {
    pub kind: CompressionKind,
    pub psi: f64,
    pub omega0: f64,
    /// `w1..w8`; only `w7` may be negative.
    pub omegas: [f64; 8],
    pub kappa_max: f64,
}

impl CompressionModel {
    fn validate(&self) -> Result<()> {
        if !(self.psi > 0.0) {
            return Err(Error::config(format!("psi must be > 0, got {}", self.psi)));
        }
        if !(0.0 < self.omega0 && self.omega0 < 1.0) {
            return Err(Error::config(format!("omega0 must lie in (0, 1), got {}", self.omega0)));
        }
        for (i, w) in self.omegas.iter().enumerate() {
            if i != 6 && !(*w > 0.0) {
                return Err(Error::config(format!("omega{} must be > 0, got {w}", i + 1)));
            }
        }
        if !(self.kappa_max >= 1.0) {
            return Err(Error::config(format!("kappa_max must be >= 1, got {}", self.kappa_max)));
        }
        Ok(())
    }

    fn check_ratio(&self, kappa: f64) -> Result<()> {
        if !(1.0..=self.kappa_max).contains(&kappa) {
            return Err(Error::domain(format!(
                "compression ratio {kappa} outside [1, {}]",
                self.kappa_max
            )));
        }
        Ok(())
    }

    /// Expected compression cycles per bit.
    pub fn compress_cycles_per_bit(&self, kappa: f64) -> Result<f64> {
        self.check_ratio(kappa)?;
        Ok(match self.kind {
            CompressionKind::Exp => (self.psi * kappa).exp() - self.psi.exp(),
            CompressionKind::Power => {
                let [w1, w2, w3, w4, ..] = self.omegas;
                w1 * (w2 * kappa.powf(w3) + w4)
            }
        })
    }

    /// Expected decompression cycles per bit.
    pub fn decompress_cycles_per_bit(&self, kappa: f64) -> Result<f64> {
        self.check_ratio(kappa)?;
        Ok(match self.kind {
            CompressionKind::Exp => self.omega0 * ((self.psi * kappa).exp() - self.psi.exp()),
            CompressionKind::Power => {
                let [.., w5, w6, w7, w8] = self.omegas;
                w5 * (w6 * kappa.powf(w7) + w8)
            }
        })
    }

    /// Derivative of the compression cost in the ratio.
    pub fn compress_cycles_per_bit_deriv(&self, kappa: f64) -> Result<f64> {
        self.check_ratio(kappa)?;
        Ok(match self.kind {
            CompressionKind::Exp => self.psi * (self.psi * kappa).exp(),
            CompressionKind::Power => {
                let [_, w2, w3, ..] = self.omegas;
                self.omegas[0] * w2 * w3 * kappa.powf(w3 - 1.0)
            }
        })
    }

    /// Derivative of the decompression cost in the ratio.
    pub fn decompress_cycles_per_bit_deriv(&self, kappa: f64) -> Result<f64> {
        self.check_ratio(kappa)?;
        Ok(match self.kind {
            CompressionKind::Exp => self.omega0 * self.psi * (self.psi * kappa).exp(),
            CompressionKind::Power => {
                let [.., w5, w6, w7, _] = self.omegas;
                w5 * w6 * w7 * kappa.powf(w7 - 1.0)
            }
        })
    }
}

/// How the compressed-data packet count responds to the compression ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CdPacketRule {
    /// Packet size is fixed; the count shrinks as
    /// `ceil(ref_kappa / kappa * packets)` relative to the configured count
    /// at `ref_kappa`.
    RescaleCount { ref_kappa: f64 },
    /// The count stays at the configured value; packet size shrinks with the
    /// ratio (the convention of the power-optimization problem).
    FixedCount,
}

/// Which continuous sum a builder targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuousKind {
    /// Compression + decompression + feedback feature extraction.
    EventTriggered,
    /// The above plus the command feature extraction.
    Loop,
}

/// Which lattice sum a builder targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    /// Compressed data + valuable information.
    EventTriggered,
    /// High-level + low-level command.
    ControlLink,
    /// All four transmission legs.
    Loop,
}

/// First three cumulants, computed from the raw scenario parameters
/// (independently of any [`CgfModel`] evaluation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub mean: f64,
    pub variance: f64,
    pub third: f64,
}

/// All physical and system parameters of one closed-loop configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub links: BTreeMap<LinkId, LinkConfig>,
    pub compute: ComputeConfig,
    pub compression: CompressionModel,
    /// Common per-packet slot time (s).
    pub t_u: f64,
    /// Periodic-feedback sampling interval (s).
    #[serde(rename = "T_s")]
    pub t_s: f64,
    /// Periodic-feedback delivery deadline (s).
    #[serde(rename = "tau_PF")]
    pub tau_pf: f64,
    /// Periodic-feedback packet size (bits).
    #[serde(rename = "n_PF")]
    pub n_pf: f64,
    /// Compressed-data packet count at ratio 1 (the fixed-count convention).
    #[serde(rename = "N_CD_at_kappa1")]
    pub n_cd_at_kappa1: u32,
    #[serde(default)]
    pub preset_name: String,
    #[serde(default = "default_cd_rule")]
    pub cd_packet_rule: CdPacketRule,
}

fn default_cd_rule() -> CdPacketRule {
    CdPacketRule::FixedCount
}

impl ScenarioConfig {
    /// Load one of the embedded presets: `fig4`, `fig5`, `fig6`, `fig7`,
    /// `opt-default`. (`fig3` is the plain i.i.d.-gamma benchmark and lives
    /// in [`crate::oracles::Fig3Study`].)
    pub fn preset(name: &str) -> Result<Self> {
        let cfg = match name {
            "fig4" => preset_figure(5e-3, 20, 3, 1e-3, 1e-4, "fig4"),
            "fig5" => preset_figure(5e-3, 50, 3, 1e-3, 1e-4, "fig5"),
            "fig6" => preset_figure(5e-3, 5, 1, 1e-1, 1e-3, "fig6"),
            "fig7" => preset_figure(100e-3, 5, 1, 1e-1, 1e-3, "fig7"),
            "opt-default" => preset_opt_default(),
            "fig3" => {
                return Err(Error::config(
                    "fig3 is the i.i.d. gamma benchmark, not a loop scenario; \
                     use the comparison study (CLI: `compare --preset fig3`)",
                ))
            }
            other => return Err(Error::config(format!("unknown preset `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("TOML parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("JSON parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a scenario file; the format is chosen by extension (`.toml`,
    /// `.json`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml_str(&text),
            Some("json") => Self::from_json_str(&text),
            _ => Err(Error::config(format!(
                "unsupported scenario extension on {} (want .toml or .json)",
                path.display()
            ))),
        }
    }

    pub fn link(&self, id: LinkId) -> &LinkConfig {
        &self.links[&id]
    }

    pub fn validate(&self) -> Result<()> {
        for id in LinkId::ALL {
            let Some(link) = self.links.get(&id) else {
                return Err(Error::config(format!("missing link {id}")));
            };
            link.validate(id)?;
        }
        self.compression.validate()?;
        for (name, v) in [
            ("t_u", self.t_u),
            ("T_s", self.t_s),
            ("tau_PF", self.tau_pf),
            ("n_PF", self.n_pf),
            ("mec_shape", self.compute.mec_shape),
            ("ra_shape", self.compute.ra_shape),
            ("rate_LL", self.compute.rate_ll),
            ("rate_VI", self.compute.rate_vi),
            ("mec_freq", self.compute.mec_freq),
            ("ra_freq", self.compute.ra_freq),
            ("hl_total_bits", self.compute.hl_total_bits),
            ("et_bits", self.compute.et_bits),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_cd_at_kappa1 < 1 {
            return Err(Error::config("N_CD_at_kappa1 must be >= 1"));
        }
        let hl = self.link(LinkId::Hl);
        let total = hl.packets as f64 * hl.packet_bits;
        if (total - self.compute.hl_total_bits).abs() > 1e-9 * total {
            return Err(Error::config(format!(
                "hl_total_bits {} disagrees with HL packets x packet_bits = {total}",
                self.compute.hl_total_bits
            )));
        }
        // every lattice leg must tick on the shared slot time
        for id in [LinkId::Hl, LinkId::Ll, LinkId::Cd, LinkId::Vi] {
            let link = self.link(id);
            if link.outage_prob > 0.0 {
                let t = packet_time(link);
                if !t.is_finite() || (t - self.t_u).abs() > 1e-6 * self.t_u {
                    return Err(Error::config(format!(
                        "link {id} packet time {t} does not match the slot time {}",
                        self.t_u
                    )));
                }
            }
        }
        if let CdPacketRule::RescaleCount { ref_kappa } = self.cd_packet_rule {
            if !(ref_kappa >= 1.0) || !ref_kappa.is_finite() {
                return Err(Error::config(format!("ref_kappa must be >= 1, got {ref_kappa}")));
            }
        }
        Ok(())
    }

    /// Compressed-data packet count at the given ratio, per the configured
    /// rule.
    pub fn cd_packets(&self, kappa: f64) -> Result<u32> {
        self.compression.check_ratio(kappa)?;
        let n = self.link(LinkId::Cd).packets;
        Ok(match self.cd_packet_rule {
            CdPacketRule::FixedCount => n,
            CdPacketRule::RescaleCount { ref_kappa } => {
                ((ref_kappa / kappa * n as f64).ceil() as u32).max(1)
            }
        })
    }

    /// Compressed-data packet size at ratio 1, in bits (fixed-count
    /// convention).
    pub fn cd_packet_bits_at_one(&self) -> f64 {
        self.compute.et_bits / self.n_cd_at_kappa1 as f64
    }

    /// Gamma terms of the requested continuous sum, with effective rates
    /// folded in. At ratio 1 under the exponential cost law the compression
    /// and decompression costs vanish and those terms are omitted.
    pub fn continuous_cgf(&self, kappa: f64, kind: ContinuousKind) -> Result<CgfModel> {
        let c = &self.compute;
        let zc = self.compression.compress_cycles_per_bit(kappa)?;
        let zd = self.compression.decompress_cycles_per_bit(kappa)?;
        let mut m = CgfModel::new();
        if zc > 0.0 {
            m.push_gamma(GammaTerm::new(c.ra_shape, c.ra_freq * c.ra_shape / (c.et_bits * zc))?);
        }
        if zd > 0.0 {
            m.push_gamma(GammaTerm::new(
                c.mec_shape,
                c.mec_freq * c.mec_shape * kappa / (c.et_bits * zd),
            )?);
        }
        m.push_gamma(GammaTerm::new(c.mec_shape, c.mec_freq * c.rate_vi / c.et_bits)?);
        if kind == ContinuousKind::Loop {
            m.push_gamma(GammaTerm::new(c.mec_shape, c.mec_freq * c.rate_ll / c.hl_total_bits)?);
        }
        Ok(m)
    }

    /// First three cumulants of the continuous sum, straight from the
    /// physical parameters (independent of [`CgfModel::eval`]).
    pub fn continuous_cumulants(&self, kappa: f64, kind: ContinuousKind) -> Result<Cumulants> {
        let c = &self.compute;
        let zc = self.compression.compress_cycles_per_bit(kappa)?;
        let zd = self.compression.decompress_cycles_per_bit(kappa)?;
        let n = c.et_bits;
        let mut mean = n * c.mec_shape / (c.mec_freq * c.rate_vi)
            + n * zc / c.ra_freq
            + n * zd / (c.mec_freq * kappa);
        let mut variance = n * n * zc * zc / (c.ra_freq * c.ra_freq * c.ra_shape)
            + n * n * zd * zd / (c.mec_freq * c.mec_freq * kappa * kappa * c.mec_shape)
            + n * n * c.mec_shape / (c.mec_freq * c.mec_freq * c.rate_vi * c.rate_vi);
        let mut third = 2.0 * n.powi(3) * zc.powi(3) / (c.ra_freq.powi(3) * c.ra_shape.powi(2))
            + 2.0 * n.powi(3) * zd.powi(3)
                / (kappa.powi(3) * c.mec_freq.powi(3) * c.mec_shape.powi(2))
            + 2.0 * c.mec_shape * n.powi(3) / (c.mec_freq.powi(3) * c.rate_vi.powi(3));
        if kind == ContinuousKind::Loop {
            let nl = c.hl_total_bits;
            mean += nl * c.mec_shape / (c.mec_freq * c.rate_ll);
            variance += nl * nl * c.mec_shape / (c.mec_freq * c.mec_freq * c.rate_ll * c.rate_ll);
            third += 2.0 * c.mec_shape * nl.powi(3) / (c.mec_freq.powi(3) * c.rate_ll.powi(3));
        }
        Ok(Cumulants { mean, variance, third })
    }

    /// Lattice terms (common spacing `t_u`) of the requested transmission
    /// sum.
    pub fn lattice_cgf(&self, kappa: f64, kind: LatticeKind) -> Result<CgfModel> {
        let mut m = CgfModel::new();
        let mut push = |id: LinkId, packets: u32| -> Result<()> {
            let link = self.link(id);
            m.push_lattice(LatticeTerm::new(packets, link.outage_prob, self.t_u)?);
            Ok(())
        };
        match kind {
            LatticeKind::EventTriggered => {
                push(LinkId::Cd, self.cd_packets(kappa)?)?;
                push(LinkId::Vi, self.link(LinkId::Vi).packets)?;
            }
            LatticeKind::ControlLink => {
                push(LinkId::Hl, self.link(LinkId::Hl).packets)?;
                push(LinkId::Ll, self.link(LinkId::Ll).packets)?;
            }
            LatticeKind::Loop => {
                push(LinkId::Cd, self.cd_packets(kappa)?)?;
                push(LinkId::Vi, self.link(LinkId::Vi).packets)?;
                push(LinkId::Hl, self.link(LinkId::Hl).packets)?;
                push(LinkId::Ll, self.link(LinkId::Ll).packets)?;
            }
        }
        Ok(m)
    }

    /// Expected total slot count of the lattice sum (mean in count units).
    pub fn expected_slots(&self, kappa: f64, kind: LatticeKind) -> Result<f64> {
        let mut total = 0.0;
        let mut add = |id: LinkId, packets: u32| {
            total += packets as f64 / (1.0 - self.link(id).outage_prob);
        };
        match kind {
            LatticeKind::EventTriggered => {
                add(LinkId::Cd, self.cd_packets(kappa)?);
                add(LinkId::Vi, self.link(LinkId::Vi).packets);
            }
            LatticeKind::ControlLink => {
                add(LinkId::Hl, self.link(LinkId::Hl).packets);
                add(LinkId::Ll, self.link(LinkId::Ll).packets);
            }
            LatticeKind::Loop => {
                add(LinkId::Cd, self.cd_packets(kappa)?);
                add(LinkId::Vi, self.link(LinkId::Vi).packets);
                add(LinkId::Hl, self.link(LinkId::Hl).packets);
                add(LinkId::Ll, self.link(LinkId::Ll).packets);
            }
        }
        Ok(total)
    }

    /// Continuous CGF plus a Gaussian replacement of the lattice sum
    /// (central-limit smoothing).
    pub fn clt_cgf(&self, kappa: f64, kind: ContinuousKind) -> Result<CgfModel> {
        let lattice_kind = match kind {
            ContinuousKind::EventTriggered => LatticeKind::EventTriggered,
            ContinuousKind::Loop => LatticeKind::Loop,
        };
        let lattice = self.lattice_cgf(kappa, lattice_kind)?;
        let mut m = self.continuous_cgf(kappa, kind)?;
        m.push_gaussian(GaussianTerm::new(lattice.mean(), lattice.variance())?);
        Ok(m)
    }

    /// Cumulants of the Gaussian-smoothed sum: the continuous cumulants plus
    /// the lattice mean and variance (the Gaussian adds no third cumulant).
    pub fn clt_cumulants(&self, kappa: f64, kind: ContinuousKind) -> Result<Cumulants> {
        let lattice_kind = match kind {
            ContinuousKind::EventTriggered => LatticeKind::EventTriggered,
            ContinuousKind::Loop => LatticeKind::Loop,
        };
        let cont = self.continuous_cumulants(kappa, kind)?;
        let slots = self.expected_slots(kappa, lattice_kind)?;
        let mut variance = cont.variance;
        let mut add_var = |id: LinkId, packets: u32| {
            let e = self.link(id).outage_prob;
            variance += e * packets as f64 * self.t_u * self.t_u / ((1.0 - e) * (1.0 - e));
        };
        match lattice_kind {
            LatticeKind::EventTriggered => {
                add_var(LinkId::Cd, self.cd_packets(kappa)?);
                add_var(LinkId::Vi, self.link(LinkId::Vi).packets);
            }
            LatticeKind::Loop => {
                add_var(LinkId::Cd, self.cd_packets(kappa)?);
                add_var(LinkId::Vi, self.link(LinkId::Vi).packets);
                add_var(LinkId::Hl, self.link(LinkId::Hl).packets);
                add_var(LinkId::Ll, self.link(LinkId::Ll).packets);
            }
            LatticeKind::ControlLink => unreachable!(),
        }
        Ok(Cumulants { mean: cont.mean + slots * self.t_u, variance, third: cont.third })
    }

    /// Analytic variance of the event-triggered latency (sum of component
    /// variances; no saddlepoint involved).
    pub fn var_t_et(&self, kappa: f64) -> Result<f64> {
        Ok(self.clt_cumulants(kappa, ContinuousKind::EventTriggered)?.variance)
    }

    /// The ratio-dependent part of that variance: compression plus
    /// decompression time variance.
    pub fn compression_variance(&self, kappa: f64) -> Result<f64> {
        let c = &self.compute;
        let zc = self.compression.compress_cycles_per_bit(kappa)?;
        let zd = self.compression.decompress_cycles_per_bit(kappa)?;
        let n = c.et_bits;
        Ok(n * n * zc * zc / (c.ra_freq * c.ra_freq * c.ra_shape)
            + n * n * zd * zd / (c.mec_freq * c.mec_freq * kappa * kappa * c.mec_shape))
    }

    /// Exact mean of the control-link latency (component means only).
    pub fn mean_t_cl(&self) -> f64 {
        let hl = self.link(LinkId::Hl);
        let ll = self.link(LinkId::Ll);
        let c = &self.compute;
        hl.packets as f64 * self.t_u / (1.0 - hl.outage_prob)
            + ll.packets as f64 * self.t_u / (1.0 - ll.outage_prob)
            + c.hl_total_bits * c.mec_shape / (c.mec_freq * c.rate_ll)
    }
}

/// Back-solve the power that makes the packet time equal the slot time at
/// unit spectral efficiency (`bandwidth = packet_bits / t_u`).
fn lattice_link(packets: u32, packet_bits: f64, outage_prob: f64, t_u: f64) -> LinkConfig {
    let bandwidth = packet_bits / t_u;
    let noise_psd = 1e-4;
    // R = B log2(1 - snr ln(1-eps))  with R = B  =>  snr = -1/ln(1-eps)
    let power = noise_psd * bandwidth / (-(-outage_prob).ln_1p());
    LinkConfig {
        bandwidth,
        power,
        distance: 1.0,
        path_loss_exp: 2.0,
        noise_psd,
        outage_prob,
        packets,
        packet_bits,
    }
}

fn pf_link(bandwidth: f64, t_s: f64, n_pf: f64, tau: f64) -> LinkConfig {
    let mut link = LinkConfig {
        bandwidth,
        power: 1.0,
        distance: 1.0,
        path_loss_exp: 2.0,
        noise_psd: 1e-4,
        outage_prob: 1e-3,
        packets: 1,
        packet_bits: n_pf,
    };
    link.power = pf_power_for_deadline(&link, tau, t_s, n_pf);
    link
}

const KB: f64 = 8.0 * 1024.0;
const MB: f64 = 8.0 * 1024.0 * 1024.0;

fn base_preset(
    t_u: f64,
    cd_packets: u32,
    vi_packets: u32,
    eps_cd: f64,
    eps_vi: f64,
    cd_rule: CdPacketRule,
    name: &str,
) -> ScenarioConfig {
    let hl_bits = 128.0 * KB;
    let et_bits = MB;
    let t_s = 0.1;
    let n_pf = 1000.0;
    let tau_pf = 0.25;
    let n_cd_at_kappa1 = match cd_rule {
        CdPacketRule::FixedCount => cd_packets,
        CdPacketRule::RescaleCount { ref_kappa } => (ref_kappa * cd_packets as f64).ceil() as u32,
    };
    let cd_bits = match cd_rule {
        CdPacketRule::FixedCount => et_bits / cd_packets as f64,
        CdPacketRule::RescaleCount { ref_kappa } => et_bits / (ref_kappa * cd_packets as f64),
    };
    let mut links = BTreeMap::new();
    links.insert(LinkId::Hl, lattice_link(3, hl_bits, 1e-5, t_u));
    links.insert(LinkId::Ll, lattice_link(1, 64.0 * KB, 1e-5, t_u));
    links.insert(LinkId::Cd, lattice_link(cd_packets, cd_bits, eps_cd, t_u));
    links.insert(LinkId::Vi, lattice_link(vi_packets, 64.0 * KB, eps_vi, t_u));
    links.insert(LinkId::Pf1, pf_link(1e4, t_s, n_pf, tau_pf / 2.0));
    links.insert(LinkId::Pf2, pf_link(1e4, t_s, n_pf, tau_pf / 2.0));
    ScenarioConfig {
        links,
        compute: ComputeConfig {
            mec_shape: 1.25,
            ra_shape: 1.5,
            rate_ll: 1.0,
            rate_vi: 1.0,
            mec_freq: 15e9,
            ra_freq: 5e9,
            hl_total_bits: 3.0 * hl_bits,
            et_bits,
        },
        compression: CompressionModel {
            kind: CompressionKind::Exp,
            psi: 3.5,
            omega0: 0.1,
            omegas: [1.0; 8],
            kappa_max: 3.0,
        },
        t_u,
        t_s,
        tau_pf,
        n_pf,
        n_cd_at_kappa1,
        preset_name: name.to_string(),
        cd_packet_rule: cd_rule,
    }
}

fn preset_figure(
    t_u: f64,
    cd_packets_at_ref: u32,
    vi_packets: u32,
    eps_cd: f64,
    eps_vi: f64,
    name: &str,
) -> ScenarioConfig {
    base_preset(
        t_u,
        cd_packets_at_ref,
        vi_packets,
        eps_cd,
        eps_vi,
        CdPacketRule::RescaleCount { ref_kappa: 1.1 },
        name,
    )
}

fn preset_opt_default() -> ScenarioConfig {
    base_preset(5e-3, 20, 3, 1e-3, 1e-4, CdPacketRule::FixedCount, "opt-default")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn presets_load_and_validate() {
        for name in ["fig4", "fig5", "fig6", "fig7", "opt-default"] {
            let s = ScenarioConfig::preset(name).unwrap();
            assert_eq!(s.preset_name, name);
        }
        assert!(ScenarioConfig::preset("fig3").is_err());
        assert!(ScenarioConfig::preset("nope").is_err());
    }

    #[test]
    fn outage_rate_reference_behavior() {
        let mut link = lattice_link(1, 1000.0, 1e-6, 1e-3);
        // eps -> 0+ drives the rate to zero
        link.outage_prob = 1e-12;
        let r_small = outage_rate(&link);
        link.outage_prob = 0.0;
        assert_eq!(outage_rate(&link), 0.0);
        assert!(r_small > 0.0 && r_small < 1.0e-3 * link.bandwidth);
        // snr = 1 and eps = 1 - 1/e give exactly R = B
        let link = LinkConfig {
            bandwidth: 1e4,
            power: 1.0,
            distance: 1.0,
            path_loss_exp: 2.0,
            noise_psd: 1e-4,
            outage_prob: 1.0 - (-1.0f64).exp(),
            packets: 1,
            packet_bits: 1e4,
        };
        assert_relative_eq!(outage_rate(&link), link.bandwidth, max_relative = 1e-12);
    }

    #[test]
    fn preset_links_round_trip_the_slot_time() {
        let s = ScenarioConfig::preset("fig4").unwrap();
        for id in [LinkId::Hl, LinkId::Ll, LinkId::Cd, LinkId::Vi] {
            assert_relative_eq!(packet_time(s.link(id)), s.t_u, max_relative = 1e-9);
        }
    }

    #[test]
    fn deadline_capacity_limits_and_monotonicity() {
        let link = pf_link(1e4, 0.1, 1000.0, 0.125);
        let c = &DEADLINE_CONSTANTS;
        let r_inf = link.bandwidth * (1.0 + c.c1 * link.mean_snr() / c.c2).log2();
        assert_relative_eq!(deadline_capacity(&link, 1e12), r_inf, max_relative = 1e-6);
        let mut last = 0.0;
        for i in 1..=20 {
            let r = deadline_capacity(&link, 0.02 * i as f64);
            assert!(r > last);
            last = r;
        }
        let mut boosted = link;
        boosted.power *= 2.0;
        assert!(deadline_capacity(&boosted, 0.1) > deadline_capacity(&link, 0.1));
    }

    #[test]
    fn pf_power_inverts_the_capacity() {
        let link = pf_link(1e4, 0.1, 1000.0, 0.125);
        for tau in [0.05, 0.1, 0.125, 0.3] {
            let p = pf_power_for_deadline(&link, tau, 0.1, 1000.0);
            let mut at_p = link;
            at_p.power = p;
            // rate at that power equals n_pf / T_s
            assert_relative_eq!(deadline_capacity(&at_p, tau), 1000.0 / 0.1, max_relative = 1e-9);
        }
        // doubling the deadline strictly lowers the power
        let p1 = pf_power_for_deadline(&link, 0.1, 0.1, 1000.0);
        let p2 = pf_power_for_deadline(&link, 0.2, 0.1, 1000.0);
        assert!(p2 < p1);
    }

    #[test]
    fn compression_cost_reference_values() {
        let s = ScenarioConfig::preset("fig4").unwrap();
        let m = &s.compression;
        assert_abs_diff_eq!(m.compress_cycles_per_bit(1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.decompress_cycles_per_bit(1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            m.compress_cycles_per_bit(1.1).unwrap(),
            13.877_611_272_886_973,
            max_relative = 1e-12
        );
        // decompression is omega0 times compression, pointwise
        for k in [1.05, 1.3, 2.0] {
            assert_relative_eq!(
                m.decompress_cycles_per_bit(k).unwrap(),
                0.1 * m.compress_cycles_per_bit(k).unwrap(),
                max_relative = 1e-13
            );
        }
        assert!(m.compress_cycles_per_bit(0.9).is_err());
        assert!(m.compress_cycles_per_bit(3.5).is_err());
    }

    #[test]
    fn power_law_cost_is_monotone() {
        let m = CompressionModel {
            kind: CompressionKind::Power,
            psi: 1.0,
            omega0: 0.5,
            omegas: [2.0, 1.5, 0.8, 0.3, 1.0, 2.0, 1.4, 0.1],
            kappa_max: 4.0,
        };
        let mut last = 0.0;
        for i in 0..=30 {
            let k = 1.0 + 0.1 * i as f64;
            let z = m.compress_cycles_per_bit(k).unwrap();
            assert!(z > last);
            last = z;
        }
    }

    #[test]
    fn ratio_per_decompression_cost_is_decreasing_for_steep_exponent() {
        // the quantity kappa / zeta_d drives the decompression-time mean
        let s = ScenarioConfig::preset("fig4").unwrap();
        let mut last = f64::INFINITY;
        for i in 0..=100 {
            let k = 1.001 + (3.0 - 1.001) * i as f64 / 100.0;
            let g = k / s.compression.decompress_cycles_per_bit(k).unwrap();
            assert!(g < last, "not decreasing at {k}");
            last = g;
        }
    }

    #[test]
    fn continuous_builder_matches_closed_form_cumulants() {
        let s = ScenarioConfig::preset("fig4").unwrap();
        for kind in [ContinuousKind::EventTriggered, ContinuousKind::Loop] {
            for kappa in [1.0, 1.1, 1.7, 3.0] {
                let m = s.continuous_cgf(kappa, kind).unwrap();
                let c = s.continuous_cumulants(kappa, kind).unwrap();
                let d = m.eval(0.0).unwrap();
                assert_relative_eq!(d.k1, c.mean, max_relative = 1e-12);
                assert_relative_eq!(d.k2, c.variance, max_relative = 1e-12);
                assert_relative_eq!(d.k3, c.third, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn event_mean_reference_value() {
        // compression-time mean at ratio 1.1: 8388608 * 13.8776... / 5e9
        let s = ScenarioConfig::preset("fig4").unwrap();
        let m = s.continuous_cgf(1.1, ContinuousKind::EventTriggered).unwrap();
        let compress_mean = m.gamma_terms()[0].mean();
        assert_relative_eq!(compress_mean, 0.023_282_768_188_925_97, max_relative = 1e-12);
        let c = s.continuous_cumulants(1.1, ContinuousKind::EventTriggered).unwrap();
        assert_relative_eq!(c.mean, 0.024_687_357_285_560_09, max_relative = 1e-12);
    }

    #[test]
    fn ratio_one_drops_compression_terms() {
        let s = ScenarioConfig::preset("fig4").unwrap();
        let m = s.continuous_cgf(1.0, ContinuousKind::EventTriggered).unwrap();
        assert_eq!(m.gamma_terms().len(), 1); // feature extraction only
    }

    #[test]
    fn lattice_builder_counts_and_slots() {
        let s = ScenarioConfig::preset("fig4").unwrap();
        let m = s.lattice_cgf(1.1, LatticeKind::EventTriggered).unwrap();
        assert_eq!(m.total_packets(), 23);
        // expected slot count matches eval at zero (in slot units)
        let slots = s.expected_slots(1.1, LatticeKind::EventTriggered).unwrap();
        let d = m.count_units().unwrap().eval(0.0).unwrap();
        assert_relative_eq!(d.k1, slots, max_relative = 1e-12);
        // packet-count rescaling: ceil(1.1/1.2 * 20) = 19
        assert_eq!(s.cd_packets(1.2).unwrap(), 19);
        assert_eq!(s.cd_packets(1.1).unwrap(), 20);
        let opt = ScenarioConfig::preset("opt-default").unwrap();
        assert_eq!(opt.cd_packets(1.2).unwrap(), 20);
    }

    #[test]
    fn clt_builder_matches_closed_form_cumulants() {
        let s = ScenarioConfig::preset("fig4").unwrap();
        for kind in [ContinuousKind::EventTriggered, ContinuousKind::Loop] {
            let m = s.clt_cgf(1.1, kind).unwrap();
            let c = s.clt_cumulants(1.1, kind).unwrap();
            let d = m.eval(0.0).unwrap();
            assert_relative_eq!(d.k1, c.mean, max_relative = 1e-12);
            assert_relative_eq!(d.k2, c.variance, max_relative = 1e-12);
            // the Gaussian replacement adds no third cumulant
            assert_relative_eq!(d.k3, c.third, max_relative = 1e-12);
        }
    }

    #[test]
    fn spacing_mismatch_is_a_config_error() {
        let mut s = ScenarioConfig::preset("fig4").unwrap();
        let cd = s.links.get_mut(&LinkId::Cd).unwrap();
        cd.power *= 0.5; // slower rate, longer packet time
        assert!(matches!(s.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn toml_and_json_round_trip() {
        let s = ScenarioConfig::preset("fig5").unwrap();
        let json_text = serde_json::to_string(&s).unwrap();
        let back = ScenarioConfig::from_json_str(&json_text).unwrap();
        assert_eq!(s, back);
        // TOML float formatting is not ulp-exact; compare structurally
        let toml_text = toml::to_string(&s).unwrap();
        let back = ScenarioConfig::from_toml_str(&toml_text).unwrap();
        assert_eq!(back.links.len(), 6);
        assert_eq!(back.preset_name, s.preset_name);
        assert_eq!(back.n_cd_at_kappa1, s.n_cd_at_kappa1);
        assert_relative_eq!(back.t_u, s.t_u, max_relative = 1e-14);
        assert_relative_eq!(
            back.link(LinkId::Cd).power,
            s.link(LinkId::Cd).power,
            max_relative = 1e-12
        );
        // the documented field names appear on the wire
        for key in ["t_u", "T_s", "tau_PF", "n_PF", "N_CD_at_kappa1", "rate_LL", "rate_VI"] {
            assert!(toml_text.contains(key), "missing {key} in TOML");
        }
    }

    #[test]
    fn mean_t_cl_is_component_means() {
        let s = ScenarioConfig::preset("fig4").unwrap();
        // 4 packets at 5 ms (tiny retransmission correction) plus the
        // feature-extraction mean 3*1048576*1.25/15e9
        let expect = 3.0 * 5e-3 / (1.0 - 1e-5) + 5e-3 / (1.0 - 1e-5)
            + 3.0 * 1_048_576.0 * 1.25 / 15e9;
        assert_relative_eq!(s.mean_t_cl(), expect, max_relative = 1e-12);
    }
}
