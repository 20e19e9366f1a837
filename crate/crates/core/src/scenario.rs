//! Monte Carlo drops: base-station layout, user placement, path loss,
//! log-normal shadowing, Rayleigh fading and thermal noise.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::model::{ChannelSet, NetworkConfig, C64};

/// Largest supported number of cells.
pub const MAX_CELLS: usize = 7;

/// `10·log₁₀(gain) = slope·log₁₀(d / distance_unit_m) + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLoss {
    pub slope: f64,
    pub intercept: f64,
    #[serde(default = "one")]
    pub distance_unit_m: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss {
            slope: -38.0,
            intercept: -34.5,
            distance_unit_m: 1.0,
        }
    }
}

/// Experiment description. Key names in configuration files match the field
/// names shown by `serde` (`K`, `M_tilde`, `N_tilde`, `P_c_dbm`, …).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M_tilde")]
    pub m_tilde: usize,
    #[serde(rename = "N_tilde")]
    pub n_tilde: usize,
    #[serde(default = "defaults::inter_bs")]
    pub inter_bs_distance_m: f64,
    #[serde(default = "defaults::min_user_bs")]
    pub min_user_bs_distance_m: f64,
    #[serde(default = "defaults::bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "defaults::noise_figure")]
    pub noise_figure_db: f64,
    #[serde(default = "defaults::shadowing")]
    pub shadowing_std_db: f64,
    #[serde(default = "defaults::thermal")]
    pub thermal_noise_dbm_per_hz: f64,
    #[serde(default)]
    pub pathloss: PathLoss,
    #[serde(default)]
    pub snr_db: f64,
    /// Transmit power is `power_unit_w · 10^(snr_db/10)`.
    #[serde(default = "one")]
    pub power_unit_w: f64,
    #[serde(rename = "P_c_dbm", default = "defaults::circuit")]
    pub p_c_dbm: f64,
    #[serde(rename = "P_0_dbm", default = "defaults::base")]
    pub p_0_dbm: f64,
    #[serde(default)]
    pub master_seed: u64,
}

mod defaults {
    pub fn inter_bs() -> f64 {
        1000.0
    }
    pub fn min_user_bs() -> f64 {
        400.0
    }
    pub fn bandwidth() -> f64 {
        1e7
    }
    pub fn noise_figure() -> f64 {
        9.0
    }
    pub fn shadowing() -> f64 {
        8.0
    }
    pub fn thermal() -> f64 {
        -174.0
    }
    pub fn circuit() -> f64 {
        30.0
    }
    pub fn base() -> f64 {
        40.0
    }
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            k: 3,
            m_tilde: 4,
            n_tilde: 1,
            inter_bs_distance_m: defaults::inter_bs(),
            min_user_bs_distance_m: defaults::min_user_bs(),
            bandwidth_hz: defaults::bandwidth(),
            noise_figure_db: defaults::noise_figure(),
            shadowing_std_db: defaults::shadowing(),
            thermal_noise_dbm_per_hz: defaults::thermal(),
            pathloss: PathLoss::default(),
            snr_db: 0.0,
            power_unit_w: 1.0,
            p_c_dbm: defaults::circuit(),
            p_0_dbm: defaults::base(),
            master_seed: 0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Transmit power in watts for a given SNR in dB.
pub fn snr_to_power(snr_db: f64) -> f64 {
    db_to_linear(snr_db)
}

/// Thermal noise power in watts over the scenario bandwidth.
pub fn noise_power(spec: &ScenarioSpec) -> f64 {
    dbm_to_watts(spec.thermal_noise_dbm_per_hz + 10.0 * spec.bandwidth_hz.log10() + spec.noise_figure_db)
}

/// Large-scale gain in dB at distance `d` meters, without shadowing.
pub fn pathloss_db(pathloss: &PathLoss, d: f64) -> f64 {
    pathloss.slope * (d / pathloss.distance_unit_m).log10() + pathloss.intercept
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_CELLS {
            return Err(invalid(format!("K must be in 1..={MAX_CELLS}, got {}", self.k)));
        }
        if self.m_tilde == 0 || self.n_tilde == 0 {
            return Err(invalid("M_tilde and N_tilde must be at least 1"));
        }
        let positive = [
            ("inter_bs_distance_m", self.inter_bs_distance_m),
            ("min_user_bs_distance_m", self.min_user_bs_distance_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("power_unit_w", self.power_unit_w),
            ("pathloss.distance_unit_m", self.pathloss.distance_unit_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let finite = [
            ("noise_figure_db", self.noise_figure_db),
            ("thermal_noise_dbm_per_hz", self.thermal_noise_dbm_per_hz),
            ("pathloss.slope", self.pathloss.slope),
            ("pathloss.intercept", self.pathloss.intercept),
            ("snr_db", self.snr_db),
            ("P_c_dbm", self.p_c_dbm),
            ("P_0_dbm", self.p_0_dbm),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        if !(self.shadowing_std_db >= 0.0 && self.shadowing_std_db.is_finite()) {
            return Err(invalid("shadowing_std_db must be non-negative"));
        }
        if self.min_user_bs_distance_m >= self.inter_bs_distance_m {
            return Err(invalid("min_user_bs_distance_m must be below inter_bs_distance_m"));
        }
        if self.min_user_bs_distance_m >= self.cell_radius() {
            return Err(invalid(format!(
                "min_user_bs_distance_m {} leaves no room inside the {:.1} m cell radius",
                self.min_user_bs_distance_m,
                self.cell_radius()
            )));
        }
        Ok(())
    }

    /// Outer placement radius: the hexagonal cell radius `D/√3`.
    pub fn cell_radius(&self) -> f64 {
        self.inter_bs_distance_m / 3f64.sqrt()
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| e.to_string())?;
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|message| Error::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario specs always serialize")
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario specs always serialize");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn transmit_power(&self) -> f64 {
        self.power_unit_w * snr_to_power(self.snr_db)
    }

    pub fn network_config(&self) -> Result<NetworkConfig> {
        NetworkConfig::uniform(
            self.k,
            self.m_tilde,
            self.n_tilde,
            self.transmit_power(),
            dbm_to_watts(self.p_c_dbm),
            dbm_to_watts(self.p_0_dbm),
            noise_power(self),
        )
    }

    /// Base stations on a regular K-gon with side `inter_bs_distance_m`,
    /// centered on the origin.
    pub fn bs_positions(&self) -> Vec<[f64; 2]> {
        if self.k == 1 {
            return vec![[0.0, 0.0]];
        }
        let radius = self.inter_bs_distance_m / (2.0 * (PI / self.k as f64).sin());
        (0..self.k)
            .map(|i| {
                let angle = PI / 2.0 + 2.0 * PI * i as f64 / self.k as f64;
                [radius * angle.cos(), radius * angle.sin()]
            })
            .collect()
    }
}

/// One channel realization together with the geometry that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct Drop {
    pub drop_index: u64,
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    /// `[user][bs]`, dB.
    pub shadowing_db: Vec<Vec<f64>>,
    /// `[user][bs]`, linear, shadowing included.
    pub large_scale_gains: Vec<Vec<f64>>,
    #[serde(serialize_with = "serialize_channels")]
    pub channels: ChannelSet,
    pub config: NetworkConfig,
}

fn serialize_channels<S: serde::Serializer>(h: &ChannelSet, ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    // Rows of `h_nᴴ` as `[re, im]` pairs.
    let mut seq = ser.serialize_seq(Some(h.users()))?;
    for n in 0..h.users() {
        let row: Vec<[f64; 2]> = h.matrix().row(n).iter().map(|v| [v.re, v.im]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

impl Drop {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("drops always serialize")
    }

    pub fn distance(&self, user: usize, bs: usize) -> f64 {
        let (u, b) = (self.user_positions[user], self.bs_positions[bs]);
        ((u[0] - b[0]).powi(2) + (u[1] - b[1]).powi(2)).sqrt()
    }
}

fn drop_rng(seed: u64, drop_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(drop_index);
    rng
}

/// Deterministic in `(spec, drop_index)`; the SNR only sets the budgets, so
/// drops with the same index share geometry and fading across SNR points.
///
/// Users of cell `k` are placed uniformly over the 120° sector of the annulus
/// `[min_user_bs_distance_m, D/√3]` facing the network center (the full
/// annulus when `K = 1`).
pub fn generate_drop(spec: &ScenarioSpec, drop_index: u64) -> Result<Drop> {
    spec.validate()?;
    let mut rng = drop_rng(spec.master_seed, drop_index);
    let cfg = spec.network_config()?;
    let bs = spec.bs_positions();
    let (k, n) = (spec.k, spec.k * spec.n_tilde);
    let (r_lo, r_hi) = (spec.min_user_bs_distance_m, spec.cell_radius());
    let half_width = if k == 1 { PI } else { PI / 3.0 };

    let mut users = Vec::with_capacity(n);
    for u in 0..n {
        let home = bs[u / spec.n_tilde];
        let facing = if k == 1 { 0.0 } else { (-home[1]).atan2(-home[0]) };
        let r = rng.random_range(r_lo * r_lo..r_hi * r_hi).sqrt();
        let angle = facing + rng.random_range(-half_width..half_width);
        users.push([home[0] + r * angle.cos(), home[1] + r * angle.sin()]);
    }

    let shadow = Normal::new(0.0, spec.shadowing_std_db).map_err(|e| invalid(e.to_string()))?;
    let mut shadowing_db = vec![vec![0.0; k]; n];
    let mut gains = vec![vec![0.0; k]; n];
    for u in 0..n {
        for b in 0..k {
            let d = ((users[u][0] - bs[b][0]).powi(2) + (users[u][1] - bs[b][1]).powi(2)).sqrt();
            shadowing_db[u][b] = shadow.sample(&mut rng);
            gains[u][b] = db_to_linear(pathloss_db(&spec.pathloss, d) + shadowing_db[u][b]);
        }
    }

    let mut channels = Vec::with_capacity(n);
    for gain_row in &gains {
        let mut h = DVector::zeros(cfg.antennas());
        for (b, gain) in gain_row.iter().enumerate() {
            let amp = gain.sqrt();
            for a in cfg.bs_rows(b) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                h[a] = C64::new(re, im) * (amp * std::f64::consts::FRAC_1_SQRT_2);
            }
        }
        channels.push(h);
    }

    Ok(Drop {
        drop_index,
        bs_positions: bs,
        user_positions: users,
        shadowing_db,
        large_scale_gains: gains,
        channels: ChannelSet::from_channels(&channels)?,
        config: cfg,
    })
}
