//! Static description of the deployment: base stations, spectrum, power and QoS.

use crate::channel::{ChannelParams, Point3, dbm_to_watts};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsKind {
    /// Terrestrial base station.
    Tbs,
    /// Non-terrestrial (UAV) base station.
    Ntbs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaseStation {
    pub kind: BsKind,
    pub position: Point3,
}

/// How SRB index sets are laid out across base stations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionStyle {
    /// Contiguous blocks, identical frequencies for every BS.
    Contiguous,
    /// BS `n` cyclically shifted by `n` subchannels. Breaks group alignment;
    /// only useful as a negative control.
    Shifted,
}

/// Affine maps used to bring dB quantities into roughly [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationScaling {
    pub gain_db: (f64, f64),
    pub pathloss_db: (f64, f64),
}

impl Default for ObservationScaling {
    fn default() -> Self {
        Self {
            gain_db: (-160.0, -60.0),
            pathloss_db: (60.0, 160.0),
        }
    }
}

impl ObservationScaling {
    pub fn gain(&self, db: f64) -> f64 {
        affine(db, self.gain_db)
    }

    pub fn pathloss(&self, db: f64) -> f64 {
        affine(db, self.pathloss_db)
    }
}

fn affine(v: f64, (lo, hi): (f64, f64)) -> f64 {
    2.0 * (v - lo) / (hi - lo) - 1.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub base_stations: Vec<BaseStation>,
    /// User slots per BS.
    pub k_max: usize,
    /// Subchannels per BS (F).
    pub subchannels: usize,
    /// SRBs per BS (M).
    pub srbs: usize,
    /// Hz
    pub subchannel_bandwidth: f64,
    /// W, per BS
    pub p_max: f64,
    /// bit/s, per user
    pub eta: f64,
    /// Deployment rectangle in meters, origin at (0, 0).
    pub area: [f64; 2],
    pub user_height: f64,
    pub channel: ChannelParams,
    pub partition: PartitionStyle,
    pub scaling: ObservationScaling,
}

impl SystemConfig {
    /// Two TBSs and one UAV at 200 m over a 1 km square, 24 subchannels in 3 SRBs.
    pub fn desk() -> Self {
        Self {
            base_stations: vec![
                BaseStation {
                    kind: BsKind::Tbs,
                    position: [250.0, 500.0, 25.0],
                },
                BaseStation {
                    kind: BsKind::Tbs,
                    position: [750.0, 500.0, 25.0],
                },
                BaseStation {
                    kind: BsKind::Ntbs,
                    position: [500.0, 500.0, 200.0],
                },
            ],
            k_max: 6,
            subchannels: 24,
            srbs: 3,
            subchannel_bandwidth: 125e3,
            p_max: dbm_to_watts(46.0),
            eta: 2e6,
            area: [1000.0, 1000.0],
            user_height: 1.5,
            channel: ChannelParams::default(),
            partition: PartitionStyle::Contiguous,
            scaling: ObservationScaling::default(),
        }
    }

    pub fn n_bs(&self) -> usize {
        self.base_stations.len()
    }

    pub fn srb_size(&self) -> usize {
        self.subchannels / self.srbs
    }

    /// Total user slots `N * K_max`.
    pub fn user_slots(&self) -> usize {
        self.n_bs() * self.k_max
    }

    /// Action classes per subchannel: unactivated plus one per user slot.
    pub fn classes(&self) -> usize {
        self.k_max + 1
    }

    pub fn agents(&self) -> usize {
        self.n_bs() * self.srbs
    }

    pub fn noise_power(&self) -> f64 {
        self.subchannel_bandwidth * self.channel.noise_density
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_stations.is_empty() {
            return Err(Error::Config("at least one base station is required".into()));
        }
        if self.k_max == 0 || self.subchannels == 0 || self.srbs == 0 {
            return Err(Error::Config("K_max, F and M must be positive".into()));
        }
        if self.subchannels % self.srbs != 0 {
            return Err(Error::Config(format!(
                "F = {} is not divisible by M = {}",
                self.subchannels, self.srbs
            )));
        }
        if !(self.p_max > 0.0) {
            return Err(Error::Config("p_max must be > 0".into()));
        }
        if !(self.subchannel_bandwidth > 0.0) {
            return Err(Error::Config("subchannel bandwidth must be > 0".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::Config("QoS target must be >= 0".into()));
        }
        if !(self.area[0] > 0.0 && self.area[1] > 0.0) {
            return Err(Error::Config("deployment area must be positive".into()));
        }
        let (lo, hi) = self.scaling.gain_db;
        let (plo, phi) = self.scaling.pathloss_db;
        if !(hi > lo && phi > plo) {
            return Err(Error::Config("observation scaling bounds must be increasing".into()));
        }
        self.channel.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_is_valid() {
        let c = SystemConfig::desk();
        c.validate().unwrap();
        assert_eq!(c.srb_size(), 8);
        assert_eq!(c.user_slots(), 18);
    }

    #[test]
    fn indivisible_partition_rejected() {
        let mut c = SystemConfig::desk();
        c.subchannels = 7;
        c.srbs = 2;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn scaling_maps_bounds() {
        let s = ObservationScaling::default();
        assert_eq!(s.gain(-160.0), -1.0);
        assert_eq!(s.gain(-60.0), 1.0);
        assert_eq!(s.pathloss(110.0), 0.0);
    }
}
