//! Large-scale pathloss and small-scale fading for terrestrial and aerial links.
//!
//! Pathloss follows a log-distance law per link class. Aerial links are gated
//! between line-of-sight and non-line-of-sight with a logistic probability in
//! the elevation angle; line-of-sight links get a Rician small-scale factor,
//! everything else Rayleigh.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Point3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkClass {
    Terrestrial,
    AerialLos,
    AerialNlos,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkGeometry {
    pub tx_position: Point3,
    pub rx_position: Point3,
    pub distance: f64,
    pub elevation_deg: f64,
}

impl LinkGeometry {
    /// Ground link; elevation is reported as 0 by convention.
    pub fn terrestrial(tx: Point3, rx: Point3) -> Self {
        Self {
            tx_position: tx,
            rx_position: rx,
            distance: distance(tx, rx),
            elevation_deg: 0.0,
        }
    }

    /// Air-to-ground link; elevation measured at the receiver.
    pub fn aerial(tx: Point3, rx: Point3) -> Self {
        let ground = ((tx[0] - rx[0]).powi(2) + (tx[1] - rx[1]).powi(2)).sqrt();
        let dh = tx[2] - rx[2];
        Self {
            tx_position: tx,
            rx_position: rx,
            distance: distance(tx, rx),
            elevation_deg: dh.atan2(ground).to_degrees().clamp(0.0, 90.0),
        }
    }
}

fn distance(a: Point3, b: Point3) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathlossModel {
    pub link_class: LinkClass,
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
    pub reference_distance: f64,
}

impl PathlossModel {
    pub fn new(
        link_class: LinkClass,
        intercept_db: f64,
        slope_db_per_decade: f64,
        reference_distance: f64,
    ) -> Result<Self> {
        if !(slope_db_per_decade >= 0.0) {
            return Err(Error::Config(format!(
                "pathloss slope must be >= 0, got {slope_db_per_decade}"
            )));
        }
        if !(reference_distance > 0.0) || !intercept_db.is_finite() {
            return Err(Error::Config(
                "pathloss reference distance must be > 0 and intercept finite".into(),
            ));
        }
        Ok(Self {
            link_class,
            intercept_db,
            slope_db_per_decade,
            reference_distance,
        })
    }

    /// Macro-cell defaults: 128.1 + 37.6 log10(d / 1 km).
    pub fn terrestrial_default() -> Self {
        Self::new(LinkClass::Terrestrial, 128.1, 37.6, 1000.0).unwrap()
    }

    /// Free-space-like air-to-ground law.
    pub fn aerial_los_default() -> Self {
        Self::new(LinkClass::AerialLos, 98.4, 20.0, 1000.0).unwrap()
    }

    /// Free-space law plus 20 dB excess loss.
    pub fn aerial_nlos_default() -> Self {
        Self::new(LinkClass::AerialNlos, 118.4, 20.0, 1000.0).unwrap()
    }
}

pub fn pathloss_db(geometry: &LinkGeometry, model: &PathlossModel) -> Result<f64> {
    if !(geometry.distance > 0.0) {
        return Err(Error::Domain(format!(
            "pathloss needs a positive distance, got {}",
            geometry.distance
        )));
    }
    Ok(model.intercept_db
        + model.slope_db_per_decade * (geometry.distance / model.reference_distance).log10())
}

/// Logistic line-of-sight probability `1 / (1 + a exp(-b (theta - a)))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LosModel {
    pub a: f64,
    pub b: f64,
}

impl Default for LosModel {
    fn default() -> Self {
        Self { a: 9.61, b: 0.16 }
    }
}

impl LosModel {
    pub fn probability(&self, elevation_deg: f64) -> Result<f64> {
        los_probability(elevation_deg, self)
    }
}

pub fn los_probability(elevation_deg: f64, model: &LosModel) -> Result<f64> {
    if !(0.0..=90.0).contains(&elevation_deg) {
        return Err(Error::Domain(format!(
            "elevation must lie in [0, 90] degrees, got {elevation_deg}"
        )));
    }
    Ok(1.0 / (1.0 + model.a * (-model.b * (elevation_deg - model.a)).exp()))
}

/// Small-scale law for one link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SmallScaleKind {
    Rayleigh,
    /// `k_factor` is linear; `f64::INFINITY` gives a pure dominant path.
    Rician { k_factor: f64 },
}

impl SmallScaleKind {
    pub fn rician_db(k_db: f64) -> Self {
        SmallScaleKind::Rician {
            k_factor: 10f64.powf(k_db / 10.0),
        }
    }
}

/// One small-scale draw: the diffuse (scatter) part carried as fading state,
/// and the resulting coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallScaleDraw<T> {
    pub scatter: Complex<T>,
    pub coefficient: Complex<T>,
}

/// Unit-variance circularly-symmetric complex Gaussian.
pub fn complex_gaussian<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(T::lit(re * s), T::lit(im * s))
}

/// Draws the next small-scale coefficient. The scatter part evolves as
/// `g' = rho g + sqrt(1 - rho^2) w`; with no previous state it starts from the
/// stationary law.
pub fn sample_small_scale<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    kind: SmallScaleKind,
    rho: T,
    prev_scatter: Option<Complex<T>>,
) -> SmallScaleDraw<T> {
    let scatter = match prev_scatter {
        Some(g) if rho == T::one() => g,
        Some(g) => {
            let w = complex_gaussian::<T, R>(rng);
            g * rho + w * (T::one() - rho * rho).sqrt()
        }
        None => complex_gaussian::<T, R>(rng),
    };
    let coefficient = match kind {
        SmallScaleKind::Rayleigh => scatter,
        SmallScaleKind::Rician { k_factor } => {
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let dominant = Complex::new(T::lit(phase.cos()), T::lit(phase.sin()));
            if k_factor.is_infinite() {
                dominant
            } else {
                let los = T::lit((k_factor / (k_factor + 1.0)).sqrt());
                let nlos = T::lit((1.0 / (k_factor + 1.0)).sqrt());
                dominant * los + scatter * nlos
            }
        }
    };
    SmallScaleDraw {
        scatter,
        coefficient,
    }
}

/// `h = 10^(-PL/20) * small_scale`.
pub fn channel_coefficient<T: Scalar>(pathloss_db: T, small_scale: Complex<T>) -> Complex<T> {
    let amplitude = T::lit(10.0).powf(-pathloss_db / T::lit(20.0));
    small_scale * amplitude
}

pub fn noise_power(bandwidth_hz: f64, density_w_per_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::Domain(format!(
            "bandwidth must be > 0, got {bandwidth_hz}"
        )));
    }
    Ok(bandwidth_hz * density_w_per_hz)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Channel parameters for every link class plus noise.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    pub terrestrial: PathlossModel,
    pub aerial_los: PathlossModel,
    pub aerial_nlos: PathlossModel,
    pub los: LosModel,
    pub rician_k_db: f64,
    pub fading_rho: f64,
    /// W/Hz
    pub noise_density: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            terrestrial: PathlossModel::terrestrial_default(),
            aerial_los: PathlossModel::aerial_los_default(),
            aerial_nlos: PathlossModel::aerial_nlos_default(),
            los: LosModel::default(),
            rician_k_db: 10.0,
            fading_rho: 0.0,
            noise_density: dbm_to_watts(-174.0),
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.fading_rho) && self.fading_rho != 1.0 {
            return Err(Error::Config(format!(
                "fading correlation must lie in [0, 1], got {}",
                self.fading_rho
            )));
        }
        if !(self.noise_density > 0.0) {
            return Err(Error::Config("noise density must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn at(d: f64) -> LinkGeometry {
        LinkGeometry::terrestrial([0.0, 0.0, 0.0], [d, 0.0, 0.0])
    }

    #[test]
    fn pathloss_examples() {
        let m = PathlossModel::terrestrial_default();
        assert!((pathloss_db(&at(1000.0), &m).unwrap() - 128.1).abs() < 1e-12);
        assert!((pathloss_db(&at(100.0), &m).unwrap() - 90.5).abs() < 1e-12);
        assert!((pathloss_db(&at(10000.0), &m).unwrap() - 165.7).abs() < 1e-12);
        assert!(matches!(pathloss_db(&at(0.0), &m), Err(Error::Domain(_))));
    }

    #[test]
    fn negative_slope_rejected() {
        assert!(PathlossModel::new(LinkClass::Terrestrial, 100.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn geometry_invariants() {
        let g = LinkGeometry::aerial([0.0, 0.0, 200.0], [200.0, 0.0, 0.0]);
        assert!((g.distance - (2.0f64 * 200.0 * 200.0).sqrt()).abs() < 1e-9);
        assert!((g.elevation_deg - 45.0).abs() < 1e-12);
    }

    #[test]
    fn los_examples() {
        let m = LosModel::default();
        assert!(los_probability(90.0, &m).unwrap() >= 0.99);
        assert!(los_probability(0.0, &m).unwrap() <= 0.1);
        // direct evaluation of the logistic at 45 degrees
        let p45 = los_probability(45.0, &m).unwrap();
        assert!((p45 - 0.967_691_899_947_242_3).abs() < 1e-12, "{p45}");
        assert!(los_probability(-1.0, &m).is_err());
        assert!(los_probability(90.5, &m).is_err());
    }

    #[test]
    fn los_monotone_on_grid() {
        let m = LosModel::default();
        let mut prev = 0.0;
        for deg in 0..=90 {
            let p = los_probability(deg as f64, &m).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn full_correlation_keeps_state() {
        let mut r = rng::stream(1, 0);
        let g = Complex::new(0.3f64, -0.7);
        let d = sample_small_scale(&mut r, SmallScaleKind::Rayleigh, 1.0, Some(g));
        assert_eq!(d.coefficient, g);
    }

    #[test]
    fn pure_dominant_path_has_unit_modulus() {
        let mut r = rng::stream(2, 0);
        for _ in 0..100 {
            let d = sample_small_scale::<f64, _>(
                &mut r,
                SmallScaleKind::Rician {
                    k_factor: f64::INFINITY,
                },
                0.0,
                None,
            );
            assert!((d.coefficient.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rayleigh_unit_mean_power() {
        let mut r = rng::stream(3, 0);
        let n = 1_000_000;
        let mean: f64 = (0..n)
            .map(|_| {
                sample_small_scale::<f64, _>(&mut r, SmallScaleKind::Rayleigh, 0.0, None)
                    .coefficient
                    .norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
    }

    #[test]
    fn rician_unit_mean_power() {
        let mut r = rng::stream(4, 0);
        let n = 200_000;
        let kind = SmallScaleKind::rician_db(10.0);
        let mean: f64 = (0..n)
            .map(|_| sample_small_scale::<f64, _>(&mut r, kind, 0.0, None).coefficient.norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn coefficient_examples() {
        let one = Complex::new(1.0f64, 0.0);
        assert!((channel_coefficient(0.0, one) - one).norm() < 1e-15);
        assert!((channel_coefficient(20.0, one).norm_sqr() - 0.01).abs() < 1e-15);
        let h = channel_coefficient(90.5f64, Complex::new(0.6, 0.8));
        assert!((h.norm_sqr() / 8.912_509_381_337_441e-10 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_examples() {
        assert_eq!(noise_power(1.0, 1.0).unwrap(), 1.0);
        let n = noise_power(180e3, 10f64.powf(-20.4)).unwrap();
        assert!((n / 7.165_929_069_962_975e-16 - 1.0).abs() < 1e-12);
        assert!(noise_power(0.0, 1.0).is_err());
        assert!((dbm_to_watts(-174.0) - 10f64.powf(-20.4)).abs() < 1e-30);
        assert!((dbm_to_watts(46.0) - 39.810_717_055_349_69).abs() < 1e-9);
    }

    #[test]
    fn deterministic_streams() {
        let draw = |seed| {
            let mut r = rng::stream(seed, 7);
            (0..16)
                .map(|_| {
                    sample_small_scale::<f64, _>(&mut r, SmallScaleKind::Rayleigh, 0.0, None)
                        .coefficient
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }
}
