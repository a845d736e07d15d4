use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four expert driving styles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum StyleClass {
    Aggressive = 0,
    Passive = 1,
    Speeder = 2,
    Tailgater = 3,
}

pub const N_STYLES: usize = 4;

impl StyleClass {
    pub const ALL: [StyleClass; N_STYLES] = [
        StyleClass::Aggressive,
        StyleClass::Passive,
        StyleClass::Speeder,
        StyleClass::Tailgater,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StyleClass::Aggressive => "aggressive",
            StyleClass::Passive => "passive",
            StyleClass::Speeder => "speeder",
            StyleClass::Tailgater => "tailgater",
        }
    }
}

impl From<StyleClass> for u8 {
    fn from(c: StyleClass) -> u8 {
        c as u8
    }
}

impl TryFrom<u8> for StyleClass {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        StyleClass::ALL
            .get(usize::from(v))
            .copied()
            .ok_or_else(|| format!("style class {v} out of range 0..4"))
    }
}

/// IDM and MOBIL parameters of one expert driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    pub desired_speed: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub min_gap: f64,
    pub time_headway: f64,
    pub accel_exponent: f64,
    pub politeness: f64,
    pub change_threshold: f64,
    pub safe_decel: f64,
}

impl StyleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("desired_speed", self.desired_speed),
            ("max_accel", self.max_accel),
            ("comfortable_decel", self.comfortable_decel),
            ("min_gap", self.min_gap),
            ("time_headway", self.time_headway),
            ("accel_exponent", self.accel_exponent),
            ("change_threshold", self.change_threshold),
            ("safe_decel", self.safe_decel),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.politeness) {
            return Err(Error::invalid("politeness", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Class template: Gaussian desired speed plus fixed IDM/MOBIL settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleTemplate {
    pub v0_mean: f64,
    pub v0_std: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub min_gap: f64,
    pub time_headway: f64,
    pub accel_exponent: f64,
    pub politeness: f64,
    pub change_threshold: f64,
    pub safe_decel: f64,
}

impl StyleTemplate {
    const fn shared(v0_mean: f64, max_accel: f64, time_headway: f64, min_gap: f64) -> Self {
        Self {
            v0_mean,
            v0_std: 1.0,
            max_accel,
            comfortable_decel: 2.0,
            min_gap,
            time_headway,
            accel_exponent: 4.0,
            politeness: 0.3,
            change_threshold: 0.2,
            safe_decel: 4.0,
        }
    }

    pub fn with_desired_speed(&self, v0: f64) -> StyleParams {
        StyleParams {
            desired_speed: v0,
            max_accel: self.max_accel,
            comfortable_decel: self.comfortable_decel,
            min_gap: self.min_gap,
            time_headway: self.time_headway,
            accel_exponent: self.accel_exponent,
            politeness: self.politeness,
            change_threshold: self.change_threshold,
            safe_decel: self.safe_decel,
        }
    }

    pub fn mean_params(&self) -> StyleParams {
        self.with_desired_speed(self.v0_mean)
    }
}

/// Templates indexed by [`StyleClass`]: a 2x2 design of desired speed and
/// headway, with acceleration following speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleTemplates {
    pub aggressive: StyleTemplate,
    pub passive: StyleTemplate,
    pub speeder: StyleTemplate,
    pub tailgater: StyleTemplate,
}

impl Default for StyleTemplates {
    fn default() -> Self {
        Self {
            aggressive: StyleTemplate::shared(18.0, 3.0, 0.5, 1.0),
            passive: StyleTemplate::shared(10.0, 1.5, 2.0, 4.0),
            speeder: StyleTemplate::shared(18.0, 3.0, 2.0, 4.0),
            tailgater: StyleTemplate::shared(10.0, 1.5, 0.5, 1.0),
        }
    }
}

impl StyleTemplates {
    pub fn get(&self, class: StyleClass) -> &StyleTemplate {
        match class {
            StyleClass::Aggressive => &self.aggressive,
            StyleClass::Passive => &self.passive,
            StyleClass::Speeder => &self.speeder,
            StyleClass::Tailgater => &self.tailgater,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in StyleClass::ALL {
            let t = self.get(c);
            if !(t.v0_std >= 0.0) {
                return Err(Error::invalid("v0_std", "must be >= 0"));
            }
            t.mean_params().validate()?;
        }
        Ok(())
    }
}

/// Samples a driver of `class`: desired speed from the class Gaussian,
/// truncated to two standard deviations and to positive values.
pub fn sample_style<R: Rng + ?Sized>(templates: &StyleTemplates, class: StyleClass, rng: &mut R) -> StyleParams {
    let t = templates.get(class);
    if t.v0_std == 0.0 {
        return t.mean_params();
    }
    let normal = Normal::new(t.v0_mean, t.v0_std).expect("validated std");
    loop {
        let v0: f64 = normal.sample(rng);
        if (v0 - t.v0_mean).abs() <= 2.0 * t.v0_std && v0 > 0.0 {
            return t.with_desired_speed(v0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn template_ordering_follows_style_descriptions() {
        let t = StyleTemplates::default();
        assert!(t.aggressive.v0_mean > t.passive.v0_mean);
        assert!(t.aggressive.time_headway < t.passive.time_headway);
        assert!(t.aggressive.max_accel > t.passive.max_accel);
        assert!(t.speeder.v0_mean > t.passive.v0_mean);
        assert!(t.speeder.time_headway > t.aggressive.time_headway);
        assert!(t.tailgater.v0_mean < t.speeder.v0_mean);
        assert!(t.tailgater.time_headway < t.passive.time_headway);
        t.validate().unwrap();
    }

    #[test]
    fn sampling_is_seeded_and_truncated() {
        let t = StyleTemplates::default();
        let a = sample_style(&t, StyleClass::Speeder, &mut stream(5, "x", &[]));
        let b = sample_style(&t, StyleClass::Speeder, &mut stream(5, "x", &[]));
        assert_eq!(a, b);
        let mut rng = stream(9, "x", &[]);
        for _ in 0..2000 {
            let p = sample_style(&t, StyleClass::Passive, &mut rng);
            assert!((p.desired_speed - 10.0).abs() <= 2.0);
            assert_eq!(p.time_headway, 2.0);
        }
    }

    #[test]
    fn class_label_round_trip() {
        for c in StyleClass::ALL {
            assert_eq!(StyleClass::try_from(u8::from(c)).unwrap(), c);
        }
        assert!(StyleClass::try_from(4).is_err());
    }
}
