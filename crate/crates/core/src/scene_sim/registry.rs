//! Lamp fixtures and the id -> fixture registry.
//!
//! Text format, one fixture per line, `#` starts a comment:
//!
//! ```text
//! # id x_cm y_cm z_cm radius_cm freq_hz half_power_deg
//! 1 13 159 285 12 4000 60
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::WorldPoint;

/// Smallest accepted ratio between the modulation frequencies of two lamps.
pub const MIN_FREQUENCY_RATIO: f64 = 1.25;
/// Largest accepted spread of lamp heights, cm.
pub const MAX_HEIGHT_SPREAD: f64 = 0.1;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct LedId(pub u32);

impl fmt::Display for LedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate LED id {0}")]
    DuplicateId(LedId),
    #[error("LED {id}: {message}")]
    InvalidFixture { id: LedId, message: String },
    #[error("LEDs {a} and {b} differ in height by {dz:.3} cm (max {MAX_HEIGHT_SPREAD})")]
    UnequalHeights { a: LedId, b: LedId, dz: f64 },
    #[error(
        "LEDs {a} and {b}: modulation frequencies {fa} Hz and {fb} Hz are closer than ratio {MIN_FREQUENCY_RATIO}"
    )]
    FrequenciesTooClose { a: LedId, b: LedId, fa: f64, fb: f64 },
}

/// One ceiling lamp broadcasting its id as an on-off keyed square wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedFixture {
    pub id: LedId,
    pub position: WorldPoint,
    /// Radius of the luminous disc, cm.
    pub radius: f64,
    /// Modulation frequency, Hz.
    pub mod_frequency: f64,
    /// Half-power semi-angle, degrees.
    pub half_power_angle: f64,
}

impl LedFixture {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let bad = |message: &str| {
            Err(RegistryError::InvalidFixture {
                id: self.id,
                message: message.to_string(),
            })
        };
        let p = self.position;
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return bad("position must be finite");
        }
        if p.z < 0.0 {
            return bad("z must be >= 0");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius must be > 0");
        }
        if !(self.mod_frequency > 0.0 && self.mod_frequency.is_finite()) {
            return bad("modulation frequency must be > 0");
        }
        if !(self.half_power_angle > 0.0 && self.half_power_angle < 90.0) {
            return bad("half-power angle must lie in (0, 90) degrees");
        }
        Ok(())
    }

    /// Lambertian order `m = -ln 2 / ln cos(psi_1/2)`.
    pub fn lambertian_order(&self) -> f64 {
        -std::f64::consts::LN_2 / self.half_power_angle.to_radians().cos().ln()
    }

    /// Stripe period in sensor rows for a given row readout interval (seconds).
    pub fn stripe_period_rows(&self, row_readout_s: f64) -> f64 {
        1.0 / (self.mod_frequency * row_readout_s)
    }

    pub fn anchor(&self) -> crate::geometry::Anchor<f64> {
        crate::geometry::Anchor {
            id: self.id.0,
            position: self.position,
        }
    }
}

/// Immutable set of fixtures keyed by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<LedFixture>", into = "Vec<LedFixture>")]
pub struct LedRegistry {
    fixtures: Vec<LedFixture>,
}

impl LedRegistry {
    /// Validates and builds a registry. Fixtures keep their given order.
    pub fn new(fixtures: Vec<LedFixture>) -> Result<Self, RegistryError> {
        for f in &fixtures {
            f.validate()?;
        }
        for (n, a) in fixtures.iter().enumerate() {
            for b in &fixtures[n + 1..] {
                if a.id == b.id {
                    return Err(RegistryError::DuplicateId(a.id));
                }
                let dz = (a.position.z - b.position.z).abs();
                if dz > MAX_HEIGHT_SPREAD {
                    return Err(RegistryError::UnequalHeights { a: a.id, b: b.id, dz });
                }
                let ratio = a.mod_frequency.max(b.mod_frequency) / a.mod_frequency.min(b.mod_frequency);
                if ratio < MIN_FREQUENCY_RATIO - 1e-12 {
                    return Err(RegistryError::FrequenciesTooClose {
                        a: a.id,
                        b: b.id,
                        fa: a.mod_frequency,
                        fb: b.mod_frequency,
                    });
                }
            }
        }
        Ok(Self { fixtures })
    }

    /// The three ceiling lamps of the reference test platform.
    pub fn reference() -> Self {
        let lamp = |id, x, y, f| LedFixture {
            id: LedId(id),
            position: WorldPoint::new(x, y, 285.0),
            radius: 12.0,
            mod_frequency: f,
            half_power_angle: 60.0,
        };
        Self::new(vec![
            lamp(1, 13.0, 159.0, 4000.0),
            lamp(2, 159.0, 159.0, 2500.0),
            lamp(3, 159.0, 13.0, 1600.0),
        ])
        .expect("reference registry is valid")
    }

    pub fn fixtures(&self) -> &[LedFixture] {
        &self.fixtures
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    pub fn get(&self, id: LedId) -> Option<&LedFixture> {
        self.fixtures.iter().find(|f| f.id == id)
    }

    /// Common lamp height (mean of fixture heights), or `None` when empty.
    pub fn ceiling_height(&self) -> Option<f64> {
        if self.fixtures.is_empty() {
            return None;
        }
        Some(self.fixtures.iter().map(|f| f.position.z).sum::<f64>() / self.fixtures.len() as f64)
    }

    /// Longest stripe period among all fixtures, in rows.
    pub fn max_stripe_period_rows(&self, row_readout_s: f64) -> f64 {
        self.fixtures
            .iter()
            .map(|f| f.stripe_period_rows(row_readout_s))
            .fold(0.0, f64::max)
    }

    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut fixtures = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(RegistryError::Parse {
                    line: line_no,
                    message: format!(
                        "expected 7 fields `id x_cm y_cm z_cm radius_cm freq_hz half_power_deg`, found {}",
                        fields.len()
                    ),
                });
            }
            let id: u32 = fields[0].parse().map_err(|_| RegistryError::Parse {
                line: line_no,
                message: format!("invalid id `{}`", fields[0]),
            })?;
            let mut nums = [0.0f64; 6];
            for (slot, tok) in nums.iter_mut().zip(&fields[1..]) {
                *slot = tok.parse().map_err(|_| RegistryError::Parse {
                    line: line_no,
                    message: format!("invalid number `{tok}`"),
                })?;
            }
            let fixture = LedFixture {
                id: LedId(id),
                position: WorldPoint::new(nums[0], nums[1], nums[2]),
                radius: nums[3],
                mod_frequency: nums[4],
                half_power_angle: nums[5],
            };
            fixture.validate().map_err(|e| RegistryError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if fixtures.iter().any(|f: &LedFixture| f.id == fixture.id) {
                return Err(RegistryError::Parse {
                    line: line_no,
                    message: format!("duplicate LED id {id}"),
                });
            }
            fixtures.push(fixture);
        }
        Self::new(fixtures)
    }
}

impl FromStr for LedRegistry {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for LedRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# id x_cm y_cm z_cm radius_cm freq_hz half_power_deg")?;
        for l in &self.fixtures {
            writeln!(
                f,
                "{} {} {} {} {} {} {}",
                l.id, l.position.x, l.position.y, l.position.z, l.radius, l.mod_frequency, l.half_power_angle
            )?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<LedFixture>> for LedRegistry {
    type Error = RegistryError;

    fn try_from(v: Vec<LedFixture>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<LedRegistry> for Vec<LedFixture> {
    fn from(r: LedRegistry) -> Self {
        r.fixtures
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_matches_platform_table() {
        let r = LedRegistry::reference();
        assert_eq!(r.get(LedId(1)).unwrap().position, WorldPoint::new(13.0, 159.0, 285.0));
        assert_eq!(r.get(LedId(2)).unwrap().position, WorldPoint::new(159.0, 159.0, 285.0));
        assert_eq!(r.get(LedId(3)).unwrap().position, WorldPoint::new(159.0, 13.0, 285.0));
        assert!((r.get(LedId(1)).unwrap().lambertian_order() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let r = LedRegistry::reference();
        let back: LedRegistry = r.to_string().parse().unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "# header\n1 0 0 285 10 4000 60\n\n2 0 0 285 10 abc 60\n";
        match LedRegistry::parse(text) {
            Err(RegistryError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        match LedRegistry::parse("1 0 0 285 10 4000 60\n1 5 5 285 10 2000 60\n") {
            Err(RegistryError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            LedRegistry::parse("1 0 0 285 10 4000 95\n"),
            Err(RegistryError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn load_time_invariants() {
        let base = LedRegistry::reference().fixtures().to_vec();
        let mut close = base.clone();
        close[1].mod_frequency = 3500.0;
        assert!(matches!(
            LedRegistry::new(close),
            Err(RegistryError::FrequenciesTooClose { .. })
        ));
        let mut uneven = base.clone();
        uneven[2].position.z = 280.0;
        assert!(matches!(
            LedRegistry::new(uneven),
            Err(RegistryError::UnequalHeights { .. })
        ));
        let mut dup = base;
        dup[2].id = LedId(1);
        assert!(matches!(LedRegistry::new(dup), Err(RegistryError::DuplicateId(_))));
        assert!(LedRegistry::new(vec![]).unwrap().is_empty());
    }
}
