//! Temporal curves for the novel topic.
//!
//! Three families, three variants each. Within a family the dynamics get faster
//! with the scenario id: cyclical periods shrink, emergent slopes steepen and
//! event widths narrow, so scenario 9 is the sharpest burst.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ScenarioKind {
    /// `amplitude` documents per day during the first `pulse_width` days of
    /// every `period`, starting at `first_onset`.
    Cyclical {
        period: u32,
        pulse_width: u32,
        amplitude: f64,
        first_onset: u32,
    },
    /// Linear ramp `slope * (day - onset)` capped at `amplitude`.
    Emergent {
        onset: u32,
        slope: f64,
        amplitude: f64,
    },
    /// Gaussian bump of width `width` around `peak_day`, truncated at three
    /// widths and silent before `onset_floor`.
    Event {
        peak_day: u32,
        width: f64,
        amplitude: f64,
        onset_floor: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u32,
    #[serde(flatten)]
    pub kind: ScenarioKind,
}

impl ScenarioSpec {
    /// A scenario that never emits novel documents (id 0).
    pub fn null(horizon: u32) -> Self {
        Self {
            id: 0,
            kind: ScenarioKind::Emergent {
                onset: horizon / 2,
                slope: 0.0,
                amplitude: 0.0,
            },
        }
    }

    /// First day the curve may be non-zero.
    pub fn onset(&self) -> u32 {
        match self.kind {
            ScenarioKind::Cyclical { first_onset, .. } => first_onset,
            ScenarioKind::Emergent { onset, .. } => onset,
            ScenarioKind::Event {
                peak_day,
                width,
                onset_floor,
                ..
            } => {
                let start = (f64::from(peak_day) - 3.0 * width).ceil().max(0.0) as u32;
                start.max(onset_floor)
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self.kind {
            ScenarioKind::Cyclical { .. } => "cyclical",
            ScenarioKind::Emergent { .. } => "emergent",
            ScenarioKind::Event { .. } => "event",
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| {
            Err(SimError::InvalidConfig(format!(
                "scenario {}: {m}",
                self.id
            )))
        };
        match self.kind {
            ScenarioKind::Cyclical {
                period,
                pulse_width,
                amplitude,
                ..
            } => {
                if period == 0 || pulse_width == 0 || pulse_width > period {
                    return bad("need 0 < pulse_width <= period".into());
                }
                if amplitude.is_nan() || amplitude < 0.0 {
                    return bad("negative amplitude".into());
                }
            }
            ScenarioKind::Emergent {
                slope, amplitude, ..
            } => {
                if !(slope >= 0.0 && amplitude >= 0.0) {
                    return bad("slope and amplitude must be non-negative".into());
                }
            }
            ScenarioKind::Event {
                width, amplitude, ..
            } => {
                if !(width > 0.0 && amplitude >= 0.0) {
                    return bad("width must be positive and amplitude non-negative".into());
                }
            }
        }
        Ok(())
    }
}

/// Novel documents emitted on `day`.
pub fn scenario_curve(spec: &ScenarioSpec, day: u32) -> u32 {
    if day < spec.onset() {
        return 0;
    }
    let value = match spec.kind {
        ScenarioKind::Cyclical {
            period,
            pulse_width,
            amplitude,
            first_onset,
        } => {
            if (day - first_onset) % period < pulse_width {
                amplitude
            } else {
                0.0
            }
        }
        ScenarioKind::Emergent {
            onset,
            slope,
            amplitude,
        } => amplitude.min(slope * f64::from(day - onset)),
        ScenarioKind::Event {
            peak_day,
            width,
            amplitude,
            ..
        } => {
            let dt = f64::from(day) - f64::from(peak_day);
            if dt.abs() <= 3.0 * width {
                amplitude * (-dt * dt / (2.0 * width * width)).exp()
            } else {
                0.0
            }
        }
    };
    value.round().max(0.0) as u32
}

/// The nine default scenarios for a given horizon.
pub fn scenario_catalog(horizon: u32) -> Vec<ScenarioSpec> {
    let half = horizon / 2;
    let peak = (0.7 * f64::from(horizon)).round() as u32;
    let cyclical = [30u32, 20, 10]
        .into_iter()
        .map(|period| ScenarioKind::Cyclical {
            period,
            pulse_width: period / 2,
            amplitude: 40.0,
            first_onset: half,
        });
    let emergent = [1.0, 2.0, 5.0]
        .into_iter()
        .map(|slope| ScenarioKind::Emergent {
            onset: half,
            slope,
            amplitude: 40.0,
        });
    let event = [4.0, 2.0, 1.0]
        .into_iter()
        .map(|width| ScenarioKind::Event {
            peak_day: peak,
            width,
            amplitude: 50.0,
            onset_floor: half,
        });
    cyclical
        .chain(emergent)
        .chain(event)
        .enumerate()
        .map(|(i, kind)| ScenarioSpec {
            id: i as u32 + 1,
            kind,
        })
        .collect()
}

/// `[[scenario]]` tables as stored in a catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCatalog {
    pub scenario: Vec<ScenarioSpec>,
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<ScenarioSpec>, SimError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| SimError::InvalidConfig(format!("{}: {e}", path.as_ref().display())))?;
    let catalog: ScenarioCatalog =
        toml::from_str(&text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    for s in &catalog.scenario {
        s.validate()?;
    }
    Ok(catalog.scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emergent_formula() {
        let s = ScenarioSpec {
            id: 5,
            kind: ScenarioKind::Emergent {
                onset: 50,
                slope: 2.0,
                amplitude: 40.0,
            },
        };
        assert_eq!(scenario_curve(&s, 49), 0);
        assert_eq!(scenario_curve(&s, 50), 0);
        assert_eq!(scenario_curve(&s, 60), 20);
        assert_eq!(scenario_curve(&s, 99), 40);
    }

    #[test]
    fn event_formula() {
        let s = ScenarioSpec {
            id: 9,
            kind: ScenarioKind::Event {
                peak_day: 70,
                width: 1.0,
                amplitude: 50.0,
                onset_floor: 50,
            },
        };
        assert_eq!(s.onset(), 67);
        assert_eq!(scenario_curve(&s, 70), 50);
        // 50 * exp(-4.5) = 0.555
        assert_eq!(scenario_curve(&s, 73), 1);
        assert_eq!(scenario_curve(&s, 74), 0);
        assert_eq!(scenario_curve(&s, 66), 0);
    }

    #[test]
    fn event_onset_clamped_to_floor() {
        let s = ScenarioSpec {
            id: 7,
            kind: ScenarioKind::Event {
                peak_day: 52,
                width: 4.0,
                amplitude: 50.0,
                onset_floor: 50,
            },
        };
        assert_eq!(s.onset(), 50);
        assert_eq!(scenario_curve(&s, 49), 0);
        assert!(scenario_curve(&s, 50) > 0);
    }

    #[test]
    fn cyclical_pulses() {
        let s = ScenarioSpec {
            id: 3,
            kind: ScenarioKind::Cyclical {
                period: 10,
                pulse_width: 5,
                amplitude: 40.0,
                first_onset: 50,
            },
        };
        let days: Vec<u32> = (48..62).map(|d| scenario_curve(&s, d)).collect();
        assert_eq!(days, [0, 0, 40, 40, 40, 40, 40, 0, 0, 0, 0, 0, 40, 40]);
    }

    #[test]
    fn catalog_is_silent_before_onset() {
        let cat = scenario_catalog(100);
        assert_eq!(cat.len(), 9);
        for s in &cat {
            s.validate().unwrap();
            assert!(s.onset() >= 50);
            for d in 0..s.onset() {
                assert_eq!(scenario_curve(s, d), 0, "scenario {} day {d}", s.id);
            }
            assert!((0..100).any(|d| scenario_curve(s, d) > 0));
        }
        let ids: Vec<u32> = cat.iter().map(|s| s.id).collect();
        assert_eq!(ids, (1..=9).collect::<Vec<_>>());
    }

    #[test]
    fn null_scenario_never_fires() {
        let s = ScenarioSpec::null(100);
        assert!((0..100).all(|d| scenario_curve(&s, d) == 0));
    }

    #[test]
    fn catalog_toml_round_trip() {
        let cat = ScenarioCatalog {
            scenario: scenario_catalog(100),
        };
        let text = toml::to_string(&cat).unwrap();
        let back: ScenarioCatalog = toml::from_str(&text).unwrap();
        assert_eq!(back, cat);
    }
}
