//! Stroking stimulus conditions and their focal-point trajectories.
//!
//! A stimulus is a focus (or a pair of foci) travelling along the forearm at a
//! constant speed. Coordinates are in millimetres: `y` runs from the elbow (0)
//! toward the wrist (`path_length`), `x` is lateral. Depth is not modelled.
//!
//! The two-point pattern splits the array between two foci, so each focus is
//! physically weaker than a single focus. That is a property of the hardware
//! and is not reflected in [`Focus::amplitude`], which is relative per focus.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speeds used by the default catalog, mm/s.
pub const SPEEDS_MM_S: [f64; 3] = [50.0, 100.0, 300.0];
pub const AM_FREQUENCY_HZ: f64 = 200.0;
pub const LM_LOW_WAVELENGTH_MM: f64 = 15.0;
pub const LM_HIGH_WAVELENGTH_MM: f64 = 1.5;
pub const LM_DISPLACEMENT_MM: f64 = 5.0;
pub const TWO_POINT_OFFSET_MM: f64 = 5.0;
pub const TRIAL_DURATION_S: f64 = 3.0;
pub const PATH_LENGTH_MM: f64 = 150.0;
pub const UPDATE_RATE_HZ: f64 = 1000.0;

pub type StimulusId = u8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StimulusError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("stimulus {id}: {reason}")]
    InvalidSpec { id: StimulusId, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Static,
    Am,
    LmLow,
    LmHigh,
    TwoPoint,
}

impl Pattern {
    /// Catalog order; ids are assigned pattern-major in this order.
    pub const ALL: [Pattern; 5] = [
        Pattern::Static,
        Pattern::Am,
        Pattern::LmLow,
        Pattern::LmHigh,
        Pattern::TwoPoint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Static => "static",
            Pattern::Am => "am",
            Pattern::LmLow => "lm_low",
            Pattern::LmHigh => "lm_high",
            Pattern::TwoPoint => "two_point",
        }
    }

    pub fn parse(s: &str) -> Option<Pattern> {
        Pattern::ALL.into_iter().find(|p| p.as_str() == s)
    }

    pub fn is_lateral_modulation(self) -> bool {
        matches!(self, Pattern::LmLow | Pattern::LmHigh)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What happens when `speed * duration` exceeds the stroke length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeRepeat {
    /// Jump back to the elbow and repeat the stroke.
    #[default]
    Wrap,
    /// Stop at the wrist and hold.
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub id: StimulusId,
    pub pattern: Pattern,
    pub speed_mm_s: f64,
    pub am_frequency_hz: Option<f64>,
    pub lm_wavelength_mm: Option<f64>,
    pub lm_displacement_mm: Option<f64>,
    pub two_point_offset_mm: Option<f64>,
    pub duration_s: f64,
    pub path_length_mm: f64,
    pub update_rate_hz: f64,
}

impl StimulusSpec {
    /// Builds a spec with the standard physical parameters for `pattern`.
    pub fn new(id: StimulusId, pattern: Pattern, speed_mm_s: f64) -> Self {
        let lm_wavelength_mm = match pattern {
            Pattern::LmLow => Some(LM_LOW_WAVELENGTH_MM),
            Pattern::LmHigh => Some(LM_HIGH_WAVELENGTH_MM),
            _ => None,
        };
        Self {
            id,
            pattern,
            speed_mm_s,
            am_frequency_hz: (pattern == Pattern::Am).then_some(AM_FREQUENCY_HZ),
            lm_wavelength_mm,
            lm_displacement_mm: pattern.is_lateral_modulation().then_some(LM_DISPLACEMENT_MM),
            two_point_offset_mm: (pattern == Pattern::TwoPoint).then_some(TWO_POINT_OFFSET_MM),
            duration_s: TRIAL_DURATION_S,
            path_length_mm: PATH_LENGTH_MM,
            update_rate_hz: UPDATE_RATE_HZ,
        }
    }

    /// Checks that the optional parameters are present exactly for the
    /// patterns that use them and that all magnitudes are positive.
    pub fn validate(&self) -> Result<(), StimulusError> {
        let bad = |reason| Err(StimulusError::InvalidSpec { id: self.id, reason });
        for v in [self.speed_mm_s, self.duration_s, self.path_length_mm, self.update_rate_hz] {
            if !(v.is_finite() && v > 0.0) {
                return bad("speed, duration, path length and update rate must be positive");
            }
        }
        let positive = |o: Option<f64>| o.is_some_and(|v| v.is_finite() && v > 0.0);
        if (self.pattern == Pattern::Am) != self.am_frequency_hz.is_some()
            || (self.pattern == Pattern::Am && !positive(self.am_frequency_hz))
        {
            return bad("am_frequency_hz must be set (and positive) iff pattern is am");
        }
        let lm = self.pattern.is_lateral_modulation();
        if lm != self.lm_wavelength_mm.is_some() || (lm && !positive(self.lm_wavelength_mm)) {
            return bad("lm_wavelength_mm must be set (and positive) iff pattern is lm");
        }
        if lm != self.lm_displacement_mm.is_some() {
            return bad("lm_displacement_mm must be set iff pattern is lm");
        }
        let two = self.pattern == Pattern::TwoPoint;
        if two != self.two_point_offset_mm.is_some() || (two && !positive(self.two_point_offset_mm)) {
            return bad("two_point_offset_mm must be set (and positive) iff pattern is two_point");
        }
        Ok(())
    }

    /// Number of frames in one trial.
    pub fn frame_count(&self) -> usize {
        libm::round(self.duration_s * self.update_rate_hz) as usize
    }

    pub fn label(&self) -> alloc::string::String {
        alloc::format!("{} @ {} mm/s", self.pattern, self.speed_mm_s)
    }
}

/// The fifteen conditions: five patterns at three speeds, ids assigned
/// pattern-major, speed-minor (static@50 = 0, static@100 = 1, ... two_point@300 = 14).
pub fn default_catalog() -> Vec<StimulusSpec> {
    Pattern::ALL
        .iter()
        .flat_map(|&p| SPEEDS_MM_S.iter().map(move |&v| (p, v)))
        .enumerate()
        .map(|(id, (p, v))| StimulusSpec::new(id as StimulusId, p, v))
        .collect()
}

/// Vibration frequency felt at a point when a laterally modulated focus
/// sweeps past it: `speed / wavelength`.
pub fn lm_vibration_frequency(speed_mm_s: f64, wavelength_mm: f64) -> Result<f64, StimulusError> {
    for (name, value) in [("speed", speed_mm_s), ("wavelength", wavelength_mm)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(StimulusError::NonPositive { name, value });
        }
    }
    Ok(speed_mm_s / wavelength_mm)
}

/// Lateral position of a laterally modulated focus at stroke position `y`.
pub fn lm_lateral_offset(y_mm: f64, wavelength_mm: f64, displacement_mm: f64) -> f64 {
    displacement_mm * libm::sin(2.0 * PI * y_mm / wavelength_mm)
}

/// Full-depth sinusoidal envelope starting at mid amplitude.
pub fn am_envelope(t_s: f64, frequency_hz: f64) -> f64 {
    // reduce to one cycle first so long trials keep full precision
    let phase = frac(frequency_hz * t_s);
    0.5 * (1.0 + libm::sin(2.0 * PI * phase))
}

fn frac(x: f64) -> f64 {
    x - libm::floor(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Focus {
    pub x_mm: f64,
    pub y_mm: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusFrame {
    pub t_s: f64,
    pub foci: Vec<Focus>,
}

/// Stroke position after travelling `distance_mm`.
pub fn stroke_position(distance_mm: f64, path_length_mm: f64, repeat: StrokeRepeat) -> f64 {
    match repeat {
        StrokeRepeat::Wrap => {
            let y = libm::fmod(distance_mm, path_length_mm);
            if y < 0.0 {
                y + path_length_mm
            } else {
                y
            }
        }
        StrokeRepeat::Clamp => distance_mm.clamp(0.0, path_length_mm),
    }
}

/// Evaluates the continuous trajectory of `spec` at time `t_s`.
pub fn frame_at(spec: &StimulusSpec, t_s: f64, repeat: StrokeRepeat) -> FocusFrame {
    frame_from_distance(spec, t_s, spec.speed_mm_s * t_s, repeat)
}

fn frame_from_distance(spec: &StimulusSpec, t_s: f64, distance: f64, repeat: StrokeRepeat) -> FocusFrame {
    let y = stroke_position(distance, spec.path_length_mm, repeat);
    let single = |x_mm, amplitude| alloc::vec![Focus { x_mm, y_mm: y, amplitude }];
    let foci = match spec.pattern {
        Pattern::Static => single(0.0, 1.0),
        Pattern::Am => single(0.0, am_envelope(t_s, spec.am_frequency_hz.unwrap_or(AM_FREQUENCY_HZ))),
        Pattern::LmLow | Pattern::LmHigh => {
            let lambda = spec.lm_wavelength_mm.unwrap_or(LM_LOW_WAVELENGTH_MM);
            let d = spec.lm_displacement_mm.unwrap_or(LM_DISPLACEMENT_MM);
            single(lm_lateral_offset(y, lambda, d), 1.0)
        }
        Pattern::TwoPoint => {
            let half = spec.two_point_offset_mm.unwrap_or(TWO_POINT_OFFSET_MM) / 2.0;
            alloc::vec![
                Focus { x_mm: -half, y_mm: y, amplitude: 1.0 },
                Focus { x_mm: half, y_mm: y, amplitude: 1.0 },
            ]
        }
    };
    FocusFrame { t_s, foci }
}

/// Samples one trial at the update rate, wrapping the stroke.
pub fn generate_trajectory(spec: &StimulusSpec) -> Vec<FocusFrame> {
    generate_trajectory_with(spec, StrokeRepeat::Wrap)
}

pub fn generate_trajectory_with(spec: &StimulusSpec, repeat: StrokeRepeat) -> Vec<FocusFrame> {
    let rate = spec.update_rate_hz;
    (0..spec.frame_count())
        .map(|k| {
            let k = k as f64;
            // speed * k / rate keeps integer-mm positions exact at the grid
            frame_from_distance(spec, k / rate, spec.speed_mm_s * k / rate, repeat)
        })
        .collect()
}
