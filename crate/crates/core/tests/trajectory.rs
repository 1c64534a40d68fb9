use pleasance_core::stimulus::{
    default_catalog, frame_at, generate_trajectory, generate_trajectory_with, lm_vibration_frequency, Pattern,
    StimulusSpec, StrokeRepeat,
};
use proptest::prelude::*;

#[test]
fn every_catalog_entry_yields_three_thousand_frames() {
    for spec in default_catalog() {
        let frames = generate_trajectory(&spec);
        assert_eq!(frames.len(), 3000, "{}", spec.label());
        let foci = if spec.pattern == Pattern::TwoPoint { 2 } else { 1 };
        for (k, f) in frames.iter().enumerate() {
            assert_eq!(f.t_s, k as f64 / 1000.0);
            assert_eq!(f.foci.len(), foci);
            for focus in &f.foci {
                assert!((0.0..150.0).contains(&focus.y_mm));
                assert!((0.0..=1.0).contains(&focus.amplitude));
                if matches!(spec.pattern, Pattern::LmLow | Pattern::LmHigh) {
                    assert!(focus.x_mm.abs() <= 5.0);
                }
            }
        }
    }
}

#[test]
fn am_completes_six_hundred_cycles() {
    for spec in default_catalog().iter().filter(|s| s.pattern == Pattern::Am) {
        let amp: Vec<f64> = generate_trajectory(spec).iter().map(|f| f.foci[0].amplitude).collect();
        let peaks = amp.iter().filter(|&&a| a > 0.9).count();
        assert_eq!(peaks, 600);
    }
}

#[test]
fn lm_reaches_its_full_excursion() {
    for spec in default_catalog().iter().filter(|s| s.pattern.is_lateral_modulation()) {
        let xs: Vec<f64> = generate_trajectory(spec).iter().map(|f| f.foci[0].x_mm).collect();
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max > 4.7 && min < -4.7, "{}: {min}..{max}", spec.label());
    }
}

#[test]
fn lm_frequencies() {
    assert!((lm_vibration_frequency(100.0, 15.0).unwrap() - 100.0 / 15.0).abs() < 1e-12);
    assert!((lm_vibration_frequency(300.0, 1.5).unwrap() - 200.0).abs() < 1e-12);
    assert!(lm_vibration_frequency(0.0, 15.0).is_err());
    assert!(lm_vibration_frequency(100.0, -1.0).is_err());
}

#[test]
fn clamped_stroke_stops_at_the_end() {
    let spec = StimulusSpec::new(0, Pattern::Static, 300.0);
    let frames = generate_trajectory_with(&spec, StrokeRepeat::Clamp);
    assert_eq!(frames.last().unwrap().foci[0].y_mm, 150.0);
    let wrapped = generate_trajectory(&spec);
    assert_eq!(wrapped[500].foci[0].y_mm, 0.0);
}

proptest! {
    #[test]
    fn lateral_offset_stays_within_displacement(t in 0.0f64..3.0, idx in 0usize..15) {
        let spec = &default_catalog()[idx];
        let frame = frame_at(spec, t, StrokeRepeat::Wrap);
        for f in &frame.foci {
            prop_assert!(f.x_mm.abs() <= 5.0);
            prop_assert!((0.0..150.0).contains(&f.y_mm));
        }
    }
}
