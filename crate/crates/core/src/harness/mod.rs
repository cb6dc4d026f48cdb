//! Experiment drivers: training study (augmentation × width and model
//! comparison), placement comparison with timing, and figure output.

mod compare;
mod config;
mod plots;
mod study;
mod toy;

pub use compare::{
    compare_on_scene, make_predictor, run_comparison, ComparisonReport, PlacementCase, TimingRow,
};
pub use config::{AblationSection, CompareSection, DatasetSection, ExperimentConfig, GanSection};
pub use plots::{colormap, coverage_masks_svg, learning_curve_svg, map_panels_svg};
pub use study::{
    run_study, run_training, CellSummary, MetricMedians, RunKey, StudyData, StudyReport,
    TrainingRun,
};
pub use toy::DominantActionPredictor;

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn median_cases() {
        assert_eq!(super::median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(super::median(&[4.0, 1.0]), 2.5);
        assert!(super::median(&[]).is_nan());
    }
}
