//! Open-loop planning metrics: L2-at-horizon displacement and failure rate.
//!
//! Both trajectories are anchored at the ego origin with dt = 0.5 s, so the
//! waypoint index at horizon h seconds is 2h. A sample is a failure when its
//! pointwise displacement exceeds 10 m anywhere within the first second
//! (indices 1 and 2), or when the model reply could not be turned into a
//! prediction at all. Failed samples carry no L2 metrics and are excluded
//! from the means; they still count in the failure rate.

use crate::kinematics::Trajectory;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Report metric columns, in rendering order.
pub const TABLE_COLUMNS: [&str; 5] = [
    "L2 (m) 1s",
    "L2 (m) 2s",
    "L2 (m) 3s",
    "L2 (m) avg",
    "Failure rate (%)",
];

/// Displacement threshold (m) for the first-second failure test.
pub const FAILURE_THRESHOLD_M: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("trajectory lengths differ: pred {pred}, gt {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("trajectory point 0 must be the ego origin")]
    BadAnchor,
    #[error("need at least {min} points (through 3 s), got {got}")]
    TooShort { min: usize, got: usize },
    #[error("no scores to aggregate")]
    EmptyInput,
}

/// How the per-horizon L2 value is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum L2Mode {
    /// Displacement at the horizon timestep (index 2h).
    Point,
    /// Average displacement over indices 1..=2h.
    Ade,
}

impl std::str::FromStr for L2Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "point" => Ok(L2Mode::Point),
            "ade" => Ok(L2Mode::Ade),
            other => Err(format!("unknown l2 mode {other:?} (expected point|ade)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureCause {
    ParseError,
    DivergedOver10m,
    None,
}

/// Per-sample score. Metrics are present exactly when the sample did not
/// fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub scene_id: String,
    pub sample_index: u32,
    pub l2_1s: Option<f64>,
    pub l2_2s: Option<f64>,
    pub l2_3s: Option<f64>,
    pub failed: bool,
    pub failure_cause: FailureCause,
}

impl SceneScore {
    /// A sample that never produced a usable prediction.
    pub fn parse_failure(scene_id: &str, sample_index: u32) -> Self {
        Self {
            scene_id: scene_id.to_string(),
            sample_index,
            l2_1s: None,
            l2_2s: None,
            l2_3s: None,
            failed: true,
            failure_cause: FailureCause::ParseError,
        }
    }

    pub fn with_ids(mut self, scene_id: &str, sample_index: u32) -> Self {
        self.scene_id = scene_id.to_string();
        self.sample_index = sample_index;
        self
    }
}

/// Aggregate report over one model's samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub n_samples: usize,
    pub n_skipped: usize,
    pub l2_1s_mean: Option<f64>,
    pub l2_2s_mean: Option<f64>,
    pub l2_3s_mean: Option<f64>,
    pub l2_avg: Option<f64>,
    pub failure_rate: f64,
}

/// Score one prediction against ground truth (point mode).
pub fn score_sample(pred: &Trajectory, gt: &Trajectory) -> Result<SceneScore, EvalError> {
    score_sample_with_mode(pred, gt, L2Mode::Point)
}

/// Score one prediction against ground truth with an explicit L2 mode.
pub fn score_sample_with_mode(
    pred: &Trajectory,
    gt: &Trajectory,
    mode: L2Mode,
) -> Result<SceneScore, EvalError> {
    if pred.points.len() != gt.points.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.points.len(),
            gt: gt.points.len(),
        });
    }
    if pred.points.len() < 7 {
        return Err(EvalError::TooShort {
            min: 7,
            got: pred.points.len(),
        });
    }
    for t in [pred, gt] {
        let p0 = t.points[0];
        if p0.x.abs() > 1e-12 || p0.y.abs() > 1e-12 {
            return Err(EvalError::BadAnchor);
        }
    }

    let dist = |i: usize| pred.points[i].distance(&gt.points[i]);

    let failed = (1..=2).any(|i| dist(i) > FAILURE_THRESHOLD_M);
    if failed {
        return Ok(SceneScore {
            scene_id: String::new(),
            sample_index: 0,
            l2_1s: None,
            l2_2s: None,
            l2_3s: None,
            failed: true,
            failure_cause: FailureCause::DivergedOver10m,
        });
    }

    let l2_at = |h: usize| -> f64 {
        match mode {
            L2Mode::Point => dist(2 * h),
            L2Mode::Ade => {
                let n = 2 * h;
                (1..=n).map(dist).sum::<f64>() / n as f64
            }
        }
    };

    Ok(SceneScore {
        scene_id: String::new(),
        sample_index: 0,
        l2_1s: Some(l2_at(1)),
        l2_2s: Some(l2_at(2)),
        l2_3s: Some(l2_at(3)),
        failed: false,
        failure_cause: FailureCause::None,
    })
}

/// Aggregate scores into a report: L2 means over non-failed samples,
/// failure rate over all samples. `n_skipped` is owned by the caller
/// (skipped scenes never produce a score).
pub fn aggregate(scores: &[SceneScore], model: &str) -> Result<EvalReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let survivors: Vec<&SceneScore> = scores.iter().filter(|s| !s.failed).collect();
    let mean = |take: fn(&SceneScore) -> Option<f64>| -> Option<f64> {
        if survivors.is_empty() {
            return None;
        }
        let sum: f64 = survivors.iter().map(|s| take(s).expect("metric present")).sum();
        Some(sum / survivors.len() as f64)
    };
    let l2_1s_mean = mean(|s| s.l2_1s);
    let l2_2s_mean = mean(|s| s.l2_2s);
    let l2_3s_mean = mean(|s| s.l2_3s);
    let l2_avg = match (l2_1s_mean, l2_2s_mean, l2_3s_mean) {
        (Some(a), Some(b), Some(c)) => Some((a + b + c) / 3.0),
        _ => None,
    };
    let n_failed = scores.len() - survivors.len();
    Ok(EvalReport {
        model: model.to_string(),
        n_samples: scores.len(),
        n_skipped: 0,
        l2_1s_mean,
        l2_2s_mean,
        l2_3s_mean,
        l2_avg,
        failure_rate: 100.0 * n_failed as f64 / scores.len() as f64,
    })
}

/// One line of the predictions JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scene_id: String,
    pub sample_index: u32,
    pub points: Vec<[f64; 2]>,
    pub failed: bool,
    pub failure_cause: FailureCause,
}

impl PredictionRecord {
    pub fn trajectory(&self, dt: f64) -> Trajectory {
        Trajectory {
            dt,
            points: self
                .points
                .iter()
                .map(|p| crate::kinematics::Point2::new(p[0], p[1]))
                .collect(),
        }
    }
}

/// JSON report document keyed by the table column names.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReportMetrics {
    #[serde(rename = "L2 (m) 1s")]
    pub l2_1s: Option<f64>,
    #[serde(rename = "L2 (m) 2s")]
    pub l2_2s: Option<f64>,
    #[serde(rename = "L2 (m) 3s")]
    pub l2_3s: Option<f64>,
    #[serde(rename = "L2 (m) avg")]
    pub l2_avg: Option<f64>,
    #[serde(rename = "Failure rate (%)")]
    pub failure_rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportDoc {
    pub model: String,
    pub l2_mode: L2Mode,
    pub n_samples: usize,
    pub n_skipped: usize,
    pub metrics: ReportMetrics,
}

/// Render the report as a pretty JSON document.
pub fn report_json(report: &EvalReport, mode: L2Mode) -> String {
    let doc = ReportDoc {
        model: report.model.clone(),
        l2_mode: mode,
        n_samples: report.n_samples,
        n_skipped: report.n_skipped,
        metrics: ReportMetrics {
            l2_1s: report.l2_1s_mean,
            l2_2s: report.l2_2s_mean,
            l2_3s: report.l2_3s_mean,
            l2_avg: report.l2_avg,
            failure_rate: report.failure_rate,
        },
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
    out.push('\n');
    out
}

/// Render the report as a two-line CSV with the table column names.
pub fn report_csv(report: &EvalReport) -> String {
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
    format!(
        "Model,{}\n{},{},{},{},{},{:.4}\n",
        TABLE_COLUMNS.join(","),
        report.model,
        cell(report.l2_1s_mean),
        cell(report.l2_2s_mean),
        cell(report.l2_3s_mean),
        cell(report.l2_avg),
        report.failure_rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Point2;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        Trajectory {
            dt: 0.5,
            points: points.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
        }
    }

    fn straight(n: usize) -> Trajectory {
        traj(&(0..n).map(|i| (i as f64, 0.0)).collect::<Vec<_>>())
    }

    /// Independent recomputation of the metric definitions, written before
    /// the implementation: pointwise Euclidean distances from raw loops.
    fn brute_force(pred: &[(f64, f64)], gt: &[(f64, f64)]) -> (bool, [f64; 3]) {
        let mut d = Vec::new();
        for i in 0..pred.len() {
            let dx = pred[i].0 - gt[i].0;
            let dy = pred[i].1 - gt[i].1;
            d.push((dx * dx + dy * dy).sqrt());
        }
        let failed = d[1] > 10.0 || d[2] > 10.0;
        (failed, [d[2], d[4], d[6]])
    }

    #[test]
    fn identical_trajectories_score_zero() {
        let t = straight(11);
        let s = score_sample(&t, &t).unwrap();
        assert!(!s.failed);
        assert_eq!(s.l2_1s, Some(0.0));
        assert_eq!(s.l2_2s, Some(0.0));
        assert_eq!(s.l2_3s, Some(0.0));
        assert_eq!(s.failure_cause, FailureCause::None);
    }

    #[test]
    fn three_four_five_offset() {
        let gt = straight(11);
        let pred = traj(
            &(0..11)
                .map(|i| {
                    if i == 0 {
                        (0.0, 0.0)
                    } else {
                        (i as f64 + 3.0, 4.0)
                    }
                })
                .collect::<Vec<_>>(),
        );
        let s = score_sample(&pred, &gt).unwrap();
        assert!(!s.failed);
        assert!((s.l2_1s.unwrap() - 5.0).abs() < 1e-12);
        assert!((s.l2_2s.unwrap() - 5.0).abs() < 1e-12);
        assert!((s.l2_3s.unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_in_first_second_fails() {
        let gt = straight(11);
        let mut pts: Vec<(f64, f64)> = (0..11).map(|i| (i as f64, 0.0)).collect();
        pts[1] = (1.0 + 12.0, 0.0);
        let s = score_sample(&traj(&pts), &gt).unwrap();
        assert!(s.failed);
        assert_eq!(s.failure_cause, FailureCause::DivergedOver10m);
        assert_eq!(s.l2_1s, None);
    }

    #[test]
    fn failure_boundary_is_strict() {
        let gt = straight(11);
        for (offset, expect_failed) in [(9.99, false), (10.01, true)] {
            let pts: Vec<(f64, f64)> = (0..11)
                .map(|i| {
                    if i == 1 {
                        (1.0, offset)
                    } else {
                        (i as f64, 0.0)
                    }
                })
                .collect();
            let s = score_sample(&traj(&pts), &gt).unwrap();
            assert_eq!(s.failed, expect_failed, "offset {offset}");
        }
    }

    #[test]
    fn matches_brute_force_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let mut pred = vec![(0.0, 0.0)];
            let mut gt = vec![(0.0, 0.0)];
            for _ in 0..10 {
                pred.push((rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)));
                gt.push((rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)));
            }
            let (bf_failed, bf_l2) = brute_force(&pred, &gt);
            let s = score_sample(&traj(&pred), &traj(&gt)).unwrap();
            assert_eq!(s.failed, bf_failed);
            if !bf_failed {
                assert!((s.l2_1s.unwrap() - bf_l2[0]).abs() < 1e-9);
                assert!((s.l2_2s.unwrap() - bf_l2[1]).abs() < 1e-9);
                assert!((s.l2_3s.unwrap() - bf_l2[2]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ade_mode_averages_up_to_horizon() {
        let gt = straight(11);
        // Constant 2 m lateral offset after index 0.
        let pred = traj(
            &(0..11)
                .map(|i| if i == 0 { (0.0, 0.0) } else { (i as f64, 2.0) })
                .collect::<Vec<_>>(),
        );
        let s = score_sample_with_mode(&pred, &gt, L2Mode::Ade).unwrap();
        assert!((s.l2_1s.unwrap() - 2.0).abs() < 1e-12);
        assert!((s.l2_3s.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn anchor_and_length_preconditions() {
        let gt = straight(11);
        let bad_anchor = traj(
            &(0..11)
                .map(|i| (i as f64 + 0.5, 0.0))
                .collect::<Vec<_>>(),
        );
        assert_eq!(score_sample(&bad_anchor, &gt), Err(EvalError::BadAnchor));
        assert_eq!(
            score_sample(&straight(9), &gt),
            Err(EvalError::LengthMismatch { pred: 9, gt: 11 })
        );
        assert_eq!(
            score_sample(&straight(5), &straight(5)),
            Err(EvalError::TooShort { min: 7, got: 5 })
        );
    }

    #[test]
    fn metric_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut a = vec![(0.0, 0.0)];
            let mut b = vec![(0.0, 0.0)];
            for _ in 0..10 {
                a.push((rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)));
                b.push((rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)));
            }
            let s1 = score_sample(&traj(&a), &traj(&b)).unwrap();
            let s2 = score_sample(&traj(&b), &traj(&a)).unwrap();
            if !s1.failed && !s2.failed {
                assert_eq!(s1.l2_1s, s2.l2_1s);
                assert_eq!(s1.l2_2s, s2.l2_2s);
                assert_eq!(s1.l2_3s, s2.l2_3s);
            }
        }
    }

    #[test]
    fn rigid_motion_leaves_l2_unchanged() {
        // Rotating and translating both trajectories together preserves all
        // pointwise distances, hence every metric. The anchor precondition
        // forces the shared transform to fix the origin, so test rotation.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut a = vec![(0.0, 0.0)];
            let mut b = vec![(0.0, 0.0)];
            for _ in 0..10 {
                a.push((rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)));
                b.push((rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)));
            }
            let ang: f64 = rng.random_range(-3.0..3.0);
            let rot = |p: &(f64, f64)| {
                (
                    p.0 * ang.cos() - p.1 * ang.sin(),
                    p.0 * ang.sin() + p.1 * ang.cos(),
                )
            };
            let ar: Vec<_> = a.iter().map(rot).collect();
            let br: Vec<_> = b.iter().map(rot).collect();
            let s1 = score_sample(&traj(&a), &traj(&b)).unwrap();
            let s2 = score_sample(&traj(&ar), &traj(&br)).unwrap();
            assert_eq!(s1.failed, s2.failed);
            if !s1.failed {
                assert!((s1.l2_1s.unwrap() - s2.l2_1s.unwrap()).abs() < 1e-9);
                assert!((s1.l2_2s.unwrap() - s2.l2_2s.unwrap()).abs() < 1e-9);
                assert!((s1.l2_3s.unwrap() - s2.l2_3s.unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn failure_scaling_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let gt: Vec<(f64, f64)> = std::iter::once((0.0, 0.0))
                .chain((1..11).map(|i| (i as f64, 0.0)))
                .collect();
            let pred: Vec<(f64, f64)> = gt
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if i == 0 {
                        *p
                    } else {
                        (
                            p.0 + rng.random_range(-12.0..12.0),
                            p.1 + rng.random_range(-12.0..12.0),
                        )
                    }
                })
                .collect();
            let lambda: f64 = rng.random_range(1.0..3.0);
            let scaled: Vec<(f64, f64)> = gt
                .iter()
                .zip(&pred)
                .map(|(g, p)| (g.0 + lambda * (p.0 - g.0), g.1 + lambda * (p.1 - g.1)))
                .collect();
            let base = score_sample(&traj(&pred), &traj(&gt)).unwrap();
            let more = score_sample(&traj(&scaled), &traj(&gt)).unwrap();
            if base.failed {
                assert!(more.failed, "scaling by {lambda} un-failed a sample");
            }
        }
    }

    #[test]
    fn aggregate_means_and_failure_rate() {
        let ok = |l2: f64| SceneScore {
            scene_id: "s".into(),
            sample_index: 0,
            l2_1s: Some(l2),
            l2_2s: Some(l2),
            l2_3s: Some(l2),
            failed: false,
            failure_cause: FailureCause::None,
        };
        let report = aggregate(&[ok(2.0), ok(4.0)], "m").unwrap();
        assert_eq!(report.l2_avg, Some(3.0));
        assert_eq!(report.failure_rate, 0.0);

        let scores = vec![
            ok(1.0),
            ok(2.0),
            ok(3.0),
            SceneScore::parse_failure("s", 0),
        ];
        let report = aggregate(&scores, "m").unwrap();
        assert_eq!(report.n_samples, 4);
        assert_eq!(report.failure_rate, 25.0);
        assert_eq!(report.l2_1s_mean, Some(2.0));
        // Invariant: l2_avg is the mean of the three horizon means.
        let expect = (report.l2_1s_mean.unwrap()
            + report.l2_2s_mean.unwrap()
            + report.l2_3s_mean.unwrap())
            / 3.0;
        assert!((report.l2_avg.unwrap() - expect).abs() < 1e-9);

        assert_eq!(aggregate(&[], "m"), Err(EvalError::EmptyInput));
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let mk = |l2: f64, failed: bool| SceneScore {
            scene_id: "s".into(),
            sample_index: 0,
            l2_1s: (!failed).then_some(l2),
            l2_2s: (!failed).then_some(l2 * 2.0),
            l2_3s: (!failed).then_some(l2 * 3.0),
            failed,
            failure_cause: if failed {
                FailureCause::ParseError
            } else {
                FailureCause::None
            },
        };
        let mut scores = vec![mk(1.0, false), mk(2.5, false), mk(0.0, true), mk(4.0, false)];
        let a = aggregate(&scores, "m").unwrap();
        scores.reverse();
        let b = aggregate(&scores, "m").unwrap();
        assert_eq!(a.failure_rate, b.failure_rate);
        assert!((a.l2_1s_mean.unwrap() - b.l2_1s_mean.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn report_rendering_uses_table_columns() {
        let report = EvalReport {
            model: "test-model".into(),
            n_samples: 4,
            n_skipped: 1,
            l2_1s_mean: Some(1.5),
            l2_2s_mean: Some(3.0),
            l2_3s_mean: Some(4.5),
            l2_avg: Some(3.0),
            failure_rate: 25.0,
        };
        let json = report_json(&report, L2Mode::Point);
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        let mut keys: Vec<&str> = doc["metrics"]
            .as_object()
            .unwrap()
            .keys()
            .map(|s| s.as_str())
            .collect();
        keys.sort_unstable();
        let mut expect = TABLE_COLUMNS.to_vec();
        expect.sort_unstable();
        assert_eq!(keys, expect);
        // Column order on the wire follows the table.
        let positions: Vec<usize> = TABLE_COLUMNS
            .iter()
            .map(|c| json.find(c).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));

        let csv = report_csv(&report);
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "Model,L2 (m) 1s,L2 (m) 2s,L2 (m) 3s,L2 (m) avg,Failure rate (%)"
        );
    }
}
