use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::MetricsReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scene: String,
    pub psnr: f64,
    pub ssim: f64,
    pub lpips: Option<f64>,
}

/// One row per scene plus an average row. The LPIPS column appears when any
/// scene carries external `lpips` scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    pub average: ReportRow,
    pub has_lpips: bool,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate_report(reports: &[MetricsReport]) -> ReportTable {
    let rows: Vec<ReportRow> = reports
        .iter()
        .map(|r| ReportRow {
            scene: r.scene_id.clone(),
            psnr: r.mean_psnr,
            ssim: r.mean_ssim,
            lpips: r.external_mean("lpips"),
        })
        .collect();
    let average = ReportRow {
        scene: "average".into(),
        psnr: mean(rows.iter().map(|r| r.psnr)).unwrap_or(f64::NAN),
        ssim: mean(rows.iter().map(|r| r.ssim)).unwrap_or(f64::NAN),
        lpips: mean(rows.iter().filter_map(|r| r.lpips)),
    };
    let has_lpips = rows.iter().any(|r| r.lpips.is_some());
    ReportTable { rows, average, has_lpips }
}

impl ReportTable {
    fn all_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().chain(std::iter::once(&self.average))
    }

    /// Header `scene,psnr,ssim[,lpips]`; values at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.has_lpips { "scene,psnr,ssim,lpips\n" } else { "scene,psnr,ssim\n" });
        for r in self.all_rows() {
            let _ = write!(out, "{},{},{}", csv_field(&r.scene), r.psnr, r.ssim);
            if self.has_lpips {
                out.push(',');
                if let Some(l) = r.lpips {
                    let _ = write!(out, "{l}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width table with PSNR to two decimals and SSIM/LPIPS to three.
    pub fn to_text(&self) -> String {
        let width = self.all_rows().map(|r| r.scene.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:>8}  {:>6}", "Scene", "PSNR", "SSIM");
        if self.has_lpips {
            let _ = write!(out, "  {:>6}", "LPIPS");
        }
        out.push('\n');
        for (i, r) in self.all_rows().enumerate() {
            if i == self.rows.len() {
                out.push_str(&"-".repeat(out.lines().next().map_or(0, str::len)));
                out.push('\n');
            }
            let _ = write!(out, "{:<width$}  {:>8.2}  {:>6.3}", r.scene, r.psnr, r.ssim);
            if self.has_lpips {
                match r.lpips {
                    Some(l) => {
                        let _ = write!(out, "  {l:>6.3}");
                    }
                    None => {
                        let _ = write!(out, "  {:>6}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::super::FrameMetrics;
    use super::*;
    use crate::synthetic::rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn report(id: &str, psnr: f64, ssim: f64) -> MetricsReport {
        MetricsReport::from_frames(
            id,
            vec![FrameMetrics { pose_id: "p".into(), psnr, ssim, split: None }],
        )
    }

    #[test]
    fn single_report_average_is_itself() {
        let t = aggregate_report(&[report("a", 17.5, 0.61)]);
        assert_eq!(t.average.psnr, 17.5);
        assert_eq!(t.average.ssim, 0.61);
        assert_eq!(t.to_csv(), "scene,psnr,ssim\na,17.5,0.61\naverage,17.5,0.61\n");
    }

    #[test]
    fn two_scene_average() {
        let t = aggregate_report(&[report("a", 10.0, 0.2), report("b", 20.0, 0.4)]);
        assert_eq!(t.average.psnr, 15.0);
        assert!((t.average.ssim - 0.3).abs() < 1e-15);
        let text = t.to_text();
        assert!(text.starts_with("Scene"));
        assert!(text.lines().last().unwrap().starts_with("average"));
    }

    #[test]
    fn spreadsheet_fixture_of_137_rows() {
        let mut r = rng(137);
        let reports: Vec<_> = (0..137)
            .map(|i| report(&format!("scene{i:03}"), r.random_range(10.0..30.0), r.random_range(0.2..0.9)))
            .collect();
        let t = aggregate_report(&reports);
        let mut psnr = 0.0;
        let mut ssim = 0.0;
        for rep in &reports {
            psnr += rep.mean_psnr;
            ssim += rep.mean_ssim;
        }
        assert!((t.average.psnr - psnr / 137.0).abs() < 1e-9);
        assert!((t.average.ssim - ssim / 137.0).abs() < 1e-9);
        assert_eq!(t.to_csv().lines().count(), 139);
    }

    #[test]
    fn lpips_column_from_external_scores() {
        let mut a = report("a", 10.0, 0.2);
        a.external.insert("lpips".into(), [("p".to_string(), 0.4), ("q".to_string(), 0.2)].into());
        let b = report("b", 20.0, 0.4);
        let t = aggregate_report(&[a, b]);
        assert!(t.has_lpips);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "scene,psnr,ssim,lpips");
        let lpips_a: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
        assert!((lpips_a - 0.3).abs() < 1e-12);
        assert!(lines[2].ends_with(','));
        assert!((t.average.lpips.unwrap() - 0.3).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn average_is_permutation_invariant(seed in any::<u64>(), n in 1usize..30) {
            let mut r = rng(seed);
            let mut reports: Vec<_> = (0..n)
                .map(|i| report(&i.to_string(), r.random_range(5.0..40.0), r.random_range(0.0..1.0)))
                .collect();
            let before = aggregate_report(&reports).average;
            reports.shuffle(&mut r);
            let after = aggregate_report(&reports).average;
            prop_assert!((before.psnr - after.psnr).abs() < 1e-12);
            prop_assert!((before.ssim - after.ssim).abs() < 1e-12);
        }
    }
}
