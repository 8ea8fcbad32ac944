use rescan_core::commands::{guidance, simulate, sweep};
use rescan_core::config::parse_config;

const SCORED: &str = r#"
[cohort]
subjects = 20000
seed = 8

[distribution]
family = "point_mass"
alpha = 0.3

[predictor]
kind = "score"
noise_scale = NOISE

[costs]
rescan_cost = 0.1
correction_cost = 1.0

[policy]
max_rescans = 20
threshold_grid = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0]
"#;

#[test]
fn noiseless_sweep_is_optimal_at_exact_separation() {
    let cfg = parse_config(&SCORED.replace("NOISE", "0.0")).unwrap();
    let s = sweep(&cfg).unwrap();
    let best = s.simulated_optimum().unwrap();
    // failing scans score below the 0.5 cutoff and passing ones at or above
    assert_eq!(best.threshold, 0.5);
    assert_eq!(best.precision, Some(1.0));
    assert_eq!(best.recall, Some(1.0));
    // only failures are ever re-scanned, and they are all caught
    let cost = best.simulated_mean_cost.unwrap();
    assert!(s
        .rows
        .iter()
        .all(|r| r.simulated_mean_cost.unwrap() >= cost));
    assert!(s
        .rows
        .iter()
        .filter(|r| r.threshold > 0.5)
        .all(|r| r.simulated_mean_cost.unwrap() > cost));

    // τ = 0 flags nothing: precision absent rather than an error
    let zero = &s.rows[0];
    assert_eq!(zero.precision, None);
    assert_eq!(zero.flag_rate, 0.0);
    assert_eq!(zero.simulated_cost_ratio, Some(1.0));
}

#[test]
fn flag_everything_precision_is_the_base_rate() {
    let cfg = parse_config(&SCORED.replace("NOISE", "0.1")).unwrap();
    let s = sweep(&cfg).unwrap();
    let last = s.rows.last().unwrap();
    let f = s.first_scan_failure_fraction.unwrap();
    let p = last.precision.unwrap();
    let n = cfg.subjects as f64 * last.flag_rate;
    let se = (f * (1.0 - f) / n).sqrt();
    assert!(
        (p - f).abs() <= 3.0 * se,
        "precision {p} vs failure fraction {f}"
    );
}

#[test]
fn noisy_sweep_optima_agree_within_one_step() {
    let cfg = parse_config(&SCORED.replace("NOISE", "0.1")).unwrap();
    let s = sweep(&cfg).unwrap();
    let sim = s.simulated_optimum().unwrap().threshold;
    let plug = s.plugin_optimum().unwrap().threshold;
    assert!(
        (sim - plug).abs() <= 0.05 + 1e-12,
        "simulated {sim}, plug-in {plug}"
    );
}

#[test]
fn kinematic_sweep_runs() {
    let text = r#"
[cohort]
mode = "kinematic"
subjects = 2000
seed = 1

[predictor]
kind = "score"
noise_scale = 0.05

[costs]
rescan_cost = 0.1
correction_cost = 1.0

[policy]
max_rescans = 5
threshold_grid = [0.0, 0.5, 0.9]
"#;
    let s = sweep(&parse_config(text).unwrap()).unwrap();
    assert_eq!(s.rows.len(), 3);
    assert!(s.first_scan_failure_fraction.unwrap() > 0.0);
    assert!(s.rows[1].plugin_ratio.is_some());
    assert_eq!(s.rows[0].mean_rescans, Some(0.0));
}

const KINEMATIC: &str = r#"
[cohort]
mode = "kinematic"
subjects = 10000
seed = 12

[predictor]
kind = "score"
noise_scale = 0.0

[costs]
rescan_cost = 0.1
correction_cost = 1.0

[policy]
threshold = 1.0
max_rescans = 1
"#;

#[test]
fn exact_guidance_reaches_full_quality_by_second_scan() {
    let cfg = parse_config(&format!("{KINEMATIC}\n[kinematics]\ngain = 1.0\n")).unwrap();
    let g = guidance(&cfg).unwrap();
    assert!(g
        .trajectories
        .iter()
        .all(|t| (t[t.len() - 1] - 1.0).abs() <= 1e-9));
    assert_eq!(g.curve.len(), 2);
    assert!((g.curve[1].1 - 1.0).abs() <= 1e-9);
    let z = g.improvement_z.unwrap();
    assert!(z > 10.0);
}

#[test]
fn uninformative_guidance_has_no_effect() {
    // the guided pose is the target plus noise with the same spread as the
    // start, so initial and final quality share one distribution
    let cfg = parse_config(&format!(
        "{KINEMATIC}
[kinematics]
translation_scale_mm = 10.0
start_translation_sd_mm = 100.0
guidance_noise_t_mm = 100.0
start_rotation_sd_rad = 0.3
guidance_noise_r_rad = 0.3
gain = 1.0
"
    ))
    .unwrap();
    let g = guidance(&cfg).unwrap();
    assert_eq!(g.subjects, 10_000);
    let z = g.improvement_z.unwrap();
    assert!(z.abs() < 3.0, "z = {z}");
    let out = g.outputs().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = out.commit(dir.path()).unwrap();
    assert_eq!(files.len(), 3);
}

#[test]
fn simulated_reduction_matches_closed_form() {
    let text = r#"
[cohort]
subjects = 1000000
seed = 42

[distribution]
family = "point_mass"
alpha = 0.2

[predictor]
precision = 0.8
recall = 0.8

[costs]
rescan_cost = 0.1
correction_cost = 1.0
"#;
    let (report, _) = simulate(&parse_config(text).unwrap()).unwrap();
    let agg = &report.aggregates;
    let ratio = agg.empirical_cost_ratio.unwrap();
    let reduction = 1.0 - ratio.mean;
    assert!((reduction - 0.625).abs() <= 3.0 * ratio.standard_error.unwrap());
    // mean cost against α(p c_c − p r c_c + r c_s) / (p − α r) = 0.075
    let cost = agg.mean_cost.unwrap();
    assert!((cost.mean - 0.075).abs() <= 3.0 * cost.standard_error.unwrap());
    assert_eq!(report.analytic_cost_ratio, Some(0.375));
}

#[test]
fn mean_cost_converges_across_operating_points() {
    for (alpha, p, r) in [(0.1, 0.9, 0.5), (0.4, 0.7, 0.9), (0.6, 0.95, 0.95)] {
        let text = format!(
            r#"
[cohort]
subjects = 1000000
seed = 5

[distribution]
family = "point_mass"
alpha = {alpha}

[predictor]
precision = {p}
recall = {r}

[costs]
rescan_cost = 0.15
correction_cost = 2.0
"#
        );
        let report = rescan_core::acquisition::run_cohort(&parse_config(&text).unwrap()).unwrap();
        let cost = report.aggregates.mean_cost.unwrap();
        let want = alpha * (p * 2.0 - p * r * 2.0 + r * 0.15) / (p - alpha * r);
        let z = (cost.mean - want) / cost.standard_error.unwrap();
        assert!(
            z.abs() <= 3.0,
            "α {alpha} p {p} r {r}: {} vs {want}, z {z}",
            cost.mean
        );
    }
}
