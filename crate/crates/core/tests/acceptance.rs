//! Acceptance gate: every criterion runs in sequence (the timing criteria
//! need a quiet machine) and reports one PASS/FAIL line. Runs without the
//! libtest harness so the lines always reach the terminal.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use midas::bench::{format_table, run_bench, BenchConfig, TABLE_HEADER};
use midas::dataset::{
    agglomerated_scene, dispersed_scene, generate_samples, nearest_objects, ArrangementGroup,
    MultiSceneConfig, SampleConfig,
};
use midas::fingerprint::{detection_excess_c, dissipation_time, reduction_area, spearman};
use midas::learn::{
    cross_validate, hamming_loss, train_forest, Dataset, FeatureEncoding,
    ForestParams, Model, MlpModel, ModelKind, TrainParams, TrainedModel,
};
use midas::mtdf::{read_sequence, write_sequence};
use midas::pipeline::{analyze_scene, vector_from_sequence, PipelineConfig};
use midas::segment::Arrangement;
use midas::simulate::{
    analytic_dissipation_time, emissivity_sweep, household_materials, plastic_materials,
    render_scene, SceneObject, SceneSpec,
};
use midas::{FrameSequence, RawFrame};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn single_scene(object: SceneObject, fps_millihz: u32, duration_s: f64, noise: f64, seed: u64) -> SceneSpec {
    SceneSpec {
        width: 32,
        height: 24,
        fps_millihz,
        duration_s,
        ambient_c: 22.0,
        objects: vec![object],
        noise_sigma_c: noise,
        rng_seed: seed,
    }
}

/// Pipeline settings under which "gone" means "no hot pixel left" and the
/// hot set is decided by raw pixel values, so closed-form times apply.
fn oracle_config(seq: &FrameSequence) -> PipelineConfig {
    let mut cfg = PipelineConfig::for_sequence(seq);
    cfg.preprocess.denoise_window = 1;
    cfg.fingerprint.dissipated_epsilon = 1e-6;
    cfg.fingerprint.vector_len = seq.len().max(2);
    cfg
}

fn effective_threshold_c(cfg: &PipelineConfig) -> f64 {
    detection_excess_c(cfg.fingerprint.intensity_threshold, cfg.preprocess.span_centikelvin())
}

fn reduction_area_exact() -> Outcome {
    let start = Instant::now();
    let listed = [((100, 100), 0.0), ((100, 0), 1.0), ((200, 50), 0.75)];
    let mut bad = 0;
    for ((a, b), want) in listed {
        if reduction_area(a, b).unwrap().to_bits() != f64::to_bits(want) {
            bad += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let a_i: usize = rng.random_range(1..1_000_000);
        let a_t: usize = rng.random_range(0..=a_i);
        let want = (a_i as f64 - a_t as f64) / a_i as f64;
        if reduction_area(a_i, a_t).unwrap().to_bits() != want.to_bits() {
            bad += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(bad == 0 && secs < 1.0, format!("{bad} mismatches, {secs:.3} s"))
}

fn single_object_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fps_millihz = 4000;
    let period = 1000.0 / fps_millihz as f64;
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let tau = 10.0 + 290.0 * i as f64 / 49.0;
        let excess: f64 = rng.random_range(4.0..14.0);
        let mut profile = plastic_materials()[i % 5].clone();
        profile.tau_s = tau;
        // Upper bound on the analytic time (threshold is just under 2 °C).
        let duration = tau * (excess / 1.9).ln() + 5.0;
        let obj = SceneObject::new(profile.clone(), (16.0, 12.0), excess);
        let seq = render_scene(&single_scene(obj, fps_millihz, duration, 0.0, i as u64)).unwrap();
        let cfg = oracle_config(&seq);
        let theta = effective_threshold_c(&cfg);
        let v = vector_from_sequence(&seq, &cfg).unwrap();
        let measured = dissipation_time(&v, cfg.fingerprint.dissipated_epsilon);
        let want = analytic_dissipation_time(&profile, excess, theta).unwrap();
        let err = (measured.seconds - want).abs();
        worst = worst.max(err);
        if !measured.still_dissipating && err <= period {
            hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        hits == 50 && secs < 30.0,
        format!("{hits}/50 within {period} s, worst {worst:.3} s, {secs:.1} s"),
    )
}

fn calibration_fit() -> Outcome {
    let minutes = [3.33, 3.73, 4.23, 4.34];
    let times: Vec<String> = minutes.iter().map(|m| format!("{}", m * 60.0)).collect();
    let out = Command::new(env!("CARGO_BIN_EXE_midas"))
        .args(["calibrate", "--times", &times.join(","), "--excesses", "13,14,15,16"])
        .output()
        .expect("run midas");
    if !out.status.success() {
        return outcome(false, String::from_utf8_lossy(&out.stderr).to_string());
    }
    let text = String::from_utf8(out.stdout).unwrap();
    let mut fitted = Vec::new();
    let mut residuals = Vec::new();
    for line in text.lines().filter(|l| l.starts_with("point ")) {
        let w: Vec<&str> = line.split_whitespace().collect();
        fitted.push(w[6].parse::<f64>().unwrap());
        residuals.push(w[8].parse::<f64>().unwrap());
    }
    let max_res = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let ordered = fitted.windows(2).all(|w| w[0] < w[1]);
    let tau = text.lines().next().unwrap_or("").to_string();
    outcome(
        fitted.len() == 4 && max_res < 15.0 && ordered,
        format!("{tau}, max residual {max_res:.2} s, ordered {ordered}"),
    )
}

fn emissivity_correlation() -> Outcome {
    let mats = emissivity_sweep(10);
    let mut eps = Vec::new();
    let mut times = Vec::new();
    for (i, m) in mats.iter().enumerate() {
        let duration = m.tau_s * (12.0f64 / 1.9).ln() + 10.0;
        let obj = SceneObject::new(m.clone(), (16.0, 12.0), 12.0);
        let seq = render_scene(&single_scene(obj, 4000, duration, 0.3, 40 + i as u64)).unwrap();
        let mut cfg = PipelineConfig::for_sequence(&seq);
        cfg.fingerprint.vector_len = seq.len();
        let v = vector_from_sequence(&seq, &cfg).unwrap();
        eps.push(m.emissivity);
        times.push(dissipation_time(&v, cfg.fingerprint.dissipated_epsilon).seconds);
    }
    let rho = spearman(&eps, &times).unwrap();
    outcome(rho >= 0.6, format!("rho = {rho:.3}"))
}

fn classification() -> Outcome {
    let start = Instant::now();
    let samples = generate_samples(&household_materials(), 40, &SampleConfig::default(), 5).unwrap();
    let data = Dataset::from_samples(&samples, FeatureEncoding::default()).unwrap();
    let params = TrainParams::with_seed(5);
    let mut accs = Vec::new();
    for (kind, need) in [(ModelKind::Forest, 0.90), (ModelKind::Svm, 0.85), (ModelKind::Mlp, 0.85)] {
        let r = cross_validate(kind, &data, 5, &params, 5).unwrap();
        accs.push((kind, r.accuracy, need));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = accs.iter().all(|(_, a, n)| a >= n) && secs < 120.0;
    let detail = accs
        .iter()
        .map(|(k, a, _)| format!("{k:?} {a:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("{detail}, {secs:.1} s"))
}

fn mlp_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let d = rng.random_range(1..=8);
        let k = rng.random_range(2..=5);
        let hidden = rng.random_range(1..=8);
        let classes = (0..k).map(|c| format!("c{c}")).collect();
        let mut m = MlpModel::init(classes, d, hidden, trial).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = rng.random_range(0..k);
        let analytic = m.gradient(&x, target);
        let base = m.params().to_vec();
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] = base[i] + h;
            m.set_params(&p).unwrap();
            let up = m.loss(&x, target);
            p[i] = base[i] - h;
            m.set_params(&p).unwrap();
            let down = m.loss(&x, target);
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        m.set_params(&base).unwrap();
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e}"))
}

fn oracle_samples() -> SampleConfig {
    SampleConfig {
        fps_millihz: 4000,
        duration_s: 150.0,
        noise_sigma_c: 0.0,
        denoise_window: 1,
        ..Default::default()
    }
}

fn vector_model(samples: &SampleConfig, per_class: usize, seed: u64) -> TrainedModel {
    let s = generate_samples(&household_materials(), per_class, samples, seed).unwrap();
    let data = Dataset::from_samples(&s, FeatureEncoding::default()).unwrap();
    let forest = train_forest(
        &data,
        &ForestParams {
            n_trees: 60,
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    TrainedModel {
        encoding: FeatureEncoding::default(),
        model: Model::Forest(forest),
    }
}

fn dispersed_recovery() -> Outcome {
    let samples = oracle_samples();
    let model = vector_model(&samples, 12, 7);
    let scene_cfg = MultiSceneConfig {
        fps_millihz: samples.fps_millihz,
        duration_s: samples.duration_s,
        ..Default::default()
    };
    let period = 1000.0 / scene_cfg.fps_millihz as f64;
    let catalog = household_materials();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut count_ok = 0;
    let mut time_ok = 0;
    let mut objects_total = 0;
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for seed in 0..30u64 {
        let n = rng.random_range(2..=4);
        let mut pick: Vec<usize> = (0..catalog.len()).collect();
        for i in 0..n {
            let j = rng.random_range(i..pick.len());
            pick.swap(i, j);
        }
        let mats: Vec<_> = pick[..n].iter().map(|&i| catalog[i].clone()).collect();
        let spec = dispersed_scene(&mats, &scene_cfg, 100 + seed).unwrap();
        let seq = render_scene(&spec).unwrap();
        let cfg = oracle_config(&seq);
        let theta = effective_threshold_c(&cfg);
        let scene = analyze_scene(&seq, &cfg, Some(&model)).unwrap();
        if scene.objects.len() == n {
            count_ok += 1;
        }
        let rois: Vec<_> = scene.objects.iter().map(|o| o.roi.clone()).collect();
        for (o, idx) in scene.objects.iter().zip(nearest_objects(&rois, &spec)) {
            let obj = &spec.objects[idx];
            let want = analytic_dissipation_time(&obj.profile, obj.effective_excess_c(), theta).unwrap();
            objects_total += 1;
            if !o.dissipation.still_dissipating && (o.dissipation.seconds - want).abs() <= period {
                time_ok += 1;
            }
        }
        predicted.push(scene.labels());
        truth.push(mats.iter().map(|m| m.name.clone()).collect::<Vec<_>>());
    }
    let hl = hamming_loss(&predicted, &truth).unwrap();
    outcome(
        count_ok == 30 && time_ok == objects_total && hl == 0.0,
        format!("ROI count {count_ok}/30, times {time_ok}/{objects_total}, Hamming {hl:.3}"),
    )
}

fn agglomeration_direction() -> Outcome {
    let samples = SampleConfig::default();
    let model = vector_model(&samples, 12, 8);
    let scene_cfg = MultiSceneConfig {
        fps_millihz: samples.fps_millihz,
        duration_s: samples.duration_s,
        noise_sigma_c: 0.3,
        ..Default::default()
    };
    let mats = ArrangementGroup::D.materials();
    let truth = vec![mats.iter().map(|m| m.name.clone()).collect::<Vec<_>>()];
    let (mut holds, mut sum_d, mut sum_a) = (0, 0.0, 0.0);
    for seed in 0..20u64 {
        let acc = |spec: SceneSpec| {
            let seq = render_scene(&spec).unwrap();
            let mut cfg = PipelineConfig::for_sequence(&seq);
            cfg.fingerprint.vector_len = seq.len();
            let labels = analyze_scene(&seq, &cfg, Some(&model)).map(|s| s.labels()).unwrap_or_default();
            1.0 - hamming_loss(&[labels], &truth).unwrap()
        };
        let d = acc(dispersed_scene(&mats, &scene_cfg, 200 + seed).unwrap());
        let a = acc(agglomerated_scene(&mats, &scene_cfg, 6, 200 + seed).unwrap());
        sum_d += d;
        sum_a += a;
        if a <= d {
            holds += 1;
        }
    }
    outcome(
        holds > 10,
        format!(
            "agglomerated <= dispersed in {holds}/20 seeds (mean {:.3} vs {:.3})",
            sum_a / 20.0,
            sum_d / 20.0
        ),
    )
}

fn thickness_monotonicity() -> Outcome {
    let ladder = [0.0, 0.44, 0.91, 1.53, 1.95];
    let mut results = Vec::new();
    for profile in plastic_materials() {
        let times: Vec<f64> = ladder
            .iter()
            .map(|&mm| {
                let obj = SceneObject::new(profile.clone(), (16.0, 12.0), 12.0).with_cover(mm);
                let duration = profile.tau_s * (12.0f64 / 1.9).ln() + 5.0;
                let seq = render_scene(&single_scene(obj, 8000, duration, 0.0, 9)).unwrap();
                let mut cfg = PipelineConfig::for_sequence(&seq);
                cfg.fingerprint.vector_len = seq.len();
                let v = vector_from_sequence(&seq, &cfg).unwrap();
                dissipation_time(&v, cfg.fingerprint.dissipated_epsilon).seconds
            })
            .collect();
        let ok = profile.resistance_k_per_mm > 0.0 && times.windows(2).all(|w| w[1] < w[0]);
        results.push((profile.name.clone(), ok, times));
    }
    let pass = results.iter().all(|r| r.1);
    let (name, _, t) = &results[0];
    outcome(
        pass,
        format!(
            "{}/{} materials strictly decreasing; {name}: {}",
            results.iter().filter(|r| r.1).count(),
            results.len(),
            t.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(" > ")
        ),
    )
}

fn bench_monotonicity() -> Outcome {
    let mut frames_ok = 0;
    let mut rois_ok = 0;
    let mut format_ok = true;
    for seed in 0..5u64 {
        let by_length = run_bench(&BenchConfig {
            video_lengths_s: vec![30.0, 60.0, 90.0, 120.0],
            arrangements: vec![ArrangementGroup::A],
            modes: vec![Arrangement::Dispersed],
            repetitions: 11,
            rng_seed: seed,
            ..Default::default()
        })
        .unwrap();
        if by_length.windows(2).all(|w| w[1].median_ms > w[0].median_ms) {
            frames_ok += 1;
        }
        let by_group = run_bench(&BenchConfig {
            video_lengths_s: vec![60.0],
            arrangements: ArrangementGroup::ALL.to_vec(),
            modes: vec![Arrangement::Dispersed],
            repetitions: 15,
            rng_seed: seed,
            ..Default::default()
        })
        .unwrap();
        if by_group.windows(2).all(|w| w[1].median_ms > w[0].median_ms && w[1].roi_count > w[0].roi_count) {
            rois_ok += 1;
        }
        let table = format_table(&by_group);
        let mut lines = table.lines();
        format_ok &= lines.next() == Some(TABLE_HEADER)
            && TABLE_HEADER.split('\t').collect::<Vec<_>>()
                == ["length_s", "arrangement", "mode", "frames", "median_ms", "p10_ms", "p90_ms", "roi_count"]
            && lines.all(|l| l.split('\t').count() == 8)
            && by_group.iter().all(|r| r.median_ms > 0.0);
    }
    outcome(
        frames_ok >= 4 && rois_ok >= 4 && format_ok,
        format!("frames {frames_ok}/5, ROIs {rois_ok}/5, table format ok {format_ok}"),
    )
}

fn mtdf_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut identical = 0;
    let mut clean_errors = 0usize;
    let mut cuts = 0usize;
    for _ in 0..1000 {
        let (w, h) = (rng.random_range(1..=9), rng.random_range(1..=7));
        let n = rng.random_range(1..=5);
        let frames = (0..n)
            .map(|i| RawFrame::new(w, h, (0..w * h).map(|_| rng.random()).collect(), i).unwrap())
            .collect();
        let seq = FrameSequence::new(frames, rng.random_range(1..=120_000), rng.random(), None).unwrap();
        let mut bytes = Vec::new();
        write_sequence(&seq, &mut bytes).unwrap();
        let back = read_sequence(bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        write_sequence(&back, &mut again).unwrap();
        if again == bytes && back == seq {
            identical += 1;
        }
        for cut in 0..bytes.len() {
            cuts += 1;
            if read_sequence(&bytes[..cut]).is_err() {
                clean_errors += 1;
            }
        }
    }
    outcome(
        identical == 1000 && clean_errors == cuts,
        format!("{identical}/1000 identical, {clean_errors}/{cuts} truncations rejected"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("reduction area exactness", reduction_area_exact),
        ("single-object oracle equivalence", single_object_oracle),
        ("cooling calibration fit", calibration_fit),
        ("emissivity correlation direction", emissivity_correlation),
        ("classification accuracy", classification),
        ("MLP gradient check", mlp_gradient_check),
        ("dispersed multi-object recovery", dispersed_recovery),
        ("agglomeration degradation direction", agglomeration_direction),
        ("thickness monotonicity", thickness_monotonicity),
        ("bench monotonicity", bench_monotonicity),
        ("MTDF round trip", mtdf_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {verdict}  {name}: {} [{:.1} s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += !o.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
