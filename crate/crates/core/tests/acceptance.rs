//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 5 to 8 and 10 share one desk-scale pipeline: the default corpus,
//! a stratified 80/20 split and all four detectors trained for 30 epochs.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lcdr_adv::attack::{self, AttackConfig, AttackReport};
use lcdr_adv::autodiff::{bce_loss, Architecture, Model, NodeId, Tape, Tensor, TrainConfig};
use lcdr_adv::dataset::{self, Dataset, GenerationConfig, LABEL_FDIA};
use lcdr_adv::defense::{self, DefenseConfig};
use lcdr_adv::detector::{train_detector, Detector};
use lcdr_adv::exec::{derive_seed, Execution};
use lcdr_adv::metrics::{self, MetricsReport};
use lcdr_adv::relay::{operating_current, RelayContext, RelaySettings};
use lcdr_adv::waveform::{
    self, FaultParams, FaultType, FdiaParams, ScenarioSpec, SystemModel, LOCAL_ROWS, SNR_RANGE_DB,
};

const SEED: u64 = 7;
const TEST_FRACTION: f64 = 0.2;

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

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed.as_secs_f64() < limit_s as f64
}

// 1. Relay characteristic.

fn relay_characteristic() -> Outcome {
    let s = RelaySettings::default();
    let cases = [(0.0, 0.05), (0.4, 0.13), (0.6, 0.173)];
    let mut worst: f64 = 0.0;
    for (i_r, want) in cases {
        worst = worst.max((operating_current(i_r, &s).unwrap() - want).abs());
    }
    let lower = s.i_d0 + s.m1 * s.i_b;
    let upper_branch = |i_r: f64| s.i_d0 + s.m1 * s.i_b + s.m2 * (i_r - s.i_b);
    let upper = upper_branch(s.i_b);
    let at_knee = operating_current(s.i_b, &s).unwrap();
    let continuous = at_knee == lower && at_knee == upper;
    outcome(
        worst <= 1e-12 && continuous,
        format!("max |error| {worst:.1e} (tol 1e-12); knee {at_knee} continuous={continuous}"),
    )
}

// 2. Trip soundness.

fn random_fault(rng: &mut ChaCha8Rng, snr: Option<f64>) -> ScenarioSpec {
    let p = FaultParams {
        fault_type: FaultType::ALL[rng.random_range(0..FaultType::ALL.len())],
        location_frac: rng.random_range(0.1..=0.9),
        impedance_ohm: rng.random_range(0.0..=100.0),
        inception_angle_ms: rng.random_range(0..=15),
    };
    ScenarioSpec::fault(p, rng.random_range(0.2..=1.0), snr, rng.random())
}

fn random_fdia(rng: &mut ChaCha8Rng, snr: Option<f64>, model: &SystemModel) -> ScenarioSpec {
    let load = rng.random_range(0.2..=1.0);
    let onset = if rng.random_bool(0.5) { 33 } else { 35 };
    let seed = rng.random();
    let template = ScenarioSpec::normal(load, None, seed);
    let (_, remote) = waveform::steady_phasors(&template, model);
    let alpha = waveform::sample_fdia_alpha(&RelaySettings::default(), &remote, rng).unwrap();
    ScenarioSpec::fdia(FdiaParams { alpha, onset_index: onset }, load, snr, seed)
}

fn trip_soundness() -> Outcome {
    let start = Instant::now();
    let model = SystemModel::default();
    let relay = RelayContext::default();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 0xACC, 2));
    let (lo, hi) = SNR_RANGE_DB;
    let mut counts = [0usize; 3];
    for _ in 0..1000 {
        let snr = Some(rng.random_range(lo..=hi));
        let normal = ScenarioSpec::normal(rng.random_range(0.2..=1.0), snr, rng.random());
        let fault = random_fault(&mut rng, snr);
        let fdia = random_fdia(&mut rng, snr, &model);
        for (k, spec) in [normal, fault, fdia].iter().enumerate() {
            let w = waveform::synthesize(spec, &model).unwrap().quantized();
            counts[k] += relay.trips(&w).unwrap() as usize;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        counts == [0, 1000, 1000] && within(elapsed, 60),
        format!(
            "trips: normal {}/1000 (want 0), fault {}/1000, fdia {}/1000 (want all); {:.1}s (< 60s)",
            counts[0],
            counts[1],
            counts[2],
            elapsed.as_secs_f64()
        ),
    )
}

// 3. Phase-reversal oracle.

fn phase_reversal_oracle() -> Outcome {
    let model = SystemModel::default();
    let load = 0.3 / model.nominal_load_current;
    let spec = ScenarioSpec::fdia(
        FdiaParams {
            alpha: Complex64::new(-1.0, 0.0),
            onset_index: 33,
        },
        load,
        None,
        0,
    );
    let w = waveform::synthesize(&spec, &model).unwrap();
    let d = RelayContext::default().check(&w).unwrap();
    let last = w.len() - 1;
    let want = [0.6, 0.6, 0.173];
    let mut worst: f64 = 0.0;
    for phase in 0..3 {
        let t = d.point(phase, last).unwrap();
        for (got, want) in [t.i_d, t.i_r, t.i_op].into_iter().zip(want) {
            worst = worst.max((got - want).abs() / want);
        }
    }
    let t = d.point(0, last).unwrap();
    outcome(
        d.tripped && worst <= 0.02,
        format!(
            "tripped={} at {:?}; phase A (i_d, i_r, i_op) = ({:.4}, {:.4}, {:.4}) kA; max rel error {:.2}% (tol 2%)",
            d.tripped,
            d.trip_index,
            t.i_d,
            t.i_r,
            t.i_op,
            100.0 * worst
        ),
    )
}

// 4. Gradient correctness.

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Central differences of `sum(r * out)` against the tape, over the input and
/// every parameter.
fn fd_error<F>(params: &[Tensor], x: &Tensor, rng: &mut ChaCha8Rng, build: F) -> f64
where
    F: for<'a> Fn(&mut Tape<'a>, NodeId) -> NodeId,
{
    let eval = |ps: &[Tensor], xv: &Tensor, r: &Tensor| -> f64 {
        let mut tape = Tape::new(ps);
        let i = tape.input(xv.clone()).unwrap();
        let o = build(&mut tape, i);
        tape.value(o).data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };
    let mut tape = Tape::new(params);
    let i = tape.input(x.clone()).unwrap();
    let o = build(&mut tape, i);
    let r = rand_tensor(rng, tape.value(o).shape());
    let grads = tape.backward(o, r.clone()).unwrap();
    let gx = grads.node(i).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()));
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data_mut()[k] += h;
        xm.data_mut()[k] -= h;
        let num = (eval(params, &xp, &r) - eval(params, &xm, &r)) / (2.0 * h);
        worst = worst.max(rel_err(gx.data()[k], num));
    }
    for p in 0..params.len() {
        for k in 0..params[p].len() {
            let (mut pp, mut pm) = (params.to_vec(), params.to_vec());
            pp[p].data_mut()[k] += h;
            pm[p].data_mut()[k] -= h;
            let num = (eval(&pp, x, &r) - eval(&pm, x, &r)) / (2.0 * h);
            worst = worst.max(rel_err(grads.params[p].data()[k], num));
        }
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 0xACC, 4));
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut note = |name, e: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(slot) => slot.1 = slot.1.max(e),
        None => worst.push((name, e)),
    };
    for trial in 0..10 {
        let ps = vec![rand_tensor(&mut rng, &[4, 7]), rand_tensor(&mut rng, &[4])];
        let x = rand_tensor(&mut rng, &[7]);
        note("dense", fd_error(&ps, &x, &mut rng, |t, i| t.dense(i, 0, 1, "d").unwrap()));

        let pad = trial % 3;
        let ps = vec![rand_tensor(&mut rng, &[3, 2, 5]), rand_tensor(&mut rng, &[3])];
        let x = rand_tensor(&mut rng, &[2, 13]);
        note("conv1d", fd_error(&ps, &x, &mut rng, |t, i| t.conv1d(i, 0, 1, pad, "c").unwrap()));
        note("maxpool", fd_error(&[], &x, &mut rng, |t, i| t.max_pool2(i, "p").unwrap()));
        note("avgpool", fd_error(&[], &x, &mut rng, |t, i| t.global_avg_pool(i, "g").unwrap()));
        note("relu", fd_error(&[], &x, &mut rng, |t, i| t.relu(i, "r").unwrap()));
        note("sigmoid", fd_error(&[], &x, &mut rng, |t, i| t.sigmoid(i, "s").unwrap()));

        let h = 3;
        let ps = vec![
            rand_tensor(&mut rng, &[4 * h, 2]),
            rand_tensor(&mut rng, &[4 * h, h]),
            rand_tensor(&mut rng, &[4 * h]),
        ];
        let x = rand_tensor(&mut rng, &[2, 6]);
        note("lstm", fd_error(&ps, &x, &mut rng, |t, i| t.lstm(i, 0, 1, 2, "l").unwrap()));

        let c = 3;
        let ps = vec![
            rand_tensor(&mut rng, &[c, c, 5]),
            rand_tensor(&mut rng, &[c]),
            rand_tensor(&mut rng, &[c, c, 5]),
            rand_tensor(&mut rng, &[c]),
        ];
        let x = rand_tensor(&mut rng, &[c, 9]);
        note(
            "residual",
            fd_error(&ps, &x, &mut rng, |t, i| {
                let r = t.conv1d(i, 0, 1, 2, "c1").unwrap();
                let r = t.relu(r, "r1").unwrap();
                let r = t.conv1d(r, 2, 3, 2, "c2").unwrap();
                let s = t.add(i, r, "skip").unwrap();
                t.relu(s, "r2").unwrap()
            }),
        );

        for arch in Architecture::ALL {
            let model = Model::new(arch, [2, 16], rng.random()).unwrap();
            let x = rand_tensor(&mut rng, &[2, 16]);
            let y = (trial % 2) as u8;
            let g = model.input_gradient(&x, y).unwrap();
            let loss = |xv: &Tensor| bce_loss(model.forward(xv).unwrap(), y);
            let mut e: f64 = 0.0;
            for k in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp.data_mut()[k] += 1e-5;
                xm.data_mut()[k] -= 1e-5;
                e = e.max(rel_err(g.data()[k], (loss(&xp) - loss(&xm)) / 2e-5));
            }
            note("end-to-end", e);
        }
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let listing: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    outcome(
        max <= 1e-4 && within(elapsed, 120),
        format!("max rel error {max:.1e} (tol 1e-4): {}; {:.1}s", listing.join(", "), elapsed.as_secs_f64()),
    )
}

// Shared desk-scale pipeline.

struct Trained {
    arch: Architecture,
    det: Detector,
    clean: MetricsReport,
    train_time: Duration,
}

struct Pipeline {
    train: Dataset,
    test: Dataset,
    relay: RelayContext,
    models: Vec<Trained>,
}

impl Pipeline {
    fn mlp(&self) -> &Detector {
        &self.models.iter().find(|m| m.arch == Architecture::Mlp).unwrap().det
    }
}

fn arch_index(arch: Architecture) -> u64 {
    Architecture::ALL.iter().position(|&a| a == arch).unwrap() as u64
}

fn train_cfg(arch: Architecture, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: derive_seed(seed, 4, arch_index(arch)),
        ..TrainConfig::default()
    }
}

fn pipeline() -> Pipeline {
    let ds = dataset::generate_dataset(&GenerationConfig::default(), derive_seed(SEED, 1, 0)).unwrap();
    let relay = *ds.relay();
    let (train, test) = dataset::split(&ds, TEST_FRACTION, derive_seed(SEED, 2, 0)).unwrap();
    let models = Architecture::ALL
        .iter()
        .map(|&arch| {
            let start = Instant::now();
            let (det, _) =
                train_detector(arch, &train, &train_cfg(arch, SEED), derive_seed(SEED, 3, arch_index(arch)))
                    .unwrap();
            let train_time = start.elapsed();
            let clean = defense::evaluate(&det, &test, Execution::default(), "clean_test", None).unwrap();
            Trained {
                arch,
                det,
                clean,
                train_time,
            }
        })
        .collect();
    Pipeline {
        train,
        test,
        relay,
        models,
    }
}

// 5. Clean detection.

fn clean_detection(p: &Pipeline) -> Outcome {
    let total: Duration = p.models.iter().map(|m| m.train_time).sum();
    let accs: Vec<String> = p
        .models
        .iter()
        .map(|m| format!("{} {:.4}", m.arch, m.clean.accuracy))
        .collect();
    let ok = p.models.iter().all(|m| m.clean.accuracy >= 0.95);
    let acc = |a| p.models.iter().find(|m| m.arch == a).unwrap().clean.accuracy;
    let soft = acc(Architecture::ResNet) >= acc(Architecture::Mlp);
    outcome(
        ok && within(total, 15 * 60),
        format!(
            "test accuracy (min 0.95): {}; resnet >= mlp (soft): {soft}; training {:.0}s (< 900s)",
            accs.join(", "),
            total.as_secs_f64()
        ),
    )
}

// 6. Attack potency.

fn attack_potency(p: &Pipeline) -> Outcome {
    let start = Instant::now();
    let mlp = p.mlp();
    let cfg = AttackConfig::new(0.5, 5).unwrap();
    let outcomes = attack::attack_all(mlp, &p.test, &cfg, &p.relay, Execution::default()).unwrap();
    let mut violations = 0;
    let mut successes = 0;
    for (i, o) in &outcomes {
        let src = &p.test.samples()[*i].window;
        if !o.success {
            violations += (o.adversarial_window != *src) as usize;
            continue;
        }
        successes += 1;
        let trips = p.relay.trips(&o.adversarial_window).unwrap();
        let fooled = mlp.predict(&o.adversarial_window).unwrap() == 0;
        let local_ok = LOCAL_ROWS.into_iter().all(|c| o.adversarial_window.row(c) == src.row(c));
        let x = mlp.input(src);
        let xa = mlp.input(&o.adversarial_window);
        // Physical windows are rounded to f32, so the model-space clip can
        // only be checked to that precision.
        let tol = 1e-5 * x.max_abs().max(1.0);
        let clip_ok = xa.data().iter().all(|&v| v >= x.min() - tol && v <= x.max() + tol);
        violations += (!(trips && fooled && local_ok && clip_ok)) as usize;
    }
    let fraction = successes as f64 / outcomes.len() as f64;
    let elapsed = start.elapsed();
    outcome(
        fraction >= 0.80 && violations == 0 && within(elapsed, 300),
        format!(
            "mlp success {successes}/{} = {:.2}% (min 80%); invariant violations {violations}; {:.1}s",
            outcomes.len(),
            100.0 * fraction,
            elapsed.as_secs_f64()
        ),
    )
}

// 7. Epsilon monotonicity.

fn epsilon_monotonicity(p: &Pipeline) -> Outcome {
    let mlp = p.mlp();
    let rates: Vec<f64> = [0.1, 0.3, 0.5]
        .iter()
        .map(|&e| {
            let cfg = AttackConfig::new(e, 5).unwrap();
            let (_, report) =
                attack::build_adversarial_testset(mlp, &p.test, &cfg, &p.relay, Execution::default()).unwrap();
            metrics::fooling_rate(&report.records, report.n_fdias).unwrap()
        })
        .collect();
    let worst_drop = rates.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    outcome(
        worst_drop <= 2.0,
        format!(
            "mlp fooling rate at eps 0.1/0.3/0.5: {:.2}% / {:.2}% / {:.2}%; largest drop {worst_drop:.2} pp (max 2)",
            rates[0], rates[1], rates[2]
        ),
    )
}

// 8. Defense efficacy.

fn adversarial_recall(det: &Detector, test: &Dataset, relay: &RelayContext) -> (Dataset, MetricsReport, AttackReport) {
    let cfg = AttackConfig::new(0.5, 5).unwrap();
    let (adv, report) = attack::build_adversarial_testset(det, test, &cfg, relay, Execution::default()).unwrap();
    let m = defense::evaluate(det, &adv, Execution::default(), "adversarial_test", Some(&cfg)).unwrap();
    (adv, m, report)
}

fn defense_efficacy(p: &Pipeline) -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut lines = Vec::new();
    for m in &p.models {
        let (pre_adv, pre, _) = adversarial_recall(&m.det, &p.test, &p.relay);
        let (robust, _, out) = defense::adversarial_training(
            &m.det,
            &p.train,
            &DefenseConfig::default(),
            &train_cfg(m.arch, SEED),
            &p.relay,
        )
        .unwrap();
        let (_, post, _) = adversarial_recall(&robust, &p.test, &p.relay);
        let replay = defense::evaluate(&robust, &pre_adv, Execution::default(), "replay", None).unwrap();
        let clean = defense::evaluate(&robust, &p.test, Execution::default(), "clean_test", None).unwrap();
        let (r0, r1) = (pre.recall.unwrap(), post.recall.unwrap());
        let fault_recall = clean.fault_recall.unwrap();
        pass &= r1 - r0 >= 0.20 && fault_recall >= 0.95;
        lines.push(format!(
            "{} regenerated recall {:.4} -> {:.4} ({:+.1} pp), replay recall {:.4}, clean fault recall {:.4}, +{} samples",
            m.arch,
            r0,
            r1,
            100.0 * (r1 - r0),
            replay.recall.unwrap(),
            fault_recall,
            out.summary.added
        ));
    }
    let elapsed = start.elapsed();
    outcome(
        pass && within(elapsed, 20 * 60),
        format!("(min gain 20 pp, fault recall >= 0.95) {}; {:.0}s", lines.join("; "), elapsed.as_secs_f64()),
    )
}

// 9. Determinism.

fn tiny_generation(exec: Execution) -> GenerationConfig {
    GenerationConfig {
        fault_types: vec![FaultType::AG, FaultType::BC, FaultType::ABCG],
        impedances_ohm: vec![0.0, 100.0],
        locations: vec![0.3, 0.7],
        inception_angles_ms: vec![0, 8],
        fault_loads_pu: vec![1.0],
        alpha_draws: 12,
        fdia_onsets: vec![33, 35],
        fdia_loads_pu: vec![1.0],
        execution: exec,
        ..GenerationConfig::default()
    }
}

/// Every artifact of a reduced end-to-end run, serialized.
fn artifacts(exec: Execution) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset::generate_dataset(&tiny_generation(exec), derive_seed(SEED, 1, 0)).unwrap();
    let relay = *ds.relay();
    let (train, test) = dataset::split(&ds, 0.25, derive_seed(SEED, 2, 0)).unwrap();
    let mut out = Vec::new();
    let push_dataset = |name: &str, d: &Dataset, out: &mut Vec<(String, Vec<u8>)>| {
        let path = dir.path().join(name);
        dataset::save(d, &path).unwrap();
        for f in ["manifest.json", "samples.f32", "labels.u8", "provenance.jsonl"] {
            out.push((format!("{name}/{f}"), std::fs::read(path.join(f)).unwrap()));
        }
    };
    push_dataset("train", &train, &mut out);
    push_dataset("test", &test, &mut out);
    let acfg = AttackConfig::new(0.5, 5).unwrap();
    let dcfg = DefenseConfig {
        retrain_epochs: 1,
        ..DefenseConfig::default()
    };
    for arch in Architecture::ALL {
        let tcfg = TrainConfig {
            epochs: 2,
            execution: exec,
            ..train_cfg(arch, SEED)
        };
        let (det, log) = train_detector(arch, &train, &tcfg, derive_seed(SEED, 3, arch_index(arch))).unwrap();
        out.push((format!("{arch}.ckpt"), det.to_bytes()));
        out.push((format!("{arch}.train.json"), metrics::to_json(&log).unwrap().into_bytes()));
        let (adv, report) = attack::build_adversarial_testset(&det, &test, &acfg, &relay, exec).unwrap();
        push_dataset(&format!("{arch}_adv"), &adv, &mut out);
        out.push((format!("{arch}.attack.json"), metrics::to_json(&report).unwrap().into_bytes()));
        let (robust, _, outcome) = defense::adversarial_training(&det, &train, &dcfg, &tcfg, &relay).unwrap();
        out.push((format!("{arch}.robust.ckpt"), robust.to_bytes()));
        let (_, m) = defense::adversarial_report(&robust, &test, &acfg, &relay, exec, "adv").unwrap();
        let text = metrics::reports_to_csv(&[m]).unwrap() + &metrics::to_json(&outcome).unwrap();
        out.push((format!("{arch}.defense"), text.into_bytes()));
    }
    out
}

fn determinism() -> Outcome {
    let a = artifacts(Execution::Parallel);
    let b = artifacts(Execution::Parallel);
    let c = artifacts(Execution::Sequential);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .zip(&c)
        .filter(|((x, y), z)| x != y || x != z)
        .map(|((x, _), _)| x.0.as_str())
        .collect();
    let bytes: usize = a.iter().map(|x| x.1.len()).sum();
    outcome(
        differing.is_empty() && a.len() == b.len() && a.len() == c.len(),
        format!(
            "{} artifacts ({bytes} bytes) over 3 runs (2 parallel, 1 sequential); differing: {:?}",
            a.len(),
            differing
        ),
    )
}

// 10. Latency.

fn latency(p: &Pipeline) -> Outcome {
    let windows: Vec<_> = p.test.samples().iter().cycle().take(1000).map(|s| &s.window).collect();
    let mut lines = Vec::new();
    let mut pass = true;
    for m in &p.models {
        let start = Instant::now();
        let mut fdias = 0usize;
        for w in &windows {
            fdias += (m.det.predict(w).unwrap() == LABEL_FDIA) as usize;
        }
        let mean_ms = start.elapsed().as_secs_f64() * 1e3 / windows.len() as f64;
        std::hint::black_box(fdias);
        pass &= mean_ms < 10.0;
        lines.push(format!("{} {mean_ms:.3} ms", m.arch));
    }
    outcome(pass, format!("mean single-window inference (max 10 ms): {}", lines.join(", ")))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "relay characteristic", relay_characteristic()),
        (2, "trip soundness", trip_soundness()),
        (3, "phase-reversal oracle", phase_reversal_oracle()),
        (4, "gradient correctness", gradient_correctness()),
    ];
    for (n, name, o) in &results {
        report(*n, name, o);
    }
    let p = pipeline();
    let late: Vec<(u32, &str, fn(&Pipeline) -> Outcome)> = vec![
        (5, "clean detection", clean_detection),
        (6, "attack potency", attack_potency),
        (7, "epsilon monotonicity", epsilon_monotonicity),
        (8, "defense efficacy", defense_efficacy),
        (9, "determinism", |_| determinism()),
        (10, "latency", latency),
    ];
    for (n, name, f) in late {
        let o = f(&p);
        report(n, name, &o);
        results.push((n, name, o));
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn report(n: u32, name: &str, o: &Outcome) {
    println!("{} criterion {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}
