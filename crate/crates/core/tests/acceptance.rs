//! Acceptance suite. Runs every criterion at its tolerance and time budget
//! and prints one PASS/FAIL line per criterion.

use std::io::Cursor;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use audition_core::audio_io::{decode_raw, encode_raw, istft, stft_signal, concat_frames, Window};
use audition_core::config::{serialize_config, GmmConfig, McraConfig, SeparationMethod, SstConfig};
use audition_core::geometry::{
    all_pairs, build_icosphere, max_neighbor_spacing, select_pairs, ScanParams, ScanTables,
};
use audition_core::harness::{
    circular, closed_cube, flatten_spectra, measure_sir, named_array, open_cube, spectra, ArraySpec,
    Directivity, Scene, SignalSpec, SourceSpec, TextbookKalman,
};
use audition_core::pipeline::{run, validate_line, RunOptions, Sink, Sinks, Stream, POSTFILTERED_FILE, SEPARATED_FILE};
use audition_core::ssl::{srp_scan, GccPhat, NoiseEstimate, ScanCounters, ScanMode};
use audition_core::sss::{apply_weights, BeamOutput, Separator};
use audition_core::sst::{process_noise, KalmanState, Tracker};
use audition_core::{
    angle_between, direction_from_az_el, parse_config, AudioFrame, MicSpec, PipelineConfig, PotentialDoa,
    SpectralFrame, Vec3,
};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const FS: u32 = 16000;
const FRAME: usize = 512;
const HOP: usize = 256;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(gauss(rng), gauss(rng), gauss(rng));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

/// Rotates `d` by a Gaussian angular error with per-axis deviation `sigma`.
fn perturb(d: &Vec3, sigma: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    let helper = if d.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = d.cross(&helper).normalize();
    let v = d.cross(&u);
    (d + u * (sigma * gauss(rng)).tan() + v * (sigma * gauss(rng)).tan()).normalize()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn config(mics: Vec<MicSpec>) -> PipelineConfig {
    PipelineConfig::new(mics, FS, FRAME, HOP)
}

fn tables(cfg: &PipelineConfig) -> ScanTables {
    ScanTables::build(&cfg.general.mics, &ScanParams::from_config(cfg)).expect("tables")
}

fn c1_pair_pruning() -> Check {
    let mics = closed_cube(0.1);
    let grid = build_icosphere(4, false);
    let kept = select_pairs(&mics, &grid).map_err(|e| e.to_string())?.pairs.len();
    let all = all_pairs(mics.len(), &grid).map_err(|e| e.to_string())?.pairs.len();
    let reduction = 100.0 * (all - kept) as f64 / all as f64;
    ensure(kept == 20 && all == 28, format!("{kept}/{all} pairs kept, load reduced {reduction:.1}%"))
}

fn c2_grid_cardinalities() -> Check {
    let n: Vec<usize> = [0, 2, 4].iter().map(|&l| build_icosphere(l, false).len()).collect();
    ensure(n == [12, 162, 2562], format!("levels 0/2/4 -> {:?}", n))
}

struct ScanTrials {
    matches: usize,
    trials: usize,
    worst_mismatch_deg: f64,
    spacing_deg: f64,
    fine_per_scan: f64,
    errors_deg: Vec<f64>,
}

fn scan_trials() -> Result<ScanTrials, String> {
    const TRIALS: usize = 500;
    let mut cfg = config(open_cube(0.1));
    cfg.ssl.snr_weighting = false;
    let tables = tables(&cfg);
    let spacing = max_neighbor_spacing(&tables.fine);
    let mut gcc = GccPhat::new(FRAME, cfg.ssl.interpolation_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut counters, mut exhaustive_counters) = (ScanCounters::default(), ScanCounters::default());
    let mut out = ScanTrials {
        matches: 0,
        trials: TRIALS,
        worst_mismatch_deg: 0.0,
        spacing_deg: spacing.to_degrees(),
        fine_per_scan: 0.0,
        errors_deg: Vec::with_capacity(TRIALS),
    };
    for trial in 0..TRIALS {
        let truth = random_unit(&mut rng);
        let scene = Scene {
            array: ArraySpec::Named("open_cube".into()),
            fs_hz: FS,
            speed_of_sound_mps: 343.0,
            duration_s: 0.064,
            noise_floor_db: Some(-10.0),
            seed: trial as u64,
            directivity: Directivity::None,
            sources: vec![SourceSpec::fixed(SignalSpec::White, truth, 0.0, trial as u64 + 1)],
        };
        let r = scene.render().map_err(|e| e.to_string())?;
        let frame = &spectra(&r.mixture, FS, FRAME, HOP)[1];
        let cc = gcc.compute(frame, None, tables.pairs());
        let hier = srp_scan(&mut cc.clone(), &tables, 1, ScanMode::Hierarchical, &mut counters);
        let full = srp_scan(&mut cc.clone(), &tables, 1, ScanMode::Exhaustive, &mut exhaustive_counters);
        if hier[0].grid_index == full[0].grid_index {
            out.matches += 1;
        } else {
            let a = angle_between(&hier[0].direction, &full[0].direction).to_degrees();
            out.worst_mismatch_deg = out.worst_mismatch_deg.max(a);
        }
        out.errors_deg.push(angle_between(&hier[0].direction, &truth).to_degrees());
    }
    out.fine_per_scan = counters.fine_points as f64 / counters.scans as f64;
    Ok(out)
}

fn c3_hierarchical_fidelity(t: &ScanTrials) -> Check {
    let rate = t.matches as f64 / t.trials as f64;
    let ok_rate = rate >= 0.95;
    let ok_near = t.worst_mismatch_deg <= t.spacing_deg + 1e-9;
    let frac = t.fine_per_scan / 2562.0;
    ensure(
        ok_rate && ok_near && frac <= 0.25,
        format!(
            "{} trials, argmax match {:.1}%, worst mismatch {:.2}° (spacing {:.2}°), {:.0} fine points/scan ({:.1}% of 2562)",
            t.trials,
            100.0 * rate,
            t.worst_mismatch_deg,
            t.spacing_deg,
            t.fine_per_scan,
            100.0 * frac
        ),
    )
}

fn c4_localization_accuracy(t: &ScanTrials) -> Check {
    let med = median(t.errors_deg.clone());
    let p90 = {
        let mut v = t.errors_deg.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() * 9 / 10]
    };
    ensure(med <= 5.0, format!("rank-1 error median {med:.2}°, p90 {p90:.2}° over {} scenes", t.trials))
}

fn c5_kalman_oracle() -> Check {
    let mut worst: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for seq in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seq);
        let dt = rng.random_range(0.005..0.05);
        let (sp, sv) = (rng.random_range(0.005..0.1), rng.random_range(0.05..0.5));
        let x0 = random_unit(&mut rng);
        let (ip, iv) = (rng.random_range(0.01..0.2), rng.random_range(0.1..1.0));
        let mut a = KalmanState::new(x0, Vec3::zeros(), ip, iv);
        let mut b = TextbookKalman::new(
            [x0.x, x0.y, x0.z, 0.0, 0.0, 0.0],
            [ip * ip, ip * ip, ip * ip, iv * iv, iv * iv, iv * iv],
        );
        let q = process_noise(dt, sp, sv);
        let q_diag = std::array::from_fn(|i| q[(i, i)]);
        let mut truth = x0;
        for _ in 0..1000 {
            a.predict(dt, sp, sv);
            b.predict(dt, q_diag);
            truth = perturb(&truth, 0.01, &mut rng);
            let z = perturb(&truth, 0.05, &mut rng);
            let l = Matrix3::from_fn(|_, _| rng.random_range(-0.03..0.03));
            let r = l * l.transpose() + Matrix3::identity() * 1e-3;
            let rr = std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)]));
            a.update(&z, &r).map_err(|e| e.to_string())?;
            b.update(z.into(), rr).ok_or("oracle update failed")?;
            for i in 0..6 {
                worst = worst.max((a.x[i] - b.x[i]).abs());
                for j in 0..6 {
                    worst = worst.max((a.p[(i, j)] - b.p[i][j]).abs());
                }
            }
            min_eig = min_eig.min(a.min_eigenvalue());
        }
    }
    ensure(
        worst <= 1e-10 && min_eig > 0.0,
        format!("10 x 1000 steps, max deviation {worst:.2e}, min covariance eigenvalue {min_eig:.2e}"),
    )
}

fn observation(direction: Vec3, power: f64, rank: usize, frame: u64) -> PotentialDoa {
    PotentialDoa {
        direction,
        power,
        frame_index: frame,
        rank,
        grid_index: 0,
    }
}

fn sample_gmm(g: &GmmConfig, rng: &mut ChaCha8Rng) -> f64 {
    let mut u: f64 = rng.random();
    let mut k = 0;
    while k + 1 < g.weights.len() && u > g.weights[k] {
        u -= g.weights[k];
        k += 1;
    }
    (g.means[k] + g.variances[k].sqrt() * gauss(rng)).max(0.0)
}

/// One frame of synthetic localizer output: the sources with powers drawn
/// from the active mixture, then distractors in random directions with
/// powers drawn from the diffuse mixture.
fn frame_observations(cfg: &SstConfig, sources: &[Vec3], frame: u64, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<PotentialDoa> {
    let mut obs: Vec<PotentialDoa> = sources
        .iter()
        .map(|d| observation(perturb(d, sigma, rng), sample_gmm(&cfg.gmm_active, rng), 0, frame))
        .collect();
    while obs.len() < 4 {
        let p = sample_gmm(&cfg.gmm_diffuse, rng);
        obs.push(observation(random_unit(rng), p, 0, frame));
    }
    obs.sort_by(|a, b| b.power.total_cmp(&a.power));
    for (i, o) in obs.iter_mut().enumerate() {
        o.rank = i + 1;
    }
    obs
}

fn nearest_id(tracks: &[audition_core::TrackedSource], d: &Vec3) -> Option<u64> {
    tracks
        .iter()
        .min_by(|a, b| angle_between(&a.direction(), d).total_cmp(&angle_between(&b.direction(), d)))
        .map(|t| t.id)
}

fn c6_tracking() -> Check {
    let sigma = 3f64.to_radians();
    let dt = HOP as f64 / FS as f64;
    let cfg = SstConfig::default();

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let truth = direction_from_az_el(40.0, 20.0);
    let mut tracker = Tracker::new(&cfg, dt, false);
    let (mut sq, mut n) = (0.0, 0usize);
    for k in 0..600u64 {
        let tracks = tracker.step(&frame_observations(&cfg, &[truth], k, sigma, &mut rng));
        if k >= 200 {
            let e = tracks
                .iter()
                .map(|t| angle_between(&t.direction(), &truth).to_degrees())
                .fold(f64::INFINITY, f64::min);
            sq += e * e;
            n += 1;
        }
    }
    let rms = (sq / n as f64).sqrt();

    let frames = (4.0 / dt) as u64;
    let mut continuous = 0;
    for run in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + run);
        let el = rng.random_range(-10.0..30.0);
        let span = rng.random_range(30.0..60.0);
        let path = |k: u64, sign: f64| {
            let s = k as f64 / frames as f64;
            direction_from_az_el(sign * span * (2.0 * s - 1.0), el)
        };
        let mut tracker = Tracker::new(&cfg, dt, false);
        let mut before = (None, None);
        let mut after = (None, None);
        for k in 0..frames {
            let (a, b) = (path(k, 1.0), path(k, -1.0));
            let tracks = tracker.step(&frame_observations(&cfg, &[a, b], k, sigma, &mut rng));
            if k == frames / 4 {
                before = (nearest_id(&tracks, &a), nearest_id(&tracks, &b));
            }
            if k == frames - 1 {
                after = (nearest_id(&tracks, &a), nearest_id(&tracks, &b));
            }
        }
        if before.0.is_some() && before.0 != before.1 && before == after {
            continuous += 1;
        }
    }
    ensure(
        rms <= 1.5 && continuous >= 80,
        format!("stationary RMS {rms:.2}°, crossing id continuity {continuous}/100"),
    )
}

/// Output signal and noise power of a beamformer whose weights come from
/// running `sep` on the mixture.
fn beam_snr(sep: &mut Separator, target: Vec3, mix: &[SpectralFrame], sig: &[SpectralFrame], noise: &[SpectralFrame]) -> f64 {
    let (mut ps, mut pn) = (0.0, 0.0);
    for ((m, s), n) in mix.iter().zip(sig).zip(noise) {
        let out: Vec<BeamOutput> = sep.process(m, &[(1, target)], None);
        let o = &out[0];
        ps += apply_weights(s, &o.weights, None).iter().map(|c| c.norm_sqr()).sum::<f64>();
        pn += apply_weights(n, &o.weights, None).iter().map(|c| c.norm_sqr()).sum::<f64>();
    }
    db(ps / pn)
}

fn input_snr(sig: &[SpectralFrame], noise: &[SpectralFrame]) -> f64 {
    let power = |f: &[SpectralFrame]| f.iter().flat_map(|x| x.bins.iter().flatten()).map(|c| c.norm_sqr()).sum::<f64>();
    db(power(sig) / power(noise))
}

fn das_separator(mics: &[MicSpec], subarray: bool) -> Separator {
    let mut cfg = config(mics.to_vec());
    cfg.sss.method = SeparationMethod::DelayAndSum;
    cfg.sss.use_subarray = subarray;
    cfg.sss.postfilter.enabled = false;
    Separator::new(&cfg)
}

fn c7_das_gain() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (m, radius) in [(4, 0.05), (8, 0.05), (16, 0.1)] {
        let mics = circular(m, radius);
        let target = direction_from_az_el(25.0, 30.0);
        let scene = Scene {
            array: ArraySpec::Custom(mics.clone()),
            fs_hz: FS,
            speed_of_sound_mps: 343.0,
            duration_s: 2.0,
            noise_floor_db: Some(-10.0),
            seed: m as u64,
            directivity: Directivity::None,
            sources: vec![SourceSpec::fixed(SignalSpec::White, target, 0.0, 3)],
        };
        let r = scene.render().map_err(|e| e.to_string())?;
        let mix = spectra(&r.mixture, FS, FRAME, HOP);
        let sig = spectra(&r.contributions[0], FS, FRAME, HOP);
        let noise = spectra(&r.noise, FS, FRAME, HOP);
        let gain = beam_snr(&mut das_separator(&mics, false), target, &mix, &sig, &noise) - input_snr(&sig, &noise);
        let expected = db(m as f64);
        ok &= (gain - expected).abs() <= 0.5;
        lines.push(format!("M={m}: {gain:.2} dB (expected {expected:.2})"));
    }
    ensure(ok, lines.join(", "))
}

fn c8_subarray_benefit() -> Check {
    let mics = closed_cube(0.1);
    let target = direction_from_az_el(-135.0, 20.0);
    let scene = Scene {
        array: ArraySpec::Named("closed_cube".into()),
        fs_hz: FS,
        speed_of_sound_mps: 343.0,
        duration_s: 3.0,
        noise_floor_db: Some(-10.0),
        seed: 8,
        directivity: Directivity::default(),
        sources: vec![SourceSpec::fixed(SignalSpec::SpeechShaped, target, 0.0, 8)],
    };
    let r = scene.render().map_err(|e| e.to_string())?;
    let mix = spectra(&r.mixture, FS, FRAME, HOP);
    let sig = spectra(&r.contributions[0], FS, FRAME, HOP);
    let noise = spectra(&r.noise, FS, FRAME, HOP);
    let sub = beam_snr(&mut das_separator(&mics, true), target, &mix, &sig, &noise);
    let full = beam_snr(&mut das_separator(&mics, false), target, &mix, &sig, &noise);
    ensure(
        sub - full >= 0.5,
        format!("subarray {sub:.2} dB vs full array {full:.2} dB (+{:.2} dB)", sub - full),
    )
}

struct SirTrace {
    raw: Vec<Vec<Vec<f64>>>,
    post: Vec<Vec<Vec<f64>>>,
}

/// Runs the separator over a scene and returns, per target and per source,
/// the flattened raw and post-filtered output contributions for each block.
fn separate(
    cfg: &PipelineConfig,
    targets: &[(u64, Vec3)],
    mix: &[SpectralFrame],
    contribs: &[Vec<SpectralFrame>],
    noise_cfg: &McraConfig,
    block: usize,
) -> Vec<SirTrace> {
    let mut sep = Separator::new(cfg);
    let mut mcra = NoiseEstimate::new(noise_cfg.clone(), mix[0].n_channels(), mix[0].n_bins());
    let n_blocks = mix.len().div_ceil(block);
    let mut traces: Vec<SirTrace> = targets
        .iter()
        .map(|_| SirTrace {
            raw: vec![vec![Vec::new(); contribs.len()]; n_blocks],
            post: vec![vec![Vec::new(); contribs.len()]; n_blocks],
        })
        .collect();
    for (k, frame) in mix.iter().enumerate() {
        mcra.update(frame);
        let outs = sep.process(frame, targets, Some(&mcra.lambda_d));
        for (t, o) in outs.iter().enumerate() {
            for (s, c) in contribs.iter().enumerate() {
                let raw = apply_weights(&c[k], &o.weights, None);
                let post = o.apply(&c[k]);
                traces[t].raw[k / block][s].extend(flatten_spectra([raw.as_slice()]));
                traces[t].post[k / block][s].extend(flatten_spectra([post.as_slice()]));
            }
        }
    }
    traces
}

fn sir_of(parts: &[Vec<f64>], target: usize) -> f64 {
    let total: Vec<f64> = (0..parts[0].len()).map(|i| parts.iter().map(|p| p[i]).sum()).collect();
    measure_sir(&total, parts, target)
}

struct GssScene {
    sir_gss: Vec<f64>,
    sir_das: Vec<f64>,
    post_change: Vec<f64>,
    post_change_full_run: Vec<f64>,
}

fn gss_scene(seed: u64, az: f64, el: f64) -> Result<GssScene, String> {
    let mics = open_cube(0.1);
    let dirs = [direction_from_az_el(az, el), direction_from_az_el(az + 90.0, el)];
    let scene = Scene {
        array: ArraySpec::Named("open_cube".into()),
        fs_hz: FS,
        speed_of_sound_mps: 343.0,
        duration_s: 12.0,
        noise_floor_db: Some(-30.0),
        seed,
        directivity: Directivity::None,
        sources: dirs
            .iter()
            .enumerate()
            .map(|(i, d)| SourceSpec::fixed(SignalSpec::SpeechShaped, *d, 0.0, 10 * seed + i as u64))
            .collect(),
    };
    let r = scene.render().map_err(|e| e.to_string())?;
    let mix = spectra(&r.mixture, FS, FRAME, HOP);
    let contribs: Vec<Vec<SpectralFrame>> = r.contributions.iter().map(|c| spectra(c, FS, FRAME, HOP)).collect();
    let targets: Vec<(u64, Vec3)> = dirs.iter().enumerate().map(|(i, d)| (i as u64 + 1, *d)).collect();
    // one block of 10 s adaptation, one block evaluated afterwards
    let adapted = (10.0 * FS as f64 / HOP as f64) as usize;

    let mut gss_cfg = config(mics.clone());
    gss_cfg.sss.method = SeparationMethod::Gss;
    let mut das_cfg = config(mics);
    das_cfg.sss.method = SeparationMethod::DelayAndSum;
    das_cfg.sss.postfilter.enabled = false;
    let gss = separate(&gss_cfg, &targets, &mix, &contribs, &gss_cfg.mcra, adapted);
    let das = separate(&das_cfg, &targets, &mix, &contribs, &das_cfg.mcra, adapted);

    let join = |blocks: &[Vec<Vec<f64>>]| -> Vec<Vec<f64>> {
        let mut acc = vec![Vec::new(); blocks[0].len()];
        for b in blocks {
            for (s, part) in b.iter().enumerate() {
                acc[s].extend_from_slice(part);
            }
        }
        acc
    };
    let mut out = GssScene {
        sir_gss: Vec::new(),
        sir_das: Vec::new(),
        post_change: Vec::new(),
        post_change_full_run: Vec::new(),
    };
    for t in 0..targets.len() {
        let raw = sir_of(&gss[t].raw[1], t);
        out.sir_gss.push(raw);
        out.sir_das.push(sir_of(&das[t].raw[1], t));
        out.post_change.push(sir_of(&gss[t].post[1], t) - raw);
        out.post_change_full_run.push(sir_of(&join(&gss[t].post), t) - sir_of(&join(&gss[t].raw), t));
    }
    Ok(out)
}

fn c9_gss_separation() -> Check {
    let mut ok = true;
    let mut lines = Vec::new();
    let (mut worst_post, mut worst_post_full) = (f64::INFINITY, f64::INFINITY);
    for (seed, az, el) in [(9, 0.0, 10.0), (19, -120.0, 25.0), (29, 60.0, -15.0)] {
        let sc = gss_scene(seed, az, el)?;
        for t in 0..2 {
            ok &= sc.sir_gss[t] - sc.sir_das[t] >= 5.0 && sc.post_change[t] >= 0.0;
            worst_post = worst_post.min(sc.post_change[t]);
            worst_post_full = worst_post_full.min(sc.post_change_full_run[t]);
        }
        lines.push(format!(
            "GSS {:.1}/{:.1} dB vs DAS {:.1}/{:.1} dB",
            sc.sir_gss[0], sc.sir_gss[1], sc.sir_das[0], sc.sir_das[1]
        ));
    }
    lines.push(format!(
        "worst post-filter SIR change {worst_post:+.2} dB after adaptation ({worst_post_full:+.2} dB over whole runs)"
    ));
    ensure(ok, lines.join(", "))
}

fn noise_run(tone: Option<(usize, f64)>, seconds: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let n = (seconds * FS as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| 0.1 * gauss(&mut rng)).collect();
    if let Some((bin, amp)) = tone {
        let f = bin as f64 * FS as f64 / FRAME as f64;
        for (t, v) in x.iter_mut().enumerate() {
            let time = t as f64 / FS as f64;
            // 0.3 s bursts every 2 s
            if time % 2.0 < 0.3 {
                *v += amp * (2.0 * std::f64::consts::PI * f * time).sin();
            }
        }
    }
    let spec = stft_signal(&[x], FS, FRAME, HOP, Window::Hann);
    let bins = spec[0].n_bins();
    let mut est = NoiseEstimate::new(McraConfig::default(), 1, bins);
    let (mut avg, mut psd) = (vec![0.0; bins], vec![0.0; bins]);
    let half = spec.len() / 2;
    for (k, f) in spec.iter().enumerate() {
        est.update(f);
        for b in 0..bins {
            psd[b] += f.bins[0][b].norm_sqr() / spec.len() as f64;
            if k >= half {
                avg[b] += est.lambda_d[0][b] / (spec.len() - half) as f64;
            }
        }
    }
    (avg, psd)
}

fn c10_mcra() -> Check {
    let (est, psd) = noise_run(None, 20.0, 10);
    let worst = (1..est.len() - 1).map(|b| db(est[b] / psd[b]).abs()).fold(0.0, f64::max);
    let tone_bin = 32;
    // tone power equal to the broadband noise power
    let (with_tone, _) = noise_run(Some((tone_bin, 0.1 * 2f64.sqrt())), 20.0, 10);
    let shift = db(with_tone[tone_bin] / est[tone_bin]);
    ensure(
        worst <= 1.0 && shift.abs() < 3.0,
        format!("worst bin deviation from sample PSD {worst:.2} dB, tone-bin shift {shift:+.2} dB"),
    )
}

fn c11_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scene = Scene {
        array: ArraySpec::Named("open_cube".into()),
        fs_hz: FS,
        speed_of_sound_mps: 343.0,
        duration_s: 3.0,
        noise_floor_db: Some(-45.0),
        seed: 11,
        directivity: Directivity::None,
        sources: vec![
            SourceSpec::fixed(SignalSpec::SpeechShaped, direction_from_az_el(20.0, 10.0), -20.0, 1),
            SourceSpec::fixed(SignalSpec::SpeechShaped, direction_from_az_el(-100.0, 30.0), -22.0, 2),
        ],
    };
    let raw = scene.render().map_err(|e| e.to_string())?.to_raw(16).map_err(|e| e.to_string())?;
    let cfg = config(named_array("open_cube").ok_or("array")?);
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(i.to_string());
        std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
        let sinks = Sinks {
            doa: Some(Sink::open(out.join("doa.jsonl").to_str().ok_or("path")?).map_err(|e| e.to_string())?),
            tracks: Some(Sink::open(out.join("tracks.jsonl").to_str().ok_or("path")?).map_err(|e| e.to_string())?),
            sep_dir: Some(out.clone()),
            events: None,
        };
        run(&cfg, Cursor::new(raw.clone()), sinks, &RunOptions::default()).map_err(|e| e.to_string())?;
        let read = |f: &str| std::fs::read(out.join(f)).map_err(|e| e.to_string());
        outputs.push([read("doa.jsonl")?, read("tracks.jsonl")?, read(SEPARATED_FILE)?, read(POSTFILTERED_FILE)?]);
    }
    let identical = outputs[0] == outputs[1];
    let mut lines = 0;
    for (stream, bytes) in [(Stream::Potential, &outputs[0][0]), (Stream::Tracked, &outputs[0][1])] {
        for line in String::from_utf8(bytes.clone()).map_err(|e| e.to_string())?.lines() {
            validate_line(stream, line).map_err(|e| format!("schema: {e}: {line}"))?;
            lines += 1;
        }
    }
    let sizes: Vec<usize> = outputs[0].iter().map(Vec::len).collect();
    ensure(
        identical && lines > 0 && sizes.iter().all(|&s| s > 0),
        format!("outputs identical: {identical}, {lines} JSON lines valid, sizes {sizes:?} bytes"),
    )
}

fn c12_round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_lsb: f64 = 0.0;
    for bits in [8, 16, 24, 32] {
        let samples: Vec<Vec<f64>> = (0..4).map(|_| (0..4096).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let frame = AudioFrame {
            frame_index: 0,
            fs_hz: FS,
            samples: samples.clone(),
        };
        let bytes = encode_raw(std::slice::from_ref(&frame), bits).map_err(|e| e.to_string())?;
        let mut cfg = config(circular(4, 0.05));
        cfg.raw.bits_per_sample = bits;
        cfg.raw.hop_size_samples = 4096;
        let decoded = decode_raw(&bytes, &cfg.raw, &cfg.mapping).map_err(|e| e.to_string())?;
        let lsb = 2f64.powi(-(bits as i32 - 1));
        for (a, b) in samples.iter().flatten().zip(decoded[0].samples.iter().flatten()) {
            worst_lsb = worst_lsb.max((a - b).abs() / lsb);
        }
    }

    let x: Vec<Vec<f64>> = (0..3).map(|_| (0..16 * HOP).map(|_| gauss(&mut rng)).collect()).collect();
    let spec = stft_signal(&x, FS, FRAME, HOP, Window::Hann);
    let y = concat_frames(&istft(&spec, FRAME, HOP).map_err(|e| e.to_string())?);
    let mut worst_rms: f64 = 0.0;
    for (a, b) in x.iter().zip(&y) {
        // sample 0 has zero window weight
        let err = a[1..].iter().zip(&b[1..]).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / (a.len() - 1) as f64;
        worst_rms = worst_rms.max(err.sqrt());
    }

    let mut configs = 0;
    let mut identity = true;
    for name in ["open_cube", "closed_cube", "circular8", "circular16"] {
        let mut cfg = config(named_array(name).ok_or("array")?);
        cfg.sss.fixed_targets = vec![[0.0, 0.6, 0.8]];
        let text = serialize_config(&cfg);
        let back = parse_config(&text).map_err(|e| e.to_string())?;
        identity &= back == cfg && serialize_config(&back) == text;
        configs += 1;
    }
    ensure(
        worst_lsb <= 1.0 && worst_rms <= 1e-6 && identity,
        format!(
            "PCM worst error {worst_lsb:.2} LSB, STFT round trip RMS {worst_rms:.1e}, {configs} configs identical: {identity}"
        ),
    )
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    let mut report = |id: usize, name: &str, budget: Duration, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(d) => (false, d),
        };
        println!(
            "[{}] {:>2} {:<32} {:>7.2}s / {:>4}s  {}",
            if pass { "PASS" } else { "FAIL" },
            id,
            name,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            detail
        );
        results.push(pass);
    };
    let secs = Duration::from_secs;
    report(1, "pair pruning", secs(1), &mut c1_pair_pruning);
    report(2, "grid cardinalities", secs(1), &mut c2_grid_cardinalities);
    let mut trials = None;
    report(3, "hierarchical scan fidelity", secs(120), &mut || {
        let t = scan_trials()?;
        let r = c3_hierarchical_fidelity(&t);
        trials = Some(t);
        r
    });
    report(4, "localization accuracy", secs(120), &mut || {
        c4_localization_accuracy(trials.as_ref().ok_or("criterion 3 scenes unavailable")?)
    });
    report(5, "kalman oracle equivalence", secs(10), &mut c5_kalman_oracle);
    report(6, "tracking", secs(120), &mut c6_tracking);
    report(7, "delay-and-sum array gain", secs(30), &mut c7_das_gain);
    report(8, "subarray benefit", secs(30), &mut c8_subarray_benefit);
    report(9, "gss separation", secs(120), &mut c9_gss_separation);
    report(10, "mcra convergence", secs(30), &mut c10_mcra);
    report(11, "determinism and protocol", secs(60), &mut c11_determinism);
    report(12, "round trips", secs(10), &mut c12_round_trips);
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
