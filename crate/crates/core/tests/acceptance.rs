//! Acceptance suite. Each test prints one `PASS`/`FAIL` line with the
//! measured figure and then asserts it. Run with `--nocapture` to see them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hipmetrics::geometry::Point2;
use hipmetrics::phantom::{gen_us_phantom, gen_xray_phantom, UsPhantomSpec, XrayPhantomSpec};
use hipmetrics::pluginio::manifest::{CaseRecord, Expert, Manifest, Modality, SideExpert, LEFT_TRIANGLE, RIGHT_TRIANGLE};
use hipmetrics::pluginio::report::{CaseReport, SideReport, XrayReport};
use hipmetrics::stats::{f_cdf, f_quantile, icc_single, screening_binarize, IccKind, RatingTable, Screen};
use hipmetrics::ultrasound::{analyze_us, UsConfig};
use hipmetrics::validation::validate;
use hipmetrics::xray::{analyze_xray, ihdi_grade, pelvis_construction, Side, SideLandmarks, XrayConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

#[test]
fn criterion_1_ultrasound_phantom_round_trip() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut ok, mut worst_alpha, mut worst_cov) = (0, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let spec = UsPhantomSpec::random(&mut rng, 512);
        assert!(spec.rotation_deg.abs() <= 30.0);
        let (mask, truth) = gen_us_phantom(&spec).unwrap();
        let a = analyze_us(&mask, truth.labels, &UsConfig::default()).unwrap();
        let m = &a.measurements;
        if let (1, Some(alpha), Some(cov)) = (m.status, m.alpha_deg, m.coverage) {
            let (ea, ec) = ((alpha - truth.alpha_deg).abs(), (cov - truth.coverage).abs());
            worst_alpha = worst_alpha.max(ea);
            worst_cov = worst_cov.max(ec);
            if ea <= 1.5 && ec <= 0.03 {
                ok += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "ultrasound round trip",
        ok >= 196 && secs < 60.0,
        format!("{ok}/200 within tolerance, worst alpha {worst_alpha:.2} deg, worst coverage {worst_cov:.4}, {secs:.1} s"),
    );
}

#[test]
fn criterion_2_xray_phantom_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let (mut failures, mut graded, mut worst) = (Vec::new(), 0, 0.0f64);
    for i in 0..200 {
        let spec = XrayPhantomSpec::random(&mut rng);
        let (mask, truth) = gen_xray_phantom(&spec).unwrap();
        let a = analyze_xray(&mask, truth.labels, &XrayConfig::default());
        for side in Side::BOTH {
            let (m, t) = (a.measurements.side(side), truth.side(side));
            let (Some(ai), Some(w)) = (m.acetabular_index_deg, m.wiberg_deg) else {
                failures.push(format!("#{i} {side:?} status {}", m.status));
                continue;
            };
            let err = (ai - t.acetabular_index_deg).abs().max((w - t.wiberg_deg).abs());
            worst = worst.max(err);
            if err > 1.0 {
                failures.push(format!("#{i} {side:?} angle error {err:.2}"));
            }
            if t.boundary_distance_px >= 3.0 {
                graded += 1;
                if m.ihdi_grade != Some(t.ihdi_grade) {
                    failures.push(format!("#{i} {side:?} grade {:?} vs {}", m.ihdi_grade, t.ihdi_grade));
                }
            }
        }
    }
    verdict(
        2,
        "x-ray round trip",
        failures.is_empty(),
        format!("400 hips, worst angle error {worst:.2} deg, {graded} graded away from boundaries, failures {failures:?}"),
    );
}

/// ICC(C,1) and ICC(A,1) from explicitly summed squares.
fn anova_oracle(rows: &[Vec<f64>]) -> (f64, f64) {
    let n = rows.len();
    let k = rows[0].len();
    let mut grand = 0.0;
    for r in rows {
        for v in r {
            grand += v;
        }
    }
    grand /= (n * k) as f64;
    let row_mean: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let mut col_mean = vec![0.0; k];
    for r in rows {
        for j in 0..k {
            col_mean[j] += r[j] / n as f64;
        }
    }
    let (mut ssr, mut ssc, mut sse) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..k {
            ssr += (row_mean[i] - grand).powi(2);
            ssc += (col_mean[j] - grand).powi(2);
            sse += (rows[i][j] - row_mean[i] - col_mean[j] + grand).powi(2);
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let msr = ssr / (nf - 1.0);
    let msc = ssc / (kf - 1.0);
    let mse = sse / ((nf - 1.0) * (kf - 1.0));
    let c = (msr - mse) / (msr + (kf - 1.0) * mse);
    let a = (msr - mse) / (msr + (kf - 1.0) * mse + kf / nf * (msc - mse));
    (c, a)
}

#[test]
fn criterion_3_icc_matches_anova_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(3..=50);
        let k = rng.random_range(2..=4);
        let spread = rng.random_range(0.5..20.0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let truth = rng.random_range(-50.0..50.0);
                (0..k).map(|j| truth + j as f64 * rng.random_range(-1.0..1.0) + rng.random_range(-spread..spread)).collect()
            })
            .collect();
        let (c, a) = anova_oracle(&rows);
        let t = RatingTable::new(rows).unwrap();
        worst = worst.max((icc_single(&t, IccKind::Consistency, 0.05).unwrap().icc - c).abs());
        worst = worst.max((icc_single(&t, IccKind::AbsoluteAgreement, 0.05).unwrap().icc - a).abs());
    }
    let t = RatingTable::from_pairs(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
    let hand_c = icc_single(&t, IccKind::Consistency, 0.05).unwrap().icc;
    let hand_a = icc_single(&t, IccKind::AbsoluteAgreement, 0.05).unwrap().icc;
    verdict(
        3,
        "ICC oracle",
        worst < 1e-9 && hand_c == 1.0 && (hand_a - 2.0 / 3.0).abs() < 1e-9,
        format!("max deviation {worst:.2e} over 1000 tables, hand case consistency {hand_c}, agreement {hand_a:.12}"),
    );
}

#[test]
fn criterion_4_f_quantile() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.random_range(0.001..0.999);
        let d1 = rng.random_range(1.0..200.0);
        let d2 = rng.random_range(1.0..200.0);
        let q = f_quantile(p, d1, d2).unwrap();
        worst = worst.max((f_cdf(q, d1, d2).unwrap() - p).abs());
    }
    let medians: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 100.0].iter().map(|d| f_quantile(0.5, *d, *d).unwrap()).collect();
    let median_err = medians.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    verdict(
        4,
        "F quantile",
        worst < 1e-8 && median_err < 1e-9,
        format!("round-trip max error {worst:.2e}, symmetric median max error {median_err:.2e}"),
    );
}

fn lm(side: Side, inner: (f64, f64), outer: (f64, f64), h: (f64, f64)) -> SideLandmarks {
    SideLandmarks { side, inner: Point2::new(inner.0, inner.1), outer: Point2::new(outer.0, outer.1), h_point: Point2::new(h.0, h.1) }
}

fn mirror(l: &SideLandmarks, width: f64) -> SideLandmarks {
    let m = |p: Point2| Point2::new(width - p.x, p.y);
    SideLandmarks { side: l.side.other(), inner: m(l.inner), outer: m(l.outer), h_point: m(l.h_point) }
}

#[test]
fn criterion_5_ihdi_partition() {
    // Horizontal Hilgenreiner line at y = 400; patient left on the image right.
    let left = lm(Side::Left, (560.0, 400.0), (700.0, 350.0), (0.0, 0.0));
    let right = lm(Side::Right, (440.0, 400.0), (300.0, 350.0), (0.0, 0.0));
    let pc = pelvis_construction(&left, &right).unwrap();
    // Perkin passes x = 700, the diagonal runs from (700, 400) at 45 degrees.
    let oracle = |x: f64, y: f64| {
        let (a, b) = (x - 700.0, y - 400.0);
        let regions = [a <= 0.0, a >= 0.0 && b >= a, a >= 0.0 && b >= 0.0 && b <= a, a >= 0.0 && b <= 0.0];
        (regions.iter().position(|r| *r).map(|i| i as u8 + 1), regions.iter().filter(|r| **r).count())
    };
    let (mut disagreements, mut on_boundary, mut mirror_mismatch) = (0, 0, 0);
    let mut seen = [0usize; 5];
    for i in 0..200 {
        for j in 0..200 {
            let (x, y) = (600.0 + i as f64, 300.0 + j as f64);
            let mut l = left;
            l.h_point = Point2::new(x, y);
            let g = ihdi_grade(&l, &pc);
            seen[g as usize] += 1;
            let (expected, count) = oracle(x, y);
            if count > 1 {
                on_boundary += 1;
            }
            if Some(g) != expected {
                disagreements += 1;
            }
            let (ml, mr) = (mirror(&right, 1000.0), mirror(&l, 1000.0));
            let mpc = pelvis_construction(&ml, &mr).unwrap();
            if ihdi_grade(&mr, &mpc) != g {
                mirror_mismatch += 1;
            }
        }
    }
    verdict(
        5,
        "IHDI partition",
        disagreements == 0 && mirror_mismatch == 0 && seen[1..].iter().all(|c| *c > 0) && on_boundary > 0,
        format!(
            "40000 points, grade counts {:?}, {on_boundary} on boundaries, {disagreements} lower-grade violations, {mirror_mismatch} mirror mismatches",
            &seen[1..]
        ),
    );
}

fn us_similarity(rng: &mut ChaCha8Rng) -> Option<(f64, f64)> {
    let mut base = UsPhantomSpec::random(rng, 512);
    base.rotation_deg = 0.0;
    let (mask, truth) = gen_us_phantom(&base).ok()?;
    let a = analyze_us(&mask, truth.labels, &UsConfig::default()).ok()?.measurements;
    for _ in 0..20 {
        let s = rng.random_range(0.75..=1.5);
        let mut t = base;
        t.head_radius = base.head_radius * s;
        t.image_size = (512.0 * s).ceil() as usize;
        t.rotation_deg = rng.random_range(-45.0..=45.0);
        t.offset = [rng.random_range(-20.0..20.0) * s, rng.random_range(-20.0..20.0) * s];
        let Ok((mask, truth)) = gen_us_phantom(&t) else { continue };
        let b = analyze_us(&mask, truth.labels, &UsConfig::default()).ok()?.measurements;
        return Some(((a.alpha_deg? - b.alpha_deg?).abs(), (a.coverage? - b.coverage?).abs()));
    }
    None
}

fn xray_similarity(rng: &mut ChaCha8Rng) -> Option<(f64, bool, usize)> {
    let mut base = XrayPhantomSpec::random(rng);
    base.rotation_deg = 0.0;
    let (mask, truth) = gen_xray_phantom(&base).ok()?;
    let a = analyze_xray(&mask, truth.labels, &XrayConfig::default());
    for _ in 0..20 {
        let s = rng.random_range(0.75..=1.5);
        let mut t = base;
        t.pelvis_span = base.pelvis_span * s;
        t.image_size = (1024.0 * s).ceil() as usize;
        t.rotation_deg = rng.random_range(-45.0..=45.0);
        t.offset = [rng.random_range(-30.0..30.0) * s, rng.random_range(-30.0..30.0) * s];
        let Ok((mask, truth2)) = gen_xray_phantom(&t) else { continue };
        let b = analyze_xray(&mask, truth2.labels, &XrayConfig::default());
        let mut worst = 0.0f64;
        let mut grades_ok = true;
        let mut graded = 0;
        for side in Side::BOTH {
            let (ma, mb) = (a.measurements.side(side), b.measurements.side(side));
            worst = worst.max((ma.acetabular_index_deg? - mb.acetabular_index_deg?).abs());
            worst = worst.max((ma.wiberg_deg? - mb.wiberg_deg?).abs());
            let far = truth.side(side).boundary_distance_px.min(truth2.side(side).boundary_distance_px / s) >= 3.0;
            if far {
                graded += 1;
                grades_ok &= ma.ihdi_grade == mb.ihdi_grade;
            }
        }
        return Some((worst, grades_ok, graded));
    }
    None
}

#[test]
fn criterion_6_similarity_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut us_alpha, mut us_cov, mut us_missing) = (0.0f64, 0.0f64, 0);
    for _ in 0..50 {
        match us_similarity(&mut rng) {
            Some((da, dc)) => {
                us_alpha = us_alpha.max(da);
                us_cov = us_cov.max(dc);
            }
            None => us_missing += 1,
        }
    }
    let (mut xr_angle, mut xr_grades, mut xr_graded, mut xr_missing) = (0.0f64, true, 0, 0);
    for _ in 0..50 {
        match xray_similarity(&mut rng) {
            Some((d, g, n)) => {
                xr_angle = xr_angle.max(d);
                xr_grades &= g;
                xr_graded += n;
            }
            None => xr_missing += 1,
        }
    }
    verdict(
        6,
        "similarity invariance",
        us_missing == 0 && xr_missing == 0 && us_alpha < 0.5 && us_cov < 0.02 && xr_angle < 0.5 && xr_grades,
        format!(
            "US max change alpha {us_alpha:.3} deg, coverage {us_cov:.4}; X-ray max angle change {xr_angle:.3} deg, grades stable {xr_grades} over {xr_graded} hips; unusable pairs {us_missing}/{xr_missing}"
        ),
    );
}

#[test]
fn criterion_7_screening_rule() {
    // (expert grade, predicted grade, status) for 20 hips: 10 cases x 2 sides.
    let hips: [(u8, Option<u8>, u8); 20] = [
        (1, Some(1), 1),
        (1, Some(1), 1),
        (1, Some(1), 1),
        (1, Some(1), 1),
        (1, Some(1), 1),
        (1, Some(1), 1),
        (1, Some(2), 1),
        (1, None, 0),
        (1, None, 0),
        (3, Some(3), 1),
        (3, Some(3), 1),
        (3, Some(3), 1),
        (3, Some(3), 1),
        (2, None, 0),
        (2, None, 0),
        (4, Some(1), 1),
        (4, Some(1), 1),
        (2, Some(4), 1),
        (2, Some(1), 1),
        (4, Some(4), 1),
    ];
    // Positive = abnormal. TN 6; FP 1 + 2 status 0; TP 4 + 2 status 0 + 1 + 1; FN 2 + 1.
    let (tp, fp, fn_, tn) = (8u64, 3u64, 3u64, 6u64);
    let screened = screening_binarize(&hips.iter().map(|h| (h.1, h.2)).collect::<Vec<_>>());
    let status0_abnormal = hips.iter().zip(&screened).filter(|(h, _)| h.2 == 0).all(|(_, s)| *s == Screen::Abnormal);

    let mut cases = Vec::new();
    let mut preds = BTreeMap::new();
    for (i, pair) in hips.chunks(2).enumerate() {
        let id = format!("x{i:02}");
        let expert = |h: &(u8, Option<u8>, u8)| Some(SideExpert { acetabular_index_deg: None, wiberg_deg: None, ihdi_grade: Some(h.0) });
        cases.push(CaseRecord {
            case_id: id.clone(),
            modality: Modality::Xray,
            image_path: None,
            mask_path: Some(PathBuf::from("m.png")),
            label_map: BTreeMap::from([(1, LEFT_TRIANGLE.to_string()), (2, RIGHT_TRIANGLE.to_string())]),
            expert: Some(Expert { alpha_deg: None, coverage: None, left: expert(&pair[0]), right: expert(&pair[1]) }),
        });
        let side = |h: &(u8, Option<u8>, u8)| SideReport {
            status: h.2,
            experimental: true,
            acetabular_index_deg: None,
            wiberg_deg: None,
            ihdi_grade: h.1,
            landmarks: None,
        };
        let mut r = CaseReport::failed(&id, Modality::Xray, "fixture");
        r.xray = Some(XrayReport { left: side(&pair[0]), right: side(&pair[1]) });
        preds.insert(id, r);
    }
    let manifest = Manifest { schema_version: 1, cases };
    let v = validate(&manifest, &preds, 0.05);
    let sc = v.ihdi.expect("ihdi block").screening;
    let expected = 8.0 / 11.0;
    let b = sc.binary;
    let pass = status0_abnormal
        && sc.status0 == 4
        && sc.confusion.counts == vec![vec![tn, fp], vec![fn_, tp]]
        && [b.precision, b.recall, b.f1].iter().all(|v| (v - expected).abs() < 1e-12);
    verdict(
        7,
        "screening rule",
        pass,
        format!(
            "counts {:?}, status 0 {}, precision {:.4} recall {:.4} f1 {:.4} (hand: 8/11 each)",
            sc.confusion.counts, sc.status0, b.precision, b.recall, b.f1
        ),
    );
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hipmetrics")
}

fn hm(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin()).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(root).unwrap().to_path_buf(), std::fs::read(e.path()).unwrap()))
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// phantom, analyze with the given worker count, validate; returns exit codes.
fn end_to_end(root: &Path, workers: &str) -> Vec<i32> {
    let mut codes = Vec::new();
    for (modality, n) in [("ultrasound", "6"), ("xray", "6")] {
        let ph = root.join(format!("phantom-{modality}"));
        let out = root.join(format!("out-{modality}"));
        let manifest = ph.join("manifest.json");
        codes.push(hm(&["phantom", "--modality", modality, "--n", n, "--seed", "7", "--out", s(&ph)]).0);
        codes.push(hm(&["analyze", "--manifest", s(&manifest), "--out", s(&out), "--workers", workers]).0);
        codes.push(
            hm(&["validate", "--manifest", s(&manifest), "--predictions", s(&out), "--out", s(&root.join(format!("val-{modality}")))]).0,
        );
    }
    codes
}

#[test]
fn criterion_8_end_to_end_determinism() {
    let d = tempfile::tempdir().unwrap();
    let (a, b, c) = (d.path().join("a"), d.path().join("b"), d.path().join("c"));
    let codes_a = end_to_end(&a, "1");
    let codes_b = end_to_end(&b, "8");
    let codes_c = end_to_end(&c, "1");
    let (ta, tb, tc) = (tree(&a), tree(&b), tree(&c));
    let reports = ta.keys().filter(|p| p.ends_with("report.json")).count();
    let pass = codes_a.iter().chain(&codes_b).chain(&codes_c).all(|c| *c == 0) && reports == 12 && ta == tb && ta == tc;
    verdict(
        8,
        "end-to-end determinism",
        pass,
        format!(
            "{} files, {reports} reports, exit codes {codes_a:?}, workers 1 vs 8 identical {}, rerun identical {}",
            ta.len(),
            ta == tb,
            ta == tc
        ),
    );
}

#[test]
fn criterion_9_backend_robustness() {
    let d = tempfile::tempdir().unwrap();
    let ph = d.path().join("ph");
    assert_eq!(hm(&["phantom", "--modality", "us", "--n", "3", "--seed", "9", "--out", s(&ph)]).0, 0);
    let manifest = ph.join("manifest.json");
    // us-0000 is served normally, us-0001 crashes, us-0002 hangs.
    let script = format!(
        r#"req=$(cat); case "$req" in *'"us-0001"'*) kill -9 $$;; *'"us-0002"'*) sleep 60;; esac; printf '%s' "$req" | '{}' backend precomputed"#,
        bin()
    );
    let start = Instant::now();
    let out = d.path().join("out");
    let (code, log) = hm(&[
        "analyze",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out),
        "--workers",
        "3",
        "--backend",
        "sh",
        "--backend-arg",
        "-c",
        "--backend-arg",
        &script,
        "--timeout-s",
        "2",
    ]);
    let elapsed = start.elapsed();
    let status =
        |id: &str| hipmetrics::pluginio::report::read_case_report(&out.join(id).join("report.json")).map(|r| (r.status, r.message));
    let (s0, s1, s2) = (status("us-0000").unwrap(), status("us-0001").unwrap(), status("us-0002").unwrap());
    let crash_only = d.path().join("out-crash");
    let (crash_code, _) = hm(&["analyze", "--manifest", s(&manifest), "--out", s(&crash_only), "--backend", "/bin/false"]);
    let pass = code == 2
        && crash_code == 2
        && s0.0 == 1
        && s1.0 == 0
        && s2.0 == 0
        && s2.1.as_deref().is_some_and(|m| m.contains("Timeout"))
        && elapsed < Duration::from_secs(30);
    verdict(
        9,
        "backend robustness",
        pass,
        format!(
            "exit {code} (crash-only batch {crash_code}), statuses {}/{}/{}, {:.1} s; {}",
            s0.0,
            s1.0,
            s2.0,
            elapsed.as_secs_f64(),
            log.lines().last().unwrap_or("")
        ),
    );
}
