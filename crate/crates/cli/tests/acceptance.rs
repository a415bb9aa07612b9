//! Acceptance suite. Runs each criterion in order and prints one PASS/FAIL
//! line per criterion; exits non-zero if any fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use growcut_core::growcut::{AutoOr, Neighborhood};
use growcut_core::metrics::directed_hausdorff;
use growcut_core::morphology::{apply_ops, MorphOp};
use growcut_core::nrrd::encode_nrrd;
use growcut_core::phantom::{canonical_seeds, generate, PhantomSpec};
use growcut_core::volumetry::CaseInput;
use growcut_core::{
    boundary_points, build_report, dice, dilate, erode, growcut_run, growcut_run_naive, hausdorff,
    voxel_center_mm, write_nrrd, Axis, Grid, GrowCutConfig, LabelVolume, ScalarData, ScalarVolume,
    StructuringElement,
};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if let false = $cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- fixtures

fn random_volume(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> ScalarVolume {
    let grid = Grid::isotropic(dims);
    let n = grid.len();
    let data = if rng.random_bool(0.5) {
        // white noise
        ScalarData::U8((0..n).map(|_| rng.random()).collect())
    } else {
        // smooth blobs plus noise, so regions grow over several iterations
        let f = [
            rng.random_range(0.1..0.6),
            rng.random_range(0.1..0.6),
            rng.random_range(0.1..0.6),
        ];
        ScalarData::F32(
            (0..n)
                .map(|i| {
                    let [x, y, z] = grid.coords(i);
                    let s =
                        (x as f32 * f[0]).sin() + (y as f32 * f[1]).cos() + (z as f32 * f[2]).sin();
                    50.0 * s + rng.random_range(-4.0f32..4.0)
                })
                .collect(),
        )
    };
    ScalarVolume::new(grid, data).unwrap()
}

/// 2 to 4 distinct labels on 2 to 40 voxels. Half the time the seeds are
/// confined to a random sub-box so the ROI is a strict crop.
fn random_seeds(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> LabelVolume {
    let grid = Grid::isotropic(dims);
    let mut seeds = LabelVolume::zeros(grid);
    let (lo, hi) = if rng.random_bool(0.5) {
        let lo: [usize; 3] = std::array::from_fn(|a| rng.random_range(0..dims[a] / 2));
        let hi: [usize; 3] = std::array::from_fn(|a| rng.random_range(lo[a] + 1..dims[a]));
        (lo, hi)
    } else {
        ([0; 3], dims.map(|d| d - 1))
    };
    let nlabels: u8 = rng.random_range(2..=4);
    let count = rng.random_range(2..=40);
    for k in 0..count {
        let p: [usize; 3] = std::array::from_fn(|a| rng.random_range(lo[a]..=hi[a]));
        // the first `nlabels` seeds take each label once
        let label = if k < nlabels as usize {
            k as u8 + 1
        } else {
            rng.random_range(1..=nlabels)
        };
        seeds.set(p[0], p[1], p[2], label);
    }
    if seeds.distinct_nonzero().len() < 2 {
        // later draws overwrote the distinct labels; lo and hi always differ
        seeds.set(lo[0], lo[1], lo[2], 1);
        seeds.set(hi[0], hi[1], hi[2], 2);
    }
    seeds
}

fn config(connectivity: Neighborhood, workers: usize, use_roi: bool) -> GrowCutConfig {
    GrowCutConfig {
        connectivity,
        use_roi,
        worker_count: AutoOr::Value(workers),
        ..GrowCutConfig::default()
    }
}

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn mask_from(dims: [usize; 3], spacing: [f64; 3], pts: &[[usize; 3]]) -> LabelVolume {
    let mut m = LabelVolume::zeros(Grid::new(dims, spacing, [0.0; 3]).unwrap());
    for p in pts {
        m.set(p[0], p[1], p[2], 1);
    }
    m
}

fn random_mask(rng: &mut ChaCha8Rng, dims: [usize; 3], spacing: [f64; 3]) -> LabelVolume {
    let density = rng.random_range(0.05..0.6);
    let grid = Grid::new(dims, spacing, [0.0; 3]).unwrap();
    let mut labels: Vec<u8> = (0..grid.len())
        .map(|_| u8::from(rng.random_bool(density)))
        .collect();
    if !labels.contains(&1) {
        labels[0] = 1;
    }
    LabelVolume::new(grid, labels).unwrap()
}

// ---------------------------------------------------------------- criteria

fn c1_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut cropped = 0;
    for case in 0..100 {
        let edge = rng.random_range(16..=32);
        let dims = [edge; 3];
        let image = random_volume(&mut rng, dims);
        let seeds = random_seeds(&mut rng, dims);
        let conn = if rng.random_bool(0.5) {
            Neighborhood::Six
        } else {
            Neighborhood::TwentySix
        };
        let cfg = config(conn, 8, true);
        let fast = growcut_run(&image, &seeds, &cfg).map_err(|e| e.to_string())?;
        let slow = growcut_run_naive(&image, &seeds, &cfg).map_err(|e| e.to_string())?;
        ensure!(fast.labels == slow.labels, "case {case}: labels differ");
        ensure!(
            bits(&fast.strengths.values) == bits(&slow.strengths.values),
            "case {case}: strengths differ"
        );
        ensure!(
            fast.iterations_run == slow.iterations_run,
            "case {case}: iteration counts differ"
        );
        if fast.roi.len() < image.grid().len() {
            cropped += 1;
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(60), "took {t:.1?}");
    Ok(format!(
        "100 volumes (16^3..32^3, {cropped} with a cropped ROI) identical in {t:.1?}"
    ))
}

fn c2_thread_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut fixtures = Vec::new();
    for _ in 0..8 {
        let edge = rng.random_range(24..=48);
        let image = random_volume(&mut rng, [edge; 3]);
        let seeds = random_seeds(&mut rng, [edge; 3]);
        fixtures.push((image, seeds));
    }
    for noise in [0.0, 15.0] {
        let spec = PhantomSpec {
            noise_sigma: noise,
            seed: 3,
            ..PhantomSpec::default()
        };
        fixtures.push((
            generate(&spec).unwrap().image,
            canonical_seeds(&spec, 5.0).unwrap(),
        ));
    }
    for (k, (image, seeds)) in fixtures.iter().enumerate() {
        for conn in [Neighborhood::Six, Neighborhood::TwentySix] {
            let runs: Vec<_> = [1, 2, 8]
                .iter()
                .map(|&w| growcut_run(image, seeds, &config(conn, w, true)).unwrap())
                .collect();
            for r in &runs[1..] {
                ensure!(
                    r.labels == runs[0].labels,
                    "fixture {k}: labels depend on workers"
                );
                ensure!(
                    bits(&r.strengths.values) == bits(&runs[0].strengths.values),
                    "fixture {k}: strengths depend on workers"
                );
            }
        }
    }
    Ok("10 fixtures x 2 connectivities, workers 1/2/8 bit-identical".into())
}

fn c3_sphere_phantom() -> Outcome {
    let start = Instant::now();
    let spec = PhantomSpec::default();
    let p = generate(&spec).unwrap();
    let seeds = canonical_seeds(&spec, 5.0).unwrap();
    let res =
        growcut_run(&p.image, &seeds, &GrowCutConfig::default()).map_err(|e| e.to_string())?;
    let fg = res.labels.mask_of(1);
    let dsc = dice(&fg, &p.truth).unwrap();
    let vol = growcut_core::mask_volume_mm3(&fg);
    let analytic = 4.0 / 3.0 * std::f64::consts::PI * 20f64.powi(3);
    let rel = (vol - analytic).abs() / analytic;
    let t = start.elapsed();
    ensure!(res.converged, "did not converge");
    ensure!(dsc >= 0.95, "DSC {dsc:.4}");
    ensure!(rel <= 0.05, "volume {vol} off by {:.2}%", rel * 100.0);
    ensure!(t < Duration::from_secs(10), "took {t:.1?}");
    Ok(format!(
        "DSC {dsc:.4}, volume {vol} mm3 ({:.2}% from {analytic:.1}), {} iterations, {t:.2?}",
        rel * 100.0,
        res.iterations_run
    ))
}

fn brute_boundary(m: &LabelVolume) -> Vec<[f64; 3]> {
    let g = *m.grid();
    let [nx, ny, nz] = g.dims;
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if m.get(x, y, z) == 0 {
                    continue;
                }
                let on_edge =
                    x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                let open = on_edge
                    || m.get(x - 1, y, z) == 0
                    || m.get(x + 1, y, z) == 0
                    || m.get(x, y - 1, z) == 0
                    || m.get(x, y + 1, z) == 0
                    || m.get(x, y, z - 1) == 0
                    || m.get(x, y, z + 1) == 0;
                if open {
                    out.push(voxel_center_mm(&g, [x, y, z]).unwrap());
                }
            }
        }
    }
    out
}

fn brute_directed(a: &[[f64; 3]], r: &[[f64; 3]]) -> f64 {
    let mut worst = 0.0f64;
    for p in a {
        let mut best = f64::INFINITY;
        for q in r {
            let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
            best = best.min(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        }
        worst = worst.max(best);
    }
    worst.sqrt()
}

fn c4_metric_suites() -> Outcome {
    let one = [1.0; 3];
    // dice
    let a = mask_from([4, 4, 4], one, &[[1, 1, 1], [2, 2, 2]]);
    ensure!(dice(&a, &a).unwrap() == 1.0, "dice identity");
    let b = mask_from([4, 4, 4], one, &[[0, 0, 0], [3, 3, 3]]);
    ensure!(dice(&a, &b).unwrap() == 0.0, "dice disjoint");
    let cube = |dx: usize| {
        let pts: Vec<[usize; 3]> = (0..8)
            .map(|i| [dx + (i & 1), (i >> 1) & 1, (i >> 2) & 1])
            .collect();
        mask_from([4, 3, 3], one, &pts)
    };
    ensure!(
        dice(&cube(0), &cube(1)).unwrap() == 0.5,
        "dice shifted cube"
    );
    ensure!(
        dice(
            &LabelVolume::zeros(Grid::isotropic([2; 3])),
            &LabelVolume::zeros(Grid::isotropic([2; 3]))
        )
        .is_err(),
        "dice both empty"
    );

    // boundary points
    let single = mask_from([3, 3, 3], one, &[[1, 2, 0]]);
    let bp = boundary_points(&single).unwrap();
    ensure!(bp.points == vec![[1.0, 2.0, 0.0]], "single voxel boundary");
    let solid = LabelVolume::new(Grid::isotropic([3; 3]), vec![1; 27]).unwrap();
    ensure!(
        boundary_points(&solid).unwrap().len() == 26,
        "3x3x3 cube boundary"
    );
    let full = LabelVolume::new(Grid::isotropic([5, 4, 6]), vec![1; 120]).unwrap();
    ensure!(
        boundary_points(&full).unwrap().len() == 120 - 3 * 2 * 4,
        "full-volume boundary"
    );

    // hausdorff
    let h = hausdorff(&a, &a).unwrap();
    ensure!(
        h.sym == 0.0 && h.ar == 0.0 && h.ra == 0.0,
        "hausdorff identity"
    );
    let pa = mask_from([6, 1, 1], one, &[[0, 0, 0]]);
    let pr = mask_from([6, 1, 1], one, &[[3, 0, 0]]);
    let h = hausdorff(&pa, &pr).unwrap();
    ensure!(
        (h.ar, h.ra, h.sym) == (3.0, 3.0, 3.0),
        "two-point hausdorff {h:?}"
    );
    let pr2 = mask_from([6, 1, 1], one, &[[0, 0, 0], [5, 0, 0]]);
    let h = hausdorff(&pa, &pr2).unwrap();
    ensure!(
        (h.ar, h.ra, h.sym) == (0.0, 5.0, 5.0),
        "asymmetric hausdorff {h:?}"
    );

    // brute-force oracle and spacing scaling on random pairs
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_rel = 0.0f64;
    for case in 0..50 {
        let dims: [usize; 3] = std::array::from_fn(|_| rng.random_range(1..=12));
        let spacing: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.5..2.0));
        let ma = random_mask(&mut rng, dims, spacing);
        let mr = random_mask(&mut rng, dims, spacing);
        let h = hausdorff(&ma, &mr).unwrap();
        let (ba, br) = (brute_boundary(&ma), brute_boundary(&mr));
        let (ar, ra) = (brute_directed(&ba, &br), brute_directed(&br, &ba));
        ensure!(
            h.ar == ar && h.ra == ra && h.sym == ar.max(ra),
            "case {case}: {h:?} vs brute ({ar}, {ra})"
        );
        ensure!(
            directed_hausdorff(
                &boundary_points(&ma).unwrap(),
                &boundary_points(&mr).unwrap()
            ) == ar,
            "case {case}: directed"
        );

        let s = rng.random_range(0.1..10.0);
        let scaled = |m: &LabelVolume| {
            let g = Grid::new(dims, spacing.map(|v| v * s), [0.0; 3]).unwrap();
            LabelVolume::new(g, m.labels().to_vec()).unwrap()
        };
        let hs = hausdorff(&scaled(&ma), &scaled(&mr)).unwrap();
        for (x, y) in [(hs.ar, h.ar), (hs.ra, h.ra), (hs.sym, h.sym)] {
            let expect = s * y;
            let rel = if expect == 0.0 {
                x.abs()
            } else {
                (x - expect).abs() / expect
            };
            worst_rel = worst_rel.max(rel);
            ensure!(
                rel <= 1e-9,
                "case {case}: scaling by {s} gives {x}, expected {expect}"
            );
        }
    }
    Ok(format!(
        "examples exact; 50 random pairs equal brute force; scaling rel err <= {worst_rel:.1e}"
    ))
}

/// Table rows: id, manual minutes, tool minutes, slices, manual voxels, tool voxels.
const TABLE: [(&str, f64, f64, usize, usize, usize); 10] = [
    ("1", 9.0, 4.0, 36, 33522, 44694),
    ("2", 19.0, 7.5, 51, 28373, 32383),
    ("3", 6.0, 4.5, 42, 42056, 47752),
    ("4", 16.0, 6.5, 60, 69448, 78776),
    ("5", 3.0, 2.5, 10, 1480, 2016),
    ("6", 14.0, 6.25, 43, 39097, 38905),
    ("7", 13.0, 8.5, 36, 22468, 25331),
    ("8", 7.0, 9.25, 42, 27368, 30648),
    ("9", 5.0, 3.0, 11, 2703, 3908),
    ("10", 11.0, 2.5, 16, 10318, 11720),
];

/// Expected printed columns: time_ratio, vol_ratio.
const TABLE_RATIOS: [(&str, &str); 10] = [
    ("0.44", "1.33"),
    ("0.39", "1.14"),
    ("0.75", "1.14"),
    ("0.41", "1.13"),
    ("0.83", "1.36"),
    ("0.45", "1.00"),
    ("0.65", "1.13"),
    ("1.32", "1.12"),
    ("0.60", "1.45"),
    ("0.23", "1.14"),
];

/// `n` voxels spread round-robin over the first `slices` z-slices of a 64^3 grid.
fn engineered_mask(n: usize, slices: usize) -> LabelVolume {
    let grid = Grid::isotropic([64; 3]);
    let mut m = LabelVolume::zeros(grid);
    for k in 0..n {
        let z = k % slices;
        let j = k / slices;
        m.set(j % 64, j / 64, z, 1);
    }
    m
}

fn c5_table_arithmetic() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cases = Vec::new();
    for (id, mt, st, slices, nm, nt) in TABLE {
        let manual = dir.path().join(format!("manual_{id}.nrrd"));
        let tool = dir.path().join(format!("tool_{id}.nrrd"));
        write_nrrd(&engineered_mask(nm, slices), &manual).unwrap();
        write_nrrd(&engineered_mask(nt, slices), &tool).unwrap();
        cases.push(CaseInput {
            case_id: id.into(),
            manual_path: manual,
            tool_path: tool,
            manual_time_s: Some(mt * 60.0),
            tool_time_s: Some(st * 60.0),
        });
    }
    let csv = build_report(&cases, Axis::Z).to_csv_string();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    ensure!(
        rows[0].join(",") == "case_id,mt_min,tool_min,slices,time_ratio,dsc,hd_mm,vol_manual_mm3,vol_tool_mm3,vol_ratio",
        "header {:?}",
        rows[0]
    );
    ensure!(
        rows.len() == 12,
        "expected 10 cases plus averages, got {} rows",
        rows.len() - 1
    );
    for (k, ((id, _, _, slices, nm, nt), (tr, vr))) in TABLE.iter().zip(TABLE_RATIOS).enumerate() {
        let r = &rows[k + 1];
        ensure!(r[0] == *id, "row {k} id {}", r[0]);
        ensure!(r[3] == slices.to_string(), "case {id} slices {}", r[3]);
        ensure!(r[4] == tr, "case {id} time_ratio {} != {tr}", r[4]);
        ensure!(
            r[7] == nm.to_string() && r[8] == nt.to_string(),
            "case {id} volumes {} {}",
            r[7],
            r[8]
        );
        ensure!(r[9] == vr, "case {id} vol_ratio {} != {vr}", r[9]);
    }
    let avg = &rows[11];
    ensure!(avg[0] == "Averages", "last row {:?}", avg);
    let want = [
        (1, "10.30"),
        (2, "5.45"),
        (3, "34.70"),
        (4, "0.61"),
        (7, "27683"),
        (8, "31613"),
        (9, "1.19"),
    ];
    for (col, s) in want {
        ensure!(avg[col] == s, "averages column {col}: {} != {s}", avg[col]);
    }
    Ok(format!(
        "case 1 -> time_ratio {} vol_ratio {}; averages {} {} {} (all 10 rows match)",
        rows[1][4], rows[1][9], avg[1], avg[2], avg[4]
    ))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// A noise-free bright ball (radius 8) inside the 32^3 corner of a 128^3
/// volume, with seeds for the ball and for the background around it.
fn c6_roi_speedup() -> Outcome {
    let dims = [128; 3];
    let grid = Grid::isotropic(dims);
    let d2 = |p: [usize; 3], c: i64| p.iter().map(|&v| (v as i64 - c).pow(2)).sum::<i64>();
    let image = ScalarVolume::new(
        grid,
        ScalarData::F32(
            (0..grid.len())
                .map(|i| {
                    if d2(grid.coords(i), 14) <= 64 {
                        100.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        ),
    )
    .unwrap();
    let mut seeds = LabelVolume::zeros(grid);
    for i in 0..grid.len() {
        let p = grid.coords(i);
        if d2(p, 14) <= 9 {
            seeds.labels_mut()[i] = 1;
        } else if d2(p, 2) <= 1 || d2(p, 28) <= 1 {
            seeds.labels_mut()[i] = 2;
        }
    }
    let with = GrowCutConfig::default();
    let without = GrowCutConfig {
        use_roi: false,
        ..with
    };
    let time = |cfg: &GrowCutConfig| {
        let t = Instant::now();
        let r = growcut_run(&image, &seeds, cfg).unwrap();
        (t.elapsed(), r)
    };
    let mut roi_times = Vec::new();
    let mut full_times = Vec::new();
    let mut roi_result = None;
    for _ in 0..5 {
        let (t, r) = time(&with);
        roi_times.push(t);
        roi_result = Some(r);
        full_times.push(time(&without).0);
    }
    let r = roi_result.unwrap();
    for (i, &l) in r.labels.labels().iter().enumerate() {
        ensure!(
            l == 0 || r.roi.contains(grid.coords(i)),
            "label outside ROI at {:?}",
            grid.coords(i)
        );
    }
    let (a, b) = (median(roi_times), median(full_times));
    let speedup = b.as_secs_f64() / a.as_secs_f64();
    ensure!(
        speedup >= 2.0,
        "speedup {speedup:.2} (roi {a:.2?}, full {b:.2?})"
    );
    Ok(format!(
        "ROI {:?}..{:?}: median {a:.2?} vs {b:.2?} without ROI, {speedup:.1}x",
        r.roi.lo, r.roi.hi
    ))
}

fn interior(dims: [usize; 3], p: [usize; 3]) -> bool {
    (0..3).all(|a| p[a] >= 1 && p[a] + 1 < dims[a])
}

fn complement(m: &LabelVolume) -> LabelVolume {
    m.with_labels(m.labels().iter().map(|&l| 1 - l).collect())
        .unwrap()
}

fn subset(a: &LabelVolume, b: &LabelVolume) -> bool {
    a.labels().iter().zip(b.labels()).all(|(&x, &y)| x <= y)
}

fn c7_morphology() -> Outcome {
    let dims = [32; 3];
    let grid = Grid::isotropic(dims);
    let r2 = 10 * 10;
    let sphere: Vec<u8> = (0..grid.len())
        .map(|i| {
            let p = grid.coords(i);
            let d2: usize = p.iter().map(|&c| (c as i64 - 16).pow(2) as usize).sum();
            u8::from(d2 <= r2)
        })
        .collect();
    let body = LabelVolume::new(grid, sphere).unwrap();
    // the sphere's top voxel is (16,16,26); the protrusion sits right above it
    let mut fixture = body.clone();
    ensure!(
        fixture.get(16, 16, 26) == 1 && fixture.get(16, 16, 27) == 0,
        "fixture geometry"
    );
    fixture.set(16, 16, 27, 1);
    let shell = (0..grid.len())
        .filter(|&i| {
            let [x, y, z] = grid.coords(i);
            body.labels()[i] == 1
                && [
                    [1i64, 0, 0],
                    [-1, 0, 0],
                    [0, 1, 0],
                    [0, -1, 0],
                    [0, 0, 1],
                    [0, 0, -1],
                ]
                .iter()
                .any(|d| {
                    body.get(
                        (x as i64 + d[0]) as usize,
                        (y as i64 + d[1]) as usize,
                        (z as i64 + d[2]) as usize,
                    ) == 0
                })
        })
        .count();
    let out = apply_ops(
        &fixture,
        &[MorphOp::Dilate, MorphOp::Erode, MorphOp::Erode],
        StructuringElement::FACE,
    )
    .map_err(|e| e.to_string())?;
    ensure!(out.get(16, 16, 27) == 0, "protrusion survived");
    let change = body.count_nonzero().abs_diff(out.count_nonzero());
    ensure!(change <= shell, "body changed by {change} > shell {shell}");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let dims: [usize; 3] = std::array::from_fn(|_| rng.random_range(3..=12));
        let a = random_mask(&mut rng, dims, [1.0; 3]);
        // b is a superset of a
        let extra = random_mask(&mut rng, dims, [1.0; 3]);
        let b = a
            .with_labels(
                a.labels()
                    .iter()
                    .zip(extra.labels())
                    .map(|(&x, &y)| x | y)
                    .collect(),
            )
            .unwrap();
        for se in [
            StructuringElement::FACE,
            StructuringElement::EDGE,
            StructuringElement::VERTEX,
        ] {
            let da = dilate(&a, se, 1).unwrap();
            let ea = erode(&a, se, 1).unwrap();
            let dual = complement(&erode(&complement(&a), se, 1).unwrap());
            for i in 0..a.grid().len() {
                let p = a.grid().coords(i);
                if interior(dims, p) {
                    ensure!(
                        da.labels()[i] == dual.labels()[i],
                        "case {case}: duality at {p:?}"
                    );
                }
            }
            ensure!(
                subset(&ea, &a) && subset(&a, &da),
                "case {case}: erode <= mask <= dilate"
            );
            ensure!(
                subset(&da, &dilate(&b, se, 1).unwrap()),
                "case {case}: dilate not monotone"
            );
            ensure!(
                subset(&ea, &erode(&b, se, 1).unwrap()),
                "case {case}: erode not monotone"
            );
        }
    }
    Ok(format!(
        "protrusion removed, body {} -> {} (shell {shell}); duality and monotonicity on 100 masks",
        body.count_nonzero(),
        out.count_nonzero()
    ))
}

async fn call(app: &Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

/// upload -> 3 strokes -> segment -> morph -> download. Returns label bytes and stats.
async fn scripted_session(image: Vec<u8>) -> Result<(Vec<u8>, Value), String> {
    let app = growcut_service::router(growcut_service::AppState::in_memory());
    let (s, b) = call(&app, "POST", "/sessions", image).await;
    ensure!(s == StatusCode::CREATED, "upload: {s}");
    let created: Value = serde_json::from_slice(&b).unwrap();
    let id = created["session_id"].as_str().unwrap().to_string();
    let strokes = [
        json!([{"axis": "z", "slice_index": 32, "polyline": [[30, 32], [34, 32]], "brush_radius_mm": 6, "label": 1}]),
        json!([{"axis": "x", "slice_index": 32, "polyline": [[61, 2], [2, 2], [2, 61]], "brush_radius_mm": 1, "label": 2}]),
        json!([{"axis": "y", "slice_index": 32, "polyline": [[2, 61], [61, 61], [61, 2]], "brush_radius_mm": 1, "label": 2}]),
    ];
    for st in strokes {
        let (s, b) = call(
            &app,
            "POST",
            &format!("/sessions/{id}/strokes"),
            st.to_string().into_bytes(),
        )
        .await;
        ensure!(
            s == StatusCode::OK,
            "strokes: {s} {}",
            String::from_utf8_lossy(&b)
        );
    }
    let (s, b) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/segment"),
        b"{}".to_vec(),
    )
    .await;
    ensure!(
        s == StatusCode::OK,
        "segment: {s} {}",
        String::from_utf8_lossy(&b)
    );
    let morph = json!({"ops": ["dilate", "erode", "erode"], "connectivity": 6});
    let (s, b) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/morph"),
        morph.to_string().into_bytes(),
    )
    .await;
    ensure!(
        s == StatusCode::OK,
        "morph: {s} {}",
        String::from_utf8_lossy(&b)
    );
    let (s, label) = call(&app, "GET", &format!("/sessions/{id}/label"), vec![]).await;
    ensure!(s == StatusCode::OK, "label: {s}");
    let (s, stats) = call(&app, "GET", &format!("/sessions/{id}/stats"), vec![]).await;
    ensure!(s == StatusCode::OK, "stats: {s}");
    Ok((label, serde_json::from_slice(&stats).unwrap()))
}

fn cmd_volume(path: &Path) -> Result<f64, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_growcut"))
        .args(["volume", "--mask"])
        .arg(path)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "growcut volume failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    v["volume_mm3"]
        .as_f64()
        .ok_or_else(|| "no volume_mm3".to_string())
}

fn c8_service_determinism() -> Outcome {
    let spec = PhantomSpec {
        noise_sigma: 8.0,
        seed: 11,
        ..PhantomSpec::default()
    };
    let p = generate(&spec).unwrap();
    let image = encode_nrrd(&p.image);
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (first, stats) = rt.block_on(scripted_session(image.clone()))?;
    let (second, stats2) = rt.block_on(scripted_session(image))?;
    ensure!(first == second, "label downloads differ between replays");
    ensure!(
        stats["volume_mm3"] == stats2["volume_mm3"],
        "stats differ between replays"
    );
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("label.nrrd");
    std::fs::write(&path, &first).map_err(|e| e.to_string())?;
    let cli = cmd_volume(&path)?;
    let served = stats["volume_mm3"].as_f64().unwrap();
    ensure!(cli == served, "cmd_volume {cli} != stats {served}");
    let mask = growcut_core::read_labels(&path).unwrap();
    Ok(format!(
        "{} byte label identical across replays; volume {served} mm3 both ways; DSC vs truth {:.4}",
        first.len(),
        dice(&mask, &p.truth).unwrap()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 oracle equivalence", c1_oracle_equivalence),
        ("2 thread determinism", c2_thread_determinism),
        ("3 sphere phantom", c3_sphere_phantom),
        ("4 metric suites", c4_metric_suites),
        ("5 table arithmetic", c5_table_arithmetic),
        ("6 ROI speedup", c6_roi_speedup),
        ("7 morphology", c7_morphology),
        ("8 service determinism", c8_service_determinism),
    ];
    // failures are reported on the criterion line instead
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let res = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match res {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
