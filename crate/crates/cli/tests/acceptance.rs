//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Criteria 5-8 and 10 execute the fixture corpus and need a Python
//! interpreter with matplotlib.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chartforge::dataset::{decode_rle, encode_rle, load_bundle};
use chartforge::eval::{
    eval_boxes, eval_masks, eval_points, hungarian_match, mask_iou, MaskSimilarity, BOUNDARY_RADII,
    BOX_IOU_THRESHOLD, MASK_IOU_THRESHOLD, POINT_RADIUS_PX,
};
use chartforge::mask::{compose_instances, extract_primitive_mask, scene_instances, BBox, Point};
use chartforge::som::{filter_candidates, Candidate, FilterConfig, RemovalReason};
use chartforge::tracer::{execute_script, ApiName, PrimitiveRole};
use chartforge::{Bitmap, ElementCategory, Granularity, RunConfig, TracedScene};
use image::{Rgb, RgbImage};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_chartforge"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "chartforge {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn trace(rel: &str) -> Result<TracedScene, String> {
    let text = fs::read_to_string(fixtures().join(rel)).map_err(|e| e.to_string())?;
    execute_script(&text, &RunConfig::default()).map_err(|e| format!("{rel}: {e}"))
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn rect(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Bitmap {
    Bitmap::from_fn(w, h, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
}

// ---- independent oracles ----

/// Best matching size by trying every injective row assignment.
fn exhaustive_max_pairs(eligible: &[Vec<bool>]) -> usize {
    fn go(i: usize, used: &mut [bool], e: &[Vec<bool>]) -> usize {
        if i == e.len() {
            return 0;
        }
        let mut best = go(i + 1, used, e);
        for j in 0..used.len() {
            if e[i][j] && !used[j] {
                used[j] = true;
                best = best.max(1 + go(i + 1, used, e));
                used[j] = false;
            }
        }
        best
    }
    let m = eligible.first().map_or(0, Vec::len);
    go(0, &mut vec![false; m], eligible)
}

/// Foreground pixels with a background or off-image pixel within Chebyshev
/// distance `d`, as a set of coordinates.
fn band(m: &Bitmap, d: u32) -> std::collections::HashSet<(u32, u32)> {
    let (w, h) = m.dims();
    let d = d as i64;
    m.foreground()
        .filter(|&(x, y)| {
            (-d..=d).any(|dy| {
                (-d..=d).any(|dx| {
                    let (qx, qy) = (x as i64 + dx, y as i64 + dy);
                    qx < 0
                        || qy < 0
                        || qx >= w as i64
                        || qy >= h as i64
                        || !m.get(qx as u32, qy as u32)
                })
            })
        })
        .collect()
}

fn set_ratio(
    a: &std::collections::HashSet<(u32, u32)>,
    b: &std::collections::HashSet<(u32, u32)>,
) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

fn boundary_oracle(a: &Bitmap, b: &Bitmap) -> f64 {
    [1, 2, 4, 8]
        .iter()
        .map(|&d| set_ratio(&band(a, d), &band(b, d)))
        .sum::<f64>()
        / 4.0
}

fn area_oracle(a: &Bitmap, b: &Bitmap) -> f64 {
    set_ratio(&a.foreground().collect(), &b.foreground().collect())
}

fn shifted(m: &Bitmap, dx: i64, dy: i64) -> Bitmap {
    let (w, h) = m.dims();
    Bitmap::from_fn(w, h, |x, y| {
        let (sx, sy) = (x as i64 - dx, y as i64 - dy);
        sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 && m.get(sx as u32, sy as u32)
    })
}

fn dilated(m: &Bitmap) -> Bitmap {
    let (w, h) = m.dims();
    Bitmap::from_fn(w, h, |x, y| {
        (x.saturating_sub(1)..=(x + 1).min(w - 1))
            .any(|qx| (y.saturating_sub(1)..=(y + 1).min(h - 1)).any(|qy| m.get(qx, qy)))
    })
}

// ---- shared corpus runs ----

struct CorpusRuns {
    first: tempfile::TempDir,
    second: tempfile::TempDir,
    elapsed: Vec<Duration>,
}

fn corpus_scripts() -> Vec<String> {
    let mut scripts: Vec<String> = fs::read_dir(fixtures().join("corpus"))
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "py"))
        .map(|p| p.display().to_string())
        .collect();
    scripts.sort();
    scripts
}

fn corpus() -> Result<&'static CorpusRuns, String> {
    static RUNS: OnceLock<Result<CorpusRuns, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let targets = fixtures().join("corpus/targets.json").display().to_string();
        let scripts = corpus_scripts();
        let mut elapsed = Vec::new();
        let mut dirs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let out = dir.path().display().to_string();
            let mut args = vec![
                "--out",
                out.as_str(),
                "synth",
                "--targets",
                targets.as_str(),
            ];
            args.extend(scripts.iter().map(String::as_str));
            let start = Instant::now();
            cli(&args)?;
            elapsed.push(start.elapsed());
            dirs.push(dir);
        }
        let second = dirs.pop().unwrap();
        let first = dirs.pop().unwrap();
        Ok(CorpusRuns {
            first,
            second,
            elapsed,
        })
    })
    .as_ref()
    .map_err(Clone::clone)
}

// ---- criteria ----

fn matching_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let start = Instant::now();
    for trial in 0..500 {
        let (n, m) = (rng.random_range(0..=6), rng.random_range(0..=6));
        let density = rng.random_range(0.1..0.9);
        let eligible: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_bool(density)).collect())
            .collect();
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
            .collect();
        let got = hungarian_match(&scores, &eligible)
            .map_err(|e| e.to_string())?
            .len();
        let want = exhaustive_max_pairs(&eligible);
        ensure!(
            got == want,
            "trial {trial} ({n}x{m}): {got} pairs, exhaustive search finds {want}"
        );
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(10), "500 instances took {t:?}");
    Ok(format!(
        "500 instances agree with exhaustive search in {:.2?}",
        t
    ))
}

fn point_rule() -> Outcome {
    let dot = rect(64, 64, 20, 20, 21, 21);
    let tp = |p: Point, m: &Bitmap| {
        eval_points(&[p], std::slice::from_ref(m), POINT_RADIUS_PX)
            .map(|r| r.tp)
            .ok()
    };
    ensure!(
        tp(Point::new(25.0, 20.0), &dot) == Some(1),
        "distance 5.0 should match"
    );
    ensure!(
        tp(Point::new(20.0, 15.0), &dot) == Some(1),
        "distance 5.0 (vertical) should match"
    );
    ensure!(
        tp(Point::new(25.5, 20.0), &dot) == Some(0),
        "distance 5.5 should not match"
    );
    ensure!(
        tp(Point::new(20.0, 14.5), &dot) == Some(0),
        "distance 5.5 (vertical) should not match"
    );
    let block = rect(64, 64, 4, 4, 60, 60);
    for p in [
        Point::new(32.0, 32.0),
        Point::new(30.7, 12.2),
        Point::new(4.0, 59.9),
    ] {
        ensure!(tp(p, &block) == Some(1), "{p:?} lies inside the mask");
        let zero =
            eval_points(&[p], std::slice::from_ref(&block), 0.0).map_err(|e| e.to_string())?;
        ensure!(
            zero.tp == 1,
            "{p:?} inside should match even with zero radius"
        );
    }
    Ok("5.0 px matches, 5.5 px does not, interior points always match".into())
}

fn box_threshold() -> Outcome {
    let gt = BBox::new(0.0, 0.0, 10.0, 10.0);
    let at = |p: BBox| {
        eval_boxes(&[p], &[gt], BOX_IOU_THRESHOLD)
            .map(|r| r.tp)
            .ok()
    };
    ensure!(
        at(BBox::new(0.0, 0.0, 10.0, 5.0)) == Some(1),
        "IoU 0.5 should be eligible"
    );
    ensure!(
        at(BBox::new(0.0, 0.0, 10.0, 4.99)) == Some(0),
        "IoU 0.499 should not be eligible"
    );
    ensure!(
        at(BBox::new(0.0, 0.0, 20.0, 5.0)) == Some(0),
        "IoU 1/3 should not be eligible"
    );
    Ok("IoU 0.5 eligible, 0.499 not".into())
}

fn boundary_dispatch() -> Outcome {
    let runs = corpus()?;
    let bundle = load_bundle(runs.first.path()).map_err(|e| e.to_string())?;
    let mut checked = std::collections::BTreeMap::<&str, usize>::new();
    let mut worst = 0.0f64;
    for ann in &bundle.annotations {
        let cat = ann.category().ok_or("unknown category id")?;
        let gt = decode_rle(&ann.rle).map_err(|e| e.to_string())?;
        for pred in [shifted(&gt, 1, 0), shifted(&gt, 2, 3), dilated(&gt)] {
            let sim = MaskSimilarity::for_category(cat);
            let got = sim.score(&pred, &gt).map_err(|e| e.to_string())?;
            let want = if cat.thin_line() {
                boundary_oracle(&pred, &gt)
            } else {
                area_oracle(&pred, &gt)
            };
            worst = worst.max((got - want).abs());
            ensure!(
                (got - want).abs() <= 1e-9,
                "{} annotation {}: {got} vs oracle {want}",
                cat.name(),
                ann.id
            );
            let tp = eval_masks(
                std::slice::from_ref(&pred),
                std::slice::from_ref(&gt),
                cat,
                MASK_IOU_THRESHOLD,
            )
            .map_err(|e| e.to_string())?
            .tp;
            ensure!(
                tp == usize::from(want >= MASK_IOU_THRESHOLD),
                "{} annotation {}: eligibility disagrees",
                cat.name(),
                ann.id
            );
        }
        if cat.thin_line() {
            *checked.entry(cat.name()).or_default() += 1;
        }
    }
    ensure!(checked.len() == 4, "thin-line categories seen: {checked:?}");
    let thin: Vec<_> = ElementCategory::ALL
        .iter()
        .filter(|c| c.thin_line())
        .map(|c| c.name())
        .collect();
    ensure!(
        thin.len() == 4,
        "expected four thin-line categories, got {thin:?}"
    );
    // a pair the two similarities disagree on, to show routing matters
    let a = rect(60, 60, 5, 5, 45, 45);
    let b = shifted(&a, 4, 0);
    ensure!(
        mask_iou(&a, &b).map_err(|e| e.to_string())? >= 0.5 && boundary_oracle(&a, &b) < 0.5,
        "probe pair not discriminative"
    );
    for c in ElementCategory::ALL {
        let tp = eval_masks(
            std::slice::from_ref(&b),
            std::slice::from_ref(&a),
            c,
            MASK_IOU_THRESHOLD,
        )
        .map_err(|e| e.to_string())?
        .tp;
        ensure!(
            tp == usize::from(!c.thin_line()),
            "{} routed to the wrong similarity",
            c.name()
        );
    }
    let counts: Vec<String> = checked.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(format!(
        "radii {BOUNDARY_RADII:?}, max deviation {worst:.1e} ({})",
        counts.join(", ")
    ))
}

fn pixel_columns(m: &Bitmap) -> Option<(u32, u32)> {
    let xs: Vec<u32> = m.foreground().map(|(x, _)| x).collect();
    Some((*xs.iter().min()?, *xs.iter().max()?))
}

fn composite_identity() -> Outcome {
    let scene = trace("corpus/full_box.py")?;
    let call = scene
        .calls
        .iter()
        .find(|c| c.api_name == ApiName::Boxplot)
        .ok_or("no boxplot call")?;
    let boxes =
        compose_instances(&scene, call, Granularity::Composite).map_err(|e| e.to_string())?;
    let medians =
        compose_instances(&scene, call, Granularity::Primitive).map_err(|e| e.to_string())?;
    ensure!(
        boxes.len() == 3 && medians.len() == 3,
        "{} boxes, {} medians",
        boxes.len(),
        medians.len()
    );
    let prims: Vec<_> = scene.call_primitives(call).collect();
    let bodies: Vec<_> = prims
        .iter()
        .filter(|p| p.role == PrimitiveRole::BoxBody)
        .collect();
    ensure!(bodies.len() == 3, "{} box bodies", bodies.len());
    for (k, fb) in boxes.iter().enumerate() {
        ensure!(
            fb.category == ElementCategory::FullBox,
            "box {k} labelled {}",
            fb.category
        );
        let body = extract_primitive_mask(&scene, bodies[k].id, None).map_err(|e| e.to_string())?;
        let (lo, hi) = pixel_columns(&body).ok_or("empty body")?;
        let mut union = Bitmap::new(scene.width, scene.height);
        let mut parts = 0;
        for p in &prims {
            let m = extract_primitive_mask(&scene, p.id, None).map_err(|e| e.to_string())?;
            let (a, b) = pixel_columns(&m).ok_or("empty part")?;
            if a <= hi && b >= lo {
                union.union_with(&m);
                parts += 1;
            }
        }
        ensure!(parts == 6, "box {k}: {parts} parts");
        ensure!(
            union == fb.bitmap,
            "box {k}: composite differs from the union of its parts"
        );
        ensure!(
            medians[k].category == ElementCategory::BoxMedianLine,
            "median {k} labelled {}",
            medians[k].category
        );
        ensure!(
            medians[k].bitmap.is_subset_of(&fb.bitmap),
            "median {k} not inside its box"
        );
    }
    Ok("3 FullBox masks equal the union of their 6 parts; medians inside".into())
}

fn geometry_oracle() -> Outcome {
    let scene = trace("geometry/single_bar.py")?;
    ensure!(
        (scene.width, scene.height) == (400, 300),
        "canvas {}x{}",
        scene.width,
        scene.height
    );
    let bars: Vec<_> = scene_instances(&scene)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|m| m.category == ElementCategory::VBar)
        .collect();
    ensure!(bars.len() == 1, "{} bars", bars.len());
    let bbox = bars[0].tight_bbox().map_err(|e| e.to_string())?;
    // figure 4x3 in at 100 dpi, axes rect (0.125, 0.1, 0.75, 0.8), limits 0..10, bar x 4..6, y 1..7
    let to_px = |x: f64| 400.0 * (0.125 + 0.75 * x / 10.0);
    let to_py = |y: f64| 300.0 * (1.0 - (0.1 + 0.8 * y / 10.0));
    let want = [to_px(4.0), to_py(7.0), to_px(6.0), to_py(1.0)];
    let got = [bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max];
    let worst = got
        .iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    ensure!(worst <= 2.0, "bbox {got:?}, analytic {want:?}");
    let fmt = |v: [f64; 4]| v.map(|x| format!("{x:.1}")).join(", ");
    Ok(format!(
        "bbox [{}] vs analytic [{}], max edge error {worst:.3} px",
        fmt(got),
        fmt(want)
    ))
}

fn determinism() -> Outcome {
    let runs = corpus()?;
    let a = fs::read(runs.first.path().join("dataset.json")).map_err(|e| e.to_string())?;
    let b = fs::read(runs.second.path().join("dataset.json")).map_err(|e| e.to_string())?;
    ensure!(a == b, "dataset.json differs between runs");
    let (ja, jb) = (
        read_json(&runs.first.path().join("dataset.json"))?,
        read_json(&runs.second.path().join("dataset.json"))?,
    );
    let rles = |j: &Value| {
        j["annotations"]
            .as_array()
            .map(|v| v.iter().map(|a| a["rle"].clone()).collect::<Vec<_>>())
    };
    ensure!(rles(&ja) == rles(&jb), "RLE payloads differ");
    let images = ja["images"].as_array().map_or(0, Vec::len);
    ensure!(images == 18, "{images} images");
    for k in 1..=images {
        let rel = format!("images/{k:06}.png");
        ensure!(
            fs::read(runs.first.path().join(&rel)).ok()
                == fs::read(runs.second.path().join(&rel)).ok(),
            "{rel} differs"
        );
    }
    let slowest = runs.elapsed.iter().max().copied().unwrap_or_default();
    ensure!(slowest < Duration::from_secs(300), "synth took {slowest:?}");
    let anns = ja["annotations"].as_array().map_or(0, Vec::len);
    Ok(format!(
        "18 scripts, {anns} annotations, byte-identical; slowest run {slowest:.1?}"
    ))
}

fn self_evaluation() -> Outcome {
    let runs = corpus()?;
    let dir = runs.first.path();
    let bundle = dir.display().to_string();
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let o = out.path().display().to_string();
    for (gold, eval) in [("point", "point"), ("bbox", "bbox"), ("mask", "seg")] {
        cli(&["--out", &o, "gold", &bundle, gold])?;
        let preds = out
            .path()
            .join(format!("gold_{gold}.jsonl"))
            .display()
            .to_string();
        cli(&["--out", &o, "eval", eval, &bundle, &preds])?;
        let r = read_json(&out.path().join(format!("eval_{eval}.json")))?;
        for key in ["macro_p", "macro_r", "macro_f1"] {
            ensure!(r[key].as_f64() == Some(1.0), "{eval} {key} = {}", r[key]);
        }
        if eval == "seg" {
            ensure!(
                r["miou_union"].as_f64() == Some(1.0),
                "miou_union = {}",
                r["miou_union"]
            );
        }
    }
    cli(&["--out", &o, "gold", &bundle, "instances"])?;
    let inst = out
        .path()
        .join("gold_instances.jsonl")
        .display()
        .to_string();
    cli(&["--out", &o, "map", &bundle, &inst])?;
    let m = read_json(&out.path().join("map.json"))?;
    ensure!(m["map"].as_f64() == Some(1.0), "map = {}", m["map"]);
    let samples = read_json(&out.path().join("eval_seg.json"))?["sample_ids"]
        .as_array()
        .map_or(0, Vec::len);
    Ok(format!(
        "P=R=F1=1 for point/bbox/seg over {samples} samples, mIoU_union=1, mAP=1"
    ))
}

/// Mask over the first `n` cells of a `cols`-wide block anchored at (x0, y0),
/// skipping the first `skip` cells.
fn cells(x0: u32, y0: u32, cols: u32, skip: u32, n: u32) -> Bitmap {
    Bitmap::from_fn(240, 120, |x, y| {
        if x < x0 || y < y0 || x >= x0 + cols {
            return false;
        }
        let k = (y - y0) * cols + (x - x0);
        k >= skip && k < n
    })
}

fn filter_fidelity() -> Outcome {
    let grey = Rgb([40, 70, 110]);
    let mut image = RgbImage::from_pixel(240, 120, grey);
    let cand = |id: &str, mask: Bitmap| Candidate {
        id: id.into(),
        mask,
    };
    let mut cands = vec![
        cand("area9", cells(2, 2, 3, 0, 9)),
        cand("area10", cells(10, 2, 5, 0, 10)),
        // IoU 91/100 and 89/100
        cand("dup_keep", cells(20, 2, 10, 0, 95)),
        cand("dup_091", cells(20, 2, 10, 4, 100)),
        cand("near_keep", cells(40, 2, 10, 0, 94)),
        cand("near_089", cells(40, 2, 10, 5, 100)),
        // 200-px masks covered 197/200 and 194/200 by two smaller masks
        cand("cover_0985", cells(60, 2, 20, 0, 200)),
        cand("cover_a", cells(60, 2, 20, 0, 100)),
        cand("cover_b", cells(60, 2, 20, 100, 197)),
        cand("cover_097", cells(90, 2, 20, 0, 200)),
        cand("cover_c", cells(90, 2, 20, 0, 100)),
        cand("cover_d", cells(90, 2, 20, 100, 194)),
        cand("white_245", cells(120, 2, 10, 0, 100)),
        cand("white_244", cells(140, 2, 10, 0, 100)),
    ];
    for (x0, shade) in [(120u32, 245u8), (140, 244)] {
        for k in 0..96u32 {
            image.put_pixel(x0 + k % 10, 2 + k / 10, Rgb([shade, shade, shade]));
        }
    }
    cands.push(cand("plain", cells(160, 40, 10, 0, 50)));
    let cfg = FilterConfig::default();
    let out = filter_candidates(&cands, &image, &cfg).map_err(|e| e.to_string())?;
    let reason = |id: &str| out.removed.iter().find(|r| r.id == id).map(|r| r.reason);
    let kept = |id: &str| out.kept.iter().any(|c| c.id == id);
    ensure!(
        reason("area9") == Some(RemovalReason::Area),
        "area 9: {:?}",
        reason("area9")
    );
    ensure!(kept("area10"), "area 10 removed: {:?}", reason("area10"));
    ensure!(
        reason("dup_091") == Some(RemovalReason::Duplicate) && kept("dup_keep"),
        "IoU 0.91: {:?}",
        reason("dup_091")
    );
    ensure!(
        kept("near_089") && kept("near_keep"),
        "IoU 0.89: {:?}",
        reason("near_089")
    );
    ensure!(
        reason("cover_0985") == Some(RemovalReason::Composite),
        "coverage 0.985: {:?}",
        reason("cover_0985")
    );
    ensure!(
        kept("cover_a") && kept("cover_b"),
        "parts of a removed composite must survive"
    );
    ensure!(
        kept("cover_097"),
        "coverage 0.97 removed: {:?}",
        reason("cover_097")
    );
    ensure!(
        reason("white_245") == Some(RemovalReason::White),
        "white 0.96 at 245: {:?}",
        reason("white_245")
    );
    ensure!(
        kept("white_244"),
        "white at 244 removed: {:?}",
        reason("white_244")
    );
    ensure!(kept("plain"), "plain candidate removed");
    let again = filter_candidates(&out.kept, &image, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        again.kept == out.kept && again.removed.is_empty(),
        "filtering is not idempotent"
    );

    let mut rng = StdRng::seed_from_u64(11);
    for trial in 0..200 {
        let random: Vec<Candidate> = (0..rng.random_range(0..12))
            .map(|k| {
                let (x, y) = (rng.random_range(0..200), rng.random_range(0..100));
                let (w, h) = (rng.random_range(1..40), rng.random_range(1..20));
                cand(
                    &format!("r{k}"),
                    rect(240, 120, x, y, (x + w).min(240), (y + h).min(120)),
                )
            })
            .collect();
        let once = filter_candidates(&random, &image, &cfg).map_err(|e| e.to_string())?;
        let twice = filter_candidates(&once.kept, &image, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            twice.kept == once.kept,
            "random trial {trial} not idempotent"
        );
    }
    Ok(format!(
        "{} kept, {} removed, each per threshold; idempotent on 201 inputs",
        out.kept.len(),
        out.removed.len()
    ))
}

fn closed_loop() -> Outcome {
    let runs = corpus()?;
    let bundle = runs.first.path().display().to_string();
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let o = out.path().display().to_string();
    cli(&[
        "--out", &o, "som", "run", &bundle, "--oracle", "--client", "gold",
    ])?;
    let r = read_json(&out.path().join("eval_seg.json"))?;
    ensure!(
        r["macro_f1"].as_f64() == Some(1.0),
        "macro F1 = {}",
        r["macro_f1"]
    );
    let notes = read_json(&out.path().join("notes.json"))?;
    ensure!(
        notes.as_array().is_some_and(Vec::is_empty),
        "notes: {notes}"
    );
    let marked = fs::read_dir(out.path().join("marked"))
        .map_err(|e| e.to_string())?
        .count();
    let n = r["sample_ids"].as_array().map_or(0, Vec::len);
    ensure!(marked == n, "{marked} marked images for {n} samples");
    Ok(format!("gold selector over {n} samples: macro F1 = 1"))
}

fn rle_round_trip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    for trial in 0..1000 {
        let (w, h) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let density = rng.random::<f64>();
        let m = Bitmap::from_fn(w, h, |_, _| rng.random_bool(density));
        let rle = encode_rle(&m);
        ensure!(
            rle.counts.iter().sum::<u64>() == (w * h) as u64,
            "trial {trial}: counts do not sum to H*W"
        );
        let back = decode_rle(&rle).map_err(|e| e.to_string())?;
        ensure!(
            back == m,
            "trial {trial} ({w}x{h}) changed after round trip"
        );
    }
    Ok("1000 random bitmaps up to 64x64 survive encode/decode".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("matching oracle", matching_oracle),
        ("point rule", point_rule),
        ("box IoU threshold", box_threshold),
        ("boundary IoU dispatch", boundary_dispatch),
        ("composite identity", composite_identity),
        ("geometry oracle", geometry_oracle),
        ("determinism", determinism),
        ("self-evaluation", self_evaluation),
        ("candidate filter fidelity", filter_fidelity),
        ("closed loop", closed_loop),
        ("RLE round trip", rle_round_trip),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
