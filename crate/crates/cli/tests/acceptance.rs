//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use hazgen_cli::{partition_records, MODEL_FILE, REGISTRY_FILE};
use hazgen_core::dataset::{build_record, manifest_path, verify_manifest, Manifest, Partition};
use hazgen_core::envelope::{gradient, loss, override_decision, Batch, Decision, EnvelopeModel, EvalMetrics, FeatureVector};
use hazgen_core::genvar::{derive_rng, generate_plan, GenerationPlan, RngStream, Variation};
use hazgen_core::hsl::{self, line_col, pretty_print, Diagnostic};
use hazgen_core::labeler::{label_scene, LabelRule};
use hazgen_core::twin::{
    edge_clearance, exceedance_time, instantiate_scene, min_separation, observe, Capsule, ParamAssignment, ProximityScene,
    SceneBody, SceneInstance, Segment, SensorModel, Table, TabletopScene, ThermalScene, TwinKind, Vec3,
};
use hazgen_core::Dimension;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&mut Ctx) -> Outcome);

struct Ctx {
    root: PathBuf,
    tmp: tempfile::TempDir,
    /// Output directory of the noiseless run in criterion 8, with a model.
    clean_run: Option<PathBuf>,
}

impl Ctx {
    fn scenario(&self, name: &str) -> PathBuf {
        self.root.join("scenarios").join(name)
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.tmp.path().join(name)
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn hazgen(ctx: &Ctx, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hazgen"))
        .args(args)
        .current_dir(&ctx.root)
        .env_remove("HAZGEN_SEED")
        .output()
        .expect("hazgen binary runs")
}

fn hazgen_ok(ctx: &Ctx, args: &[&str]) -> Result<(String, Duration), String> {
    let start = Instant::now();
    let out = hazgen(ctx, args);
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!("`hazgen {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok((String::from_utf8_lossy(&out.stdout).into_owned(), elapsed))
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn manifests(dir: &Path) -> BTreeMap<String, Manifest> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(".manifest.json") {
            out.insert(id.to_string(), Manifest::read(&path).unwrap());
        }
    }
    out
}

fn rules_of(ctx: &Ctx, file: &str, scenario: &str) -> Vec<LabelRule> {
    let text = fs::read_to_string(ctx.scenario(file)).unwrap();
    let loaded = hsl::load_registry(&[(file.to_string(), text)]).unwrap();
    loaded.registry.scenario(scenario).unwrap().label_rules.clone()
}

fn uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_unit()
}

// 1. Edge-violation rate on the fixed-table baseline.
fn edge_rate(ctx: &mut Ctx) -> Outcome {
    let out = ctx.dir("fixed_table");
    let src = ctx.scenario("fixed_table.hsl");
    let (_, elapsed) = hazgen_ok(
        ctx,
        &["generate", path_str(&src), "--out", path_str(&out), "--seed", "0", "--count", "10000", "--threads", "1"],
    )?;
    let m = &manifests(&out)["edge_placement"];
    check(m.record_count == 10_000 && m.skip_count == 0, || format!("{} records, {} skipped", m.record_count, m.skip_count))?;
    let c = m.label_histogram["edge_violation"];
    let rate = c.positive as f64 / (c.positive + c.negative) as f64;

    // Centers are uniform on [r, W - r] x [r, D - r]; safe ones keep another 10 cm.
    let (w, d, r, buffer): (f64, f64, f64, f64) = (100.0, 60.0, 3.0, 10.0);
    let feasible = (w - 2.0 * r) * (d - 2.0 * r);
    let safe = (w - 2.0 * (r + buffer)) * (d - 2.0 * (r + buffer));
    let oracle = 1.0 - safe / feasible;
    check((oracle - 0.5043).abs() < 5e-5, || format!("oracle {oracle}"))?;
    check((rate - oracle).abs() <= 0.02, || format!("rate {rate:.4} vs oracle {oracle:.4}"))?;
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("rate {rate:.4}, oracle {oracle:.4}, {:.2} s", elapsed.as_secs_f64()))
}

// 2. Thread-count independence and repeatability.
fn determinism(ctx: &mut Ctx) -> Outcome {
    let k = ctx.scenario("kindergarten.hsl");
    let x = ctx.scenario("classroom_extras.hsl");
    let mut runs = Vec::new();
    let mut slowest = Duration::ZERO;
    for (name, threads) in [("det_t1", "1"), ("det_t8", "8"), ("det_t1_again", "1")] {
        let out = ctx.dir(name);
        let (_, elapsed) = hazgen_ok(
            ctx,
            &[
                "generate", path_str(&k), path_str(&x), "--out", path_str(&out), "--seed", "0", "--count", "10000",
                "--threads", threads, "--sensor-sigma", "1", "--temperature-sigma", "0.5",
            ],
        )?;
        slowest = slowest.max(elapsed);
        let digests: BTreeMap<String, String> =
            manifests(&out).into_iter().map(|(id, m)| (id, m.content_digest)).collect();
        let bytes = fs::read(out.join("edge_placement.jsonl")).unwrap();
        runs.push((digests, bytes));
    }
    check(runs[0].0.len() == 3, || format!("expected 3 datasets, got {:?}", runs[0].0.keys()))?;
    check(runs[0].0 == runs[1].0, || format!("1 vs 8 threads: {:?} vs {:?}", runs[0].0, runs[1].0))?;
    check(runs[0].0 == runs[2].0, || "repeated run differs".to_string())?;
    check(runs[0].1 == runs[1].1 && runs[0].1 == runs[2].1, || "data bytes differ".to_string())?;
    check(slowest < Duration::from_secs(10), || format!("slowest run {slowest:?}"))?;
    let ed = &runs[0].0["edge_placement"];
    Ok(format!("3 datasets identical across runs (edge_placement {}...), slowest {:.2} s", &ed[..12], slowest.as_secs_f64()))
}

struct Expectation {
    code: String,
    start: (u32, u32),
    end: (u32, u32),
}

fn expectations(text: &str) -> Vec<Expectation> {
    let pos = |s: &str| {
        let (l, c) = s.split_once(':').unwrap();
        (l.parse().unwrap(), c.parse().unwrap())
    };
    text.lines()
        .filter_map(|l| l.strip_prefix("# expect: "))
        .map(|rest| {
            let (code, range) = rest.split_once(" at ").unwrap();
            let (a, b) = range.split_once('-').unwrap();
            Expectation { code: code.to_string(), start: pos(a), end: pos(b) }
        })
        .collect()
}

fn corpus_files(ctx: &Ctx, kind: &str) -> Vec<PathBuf> {
    let dir = ctx.root.join("crates/core/tests/corpus").join(kind);
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.retain(|p| p.extension().is_some_and(|e| e == "hsl"));
    files.sort();
    files
}

// 3. Parser corpus: located diagnostics and pretty-print round trips.
fn parser_corpus(ctx: &mut Ctx) -> Outcome {
    let valid = corpus_files(ctx, "valid");
    let invalid = corpus_files(ctx, "invalid");
    check(valid.len() >= 20 && invalid.len() >= 20, || format!("{} valid, {} invalid files", valid.len(), invalid.len()))?;
    for path in &valid {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).unwrap();
        let doc = hsl::parse_source(&text, &name).map_err(|d| format!("{name}: {:?}", d.first().map(|d| d.to_string())))?;
        let printed = pretty_print(&doc);
        let again = hsl::parse_source(&printed, "printed.hsl").map_err(|_| format!("{name}: printed form does not parse"))?;
        check(again == doc, || format!("{name}: round trip changed the document"))?;
        check(hsl::load_registry(&[(name.clone(), text)]).is_ok(), || format!("{name}: does not compile"))?;
    }
    let mut located = 0;
    for path in &invalid {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).unwrap();
        let expected = expectations(&text);
        check(!expected.is_empty(), || format!("{name}: no expectation header"))?;
        let diags: Vec<Diagnostic> = match hsl::load_registry(&[(name.clone(), text.clone())]) {
            Ok(_) => return Err(format!("{name}: accepted")),
            Err(d) => d,
        };
        for d in &diags {
            let s = &d.span;
            check(s.byte_end <= text.len() && line_col(&text, s.byte_start) == (s.line, s.column), || format!("{name}: bad span on {d}"))?;
        }
        for e in &expected {
            let hit = diags.iter().any(|d| {
                let at = (d.span.line, d.span.column);
                d.code == e.code && at >= e.start && at <= e.end
            });
            check(hit, || format!("{name}: no {} within {:?}-{:?}", e.code, e.start, e.end))?;
            located += 1;
        }
    }
    Ok(format!("{} valid round-trip, {} invalid with {located} located diagnostics", valid.len(), invalid.len()))
}

fn random_tabletop(rng: &mut RngStream, i: u64) -> SceneInstance {
    let table = Table { width: uniform(rng, 60.0, 200.0), depth: uniform(rng, 40.0, 100.0), height: 55.0 };
    let r = uniform(rng, 1.0, 10.0);
    // One scene in four is pushed toward an edge so both labels are common.
    let (u, v) = if i.is_multiple_of(4) { (uniform(rng, 0.0, 0.1), uniform(rng, 0.0, 1.0)) } else { (rng.next_unit(), rng.next_unit()) };
    let center = (r + u * (table.width - 2.0 * r), r + v * (table.depth - 2.0 * r));
    let t = TabletopScene::with_center(table, r, 12.0, 350.0, center).unwrap();
    SceneInstance::new("edge_placement", i, uniform(rng, 0.5, 2.0), SceneBody::Tabletop(t))
}

// 4. Labels agree with margins, ignore sensing, and treat 10 cm as safe.
fn labeling_oracle(ctx: &mut Ctx) -> Outcome {
    let rules = rules_of(ctx, "kindergarten.hsl", "edge_placement");
    let mut rng = derive_rng(0, "acceptance.labels", 0);
    let mut positives = 0;
    for i in 0..1000 {
        let scene = random_tabletop(&mut rng, i);
        let labels = label_scene(&scene, &rules).map_err(|e| e.to_string())?;
        let flag = labels.flag("edge_violation").unwrap();
        let margin = labels.margin("edge_violation").unwrap();
        check(flag == (margin < 0.0), || format!("scene {i}: flag {flag} with margin {margin}"))?;
        check(margin == edge_clearance(&scene).unwrap() - 10.0, || format!("scene {i}: margin {margin}"))?;
        positives += usize::from(flag);
    }

    let text = fs::read_to_string(ctx.scenario("kindergarten.hsl")).unwrap();
    let reg = hsl::load_registry(&[("kindergarten.hsl".into(), text)]).unwrap().registry;
    let plan = GenerationPlan::new(&reg, "edge_placement", 1000, 0, SensorModel::with_clearance_sigma(1.0));
    let noisy = SensorModel::with_clearance_sigma(3.0);
    let mut observation_changes = 0;
    for v in generate_plan(&reg, &plan, 1).map_err(|e| e.to_string())? {
        let Variation::Generated { scene, observation, params } = v else {
            return Err("unexpected skipped variation".into());
        };
        let original = build_record(&Variation::Generated { scene: scene.clone(), observation: observation.clone(), params: params.clone() }, &rules).unwrap();
        let mut rng = derive_rng(7, "acceptance.resense", scene.variation_index);
        let resensed = observe(&scene, &noisy, &mut rng);
        observation_changes += usize::from(resensed != observation);
        let again = build_record(&Variation::Generated { scene, observation: resensed, params }, &rules).unwrap();
        check(again.labels == original.labels, || format!("{}: labels changed with sensing", original.record_id))?;
    }
    check(observation_changes == 1000, || format!("only {observation_changes} observations changed"))?;

    let table = Table { width: 100.0, depth: 60.0, height: 55.0 };
    for center in [(13.0, 30.0), (87.0, 30.0), (50.0, 13.0), (50.0, 47.0)] {
        let t = TabletopScene::with_center(table, 3.0, 12.0, 350.0, center).unwrap();
        let scene = SceneInstance::new("edge_placement", 0, 1.0, SceneBody::Tabletop(t));
        check(edge_clearance(&scene).unwrap() == 10.0, || format!("{center:?} is not at 10 cm"))?;
        let labels = label_scene(&scene, &rules).unwrap();
        check(labels.flag("edge_violation") == Some(false), || format!("{center:?}: 10 cm labeled unsafe"))?;
        check(labels.margin("edge_violation") == Some(0.0), || format!("{center:?}: boundary margin not 0"))?;
    }
    Ok(format!("1000 scenes ({positives} violations) consistent; labels stable under re-sensing; 10 cm safe"))
}

struct Grid {
    a: Vec3,
    b: Vec3,
    n: usize,
}

impl Grid {
    fn at(&self, i: usize) -> Vec3 {
        let t = i as f64 / (self.n - 1) as f64;
        Vec3::new(self.a.x + (self.b.x - self.a.x) * t, self.a.y + (self.b.y - self.a.y) * t, self.a.z + (self.b.z - self.a.z) * t)
    }
}

fn dist(p: Vec3, q: Vec3) -> f64 {
    ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt()
}

/// Minimum over the full `n x n` grid of point pairs. Distance from a fixed
/// point to evenly spaced points on a segment is a convex sequence, so each
/// row's minimum is found by bisection on the forward difference.
fn grid_min(s: &Grid, t: &Grid) -> f64 {
    (0..s.n)
        .map(|i| {
            let p = s.at(i);
            let (mut lo, mut hi) = (0, t.n - 1);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if dist(p, t.at(mid)) <= dist(p, t.at(mid + 1)) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            dist(p, t.at(lo))
        })
        .fold(f64::INFINITY, f64::min)
}

fn grid_min_exhaustive(s: &Grid, t: &Grid) -> f64 {
    let pts: Vec<Vec3> = (0..t.n).map(|j| t.at(j)).collect();
    (0..s.n).map(|i| {
        let p = s.at(i);
        pts.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min)
    })
    .fold(f64::INFINITY, f64::min)
}

fn proximity(actuator: Segment, human: Capsule) -> SceneInstance {
    SceneInstance::new("acceptance", 0, 1.0, SceneBody::Proximity(ProximityScene { human, actuator, occluder: None }))
}

// 5. Separation against brute-force sampling; clearance against its formula.
fn geometry_oracle(_ctx: &mut Ctx) -> Outcome {
    const N: usize = 10_000;
    let v = Vec3::new;
    let fixed = [
        (Segment::new(v(-20.0, 0.0, 50.0), v(0.0, 0.0, 50.0)), Capsule { p0: v(0.0, 0.0, 0.0), p1: v(0.0, 0.0, 100.0), radius: 10.0 }, -10.0),
        (Segment::new(v(25.0, 0.0, 0.0), v(25.0, 0.0, 100.0)), Capsule { p0: v(0.0, 0.0, 0.0), p1: v(0.0, 0.0, 100.0), radius: 10.0 }, 15.0),
        (Segment::new(v(-50.0, 13.0, 40.0), v(50.0, 13.0, 40.0)), Capsule { p0: v(0.0, 0.0, 0.0), p1: v(0.0, 0.0, 40.0), radius: 3.0 }, 10.0),
    ];
    for (seg, cap, want) in fixed {
        let got = min_separation(&proximity(seg, cap)).unwrap();
        check((got - want).abs() < 1e-9, || format!("fixed case: {got} vs {want}"))?;
    }

    let mut rng = derive_rng(0, "acceptance.geometry", 0);
    let point = |rng: &mut RngStream| v(uniform(rng, -100.0, 100.0), uniform(rng, -100.0, 100.0), uniform(rng, -100.0, 100.0));
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let (a, b, c, d) = (point(&mut rng), point(&mut rng), point(&mut rng), point(&mut rng));
        let radius = uniform(&mut rng, 1.0, 20.0);
        let got = min_separation(&proximity(Segment::new(a, b), Capsule { p0: c, p1: d, radius })).unwrap();
        let (s, t) = (Grid { a, b, n: N }, Grid { a: c, b: d, n: N });
        let brute = grid_min(&s, &t) - radius;
        if k < 2 {
            let full = grid_min_exhaustive(&s, &t) - radius;
            check(full == brute, || format!("instance {k}: bisection {brute} vs exhaustive {full}"))?;
        }
        worst = worst.max((got - brute).abs());
        check((got - brute).abs() <= 0.05, || format!("instance {k}: {got} vs brute force {brute}"))?;
    }

    let (w, d, r) = (100.0, 60.0, 3.0);
    let l = Dimension::Length;
    let base = ParamAssignment::new()
        .with("table_w", l, w)
        .with("table_d", l, d)
        .with("table_h", l, 55.0)
        .with("object_radius", l, r)
        .with("object_height", l, 12.0)
        .with("object_mass", Dimension::Mass, 350.0)
        .with("lighting", Dimension::Dimensionless, 1.0);
    for i in 0..10 {
        for j in 0..10 {
            let (u, vv) = (i as f64 / 9.0, j as f64 / 9.0);
            let params = base.clone().with("place_u", Dimension::Dimensionless, u).with("place_v", Dimension::Dimensionless, vv);
            let scene = instantiate_scene(TwinKind::TabletopPlacement.template(), &params, "grid", 0).map_err(|e| e.to_string())?;
            let (x, y) = (r + u * (w - 2.0 * r), r + vv * (d - 2.0 * r));
            let got = scene.tabletop().unwrap().object.center;
            check(got == (x, y), || format!("cell ({i}, {j}): center {got:?} vs ({x}, {y})"))?;
            let hand = x.min(w - x).min(y).min(d - y) - r;
            let clearance = edge_clearance(&scene).unwrap();
            check(clearance == hand, || format!("cell ({i}, {j}): {clearance} vs {hand}"))?;
        }
    }
    Ok(format!("100 instances, worst deviation {worst:.2e} cm from the 10^4 x 10^4 grid; 100 grid cells exact"))
}

/// First whole second at which the ramp has reached the threshold.
fn stepped_crossing(th: &ThermalScene, limit: u64) -> Option<u64> {
    (0..=limit).find(|&k| th.t0 + (th.heat_rate - th.cooling_rate) * k as f64 >= th.threshold)
}

// 6. Exceedance time against 1 s stepping.
fn thermal_closed_form(_ctx: &mut Ctx) -> Outcome {
    let mut rng = derive_rng(0, "acceptance.thermal", 0);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let t0 = uniform(&mut rng, 10.0, 40.0);
        let cool = uniform(&mut rng, 0.0, 0.1);
        let th = ThermalScene {
            t0,
            heat_rate: cool + uniform(&mut rng, 0.005, 0.2),
            cooling_rate: cool,
            threshold: t0 + uniform(&mut rng, 1.0, 60.0),
            horizon: 1.0e6,
        };
        let got = exceedance_time(&th).ok_or_else(|| format!("case {k}: no exceedance"))?;
        let step = stepped_crossing(&th, 1_000_000).unwrap() as f64;
        let closed = (th.threshold - th.t0) / (th.heat_rate - th.cooling_rate);
        check(got <= step && step - got <= 1.0, || format!("case {k}: {got} s vs first step {step} s"))?;
        check((got - closed).abs() <= 1.0, || format!("case {k}: {got} vs closed form {closed}"))?;
        worst = worst.max(step - got);
    }
    for k in 0..100 {
        let heat = uniform(&mut rng, 0.0, 0.1);
        let cool = if k % 4 == 0 { heat } else { heat + uniform(&mut rng, 0.0, 0.1) };
        let t0 = uniform(&mut rng, 10.0, 40.0);
        let th = ThermalScene { t0, heat_rate: heat, cooling_rate: cool, threshold: t0 + uniform(&mut rng, 0.5, 60.0), horizon: 1.0e6 };
        check(exceedance_time(&th).is_none(), || format!("net {} reported an exceedance", heat - cool))?;
        check(stepped_crossing(&th, 10_000).is_none(), || "stepping oracle crossed".to_string())?;
    }
    Ok(format!("100 crossings within one step (largest gap {worst:.3} s); 100 non-positive ramps none"))
}

// 7. Analytic gradient against central differences.
fn gradient_check(_ctx: &mut Ctx) -> Outcome {
    const FLOOR: f64 = 1e-5;
    let mut rng = derive_rng(0, "acceptance.gradient", 0);
    let width = EnvelopeModel::zero(0.5).weights.len();
    let (mut worst_rel, mut worst_abs): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let mut model = EnvelopeModel::zero(0.5);
        for (w, s) in model.weights.iter_mut().zip(model.stats.iter_mut()) {
            *w = rng.next_normal(0.0, 1.0);
            s.mean = rng.next_normal(0.0, 2.0);
            s.std = uniform(&mut rng, 0.5, 4.0);
        }
        model.bias = rng.next_normal(0.0, 1.0);
        let rows = 1 + (rng.next_u64() % 64) as usize;
        let features = (0..rows).map(|_| (0..width).map(|_| rng.next_normal(0.0, 3.0)).collect()).collect();
        let labels = (0..rows).map(|_| f64::from(u8::from(rng.next_unit() < 0.5))).collect();
        let batch = Batch { features, labels };
        let l2 = [0.0, 1e-4, 1e-2][k % 3];

        let analytic = gradient(&model, &batch, l2).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let numeric = |perturb: &dyn Fn(&mut EnvelopeModel, f64)| {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            perturb(&mut plus, h);
            perturb(&mut minus, -h);
            (loss(&plus, &batch, l2).unwrap() - loss(&minus, &batch, l2).unwrap()) / (2.0 * h)
        };
        let mut pairs: Vec<(f64, f64)> = (0..width)
            .map(|j| (analytic.weights[j], numeric(&|m: &mut EnvelopeModel, d| m.weights[j] += d)))
            .collect();
        pairs.push((analytic.bias, numeric(&|m: &mut EnvelopeModel, d| m.bias += d)));
        for (a, n) in pairs {
            let abs = (a - n).abs();
            worst_abs = worst_abs.max(abs);
            worst_rel = worst_rel.max(abs / a.abs().max(n.abs()).max(FLOOR));
        }
    }
    check(worst_rel < 1e-6, || format!("max relative error {worst_rel:.3e} (abs {worst_abs:.3e})"))?;
    Ok(format!("max relative error {worst_rel:.2e}, max absolute error {worst_abs:.2e} over 100 cases"))
}

const TRAIN_LR: &str = "1.0";
const TRAIN_EPOCHS: &str = "1000";

fn generate_and_train(ctx: &Ctx, name: &str, sigma: &str) -> Result<(PathBuf, Duration, EvalMetrics), String> {
    let out = ctx.dir(name);
    let src = ctx.scenario("kindergarten.hsl");
    hazgen_ok(
        ctx,
        &["generate", path_str(&src), "--out", path_str(&out), "--seed", "0", "--count", "10000", "--threads", "1", "--sensor-sigma", sigma],
    )?;
    let (_, train_time) = hazgen_ok(ctx, &["train", "--data", path_str(&out), "--lr", TRAIN_LR, "--epochs", TRAIN_EPOCHS])?;
    let (stdout, _) = hazgen_ok(ctx, &["evaluate", "--data", path_str(&out), "--partition", "test"])?;
    let metrics: EvalMetrics = serde_json::from_str(&stdout).map_err(|e| format!("evaluate output: {e}"))?;
    Ok((out, train_time, metrics))
}

/// Best test accuracy of any rule `observed_clearance < t` or `>= t`.
fn sweep_oracle(dir: &Path) -> Result<f64, String> {
    let (manifest, records) = verify_manifest(&manifest_path(&dir.join("edge_placement.jsonl"))).map_err(|e| e.to_string())?;
    let test = partition_records(&manifest, &records, Partition::Test).map_err(|e| e.message)?;
    let mut rows: Vec<(f64, bool)> = test
        .iter()
        .filter(|r| !r.is_skipped())
        .map(|r| (r.observed("observed_clearance").unwrap(), r.flag("edge_violation").unwrap()))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = rows.len();
    let total_pos = rows.iter().filter(|r| r.1).count();
    // Cut after position i: rows [0, i) are predicted positive.
    let (mut best, mut pos_below, mut i) = (0usize, 0usize, 0usize);
    loop {
        let neg_above = (n - i) - (total_pos - pos_below);
        let below_rule = pos_below + neg_above;
        best = best.max(below_rule).max(n - below_rule);
        if i == n {
            break;
        }
        // Ties move together so every cut is realizable by a threshold.
        let v = rows[i].0;
        while i < n && rows[i].0 == v {
            pos_below += usize::from(rows[i].1);
            i += 1;
        }
    }
    Ok(best as f64 / n as f64)
}

// 8. Envelope accuracy, noiseless and against the noisy threshold oracle.
fn envelope_learning(ctx: &mut Ctx) -> Outcome {
    let (clean, clean_time, clean_m) = generate_and_train(ctx, "envelope_clean", "0")?;
    ctx.clean_run = Some(clean);
    let clean_acc = clean_m.accuracy.unwrap_or(0.0);
    let (noisy, noisy_time, noisy_m) = generate_and_train(ctx, "envelope_noisy", "1")?;
    let noisy_acc = noisy_m.accuracy.unwrap_or(0.0);
    let oracle = sweep_oracle(&noisy)?;
    check(clean_acc >= 0.99, || format!("noiseless test accuracy {clean_acc:.4}"))?;
    check(clean_time < Duration::from_secs(10), || format!("training took {clean_time:?}"))?;
    check((noisy_acc - oracle).abs() <= 0.03, || format!("noisy accuracy {noisy_acc:.4} vs sweep oracle {oracle:.4}"))?;
    Ok(format!(
        "noiseless {clean_acc:.4} (train {:.2} s); noisy {noisy_acc:.4} vs oracle {oracle:.4} (train {:.2} s)",
        clean_time.as_secs_f64(),
        noisy_time.as_secs_f64()
    ))
}

fn clean_run(ctx: &mut Ctx) -> Result<PathBuf, String> {
    if let Some(dir) = &ctx.clean_run {
        return Ok(dir.clone());
    }
    let (dir, _, _) = generate_and_train(ctx, "envelope_clean", "0")?;
    ctx.clean_run = Some(dir.clone());
    Ok(dir)
}

// 9. Planner veto on noiseless observations.
fn override_end_to_end(ctx: &mut Ctx) -> Outcome {
    let dir = clean_run(ctx)?;
    let model = EnvelopeModel::load(&dir.join(MODEL_FILE)).map_err(|e| e.to_string())?;
    let table = Table { width: 120.0, depth: 80.0, height: 55.0 };
    let probe = |center: (f64, f64), want_clearance: f64| -> Result<(Decision, f64), String> {
        let t = TabletopScene::with_center(table, 3.0, 12.0, 350.0, center).map_err(|e| e.to_string())?;
        let scene = SceneInstance::new("edge_placement", 0, 1.0, SceneBody::Tabletop(t));
        check(edge_clearance(&scene).unwrap() == want_clearance, || format!("probe at {center:?}"))?;
        let obs = observe(&scene, &SensorModel::noiseless(), &mut derive_rng(0, "acceptance.probe", 0));
        let p = model.predict(&FeatureVector::from_observation(&obs)).map_err(|e| e.to_string())?;
        Ok((override_decision(&model, &obs, 0.5).map_err(|e| e.to_string())?, p))
    };
    let (near, p_near) = probe((8.0, 40.0), 5.0)?;
    let (far, p_far) = probe((33.0, 40.0), 30.0)?;
    check(near == Decision::Override, || format!("5 cm: {near:?} (p = {p_near:.4})"))?;
    check(far == Decision::Allow, || format!("30 cm: {far:?} (p = {p_far:.4})"))?;
    Ok(format!("5 cm -> override (p = {p_near:.4}); 30 cm -> allow (p = {p_far:.4})"))
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let path = entry.unwrap().path();
        fs::copy(&path, to.join(path.file_name().unwrap())).unwrap();
    }
}

/// Replaces one ASCII digit near the middle of the file with another digit.
fn corrupt_one_byte(path: &Path) {
    let mut bytes = fs::read(path).unwrap();
    let at = (bytes.len() / 2..bytes.len()).find(|&i| bytes[i].is_ascii_digit()).unwrap();
    bytes[at] = if bytes[at] == b'7' { b'3' } else { b'7' };
    fs::write(path, bytes).unwrap();
}

// 10. Report verifies the digest chain and catches tampering.
fn audit_chain(ctx: &mut Ctx) -> Outcome {
    let dir = clean_run(ctx)?;
    let (stdout, _) = hazgen_ok(ctx, &["report", "--data", path_str(&dir)])?;
    check(stdout.contains("chain verified"), || format!("report output:\n{stdout}"))?;

    let mut caught = Vec::new();
    for target in ["edge_placement.jsonl", REGISTRY_FILE, MODEL_FILE] {
        let copy = ctx.dir(&format!("tampered_{}", target.replace('.', "_")));
        copy_dir(&dir, &copy);
        corrupt_one_byte(&copy.join(target));
        let out = hazgen(ctx, &["report", "--data", path_str(&copy)]);
        let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        check(!out.status.success(), || format!("report accepted a corrupted {target}"))?;
        caught.push(format!("{target}: {}", stderr.trim().lines().last().unwrap_or("").split(']').next().unwrap_or("").trim_start_matches("hazgen: error[")));
    }
    Ok(format!("untouched chain verified; one-byte corruption caught ({})", caught.join(", ")))
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap();
    let mut ctx = Ctx { root, tmp: tempfile::tempdir().unwrap(), clean_run: None };
    let criteria: [Criterion; 10] = [
        ("edge-violation rate", edge_rate),
        ("determinism", determinism),
        ("parser corpus", parser_corpus),
        ("labeling oracle", labeling_oracle),
        ("geometry oracle", geometry_oracle),
        ("thermal closed form", thermal_closed_form),
        ("gradient check", gradient_check),
        ("envelope learning", envelope_learning),
        ("override end-to-end", override_end_to_end),
        ("audit chain", audit_chain),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut ctx))).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed in {:.1} s", criteria.len() - failed, criteria.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
