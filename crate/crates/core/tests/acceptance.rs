//! Acceptance criteria 1-9, run in sequence with one PASS/FAIL line each.
//!
//! Runs are shared between criteria where the scenario coincides: the
//! reference run at h = 1/64 also serves the refinement study, both sweeps
//! and the determinism check.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tumorsim::io::config::load_config_with;
use tumorsim::io::Config;
use tumorsim::model::{source_terms, DrugResponse, ModelParams};
use tumorsim::oracle::{compare_to_oracle, mms_convergence, read_profile, MmsComponent};
use tumorsim::sim::{run, DiagnosticsRecord, RunOutput, RunSettings};

const BOUND_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-13;
const ENERGY_TOL: f64 = 1e-8;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str, overrides: &[String]) -> Config {
    load_config_with(&root().join("configs").join(name), overrides).expect("config loads")
}

struct Runs {
    /// `(label, diagnostics)` of every run, for the energy criterion.
    all: Vec<(String, Vec<DiagnosticsRecord>)>,
}

impl Runs {
    fn run(&mut self, label: &str, cfg: &Config, settings: &RunSettings) -> (RunOutput, f64) {
        let start = Instant::now();
        let out = run(&cfg.scenario, settings).expect("run starts");
        let secs = start.elapsed().as_secs_f64();
        println!("  [{label}: {} steps, {secs:.1} s]", out.diagnostics.len());
        if let Some(e) = &out.failure {
            println!("  [{label}: stopped early: {e}]");
        }
        self.all.push((label.to_string(), out.diagnostics.clone()));
        (out, secs)
    }
}

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(v: &Verdict) {
    println!("criterion {} ({}): {} | {}", v.id, v.name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn final_record(out: &RunOutput) -> DiagnosticsRecord {
    out.diagnostics.last().cloned().expect("at least one step")
}

fn bounds_ok(out: &RunOutput, params: &ModelParams, w_max: f64) -> (bool, String) {
    let rho = params.rho_f;
    let cb = params.c_bar;
    let mut worst = String::new();
    let mut ok = out.failure.is_none() && !out.diagnostics.is_empty();
    for r in &out.diagnostics {
        let checks = [
            ("P", r.min_P, r.max_P, rho),
            ("Q", r.min_Q, r.max_Q, rho),
            ("D", r.min_D, r.max_D, rho),
            ("C", r.min_C, r.max_C, cb),
            ("W", r.min_W, r.max_W, w_max),
        ];
        for (name, lo, hi, ceil) in checks {
            let tol = BOUND_TOL * ceil.max(1.0);
            if lo < -tol || hi > ceil + tol {
                ok = false;
                if worst.is_empty() {
                    worst = format!("{name} in [{lo:e}, {hi}] at step {}", r.step);
                }
            }
        }
    }
    (ok, worst)
}

fn criterion_1(runs: &mut Runs, reference: &Config) -> (Verdict, RunOutput) {
    let (out, secs) = runs.run("reference h=1/64", reference, &reference.run);
    let w_max = reference.scenario.drug_ceiling();
    let (ok, worst) = bounds_ok(&out, &reference.scenario.params, w_max);
    let pass = ok && secs <= 60.0;
    let detail = format!(
        "{} steps, bounds {}{}, runtime {secs:.1} s (limit 60 s)",
        out.diagnostics.len(),
        if ok { "held" } else { "broken: " },
        worst
    );
    (Verdict { id: 1, name: "bound suite", pass, detail }, out)
}

fn random_params(rng: &mut StdRng) -> ModelParams {
    let kinds = [DrugResponse::MichaelisMenten, DrugResponse::LinearCapped, DrugResponse::Logistic, DrugResponse::None];
    let mut u = |hi: f64| rng.gen_range(0.0..hi);
    ModelParams {
        k_b: u(20.0),
        k_q: u(5.0),
        k_a: u(5.0),
        k_p: u(5.0),
        k_d: u(5.0),
        k_r: u(5.0),
        k_1: u(5.0),
        k_2: u(5.0),
        mu_1: u(5.0),
        mu_2: u(5.0),
        i_1: u(5.0),
        i_2: u(5.0),
        c_bar: 0.1 + u(3.0),
        rho_f: 0.1 + u(3.0),
        mu: 1.0,
        k_perm: 1.0,
        nu_1: 1.0,
        nu_2: 1.0,
        eps_penalty: 1e-3,
        omega: 1e-2,
        eta: 0.0,
        g1: kinds[rng.gen_range(0..4)],
        g2: kinds[rng.gen_range(0..4)],
    }
}

fn criterion_2() -> Verdict {
    let mut rng = StdRng::seed_from_u64(20261017);
    let mut worst: f64 = 0.0;
    let samples = 200_000;
    for _ in 0..samples {
        let m = random_params(&mut rng);
        let mut parts: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = parts.iter().sum();
        parts.iter_mut().for_each(|x| *x *= m.rho_f / s);
        let (p, q, d) = (parts[0], parts[1], parts[2]);
        let c = rng.gen_range(0.0..=m.c_bar);
        let w = rng.gen_range(0.0..5.0);
        let g = source_terms(p, q, d, c, w, &m);
        let expected = m.k_b * c * p - m.k_r * d;
        let lack = m.c_bar - c;
        let scale = m.k_b * c * p
            + (m.k_q + m.k_a) * lack * p
            + m.k_p * c * q
            + m.k_d * lack * q
            + m.k_r * d
            + m.i_1 * m.g1.eval(w) * p
            + m.i_2 * m.g2.eval(w) * q;
        let err = (g[0] + g[1] + g[2] - expected).abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(err);
    }
    Verdict {
        id: 2,
        name: "source-sum identity",
        pass: worst <= IDENTITY_TOL,
        detail: format!("{samples} random samples, worst scaled error {worst:.2e} (limit {IDENTITY_TOL:e})"),
    }
}

fn criterion_3(runs: &mut Runs, reference: &Config, ref_out: &RunOutput) -> Verdict {
    let start = Instant::now();
    let mut h = Vec::new();
    let mut drift = Vec::new();
    for n in [64usize, 128, 256] {
        let out = if n == reference.scenario.grid.n_cells() {
            None
        } else {
            let cfg = config("reference.cfg", &[format!("grid.n_cells={n}")]);
            Some(runs.run(&format!("reference n={n}"), &cfg, &cfg.run).0)
        };
        let out = out.as_ref().unwrap_or(ref_out);
        h.push(2.0 / n as f64);
        drift.push(final_record(out).sum_drift);
    }
    let secs = start.elapsed().as_secs_f64();
    let order = slope(&h, &drift);
    let decreasing = drift.windows(2).all(|w| w[1] < w[0]);
    let pass = decreasing && order >= 1.0 && secs <= 600.0;
    Verdict {
        id: 3,
        name: "mixture drift under refinement",
        pass,
        detail: format!(
            "h = 1/32,1/64,1/128 drift [{}], order {order:.2} (need >= 1, decreasing), {secs:.0} s",
            fmt_list(&drift)
        ),
    }
}

struct Sweep {
    values: Vec<f64>,
    flux: Vec<f64>,
    leak_cells: Vec<f64>,
    leak_chem: Vec<f64>,
}

fn sweep(runs: &mut Runs, key: &str, values: &[f64], reuse: (f64, &RunOutput)) -> Sweep {
    let mut s = Sweep { values: values.to_vec(), flux: vec![], leak_cells: vec![], leak_chem: vec![] };
    for &v in values {
        let owned;
        let out = if v == reuse.0 {
            reuse.1
        } else {
            let cfg = config("reference.cfg", &[format!("{key}={v}")]);
            owned = runs.run(&format!("{key}={v}"), &cfg, &cfg.run).0;
            &owned
        };
        let last = final_record(out);
        s.flux.push(last.penalty_flux);
        s.leak_cells.push(last.leakage_cells);
        s.leak_chem.push(last.leakage_chem);
    }
    s
}

fn criterion_4(eps: &Sweep, secs: f64) -> Verdict {
    let k = slope(&eps.values, &eps.flux);
    Verdict {
        id: 4,
        name: "penalty-flux scaling",
        pass: (k - 1.0).abs() <= 0.2 && secs <= 300.0,
        detail: format!(
            "eps [{}] flux [{}], slope {k:.3} (need 1.0 +/- 0.2), {secs:.0} s",
            fmt_list(&eps.values),
            fmt_list(&eps.flux)
        ),
    }
}

fn criterion_5(eps: &Sweep, omega: &Sweep) -> Verdict {
    let parts = [
        ("eps cells", &eps.leak_cells),
        ("eps chem", &eps.leak_chem),
        ("omega cells", &omega.leak_cells),
        ("omega chem", &omega.leak_chem),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, v) in parts {
        let ok = nonincreasing(v);
        pass &= ok;
        detail.push(format!("{name} [{}] {}", fmt_list(v), if ok { "ok" } else { "NOT monotone" }));
    }
    Verdict { id: 5, name: "healthy-tissue vanishing", pass, detail: detail.join("; ") }
}

fn criterion_6(runs: &Runs) -> Verdict {
    let mut steps = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut where_ = String::new();
    for (label, recs) in &runs.all {
        for r in recs {
            steps += 1;
            for (name, rate, scale) in
                [("C", r.energy_rate_C, r.energy_scale_C), ("W", r.energy_rate_W, r.energy_scale_W)]
            {
                let rel = rate / scale.max(f64::MIN_POSITIVE);
                if rel > worst {
                    worst = rel;
                    where_ = format!("{name} in {label} step {}", r.step);
                }
            }
        }
    }
    Verdict {
        id: 6,
        name: "energy inequality",
        pass: steps > 0 && worst <= ENERGY_TOL,
        detail: format!(
            "{} runs, {steps} steps, worst scaled rate {worst:.2e} ({where_}, limit {ENERGY_TOL:e})",
            runs.all.len()
        ),
    }
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for c in [MmsComponent::Diffusion, MmsComponent::Advection, MmsComponent::Flow] {
        let r = mms_convergence(c, &c.default_levels()).expect("mms study runs");
        pass &= r.pass && r.order.is_some();
        detail.push(format!("{} {:.3}", c, r.order.unwrap_or(f64::NAN)));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 600.0;
    Verdict { id: 7, name: "MMS orders", pass, detail: format!("{}, {secs:.0} s", detail.join(", ")) }
}

fn criterion_8(runs: &mut Runs) -> Verdict {
    let baseline_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/radial_baseline.csv");
    let cfg = config("radial.cfg", &[]);
    let baseline = read_profile(&baseline_path, cfg.run.t_end).expect("baseline present");
    let (out, _) = runs.run("radial", &cfg, &cfg.run);
    let main = compare_to_oracle(&out.state, &baseline, 0.05).expect("comparable");
    let k_b = 2.0 * cfg.scenario.params.k_b;
    let bad = config("radial.cfg", &[format!("params.K_B={k_b}")]);
    let (out_bad, _) = runs.run("radial, K_B doubled", &bad, &bad.run);
    let control = compare_to_oracle(&out_bad.state, &baseline, 0.05).expect("comparable");
    let pass = out.failure.is_none() && main.pass && !control.pass;
    Verdict { id: 8, name: "oracle agreement", pass, detail: format!("{main}; negative control (K_B x2): {control}") }
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_9(runs: &mut Runs, reference: &Config) -> Verdict {
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut files = Vec::new();
    for k in 0..2 {
        let dir = tmp.path().join(format!("run{k}"));
        let settings = RunSettings { out_dir: Some(dir.clone()), deterministic: true, ..reference.run.clone() };
        runs.run(&format!("determinism {k}"), reference, &settings);
        files.push(read_dir_bytes(&dir));
    }
    let same = files[0] == files[1] && files[0].contains_key("diagnostics.csv") && files[0].len() > 1;
    Verdict {
        id: 9,
        name: "determinism",
        pass: same,
        detail: format!("{} files per run, {}", files[0].len(), if same { "bit-identical" } else { "differ" }),
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let reference = config("reference.cfg", &[]);
    let mut runs = Runs { all: Vec::new() };
    let mut verdicts = Vec::new();

    let (v1, ref_out) = criterion_1(&mut runs, &reference);
    report(&v1);
    verdicts.push(v1);

    let v2 = criterion_2();
    report(&v2);
    verdicts.push(v2);

    let v3 = criterion_3(&mut runs, &reference, &ref_out);
    report(&v3);
    verdicts.push(v3);

    let start = Instant::now();
    let eps = sweep(
        &mut runs,
        "numerics.eps_penalty",
        &[1e-1, 1e-2, 1e-3, 1e-4],
        (reference.scenario.params.eps_penalty, &ref_out),
    );
    let v4 = criterion_4(&eps, start.elapsed().as_secs_f64());
    report(&v4);
    verdicts.push(v4);

    let omega = sweep(&mut runs, "numerics.omega", &[1e-1, 1e-2, 1e-3], (reference.scenario.params.omega, &ref_out));
    let v5 = criterion_5(&eps, &omega);
    report(&v5);
    verdicts.push(v5);

    let v7 = criterion_7();
    let v8 = criterion_8(&mut runs);
    let v9 = criterion_9(&mut runs, &reference);

    let v6 = criterion_6(&runs);
    for v in [v6, v7, v8, v9] {
        report(&v);
        verdicts.push(v);
    }

    verdicts.sort_by_key(|v| v.id);
    println!("summary:");
    for v in &verdicts {
        println!("  criterion {}: {}", v.id, if v.pass { "PASS" } else { "FAIL" });
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
