//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::{Duration, Instant};

use qlocal::cli::{run, CommandKind, RunConfig};
use qlocal::concentration::{F_and_sstar, F_tilde};
use qlocal::ensembles::{ensemble_experiment, ising_chain, EnsembleRow, ExperimentConfig};
use qlocal::entropy::{tci_rhs, TciParams};
use qlocal::geometry::Geometry;
use qlocal::observable::{assemble, center, center_product, LocalObservable};
use qlocal::random::{instance_rng, random_density, random_local_observable, random_product_factors};
use qlocal::tensor::{c64, operator_norm, trace_norm, DenseOperator};
use qlocal::w1::{dual_witness_value, w1_bounds, w1_primal};
use rand::Rng;
use serde_json::Value;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn report(id: usize, name: &str, elapsed: Duration, v: &Verdict) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {id}. {name} ({:.1}s): {}", elapsed.as_secs_f64(), v.detail);
}

fn chain(n: usize) -> Geometry {
    Geometry::chain(n, 2).unwrap()
}

fn relocate(op: &DenseOperator, offset: usize) -> DenseOperator {
    let support = (offset..offset + op.support().len()).collect();
    DenseOperator::density(op.matrix().clone(), support, op.q()).unwrap()
}

// ---------------------------------------------------------------------------

fn conc_verify_bytes() -> (Vec<u8>, i32, Duration) {
    let mut cfg = RunConfig::new(CommandKind::ConcVerify);
    cfg.seed = Some(42);
    cfg.instances = Some(200);
    cfg.a_grid = Some("0.02:0.3:10".to_string());
    let start = Instant::now();
    let out = run(&cfg);
    assert!(out.error.is_none(), "conc-verify failed: {:?}", out.error);
    (out.output, out.exit_code, start.elapsed())
}

fn rows_of(doc: &Value) -> &Vec<Value> {
    doc["result"]["rows"].as_array().expect("rows array")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} is not a number"))
}

fn concentration_soundness(doc: &Value, elapsed: Duration) -> Verdict {
    let rows = rows_of(doc);
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    let mut shape_ok = rows.len() == 2000;
    for r in rows {
        let n = r["n"].as_u64().unwrap();
        let k = r["k_drawn"].as_u64().unwrap();
        shape_ok &= (4..=10).contains(&n) && (k == 1 || k == 2);
        let exact = num(r, "exact_tail");
        for key in ["bound_optimal", "bound_explicit"] {
            let slack = num(r, key) - exact;
            min_slack = min_slack.min(slack);
            if slack < -1e-12 {
                violations += 1;
            }
        }
    }
    let fast = elapsed <= Duration::from_secs(300);
    verdict(
        violations == 0 && shape_ok && fast,
        format!("{} rows, {violations} violations, min slack {min_slack:.3e}, {:.0}s", rows.len(), elapsed.as_secs_f64()),
    )
}

fn mgf_soundness(doc: &Value) -> Verdict {
    let rows = rows_of(doc);
    let tol = 1e-9f64.ln_1p();
    let mut violations = 0;
    let mut ordering = 0;
    let mut worst = f64::NEG_INFINITY;
    for r in rows {
        let exact = num(r, "log_exact_mgf");
        let termwise = num(r, "log_mgf_termwise");
        let klocal = num(r, "log_mgf_klocal");
        worst = worst.max(exact - termwise.min(klocal));
        if exact > termwise + tol || exact > klocal + tol {
            violations += 1;
        }
        if termwise > klocal + 1e-12 * klocal.abs().max(1.0) {
            ordering += 1;
        }
    }
    verdict(
        violations == 0 && ordering == 0,
        format!("{violations} MGF violations, {ordering} ordering violations, worst log excess {worst:.3e}"),
    )
}

// ---------------------------------------------------------------------------

/// Direct maximization of `s x - s(e^s - 1) + s²/2` on a grid of step `1e-5`.
fn grid_f(x: f64) -> f64 {
    let top = 1.0 + x.ln_1p();
    let steps = (top / 1e-5).ceil() as usize;
    (0..=steps)
        .map(|i| {
            let s = i as f64 * 1e-5;
            s * x - s * s.exp_m1() + 0.5 * s * s
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn f_machinery() -> Verdict {
    let e = std::f64::consts::E;
    let (f0, _) = F_and_sstar(0.0).unwrap();
    let x1 = 2.0 * (e - 1.0);
    let (f1, s1) = F_and_sstar(x1).unwrap();
    let anchor0 = f0.abs() <= 1e-12;
    let anchor1 = (f1 - (x1 - e + 1.5)).abs() <= 1e-9 && (s1 - 1.0).abs() <= 1e-9;

    let mut below = 0;
    for i in 1..=100 {
        let x = 0.2 * i as f64;
        if F_and_sstar(x).unwrap().0 < 0.5 * x.ln_1p().powi(2) || F_tilde(x).unwrap() > F_and_sstar(x).unwrap().0 {
            below += 1;
        }
    }
    let mut worst = 0.0f64;
    for i in 1..=20 {
        let x = i as f64;
        worst = worst.max((F_and_sstar(x).unwrap().0 - grid_f(x)).abs());
    }
    verdict(
        anchor0 && anchor1 && below == 0 && worst <= 1e-6,
        format!("F(0)={f0:.1e}, F(2(e-1)) err {:.1e}, s* err {:.1e}, {below} lower-bound failures, grid gap {worst:.2e}",
            f1 - (x1 - e + 1.5), s1 - 1.0),
    )
}

// ---------------------------------------------------------------------------

fn w1_anchors(elapsed_budget: Duration) -> Verdict {
    let start = Instant::now();
    let mut failures: Vec<String> = Vec::new();

    // Hamming recovery at n = 3
    let mut worst_hamming = 0.0f64;
    for k in 1..=3 {
        for x in 0..8usize {
            for y in 0..8usize {
                let bits = |v: usize| vec![(v >> 2) & 1, (v >> 1) & 1, v & 1];
                let rho = DenseOperator::basis_state(&bits(x), vec![0, 1, 2], 2).unwrap();
                let sigma = DenseOperator::basis_state(&bits(y), vec![0, 1, 2], 2).unwrap();
                let value = w1_primal(&rho, &sigma, k, &chain(3)).unwrap().value;
                worst_hamming = worst_hamming.max((value - (x ^ y).count_ones() as f64).abs());
            }
        }
    }
    if worst_hamming > 1e-9 {
        failures.push(format!("hamming error {worst_hamming:.2e}"));
    }

    let mut rng = instance_rng(7, 0);

    // single site: half the trace norm of the difference
    let mut worst_single = 0.0f64;
    for _ in 0..50 {
        let rho = random_density(&mut rng, 1, 2, 2).unwrap();
        let sigma = random_density(&mut rng, 1, 2, 1).unwrap();
        let value = w1_primal(&rho, &sigma, 1, &chain(1)).unwrap().value;
        worst_single = worst_single.max((value - 0.5 * trace_norm(&rho.sub(&sigma).unwrap()).unwrap()).abs());
    }
    if worst_single > 1e-9 {
        failures.push(format!("n = 1 error {worst_single:.2e}"));
    }

    // additivity over tensor products
    let mut worst_add = 0.0f64;
    for _ in 0..50 {
        let na = rng.random_range(1..=2);
        let nb = rng.random_range(1..=2);
        let k = rng.random_range(1..=na + nb);
        let (ra, sa) = (random_density(&mut rng, na, 2, 2).unwrap(), random_density(&mut rng, na, 2, 2).unwrap());
        let (rb, sb) = (random_density(&mut rng, nb, 2, 2).unwrap(), random_density(&mut rng, nb, 2, 2).unwrap());
        let joint_r = ra.kron(&relocate(&rb, na)).unwrap();
        let joint_s = sa.kron(&relocate(&sb, na)).unwrap();
        let whole = w1_primal(&joint_r, &joint_s, k, &chain(na + nb)).unwrap().value;
        let parts = w1_primal(&ra, &sa, k.min(na), &chain(na)).unwrap().value
            + w1_primal(&rb, &sb, k.min(nb), &chain(nb)).unwrap().value;
        worst_add = worst_add.max((whole - parts).abs());
    }
    if worst_add > 1e-8 {
        failures.push(format!("additivity error {worst_add:.2e}"));
    }

    // sandwich
    let mut sandwich_bad = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let k = rng.random_range(1..=n);
        let rank = rng.random_range(1..=4);
        let rho = random_density(&mut rng, n, 2, rank).unwrap();
        let sigma = random_density(&mut rng, n, 2, 2).unwrap();
        let value = w1_primal(&rho, &sigma, k, &chain(n)).unwrap().value;
        let (lo, hi) = w1_bounds(&rho, &sigma, k).unwrap();
        if !(lo <= value + 1e-9 && value <= hi + 1e-9) {
            sandwich_bad += 1;
        }
    }
    if sandwich_bad > 0 {
        failures.push(format!("{sandwich_bad} sandwich violations"));
    }

    // weak duality against random unit-local-norm witnesses
    let mut duality_bad = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=4);
        let k = rng.random_range(1..=n);
        let rho = random_density(&mut rng, n, 2, 2).unwrap();
        let sigma = random_density(&mut rng, n, 2, 3).unwrap();
        let h = random_local_observable(&mut rng, n, 2, k).unwrap();
        let h = h.scaled(1.0 / h.local_norm());
        let value = w1_primal(&rho, &sigma, h.locality(), &chain(n)).unwrap().value;
        if dual_witness_value(&rho, &sigma, &h).unwrap() > value + 1e-8 {
            duality_bad += 1;
        }
    }
    if duality_bad > 0 {
        failures.push(format!("{duality_bad} weak-duality violations"));
    }

    let elapsed = start.elapsed();
    if elapsed > elapsed_budget {
        failures.push(format!("took {:.0}s", elapsed.as_secs_f64()));
    }
    let detail = if failures.is_empty() {
        format!("hamming {worst_hamming:.1e}, n=1 {worst_single:.1e}, additivity {worst_add:.1e}, sandwich and duality clean")
    } else {
        failures.join("; ")
    };
    verdict(failures.is_empty(), detail)
}

fn ghz(sign: f64) -> DenseOperator {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = vec![c64::new(0.0, 0.0); 8];
    psi[0] = c64::new(h, 0.0);
    psi[7] = c64::new(sign * h, 0.0);
    DenseOperator::pure_state(&psi, vec![0, 1, 2], 2).unwrap()
}

fn marginal_blindness() -> Verdict {
    let (even, odd) = (ghz(1.0), ghz(-1.0));
    let r = w1_primal(&even, &odd, 2, &chain(3)).unwrap();
    let distinct = trace_norm(&even.sub(&odd).unwrap()).unwrap();
    verdict(r.value <= 1e-9 && distinct > 1.0, format!("W1 = {:.2e}, trace norm of difference {distinct:.3}", r.value))
}

// ---------------------------------------------------------------------------

fn local_norm_lemmas() -> Verdict {
    let mut rng = instance_rng(11, 0);
    let mut width_bad = 0;
    let mut center_bad = 0;
    let mut worst_width = f64::NEG_INFINITY;
    let mut worst_center = f64::NEG_INFINITY;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=3usize).min(n);
        let h = random_local_observable(&mut rng, n, 2, k).unwrap();
        let l = h.local_norm();
        let full = assemble(&h).unwrap();
        let spec = qlocal::tensor::herm_spectrum(&full).unwrap();
        let mid = 0.5 * (spec.eigenvalues[0] + spec.eigenvalues.last().unwrap());
        let shifted = full.add_scaled(&DenseOperator::identity(full.support().to_vec(), 2).unwrap(), -mid).unwrap();
        let excess = 2.0 * operator_norm(&shifted).unwrap() - n as f64 * l;
        worst_width = worst_width.max(excess);
        if excess > 1e-8 {
            width_bad += 1;
        }

        let mixed = DenseOperator::maximally_mixed((0..n).collect(), 2).unwrap();
        let factors = random_product_factors(&mut rng, n, 2, 0.5).unwrap();
        for centered in [center(&h, &mixed).unwrap(), center_product(&h, &factors).unwrap()] {
            for v in 0..n {
                let touching: f64 = centered
                    .terms()
                    .iter()
                    .filter(|t| t.region().contains(&v))
                    .map(|t| operator_norm(t.operator()).unwrap())
                    .sum();
                worst_center = worst_center.max(touching - l);
                if touching > l + 1e-8 {
                    center_bad += 1;
                }
            }
        }
    }
    verdict(
        width_bad == 0 && center_bad == 0,
        format!("width excess max {worst_width:.3e} ({width_bad} bad), centered per-site excess max {worst_center:.3e} ({center_bad} bad)"),
    )
}

// ---------------------------------------------------------------------------

fn tfim_rows() -> (Vec<EnsembleRow>, Duration) {
    let family = |n: usize| -> qlocal::Result<LocalObservable> { ising_chain(n, 1.0, 1.0) };
    let rule = |_: usize, norm: f64| norm / 4.0;
    let n_values = [4, 6, 8, 10];
    let start = Instant::now();
    let rows = ensemble_experiment(&ExperimentConfig { family: &family, beta: 0.5, delta_rule: &rule, n_values: &n_values, k: 2 })
        .unwrap();
    (rows, start.elapsed())
}

fn proof_side_bound(rows: &[EnsembleRow], elapsed: Duration) -> Verdict {
    let mut bad = Vec::new();
    let mut parts = Vec::new();
    for r in rows {
        let bound = (r.n as f64 * r.local_norm / r.delta + 1.0).ln() + 0.5 * r.delta;
        let ok = r.relative <= bound + 1e-8 && r.w.is_finite() && r.entropy.measured_lb <= r.relative + 1e-8;
        if !ok {
            bad.push(r.n);
        }
        parts.push(format!("n={} S={:.4}<= {:.4} w={:.4}", r.n, r.relative, bound, r.w));
    }
    let all_n = rows.iter().map(|r| r.n).collect::<Vec<_>>() == vec![4, 6, 8, 10];
    let fast = elapsed <= Duration::from_secs(600);
    verdict(bad.is_empty() && all_n && fast, format!("{}; failing n {bad:?}", parts.join(", ")))
}

fn tci_consistency(rows: &[EnsembleRow]) -> Verdict {
    let mut bad = Vec::new();
    let mut parts = Vec::new();
    for r in rows {
        let fit = match &r.correlation {
            Some(f) if f.xi.is_finite() => f,
            _ => {
                bad.push(r.n);
                continue;
            }
        };
        let Some(check) = r.tci.iter().find(|c| c.label == "dephased-energy") else {
            bad.push(r.n);
            continue;
        };
        let geom = chain(r.n);
        let params = TciParams { k: 2, ball_a: geom.ball_a(), d: geom.dim_d(), xi: fit.xi, t: check.t_auto };
        let rhs = tci_rhs(r.n, check.w, fit.c, &params).unwrap();
        if check.relative < rhs - 1e-6 {
            bad.push(r.n);
        }
        let others = r.tci.iter().filter(|c| c.label != "dephased-energy" && c.holds_auto).count();
        parts.push(format!(
            "n={} rel={:.2e} rhs={:.3} t={:.3} (other states hold {others}/{})",
            r.n,
            check.relative,
            rhs,
            check.t_auto,
            r.tci.len() - 1
        ));
    }
    verdict(bad.is_empty() && !rows.is_empty(), format!("{}; failing n {bad:?}", parts.join(", ")))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut all = true;
    let mut record = |id: usize, name: &str, elapsed: Duration, v: Verdict| {
        report(id, name, elapsed, &v);
        all &= v.pass;
    };

    let (first, code_first, t_first) = conc_verify_bytes();
    let doc: Value = serde_json::from_slice(&first).expect("conc-verify output is valid JSON");
    record(1, "concentration soundness (product)", t_first, concentration_soundness(&doc, t_first));
    let mut v2 = mgf_soundness(&doc);
    if code_first != 0 {
        v2.pass = false;
        v2.detail.push_str(&format!("; exit code {code_first}"));
    }
    record(2, "MGF soundness", Duration::ZERO, v2);

    let t = Instant::now();
    let v = f_machinery();
    record(3, "F machinery", t.elapsed(), v);

    let t = Instant::now();
    let v = w1_anchors(Duration::from_secs(120));
    record(4, "W1 exactness anchors", t.elapsed(), v);

    let t = Instant::now();
    let v = marginal_blindness();
    record(5, "marginal blindness", t.elapsed(), v);

    let t = Instant::now();
    let v = local_norm_lemmas();
    record(6, "local-norm lemmas", t.elapsed(), v);

    let (rows, t_rows) = tfim_rows();
    record(7, "ensemble relative-entropy bound", t_rows, proof_side_bound(&rows, t_rows));
    record(8, "transportation-cost consistency", Duration::ZERO, tci_consistency(&rows));

    let (second, code_second, t_second) = conc_verify_bytes();
    let same = first == second && code_first == code_second;
    record(9, "determinism", t_second, verdict(same, format!("{} bytes, identical: {same}", first.len())));

    if !all {
        std::process::exit(1);
    }
}
