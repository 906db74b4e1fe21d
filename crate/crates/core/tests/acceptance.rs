//! The eight acceptance criteria, one line each. Exits non-zero if any fail.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use equicheck::analyzer::{analyze, check_layer};
use equicheck::config::builtins;
use equicheck::group::{act, act_spatial, GroupElement, GroupKind};
use equicheck::layers::{circle_crop, coset_maxpool, forward, global_avg_pool, relu, LayerKind, WeightInit};
use equicheck::metrics::{
    commutation_grid, equivariance_error, invariance_sweep, profile_equivariance, rotate_bilinear, Symmetry,
};
use equicheck::tensor::{make_feature_map, max_abs_diff, random_feature_map, FeatureMap};
use equicheck::{builtin, Result};

type Criterion = fn() -> Result<Outcome>;
type MapOp = fn(&FeatureMap) -> Result<FeatureMap>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn within(elapsed: Duration, budget: Duration) -> bool {
    elapsed < budget
}

fn theorem_equivalence() -> Result<Outcome> {
    let start = Instant::now();
    let rot = commutation_grid(Symmetry::Rotation, (2, 24), (1, 5), (1, 4))?;
    let mir = commutation_grid(Symmetry::Mirror, (2, 24), (1, 5), (1, 4))?;
    let elapsed = start.elapsed();
    let expected_cells: usize = (2..=24).map(|i: usize| i.min(5) * 4).sum();
    let mut mismatches = 0;
    for (a, b) in rot.cells.iter().zip(&mir.cells) {
        let predicted = (a.i - a.k) % a.s == 0;
        if (a.i, a.k, a.s) != (b.i, b.k, b.s) || a.verdict.holds != predicted || b.verdict.holds != a.verdict.holds {
            mismatches += 1;
        }
    }
    let pass = rot.cells.len() == expected_cells
        && mir.cells.len() == expected_cells
        && mismatches == 0
        && within(elapsed, Duration::from_secs(10));
    outcome(
        pass,
        format!("{expected_cells} cells per symmetry, {mismatches} mismatches, {elapsed:.2?}"),
    )
}

fn index_arithmetic() -> Result<Outcome> {
    let toy33 = check_layer(33, 3, 2, 0)?;
    let toy32 = check_layer(32, 3, 2, 0)?;
    let pool5 = check_layer(5, 2, 2, 0)?;
    outcome(
        toy33 && !toy32 && !pool5,
        format!("33,k3,s2 → {toy33}; 32,k3,s2 → {toy32}; 5,k2,s2 → {pool5}"),
    )
}

fn p4cnn_sizes() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = builtin("p4cnn").expect("p4cnn is built in");
    let r27 = analyze(&cfg.layers, 27)?;
    let r28 = analyze(&cfg.layers, 28)?;
    let r29 = analyze(&cfg.layers, 29)?;
    let elapsed = start.elapsed();
    let at_pool = |v: &[usize]| {
        v.len() == 1 && cfg.layers[v[0]].kind == LayerKind::MaxPool && cfg.layers[v[0]].s == 2
    };
    let pass = r28.exact
        && !r27.exact
        && !r29.exact
        && at_pool(&r27.violations)
        && at_pool(&r29.violations)
        && within(elapsed, Duration::from_secs(1));
    outcome(
        pass,
        format!(
            "27 exact={} {:?}, 28 exact={}, 29 exact={} {:?}, {elapsed:.2?}",
            r27.exact, r27.violations, r28.exact, r29.exact, r29.violations
        ),
    )
}

fn exact_zero() -> Result<Outcome> {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut nonzero = 0usize;
    let mut names = Vec::new();
    for cfg in builtins() {
        if !analyze(&cfg.layers, cfg.side())?.exact {
            continue;
        }
        names.push(cfg.name.clone());
        let elements = GroupKind::P4.elements();
        for seed in 0..5u64 {
            let net = cfg.build(WeightInit {
                seed,
                integer_valued: true,
            })?;
            let profile = profile_equivariance(&net, &cfg.name, seed, &elements, true)?;
            for e in profile.entries.iter().filter(|e| e.group_valued) {
                checked += 1;
                if e.error != 0.0 {
                    nonzero += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        checked > 0 && nonzero == 0 && within(elapsed, Duration::from_secs(30)),
        format!(
            "{} ({checked} group-valued depths × elements, {nonzero} non-zero), {elapsed:.2?}",
            names.join(", ")
        ),
    )
}

fn final_discrepancy(side: usize, seed: u64) -> Result<f64> {
    let cfg = builtin("toy41").expect("toy41 is built in").with_input_size(side);
    let net = cfg.build(WeightInit {
        seed,
        integer_valued: true,
    })?;
    let x = net.random_input(seed, true)?;
    let rotated = act_spatial(GroupElement::R, &x)?;
    let a = forward(&net, &x)?.pop().expect("output");
    let b = forward(&net, &rotated)?.pop().expect("output");
    max_abs_diff(&a, &b)
}

fn broken_equivariance() -> Result<Outcome> {
    let mut broken = 0;
    let mut exact_nonzero = 0;
    for seed in 0..10u64 {
        if final_discrepancy(32, seed)? > 0.0 {
            broken += 1;
        }
        if final_discrepancy(33, seed)? != 0.0 {
            exact_nonzero += 1;
        }
    }
    outcome(
        broken >= 1 && exact_nonzero == 0,
        format!("input 32: {broken}/10 seeds differ; input 33: {exact_nonzero}/10 seeds differ"),
    )
}

fn layer_commutation() -> Result<Outcome> {
    let kind = GroupKind::P4m;
    let layers: [(&str, MapOp); 4] = [
        ("relu", |x| Ok(relu(x))),
        ("coset_maxpool", coset_maxpool),
        ("global_avg_pool", |x| Ok(global_avg_pool(x))),
        ("circle_crop", circle_crop),
    ];
    let mut failures = Vec::new();
    for (name, f) in layers {
        for trial in 0..20u64 {
            let side = 5 + (trial as usize % 4);
            let x = random_feature_map(1000 + trial, 2, 8, side, side, true)?;
            let fx = f(&x)?;
            for g in kind.elements() {
                let lhs = f(&act(g, &x, kind)?)?;
                let rhs = act(g, &fx, kind)?;
                if lhs != rhs {
                    failures.push(format!("{name}/{g}/{trial}"));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("4 layers × 20 maps × 8 elements, {} mismatches {:?}", failures.len(), failures),
    )
}

fn bilinear_consistency() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (seed, side) in [(7u64, 7usize), (8, 8)] {
        let x = random_feature_map(seed, 1, 1, side, side, false)?;
        for q in 0..4u8 {
            let bil = rotate_bilinear(&x, 90.0 * q as f64)?;
            let exact = act_spatial(GroupElement::rotation(q), &x)?;
            worst = worst.max(max_abs_diff(&bil, &exact)?);
        }
    }
    let cfg = builtin("toy41").expect("toy41 is built in");
    let net = cfg.build(WeightInit {
        seed: 3,
        integer_valued: false,
    })?;
    let at_zero = invariance_sweep(&net, 3, &[0.0], false)?[0].discrepancy;
    outcome(
        worst <= 1e-9 && at_zero == 0.0,
        format!("max quarter-turn deviation {worst:e}, sweep at 0° = {at_zero:e}"),
    )
}

fn error_unit_check() -> Result<Outcome> {
    let zeros = make_feature_map(1, 4, 2, 2, 0.0)?;
    let ones = make_feature_map(1, 4, 2, 2, 1.0)?;
    let eps = equivariance_error(&zeros, &ones)?;
    outcome(eps == 0.25, format!("ε = {eps}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("theorem equivalence", theorem_equivalence),
        ("index arithmetic", index_arithmetic),
        ("p4cnn input sizes", p4cnn_sizes),
        ("exact-equivariance zero test", exact_zero),
        ("broken equivariance", broken_equivariance),
        ("layer commutation", layer_commutation),
        ("bilinear consistency", bilinear_consistency),
        ("error unit check", error_unit_check),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("[{}] {}. {name}: {detail}", if pass { "PASS" } else { "FAIL" }, n + 1);
    }
    println!("acceptance: {}/8 passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
