//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line on stdout (bypassing the test harness capture) before asserting.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use gridgame::ceg::{run_controller_thm2, run_controller_thm4, run_gadgets_thm1, run_step1, CegEngine, ControlTrace};
use gridgame::constrained::{macc_cooperation, macc_defection, placements_up_to_symmetry, prop2_unreachability};
use gridgame::oracle::{build_support_graph, certify_as_convergence, classify_terminals, verify_thm3_basin};
use gridgame::payoff::parse_rational;
use gridgame::seg::{is_absorbing, random_initial, support};
use gridgame::{
    ControlField, FixedRect, FixedSet, ImitationRule, NodeId, PayoffMatrix, RngStream, RuleKind, SegEngine, Strategy,
    StrategyGrid, TorusDims,
};
use gridgame_cli::config::InitKind;
use gridgame_cli::experiment::{self, initial_state};
use gridgame_cli::presets::preset;
use gridgame_cli::{ExperimentConfig, SeedSpec, SnapshotSchedule};

fn report(n: u32, ok: bool, detail: impl AsRef<str>) {
    let line = format!("criterion {n}: {} {}\n", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {n} failed: {}", detail.as_ref());
}

fn dims(n: usize, m: usize) -> TorusDims {
    TorusDims::new(n, m).unwrap()
}

fn pd() -> PayoffMatrix {
    PayoffMatrix::from_integers(3, 0, 5, 1).unwrap()
}

fn snowdrift(c: &str) -> PayoffMatrix {
    PayoffMatrix::snowdrift_classic(parse_rational(c).unwrap()).unwrap()
}

fn rules(m: &PayoffMatrix) -> Vec<ImitationRule> {
    [RuleKind::Deterministic, RuleKind::Fermi { kappa: 0.1 }, RuleKind::Proportional]
        .into_iter()
        .map(|k| ImitationRule::new(k, m).unwrap())
        .collect()
}

#[test]
fn criterion_01_absorption_characterization() {
    let d = dims(3, 3);
    let mut failures = Vec::new();
    let mut absorbing = BTreeMap::new();
    for (name, m) in [("pd", pd()), ("snowdrift 0.76", snowdrift("0.76"))] {
        for rule in rules(&m) {
            let g = build_support_graph(d, &m, &rule, None).unwrap();
            let mut count = 0;
            for x in 0..512u64 {
                let engine_says = is_absorbing(&StrategyGrid::from_state_index(d, x), &m);
                let oracle_says = g.successors(x) == vec![x];
                count += engine_says as usize;
                if engine_says != oracle_says {
                    failures.push(format!("{name} {} state {x}", rule.kind()));
                }
            }
            absorbing.insert(name, count);
        }
    }
    report(1, failures.is_empty(), format!("512 states x 2 matrices x 3 rules, absorbing counts {absorbing:?}, mismatches {failures:?}"));
}

#[test]
fn criterion_02_dilemma_certified_on_tiny_grids() {
    let mut detail = Vec::new();
    let mut ok = true;
    for (n, m) in [(3, 3), (3, 4)] {
        for rule in rules(&pd()) {
            let g = build_support_graph(dims(n, m), &pd(), &rule, None).unwrap();
            let c = certify_as_convergence(&g);
            ok &= c.converges;
            detail.push(format!("{n}x{m} {}: {}", rule.kind(), if c.converges { "certified" } else { "witness found" }));
        }
    }
    ok &= pd().check_conditions().thm1_ok;
    report(2, ok, detail.join(", "));
}

#[test]
fn criterion_03_snowdrift_certified_on_tiny_grids() {
    let mut detail = Vec::new();
    let mut ok = true;
    for c in ["0.8", "0.76"] {
        let m = snowdrift(c);
        let [p1, p2, p3, p4] = m.entries();
        let exact = p1 + p2 < p3 + p4 && p2 * 4 < p3 + p4 * 3 && m.check_conditions().thm2_ok;
        ok &= exact;
        for (n, mm) in [(3, 3), (3, 4)] {
            for rule in rules(&m) {
                let g = build_support_graph(dims(n, mm), &m, &rule, None).unwrap();
                let cert = certify_as_convergence(&g);
                ok &= cert.converges;
                if !cert.converges {
                    detail.push(format!("c={c} {n}x{mm} {} has a non-absorbing closed class", rule.kind()));
                }
            }
        }
        detail.push(format!("c={c} conditions {}", if exact { "hold" } else { "fail" }));
    }
    report(3, ok, detail.join(", "));
}

#[test]
fn criterion_04_terminals_are_consensus() {
    let d = dims(3, 3);
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, m) in [("pd", pd()), ("snowdrift 0.8", snowdrift("0.8")), ("snowdrift 0.76", snowdrift("0.76"))] {
        let cor1 = m.check_conditions().cor1_ok;
        let g = build_support_graph(d, &m, &ImitationRule::deterministic(&m), None).unwrap();
        let t = classify_terminals(&g);
        ok &= cor1 && t.mixed.is_empty();
        detail.push(format!(
            "{name}: disjointness {}, {} mixed terminal(s)",
            if cor1 { "holds" } else { "FAILS" },
            t.mixed.len()
        ));
    }
    report(4, ok, detail.join("; "));
}

#[test]
fn criterion_05_controlled_steps_stay_in_support() {
    // Exhaustive: every state and every one of the 4^9 control fields on 3x3.
    let d = dims(3, 3);
    let mut violations = 0u64;
    let mut checked = 0u64;
    for m in [pd(), snowdrift("0.76")] {
        let rule = ImitationRule::deterministic(&m);
        let graph = build_support_graph(d, &m, &rule, None).unwrap();
        let eng = CegEngine::new(d, &m);
        for x in 0..512u64 {
            let g = StrategyGrid::from_state_index(d, x);
            let pay = eng.payoffs(g.cells());
            for code in 0..(1u32 << 18) {
                let dirs: Vec<u8> = (0..9).map(|k| ((code >> (2 * k)) & 3) as u8).collect();
                let field = ControlField::from_directions(d, dirs).unwrap();
                let next = eng.step(g.cells(), &pay, &field);
                let y = next.iter().enumerate().fold(0u64, |acc, (k, s)| acc | ((!s.is_c() as u64) << k));
                checked += 1;
                if !graph.is_successor(x, y) {
                    violations += 1;
                }
            }
        }
    }
    // Spot checks on 10x10 against the per-node support, every rule.
    let big = dims(10, 10);
    let mut rng = RngStream::new(5);
    let mut spot_bad = 0;
    for i in 0..10_000u64 {
        let m = if i % 2 == 0 { pd() } else { snowdrift("0.76") };
        let rule = &rules(&m)[(i % 3) as usize];
        let g = random_initial(big, &mut rng);
        let dirs: Vec<u8> = (0..100).map(|_| rng.neighbor_draw() as u8).collect();
        let field = ControlField::from_directions(big, dirs).unwrap();
        let next = gridgame::step_ceg(&g, &m, &field).unwrap();
        if !(0..100).all(|k| support(&g, &m, rule, big.from_index(k).unwrap()).contains(next.at(k))) {
            spot_bad += 1;
        }
    }
    report(
        5,
        violations == 0 && spot_bad == 0,
        format!("{checked} exhaustive 3x3 transitions, {violations} outside support; 10000 10x10 spot checks, {spot_bad} bad"),
    );
}

fn decreases_ok(t: &ControlTrace) -> bool {
    t.decrease_points.iter().all(|&(a, b)| t.state_at(b).n_c() < t.state_at(a).n_c())
}

#[test]
fn criterion_06_controller_bounds() {
    let d = dims(10, 10);
    let bound = 2 * (100 - 1);
    let (mut pd_bad, mut sd_bad, mut pd_max, mut sd_max) = (Vec::new(), Vec::new(), 0, 0);
    let sd = snowdrift("0.76");
    for seed in 0..1000u64 {
        let g = random_initial(d, &mut RngStream::new(seed));
        match run_step1(&g, &pd()).and_then(|s1| Ok((run_gadgets_thm1(s1.final_state(), &pd())?, s1))) {
            Ok((rest, s1)) => {
                let len = s1.len() + rest.len();
                pd_max = pd_max.max(len);
                let good = len <= bound
                    && decreases_ok(&s1)
                    && decreases_ok(&rest)
                    && s1.n_c_series().windows(2).all(|w| w[1] < w[0])
                    && is_absorbing(rest.final_state(), &pd())
                    && s1.verify(&pd()).is_ok()
                    && rest.verify(&pd()).is_ok();
                if !good {
                    pd_bad.push(seed);
                }
            }
            Err(e) => pd_bad.push({
                eprintln!("pd seed {seed}: {e}");
                seed
            }),
        }
        match run_controller_thm2(&g, &sd) {
            Ok(t) => {
                sd_max = sd_max.max(t.len());
                if !(t.len() <= bound && decreases_ok(&t) && is_absorbing(t.final_state(), &sd) && t.verify(&sd).is_ok()) {
                    sd_bad.push(seed);
                }
            }
            Err(e) => sd_bad.push({
                eprintln!("snowdrift seed {seed}: {e}");
                seed
            }),
        }
    }
    report(
        6,
        pd_bad.is_empty() && sd_bad.is_empty(),
        format!(
            "1000 seeds each; dilemma max {pd_max} steps, {} bad; snowdrift 0.76 max {sd_max} steps, {} bad; bound {bound}",
            pd_bad.len(),
            sd_bad.len()
        ),
    );
}

#[test]
fn criterion_07_cooperative_square() {
    let m = PayoffMatrix::stag_hunt(parse_rational("0.3").unwrap()).unwrap();
    let mut ok = m.check_conditions().thm3_ok;
    let mut detail = Vec::new();
    for (n, mm) in [(3, 3), (3, 4)] {
        for rule in rules(&m) {
            let g = build_support_graph(dims(n, mm), &m, &rule, None).unwrap();
            let basin = verify_thm3_basin(&g);
            ok &= basin;
            if !basin {
                detail.push(format!("{n}x{mm} {} basin fails", rule.kind()));
            }
        }
    }
    let d = dims(10, 10);
    let rule = ImitationRule::deterministic(&m);
    let eng = SegEngine::new(d, &m, &rule).unwrap();
    let mut hits = 0;
    let mut slowest = 0;
    for seed in 0..200u64 {
        let mut rng = RngStream::new(seed);
        let init = initial_state(InitKind::CSquare, d, None, &mut rng).unwrap();
        let r = eng.run_quiet(init, &mut rng, 1000);
        if r.terminal == gridgame::TerminalClass::AllC {
            hits += 1;
            slowest = slowest.max(r.steps.unwrap_or(0));
        }
    }
    ok &= hits == 200;
    detail.push(format!("oracle basin on 3x3/3x4 x 3 rules; 10x10 {hits}/200 all-C within 1000 (slowest {slowest})"));
    report(7, ok, detail.join(", "));
}

fn family_runs(name: &str, budget: usize) -> Vec<(String, Vec<Option<usize>>)> {
    let mut cfg = preset(name).unwrap();
    cfg.seeds = SeedSpec::Range { start: 0, end: 100 };
    cfg.max_steps = Some(budget);
    experiment::run_all(&cfg, None, 0)
        .unwrap()
        .into_iter()
        .map(|(p, recs)| (p.param.unwrap(), recs.iter().map(|r| r.steps).collect()))
        .collect()
}

fn fraction_within(steps: &[Option<usize>], budget: usize) -> f64 {
    steps.iter().filter(|s| s.is_some_and(|t| t <= budget)).count() as f64 / steps.len() as f64
}

#[test]
fn criterion_08_critical_values() {
    const SHORT: usize = 10_000;
    let sd = family_runs("snowdrift-critical", 1_000_000);
    let hd = family_runs("hawkdove-critical", SHORT);
    let ch = family_runs("chicken-critical", SHORT);
    let f = |runs: &[(String, Vec<Option<usize>>)], i: usize| fraction_within(&runs[i].1, SHORT);
    let long_fail = sd[0].1.iter().filter(|s| s.is_none()).count() as f64 / 100.0;
    let snow_ok = f(&sd, 1) > f(&sd, 0) && f(&sd, 2) > f(&sd, 0) && long_fail >= 0.9;
    let hawk_ok = f(&hd, 2) > f(&hd, 0) && f(&hd, 2) > f(&hd, 1);
    let chick_ok = f(&ch, 1) > f(&ch, 0) && f(&ch, 2) > f(&ch, 0);
    let fmt = |runs: &[(String, Vec<Option<usize>>)]| {
        runs.iter().map(|(p, s)| format!("{p}:{:.2}", fraction_within(s, SHORT))).collect::<Vec<_>>().join(" ")
    };
    report(
        8,
        snow_ok && hawk_ok && chick_ok,
        format!(
            "snowdrift [{}] 0.74 timeouts at 1e6 {:.2} ({}); hawk-dove [{}] ({}); chicken [{}] ({})",
            fmt(&sd),
            long_fail,
            if snow_ok { "ok" } else { "violated" },
            fmt(&hd),
            if hawk_ok { "ok" } else { "violated" },
            fmt(&ch),
            if chick_ok { "ok" } else { "violated" },
        ),
    );
}

#[test]
fn criterion_09_single_fixed_defector() {
    let d = dims(5, 5);
    let fixed = FixedSet::fixed_d([NodeId::new(3, 3)]);
    let rule = ImitationRule::deterministic(&pd());
    let seeds: Vec<u64> = (0..200).collect();
    let s = macc_defection(d, &pd(), &rule, &seeds, 10_000, &fixed).unwrap();
    let small = dims(3, 3);
    let mut exact = true;
    for rule in rules(&pd()) {
        let g = build_support_graph(small, &pd(), &rule, Some(&FixedSet::fixed_d([NodeId::new(1, 1)]))).unwrap();
        exact &= g.almost_surely_reaches(511, |_| true);
    }
    report(
        9,
        s.successes() == 200 && exact,
        format!(
            "5x5 {}/200 all-D (max {} steps); 3x3 constrained oracle {}",
            s.successes(),
            s.max_steps().unwrap_or(0),
            if exact { "certifies all-D" } else { "FAILS" }
        ),
    );
}

#[test]
fn criterion_10_three_fixed_cooperators_insufficient() {
    let d = dims(4, 4);
    let placements = placements_up_to_symmetry(d, 3);
    let mut reachable = Vec::new();
    for nodes in &placements {
        let fixed = FixedSet::fixed_c(nodes.iter().copied());
        for rule in rules(&pd()) {
            let cert = prop2_unreachability(d, &pd(), &rule, &fixed).unwrap();
            if !cert.all_c_unreachable() {
                reachable.push(format!("{nodes:?} {}", rule.kind()));
            }
        }
    }
    report(
        10,
        reachable.is_empty() && !placements.is_empty(),
        format!("{} placements x 3 rules, all-C reachable in {reachable:?}", placements.len()),
    );
}

#[test]
fn criterion_11_fixed_cooperating_rectangle() {
    let d = dims(7, 7);
    let m = PayoffMatrix::parse(["3", "1.5", "4", "1.6"]).unwrap();
    let rep = m.check_conditions();
    let rect = FixedRect::new(d, NodeId::new(3, 3), 2, 2).unwrap();
    let seeds: Vec<u64> = (0..200).collect();
    let s = macc_cooperation(d, &m, &ImitationRule::deterministic(&m), &seeds, 10_000, &rect).unwrap();
    let to_star = 2 * (49 - 4 - 1);
    let expand = 5usize.div_ceil(2) * 2;
    let mut ctrl_bad = Vec::new();
    for &seed in &seeds {
        let mut rng = RngStream::new(seed);
        let init = initial_state(InitKind::Random, d, Some(&rect.to_fixed_set()), &mut rng).unwrap();
        match run_controller_thm4(&init, &m, &rect) {
            Ok(t) => {
                let t4 = t.stop_time(4).unwrap_or(0);
                let good = t.final_state().is_all(Strategy::C)
                    && t4 <= to_star
                    && t.len() - t4 <= expand
                    && t.verify(&m).is_ok();
                if !good {
                    ctrl_bad.push(seed);
                }
            }
            Err(e) => {
                eprintln!("rect seed {seed}: {e}");
                ctrl_bad.push(seed);
            }
        }
    }
    let ok = rep.thm4_i_ok && rep.cor1_ok && s.successes() == 200 && ctrl_bad.is_empty();
    report(
        11,
        ok,
        format!(
            "conditions {}; stochastic {}/200 all-C within 10000; controller {} of 200 within {to_star}+{expand} steps",
            if rep.thm4_i_ok && rep.cor1_ok { "hold" } else { "fail" },
            s.successes(),
            200 - ctrl_bad.len()
        ),
    );
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in std::fs::read_dir(&p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                stack.push(e);
            } else {
                out.insert(e.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&e).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_12_determinism() {
    let mut cfg: ExperimentConfig = preset("snowdrift-critical").unwrap();
    cfg.seeds = SeedSpec::Range { start: 0, end: 12 };
    cfg.max_steps = Some(3000);
    cfg.snapshots = Some(SnapshotSchedule { every: 100 });
    let mut stag = preset("staghunt").unwrap();
    stag.seeds = SeedSpec::Range { start: 0, end: 12 };
    stag.game.params = vec!["0.32".into()];
    let root = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for (i, workers) in [1usize, 4, 1].into_iter().enumerate() {
        let out = root.path().join(format!("r{i}"));
        experiment::run(&cfg, &out, workers).unwrap();
        experiment::sweep(&cfg, &out.join("sweep"), workers).unwrap();
        experiment::control(&stag, None, &out.join("control"), workers).unwrap();
        trees.push(tree(&out));
    }
    let files = trees[0].len();
    let same = trees.windows(2).all(|w| w[0] == w[1]);
    let hash = cfg.hash();
    let rows_tagged = std::str::from_utf8(&trees[0]["runs.csv"]).unwrap().lines().skip(1).all(|l| l.starts_with(&hash));
    report(
        12,
        same && rows_tagged && files > 10,
        format!("{files} output files identical across 3 reruns (workers 1, 4, 1): {same}; rows tagged with {hash}: {rows_tagged}"),
    );
}
