//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! straight to stdout, so the lines show up even when output is captured.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rodkit::cop::{Decision, DecisionProcess, Rollout};
use rodkit::exact::{brute_force, held_karp};
use rodkit::harness::{
    cmd_eval, cmd_gen, cmd_rod, cmd_solve, evaluate, percent, Construction, CostSource, Dataset,
    EvalArgs, EvalOptions, GenArgs, LocalSearch, RodCmdArgs, SolveMethod,
};
use rodkit::oracle::{run_oracle, sample_suboptimal, OracleConfig, ParametrizedOracle};
use rodkit::rod::{aggregate_gap, compute_rod, decision_accuracy, RodCase, RodOptions};
use rodkit::search::{
    beam_search, greedy_decode, lin_kernighan, nearest_neighbour, sampling_decode, three_opt,
    two_opt, Heatmap, LkParams,
};
use rodkit::seed::{derive_seed, stream};
use rodkit::tsp::{TspInstance, TspProcess};

fn report(criterion: u32, name: &str, pass: bool, detail: &str, started: Instant) {
    let line = format!(
        "[acceptance {criterion:>2}] {} {name}: {detail} ({:.1}s)\n",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn instances(n: usize, count: usize, seed: u64) -> Vec<TspInstance> {
    (0..count)
        .map(|i| TspInstance::generate(n, derive_seed(seed, &[i as u64])).unwrap())
        .collect()
}

fn cases(insts: &[TspInstance]) -> Vec<RodCase<TspProcess>> {
    insts
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let process = TspProcess::new(inst).unwrap();
            RodCase {
                id: format!("inst_{i:04}"),
                reference_cost: Some(process.optimal_cost()),
                process,
            }
        })
        .collect()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn c01_held_karp_matches_brute_force() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut bitwise = 0;
    for n in 6..=9 {
        for inst in instances(n, 100, 100 + n as u64) {
            let hk = held_karp(&inst).unwrap().0.cost;
            let bf = brute_force(&inst).unwrap().cost;
            if hk.to_bits() == bf.to_bits() {
                bitwise += 1;
            }
            worst = worst.max((hk - bf).abs() / bf);
        }
    }
    let pass = worst <= 1e-12 && t.elapsed().as_secs() < 60;
    report(
        1,
        "Held-Karp equals brute force, n = 6..9",
        pass,
        &format!("400 instances, {bitwise} bitwise equal, max relative difference {worst:.2e}"),
        t,
    );
}

#[test]
fn c02_perfect_oracle_has_zero_gap() {
    let t = Instant::now();
    let insts = instances(12, 200, 2);
    let config = OracleConfig::with_alpha(1.0);
    let mut model = Vec::new();
    let mut reference = Vec::new();
    for (i, inst) in insts.iter().enumerate() {
        let (hk, table) = held_karp(inst).unwrap();
        let process = TspProcess::from_table(table.into());
        model.push(
            run_oracle(&process, &format!("{i}"), &config)
                .unwrap()
                .mean_cost,
        );
        reference.push(hk.cost);
    }
    let gap = aggregate_gap(&model, &reference).unwrap().gap;
    let pass = gap.abs() <= 1e-12 && t.elapsed().as_secs() < 120;
    report(
        2,
        "alpha = 1 oracle gap on 200 n = 12",
        pass,
        &format!("gap {gap:.3e}"),
        t,
    );
}

#[test]
fn c03_inverse_cost_sampling() {
    let t = Instant::now();
    let draws = 100_000;
    let mut rng = stream(3, &[]);
    let mut first = 0usize;
    for _ in 0..draws {
        if sample_suboptimal(&[1.0, 2.0], 1e-12, &mut rng) == 0 {
            first += 1;
        }
    }
    let p = 2.0 / 3.0;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    let freq = first as f64 / draws as f64;
    let z = (freq - p).abs() / se;

    // Walk 1000 rollouts by hand and check the distribution at every state.
    let config = OracleConfig::with_alpha(0.5);
    let mut worst: f64 = 0.0;
    let mut states = 0;
    for (i, inst) in instances(12, 10, 33).iter().enumerate() {
        let process = TspProcess::new(inst).unwrap();
        let oracle = ParametrizedOracle::new(&process, &config);
        for r in 0..100u64 {
            let mut rng = stream(derive_seed(33, &[i as u64]), &[r]);
            let mut state = process.initial_state();
            while !process.is_terminal(&state) {
                let dist = oracle.sampling_distribution(&state).unwrap();
                let sum: f64 = dist.iter().map(|&(_, p)| p).sum();
                worst = worst.max((sum - 1.0).abs());
                states += 1;
                let a = oracle.theta(&state, &mut rng).unwrap();
                state = process.transition(&state, a);
            }
        }
    }
    let pass = z <= 3.0 && worst <= 1e-12;
    report(
        3,
        "inverse-cost sampling",
        pass,
        &format!(
            "P(cost 1) = {freq:.4} ({z:.2} SE from 2/3); {states} states, max |sum - 1| = {worst:.1e}"
        ),
        t,
    );
}

#[test]
fn c04_oracle_cost_is_monotone_in_alpha() {
    let t = Instant::now();
    let cases = cases(&instances(10, 100, 4));
    let mut stats = Vec::new();
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let config = OracleConfig {
            alpha,
            rollouts_per_instance: 500,
            seed: 4,
            ..OracleConfig::default()
        };
        let costs: Vec<f64> = cases
            .iter()
            .flat_map(|c| run_oracle(&c.process, &c.id, &config).unwrap().costs)
            .collect();
        stats.push((alpha, mean_and_se(&costs)));
    }
    let mut pass = t.elapsed().as_secs() < 180;
    for w in stats.windows(2) {
        let ((_, (m0, s0)), (_, (m1, s1))) = (w[0], w[1]);
        if m1 > m0 + 2.0 * (s0 * s0 + s1 * s1).sqrt() {
            pass = false;
        }
    }
    let means: Vec<String> = stats
        .iter()
        .map(|(a, (m, _))| format!("{a}: {m:.4}"))
        .collect();
    report(
        4,
        "oracle cost non-increasing in alpha",
        pass,
        &means.join(", "),
        t,
    );
}

#[test]
fn c05_rod_consistency() {
    let t = Instant::now();
    let cases = cases(&instances(12, 200, 5));
    let optimal: Vec<f64> = cases.iter().map(|c| c.reference_cost.unwrap()).collect();

    let base = OracleConfig {
        seed: 5,
        ..OracleConfig::default()
    };
    let options = RodOptions::default();
    let rods: Vec<f64> = [0.02, 0.05, 0.10]
        .iter()
        .map(|g| {
            let costs: Vec<f64> = optimal.iter().map(|c| c / (1.0 - g)).collect();
            compute_rod(&cases, &costs, &base, &options).unwrap().alpha
        })
        .collect();
    let ordered = rods[0] >= rods[1] && rods[1] >= rods[2];

    let alpha0 = 0.9;
    let generating = OracleConfig {
        alpha: alpha0,
        rollouts_per_instance: 16,
        seed: 55,
        ..OracleConfig::default()
    };
    let model: Vec<f64> = cases
        .iter()
        .map(|c| {
            run_oracle(&c.process, &c.id, &generating)
                .unwrap()
                .mean_cost
        })
        .collect();
    let scan = OracleConfig {
        rollouts_per_instance: 16,
        seed: 5,
        ..OracleConfig::default()
    };
    let recovered = compute_rod(&cases, &model, &scan, &options).unwrap().alpha;
    let pass = ordered && (recovered - alpha0).abs() <= 0.05 && t.elapsed().as_secs() < 300;
    report(
        5,
        "ROD ordering and self-consistency",
        pass,
        &format!(
            "ROD at gaps 2/5/10% = {:.3}/{:.3}/{:.3}; alpha0 0.9 recovered as {recovered:.3}",
            rods[0], rods[1], rods[2]
        ),
        t,
    );
}

#[test]
fn c06_decision_ratio_example() {
    let t = Instant::now();
    let decisions = (0..13)
        .map(|step| Decision {
            step,
            action: step,
            cost: 1.0,
            was_optimal: step != 4,
            forced: false,
        })
        .collect();
    let trace = Rollout {
        decisions,
        total_cost: 13.0,
    };
    let acc = decision_accuracy(&[trace]).unwrap();
    let shown = percent(acc);
    let pass = shown == "92.31" && (acc - 12.0 / 13.0).abs() < 1e-15;
    report(
        6,
        "12 of 13 optimal decisions",
        pass,
        &format!("{shown}%"),
        t,
    );
}

fn gaps(ds: &Dataset, refs: &[rodkit::exact::ReferenceSolution]) -> Vec<(String, f64)> {
    let options = EvalOptions {
        construction: Construction::Nn,
        local_searches: LocalSearch::parse_list("none,2opt,3opt,lk", 5, 5).unwrap(),
        seed: 7,
    };
    evaluate(ds, refs, "nn", None, &options)
        .unwrap()
        .rows
        .into_iter()
        .map(|r| (r.local_search, r.gap))
        .collect()
}

#[test]
fn c07_local_search_ordering() {
    let t = Instant::now();
    let small = Dataset::generate(12, 100, 7).unwrap();
    let exact: Vec<_> = small
        .instances
        .iter()
        .zip(small.ids())
        .map(|(inst, id)| held_karp(inst).unwrap().0.with_id(id))
        .collect();
    let g12 = gaps(&small, &exact);
    let ok12 = g12[0].1 > g12[1].1 && g12[1].1 >= g12[2].1 && g12[2].1 >= g12[3].1;

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("n100");
    cmd_gen(&GenArgs {
        n: 100,
        count: 100,
        seed: 7,
        out: dir.clone(),
        overwrite: false,
    })
    .unwrap();
    let best_known = cmd_solve(&dir, &SolveMethod::Lk { starts: 8, seed: 7 }).unwrap();
    let large = Dataset::load(&dir).unwrap();
    let g100 = gaps(&large, &best_known);
    let ok100 = g100[0].1 > g100[1].1 && g100[1].1 > g100[2].1 && g100[2].1 > g100[3].1;

    let show = |g: &[(String, f64)]| {
        g.iter()
            .map(|(ls, v)| format!("{ls} {}", percent(*v)))
            .collect::<Vec<_>>()
            .join(" > ")
    };
    let pass = ok12 && ok100 && t.elapsed().as_secs() < 600;
    report(
        7,
        "NN > 2-opt >= 3-opt >= LK",
        pass,
        &format!("n = 12: {}; n = 100: {}", show(&g12), show(&g100)),
        t,
    );
}

/// Largest improvement any 2-exchange offers, found by rebuilding every
/// candidate tour.
fn best_two_exchange(inst: &TspInstance, order: &[usize]) -> f64 {
    let n = order.len();
    let cost = |o: &[usize]| (0..n).map(|i| inst.dist(o[i], o[(i + 1) % n])).sum::<f64>();
    let base = cost(order);
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let mut o = order.to_vec();
            o[i..=j].reverse();
            best = best.max(base - cost(&o));
        }
    }
    best
}

/// Largest improvement any 3-exchange offers: cut into four pieces
/// `A B C D` and try every order and orientation of `B` and `C`.
fn best_three_exchange(inst: &TspInstance, order: &[usize]) -> f64 {
    let n = order.len();
    let cost = |o: &[usize]| (0..n).map(|i| inst.dist(o[i], o[(i + 1) % n])).sum::<f64>();
    let base = cost(order);
    let mut best: f64 = 0.0;
    for i in 1..n {
        for j in i + 1..n {
            for k in j + 1..=n {
                let (a, b, c, d) = (&order[..i], &order[i..j], &order[j..k], &order[k..]);
                let rb: Vec<usize> = b.iter().rev().copied().collect();
                let rc: Vec<usize> = c.iter().rev().copied().collect();
                for (x, y) in [
                    (b, &rc[..]),
                    (&rb[..], c),
                    (&rb[..], &rc[..]),
                    (c, b),
                    (c, &rb[..]),
                    (&rc[..], b),
                    (&rc[..], &rb[..]),
                ] {
                    let o: Vec<usize> = [a, x, y, d].concat();
                    best = best.max(base - cost(&o));
                }
            }
        }
    }
    best
}

#[test]
fn c08_local_optimality_certificates() {
    let t = Instant::now();
    let margin = 1e-9;
    let mut violations = Vec::new();
    for i in 0..50u64 {
        let n = 50 - (i as usize % 5) * 10;
        let inst = TspInstance::generate(n, derive_seed(8, &[i])).unwrap();
        let start = nearest_neighbour(&inst, 0).unwrap().tour;
        let two = two_opt(&inst, &start).tour;
        let three = three_opt(&inst, &start).tour;
        let lk = lin_kernighan(&inst, &start, LkParams::default())
            .unwrap()
            .tour;
        if best_two_exchange(&inst, two.order()) > margin {
            violations.push(format!("2-opt on #{i}"));
        }
        let three_best =
            best_two_exchange(&inst, three.order()).max(best_three_exchange(&inst, three.order()));
        if three_best > margin {
            violations.push(format!("3-opt on #{i}"));
        }
        if best_two_exchange(&inst, lk.order()) > margin {
            violations.push(format!("LK on #{i}"));
        }
    }
    let pass = violations.is_empty() && t.elapsed().as_secs() < 300;
    let detail = if pass {
        "50 instances, n = 10..50, no improving exchange".to_string()
    } else {
        violations.join(", ")
    };
    report(8, "local-optimality certificates", pass, &detail, t);
}

#[test]
fn c09_decode_equivalences() {
    let t = Instant::now();
    let (mut nn_eq, mut beam_eq, mut beam_eq_random, mut sample_ok) = (0, 0, 0, 0);
    for i in 0..100u64 {
        let inst = TspInstance::generate(20, derive_seed(9, &[i])).unwrap();
        let inverse = Heatmap::inverse_distance(&inst);
        let greedy = greedy_decode(&inst, &inverse, 0).unwrap().tour;
        if greedy == nearest_neighbour(&inst, 0).unwrap().tour {
            nn_eq += 1;
        }
        if beam_search(&inst, &inverse, 1, false, 0).unwrap().tour == greedy {
            beam_eq += 1;
        }
        let mut rng = stream(9, &[i, 1]);
        let n = inst.n();
        let random = Heatmap::new(n, (0..n * n).map(|_| rng.gen::<f64>()).collect()).unwrap();
        if beam_search(&inst, &random, 1, false, 0).unwrap().tour
            == greedy_decode(&inst, &random, 0).unwrap().tour
        {
            beam_eq_random += 1;
        }
        let one = sampling_decode(&inst, &random, 1, i, 0)
            .unwrap()
            .tour
            .cost();
        let sixteen = sampling_decode(&inst, &random, 16, i, 0)
            .unwrap()
            .tour
            .cost();
        if sixteen <= one {
            sample_ok += 1;
        }
    }
    let pass = nn_eq == 100 && beam_eq == 100 && beam_eq_random == 100 && sample_ok == 100;
    report(
        9,
        "decode equivalences",
        pass,
        &format!(
            "greedy = NN {nn_eq}/100, beam(1) = greedy {beam_eq}/100 (inverse distance), \
             {beam_eq_random}/100 (random), best-of-16 <= best-of-1 {sample_ok}/100"
        ),
        t,
    );
}

fn pipeline(dir: &Path) {
    cmd_gen(&GenArgs {
        n: 12,
        count: 100,
        seed: 7,
        out: dir.to_path_buf(),
        overwrite: false,
    })
    .unwrap();
    cmd_solve(dir, &SolveMethod::HeldKarp).unwrap();
    let eval = EvalArgs {
        construction: Some("nn".into()),
        local_search: "none,2opt,3opt,lk".into(),
        seed: 7,
        ..EvalArgs::new(dir)
    };
    cmd_eval(&eval).unwrap();
    let mut rod = RodCmdArgs::new(dir, CostSource::File(dir.join("eval-nn-nn.json")));
    rod.row = Some("nn/nn/2opt".into());
    rod.rod.seed = 7;
    cmd_rod(&rod).unwrap();
}

/// Every output file except the timing sidecar, by name.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .filter(|(name, _)| !name.ends_with(".timing.csv"))
        .collect();
    files.sort();
    files
}

#[test]
fn c10_pipeline_is_reproducible() {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&a);
    pipeline(&b);
    let (fa, fb) = (outputs(&a), outputs(&b));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let has_reports = fa.iter().any(|(n, _)| n.ends_with(".csv"))
        && fa.iter().any(|(n, _)| n.starts_with("rod-"));
    let pass = fa.len() == fb.len() && differing.is_empty() && has_reports;
    report(
        10,
        "pipeline reruns are byte-identical",
        pass,
        &format!("{} files compared, {} differ", fa.len(), differing.len()),
        t,
    );
}
