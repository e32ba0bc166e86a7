//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero on any failure not listed in `KNOWN_FAILURES`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use shaprank::oracle::{
    best_order_exhaustive, build_oracle_rank, build_oracle_rank_with, compute_oracle_subsets,
    score_order, score_ranking, OracleConstruction, OracleMode, OracleSubsets,
};
use shaprank::partial::{leave_one_out, shapley_partial, SizeBand};
use shaprank::regression::{shapley_regression, RegressionConfig, Sampler};
use shaprank::sampling::{permutation_marginals, shapley_sample_permutations, SamplingConfig};
use shaprank::toynet::{
    accuracy_char_fn, duplicate_unit, load_csv, load_model, redundancy_network,
};
use shaprank::{
    shapley_exact_permutations, shapley_exact_subsets, CharacteristicFn, Coalition, Game,
    ShapleyEstimate, SubsetsOfSize, TableGame,
};

/// Criteria whose stated target is not met by a correct implementation.
const KNOWN_FAILURES: &[&str] = &["5d"];

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        pass,
        detail,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn exact(game: &Game) -> ShapleyEstimate {
    shapley_exact_subsets(game).unwrap()
}

fn sweep_games() -> Vec<TableGame> {
    (0..25u64)
        .map(|i| TableGame::random(4 + (i as usize % 7), 1000 + i).unwrap())
        .collect()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn criterion_1() -> Vec<Outcome> {
    let start = Instant::now();
    let game = Game::new(shaprank::make_figure2_game()).unwrap();
    let phi = exact(&game).values;
    let values_ok = max_abs_diff(&phi, &[25.0, 25.0, 30.0]) <= 1e-9;

    // Player 1 (index 0) along each of the six orderings.
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [2, 0, 1],
        [1, 2, 0],
        [2, 1, 0],
    ];
    let marginals: Vec<f64> = perms
        .iter()
        .map(|p| permutation_marginals(&game, p).unwrap()[0])
        .collect();
    let marginals_ok = marginals == [45.0, 45.0, 15.0, 35.0, 5.0, 5.0];
    let elapsed = start.elapsed();
    vec![outcome(
        "1",
        "three-player example: exact values and player-1 marginals",
        values_ok && marginals_ok && elapsed < Duration::from_secs(1),
        format!("phi = {phi:?}, marginals = {marginals:?}, {elapsed:.2?}"),
    )]
}

fn criterion_2() -> Vec<Outcome> {
    let start = Instant::now();
    let games = sweep_games();
    let (mut a, mut b, mut c, mut d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for t in &games {
        let n = t.n_players();
        let game = Game::new(t.clone()).unwrap();
        let subsets = exact(&game).values;
        a = a.max(max_abs_diff(
            &subsets,
            &shapley_exact_permutations(&game).unwrap().values,
        ));
        b = b.max(max_abs_diff(
            &subsets,
            &shapley_partial(&game, SizeBand::full(n)).unwrap().values,
        ));
        c = c.max(max_abs_diff(
            &subsets,
            &shapley_regression(&game, &RegressionConfig::enumerate())
                .unwrap()
                .values,
        ));
        if n == 8 {
            let perm = shapley_sample_permutations(&game, &SamplingConfig::new(20_000, 7)).unwrap();
            let rel = max_abs_diff(&subsets, &perm.values) / game.target_quantity().abs();
            d = d.max(rel);
        }
    }
    let elapsed = start.elapsed();
    let in_time = elapsed < Duration::from_secs(120);
    vec![
        outcome(
            "2a",
            "subset and permutation enumerations agree",
            a <= 1e-9,
            format!("max diff {a:.2e}"),
        ),
        outcome(
            "2b",
            "full-band partial equals exact",
            b <= 1e-9,
            format!("max diff {b:.2e}"),
        ),
        outcome(
            "2c",
            "enumerated kernel regression equals exact",
            c <= 1e-6,
            format!("max diff {c:.2e}"),
        ),
        outcome(
            "2d",
            "permutation sampling, 20000 permutations, N=8",
            d <= 0.01 && in_time,
            format!(
                "max error {:.3}% of the target, sweep {elapsed:.2?}",
                100.0 * d
            ),
        ),
    ]
}

fn swap_bits(s: usize, a: usize, b: usize) -> usize {
    let (ba, bb) = (s >> a & 1, s >> b & 1);
    (s & !(1 << a) & !(1 << b)) | bb << a | ba << b
}

/// Both exact routes; the permutation route only within its size limit.
fn both_routes(t: &TableGame) -> Vec<Vec<f64>> {
    let g = Game::new(t.clone()).unwrap();
    let mut out = vec![exact(&g).values];
    if t.n_players() <= shaprank::exact::MAX_PERMUTATION_PLAYERS {
        out.push(shapley_exact_permutations(&g).unwrap().values);
    }
    out
}

fn criterion_3() -> Vec<Outcome> {
    let (mut eff, mut sym, mut dummy, mut lin) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (idx, t) in sweep_games().iter().enumerate() {
        let n = t.n_players();
        let v = t.values();
        for phi in both_routes(t) {
            eff = eff.max((phi.iter().sum::<f64>() - (v[v.len() - 1] - v[0])).abs());
        }
        let (i, j) = (idx % n, (idx + 1) % n);
        let sym_t = TableGame::new(
            n,
            (0..v.len())
                .map(|s| (v[s] + v[swap_bits(s, i, j)]) / 2.0)
                .collect(),
        )
        .unwrap();
        for phi in both_routes(&sym_t) {
            sym = sym.max((phi[i] - phi[j]).abs());
        }
        // Player n added as a dummy: ν ignores bit n.
        let ext =
            TableGame::new(n + 1, (0..2 * v.len()).map(|s| v[s % v.len()]).collect()).unwrap();
        for phi in both_routes(&ext) {
            dummy = dummy.max(phi[n].abs());
        }
        let u = TableGame::random(n, idx as u64).unwrap();
        let mix = t.linear_combination(1.5, &u, -0.5).unwrap();
        let (pt, pu) = (both_routes(t), both_routes(&u));
        for (r, phi) in both_routes(&mix).iter().enumerate() {
            for p in 0..n {
                lin = lin.max((phi[p] - (1.5 * pt[r][p] - 0.5 * pu[r][p])).abs());
            }
        }
    }

    // Through the network: the fixture's zero-outgoing unit and a duplicated unit.
    let model = load_model(&fixtures().join("toy.json")).unwrap();
    let data = load_csv(&fixtures().join("blobs.csv")).unwrap();
    let game = Game::new(accuracy_char_fn(&model, &data).unwrap()).unwrap();
    let toy = [
        exact(&game).values,
        shapley_exact_permutations(&game).unwrap().values,
    ];
    let mut net = 0.0f64;
    for phi in &toy {
        net = net.max(phi[8].abs());
        net = net.max((phi.iter().sum::<f64>() - game.target_quantity()).abs());
    }
    let dup = duplicate_unit(&model, 3).unwrap();
    let dup_game = Game::new(accuracy_char_fn(&dup, &data).unwrap()).unwrap();
    let dup_phi = exact(&dup_game).values;
    net = net.max((dup_phi[3] - dup_phi[9]).abs());
    net = net.max((dup_phi.iter().sum::<f64>() - dup_game.target_quantity()).abs());

    vec![
        outcome(
            "3a",
            "efficiency",
            eff <= 1e-9,
            format!("max violation {eff:.2e}"),
        ),
        outcome(
            "3b",
            "symmetry",
            sym <= 1e-9,
            format!("max violation {sym:.2e}"),
        ),
        outcome(
            "3c",
            "dummy",
            dummy <= 1e-9,
            format!("max violation {dummy:.2e}"),
        ),
        outcome(
            "3d",
            "linearity",
            lin <= 1e-9,
            format!("max violation {lin:.2e}"),
        ),
        outcome(
            "3e",
            "network: zero-weight unit, duplicated unit, efficiency",
            net <= 1e-9,
            format!("max violation {net:.2e}"),
        ),
    ]
}

fn criterion_4() -> Vec<Outcome> {
    let reference = Game::new(TableGame::random(8, 8).unwrap()).unwrap();
    let truth = exact(&reference).values;
    let target = reference.target_quantity();

    let mut eff = 0.0f64;
    for s in [1, 2, 7, 64, 1000] {
        for antithetic in [false, true] {
            let mut cfg = SamplingConfig::new(s, 3);
            cfg.antithetic = antithetic;
            let est = shapley_sample_permutations(&reference, &cfg).unwrap();
            eff = eff.max((est.sum() - target).abs());
        }
    }

    let se = |s: usize| {
        shapley_sample_permutations(&reference, &SamplingConfig::new(s, 11))
            .unwrap()
            .std_err
            .unwrap()
    };
    let (small, large) = (se(1000), se(4000));
    let ratios: Vec<f64> = large.iter().zip(&small).map(|(l, s)| l / s).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(r), hi.max(r))
        });
    let halves = lo >= 0.375 && hi <= 0.625;

    let runs: Vec<Vec<f64>> = (0..200u64)
        .map(|seed| {
            shapley_sample_permutations(&reference, &SamplingConfig::new(50, seed))
                .unwrap()
                .values
        })
        .collect();
    let mut worst = 0.0f64;
    for p in 0..truth.len() {
        let xs: Vec<f64> = runs.iter().map(|r| r[p]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        let z = (mean - truth[p]).abs() / (var / xs.len() as f64).sqrt();
        worst = worst.max(z);
    }

    vec![
        outcome(
            "4a",
            "telescoping efficiency at every sample count",
            eff <= 1e-9,
            format!("max violation {eff:.2e}"),
        ),
        outcome(
            "4b",
            "std_err halves when the sample count quadruples",
            halves,
            format!("ratios in [{lo:.3}, {hi:.3}]"),
        ),
        outcome(
            "4c",
            "200-seed unbiasedness within 3 standard errors",
            worst <= 3.0,
            format!("largest |z| = {worst:.2}"),
        ),
    ]
}

fn estimator_ranks(game: &Game) -> Vec<(&'static str, shaprank::Ranking)> {
    let n = game.n_players();
    vec![
        ("exact", exact(game).ranking()),
        ("leave-one-out", leave_one_out(game).unwrap().ranking()),
        (
            "partial-2",
            shapley_partial(game, SizeBand::new(2.min(n), 0))
                .unwrap()
                .ranking(),
        ),
        (
            "perm",
            shapley_sample_permutations(game, &SamplingConfig::new(200, 5))
                .unwrap()
                .ranking(),
        ),
        (
            "kernel",
            shapley_regression(
                game,
                &RegressionConfig::new(4 * n, Sampler::SizeStratified, 5),
            )
            .unwrap()
            .ranking(),
        ),
    ]
}

fn criterion_5() -> Vec<Outcome> {
    let mut games: Vec<Game> = (0..12u64)
        .map(|s| Game::new(TableGame::random(3 + (s as usize % 6), 50 + s).unwrap()).unwrap())
        .collect();
    games.insert(0, Game::new(shaprank::make_figure2_game()).unwrap());

    let mut optimal = true;
    let mut rank_gap = 0.0f64;
    let mut greedy_gap = 0.0f64;
    let mut dominance = true;
    let mut checked = 0;
    for game in &games {
        let n = game.n_players();
        for mode in [OracleMode::Keep, OracleMode::Remove] {
            let ks: Vec<usize> = (1..=n.min(5)).collect();
            let oracle = compute_oracle_subsets(game, mode, &ks).unwrap();
            for (&k, sets) in &oracle.per_k {
                let value = |bits: u64| {
                    let c = Coalition::new(bits, n).unwrap();
                    match mode {
                        OracleMode::Keep => game.evaluate(c).unwrap(),
                        OracleMode::Remove => game.evaluate(c.complement()).unwrap(),
                    }
                };
                let best = SubsetsOfSize::new(n, k)
                    .map(value)
                    .fold(f64::NEG_INFINITY, f64::max);
                let n_best = SubsetsOfSize::new(n, k)
                    .filter(|&b| (value(b) - best).abs() <= 1e-12 * best.abs().max(1.0))
                    .count();
                optimal &= n_best == sets.len()
                    && sets.iter().all(|c| (value(c.bits()) - best).abs() <= 1e-12);
            }
            let oracle_score =
                score_ranking(&build_oracle_rank(&oracle).unwrap(), &oracle).unwrap();
            if n <= 6 {
                let (_, best) = best_order_exhaustive(&oracle).unwrap();
                rank_gap = rank_gap.max(best - oracle_score.weighted_total);
                let greedy = build_oracle_rank_with(&oracle, OracleConstruction::Greedy).unwrap();
                greedy_gap =
                    greedy_gap.max(best - score_ranking(&greedy, &oracle).unwrap().weighted_total);
            }
            for (_, rank) in estimator_ranks(game) {
                dominance &= oracle_score.weighted_total
                    >= score_ranking(&rank, &oracle).unwrap().weighted_total - 1e-12;
            }
            checked += 1;
        }
    }

    // The two-size example: best kept set {5} at K=1 and {2,7} at K=2.
    let n = 8;
    let per_k = BTreeMap::from([
        (1, vec![Coalition::from_players([5], n).unwrap()]),
        (2, vec![Coalition::from_players([2, 7], n).unwrap()]),
    ]);
    let oracle = OracleSubsets::from_sets(OracleMode::Keep, n, per_k).unwrap();
    let (best_order, best) = best_order_exhaustive(&oracle).unwrap();
    let starting_with_5 = score_order(&[5, 2, 0, 1, 3, 4, 6, 7], &oracle)
        .unwrap()
        .weighted_total;

    vec![
        outcome(
            "5a",
            "oracle subsets are optimal by re-enumeration",
            optimal,
            format!("{checked} game/mode pairs, N <= 8"),
        ),
        outcome(
            "5b",
            "Oracle rank equals the exhaustive best rank on N <= 6",
            rank_gap <= 1e-12,
            format!("largest gap {rank_gap:.2e}; positional greedy alone would leave {greedy_gap:.4}"),
        ),
        outcome(
            "5c",
            "Oracle-rank score dominates every estimator rank",
            dominance,
            format!("{checked} game/mode pairs, 5 estimators"),
        ),
        outcome(
            "5d",
            "{5},{2,7} example: best possible rank scores 5/9",
            (best - 5.0 / 9.0).abs() <= 1e-12,
            format!(
                "best rank found scores {best:.6} with selection {:?}; starting with 5 scores {starting_with_5:.6}",
                &best_order[..2]
            ),
        ),
    ]
}

fn criterion_6() -> Vec<Outcome> {
    let start = Instant::now();
    let ks: Vec<usize> = (1..=5).collect();
    let levels = [0usize, 1, 2];
    let mut per_pair_ok = true;
    let mut means = Vec::new();
    let mut cells = Vec::new();
    for &r in &levels {
        let mut total = 0.0;
        for seed in 0..3u64 {
            let (spec, data) = redundancy_network(r, seed).unwrap();
            let game = Game::new(accuracy_char_fn(&spec, &data).unwrap()).unwrap();
            let oracle = compute_oracle_subsets(&game, OracleMode::Keep, &ks).unwrap();
            let shapley = score_ranking(&exact(&game).ranking(), &oracle)
                .unwrap()
                .weighted_total;
            let loo = score_ranking(&leave_one_out(&game).unwrap().ranking(), &oracle)
                .unwrap()
                .weighted_total;
            per_pair_ok &= shapley >= loo - 1e-12;
            total += shapley - loo;
            cells.push(format!("r{r}/s{seed}:{shapley:.3}-{loo:.3}"));
        }
        means.push(total / 3.0);
    }
    let grows = means.windows(2).all(|w| w[1] > w[0]);
    let elapsed = start.elapsed();
    vec![
        outcome(
            "6a",
            "redundancy network: exact rank scores at least leave-one-out",
            per_pair_ok && elapsed < Duration::from_secs(300),
            format!("{} ({elapsed:.2?})", cells.join(" ")),
        ),
        outcome(
            "6b",
            "leave-one-out degradation grows with redundancy",
            grows,
            format!(
                "mean degradation by redundancy {:?}: {}",
                levels,
                means
                    .iter()
                    .map(|m| format!("{m:.4}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ),
    ]
}

fn shaprank(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_shaprank"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "shaprank {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn criterion_7() -> Vec<Outcome> {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let (model, data) = (fx.join("toy.json"), fx.join("blobs.csv"));
    let prune = |count: usize, which: &str| -> serde_json::Value {
        let bytes = shaprank(
            dir.path(),
            &[
                "prune",
                "--model",
                model.to_str().unwrap(),
                "--data",
                data.to_str().unwrap(),
                "--count",
                &count.to_string(),
                "--remove",
                which,
                "--out",
                "masked.json",
            ],
        );
        serde_json::from_slice(&bytes).unwrap()
    };
    let mut ok = true;
    let mut cells = Vec::new();
    for count in 1..9 {
        let (least, most) = (prune(count, "least"), prune(count, "most"));
        let (a, b) = (
            least["nu_after"].as_f64().unwrap(),
            most["nu_after"].as_f64().unwrap(),
        );
        ok &= a >= b;
        cells.push(format!("{count}:{a:.3}/{b:.3}"));
    }
    let one = prune(1, "least");
    let dummy_ok = one["removed"] == serde_json::json!([8])
        && (one["nu_after"].as_f64().unwrap() - one["nu_before"].as_f64().unwrap()).abs() <= 1e-12;
    vec![
        outcome(
            "7a",
            "prune: removing least important keeps at least as much accuracy as removing most",
            ok,
            format!("count:least/most {}", cells.join(" ")),
        ),
        outcome(
            "7b",
            "prune: masking the zero-weight unit leaves accuracy unchanged",
            dummy_ok,
            format!(
                "removed {}, nu {} -> {}",
                one["removed"], one["nu_before"], one["nu_after"]
            ),
        ),
    ]
}

fn criterion_8() -> Vec<Outcome> {
    let fx = fixtures();
    let (fig2, model, data) = (
        fx.join("fig2.json").display().to_string(),
        fx.join("toy.json").display().to_string(),
        fx.join("blobs.csv").display().to_string(),
    );
    let toy = |rest: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = ["--model", &model, "--data", &data, "--layer", "1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        v.extend(rest.iter().map(|s| s.to_string()));
        v
    };
    let mut commands: Vec<(&str, Vec<String>, Vec<&str>)> = Vec::new();
    for method in ["exact", "exact-perm", "partial", "perm", "kernel"] {
        let mut args = vec!["rank".to_string()];
        args.extend(toy(&[
            "--method", method, "--seed", "1", "--perms", "300", "--csv", "rank.csv",
        ]));
        commands.push(("rank", args, vec!["rank.csv"]));
    }
    commands.push((
        "rank-fig2",
        [
            "rank",
            "--game",
            &fig2,
            "--method",
            "kernel",
            "--sampler",
            "bernoulli-half",
            "--samples",
            "40",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        vec![],
    ));
    let mut oracle = vec!["oracle".to_string()];
    oracle.extend(toy(&[
        "--mode",
        "keep",
        "--methods",
        "exact,partial,perm,kernel",
        "--csv",
        "table.csv",
    ]));
    commands.push(("oracle", oracle, vec!["table.csv"]));
    let mut prune = vec!["prune".to_string()];
    prune.extend(toy(&[
        "--method",
        "perm",
        "--count",
        "3",
        "--out",
        "masked.json",
        "--cache",
        "c.jsonl",
    ]));
    commands.push(("prune", prune, vec!["masked.json", "c.jsonl"]));
    commands.push((
        "train-toy",
        [
            "train-toy",
            "--epochs",
            "20",
            "--dummy",
            "--out",
            "toy.bin",
            "--flat",
            "--write-data",
            "d.csv",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        vec!["toy.bin", "d.csv"],
    ));
    commands.push(("make-fig2", vec!["make-fig2".to_string()], vec![]));

    let mut ok = true;
    let mut differing = Vec::new();
    for (name, args, files) in &commands {
        let mut outputs = Vec::new();
        for workers in ["1", "8", "8"] {
            let dir = tempfile::tempdir().unwrap();
            let mut full = vec!["--workers", workers];
            full.extend(args.iter().map(String::as_str));
            let mut bytes = shaprank(dir.path(), &full);
            for f in files {
                bytes.extend(std::fs::read(dir.path().join(f)).unwrap());
            }
            outputs.push(bytes);
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            ok = false;
            differing.push(*name);
        }
    }
    vec![outcome(
        "8",
        "byte-identical reports and artifacts across reruns with 1 and 8 workers",
        ok,
        if ok {
            format!("{} commands", commands.len())
        } else {
            format!("differing: {differing:?}")
        },
    )]
}

fn main() {
    let groups: [fn() -> Vec<Outcome>; 8] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
    ];
    let mut unexpected = Vec::new();
    for group in groups {
        for o in group() {
            let status = if o.pass { "PASS" } else { "FAIL" };
            let known = !o.pass && KNOWN_FAILURES.contains(&o.id);
            println!(
                "{status} [{}] {}: {}{}",
                o.id,
                o.name,
                o.detail,
                if known { " (known, see README)" } else { "" }
            );
            if !o.pass && !known {
                unexpected.push(o.id);
            }
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures");
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        std::process::exit(1);
    }
}
