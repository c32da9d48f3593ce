//! Noise sweep: trains the unary model, then the full model, on seeded
//! planted-partition datasets and prints held-out accuracies.
//!
//! cargo run --release -p mccrf-core --example calibrate -- [sigma...]

use mccrf_core::crf::{hard_labeling, invalid_cycle_ratio};
use mccrf_core::data::{clustering_metrics, derive_seeds, generate_planted, GeneratorConfig};
use mccrf_core::graph::Decomposition;
use mccrf_core::learn::{
    edge_accuracy, predict, train_end_to_end, train_unary, Example, TrainConfig, UnaryModel, DEFAULT_HIDDEN,
};
use mccrf_core::crf::PatternTable;
use mccrf_core::solvers::{round_and_repair, CostSource};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let sigmas = if args.is_empty() { vec![0.15, 0.2, 0.25, 0.3] } else { args };
    let train_count = env_usize("CAL_TRAIN", 40);
    let test_count = env_usize("CAL_TEST", 20);
    let seeds = env_usize("CAL_SEEDS", 3);
    let base = TrainConfig::default();
    let cfg = TrainConfig {
        unary_rate: env_f64("CAL_UR", base.unary_rate),
        end_to_end_rate: env_f64("CAL_ER", base.end_to_end_rate),
        pattern_rate_scale: env_f64("CAL_PS", base.pattern_rate_scale),
        unary_epochs: env_usize("CAL_UE", base.unary_epochs),
        end_to_end_epochs: env_usize("CAL_EE", base.end_to_end_epochs),
        ..base
    };
    for sigma in sigmas {
        let mut rows = Vec::new();
        for run in 0..seeds as u64 {
            let gen = GeneratorConfig { sigma, ..Default::default() };
            let all: Vec<_> = derive_seeds(1000 + run, train_count + test_count)
                .into_iter()
                .map(|s| generate_planted(&gen.with_seed(s)).unwrap())
                .collect();
            let examples: Vec<Example> = all.iter().map(|i| Example::from_instance(i).unwrap()).collect();
            let (train, test) = examples.split_at(train_count);
            let dim = train[0].features[0].len();
            let cfg = TrainConfig { seed: run, ..cfg };
            let t0 = std::time::Instant::now();
            let unary = train_unary(train, UnaryModel::new(dim, DEFAULT_HIDDEN, run), &cfg).unwrap();
            let t1 = t0.elapsed().as_secs_f64();
            let e2e = train_end_to_end(train, unary.model.clone(), PatternTable::neutral(), &cfg).unwrap();
            let t2 = t0.elapsed().as_secs_f64() - t1;
            let score = |m: &UnaryModel, t: &PatternTable, iters: usize| {
                let (mut acc, mut clus, mut inv) = (0.0, 0.0, 0.0);
                for (ex, inst) in test.iter().zip(&all[train_count..]) {
                    let q = predict(m, t, ex, iters).unwrap();
                    let hard = hard_labeling(q.last());
                    acc += edge_accuracy(&hard, ex.gt.as_ref().unwrap());
                    inv += invalid_cycle_ratio(&hard, &ex.cliques).unwrap_or(0.0);
                    let r = round_and_repair(inst.graph(), q.last(), CostSource::Marginals).unwrap();
                    let gt: &Decomposition = inst.gt_decomposition().unwrap();
                    clus += clustering_metrics(inst.graph(), &r.decomposition, gt).unwrap().pairwise_accuracy;
                }
                let n = test.len() as f64;
                (acc / n, clus / n, inv / n)
            };
            let u = score(&unary.model, &PatternTable::neutral(), 0);
            let e = score(&e2e.model, &e2e.table, cfg.iterations);
            println!(
                "sigma {sigma:.3} run {run}: unary acc {:.4} clus {:.4} inv {:.4} (best ep {}, {t1:.1}s) | e2e acc {:.4} clus {:.4} inv {:.4} (best ep {}, {t2:.1}s) table {:?} max {:.3}",
                u.0, u.1, u.2, unary.best_epoch, e.0, e.1, e.2, e2e.best_epoch, e2e.table.gamma, e2e.table.gamma_max
            );
            let (mut join, mut inv) = (vec![0.0; cfg.iterations + 1], vec![0.0; cfg.iterations + 1]);
            for ex in test {
                let trace = predict(&e2e.model, &e2e.table, ex, cfg.iterations).unwrap();
                let j = mccrf_core::crf::join_marginal_means(&trace, ex.gt.as_ref().unwrap()).unwrap().unwrap();
                let r = mccrf_core::crf::invalid_cycle_ratios(&trace, &ex.cliques).unwrap();
                for t in 0..=cfg.iterations {
                    join[t] += j[t] / test.len() as f64;
                    inv[t] += r[t] / test.len() as f64;
                }
            }
            println!("  join {join:.4?} invalid {inv:.4?}");
            rows.push((u, e));
        }
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&((f64, f64, f64), (f64, f64, f64))) -> f64| rows.iter().map(f).sum::<f64>() / n;
        println!(
            "sigma {sigma:.3} mean: unary acc {:.4} clus {:.4} | e2e acc {:.4} clus {:.4}",
            mean(&|r| r.0 .0), mean(&|r| r.0 .1), mean(&|r| r.1 .0), mean(&|r| r.1 .1)
        );
    }
}

fn env_usize(name: &str, default: usize) -> usize {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn env_f64(name: &str, default: f64) -> f64 {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}
