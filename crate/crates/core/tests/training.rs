//! Training behaviour on planted-partition data.

use mccrf_core::crf::{hard_labeling, PatternTable};
use mccrf_core::data::{derive_seeds, generate_planted, GeneratorConfig};
use mccrf_core::learn::{
    edge_accuracy, predict, train_end_to_end, train_unary, Example, TrainConfig, UnaryModel, DEFAULT_HIDDEN,
};

fn examples(cfg: GeneratorConfig, base: u64, count: usize) -> Vec<Example> {
    derive_seeds(base, count)
        .into_iter()
        .map(|s| Example::from_instance(&generate_planted(&cfg.with_seed(s)).unwrap()).unwrap())
        .collect()
}

fn accuracy(model: &UnaryModel, table: &PatternTable, iterations: usize, set: &[Example]) -> f64 {
    set.iter()
        .map(|ex| edge_accuracy(&hard_labeling(predict(model, table, ex, iterations).unwrap().last()), ex.gt.as_ref().unwrap()))
        .sum::<f64>()
        / set.len() as f64
}

#[test]
fn separable_features_are_learned_exactly() {
    let cfg = GeneratorConfig { sigma: 0.0, ..Default::default() };
    let train = examples(cfg, 1, 20);
    let tc = TrainConfig { unary_epochs: 1000, validation_fraction: 0.0, ..Default::default() };
    let out = train_unary(&train, UnaryModel::new(train[0].features[0].len(), DEFAULT_HIDDEN, 1), &tc).unwrap();
    assert_eq!(accuracy(&out.model, &PatternTable::neutral(), 0, &train), 1.0);
}

#[test]
fn calibrated_unary_model_scores_about_ninety_percent() {
    let cfg = GeneratorConfig::default();
    let train = examples(cfg, 100, 100);
    let test = examples(cfg, 101, 50);
    let out = train_unary(&train, UnaryModel::new(train[0].features[0].len(), DEFAULT_HIDDEN, 0), &TrainConfig::default()).unwrap();
    let acc = accuracy(&out.model, &PatternTable::neutral(), 0, &test);
    assert!((0.85..=0.95).contains(&acc), "held-out unary accuracy {acc}");

    // The 10-epoch moving average of the training loss trends down; constant-rate
    // minibatch steps leave plateau noise far below the total descent.
    let losses: Vec<f64> = out.curve.iter().map(|s| s.train_loss).collect();
    let smooth: Vec<f64> = losses.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    let descent = smooth[0] - smooth[smooth.len() - 1];
    let worst_rise = smooth.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    assert!(descent > 0.0 && worst_rise <= 0.01 * descent, "rise {worst_rise} vs descent {descent}");

    // End-to-end stage: better held-out accuracy and the lone-cut pattern penalized
    // relative to its valid neighbours (gauge-invariant form).
    let e2e = train_end_to_end(&train, out.model.clone(), PatternTable::neutral(), &TrainConfig::default()).unwrap();
    let acc_e2e = accuracy(&e2e.model, &e2e.table, 3, &test);
    assert!(acc_e2e >= acc, "end-to-end {acc_e2e} < unary {acc}");
    let g = e2e.table.gamma;
    assert!(e2e.table.gamma_max > 0.5 * (g[0] + g[1]), "{:?}", e2e.table);
    assert!(e2e.curve[e2e.best_epoch].validation_loss <= e2e.curve[0].validation_loss);
}

#[test]
fn neutral_start_matches_unary_stage() {
    let train = examples(GeneratorConfig::default(), 7, 12);
    let cfg = TrainConfig { unary_epochs: 5, end_to_end_epochs: 1, ..Default::default() };
    let unary = train_unary(&train, UnaryModel::new(train[0].features[0].len(), 8, 3), &cfg).unwrap();
    let e2e = train_end_to_end(&train, unary.model.clone(), PatternTable::neutral(), &cfg).unwrap();
    let last = &unary.curve[unary.best_epoch];
    assert_eq!(e2e.curve[0].train_loss, unary.curve.iter().find(|s| s.epoch == unary.best_epoch).unwrap().train_loss);
    assert_eq!(e2e.curve[0].validation_loss, last.validation_loss);
}

