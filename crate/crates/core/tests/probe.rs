#[test]
fn probe_oracle_auc() {
    use churnscore::datagen::*;
    use churnscore::windowing::{label_frame, LabelRules};
    use churnscore::evaluation::auc;
    for seed in [1u64, 2, 3] {
        let config = GeneratorConfig::preset(Preset::Planted, 5000, seed);
        let g = generate(&config).unwrap();
        let plan = config.eval_plan();
        let frame = label_frame(&g.dataset, &LabelRules::default(), &plan).unwrap();
        let truth: std::collections::BTreeMap<&str, f64> =
            g.truth.iter().map(|t| (t.id.as_str(), t.target_churn_prob)).collect();
        let scores: Vec<f64> = frame.ids.iter().map(|id| truth[id.as_str()]).collect();
        let a = auc(&scores, &frame.labels).unwrap();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&x, &y| scores[y].partial_cmp(&scores[x]).unwrap());
        let top = scores.len() / 10;
        let hits = order[..top].iter().filter(|&&i| frame.labels[i].is_churn()).count();
        let precision = hits as f64 / top as f64;
        println!("seed {seed}: n={} churn_rate={:.3} oracle_auc={:.4} top_decile={:.3} ratio={:.2}",
            frame.len(), frame.churn_rate(), a, precision, precision / frame.churn_rate());
    }
}
