//! scratch probe, not committed
use auxt::toy;
use auxt::training::{eval_rd, resolve_config, train};

fn main() {
    let train_set = toy::load_split("train").unwrap();
    let test_set = toy::load_split("test").unwrap();
    let k = 5000u64;
    for seed in 0..5u64 {
        let rd = |extra: &[&str]| -> f64 {
            let mut sets = vec![
                format!("iterations={k}"),
                format!("seed={seed}"),
                "stages=2".to_string(),
                "patch=16".to_string(),
                "batch=4".to_string(),
                "lambda_rd=0.25".to_string(),
                "learning_rate=3e-3".to_string(),
                "main_activation=relu".to_string(),
            ];
            sets.extend(extra.iter().map(|s| s.to_string()));
            let cfg = resolve_config(None, &sets).unwrap();
            let out = train(&cfg, &train_set, &[]).unwrap();
            assert!(out.diverged.is_none(), "diverged: {:?}", out.diverged);
            eval_rd(&out.params, &cfg.to_model_config(), cfg.lambda_rd, &test_set)
                .unwrap()
                .rd_loss
        };
        let full = if seed >= 3 { rd(&[]) } else { f64::NAN };
        let noscale = if seed >= 3 { rd(&["scaling_enabled=false"]) } else { f64::NAN };
        let relu = if seed >= 3 { rd(&["aux_relu=true"]) } else { f64::NAN };
        let pool = rd(&["dwt_mode=avgpool"]);
        let ana = rd(&["aux_placement=analysis_only"]);
        let syn = rd(&["aux_placement=synthesis_only"]);
        println!(
            "seed {seed}: full {full:.2} noscale {noscale:.2} relu {relu:.2} | avgpool {pool:.2} ana {ana:.2} syn {syn:.2}"
        );
    }
}
