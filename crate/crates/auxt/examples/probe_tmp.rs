//! scratch probe, not committed
use auxt::analysis::{branch_energy, latent_energy_report};
use auxt::model::ModelParams;
use auxt::toy;
use auxt::training::{resolve_config, train, TrainOutput};

fn cell(train_set: &[(String, Tensor)], seed: u64, extra: &[&str], tag: &str) {
    let mk = |more: &[&str], iters: u64| -> Vec<String> {
        let mut v = vec![
            format!("iterations={iters}"),
            format!("seed={seed}"),
            "patch=32".to_string(),
            "batch=8".to_string(),
            "lambda_rd=0.25".to_string(),
            "learning_rate=3e-3".to_string(),
            "main_activation=relu".to_string(),
        ];
        v.extend(extra.iter().map(|s| s.to_string()));
        v.extend(more.iter().map(|s| s.to_string()));
        v
    };
    let cfg = resolve_config(None, &mk(&[], 5000)).unwrap();
    let aux = train(&cfg, train_set, &[0, 500, 1000, 2000]).unwrap();
    assert!(aux.diverged.is_none(), "aux diverged: {:?}", aux.diverged);
    let bcfg = resolve_config(None, &mk(&["fusion=none"], 2000)).unwrap();
    let base = train(&bcfg, train_set, &[500, 1000]).unwrap();
    assert!(base.diverged.is_none(), "base diverged: {:?}", base.diverged);
    let mcfg = cfg.to_model_config();
    let mbcfg = bcfg.to_model_config();
    let snap = |out: &TrainOutput, it: u64| -> ModelParams {
        out.snapshots.iter().find(|(i, _)| *i == it).unwrap().1.clone()
    };
    let top = |p: &ModelParams| {
        latent_energy_report(p, &mcfg, train_set)
            .unwrap()
            .top_fraction_ratio(0.1)
    };
    let topb = |p: &ModelParams| {
        latent_energy_report(p, &mbcfg, train_set)
            .unwrap()
            .top_fraction_ratio(0.1)
    };
    let e = |p: &ModelParams| {
        let b = branch_energy(p, &mcfg, train_set).unwrap();
        (b.aux, b.main)
    };
    let (a0, m0) = e(&snap(&aux, 500));
    let (a1, m1) = e(&snap(&aux, 1000));
    let (af, mf) = e(&aux.params);
    println!(
        "{tag} seed {seed}: amp500 {:.2}/{:.2} amp1000 {:.2}/{:.2}",
        af / a0,
        mf / m0,
        af / a1,
        mf / m1,
    );
    println!(
        "  top10 aux 0 {:.3} 500 {:.3} 1000 {:.3} 2000 {:.3} 5000 {:.3} | base 500 {:.3} 1000 {:.3} 2000 {:.3}",
        top(&snap(&aux, 0)),
        top(&snap(&aux, 500)),
        top(&snap(&aux, 1000)),
        top(&snap(&aux, 2000)),
        top(&aux.params),
        topb(&snap(&base, 500)),
        topb(&snap(&base, 1000)),
        topb(&base.params),
    );
}

use auxt::tensor::Tensor;

fn main() {
    let train_set = toy::load_split("train").unwrap();
    for seed in 0..5u64 {
        cell(&train_set, seed, &[], "b8");
    }
    for seed in [0u64, 4] {
        cell(&train_set, seed, &["wavelet_basis=db4"], "b8-db4");
    }
}
