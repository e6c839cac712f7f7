// Every example under examples/ is compiled into this test and run once.

mod autodiff_basics {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/autodiff_basics.rs"));
}

mod gen_synth {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gen_synth.rs"));
}

mod train_synthetic {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/train_synthetic.rs"));
}

mod train_and_eval {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/train_and_eval.rs"));
}

mod ablation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ablation.rs"));
}

mod gradient_check {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gradient_check.rs"));
}

mod semi_supervised {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/semi_supervised.rs"));
}

mod load_dbp15k {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/load_dbp15k.rs"));
}

#[test]
fn autodiff_example_matches_finite_differences() {
    let err = autodiff_basics::run_example().expect("autodiff example should run");
    assert!(err < 1e-8, "{err}");
}

#[test]
fn gen_synth_example_runs() {
    gen_synth::run_example().expect("gen_synth example should run");
}

#[test]
fn train_synthetic_example_aligns() {
    let h1 = train_synthetic::run_example().expect("train example should run");
    assert!(h1 >= 0.95, "{h1}");
}

#[test]
fn train_and_eval_example_runs() {
    train_and_eval::run_example().expect("train_and_eval example should run");
}

#[test]
fn ablation_example_emits_table() {
    let tsv = ablation::run_example().expect("ablation example should run");
    assert_eq!(tsv.lines().count(), 13);
}

#[test]
fn gradient_check_example_passes() {
    assert!(gradient_check::run_example().expect("gradient_check example should run"));
}

#[test]
fn semi_supervised_example_grows_seeds() {
    let (base, semi, proposed) = semi_supervised::run_example().expect("semi example should run");
    assert!(proposed > 0);
    assert!(semi >= base - 0.02);
}

#[test]
fn load_dbp15k_example_runs() {
    load_dbp15k::run_example().expect("load_dbp15k example should run");
}
