use std::time::Instant;
use syncap_core::domain::SystemConfig;
use syncap_core::formulator::build_coupled;
use syncap_core::scenario::{SynthParams, synthesize_weather};
use syncap_core::simplex::{SolveOptions, solve};

fn run(h: usize, s: usize) {
    let cfg = SystemConfig::from_json(include_str!("../../../configs/default.json")).unwrap();
    let scen = synthesize_weather(42, h, s, &SynthParams::default()).unwrap();
    let (lp, _) = build_coupled(&cfg, &scen, syncap_core::FacilityKind::PemElectrolyzer).unwrap();
    let t1 = Instant::now();
    let sol = solve(&lp, &SolveOptions::default()).unwrap();
    eprintln!(
        "H={h} S={s}: cols={} rows={} solve={:?} status={} iters={}",
        lp.n_cols(), lp.n_rows(), t1.elapsed(), sol.status, sol.iterations
    );
    assert_eq!(sol.status, syncap_core::SolveStatus::Optimal);
}

#[test]
fn perf_probe() {
    run(168, 1);
    run(168, 2);
    run(336, 3);
}
