use syncap_core::domain::SystemConfig;
use syncap_core::formulator::build_coupled;
use syncap_core::scenario::{SynthParams, synthesize_weather};
use syncap_core::simplex::{SolveOptions, solve};

#[test]
fn one_probe() {
    let cfg = SystemConfig::from_json(include_str!("../../../configs/default.json")).unwrap();
    let scen = synthesize_weather(42, 336, 3, &SynthParams::default()).unwrap();
    let (lp, _) = build_coupled(&cfg, &scen, syncap_core::FacilityKind::PemElectrolyzer).unwrap();
    let sol = solve(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, syncap_core::SolveStatus::Optimal);
}
