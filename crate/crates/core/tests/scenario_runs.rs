use std::collections::BTreeMap;

use llcartan_core::scenarios::{emit_report, find_scenario, registry, run_scenario, Format, VerificationReport};
use llcartan_core::Error;

fn overrides(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn json(r: &VerificationReport) -> String {
    let mut buf = Vec::new();
    emit_report(std::slice::from_ref(r), Format::Json, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn every_scenario_passes_under_several_seeds() {
    for seed in [1u64, 17, 4096] {
        for s in registry() {
            let mut o = overrides(&[("seed", seed as f64)]);
            if s.accepts("samples") {
                let default = s.params.iter().find(|p| p.name == "samples").unwrap().default;
                o.insert("samples".into(), default.min(20.0));
            }
            let r = s.run(&o).unwrap();
            let failed: Vec<_> = r.failures().map(|c| (c.id.clone(), c.residual)).collect();
            assert!(failed.is_empty(), "{} seed {seed}: {failed:?}", s.name);
        }
    }
}

#[test]
fn reports_depend_only_on_parameters() {
    let a = run_scenario("model-cone", &overrides(&[("samples", 10.0)])).unwrap();
    let b = run_scenario("model-cone", &overrides(&[("samples", 10.0)])).unwrap();
    assert_eq!(json(&a), json(&b));
    let c = run_scenario("model-cone", &overrides(&[("samples", 10.0), ("seed", 43.0)])).unwrap();
    assert_ne!(json(&a), json(&c));
    assert_eq!(c.environment.seed, 43);
    assert_eq!(c.parameters["samples"], 10.0);
}

#[test]
fn json_report_roundtrips() {
    let r = run_scenario("fg-scale-bundle", &BTreeMap::new()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json(&r)).unwrap();
    assert_eq!(v["scenario"], "fg-scale-bundle");
    assert!(v["wall_time_ms"].is_null());
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), r.checks.len());
    for (c, j) in r.checks.iter().zip(checks) {
        assert_eq!(j["id"], c.id.as_str());
        assert_eq!(j["residual"].as_f64().unwrap(), c.residual);
        assert_eq!(j["pass"], c.pass);
    }
    let model_flat = r.check("model-flat").unwrap();
    assert!(model_flat.expected_fail && model_flat.pass);
    assert!(!model_flat.holds());
}

#[test]
fn invalid_overrides_are_rejected() {
    let unknown = run_scenario("lie-algebra", &overrides(&[("c", 1.0)]));
    assert!(matches!(unknown, Err(Error::InvalidParameter(_))));
    let range = run_scenario("model-cone", &overrides(&[("m", 1.0)]));
    assert!(matches!(range, Err(Error::InvalidParameter(_))));
    let fractional = run_scenario("model-cone", &overrides(&[("samples", 2.5)]));
    assert!(matches!(fractional, Err(Error::InvalidParameter(_))));
    assert!(run_scenario("no-such-scenario", &BTreeMap::new()).is_err());
    assert!(find_scenario("warped-umbilical").is_ok());
}

#[test]
fn pipeline_does_not_need_a_ricci_flat_ambient() {
    // The cone family is Ricci-flat only at c = 1/2; the recovered h and Z
    // do not depend on that.
    for c in [0.0, 1.0] {
        let r = run_scenario("ambient-from-chart", &overrides(&[("family", 0.0), ("c", c)])).unwrap();
        assert!(r.all_passed(), "c = {c}");
    }
    let r = run_scenario("ambient-closed-forms", &BTreeMap::new()).unwrap();
    assert!(r.check("ricci-rho-rho-linear").unwrap().pass);
}

#[test]
fn tighter_tolerance_can_only_fail_more() {
    let mut r = run_scenario("warped-umbilical", &BTreeMap::new()).unwrap();
    assert!(r.all_passed());
    r.override_tolerance(1e-300);
    assert!(!r.all_passed());
    for c in r.checks.iter().filter(|c| c.expected_fail) {
        assert!(c.pass);
    }
}
