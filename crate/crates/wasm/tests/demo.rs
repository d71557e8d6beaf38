//! The bindings run natively too; only the error path needs a JS host.

use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn rotation_demo_recovers_the_mixing_angle() {
    for angle in [10.0, 30.0, 55.0] {
        let r = parse(rotsense_wasm::rotation_demo(1, angle, 2000).map_err(|_| ()).unwrap());
        let got = r["recovered_angle_deg"].as_f64().unwrap();
        let err = (got - angle).abs().min(90.0 - (got - angle).abs());
        assert!(err < 3.0, "angle {angle}: recovered {got}");
        assert!(r["objective_after"].as_f64().unwrap() >= r["objective_before"].as_f64().unwrap());
        assert_eq!(r["observed"].as_array().unwrap().len(), 2000);
    }
}

#[test]
fn structured_data_rejects_and_fidelity_rises() {
    let t = parse(rotsense_wasm::null_test(2, true, 600, 4, 39).map_err(|_| ()).unwrap());
    assert!(t["p_var"].as_f64().unwrap() <= 0.05);
    assert_eq!(t["null_ts2"].as_array().unwrap().len(), 39);

    let f = parse(rotsense_wasm::fidelity(1, 300, 12, 4, 0.3).map_err(|_| ()).unwrap());
    let v: Vec<f64> = f.as_array().unwrap().iter().map(|p| p["fidelity"].as_f64().unwrap()).collect();
    assert_eq!(v.len(), 11);
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(*v.last().unwrap() > 1.0 - 1e-8);
}
