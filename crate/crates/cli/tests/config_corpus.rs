use serde_json::{json, Value};

use subquantum_cli::{parse_config, ConfigError};

fn base() -> Value {
    json!({
        "experiment": "balance",
        "oscillator": { "m": 1.0, "omega0": 1.0, "gamma": 2.0, "F0": 4.0, "dims": 2 },
        "bath": { "kT0": 1.0, "zeta": 2.0 },
        "numerics": {},
        "root_seed": 1,
        "output_dir": "out",
        "threads": "auto"
    })
}

fn with(path: &[&str], value: Value) -> Value {
    let mut doc = base();
    let (last, parents) = path.split_last().unwrap();
    let mut node = &mut doc;
    for p in parents {
        node = node.get_mut(*p).unwrap();
    }
    node[*last] = value;
    doc
}

fn without(path: &[&str]) -> Value {
    let mut doc = base();
    let (last, parents) = path.split_last().unwrap();
    let mut node = &mut doc;
    for p in parents {
        node = node.get_mut(*p).unwrap();
    }
    node.as_object_mut().unwrap().remove(*last);
    doc
}

fn numerics(n: Value) -> Value {
    with(&["numerics"], n)
}

#[test]
fn base_document_is_valid() {
    parse_config(&base().to_string()).unwrap();
}

#[test]
fn every_bad_config_is_caught_with_its_field_path() {
    let corpus: Vec<(&str, Value, &str)> = vec![
        ("negative mass", with(&["oscillator", "m"], json!(-1.0)), "oscillator.m"),
        ("zero omega0", with(&["oscillator", "omega0"], json!(0.0)), "oscillator.omega0"),
        ("negative gamma", with(&["oscillator", "gamma"], json!(-0.1)), "oscillator.gamma"),
        ("zero gamma for balance", with(&["oscillator", "gamma"], json!(0.0)), "oscillator.gamma"),
        ("zero F0 for balance", with(&["oscillator", "F0"], json!(0.0)), "oscillator.F0"),
        ("string mass", with(&["oscillator", "m"], json!("1")), "oscillator.m"),
        ("dims zero", with(&["oscillator", "dims"], json!(0)), "oscillator.dims"),
        ("fractional dims", with(&["oscillator", "dims"], json!(1.5)), "oscillator.dims"),
        ("misspelled omega0", with(&["oscillator", "omega_0"], json!(1.0)), "oscillator.omega_0"),
        ("missing F0", without(&["oscillator", "F0"]), "oscillator.F0"),
        ("missing bath for balance", without(&["bath"]), "bath"),
        ("zero kT0 for balance", with(&["bath", "kT0"], json!(0.0)), "bath.kT0"),
        ("negative zeta", with(&["bath", "zeta"], json!(-2.0)), "bath.zeta"),
        ("unknown experiment", with(&["experiment"], json!("bouncr")), "experiment"),
        ("unknown top-level key", with(&["seed"], json!(3)), "seed"),
        ("negative seed", with(&["root_seed"], json!(-3)), "root_seed"),
        ("zero threads", with(&["threads"], json!(0)), "threads"),
        ("bad threads string", with(&["threads"], json!("many")), "threads"),
        ("negative dt", numerics(json!({ "dt": -0.1 })), "numerics.dt"),
        ("zero M", numerics(json!({ "M": 0 })), "numerics.M"),
        ("unknown scheme", numerics(json!({ "scheme": "milstein" })), "numerics.scheme"),
        (
            "log times with dt",
            numerics(json!({ "dt": 0.1, "log_times": { "t_min": 0.1, "t_max": 10.0, "count": 5 } })),
            "numerics.dt",
        ),
        (
            "log times with euler",
            numerics(json!({ "scheme": "euler-maruyama", "log_times": { "t_min": 0.1, "t_max": 10.0, "count": 5 } })),
            "numerics.log_times",
        ),
        (
            "log times reversed",
            numerics(json!({ "log_times": { "t_min": 10.0, "t_max": 1.0, "count": 5 } })),
            "numerics.log_times.t_max",
        ),
        (
            "log times count 1",
            numerics(json!({ "log_times": { "t_min": 1.0, "t_max": 10.0, "count": 1 } })),
            "numerics.log_times.count",
        ),
        ("unknown drive", numerics(json!({ "drive": "elliptic" })), "numerics.drive"),
        ("too few samples per period", numerics(json!({ "samples_per_period": 4 })), "numerics.samples_per_period"),
        ("grid axis too small", numerics(json!({ "grid_shape": [4, 50] })), "numerics.grid_shape[0]"),
        ("negative spacing", numerics(json!({ "grid_spacing": [0.1, -0.1] })), "numerics.grid_spacing[1]"),
        (
            "grid length mismatch",
            numerics(json!({ "grid_shape": [11, 11], "grid_spacing": [0.1] })),
            "numerics.grid_spacing",
        ),
        ("bad spin sign", numerics(json!({ "spin_sign": "up" })), "numerics.spin_sign"),
        ("zero spin direction", numerics(json!({ "spin_u_dir": [0.0, 0.0, 0.0] })), "numerics.spin_u_dir"),
        ("short spin direction", numerics(json!({ "spin_u_dir": [1.0, 0.0] })), "numerics.spin_u_dir"),
        (
            "parallel spin directions",
            numerics(json!({ "spin_u_dir": [1.0, 0.0, 0.0], "spin_v_dir": [2.0, 0.0, 0.0] })),
            "numerics.spin_v_dir",
        ),
        ("unknown numerics key", numerics(json!({ "stepz": 10 })), "numerics.stepz"),
    ];
    assert!(corpus.len() >= 20);
    for (name, doc, path) in corpus {
        match parse_config(&doc.to_string()) {
            Err(e @ ConfigError::Schema(_)) => {
                assert!(
                    e.issues().iter().any(|i| i.path == path),
                    "{name}: expected an issue at `{path}`, got {:?}",
                    e.issues()
                );
            }
            other => panic!("{name}: expected a schema error at `{path}`, got {other:?}"),
        }
    }
}

#[test]
fn spinfield_rejects_one_dimensional_grids() {
    let mut doc = numerics(json!({ "grid_shape": [11], "grid_spacing": [0.1] }));
    doc["experiment"] = json!("spinfield");
    let err = parse_config(&doc.to_string()).unwrap_err();
    assert!(err.issues().iter().any(|i| i.path == "numerics.grid_shape"), "{err}");
}

#[test]
fn circular_drive_needs_two_axes() {
    let mut doc = with(&["oscillator", "dims"], json!(1));
    doc["experiment"] = json!("bouncer");
    doc["numerics"] = json!({ "drive": "circular", "omega": 2.0 });
    let err = parse_config(&doc.to_string()).unwrap_err();
    let paths: Vec<&str> = err.issues().iter().map(|i| i.path.as_str()).collect();
    assert!(paths.contains(&"numerics.drive") && paths.contains(&"numerics.omega"), "{paths:?}");
}

#[test]
fn walker_accepts_zero_gamma_and_zero_temperature() {
    let mut doc = with(&["oscillator", "gamma"], json!(0.0));
    doc["experiment"] = json!("walker");
    doc["bath"]["kT0"] = json!(0.0);
    parse_config(&doc.to_string()).unwrap();
}

#[test]
fn error_message_lists_every_issue() {
    let mut doc = with(&["oscillator", "m"], json!(-1.0));
    doc["bath"]["zeta"] = json!(0.0);
    doc["numerics"] = json!({ "M": 0 });
    let err = parse_config(&doc.to_string()).unwrap_err();
    let text = err.to_string();
    for p in ["oscillator.m", "bath.zeta", "numerics.M"] {
        assert!(text.contains(p), "{text}");
    }
}
