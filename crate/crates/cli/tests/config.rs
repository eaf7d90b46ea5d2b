use std::f64::consts::PI;

use wgbound_cli::config::{apply_override, Emit, RegimeChoice};
use wgbound_cli::ExperimentConfig;

const BASE: &str = r#"
[waveguide]
intervals = [["-pi/3", "2*pi/3"]]

[potential]
kind = "box"
amplitude = [-1.0, 0.5]
half_widths = [0.5, 0.25]

[scaling]
alpha = 0.25
h = [0.1, 0.05]
"#;

#[test]
fn base_config_reads() {
    let cfg = ExperimentConfig::from_str_with(BASE, &[]).unwrap();
    let cs = cfg.cross_section().unwrap();
    assert_eq!(cs.intervals(), &[(-PI / 3.0, 2.0 * PI / 3.0)]);
    let v = cfg.potential().unwrap();
    assert_eq!(v.amplitude(), num_complex::Complex64::new(-1.0, 0.5));
    assert_eq!(cfg.h_values().unwrap(), vec![0.1, 0.05]);
    assert_eq!(cfg.scaling.regime, RegimeChoice::Auto);
    assert_eq!(cfg.output.emit, Emit::Csv);
    assert!(!cfg.oracle.enabled);
}

#[test]
fn unknown_keys_are_rejected() {
    let text = format!("{BASE}\n[solver]\nj_maximum = 4\n");
    let err = ExperimentConfig::from_str_with(&text, &[]).unwrap_err();
    assert_eq!(err.kind(), "config");
    assert!(err.to_string().contains("j_maximum"), "{err}");
    let err = ExperimentConfig::from_str_with(BASE, &["extra.key=1".into()]).unwrap_err();
    assert!(err.to_string().contains("extra"), "{err}");
}

#[test]
fn fields_foreign_to_the_kind_are_rejected() {
    let err = ExperimentConfig::from_str_with(BASE, &["potential.a=0.5".into()]).unwrap_err();
    assert!(err.to_string().contains("potential.a"), "{err}");
}

#[test]
fn overrides_replace_and_remove() {
    let cfg = ExperimentConfig::from_str_with(
        BASE,
        &[
            "scaling.alpha=-0.5".into(),
            "scaling.h=".into(),
            "scaling.h_range={ start = 0.4, ratio = 0.5, count = 3 }".into(),
            "output.stem=run".into(),
            "oracle.enabled=true".into(),
        ],
    )
    .unwrap();
    assert_eq!(cfg.scaling.alpha, -0.5);
    assert_eq!(cfg.h_values().unwrap(), vec![0.4, 0.2, 0.1]);
    assert_eq!(cfg.output.stem, "run");
    assert!(cfg.oracle.enabled);
}

#[test]
fn invalid_values_are_rejected() {
    for o in [
        "scaling.alpha=1.0",
        "scaling.h=[0.1, 1.5]",
        "scaling.h=[]",
        "potential.half_widths=[0.5]",
        "waveguide.intervals=[[1.0, -1.0]]",
        "solver.j_max=0",
    ] {
        assert!(ExperimentConfig::from_str_with(BASE, &[o.into()]).is_err(), "{o} accepted");
    }
    let both = ExperimentConfig::from_str_with(BASE, &["scaling.h_range={ start = 0.4, ratio = 0.5, count = 3 }".into()]);
    assert!(both.is_err());
}

#[test]
fn malformed_override_is_a_usage_error() {
    let mut t = toml::Table::new();
    assert_eq!(apply_override(&mut t, "noequals").unwrap_err().kind(), "usage");
    assert_eq!(apply_override(&mut t, "a..b=1").unwrap_err().kind(), "usage");
    apply_override(&mut t, "a.b=x y").unwrap();
    assert_eq!(t["a"]["b"].as_str(), Some("x y"));
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
