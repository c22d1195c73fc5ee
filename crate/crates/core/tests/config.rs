use fnls::experiment::config::{RawConfig, KEYS};
use fnls::experiment::{load_config, parse_config, ConfigErrorKind, ExperimentConfig};

const MINIMAL: &str = "d = 2\ns = 0.8\nalpha = 2\nomega = 1\n";

#[test]
fn minimal_file_takes_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.params.dim, 2);
    assert_eq!(cfg.params.alpha, 2.0);
    assert_eq!(cfg.grid.points, 256);
    assert_eq!(cfg.grid.half_length, 20.0);
    assert_eq!(cfg.evolve.dt0, 1e-3);
    assert_eq!(cfg.evolve.blowup_hs_factor, 100.0);
    assert_eq!(cfg.lambda0, 1.1);
    assert!(cfg.deterministic);
    assert_eq!(cfg.output_dir.to_str(), Some("out"));
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = "# header\n\nd = 1   # trailing\ns=0.5\nalpha = 1\nomega = 1\n  # indented comment\n";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.params.s, 0.5);
}

#[test]
fn error_kinds_are_distinct() {
    let kind = |text: &str| parse_config(text).unwrap_err().kind;
    assert_eq!(kind(&format!("{MINIMAL}colour = blue\n")), ConfigErrorKind::UnknownKey);
    assert_eq!(kind(&format!("{MINIMAL}N = many\n")), ConfigErrorKind::Parse);
    assert_eq!(kind(&format!("{MINIMAL}this line has no separator\n")), ConfigErrorKind::Parse);
    assert_eq!(kind(&format!("{MINIMAL}d = 3\n")), ConfigErrorKind::Parse);
    assert_eq!(kind("d = 2\ns = 0.8\nalpha = 2\n"), ConfigErrorKind::MissingKey);
    assert_eq!(kind(&format!("{MINIMAL}N = 100\n")), ConfigErrorKind::Range);
    assert_eq!(kind(&format!("{MINIMAL}dt_min = 1\n")), ConfigErrorKind::Range);
    assert_eq!(kind(&format!("{MINIMAL}lambda0 = 0\n")), ConfigErrorKind::Range);
    let missing = load_config(std::path::Path::new("/nonexistent/run.cfg")).unwrap_err();
    assert_eq!(missing.kind, ConfigErrorKind::MissingFile);
    let codes: std::collections::BTreeSet<_> = [
        ConfigErrorKind::MissingFile,
        ConfigErrorKind::Parse,
        ConfigErrorKind::UnknownKey,
        ConfigErrorKind::MissingKey,
        ConfigErrorKind::Range,
    ]
    .iter()
    .map(|k| k.code())
    .collect();
    assert_eq!(codes.len(), 5);
}

#[test]
fn alpha_above_energy_critical_bound_names_alpha_star() {
    let err = parse_config("d = 2\ns = 0.8\nalpha = 9\nomega = 1\n").unwrap_err();
    assert_eq!(err.kind, ConfigErrorKind::Range);
    assert!(err.message.contains("alpha*"), "{}", err.message);
    assert!(err.message.contains("4s/(d-2s)"), "{}", err.message);
    assert!(err.message.contains("8.000000"), "{}", err.message);
}

#[test]
fn epsilon_bound_applies_in_the_theorem_regime() {
    // (2s-1) alpha / (2s) = 0.75 for s = 0.8, alpha = 2
    let err = parse_config(&format!("{MINIMAL}epsilon = 0.8\n")).unwrap_err();
    assert_eq!(err.kind, ConfigErrorKind::Range);
    assert!(err.message.contains("(2s-1)alpha/(2s)"));
    assert!(parse_config(&format!("{MINIMAL}epsilon = 0.7\n")).is_ok());
}

#[test]
fn serialization_round_trips() {
    let text = "d = 3\ns = 0.9\nalpha = 1\nomega = 2.5\nL = 12.5\nN = 64\ndt0 = 0.0003\ndt_min = 1e-10\n\
                t_max = 2\nlambda0 = 1.25\nR = 3\nepsilon = 0.05\ncfl_const = 0.2\ndiag_stride = 4\n\
                snapshot_stride = 100\ndeterministic = false\noutput_dir = runs/a b\nblowup_hs_factor = 50\nblowup_linf = 1e5\n";
    let cfg = parse_config(text).unwrap();
    let again = parse_config(&cfg.to_text()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.output_dir.to_str(), Some("runs/a b"));
    let text = cfg.to_text();
    let written: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
    assert_eq!(written, KEYS.to_vec());
}

#[test]
fn overrides_replace_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, format!("{MINIMAL}lambda0 = 1.1\n")).unwrap();
    let cfg = ExperimentConfig::load_with_overrides(&path, &["lambda0=0.9".into(), "N = 64".into()]).unwrap();
    assert_eq!(cfg.lambda0, 0.9);
    assert_eq!(cfg.grid.points, 64);
    let err = ExperimentConfig::load_with_overrides(&path, &["bogus=1".into()]).unwrap_err();
    assert_eq!(err.kind, ConfigErrorKind::UnknownKey);
    let mut raw = RawConfig::parse(MINIMAL).unwrap();
    assert_eq!(raw.set_pair("no_separator").unwrap_err().kind, ConfigErrorKind::Parse);
}
