use std::fs;

use panelcap_core::panel::{load_csv, write_csv, PanelError, Role, VariableMeta};
use panelcap_core::synth::{gen_reference_panel, ReferencePlan};

fn schema_of(names: &[String]) -> Vec<VariableMeta> {
    names.iter().map(|c| VariableMeta::new(c.clone(), Role::Control)).collect()
}

#[test]
fn reference_panel_round_trips_through_a_file() {
    let panel = gen_reference_panel(&ReferencePlan::new(3)).data;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    write_csv(&panel, fs::File::create(&path).unwrap()).unwrap();

    let back = load_csv(&path, &schema_of(panel.column_names())).unwrap();
    assert_eq!(back.n_rows(), 1230);
    assert_eq!(back.countries(), panel.countries());
    assert_eq!(back.years(), panel.years());
    for name in panel.column_names() {
        assert_eq!(back.column(name).unwrap(), panel.column(name).unwrap(), "{name}");
    }
}

#[test]
fn shuffled_rows_load_in_panel_order() {
    let panel = gen_reference_panel(&ReferencePlan::new(4)).data;
    let mut buf = Vec::new();
    write_csv(&panel, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1..].reverse();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rev.csv");
    fs::write(&path, lines.join("\n")).unwrap();

    let back = load_csv(&path, &schema_of(panel.column_names())).unwrap();
    let first = &panel.column_names()[0];
    assert_eq!(back.column(first).unwrap(), panel.column(first).unwrap());
}

#[test]
fn absent_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_csv(dir.path().join("none.csv"), &[]).unwrap_err();
    assert!(matches!(err, PanelError::Io(_)), "{err:?}");
}
