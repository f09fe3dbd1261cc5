use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use psid::harness::{reproduce_table1, run_scenario, RunOptions, Scenario, ScenarioConfig};

fn collect(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn identify_into(dir: &Path, seed: u64) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/heatrod.toml");
    let cfg = ScenarioConfig::load(&path).unwrap();
    let mut sc = Scenario::from_config(&cfg).unwrap();
    RunOptions { out: Some(dir.to_path_buf()), seed: Some(seed), ..Default::default() }.apply(&mut sc).unwrap();
    run_scenario(&sc).unwrap();
}

#[test]
fn solved_pipeline_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    identify_into(a.path(), 7);
    identify_into(b.path(), 7);
    let (fa, fb) = (collect(a.path()), collect(b.path()));
    assert!(fa.len() >= 8);
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{} differs", k.display());
    }
}

#[test]
fn concurrent_table_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let opts = RunOptions { dt: Some(0.02), ..Default::default() };
    reproduce_table1(a.path(), &opts).unwrap();
    reproduce_table1(b.path(), &opts).unwrap();
    let (fa, fb) = (collect(a.path()), collect(b.path()));
    assert_eq!(fa.len(), fb.len());
    assert!(fa == fb);
}
