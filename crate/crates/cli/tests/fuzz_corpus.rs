use std::fs;
use std::path::PathBuf;

use qinv_cli::config::ExperimentConfig;

#[test]
fn experiment_config_seeds() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/experiment_config");
    let mut ok = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for path in names {
        let text = fs::read_to_string(&path).unwrap();
        if let Ok(cfg) = ExperimentConfig::parse(&text) {
            if let Some(sw) = &cfg.sweep {
                for &v in &sw.grid {
                    cfg.params.with(sw.axis, v).unwrap();
                }
            }
            ok.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    assert_eq!(ok, ["json_full", "kv_full"]);
}
