#![no_main]

use libfuzzer_sys::fuzz_target;
use qinv_cli::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        if let Some(sweep) = &cfg.sweep {
            for &v in &sweep.grid {
                cfg.params.with(sweep.axis, v).unwrap();
            }
        }
    }
});
