#![no_main]

use libfuzzer_sys::fuzz_target;
use qinv::ModelParams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(params) = ModelParams::from_kv_str(text) {
        let back = ModelParams::from_kv_str(&params.to_kv_string()).unwrap();
        assert_eq!(back, params);
    }
});
