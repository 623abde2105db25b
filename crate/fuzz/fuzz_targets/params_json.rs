#![no_main]

use libfuzzer_sys::fuzz_target;
use qinv::ModelParams;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = serde_json::from_slice::<ModelParams>(data) {
        let text = serde_json::to_string(&params).unwrap();
        let back: ModelParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, params);
        assert!(params.s() > 0 && params.s() < params.b());
    }
});
