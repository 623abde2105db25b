#![no_main]

use libfuzzer_sys::fuzz_target;
use qinv::io::read_theta_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(theta) = read_theta_csv(data) {
        assert!(!theta.is_empty());
        assert!(theta.iter().all(|t| t.is_finite()));
    }
});
