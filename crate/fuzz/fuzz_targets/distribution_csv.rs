#![no_main]

use libfuzzer_sys::fuzz_target;
use qinv::io::read_distribution_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = read_distribution_csv(data) {
        let len = (d.trunc.cap1 as usize + 1) * (d.trunc.cap2 as usize + 1) * (d.b as usize + 1);
        assert_eq!(d.probabilities.len(), len);
        assert!(d.probabilities.iter().all(|p| p.is_finite()));
    }
});
