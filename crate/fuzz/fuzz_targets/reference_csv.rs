#![no_main]

use libfuzzer_sys::fuzz_target;
use shared_steer::reasoning::ReferenceTrajectory;

fuzz_target!(|data: &[u8]| {
    if let Ok(reference) = ReferenceTrajectory::from_csv(data) {
        let mid = 0.5 * (reference.start() + reference.end());
        assert!(reference.speed_at(mid).is_finite());
        assert!(reference.lateral_at(mid).is_finite());
    }
});
