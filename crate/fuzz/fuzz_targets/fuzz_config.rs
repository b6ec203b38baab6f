#![no_main]

use borelsum::config::RunConfig;
use libfuzzer_sys::fuzz_target;

// The run-configuration parser must be total: arbitrary text either parses
// into a validated RunConfig or returns a structured error, never panics.
// When it parses, the cheap derived objects (potential, domain, sample
// grid, hash) must also be constructible without panicking.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_text(text) else { return };
    let _ = cfg.hash();
    let _ = cfg.t_axis();
    let _ = cfg.xs();
    let domain = cfg.domain();
    let _ = domain.descriptor();
    if let Ok(p) = cfg.build_potential() {
        let _ = p.descriptor();
        let _ = domain.validate(&p);
    }
    let _ = cfg.branch_spec();
});
