#![no_main]

use borelsum::checkpoint::{parse_checkpoint, write_checkpoint};
use libfuzzer_sys::fuzz_target;

// The checkpoint parser consumes solver state written by earlier runs (or
// corrupted by anything in between): it must never panic, and anything it
// accepts must survive a bitwise round trip through the writer.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cp) = parse_checkpoint(text) else { return };
    let _ = cp.validate(&cp.field.domain, cp.potential_hash);
    let rewritten = write_checkpoint(&cp.field, cp.iteration, cp.potential_hash);
    let reparsed = parse_checkpoint(&rewritten).expect("rewritten checkpoint must parse");
    assert_eq!(reparsed.iteration, cp.iteration);
    assert_eq!(reparsed.potential_hash, cp.potential_hash);
    assert_eq!(reparsed.field.values.len(), cp.field.values.len());
    for (a, b) in reparsed.field.values.iter().zip(&cp.field.values) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
});
