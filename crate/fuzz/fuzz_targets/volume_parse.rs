#![no_main]

use colossal::volume::{parse_volume, render_volume};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = parse_volume(data) {
        // anything accepted must re-encode and re-parse to the same grid
        let bytes = render_volume(&grid);
        let again = parse_volume(&bytes).expect("canonical encoding parses");
        assert_eq!(again.dims(), grid.dims());
        assert_eq!(again.voxels(), grid.voxels());
        assert_eq!(render_volume(&again), bytes);
    }
});
