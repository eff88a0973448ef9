//! Control parameter spaces shared by the simulator and the agents.

/// Allowed time-to-trigger values in ms, ascending.
pub const TTT_VALUES_MS: [u32; 15] = [40, 64, 80, 100, 128, 160, 256, 320, 480, 512, 640, 1024, 1280, 2560, 5120];

pub const CIO_MIN_DB: i32 = -24;
pub const CIO_MAX_DB: i32 = 24;

pub const DEFAULT_TTT_MS: u32 = 320;
pub const DEFAULT_CIO_DB: i32 = 0;

/// Continuous box used by the actor for the TTT action.
pub const TTT_BOX_MS: (f64, f64) = (40.0, 5120.0);
/// Continuous box used by the actor for each CIO action component.
pub const CIO_BOX_DB: (f64, f64) = (-24.0, 24.0);

pub fn ttt_index(ttt_ms: u32) -> Option<usize> {
    TTT_VALUES_MS.iter().position(|&v| v == ttt_ms)
}

pub fn is_valid_ttt(ttt_ms: u32) -> bool {
    ttt_index(ttt_ms).is_some()
}

pub fn is_valid_cio(cio_db: i32) -> bool {
    (CIO_MIN_DB..=CIO_MAX_DB).contains(&cio_db)
}

/// All CIO values, ascending.
pub fn cio_values() -> impl Iterator<Item = i32> {
    CIO_MIN_DB..=CIO_MAX_DB
}
