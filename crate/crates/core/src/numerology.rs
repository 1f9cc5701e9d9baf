//! Fixed radio numerology of the sounding setup: band n78, 40 MHz, 30 kHz SCS.

/// FFT size of the frequency-domain channel estimate.
pub const FFT_SIZE: usize = 1536;
/// Length of the time-domain impulse-response estimate.
pub const TIME_EST_LEN: usize = 3072;
/// Number of physical resource blocks carrying per-RB SNR reports.
pub const N_PRB: usize = 106;
/// First active (nonzero) subcarrier bin.
pub const ACTIVE_START: usize = 144;
/// Number of active subcarriers.
pub const N_ACTIVE: usize = 1248;
/// One past the last active subcarrier bin.
pub const ACTIVE_END: usize = ACTIVE_START + N_ACTIVE;
/// Subcarrier spacing in hertz.
pub const SUBCARRIER_SPACING_HZ: f64 = 30_000.0;
/// Default SRS periodicity (80 ms, 12.5 probes/s).
pub const DEFAULT_PROBE_PERIOD_NS: u64 = 80_000_000;

/// Range of active bins within the FFT grid.
pub const fn active_bins() -> std::ops::Range<usize> {
    ACTIVE_START..ACTIVE_END
}
