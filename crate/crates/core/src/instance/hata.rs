//! Okumura-Hata median path loss, small/medium-city variant.

use crate::error::{Error, Result};

/// Distances below this are clamped; the log-distance term diverges near zero.
pub const MIN_DISTANCE_M: f64 = 10.0;

pub const MIN_CARRIER_MHZ: f64 = 150.0;
pub const MAX_CARRIER_MHZ: f64 = 1500.0;

/// Mobile antenna height correction a(h_m) for small and medium-sized cities.
pub fn mobile_height_correction(carrier_mhz: f64, ue_height_m: f64) -> f64 {
    let lf = carrier_mhz.log10();
    (1.1 * lf - 0.7) * ue_height_m - (1.56 * lf - 0.8)
}

/// Urban Hata path loss in dB.
///
/// `L = 69.55 + 26.16 log f - 13.82 log h_b - a(h_m) + (44.9 - 6.55 log h_b) log d_km`
pub fn hata_path_loss(distance_m: f64, carrier_mhz: f64, bs_height_m: f64, ue_height_m: f64) -> Result<f64> {
    for (name, v) in [
        ("distance_m", distance_m),
        ("carrier_mhz", carrier_mhz),
        ("bs_height_m", bs_height_m),
        ("ue_height_m", ue_height_m),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} is not finite ({v})")));
        }
    }
    if !(MIN_CARRIER_MHZ..=MAX_CARRIER_MHZ).contains(&carrier_mhz) {
        return Err(Error::InvalidArgument(format!(
            "carrier_mhz {carrier_mhz} outside the Hata range [{MIN_CARRIER_MHZ}, {MAX_CARRIER_MHZ}]"
        )));
    }
    if bs_height_m <= 0.0 || ue_height_m <= 0.0 {
        return Err(Error::InvalidArgument("antenna heights must be positive".to_string()));
    }

    let d_km = distance_m.max(MIN_DISTANCE_M) / 1000.0;
    let lf = carrier_mhz.log10();
    let lhb = bs_height_m.log10();
    Ok(
        69.55 + 26.16 * lf - 13.82 * lhb - mobile_height_correction(carrier_mhz, ue_height_m)
            + (44.9 - 6.55 * lhb) * d_km.log10(),
    )
}

/// Linear channel gain `10^(-L/10)` for a loss in dB.
pub fn gain_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}
