//! Unit policy and conversion helpers.
//!
//! Public interfaces use positions in micrometres, velocities in mm/s,
//! accelerations in mm/s² and time in seconds. Internal computation (Kalman
//! states, simulation kinematics) uses a single consistent system of
//! micrometres and seconds, so velocities are µm/s and accelerations µm/s².
//! These helpers are the only place the scale factor appears.

/// Micrometres per millimetre.
pub const UM_PER_MM: f64 = 1_000.0;

/// mm/s → µm/s.
#[inline]
pub fn mm_s_to_um_s(v: f64) -> f64 {
    v * UM_PER_MM
}

/// µm/s → mm/s.
#[inline]
pub fn um_s_to_mm_s(v: f64) -> f64 {
    v / UM_PER_MM
}

/// mm/s² → µm/s².
#[inline]
pub fn mm_s2_to_um_s2(a: f64) -> f64 {
    a * UM_PER_MM
}

/// µm/s² → mm/s².
#[inline]
pub fn um_s2_to_mm_s2(a: f64) -> f64 {
    a / UM_PER_MM
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert_eq!(um_s_to_mm_s(mm_s_to_um_s(3.25)), 3.25);
        assert_eq!(um_s2_to_mm_s2(mm_s2_to_um_s2(-112.5)), -112.5);
    }

    #[test]
    fn scale() {
        assert_eq!(mm_s_to_um_s(3.0), 3_000.0);
        assert_eq!(mm_s2_to_um_s2(75.0), 75_000.0);
    }
}
