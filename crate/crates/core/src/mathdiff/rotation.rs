use super::linalg::{Mat3, Vec3};
use super::real::Real;

/// Body-to-world rotation for an orientation given as yaw, pitch and roll
/// (radians).
///
/// Intrinsic Z-Y′-X″: yaw about z, then pitch about the new y axis, then
/// roll about the new x axis, i.e. `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
/// Every module that turns an orientation into a frame goes through here.
pub fn rotation_from_ypr<T: Real>(yaw: T, pitch: T, roll: T) -> Mat3<T> {
    let (sy, cy) = (yaw.sin(), yaw.cos());
    let (sp, cp) = (pitch.sin(), pitch.cos());
    let (sr, cr) = (roll.sin(), roll.cos());
    Mat3 {
        rows: [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ],
    }
}

/// Direction of the body +x axis (boresight) in world coordinates.
pub fn boresight<T: Real>(yaw: T, pitch: T) -> Vec3<T> {
    let cp = pitch.cos();
    Vec3::new(yaw.cos() * cp, yaw.sin() * cp, -pitch.sin())
}
