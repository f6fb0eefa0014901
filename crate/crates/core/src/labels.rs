//! Joint geometry → body-orientation angle → 8-way class, and angle arithmetic.
//!
//! Angles are in degrees, wrapped to `[0, 360)`. An orientation angle of 0°
//! means the body faces the observer; angles grow counter-clockwise seen from
//! above (Z up). Class `c` covers the 45° sector centred on `c · 45°`.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 8;
pub const SECTOR_DEGREES: f64 = 45.0;

/// Wraps any finite angle into `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid of a tiny negative value rounds to exactly 360.0
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Bearing of the vector `(dx, dy)` in degrees, counter-clockwise from +X.
pub fn bearing_degrees(dx: f64, dy: f64) -> f64 {
    wrap_degrees(dy.atan2(dx).to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct OrientationAngle(f64);

impl OrientationAngle {
    pub fn new(degrees: f64) -> Self {
        OrientationAngle(wrap_degrees(degrees))
    }

    pub fn degrees(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct OrientationClass(u8);

impl OrientationClass {
    pub const FRONTAL: OrientationClass = OrientationClass(0);

    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_CLASSES {
            Ok(OrientationClass(index as u8))
        } else {
            Err(Error::InvalidArgument(format!("orientation class {index} out of range 0..8")))
        }
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    /// All eight classes in index order.
    pub fn all() -> impl Iterator<Item = OrientationClass> {
        (0..NUM_CLASSES as u8).map(OrientationClass)
    }

    /// The class seen when the observed angle is negated (mirror about the view axis).
    pub fn mirrored(self) -> Self {
        OrientationClass(((NUM_CLASSES as u8) - self.0) % NUM_CLASSES as u8)
    }
}

impl TryFrom<u8> for OrientationClass {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        OrientationClass::new(usize::from(v))
    }
}

impl From<OrientationClass> for u8 {
    fn from(c: OrientationClass) -> u8 {
        c.0
    }
}

/// Sector lookup: `round(a / 45) mod 8`, with exact half-way angles rounding up.
pub fn angle_to_class(angle: OrientationAngle) -> OrientationClass {
    let k = (angle.degrees() / SECTOR_DEGREES + 0.5).floor() as i64;
    OrientationClass(k.rem_euclid(NUM_CLASSES as i64) as u8)
}

pub fn class_to_angle(class: OrientationClass) -> f64 {
    class.index() as f64 * SECTOR_DEGREES
}

/// Shortest distance between two directions on the circle, in `[0, 180]`.
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rotation about the Z axis by `deg` degrees (counter-clockwise from above).
    pub fn rotate_z(self, deg: f64) -> Point3 {
        let (s, c) = deg.to_radians().sin_cos();
        Point3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

/// Neck and upper-leg (hip) joint positions, metres, Z up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointTriple {
    pub neck: Point3,
    pub right_hip: Point3,
    pub left_hip: Point3,
}

impl JointTriple {
    pub fn rotate_z(self, deg: f64) -> Self {
        JointTriple {
            neck: self.neck.rotate_z(deg),
            right_hip: self.right_hip.rotate_z(deg),
            left_hip: self.left_hip.rotate_z(deg),
        }
    }

    /// Swaps the left and right hips.
    pub fn mirrored(self) -> Self {
        JointTriple { right_hip: self.left_hip, left_hip: self.right_hip, ..self }
    }

    /// `(neck → right hip) × (neck → left hip)`: points out of the chest.
    pub fn forward_vector(&self) -> Point3 {
        self.right_hip.sub(self.neck).cross(self.left_hip.sub(self.neck))
    }
}

/// Body orientation relative to an observer.
///
/// `observer_bearing` is the bearing (degrees, CCW from +X) from the person
/// toward the observer. The result is the body-forward bearing minus that
/// bearing, so 0° means the person faces the observer.
pub fn body_orientation_from_joints(joints: &JointTriple, observer_bearing: f64) -> Result<OrientationAngle> {
    let a = joints.right_hip.sub(joints.neck);
    let b = joints.left_hip.sub(joints.neck);
    let f = a.cross(b);
    let scale = a.norm() * b.norm();
    if !(scale > 0.0) || f.norm() <= 1e-12 * scale {
        return Err(Error::DegeneratePose("joints are collinear".into()));
    }
    let planar = f.x.hypot(f.y);
    if planar <= 1e-12 * scale {
        return Err(Error::DegeneratePose("forward vector is vertical".into()));
    }
    Ok(OrientationAngle::new(f.y.atan2(f.x).to_degrees() - observer_bearing))
}

/// One row of a joint-coordinate CSV together with its derived labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    pub frame_id: String,
    pub joints: JointTriple,
    pub observer_bearing: f64,
    pub angle: OrientationAngle,
    pub class: OrientationClass,
}

/// Reads `frameId, neckX, neckY, neckZ, rHipX, rHipY, rHipZ, lHipX, lHipY, lHipZ, observerBearingDeg`
/// rows after one header line.
pub fn import_joint_csv<R: Read>(reader: R) -> Result<Vec<JointRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("joint CSV: {e}")))?;
        if row.len() != 11 {
            return Err(Error::Parse(format!(
                "joint CSV row {}: expected 11 fields, found {}",
                line + 2,
                row.len()
            )));
        }
        let nums = (1..11)
            .map(|i| {
                row[i].parse::<f64>().map_err(|_| {
                    Error::Parse(format!("joint CSV row {}: field {} is not a number: {:?}", line + 2, i + 1, &row[i]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let p = |k: usize| Point3::new(nums[k], nums[k + 1], nums[k + 2]);
        let joints = JointTriple { neck: p(0), right_hip: p(3), left_hip: p(6) };
        let observer_bearing = nums[9];
        let angle = body_orientation_from_joints(&joints, observer_bearing)?;
        out.push(JointRecord {
            frame_id: row[0].to_string(),
            joints,
            observer_bearing,
            angle,
            class: angle_to_class(angle),
        });
    }
    Ok(out)
}
