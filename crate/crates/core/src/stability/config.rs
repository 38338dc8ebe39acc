//! TOML description of a rig and the pose to check.
//!
//! ```toml
//! platform_mass = 0.602          # kg
//! payload_mass = 1.0             # kg
//! gravity = [0.0, 0.0, -9.81]    # m/s²
//! body_anchors = [[-0.057, -0.033, 0.0], ...]
//! base_anchors = [[-0.71, -0.43, 1.6], ...]
//! # or, instead of base_anchors, the measured cable vectors at this pose:
//! # cable_vectors = [[-0.653, -0.397, 0.9], ...]
//! tensions = [15.89, 11.19, 15.2, 12.57]   # N
//!
//! [pose]
//! position = [0.0, 0.0, 0.7]     # m
//! euler = [0.0, 0.0, 0.0]        # rad
//! convention = "xyz"             # or "zyx"
//! ```

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{EulerConvention, Geometry, Pose, REFERENCE_TENSIONS};
use crate::error::{Error, Result};

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    pub position: [f64; 3],
    #[serde(default)]
    pub euler: [f64; 3],
    #[serde(default)]
    pub convention: EulerConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub platform_mass: f64,
    #[serde(default)]
    pub payload_mass: f64,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    pub body_anchors: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_anchors: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cable_vectors: Option<Vec<[f64; 3]>>,
    pub tensions: Vec<f64>,
    pub pose: PoseConfig,
}

impl GeometryConfig {
    /// The reference rig at its test pose, given by cable vectors.
    pub fn reference() -> Self {
        let g = Geometry::reference_rig();
        let pose = Pose::reference();
        let l = super::cable_vectors(&g, &pose);
        Self {
            platform_mass: g.platform_mass,
            payload_mass: g.payload_mass,
            gravity: g.gravity.into(),
            body_anchors: g.body_anchors.iter().map(|&a| a.into()).collect(),
            base_anchors: None,
            cable_vectors: Some(l.iter().map(|&v| v.into()).collect()),
            tensions: REFERENCE_TENSIONS.to_vec(),
            pose: PoseConfig {
                position: pose.p.into(),
                euler: [0.0; 3],
                convention: EulerConvention::Xyz,
            },
        }
    }

    pub fn from_toml_str(text: &str, source: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
            Error::Parse {
                path: source.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds the geometry, pose and tensions, deriving base anchors as
    /// `b_i = p + R·a_i + l_i` when cable vectors are given.
    pub fn resolve(&self) -> Result<(Geometry, Pose, Vec<f64>)> {
        let key = |key: &str, msg: String| Error::ConfigKey { key: key.into(), msg };
        let pose = Pose::new(
            self.pose.position.into(),
            self.pose.euler.into(),
            self.pose.convention,
        )?;
        let n = self.body_anchors.len();
        if n == 0 {
            return Err(key("body_anchors", "at least one cable is required".into()));
        }
        if self.tensions.len() != n {
            return Err(key("tensions", format!("expected {n} values, found {}", self.tensions.len())));
        }
        let body: Vec<Vector3<f64>> = self.body_anchors.iter().map(|&a| a.into()).collect();
        let base = match (&self.base_anchors, &self.cable_vectors) {
            (Some(_), Some(_)) => {
                return Err(key("cable_vectors", "give either base_anchors or cable_vectors, not both".into()))
            }
            (None, None) => return Err(key("base_anchors", "missing (or give cable_vectors)".into())),
            (Some(b), None) => {
                if b.len() != n {
                    return Err(key("base_anchors", format!("expected {n} anchors, found {}", b.len())));
                }
                b.iter().map(|&v| v.into()).collect()
            }
            (None, Some(l)) => {
                if l.len() != n {
                    return Err(key("cable_vectors", format!("expected {n} vectors, found {}", l.len())));
                }
                l.iter()
                    .zip(&body)
                    .map(|(&l, a)| pose.p + pose.rotation() * a + Vector3::from(l))
                    .collect()
            }
        };
        let g = Geometry::new(base, body, self.platform_mass, self.payload_mass, self.gravity.into())?;
        Ok((g, pose, self.tensions.clone()))
    }
}
