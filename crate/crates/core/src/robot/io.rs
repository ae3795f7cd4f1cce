//! TOML model documents.
//!
//! ```toml
//! [robot]
//! name = "rr_planar"
//! gravity = [0.0, -9.81, 0.0]
//!
//! [[robot.joints]]
//! axis = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]   # (ω, v) in the child frame
//! actuated = true
//! home = { rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], translation = [0.0, 0.0, 0.0] }
//! limits = { q_min = -3.14, q_max = 3.14, vel_max = 5.0, acc_max = 20.0, torque_max = 50.0 }
//!
//! [[robot.links]]
//! mass = 1.0
//! inertia = [0.01, 0.0, 0.0, 0.0, 0.08, 0.0, 0.0, 0.0, 0.08]   # about the COM, row-major
//! com = [0.5, 0.0, 0.0]
//! spheres = [{ offset = [0.5, 0.0, 0.0], radius = 0.05 }]
//!
//! [robot.end_effector]
//! rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
//! translation = [1.0, 0.0, 0.0]
//! ```

use super::{CollisionSphere, JointLimits, JointSpec, LinkSpec, RobotModel};
use crate::error::{Error, Result};
use crate::spatial::{PoseTransform, ScrewAxis, SpatialInertia};
use nalgebra::{Matrix3, Vector3, Vector6};
use serde::Deserialize;
use std::path::Path;
use toml::Spanned;

pub const BUNDLED_MODELS: [&str; 4] = ["acrobot", "rr_planar", "arm3", "arm7"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    robot: RobotDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDoc {
    name: String,
    #[serde(default = "default_gravity")]
    gravity: [f64; 3],
    joints: Vec<Spanned<JointDoc>>,
    links: Vec<Spanned<LinkDoc>>,
    #[serde(default)]
    end_effector: Option<PoseDoc>,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    axis: [f64; 6],
    home: PoseDoc,
    limits: JointLimits,
    actuated: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDoc {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl PoseDoc {
    fn to_pose(&self) -> PoseTransform {
        PoseTransform::new(Matrix3::from_row_slice(&self.rotation), Vector3::from(self.translation))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    mass: f64,
    inertia: [f64; 9],
    com: [f64; 3],
    #[serde(default)]
    spheres: Vec<SphereDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereDoc {
    offset: [f64; 3],
    radius: f64,
}

fn line_of(doc: &str, offset: usize) -> usize {
    doc[..offset.min(doc.len())].matches('\n').count() + 1
}

/// Parses and validates a model document.
pub fn load_model(document: &str) -> Result<RobotModel> {
    let parsed: Document = toml::from_str(document).map_err(|e| Error::Model(e.to_string()))?;
    let r = parsed.robot;
    let mut joints = Vec::with_capacity(r.joints.len());
    for (j, js) in r.joints.iter().enumerate() {
        let line = line_of(document, js.span().start);
        let jd = js.get_ref();
        let home = jd.home.to_pose();
        if !home.is_valid(1e-6) {
            return Err(Error::Model(format!("joints[{j}].home (line {line}): rotation is not orthonormal")));
        }
        joints.push(JointSpec {
            screw_axis: ScrewAxis(Vector6::from_row_slice(&jd.axis)),
            home: home.orthonormalized(),
            limits: jd.limits,
            actuated: jd.actuated,
        });
    }
    let links = r
        .links
        .iter()
        .map(|ls| {
            let ld = ls.get_ref();
            LinkSpec {
                inertia: SpatialInertia::new(ld.mass, Matrix3::from_row_slice(&ld.inertia), Vector3::from(ld.com)),
                spheres: ld
                    .spheres
                    .iter()
                    .map(|s| CollisionSphere { offset: Vector3::from(s.offset), radius: s.radius })
                    .collect(),
            }
        })
        .collect();
    let model = RobotModel {
        name: r.name,
        joints,
        links,
        gravity: Vector3::from(r.gravity),
        end_effector: r.end_effector.as_ref().map(PoseDoc::to_pose).unwrap_or_default(),
    };
    model.validate().map_err(|msg| {
        // point at the entry that failed when the message names one
        let line = locate(&msg, &r.joints, &r.links, document);
        Error::Model(match line {
            Some(l) => format!("{msg} (line {l})"),
            None => msg,
        })
    })?;
    Ok(model)
}

fn locate(msg: &str, joints: &[Spanned<JointDoc>], links: &[Spanned<LinkDoc>], doc: &str) -> Option<usize> {
    let index = |prefix: &str| -> Option<usize> {
        let rest = msg.strip_prefix(prefix)?;
        rest[..rest.find(']')?].parse().ok()
    };
    if let Some(j) = index("joints[") {
        return joints.get(j).map(|s| line_of(doc, s.span().start));
    }
    if let Some(l) = index("links[") {
        return links.get(l).map(|s| line_of(doc, s.span().start));
    }
    None
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<RobotModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_model(&text).map_err(|e| match e {
        Error::Model(m) => Error::Model(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// One of the models shipped with the crate, by name.
pub fn bundled_model(name: &str) -> Result<RobotModel> {
    let doc = match name {
        "acrobot" => include_str!("../../data/models/acrobot.toml"),
        "rr_planar" => include_str!("../../data/models/rr_planar.toml"),
        "arm3" => include_str!("../../data/models/arm3.toml"),
        "arm7" => include_str!("../../data/models/arm7.toml"),
        _ => {
            return Err(Error::Model(format!(
                "no bundled model named {name:?} (available: {})",
                BUNDLED_MODELS.join(", ")
            )))
        }
    };
    load_model(doc)
}
