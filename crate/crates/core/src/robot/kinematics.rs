use super::RobotModel;
use crate::error::{Error, Result};
use crate::spatial::{adjoint_map, PoseTransform};
use nalgebra::{DVector, Matrix6xX};

/// World poses of every link frame and of the end effector.
#[derive(Debug, Clone, PartialEq)]
pub struct FkResult {
    pub link_poses: Vec<PoseTransform>,
    pub end_effector: PoseTransform,
}

pub(crate) fn check_len(model: &RobotModel, v: &DVector<f64>, what: &str) -> Result<()> {
    if v.len() != model.dof() {
        return Err(Error::Model(format!("{what} has length {}, model has {} joints", v.len(), model.dof())));
    }
    Ok(())
}

pub fn forward_kinematics(model: &RobotModel, q: &DVector<f64>) -> Result<FkResult> {
    check_len(model, q, "q")?;
    let mut link_poses = Vec::with_capacity(model.dof());
    let mut t = PoseTransform::identity();
    for (joint, &qj) in model.joints.iter().zip(q.iter()) {
        t = t.compose(&joint.transform(qj));
        link_poses.push(t);
    }
    let end_effector = t.compose(&model.end_effector);
    Ok(FkResult { link_poses, end_effector })
}

/// Body Jacobian of the end-effector pose: column `j` is the end-effector
/// frame twist produced by a unit rate of joint `j`.
pub fn end_effector_jacobian(model: &RobotModel, q: &DVector<f64>) -> Result<Matrix6xX<f64>> {
    let fk = forward_kinematics(model, q)?;
    let ee = fk.end_effector;
    let mut jac = Matrix6xX::zeros(model.dof());
    for (j, joint) in model.joints.iter().enumerate() {
        // transform from link j to the end effector
        let t_j_ee = fk.link_poses[j].inverse().compose(&ee);
        let col = adjoint_map(&t_j_ee.inverse()) * joint.screw_axis.0;
        jac.set_column(j, &col);
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::bundled_model;
    use crate::spatial::so3_log;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn planar_rr_end_effector_positions() {
        let m = bundled_model("rr_planar").unwrap();
        let fk = forward_kinematics(&m, &DVector::from_vec(vec![0.0, 0.0])).unwrap();
        assert!((fk.end_effector.translation - nalgebra::Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        let fk = forward_kinematics(&m, &DVector::from_vec(vec![FRAC_PI_2, 0.0])).unwrap();
        assert!((fk.end_effector.translation - nalgebra::Vector3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_configuration_is_home_chain() {
        let m = bundled_model("arm7").unwrap();
        let fk = forward_kinematics(&m, &DVector::zeros(7)).unwrap();
        let mut t = PoseTransform::identity();
        for (j, joint) in m.joints.iter().enumerate() {
            t = t.compose(&joint.home);
            assert!((fk.link_poses[j].translation - t.translation).norm() < 1e-12);
            assert!((fk.link_poses[j].rotation - t.rotation).abs().max() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let m = bundled_model("rr_planar").unwrap();
        assert!(forward_kinematics(&m, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = bundled_model("arm7").unwrap();
        let q = DVector::from_vec(vec![0.3, -0.5, 0.9, 1.1, -0.4, 0.7, 0.2]);
        let jac = end_effector_jacobian(&m, &q).unwrap();
        let ee = forward_kinematics(&m, &q).unwrap().end_effector;
        let h = 1e-6;
        for j in 0..7 {
            let mut qp = q.clone();
            qp[j] += h;
            let mut qm = q.clone();
            qm[j] -= h;
            let tp = ee.inverse().compose(&forward_kinematics(&m, &qp).unwrap().end_effector);
            let tm = ee.inverse().compose(&forward_kinematics(&m, &qm).unwrap().end_effector);
            let dw = (so3_log(&tp.rotation) - so3_log(&tm.rotation)) / (2.0 * h);
            let dv = (tp.translation - tm.translation) / (2.0 * h);
            for k in 0..3 {
                assert!((jac[(k, j)] - dw[k]).abs() < 1e-7);
                assert!((jac[(k + 3, j)] - dv[k]).abs() < 1e-7);
            }
        }
    }
}
