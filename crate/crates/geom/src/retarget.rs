//! Motion retargeting: per-joint translation scaling by bone length ratios.

use crate::error::GeomError;
use crate::types::{dist3, MotionClip, RiggedCharacter};

/// Per-joint bone length: rest distance to the parent joint; the root uses
/// the skeleton height.
pub fn bone_lengths(character: &RiggedCharacter) -> Vec<f64> {
    character
        .parents
        .iter()
        .enumerate()
        .map(|(j, parent)| match parent {
            Some(p) => dist3(character.joints[j], character.joints[*p]),
            None => character.skeleton_height(),
        })
        .collect()
}

/// Scale every joint translation by `target / source` bone length.
/// A zero source bone length leaves the translation unchanged.
pub fn scale_translations(
    motion: &MotionClip,
    source_bones: &[f64],
    target_bones: &[f64],
) -> Result<MotionClip, GeomError> {
    let j = motion.joint_count();
    if source_bones.len() != j || target_bones.len() != j {
        return Err(GeomError::JointCountMismatch {
            left: source_bones.len().min(target_bones.len()),
            right: j,
        });
    }
    let ratios: Vec<f64> = source_bones
        .iter()
        .zip(target_bones)
        .map(|(&s, &t)| if s == 0.0 { 1.0 } else { t / s })
        .collect();
    let frames = motion
        .frames
        .iter()
        .map(|frame| {
            frame
                .iter()
                .zip(&ratios)
                .map(|(tf, &r)| {
                    let mut out = *tf;
                    out.translation = [tf.translation[0] * r, tf.translation[1] * r, tf.translation[2] * r];
                    out
                })
                .collect()
        })
        .collect();
    Ok(MotionClip { frames, fps: motion.fps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::JointTransform;

    fn sample_motion(j: usize) -> MotionClip {
        let mut frame1 = vec![JointTransform::identity(); j];
        for (i, tf) in frame1.iter_mut().enumerate() {
            tf.translation = [i as f64 + 1.0, -0.5, 2.0];
        }
        MotionClip { frames: vec![vec![JointTransform::identity(); j], frame1], fps: 30.0 }
    }

    #[test]
    fn identical_skeletons_leave_motion_unchanged() {
        let motion = sample_motion(3);
        let bones = vec![1.0, 0.4, 0.7];
        let scaled = scale_translations(&motion, &bones, &bones).unwrap();
        for (a, b) in motion.frames.iter().flatten().zip(scaled.frames.iter().flatten()) {
            assert_eq!(a.translation, b.translation);
        }
    }

    #[test]
    fn doubled_bones_double_translations() {
        let motion = sample_motion(2);
        let scaled = scale_translations(&motion, &[1.0, 0.5], &[2.0, 1.0]).unwrap();
        for (a, b) in motion.frames[1].iter().zip(&scaled.frames[1]) {
            for c in 0..3 {
                assert!((b.translation[c] - 2.0 * a.translation[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_source_bone_keeps_translation() {
        let motion = sample_motion(2);
        let scaled = scale_translations(&motion, &[0.0, 1.0], &[3.0, 1.0]).unwrap();
        assert_eq!(scaled.frames[1][0].translation, motion.frames[1][0].translation);
    }

    #[test]
    fn mismatched_joint_count_errors() {
        let motion = sample_motion(2);
        assert!(scale_translations(&motion, &[1.0], &[1.0]).is_err());
    }
}
