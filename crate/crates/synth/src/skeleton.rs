//! The 40-joint humanoid rig used by every generated character.
//!
//! Joints are defined by name, parent and a rest offset from the parent.
//! Per-seed characters scale limb groups of the canonical template; motions
//! are synthesized on the canonical skeleton and retargeted per character.

/// Number of joints in the rig.
pub const JOINT_COUNT: usize = 40;

/// Which proportion knob scales a joint's offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimbGroup {
    Torso,
    Head,
    Arm,
    Leg,
}

pub struct JointDef {
    pub name: &'static str,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub group: LimbGroup,
}

/// Proportion multipliers applied to the canonical offsets.
#[derive(Debug, Clone, Copy)]
pub struct Proportions {
    pub torso: f64,
    pub head: f64,
    pub arm: f64,
    pub leg: f64,
}

impl Default for Proportions {
    fn default() -> Self {
        Self { torso: 1.0, head: 1.0, arm: 1.0, leg: 1.0 }
    }
}

use LimbGroup::{Arm, Head, Leg, Torso};

pub const JOINTS: [JointDef; JOINT_COUNT] = [
    JointDef { name: "pelvis", parent: None, offset: [0.0, 0.95, 0.0], group: Torso },
    JointDef { name: "spine1", parent: Some(0), offset: [0.0, 0.10, 0.0], group: Torso },
    JointDef { name: "spine2", parent: Some(1), offset: [0.0, 0.10, 0.0], group: Torso },
    JointDef { name: "chest", parent: Some(2), offset: [0.0, 0.12, 0.0], group: Torso },
    JointDef { name: "neck", parent: Some(3), offset: [0.0, 0.12, 0.0], group: Torso },
    JointDef { name: "head", parent: Some(4), offset: [0.0, 0.08, 0.0], group: Head },
    JointDef { name: "head_top", parent: Some(5), offset: [0.0, 0.14, 0.0], group: Head },
    JointDef { name: "jaw", parent: Some(5), offset: [0.0, 0.01, 0.07], group: Head },
    JointDef { name: "l_eye", parent: Some(5), offset: [0.035, 0.05, 0.08], group: Head },
    JointDef { name: "r_eye", parent: Some(5), offset: [-0.035, 0.05, 0.08], group: Head },
    JointDef { name: "l_collar", parent: Some(3), offset: [0.07, 0.08, 0.0], group: Torso },
    JointDef { name: "l_shoulder", parent: Some(10), offset: [0.11, 0.0, 0.0], group: Arm },
    JointDef { name: "l_elbow", parent: Some(11), offset: [0.27, 0.0, 0.0], group: Arm },
    JointDef { name: "l_wrist", parent: Some(12), offset: [0.25, 0.0, 0.0], group: Arm },
    JointDef { name: "l_hand", parent: Some(13), offset: [0.08, 0.0, 0.0], group: Arm },
    JointDef { name: "l_thumb", parent: Some(13), offset: [0.03, -0.02, 0.04], group: Arm },
    JointDef { name: "l_finger", parent: Some(14), offset: [0.07, 0.0, 0.0], group: Arm },
    JointDef { name: "r_collar", parent: Some(3), offset: [-0.07, 0.08, 0.0], group: Torso },
    JointDef { name: "r_shoulder", parent: Some(17), offset: [-0.11, 0.0, 0.0], group: Arm },
    JointDef { name: "r_elbow", parent: Some(18), offset: [-0.27, 0.0, 0.0], group: Arm },
    JointDef { name: "r_wrist", parent: Some(19), offset: [-0.25, 0.0, 0.0], group: Arm },
    JointDef { name: "r_hand", parent: Some(20), offset: [-0.08, 0.0, 0.0], group: Arm },
    JointDef { name: "r_thumb", parent: Some(20), offset: [-0.03, -0.02, 0.04], group: Arm },
    JointDef { name: "r_finger", parent: Some(21), offset: [-0.07, 0.0, 0.0], group: Arm },
    JointDef { name: "l_hip", parent: Some(0), offset: [0.09, -0.05, 0.0], group: Leg },
    JointDef { name: "l_knee", parent: Some(24), offset: [0.0, -0.42, 0.0], group: Leg },
    JointDef { name: "l_ankle", parent: Some(25), offset: [0.0, -0.40, 0.0], group: Leg },
    JointDef { name: "l_foot", parent: Some(26), offset: [0.0, -0.06, 0.11], group: Leg },
    JointDef { name: "l_toe", parent: Some(27), offset: [0.0, 0.0, 0.07], group: Leg },
    JointDef { name: "r_hip", parent: Some(0), offset: [-0.09, -0.05, 0.0], group: Leg },
    JointDef { name: "r_knee", parent: Some(29), offset: [0.0, -0.42, 0.0], group: Leg },
    JointDef { name: "r_ankle", parent: Some(30), offset: [0.0, -0.40, 0.0], group: Leg },
    JointDef { name: "r_foot", parent: Some(31), offset: [0.0, -0.06, 0.11], group: Leg },
    JointDef { name: "r_toe", parent: Some(32), offset: [0.0, 0.0, 0.07], group: Leg },
    JointDef { name: "l_heel", parent: Some(26), offset: [0.0, -0.04, -0.05], group: Leg },
    JointDef { name: "r_heel", parent: Some(31), offset: [0.0, -0.04, -0.05], group: Leg },
    JointDef { name: "head_back", parent: Some(5), offset: [0.0, 0.06, -0.07], group: Head },
    JointDef { name: "chest_up", parent: Some(3), offset: [0.0, 0.06, 0.03], group: Torso },
    JointDef { name: "l_finger2", parent: Some(14), offset: [0.06, -0.01, 0.025], group: Arm },
    JointDef { name: "r_finger2", parent: Some(21), offset: [-0.06, -0.01, 0.025], group: Arm },
];

/// Bones that carry a capsule of body geometry: (parent joint, child joint,
/// canonical radius).
pub const CAPSULE_BONES: [(usize, usize, f64); 24] = [
    (0, 1, 0.115),
    (1, 2, 0.105),
    (2, 3, 0.115),
    (3, 4, 0.055),
    (4, 5, 0.045),
    (5, 6, 0.095),
    (3, 10, 0.05),
    (10, 11, 0.05),
    (11, 12, 0.045),
    (12, 13, 0.04),
    (13, 14, 0.035),
    (3, 17, 0.05),
    (17, 18, 0.05),
    (18, 19, 0.045),
    (19, 20, 0.04),
    (20, 21, 0.035),
    (0, 24, 0.075),
    (24, 25, 0.07),
    (25, 26, 0.05),
    (26, 27, 0.04),
    (0, 29, 0.075),
    (29, 30, 0.07),
    (30, 31, 0.05),
    (31, 32, 0.04),
];

pub fn joint_index(name: &str) -> Option<usize> {
    JOINTS.iter().position(|j| j.name == name)
}

pub fn parents() -> Vec<Option<usize>> {
    JOINTS.iter().map(|j| j.parent).collect()
}

/// Rest-pose joint positions for the given proportions.
pub fn rest_joints(prop: &Proportions) -> Vec<[f64; 3]> {
    let mut joints = vec![[0.0; 3]; JOINT_COUNT];
    for (i, def) in JOINTS.iter().enumerate() {
        let s = match def.group {
            Torso => prop.torso,
            Head => prop.head,
            Arm => prop.arm,
            Leg => prop.leg,
        };
        let scaled = [def.offset[0] * s, def.offset[1] * s, def.offset[2] * s];
        joints[i] = match def.parent {
            // Root offset is an absolute position; keep feet near the ground
            // by scaling its height with the legs.
            None => [scaled[0], def.offset[1] * prop.leg, scaled[2]],
            Some(p) => [
                joints[p][0] + scaled[0],
                joints[p][1] + scaled[1],
                joints[p][2] + scaled[2],
            ],
        };
    }
    joints
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rig_is_a_tree_with_one_root() {
        assert_eq!(JOINTS.len(), 40);
        let roots = JOINTS.iter().filter(|j| j.parent.is_none()).count();
        assert_eq!(roots, 1);
        for (i, j) in JOINTS.iter().enumerate() {
            if let Some(p) = j.parent {
                assert!(p < i, "parents must precede children ({})", j.name);
            }
        }
    }

    #[test]
    fn canonical_height_is_plausible() {
        let joints = rest_joints(&Proportions::default());
        let top = joints[joint_index("head_top").unwrap()][1];
        let toe = joints[joint_index("l_toe").unwrap()][1];
        assert!(top > 1.4 && top < 1.8, "head top at {top}");
        assert!(toe > -0.05 && toe < 0.2, "toe at {toe}");
    }

    #[test]
    fn capsule_bones_reference_valid_joints() {
        for (a, b, r) in CAPSULE_BONES {
            assert!(a < JOINT_COUNT && b < JOINT_COUNT);
            assert!(r > 0.0);
        }
    }
}
