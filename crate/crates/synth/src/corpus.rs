//! Corpus generation: characters, retargeted motions, simulated ground
//! truth, and a manifest that reproduces everything from seeds.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use drape_geom::io::{read_motion, read_scene, write_animation, write_motion, write_scene};
use drape_geom::types::{DeformationClip, MotionClip, RiggedCharacter};
use drape_geom::{bone_lengths, scale_translations};

use crate::character::{generate_character, Capsule, SynthCharacterSpec};
use crate::error::SynthError;
use crate::motion::generate_motion;
use crate::sim::simulate_full;
use crate::skeleton::{rest_joints, Proportions};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub seed: u64,
    pub train_characters: usize,
    pub test_characters: usize,
    pub train_motions: usize,
    pub test_motions: usize,
    pub frames: usize,
    pub fps: f64,
    /// When false the ground truth is plain LBS with the generator skinning
    /// (used by the geodesic-attention ablation).
    pub apparel_physics: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            train_characters: 8,
            test_characters: 2,
            train_motions: 8,
            test_motions: 2,
            frames: 120,
            fps: 30.0,
            apparel_physics: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterEntry {
    pub index: usize,
    pub seed: u64,
    pub split: String,
    pub scene: String,
    pub capsules: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleEntry {
    pub character: usize,
    pub motion: usize,
    pub split: String,
    pub motion_file: String,
    pub anim_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimParams {
    pub stiffness: f64,
    pub damping: f64,
    pub substeps: usize,
    pub gravity: [f64; 3],
    pub pushout: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus: CorpusConfig,
    pub sim: SimParams,
    pub motion_seeds: Vec<u64>,
    pub characters: Vec<CharacterEntry>,
    pub samples: Vec<SampleEntry>,
}

fn io_err(path: &Path, source: std::io::Error) -> SynthError {
    SynthError::Io { path: path.display().to_string(), source }
}

fn character_seed(base: u64, index: usize) -> u64 {
    base.wrapping_mul(6364136223846793005).wrapping_add(10007 + index as u64)
}

fn motion_seed(base: u64, index: usize) -> u64 {
    base.wrapping_mul(2862933555777941757).wrapping_add(30011 + index as u64)
}

pub fn write_capsules(path: &Path, capsules: &[Capsule]) -> Result<(), SynthError> {
    let mut out = String::new();
    for c in capsules {
        out.push_str(&format!("{} {} {:.9e}\n", c.joint_a, c.joint_b, c.radius));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_capsules(path: &Path) -> Result<Vec<Capsule>, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut capsules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(SynthError::Manifest {
                path: path.display().to_string(),
                message: format!("capsule line {} must be 'a b radius'", i + 1),
            });
        }
        capsules.push(Capsule {
            joint_a: parts[0].parse().map_err(|_| SynthError::Manifest {
                path: path.display().to_string(),
                message: format!("bad joint index on line {}", i + 1),
            })?,
            joint_b: parts[1].parse().map_err(|_| SynthError::Manifest {
                path: path.display().to_string(),
                message: format!("bad joint index on line {}", i + 1),
            })?,
            radius: parts[2].parse().map_err(|_| SynthError::Manifest {
                path: path.display().to_string(),
                message: format!("bad radius on line {}", i + 1),
            })?,
        });
    }
    Ok(capsules)
}

/// Generate the full corpus into `out_dir`: scenes, capsules, retargeted
/// motion files, ground-truth OBJ animations and the manifest.
///
/// Train samples pair train characters with train motions; test samples pair
/// test characters with test motions, so the splits are disjoint in both.
pub fn build_corpus(cfg: &CorpusConfig, spec: &SynthCharacterSpec, out_dir: &Path) -> Result<Manifest, SynthError> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let n_chars = cfg.train_characters + cfg.test_characters;
    let n_motions = cfg.train_motions + cfg.test_motions;

    // Canonical-skeleton motions, shared by every character.
    let motion_seeds: Vec<u64> = (0..n_motions).map(|m| motion_seed(cfg.seed, m)).collect();
    let canonical_motions: Vec<MotionClip> = motion_seeds
        .iter()
        .map(|&s| generate_motion(s, cfg.frames, cfg.fps))
        .collect();
    let canonical = RiggedCharacter {
        vertices: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        faces: vec![[0, 1, 2]],
        joints: rest_joints(&Proportions::default()),
        parents: crate::skeleton::parents(),
        gt_skinning: None,
        gt_apparel_mask: None,
    };
    let canonical_bones = bone_lengths(&canonical);

    let mut characters = Vec::new();
    let mut synths = Vec::new();
    for c in 0..n_chars {
        let seed = character_seed(cfg.seed, c);
        let synth = generate_character(spec, seed)?;
        let split = if c < cfg.train_characters { "train" } else { "test" };
        let scene = format!("scene_c{c:02}.txt");
        let capsules = format!("capsules_c{c:02}.txt");
        write_scene(&out_dir.join(&scene), &synth.character)?;
        write_capsules(&out_dir.join(&capsules), &synth.capsules)?;
        characters.push(CharacterEntry { index: c, seed, split: split.to_string(), scene, capsules });
        synths.push(synth);
    }

    // Sample pairs: train x train plus test x test.
    let mut pairs = Vec::new();
    for (c, entry) in characters.iter().enumerate() {
        for m in 0..n_motions {
            let motion_is_train = m < cfg.train_motions;
            let pair_split = match (entry.split.as_str(), motion_is_train) {
                ("train", true) => Some("train"),
                ("test", false) => Some("test"),
                _ => None,
            };
            if let Some(split) = pair_split {
                pairs.push((c, m, split));
            }
        }
    }

    let samples: Result<Vec<SampleEntry>, SynthError> = pairs
        .par_iter()
        .map(|&(c, m, split)| {
            let synth = &synths[c];
            let target_bones = bone_lengths(&synth.character);
            let motion = scale_translations(&canonical_motions[m], &canonical_bones, &target_bones)?;
            let motion_file = format!("motion_c{c:02}_m{m:02}.txt");
            write_motion(&out_dir.join(&motion_file), &motion)?;

            let frames = if cfg.apparel_physics {
                simulate_full(synth, &motion)?
            } else {
                let skinning = synth.character.gt_skinning.as_ref().expect("generator skinning");
                motion
                    .frames
                    .iter()
                    .map(|f| {
                        drape_geom::lbs_apply(
                            &synth.character.vertices,
                            skinning,
                            &synth.character.joints,
                            f,
                        )
                    })
                    .collect()
            };
            let anim_dir = format!("anim_c{c:02}_m{m:02}");
            write_animation(
                &out_dir.join(&anim_dir),
                &DeformationClip { frames },
                &synth.character.faces,
            )?;
            Ok(SampleEntry {
                character: c,
                motion: m,
                split: split.to_string(),
                motion_file,
                anim_dir,
            })
        })
        .collect();
    let mut samples = samples?;
    samples.sort_by_key(|s| (s.character, s.motion));

    let manifest = Manifest {
        corpus: cfg.clone(),
        sim: SimParams {
            stiffness: spec.stiffness,
            damping: spec.damping,
            substeps: spec.substeps,
            gravity: spec.gravity,
            pushout: spec.pushout,
        },
        motion_seeds,
        characters,
        samples,
    };
    let text = toml::to_string_pretty(&manifest).map_err(|e| SynthError::Manifest {
        path: out_dir.join(MANIFEST_FILE).display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(out_dir.join(MANIFEST_FILE), text).map_err(|e| io_err(out_dir, e))?;
    Ok(manifest)
}

/// A corpus on disk, with lazily-loadable samples.
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Corpus {
    pub fn open(dir: &Path) -> Result<Self, SynthError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| SynthError::Manifest {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn load_character(&self, index: usize) -> Result<RiggedCharacter, SynthError> {
        let entry = &self.manifest.characters[index];
        Ok(read_scene(&self.dir.join(&entry.scene))?)
    }

    pub fn load_capsules(&self, index: usize) -> Result<Vec<Capsule>, SynthError> {
        let entry = &self.manifest.characters[index];
        read_capsules(&self.dir.join(&entry.capsules))
    }

    pub fn load_motion(&self, sample: &SampleEntry) -> Result<MotionClip, SynthError> {
        Ok(read_motion(&self.dir.join(&sample.motion_file))?)
    }

    pub fn load_animation(&self, sample: &SampleEntry) -> Result<DeformationClip, SynthError> {
        Ok(drape_geom::io::read_animation(&self.dir.join(&sample.anim_dir))?)
    }

    pub fn samples(&self, split: &str) -> Vec<&SampleEntry> {
        self.manifest.samples.iter().filter(|s| s.split == split).collect()
    }
}
