//! Scene, motion, mask and OBJ file formats.
//!
//! All formats are line-based text with floats printed at 10 significant
//! digits. The scene file is self-describing: each section starts with its
//! name and element count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::GeomError;
use crate::types::{DeformationClip, JointTransform, MotionClip, RiggedCharacter, ROOT_SENTINEL};

const SCENE_HEADER: &str = "drape scene v1";
const MOTION_HEADER: &str = "drape motion v1";

fn io_err(path: &Path, source: std::io::Error) -> GeomError {
    GeomError::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GeomError {
    GeomError::Parse { path: path.display().to_string(), line, message: message.into() }
}

struct LineReader<'a> {
    path: &'a Path,
    lines: Vec<(usize, &'a str)>,
    cursor: usize,
}

impl<'a> LineReader<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { path, lines, cursor: 0 }
    }

    fn next(&mut self) -> Result<(usize, &'a str), GeomError> {
        let item = self
            .lines
            .get(self.cursor)
            .copied()
            .ok_or_else(|| parse_err(self.path, 0, "unexpected end of file"))?;
        self.cursor += 1;
        Ok(item)
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.cursor).map(|(_, l)| *l)
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>, GeomError> {
        let (ln, line) = self.next()?;
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| parse_err(self.path, ln, format!("bad float: {e}")))?;
        if vals.len() != count {
            return Err(parse_err(self.path, ln, format!("expected {count} values, got {}", vals.len())));
        }
        Ok(vals)
    }
}

fn section_count(reader: &mut LineReader, name: &str) -> Result<usize, GeomError> {
    let (ln, line) = reader.next()?;
    let mut parts = line.split_whitespace();
    let got = parts.next().unwrap_or("");
    if got != name {
        return Err(parse_err(reader.path, ln, format!("expected section '{name}', got '{got}'")));
    }
    parts
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| parse_err(reader.path, ln, format!("missing count for section '{name}'")))
}

pub fn write_scene(path: &Path, character: &RiggedCharacter) -> Result<(), GeomError> {
    let mut out = String::new();
    out.push_str(SCENE_HEADER);
    out.push('\n');
    writeln!(out, "vertices {}", character.vertices.len()).unwrap();
    for v in &character.vertices {
        writeln!(out, "{:.9e} {:.9e} {:.9e}", v[0], v[1], v[2]).unwrap();
    }
    writeln!(out, "faces {}", character.faces.len()).unwrap();
    for f in &character.faces {
        writeln!(out, "{} {} {}", f[0], f[1], f[2]).unwrap();
    }
    writeln!(out, "joints {}", character.joints.len()).unwrap();
    for j in &character.joints {
        writeln!(out, "{:.9e} {:.9e} {:.9e}", j[0], j[1], j[2]).unwrap();
    }
    writeln!(out, "parents {}", character.parents.len()).unwrap();
    for p in &character.parents {
        match p {
            Some(idx) => writeln!(out, "{idx}").unwrap(),
            None => writeln!(out, "{ROOT_SENTINEL}").unwrap(),
        }
    }
    if let Some(w) = &character.gt_skinning {
        let j = character.joints.len();
        let triplets: Vec<(usize, usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|(_, &val)| val != 0.0)
            .map(|(idx, &val)| (idx / j, idx % j, val))
            .collect();
        writeln!(out, "gt_skinning {}", triplets.len()).unwrap();
        for (v, jj, val) in triplets {
            writeln!(out, "{v} {jj} {val:.9e}").unwrap();
        }
    }
    if let Some(m) = &character.gt_apparel_mask {
        writeln!(out, "gt_apparel_mask {}", m.len()).unwrap();
        for &b in m {
            writeln!(out, "{}", u8::from(b)).unwrap();
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_scene(path: &Path) -> Result<RiggedCharacter, GeomError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut reader = LineReader::new(path, &text);
    let (ln, header) = reader.next()?;
    if header != SCENE_HEADER {
        return Err(parse_err(path, ln, format!("unrecognized header '{header}'")));
    }

    let n = section_count(&mut reader, "vertices")?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let v = reader.floats(3)?;
        vertices.push([v[0], v[1], v[2]]);
    }

    let nf = section_count(&mut reader, "faces")?;
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, line) = reader.next()?;
        let idx: Result<Vec<usize>, _> = line.split_whitespace().map(str::parse::<usize>).collect();
        let idx = idx.map_err(|e| parse_err(path, ln, format!("bad face index: {e}")))?;
        if idx.len() != 3 {
            return Err(parse_err(path, ln, "faces must be triangles"));
        }
        faces.push([idx[0], idx[1], idx[2]]);
    }

    let j = section_count(&mut reader, "joints")?;
    let mut joints = Vec::with_capacity(j);
    for _ in 0..j {
        let v = reader.floats(3)?;
        joints.push([v[0], v[1], v[2]]);
    }

    let np = section_count(&mut reader, "parents")?;
    if np != j {
        return Err(parse_err(path, 0, format!("parents count {np} != joints {j}")));
    }
    let mut parents = Vec::with_capacity(j);
    for _ in 0..j {
        let (ln, line) = reader.next()?;
        let p: i64 = line.parse().map_err(|e| parse_err(path, ln, format!("bad parent: {e}")))?;
        parents.push(if p == ROOT_SENTINEL { None } else { Some(p as usize) });
    }

    let mut gt_skinning = None;
    let mut gt_apparel_mask = None;
    while let Some(line) = reader.peek() {
        if line.starts_with("gt_skinning") {
            let nnz = section_count(&mut reader, "gt_skinning")?;
            let mut w = vec![0.0; n * j];
            for _ in 0..nnz {
                let (ln, line) = reader.next()?;
                let mut parts = line.split_whitespace();
                let v: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(path, ln, "bad skinning vertex"))?;
                let jj: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(path, ln, "bad skinning joint"))?;
                let val: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(path, ln, "bad skinning weight"))?;
                if v >= n || jj >= j {
                    return Err(parse_err(path, ln, "skinning triplet out of range"));
                }
                w[v * j + jj] = val;
            }
            gt_skinning = Some(w);
        } else if line.starts_with("gt_apparel_mask") {
            let nm = section_count(&mut reader, "gt_apparel_mask")?;
            if nm != n {
                return Err(parse_err(path, 0, format!("mask count {nm} != vertices {n}")));
            }
            let mut m = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln, line) = reader.next()?;
                match line {
                    "0" => m.push(false),
                    "1" => m.push(true),
                    other => return Err(parse_err(path, ln, format!("mask entry must be 0/1, got '{other}'"))),
                }
            }
            gt_apparel_mask = Some(m);
        } else {
            return Err(parse_err(path, 0, format!("unknown section '{line}'")));
        }
    }

    let character = RiggedCharacter { vertices, faces, joints, parents, gt_skinning, gt_apparel_mask };
    character.validate()?;
    Ok(character)
}

pub fn write_motion(path: &Path, motion: &MotionClip) -> Result<(), GeomError> {
    let j = motion.joint_count();
    let mut out = String::new();
    out.push_str(MOTION_HEADER);
    out.push('\n');
    writeln!(out, "frames {} joints {} fps {:.9e}", motion.frame_count(), j, motion.fps).unwrap();
    for frame in &motion.frames {
        let mut first = true;
        for tf in frame {
            for row in &tf.rotation {
                for &x in row {
                    if !first {
                        out.push(' ');
                    }
                    write!(out, "{x:.9e}").unwrap();
                    first = false;
                }
            }
            for &x in &tf.translation {
                out.push(' ');
                write!(out, "{x:.9e}").unwrap();
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_motion(path: &Path) -> Result<MotionClip, GeomError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut reader = LineReader::new(path, &text);
    let (ln, header) = reader.next()?;
    if header != MOTION_HEADER {
        return Err(parse_err(path, ln, format!("unrecognized header '{header}'")));
    }
    let (ln, meta) = reader.next()?;
    let parts: Vec<&str> = meta.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "frames" || parts[2] != "joints" || parts[4] != "fps" {
        return Err(parse_err(path, ln, "expected 'frames T joints J fps F'"));
    }
    let t: usize = parts[1].parse().map_err(|e| parse_err(path, ln, format!("bad frame count: {e}")))?;
    let j: usize = parts[3].parse().map_err(|e| parse_err(path, ln, format!("bad joint count: {e}")))?;
    let fps: f64 = parts[5].parse().map_err(|e| parse_err(path, ln, format!("bad fps: {e}")))?;

    let mut frames = Vec::with_capacity(t);
    for _ in 0..t {
        let vals = reader.floats(j * 12)?;
        let mut frame = Vec::with_capacity(j);
        for jj in 0..j {
            let base = jj * 12;
            frame.push(JointTransform {
                rotation: [
                    [vals[base], vals[base + 1], vals[base + 2]],
                    [vals[base + 3], vals[base + 4], vals[base + 5]],
                    [vals[base + 6], vals[base + 7], vals[base + 8]],
                ],
                translation: [vals[base + 9], vals[base + 10], vals[base + 11]],
            });
        }
        frames.push(frame);
    }
    let clip = MotionClip { frames, fps };
    clip.validate()?;
    Ok(clip)
}

pub fn write_mask(path: &Path, mask: &[bool]) -> Result<(), GeomError> {
    let mut out = String::new();
    for &b in mask {
        writeln!(out, "{}", u8::from(b)).unwrap();
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_mask(path: &Path) -> Result<Vec<bool>, GeomError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut mask = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "0" => mask.push(false),
            "1" => mask.push(true),
            other => return Err(parse_err(path, i + 1, format!("mask entry must be 0/1, got '{other}'"))),
        }
    }
    Ok(mask)
}

pub fn write_obj(path: &Path, vertices: &[[f64; 3]], faces: &[[usize; 3]]) -> Result<(), GeomError> {
    let mut out = String::with_capacity(vertices.len() * 48);
    for v in vertices {
        writeln!(out, "v {:.9e} {:.9e} {:.9e}", v[0], v[1], v[2]).unwrap();
    }
    for f in faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_obj(path: &Path) -> Result<(Vec<[f64; 3]>, Vec<[usize; 3]>), GeomError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("v ") {
            let vals: Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|e| parse_err(path, i + 1, format!("bad vertex: {e}")))?;
            if vals.len() < 3 {
                return Err(parse_err(path, i + 1, "vertex needs 3 coordinates"));
            }
            vertices.push([vals[0], vals[1], vals[2]]);
        } else if let Some(rest) = line.strip_prefix("f ") {
            let idx: Result<Vec<usize>, GeomError> = rest
                .split_whitespace()
                .map(|tok| {
                    tok.split('/')
                        .next()
                        .unwrap_or("")
                        .parse::<usize>()
                        .map_err(|e| parse_err(path, i + 1, format!("bad face: {e}")))
                })
                .collect();
            let idx = idx?;
            if idx.len() != 3 {
                return Err(parse_err(path, i + 1, "faces must be triangles"));
            }
            faces.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
        }
    }
    Ok((vertices, faces))
}

/// Name of an exported animation frame: `frame_0007.obj`.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.obj")
}

/// Write one OBJ per frame into `dir`.
pub fn write_animation(dir: &Path, clip: &DeformationClip, faces: &[[usize; 3]]) -> Result<(), GeomError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (t, frame) in clip.frames.iter().enumerate() {
        write_obj(&dir.join(frame_file_name(t)), frame, faces)?;
    }
    Ok(())
}

/// Read a `frame_%04d.obj` sequence from `dir`, in frame order.
pub fn read_animation(dir: &Path) -> Result<DeformationClip, GeomError> {
    let mut frames = Vec::new();
    loop {
        let path = dir.join(frame_file_name(frames.len()));
        if !path.exists() {
            break;
        }
        let (vertices, _) = read_obj(&path)?;
        frames.push(vertices);
    }
    if frames.is_empty() {
        return Err(GeomError::Invalid(format!("no frame_0000.obj found in {}", dir.display())));
    }
    Ok(DeformationClip { frames })
}
