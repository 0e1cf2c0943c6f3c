//! Per-vertex apparel classification: a point-set encoder with a global
//! max-pool context and an MLP decoder over centered, height-normalized
//! vertex positions.

use drape_geom::RiggedCharacter;
use drape_nn::{Axis, Dense, Mlp, ParameterStore, Tape, Tensor, Var};
use rand_chacha::ChaCha20Rng;

use crate::error::ModelError;

/// Classification threshold; ties go to the body so that misrouted apparel
/// can still be fixed by refinement.
pub const APPAREL_THRESHOLD: f64 = 0.5;

/// Probabilities plus hard labels for one character.
#[derive(Debug, Clone)]
pub struct ApparelMask {
    pub probabilities: Vec<f64>,
    pub labels: Vec<bool>,
}

impl ApparelMask {
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let labels = probabilities.iter().map(|&p| p > APPAREL_THRESHOLD).collect();
        Self { probabilities, labels }
    }

    pub fn n_apparel(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

#[derive(Debug, Clone)]
pub struct SegmentationNet {
    enc1: Dense,
    enc2: Dense,
    decoder: Mlp,
}

pub const SEG_PREFIX: &str = "seg";

impl SegmentationNet {
    pub fn register(store: &mut ParameterStore, rng: &mut ChaCha20Rng) -> Result<Self, ModelError> {
        Ok(Self {
            enc1: Dense::register(store, rng, &format!("{SEG_PREFIX}.enc1"), 3, 64)?,
            enc2: Dense::register(store, rng, &format!("{SEG_PREFIX}.enc2"), 64, 128)?,
            decoder: Mlp::register(store, rng, &format!("{SEG_PREFIX}.dec"), &[256, 64, 1])?,
        })
    }

    pub fn bind(store: &ParameterStore) -> Result<Self, ModelError> {
        Ok(Self {
            enc1: Dense::bind(store, &format!("{SEG_PREFIX}.enc1"))?,
            enc2: Dense::bind(store, &format!("{SEG_PREFIX}.enc2"))?,
            decoder: Mlp::bind(store, &format!("{SEG_PREFIX}.dec"), 2)?,
        })
    }

    pub fn param_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.enc1.param_names().into_iter().collect();
        names.extend(self.enc2.param_names());
        names.extend(self.decoder.param_names());
        names
    }

    /// Centered, height-normalized positions: invariant to translation and
    /// uniform per-character scale.
    pub fn input_features(character: &RiggedCharacter) -> Tensor {
        let n = character.vertex_count();
        let mut centroid = [0.0; 3];
        for v in &character.vertices {
            for c in 0..3 {
                centroid[c] += v[c] / n as f64;
            }
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in &character.vertices {
            lo = lo.min(v[1]);
            hi = hi.max(v[1]);
        }
        let height = if hi > lo { hi - lo } else { 1.0 };
        let mut data = Vec::with_capacity(n * 3);
        for v in &character.vertices {
            for c in 0..3 {
                data.push((v[c] - centroid[c]) / height);
            }
        }
        Tensor::matrix(n, 3, data).expect("n x 3 feature matrix")
    }

    /// Per-vertex apparel probabilities as an `n x 1` tape value.
    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, input: Var) -> Result<Var, ModelError> {
        let h = self.enc1.forward(tape, store, input)?;
        let h = tape.relu(h);
        let h = self.enc2.forward(tape, store, h)?;
        let h = tape.relu(h);
        let n = tape.value(h).rows();
        let pooled = tape.max_pool(h, Axis::Rows);
        let context = tape.repeat_rows(pooled, n)?;
        let joined = tape.concat_cols(&[h, context])?;
        let logits = self.decoder.forward(tape, store, joined)?;
        Ok(tape.sigmoid(logits))
    }

    /// Run inference and threshold into labels.
    pub fn segment(&self, store: &ParameterStore, character: &RiggedCharacter) -> Result<ApparelMask, ModelError> {
        let mut tape = Tape::new();
        let input = tape.constant(Self::input_features(character));
        let probs = self.forward(&mut tape, store, input)?;
        Ok(ApparelMask::from_probabilities(tape.value(probs).data().to_vec()))
    }
}

/// Binary cross entropy over clamped probabilities versus 0/1 targets,
/// averaged over vertices.
pub fn bce_loss(tape: &mut Tape, probabilities: Var, target: Var) -> Result<Var, ModelError> {
    let eps = 1e-7;
    let p = tape.clamp(probabilities, eps, 1.0 - eps);
    let log_p = tape.ln(p);
    let pos = tape.mul_elem(target, log_p)?;

    let ones = tape.constant(Tensor::new(
        tape.value(probabilities).shape().to_vec(),
        vec![1.0; tape.value(probabilities).len()],
    )?);
    let one_minus_t = tape.sub(ones, target)?;
    let one_minus_p = tape.sub(ones, p)?;
    let one_minus_p = tape.clamp(one_minus_p, eps, 1.0 - eps);
    let log_q = tape.ln(one_minus_p);
    let neg = tape.mul_elem(one_minus_t, log_q)?;

    let sum = tape.add(pos, neg)?;
    let mean = tape.mean_all(sum);
    Ok(tape.scale(mean, -1.0))
}

/// Target tensor for a ground-truth mask.
pub fn mask_targets(mask: &[bool]) -> Tensor {
    Tensor::matrix(mask.len(), 1, mask.iter().map(|&b| f64::from(u8::from(b))).collect())
        .expect("n x 1 target")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn small_character(offset: [f64; 3]) -> RiggedCharacter {
        let base = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.2, 0.0],
            [0.4, 1.0, 0.3],
            [0.0, 2.0, 0.0],
            [0.7, 1.4, 0.9],
        ];
        RiggedCharacter {
            vertices: base
                .into_iter()
                .map(|v| [v[0] + offset[0], v[1] + offset[1], v[2] + offset[2]])
                .collect(),
            faces: vec![[0, 1, 2], [2, 3, 4]],
            joints: vec![[0.0; 3]],
            parents: vec![None],
            gt_skinning: None,
            gt_apparel_mask: None,
        }
    }

    #[test]
    fn zero_logits_give_half_probability_and_body_labels() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut store = ParameterStore::new();
        let net = SegmentationNet::register(&mut store, &mut rng).unwrap();
        // Zero the decoder's last layer so every logit is exactly 0.
        let last = net.decoder.layers.last().unwrap();
        for x in store.value_mut(&last.weight).unwrap().data_mut() {
            *x = 0.0;
        }
        let mask = net.segment(&store, &small_character([0.0; 3])).unwrap();
        for (&p, &l) in mask.probabilities.iter().zip(&mask.labels) {
            assert_eq!(p, 0.5);
            assert!(!l, "ties must go to the body");
        }
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut store = ParameterStore::new();
        let net = SegmentationNet::register(&mut store, &mut rng).unwrap();
        let a = net.segment(&store, &small_character([0.0; 3])).unwrap();
        let b = net.segment(&store, &small_character([5.0, -3.0, 11.0])).unwrap();
        for (pa, pb) in a.probabilities.iter().zip(&b.probabilities) {
            assert!((pa - pb).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_permutation_permutes_probabilities() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut store = ParameterStore::new();
        let net = SegmentationNet::register(&mut store, &mut rng).unwrap();
        let c = small_character([0.0; 3]);
        let perm = [3usize, 0, 4, 1, 2];
        let mut permuted = c.clone();
        permuted.vertices = perm.iter().map(|&i| c.vertices[i]).collect();
        let a = net.segment(&store, &c).unwrap();
        let b = net.segment(&store, &permuted).unwrap();
        for (row, &src) in perm.iter().enumerate() {
            assert!((b.probabilities[row] - a.probabilities[src]).abs() < 1e-12);
        }
    }

    #[test]
    fn untrained_store_errors() {
        let store = ParameterStore::new();
        assert!(SegmentationNet::bind(&store).is_err());
    }

    #[test]
    fn bce_matches_closed_forms() {
        // p = target in {0, 1}: loss ~ 0 after clamping.
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::matrix(2, 1, vec![1.0, 0.0]).unwrap());
        let t = tape.constant(Tensor::matrix(2, 1, vec![1.0, 0.0]).unwrap());
        let loss = bce_loss(&mut tape, p, t).unwrap();
        assert!(tape.value(loss).item() <= 1e-6);

        // p = 0.5 everywhere: loss = ln 2.
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::matrix(3, 1, vec![0.5; 3]).unwrap());
        let t = tape.constant(Tensor::matrix(3, 1, vec![1.0, 0.0, 1.0]).unwrap());
        let loss = bce_loss(&mut tape, p, t).unwrap();
        assert!((tape.value(loss).item() - std::f64::consts::LN_2).abs() < 1e-12);

        // Hand-evaluated two-vertex case.
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::matrix(2, 1, vec![0.9, 0.2]).unwrap());
        let t = tape.constant(Tensor::matrix(2, 1, vec![1.0, 0.0]).unwrap());
        let loss = bce_loss(&mut tape, p, t).unwrap();
        let expected = -0.5 * (0.9f64.ln() + 0.8f64.ln());
        assert!((tape.value(loss).item() - expected).abs() < 1e-12);
    }

    #[test]
    fn bce_nonnegative_and_zero_only_at_labels() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::matrix(2, 1, vec![0.3, 0.99]).unwrap());
        let t = tape.constant(Tensor::matrix(2, 1, vec![0.0, 1.0]).unwrap());
        let loss = bce_loss(&mut tape, p, t).unwrap();
        assert!(tape.value(loss).item() > 0.0);
    }
}
