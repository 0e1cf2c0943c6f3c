//! Loss building blocks shared by the deformation modules.

use drape_geom::types::dist3;
use drape_nn::{Tape, Tensor, Var};

use crate::error::ModelError;

/// Mean absolute difference over all entries.
pub fn mean_l1(tape: &mut Tape, prediction: Var, target: Var) -> Result<Var, ModelError> {
    let diff = tape.sub(prediction, target)?;
    let abs = tape.abs(diff);
    Ok(tape.mean_all(abs))
}

/// Mean absolute deviation of deformed edge lengths from their rest
/// lengths.
pub fn edge_length_deviation(
    tape: &mut Tape,
    deformed: Var,
    rest: &[[f64; 3]],
    edges: &[(usize, usize)],
) -> Result<Var, ModelError> {
    if edges.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let (src, dst): (Vec<usize>, Vec<usize>) = edges.iter().copied().unzip();
    let a = tape.gather_rows(deformed, &src)?;
    let b = tape.gather_rows(deformed, &dst)?;
    let diff = tape.sub(a, b)?;
    let lengths = tape.row_norms(diff);
    let rest_lengths = tape.constant(Tensor::matrix(
        edges.len(),
        1,
        edges.iter().map(|&(i, j)| dist3(rest[i], rest[j])).collect(),
    )?);
    let dev = tape.sub(lengths, rest_lengths)?;
    let abs = tape.abs(dev);
    Ok(tape.mean_all(abs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use drape_geom::types::axis_angle_to_mat3;

    #[test]
    fn mean_l1_of_equal_inputs_is_zero() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let b = tape.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let loss = mean_l1(&mut tape, a, b).unwrap();
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn uniform_offset_gives_offset_mean() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 3, vec![0.01; 6]).unwrap());
        let b = tape.constant(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        let loss = mean_l1(&mut tape, a, b).unwrap();
        assert!((tape.value(loss).item() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rigid_transform_preserves_edge_lengths() {
        let rest = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, 0.3, 0.8]];
        let edges = vec![(0, 1), (1, 2), (2, 3), (0, 3)];
        let r = axis_angle_to_mat3([0.3, 1.0, -0.2], 1.1);
        let t = [0.5, -0.25, 2.0];
        let moved: Vec<[f64; 3]> = rest
            .iter()
            .map(|v| {
                let rv = drape_geom::types::mat3_mul_vec(&r, *v);
                [rv[0] + t[0], rv[1] + t[1], rv[2] + t[2]]
            })
            .collect();
        let mut tape = Tape::new();
        let deformed = tape.constant(Tensor::from_points(&moved));
        let loss = edge_length_deviation(&mut tape, deformed, &rest, &edges).unwrap();
        assert!(tape.value(loss).item() <= 1e-9);
    }
}
