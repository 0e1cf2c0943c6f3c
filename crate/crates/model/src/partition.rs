//! Body/apparel vertex partition bookkeeping.

use crate::error::ModelError;

/// A fixed split of mesh vertices into body and apparel, with the
/// permutation that restores original vertex order from the stacked
/// `[body rows; apparel rows]` layout.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Original indices of body vertices, increasing.
    pub body_index: Vec<usize>,
    /// Original indices of apparel vertices, increasing.
    pub apparel_index: Vec<usize>,
    /// For each original vertex, its row in the stacked layout.
    pub tile_order: Vec<usize>,
    /// The mask this partition was built from (true = apparel).
    pub mask: Vec<bool>,
}

impl Partition {
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut body_index = Vec::new();
        let mut apparel_index = Vec::new();
        for (i, &apparel) in mask.iter().enumerate() {
            if apparel {
                apparel_index.push(i);
            } else {
                body_index.push(i);
            }
        }
        let n_body = body_index.len();
        let mut tile_order = vec![0; mask.len()];
        for (row, &v) in body_index.iter().enumerate() {
            tile_order[v] = row;
        }
        for (row, &v) in apparel_index.iter().enumerate() {
            tile_order[v] = n_body + row;
        }
        Self { body_index, apparel_index, tile_order, mask: mask.to_vec() }
    }

    pub fn n_body(&self) -> usize {
        self.body_index.len()
    }

    pub fn n_apparel(&self) -> usize {
        self.apparel_index.len()
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Select the rows of `points` belonging to the body, in body order.
    pub fn body_points(&self, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
        self.body_index.iter().map(|&i| points[i]).collect()
    }

    pub fn apparel_points(&self, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
        self.apparel_index.iter().map(|&i| points[i]).collect()
    }

    /// Rebuild a full-mesh buffer from body and apparel rows.
    pub fn tile(&self, body: &[[f64; 3]], apparel: &[[f64; 3]]) -> Result<Vec<[f64; 3]>, ModelError> {
        if body.len() != self.n_body() || apparel.len() != self.n_apparel() {
            return Err(ModelError::Invalid(format!(
                "tile got {}+{} rows for a {}+{} partition",
                body.len(),
                apparel.len(),
                self.n_body(),
                self.n_apparel()
            )));
        }
        let mut out = vec![[0.0; 3]; self.len()];
        for (row, &v) in self.body_index.iter().enumerate() {
            out[v] = body[row];
        }
        for (row, &v) in self.apparel_index.iter().enumerate() {
            out[v] = apparel[row];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tile_then_untile_is_identity() {
        let mask = vec![false, true, false, true, true];
        let p = Partition::from_mask(&mask);
        let points: Vec<[f64; 3]> = (0..5).map(|i| [i as f64, 0.0, 0.0]).collect();
        let body = p.body_points(&points);
        let apparel = p.apparel_points(&points);
        assert_eq!(p.tile(&body, &apparel).unwrap(), points);
        // tile_order maps original index to stacked row.
        assert_eq!(p.tile_order, vec![0, 2, 1, 3, 4]);
    }
}
