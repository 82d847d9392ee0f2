//! Initializing a new token embedding from the embeddings of its description.

use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingInitSpec {
    pub description_vectors: Vec<Vec<f64>>,
    /// One weight per vector; uniform when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Adds `a·b` together with its exact rounding error.
    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.add(a.mul_add(b, -p));
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }

    /// `(sum + carry) / z` with one correction step, so that an exactly
    /// representable quotient comes out exact.
    fn divide(self, z: f64) -> f64 {
        let hi = self.value();
        let lo = self.carry - (hi - self.sum);
        let q = hi / z;
        let r = (-q).mul_add(z, hi) + lo;
        q + r / z
    }
}

/// `(1/Z) Σ α_w E(w)` with `Z = Σ α_w`, accumulated in input order.
pub fn semantic_init(spec: &EmbeddingInitSpec) -> Result<Vec<f64>, HarnessError> {
    let vectors = &spec.description_vectors;
    let first = vectors.first().ok_or(HarnessError::EmptyDescription)?;
    let dim = first.len();
    if dim == 0 {
        return Err(HarnessError::EmptyDescription);
    }
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(HarnessError::DimensionMismatch {
                index,
                expected: dim,
                found: v.len(),
            });
        }
    }
    let uniform;
    let weights: &[f64] = match &spec.weights {
        Some(w) if w.len() != vectors.len() => {
            return Err(HarnessError::InvalidWeights(format!(
                "{} weights for {} vectors",
                w.len(),
                vectors.len()
            )))
        }
        Some(w) => w,
        None => {
            uniform = vec![1.0; vectors.len()];
            &uniform
        }
    };
    if weights
        .iter()
        .chain(vectors.iter().flatten())
        .any(|x| !x.is_finite())
    {
        return Err(HarnessError::InvalidWeights("non-finite input".into()));
    }

    let mut z = Compensated::default();
    for &w in weights {
        z.add(w);
    }
    let z = z.value();
    if z <= 0.0 {
        return Err(HarnessError::InvalidWeights(format!(
            "normalizer Z = {z} is not positive"
        )));
    }
    Ok((0..dim)
        .map(|d| {
            let mut acc = Compensated::default();
            for (v, &w) in vectors.iter().zip(weights) {
                acc.add_product(w, v[d]);
            }
            acc.divide(z)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn init(vectors: &[&[f64]], weights: Option<&[f64]>) -> Result<Vec<f64>, HarnessError> {
        semantic_init(&EmbeddingInitSpec {
            description_vectors: vectors.iter().map(|v| v.to_vec()).collect(),
            weights: weights.map(<[f64]>::to_vec),
        })
    }

    #[test]
    fn mean_of_basis_vectors() {
        assert_eq!(init(&[&[1.0, 0.0], &[0.0, 1.0]], None).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn single_vector_is_returned() {
        let v = [0.1, -3.25, 7.0];
        assert_eq!(init(&[&v], Some(&[0.37])).unwrap(), v);
    }

    #[test]
    fn weighted_average() {
        assert_eq!(
            init(&[&[2.0, 0.0], &[0.0, 4.0]], Some(&[3.0, 1.0])).unwrap(),
            [1.5, 1.0]
        );
    }

    #[test]
    fn cancellation_is_compensated() {
        // naive left-to-right summation returns 0 here
        let out = init(&[&[1e16], &[1.0], &[-1e16]], None).unwrap();
        assert_eq!(out, [1.0 / 3.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            init(&[], None),
            Err(HarnessError::EmptyDescription)
        ));
        assert!(matches!(
            init(&[&[1.0, 2.0], &[1.0]], None),
            Err(HarnessError::DimensionMismatch {
                index: 1,
                expected: 2,
                found: 1
            })
        ));
        assert!(matches!(
            init(&[&[1.0]], Some(&[0.0])),
            Err(HarnessError::InvalidWeights(_))
        ));
        assert!(matches!(
            init(&[&[1.0]], Some(&[1.0, 2.0])),
            Err(HarnessError::InvalidWeights(_))
        ));
    }
}
