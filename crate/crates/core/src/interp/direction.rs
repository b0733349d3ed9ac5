//! Steering directions from contrast sets: mean difference, first principal
//! component, and probe normal.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::probe::{fit_logistic, LAMBDA};
use super::InterpError;
use crate::model::tensor::{dot, norm};
use crate::model::ResidualTrace;

/// Below this norm a contrast is considered degenerate.
pub const MIN_CONTRAST_NORM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMethod {
    MeanDiff,
    Pca,
    ProbeNormal,
}

impl DirectionMethod {
    pub const ALL: [DirectionMethod; 3] = [DirectionMethod::MeanDiff, DirectionMethod::Pca, DirectionMethod::ProbeNormal];

    pub fn id(self) -> &'static str {
        match self {
            DirectionMethod::MeanDiff => "mean_diff",
            DirectionMethod::Pca => "pca",
            DirectionMethod::ProbeNormal => "probe_normal",
        }
    }
}

impl std::str::FromStr for DirectionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DirectionMethod::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| format!("unknown method '{s}' (mean_diff, pca, probe_normal)"))
    }
}

/// A unit direction in residual space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringVector {
    pub direction: Vec<f64>,
    pub layer: usize,
    pub method: DirectionMethod,
    pub n_coop: usize,
    pub n_defect: usize,
}

impl SteeringVector {
    pub fn cosine(&self, other: &[f64]) -> f64 {
        dot(&self.direction, other) / (norm(&self.direction) * norm(other))
    }
}

fn states(traces: &[ResidualTrace], layer: usize) -> Result<Vec<Vec<f64>>, InterpError> {
    traces
        .iter()
        .map(|t| {
            t.layers
                .get(layer)
                .cloned()
                .ok_or_else(|| InterpError::InvalidArgument(format!("trace has no layer {layer}")))
        })
        .collect()
}

fn mean_vec(xs: &[Vec<f64>]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mut m = vec![0.0; xs[0].len()];
    for x in xs {
        for (a, v) in m.iter_mut().zip(x) {
            *a += v / n;
        }
    }
    m
}

fn normalized(v: Vec<f64>) -> Result<Vec<f64>, InterpError> {
    let n = norm(&v);
    if n.is_nan() || n < MIN_CONTRAST_NORM {
        return Err(InterpError::DegenerateContrast(n));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

fn align(v: Vec<f64>, reference: &[f64]) -> Vec<f64> {
    if dot(&v, reference) < 0.0 {
        v.into_iter().map(|x| -x).collect()
    } else {
        v
    }
}

/// `mean(coop) − mean(defect)` at `layer`, unnormalised.
pub fn mean_difference(coop: &[ResidualTrace], defect: &[ResidualTrace], layer: usize) -> Result<Vec<f64>, InterpError> {
    if coop.is_empty() || defect.is_empty() {
        return Err(InterpError::Empty);
    }
    let mc = mean_vec(&states(coop, layer)?);
    let md = mean_vec(&states(defect, layer)?);
    if mc.len() != md.len() {
        return Err(InterpError::LengthMismatch {
            left: mc.len(),
            right: md.len(),
        });
    }
    Ok(mc.iter().zip(&md).map(|(a, b)| a - b).collect())
}

/// First principal component of the pooled, mean-centred states.
fn first_component(pooled: &[Vec<f64>]) -> Vec<f64> {
    let d = pooled[0].len();
    let mu = mean_vec(pooled);
    let x = DMatrix::from_fn(pooled.len(), d, |i, j| pooled[i][j] - mu[j]);
    let cov = x.transpose() * &x / (pooled.len() as f64);
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    eig.eigenvectors.column(k).iter().copied().collect()
}

/// Unit direction separating the contrast sets at `layer`. PCA and probe
/// normals are sign-aligned with the mean difference.
pub fn extract_direction(
    coop: &[ResidualTrace],
    defect: &[ResidualTrace],
    layer: usize,
    method: DirectionMethod,
) -> Result<SteeringVector, InterpError> {
    let diff = mean_difference(coop, defect, layer)?;
    let reference = normalized(diff)?;
    let direction = match method {
        DirectionMethod::MeanDiff => reference,
        DirectionMethod::Pca => {
            let mut pooled = states(coop, layer)?;
            pooled.extend(states(defect, layer)?);
            normalized(align(first_component(&pooled), &reference))?
        }
        DirectionMethod::ProbeNormal => {
            let mut x = states(coop, layer)?;
            x.extend(states(defect, layer)?);
            let y: Vec<u8> = std::iter::repeat_n(1, coop.len()).chain(std::iter::repeat_n(0, defect.len())).collect();
            let fit = fit_logistic(&x, &y, LAMBDA);
            normalized(align(fit.weights, &reference))?
        }
    };
    Ok(SteeringVector {
        direction,
        layer,
        method,
        n_coop: coop.len(),
        n_defect: defect.len(),
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    fn cloud(n: usize, offset: f64, seed: u64) -> Vec<ResidualTrace> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut h: Vec<f64> = (0..6).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
                h[3] += offset;
                ResidualTrace {
                    layers: vec![h],
                    position: 0,
                    prompt_id: None,
                }
            })
            .collect()
    }

    #[test]
    fn axis_aligned_contrast() {
        let coop = cloud(200, 2.0, 1);
        let defect = cloud(200, 0.0, 2);
        for m in DirectionMethod::ALL {
            let v = extract_direction(&coop, &defect, 0, m).unwrap();
            assert!((norm(&v.direction) - 1.0).abs() < 1e-9);
            assert!(v.direction[3] > 0.99, "{m:?}: {:?}", v.direction);
        }
    }

    #[test]
    fn identical_clouds_are_degenerate() {
        let a = cloud(10, 1.0, 3);
        assert!(matches!(
            extract_direction(&a, &a, 0, DirectionMethod::MeanDiff),
            Err(InterpError::DegenerateContrast(_))
        ));
    }

    #[test]
    fn mean_diff_is_antisymmetric() {
        let a = cloud(30, 1.0, 4);
        let b = cloud(30, -0.5, 5);
        let ab = extract_direction(&a, &b, 0, DirectionMethod::MeanDiff).unwrap();
        let ba = extract_direction(&b, &a, 0, DirectionMethod::MeanDiff).unwrap();
        for (x, y) in ab.direction.iter().zip(&ba.direction) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn empty_sets_rejected() {
        assert!(extract_direction(&[], &cloud(3, 0.0, 1), 0, DirectionMethod::Pca).is_err());
    }
}
