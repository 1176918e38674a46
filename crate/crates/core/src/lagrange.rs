//! Lagrange basis weights, matrix-valued polynomial encoding, and
//! interpolation-based evaluation.
//!
//! A list of `L` equally shaped blocks defines the degree-`L-1` polynomial
//! that takes the value `blocks[l]` at `betas[l]`. Encoding evaluates that
//! polynomial elsewhere; decoding interpolates a product polynomial of
//! degree `2L-2` from worker results and evaluates it back at the betas.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};
use crate::matrix::FieldMatrix;

/// Evaluation points: `betas` carry the data, `alphas` are assigned to
/// machines (machine `i` uses `alphas[i]`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalPoints {
    #[serde(serialize_with = "ser_elems")]
    betas: Vec<FieldElement>,
    #[serde(serialize_with = "ser_elems")]
    alphas: Vec<FieldElement>,
}

fn ser_elems<S: serde::Serializer>(v: &[FieldElement], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(FieldElement::value))
}

impl EvalPoints {
    pub fn new(betas: Vec<FieldElement>, alphas: Vec<FieldElement>) -> Result<Self> {
        let field = betas
            .first()
            .or(alphas.first())
            .map(FieldElement::field)
            .ok_or_else(|| Error::InvalidPoints("no points".into()))?;
        if betas.is_empty() {
            return Err(Error::InvalidPoints("need at least one beta".into()));
        }
        if betas.iter().chain(&alphas).any(|x| x.field() != field) {
            return Err(Error::InvalidPoints("points from different fields".into()));
        }
        let total = betas.len() + alphas.len();
        if total as u64 > field.modulus() {
            return Err(Error::InvalidPoints(format!(
                "{total} distinct points do not fit in {field}"
            )));
        }
        let mut all: Vec<u64> = betas.iter().chain(&alphas).map(|x| x.value()).collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != total {
            return Err(Error::InvalidPoints(
                "betas and alphas must be pairwise distinct and disjoint".into(),
            ));
        }
        Ok(Self { betas, alphas })
    }

    /// `beta_l = l - 1` for `l in 1..=L` and `alpha_n = L - 1 + n` for
    /// `n in 1..=N`.
    pub fn standard(field: PrimeField, l: usize, n: usize) -> Result<Self> {
        let betas = (0..l as u64).map(|x| field.element(x)).collect();
        let alphas = (l as u64..(l + n) as u64)
            .map(|x| field.element(x))
            .collect();
        if (l + n) as u64 > field.modulus() {
            return Err(Error::InvalidPoints(format!(
                "{} points do not fit in {field}",
                l + n
            )));
        }
        Self::new(betas, alphas)
    }

    pub fn betas(&self) -> &[FieldElement] {
        &self.betas
    }

    pub fn alphas(&self) -> &[FieldElement] {
        &self.alphas
    }

    pub fn alpha(&self, machine: usize) -> FieldElement {
        self.alphas[machine]
    }

    pub fn l(&self) -> usize {
        self.betas.len()
    }

    pub fn field(&self) -> PrimeField {
        self.betas[0].field()
    }
}

/// Lagrange weights of a node set at one target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagrangeCoeffs {
    weights: Vec<FieldElement>,
}

impl LagrangeCoeffs {
    pub fn weights(&self) -> &[FieldElement] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `w_i = prod_{j != i} (target - x_j) / (x_i - x_j)`.
pub fn basis_at(nodes: &[FieldElement], target: FieldElement) -> Result<LagrangeCoeffs> {
    let Some(first) = nodes.first() else {
        return Ok(LagrangeCoeffs { weights: vec![] });
    };
    let f = first.field();
    if nodes.iter().any(|x| x.field() != f) || target.field() != f {
        return Err(Error::FieldMismatch {
            left: f.modulus(),
            right: nodes
                .iter()
                .map(FieldElement::field)
                .chain([target.field()])
                .find(|g| *g != f)
                .unwrap()
                .modulus(),
        });
    }
    let xs: Vec<u64> = nodes.iter().map(FieldElement::value).collect();
    let mut sorted = xs.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DegenerateNodes);
    }
    let t = target.value();
    let weights = xs
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let (mut num, mut den) = (1, 1);
            for (j, &xj) in xs.iter().enumerate() {
                if i != j {
                    num = f.mul(num, f.sub(t, xj));
                    den = f.mul(den, f.sub(xi, xj));
                }
            }
            Ok(f.element(f.mul(num, f.inv(den)?)))
        })
        .collect::<Result<_>>()?;
    Ok(LagrangeCoeffs { weights })
}

/// Evaluates the polynomial through `(betas[l], blocks[l])` at `at`.
pub fn encode_blocks(
    blocks: &[FieldMatrix],
    points: &EvalPoints,
    at: FieldElement,
) -> Result<FieldMatrix> {
    if blocks.len() != points.l() {
        return Err(Error::DimensionMismatch(format!(
            "{} blocks for {} betas",
            blocks.len(),
            points.l()
        )));
    }
    let coeffs = basis_at(points.betas(), at)?;
    combine(blocks.iter(), &coeffs)
}

/// `sum_i weights[i] * values[i]`.
pub fn combine<'a>(
    values: impl IntoIterator<Item = &'a FieldMatrix>,
    coeffs: &LagrangeCoeffs,
) -> Result<FieldMatrix> {
    let mut acc: Option<FieldMatrix> = None;
    let mut count = 0;
    for (m, w) in values.into_iter().zip(coeffs.weights()) {
        count += 1;
        match acc.as_mut() {
            None => {
                let mut first = FieldMatrix::zeros(m.field(), m.rows(), m.cols());
                first.scale_add_assign(m, w.value())?;
                acc = Some(first);
            }
            Some(a) => a.scale_add_assign(m, w.value())?,
        }
    }
    if count != coeffs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{count} values for {} weights",
            coeffs.len()
        )));
    }
    acc.ok_or_else(|| Error::DimensionMismatch("nothing to combine".into()))
}

/// Evaluates at `target` the unique polynomial of degree at most `degree`
/// through the first `degree + 1` results.
pub fn interpolate_eval(
    results: &[(FieldElement, &FieldMatrix)],
    degree: usize,
    target: FieldElement,
) -> Result<FieldMatrix> {
    let needed = degree + 1;
    if results.len() < needed {
        return Err(Error::InsufficientResults {
            needed,
            got: results.len(),
        });
    }
    let used = &results[..needed];
    let nodes: Vec<FieldElement> = used.iter().map(|(x, _)| *x).collect();
    let coeffs = basis_at(&nodes, target)?;
    combine(used.iter().map(|(_, m)| *m), &coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn els(f: PrimeField, xs: &[u64]) -> Vec<FieldElement> {
        xs.iter().map(|&x| f.element(x)).collect()
    }

    fn scalar(f: PrimeField, x: u64) -> FieldMatrix {
        FieldMatrix::from_vec(f, 1, 1, vec![x]).unwrap()
    }

    #[test]
    fn basis_examples() {
        let f = gf(7);
        let nodes = els(f, &[1, 2]);
        let hit = basis_at(&nodes, f.element(1)).unwrap();
        assert_eq!(hit.weights(), &els(f, &[1, 0])[..]);
        let off = basis_at(&nodes, f.element(3)).unwrap();
        assert_eq!(off.weights(), &els(f, &[6, 2])[..]);

        // z^2 at 3,4,5 is 2,2,4 mod 7; the combination must reproduce 1^2.
        let w = basis_at(&els(f, &[3, 4, 5]), f.element(1)).unwrap();
        let total = w
            .weights()
            .iter()
            .zip([2u64, 2, 4])
            .fold(0, |acc, (w, y)| f.mul_add(acc, w.value(), y));
        assert_eq!(total, 1);
    }

    #[test]
    fn duplicate_nodes() {
        let f = gf(7);
        assert_eq!(
            basis_at(&els(f, &[1, 8]), f.element(0)),
            Err(Error::DegenerateNodes)
        );
    }

    #[test]
    fn encode_examples() {
        let f = gf(7);
        let points = EvalPoints::new(els(f, &[1, 2]), els(f, &[3, 4])).unwrap();
        let blocks = vec![scalar(f, 3), scalar(f, 4)];
        assert_eq!(
            encode_blocks(&blocks, &points, f.element(3)).unwrap(),
            scalar(f, 5)
        );
        assert_eq!(
            encode_blocks(&blocks, &points, f.element(2)).unwrap(),
            blocks[1]
        );
        let zeros = vec![FieldMatrix::zeros(f, 2, 3); 2];
        assert!(encode_blocks(&zeros, &points, f.element(5))
            .unwrap()
            .is_zero());
        assert!(encode_blocks(&blocks[..1], &points, f.element(3)).is_err());
    }

    #[test]
    fn encode_hits_every_beta() {
        let f = gf(1993);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points = EvalPoints::standard(f, 4, 6).unwrap();
        let blocks: Vec<_> = (0..4)
            .map(|_| FieldMatrix::random(f, 3, 2, &mut rng))
            .collect();
        for (l, beta) in points.betas().iter().enumerate() {
            assert_eq!(encode_blocks(&blocks, &points, *beta).unwrap(), blocks[l]);
        }
    }

    #[test]
    fn interpolate_examples() {
        let f = gf(7);
        let vals: Vec<_> = [2u64, 2, 4].iter().map(|&y| scalar(f, y)).collect();
        let results: Vec<_> = els(f, &[3, 4, 5]).into_iter().zip(vals.iter()).collect();
        assert_eq!(
            interpolate_eval(&results, 2, f.element(1)).unwrap(),
            scalar(f, 1)
        );
        assert_eq!(
            interpolate_eval(&results, 2, f.element(4)).unwrap(),
            scalar(f, 2)
        );
        let one = scalar(f, 6);
        assert_eq!(
            interpolate_eval(&[(f.element(3), &one)], 0, f.element(0)).unwrap(),
            one
        );
        assert_eq!(
            interpolate_eval(&results[..2], 2, f.element(1)),
            Err(Error::InsufficientResults { needed: 3, got: 2 })
        );
    }

    #[test]
    fn standard_points() {
        let f = gf(1993);
        let p = EvalPoints::standard(f, 3, 5).unwrap();
        assert_eq!(p.betas(), &els(f, &[0, 1, 2])[..]);
        assert_eq!(p.alphas(), &els(f, &[3, 4, 5, 6, 7])[..]);
        assert!(EvalPoints::standard(gf(7), 3, 5).is_err());
        assert!(EvalPoints::new(els(f, &[1, 2]), els(f, &[2, 3])).is_err());
    }

    proptest! {
        #[test]
        fn product_polynomial_decodes(l in 1usize..=4, extra in 0usize..=3, seed in any::<u64>()) {
            let f = gf(1993);
            let n = 2 * l - 1 + extra;
            let points = EvalPoints::standard(f, l, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<_> = (0..l).map(|_| FieldMatrix::random(f, 2, 3, &mut rng)).collect();
            let b: Vec<_> = (0..l).map(|_| FieldMatrix::random(f, 3, 2, &mut rng)).collect();
            let mut expected = FieldMatrix::zeros(f, 2, 2);
            for (al, bl) in a.iter().zip(&b) {
                expected.scale_add_assign(&al.matmul(bl)?, 1)?;
            }
            let products: Vec<_> = points.alphas().iter().map(|&x| {
                encode_blocks(&a, &points, x)?.matmul(&encode_blocks(&b, &points, x)?)
            }).collect::<Result<_>>()?;
            // Every (2L-1)-window of the N results decodes the same sum.
            for start in 0..=extra {
                let subset: Vec<_> = (start..start + 2 * l - 1)
                    .map(|i| (points.alpha(i), &products[i]))
                    .collect();
                let mut got = FieldMatrix::zeros(f, 2, 2);
                for &beta in points.betas() {
                    got.scale_add_assign(&interpolate_eval(&subset, 2 * l - 2, beta)?, 1)?;
                }
                prop_assert_eq!(&got, &expected);
            }
        }

        #[test]
        fn weights_at_nodes_are_indicators(xs in proptest::collection::btree_set(0u64..101, 1..8), pick in any::<prop::sample::Index>()) {
            let f = gf(101);
            let nodes: Vec<_> = xs.iter().map(|&x| f.element(x)).collect();
            let i = pick.index(nodes.len());
            let w = basis_at(&nodes, nodes[i])?;
            for (j, wj) in w.weights().iter().enumerate() {
                prop_assert_eq!(wj.value(), u64::from(i == j));
            }
        }
    }
}
