//! Dense row-major matrices over a prime field.

use std::fmt;
use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Row,
    Column,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl FieldMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1 % field.modulus();
        }
        m
    }

    /// Builds a matrix from row-major values, reducing each one.
    pub fn from_vec(field: PrimeField, rows: usize, cols: usize, data: Vec<u64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let data = data.into_iter().map(|x| field.reduce(x)).collect();
        Ok(Self {
            field,
            rows,
            cols,
            data,
        })
    }

    pub fn from_rows(field: PrimeField, rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(field, rows.len(), cols, rows.concat())
    }

    pub fn random<R: Rng + ?Sized>(
        field: PrimeField,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Self {
        let p = field.modulus();
        let data = (0..rows * cols).map(|_| rng.random_range(0..p)).collect();
        Self {
            field,
            rows,
            cols,
            data,
        }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of stored field elements.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> FieldElement {
        self.field.element(self.data[row * self.cols + col])
    }

    pub fn set(&mut self, row: usize, col: usize, value: u64) {
        self.data[row * self.cols + col] = self.field.reduce(value);
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    fn same_field(&self, other: &Self) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field.modulus(),
                right: other.field.modulus(),
            });
        }
        Ok(())
    }

    /// Exact product over the field.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = self.field;
        let n = other.cols;
        let mut out = Self::zeros(f, self.rows, n);
        for i in 0..self.rows {
            let acc = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                for (c, &b) in acc.iter_mut().zip(row) {
                    *c = f.mul_add(*c, a, b);
                }
            }
        }
        Ok(out)
    }

    /// `self + coeff * m`, in place.
    pub fn scale_add_assign(&mut self, m: &Self, coeff: u64) -> Result<()> {
        self.same_field(m)?;
        if self.shape() != m.shape() {
            return Err(Error::DimensionMismatch(format!(
                "scale_add of {:?} into {:?}",
                m.shape(),
                self.shape()
            )));
        }
        let f = self.field;
        let coeff = f.reduce(coeff);
        if coeff == 0 {
            return Ok(());
        }
        for (a, &b) in self.data.iter_mut().zip(&m.data) {
            *a = f.mul_add(*a, coeff, b);
        }
        Ok(())
    }

    pub fn scale_add(&self, m: &Self, coeff: FieldElement) -> Result<Self> {
        if coeff.field() != self.field {
            return Err(Error::FieldMismatch {
                left: self.field.modulus(),
                right: coeff.field().modulus(),
            });
        }
        let mut out = self.clone();
        out.scale_add_assign(m, coeff.value())?;
        Ok(out)
    }

    pub fn slice_rows(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.rows {
            return Err(Error::InvalidPartition(format!(
                "row range {range:?} outside 0..{}",
                self.rows
            )));
        }
        Ok(Self {
            field: self.field,
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        })
    }

    pub fn slice_cols(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.cols {
            return Err(Error::InvalidPartition(format!(
                "column range {range:?} outside 0..{}",
                self.cols
            )));
        }
        let width = range.len();
        let mut data = Vec::with_capacity(self.rows * width);
        for i in 0..self.rows {
            let base = i * self.cols;
            data.extend_from_slice(&self.data[base + range.start..base + range.end]);
        }
        Ok(Self {
            field: self.field,
            rows: self.rows,
            cols: width,
            data,
        })
    }

    pub fn slice(&self, axis: Axis, range: Range<usize>) -> Result<Self> {
        match axis {
            Axis::Row => self.slice_rows(range),
            Axis::Column => self.slice_cols(range),
        }
    }

    /// Zero-pads on the bottom and right up to the given shape.
    pub fn pad_to(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows < self.rows || cols < self.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot pad {}x{} down to {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        if rows == self.rows && cols == self.cols {
            return Ok(self.clone());
        }
        let mut out = Self::zeros(self.field, rows, cols);
        for i in 0..self.rows {
            out.data[i * cols..i * cols + self.cols]
                .copy_from_slice(&self.data[i * self.cols..(i + 1) * self.cols]);
        }
        Ok(out)
    }

    /// Keeps the top-left `rows x cols` corner.
    pub fn trim(&self, rows: usize, cols: usize) -> Result<Self> {
        self.slice_rows(0..rows)?.slice_cols(0..cols)
    }

    pub fn split(&self, part: &BlockPartition) -> Result<Vec<Self>> {
        let extent = match part.axis {
            Axis::Row => self.rows,
            Axis::Column => self.cols,
        };
        if part.extent() != extent {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} but axis has extent {extent}",
                part.extent()
            )));
        }
        part.ranges().map(|r| self.slice(part.axis, r)).collect()
    }

    pub fn concat(blocks: &[Self], axis: Axis) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::DimensionMismatch("concat of zero blocks".into()))?;
        for b in blocks {
            first.same_field(b)?;
        }
        match axis {
            Axis::Row => {
                if let Some(b) = blocks.iter().find(|b| b.cols != first.cols) {
                    return Err(Error::DimensionMismatch(format!(
                        "row concat of widths {} and {}",
                        first.cols, b.cols
                    )));
                }
                let rows = blocks.iter().map(|b| b.rows).sum();
                let data = blocks.iter().flat_map(|b| b.data.iter().copied()).collect();
                Ok(Self {
                    field: first.field,
                    rows,
                    cols: first.cols,
                    data,
                })
            }
            Axis::Column => {
                if let Some(b) = blocks.iter().find(|b| b.rows != first.rows) {
                    return Err(Error::DimensionMismatch(format!(
                        "column concat of heights {} and {}",
                        first.rows, b.rows
                    )));
                }
                let cols = blocks.iter().map(|b| b.cols).sum();
                let mut data = Vec::with_capacity(first.rows * cols);
                for i in 0..first.rows {
                    for b in blocks {
                        data.extend_from_slice(&b.data[i * b.cols..(i + 1) * b.cols]);
                    }
                }
                Ok(Self {
                    field: first.field,
                    rows: first.rows,
                    cols,
                    data,
                })
            }
        }
    }
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FieldMatrix<{}>{}x{} [",
            self.field, self.rows, self.cols
        )?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            write!(f, "{}", cells.join(" "))?;
        }
        write!(f, "]")
    }
}

/// Split offsets along one axis. The last boundary is the axis extent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    axis: Axis,
    boundaries: Vec<usize>,
}

impl BlockPartition {
    pub fn new(axis: Axis, boundaries: Vec<usize>) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(Error::InvalidPartition("no boundaries".into()));
        }
        let mut prev = 0;
        for &b in &boundaries {
            if b <= prev {
                return Err(Error::InvalidPartition(format!(
                    "boundaries {boundaries:?} are not strictly increasing"
                )));
            }
            prev = b;
        }
        Ok(Self { axis, boundaries })
    }

    /// `parts` equal blocks covering `extent`.
    pub fn equal(axis: Axis, extent: usize, parts: usize) -> Result<Self> {
        if parts == 0 || !extent.is_multiple_of(parts) {
            return Err(Error::InvalidPartition(format!(
                "{extent} does not split into {parts} equal blocks"
            )));
        }
        let step = extent / parts;
        Self::new(axis, (1..=parts).map(|i| i * step).collect())
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn extent(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        std::iter::once(0)
            .chain(self.boundaries.iter().copied())
            .zip(self.boundaries.iter().copied())
            .map(|(a, b)| a..b)
    }
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

    fn m(p: u64, rows: &[Vec<u64>]) -> FieldMatrix {
        FieldMatrix::from_rows(gf(p), rows).unwrap()
    }

    fn naive(a: &FieldMatrix, b: &FieldMatrix) -> Vec<u64> {
        let p = a.field().modulus() as u128;
        let mut out = vec![0u64; a.rows() * b.cols()];
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s: u128 = 0;
                for k in 0..a.cols() {
                    s += a.get(i, k).value() as u128 * b.get(k, j).value() as u128;
                }
                out[i * b.cols() + j] = (s % p) as u64;
            }
        }
        out
    }

    #[test]
    fn matmul_examples() {
        let id = m(7, &[vec![1, 0], vec![0, 1]]);
        let b = m(7, &[vec![2, 3], vec![4, 5]]);
        assert_eq!(id.matmul(&b).unwrap(), b);
        let row = m(7, &[vec![1, 1]]);
        let col = m(7, &[vec![3], vec![5]]);
        assert_eq!(row.matmul(&col).unwrap(), m(7, &[vec![1]]));
        let z = FieldMatrix::zeros(gf(7), 2, 2);
        let any = m(7, &[vec![1, 2, 3], vec![4, 5, 6]]);
        assert!(z.matmul(&any).unwrap().is_zero());
        assert_eq!(z.matmul(&any).unwrap().shape(), (2, 3));
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let a = FieldMatrix::zeros(gf(7), 2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::DimensionMismatch(_))));
        let b = FieldMatrix::zeros(gf(11), 3, 3);
        assert!(matches!(a.matmul(&b), Err(Error::FieldMismatch { .. })));
    }

    #[test]
    fn split_examples() {
        let a = m(7, &[vec![1, 2, 3, 4], vec![5, 6, 0, 1]]);
        let part = BlockPartition::new(Axis::Column, vec![2, 4]).unwrap();
        let blocks = a.split(&part).unwrap();
        assert_eq!(blocks[0], m(7, &[vec![1, 2], vec![5, 6]]));
        assert_eq!(blocks[1], m(7, &[vec![3, 4], vec![0, 1]]));
        assert_eq!(FieldMatrix::concat(&blocks, Axis::Column).unwrap(), a);

        let sq = m(7, &[vec![1, 2, 3], vec![4, 5, 6], vec![0, 1, 2]]);
        let rows = sq
            .split(&BlockPartition::new(Axis::Row, vec![1, 3]).unwrap())
            .unwrap();
        assert_eq!(rows[0].shape(), (1, 3));
        assert_eq!(rows[1].shape(), (2, 3));
    }

    #[test]
    fn equal_split_into_l_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = FieldMatrix::random(gf(1993), 4, 12, &mut rng);
        let blocks = a
            .split(&BlockPartition::equal(Axis::Column, 12, 3).unwrap())
            .unwrap();
        assert_eq!(blocks.len(), 3);
        assert!(blocks.iter().all(|b| b.shape() == (4, 4)));
        assert!(BlockPartition::equal(Axis::Column, 10, 3).is_err());
    }

    #[test]
    fn invalid_boundaries() {
        assert!(BlockPartition::new(Axis::Row, vec![2, 2]).is_err());
        assert!(BlockPartition::new(Axis::Row, vec![0, 2]).is_err());
        assert!(BlockPartition::new(Axis::Row, vec![]).is_err());
        let a = FieldMatrix::zeros(gf(7), 3, 3);
        let p = BlockPartition::new(Axis::Row, vec![1, 4]).unwrap();
        assert!(matches!(a.split(&p), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn concat_examples() {
        let a = m(7, &[vec![1, 2], vec![3, 4]]);
        let b = m(7, &[vec![5, 6], vec![0, 1]]);
        let c = FieldMatrix::concat(&[a.clone(), b.clone()], Axis::Column).unwrap();
        assert_eq!(c, m(7, &[vec![1, 2, 5, 6], vec![3, 4, 0, 1]]));
        let r = FieldMatrix::concat(&[a.clone(), b], Axis::Row).unwrap();
        assert_eq!(r.shape(), (4, 2));
        let tall = FieldMatrix::zeros(gf(7), 3, 2);
        assert!(FieldMatrix::concat(&[a, tall], Axis::Column).is_err());
        assert!(FieldMatrix::concat(&[], Axis::Row).is_err());
    }

    #[test]
    fn scale_add_examples() {
        let f = gf(7);
        let acc = m(7, &[vec![1]]);
        let x = m(7, &[vec![4]]);
        assert_eq!(acc.scale_add(&x, f.element(3)).unwrap(), m(7, &[vec![6]]));
        assert_eq!(acc.scale_add(&x, f.zero()).unwrap(), acc);
        let zero = FieldMatrix::zeros(f, 1, 1);
        assert_eq!(zero.scale_add(&x, f.one()).unwrap(), x);
        let wide = FieldMatrix::zeros(f, 1, 2);
        assert!(acc.scale_add(&wide, f.one()).is_err());
    }

    #[test]
    fn pad_and_trim() {
        let a = m(7, &[vec![1, 2], vec![3, 4]]);
        let p = a.pad_to(3, 5).unwrap();
        assert_eq!(p.shape(), (3, 5));
        assert_eq!(p.get(1, 1).value(), 4);
        assert_eq!(p.get(2, 4).value(), 0);
        assert_eq!(p.trim(2, 2).unwrap(), a);
        assert!(a.pad_to(1, 2).is_err());
    }

    #[test]
    fn empty_blocks_are_allowed() {
        let a = m(7, &[vec![1, 2], vec![3, 4]]);
        let e = a.slice_cols(1..1).unwrap();
        assert_eq!(e.shape(), (2, 0));
        let b = FieldMatrix::zeros(gf(7), 0, 3);
        assert_eq!(e.matmul(&b).unwrap().shape(), (2, 3));
        assert_eq!(
            FieldMatrix::concat(&[e, a.clone()], Axis::Column).unwrap(),
            a
        );
    }

    proptest! {
        #[test]
        fn matmul_agrees_with_naive(
            rows in 1usize..=16, inner in 1usize..=16, cols in 1usize..=16, seed in any::<u64>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = FieldMatrix::random(gf(1993), rows, inner, &mut rng);
            let b = FieldMatrix::random(gf(1993), inner, cols, &mut rng);
            let got = a.matmul(&b).unwrap();
            prop_assert_eq!(got.as_slice(), &naive(&a, &b)[..]);
        }

        #[test]
        fn split_concat_round_trip(
            rows in 1usize..=10, cols in 1usize..=10, cuts in proptest::collection::btree_set(1usize..10, 0..5),
            by_row in any::<bool>(), seed in any::<u64>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = FieldMatrix::random(gf(101), rows, cols, &mut rng);
            let axis = if by_row { Axis::Row } else { Axis::Column };
            let extent = if by_row { rows } else { cols };
            let mut bounds: Vec<usize> = cuts.into_iter().filter(|&c| c < extent).collect();
            bounds.push(extent);
            let part = BlockPartition::new(axis, bounds)?;
            let blocks = a.split(&part)?;
            prop_assert_eq!(blocks.len(), part.len());
            prop_assert_eq!(FieldMatrix::concat(&blocks, axis)?, a);
        }
    }
}
