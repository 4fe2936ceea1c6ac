use serde::{Deserialize, Serialize};

use super::signs::{self, SignSource};
use crate::error::{GeometryError, InstanceError};
use crate::geometry::{Exponent, LpSpace};

/// Layout of the direction vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Every vector uses all `d` coordinates.
    Dense,
    /// Vector `i` lives on the block `[(i-1)L, iL)`.
    Disjoint,
    /// Dense signs, paired with the Euclidean ball inscribed in the unit `l_p` ball.
    Inscribed,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Dense => "dense",
            FamilyKind::Disjoint => "disjoint",
            FamilyKind::Inscribed => "inscribed",
        }
    }
}

/// The random directions `z^1, ..., z^M`, each `L^(-1/p*)` times a sign
/// vector on its support, so that every `||z^i||_{p*} = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFamily {
    space: LpSpace,
    kind: FamilyKind,
    count: usize,
    block: usize,
    seed: Option<u64>,
    words: usize,
    bits: Vec<u64>,
    magnitude: f64,
}

impl VectorFamily {
    /// Samples `count` vectors with block length `block` (ignored unless the
    /// kind is disjoint, where it must satisfy `count * block <= d`).
    pub fn sample(
        space: LpSpace,
        kind: FamilyKind,
        count: usize,
        block: usize,
        seed: u64,
    ) -> Result<Self, InstanceError> {
        let block = Self::check_layout(space, kind, count, block)?;
        let source = SignSource::new(seed);
        let words = signs::words_for(block);
        let mut bits = Vec::with_capacity(words * count);
        for i in 1..=count {
            bits.extend(source.row(i as u64, block));
        }
        Ok(Self::assemble(space, kind, count, block, Some(seed), bits))
    }

    /// Builds a family from explicit packed sign rows (`count` rows of
    /// `words_for(block)` words each).
    pub fn from_bits(
        space: LpSpace,
        kind: FamilyKind,
        count: usize,
        block: usize,
        seed: Option<u64>,
        mut bits: Vec<u64>,
    ) -> Result<Self, InstanceError> {
        let block = Self::check_layout(space, kind, count, block)?;
        let words = signs::words_for(block);
        if bits.len() != words * count {
            return Err(InstanceError::Document {
                path: "entries_b64".into(),
                message: format!("expected {} words of sign bits, got {}", words * count, bits.len()),
            });
        }
        for row in bits.chunks_mut(words.max(1)) {
            signs::clear_tail(row, block);
        }
        Ok(Self::assemble(space, kind, count, block, seed, bits))
    }

    fn check_layout(
        space: LpSpace,
        kind: FamilyKind,
        count: usize,
        block: usize,
    ) -> Result<usize, InstanceError> {
        match kind {
            FamilyKind::Dense | FamilyKind::Inscribed => Ok(space.dim),
            FamilyKind::Disjoint => {
                if block == 0 {
                    return Err(InstanceError::InvalidSetting("disjoint block length must be positive".into()));
                }
                if count.saturating_mul(block) > space.dim {
                    return Err(InstanceError::Infeasible(vec![crate::error::Violation {
                        condition: crate::error::Condition::SupportBudget,
                        lhs: (count * block) as f64,
                        rhs: space.dim as f64,
                    }]));
                }
                Ok(block)
            }
        }
    }

    fn assemble(
        space: LpSpace,
        kind: FamilyKind,
        count: usize,
        block: usize,
        seed: Option<u64>,
        bits: Vec<u64>,
    ) -> Self {
        let magnitude = entry_magnitude(block, space.p);
        Self {
            space,
            kind,
            count,
            block,
            seed,
            words: signs::words_for(block),
            bits,
            magnitude,
        }
    }

    pub fn space(&self) -> LpSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn p(&self) -> Exponent {
        self.space.p
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Number of vectors `M`.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Support size `L`.
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// The common absolute value `L^(-1/p*)` of every nonzero entry.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn packed_bits(&self) -> &[u64] {
        &self.bits
    }

    /// Packed signs of `z^i` (1-based), relative to its support.
    pub fn row_bits(&self, i: usize) -> &[u64] {
        assert!(i >= 1 && i <= self.count, "vector index {i} out of 1..={}", self.count);
        &self.bits[(i - 1) * self.words..i * self.words]
    }

    /// Coordinate range of `z^i` (1-based).
    pub fn support(&self, i: usize) -> std::ops::Range<usize> {
        match self.kind {
            FamilyKind::Disjoint => (i - 1) * self.block..i * self.block,
            _ => 0..self.space.dim,
        }
    }

    /// Entry `j` of `z^i` (1-based `i`, 0-based `j`).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let s = self.support(i);
        if s.contains(&j) {
            self.magnitude * signs::sign(self.row_bits(i), j - s.start)
        } else {
            0.0
        }
    }

    /// `z^i` as a dense vector.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.space.dim];
        let s = self.support(i);
        let row = self.row_bits(i);
        for (k, j) in s.enumerate() {
            v[j] = self.magnitude * signs::sign(row, k);
        }
        v
    }

    /// `<z^i, x>`.
    pub fn inner(&self, i: usize, x: &[f64]) -> f64 {
        let s = self.support(i);
        self.magnitude * signs::signed_sum(self.row_bits(i), &x[s])
    }

    /// `<z^i, x>` for every `i`, in one pass over `x` when supports coincide.
    pub fn inner_all(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.space.check(x)?;
        Ok(match self.kind {
            FamilyKind::Disjoint => (1..=self.count).map(|i| self.inner(i, x)).collect(),
            _ => {
                let rows: Vec<&[u64]> = (1..=self.count).map(|i| self.row_bits(i)).collect();
                signs::signed_sums(&rows, x)
                    .into_iter()
                    .map(|s| self.magnitude * s)
                    .collect()
            }
        })
    }

    /// Adds `c * z^i` into `out`.
    pub fn add_scaled(&self, i: usize, c: f64, out: &mut [f64]) {
        let s = self.support(i);
        let row = self.row_bits(i);
        let a = c * self.magnitude;
        for (k, j) in s.enumerate() {
            out[j] += a * signs::sign(row, k);
        }
    }

    /// `sum_i lambda_i z^i`.
    pub fn combination(&self, lambda: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.space.dim];
        for (i, &l) in lambda.iter().enumerate() {
            if l != 0.0 {
                self.add_scaled(i + 1, l, &mut v);
            }
        }
        v
    }

    /// Gram matrix `<z^i, z^j>` computed from sign disagreements.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let m = self.count;
        let sq = self.magnitude * self.magnitude;
        let mut g = vec![vec![0.0; m]; m];
        for i in 1..=m {
            g[i - 1][i - 1] = sq * self.block as f64;
            for j in i + 1..=m {
                let v = match self.kind {
                    FamilyKind::Disjoint => 0.0,
                    _ => {
                        let diff = signs::disagreements(self.row_bits(i), self.row_bits(j), self.block);
                        sq * (self.block as f64 - 2.0 * diff as f64)
                    }
                };
                g[i - 1][j - 1] = v;
                g[j - 1][i - 1] = v;
            }
        }
        g
    }

    /// A copy with `z^i` resampled from another seed's stream; used to build
    /// instances that differ in one branch only.
    pub fn with_row_replaced(&self, i: usize, seed: u64) -> Self {
        let mut out = self.clone();
        let row = SignSource::new(seed).row(i as u64, self.block);
        out.bits[(i - 1) * self.words..i * self.words].copy_from_slice(&row);
        out.seed = None;
        out
    }
}

/// `L^(-1/p*)`, exactly 1 when `p = 1`.
pub fn entry_magnitude(block: usize, p: Exponent) -> f64 {
    match p.dual() {
        Exponent::Infinity => 1.0,
        q => (block as f64).powf(-1.0 / q.value()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lp_norm;

    fn space(d: usize, p: f64) -> LpSpace {
        LpSpace::new(d, Exponent::new(p).unwrap()).unwrap()
    }

    #[test]
    fn dense_p2_entries_are_halves() {
        let f = VectorFamily::sample(space(4, 2.0), FamilyKind::Dense, 3, 0, 1).unwrap();
        for i in 1..=3 {
            let v = f.vector(i);
            assert!(v.iter().all(|e| *e == 0.5 || *e == -0.5));
            assert_eq!(lp_norm(&v, Exponent::two()), 1.0);
        }
    }

    #[test]
    fn disjoint_blocks_do_not_overlap() {
        let f = VectorFamily::sample(space(4, 3.0), FamilyKind::Disjoint, 2, 2, 8).unwrap();
        let (a, b) = (f.vector(1), f.vector(2));
        assert!(a[2] == 0.0 && a[3] == 0.0 && a[0] != 0.0 && a[1] != 0.0);
        assert!(b[0] == 0.0 && b[1] == 0.0 && b[2] != 0.0 && b[3] != 0.0);
        assert_eq!(f.gram()[0][1], 0.0);
    }

    #[test]
    fn resampling_is_bitwise_identical() {
        let a = VectorFamily::sample(space(300, 1.5), FamilyKind::Dense, 5, 0, 77).unwrap();
        let b = VectorFamily::sample(space(300, 1.5), FamilyKind::Dense, 5, 0, 77).unwrap();
        assert_eq!(a, b);
        let c = VectorFamily::sample(space(300, 1.5), FamilyKind::Dense, 5, 0, 78).unwrap();
        assert_ne!(a.packed_bits(), c.packed_bits());
    }

    #[test]
    fn too_many_blocks_are_rejected() {
        let err = VectorFamily::sample(space(10, 3.0), FamilyKind::Disjoint, 4, 3, 0).unwrap_err();
        assert_eq!(err.violated(), Some(crate::error::Condition::SupportBudget));
    }

    #[test]
    fn gram_matches_dense_inner_products() {
        let f = VectorFamily::sample(space(150, 2.0), FamilyKind::Dense, 4, 0, 3).unwrap();
        let g = f.gram();
        for i in 1..=4 {
            for j in 1..=4 {
                let direct = crate::geometry::dot(&f.vector(i), &f.vector(j));
                assert!((g[i - 1][j - 1] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inner_products_match_dense_vectors() {
        for kind in [FamilyKind::Dense, FamilyKind::Disjoint] {
            let f = VectorFamily::sample(space(200, 3.0), kind, 3, 60, 4).unwrap();
            let x: Vec<f64> = (0..200).map(|j| ((j * 7) as f64).cos()).collect();
            let all = f.inner_all(&x).unwrap();
            for i in 1..=3 {
                let direct = crate::geometry::dot(&f.vector(i), &x);
                assert!((all[i - 1] - direct).abs() < 1e-12);
            }
        }
    }
}
