//! Real coordinates for Hermitian-preserving superoperators.
//!
//! Operators are expanded in an orthonormal Hermitian basis built from matrix
//! units: `E_aa`, `(E_ab + E_ba)/√2` and `i(E_ab − E_ba)/√2` for `a < b`. A map
//! that sends Hermitian operators to Hermitian operators has a real matrix in
//! these coordinates. The basis may be restricted to an invariant sector by
//! keeping only a symmetric subset of matrix units.
//!
//! Superoperator matrices are assembled by applying each term to the matrix
//! units directly, so nothing of Liouville size `dim⁴` is ever formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::liouops::{LindbladModel, QOperator, C64, I, ZERO};

const UNUSED: u32 = u32::MAX;
const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Diag(usize),
    Sym(usize, usize),
    Anti(usize, usize),
}

#[derive(Debug, Clone)]
pub struct RealBasis {
    dim: usize,
    coords: Vec<Coord>,
    // first coordinate attached to unit (a, b); for a != b the antisymmetric
    // partner follows at +1
    lookup: Vec<u32>,
}

impl RealBasis {
    /// Every matrix unit.
    pub fn full(dim: usize) -> Self {
        Self::restricted(dim, |_, _| true)
    }

    /// Units `(a, b)` with `keep(a, b)`; `keep` must be symmetric and keep the diagonal.
    pub fn restricted(dim: usize, keep: impl Fn(usize, usize) -> bool) -> Self {
        let mut coords = Vec::new();
        let mut lookup = vec![UNUSED; dim * dim];
        for a in 0..dim {
            for b in a..dim {
                if !keep(a, b) {
                    continue;
                }
                let k = coords.len() as u32;
                lookup[a + dim * b] = k;
                lookup[b + dim * a] = k;
                if a == b {
                    coords.push(Coord::Diag(a));
                } else {
                    coords.push(Coord::Sym(a, b));
                    coords.push(Coord::Anti(a, b));
                }
            }
        }
        Self { dim, coords, lookup }
    }

    /// Units connecting basis states of equal charge.
    pub fn from_charges(charges: &[i64]) -> Self {
        Self::restricted(charges.len(), |a, b| charges[a] == charges[b])
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    /// Number of real coordinates.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn contains_unit(&self, a: usize, b: usize) -> bool {
        self.lookup[a + self.dim * b] != UNUSED
    }

    /// Coordinate vector of `Tr(·)`.
    pub fn trace_functional(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.coords.iter().map(|c| if matches!(c, Coord::Diag(_)) { 1.0 } else { 0.0 }),
        )
    }

    /// Coordinates of an operator. Components outside the sector are dropped;
    /// use [`RealBasis::outside_weight`] to check for them.
    pub fn to_coords(&self, x: &DMatrix<C64>) -> DVector<C64> {
        DVector::from_iterator(
            self.len(),
            self.coords.iter().map(|c| match *c {
                Coord::Diag(a) => x[(a, a)],
                Coord::Sym(a, b) => (x[(a, b)] + x[(b, a)]) * SQRT_HALF,
                Coord::Anti(a, b) => I * (x[(b, a)] - x[(a, b)]) * SQRT_HALF,
            }),
        )
    }

    /// Largest entry of `x` on matrix units outside the sector.
    pub fn outside_weight(&self, x: &DMatrix<C64>) -> f64 {
        let mut worst = 0.0_f64;
        for b in 0..self.dim {
            for a in 0..self.dim {
                if !self.contains_unit(a, b) {
                    worst = worst.max(x[(a, b)].norm());
                }
            }
        }
        worst
    }

    pub fn from_coords(&self, c: &DVector<C64>) -> DMatrix<C64> {
        let mut x = DMatrix::<C64>::zeros(self.dim, self.dim);
        for (k, coord) in self.coords.iter().enumerate() {
            match *coord {
                Coord::Diag(a) => x[(a, a)] += c[k],
                Coord::Sym(a, b) => {
                    x[(a, b)] += c[k] * SQRT_HALF;
                    x[(b, a)] += c[k] * SQRT_HALF;
                }
                Coord::Anti(a, b) => {
                    x[(a, b)] += I * c[k] * SQRT_HALF;
                    x[(b, a)] -= I * c[k] * SQRT_HALF;
                }
            }
        }
        x
    }

    pub fn from_real_coords(&self, c: &DVector<f64>) -> DMatrix<C64> {
        self.from_coords(&c.map(|x| C64::new(x, 0.0)))
    }

    /// Matrix units (with weights) composing coordinate `k`.
    fn units(&self, k: usize) -> ([(usize, usize, C64); 2], usize) {
        match self.coords[k] {
            Coord::Diag(a) => ([(a, a, C64::new(1.0, 0.0)), (0, 0, ZERO)], 1),
            Coord::Sym(a, b) => {
                let w = C64::new(SQRT_HALF, 0.0);
                ([(a, b, w), (b, a, w)], 2)
            }
            Coord::Anti(a, b) => ([(a, b, I * SQRT_HALF), (b, a, -I * SQRT_HALF)], 2),
        }
    }

    /// Real matrix of the superoperator given by `terms` in this basis.
    pub fn assemble(&self, terms: &[SuperTerm]) -> Result<DMatrix<f64>> {
        let n = self.len();
        let d = self.dim;
        let mut out = DMatrix::<f64>::zeros(n, n);
        let mut scratch = vec![ZERO; d * d];
        let mut touched: Vec<usize> = Vec::new();
        let mut column = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let (units, count) = self.units(k);
            for &(a, b, w) in &units[..count] {
                for term in terms {
                    term.apply_unit(a, b, w, d, &mut scratch, &mut touched);
                }
            }
            column.iter_mut().for_each(|z| *z = ZERO);
            let mut leak = 0.0_f64;
            for &idx in &touched {
                let v = scratch[idx];
                if v == ZERO {
                    continue;
                }
                scratch[idx] = ZERO;
                let (r, c) = (idx % d, idx / d);
                let slot = self.lookup[idx];
                if slot == UNUSED {
                    leak = leak.max(v.norm());
                    continue;
                }
                let slot = slot as usize;
                if r == c {
                    column[slot] += v;
                } else if r < c {
                    column[slot] += v * SQRT_HALF;
                    column[slot + 1] += -I * v * SQRT_HALF;
                } else {
                    column[slot] += v * SQRT_HALF;
                    column[slot + 1] += I * v * SQRT_HALF;
                }
            }
            touched.clear();
            let scale = column.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
            if leak > 1e-12 * scale {
                return Err(Error::Precondition(format!(
                    "sector is not invariant: coordinate {k} leaks weight {leak:.3e}"
                )));
            }
            for (i, z) in column.iter().enumerate() {
                out[(i, k)] = z.re;
            }
        }
        Ok(out)
    }
}

/// Sparse view of an operator by columns and by rows.
#[derive(Debug, Clone)]
pub struct SparseOp {
    cols: Vec<Vec<(usize, C64)>>,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let d = m.nrows();
        let mut cols = vec![Vec::new(); d];
        let mut rows = vec![Vec::new(); d];
        for c in 0..d {
            for r in 0..d {
                let v = m[(r, c)];
                if v != ZERO {
                    cols[c].push((r, v));
                    rows[r].push((c, v));
                }
            }
        }
        Self { cols, rows }
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(|c| c.is_empty())
    }
}

/// One term of a superoperator in operator form.
#[derive(Debug, Clone)]
pub enum SuperTerm {
    /// `coef · [H, ·]`.
    Commutator { h: SparseOp, coef: C64 },
    /// `rate · L(X)`, with `m = X†X` precomputed.
    Jump { x: SparseOp, m: SparseOp, rate: f64 },
}

impl SuperTerm {
    pub fn commutator(h: &QOperator, coef: C64) -> Self {
        SuperTerm::Commutator { h: SparseOp::from_dense(h.entries()), coef }
    }

    pub fn jump(x: &QOperator, rate: f64) -> Self {
        let xm = x.entries();
        SuperTerm::Jump {
            x: SparseOp::from_dense(xm),
            m: SparseOp::from_dense(&(xm.adjoint() * xm)),
            rate,
        }
    }

    fn apply_unit(
        &self,
        a: usize,
        b: usize,
        w: C64,
        d: usize,
        scratch: &mut [C64],
        touched: &mut Vec<usize>,
    ) {
        let mut add = |r: usize, c: usize, v: C64| {
            let idx = r + d * c;
            if scratch[idx] == ZERO {
                touched.push(idx);
            }
            scratch[idx] += v;
        };
        match self {
            SuperTerm::Commutator { h, coef } => {
                let s = *coef * w;
                // H E_ab: column a of H lands in column b
                for &(r, v) in &h.cols[a] {
                    add(r, b, s * v);
                }
                // E_ab H: row b of H lands in row a
                for &(c, v) in &h.rows[b] {
                    add(a, c, -s * v);
                }
            }
            SuperTerm::Jump { x, m, rate } => {
                if *rate == 0.0 {
                    return;
                }
                let s = w * *rate;
                for &(r, xa) in &x.cols[a] {
                    for &(c, xb) in &x.cols[b] {
                        add(r, c, s * xa * xb.conj());
                    }
                }
                let h = s * 0.5;
                for &(r, v) in &m.cols[a] {
                    add(r, b, -h * v);
                }
                for &(c, v) in &m.rows[b] {
                    add(a, c, -h * v);
                }
            }
        }
    }
}

/// Operator-form terms of `𝓕₀ = −i[H0,·] + 𝓓`, `𝓟 = i[P,·]` and `𝓗₁ = i[H1,·]`.
pub fn model_terms(model: &LindbladModel) -> (Vec<SuperTerm>, Vec<SuperTerm>, Vec<SuperTerm>) {
    let mut f0 = vec![SuperTerm::commutator(model.h0(), -I)];
    f0.extend(model.jumps().iter().filter(|j| j.rate > 0.0).map(|j| SuperTerm::jump(&j.op, j.rate)));
    let drive = vec![SuperTerm::commutator(model.p(), I)];
    let h1 = vec![SuperTerm::commutator(model.h1(), I)];
    (f0, drive, h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouops::{lindblad_dissipator, spin_half, vec as lvec};

    fn random_op(d: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        DMatrix::from_fn(d, d, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn coordinates_round_trip() {
        let basis = RealBasis::full(3);
        let x = random_op(3, 5);
        let back = basis.from_coords(&basis.to_coords(&x));
        assert!((back - x).camax() < 1e-14);
    }

    #[test]
    fn hermitian_operator_has_real_coordinates() {
        let basis = RealBasis::full(3);
        let x = random_op(3, 9);
        let h = (&x + x.adjoint()) * C64::new(0.5, 0.0);
        let c = basis.to_coords(&h);
        assert!(c.iter().all(|z| z.im.abs() < 1e-15));
        assert!((c.map(|z| z.re).dot(&basis.trace_functional()) - h.trace().re).abs() < 1e-14);
    }

    #[test]
    fn assembled_dissipator_matches_kronecker_form() {
        let d = 3;
        let x = QOperator::new(random_op(d, 17)).unwrap();
        let basis = RealBasis::full(d);
        let real = basis.assemble(&[SuperTerm::jump(&x, 0.7)]).unwrap();
        let kron = lindblad_dissipator(&x, 0.7).unwrap();
        let rho = random_op(d, 23);
        let via_real = basis.from_coords(&(real.map(|v| C64::new(v, 0.0)) * basis.to_coords(&rho)));
        let via_kron = crate::liouops::devec(&(kron.entries() * lvec(&rho))).unwrap();
        assert!((via_real - via_kron).camax() < 1e-13);
    }

    #[test]
    fn leaking_sector_is_rejected() {
        let (sz, sp, sm) = spin_half();
        let sx = QOperator::hermitian((&sp + &sm) * C64::new(0.5, 0.0)).unwrap();
        let basis = RealBasis::restricted(2, |a, b| a == b);
        assert!(basis.assemble(&[SuperTerm::commutator(&sx, I)]).is_err());
        let szq = QOperator::hermitian(sz).unwrap();
        assert!(basis.assemble(&[SuperTerm::commutator(&szq, I)]).is_ok());
    }
}
