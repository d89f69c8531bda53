//! Sparse LU of the SAR matrix, built once and reused for every right-hand
//! side. Factorization and solves run sequentially inside faer so results do
//! not depend on the thread pool; callers parallelize across blocks of
//! right-hand sides instead.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::colamd;
use faer::sparse::linalg::lu::{
    factorize_symbolic_lu, simplicial, LuRef, LuSymbolicParams, NumericLu, SymbolicLu,
};
use faer::sparse::SparseColMat;
use faer::{Conj, MatMut, Par};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub struct SparseLu {
    n: usize,
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        let a = matrix.to_faer()?;
        let n = a.nrows();
        let symbolic = factorize_symbolic_lu(a.symbolic(), LuSymbolicParams::default())
            .map_err(|e| Error::Factorization(format!("symbolic LU: {e:?}")))?;
        let mut numeric = NumericLu::new();
        let mut mem = MemBuffer::try_new(
            symbolic.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default()),
        )
        .map_err(|e| Error::Factorization(format!("workspace: {e:?}")))?;
        symbolic
            .factorize_numeric_lu(
                &mut numeric,
                a.as_ref(),
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| Error::Factorization(format!("numeric LU: {e:?}")))?;
        Ok(Self {
            n,
            symbolic,
            numeric,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A X = RHS` in place for a column-major block of right-hand sides.
    pub fn solve_in_place(&self, rhs: MatMut<'_, f64>) {
        assert_eq!(rhs.nrows(), self.n);
        let mut mem = MemBuffer::new(
            self.symbolic
                .solve_in_place_scratch::<f64>(rhs.ncols(), Par::Seq),
        );
        // `numeric` was produced from `symbolic` in `new`
        let lu = LuRef::new_unchecked(&self.symbolic, &self.numeric);
        lu.solve_in_place_with_conj(Conj::No, rhs, Par::Seq, MemStack::new(&mut mem));
    }
}

/// `log |det A|` from the diagonal of a simplicial LU with a COLAMD column
/// ordering.
pub fn log_abs_det(matrix: &CsrMatrix) -> Result<f64> {
    let a: SparseColMat<usize, f64> = matrix.to_faer()?;
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let nnz = a.compute_nnz();
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    {
        let mut mem = MemBuffer::try_new(colamd::order_scratch::<usize>(n, n, nnz))
            .map_err(|e| Error::Factorization(format!("workspace: {e:?}")))?;
        colamd::order(
            &mut perm,
            &mut perm_inv,
            a.symbolic(),
            colamd::Control::default(),
            MemStack::new(&mut mem),
        )
        .map_err(|e| Error::Factorization(format!("ordering: {e:?}")))?;
    }
    let col_perm = faer::perm::PermRef::new_checked(&perm, &perm_inv, n);
    let mut row_perm = vec![0usize; n];
    let mut row_perm_inv = vec![0usize; n];
    let mut lu = simplicial::SimplicialLu::<usize, f64>::new();
    let mut mem = MemBuffer::try_new(simplicial::factorize_simplicial_numeric_lu_scratch::<
        usize,
        f64,
    >(n, n))
    .map_err(|e| Error::Factorization(format!("workspace: {e:?}")))?;
    simplicial::factorize_simplicial_numeric_lu(
        &mut row_perm,
        &mut row_perm_inv,
        &mut lu,
        a.as_ref(),
        col_perm,
        MemStack::new(&mut mem),
    )
    .map_err(|e| Error::Factorization(format!("numeric LU: {e:?}")))?;

    // L has a unit diagonal whether or not it is stored explicitly.
    let diag = |factor: faer::sparse::SparseColMatRef<'_, usize, f64>, j: usize| {
        let rows = factor.row_idx_of_col_raw(j);
        rows.iter()
            .position(|&r| r == j)
            .map(|k| factor.val_of_col(j)[k])
    };
    let (l, u) = (lu.l_factor_unsorted(), lu.u_factor_unsorted());
    let mut total = 0.0;
    for j in 0..n {
        total += diag(l, j).unwrap_or(1.0).abs().ln();
        total += diag(u, j).unwrap_or(0.0).abs().ln();
    }
    if !total.is_finite() {
        return Err(Error::Factorization(
            "matrix is numerically singular".into(),
        ));
    }
    Ok(total)
}
