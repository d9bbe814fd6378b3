//! Left-looking sparse LU (Gilbert-Peierls) with threshold partial pivoting.
//!
//! Column `k` of the factors is obtained by a sparse triangular solve with
//! the columns of `L` computed so far. The nonzero pattern of that solve is
//! predicted by a depth-first search over the graph of `L` before any
//! arithmetic, so the work per column is proportional to the flops it needs
//! rather than to `n`.
//!
//! When the columns become nearly full, the remaining Schur complement is
//! gathered into a dense block and finished with a blocked right-looking LU
//! using the same pivot rule.

use super::{Ordering, Scalar, SparseError, SparseMatrix};

pub const DEFAULT_PIVOT_TOL: f64 = 1e-3;

/// Fraction of the remaining rows a column of `L` must fill to trigger the
/// dense phase.
pub const DEFAULT_DENSE_SWITCH: f64 = 0.6;

/// Trailing blocks smaller than this always stay sparse.
const DENSE_MIN: usize = 128;
const BLOCK: usize = 32;

const UNSET: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuOptions {
    /// The diagonal stays pivot unless it falls below this fraction of the
    /// largest candidate; `0` accepts any nonzero diagonal.
    pub pivot_tol: f64,
    /// `None` keeps the whole factorization sparse.
    pub dense_switch: Option<f64>,
}

impl Default for LuOptions {
    fn default() -> Self {
        Self {
            pivot_tol: DEFAULT_PIVOT_TOL,
            dense_switch: Some(DEFAULT_DENSE_SWITCH),
        }
    }
}

/// `P_r · A · P_cᵀ = L · U` with `L` unit lower triangular (diagonal stored).
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    l: SparseMatrix<T>,
    u: SparseMatrix<T>,
    /// `row_perm[k]` is the row of `A` that became pivot `k`.
    row_perm: Vec<usize>,
    /// `col_perm[k]` is the column of `A` eliminated at step `k`.
    col_perm: Vec<usize>,
    n: usize,
    dense_tail: usize,
}

/// Factorizes `a`, taking columns in the order given by `ord`.
pub fn lu_factorize<T: Scalar>(
    a: &SparseMatrix<T>,
    ord: &Ordering,
    pivot_tol: f64,
) -> Result<LuFactors<T>, SparseError> {
    lu_factorize_with(
        a,
        ord,
        &LuOptions {
            pivot_tol,
            ..LuOptions::default()
        },
    )
}

/// Sparse state of the left-looking phase.
struct Left<'a, T> {
    n: usize,
    ap: &'a [usize],
    ai: &'a [usize],
    ax: &'a [T],
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    pinv: Vec<usize>,
    x: Vec<T>,
    xi: Vec<usize>,
    stack: Vec<usize>,
    pstack: Vec<usize>,
    mark: Vec<usize>,
}

impl<T: Scalar> Left<'_, T> {
    /// Solves `L x = A(:, col)` with the finished columns of `L`; the
    /// pattern of `x` is left in `xi[top..n]`, which is returned.
    fn reach_solve(&mut self, col: usize, stamp: usize) -> usize {
        let n = self.n;
        let (lp, li, lx) = (&self.lp, &self.li, &self.lx);
        let (pinv, mark, stack, pstack, xi, x) = (
            &self.pinv,
            &mut self.mark,
            &mut self.stack,
            &mut self.pstack,
            &mut self.xi,
            &mut self.x,
        );

        // Symbolic: reach of A(:, col) in the graph of L, in topological order.
        let mut top = n;
        for &start in &self.ai[self.ap[col]..self.ap[col + 1]] {
            if mark[start] == stamp {
                continue;
            }
            let mut head = 0usize;
            stack[0] = start;
            loop {
                let j = stack[head];
                let jnew = pinv[j];
                if mark[j] != stamp {
                    mark[j] = stamp;
                    pstack[head] = if jnew == UNSET { 0 } else { lp[jnew] + 1 };
                }
                let end = if jnew == UNSET { 0 } else { lp[jnew + 1] };
                let mut descended = false;
                let mut p = pstack[head];
                while p < end {
                    let i = li[p];
                    p += 1;
                    if mark[i] != stamp {
                        pstack[head] = p;
                        head += 1;
                        stack[head] = i;
                        descended = true;
                        break;
                    }
                }
                if !descended {
                    pstack[head] = end;
                    top -= 1;
                    xi[top] = j;
                    if head == 0 {
                        break;
                    }
                    head -= 1;
                }
            }
        }

        // Numeric: x = L \ A(:, col) restricted to the reach.
        for p in self.ap[col]..self.ap[col + 1] {
            x[self.ai[p]] = self.ax[p];
        }
        for &j in &xi[top..n] {
            let jnew = pinv[j];
            if jnew == UNSET {
                continue;
            }
            let xj = x[j];
            for p in lp[jnew] + 1..lp[jnew + 1] {
                let v = lx[p] * xj;
                x[li[p]] -= v;
            }
        }
        top
    }
}

pub fn lu_factorize_with<T: Scalar>(
    a: &SparseMatrix<T>,
    ord: &Ordering,
    opts: &LuOptions,
) -> Result<LuFactors<T>, SparseError> {
    if !a.is_square() {
        return Err(SparseError::NotSquare {
            nrows: a.nrows(),
            ncols: a.ncols(),
        });
    }
    let n = a.ncols();
    if ord.len() != n {
        return Err(SparseError::DimensionMismatch {
            expected: n,
            found: ord.len(),
        });
    }
    let q = ord.perm();
    let pivot_tol = opts.pivot_tol;

    let guess = 2 * a.nnz() + n;
    let mut w = Left {
        n,
        ap: a.colptr(),
        ai: a.rowidx(),
        ax: a.values(),
        lp: Vec::with_capacity(n + 1),
        li: Vec::with_capacity(guess),
        lx: Vec::with_capacity(guess),
        pinv: vec![UNSET; n],
        x: vec![T::zero(); n],
        xi: vec![0; n],
        stack: vec![0; n],
        pstack: vec![0; n],
        mark: vec![0; n],
    };
    let mut up: Vec<usize> = Vec::with_capacity(n + 1);
    let mut ui: Vec<usize> = Vec::with_capacity(guess);
    let mut ux: Vec<T> = Vec::with_capacity(guess);

    let mut k0 = n;
    for k in 0..n {
        w.lp.push(w.li.len());
        up.push(ui.len());
        let col = q[k];
        let stamp = k + 1;
        let top = w.reach_solve(col, stamp);

        // Pivot choice.
        let mut ipiv = UNSET;
        let mut amax = -1.0f64;
        for &i in &w.xi[top..n] {
            if w.pinv[i] == UNSET {
                let t = w.x[i].modulus();
                if t > amax {
                    amax = t;
                    ipiv = i;
                }
            } else {
                ui.push(w.pinv[i]);
                ux.push(w.x[i]);
            }
        }
        if ipiv == UNSET {
            return Err(SparseError::Singular {
                column: k,
                structural: true,
            });
        }
        if !(amax > 0.0) || !amax.is_finite() {
            return Err(SparseError::Singular {
                column: k,
                structural: false,
            });
        }
        if w.pinv[col] == UNSET && w.mark[col] == stamp {
            let d = w.x[col].modulus();
            if d > 0.0 && d >= pivot_tol * amax {
                ipiv = col;
            }
        }
        let pivot = w.x[ipiv];
        ui.push(k);
        ux.push(pivot);
        w.pinv[ipiv] = k;
        w.li.push(ipiv);
        w.lx.push(T::one());
        let before = w.li.len();
        for idx in top..n {
            let i = w.xi[idx];
            if w.pinv[i] == UNSET {
                w.li.push(i);
                let v = w.x[i] / pivot;
                w.lx.push(v);
            }
            w.x[i] = T::zero();
        }

        let remaining = n - k - 1;
        if let Some(frac) = opts.dense_switch {
            let below = w.li.len() - before;
            if remaining >= DENSE_MIN && below as f64 >= frac * remaining as f64 {
                k0 = k + 1;
                break;
            }
        }
    }

    if k0 < n {
        dense_tail(&mut w, &mut up, &mut ui, &mut ux, q, k0, pivot_tol)?;
    }
    let Left {
        mut lp,
        mut li,
        mut lx,
        pinv,
        ..
    } = w;
    lp.push(li.len());
    up.push(ui.len());

    for r in li.iter_mut() {
        *r = pinv[*r];
    }
    sort_columns(&lp, &mut li, &mut lx);
    sort_columns(&up, &mut ui, &mut ux);

    let mut row_perm = vec![0; n];
    for (row, &step) in pinv.iter().enumerate() {
        row_perm[step] = row;
    }
    Ok(LuFactors {
        l: SparseMatrix::from_csc(n, n, lp, li, lx)?,
        u: SparseMatrix::from_csc(n, n, up, ui, ux)?,
        row_perm,
        col_perm: q.to_vec(),
        n,
        dense_tail: n - k0,
    })
}

/// Finishes columns `k0..n`: gathers the Schur complement densely, factors
/// it, and appends the result to the sparse factors.
fn dense_tail<T: Scalar>(
    w: &mut Left<'_, T>,
    up: &mut Vec<usize>,
    ui: &mut Vec<usize>,
    ux: &mut Vec<T>,
    q: &[usize],
    k0: usize,
    pivot_tol: f64,
) -> Result<(), SparseError> {
    let n = w.n;
    let d = n - k0;
    // start of column k0, which also closes column k0 - 1 for the solves
    w.lp.push(w.li.len());
    up.push(ui.len());

    let mut rowid: Vec<usize> = (0..n).filter(|&i| w.pinv[i] == UNSET).collect();
    let mut pos = vec![UNSET; n];
    for (p, &i) in rowid.iter().enumerate() {
        pos[i] = p;
    }
    let mut dm = vec![T::zero(); d * d];
    let mut u12: Vec<Vec<(usize, T)>> = Vec::with_capacity(d);
    for t in 0..d {
        let k = k0 + t;
        let top = w.reach_solve(q[k], k + 1);
        let mut cu = Vec::new();
        for idx in top..n {
            let i = w.xi[idx];
            if w.pinv[i] == UNSET {
                dm[t * d + pos[i]] = w.x[i];
            } else {
                cu.push((w.pinv[i], w.x[i]));
            }
            w.x[i] = T::zero();
        }
        u12.push(cu);
    }

    dense_lu(&mut dm, d, &mut rowid, &mut pos, &q[k0..], pivot_tol).map_err(|j| {
        SparseError::Singular {
            column: k0 + j,
            structural: false,
        }
    })?;

    for (t, cu) in u12.into_iter().enumerate() {
        let k = k0 + t;
        if t > 0 {
            w.lp.push(w.li.len());
            up.push(ui.len());
        }
        let col = &dm[t * d..(t + 1) * d];
        for (r, v) in cu {
            ui.push(r);
            ux.push(v);
        }
        for (i, &v) in col.iter().enumerate().take(t) {
            if !v.is_zero() {
                ui.push(k0 + i);
                ux.push(v);
            }
        }
        ui.push(k);
        ux.push(col[t]);
        w.pinv[rowid[t]] = k;
        w.li.push(rowid[t]);
        w.lx.push(T::one());
        for (i, &v) in col.iter().enumerate().skip(t + 1) {
            if !v.is_zero() {
                w.li.push(rowid[i]);
                w.lx.push(v);
            }
        }
    }
    Ok(())
}

/// Blocked right-looking LU of the column-major `d×d` block `dm` in place.
///
/// `rowid[p]` is the original row at position `p` and `pos` its inverse;
/// both follow the row swaps. Column `j` prefers the row `diag[j]` as pivot
/// under the threshold rule. Returns the failing column on singularity.
fn dense_lu<T: Scalar>(
    dm: &mut [T],
    d: usize,
    rowid: &mut [usize],
    pos: &mut [usize],
    diag: &[usize],
    pivot_tol: f64,
) -> Result<(), usize> {
    let mut piv = DensePivot {
        rowid,
        pos,
        diag,
        pivot_tol,
    };
    dense_lu_cols(dm, d, 0, d, &mut piv)
}

struct DensePivot<'a> {
    rowid: &'a mut [usize],
    pos: &'a mut [usize],
    diag: &'a [usize],
    pivot_tol: f64,
}

/// Recursive LU of columns `j0..j1`, already updated by columns `< j0`.
/// Row swaps are applied across all `d` columns.
fn dense_lu_cols<T: Scalar>(
    dm: &mut [T],
    d: usize,
    j0: usize,
    j1: usize,
    piv: &mut DensePivot<'_>,
) -> Result<(), usize> {
    if j1 - j0 <= BLOCK {
        for j in j0..j1 {
            dense_pivot(dm, d, j, piv)?;
            let (left, right) = dm.split_at_mut((j + 1) * d);
            let colj = &mut left[j * d..];
            let pivot = colj[j];
            for v in &mut colj[j + 1..] {
                *v /= pivot;
            }
            for colc in right.chunks_exact_mut(d).take(j1 - j - 1) {
                let u = colc[j];
                if u.is_zero() {
                    continue;
                }
                for (x, &l) in colc[j + 1..].iter_mut().zip(&colj[j + 1..]) {
                    *x -= l * u;
                }
            }
        }
        return Ok(());
    }
    let mid = j0 + (j1 - j0) / 2;
    dense_lu_cols(dm, d, j0, mid, piv)?;
    unit_lower_solve(dm, d, j0, mid, mid, j1);
    // SAFETY: L21 is rows mid.., columns j0..mid; U12 rows j0..mid and A22
    // rows mid.. of columns mid..j1; the blocks are disjoint and in bounds.
    unsafe {
        let p = dm.as_mut_ptr();
        T::gemm_sub(
            d - mid,
            j1 - mid,
            mid - j0,
            p.add(j0 * d + mid),
            d,
            p.add(mid * d + j0),
            d,
            p.add(mid * d + mid),
            d,
        );
    }
    dense_lu_cols(dm, d, mid, j1, piv)
}

fn dense_pivot<T: Scalar>(dm: &mut [T], d: usize, j: usize, piv: &mut DensePivot<'_>) -> Result<(), usize> {
    let colj = &dm[j * d..(j + 1) * d];
    let mut ipiv = j;
    let mut amax = -1.0f64;
    for (i, v) in colj.iter().enumerate().skip(j) {
        let t = v.modulus();
        if t > amax {
            amax = t;
            ipiv = i;
        }
    }
    if !(amax > 0.0) || !amax.is_finite() {
        return Err(j);
    }
    let cand = piv.pos[piv.diag[j]];
    if cand != UNSET && cand >= j {
        let t = colj[cand].modulus();
        if t > 0.0 && t >= piv.pivot_tol * amax {
            ipiv = cand;
        }
    }
    if ipiv != j {
        for c in 0..d {
            dm.swap(c * d + j, c * d + ipiv);
        }
        piv.rowid.swap(j, ipiv);
        piv.pos[piv.rowid[j]] = j;
        piv.pos[piv.rowid[ipiv]] = ipiv;
    }
    Ok(())
}

/// Overwrites rows `r0..r1` of columns `c0..c1` with `L⁻¹` times
/// themselves, `L` the unit lower block on rows and columns `r0..r1`.
fn unit_lower_solve<T: Scalar>(dm: &mut [T], d: usize, r0: usize, r1: usize, c0: usize, c1: usize) {
    if r1 - r0 <= BLOCK {
        let (left, right) = dm.split_at_mut(c0 * d);
        for colc in right.chunks_exact_mut(d).take(c1 - c0) {
            for j in r0..r1 {
                let u = colc[j];
                if u.is_zero() {
                    continue;
                }
                let colj = &left[j * d..(j + 1) * d];
                for i in j + 1..r1 {
                    let v = colj[i] * u;
                    colc[i] -= v;
                }
            }
        }
        return;
    }
    let h = r0 + (r1 - r0) / 2;
    unit_lower_solve(dm, d, r0, h, c0, c1);
    // SAFETY: L lies in columns r0..h < c0, the right-hand sides in columns
    // c0..c1 at disjoint row ranges r0..h and h..r1.
    unsafe {
        let p = dm.as_mut_ptr();
        T::gemm_sub(
            r1 - h,
            c1 - c0,
            h - r0,
            p.add(r0 * d + h),
            d,
            p.add(c0 * d + r0),
            d,
            p.add(c0 * d + h),
            d,
        );
    }
    unit_lower_solve(dm, d, h, r1, c0, c1);
}

fn sort_columns<T: Copy>(ptr: &[usize], idx: &mut [usize], val: &mut [T]) {
    let mut scratch: Vec<(usize, T)> = Vec::new();
    for w in ptr.windows(2) {
        let (s, e) = (w[0], w[1]);
        if idx[s..e].windows(2).all(|p| p[0] < p[1]) {
            continue;
        }
        scratch.clear();
        scratch.extend(idx[s..e].iter().copied().zip(val[s..e].iter().copied()));
        scratch.sort_unstable_by_key(|&(r, _)| r);
        for (k, &(r, v)) in scratch.iter().enumerate() {
            idx[s + k] = r;
            val[s + k] = v;
        }
    }
}

impl<T: Scalar> LuFactors<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> &SparseMatrix<T> {
        &self.l
    }

    pub fn u(&self) -> &SparseMatrix<T> {
        &self.u
    }

    pub fn row_perm(&self) -> &[usize] {
        &self.row_perm
    }

    pub fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    /// Size of the trailing block factored densely, `0` if none.
    pub fn dense_tail(&self) -> usize {
        self.dense_tail
    }

    /// `nnz(L) + nnz(U)`, unit diagonal of `L` included.
    pub fn factor_nnz(&self) -> usize {
        self.l.nnz() + self.u.nnz()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, SparseError> {
        let mut x = b.to_vec();
        let mut work = vec![T::zero(); self.n];
        self.solve_in_place(&mut x, &mut work)?;
        Ok(x)
    }

    /// Overwrites `b` with the solution; `work` must have length `n`.
    pub fn solve_in_place(&self, b: &mut [T], work: &mut [T]) -> Result<(), SparseError> {
        for len in [b.len(), work.len()] {
            if len != self.n {
                return Err(SparseError::DimensionMismatch {
                    expected: self.n,
                    found: len,
                });
            }
        }
        let y = work;
        for (k, &r) in self.row_perm.iter().enumerate() {
            y[k] = b[r];
        }
        let (lp, li, lx) = (self.l.colptr(), self.l.rowidx(), self.l.values());
        for j in 0..self.n {
            let yj = y[j];
            for p in lp[j] + 1..lp[j + 1] {
                let v = lx[p] * yj;
                y[li[p]] -= v;
            }
        }
        let (up, ui, ux) = (self.u.colptr(), self.u.rowidx(), self.u.values());
        for j in (0..self.n).rev() {
            let last = up[j + 1] - 1;
            y[j] /= ux[last];
            let yj = y[j];
            for p in up[j]..last {
                let v = ux[p] * yj;
                y[ui[p]] -= v;
            }
        }
        for (k, &c) in self.col_perm.iter().enumerate() {
            b[c] = y[k];
        }
        Ok(())
    }

    /// Solves for each right-hand side in turn.
    pub fn solve_multi(&self, rhs: &[Vec<T>]) -> Result<Vec<Vec<T>>, SparseError> {
        let mut work = vec![T::zero(); self.n];
        rhs.iter()
            .map(|b| {
                let mut x = b.clone();
                self.solve_in_place(&mut x, &mut work)?;
                Ok(x)
            })
            .collect()
    }
}
