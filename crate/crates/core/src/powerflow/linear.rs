//! Affine voltage models `v ≈ v0 + D(s)` around a linearization voltage.

use super::{check_len, factorize_timed, PowerFlowError};
use crate::sparse::{LuFactors, SparseMatrix};
use crate::ybus::YbusSystem;
use num_complex::Complex64;

pub const DEFAULT_DENSE_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearizationKind {
    /// `v = y_LL \ (h ∘ conj(s)) + v0` with `h = −1/conj(v*)`.
    FixedPoint,
    /// Real `2n_L` block system from the complex differential at `v*`.
    ImplicitJacobian,
    /// The fixed-point model with `y_LL⁻¹ diag(h)` materialized densely.
    DenseExplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearizationOptions {
    /// Largest `n_L` for which a dense model is built.
    pub dense_cap: usize,
}

impl Default for LinearizationOptions {
    fn default() -> Self {
        Self {
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

/// Sensitivity system of the power balance
/// `diag(conj v)(y_LL v + y_LS v_S) + conj(s) = 0` at `v*`.
///
/// Unknowns are stacked `[dx; dy]` with `dv = dx + i·dy`; the right-hand
/// side is `rhs_map · [dP; dQ]`.
#[derive(Debug, Clone)]
pub struct JacobianSystem {
    s_blocks: SparseMatrix<f64>,
    rhs_map: SparseMatrix<f64>,
    v_star: Vec<Complex64>,
    s_star: Vec<Complex64>,
}

impl JacobianSystem {
    pub fn build(sys: &YbusSystem, v_star: &[Complex64]) -> Result<Self, PowerFlowError> {
        let n = sys.n_load();
        check_len(n, v_star.len())?;
        if let Some(j) = v_star.iter().position(|v| v.norm_sqr() == 0.0) {
            return Err(PowerFlowError::ZeroLinearizationVoltage(j));
        }
        let y = sys.y_ll();
        let src = sys.source_injection();
        let yv = y.mul_vec(v_star)?;
        let b: Vec<Complex64> = yv.iter().zip(&src).map(|(a, c)| a + c).collect();

        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(4 * (y.nnz() + n));
        for (i, j, yij) in y.iter() {
            let a = v_star[i].conj() * yij;
            t.push((i, j, a.re));
            t.push((i, n + j, -a.im));
            t.push((n + i, j, a.im));
            t.push((n + i, n + j, a.re));
        }
        for (i, bi) in b.iter().enumerate() {
            t.push((i, i, bi.re));
            t.push((i, n + i, bi.im));
            t.push((n + i, i, bi.im));
            t.push((n + i, n + i, -bi.re));
        }
        let s_blocks = SparseMatrix::from_triplets(2 * n, 2 * n, t)?;
        let rhs_map = SparseMatrix::from_triplets(
            2 * n,
            2 * n,
            (0..n).flat_map(|i| [(i, i, -1.0), (n + i, n + i, 1.0)]),
        )?;
        let s_star = v_star.iter().zip(&b).map(|(v, bi)| -v * bi.conj()).collect();
        Ok(Self {
            s_blocks,
            rhs_map,
            v_star: v_star.to_vec(),
            s_star,
        })
    }

    /// `[[S11, S12], [S21, S22]]`.
    pub fn s_blocks(&self) -> &SparseMatrix<f64> {
        &self.s_blocks
    }

    pub fn rhs_map(&self) -> &SparseMatrix<f64> {
        &self.rhs_map
    }

    pub fn v_star(&self) -> &[Complex64] {
        &self.v_star
    }

    /// Load consumption that `v*` satisfies exactly.
    pub fn s_star(&self) -> &[Complex64] {
        &self.s_star
    }

    /// `rhs_map · [Re s; Im s]`.
    pub fn rhs(&self, s: &[Complex64]) -> Result<Vec<f64>, PowerFlowError> {
        check_len(self.v_star.len(), s.len())?;
        let stacked: Vec<f64> = s.iter().map(|z| z.re).chain(s.iter().map(|z| z.im)).collect();
        Ok(self.rhs_map.mul_vec(&stacked)?)
    }
}

#[derive(Debug, Clone)]
enum Model {
    FixedPoint {
        factors: LuFactors<Complex64>,
        h: Vec<Complex64>,
    },
    Jacobian {
        system: JacobianSystem,
        factors: LuFactors<f64>,
    },
    /// Columns of `y_LL⁻¹ diag(h)`.
    Dense { columns: Vec<Vec<Complex64>> },
}

#[derive(Debug, Clone)]
pub struct Linearization {
    kind: LinearizationKind,
    v0: Vec<Complex64>,
    model: Model,
}

impl Linearization {
    pub fn kind(&self) -> LinearizationKind {
        self.kind
    }

    /// Model output at zero load.
    pub fn v0(&self) -> &[Complex64] {
        &self.v0
    }

    pub fn jacobian(&self) -> Option<&JacobianSystem> {
        match &self.model {
            Model::Jacobian { system, .. } => Some(system),
            _ => None,
        }
    }

    pub fn evaluate(&self, s: &[Complex64]) -> Result<Vec<Complex64>, PowerFlowError> {
        check_len(self.v0.len(), s.len())?;
        let dv = match &self.model {
            Model::FixedPoint { factors, h } => fixed_point_delta(factors, h, s)?,
            Model::Jacobian { system, factors } => jacobian_delta(system, factors, s)?,
            Model::Dense { columns } => {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.v0.len()];
                for (col, sj) in columns.iter().zip(s) {
                    let w = sj.conj();
                    if w.norm_sqr() == 0.0 {
                        continue;
                    }
                    for (a, m) in acc.iter_mut().zip(col) {
                        *a += m * w;
                    }
                }
                acc
            }
        };
        Ok(self.v0.iter().zip(dv).map(|(a, d)| a + d).collect())
    }
}

fn fixed_point_delta(
    factors: &LuFactors<Complex64>,
    h: &[Complex64],
    s: &[Complex64],
) -> Result<Vec<Complex64>, PowerFlowError> {
    let rhs: Vec<Complex64> = h.iter().zip(s).map(|(h, s)| h * s.conj()).collect();
    Ok(factors.solve(&rhs)?)
}

fn jacobian_delta(
    system: &JacobianSystem,
    factors: &LuFactors<f64>,
    s: &[Complex64],
) -> Result<Vec<Complex64>, PowerFlowError> {
    let n = s.len();
    let xy = factors.solve(&system.rhs(s)?)?;
    Ok((0..n).map(|i| Complex64::new(xy[i], xy[n + i])).collect())
}

/// Builds a linear model around `v_star`, or around the no-load voltage
/// when `v_star` is `None`.
pub fn build_linearization(
    sys: &YbusSystem,
    kind: LinearizationKind,
    v_star: Option<&[Complex64]>,
    opts: &LinearizationOptions,
) -> Result<Linearization, PowerFlowError> {
    let n = sys.n_load();
    if kind == LinearizationKind::DenseExplicit && n > opts.dense_cap {
        return Err(PowerFlowError::DenseCap {
            n,
            cap: opts.dense_cap,
        });
    }
    let (y_factors, _) = factorize_timed(sys.y_ll())?;
    let v_nl = {
        let rhs: Vec<Complex64> = sys.source_injection().iter().map(|c| -c).collect();
        y_factors.solve(&rhs)?
    };
    let v_star = match v_star {
        Some(v) => {
            check_len(n, v.len())?;
            v.to_vec()
        }
        None => v_nl.clone(),
    };

    let (v0, model) = match kind {
        LinearizationKind::FixedPoint | LinearizationKind::DenseExplicit => {
            let h = fixed_point_h(&v_star)?;
            if kind == LinearizationKind::FixedPoint {
                (v_nl, Model::FixedPoint { factors: y_factors, h })
            } else {
                let mut work = vec![Complex64::new(0.0, 0.0); n];
                let columns = (0..n)
                    .map(|j| {
                        let mut e = vec![Complex64::new(0.0, 0.0); n];
                        e[j] = h[j];
                        y_factors.solve_in_place(&mut e, &mut work)?;
                        Ok(e)
                    })
                    .collect::<Result<Vec<_>, PowerFlowError>>()?;
                (v_nl, Model::Dense { columns })
            }
        }
        LinearizationKind::ImplicitJacobian => {
            let system = JacobianSystem::build(sys, &v_star)?;
            let (factors, _) = factorize_timed(system.s_blocks())?;
            let d = jacobian_delta(&system, &factors, system.s_star())?;
            let v0 = system.v_star().iter().zip(d).map(|(v, d)| v - d).collect();
            (v0, Model::Jacobian { system, factors })
        }
    };
    Ok(Linearization { kind, v0, model })
}

fn fixed_point_h(v_star: &[Complex64]) -> Result<Vec<Complex64>, PowerFlowError> {
    v_star
        .iter()
        .enumerate()
        .map(|(j, v)| {
            if v.norm_sqr() == 0.0 {
                Err(PowerFlowError::ZeroLinearizationVoltage(j))
            } else {
                Ok(-1.0 / v.conj())
            }
        })
        .collect()
}

pub fn evaluate_linearization(
    lin: &Linearization,
    s: &[Complex64],
) -> Result<Vec<Complex64>, PowerFlowError> {
    lin.evaluate(s)
}
