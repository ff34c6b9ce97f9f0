use nalgebra::DMatrix;

use super::matrix::{ComplexMatrix, C64, ONE};
use crate::error::{Error, Result};

pub const HAMILTONIAN_HERMITIAN_TOL: f64 = 1e-12;

/// Lindblad generator `ρ ↦ −i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
///
/// Rates are absorbed into the jump operators. Units are rad/ns.
/// The column-stacked superoperator is built once at construction.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hamiltonian: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
    superop: DMatrix<C64>,
}

impl Liouvillian {
    pub fn new(hamiltonian: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = hamiltonian.dim();
        for jump in &jumps {
            if jump.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: jump.dim(),
                    context: "jump operator vs hamiltonian",
                });
            }
        }
        let deviation = hamiltonian.hermitian_deviation();
        if deviation > HAMILTONIAN_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let superop = build_superop(&hamiltonian, &jumps);
        if superop.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NumericFailure("non-finite generator entry".into()));
        }
        Ok(Self {
            hamiltonian,
            jumps,
            superop,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    /// Column-stacked superoperator of size `dim² × dim²`.
    pub fn superoperator(&self) -> &DMatrix<C64> {
        &self.superop
    }

    /// Applies the generator directly in operator form.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let i = C64::new(0.0, 1.0);
        let mut out = self.hamiltonian.commutator(rho).scale(-i);
        for l in &self.jumps {
            let ld = l.dagger();
            let ldl = &ld * l;
            let sandwich = &(l * rho) * &ld;
            let anti = &(&ldl * rho) + &(rho * &ldl);
            out = &out + &(&sandwich - &anti.scale_real(0.5));
        }
        out
    }

    /// Infinity norm of the superoperator; sets the default step scale.
    pub fn norm_inf(&self) -> f64 {
        superop_norm_inf(&self.superop)
    }
}

/// `build_liouvillian(h, jumps)`.
pub fn build_liouvillian(h: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Result<Liouvillian> {
    Liouvillian::new(h, jumps)
}

pub(crate) fn superop_norm_inf(s: &DMatrix<C64>) -> f64 {
    s.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `vec(A X B) = (Bᵀ ⊗ A) vec(X)` for column stacking.
fn sandwich_super(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    b.transpose().kronecker(a)
}

/// Superoperator of `X ↦ −i[H, X]`.
pub(crate) fn commutator_super(h: &ComplexMatrix) -> DMatrix<C64> {
    let dim = h.dim();
    let id = DMatrix::<C64>::identity(dim, dim);
    let minus_i = C64::new(0.0, -1.0);
    (sandwich_super(h.inner(), &id) - sandwich_super(&id, h.inner())) * minus_i
}

fn build_superop(h: &ComplexMatrix, jumps: &[ComplexMatrix]) -> DMatrix<C64> {
    let dim = h.dim();
    let id = DMatrix::<C64>::identity(dim, dim);
    let mut s = commutator_super(h);
    let half = ONE * 0.5;
    for l in jumps {
        let l = l.inner();
        let ld = l.adjoint();
        let ldl = &ld * l;
        s += sandwich_super(l, &ld);
        s -= sandwich_super(&ldl, &id) * half;
        s -= sandwich_super(&id, &ldl) * half;
    }
    s
}
