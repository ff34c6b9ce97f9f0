//! Three-level Λ system: two ground states (`g_C`, `g_D`) sharing one
//! excited state, pumped on C and probed on D.
//!
//! Basis ordering is `|g_C⟩ = 0`, `|g_D⟩ = 1`, `|e⟩ = 2`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::qdyn::{self, build_liouvillian, ComplexMatrix, Liouvillian, C64};
use crate::trace::Curve;
use crate::units::ghz_to_angular;

pub const G_C: usize = 0;
pub const G_D: usize = 1;
pub const EXCITED: usize = 2;

const DEFAULT_T1: f64 = 1.85;
const DEFAULT_T2: f64 = 1.62;

/// Decay, relaxation and dephasing rates (ns⁻¹ / rad/ns) of the Λ model.
///
/// The excited and ground fine-structure splittings are informational;
/// they justify treating C and D as independently addressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaParams {
    pub gamma_c: f64,
    pub gamma_d: f64,
    pub gamma_ground: f64,
    pub gamma_phi_e: f64,
    pub gamma_phi_g: f64,
    pub delta_e_ghz: f64,
    pub delta_g_ghz: f64,
}

impl Default for LambdaParams {
    /// Equal branching of `1/T1` (T1 = 1.85 ns), ground relaxation 1/40 ns⁻¹,
    /// excited dephasing matching T2 = 1.62 ns, no ground-coherence dephasing.
    fn default() -> Self {
        Self {
            gamma_c: 0.5 / DEFAULT_T1,
            gamma_d: 0.5 / DEFAULT_T1,
            gamma_ground: 1.0 / 40.0,
            gamma_phi_e: 1.0 / DEFAULT_T2 - 0.5 / DEFAULT_T1,
            gamma_phi_g: 0.0,
            delta_e_ghz: 410.0,
            delta_g_ghz: 228.0,
        }
    }
}

impl LambdaParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("gamma_c", self.gamma_c),
            ("gamma_d", self.gamma_d),
            ("gamma_ground", self.gamma_ground),
            ("gamma_phi_e", self.gamma_phi_e),
            ("gamma_phi_g", self.gamma_phi_g),
        ];
        for (name, v) in named {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("rate must be ≥ 0, got {v}")));
            }
        }
        if self.gamma_c + self.gamma_d <= 0.0 {
            return Err(invalid("gamma_c", "total radiative decay must be positive"));
        }
        Ok(())
    }

    pub fn total_decay(&self) -> f64 {
        self.gamma_c + self.gamma_d
    }

    /// Same model with the roles of the two ground states exchanged.
    ///
    /// Exact relabeling requires `gamma_ground = 0`, since that relaxation
    /// has a fixed direction.
    pub fn swapped(&self) -> Self {
        Self {
            gamma_c: self.gamma_d,
            gamma_d: self.gamma_c,
            ..*self
        }
    }
}

/// Pump (C) and probe (D) Rabi frequencies and detunings, GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaDrive {
    pub omega_c_ghz: f64,
    pub delta_c_ghz: f64,
    pub omega_d_ghz: f64,
    pub delta_d_ghz: f64,
}

impl LambdaDrive {
    pub fn new(omega_c_ghz: f64, delta_c_ghz: f64, omega_d_ghz: f64, delta_d_ghz: f64) -> Result<Self> {
        if !(omega_c_ghz >= 0.0) {
            return Err(invalid("omega_c_ghz", "must be ≥ 0"));
        }
        if !(omega_d_ghz >= 0.0) {
            return Err(invalid("omega_d_ghz", "must be ≥ 0"));
        }
        if !(delta_c_ghz.is_finite() && delta_d_ghz.is_finite()) {
            return Err(invalid("delta_c_ghz", "detunings must be finite"));
        }
        Ok(Self {
            omega_c_ghz,
            delta_c_ghz,
            omega_d_ghz,
            delta_d_ghz,
        })
    }
}

/// Doubly rotating frame, rotating-wave Hamiltonian (rad/ns):
/// `−Δ_C|e⟩⟨e| + (Δ_D − Δ_C)|g_D⟩⟨g_D| + (Ω_C/2)(|e⟩⟨g_C| + h.c.) + (Ω_D/2)(|e⟩⟨g_D| + h.c.)`.
pub fn hamiltonian(drive: &LambdaDrive) -> ComplexMatrix {
    let dc = ghz_to_angular(drive.delta_c_ghz);
    let dd = ghz_to_angular(drive.delta_d_ghz);
    let oc = ghz_to_angular(drive.omega_c_ghz);
    let od = ghz_to_angular(drive.omega_d_ghz);
    let mut h = ComplexMatrix::zeros(3);
    h.set(EXCITED, EXCITED, C64::new(-dc, 0.0));
    h.set(G_D, G_D, C64::new(dd - dc, 0.0));
    for (g, o) in [(G_C, oc), (G_D, od)] {
        h.set(EXCITED, g, C64::new(0.5 * o, 0.0));
        h.set(g, EXCITED, C64::new(0.5 * o, 0.0));
    }
    h
}

/// Jump operators: radiative decay to each ground state, ground relaxation
/// `g_D → g_C`, excited-state dephasing `√(2γ_φe)|e⟩⟨e|`, and ground-coherence
/// dephasing `√(γ_φg/2)(|g_D⟩⟨g_D| − |g_C⟩⟨g_C|)`, which damps `ρ_{gC,gD}` at
/// `γ_φg` and treats both ground states alike.
pub fn jumps(params: &LambdaParams) -> Vec<ComplexMatrix> {
    let mut out = Vec::new();
    let mut push = |rate: f64, op: ComplexMatrix| {
        if rate > 0.0 {
            out.push(op.scale_real(rate.sqrt()));
        }
    };
    push(params.gamma_c, ComplexMatrix::ket_bra(3, G_C, EXCITED));
    push(params.gamma_d, ComplexMatrix::ket_bra(3, G_D, EXCITED));
    push(params.gamma_ground, ComplexMatrix::ket_bra(3, G_C, G_D));
    push(2.0 * params.gamma_phi_e, ComplexMatrix::projector(3, EXCITED));
    push(0.5 * params.gamma_phi_g, ComplexMatrix::diagonal(&[-1.0, 1.0, 0.0]));
    out
}

pub fn lambda_liouvillian(params: &LambdaParams, drive: &LambdaDrive) -> Result<Liouvillian> {
    params.validate()?;
    build_liouvillian(hamiltonian(drive), jumps(params))
}

/// Steady-state populations `[ρ_gCgC, ρ_gDgD, ρ_ee]`.
pub fn steady_populations(params: &LambdaParams, drive: &LambdaDrive) -> Result<[f64; 3]> {
    let rho = qdyn::steady_state(&lambda_liouvillian(params, drive)?)?;
    Ok([rho.population(G_C), rho.population(G_D), rho.population(EXCITED)])
}

/// Photon emission rate `(γ_C + γ_D)·ρ_ee`.
pub fn fluorescence(params: &LambdaParams, drive: &LambdaDrive) -> Result<f64> {
    Ok(params.total_decay() * steady_populations(params, drive)?[EXCITED])
}

fn check_ascending(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(name, "range must be non-empty and finite"));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(name, "range must be strictly ascending"));
    }
    Ok(())
}

/// Fluorescence versus probe detuning, normalized to its maximum over the scan.
pub fn probe_scan(
    params: &LambdaParams,
    omega_c_ghz: f64,
    delta_c_ghz: f64,
    omega_d_ghz: f64,
    delta_d_range: &[f64],
) -> Result<Curve> {
    check_ascending("delta_d_range", delta_d_range)?;
    let raw: Vec<f64> = delta_d_range
        .par_iter()
        .map(|&dd| {
            fluorescence(
                params,
                &LambdaDrive::new(omega_c_ghz, delta_c_ghz, omega_d_ghz, dd)?,
            )
        })
        .collect::<Result<_>>()?;
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(invalid("omega_c_ghz", "no fluorescence: both lasers are off"));
    }
    Ok(Curve::new(delta_d_range.to_vec(), raw.iter().map(|r| r / peak).collect())?
        .with_meta("quantity", "normalized_fluorescence")
        .with_meta("omega_c_ghz", omega_c_ghz)
        .with_meta("delta_c_ghz", delta_c_ghz)
        .with_meta("omega_d_ghz", omega_d_ghz)
        .with_meta("peak_rate_per_ns", peak))
}

/// Fluorescence on a (Δ_C, Δ_D) grid; `values[row][col]` with rows over Δ_C.
#[derive(Debug, Clone, PartialEq)]
pub struct FluorescenceMap {
    pub delta_c_ghz: Vec<f64>,
    pub delta_d_ghz: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl FluorescenceMap {
    /// For each row, the column of the local fluorescence minimum closest to
    /// the diagonal `Δ_D = Δ_C`, if any.
    pub fn valley_near_diagonal(&self) -> Vec<Option<usize>> {
        self.delta_c_ghz
            .iter()
            .zip(&self.values)
            .map(|(&dc, row)| {
                local_minima(row)
                    .into_iter()
                    .min_by(|&a, &b| {
                        (self.delta_d_ghz[a] - dc)
                            .abs()
                            .total_cmp(&(self.delta_d_ghz[b] - dc).abs())
                    })
            })
            .collect()
    }
}

fn local_minima(row: &[f64]) -> Vec<usize> {
    let n = row.len();
    (0..n)
        .filter(|&k| {
            let left = k == 0 || row[k] <= row[k - 1];
            let right = k + 1 == n || row[k] <= row[k + 1];
            left && right
        })
        .collect()
}

pub fn at_map2d(
    params: &LambdaParams,
    omega_c_ghz: f64,
    omega_d_ghz: f64,
    delta_c_range: &[f64],
    delta_d_range: &[f64],
) -> Result<FluorescenceMap> {
    check_ascending("delta_c_range", delta_c_range)?;
    check_ascending("delta_d_range", delta_d_range)?;
    let values = delta_c_range
        .par_iter()
        .map(|&dc| {
            delta_d_range
                .iter()
                .map(|&dd| {
                    fluorescence(params, &LambdaDrive::new(omega_c_ghz, dc, omega_d_ghz, dd)?)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FluorescenceMap {
        delta_c_ghz: delta_c_range.to_vec(),
        delta_d_ghz: delta_d_range.to_vec(),
        values,
    })
}

/// Vertex abscissa of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if curvature == 0.0 {
        return x[1];
    }
    let v = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curvature);
    v.clamp(x[0], x[2])
}

/// Peak-to-peak separation (GHz) of the two fluorescence maxima that flank
/// the Autler–Townes dip, each refined by parabolic interpolation.
pub fn dip_splitting(curve: &Curve) -> Result<f64> {
    let y = &curve.y;
    let x = &curve.x;
    let n = y.len();
    let mut maxima: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1])
        .collect();
    if maxima.len() < 2 {
        return Err(Error::NotAutlerTownes {
            maxima: maxima.len(),
        });
    }
    maxima.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    let (mut a, mut b) = (maxima[0], maxima[1]);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let valley = y[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
    if !(valley < y[a].min(y[b])) {
        return Err(Error::NotAutlerTownes {
            maxima: maxima.len(),
        });
    }
    let refine = |k: usize| parabola_vertex([x[k - 1], x[k], x[k + 1]], [y[k - 1], y[k], y[k + 1]]);
    Ok(refine(b) - refine(a))
}
