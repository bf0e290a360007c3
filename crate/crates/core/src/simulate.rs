//! Truncated Hilbert-valued increments, the comonotone quantile coupling
//! with Gaussian increments, partial-sum discrepancies and empirical checks
//! of the maximal and moment inequalities.

use crate::error::{Error, Result};
use crate::laws::IncrementKind;
use crate::normal;
use crate::spectra::Spectrum;
use crate::stream::{replicate, substream};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distr::Open01;
use rand::Rng;
use serde::Serialize;
use std::io::Write;

/// Largest number of outcomes enumerated exactly.
pub const MAX_ENUMERATION: u64 = 1 << 22;
/// Largest `n · D` for which full coupled paths are stored.
pub const MAX_PATH_CELLS: usize = 1 << 23;

#[derive(Debug, Clone)]
pub struct IncrementModel {
    kind: IncrementKind,
    spectrum: Spectrum,
    dim: usize,
    sigma_sq: Vec<f64>,
}

impl IncrementModel {
    pub fn new(kind: IncrementKind, spectrum: Spectrum, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("truncation dimension must be at least 1"));
        }
        let sigma_sq = spectrum.sigma_sq_vec(dim);
        // σ_1² is the largest variance, so checking it covers every coordinate
        kind.validate(sigma_sq[0])?;
        Ok(IncrementModel { kind, spectrum, dim, sigma_sq })
    }

    pub fn kind(&self) -> &IncrementKind {
        &self.kind
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma_sq(&self) -> &[f64] {
        &self.sigma_sq
    }

    /// `Σ_{m≤D} σ_m²`.
    pub fn variance(&self) -> f64 {
        self.spectrum.head_variance(self.dim)
    }

    /// Variance mass `B_D²` dropped by the truncation.
    pub fn discarded_variance(&self) -> f64 {
        self.spectrum.tail_variance(self.dim)
    }

    /// `E‖Z‖^γ` of the truncated vector when it has a closed form or the
    /// law is small enough to enumerate.
    pub fn norm_moment_exact(&self, gamma: f64) -> Option<f64> {
        let total = self.variance();
        if self.kind == IncrementKind::TwoPointSymmetric {
            return Some(total.powf(0.5 * gamma));
        }
        if gamma == 2.0 {
            return Some(total);
        }
        if gamma == 4.0 {
            return Some(self.kind.norm_fourth_moment(&self.sigma_sq));
        }
        let atoms: Vec<_> = self.sigma_sq.iter().map(|&s| self.kind.atoms(s)).collect::<Option<_>>()?;
        let count = (atoms[0].len() as u64).checked_pow(self.dim as u32)?;
        if count > MAX_ENUMERATION {
            return None;
        }
        let mut acc = 0.0;
        enumerate_rows(&atoms, |p, row| {
            acc += p * row.iter().map(|x| x * x).sum::<f64>().powf(0.5 * gamma);
        });
        Some(acc)
    }
}

fn enumerate_rows<F: FnMut(f64, &[f64])>(atoms: &[Vec<(f64, f64)>], mut f: F) {
    let dim = atoms.len();
    let mut idx = vec![0usize; dim];
    let mut row = vec![0.0; dim];
    loop {
        let mut p = 1.0;
        for m in 0..dim {
            let (v, q) = atoms[m][idx[m]];
            row[m] = v;
            p *= q;
        }
        f(p, &row);
        let mut m = 0;
        loop {
            if m == dim {
                return;
            }
            idx[m] += 1;
            if idx[m] < atoms[m].len() {
                break;
            }
            idx[m] = 0;
            m += 1;
        }
    }
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// `n` i.i.d. rows of the model; coordinates independent within a row.
pub fn sample_increments<R: Rng + ?Sized>(model: &IncrementModel, n: usize, rng: &mut R) -> Array2<f64> {
    let mut x = Array2::zeros((n, model.dim));
    for mut row in x.rows_mut() {
        for (v, &s) in row.iter_mut().zip(&model.sigma_sq) {
            *v = model.kind.quantile(open01(rng), s);
        }
    }
    x
}

/// Paths of one quantile coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPaths {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    /// `sx[s−1, m] = Σ_{j≤s} x[j−1, m]`.
    pub sx: Array2<f64>,
    pub sy: Array2<f64>,
    /// Lattice partial sums in units of `λ` (lattice models only).
    pub lattice_sums: Option<Array2<i64>>,
    pub delta: f64,
    pub delta_inf: f64,
    /// `B_D²` omitted by the truncation.
    pub discarded_variance: f64,
}

impl CouplingPaths {
    /// Final Gaussian partial sum `T_n`.
    pub fn gaussian_endpoint(&self) -> ndarray::ArrayView1<'_, f64> {
        self.sy.row(self.sy.nrows() - 1)
    }
}

/// Per entry, one uniform `U` drives both `X = F⁻¹(U)` and `Y = σ Φ⁻¹(U)`.
pub fn couple_quantile<R: Rng + ?Sized>(model: &IncrementModel, n: usize, rng: &mut R) -> Result<CouplingPaths> {
    if n == 0 {
        return Err(Error::invalid("coupling needs n ≥ 1"));
    }
    if n.saturating_mul(model.dim) > MAX_PATH_CELLS {
        return Err(Error::invalid(format!(
            "n·D = {}·{} exceeds the path storage limit {MAX_PATH_CELLS}; lower --dim",
            n, model.dim
        )));
    }
    let dim = model.dim;
    let mut x = Array2::zeros((n, dim));
    let mut y = Array2::zeros((n, dim));
    let mut units = match model.kind {
        IncrementKind::ThreePointLattice { .. } => Some(Array2::<i64>::zeros((n, dim))),
        _ => None,
    };
    let sd: Vec<f64> = model.sigma_sq.iter().map(|s| s.sqrt()).collect();
    for j in 0..n {
        for m in 0..dim {
            let u = open01(rng);
            let s2 = model.sigma_sq[m];
            y[[j, m]] = sd[m] * normal::quantile(u);
            match (&mut units, model.kind) {
                (Some(k), IncrementKind::ThreePointLattice { lambda }) => {
                    let step = model.kind.lattice_units(u, s2);
                    k[[j, m]] = step;
                    x[[j, m]] = lambda * step as f64;
                }
                _ => x[[j, m]] = model.kind.quantile(u, s2),
            }
        }
    }
    let sy = partial_sums(y.view());
    let (sx, lattice_sums) = match (units, model.kind) {
        (Some(k), IncrementKind::ThreePointLattice { lambda }) => {
            let mut ks = k;
            ks.accumulate_axis_inplace(Axis(0), |prev, cur| *cur += *prev);
            (ks.mapv(|v| lambda * v as f64), Some(ks))
        }
        _ => (partial_sums(x.view()), None),
    };
    let (delta, delta_inf) = discrepancy(sx.view(), sy.view());
    Ok(CouplingPaths {
        x,
        y,
        sx,
        sy,
        lattice_sums,
        delta,
        delta_inf,
        discarded_variance: model.discarded_variance(),
    })
}

/// Running sums down the rows: `out[s] = fl(out[s−1] + a[s])`.
pub fn partial_sums(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut s = a.to_owned();
    s.accumulate_axis_inplace(Axis(0), |prev, cur| *cur += *prev);
    s
}

/// `(max_s ‖sx_s − sy_s‖₂, max_s ‖sx_s − sy_s‖_∞)` with coordinates summed
/// in increasing order.
fn discrepancy(sx: ArrayView2<'_, f64>, sy: ArrayView2<'_, f64>) -> (f64, f64) {
    let mut d2 = 0.0f64;
    let mut dinf = 0.0f64;
    for (rx, ry) in sx.rows().into_iter().zip(sy.rows()) {
        let mut ss = 0.0;
        for (a, b) in rx.iter().zip(ry.iter()) {
            let diff = (a - b).abs();
            ss += diff * diff;
            dinf = dinf.max(diff);
        }
        d2 = d2.max(ss);
    }
    (d2.sqrt(), dinf)
}

/// `Δ_n` and `Δ_n^∞` of two increment arrays.
pub fn delta_n(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<(f64, f64)> {
    if x.shape() != y.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: X is {:?}, Y is {:?}",
            x.shape(),
            y.shape()
        )));
    }
    if x.nrows() == 0 {
        return Ok((0.0, 0.0));
    }
    Ok(discrepancy(partial_sums(x).view(), partial_sums(y).view()))
}

/// Writes `j, m, X, Y` rows (1-based indices) after a comment line naming
/// the model and seed.
pub fn write_paths_csv<W: Write>(
    paths: &CouplingPaths,
    model: &IncrementModel,
    seed: u64,
    out: W,
) -> Result<()> {
    let mut out = out;
    writeln!(out, "# model={} spectrum={} D={} seed={seed}", model.kind, model.spectrum, model.dim)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "m", "X", "Y"])?;
    for ((j, m), xv) in paths.x.indexed_iter() {
        w.write_record([
            (j + 1).to_string(),
            (m + 1).to_string(),
            xv.to_string(),
            paths.y[[j, m]].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn max_and_final_norm(x: ArrayView2<'_, f64>) -> (f64, f64) {
    let mut s = Array1::<f64>::zeros(x.ncols());
    let mut max2 = 0.0f64;
    for row in x.rows() {
        s += &row;
        max2 = max2.max(s.dot(&s));
    }
    (max2.sqrt(), s.dot(&s).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximalMargin {
    pub x: f64,
    /// `P{max_s ‖S_s‖ > x}`.
    pub p_max: f64,
    /// `P{‖S_n‖ > x/30}`.
    pub p_final: f64,
    /// `p_max − 9 p_final`; the maximal inequality says this is ≤ 0.
    pub margin: f64,
    /// Standard error of `margin` (0 for exact enumeration).
    pub stderr: f64,
}

/// Monte Carlo estimate of the maximal-inequality margin at each `x`.
pub fn empirical_check_montgomery_smith(
    model: &IncrementModel,
    n: usize,
    x_grid: &[f64],
    reps: u64,
    master_seed: u64,
) -> Result<Vec<MaximalMargin>> {
    if n == 0 || reps < 2 {
        return Err(Error::invalid("maximal-inequality check needs n ≥ 1 and reps ≥ 2"));
    }
    let norms = replicate(master_seed, 0, reps, |_, rng| {
        let x = sample_increments(model, n, rng);
        max_and_final_norm(x.view())
    });
    let r = reps as f64;
    Ok(x_grid
        .iter()
        .map(|&x| {
            let (mut s1, mut s2, mut sm, mut smm) = (0.0, 0.0, 0.0, 0.0);
            for &(mx, fin) in &norms {
                let a = f64::from(u8::from(mx > x));
                let b = f64::from(u8::from(fin > x / 30.0));
                let d = a - 9.0 * b;
                s1 += a;
                s2 += b;
                sm += d;
                smm += d * d;
            }
            let mean = sm / r;
            let var = ((smm - r * mean * mean) / (r - 1.0)).max(0.0);
            MaximalMargin { x, p_max: s1 / r, p_final: s2 / r, margin: mean, stderr: (var / r).sqrt() }
        })
        .collect())
}

/// Enumerates every outcome of `n` rows of a discrete model.
fn enumerate_paths<F: FnMut(f64, ArrayView2<'_, f64>)>(model: &IncrementModel, n: usize, mut f: F) -> Result<()> {
    let atoms: Vec<Vec<(f64, f64)>> = model
        .sigma_sq
        .iter()
        .map(|&s| model.kind.atoms(s))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::invalid(format!("exact enumeration needs a discrete law, got {}", model.kind)))?;
    let cells = n * model.dim;
    let per = atoms[0].len() as u64;
    match u32::try_from(cells).ok().and_then(|c| per.checked_pow(c)) {
        Some(c) if c <= MAX_ENUMERATION => {}
        _ => {
            return Err(Error::invalid(format!(
                "{per}^{cells} outcomes exceed the enumeration limit {MAX_ENUMERATION}"
            )))
        }
    }
    let flat: Vec<Vec<(f64, f64)>> = (0..n).flat_map(|_| atoms.iter().cloned()).collect();
    let mut buf = Array2::zeros((n, model.dim));
    enumerate_rows(&flat, |p, cellv| {
        for (slot, v) in buf.iter_mut().zip(cellv) {
            *slot = *v;
        }
        f(p, buf.view());
    });
    Ok(())
}

/// Exact maximal-inequality margins by enumerating all outcomes.
pub fn montgomery_smith_exact(model: &IncrementModel, n: usize, x_grid: &[f64]) -> Result<Vec<MaximalMargin>> {
    let mut outcomes = Vec::new();
    enumerate_paths(model, n, |p, x| {
        let (mx, fin) = max_and_final_norm(x);
        outcomes.push((p, mx, fin));
    })?;
    Ok(x_grid
        .iter()
        .map(|&x| {
            let p_max: f64 = outcomes.iter().filter(|o| o.1 > x).map(|o| o.0).sum();
            let p_final: f64 = outcomes.iter().filter(|o| o.2 > x / 30.0).map(|o| o.0).sum();
            MaximalMargin { x, p_max, p_final, margin: p_max - 9.0 * p_final, stderr: 0.0 }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    /// Estimate (or exact value) of `E‖S_n‖^γ`.
    pub sum_moment: f64,
    pub sum_moment_stderr: f64,
    /// `E‖Z‖^γ` used in the right-hand side.
    pub norm_moment: f64,
    pub norm_moment_exact: bool,
    /// `n E‖Z‖^γ + (n B²)^{γ/2}` with `B²` the variance of the truncated model.
    pub rhs: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub exact: bool,
}

fn moment_rhs(model: &IncrementModel, n: usize, gamma: f64, norm_moment: f64) -> f64 {
    let nf = n as f64;
    nf * norm_moment + (nf * model.variance()).powf(0.5 * gamma)
}

/// Ratio of `Ê‖S_n‖^γ` to the moment-inequality right-hand side.
pub fn empirical_check_rosenthal(
    model: &IncrementModel,
    n: usize,
    gamma: f64,
    reps: u64,
    master_seed: u64,
) -> Result<MomentCheck> {
    if !(gamma >= 2.0) {
        return Err(Error::invalid(format!("moment check needs gamma ≥ 2, got {gamma}")));
    }
    if n == 0 || reps < 2 {
        return Err(Error::invalid("moment check needs n ≥ 1 and reps ≥ 2"));
    }
    let samples = replicate(master_seed, 0, reps, |_, rng| {
        let x = sample_increments(model, n, rng);
        let s = x.sum_axis(Axis(0));
        s.dot(&s).powf(0.5 * gamma)
    });
    let (mean, se) = mean_stderr(&samples);
    let (norm_moment, norm_exact) = match model.norm_moment_exact(gamma) {
        Some(v) => (v, true),
        None => {
            // independent substreams placed after the sum replications
            let z = replicate(master_seed, reps, reps, |_, rng| {
                let row = sample_increments(model, 1, rng);
                row.row(0).dot(&row.row(0)).powf(0.5 * gamma)
            });
            (mean_stderr(&z).0, false)
        }
    };
    let rhs = moment_rhs(model, n, gamma, norm_moment);
    Ok(MomentCheck {
        sum_moment: mean,
        sum_moment_stderr: se,
        norm_moment,
        norm_moment_exact: norm_exact,
        rhs,
        ratio: mean / rhs,
        ratio_stderr: se / rhs,
        exact: false,
    })
}

/// Exact moment check by enumerating all outcomes of a discrete model.
pub fn rosenthal_exact(model: &IncrementModel, n: usize, gamma: f64) -> Result<MomentCheck> {
    let mut acc = 0.0;
    enumerate_paths(model, n, |p, x| {
        let s = x.sum_axis(Axis(0));
        acc += p * s.dot(&s).powf(0.5 * gamma);
    })?;
    let norm_moment = model
        .norm_moment_exact(gamma)
        .ok_or_else(|| Error::invalid("single-row moment cannot be enumerated"))?;
    let rhs = moment_rhs(model, n, gamma, norm_moment);
    Ok(MomentCheck {
        sum_moment: acc,
        sum_moment_stderr: 0.0,
        norm_moment,
        norm_moment_exact: true,
        rhs,
        ratio: acc / rhs,
        ratio_stderr: 0.0,
        exact: true,
    })
}

/// Sample mean and its standard error `sd/√len`.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let r = v.len() as f64;
    let mean = v.iter().sum::<f64>() / r;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (r - 1.0) / r).sqrt())
}

/// Convenience: coupling on substream `(master_seed, rep)`.
pub fn couple_replication(model: &IncrementModel, n: usize, master_seed: u64, rep: u64) -> Result<CouplingPaths> {
    couple_quantile(model, n, &mut substream(master_seed, rep))
}
