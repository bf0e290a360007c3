//! The lattice construction that bounds `Δ_n` from below for every coupling.
//!
//! Coordinates of the summands take the values `−λ, 0, λ`, so each partial
//! sum `S_{nm}` lies on `λℤ`. Whenever the Gaussian sum `T_{nm}` is within
//! `λ/2` of zero, `|S_{nm} − T_{nm}| ≥ |T_{nm}|`, whatever the coupling. The
//! quantity `U = Σ_{m>k} η_m²` with `η_m = |T_{nm}| 1{|T_{nm}| ≤ λ/2}` is thus a
//! pathwise lower bound for `Δ_n²` computable from the Gaussian side alone.

use crate::error::{Error, Result};
use crate::laws::IncrementKind;
use crate::simulate::{couple_quantile, IncrementModel};
use crate::normal;
use crate::spectra::{Neumaier, Spectrum};
use crate::stream::replicate;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Share of `B_k²` the truncation should keep before a diagnostic is raised.
pub const CAPTURE_TARGET: f64 = 0.999;

/// Quantile levels reported for the certified bound `√U`.
pub const CERTIFIED_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

const SMALL_C: f64 = 0.5;
const TWO_PHI0: f64 = 0.797_884_560_802_865_4;

/// `(E η², E η⁴)` for `η = |T| 1{|T| ≤ λ/2}` with `T ~ N(0, s²)`.
pub fn eta_moments(s_sq: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(s_sq > 0.0 && s_sq.is_finite()) {
        return Err(Error::invalid(format!("variance must be positive, got {s_sq}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lattice step must be ≥ 0, got {lambda}")));
    }
    let s = s_sq.sqrt();
    let c = lambda / (2.0 * s);
    let (m2, m4) = standard_truncated_moments(c);
    Ok((s_sq * m2, s_sq * s_sq * m4))
}

/// `∫_{−c}^{c} x² φ(x) dx` and `∫_{−c}^{c} x⁴ φ(x) dx`.
fn standard_truncated_moments(c: f64) -> (f64, f64) {
    if c < SMALL_C {
        // alternating series of the integrand expanded around 0
        let (mut m2, mut m4) = (0.0, 0.0);
        let c2 = c * c;
        let mut pow = c2 * c;
        let mut fact = 1.0;
        for k in 0..60 {
            let kf = k as f64;
            let t2 = pow / (fact * (2.0 * kf + 3.0));
            let t4 = pow * c2 / (fact * (2.0 * kf + 5.0));
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            m2 += sign * t2;
            m4 += sign * t4;
            if t2 < 1e-18 * m2.abs() {
                break;
            }
            pow *= c2;
            fact *= 2.0 * (kf + 1.0);
        }
        return (TWO_PHI0 * m2, TWO_PHI0 * m4);
    }
    let mass = normal::central_mass(c);
    let phi = normal::pdf(c);
    let m2 = mass - 2.0 * c * phi;
    let m4 = 3.0 * mass - 2.0 * phi * (c * c * c + 3.0 * c);
    (m2, m4)
}

/// `a² / (4b + a²)`, a lower bound for `P{U ≥ a/2}`; 0 when `a = 0`.
pub fn feller_floor(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::invalid(format!("a and b must be ≥ 0, got a = {a}, b = {b}")));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(a * a / (4.0 * b + a * a))
}

/// Interval known to contain a quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeInstance {
    pub lambda: f64,
    pub spectrum: Spectrum,
    pub n: u64,
    /// Number of coordinates with `n σ_m² ≥ λ²`.
    pub k: usize,
    /// Last coordinate included in sums and simulations.
    pub dim: usize,
    /// `E U` including the bracketed tail `m > dim`.
    pub a: f64,
    /// `Σ_{k<m≤dim} E η_m²`.
    pub a_head: f64,
    pub a_tail: Bracket,
    /// `Var U` including the bracketed tail.
    pub b: f64,
    pub b_head: f64,
    pub b_tail: Bracket,
    pub feller_floor: f64,
    /// `B_k²`.
    pub tail_variance_k: f64,
    /// `(B_k² − B_dim²) / B_k²`.
    pub captured_fraction: f64,
    pub diagnostics: Vec<String>,
}

/// Number of coordinates with `n σ_m² ≥ λ²` (a prefix, since `σ_m²` decreases).
pub fn cutoff_k(spectrum: &Spectrum, lambda: f64, n: u64) -> Result<usize> {
    let l2 = lambda * lambda;
    let nf = n as f64;
    let big = |m: usize| nf * spectrum.sigma_sq(m) >= l2;
    if !big(1) {
        return Ok(0);
    }
    let limit = spectrum.support_len().unwrap_or(usize::MAX / 4);
    let mut lo = 1;
    let mut hi = 2;
    while hi <= limit && big(hi) {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::numerical("cutoff scan overflow"))?;
        if hi > (1 << 50) {
            return Err(Error::numerical("cutoff k exceeds 2^50"));
        }
    }
    let mut hi = hi.min(limit + 1);
    // invariant: big(lo), !big(hi) or hi beyond support
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if big(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smallest `D > k` with `B_D² ≤ (1 − CAPTURE_TARGET) B_k²`.
pub fn default_dim(spectrum: &Spectrum, lambda: f64, n: u64) -> Result<usize> {
    let k = cutoff_k(spectrum, lambda, n)?;
    if let Some(len) = spectrum.support_len() {
        return Ok(len.max(k));
    }
    let target = (1.0 - CAPTURE_TARGET) * spectrum.tail_variance(k);
    let ok = |d: usize| spectrum.tail_variance(d) <= target;
    let mut lo = k;
    let mut hi = k + 1;
    while !ok(hi) {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi > crate::spectra::DEFAULT_DIM_CAP {
            return Err(Error::numerical(format!(
                "capturing {CAPTURE_TARGET} of B_k² needs more than {} coordinates",
                crate::spectra::DEFAULT_DIM_CAP
            )));
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn build_lattice_instance(spectrum: &Spectrum, lambda: f64, n: u64, dim: usize) -> Result<LatticeInstance> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("lattice step must be positive, got {lambda}")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be a positive integer"));
    }
    let s1 = spectrum.sigma_sq(1);
    if s1 > lambda * lambda {
        return Err(Error::invalid(format!(
            "lattice law needs σ_1² ≤ λ², got σ_1² = {s1} > λ² = {}",
            lambda * lambda
        )));
    }
    let k = cutoff_k(spectrum, lambda, n)?;
    let dim = match spectrum.support_len() {
        Some(len) => dim.min(len).max(k),
        None => dim,
    };
    if dim < k || (dim == k && spectrum.support_len().is_none()) {
        return Err(Error::invalid(format!("truncation dimension {dim} must exceed the cutoff k = {k}")));
    }
    let nf = n as f64;
    let mut a_head = Neumaier::default();
    let mut b_head = Neumaier::default();
    for m in k + 1..=dim {
        let s2 = nf * spectrum.sigma_sq(m);
        if s2 == 0.0 {
            break;
        }
        let (e2, e4) = eta_moments(s2, lambda)?;
        a_head.add(e2);
        b_head.add((e4 - e2 * e2).max(0.0));
    }
    let (a_head, b_head) = (a_head.total(), b_head.total());

    let tail_d = spectrum.tail_variance(dim);
    let (a_tail, b_tail) = if tail_d > 0.0 {
        let s_next = nf * spectrum.sigma_sq(dim + 1);
        // E η²/s² increases with c = λ/(2s), and s decreases past dim
        let ratio = eta_moments(s_next, lambda)?.0 / s_next;
        (
            Bracket { lower: ratio * nf * tail_d, upper: nf * tail_d },
            Bracket { lower: 0.0, upper: 3.0 * nf * s_next * tail_d },
        )
    } else {
        (Bracket { lower: 0.0, upper: 0.0 }, Bracket { lower: 0.0, upper: 0.0 })
    };
    let a = a_head + a_tail.mid();
    let b = b_head + b_tail.mid();
    let tail_k = spectrum.tail_variance(k);
    let captured = if tail_k > 0.0 { (tail_k - tail_d) / tail_k } else { 1.0 };
    let mut diagnostics = Vec::new();
    if captured < CAPTURE_TARGET {
        diagnostics.push(format!(
            "truncation keeps {:.4}% of B_k², below the {}% target; the tail is bracketed analytically",
            100.0 * captured,
            100.0 * CAPTURE_TARGET
        ));
    }
    Ok(LatticeInstance {
        lambda,
        spectrum: spectrum.clone(),
        n,
        k,
        dim,
        a,
        a_head,
        a_tail,
        b,
        b_head,
        b_tail,
        feller_floor: feller_floor(a, b)?,
        tail_variance_k: tail_k,
        captured_fraction: captured,
        diagnostics,
    })
}

fn eta_sq(t: f64, half_step: f64) -> f64 {
    if t.abs() <= half_step {
        t * t
    } else {
        0.0
    }
}

/// `√U` from the final Gaussian partial sums `t[m−1] = T_{nm}`, using
/// coordinates `k < m ≤ min(len, dim)`. A lower bound for `Δ_n` of any
/// coupling whose summands live on `λℤ^D`.
pub fn certified_delta_lower(t: &[f64], inst: &LatticeInstance) -> f64 {
    let half = 0.5 * inst.lambda;
    let end = t.len().min(inst.dim);
    let mut u = 0.0;
    for &tm in t.iter().take(end).skip(inst.k) {
        u += eta_sq(tm, half);
    }
    u.sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct USummary {
    pub reps: u64,
    pub master_seed: u64,
    pub mean_u: f64,
    pub stderr_u: f64,
    pub a: f64,
    /// Upper end of the tail `m > dim` omitted from the simulation.
    pub truncation_bracket: f64,
    /// Midpoint estimate of the omitted tail of `E U`.
    pub truncation_deficit: f64,
    /// `P̂{U ≥ a/2}`.
    pub empirical_prob: f64,
    pub empirical_prob_stderr: f64,
    pub feller_floor: f64,
    /// `(level, quantile of √U)`.
    pub certified_quantiles: Vec<(f64, f64)>,
}

/// Simulates `U` from `T_{nm} ~ N(0, n σ_m²)` for `k < m ≤ dim`.
pub fn simulate_u(inst: &LatticeInstance, reps: u64, master_seed: u64) -> Result<USummary> {
    if reps < 2 {
        return Err(Error::invalid("simulation needs reps ≥ 2"));
    }
    let nf = inst.n as f64;
    let sds: Vec<f64> = (inst.k + 1..=inst.dim).map(|m| (nf * inst.spectrum.sigma_sq(m)).sqrt()).collect();
    let half = 0.5 * inst.lambda;
    let us = replicate(master_seed, 0, reps, |_, rng| {
        let mut u = 0.0;
        for &sd in &sds {
            let z: f64 = StandardNormal.sample(rng);
            u += eta_sq(sd * z, half);
        }
        u
    });
    let (mean_u, stderr_u) = crate::simulate::mean_stderr(&us);
    let thr = 0.5 * inst.a;
    let hits: Vec<f64> = us.iter().map(|&u| f64::from(u8::from(u >= thr))).collect();
    let (p, p_se) = crate::simulate::mean_stderr(&hits);
    let mut roots: Vec<f64> = us.iter().map(|u| u.sqrt()).collect();
    roots.sort_by(f64::total_cmp);
    Ok(USummary {
        reps,
        master_seed,
        mean_u,
        stderr_u,
        a: inst.a,
        truncation_bracket: inst.a_tail.upper,
        truncation_deficit: inst.a - inst.a_head,
        empirical_prob: p,
        empirical_prob_stderr: p_se,
        feller_floor: inst.feller_floor,
        certified_quantiles: CERTIFIED_LEVELS.iter().map(|&q| (q, sorted_quantile(&roots, q))).collect(),
    })
}

/// Linear interpolation between order statistics (sample quantile type 7).
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub paths: u64,
    /// Paths on which `√U > Δ_n`; the construction says there are none.
    pub violations: u64,
    /// Smallest `Δ_n − √U` over all paths.
    pub min_slack: f64,
    pub mean_certified: f64,
    pub mean_delta: f64,
}

/// Runs `paths` quantile couplings of the lattice model and compares the
/// certificate computed from the Gaussian side with the realized `Δ_n`.
pub fn certificate_check(inst: &LatticeInstance, paths: u64, master_seed: u64) -> Result<CertificateCheck> {
    if paths == 0 {
        return Err(Error::invalid("certificate check needs at least one path"));
    }
    let n = usize::try_from(inst.n).map_err(|_| Error::invalid("n too large for path simulation"))?;
    let model = IncrementModel::new(
        IncrementKind::ThreePointLattice { lambda: inst.lambda },
        inst.spectrum.clone(),
        inst.dim,
    )?;
    let pairs = replicate(master_seed, 0, paths, |_, rng| {
        couple_quantile(&model, n, rng).map(|p| {
            let t = p.gaussian_endpoint().to_vec();
            (certified_delta_lower(&t, inst), p.delta)
        })
    });
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    let (mut sc, mut sd) = (0.0, 0.0);
    for pair in pairs {
        let (cert, delta) = pair?;
        if cert > delta {
            violations += 1;
        }
        min_slack = min_slack.min(delta - cert);
        sc += cert;
        sd += delta;
    }
    let p = paths as f64;
    Ok(CertificateCheck { paths, violations, min_slack, mean_certified: sc / p, mean_delta: sd / p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerMoment {
    /// `(n B_k²)^{γ/2}`.
    pub tail_term: f64,
    /// `(λ² k)^{γ/2}` for `k ≥ 1`, else 0; not backed by a pathwise certificate.
    pub head_term: f64,
}

pub fn lower_moment_bound(inst: &LatticeInstance, gamma: f64) -> Result<LowerMoment> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let tail = (inst.n as f64 * inst.tail_variance_k).powf(0.5 * gamma);
    let head = if inst.k == 0 {
        0.0
    } else {
        (inst.lambda * inst.lambda * inst.k as f64).powf(0.5 * gamma)
    };
    Ok(LowerMoment { tail_term: tail, head_term: head })
}
