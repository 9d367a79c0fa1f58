//! Separable IRS codebooks built by shifting one common beam shape.
//!
//! A codeword `m = (m1, m2)` applies the shape times a progressive ramp on each
//! axis; the full phase-shift vector is the Kronecker product of the two axis
//! vectors. Axis 1 is the outer Kronecker factor.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Direction};

/// Grid points per axis of the coarse main-lobe search.
pub const MAIN_LOBE_GRID: usize = 501;
/// Bracket width at which the golden-section refinement stops.
pub const MAIN_LOBE_TOL: f64 = 1e-6;

/// Common per-axis phase profile `omega_q = unit_gain * exp(j rho_q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamShape {
    pub phases: Vec<f64>,
    pub unit_gain: f64,
}

impl BeamShape {
    pub fn from_phases(phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Validation("beam shape needs at least one element".into()));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("beam shape phases must be finite".into()));
        }
        Ok(Self { phases, unit_gain: 1.0 })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn omega(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(self.unit_gain, p)).collect()
    }
}

/// Flat profile; the codeword ramp alone steers the beam.
pub fn linear_profile(q: usize) -> Result<BeamShape> {
    BeamShape::from_phases(vec![0.0; q])
}

/// Chirp profile `rho_q = -(2 pi d / lambda) (db q^2 / (2Q) + b_m q)` for
/// `q = 1..Q`, with `db = min(4, lambda/d) / M` and `b_m = m db`.
///
/// The chirp sweeps one codeword spacing, which widens the main lobe to cover
/// the gap between adjacent codewords.
pub fn quadratic_profile(q: usize, m_count: usize, spacing: f64, wavelength: f64, m: usize) -> Result<BeamShape> {
    if q == 0 || m_count == 0 {
        return Err(Error::Validation("Q and M must be at least 1".into()));
    }
    if m >= m_count {
        return Err(Error::IndexOutOfRange(format!("shape index {m} >= M = {m_count}")));
    }
    let beta_bar = 4f64.min(wavelength / spacing);
    let db = beta_bar / m_count as f64;
    let bm = m as f64 * db;
    let k = 2.0 * PI * spacing / wavelength;
    let phases = (1..=q)
        .map(|qi| {
            let qf = qi as f64;
            -k * (db * qf * qf / (2.0 * q as f64) + bm * qf)
        })
        .collect();
    BeamShape::from_phases(phases)
}

/// Codeword index pair; ordering is lexicographic on `(m1, m2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Codeword {
    pub m1: usize,
    pub m2: usize,
}

impl Codeword {
    pub const fn new(m1: usize, m2: usize) -> Self {
        Self { m1, m2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    Linear,
    Quadratic,
    Optimized,
}

impl CodebookKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodebookKind::Linear => "linear",
            CodebookKind::Quadratic => "quadratic",
            CodebookKind::Optimized => "optimized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(CodebookKind::Linear),
            "quadratic" => Ok(CodebookKind::Quadratic),
            "optimized" => Ok(CodebookKind::Optimized),
            other => Err(Error::Validation(format!("unknown codebook kind '{other}'"))),
        }
    }
}

/// Ramp phase slope of axis index `m`: `4 pi d m / (lambda M) - pi` per element.
pub fn ramp_slope(m: usize, m_count: usize, spacing_over_wavelength: f64) -> f64 {
    4.0 * PI * spacing_over_wavelength * m as f64 / m_count as f64 - PI
}

/// Axis vector `omega_M (.) [exp(j s q)]_{q=1..Q}` with `s` from [`ramp_slope`].
pub fn codeword_axis_vector(shape: &BeamShape, m: usize, m_count: usize, spacing_over_wavelength: f64) -> Vec<Complex64> {
    let s = ramp_slope(m, m_count, spacing_over_wavelength);
    shape
        .phases
        .iter()
        .enumerate()
        .map(|(i, &p)| Complex64::from_polar(shape.unit_gain, p + s * (i + 1) as f64))
        .collect()
}

/// Axis gain `sum_q conj(a_q(A)) w_q` for an effective weight vector `w`
/// (shape, ramp and incident steering already folded in).
pub fn axis_gain(weights: &[Complex64], spacing_over_wavelength: f64, factor: f64) -> Complex64 {
    let k = 2.0 * PI * spacing_over_wavelength * factor;
    let center = (weights.len() as f64 - 1.0) / 2.0;
    let step = Complex64::from_polar(1.0, -k);
    let mut ph = Complex64::from_polar(1.0, k * center);
    let mut acc = Complex64::new(0.0, 0.0);
    for w in weights {
        acc += w * ph;
        ph *= step;
    }
    acc
}

/// Separable codebook with a main-lobe cache for one incident direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub kind: CodebookKind,
    pub shape: BeamShape,
    pub m_count: usize,
    pub spacing: f64,
    pub wavelength: f64,
    /// Phase factors of the incident wave at the IRS.
    pub incident: (f64, f64),
    /// `effective[axis][m]`: axis vector times incident steering.
    effective: [Vec<Vec<Complex64>>; 2],
    /// `lobe_factor[axis][m]`: main-lobe phase factor of axis index `m`.
    lobe_factor: [Vec<f64>; 2],
    /// Row-major `m1 * M + m2` main-lobe directions.
    lobes: Vec<Direction>,
}

impl Codebook {
    pub fn new(
        kind: CodebookKind,
        shape: BeamShape,
        m_count: usize,
        spacing: f64,
        wavelength: f64,
        incident: (f64, f64),
    ) -> Result<Self> {
        if m_count == 0 {
            return Err(Error::Validation("M must be at least 1".into()));
        }
        if !(spacing > 0.0) || !(wavelength > 0.0) {
            return Err(Error::Validation("spacing and wavelength must be positive".into()));
        }
        if shape.is_empty() {
            return Err(Error::Validation("empty beam shape".into()));
        }
        let dl = spacing / wavelength;
        let q = shape.len();
        let inc = [
            geometry::axis_steering(q, dl, incident.0),
            geometry::axis_steering(q, dl, incident.1),
        ];
        let effective: [Vec<Vec<Complex64>>; 2] = std::array::from_fn(|axis| {
            (0..m_count)
                .map(|m| {
                    codeword_axis_vector(&shape, m, m_count, dl)
                        .into_iter()
                        .zip(&inc[axis])
                        .map(|(w, a)| w * a)
                        .collect()
                })
                .collect()
        });
        let lobe_factor: [Vec<f64>; 2] =
            std::array::from_fn(|axis| effective[axis].iter().map(|w| axis_argmax(w, dl)).collect());
        let mut cb = Self { kind, shape, m_count, spacing, wavelength, incident, effective, lobe_factor, lobes: Vec::new() };
        cb.lobes = (0..m_count * m_count)
            .map(|i| cb.compute_main_lobe(Codeword::new(i / m_count, i % m_count)))
            .collect();
        Ok(cb)
    }

    /// Linear codebook under normal incidence.
    pub fn linear(q: usize, m_count: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        Self::new(CodebookKind::Linear, linear_profile(q)?, m_count, spacing, wavelength, (0.0, 0.0))
    }

    /// Quadratic codebook under normal incidence.
    pub fn quadratic(q: usize, m_count: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        let shape = quadratic_profile(q, m_count, spacing, wavelength, 0)?;
        Self::new(CodebookKind::Quadratic, shape, m_count, spacing, wavelength, (0.0, 0.0))
    }

    /// Same shape and size under another incident direction.
    pub fn with_incident(&self, incident: (f64, f64)) -> Result<Self> {
        Self::new(self.kind, self.shape.clone(), self.m_count, self.spacing, self.wavelength, incident)
    }

    pub fn q(&self) -> usize {
        self.shape.len()
    }

    pub fn size(&self) -> usize {
        self.m_count * self.m_count
    }

    pub fn spacing_over_wavelength(&self) -> f64 {
        self.spacing / self.wavelength
    }

    /// Peak reflection gain magnitude `unit_gain^2 Q^2`.
    pub fn g_max(&self) -> f64 {
        let q = self.q() as f64;
        self.shape.unit_gain * self.shape.unit_gain * q * q
    }

    pub fn contains(&self, m: Codeword) -> bool {
        m.m1 < self.m_count && m.m2 < self.m_count
    }

    pub fn codewords(&self) -> impl Iterator<Item = Codeword> + '_ {
        (0..self.size()).map(move |i| Codeword::new(i / self.m_count, i % self.m_count))
    }

    pub fn axis_vector(&self, m: usize) -> Vec<Complex64> {
        codeword_axis_vector(&self.shape, m, self.m_count, self.spacing_over_wavelength())
    }

    /// Full `Q^2` phase-shift vector `omega_1(m1) (x) omega_2(m2)`.
    pub fn full_codeword_vector(&self, m: Codeword) -> Vec<Complex64> {
        geometry::kron(&self.axis_vector(m.m1), &self.axis_vector(m.m2))
    }

    /// Reflection gain for explicit receive phase factors.
    pub fn gain_at_factors(&self, m: Codeword, a1: f64, a2: f64) -> Complex64 {
        let dl = self.spacing_over_wavelength();
        axis_gain(&self.effective[0][m.m1], dl, a1) * axis_gain(&self.effective[1][m.m2], dl, a2)
    }

    /// Reflection gain `a^H(psi) Omega(m) a(psi_t)` towards direction `d`.
    pub fn reflection_gain(&self, m: Codeword, d: Direction) -> Complex64 {
        let (a1, a2) = geometry::direction_factors(d);
        self.gain_at_factors(m, a1, a2)
    }

    /// Cached main-lobe direction.
    pub fn main_lobe(&self, m: Codeword) -> Direction {
        self.lobes[m.m1 * self.m_count + m.m2]
    }

    /// Cached per-axis main-lobe phase factors.
    pub fn main_lobe_factors(&self, m: Codeword) -> (f64, f64) {
        (self.lobe_factor[0][m.m1], self.lobe_factor[1][m.m2])
    }

    fn compute_main_lobe(&self, m: Codeword) -> Direction {
        let (a1, a2) = self.main_lobe_factors(m);
        if a1 * a1 + a2 * a2 < 1.0 - 1e-9 {
            return geometry::direction_from_factors(a1, a2).expect("inside unit disk");
        }
        // separable optimum is invisible; search the visible disk jointly
        let dl = self.spacing_over_wavelength();
        let w1 = &self.effective[0][m.m1];
        let w2 = &self.effective[1][m.m2];
        let grid: Vec<f64> = (0..MAIN_LOBE_GRID).map(|i| -1.0 + 2.0 * i as f64 / (MAIN_LOBE_GRID - 1) as f64).collect();
        let g1: Vec<f64> = grid.iter().map(|&a| axis_gain(w1, dl, a).norm()).collect();
        let g2: Vec<f64> = grid.iter().map(|&a| axis_gain(w2, dl, a).norm()).collect();
        let limit = 1.0 - 1e-9;
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for (i, &x) in grid.iter().enumerate() {
            for (j, &y) in grid.iter().enumerate() {
                if x * x + y * y < limit && g1[i] * g2[j] > best.0 {
                    best = (g1[i] * g2[j], x, y);
                }
            }
        }
        let (mut x, mut y) = (best.1, best.2);
        let h = 2.0 / (MAIN_LOBE_GRID - 1) as f64;
        for _ in 0..2 {
            let ry = (limit - y * y).max(0.0).sqrt();
            x = golden_max(|a| axis_gain(w1, dl, a).norm(), (x - h).max(-ry), (x + h).min(ry));
            let rx = (limit - x * x).max(0.0).sqrt();
            y = golden_max(|a| axis_gain(w2, dl, a).norm(), (y - h).max(-rx), (y + h).min(rx));
        }
        geometry::direction_from_factors(x, y).expect("inside unit disk")
    }

    /// Shape file: `#` header lines followed by `index phase_radians` rows.
    pub fn shape_to_text(&self) -> String {
        shape_to_text(&self.shape, self.kind, self.m_count, self.spacing_over_wavelength())
    }
}

/// Coarse grid plus golden-section refinement of `|axis_gain|` over `[-1, 1]`.
fn axis_argmax(weights: &[Complex64], dl: f64) -> f64 {
    let n = MAIN_LOBE_GRID;
    let h = 2.0 / (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let a = -1.0 + i as f64 * h;
        let v = axis_gain(weights, dl, a).norm();
        if v > best.0 {
            best = (v, a);
        }
    }
    golden_max(|a| axis_gain(weights, dl, a).norm(), (best.1 - h).max(-1.0), (best.1 + h).min(1.0))
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > MAIN_LOBE_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Angular spacing between adjacent codewords, `2 / M` radians.
pub fn angular_spacing(m_count: usize) -> f64 {
    2.0 / m_count as f64
}

/// Width of the direction-estimation coverage region, three codeword spacings.
pub fn coverage_width(m_count: usize) -> f64 {
    3.0 * angular_spacing(m_count)
}

/// Serializes a shape with codebook metadata.
pub fn shape_to_text(shape: &BeamShape, kind: CodebookKind, m_count: usize, spacing_over_wavelength: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# kind {}", kind.as_str());
    let _ = writeln!(s, "# Q {}", shape.len());
    let _ = writeln!(s, "# M {m_count}");
    let _ = writeln!(s, "# d_over_lambda {spacing_over_wavelength:?}");
    for (i, p) in shape.phases.iter().enumerate() {
        let _ = writeln!(s, "{i} {p:?}");
    }
    s
}

/// Header fields recovered from a shape file.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMeta {
    pub kind: CodebookKind,
    pub m_count: usize,
    pub spacing_over_wavelength: f64,
}

/// Parses the format written by [`shape_to_text`].
pub fn shape_from_text(text: &str) -> Result<(BeamShape, ShapeMeta)> {
    let mut kind = None;
    let mut q = None;
    let mut m = None;
    let mut dl = None;
    let mut phases = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: line_no, msg };
        if let Some(h) = t.strip_prefix('#') {
            let mut it = h.split_whitespace();
            let (Some(key), Some(val)) = (it.next(), it.next()) else { continue };
            match key {
                "kind" => kind = Some(CodebookKind::parse(val).map_err(|e| perr(e.to_string()))?),
                "Q" => q = Some(val.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                "M" => m = Some(val.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                "d_over_lambda" => dl = Some(val.parse::<f64>().map_err(|e| perr(e.to_string()))?),
                _ => {}
            }
            continue;
        }
        let mut it = t.split_whitespace();
        let idx: usize = it
            .next()
            .ok_or_else(|| perr("missing index".into()))?
            .parse()
            .map_err(|e: std::num::ParseIntError| perr(e.to_string()))?;
        let ph: f64 = it
            .next()
            .ok_or_else(|| perr("missing phase".into()))?
            .parse()
            .map_err(|e: std::num::ParseFloatError| perr(e.to_string()))?;
        if idx != phases.len() {
            return Err(perr(format!("expected index {}, found {idx}", phases.len())));
        }
        phases.push(ph);
    }
    let shape = BeamShape::from_phases(phases)?;
    if let Some(q) = q {
        if q != shape.len() {
            return Err(Error::Validation(format!("header Q = {q} but {} phases listed", shape.len())));
        }
    }
    let meta = ShapeMeta {
        kind: kind.unwrap_or(CodebookKind::Optimized),
        m_count: m.ok_or_else(|| Error::Validation("shape file lacks '# M' header".into()))?,
        spacing_over_wavelength: dl.unwrap_or(0.5),
    };
    Ok((shape, meta))
}
