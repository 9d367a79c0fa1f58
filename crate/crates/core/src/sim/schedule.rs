//! Time-block schedule and overhead ratios in exact rational seconds.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact duration in seconds.
pub type Seconds = Ratio<i64>;

const NANOS: i64 = 1_000_000_000;

/// Rounds a duration in seconds to the nanosecond grid.
pub fn seconds_from_f64(s: f64) -> Result<Seconds> {
    if !(0.0..=1e9).contains(&s) {
        return Err(Error::Validation(format!("duration {s} s is not a finite nonnegative value")));
    }
    Ok(Ratio::new((s * NANOS as f64).round() as i64, NANOS))
}

pub fn to_f64(s: Seconds) -> f64 {
    *s.numer() as f64 / *s.denom() as f64
}

/// Inputs from which a schedule is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Time-block length `T`.
    pub block: Seconds,
    /// Nominal `T_CE + T_DT`.
    pub slot: Seconds,
    /// Pilot symbol duration `T_S`.
    pub symbol: Seconds,
    pub ue_antennas: i64,
    pub n_uc: i64,
    /// Pilots per estimation codeword.
    pub n_ide: i64,
    /// Codewords per estimation sub-block.
    pub ide_codewords: i64,
    pub n_ce: i64,
}

impl ScheduleParams {
    /// Reference values: `T = 1.5 s`, 1.29 ms slots, 4.16 us symbols, 2x2 user
    /// array, five pilots per sub-block and nine estimation codewords.
    pub fn reference() -> Self {
        Self {
            block: Ratio::new(3, 2),
            slot: Ratio::new(129, 100_000),
            symbol: Ratio::new(416, 100_000_000),
            ue_antennas: 4,
            n_uc: 5,
            n_ide: 5,
            ide_codewords: 9,
            n_ce: 1,
        }
    }
}

/// Sub-block durations of one time block.
///
/// `T_DT` absorbs the rounding of `eta` so that
/// `T = T_UC + T_IDE + eta (T_CE + T_DT)` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBlockSchedule {
    pub block: Seconds,
    pub uc: Seconds,
    pub ide: Seconds,
    pub ce: Seconds,
    pub dt: Seconds,
    pub eta: i64,
    pub symbol: Seconds,
    pub n_uc: i64,
    pub n_ide: i64,
    pub n_ce: i64,
    pub ide_codewords: i64,
    pub ue_antennas: i64,
    /// Nominal slot the schedule was derived from.
    pub nominal_slot: Seconds,
}

impl TimeBlockSchedule {
    pub fn derive(p: &ScheduleParams) -> Result<Self> {
        let zero = Ratio::from_integer(0);
        if p.block <= zero || p.slot <= zero || p.symbol <= zero {
            return Err(Error::Validation("block, slot and symbol durations must be positive".into()));
        }
        if p.ue_antennas < 1 || p.n_uc < 1 || p.n_ide < 1 || p.ide_codewords < 1 || p.n_ce < 1 {
            return Err(Error::Validation("pilot and antenna counts must be at least 1".into()));
        }
        let uc = p.symbol * (p.ue_antennas * p.n_uc);
        let ide = p.symbol * (p.ide_codewords * p.n_ide);
        let ce = p.symbol * p.n_ce;
        if ce >= p.slot {
            return Err(Error::Validation("channel-estimation pilots do not fit into one slot".into()));
        }
        let rest = p.block - uc - ide;
        if rest < p.slot {
            return Err(Error::Validation("time block leaves no room for a data slot".into()));
        }
        let eta = (rest / p.slot).floor().to_integer();
        let dt = rest / eta - ce;
        Ok(Self {
            block: p.block,
            uc,
            ide,
            ce,
            dt,
            eta,
            symbol: p.symbol,
            n_uc: p.n_uc,
            n_ide: p.n_ide,
            n_ce: p.n_ce,
            ide_codewords: p.ide_codewords,
            ue_antennas: p.ue_antennas,
            nominal_slot: p.slot,
        })
    }

    /// `T_CE + T_DT`.
    pub fn slot(&self) -> Seconds {
        self.ce + self.dt
    }

    /// `t_k = k T`.
    pub fn block_start(&self, k: i64) -> Seconds {
        self.block * k
    }

    /// Start of the estimation sub-block of block `k`.
    pub fn ide_start(&self, k: i64) -> Seconds {
        self.block_start(k) + self.uc
    }

    /// `t_{k,kappa} = t_k + T_UC + T_IDE + kappa (T_CE + T_DT)`.
    pub fn slot_start(&self, k: i64, kappa: i64) -> Seconds {
        self.block_start(k) + self.uc + self.ide + self.slot() * kappa
    }

    /// Whether the identity `T = T_UC + T_IDE + eta (T_CE + T_DT)` holds.
    pub fn is_consistent(&self) -> bool {
        self.block == self.uc + self.ide + self.slot() * self.eta
    }
}

/// Transmission schemes compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Hierarchical,
    Perfect,
    Focusing,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Hierarchical, Scheme::Perfect, Scheme::Focusing];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Hierarchical => "hierarchical",
            Scheme::Perfect => "perfect",
            Scheme::Focusing => "focusing",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s.trim())
            .ok_or_else(|| Error::Validation(format!("unknown scheme '{s}'")))
    }
}

/// Baseline parameters entering the overhead ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadParams {
    /// Scatterers per link, `L_t` and `L_r`.
    pub scatterers_t: i64,
    pub scatterers_r: i64,
    /// IRS cells `Q_IRS`.
    pub irs_cells: i64,
    /// First-level words of the hierarchical search.
    pub hs_first_level: i64,
    /// Children searched per refinement level, `N_HS`.
    pub hs_children: i64,
    /// Codebook depth `L_C`.
    pub hs_levels: i64,
}

/// Pilots of the full-CSI estimate, `ceil(L_r L_t ln Q_IRS)`.
pub fn focusing_pilots(p: &OverheadParams) -> i64 {
    ((p.scatterers_t * p.scatterers_r) as f64 * (p.irs_cells as f64).ln()).ceil() as i64
}

/// Search time `T_HS = T_CE (first level + N_HS (L_C - 1))`.
pub fn hierarchical_search_time(s: &TimeBlockSchedule, p: &OverheadParams) -> Seconds {
    s.ce * (p.hs_first_level + p.hs_children * (p.hs_levels - 1))
}

fn slots_after(s: &TimeBlockSchedule, used: Seconds) -> i64 {
    let rest = s.block - used;
    if rest <= Ratio::from_integer(0) {
        return 0;
    }
    (rest / s.nominal_slot).floor().to_integer()
}

/// Overhead ratio `Gamma` of a scheme.
///
/// * proposed: `(T_UC + T_IDE + eta T_CE) / T`
/// * focusing: `T_CE^B / (T_CE^B + T_DT^B)` with the nominal slot
/// * hierarchical: `(T_UC + T_HS + eta_HS T_CE) / T`
/// * perfect: `(T_UC + eta_P T_CE) / T`, one pilot per slot and no search
pub fn overhead_ratio(scheme: Scheme, s: &TimeBlockSchedule, p: &OverheadParams) -> Result<Seconds> {
    let g = match scheme {
        Scheme::Proposed => (s.uc + s.ide + s.ce * s.eta) / s.block,
        Scheme::Focusing => {
            let ce_b = s.symbol * focusing_pilots(p);
            if ce_b >= s.nominal_slot {
                return Err(Error::Validation("full-CSI pilots exceed the slot".into()));
            }
            ce_b / s.nominal_slot
        }
        Scheme::Hierarchical => {
            let ths = hierarchical_search_time(s, p);
            let eta_hs = slots_after(s, s.uc + ths);
            (s.uc + ths + s.ce * eta_hs) / s.block
        }
        Scheme::Perfect => {
            let eta_p = slots_after(s, s.uc);
            (s.uc + s.ce * eta_p) / s.block
        }
    };
    if g >= Ratio::from_integer(1) {
        return Err(Error::Validation(format!("{} overhead is not below 1", scheme.as_str())));
    }
    Ok(g)
}

/// `SNR = |h|^2 P_TX / (Q_UE sigma^2)` and `R = (1 - Gamma) log2(1 + SNR)`.
pub fn snr_and_rate(h: num_complex::Complex64, tx_power: f64, noise_variance: f64, ue_antennas: usize, overhead: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&overhead) {
        return Err(Error::Validation(format!("overhead {overhead} outside [0, 1)")));
    }
    if !(noise_variance > 0.0) || ue_antennas == 0 {
        return Err(Error::Validation("noise variance and antenna count must be positive".into()));
    }
    let snr = h.norm_sqr() * tx_power / (ue_antennas as f64 * noise_variance);
    Ok((snr, rate_from_snr(snr, overhead)))
}

pub fn rate_from_snr(snr: f64, overhead: f64) -> f64 {
    (1.0 - overhead) * (1.0 + snr).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_schedule() {
        let s = TimeBlockSchedule::derive(&ScheduleParams::reference()).unwrap();
        assert_eq!(s.ide, Ratio::new(1872, 10_000_000));
        assert_eq!(s.uc, Ratio::new(832, 10_000_000));
        assert_eq!(s.eta, 1162);
        assert!(s.is_consistent());
    }

    #[test]
    fn rate_examples() {
        let (snr, r) = snr_and_rate(num_complex::Complex64::new(3f64.sqrt(), 0.0), 1.0, 1.0, 1, 0.5).unwrap();
        assert!((snr - 3.0).abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(rate_from_snr(3.0, 0.0), 2.0);
        assert!(snr_and_rate(num_complex::Complex64::new(1.0, 0.0), 1.0, 1.0, 1, 1.0).is_err());
    }
}
