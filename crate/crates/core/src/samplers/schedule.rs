use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `k_B / h` in GHz per kelvin.
pub const KB_OVER_H_GHZ_PER_K: f64 = 20.836_612;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyUnits {
    /// `A` and `B` are pure numbers; the bath is given as an inverse temperature.
    Dimensionless,
    Ghz,
}

/// Transverse and longitudinal envelopes `A(s)`, `B(s)`, interpolated
/// linearly between tabulated points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    rows: Vec<[f64; 3]>,
    units: EnergyUnits,
}

impl AnnealSchedule {
    /// `A(s) = 1 - s`, `B(s) = s`.
    pub fn linear() -> Self {
        AnnealSchedule {
            rows: vec![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]],
            units: EnergyUnits::Dimensionless,
        }
    }

    /// Build from `(s, A, B)` rows. `s` must run strictly upward from 0 to 1;
    /// with `check_monotone`, `A` must not increase and `B` must not decrease.
    pub fn from_rows(rows: Vec<[f64; 3]>, units: EnergyUnits, check_monotone: bool) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::domain("a schedule needs at least two rows"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("schedule values must be finite"));
        }
        if rows[0][0] != 0.0 || rows[rows.len() - 1][0] != 1.0 {
            return Err(Error::domain("schedule must start at s = 0 and end at s = 1"));
        }
        for w in rows.windows(2) {
            let ([s0, a0, b0], [s1, a1, b1]) = (w[0], w[1]);
            if s1 <= s0 {
                return Err(Error::domain(format!("s not strictly increasing at s = {s1}")));
            }
            if check_monotone && (a1 > a0 || b1 < b0) {
                return Err(Error::domain(format!(
                    "A must not increase and B must not decrease (violated at s = {s1})"
                )));
            }
        }
        if rows.iter().any(|r| r[1] < 0.0 || r[2] < 0.0) {
            return Err(Error::domain("schedule energies must be non-negative"));
        }
        Ok(AnnealSchedule { rows, units })
    }

    /// Parse CSV with header `s,A_GHz,B_GHz`.
    pub fn from_csv(text: &str, check_monotone: bool) -> Result<Self> {
        const SRC: &str = "schedule CSV";
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse(SRC, "header", e.to_string()))?
            .clone();
        let expected = ["s", "A_GHz", "B_GHz"];
        if header.iter().ne(expected) {
            return Err(Error::parse(
                SRC,
                "header",
                format!("expected `s,A_GHz,B_GHz`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut rows = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let loc = format!("line {}", k + 2);
            let record = record.map_err(|e| Error::parse(SRC, &loc, e.to_string()))?;
            let mut row = [0.0; 3];
            for (slot, field) in row.iter_mut().zip(record.iter()) {
                *slot = field
                    .parse()
                    .map_err(|_| Error::parse(SRC, &loc, format!("not a number: `{field}`")))?;
            }
            if record.len() != 3 {
                return Err(Error::parse(SRC, &loc, "expected three columns"));
            }
            rows.push(row);
        }
        Self::from_rows(rows, EnergyUnits::Ghz, check_monotone)
    }

    pub fn from_csv_path(path: &Path, check_monotone: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, check_monotone)
    }

    pub fn units(&self) -> EnergyUnits {
        self.units
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    /// `(A(s), B(s))`, with `s` clamped into `[0, 1]`.
    pub fn at(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, 1.0);
        let k = self.rows.partition_point(|r| r[0] <= s).clamp(1, self.rows.len() - 1);
        let ([s0, a0, b0], [s1, a1, b1]) = (self.rows[k - 1], self.rows[k]);
        let t = (s - s0) / (s1 - s0);
        (a0 + t * (a1 - a0), b0 + t * (b1 - b0))
    }

    /// Inverse temperature in the schedule's energy units.
    pub fn beta(&self, bath: Bath) -> Result<f64> {
        let beta = match (bath, self.units) {
            (Bath::Beta(b), _) => b,
            (Bath::Kelvin(t), EnergyUnits::Ghz) => {
                if !(t > 0.0) {
                    return Err(Error::domain(format!("bath temperature must be positive, got {t}")));
                }
                1.0 / (KB_OVER_H_GHZ_PER_K * t)
            }
            (Bath::Kelvin(_), EnergyUnits::Dimensionless) => {
                return Err(Error::domain(
                    "a bath temperature in kelvin needs a schedule tabulated in GHz",
                ))
            }
        };
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain(format!("inverse temperature must be positive, got {beta}")));
        }
        Ok(beta)
    }
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self::linear()
    }
}

/// Temperature of the thermal bath.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bath {
    /// Inverse temperature in schedule energy units.
    Beta(f64),
    Kelvin(f64),
}

/// Stop the anneal at `s_int` and ramp linearly to `s = 1` over
/// `quench_sweeps` sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub s_int: f64,
    #[serde(default = "QuenchSpec::default_sweeps")]
    pub quench_sweeps: u64,
}

impl QuenchSpec {
    pub const DEFAULT_SWEEPS: u64 = 500;

    fn default_sweeps() -> u64 {
        Self::DEFAULT_SWEEPS
    }

    pub fn new(s_int: f64, quench_sweeps: u64) -> Result<Self> {
        let q = QuenchSpec {
            s_int,
            quench_sweeps,
        };
        q.validate()?;
        Ok(q)
    }

    /// No quench: the anneal runs all the way to `s = 1`.
    pub fn full() -> Self {
        QuenchSpec {
            s_int: 1.0,
            quench_sweeps: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_int > 0.0 && self.s_int <= 1.0) {
            return Err(Error::domain(format!("s_int must lie in (0, 1], got {}", self.s_int)));
        }
        Ok(())
    }
}

/// How `s` evolves during one read.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Protocol {
    /// Sweep `k` of `n` runs at `s = s_int (k + 1) / n`, then the quench.
    Anneal { quench: QuenchSpec },
    /// Every sweep at fixed `s`.
    Hold { s: f64 },
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        match self {
            Protocol::Anneal { quench } => quench.validate(),
            Protocol::Hold { s } if !(0.0..=1.0).contains(s) => {
                Err(Error::domain(format!("hold point s must lie in [0, 1], got {s}")))
            }
            Protocol::Hold { .. } => Ok(()),
        }
    }

    /// Total sweeps for a run of `sweeps` annealing sweeps.
    pub fn total_sweeps(&self, sweeps: u64) -> u64 {
        match self {
            Protocol::Anneal { quench } => sweeps + quench.quench_sweeps,
            Protocol::Hold { .. } => sweeps,
        }
    }

    /// Value of `s` during sweep `k` (0-based) of a run of `sweeps` sweeps.
    #[inline]
    pub fn s_at(&self, k: u64, sweeps: u64) -> f64 {
        match *self {
            Protocol::Hold { s } => s,
            Protocol::Anneal { quench } => {
                if k < sweeps {
                    quench.s_int * (k + 1) as f64 / sweeps as f64
                } else {
                    let j = k - sweeps;
                    let q = quench.quench_sweeps.max(1) as f64;
                    quench.s_int + (1.0 - quench.s_int) * (j + 1) as f64 / q
                }
            }
        }
    }
}
