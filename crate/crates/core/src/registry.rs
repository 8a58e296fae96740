//! Rydberg states, dipole transitions and the table-driven registry that backs
//! every physical quantity used by the receiver models.
//!
//! States are labelled spectroscopically (`60D5/2`). Total angular momentum is
//! stored doubled so half-integer values compare exactly.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants shared registry-wide. All SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
    /// Bohr radius (m).
    pub bohr_radius: f64,
    /// Speed of light (m/s).
    pub speed_of_light: f64,
    /// Free-space impedance (Ω).
    pub free_space_impedance: f64,
    /// Room-temperature thermal noise power spectral density (W/Hz).
    pub thermal_noise_psd: f64,
}

/// -174 dBm/Hz expressed in W/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.054_571_817e-34,
            bohr_radius: 5.29e-11,
            speed_of_light: 2.997_924_58e8,
            free_space_impedance: 376.73,
            thermal_noise_psd: dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ),
        }
    }
}

impl PhysicalConstants {
    /// Free-space wavelength (m) of a carrier at `frequency_hz`.
    pub fn wavelength(&self, frequency_hz: f64) -> f64 {
        self.speed_of_light / frequency_hz
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Orbital angular momentum letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orbital {
    S,
    P,
    D,
    F,
}

impl Orbital {
    pub fn l(self) -> u32 {
        match self {
            Orbital::S => 0,
            Orbital::P => 1,
            Orbital::D => 2,
            Orbital::F => 3,
        }
    }

    pub fn from_l(l: u32) -> Option<Self> {
        match l {
            0 => Some(Orbital::S),
            1 => Some(Orbital::P),
            2 => Some(Orbital::D),
            3 => Some(Orbital::F),
            _ => None,
        }
    }

    fn letter(self) -> char {
        match self {
            Orbital::S => 'S',
            Orbital::P => 'P',
            Orbital::D => 'D',
            Orbital::F => 'F',
        }
    }
}

/// An atomic state `n l_j`. Only constructible through [`RydbergState::new`]
/// or parsing, both of which enforce `n > l` and `j = l ± 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RydbergState {
    n: u32,
    orbital: Orbital,
    /// 2j, always odd.
    twice_j: u32,
}

impl RydbergState {
    /// `twice_j` is 2j, e.g. 5 for j = 5/2.
    pub fn new(n: u32, orbital: Orbital, twice_j: u32) -> Result<Self> {
        let l = orbital.l();
        if n == 0 || n <= l {
            return Err(Error::Validation(format!(
                "principal quantum number n={n} must exceed l={l}"
            )));
        }
        let allowed_low = (2 * l as i64 - 1).unsigned_abs() as u32;
        let allowed_high = 2 * l + 1;
        if twice_j != allowed_low && twice_j != allowed_high {
            return Err(Error::Validation(format!(
                "j={twice_j}/2 is not l ± 1/2 for l={l}"
            )));
        }
        Ok(Self {
            n,
            orbital,
            twice_j,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn l(&self) -> u32 {
        self.orbital.l()
    }

    pub fn orbital(&self) -> Orbital {
        self.orbital
    }

    pub fn twice_j(&self) -> u32 {
        self.twice_j
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    /// Expectation value of the orbital radius, `(3n² − l(l+1))·a₀/2`.
    pub fn mean_radius(&self, constants: &PhysicalConstants) -> f64 {
        mean_radius(self, constants)
    }
}

/// `⟨r⟩ = (3n² − l(l+1))·a₀/2` for a hydrogenic orbital.
pub fn mean_radius(state: &RydbergState, constants: &PhysicalConstants) -> f64 {
    let n = state.n as f64;
    let l = state.l() as f64;
    (3.0 * n * n - l * (l + 1.0)) * constants.bohr_radius / 2.0
}

impl fmt::Display for RydbergState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}/2", self.n, self.orbital.letter(), self.twice_j)
    }
}

impl FromStr for RydbergState {
    type Err = Error;

    /// Parses `60D5/2`. Also tolerates the LaTeX-ish `60D_{5/2}`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("cannot parse state label '{s}'"));
        let s_trim = s.trim();
        let digits_end = s_trim.find(|c: char| !c.is_ascii_digit()).ok_or_else(bad)?;
        if digits_end == 0 {
            return Err(bad());
        }
        let n: u32 = s_trim[..digits_end].parse().map_err(|_| bad())?;
        let mut rest = s_trim[digits_end..].chars();
        let orbital = match rest.next().ok_or_else(bad)?.to_ascii_uppercase() {
            'S' => Orbital::S,
            'P' => Orbital::P,
            'D' => Orbital::D,
            'F' => Orbital::F,
            _ => return Err(bad()),
        };
        let j_part: String = rest
            .as_str()
            .chars()
            .filter(|c| !matches!(c, '_' | '{' | '}'))
            .collect();
        let (num, den) = j_part.split_once('/').ok_or_else(bad)?;
        if den != "2" {
            return Err(bad());
        }
        let twice_j: u32 = num.parse().map_err(|_| bad())?;
        RydbergState::new(n, orbital, twice_j)
    }
}

impl Serialize for RydbergState {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RydbergState {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A dipole transition between two Rydberg states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub lower: RydbergState,
    pub upper: RydbergState,
    /// |μ| in C·m.
    pub dipole_moment: f64,
    /// Transition frequency in Hz.
    pub frequency: f64,
}

impl Transition {
    pub fn new(
        lower: RydbergState,
        upper: RydbergState,
        dipole_moment: f64,
        frequency: f64,
    ) -> Result<Self> {
        let t = Self {
            lower,
            upper,
            dipole_moment,
            frequency,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dipole_moment.is_finite() && self.dipole_moment > 0.0) {
            return Err(Error::Validation(format!(
                "dipole moment must be positive, got {}",
                self.dipole_moment
            )));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::Validation(format!(
                "transition frequency must be positive, got {}",
                self.frequency
            )));
        }
        if self.lower == self.upper {
            return Err(Error::Validation(
                "transition endpoints are identical".into(),
            ));
        }
        Ok(())
    }

    /// Angular detuning `2π(f_rf − f_transition)` in rad/s.
    pub fn detuning(&self, rf_frequency_hz: f64) -> f64 {
        detuning(self, rf_frequency_hz)
    }
}

/// `δ = 2π(f_rf − f_transition)`, rad/s.
pub fn detuning(transition: &Transition, rf_frequency_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * (rf_frequency_hz - transition.frequency)
}

/// Immutable-after-build table of transitions plus the constants block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateRegistry {
    transitions: Vec<Transition>,
    constants: PhysicalConstants,
}

fn state(label: &str) -> RydbergState {
    label.parse().expect("built-in state label is valid")
}

impl StateRegistry {
    pub fn new(constants: PhysicalConstants) -> Self {
        Self {
            transitions: Vec::new(),
            constants,
        }
    }

    /// Registry preloaded with the transitions the receiver experiments use.
    ///
    /// * `60D5/2 → 61P3/2`: 2.04e-26 C·m at 3.213 GHz (communication band).
    /// * `60D5/2 → 62P3/2`: 6.24e-27 C·m at 30.618 GHz (sensing band).
    /// * `56D5/2 → 57P3/2` at 12.01 GHz. Its dipole moment is not tabulated
    ///   with the frequency; the value here is the 60D entry scaled by
    ///   `(56/60)²` and should be treated as an estimate.
    ///
    /// The companion `56D → 52F3/2` line is not included: `F3/2` violates
    /// `j = l ± 1/2`, so no state with that label exists.
    pub fn with_defaults() -> Self {
        let entries = [
            ("60D5/2", "61P3/2", 2.04e-26, 3.213e9),
            ("60D5/2", "62P3/2", 6.24e-27, 30.618e9),
            (
                "56D5/2",
                "57P3/2",
                2.04e-26 * (56.0 / 60.0) * (56.0 / 60.0),
                12.01e9,
            ),
        ];
        entries
            .iter()
            .try_fold(Self::default(), |reg, &(lo, up, mu, f)| {
                reg.register_transition(Transition::new(state(lo), state(up), mu, f)?)
            })
            .expect("default registry entries are valid")
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Adds a transition, rejecting invalid entries and duplicate
    /// `(lower, upper)` pairs.
    pub fn register_transition(mut self, transition: Transition) -> Result<Self> {
        transition.validate()?;
        if self
            .transitions
            .iter()
            .any(|t| t.lower == transition.lower && t.upper == transition.upper)
        {
            return Err(Error::DuplicateEntry {
                lower: transition.lower.to_string(),
                upper: transition.upper.to_string(),
            });
        }
        self.transitions.push(transition);
        Ok(self)
    }

    /// Returns a copy of this registry without the given pair.
    pub fn without(&self, lower: &RydbergState, upper: &RydbergState) -> Self {
        Self {
            transitions: self
                .transitions
                .iter()
                .filter(|t| !(t.lower == *lower && t.upper == *upper))
                .copied()
                .collect(),
            constants: self.constants,
        }
    }

    pub fn lookup_transition(
        &self,
        lower: &RydbergState,
        upper: &RydbergState,
    ) -> Result<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.lower == *lower && t.upper == *upper)
            .ok_or_else(|| Error::NotFound(format!("transition {lower} -> {upper}")))
    }

    /// Convenience lookup by spectroscopic labels.
    pub fn lookup(&self, lower: &str, upper: &str) -> Result<&Transition> {
        self.lookup_transition(&lower.parse()?, &upper.parse()?)
    }

    /// Reads `lower,upper,dipole_Cm,freq_Hz` rows (header required).
    pub fn from_csv_reader<R: Read>(reader: R, constants: PhysicalConstants) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["lower", "upper", "dipole_Cm", "freq_Hz"];
        if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Validation(format!(
                "transition table header must be {}, got {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut reg = Self::new(constants);
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let field = |k: usize| record.get(k).unwrap_or_default();
            let num = |k: usize| -> Result<f64> {
                field(k).parse::<f64>().map_err(|_| {
                    Error::Validation(format!("row {}: '{}' is not a number", i + 1, field(k)))
                })
            };
            let t = Transition::new(field(0).parse()?, field(1).parse()?, num(2)?, num(3)?)?;
            reg = reg.register_transition(t)?;
        }
        Ok(reg)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, constants: PhysicalConstants) -> Result<Self> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file, constants)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lower", "upper", "dipole_Cm", "freq_Hz"])?;
        for t in &self.transitions {
            w.write_record([
                t.lower.to_string(),
                t.upper.to_string(),
                t.dipole_moment.to_string(),
                t.frequency.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Approximate level energies from user-supplied quantum defects.
///
/// `E(n l_j) = −R / (n − δ_{l,j})²` in frequency units. Accuracy is limited by
/// the supplied defects (the `n`-dependence of δ is ignored), so the result is
/// an estimate, never a substitute for tabulated transition frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumDefectModel {
    /// Species Rydberg constant in Hz.
    pub rydberg_hz: f64,
    /// `(l, 2j, δ)` triples.
    pub defects: Vec<(u32, u32, f64)>,
}

impl QuantumDefectModel {
    /// Caesium `nP3/2` and `nD5/2` defects (leading-order Ritz terms).
    pub fn caesium_p32_d52() -> Self {
        Self {
            rydberg_hz: 3.289_828_3e15,
            defects: vec![(1, 3, 3.558_959_9), (2, 5, 2.466_314_4)],
        }
    }

    pub fn defect(&self, state: &RydbergState) -> Result<f64> {
        self.defects
            .iter()
            .find(|(l, tj, _)| *l == state.l() && *tj == state.twice_j())
            .map(|&(_, _, d)| d)
            .ok_or_else(|| Error::NotFound(format!("quantum defect for {state}")))
    }

    pub fn effective_n(&self, state: &RydbergState) -> Result<f64> {
        let n_eff = state.n() as f64 - self.defect(state)?;
        if n_eff <= 0.0 {
            return Err(Error::Validation(format!(
                "effective n of {state} is not positive"
            )));
        }
        Ok(n_eff)
    }

    /// Binding energy in Hz (negative).
    pub fn term_hz(&self, state: &RydbergState) -> Result<f64> {
        let n_eff = self.effective_n(state)?;
        Ok(-self.rydberg_hz / (n_eff * n_eff))
    }

    /// Estimated |E_upper − E_lower| in Hz.
    pub fn transition_frequency(&self, lower: &RydbergState, upper: &RydbergState) -> Result<f64> {
        Ok((self.term_hz(upper)? - self.term_hz(lower)?).abs())
    }
}
