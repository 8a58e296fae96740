use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported level count (N² = 64 unknowns in the dense solve).
pub const MAX_LEVELS: usize = 8;

/// A coherent drive between two levels (0-based indices).
///
/// `detuning` is the detuning of this field alone; the rotating-frame energy
/// of a level is the (negated) sum of detunings along the coupling path from
/// level 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub lower: usize,
    pub upper: usize,
    /// Rabi frequency, rad/s.
    pub rabi: Complex64,
    /// rad/s.
    pub detuning: f64,
}

impl Coupling {
    pub fn new(lower: usize, upper: usize, rabi: f64, detuning: f64) -> Self {
        Self {
            lower,
            upper,
            rabi: Complex64::new(rabi, 0.0),
            detuning,
        }
    }
}

/// Spontaneous decay channel `|to⟩⟨from|` at `rate` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Decay-rate defaults for the Rb/Cs ladder: a short-lived intermediate
/// state and long-lived Rydberg states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayRates {
    /// `|2⟩ → |1⟩`, rad/s.
    pub intermediate: f64,
    /// Every Rydberg level to the level it is coupled down to, rad/s.
    pub rydberg: f64,
}

impl Default for DecayRates {
    fn default() -> Self {
        Self {
            intermediate: 2.0 * PI * 6.07e6,
            rydberg: 2.0 * PI * 10e3,
        }
    }
}

impl DecayRates {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            intermediate: self.intermediate * factor,
            rydberg: self.rydberg * factor,
        }
    }
}

/// An N-level atom with coherent couplings and spontaneous decays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSystem {
    num_levels: usize,
    couplings: Vec<Coupling>,
    decays: Vec<Decay>,
}

impl LevelSystem {
    pub fn new(num_levels: usize, couplings: Vec<Coupling>, decays: Vec<Decay>) -> Result<Self> {
        let sys = Self {
            num_levels,
            couplings,
            decays,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Ladder `0 → 1 → … → N−1`. `rabi[k]` and `detuning[k]` drive `k → k+1`;
    /// `decay[k]` is the rate of `k+1 → k`.
    pub fn ladder(rabi: &[f64], detuning: &[f64], decay: &[f64]) -> Result<Self> {
        let links = rabi.len();
        if detuning.len() != links || decay.len() != links {
            return Err(Error::Validation(
                "ladder needs one Rabi frequency, detuning and decay rate per link".into(),
            ));
        }
        let couplings = (0..links)
            .map(|k| Coupling::new(k, k + 1, rabi[k], detuning[k]))
            .collect();
        let decays = (0..links)
            .map(|k| Decay {
                from: k + 1,
                to: k,
                rate: decay[k],
            })
            .collect();
        Self::new(links + 1, couplings, decays)
    }

    /// Probe (0↔1) and coupling (1↔2) lasers, then one RF transition per entry
    /// of `rf` out of level 2. Each entry is `(Ω_rf, Δ_rf)`; with a single
    /// entry this is the standard four-level ladder.
    pub fn eit_with_rf(
        probe: f64,
        probe_detuning: f64,
        coupling: f64,
        coupling_detuning: f64,
        rf: &[(f64, f64)],
        rates: DecayRates,
    ) -> Result<Self> {
        let mut couplings = vec![
            Coupling::new(0, 1, probe, probe_detuning),
            Coupling::new(1, 2, coupling, coupling_detuning),
        ];
        let mut decays = vec![
            Decay {
                from: 1,
                to: 0,
                rate: rates.intermediate,
            },
            Decay {
                from: 2,
                to: 1,
                rate: rates.rydberg,
            },
        ];
        for (b, &(omega, delta)) in rf.iter().enumerate() {
            couplings.push(Coupling::new(2, 3 + b, omega, delta));
            decays.push(Decay {
                from: 3 + b,
                to: 2,
                rate: rates.rydberg,
            });
        }
        Self::new(3 + rf.len(), couplings, decays)
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn decays(&self) -> &[Decay] {
        &self.decays
    }

    /// Index of the coupling between `a` and `b` (either order).
    pub fn coupling_index(&self, a: usize, b: usize) -> Option<usize> {
        self.couplings
            .iter()
            .position(|c| (c.lower == a && c.upper == b) || (c.lower == b && c.upper == a))
    }

    pub fn with_rabi(&self, index: usize, rabi: Complex64) -> Self {
        let mut s = self.clone();
        s.couplings[index].rabi = rabi;
        s
    }

    pub fn with_detuning(&self, index: usize, detuning: f64) -> Self {
        let mut s = self.clone();
        s.couplings[index].detuning = detuning;
        s
    }

    pub fn set_rabi(&mut self, index: usize, rabi: Complex64) {
        self.couplings[index].rabi = rabi;
    }

    pub fn set_detuning(&mut self, index: usize, detuning: f64) {
        self.couplings[index].detuning = detuning;
    }

    /// Multiplies every decay rate by `factor`.
    pub fn with_scaled_decays(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for d in &mut s.decays {
            d.rate *= factor;
        }
        s
    }

    /// Smallest strictly positive decay rate.
    pub fn min_decay_rate(&self) -> Option<f64> {
        self.decays
            .iter()
            .map(|d| d.rate)
            .filter(|&r| r > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Largest characteristic rate `max(|Ω|, Γ, |Δ|)`; integration steps
    /// should stay below `0.1 / max_rate()`.
    pub fn max_rate(&self) -> f64 {
        let energies = self.level_energies().unwrap_or_default();
        self.couplings
            .iter()
            .flat_map(|c| [c.rabi.norm(), c.detuning.abs()])
            .chain(self.decays.iter().map(|d| d.rate))
            .chain(energies.iter().map(|e| e.abs()))
            .fold(0.0, f64::max)
    }

    /// Recommended explicit step, `0.1 / max_rate()`.
    pub fn stable_step(&self) -> f64 {
        0.1 / self.max_rate().max(f64::MIN_POSITIVE)
    }

    /// Rotating-frame diagonal: level energies (rad/s) obtained by walking the
    /// coupling tree from level 0, subtracting each field's detuning on the way up.
    pub fn level_energies(&self) -> Result<Vec<f64>> {
        let n = self.num_levels;
        let mut energy = vec![0.0; n];
        let mut seen = vec![false; n];
        let mut used = vec![false; self.couplings.len()];
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(a) = queue.pop_front() {
                for (ci, c) in self.couplings.iter().enumerate() {
                    if used[ci] || (c.lower != a && c.upper != a) {
                        continue;
                    }
                    used[ci] = true;
                    let (other, e) = if c.lower == a {
                        (c.upper, energy[a] - c.detuning)
                    } else {
                        (c.lower, energy[a] + c.detuning)
                    };
                    if seen[other] {
                        return Err(Error::Validation(
                            "coupling graph contains a loop; rotating frame is not defined".into(),
                        ));
                    }
                    seen[other] = true;
                    energy[other] = e;
                    queue.push_back(other);
                }
            }
        }
        Ok(energy)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_levels;
        if !(2..=MAX_LEVELS).contains(&n) {
            return Err(Error::Validation(format!(
                "number of levels must be in 2..={MAX_LEVELS}, got {n}"
            )));
        }
        for (i, c) in self.couplings.iter().enumerate() {
            if c.lower >= n || c.upper >= n || c.lower == c.upper {
                return Err(Error::Validation(format!(
                    "coupling ({}, {}) does not join two distinct levels of {n}",
                    c.lower, c.upper
                )));
            }
            if !(c.rabi.re.is_finite() && c.rabi.im.is_finite() && c.detuning.is_finite()) {
                return Err(Error::Validation(
                    "coupling parameters must be finite".into(),
                ));
            }
            let dup = self.couplings[..i].iter().any(|o| {
                (o.lower == c.lower && o.upper == c.upper)
                    || (o.lower == c.upper && o.upper == c.lower)
            });
            if dup {
                return Err(Error::Validation(format!(
                    "more than one coupling between levels {} and {}",
                    c.lower, c.upper
                )));
            }
        }
        self.level_energies()?;
        for d in &self.decays {
            if d.from >= n || d.to >= n || d.from == d.to {
                return Err(Error::Validation(format!(
                    "decay ({} -> {}) does not join two distinct levels of {n}",
                    d.from, d.to
                )));
            }
            if !(d.rate.is_finite() && d.rate >= 0.0) {
                return Err(Error::Validation(format!(
                    "decay rate {} is negative",
                    d.rate
                )));
            }
        }
        if has_cycle(n, &self.decays) {
            return Err(Error::Validation("decay graph is cyclic".into()));
        }
        Ok(())
    }
}

fn has_cycle(n: usize, decays: &[Decay]) -> bool {
    // Kahn's algorithm over channels with a non-zero rate.
    let mut indegree = vec![0usize; n];
    for d in decays.iter().filter(|d| d.rate > 0.0) {
        indegree[d.to] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&k| indegree[k] == 0).collect();
    let mut visited = 0;
    while let Some(k) = stack.pop() {
        visited += 1;
        for d in decays.iter().filter(|d| d.rate > 0.0 && d.from == k) {
            indegree[d.to] -= 1;
            if indegree[d.to] == 0 {
                stack.push(d.to);
            }
        }
    }
    visited != n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_builds_cumulative_energies() {
        let sys =
            LevelSystem::ladder(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(
            sys.level_energies().unwrap(),
            vec![0.0, -10.0, -30.0, -60.0]
        );
    }

    #[test]
    fn star_topology_energies() {
        let sys = LevelSystem::eit_with_rf(
            1.0,
            1.0,
            1.0,
            2.0,
            &[(1.0, 3.0), (1.0, 5.0)],
            DecayRates::default(),
        )
        .unwrap();
        assert_eq!(
            sys.level_energies().unwrap(),
            vec![0.0, -1.0, -3.0, -6.0, -8.0]
        );
    }

    #[test]
    fn rejects_invalid_systems() {
        assert!(LevelSystem::new(1, vec![], vec![]).is_err());
        assert!(LevelSystem::new(9, vec![], vec![]).is_err());
        assert!(LevelSystem::new(2, vec![Coupling::new(0, 2, 1.0, 0.0)], vec![]).is_err());
        assert!(LevelSystem::new(2, vec![Coupling::new(1, 1, 1.0, 0.0)], vec![]).is_err());
        let dup = vec![Coupling::new(0, 1, 1.0, 0.0), Coupling::new(1, 0, 1.0, 0.0)];
        assert!(LevelSystem::new(2, dup, vec![]).is_err());
        let neg = vec![Decay {
            from: 1,
            to: 0,
            rate: -1.0,
        }];
        assert!(LevelSystem::new(2, vec![], neg).is_err());
        let cyc = vec![
            Decay {
                from: 1,
                to: 0,
                rate: 1.0,
            },
            Decay {
                from: 0,
                to: 1,
                rate: 1.0,
            },
        ];
        assert!(LevelSystem::new(2, vec![], cyc).is_err());
        let loop_ = vec![
            Coupling::new(0, 1, 1.0, 0.0),
            Coupling::new(1, 2, 1.0, 0.0),
            Coupling::new(0, 2, 1.0, 0.0),
        ];
        assert!(LevelSystem::new(3, loop_, vec![]).is_err());
    }

    #[test]
    fn rates_helpers() {
        let sys = LevelSystem::ladder(&[5.0], &[-7.0], &[2.0]).unwrap();
        assert_eq!(sys.max_rate(), 7.0);
        assert_eq!(sys.min_decay_rate(), Some(2.0));
        assert_eq!(sys.with_scaled_decays(2.0).decays()[0].rate, 4.0);
        assert_eq!(sys.coupling_index(1, 0), Some(0));
    }
}
