//! Experiment orchestration: configuration, the individual experiments and
//! their CSV/SVG outputs. Every output is a pure function of the config and
//! the seed.

pub mod config;
pub mod figures;
pub mod link;
pub mod msac;
pub mod multiband;
pub mod svg;
pub mod vibration;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{BandConfig, BandRole, ExperimentConfig, Modulation};
pub use figures::{run_eit_spectrum, run_mimo, run_sensitivity_figure, run_simo, MimoRow, SimoRow};
pub use link::{run_link, LinkRow};
pub use msac::{msac_gaps, run_msac, MsacGaps, MsacRow};
pub use multiband::{run_multiband, BandBer, MultibandResult};
pub use vibration::{run_vibration_sensing, VibrationOutcome};

use crate::error::{Error, Result};
use crate::registry::StateRegistry;
use svg::{Chart, Scale, Series};

/// Independent sub-seed `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    EitSpectrum,
    Sensitivity,
    Link,
    Mimo,
    Multiband,
    Msac,
    Vibration,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::EitSpectrum,
        Experiment::Sensitivity,
        Experiment::Link,
        Experiment::Mimo,
        Experiment::Multiband,
        Experiment::Msac,
        Experiment::Vibration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::EitSpectrum => "eit-spectrum",
            Experiment::Sensitivity => "sensitivity",
            Experiment::Link => "link",
            Experiment::Mimo => "mimo",
            Experiment::Multiband => "multiband",
            Experiment::Msac => "msac",
            Experiment::Vibration => "vibration",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    CsvSvg,
}

/// Files produced by a run, plus one-line summaries for the terminal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

impl Report {
    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    fn svg(&mut self, name: &str, chart: &Chart) {
        self.files
            .push((name.to_string(), chart.render().into_bytes()));
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                std::fs::write(&path, bytes)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                Ok(path)
            })
            .collect()
    }
}

#[derive(Serialize)]
struct MsacCsvRow {
    ptx_dbm: f64,
    se_rare: f64,
    se_cr1: f64,
    nmse_rare_db: f64,
    nmse_cr2_db: f64,
}

#[derive(Serialize)]
struct VibrationCsvRow {
    time_s: f64,
    displacement_m: f64,
    rare_estimate_m: f64,
    classic_estimate_m: f64,
}

#[derive(Serialize)]
struct NmseSummaryRow<'a> {
    receiver: &'a str,
    nmse_db: f64,
}

fn chart(title: &str, x: &str, y: &str, xs: Scale, ys: Scale, series: Vec<Series>) -> Chart {
    Chart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        x_scale: xs,
        y_scale: ys,
        series,
    }
}

/// Runs `experiment` and renders its outputs.
pub fn run(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    seed: u64,
    format: OutputFormat,
) -> Result<Report> {
    if let Some(id) = &cfg.experiment {
        if id != experiment.name() {
            return Err(Error::Config(format!(
                "config is for experiment '{id}', not '{experiment}'"
            )));
        }
    }
    let registry: StateRegistry = cfg.registry()?;
    let svg = format == OutputFormat::CsvSvg;
    let mut report = Report::default();
    match experiment {
        Experiment::EitSpectrum => {
            let spec = run_eit_spectrum(cfg)?;
            let mut buf = Vec::new();
            spec.trace.write_csv(&mut buf)?;
            report.files.push(("eit_spectrum.csv".into(), buf));
            report.summary.push(match spec.splitting_hz {
                Some(s) => format!("splitting {s:.6e} Hz"),
                None => "no resolved splitting".into(),
            });
            if svg {
                let x: Vec<f64> = spec
                    .trace
                    .detunings()
                    .iter()
                    .map(|d| d / (2.0 * std::f64::consts::PI))
                    .collect();
                report.svg(
                    "eit_spectrum.svg",
                    &chart(
                        "EIT probe transmission",
                        "probe detuning (Hz)",
                        "transmission",
                        Scale::Linear,
                        Scale::Linear,
                        vec![Series::new("T", &x, spec.trace.transmission())],
                    ),
                );
            }
        }
        Experiment::Sensitivity => {
            let rows = run_sensitivity_figure(cfg, &registry)?;
            report.csv("sensitivity.csv", &rows)?;
            let worst = rows
                .iter()
                .map(|r| crate::sensitivity::advantage_db(r.sql_vpm_rthz, r.halfwave_vpm_rthz))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            report.summary.push(format!(
                "smallest SQL advantage over half-wave: {worst:.2} dB"
            ));
            if svg {
                let f: Vec<f64> = rows.iter().map(|r| r.freq_hz).collect();
                let col = |g: fn(&crate::sensitivity::SensitivityRow) -> f64| {
                    rows.iter().map(g).collect::<Vec<_>>()
                };
                report.svg(
                    "sensitivity.svg",
                    &chart(
                        "Field sensitivity limits",
                        "frequency (Hz)",
                        "sensitivity (V/m/sqrt(Hz))",
                        Scale::Log,
                        Scale::Log,
                        vec![
                            Series::new("SQL", &f, &col(|r| r.sql_vpm_rthz)),
                            Series::new("half-wave dipole", &f, &col(|r| r.halfwave_vpm_rthz)),
                            Series::new("fixed dipole", &f, &col(|r| r.fixed_vpm_rthz)),
                        ],
                    ),
                );
            }
        }
        Experiment::Link => {
            let rows = run_link(cfg, &registry, seed)?;
            report.csv("link.csv", &rows)?;
            if svg {
                let x: Vec<f64> = rows.iter().map(|r| r.es_n0_db).collect();
                report.svg(
                    "link.svg",
                    &chart(
                        "Heterodyne PSK link",
                        "Es/N0 (dB)",
                        "error rate",
                        Scale::Linear,
                        Scale::Log,
                        vec![
                            Series::new("SER", &x, &rows.iter().map(|r| r.ser).collect::<Vec<_>>()),
                            Series::new(
                                "SER theory",
                                &x,
                                &rows.iter().map(|r| r.ser_theory).collect::<Vec<_>>(),
                            ),
                            Series::new("BER", &x, &rows.iter().map(|r| r.ber).collect::<Vec<_>>()),
                        ],
                    ),
                );
            }
        }
        Experiment::Mimo => {
            let rows = run_mimo(cfg, seed)?;
            report.csv("mimo.csv", &rows)?;
            let simo = run_simo(cfg, seed)?;
            report.csv("simo.csv", &simo)?;
            if svg {
                let x: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
                report.svg(
                    "mimo.svg",
                    &chart(
                        "Magnitude-only MIMO detection",
                        "SNR (dB)",
                        "NMSE (dB)",
                        Scale::Linear,
                        Scale::Linear,
                        vec![Series::new(
                            "GS",
                            &x,
                            &rows.iter().map(|r| r.nmse_db).collect::<Vec<_>>(),
                        )],
                    ),
                );
                let k: Vec<f64> = simo.iter().map(|r| r.branches as f64).collect();
                report.svg(
                    "simo.svg",
                    &chart(
                        "MRC gain",
                        "receivers",
                        "post-combining SNR / single-branch SNR",
                        Scale::Linear,
                        Scale::Linear,
                        vec![
                            Series::new(
                                "measured",
                                &k,
                                &simo.iter().map(|r| r.snr_gain).collect::<Vec<_>>(),
                            ),
                            Series::new("K", &k, &k),
                        ],
                    ),
                );
            }
        }
        Experiment::Multiband => {
            let out = run_multiband(cfg, &registry, seed)?;
            report.csv("multiband.csv", &out.rows)?;
            for r in &out.rows {
                report
                    .summary
                    .push(format!("band {:.6e} Hz: BER {:.3e}", r.band_hz, r.ber));
            }
            if svg {
                let x: Vec<f64> = out.rows.iter().map(|r| r.band_hz).collect();
                report.svg(
                    "multiband.svg",
                    &chart(
                        "Per-band BER",
                        "band (Hz)",
                        "BER",
                        Scale::Log,
                        Scale::Linear,
                        vec![Series::new(
                            "BER",
                            &x,
                            &out.rows.iter().map(|r| r.ber).collect::<Vec<_>>(),
                        )],
                    ),
                );
            }
        }
        Experiment::Msac => {
            let rows = run_msac(cfg, &registry, seed)?;
            let csv_rows: Vec<MsacCsvRow> = rows
                .iter()
                .map(|r| MsacCsvRow {
                    ptx_dbm: r.ptx_dbm,
                    se_rare: r.se_rare,
                    se_cr1: r.se_cr1,
                    nmse_rare_db: r.nmse_rare_db,
                    nmse_cr2_db: r.nmse_cr2_db,
                })
                .collect();
            report.csv("msac.csv", &csv_rows)?;
            let gaps = msac_gaps(&rows)?;
            report.summary.push(format!(
                "SE gap {:.3} bit/s/Hz, NMSE gap {:.2} dB (implies {:.3} bit/s/Hz)",
                gaps.se_gap, gaps.nmse_gap_db, gaps.implied_se_gap
            ));
            if svg {
                let p: Vec<f64> = rows.iter().map(|r| r.ptx_dbm).collect();
                let col = |g: fn(&MsacRow) -> f64| rows.iter().map(g).collect::<Vec<_>>();
                report.svg(
                    "msac_se.svg",
                    &chart(
                        "Communication link",
                        "transmit power (dBm)",
                        "spectral efficiency (bit/s/Hz)",
                        Scale::Linear,
                        Scale::Linear,
                        vec![
                            Series::new("RARE", &p, &col(|r| r.se_rare)),
                            Series::new("CR1", &p, &col(|r| r.se_cr1)),
                        ],
                    ),
                );
                report.svg(
                    "msac_nmse.svg",
                    &chart(
                        "Vibration sensing",
                        "transmit power (dBm)",
                        "NMSE (dB)",
                        Scale::Linear,
                        Scale::Linear,
                        vec![
                            Series::new("RARE", &p, &col(|r| r.nmse_rare_db)),
                            Series::new("CR2", &p, &col(|r| r.nmse_cr2_db)),
                        ],
                    ),
                );
            }
        }
        Experiment::Vibration => {
            let out = run_vibration_sensing(cfg, &registry, seed)?;
            let tr = &out.traces;
            let rows: Vec<VibrationCsvRow> = (0..tr.rare.time_s.len())
                .map(|i| VibrationCsvRow {
                    time_s: tr.rare.time_s[i],
                    displacement_m: tr.rare.truth_m[i],
                    rare_estimate_m: tr.rare.estimate_m[i],
                    classic_estimate_m: tr.classic.estimate_m[i],
                })
                .collect();
            report.csv("vibration.csv", &rows)?;
            report.csv(
                "vibration_nmse.csv",
                &[
                    NmseSummaryRow {
                        receiver: "rare",
                        nmse_db: out.nmse_rare_db,
                    },
                    NmseSummaryRow {
                        receiver: "classic",
                        nmse_db: out.nmse_classic_db,
                    },
                ],
            )?;
            report.summary.push(format!(
                "NMSE RARE {:.2} dB, classic {:.2} dB",
                out.nmse_rare_db, out.nmse_classic_db
            ));
            if svg {
                report.svg(
                    "vibration.svg",
                    &chart(
                        "Target displacement",
                        "time (s)",
                        "displacement (m)",
                        Scale::Linear,
                        Scale::Linear,
                        vec![
                            Series::new("true", &tr.rare.time_s, &tr.rare.truth_m),
                            Series::new("RARE", &tr.rare.time_s, &tr.rare.estimate_m),
                            Series::new("classic", &tr.rare.time_s, &tr.classic.estimate_m),
                        ],
                    ),
                );
            }
        }
    }
    Ok(report)
}
