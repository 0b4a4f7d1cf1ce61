//! Named experiment grids.

use std::str::FromStr;

use crate::mesh::{MeshRule, Scenario};
use crate::precond::PrecondKind;
use crate::{Error, Result};

use super::{run_experiment, ExperimentConfig, Nesting, ResultRow, RhsKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Two-level HRAS and ImpHRAS with their one-level companions, pollution-free mesh.
    Table1,
    /// ImpHRAS and ImpRAS1 on an absorptive problem with `eps = k^1.2`.
    Table2,
    /// HRAS with the coarse problem solved by inner GMRES, for a range of absorptions.
    Table3,
    /// Impedance methods on the ten-points-per-wavelength mesh.
    Table4,
    /// ImpRAS1 with local problems solved by inner GMRES.
    Table5Multilevel,
    /// Inner-outer HRAS for a piecewise-constant wave speed.
    Table6Variable,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Table1,
        Preset::Table2,
        Preset::Table3,
        Preset::Table4,
        Preset::Table5Multilevel,
        Preset::Table6Variable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
            Preset::Table4 => "table4",
            Preset::Table5Multilevel => "table5_multilevel",
            Preset::Table6Variable => "table6_variable",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::Unknown(format!("preset {s}")))
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn default_ks(preset: Preset) -> Vec<f64> {
    match preset {
        Preset::Table1 | Preset::Table2 | Preset::Table3 => vec![20.0, 40.0, 60.0],
        Preset::Table4 => vec![60.0, 80.0, 100.0, 120.0, 140.0, 160.0],
        Preset::Table5Multilevel => vec![100.0, 120.0, 140.0, 160.0],
        Preset::Table6Variable => vec![10.0, 20.0, 40.0],
    }
}

/// Solver settings shared by every row of a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub rel_tol: f64,
    pub inner_tol: f64,
    pub max_iters: usize,
    pub allow_large: bool,
    pub parallel: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-6, inner_tol: 0.5, max_iters: 200, allow_large: false, parallel: true }
    }
}

pub fn expand_preset(preset: Preset, ks: &[f64], settings: &RunSettings) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    let mut push = |k: f64, rule: MeshRule, kind: PrecondKind, alpha: f64, beta: f64, f: &dyn Fn(&mut ExperimentConfig)| {
        let mut c = ExperimentConfig::new(k, rule, kind, alpha, beta);
        c.preset = preset.name().into();
        c.rel_tol = settings.rel_tol;
        c.inner_tol = settings.inner_tol;
        c.max_iters = settings.max_iters;
        c.allow_large = settings.allow_large;
        c.parallel = settings.parallel;
        f(&mut c);
        out.push(c);
    };
    use PrecondKind::*;
    let none = |_: &mut ExperimentConfig| {};
    for &k in ks {
        match preset {
            Preset::Table1 => {
                for alpha in [1.0, 0.6] {
                    for beta in [1.0, 1.2, 2.0] {
                        for kind in [Hras, Ras1, ImpHras, ImpRas1] {
                            push(k, MeshRule::PollutionFree, kind, alpha, beta, &none);
                        }
                    }
                }
            }
            Preset::Table2 => {
                for kind in [ImpHras, ImpRas1] {
                    push(k, MeshRule::PointsPerWavelength, kind, 0.5, 1.2, &|c| c.eps_prob = k.powf(1.2));
                }
            }
            Preset::Table3 => {
                for beta in [0.0, 0.4, 0.8, 1.0, 1.2, 1.6, 2.0] {
                    push(k, MeshRule::PollutionFree, Hras, 1.0, beta, &|c| c.nesting = Nesting::Coarse(0.5));
                }
            }
            Preset::Table4 => {
                for alpha in [0.5, 0.4] {
                    for kind in [ImpHras, ImpRas1] {
                        push(k, MeshRule::PointsPerWavelength, kind, alpha, 1.0, &|c| c.rhs = RhsKind::Ones);
                    }
                }
            }
            Preset::Table5Multilevel => {
                for beta in [1.2, 1.6] {
                    push(k, MeshRule::PointsPerWavelength, ImpRas1, 0.4, beta, &|c| {
                        c.rhs = RhsKind::Ones;
                        c.nesting = Nesting::Local(0.8);
                    });
                }
            }
            Preset::Table6Variable => {
                for c_star in [1.5, 1.0, 0.66] {
                    for scenario in [Scenario::CenteredSquare, Scenario::ShiftedSquare] {
                        for beta in [1.0, 1.2, 1.6, 1.8] {
                            push(k, MeshRule::PollutionFree, Hras, 1.0, beta, &|c| {
                                c.rhs = RhsKind::Ones;
                                c.nesting = Nesting::Coarse(0.5);
                                c.scenario = scenario;
                                c.c_star = c_star;
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Run every configuration of a preset. Rows that fail to build or solve are
/// logged and recorded as non-converged.
pub fn run_table(preset: Preset, ks: &[f64], settings: &RunSettings) -> Vec<ResultRow> {
    expand_preset(preset, ks, settings)
        .iter()
        .map(|c| {
            run_experiment(c).unwrap_or_else(|err| {
                log::error!("{} k={} {}: {err}", c.preset, c.k, c.precond);
                ResultRow::failed(c)
            })
        })
        .collect()
}
