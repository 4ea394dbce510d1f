use std::f64::consts::PI;

use rayon::prelude::*;

use irwa_core::averaging::{averaged_couplings, CouplingPair, SystemParams};
use irwa_core::dispersive::{
    coupling_sweep, evolution_2q, exact_shift_oracle_with, local_z_fidelity, sqrt_iswap, DispersiveShifts, SmallParams,
    DISPERSIVE_THRESHOLD,
};
use irwa_core::models::{ModelKind, MultiQubitParams};
use irwa_core::perturbation::{jc_level, second_order};
use irwa_core::spectra::{free_labels, track_labels, TrackingOptions};
use irwa_core::Error;

use crate::config::{Command, Grid, SweepAxis, SweepConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub flag: Option<String>,
}

impl Row {
    fn ok(cells: Vec<Cell>) -> Self {
        Self { cells, flag: None }
    }

    /// Leading cells kept, the remaining `width - lead.len()` data cells left empty.
    fn failed(lead: Vec<Cell>, width: usize, reason: impl Into<String>) -> Self {
        let mut cells = lead;
        cells.resize(width, Cell::Empty);
        Self {
            cells,
            flag: Some(reason.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.flag.is_some()).count()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = self.header.clone();
        header.push("flag".into());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut record: Vec<String> = row.cells.iter().map(format_cell).collect();
            record.push(row.flag.clone().unwrap_or_default());
            w.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Twelve significant digits; negative zero printed as zero.
pub fn format_number(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Num(x) => format_number(*x),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub table: Table,
    pub warnings: Vec<String>,
}

pub fn execute(cfg: &SweepConfig) -> Result<Report, Error> {
    match cfg.command {
        Command::Cutoff => cutoff(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Dispersive => dispersive(cfg),
        Command::Twoqubit => twoqubit(cfg),
        Command::Evolve => evolve(cfg),
    }
}

fn tracking_options(cfg: &SweepConfig) -> TrackingOptions {
    TrackingOptions {
        fock: cfg.fock,
        ..TrackingOptions::default()
    }
}

fn params_at(cfg: &SweepConfig, g: f64) -> Result<SystemParams, Error> {
    cfg.detuning.params(cfg.omega_r, g)
}

fn cutoff(cfg: &SweepConfig) -> Result<Report, Error> {
    let mut table = Table::new(&["g_over_wr", "g_r", "g_ar", "ratio"]);
    let width = table.header.len();
    table.rows = cfg
        .g_grid
        .points()
        .par_iter()
        .map(|&g| {
            let x = Cell::Num(g / cfg.omega_r);
            let pair = match params_at(cfg, g).and_then(|p| averaged_couplings(&p, &cfg.cutoff)) {
                Ok(pair) => pair,
                Err(e) => return Row::failed(vec![x], width, e.to_string()),
            };
            let lead = vec![x, Cell::Num(pair.g_r), Cell::Num(pair.g_ar)];
            match pair.ratio() {
                Some(r) => Row::ok([lead, vec![Cell::Num(r)]].concat()),
                None => Row::failed(lead, width, "ratio undefined: g_r = 0"),
            }
        })
        .collect();
    Ok(Report {
        table,
        warnings: Vec::new(),
    })
}

fn spectrum(cfg: &SweepConfig) -> Result<Report, Error> {
    let mut table = Table::new(&["g_over_wr", "level_label", "E_jc", "E_qrm_exact", "E_irwa_pt2"]);
    let width = table.header.len();
    let grid = cfg.g_grid.points();
    let params: Vec<Result<SystemParams, Error>> = grid.iter().map(|&g| params_at(cfg, g)).collect();
    let valid: Vec<SystemParams> = params.iter().filter_map(|p| p.as_ref().ok().copied()).collect();
    let Some(first) = valid.first() else {
        table.rows = grid
            .iter()
            .zip(&params)
            .map(|(&g, p)| {
                let reason = p.as_ref().err().map(|e| e.to_string()).unwrap_or_default();
                Row::failed(vec![Cell::Num(g / cfg.omega_r)], width, reason)
            })
            .collect();
        return Ok(Report {
            table,
            warnings: Vec::new(),
        });
    };
    let labels = free_labels(first, cfg.levels);
    let tracked = track_labels(&valid, ModelKind::Rabi, &cfg.cutoff, &labels, &tracking_options(cfg))?;

    let mut k = 0;
    for (&g, p) in grid.iter().zip(&params) {
        let x = Cell::Num(g / cfg.omega_r);
        let p = match p {
            Ok(p) => p,
            Err(e) => {
                for l in &labels {
                    table.rows.push(Row::failed(
                        vec![x.clone(), Cell::Text(l.to_string())],
                        width,
                        e.to_string(),
                    ));
                }
                continue;
            }
        };
        let averaged = averaged_couplings(p, &cfg.cutoff);
        for &label in &labels {
            let lead = vec![x.clone(), Cell::Text(label.to_string())];
            let e_jc = jc_level(label, p, CouplingPair::new(p.g, 0.0));
            let e_qrm = tracked.energy(label, k).expect("tracked label");
            let mut flags = Vec::new();
            if tracked.flags.iter().any(|f| f.index == k && f.label == label) {
                flags.push("ambiguous level tracking".to_string());
            }
            let pt2 = averaged
                .clone()
                .and_then(|c| Ok(jc_level(label, p, c) + second_order(label, p, c)?));
            let pt2_cell = match pt2 {
                Ok(e) => Cell::Num(e),
                Err(e) => {
                    flags.push(e.to_string());
                    Cell::Empty
                }
            };
            table.rows.push(Row {
                cells: [lead, vec![Cell::Num(e_jc), Cell::Num(e_qrm), pt2_cell]].concat(),
                flag: (!flags.is_empty()).then(|| flags.join("; ")),
            });
        }
        k += 1;
    }
    Ok(Report {
        table,
        warnings: Vec::new(),
    })
}

fn dispersive(cfg: &SweepConfig) -> Result<Report, Error> {
    let x_name = match cfg.axis {
        SweepAxis::G => "g_over_wr",
        SweepAxis::Delta => "delta_over_wr",
    };
    let mut table = Table::new(&[
        x_name,
        "chi_rwa",
        "chi_nrwa",
        "chi_irwa",
        "chi_exact_qrm",
        "chi_exact_jc",
    ]);
    let width = table.header.len();
    let xs = match cfg.axis {
        SweepAxis::G => cfg.g_grid.points(),
        SweepAxis::Delta => cfg.delta_grid.points(),
    };
    let opts = tracking_options(cfg);
    let results: Vec<(Row, bool)> = xs
        .par_iter()
        .map(|&x| {
            let lead = vec![Cell::Num(x / cfg.omega_r)];
            let p = match cfg.axis {
                SweepAxis::G => params_at(cfg, x),
                SweepAxis::Delta => SystemParams::from_detuning(cfg.omega_r, x, cfg.g),
            };
            let shifts = p.and_then(|p| Ok((p, DispersiveShifts::new(&p, &cfg.cutoff)?)));
            let (p, s) = match shifts {
                Ok(v) => v,
                Err(e) => return (Row::failed(lead, width, e.to_string()), false),
            };
            let outside = SmallParams::new(&p, CouplingPair::new(p.g, p.g))
                .map(|sp| !sp.is_dispersive(DISPERSIVE_THRESHOLD))
                .unwrap_or(false);
            let mut flags = Vec::new();
            let mut oracle = |kind: ModelKind| match exact_shift_oracle_with(&p, kind, &cfg.cutoff, &opts) {
                Ok(c) => Cell::Num(c),
                Err(e) => {
                    flags.push(format!("{kind}: {e}"));
                    Cell::Empty
                }
            };
            let qrm = oracle(ModelKind::Rabi);
            let jc = oracle(ModelKind::JaynesCummings);
            let mut cells = lead;
            cells.extend([
                Cell::Num(s.chi_rwa),
                Cell::Num(s.chi_nrwa),
                Cell::Num(s.chi_irwa),
                qrm,
                jc,
            ]);
            let row = Row {
                cells,
                flag: (!flags.is_empty()).then(|| flags.join("; ")),
            };
            (row, outside)
        })
        .collect();
    let outside = results.iter().filter(|r| r.1).count();
    let mut warnings = Vec::new();
    if outside > 0 {
        warnings.push(format!(
            "{outside} of {} rows have |g/Delta| > {DISPERSIVE_THRESHOLD}; the dispersive expansion is not reliable there",
            results.len()
        ));
    }
    table.rows = results.into_iter().map(|r| r.0).collect();
    Ok(Report { table, warnings })
}

fn pair_params(cfg: &SweepConfig, g: f64) -> Result<MultiQubitParams, Error> {
    let p = params_at(cfg, g)?;
    MultiQubitParams::identical(cfg.omega_r, p.omega_a, g, 2, cfg.cutoff)
}

fn twoqubit(cfg: &SweepConfig) -> Result<Report, Error> {
    let mut table = Table::new(&["g_over_wr", "J_rwa", "J_nr0", "J_nr1", "J_ir0", "J_ir1", "J_ir2"]);
    let width = table.header.len();
    let rows = coupling_sweep(&cfg.g_grid.points(), |g| pair_params(cfg, g))?;
    table.rows = rows
        .into_iter()
        .map(|r| {
            let x = Cell::Num(r.g / cfg.omega_r);
            match r.couplings {
                Some(j) => Row::ok(
                    [x].into_iter()
                        .chain([j.j_r, j.j_nr0, j.j_nr1, j.j_ir0, j.j_ir1, j.j_ir2].map(Cell::Num))
                        .collect(),
                ),
                None => Row::failed(vec![x], width, r.error.unwrap_or_default()),
            }
        })
        .collect();
    Ok(Report {
        table,
        warnings: Vec::new(),
    })
}

/// Quarter-period of the RWA exchange, `pi |Delta| / (4 g^2)`.
pub fn default_t_max(cfg: &SweepConfig) -> Result<f64, Error> {
    let delta = cfg.detuning.detuning(cfg.g);
    if cfg.g == 0.0 || delta == 0.0 {
        return Err(Error::InvalidParameter(
            "t_max = auto needs nonzero g and Delta; set t_max explicitly".into(),
        ));
    }
    Ok(PI * delta.abs() / (4.0 * cfg.g * cfg.g))
}

fn evolve(cfg: &SweepConfig) -> Result<Report, Error> {
    let mut header = vec!["t".to_string()];
    for i in 0..4 {
        for j in 0..4 {
            header.push(format!("u{i}{j}_re"));
            header.push(format!("u{i}{j}_im"));
        }
    }
    header.push("fidelity_to_sqrt_iswap".into());
    header.push("unitarity_residual".into());
    let width = header.len();
    let t_max = match cfg.t_max {
        Some(t) => t,
        None => default_t_max(cfg)?,
    };
    let mp = pair_params(cfg, cfg.g)?;
    let target = sqrt_iswap();
    let times = Grid {
        min: 0.0,
        max: t_max,
        steps: cfg.t_steps,
    }
    .points();
    let rows = times
        .par_iter()
        .map(|&t| {
            let lead = vec![Cell::Num(t)];
            let u = match evolution_2q(&mp, cfg.variant, t) {
                Ok(u) => u,
                Err(e) => return Row::failed(lead, width, e.to_string()),
            };
            let mut cells = lead;
            for i in 0..4 {
                for j in 0..4 {
                    let z = u.block[(i, j)];
                    cells.push(Cell::Num(z.re));
                    cells.push(Cell::Num(z.im));
                }
            }
            match local_z_fidelity(&u.block, &target) {
                Ok(f) => cells.push(Cell::Num(f)),
                Err(e) => return Row::failed(cells, width, e.to_string()),
            }
            cells.push(Cell::Num(u.block.unitarity_residual()));
            Row::ok(cells)
        })
        .collect();
    Ok(Report {
        table: Table { header, rows },
        warnings: Vec::new(),
    })
}
