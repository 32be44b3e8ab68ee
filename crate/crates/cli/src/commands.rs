use nhspec::open_system::{solve_resonances, toy_trapping, TrappingOptions};
use nhspec::scattering::{
    channel_lineshape, detect_bic, determinant, double_pole_lineshape, lineshape, s_matrix_polesum,
    s_matrix_resolvent, unitarity_defect, BicReport, ChannelLineshape, SMatrix, SMatrixModel,
};
use nhspec::sweep::{encircle, locate_ep, sweep, ConvergedBy, CycleRecord, ParamPath, ParametricModel};
use nhspec::C64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::model::{Kind, Model, ModelFile, SMatrixSource};
use crate::output::{ensure_dir, num, write_csv, write_json, write_jsonl, write_svg, Panel, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sweep,
    Locate,
    Encircle,
    Trap,
    Scatter,
    Heff,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sweep => "sweep",
            Self::Locate => "locate",
            Self::Encircle => "encircle",
            Self::Trap => "trap",
            Self::Scatter => "scatter",
            Self::Heff => "heff",
        }
    }

    fn accepts(self, kind: Kind) -> bool {
        use Kind::*;
        match self {
            Self::Sweep => matches!(kind, TwoLevel | PtTwoLevel | AvoidedCrossing | ToyTrapping),
            Self::Locate | Self::Encircle => matches!(kind, TwoLevel | PtTwoLevel | AvoidedCrossing),
            Self::Trap => kind == ToyTrapping,
            Self::Scatter => matches!(kind, Smatrix | OpenSystem),
            Self::Heff => kind == OpenSystem,
        }
    }
}

macro_rules! parametric {
    ($model:expr, $m:ident => $body:expr) => {
        match $model {
            Model::TwoLevel($m) => $body,
            Model::PtTwoLevel($m) => $body,
            Model::AvoidedCrossing($m) => $body,
            Model::ToyTrapping($m) => $body,
            _ => Err(CliError::input("model has no continuous parameters")),
        }
    };
}

pub fn run(cmd: Command, file: &ModelFile, cfg: &RunConfig) -> Result<(), CliError> {
    if !cmd.accepts(file.kind) {
        return Err(CliError::input(format!(
            "subcommand '{}' does not accept models of kind '{}'",
            cmd.name(),
            file.kind.name()
        )));
    }
    let model = file.model()?;
    ensure_dir(&cfg.out)?;
    match cmd {
        Command::Sweep => parametric!(&model, m => cmd_sweep(m, file, cfg)),
        Command::Locate => parametric!(&model, m => cmd_locate(m, file, cfg)),
        Command::Encircle => parametric!(&model, m => cmd_encircle(m, file, cfg)),
        Command::Trap => cmd_trap(&model, file, cfg),
        Command::Scatter => cmd_scatter(&model, file, cfg),
        Command::Heff => cmd_heff(&model, cfg),
    }
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn cmd_sweep<M: ParametricModel>(m: &M, file: &ModelFile, cfg: &RunConfig) -> Result<(), CliError> {
    let spec = file.sweep.ok_or_else(|| CliError::input("model file has no [sweep] block"))?;
    let r = sweep(m, &spec, &cfg.sweep)?;
    if cfg.emit.csv {
        let mut rows = Vec::new();
        for row in &r.rows {
            for (k, z) in row.values.iter().enumerate() {
                rows.push(vec![
                    num(row.param),
                    k.to_string(),
                    num(z.re),
                    num(z.im),
                    num(-2.0 * z.im),
                    num(row.norms_a[k]),
                    num(row.rigidity[k]),
                    flag(row.ep_flag),
                    flag(row.refined),
                    flag(row.ambiguous),
                ]);
            }
        }
        write_csv(
            &cfg.out.join("sweep.csv"),
            &["param", "k", "re_z", "im_z", "width", "norm_a", "rigidity", "ep_flag", "refined", "ambiguous"],
            &rows,
        )?;
    }
    if cfg.emit.json {
        write_jsonl(&cfg.out.join("events.jsonl"), &r.events)?;
    }
    if cfg.emit.svg {
        let n = r.rows.first().map_or(0, |row| row.values.len());
        let series = |f: fn(C64) -> f64| -> Vec<Series> {
            (0..n)
                .map(|k| Series {
                    points: r.rows.iter().map(|row| (row.param, f(row.values[k]))).collect(),
                })
                .collect()
        };
        let panels = [
            Panel {
                y_label: "Re z".into(),
                series: series(|z| z.re),
            },
            Panel {
                y_label: "Im z".into(),
                series: series(|z| z.im),
            },
        ];
        write_svg(&cfg.out.join("trajectories.svg"), &spec.parameter.to_string(), &panels)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EpJson {
    model: &'static str,
    p1_name: ParamPath,
    p2_name: ParamPath,
    seed: [f64; 2],
    p1: f64,
    p2: f64,
    z0: C64,
    /// Eigenvalue gap at the located point.
    residual: f64,
    discriminant: f64,
    scale: f64,
    converged_by: ConvergedBy,
    pair: (usize, usize),
    simplex_iterations: usize,
    newton_iterations: usize,
}

fn cmd_locate<M: ParametricModel>(m: &M, file: &ModelFile, cfg: &RunConfig) -> Result<(), CliError> {
    let (p1, p2, block_seed) = match &file.locate {
        Some(b) => (b.p1, b.p2, b.seed),
        None => (ParamPath::OmegaRe, ParamPath::OmegaIm, None),
    };
    let seed = [
        cfg.seed_p1.or(block_seed.map(|s| s[0])),
        cfg.seed_p2.or(block_seed.map(|s| s[1])),
    ];
    let [Some(s1), Some(s2)] = seed else {
        return Err(CliError::input("locate needs a seed: [locate].seed or --seed-p1 and --seed-p2"));
    };
    let ep = locate_ep(m, p1, p2, (s1, s2), &cfg.locate)?;
    if cfg.emit.json {
        let out = EpJson {
            model: m.name(),
            p1_name: p1,
            p2_name: p2,
            seed: [s1, s2],
            p1: ep.p1,
            p2: ep.p2,
            z0: ep.z0,
            residual: ep.gap,
            discriminant: ep.discriminant,
            scale: ep.scale,
            converged_by: ep.converged_by,
            pair: ep.pair,
            simplex_iterations: ep.simplex_iterations,
            newton_iterations: ep.newton_iterations,
        };
        write_json(&cfg.out.join("ep.json"), &out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CyclesJson<'a> {
    model: &'static str,
    p1_name: ParamPath,
    p2_name: ParamPath,
    center: (f64, f64),
    radius: f64,
    steps_per_cycle: usize,
    eigenvalue_period: Option<usize>,
    eigenvector_period: Option<usize>,
    gauge_lambda: Option<C64>,
    encloses_candidate: bool,
    candidates_inside: Option<usize>,
    cycles: &'a [CycleRecord],
}

fn cmd_encircle<M: ParametricModel>(m: &M, file: &ModelFile, cfg: &RunConfig) -> Result<(), CliError> {
    let spec = file.encircle.ok_or_else(|| CliError::input("model file has no [encircle] block"))?;
    let r = encircle(m, &spec, &cfg.sweep)?;
    if cfg.emit.json {
        let out = CyclesJson {
            model: m.name(),
            p1_name: spec.p1,
            p2_name: spec.p2,
            center: spec.center,
            radius: spec.radius,
            steps_per_cycle: spec.steps_per_cycle,
            eigenvalue_period: r.eigenvalue_period,
            eigenvector_period: r.eigenvector_period,
            gauge_lambda: r.gauge_lambda,
            encloses_candidate: r.encloses_candidate,
            candidates_inside: r.candidates_inside,
            cycles: &r.cycles,
        };
        write_json(&cfg.out.join("cycles.json"), &out)?;
    }
    if cfg.emit.csv {
        let rows: Vec<Vec<String>> = r
            .contour
            .iter()
            .flat_map(|p| {
                p.values.iter().enumerate().map(move |(k, z)| {
                    vec![p.step.to_string(), num(p.theta), num(p.p1), num(p.p2), k.to_string(), num(z.re), num(z.im)]
                })
            })
            .collect();
        write_csv(&cfg.out.join("contour.csv"), &["step", "theta", "p1", "p2", "k", "re_z", "im_z"], &rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrapSummary {
    n_states: usize,
    alpha_points: usize,
    alpha_cr: Option<f64>,
    slope: Option<f64>,
    intercept: Option<f64>,
    relative_residual: Option<f64>,
    broadest: usize,
    trapped_count: usize,
    trapped_fraction: f64,
    others_non_increasing: bool,
    max_width_sum_residual: f64,
    max_trace_residual: f64,
    max_imag: f64,
}

fn cmd_trap(model: &Model, file: &ModelFile, cfg: &RunConfig) -> Result<(), CliError> {
    let Model::ToyTrapping(m) = model else {
        return Err(CliError::input("trap needs a toy_trapping model"));
    };
    let block = file.trap.as_ref().ok_or_else(|| CliError::input("model file has no [trap] block"))?;
    let grid = block.grid()?;
    let opts = TrappingOptions {
        trapped_fraction: block.trapped_fraction.unwrap_or(TrappingOptions::default().trapped_fraction),
        workers: cfg.workers(),
    };
    let r = toy_trapping(m, &grid, &opts)?;
    if cfg.emit.csv {
        let mut rows = Vec::new();
        for (t, &a) in r.alphas.iter().enumerate() {
            for (k, z) in r.values[t].iter().enumerate() {
                rows.push(vec![num(a), k.to_string(), num(z.re), num(z.im), num(r.widths[t][k]), flag(r.trapped[k])]);
            }
        }
        write_csv(&cfg.out.join("trapping.csv"), &["alpha", "k", "re_z", "im_z", "gamma", "trapped_flag"], &rows)?;
    }
    if cfg.emit.json {
        let s = TrapSummary {
            n_states: m.h0().len(),
            alpha_points: grid.len(),
            alpha_cr: r.alpha_cr,
            slope: r.fit.map(|f| f.slope),
            intercept: r.fit.map(|f| f.intercept),
            relative_residual: r.fit.map(|f| f.relative_residual),
            broadest: r.broadest,
            trapped_count: r.trapped.iter().filter(|&&b| b).count(),
            trapped_fraction: opts.trapped_fraction,
            others_non_increasing: r.others_non_increasing,
            max_width_sum_residual: r.max_width_sum_residual,
            max_trace_residual: r.max_trace_residual,
            max_imag: r.max_imag,
        };
        write_json(&cfg.out.join("summary.json"), &s)?;
    }
    if cfg.emit.svg {
        let n = m.h0().len();
        let panels = [Panel {
            y_label: "Gamma".into(),
            series: (0..n)
                .map(|k| Series {
                    points: r.alphas.iter().zip(&r.widths).map(|(&a, w)| (a, w[k])).collect(),
                })
                .collect(),
        }];
        write_svg(&cfg.out.join("trapping.svg"), "alpha", &panels)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Point {
    energy: f64,
    sigma: f64,
}

#[derive(Serialize)]
struct ChannelFeatures {
    channel: usize,
    phase_change: f64,
    half_max_span: Option<f64>,
    sigma_min: Point,
    sigma_max: Point,
    minima: Vec<Point>,
    maxima: Vec<Point>,
}

#[derive(Serialize)]
struct DoublePoleFeatures {
    e_d: f64,
    gamma_d: f64,
    s_at_center: C64,
    sigma_at_center: f64,
    total_phase: f64,
    half_max_span: Option<f64>,
    single_pole_span: Option<f64>,
    broader_than_single: bool,
}

#[derive(Serialize)]
struct Features {
    source: &'static str,
    n_channels: usize,
    grid_points: usize,
    channels: Vec<ChannelFeatures>,
    /// Grid energies that coincide with a real-axis pole.
    pole_hits: Vec<f64>,
    max_unitarity_defect: Option<f64>,
    max_det_deviation: Option<f64>,
    /// max |pole sum − resolvent| when both forms are available.
    max_form_deviation: Option<f64>,
    bics: Vec<BicReport>,
    double_pole: Option<DoublePoleFeatures>,
}

fn channel_features(ch: &ChannelLineshape, energies: &[f64]) -> ChannelFeatures {
    let at = |t: usize| Point {
        energy: energies[t],
        sigma: ch.sigma[t],
    };
    let arg = |better: fn(f64, f64) -> bool| {
        (1..ch.sigma.len()).fold(0, |b, t| if better(ch.sigma[t], ch.sigma[b]) { t } else { b })
    };
    ChannelFeatures {
        channel: ch.channel,
        phase_change: ch.phase_change,
        half_max_span: ch.half_max_span,
        sigma_min: at(arg(|a, b| a < b)),
        sigma_max: at(arg(|a, b| a > b)),
        minima: ch.minima.iter().map(|x| at(x.index)).collect(),
        maxima: ch.maxima.iter().map(|x| at(x.index)).collect(),
    }
}

fn full_s(m: &SMatrixModel, grid: &[f64]) -> Vec<Option<SMatrix>> {
    grid.iter().map(|&e| s_matrix_polesum(m, e).ok()).collect()
}

fn max_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

fn cmd_scatter(model: &Model, file: &ModelFile, cfg: &RunConfig) -> Result<(), CliError> {
    let block = file.scatter.as_ref().ok_or_else(|| CliError::input("model file has no [scatter] block"))?;
    let grid = block.grid.build()?;
    let range = (grid[0], grid[grid.len() - 1]);
    let bic_window = block.bic_window.map_or(range, |w| (w[0], w[1]));

    let mut f = Features {
        source: "",
        n_channels: 1,
        grid_points: grid.len(),
        channels: Vec::new(),
        pole_hits: Vec::new(),
        max_unitarity_defect: None,
        max_det_deviation: None,
        max_form_deviation: None,
        bics: Vec::new(),
        double_pole: None,
    };
    let channels: Vec<ChannelLineshape> = match model {
        Model::SMatrix(SMatrixSource::DoublePole { e_d, gamma_d }) => {
            let r = double_pole_lineshape(*e_d, *gamma_d, &grid)?;
            f.source = "double_pole";
            f.double_pole = Some(DoublePoleFeatures {
                e_d: r.e_d,
                gamma_d: r.gamma_d,
                s_at_center: r.s_at_center,
                sigma_at_center: r.sigma_at_center,
                total_phase: r.lineshape.phase_change,
                half_max_span: r.lineshape.half_max_span,
                single_pole_span: r.single_pole_span,
                broader_than_single: r.broader_than_single,
            });
            f.max_unitarity_defect = max_of(r.lineshape.s.iter().map(|s| (s.norm() - 1.0).abs()));
            vec![r.lineshape]
        }
        Model::SMatrix(SMatrixSource::Poles(m)) => {
            f.source = "poles";
            let m = m.clone().with_energy_grid(grid.clone())?;
            pole_lineshapes(&m, &grid, bic_window, cfg, &mut f)?
        }
        Model::SMatrix(SMatrixSource::Resolvent { h_b, gamma_hat, poles }) => {
            f.source = "resolvent";
            let m = poles.clone().with_energy_grid(grid.clone())?;
            // resolution and BIC checks use the pole expansion; values come from the exact form
            lineshape(&m, &grid, cfg.bic.bic_tol)?;
            f.bics = detect_bic(&m, bic_window, &cfg.bic)?;
            let mut exact = Vec::with_capacity(grid.len());
            for &e in &grid {
                exact.push(s_matrix_resolvent(h_b, gamma_hat, e)?);
            }
            let poles_s = full_s(&m, &grid);
            f.n_channels = m.n_channels();
            f.max_unitarity_defect = max_of(exact.iter().map(unitarity_defect));
            f.max_form_deviation = max_of(exact.iter().zip(&poles_s).filter_map(|(a, b)| {
                b.as_ref().map(|b| {
                    a.iter()
                        .flatten()
                        .zip(b.iter().flatten())
                        .map(|(x, y)| (x - y).norm())
                        .fold(0.0, f64::max)
                })
            }));
            f.max_det_deviation = max_of(exact.iter().filter_map(|s| determinant(s).ok()).map(|d| (d.norm() - 1.0).abs()));
            (0..m.n_channels())
                .map(|c| channel_lineshape(c, &grid, exact.iter().map(|s| s[c][c]).collect()))
                .collect()
        }
        Model::OpenSystem(o) => {
            f.source = "open_system";
            let states = solve_resonances(o, &cfg.resonance)?;
            let m = SMatrixModel::from_states(&states, o.n_channels())?.with_energy_grid(grid.clone())?;
            let w = o.window();
            let bic_window = block.bic_window.map_or(w, |x| (x[0], x[1]));
            pole_lineshapes(&m, &grid, bic_window, cfg, &mut f)?
        }
        _ => return Err(CliError::input("scatter needs an smatrix or open_system model")),
    };
    f.n_channels = channels.len();
    f.channels = channels.iter().map(|c| channel_features(c, &grid)).collect();

    if cfg.emit.csv {
        let mut rows = Vec::new();
        for (t, &e) in grid.iter().enumerate() {
            for ch in &channels {
                let s = ch.s[t];
                rows.push(vec![num(e), ch.channel.to_string(), num(s.re), num(s.im), num(ch.sigma[t]), num(ch.phase[t])]);
            }
        }
        write_csv(&cfg.out.join("smatrix.csv"), &["E", "channel", "re_S", "im_S", "sigma", "phase"], &rows)?;
    }
    if cfg.emit.json {
        write_json(&cfg.out.join("features.json"), &f)?;
    }
    if cfg.emit.svg {
        let panels = [
            Panel {
                y_label: "sigma".into(),
                series: channels
                    .iter()
                    .map(|c| Series {
                        points: grid.iter().copied().zip(c.sigma.iter().copied()).collect(),
                    })
                    .collect(),
            },
            Panel {
                y_label: "phase".into(),
                series: channels
                    .iter()
                    .map(|c| Series {
                        points: grid.iter().copied().zip(c.phase.iter().copied()).collect(),
                    })
                    .collect(),
            },
        ];
        write_svg(&cfg.out.join("smatrix.svg"), "E", &panels)?;
    }
    Ok(())
}

fn pole_lineshapes(
    m: &SMatrixModel,
    grid: &[f64],
    bic_window: (f64, f64),
    cfg: &RunConfig,
    f: &mut Features,
) -> Result<Vec<ChannelLineshape>, CliError> {
    let r = lineshape(m, grid, cfg.bic.bic_tol)?;
    f.pole_hits = r.pole_hits.iter().map(|&t| grid[t]).collect();
    f.bics = detect_bic(m, bic_window, &cfg.bic)?;
    let s = full_s(m, grid);
    f.max_unitarity_defect = max_of(s.iter().flatten().map(unitarity_defect));
    f.max_det_deviation = max_of(
        s.iter()
            .flatten()
            .filter_map(|s| determinant(s).ok())
            .map(|d| (d.norm() - 1.0).abs()),
    );
    Ok(r.channels)
}

fn cmd_heff(model: &Model, cfg: &RunConfig) -> Result<(), CliError> {
    let Model::OpenSystem(m) = model else {
        return Err(CliError::input("heff needs an open_system model"));
    };
    let states = solve_resonances(m, &cfg.resonance)?;
    if cfg.emit.csv {
        let rows: Vec<Vec<String>> = states
            .iter()
            .map(|s| {
                vec![
                    s.k.to_string(),
                    num(s.energy),
                    num(s.z.re),
                    num(s.z.im),
                    num(s.width()),
                    flag(s.converged),
                    s.iterations.to_string(),
                    num(s.residual),
                    flag(s.in_window),
                ]
            })
            .collect();
        write_csv(
            &cfg.out.join("resonances.csv"),
            &["k", "energy", "re_z", "im_z", "gamma", "converged", "iterations", "residual", "in_window"],
            &rows,
        )?;
    }
    Ok(())
}
