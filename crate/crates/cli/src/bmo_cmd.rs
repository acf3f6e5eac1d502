use anyhow::{bail, Result};
use clap::{Args, Subcommand};
use hkit::bmo::{
    ap_constant, bmo_norm, bmo_norm_weighted, default_lambda, ef_sets, local_mean_oscillation, median, median_masses,
    EfReport, FamilySup, FnField, Weight,
};
use hkit::dyadic::DyadicSystem;
use hkit::grid::{Ball, BallFamily};
use hkit::riesz::RieszKernel;
use hkit::sector::find_direction_point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::common::{parse_point, Coords, Ctx, Symbol};

#[derive(Args, Debug, Clone)]
pub struct FamilyArgs {
    /// Largest ball radius of the dyadic family.
    #[arg(long, default_value_t = 0.5)]
    r_max: f64,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Ball centres per axis.
    #[arg(long, default_value_t = 4)]
    per_axis: usize,
}

impl FamilyArgs {
    fn family(&self, ctx: &Ctx) -> Result<BallFamily> {
        Ok(BallFamily::dyadic(&ctx.grid()?, self.r_max, self.levels, self.per_axis))
    }
}

#[derive(Subcommand, Debug)]
pub enum BmoCmd {
    /// Sup of mean oscillations over a ball family (optionally against a power weight).
    Norm {
        #[arg(long, default_value = "log")]
        b: Symbol,
        #[command(flatten)]
        family: FamilyArgs,
        /// Weight `d_K^a` for the weighted norm.
        #[arg(long, allow_hyphen_values = true)]
        weight_power: Option<f64>,
    },
    /// Median of b on a ball with both half-mass counts.
    Median {
        #[arg(long, default_value = "log")]
        b: Symbol,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        center: Option<Coords>,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
    },
    /// Local mean oscillation w_lambda on the cubes of a dyadic system.
    Wlambda {
        #[arg(long, default_value = "log")]
        b: Symbol,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.25,0.45")]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 8)]
        min_cells: usize,
    },
    /// E x F sets and their certificate on random interior dyadic cubes.
    EfSets {
        #[arg(long, default_value = "log")]
        b: Symbol,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 20)]
        cubes: usize,
        /// k0 as a multiple of r_o.
        #[arg(long, default_value_t = 2.0)]
        k0_multiple: f64,
        /// Sector discretisation per axis.
        #[arg(long, default_value_t = 20)]
        resolution: usize,
    },
    /// A_p constant of the power weight d_K^a over a ball family.
    ApConstant {
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
        power: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[command(flatten)]
        family: FamilyArgs,
    },
}

#[derive(Serialize)]
struct NormBody {
    b: Symbol,
    unweighted: FamilySup,
    weight_power: Option<f64>,
    weighted: Option<FamilySup>,
}

#[derive(Serialize)]
struct MedianBody {
    b: Symbol,
    ball: Ball,
    cells: usize,
    median: f64,
    below: usize,
    above: usize,
}

#[derive(Serialize)]
struct WRow {
    level: usize,
    lambda: f64,
    cubes: usize,
    mean: f64,
    max: f64,
}

#[derive(Serialize)]
struct WBody {
    b: Symbol,
    rows: Vec<WRow>,
    non_monotone_cubes: usize,
}

#[derive(Serialize)]
struct EfBody {
    b: Symbol,
    lambda: f64,
    k0: f64,
    certified: usize,
    reports: Vec<EfReport>,
}

pub fn run(ctx: &Ctx, cmd: &BmoCmd) -> Result<()> {
    let space = ctx.space();
    let grid = ctx.grid()?;
    match cmd {
        BmoCmd::Norm {
            b,
            family,
            weight_power,
        } => {
            let bs = b.sample(&grid)?;
            let fam = family.family(ctx)?;
            let weighted = match weight_power {
                Some(a) => Some(bmo_norm_weighted(&bs, &Weight::power(&grid, *a)?, &fam)?),
                None => None,
            };
            let body = NormBody {
                b: b.clone(),
                unweighted: bmo_norm(&bs, &fam)?,
                weight_power: *weight_power,
                weighted,
            };
            ctx.report("bmo norm", "BMO and weighted BMO norms", "none", body)
        }
        BmoCmd::Median { b, center, radius } => {
            let bs = b.sample(&grid)?;
            let ball = Ball::new(ctx.coords(center.as_deref(), 0.0)?, *radius);
            let cells = grid.cells_in_ball(&ball)?;
            if cells.is_empty() {
                bail!("the ball contains no cell centre");
            }
            let m = median(&bs, &cells)?;
            let (below, above, n) = median_masses(&bs, &cells, m);
            let body = MedianBody {
                b: b.clone(),
                ball,
                cells: n,
                median: m,
                below,
                above,
            };
            ctx.report("bmo median", "median value of b on a ball", "none", body)
        }
        BmoCmd::Wlambda {
            b,
            lambda,
            depth,
            min_cells,
        } => {
            let bs = b.sample(&grid)?;
            let sys = DyadicSystem::build(&grid, *depth, 0.5, ctx.cfg.seed)?;
            let mut rows = Vec::new();
            let mut non_monotone = 0;
            for (level, lev) in sys.levels.iter().enumerate() {
                let cubes: Vec<_> = lev.cubes.iter().filter(|c| c.cells.len() >= *min_cells).collect();
                let table = cubes
                    .iter()
                    .map(|c| {
                        lambda
                            .iter()
                            .map(|&l| local_mean_oscillation(&bs, &c.cells, l))
                            .collect()
                    })
                    .collect::<hkit::Result<Vec<Vec<f64>>>>()?;
                let mut order: Vec<usize> = (0..lambda.len()).collect();
                order.sort_by(|&a, &c| lambda[a].total_cmp(&lambda[c]));
                non_monotone += table
                    .iter()
                    .filter(|ws| !order.windows(2).all(|w| ws[w[0]] >= ws[w[1]]))
                    .count();
                for (k, &l) in lambda.iter().enumerate() {
                    let col: Vec<f64> = table.iter().map(|r| r[k]).collect();
                    rows.push(WRow {
                        level,
                        lambda: l,
                        cubes: col.len(),
                        mean: col.iter().sum::<f64>() / col.len().max(1) as f64,
                        max: col.iter().cloned().fold(0.0, f64::max),
                    });
                }
            }
            let body = WBody {
                b: b.clone(),
                rows,
                non_monotone_cubes: non_monotone,
            };
            ctx.report(
                "bmo wlambda",
                "local mean oscillation w_lambda on dyadic cubes",
                "none",
                body,
            )
        }
        BmoCmd::EfSets {
            b,
            depth,
            cubes,
            k0_multiple,
            resolution,
        } => {
            let kernel: RieszKernel = ctx.kernel()?;
            let spec = find_direction_point(&kernel, 64, ctx.cfg.seed)?;
            let sys = DyadicSystem::build(&grid, *depth, 0.5, ctx.cfg.seed)?;
            let pool = sys.interior_cubes(32);
            if pool.is_empty() {
                bail!("no interior dyadic cube with at least 32 cells; refine the grid");
            }
            let sym = b.clone();
            let field = FnField(move |p: &[f64]| sym.eval(space, p));
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
            let k0 = k0_multiple * spec.r_o;
            let reports = (0..*cubes)
                .map(|k| {
                    let (level, idx) = pool[rng.random_range(0..pool.len())];
                    Ok(ef_sets(
                        &kernel,
                        &spec,
                        &field,
                        &sys,
                        level,
                        idx,
                        k0,
                        *resolution,
                        ctx.cfg.seed ^ k as u64,
                    )?
                    .report)
                })
                .collect::<Result<Vec<_>>>()?;
            let body = EfBody {
                b: b.clone(),
                lambda: default_lambda(space),
                k0,
                certified: reports.iter().filter(|r| r.passed()).count(),
                reports,
            };
            ctx.report(
                "bmo ef-sets",
                "E x F construction on dyadic cubes",
                &kernel.calibration_id,
                body,
            )
        }
        BmoCmd::ApConstant { power, p, family } => {
            let sup = ap_constant(&Weight::power(&grid, *power)?, *p, &family.family(ctx)?)?;
            ctx.report(
                "bmo ap-constant",
                "Muckenhoupt A_p constant of a power weight",
                "none",
                sup,
            )
        }
    }
}
