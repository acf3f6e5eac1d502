use anyhow::Result;
use clap::Subcommand;
use hkit::sector::{
    find_direction_point, lower_bound_verify, scaled_sector, volume_regularity, with_aperture, SectorSpec,
};
use serde::Serialize;

use crate::common::{parse_point, Coords, Ctx};

#[derive(Subcommand, Debug)]
pub enum SectorCmd {
    /// Direction point, aperture and truncation radius of the sector.
    Build(BuildArgs),
    /// Sign constancy and |K| d^Q lower bound on sampled pairs.
    VerifyLowerBound {
        #[command(flatten)]
        build: BuildArgs,
        /// Base point `g` of the scaled sector.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        base: Option<Coords>,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
    },
    /// Monte-Carlo |B(g, R) n G| / R^Q over radii R = m r_o.
    Volume {
        #[command(flatten)]
        build: BuildArgs,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        base: Option<Coords>,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Radius multiples of r_o, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "3,10,30,100")]
        multiples: Vec<f64>,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
    },
}

#[derive(clap::Args, Debug, Clone)]
pub struct BuildArgs {
    /// Sphere mesh used to locate the direction point.
    #[arg(long, default_value_t = 64)]
    sphere_grid: usize,
    /// Fixed aperture (default: the largest certified `2^-k`).
    #[arg(long)]
    eps: Option<f64>,
}

fn build(ctx: &Ctx, a: &BuildArgs) -> Result<SectorSpec> {
    let kernel = ctx.kernel()?;
    let spec = find_direction_point(&kernel, a.sphere_grid, ctx.cfg.seed)?;
    Ok(match a.eps {
        Some(e) => with_aperture(&spec, e, ctx.cfg.seed)?,
        None => spec,
    })
}

#[derive(Serialize)]
struct VolumeBody {
    spec: SectorSpec,
    base: Vec<f64>,
    scale: f64,
    samples: usize,
    rows: Vec<hkit::sector::VolumeRow>,
    band_ratio: f64,
}

#[derive(Serialize)]
struct LowerBoundBody {
    spec: SectorSpec,
    base: Vec<f64>,
    scale: f64,
    report: hkit::sector::LowerBoundReport,
}

pub fn run(ctx: &Ctx, cmd: &SectorCmd) -> Result<()> {
    match cmd {
        SectorCmd::Build(a) => {
            let spec = build(ctx, a)?;
            let id = spec.calibration_id.clone();
            ctx.report(
                "sector build",
                "twisted truncated sector of constant kernel sign",
                &id,
                spec,
            )
        }
        SectorCmd::VerifyLowerBound {
            build: a,
            base,
            scale,
            pairs,
        } => {
            let spec = build(ctx, a)?;
            let base = ctx.coords(base.as_deref(), 0.0)?;
            let region = scaled_sector(&spec, &ctx.point(&base)?, *scale)?;
            let report = lower_bound_verify(&ctx.kernel()?, &region, *pairs, ctx.cfg.seed)?;
            let id = spec.calibration_id.clone();
            let body = LowerBoundBody {
                spec,
                base,
                scale: *scale,
                report,
            };
            ctx.report(
                "sector verify-lower-bound",
                "kernel lower bound C d^-Q with constant sign on the sector",
                &id,
                body,
            )
        }
        SectorCmd::Volume {
            build: a,
            base,
            scale,
            multiples,
            samples,
        } => {
            let spec = build(ctx, a)?;
            let base = ctx.coords(base.as_deref(), 0.0)?;
            let region = scaled_sector(&spec, &ctx.point(&base)?, *scale)?;
            let radii: Vec<f64> = multiples.iter().map(|m| m * spec.r_o * scale).collect();
            let rows = volume_regularity(&region, &radii, *samples, ctx.cfg.seed)?;
            let lo = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.ratio));
            let hi = rows.iter().fold(0.0f64, |m, r| m.max(r.ratio));
            let id = spec.calibration_id.clone();
            let body = VolumeBody {
                spec,
                base,
                scale: *scale,
                samples: *samples,
                rows,
                band_ratio: hi / lo,
            };
            ctx.report(
                "sector volume",
                "volume regularity of the sector |B(g,R) n G| ~ R^Q",
                &id,
                body,
            )
        }
    }
}
