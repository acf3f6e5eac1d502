use anyhow::{bail, Result};
use clap::Subcommand;
use hkit::heat::{heat_eval, heat_eval_abelian, heat_normalization_mc, NormalizationEstimate};
use hkit::riesz::fmt17;
use hkit::GroupPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{coord_header, csv_bytes, parse_coords, Ctx};

#[derive(Subcommand, Debug)]
pub enum HeatCmd {
    /// Evaluate p_h at points (CSV).
    Eval {
        /// A point `x,y,t`; may be repeated.
        #[arg(long = "point", value_parser = parse_coords, allow_hyphen_values = true)]
        point: Vec<Vec<f64>>,
        /// Heat times, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        h: Vec<f64>,
    },
    /// Scaling identity on random pairs and Monte-Carlo mass of p_h.
    Verify {
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 40_000)]
        samples: usize,
        /// Half-width of the normalization box.
        #[arg(long, default_value_t = 12.0)]
        box_half: f64,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
    },
}

#[derive(Serialize)]
struct VerifyBody {
    pairs: usize,
    max_scaling_rel_error: f64,
    box_half: f64,
    h: f64,
    normalization: NormalizationEstimate,
}

pub fn run(ctx: &Ctx, cmd: &HeatCmd) -> Result<()> {
    let space = ctx.space();
    let q = ctx.quad();
    match cmd {
        HeatCmd::Eval { point, h } => {
            let mut rows = Vec::new();
            for p in point {
                let g = ctx.point(p)?;
                for &hh in h {
                    let (v, e) = if space.is_heisenberg() {
                        let r = heat_eval(&g, hh, q)?;
                        (r.value, r.error)
                    } else {
                        (heat_eval_abelian(&g.coords, hh)?, 0.0)
                    };
                    let mut row: Vec<String> = g.coords.iter().map(|v| fmt17(*v)).collect();
                    row.extend([fmt17(hh), fmt17(v), fmt17(e)]);
                    rows.push(row);
                }
            }
            let mut header = coord_header(space);
            header.extend(["h".into(), "value".into(), "error".into()]);
            ctx.emit("heat-eval", "csv", &csv_bytes(&header, &rows)?)
        }
        HeatCmd::Verify {
            pairs,
            samples,
            box_half,
            h,
        } => {
            if !space.is_heisenberg() {
                bail!("heat verify runs on H^n");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
            let qd = space.q() as f64;
            let draws: Vec<(GroupPoint<f64>, f64)> = (0..*pairs)
                .map(|_| {
                    let c = (0..space.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
                    Ok((GroupPoint::new(space, c)?, rng.random_range(-1.5..1.5f64).exp()))
                })
                .collect::<hkit::Result<_>>()?;
            let errs = draws
                .par_iter()
                .map(|(g, hh)| {
                    let lhs = heat_eval(g, *hh, q)?.value;
                    let rhs = hh.powf(-qd / 2.0) * heat_eval(&g.dilate(1.0 / hh.sqrt())?, 1.0, q)?.value;
                    Ok((lhs - rhs).abs() / rhs)
                })
                .collect::<hkit::Result<Vec<f64>>>()?;
            let body = VerifyBody {
                pairs: *pairs,
                max_scaling_rel_error: errs.iter().cloned().fold(0.0, f64::max),
                box_half: *box_half,
                h: *h,
                normalization: heat_normalization_mc(space, *h, *box_half, *samples, ctx.cfg.seed, q)?,
            };
            ctx.report(
                "heat verify",
                "heat kernel dilation scaling and unit mass",
                "none",
                body,
            )
        }
    }
}
