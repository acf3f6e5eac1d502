use anyhow::Result;
use clap::{Args, Subcommand};
use hkit::acceptance::theta_families;
use hkit::bmo::FnField;
use hkit::commutator::{
    commutator_apply, default_pv_cut, h1b_growth, lb_growth, make_atom, theta_fit, weak11_experiment, AtomPattern,
    H1bReport, LbReport, ThetaFit, Weak11Report,
};
use hkit::grid::Ball;
use hkit::riesz::fmt17;
use hkit::sector::find_direction_point;
use serde::Serialize;

use crate::common::{coord_header, csv_bytes, parse_coords, parse_point, Coords, Ctx, SourceKind, Symbol};

#[derive(Args, Debug, Clone)]
pub struct BallArgs {
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    center: Option<Coords>,
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
}

impl BallArgs {
    fn ball(&self, ctx: &Ctx) -> Result<Ball> {
        Ok(Ball::new(ctx.coords(self.center.as_deref(), 0.0)?, self.radius))
    }
}

#[derive(Subcommand, Debug)]
pub enum CommCmd {
    /// [b, R_j] f on every grid cell (CSV).
    Apply {
        #[arg(long, default_value = "log")]
        b: Symbol,
        #[arg(long, default_value = "bumps")]
        f: SourceKind,
        #[command(flatten)]
        ball: BallArgs,
        /// Principal-value cut (default: two cell widths).
        #[arg(long)]
        pv_cut: Option<f64>,
    },
    /// [b, R_j] of shrinking normalized ball indicators: pointwise limit and superlevel sets.
    Weak11 {
        #[arg(long, default_value = "smooth")]
        b: Symbol,
        /// Centre g' of the shrinking balls (snapped to the nearest cell centre).
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        g_prime: Option<Coords>,
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25,0.125")]
        eps: Vec<f64>,
        /// Far evaluation point; may be repeated.
        #[arg(long = "far", value_parser = parse_coords, allow_hyphen_values = true)]
        far: Vec<Vec<f64>>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.005,0.01,0.02,0.04,0.08,0.16,0.32,0.64,1.28,2.56"
        )]
        lambda: Vec<f64>,
        /// Point sources per axis of each shrinking ball.
        #[arg(long, default_value_t = 10)]
        per_axis: usize,
    },
    /// theta_b fits of lambda |{|[b,R_j]f| > lambda}| against the L log L functional.
    Llogl {
        #[arg(long, default_value = "log")]
        b: Symbol,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.01,0.02,0.04,0.08,0.16,0.32,0.64,1.28"
        )]
        lambda: Vec<f64>,
    },
    /// (h1b) far kernel mass times |int b a| for a two-block atom, over far radii.
    H1b {
        #[arg(long, default_value = "log")]
        b: Symbol,
        #[command(flatten)]
        ball: BallArgs,
        /// Point of the ball at which the kernel is frozen (default: the centre).
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        g_tilde: Option<Coords>,
        #[arg(long, default_value_t = 64.0)]
        r_o: f64,
        /// Far radii as multiples of r_o r.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64,128,256")]
        multiples: Vec<f64>,
    },
    /// (lb) mean oscillation times the far sector integral, over sector radii N.
    Lb {
        #[arg(long, default_value = "log")]
        b: Symbol,
        #[command(flatten)]
        ball: BallArgs,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        g_tilde: Option<Coords>,
        /// N as multiples of r_o r.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64,128,256")]
        multiples: Vec<f64>,
        /// Sector discretisation per axis.
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
}

#[derive(Serialize)]
struct Weak11Body {
    b: Symbol,
    report: Weak11Report,
}

#[derive(Serialize)]
struct LloglBody {
    b: Symbol,
    pv_cut: f64,
    fits: Vec<ThetaFit>,
    /// `max |theta / mean - 1|` over the families.
    max_deviation_from_mean: f64,
}

#[derive(Serialize)]
struct H1bBody {
    b: Symbol,
    ball: Ball,
    g_tilde: Vec<f64>,
    r_o: f64,
    report: H1bReport,
}

#[derive(Serialize)]
struct LbBody {
    b: Symbol,
    ball: Ball,
    g_tilde: Vec<f64>,
    r_o: f64,
    report: LbReport,
}

pub fn run(ctx: &Ctx, cmd: &CommCmd) -> Result<()> {
    let space = ctx.space();
    let grid = ctx.grid()?;
    let kernel = ctx.kernel()?;
    let cal = kernel.calibration_id.clone();
    match cmd {
        CommCmd::Apply { b, f, ball, pv_cut } => {
            let cut = pv_cut.unwrap_or(default_pv_cut(&grid));
            let bs = b.sample(&grid)?;
            let fs = f.sample(&grid, &ball.ball(ctx)?, ctx.cfg.seed)?;
            let u = commutator_apply(&kernel, &bs, &fs, cut)?;
            let rows: Vec<Vec<String>> = (0..grid.len())
                .map(|i| {
                    let mut r: Vec<String> = grid.center(i).iter().map(|v| fmt17(*v)).collect();
                    r.extend([fmt17(bs.values[i]), fmt17(fs.values[i]), fmt17(u.values[i])]);
                    r
                })
                .collect();
            let mut header = coord_header(space);
            header.extend(["b".into(), "f".into(), "commutator".into()]);
            ctx.emit("comm-apply", "csv", &csv_bytes(&header, &rows)?)
        }
        CommCmd::Weak11 {
            b,
            g_prime,
            eps,
            far,
            lambda,
            per_axis,
        } => {
            let gp = ctx.coords(g_prime.as_deref(), 0.0)?;
            let idx = grid
                .index_of(&gp)
                .ok_or_else(|| anyhow::anyhow!("g' lies outside the grid"))?;
            let gp = grid.center(idx);
            let far = if far.is_empty() {
                let h: Vec<f64> = ctx.cfg.grid.half.clone();
                vec![
                    h.iter()
                        .enumerate()
                        .map(|(k, v)| v * if k % 2 == 0 { 0.9 } else { 0.2 })
                        .collect(),
                    h.iter()
                        .enumerate()
                        .map(|(k, v)| v * if k % 2 == 0 { -0.8 } else { 0.7 })
                        .collect(),
                ]
            } else {
                far.clone()
            };
            let sym = b.clone();
            let field = FnField(move |p: &[f64]| sym.eval(space, p));
            let report = weak11_experiment(&kernel, &field, &gp, eps, &grid, &far, lambda, *per_axis)?;
            ctx.report(
                "comm weak11",
                "pointwise limit of [b,R_j] on shrinking balls and weak (1,1) normalization",
                &cal,
                Weak11Body { b: b.clone(), report },
            )
        }
        CommCmd::Llogl { b, lambda } => {
            let bs = b.sample(&grid)?;
            let cut = default_pv_cut(&grid);
            let fits = theta_families(&grid, ctx.cfg.seed)?
                .iter()
                .map(|(name, fs)| Ok(theta_fit(&kernel, &bs, name, fs, lambda, cut)?))
                .collect::<Result<Vec<_>>>()?;
            let mean = fits.iter().map(|f| f.theta).sum::<f64>() / fits.len() as f64;
            let dev = fits.iter().map(|f| (f.theta / mean - 1.0).abs()).fold(0.0, f64::max);
            let body = LloglBody {
                b: b.clone(),
                pv_cut: cut,
                fits,
                max_deviation_from_mean: dev,
            };
            ctx.report(
                "comm llogl",
                "weak L log L bound for [b,R_j] with constant theta_b",
                &cal,
                body,
            )
        }
        CommCmd::H1b {
            b,
            ball,
            g_tilde,
            r_o,
            multiples,
        } => {
            let ball = ball.ball(ctx)?;
            let gt = g_tilde
                .as_ref()
                .map(|c| c.0.clone())
                .unwrap_or_else(|| ball.center.clone());
            let atom = make_atom(&grid, &ball, AtomPattern::TwoBlock, 2.0)?;
            let bs = b.sample(&grid)?;
            let radii: Vec<f64> = multiples.iter().map(|m| m * r_o * ball.radius).collect();
            let report = h1b_growth(&kernel, &bs, &atom, &gt, *r_o, &radii)?;
            let body = H1bBody {
                b: b.clone(),
                ball,
                g_tilde: gt,
                r_o: *r_o,
                report,
            };
            ctx.report("comm h1b", "H^1 to L^1 condition (h1b) on atoms", &cal, body)
        }
        CommCmd::Lb {
            b,
            ball,
            g_tilde,
            multiples,
            resolution,
        } => {
            let ball = ball.ball(ctx)?;
            let gt = g_tilde
                .as_ref()
                .map(|c| c.0.clone())
                .unwrap_or_else(|| ball.center.clone());
            let spec = find_direction_point(&kernel, 64, ctx.cfg.seed)?;
            let bs = b.sample(&grid)?;
            let ns: Vec<f64> = multiples.iter().map(|m| m * spec.r_o * ball.radius).collect();
            let report = lb_growth(&kernel, &spec, &bs, &ball, &gt, &ns, *resolution, ctx.cfg.seed)?;
            let body = LbBody {
                b: b.clone(),
                ball,
                g_tilde: gt,
                r_o: spec.r_o,
                report,
            };
            ctx.report(
                "comm lb",
                "far-sector lower condition (lb) with indicator families f_N",
                &cal,
                body,
            )
        }
    }
}
