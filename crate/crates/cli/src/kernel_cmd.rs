use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use hkit::riesz::{
    calibrate_constant, calibration_sample, default_calibration, fmt17, nonvanishing_report, riesz_formula_eval,
    riesz_subordination_eval, write_kernel_csv, zero_scan, Calibration,
};
use hkit::{GroupPoint, QuadratureConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{coord_header, csv_bytes, parse_coords, read_points, Ctx};

#[derive(Subcommand, Debug)]
pub enum KernelCmd {
    /// Evaluate K_j at a list of points (CSV).
    Eval {
        /// CSV file with one point per record.
        #[arg(long)]
        points: Option<PathBuf>,
        /// A point `x,y,t`; may be repeated.
        #[arg(long = "point", value_parser = parse_coords, allow_hyphen_values = true)]
        point: Vec<Vec<f64>>,
    },
    /// Fit the constant relating the closed reduction to subordination.
    Calibrate {
        #[arg(long, default_value_t = 12)]
        samples: usize,
    },
    /// Roots of A_n(i phi) and the near-zero set of K_j on the unit sphere.
    ZeroScan {
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
    /// Closed reduction against subordination on random unit-sphere points (CSV).
    CrossCheck {
        #[arg(long, default_value_t = 200)]
        count: usize,
    },
}

impl Ctx {
    pub fn calibration(&self) -> Result<Option<Calibration>> {
        let space = self.space();
        if !space.is_heisenberg() {
            return Ok(None);
        }
        let j = self.cfg.vector_field()?;
        Ok(Some(if *self.quad() == QuadratureConfig::default() {
            default_calibration(space, j)?
        } else {
            calibrate_constant(j, &calibration_sample(space, 12), self.quad())?
        }))
    }
}

#[derive(Serialize)]
struct ZeroScanBody {
    grid: usize,
    roots: Vec<f64>,
    roots_doubled_grid: Vec<f64>,
    max_root_shift: f64,
    sphere: hkit::riesz::NonvanishingReport,
}

pub fn run(ctx: &Ctx, cmd: &KernelCmd) -> Result<()> {
    let space = ctx.space();
    let j = ctx.cfg.vector_field()?;
    match cmd {
        KernelCmd::Eval { points, point } => {
            let mut pts = Vec::new();
            if let Some(p) = points {
                pts.extend(read_points(p)?);
            }
            pts.extend(point.iter().cloned());
            let pts = pts
                .iter()
                .map(|p| ctx.point(p))
                .collect::<Result<Vec<GroupPoint<f64>>>>()?;
            let cal = ctx.calibration()?;
            let mut buf = Vec::new();
            write_kernel_csv(&mut buf, j, &pts, space, ctx.quad(), cal.as_ref())?;
            ctx.emit("kernel-eval", "csv", &buf)
        }
        KernelCmd::Calibrate { samples } => {
            let cal = calibrate_constant(j, &calibration_sample(space, *samples), ctx.quad())?;
            ctx.report(
                "kernel calibrate",
                "global constant of the closed Riesz kernel reduction",
                &cal.id.clone(),
                cal,
            )
        }
        KernelCmd::ZeroScan { grid, threshold } => {
            let kernel = ctx.kernel()?;
            let roots: Vec<f64> = zero_scan(space.n, *grid, ctx.quad())?.iter().map(|p| p.phi).collect();
            let fine: Vec<f64> = zero_scan(space.n, 2 * grid, ctx.quad())?
                .iter()
                .map(|p| p.phi)
                .collect();
            let shift = if roots.len() == fine.len() {
                roots.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            let body = ZeroScanBody {
                grid: *grid,
                roots,
                roots_doubled_grid: fine,
                max_root_shift: shift,
                sphere: nonvanishing_report(&kernel, *grid, *threshold)?,
            };
            ctx.report(
                "kernel zero-scan",
                "nonvanishing of the Riesz kernel off a small set",
                &kernel.calibration_id,
                body,
            )
        }
        KernelCmd::CrossCheck { count } => {
            let cal = ctx
                .calibration()?
                .ok_or_else(|| anyhow::anyhow!("cross-check compares two paths on H^n only"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
            let pts: Vec<GroupPoint<f64>> = (0..*count)
                .map(|_| {
                    let phi = rng.random_range(-1.45..1.45f64);
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    let m = rng.random_range(0..space.n);
                    let mut zeta = vec![0.0; 2 * space.n];
                    zeta[m] = theta.cos();
                    zeta[space.n + m] = theta.sin();
                    GroupPoint::new(space, hkit::group::polar_point(space, 1.0, phi, &zeta))
                })
                .collect::<hkit::Result<_>>()?;
            let rows = pts
                .par_iter()
                .map(|g| {
                    let f = riesz_formula_eval(j, g, ctx.quad(), Some(&cal))?;
                    let c = cal.constant::<f64>() * f.raw;
                    let s = riesz_subordination_eval(j, g, ctx.quad())?;
                    let mut row: Vec<String> = g.coords.iter().map(|v| fmt17(*v)).collect();
                    row.push(fmt17(c.re));
                    row.push(fmt17(c.im));
                    row.push(fmt17(s));
                    row.push(fmt17((c.re - s).abs() / c.re.abs().max(s.abs())));
                    Ok(row)
                })
                .collect::<hkit::Result<Vec<_>>>()?;
            let mut header = coord_header(space);
            for h in ["formula_re", "formula_im", "subordination", "rel_diff"] {
                header.push(h.into());
            }
            ctx.emit("kernel-cross-check", "csv", &csv_bytes(&header, &rows)?)
        }
    }
}
