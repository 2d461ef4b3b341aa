//! Command-line orchestration: `validate`, `image`, `mc-noise`, `speckle`.
//!
//! Every output file starts with a `#` line carrying the scenario hash and
//! seed. Numbers are written with 17 significant digits.

use crate::error::{Error, Result};
use crate::forward::{synthesize_all, FilterMode};
use crate::greens::{curl_dyadic_green, dyadic_green, hk_residual, im_dyadic_green, HkVariant, WaveContext};
use crate::imaging::{peak_metrics, td_multi, ImagingMap};
use crate::math::{add, frobenius, frobenius_real, scale, transpose, Vec3};
use crate::scenario::Scenario;
use crate::scene::{direction_identity_check, direction_matrix_check, IncidenceSet, Inclusion, Kind};
use crate::stability::{mc_noise_covariance, mc_snr, speckle_covariance, td_cov_prediction, MCConfig};
use clap::{Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "tdlocate", version, about = "Topological-derivative imaging of small electromagnetic inclusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Check Green's-function identities and direction sums.
    Validate,
    /// Noise-free multi-incidence map over the scenario grid.
    Image,
    /// Measurement-noise covariance and SNR scaling by Monte Carlo.
    McNoise,
    /// Medium-noise speckle covariance.
    Speckle,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    if let Some(t) = cli.threads {
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: cannot build thread pool: {e}");
                return EXIT_CHECK;
            }
        };
        return pool.install(|| dispatch(&cli));
    }
    dispatch(&cli)
}

fn dispatch(cli: &Cli) -> i32 {
    let Some(path) = &cli.scenario else {
        eprintln!("error: --scenario is required");
        return EXIT_PARSE;
    };
    let scenario = match Scenario::load(path, cli.seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                Error::Io { .. } => EXIT_IO,
                _ => EXIT_PARSE,
            };
        }
    };
    let res = match cli.command {
        Command::Validate => cmd_validate(&scenario, &cli.out),
        Command::Image => cmd_image(&scenario, &cli.out),
        Command::McNoise => cmd_mc_noise(&scenario, &cli.out),
        Command::Speckle => cmd_speckle(&scenario, &cli.out),
    };
    match res {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => EXIT_IO,
                Error::Parse(_) => EXIT_PARSE,
                _ => EXIT_CHECK,
            }
        }
    }
}

fn header(s: &Scenario) -> String {
    format!("# tdlocate {} scenario_hash={} seed={}\n", env!("CARGO_PKG_VERSION"), s.hash, s.seed)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
    Ok(p)
}

fn write_run_record(s: &Scenario, dir: &Path, command: &str, started: Instant, files: &[PathBuf]) -> Result<()> {
    let mut b = header(s);
    let _ = writeln!(b, "command = {command}");
    let _ = writeln!(b, "elapsed_s = {:.3}", started.elapsed().as_secs_f64());
    for f in files {
        let _ = writeln!(b, "file = {}", f.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
    }
    write_file(dir, &format!("run_{command}.txt"), &b)?;
    Ok(())
}

/// Identity checks; returns whether all passed.
pub fn cmd_validate(s: &Scenario, out: &Path) -> Result<bool> {
    let started = Instant::now();
    let ctx = s.materials.wave()?;
    let lam = s.wavelength();
    let mut rep = header(s);
    let mut all_ok = true;
    let mut line = |rep: &mut String, name: &str, value: f64, limit: f64| {
        let ok = value < limit;
        all_ok &= ok;
        let _ = writeln!(rep, "{} {name} value={} limit={}", if ok { "PASS" } else { "FAIL" }, num(value), num(limit));
    };

    // reciprocity Γ(x,y) = Γ(y,x)ᵀ and ∇×Γ(x,y) = (∇×Γ(y,x))ᵀ
    let x = s.inclusion.center;
    let y = add(x, scale(2.0 / ctx.kappa, [0.6, 0.0, 0.8]));
    let g1 = dyadic_green(&ctx, x, y)?;
    let g2 = transpose(&dyadic_green(&ctx, y, x)?);
    let d = crate::math::cmat_sub(&g1, &g2);
    line(&mut rep, "reciprocity_dyadic", frobenius(&d) / frobenius(&g1), 1e-13);
    let c1 = curl_dyadic_green(&ctx, x, y)?;
    let c2 = transpose(&curl_dyadic_green(&ctx, y, x)?);
    line(&mut rep, "reciprocity_curl", frobenius(&crate::math::cmat_sub(&c1, &c2)) / frobenius(&c1), 1e-13);

    let dirs = IncidenceSet::fibonacci(1000)?;
    let mut worst_s: f64 = 0.0;
    let mut worst_m: f64 = 0.0;
    for k in 0..=12 {
        let dist = 0.5 * k as f64 / ctx.kappa;
        let dv = scale(dist, [0.36, 0.48, 0.8]);
        worst_s = worst_s.max(direction_identity_check(&dirs, ctx.kappa, dv).error);
        let m = direction_matrix_check(&dirs, &ctx, dv);
        worst_m = worst_m.max(m.pol_error).max(m.cross_error);
    }
    line(&mut rep, "direction_scalar_n1000", worst_s, 0.05);
    line(&mut rep, "direction_matrix_n1000", worst_m, 0.03 * ctx.eps0 * ctx.kappa / (4.0 * std::f64::consts::PI));

    let mut table = header(s);
    table.push_str("r_over_lambda,variant,n_nodes,residual_norm,reference_norm,relative\n");
    if s.mesh.radius < 2.0 * lam {
        eprintln!("warning: boundary radius below 2 wavelengths, HK checks skipped");
        rep.push_str("SKIP hk_residuals boundary radius below 2 wavelengths\n");
    } else {
        let hx = s.inclusion.center;
        let hy = add(hx, scale(2.0 / ctx.kappa, [0.0, 0.6, 0.8]));
        let reference = frobenius_real(&im_dyadic_green(&ctx, hx, hy));
        for variant in [HkVariant::Plain, HkVariant::Tangential, HkVariant::Curl] {
            let scale_ref = match variant {
                HkVariant::Curl => ctx.kappa * ctx.eps0,
                _ => ctx.eps0 / ctx.kappa,
            } * reference;
            let mut last = f64::NAN;
            for r in [10.0, 20.0, 40.0] {
                let h = hk_residual(&ctx, variant, r * lam, hx, hy, None)?;
                last = h.norm / scale_ref;
                let _ = writeln!(table, "{r},{variant:?},{},{},{},{}", h.n_nodes, num(h.norm), num(scale_ref), num(last));
            }
            line(&mut rep, &format!("hk_{variant:?}_40lambda_relative"), last, 0.05);
        }
    }
    let f1 = write_file(out, "validate_report.txt", &rep)?;
    let f2 = write_file(out, "hk_residuals.csv", &table)?;
    write_run_record(s, out, "validate", started, &[f1, f2])?;
    print!("{}", rep.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    Ok(all_ok)
}

/// Writes `map.csv` as `x,y,z,value`.
pub fn map_csv(s: &Scenario, map: &ImagingMap) -> String {
    let mut b = header(s);
    b.push_str("x,y,z,value\n");
    for (i, v) in map.values.iter().enumerate() {
        let p = map.grid.point(i);
        let _ = writeln!(b, "{},{},{},{}", num(p[0]), num(p[1]), num(p[2]), num(*v));
    }
    b
}

/// 8-bit P2 heatmap of a 2D map, linear min-max scaling.
pub fn pgm(map: &ImagingMap) -> Option<(String, f64, f64)> {
    let axes: Vec<usize> = (0..3).filter(|&a| map.grid.dims[a] > 1).collect();
    if axes.len() != 2 {
        return None;
    }
    let (w, h) = (map.grid.dims[axes[0]], map.grid.dims[axes[1]]);
    let min = map.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = map.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let mut b = format!("P2\n{w} {h}\n255\n");
    for row in (0..h).rev() {
        let line: Vec<String> = (0..w)
            .map(|col| {
                let mut ijk = [0usize; 3];
                ijk[axes[0]] = col;
                ijk[axes[1]] = row;
                let v = map.values[map.grid.index(ijk[0], ijk[1], ijk[2])];
                format!("{}", ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8)
            })
            .collect();
        b.push_str(&line.join(" "));
        b.push('\n');
    }
    Some((b, min, max))
}

pub fn cmd_image(s: &Scenario, out: &Path) -> Result<bool> {
    let started = Instant::now();
    let data = synthesize_all(&s.materials, &s.inclusion, &s.mesh, &s.incidences.incidences())?;
    let map = td_multi(&data, &s.grid, &s.materials, &s.trial)?;
    let mut files = vec![write_file(out, "map.csv", &map_csv(s, &map))?];
    let mut summary = header(s);
    let lam = s.wavelength();
    match peak_metrics(&map, s.inclusion.center) {
        Ok(m) => {
            let _ = writeln!(summary, "peak_location = [{}, {}, {}]", num(m.location[0]), num(m.location[1]), num(m.location[2]));
            let _ = writeln!(summary, "peak_value = {}", num(m.value));
            let _ = writeln!(summary, "localization_error = {}", num(m.localization_error));
            let _ = writeln!(summary, "localization_error_cells = {}", num(m.localization_error / s.grid.spacing));
            let _ = writeln!(summary, "fwhm_over_lambda = [{}, {}]", num(m.fwhm[0] / lam), num(m.fwhm[1] / lam));
            let _ = writeln!(summary, "sidelobe_ratio = {}", num(m.sidelobe_ratio));
        }
        Err(Error::DegenerateMap(msg)) => {
            eprintln!("warning: degenerate map: {msg}");
            let _ = writeln!(summary, "degenerate = {msg}");
        }
        Err(e) => return Err(e),
    }
    files.push(write_file(out, "summary.txt", &summary)?);
    if let Some((body, min, max)) = pgm(&map) {
        files.push(write_file(out, "heatmap.pgm", &body)?);
        files.push(write_file(out, "heatmap_range.txt", &format!("{}min = {}\nmax = {}\n", header(s), num(min), num(max)))?);
    }
    write_run_record(s, out, "image", started, &files)?;
    Ok(true)
}

pub fn cmd_mc_noise(s: &Scenario, out: &Path) -> Result<bool> {
    let started = Instant::now();
    let spec = s
        .measurement
        .ok_or_else(|| Error::CheckFailed("scenario has no [noise.measurement] block".into()))?;
    let n_trials = s.mc_trials.ok_or_else(|| Error::CheckFailed("scenario has no [mc] block".into()))?;
    let ctx: WaveContext = s.materials.wave()?;
    let zd = s.inclusion.center;
    let cfg = MCConfig {
        n_trials,
        probe_pairs: vec![
            (zd, zd),
            (zd, add(zd, [1.0 / ctx.kappa, 0.0, 0.0])),
            (zd, add(zd, [2.0 / ctx.kappa, 0.0, 0.0])),
        ],
        seed: s.seed,
    };
    cfg.validate()?;
    let mut cov = header(s);
    cov.push_str("mode,pair,a,b,empirical_re,empirical_im,predicted,std_error_re,std_error_im\n");
    let mut traces = Vec::new();
    for mode in [FilterMode::Half, FilterMode::FarField] {
        let rep = mc_noise_covariance(&ctx, &s.mesh, spec.sigma, mode, &cfg)?;
        for (p, e) in rep.entries.iter().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    let _ = writeln!(
                        cov,
                        "{mode:?},{p},{a},{b},{},{},{},{},{}",
                        num(e.empirical[a][b].re),
                        num(e.empirical[a][b].im),
                        num(e.prediction[a][b]),
                        num(e.std_error_re[a][b]),
                        num(e.std_error_im[a][b])
                    );
                }
            }
        }
        let e = &rep.entries[0];
        traces.push((0..3).map(|a| e.empirical[a][a].re).sum::<f64>());
    }
    let _ = writeln!(cov, "# half_vs_farfield trace ratio at z_D = {}", num(traces[1] / traces[0]));

    let mut snr = header(s);
    snr.push_str("config,n_directions,rho,sigma,signal,mean,std,snr,predicted_variance\n");
    let n = s.incidences.n();
    let rho = s.inclusion.rho;
    let configs = [("base", n, rho, spec.sigma), ("4n", 4 * n, rho, spec.sigma), ("2rho", n, 2.0 * rho, spec.sigma), ("2sigma", n, rho, 2.0 * spec.sigma)];
    let mut snrs = Vec::new();
    for (i, (name, nd, r, sig)) in configs.iter().enumerate() {
        let mut inc = s.inclusion.clone();
        inc.rho = *r;
        let inc = Inclusion::custom(inc.center, inc.rho, inc.ref_volume, inc.m_mu, inc.m_eps)?;
        let set = IncidenceSet::fibonacci(*nd)?;
        let data = synthesize_all(&s.materials, &inc, &s.mesh, &set.incidences())?;
        let st = mc_snr(&s.materials, &s.trial, &data, zd, *sig, spec.filter_mode, n_trials, s.seed.wrapping_add(i as u64 + 1))?;
        let mut pred = 0.0;
        for kind in [Kind::Permeable, Kind::Dielectric] {
            pred += td_cov_prediction(kind, zd, zd, &s.materials, *sig, *nd)?;
        }
        let _ = writeln!(snr, "{name},{nd},{},{},{},{},{},{},{}", num(*r), num(*sig), num(st.signal), num(st.mean), num(st.std), num(st.snr), num(pred));
        snrs.push(st.snr);
    }
    let _ = writeln!(snr, "# ratio_4n = {} (expect 2)", num(snrs[1] / snrs[0]));
    let _ = writeln!(snr, "# ratio_2rho = {} (expect 8)", num(snrs[2] / snrs[0]));
    let _ = writeln!(snr, "# ratio_2sigma = {} (expect 0.5)", num(snrs[3] / snrs[0]));
    let f1 = write_file(out, "noise_covariance.csv", &cov)?;
    let f2 = write_file(out, "snr_scaling.csv", &snr)?;
    write_run_record(s, out, "mc-noise", started, &[f1, f2])?;
    Ok(true)
}

pub fn cmd_speckle(s: &Scenario, out: &Path) -> Result<bool> {
    let started = Instant::now();
    let md = s.medium.as_ref().ok_or_else(|| Error::CheckFailed("scenario has no [noise.medium] block".into()))?;
    let zd = s.inclusion.center;
    let ctx = s.materials.wave()?;
    let mut b = header(s);
    b.push_str("kind,z_offset_over_lambda,prediction,empirical,std_error,ratio,realizations\n");
    for off in [0.0, 0.25] {
        let z2: Vec3 = add(zd, [off * 2.0 * std::f64::consts::PI / ctx.kappa, 0.0, 0.0]);
        let c = speckle_covariance(&md.spec, &s.materials, &s.trial, &s.incidences.incidences(), zd, z2, md.n_realizations)?;
        let _ = writeln!(
            b,
            "{:?},{off},{},{},{},{},{}",
            md.spec.kind,
            num(c.prediction),
            num(c.empirical),
            num(c.std_error),
            num(c.empirical / c.prediction),
            c.n_realizations
        );
    }
    if !md.spec.born_regime() {
        eprintln!("warning: medium sigma above 0.2, Born linearization is doubtful");
    }
    let f = write_file(out, "speckle.csv", &b)?;
    write_run_record(s, out, "speckle", started, &[f])?;
    Ok(true)
}
