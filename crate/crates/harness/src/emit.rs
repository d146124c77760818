//! Writing study results: fixed-schema CSV, a long-format data file for
//! plotting tools, and a metadata file from which every row can be rerun.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::catalog::{CaseSpec, Reference};
use crate::error::HarnessError;
use crate::study::{CaseOutcome, CellFailure, ConvergenceRecord, EigenRecord, RateStatus, SpectrumSeries};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `case,k,N,n_b,J,error_inf,rate`, one row per cell in `(k, N)` order.
pub fn write_convergence_csv(record: &ConvergenceRecord, mut out: impl Write) -> Result<(), HarnessError> {
    writeln!(out, "case,k,N,n_b,J,error_inf,rate")?;
    for r in &record.rows {
        let rate = record.rate(r.k).and_then(|e| e.slope).unwrap_or(f64::NAN);
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.case,
            r.k,
            r.n,
            r.n_b,
            r.half_width,
            num(r.error_inf),
            num(rate)
        )?;
    }
    Ok(())
}

/// `case,k,N,metric,value`: every per-cell quantity plus pairwise rates
/// (listed under the coarser grid of each pair).
pub fn write_long_csv(record: &ConvergenceRecord, mut out: impl Write) -> Result<(), HarnessError> {
    writeln!(out, "case,k,N,metric,value")?;
    for r in &record.rows {
        writeln!(out, "{},{},{},error_inf,{}", r.case, r.k, r.n, num(r.error_inf))?;
        writeln!(out, "{},{},{},n_b,{}", r.case, r.k, r.n, r.n_b)?;
        writeln!(out, "{},{},{},J,{}", r.case, r.k, r.n, r.half_width)?;
        writeln!(out, "{},{},{},constraint_residual,{}", r.case, r.k, r.n, num(r.residual))?;
        writeln!(out, "{},{},{},within_tolerance,{}", r.case, r.k, r.n, u8::from(r.within_tolerance))?;
    }
    if let Some(rn) = record.reference_n {
        for (k, res) in &record.reference_residuals {
            writeln!(out, "{},{},{},reference_residual,{}", record.case, k, rn, num(*res))?;
        }
    }
    for (k, rate) in &record.rates {
        for (n, p) in &rate.pairwise {
            writeln!(out, "{},{},{},pairwise_rate,{}", record.case, k, n, num(*p))?;
        }
    }
    Ok(())
}

/// `k,N,j,abs_coefficient`.
pub fn write_spectrum_csv(spectra: &[SpectrumSeries], mut out: impl Write) -> Result<(), HarnessError> {
    writeln!(out, "k,N,j,abs_coefficient")?;
    for s in spectra {
        for (j, m) in s.magnitudes.iter().enumerate() {
            writeln!(out, "{},{},{},{}", s.k, s.n, j, num(*m))?;
        }
    }
    Ok(())
}

/// `case,N,k,shift,eigenvalue,scaled_eigenvalue,iterations,final_deviation,residual`.
pub fn write_eigen_csv(record: &EigenRecord, mut out: impl Write) -> Result<(), HarnessError> {
    writeln!(
        out,
        "case,N,k,shift,eigenvalue,scaled_eigenvalue,iterations,final_deviation,residual"
    )?;
    for r in &record.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.case,
            r.n,
            r.k,
            num(r.shift),
            num(r.eigenvalue),
            num(r.scaled),
            r.iterations,
            num(r.final_deviation),
            num(r.residual)
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RateMeta {
    k: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    status: RateStatus,
    points_used: usize,
    pairwise: Vec<f64>,
}

#[derive(Serialize)]
struct EigenFailureMeta {
    n: usize,
    k: i32,
    shift: f64,
    message: String,
}

/// Provenance table; a metadata file is also a valid run config.
#[derive(Serialize)]
struct RunInfo {
    tool: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    reference: Reference,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_n: Option<usize>,
    rates: Vec<RateMeta>,
    failures: Vec<CellFailure>,
    /// `[k, N]` of cells whose constraint residual missed tolerance; their
    /// errors are kept but flagged.
    over_tolerance: Vec<[i64; 2]>,
    eigen_failures: Vec<EigenFailureMeta>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    case: [&'a CaseSpec; 1],
    run: RunInfo,
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write all files for one case outcome into `dir` and return their paths.
pub fn emit(
    outcome: &CaseOutcome,
    spec: &CaseSpec,
    dir: &Path,
    threads: Option<usize>,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let stem = spec.stem();
    let mut written = Vec::new();
    let mut meta = RunInfo {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        threads,
        reference: spec.id.reference(),
        reference_n: None,
        rates: Vec::new(),
        failures: Vec::new(),
        over_tolerance: Vec::new(),
        eigen_failures: Vec::new(),
    };
    if let Some(record) = outcome.convergence() {
        let main = dir.join(format!("{stem}.csv"));
        let mut f = create(&main)?;
        write_convergence_csv(record, &mut f)?;
        f.flush()?;
        written.push(main);
        let long = dir.join(format!("{stem}_long.csv"));
        let mut f = create(&long)?;
        write_long_csv(record, &mut f)?;
        f.flush()?;
        written.push(long);
        meta.reference_n = record.reference_n;
        meta.failures = record.failures.clone();
        meta.over_tolerance = record
            .rows
            .iter()
            .filter(|r| !r.within_tolerance && r.error_inf.is_finite())
            .map(|r| [i64::from(r.k), r.n as i64])
            .collect();
        meta.rates = record
            .rates
            .iter()
            .map(|(k, r)| RateMeta {
                k: *k,
                slope: r.slope,
                status: r.status,
                points_used: r.points_used,
                pairwise: r.pairwise.iter().map(|p| p.1).collect(),
            })
            .collect();
    }
    if let CaseOutcome::Continuation { spectra, .. } = outcome {
        let path = dir.join(format!("{stem}_spectrum.csv"));
        let mut f = create(&path)?;
        write_spectrum_csv(spectra, &mut f)?;
        f.flush()?;
        written.push(path);
    }
    if let Some(record) = outcome.eigen() {
        let path = dir.join(format!("{stem}.csv"));
        let mut f = create(&path)?;
        write_eigen_csv(record, &mut f)?;
        f.flush()?;
        written.push(path);
        meta.eigen_failures = record
            .failures
            .iter()
            .map(|(n, k, shift, message)| EigenFailureMeta {
                n: *n,
                k: *k,
                shift: *shift,
                message: message.clone(),
            })
            .collect();
    }
    let path = dir.join(format!("{stem}_meta.toml"));
    let meta = Metadata { case: [spec], run: meta };
    std::fs::write(&path, toml::to_string(&meta)?)?;
    written.push(path);
    Ok(written)
}
