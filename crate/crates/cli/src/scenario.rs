//! End-to-end scenario execution: build the requested construction, run its
//! verification suite, and assemble the report.

use std::path::Path;
use std::time::Instant;

use amalgam_core::extend::{
    boca_extend, boca_extend_linear, extend_representations, RepresentationExtension,
    UcpExtension,
};
use amalgam_core::freeprod::{FreeElement, FreeLetter};
use amalgam_core::linalg::fro_diff;

use crate::error::{CliError, CliResult};
use crate::instance::{matrix_to_json, BuiltInstance, InstanceFile, Mode};
use crate::report::{EvaluatedValue, Report, TowerStats};

/// Command-line options that modify a run.
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub mode: Option<Mode>,
    pub depth: Option<usize>,
    pub check_tol: Option<f64>,
    pub check_all: bool,
}

const RESTRICTION_TOL: f64 = 1e-8;
const UNITALITY_TOL: f64 = 1e-10;
const BLOCK_TOL: f64 = 1e-8;
const PRODUCT_TOL: f64 = 1e-7;
const CP_TOL: f64 = 1e-8;
const TRUNCATION_TOL: f64 = 1e-12;
const OBSERVATIONAL_TOL: f64 = 1e-8;

/// Runs one instance file end to end and returns the report.
///
/// I/O and schema problems surface as errors (exit 1); mathematical
/// rejections are recorded in the report with `pass = false` (exit 2).
pub fn run_scenario(path: &Path, flags: &RunFlags) -> CliResult<Report> {
    let file = InstanceFile::from_path(path)?;
    run_instance(&file, flags)
}

/// Same as [`run_scenario`] for an already-parsed file.
pub fn run_instance(file: &InstanceFile, flags: &RunFlags) -> CliResult<Report> {
    let start = Instant::now();
    let mode = flags.mode.unwrap_or(file.mode);
    let depth = flags.depth.unwrap_or(file.depth);
    let mut report = Report::new(file.name.clone(), mode, depth, file.seed);

    let built = match file.build(flags.depth, flags.check_tol) {
        Ok(b) => b,
        Err(CliError::Core(e)) => {
            report.record_rejection("input validation", &e.to_string());
            report.timings.total_ms = ms_since(start);
            report.finalize();
            return Ok(report);
        }
        Err(other) => return Err(other),
    };

    let construction_start = Instant::now();
    let outcome = construct(&built, mode);
    report.timings.construction_ms = ms_since(construction_start);
    let constructed = match outcome {
        Ok(c) => c,
        Err(CliError::Core(e)) => {
            report.record_rejection("construction", &e.to_string());
            report.timings.total_ms = ms_since(start);
            report.finalize();
            return Ok(report);
        }
        Err(other) => return Err(other),
    };

    let checks_start = Instant::now();
    if let Err(e) = run_checks(&constructed, &built, flags, &mut report) {
        report.record_rejection("verification", &e.to_string());
    }
    report.timings.checks_ms = ms_since(checks_start);
    report.timings.total_ms = ms_since(start);
    report.finalize();
    Ok(report)
}

enum Constructed {
    Ucp(UcpExtension),
    Rep(RepresentationExtension),
}

impl Constructed {
    fn ext(&self) -> &UcpExtension {
        match self {
            Constructed::Ucp(e) => e,
            Constructed::Rep(r) => &r.ext,
        }
    }
}

fn construct(built: &BuiltInstance, mode: Mode) -> CliResult<Constructed> {
    match mode {
        Mode::Boca => {
            let maps = built
                .maps
                .clone()
                .ok_or_else(|| CliError::Schema("mode boca needs the maps section".into()))?;
            Ok(Constructed::Ucp(boca_extend(
                maps,
                built.embeddings.clone(),
                built.expectations.clone(),
                built.depth,
                built.dim_cap,
                &built.tol,
            )?))
        }
        Mode::BocaLinear => {
            let maps = built.maps.clone().ok_or_else(|| {
                CliError::Schema("mode boca-linear needs the maps section".into())
            })?;
            Ok(Constructed::Ucp(boca_extend_linear(
                maps,
                built.embeddings.clone(),
                built.depth,
                built.dim_cap,
                &built.tol,
            )?))
        }
        Mode::Corollary => {
            let cor = built.corollary.as_ref().ok_or_else(|| {
                CliError::Schema("mode corollary needs the corollary section".into())
            })?;
            Ok(Constructed::Rep(extend_representations(
                cor.sigmas.clone(),
                cor.inclusions.clone(),
                cor.inner_embeddings.clone(),
                built.depth,
                built.dim_cap,
                &built.tol,
            )?))
        }
    }
}

fn run_checks(
    constructed: &Constructed,
    built: &BuiltInstance,
    flags: &RunFlags,
    report: &mut Report,
) -> CliResult<()> {
    let ext = constructed.ext();
    report.tower = Some(TowerStats {
        total_dim: ext.tower().total_dim(),
        dims: ext.tower().dims_by_word(),
    });

    report.record(
        "restriction_identity",
        ext.restriction_residual()?,
        RESTRICTION_TOL,
    );
    report.record("unitality", ext.unitality_residual()?, UNITALITY_TOL);
    report.record("seed_split", ext.seed_split_residual(), BLOCK_TOL);
    report.record(
        "tower_recursion_identity",
        ext.tower().recursion_identity_residual(),
        BLOCK_TOL,
    );
    report.record(
        "tower_kernel_block",
        ext.tower().kernel_block_residual(),
        BLOCK_TOL,
    );
    report.record(
        "tower_edge_representation",
        ext.tower().edge_representation_residual(),
        BLOCK_TOL,
    );
    if let Constructed::Rep(rext) = constructed {
        report.record("c_reduction", rext.c_reduction_residual, BLOCK_TOL);
        report.record("c_compression", rext.c_compression_residual, BLOCK_TOL);
        report.record("blockwise_agreement", rext.agreement_residual, BLOCK_TOL);
    }

    // evaluate the requested elements
    for (name, element) in &built.elements {
        match ext.evaluate(element) {
            Ok(r) => report.values.push(EvaluatedValue {
                name: name.clone(),
                matrix: matrix_to_json(&r.value),
                blocks_touched: r.blocks_touched,
            }),
            Err(e) => report.record_rejection(format!("evaluate {name}"), &e.to_string()),
        }
    }

    if flags.check_all {
        run_extended_checks(ext, built, report)?;
    }
    Ok(())
}

/// The full invariant battery behind `--check-all`.
fn run_extended_checks(
    ext: &UcpExtension,
    built: &BuiltInstance,
    report: &mut Report,
) -> CliResult<()> {
    let am = ext.amalgam().clone();
    let exps = ext.tower().expectations().to_vec();

    // hermiticity and normal-form observational correctness per element
    for (name, element) in &built.elements {
        match ext.hermiticity_residual(element) {
            Ok(res) => {
                report.record(format!("hermiticity({name})"), res, OBSERVATIONAL_TOL);
            }
            Err(e) => report.record_rejection(format!("hermiticity({name})"), &e.to_string()),
        }
        let nf = match am.normal_form(element, &exps) {
            Ok(nf) => nf,
            Err(e) => {
                report.record_rejection(format!("normal_form({name})"), &e.to_string());
                continue;
            }
        };
        report.record(
            format!("normal_form_invariant({name})"),
            am.normalized_residual(&nf, &exps),
            OBSERVATIONAL_TOL,
        );
        let v1 = ext.evaluate(element)?.value;
        let v2 = ext.evaluate(&nf)?.value;
        report.record(
            format!("normal_form_observational({name})"),
            fro_diff(&v1, &v2),
            OBSERVATIONAL_TOL,
        );
    }

    // exhaustive product formula over kernel-basis letters
    let kernel_bases: Vec<Vec<FreeLetter>> = (0..am.num_indices())
        .map(|i| -> CliResult<Vec<FreeLetter>> {
            let cols = exps[i].kernel_coords(&built.tol)?;
            Ok((0..cols.ncols())
                .map(|c| FreeLetter {
                    index: i,
                    coords: cols.column(c).into_owned(),
                })
                .collect())
        })
        .collect::<CliResult<_>>()?;
    let mut max_len = ext.depth().min(3);
    loop {
        let words = alternating_kernel_words(&kernel_bases, max_len);
        if words.len() <= 2000 || max_len == 1 {
            let mut worst = 0.0_f64;
            for w in &words {
                worst = worst.max(ext.verify_product_formula(w)?);
            }
            report.record(
                format!("product_formula(len<={max_len}, {} words)", words.len()),
                worst,
                PRODUCT_TOL,
            );
            break;
        }
        max_len -= 1;
    }

    // complete-positivity witness on a small word family
    if ext.depth() >= 2 {
        let mut family: Vec<FreeElement> = vec![am.unit()];
        'fill: for letters in &kernel_bases {
            for l in letters {
                family.push(am.letter_from_coords(l.index, l.coords.clone()));
                if family.len() >= 4 {
                    break 'fill;
                }
            }
        }
        if ext.depth() >= 4 {
            if let (Some(a), Some(b)) = (
                kernel_bases.first().and_then(|v| v.first()),
                kernel_bases.get(1).and_then(|v| v.first()),
            ) {
                let word = am.multiply(
                    &am.letter_from_coords(a.index, a.coords.clone()),
                    &am.letter_from_coords(b.index, b.coords.clone()),
                )?;
                family.push(word);
            }
        }
        let witness = ext.ucp_gram_check(&family)?;
        report.record(
            format!("cp_witness({} words)", family.len()),
            (-witness.min_eig).max(0.0),
            CP_TOL,
        );
        report.record("cp_witness_hermiticity", witness.herm_residual, CP_TOL);
    }

    // truncation exactness against a one-deeper rebuild
    let deeper = match rebuild_deeper(ext, built) {
        Ok(d) => d,
        Err(CliError::Core(e)) => {
            report.record_rejection("truncation_exactness rebuild", &e.to_string());
            return Ok(());
        }
        Err(other) => return Err(other),
    };
    let mut probes: Vec<FreeElement> = built.elements.iter().map(|(_, e)| e.clone()).collect();
    for letters in &kernel_bases {
        if let Some(l) = letters.first() {
            probes.push(am.letter_from_coords(l.index, l.coords.clone()));
        }
    }
    let mut worst = 0.0_f64;
    for p in &probes {
        let v1 = ext.evaluate(p)?.value;
        let v2 = deeper.evaluate(p)?.value;
        worst = worst.max(fro_diff(&v1, &v2));
    }
    report.record(
        format!("truncation_exactness({} probes)", probes.len()),
        worst,
        TRUNCATION_TOL,
    );
    Ok(())
}

fn rebuild_deeper(ext: &UcpExtension, built: &BuiltInstance) -> CliResult<UcpExtension> {
    let maps = built
        .maps
        .clone()
        .unwrap_or_else(|| ext.maps().to_vec());
    if ext.inner_dim() == ext.output_dim() && built.maps.is_some() {
        Ok(boca_extend(
            maps,
            built.embeddings.clone(),
            built.expectations.clone(),
            ext.depth() + 1,
            built.dim_cap,
            &built.tol,
        )?)
    } else if built.maps.is_some() {
        Ok(boca_extend_linear(
            maps,
            built.embeddings.clone(),
            ext.depth() + 1,
            built.dim_cap,
            &built.tol,
        )?)
    } else {
        // corollary mode: rebuild through the inner maps directly
        Ok(boca_extend(
            ext.inner_maps().to_vec(),
            ext.tower().embeddings().to_vec(),
            vec![None; ext.inner_maps().len()],
            ext.depth() + 1,
            built.dim_cap,
            &built.tol,
        )?)
    }
}

/// All alternating words with letters drawn from the kernel bases, lengths
/// `1..=max_len`, in deterministic order.
pub fn alternating_kernel_words(
    kernel_bases: &[Vec<FreeLetter>],
    max_len: usize,
) -> Vec<Vec<FreeLetter>> {
    let n = kernel_bases.len();
    let mut out = Vec::new();
    let mut level: Vec<Vec<FreeLetter>> = Vec::new();
    for i in 0..n {
        for l in &kernel_bases[i] {
            level.push(vec![l.clone()]);
        }
    }
    for _ in 0..max_len {
        out.extend(level.iter().cloned());
        let mut next = Vec::new();
        for w in &level {
            let last = w.last().unwrap().index;
            for i in 0..n {
                if i == last {
                    continue;
                }
                for l in &kernel_bases[i] {
                    let mut w2 = w.clone();
                    w2.push(l.clone());
                    next.push(w2);
                }
            }
        }
        level = next;
    }
    out
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
