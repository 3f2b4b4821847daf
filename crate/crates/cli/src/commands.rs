use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde_json::{json, Value};

use nosig::bases::{
    twisted_qutrit_basis, twisted_qutrit_certificate, find_local_pairs, twist_search, validate_unentangled, validate_with_tol, TwistCertificate,
    TwistOutcome, UnentangledBasis,
};
use nosig::error::Error;
use nosig::framefn::{make_signalling_example, FrameFunction, SampleTable, SampleTableJson};
use nosig::gleason::{
    design_from_states, effect_design, reconstruct_povm, reconstruct_pvm, sample_effects, spanning_design, ANOMALY_RESIDUAL,
};
use nosig::keller::{basis_from_clique, clique_search, verify_clique, CliqueCandidate, Graph, SearchMode};
use nosig::nosig::{
    check_box, check_framefn, chsh_lp_ladder, chsh_optimize, chsh_value, chsh_value_box, pr_box, quantum_extension,
    qubit_realizations,    standard_settings, ChshInstance, CorrelationBox, ExtensionVerdict, INFEASIBILITY_THRESHOLD,
};
use nosig::orientation::{classify_orientation, jordan_symmetrization_check, kraus_factorize, OrientationClass, PSD_TOL};
use nosig::presheaf::{check_section, section_from_framefn, section_from_operator, ContextFamily, SectionJson, SectionTable};
use nosig::wire::{read_json, read_operator, write_json, BasisJson, CertificateJson, OperatorJson};
use nosig::{HermitianOperator, Result};

use crate::report::{Comparison, RunReport, Verdict};
use crate::{
    ChshArgs, ClassifyArgs, GraphArg, KellerBasisArgs, KellerSearchArgs, KellerVerifyArgs, NosigArgs, OperatorSource, PrboxArgs,
    ReconstructArgs, ReconstructPath, SectionBuildArgs, SectionCheckArgs, TwistArgs,
};

const RECOVERY_TOL: f64 = 1e-8;
const TRACE_TOL: f64 = 1e-8;
const NOSIG_TOL: f64 = 1e-10;
const TSIRELSON_SLACK: f64 = 1e-8;
const LADDER_CEILING: f64 = 3.2;
const SECTION_TOL: f64 = 1e-10;
const ORTHO_TOL: f64 = 1e-10;
const REPLAY_TOL: f64 = 1e-8;
const KRAUS_TOL: f64 = 1e-10;
const KRAUS_TRIALS: usize = 16;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

fn load_operator(src: &OperatorSource) -> Result<Option<HermitianOperator>> {
    match (&src.t, &src.fixture) {
        (Some(_), Some(_)) => usage("give either --t or --fixture, not both"),
        (Some(path), None) => read_operator(path).map(Some),
        (None, Some(name)) => nosig::fixtures::named(name)
            .map(Some)
            .ok_or_else(|| Error::Usage(format!("unknown fixture {name:?}"))),
        (None, None) => Ok(None),
    }
}

fn require_operator(src: &OperatorSource) -> Result<HermitianOperator> {
    load_operator(src)?.ok_or_else(|| Error::Usage("an operator is required (--t or --fixture)".into()))
}

fn two_dims(dims: &[usize]) -> Result<[usize; 2]> {
    match dims {
        [a, b] => Ok([*a, *b]),
        _ => usage(format!("expected two local dimensions, got {dims:?}")),
    }
}

fn read_table(path: &Path) -> Result<SampleTable> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        SampleTable::read_csv(File::open(path)?, false)
    } else {
        SampleTable::from_json(&read_json::<SampleTableJson>(path)?)
    }
}

fn read_box(path: &Path) -> Result<CorrelationBox> {
    CorrelationBox::from_json(&read_json(path)?)
}

/// Exactly one of the frame-function sources, with its reference operator.
fn frame_function(src: &OperatorSource, signalling: Option<f64>, dims: &[usize]) -> Result<(FrameFunction, Option<HermitianOperator>)> {
    match (load_operator(src)?, signalling) {
        (Some(_), Some(_)) => usage("give either an operator or --signalling, not both"),
        (Some(t), None) => Ok((FrameFunction::from_operator(t.clone()), Some(t))),
        (None, Some(theta)) => Ok((make_signalling_example(dims, theta)?.f, None)),
        (None, None) => usage("no input: give --t, --fixture or --signalling"),
    }
}

pub fn reconstruct(a: &ReconstructArgs, seed: u64, r: &mut RunReport) -> Result<()> {
    let (rec, reference, weight, samples) = match a.path {
        ReconstructPath::Pvm => {
            let (f, reference) = if let Some(path) = &a.table {
                if load_operator(&a.source)?.is_some() || a.signalling.is_some() {
                    return usage("give either a table or another source, not both");
                }
                (FrameFunction::Tabulated(read_table(path)?), None)
            } else {
                frame_function(&a.source, a.signalling, &a.dims)?
            };
            let dims = f.dims();
            let design = r.time("design", || match &f {
                FrameFunction::Tabulated(table) => {
                    design_from_states(&dims, table.samples().iter().map(|(s, _)| s.clone()).collect(), seed)
                }
                _ => spanning_design(&dims, a.oversample, seed),
            })?;
            let n = design.states.len();
            let rec = r.time("reconstruct", || reconstruct_pvm(&f, &design, a.holdout))?;
            (rec, reference, f.declared_weight(), n)
        }
        ReconstructPath::Povm => {
            if a.table.is_some() || a.signalling.is_some() {
                return usage("the effect path reconstructs from an operator (--t or --fixture)");
            }
            let t = require_operator(&a.source)?;
            let design = effect_design(t.dims(), a.extra, seed);
            let samples = sample_effects(&t, &design);
            let rec = r.time("reconstruct", || reconstruct_povm(&samples, t.dims(), seed))?;
            let w = t.trace();
            (rec, Some(t), Some(w), samples.len())
        }
    };
    r.verdict(Verdict::numeric("residual", rec.residual, Comparison::AtMost, ANOMALY_RESIDUAL, "held-out max deviation"));
    if let Some(t) = &reference {
        let err = rec.t.sub(t)?.frobenius_norm();
        r.verdict(Verdict::numeric("recovery", err, Comparison::AtMost, RECOVERY_TOL, "Frobenius distance to the source operator"));
    }
    if let Some(w) = weight {
        let dev = (rec.t.trace() - w).abs();
        r.verdict(Verdict::numeric("trace", dev, Comparison::AtMost, TRACE_TOL, format!("|tr t - {w}|")));
    }
    r.detail("samples", json!(samples));
    r.detail("reconstruction", rec.to_json());
    if let Some(path) = &a.write_t {
        write_json(path, &OperatorJson::from(&rec.t))?;
        r.artifact(path);
    }
    Ok(())
}

pub fn check_nosig(a: &NosigArgs, seed: u64, r: &mut RunReport) -> Result<()> {
    let boxed = match (&a.box_path, a.pr_box) {
        (Some(_), true) => return usage("give either --box or --pr-box"),
        (Some(path), false) => Some(read_box(path)?),
        (None, true) => Some(pr_box()),
        (None, false) => None,
    };
    let report = match boxed {
        Some(b) => {
            if load_operator(&a.source)?.is_some() || a.signalling.is_some() {
                return usage("give either a box or a frame function");
            }
            r.time("check", || check_box(&b))?
        }
        None => {
            let (f, _) = frame_function(&a.source, a.signalling, &a.dims)?;
            r.time("check", || check_framefn(&f, a.trials, seed))?
        }
    };
    let detail = if report.passes(NOSIG_TOL) {
        "marginals independent of the remote choice".to_string()
    } else {
        "signalling witness found".to_string()
    };
    r.verdict(Verdict::numeric("no-signalling", report.max_discrepancy, Comparison::AtMost, NOSIG_TOL, detail));
    r.detail("nosig", report.to_json());
    Ok(())
}

fn parse_settings(s: &str) -> Result<[[f64; 3]; 4]> {
    let dirs: Vec<Vec<f64>> = s
        .split(';')
        .map(|d| d.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| Error::Usage(format!("bad setting {x:?}: {e}")))).collect())
        .collect::<Result<_>>()?;
    if dirs.len() != 4 || dirs.iter().any(|d| d.len() != 3) {
        return usage("settings are four directions x,y,z separated by ';'");
    }
    Ok([0, 1, 2, 3].map(|k| [dirs[k][0], dirs[k][1], dirs[k][2]]))
}

pub fn chsh(a: &ChshArgs, seed: u64, r: &mut RunReport) -> Result<()> {
    let bound = 2.0 * std::f64::consts::SQRT_2;
    let value = if let Some(path) = &a.box_path {
        if load_operator(&a.source)?.is_some() || a.optimize {
            return usage("a box is evaluated as given; drop the operator and --optimize");
        }
        let b = read_box(path)?;
        r.detail("mode", json!("box"));
        chsh_value_box(&b)?
    } else {
        let t = require_operator(&a.source)?;
        if a.optimize {
            if a.settings.is_some() {
                return usage("--settings and --optimize are exclusive");
            }
            let opt = r.time("optimize", || chsh_optimize(&t, a.restarts, seed))?;
            r.detail("mode", json!("optimize"));
            r.detail("settings", json!(opt.settings));
            r.detail("restarts", json!(a.restarts));
            r.detail("best_restart", json!(opt.restart));
            opt.value
        } else {
            let dirs = a.settings.as_deref().map(parse_settings).transpose()?.unwrap_or_else(standard_settings);
            let v = chsh_value(&ChshInstance::from_bloch(dirs, t)?);
            r.detail("mode", json!("value"));
            r.detail("settings", json!(dirs));
            if let Some(w) = &v.warning {
                r.detail("warning", json!(w));
            }
            v.value
        }
    };
    r.detail("value", json!(value));
    r.detail("local_bound_exceeded", json!(value > 2.0 + 1e-12));
    r.verdict(Verdict::numeric("tsirelson", value, Comparison::AtMost, bound + TSIRELSON_SLACK, format!("CHSH value against 2*sqrt(2) = {bound}")));
    Ok(())
}

pub fn prbox(a: &PrboxArgs, seed: u64, r: &mut RunReport) -> Result<()> {
    let (b, name) = match &a.box_path {
        Some(path) => (read_box(path)?, "box"),
        None => (pr_box(), "PR box"),
    };
    // tables without realizations are tested at the standard qubit settings
    let b = if b.realizations().is_some() {
        b
    } else {
        r.detail("realizations", json!("standard qubit settings"));
        b.with_realizations(qubit_realizations(standard_settings())?)?
    };
    let verdict = r.time("extension", || quantum_extension(&b, a.samples, seed))?;
    r.detail("extension", verdict.to_json());
    r.detail("samples", json!(a.samples));
    match &verdict {
        ExtensionVerdict::Infeasible { residual_floor, .. } => r.verdict(Verdict::numeric(
            "excluded",
            *residual_floor,
            Comparison::AtLeast,
            INFEASIBILITY_THRESHOLD,
            format!("{name} has no locally positive operator (LP residual floor)"),
        )),
        other => r.verdict(Verdict::flag("excluded", false, format!("{name}: extension verdict {}", other.label()))),
    }
    if a.skip_ladder {
        return Ok(());
    }
    let mut counts = a.ladder.clone();
    counts.sort_unstable();
    counts.dedup();
    if counts.is_empty() {
        return usage("the ladder needs at least one constraint count");
    }
    let steps = r.time("ladder", || chsh_lp_ladder(standard_settings(), &counts, seed))?;
    let monotone = steps.windows(2).all(|w| w[1].value <= w[0].value + 1e-12);
    let last = steps.last().expect("non-empty");
    r.verdict(Verdict::flag("ladder-nonincreasing", monotone, "LP CHSH bound along increasing constraint counts"));
    r.verdict(Verdict::numeric("ladder-final", last.value, Comparison::AtMost, LADDER_CEILING, format!("LP bound with {} constraints", last.samples)));
    r.detail("ladder", json!(steps));
    if let Some(path) = &a.ladder_csv {
        let mut text = String::from("samples,value,bound_active\n");
        for s in &steps {
            text.push_str(&format!("{},{:?},{}\n", s.samples, s.value, s.bound_active));
        }
        std::fs::write(path, text)?;
        r.artifact(path);
    }
    Ok(())
}

fn replay_verdicts(cert: &TwistCertificate, r: &mut RunReport) -> Result<()> {
    let bases = cert.replay()?;
    let mut worst = 0.0f64;
    let mut complete = true;
    for b in &bases {
        let v = validate_with_tol(b, ORTHO_TOL);
        worst = worst.max(v.worst_overlap);
        complete &= v.complete && v.normalized;
    }
    r.verdict(Verdict::numeric(
        "intermediate-bases",
        worst,
        Comparison::AtMost,
        ORTHO_TOL,
        format!("worst overlap over {} bases", bases.len()),
    ));
    r.verdict(Verdict::flag("intermediate-completeness", complete, "every basis normalized with full cardinality"));
    let err = cert.replay_error()?;
    r.verdict(Verdict::numeric("replay", err, Comparison::AtMost, REPLAY_TOL, "final basis matches the product basis"));
    r.detail("moves", json!(cert.moves.len()));
    Ok(())
}

pub fn twist(a: &TwistArgs, r: &mut RunReport) -> Result<()> {
    let basis: Option<UnentangledBasis> = match (&a.basis, a.fig1) {
        (Some(_), true) => return usage("give either --fig1 or --basis"),
        (Some(path), false) => Some((&read_json::<BasisJson>(path)?).try_into()?),
        (None, true) => Some(twisted_qutrit_basis()),
        (None, false) => None,
    };
    let cert = if let Some(path) = &a.apply {
        if a.search {
            return usage("--apply replays a certificate; drop --search");
        }
        let cert: TwistCertificate = (&read_json::<CertificateJson>(path)?).try_into()?;
        if let Some(b) = &basis {
            if b != &cert.initial {
                return usage("the certificate starts from a different basis");
            }
        }
        cert
    } else if a.search {
        let b = basis.ok_or_else(|| Error::Usage("--search needs --basis or --fig1".into()))?;
        match r.time("search", || twist_search(&b, a.budget))? {
            TwistOutcome::Certified(c) => c,
            TwistOutcome::Exhausted(rep) => {
                r.detail("aligned", json!(rep.aligned));
                r.detail("total", json!(rep.total));
                r.detail("moves_applied", json!(rep.moves_applied.len()));
                r.verdict(Verdict::flag("certificate", false, format!("search exhausted: {}", rep.reason)));
                return Ok(());
            }
        }
    } else if a.fig1 {
        twisted_qutrit_certificate()
    } else {
        return usage("give --fig1, --apply or --search");
    };
    let start = std::time::Instant::now();
    replay_verdicts(&cert, r)?;
    r.record("replay", start);
    if let Some(path) = &a.write_certificate {
        write_json(path, &CertificateJson::from(&cert))?;
        r.artifact(path);
    }
    Ok(())
}

pub fn classify(a: &ClassifyArgs, seed: u64, r: &mut RunReport) -> Result<()> {
    let t = require_operator(&a.source)?;
    let rep = r.time("classify", || classify_orientation(&t))?;
    let best = rep.choi_min().max(rep.flipped_min());
    let detail = match rep.class {
        OrientationClass::Neither => format!("class {}: neither orientation is completely positive", rep.class.label()),
        c => format!("class {}", c.label()),
    };
    r.verdict(Verdict::numeric("orientation", best, Comparison::AtLeast, -PSD_TOL, detail));
    r.detail("orientation", rep.to_json());
    if a.kraus && rep.class != OrientationClass::Neither {
        let k = kraus_factorize(&t)?;
        let err = k.reconstruction_error(&t, KRAUS_TRIALS, seed)?;
        r.verdict(Verdict::numeric("kraus", err, Comparison::AtMost, KRAUS_TOL, format!("{} operators reproduce the map", k.operators.len())));
        r.detail("kraus", k.to_json());
    }
    if a.jordan_trials > 0 {
        let j = jordan_symmetrization_check(&t, a.jordan_trials, seed)?;
        r.verdict(Verdict::numeric("jordan", j.max_disagreement, Comparison::AtMost, PSD_TOL, "symmetrized maps agree under the flip"));
    }
    Ok(())
}

fn section_verdict(table: &SectionTable, family: &ContextFamily, r: &mut RunReport) -> Result<()> {
    let rep = r.time("check", || check_section(table, &family.edges))?;
    let detail = match (rep.max_distance > SECTION_TOL, rep.worst_traced_site) {
        (false, _) => format!("{} edges agree", rep.edges),
        (true, Some(site)) => format!("cross-site edge witness: site {site} traced out"),
        (true, None) => "local coarse-graining witness".to_string(),
    };
    r.verdict(Verdict::numeric("section-consistency", rep.max_distance, Comparison::AtMost, SECTION_TOL, detail));
    r.detail("consistency", rep.to_json());
    r.detail("contexts", json!(family.contexts.len()));
    Ok(())
}

pub fn section_build(a: &SectionBuildArgs, seed: u64, r: &mut RunReport) -> Result<()> {
    let t = load_operator(&a.source)?;
    let dims = match &t {
        Some(t) => two_dims(t.dims())?,
        None => two_dims(&a.dims)?,
    };
    let family = ContextFamily::seeded(dims, a.bases, seed)?;
    let table = r.time("build", || match (&t, a.signalling) {
        (Some(_), Some(_)) => usage("give either an operator or --signalling"),
        (Some(t), None) => section_from_operator(t, &family.contexts),
        (None, Some(theta)) => section_from_framefn(&make_signalling_example(&dims, theta)?.f, &family.contexts, &family.edges),
        (None, None) => usage("no input: give --t, --fixture or --signalling"),
    })?;
    section_verdict(&table, &family, r)?;
    if let Some(path) = &a.table_out {
        write_json(path, &table.to_json())?;
        r.artifact(path);
    }
    if let Some(path) = &a.family_out {
        write_json(path, &family.to_json())?;
        r.artifact(path);
    }
    Ok(())
}

pub fn section_check(a: &SectionCheckArgs, r: &mut RunReport) -> Result<()> {
    let family = ContextFamily::from_json(&read_json(&a.family)?)?;
    let table = SectionTable::from_json(&read_json::<SectionJson>(&a.table)?)?;
    section_verdict(&table, &family, r)
}

fn graph(g: GraphArg) -> Graph {
    match g {
        GraphArg::G => Graph::G,
        GraphArg::Gstar => Graph::GStar,
    }
}

fn read_clique(path: &Path) -> Result<CliqueCandidate> {
    CliqueCandidate::read(BufReader::new(File::open(path)?))
}

pub fn keller_verify(a: &KellerVerifyArgs, r: &mut RunReport) -> Result<()> {
    let c = read_clique(&a.file)?;
    let g = graph(a.graph);
    let rep = r.time("verify", || verify_clique(&c, g));
    let detail = match (rep.first_failure, rep.certificate) {
        (Some((i, j)), _) => format!("{} and {} are not adjacent in {}", c.vectors()[i], c.vectors()[j], g.label()),
        (None, Some(cert)) => cert.to_string(),
        (None, None) => format!("clique of size {} in {}", rep.size, g.label()),
    };
    r.verdict(Verdict::flag("clique", rep.is_clique(), detail));
    r.detail("clique", rep.to_json(&c));
    Ok(())
}

pub fn keller_search(a: &KellerSearchArgs, seed: u64, r: &mut RunReport) -> Result<()> {
    let g = graph(a.graph);
    let mode = if a.exhaustive { SearchMode::Exhaustive } else { SearchMode::Heuristic };
    let found = r.time("search", || clique_search(a.n, a.size, mode, g, a.budget, seed))?;
    r.detail("mode", json!(if a.exhaustive { "exhaustive" } else { "heuristic" }));
    match found {
        Some(c) => {
            let rep = verify_clique(&c, g);
            r.verdict(Verdict::flag("clique", rep.is_clique(), format!("clique of size {} in {}", c.len(), g.label())));
            r.detail("vectors", Value::from(c.vectors().iter().map(ToString::to_string).collect::<Vec<_>>()));
            if let Some(path) = &a.write {
                c.write(File::create(path)?)?;
                r.artifact(path);
            }
        }
        None => {
            let detail = if a.exhaustive {
                format!("no clique exists: no {}-clique of size {} for n = {}", g.label(), a.size, a.n)
            } else {
                format!("no clique found within {} moves", a.budget)
            };
            r.verdict(Verdict::flag("clique", false, detail));
        }
    }
    Ok(())
}

pub fn keller_basis(a: &KellerBasisArgs, r: &mut RunReport) -> Result<()> {
    let c = read_clique(&a.file)?;
    let tiling = verify_clique(&c, Graph::G);
    if !tiling.is_tiling() {
        r.verdict(Verdict::flag("tiling", false, format!("not a G-clique of size 2^{}", c.n())));
        r.detail("clique", tiling.to_json(&c));
        return Ok(());
    }
    let basis = basis_from_clique(&c)?;
    let v = r.time("validate", || validate_unentangled(&basis));
    r.verdict(Verdict::numeric("orthonormality", v.worst_overlap, Comparison::AtMost, ORTHO_TOL, format!("{} product states", v.cardinality)));
    r.verdict(Verdict::flag("completeness", v.complete && v.normalized, format!("{} of {}", v.cardinality, v.expected_cardinality)));
    let pairs = r.time("local_pairs", || find_local_pairs(basis.elements()));
    let facet_free = verify_clique(&c, Graph::GStar).is_clique();
    r.detail("facet_free", json!(facet_free));
    r.detail("local_pairs", json!(pairs.len()));
    if facet_free {
        r.verdict(Verdict::flag(
            "no-local-pairs",
            pairs.is_empty(),
            "elements pairwise differ on at least two sites, so no twist move applies",
        ));
    }
    if let Some(path) = &a.write {
        write_json(path, &BasisJson::from(&basis))?;
        r.artifact(path);
    }
    Ok(())
}
