use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::{json, Map, Value};

use sgap::cheeger::{cheeger_exact, cheeger_sweep, CutReport, MAX_EXACT_STATES};
use sgap::expanders::{build_family, expanding_constant_report};
use sgap::group::{spectral_radius_return, FreeWord, GroupElement, MatZ, ProbMeasure};
use sgap::lyapunov::{estimate_lyapunov, exact_u_n, furstenberg_bound, MatrixMeasure};
use sgap::markov::{gap_summary, RowMode, SolverOptions, WeightedChain};
use sgap::models::{
    build_bernoulli_schreier, build_cayley, build_pgl2_halfline, build_torus_schreier, build_tree,
    pgl2_cheeger_bound, FiniteMatrixGroup, HalfLineSpec, LabeledGraph, TruncationMode,
    DEFAULT_GROUP_BUDGET,
};
use sgap::spectral::{compressed_norm_weighted, radial_rayleigh, CompressionLadder, LimitClaim};

use crate::report::{Report, Table};

pub enum CommandError {
    Core(sgap::Error),
    Usage(String),
    Io(String),
}

impl From<sgap::Error> for CommandError {
    fn from(e: sgap::Error) -> Self {
        CommandError::Core(e)
    }
}

pub struct Outcome {
    pub report: Report,
    /// Set when a solver stopped short; the report is still written.
    pub unconverged: Option<String>,
}

type CmdResult = Result<Outcome, CommandError>;

/// The statement each subcommand computes, for `--cite`.
pub fn citation(command: &str) -> &'static str {
    match command {
        "tree-norm" => "Kesten: the simple random walk on the 2N-regular tree has spectral radius sqrt(2N-1)/N",
        "pgl2" => "Cheeger bound for the PGL2 Bruhat-Tits tree quotient: h >= (q-1)/(q+1)",
        "cheeger" => "Cheeger inequality h^2/8 <= lambda1 <= 2h for reversible chains",
        "cayley" => "Cayley graphs of SL_n(Z/pZ) with elementary generators",
        "torus" => "Sanov subgroup acting on the torus dual: the Schreier norm equals the regular one",
        "bernoulli" => "Bernoulli shift of the free group: finite configurations see the regular norm",
        "expanders" => "Expander lemma lambda1 >= (1 - ||pi0(mu)||)^2 / 2 for congruence quotients",
        "lyapunov" => "Furstenberg bound on the top Lyapunov exponent from the spectral radius",
        "return-prob" => "Return probabilities a_n^(1/2n) increase to the norm of the averaging operator",
        _ => "",
    }
}

fn config_of(args: &impl Serialize) -> Map<String, Value> {
    match serde_json::to_value(args) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn report_for(command: &str, args: &impl Serialize) -> Report {
    let mut r = Report::new(command);
    r.config = config_of(args);
    r
}

fn parse_int_list(s: &str) -> Result<Vec<i64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

/// `"1 2;0 1"` as an integer matrix.
fn parse_matrix(s: &str) -> Result<MatZ, String> {
    let rows: Vec<Vec<i64>> = s
        .split(';')
        .map(|r| {
            r.split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|e| format!("{t:?}: {e}")))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    MatZ::from_rows(&rows).map_err(|e| e.to_string())
}

/// Free-group letters `1, -1, 2, ...`; `e` is the empty word.
fn parse_word(s: &str) -> Result<Vec<i32>, String> {
    let s = s.trim();
    if s == "e" || s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<i32>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

fn sanov_pair() -> Vec<MatZ> {
    vec![
        MatZ::new(2, &[1, 2, 0, 1]).expect("valid"),
        MatZ::new(2, &[1, 0, 2, 1]).expect("valid"),
    ]
}

fn uniform_weights(graph: &LabeledGraph) -> Vec<f64> {
    vec![1.0 / graph.n_generators() as f64; graph.n_generators()]
}

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

#[derive(Args, Debug, Serialize)]
pub struct TreeNormArgs {
    /// Tree degree d >= 3.
    #[arg(long)]
    pub degree: u32,
    /// Depth of the generated ball.
    #[arg(long)]
    pub depth: u32,
    /// Compression radius (defaults to the depth).
    #[arg(long)]
    pub radius: Option<u32>,
    /// Also report the norm at every radius from 1 to the depth.
    #[arg(long)]
    pub ladder: bool,
    /// Decay of the radial test function.
    #[arg(long, default_value_t = 0.999)]
    pub lambda: f64,
    /// Support depth of the radial test function.
    #[arg(long, default_value_t = 2000)]
    pub rayleigh_depth: u32,
}

pub fn tree_norm(a: &TreeNormArgs) -> CmdResult {
    let radius = a.radius.unwrap_or(a.depth);
    if radius > a.depth {
        return Err(CommandError::Usage(format!(
            "radius {radius} exceeds depth {}",
            a.depth
        )));
    }
    let graph = build_tree(a.degree, a.depth)?;
    let w = uniform_weights(&graph);
    let est = compressed_norm_weighted(&graph, &w, Some(radius as usize))?;
    let d = a.degree as f64;
    let limit = 2.0 * (d - 1.0).sqrt() / d;
    let mut r = report_for("tree-norm", a);
    r.set("vertices", est.vertices);
    r.set("compressed_norm", est.norm);
    r.set("residual", est.residual);
    r.set("matvecs", est.matvecs);
    r.set("method", serde_json::to_value(est.method).expect("enum serializes"));
    r.set("converged", est.converged);
    r.set("kesten_limit", limit);
    r.set("radial_rayleigh", radial_rayleigh(a.degree, a.lambda, a.rayleigh_depth)?);
    let unconverged = (!est.converged).then(|| format!("compression at radius {radius}"));
    if a.ladder {
        let radii: Vec<usize> = (1..=a.depth as usize).collect();
        let claim = LimitClaim {
            value: limit,
            tag: "kesten".into(),
        };
        let ladder = CompressionLadder::evaluate(
            &radii,
            |rad| compressed_norm_weighted(&graph, &w, Some(rad)).map(|e| e.norm),
            Some(claim),
        )?;
        r.set("ladder_monotone_below_limit", ladder.check().is_ok());
        let mut t = Table::new(&["radius", "norm"]);
        for (rad, n) in ladder.radii.iter().zip(&ladder.norms) {
            t.push(vec![json!(rad), json!(n)]);
        }
        r.table = Some(t);
    }
    Ok(Outcome {
        report: r,
        unconverged,
    })
}

fn parse_mode(s: &str) -> Result<TruncationMode, String> {
    s.parse().map_err(|e: sgap::Error| e.to_string())
}

#[derive(Args, Debug, Serialize)]
pub struct Pgl2Args {
    /// Residue field size, a prime power.
    #[arg(long)]
    pub q: u64,
    /// Index N of the last state.
    #[arg(long)]
    pub trunc: usize,
    /// How the half-line is cut: compression or lumped.
    #[arg(long, value_parser = parse_mode, default_value = "lumped")]
    pub mode: TruncationMode,
}

pub fn pgl2(a: &Pgl2Args) -> CmdResult {
    let chain = build_pgl2_halfline(HalfLineSpec {
        q: a.q,
        n: a.trunc,
        mode: a.mode,
    })?;
    let q = a.q as f64;
    let spectrum = chain.spectrum()?;
    let mut r = report_for("pgl2", a);
    r.set("states", chain.len());
    r.set("cheeger_bound", pgl2_cheeger_bound(a.q)?);
    r.set("spectral_edge", 2.0 * q.sqrt() / (q + 1.0));
    r.set("detailed_balance_violation", chain.check_detailed_balance());
    r.set("top_eigenvalue", spectrum[0]);
    r.set("second_eigenvalue", spectrum[1]);
    r.set("bottom_eigenvalue", *spectrum.last().expect("at least three states"));
    let mut unconverged = None;
    if a.mode == TruncationMode::Lumped {
        let g = gap_summary(&chain, &SolverOptions::default())?;
        r.set("lambda1", g.lambda1.estimate);
        if !g.lambda1.converged {
            unconverged = Some("lambda1".to_string());
        }
        if chain.len() <= MAX_EXACT_STATES {
            let cut = cheeger_exact(&chain)?;
            r.set("cheeger_exact", cut.h);
            r.set("cheeger_argmin", cut.argmin_subset);
        }
    }
    let mut t = Table::new(&["index", "eigenvalue"]);
    for (i, v) in spectrum.iter().enumerate() {
        t.push(vec![json!(i), json!(v)]);
    }
    r.table = Some(t);
    Ok(Outcome {
        report: r,
        unconverged,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct CheegerArgs {
    /// Chain file with states, measure, transitions and row_mode.
    #[arg(long)]
    pub input: PathBuf,
    /// Enumerate every cut.
    #[arg(long, conflicts_with = "sweep")]
    pub exact: bool,
    /// Sweep the level sets of the lambda1 eigenfunction.
    #[arg(long)]
    pub sweep: bool,
}

fn cut_results(r: &mut Report, chain: &WeightedChain, cut: &CutReport) {
    r.set("h", cut.h);
    r.set("method", serde_json::to_value(cut.method).expect("enum serializes"));
    r.set("subsets_examined", cut.subset_count_examined);
    let labels: Vec<&str> = cut
        .argmin_subset
        .iter()
        .map(|&i| chain.labels()[i].as_str())
        .collect();
    r.set("argmin_subset", json!(labels));
}

pub fn cheeger(a: &CheegerArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| CommandError::Io(format!("{}: {e}", a.input.display())))?;
    let chain: WeightedChain = serde_json::from_str(&text).map_err(sgap::Error::from)?;
    let exact = a.exact || (!a.sweep && chain.len() <= MAX_EXACT_STATES);
    let cut = if exact {
        cheeger_exact(&chain)?
    } else {
        cheeger_sweep(&chain)?
    };
    let mut r = report_for("cheeger", a);
    r.set("states", chain.len());
    cut_results(&mut r, &chain, &cut);
    let mut unconverged = None;
    if chain.row_mode() == RowMode::Stochastic && chain.check_connected().is_ok() {
        let g = gap_summary(&chain, &SolverOptions::default())?;
        let l1 = g.lambda1.estimate;
        r.set("lambda1", l1);
        r.set("lower_h2_over_8", cut.h * cut.h / 8.0);
        r.set("upper_2h", 2.0 * cut.h);
        if !g.lambda1.converged {
            unconverged = Some("lambda1".to_string());
        }
    }
    Ok(Outcome {
        report: r,
        unconverged,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct CayleyArgs {
    /// Prime modulus.
    #[arg(long)]
    pub p: u64,
    /// Matrix size (2 or 3 for the usual families).
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Write the graph as "u v generator" lines.
    #[arg(long)]
    pub export_edges: Option<PathBuf>,
    /// Write the simple random walk as chain JSON.
    #[arg(long)]
    pub export_chain: Option<PathBuf>,
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), CommandError> {
    std::fs::write(path, text).map_err(|e| CommandError::Io(format!("{}: {e}", path.display())))
}

pub fn cayley(a: &CayleyArgs) -> CmdResult {
    let group = FiniteMatrixGroup { p: a.p, dim: a.dim };
    let gens = group.elementary_generators()?;
    let graph = build_cayley(group, &gens, DEFAULT_GROUP_BUDGET)?;
    let chain = graph.simple_walk_chain()?;
    if let Some(path) = &a.export_edges {
        write_file(path, &graph.to_edge_list())?;
    }
    if let Some(path) = &a.export_chain {
        let text = serde_json::to_string_pretty(&chain).map_err(sgap::Error::from)?;
        write_file(path, &text)?;
    }
    let g = gap_summary(&chain, &SolverOptions::default())?;
    let mut r = report_for("cayley", a);
    r.set("order", json!(group.order()));
    r.set("vertices", graph.n_vertices());
    r.set("degree", gens.len());
    r.set("lambda1", g.lambda1.estimate);
    r.set("norm", g.norm.estimate);
    r.set("lemma_bound", 0.5 * (1.0 - g.norm.estimate).powi(2));
    let converged = g.lambda1.converged && g.norm.converged;
    r.set("converged", converged);
    Ok(Outcome {
        report: r,
        unconverged: (!converged).then(|| "spectral gap".to_string()),
    })
}

#[derive(Args, Debug, Serialize)]
pub struct TorusArgs {
    /// Largest sup-norm radius of the ladder.
    #[arg(long)]
    pub radius: u64,
    /// Starting character, comma separated.
    #[arg(long, default_value = "1,0")]
    pub basepoint: String,
    /// Generator as rows, e.g. "1 2;0 1"; repeat for more (default: the Sanov pair).
    #[arg(long = "matrix")]
    pub matrices: Vec<String>,
    /// Number of ladder steps.
    #[arg(long, default_value_t = 10)]
    pub steps: u64,
}

fn ladder_radii(max: u64, steps: u64) -> Vec<u64> {
    let steps = steps.clamp(1, max.max(1));
    let mut radii: Vec<u64> = (1..=steps).map(|i| (max * i).div_ceil(steps)).collect();
    radii.dedup();
    radii
}

pub fn torus(a: &TorusArgs) -> CmdResult {
    let basepoint = parse_int_list(&a.basepoint).map_err(CommandError::Usage)?;
    let gens = if a.matrices.is_empty() {
        sanov_pair()
    } else {
        a.matrices
            .iter()
            .map(|s| parse_matrix(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CommandError::Usage)?
    };
    let radii = ladder_radii(a.radius, a.steps);
    let results: Vec<(usize, f64, bool)> = radii
        .iter()
        .map(|&rad| {
            let graph = build_torus_schreier(&gens, &basepoint, rad)?;
            let est = compressed_norm_weighted(&graph, &uniform_weights(&graph), None)?;
            Ok((est.vertices, est.norm, est.converged))
        })
        .collect::<sgap::Result<_>>()?;
    let norms: Vec<f64> = results.iter().map(|x| x.1).collect();
    let ladder = CompressionLadder {
        radii: radii.iter().map(|&x| x as usize).collect(),
        norms,
        limit_claim: Some(LimitClaim {
            value: SQRT3_2,
            tag: "regular representation".into(),
        }),
    };
    let mut r = report_for("torus", a);
    r.set("supremum", ladder.supremum());
    r.set("regular_norm", SQRT3_2);
    r.set("monotone_below_limit", ladder.check().is_ok());
    let mut t = Table::new(&["radius", "vertices", "norm"]);
    for (rad, (v, n, _)) in radii.iter().zip(&results) {
        t.push(vec![json!(rad), json!(v), json!(n)]);
    }
    r.table = Some(t);
    let unconverged = results
        .iter()
        .zip(&radii)
        .find(|((_, _, c), _)| !c)
        .map(|(_, rad)| format!("compression at radius {rad}"));
    Ok(Outcome {
        report: r,
        unconverged,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct BernoulliArgs {
    /// Free group rank.
    #[arg(long, default_value_t = 2)]
    pub rank: u32,
    /// Configuration word, letters comma separated or "e"; repeatable.
    #[arg(long = "word", required = true)]
    pub words: Vec<String>,
    /// Largest radius of the ladder.
    #[arg(long)]
    pub radius: u32,
}

pub fn bernoulli(a: &BernoulliArgs) -> CmdResult {
    let config = a
        .words
        .iter()
        .map(|s| {
            let letters = parse_word(s).map_err(CommandError::Usage)?;
            FreeWord::new(a.rank, letters).map_err(CommandError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["radius", "vertices", "norm"]);
    let mut sup = 0.0f64;
    let mut unconverged = None;
    for rad in 1..=a.radius {
        let graph = build_bernoulli_schreier(a.rank, &config, rad)?;
        let est = compressed_norm_weighted(&graph, &uniform_weights(&graph), None)?;
        sup = sup.max(est.norm);
        if !est.converged && unconverged.is_none() {
            unconverged = Some(format!("compression at radius {rad}"));
        }
        t.push(vec![json!(rad), json!(est.vertices), json!(est.norm)]);
    }
    let n = a.rank as f64;
    let mut r = report_for("bernoulli", a);
    r.set("supremum", sup);
    r.set("regular_norm", (2.0 * n - 1.0).sqrt() / n);
    r.table = Some(t);
    Ok(Outcome {
        report: r,
        unconverged,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct ExpandersArgs {
    /// Matrix size, 2 or 3.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Comma separated primes.
    #[arg(long, default_value = "3,5,7,11,13")]
    pub primes: String,
}

pub fn expanders(a: &ExpandersArgs) -> CmdResult {
    let primes = parse_u64_list(&a.primes).map_err(CommandError::Usage)?;
    let cert = build_family(a.n, &primes)?;
    let mut r = report_for("expanders", a);
    r.set("family_inf_lambda1", cert.family_inf_lambda1);
    r.set("expanding_constant", expanding_constant_report(&cert)?);
    let all_hold = cert
        .members
        .iter()
        .all(|m| m.lambda1 >= m.lemma_bound - 1e-9);
    r.set("lemma_holds", all_hold);
    let mut t = Table::new(&["p", "order", "degree", "lambda1", "norm", "lemma_bound"]);
    for m in &cert.members {
        t.push(vec![
            json!(m.p),
            json!(m.order),
            json!(m.degree),
            json!(m.lambda1),
            json!(m.norm),
            json!(m.lemma_bound),
        ]);
    }
    r.table = Some(t);
    let unconverged = cert
        .members
        .iter()
        .find(|m| !m.converged)
        .map(|m| format!("spectral gap at p = {}", m.p));
    Ok(Outcome {
        report: r,
        unconverged,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct LyapunovArgs {
    /// Length of each product.
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Independent trials.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Exact u_n/n for n up to this value (at most 8, 0 to skip).
    #[arg(long, default_value_t = 6)]
    pub exact_n: usize,
    /// Integer generator as rows, e.g. "1 2;0 1"; repeat for more. The walk is
    /// uniform on the generators and their inverses (default: the Sanov pair).
    #[arg(long = "matrix")]
    pub matrices: Vec<String>,
}

pub fn lyapunov(a: &LyapunovArgs, seed: u64) -> CmdResult {
    let default = a.matrices.is_empty();
    let gens = if default {
        sanov_pair()
    } else {
        a.matrices
            .iter()
            .map(|s| parse_matrix(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CommandError::Usage)?
    };
    let atoms = gens
        .iter()
        .flat_map(|g| [g.clone(), g.inverse()])
        .map(GroupElement::Int);
    let mu = ProbMeasure::uniform(atoms)?;
    let mm = MatrixMeasure::from_prob_measure(&mu)?;
    let est = estimate_lyapunov(&mm, a.steps, a.trials, seed)?;
    let mut r = report_for("lyapunov", a);
    r.config.insert("seed".into(), json!(seed));
    r.set("mc_estimate", est.point_estimate);
    r.set("ci_half_width", est.ci_half_width);
    // The bound needs the spectral radius of the walk, known here only for
    // the Sanov pair.
    let bound = if default {
        Some(furstenberg_bound(SQRT3_2.sqrt(), 2)?)
    } else {
        None
    };
    r.set("bound", json!(bound));
    if let Some(b) = bound {
        r.set("exceeds_bound", est.point_estimate > b);
    }
    if a.exact_n > 0 {
        let u = exact_u_n(&mu, a.exact_n)?;
        let mut t = Table::new(&["n", "u_n_over_n", "mc_estimate", "bound"]);
        for (k, uk) in u.iter().enumerate() {
            let n = k + 1;
            t.push(vec![
                json!(n),
                json!(uk / n as f64),
                json!(est.point_estimate),
                json!(bound),
            ]);
        }
        r.table = Some(t);
    }
    Ok(Outcome {
        report: r,
        unconverged: None,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct ReturnProbArgs {
    /// Free group rank.
    #[arg(long, default_value_t = 2)]
    pub rank: u32,
    /// Support letters, comma separated, weighted uniformly (default: all
    /// generators and inverses).
    #[arg(long, allow_hyphen_values = true)]
    pub letters: Option<String>,
    /// Largest n.
    #[arg(long)]
    pub n: usize,
    /// Table stride.
    #[arg(long, default_value_t = 1)]
    pub every: usize,
}

pub fn return_prob(a: &ReturnProbArgs) -> CmdResult {
    if a.every == 0 {
        return Err(CommandError::Usage("--every must be >= 1".into()));
    }
    let mu = match &a.letters {
        None => ProbMeasure::free_symmetric(a.rank),
        Some(s) => {
            let letters = parse_word(s).map_err(CommandError::Usage)?;
            let words = letters
                .iter()
                .map(|&l| FreeWord::generator(a.rank, l).map(GroupElement::Free))
                .collect::<sgap::Result<Vec<_>>>()?;
            ProbMeasure::uniform(words)?
        }
    };
    let series = spectral_radius_return(&mu, a.n)?;
    let mut r = report_for("return-prob", a);
    r.set("method", serde_json::to_value(series.method).expect("enum serializes"));
    r.set("symmetric", series.symmetric);
    r.set("last_root", series.last_root());
    r.set("max_decrease", series.max_decrease());
    let mut t = Table::new(&["n", "log_a_n", "root"]);
    for n in (a.every..=a.n).step_by(a.every) {
        t.push(vec![
            json!(n),
            json!(series.log_values[n - 1]),
            json!(series.roots[n - 1]),
        ]);
    }
    r.table = Some(t);
    Ok(Outcome {
        report: r,
        unconverged: None,
    })
}
