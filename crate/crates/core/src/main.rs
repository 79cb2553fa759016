use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num::{Signed, Zero};
use serde_json::{json, Value};

use flowtree::dyadic::{self, DyadicFamily};
use flowtree::hardy::{self, Atom};
use flowtree::spec_io::{AtomSpecFile, FunctionSpecFile, KernelFile, LoadedTree, TreeSpecFile};
use flowtree::{czd, generate, maximal, operators, rational, trapezoid};
use flowtree::{Error, FamilyConfig, Result, VertexFunction, Q};

#[derive(Parser)]
#[command(name = "flowtree", version, about = "Harmonic analysis on finite windows of trees with flow measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a tree spec.
    Gen(GenArgs),
    /// Generate a random function spec on a tree.
    GenFunc {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a tree spec and check the flow.
    Validate(Common),
    /// Doubling report, degree bound and isoperimetric table.
    Stats(Common),
    /// Hardy–Littlewood and sharp maximal functions.
    Maximal(WithFunc),
    /// Weak type (1,1) inequality on a grid of heights.
    Weak11 {
        #[command(flatten)]
        input: WithFunc,
        #[arg(long = "lambda", required = true)]
        lambdas: Vec<String>,
    },
    /// Calderón–Zygmund decomposition at height alpha.
    Cz {
        #[command(flatten)]
        input: WithFunc,
        #[arg(long)]
        alpha: String,
    },
    /// Split f into a bounded part and an H^1 part at height lambda.
    Split {
        #[command(flatten)]
        input: WithFunc,
        #[arg(long)]
        lambda: String,
        #[arg(long, default_value = "2")]
        p: String,
    },
    /// BMO_q norm.
    Bmo {
        #[command(flatten)]
        input: WithFunc,
        #[arg(long, default_value = "1")]
        q: String,
    },
    /// John–Nirenberg distribution and fit over one or more functions.
    Jn {
        #[command(flatten)]
        common: Common,
        #[arg(long = "func", required = true)]
        funcs: Vec<PathBuf>,
        #[arg(long, default_value = "8")]
        t_max: String,
        #[arg(long, default_value = "1/4")]
        t_step: String,
    },
    /// Validate an atom; upgrade finite-p atoms; rebase with --beta-check.
    Atoms {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        atom: PathBuf,
        #[arg(long, default_value = "8")]
        alpha: String,
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        /// Target beta for rebasing a (1,inf)-atom.
        #[arg(long)]
        beta_check: Option<u32>,
    },
    /// Dyadic family and its properties.
    Dyadic {
        #[command(flatten)]
        common: Common,
        /// Start vertex id of the exhaustion (default: bottom of the spine).
        #[arg(long)]
        start: Option<u64>,
    },
    /// Good-lambda inequality.
    Goodlambda {
        #[command(flatten)]
        input: WithFunc,
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        start: Option<u64>,
    },
    /// ‖M_D f‖_p^p / ‖M#f‖_p^p.
    FsRatio {
        #[command(flatten)]
        input: WithFunc,
        #[arg(long, default_value = "2")]
        p: String,
        #[arg(long)]
        start: Option<u64>,
    },
    /// Kernel integral conditions and the R* mass bound.
    Hormander {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kernel: PathBuf,
    },
    /// Pairing of a function with an atom against the BMO_1 norm.
    Pair {
        #[command(flatten)]
        input: WithFunc,
        #[arg(long)]
        atom: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    /// homogeneous, random, chain or comb.
    kind: String,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 3)]
    max_degree: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3, allow_negative_numbers = true)]
    top: i64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    bottom: i64,
    #[arg(long, default_value_t = 12)]
    beta: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    tree: PathBuf,
    /// Report file (JSON); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV table for plotting.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct WithFunc {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    func: PathBuf,
}

struct Report {
    body: Value,
    ok: bool,
    csv: Option<String>,
}

impl Report {
    fn new(ok: bool, body: Value) -> Self {
        Report { body, ok, csv: None }
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_tree(path: &Path) -> Result<LoadedTree> {
    TreeSpecFile::parse(&read(path)?)?.load()
}

fn load_func(tree: &LoadedTree, path: &Path) -> Result<VertexFunction> {
    FunctionSpecFile::parse(&read(path)?)?.load(tree)
}

fn load_atom(tree: &LoadedTree, path: &Path) -> Result<Atom> {
    AtomSpecFile::parse(&read(path)?)?.load(tree)
}

fn parse_q(s: &str) -> Result<Q> {
    rational::parse(s)
}

fn fmt(x: &Q) -> String {
    rational::format(x)
}

fn positive(s: &str, name: &str) -> Result<Q> {
    let x = parse_q(s)?;
    if !x.is_positive() {
        return Err(Error::InvalidParams(format!("{name} must be positive")));
    }
    Ok(x)
}

fn family(tree: &LoadedTree, start: Option<u64>) -> Result<DyadicFamily> {
    let w = tree.measure.window();
    let start = match start {
        Some(id) => tree.vertex(id)?,
        None => *w.spine().last().unwrap(),
    };
    Ok(dyadic::build_dyadic(w, tree.cfg, start))
}

fn emit(common: &Common, report: Report) -> Result<bool> {
    let mut body = report.body;
    body["ok"] = json!(report.ok);
    let text = serde_json::to_string_pretty(&body).expect("report serializes");
    match &common.out {
        Some(path) => write(path, &text)?,
        None => say(&text),
    }
    if let (Some(path), Some(csv)) = (&common.csv, &report.csv) {
        write(path, csv)?;
    }
    Ok(report.ok)
}

/// Print to stdout, ignoring a closed pipe.
fn say(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn gen(args: &GenArgs) -> Result<()> {
    let cfg = FamilyConfig::new(args.beta)?;
    let (window, seed) = match args.kind.as_str() {
        "homogeneous" => (generate::homogeneous(args.q, args.top, args.bottom)?, None),
        "chain" => (generate::chain(args.top, args.bottom)?, None),
        "comb" => (generate::comb(args.top, args.bottom)?, Some(args.seed)),
        "random" => (generate::random(args.max_degree, args.seed, args.top, args.bottom)?, Some(args.seed)),
        other => return Err(Error::InvalidParams(format!("unknown generator {other:?}"))),
    };
    let window = std::sync::Arc::new(window);
    let m = match seed {
        Some(s) => flowtree::FlowMeasure::from_leaf_masses(window.clone(), &generate::random_leaf_masses(&window, s))?,
        None => flowtree::FlowMeasure::counting_leaves(window),
    };
    let mut spec = TreeSpecFile::from_measure(&m, cfg);
    spec.seed = seed;
    match &args.out {
        Some(path) => write(path, &spec.to_json()),
        None => {
            say(&spec.to_json());
            Ok(())
        }
    }
}

fn stats(tree: &LoadedTree) -> Report {
    let m = &tree.measure;
    let w = m.window();
    let doubling = m.doubling_report();
    let degree_ok = rational::q(doubling.max_degree as i64) <= doubling.c_upper;
    let mut rows = Vec::new();
    let mut csv = String::from("r,expected,checked,mismatches\n");
    let mut iso_ok = true;
    for r in 1..=8u32 {
        let expected = rational::ratio(2, r as i64 + 1);
        let ratios: Vec<Q> = w.vertices().filter_map(|x| m.isoperimetric_ratio(x, r).ok()).collect();
        let mismatches = ratios.iter().filter(|x| **x != expected).count();
        iso_ok &= mismatches == 0;
        csv.push_str(&format!("{r},{},{},{mismatches}\n", fmt(&expected), ratios.len()));
        rows.push(json!({"r": r, "expected": fmt(&expected), "checked": ratios.len(), "mismatches": mismatches}));
    }
    let c_tilde = trapezoid::c_tilde_of(m, tree.cfg);
    Report::new(
        doubling.lower_ok && degree_ok && iso_ok,
        json!({
            "vertices": w.len(),
            "doubling": doubling,
            "degree_bounded": degree_ok,
            "c_tilde": fmt(&c_tilde),
            "isoperimetric": rows,
        }),
    )
    .with_csv(csv)
}

fn maximal_cmd(tree: &LoadedTree, f: &VertexFunction) -> Result<Report> {
    let m = &tree.measure;
    let w = m.window();
    let mf = maximal::hl_maximal(m, f, tree.cfg);
    let sharp = maximal::sharp_maximal(m, f, tree.cfg);
    let two = rational::q(2);
    let pointwise = w.vertices().all(|v| *sharp.value(v) <= &two * mf.value(v));
    let bmo = hardy::bmo_norm(m, f, 1, tree.cfg)?;
    let sharp_is_bmo = sharp.max() == bmo.power;
    let mut csv = String::from("id,level,f,Mf,Msharp\n");
    for v in w.vertices() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            tree.id(v),
            w.level(v),
            fmt(f.get(v)),
            fmt(mf.value(v)),
            fmt(sharp.value(v))
        ));
    }
    Ok(Report::new(
        pointwise && sharp_is_bmo,
        json!({
            "max_hl": fmt(&mf.max()),
            "max_sharp": fmt(&sharp.max()),
            "bmo1": fmt(&bmo.power),
            "sharp_le_twice_hl": pointwise,
            "sharp_max_equals_bmo1": sharp_is_bmo,
        }),
    )
    .with_csv(csv))
}

fn weak11(tree: &LoadedTree, f: &VertexFunction, lambdas: &[String]) -> Result<Report> {
    let m = &tree.measure;
    let mf = maximal::hl_maximal(m, f, tree.cfg);
    let mut rows = Vec::new();
    let mut csv = String::from("lambda,lhs,rhs,ok\n");
    let mut ok = true;
    for s in lambdas {
        let lambda = positive(s, "lambda")?;
        let check = maximal::weak11_from(m, f, &mf, &lambda, tree.cfg);
        let chosen = maximal::vitali_select(m, f, &lambda, tree.cfg);
        let vitali = maximal::vitali_certificate(m, f, &lambda, &chosen, &mf.superlevel(&lambda), tree.cfg);
        ok &= check.ok && vitali;
        csv.push_str(&format!("{},{},{},{}\n", fmt(&lambda), fmt(&check.lhs), fmt(&check.rhs), check.ok));
        rows.push(json!({
            "lambda": fmt(&lambda),
            "lhs": fmt(&check.lhs),
            "rhs": fmt(&check.rhs),
            "ok": check.ok,
            "vitali_selected": chosen.len(),
            "vitali_ok": vitali,
        }));
    }
    Ok(Report::new(ok, json!({ "rows": rows })).with_csv(csv))
}

fn cz(tree: &LoadedTree, f: &VertexFunction, alpha: &Q) -> Result<Report> {
    let m = &tree.measure;
    let dec = czd::cz_decompose(m, f, alpha, tree.cfg)?;
    let check = czd::check_cz(m, f, &dec, tree.cfg);
    let stopping: Vec<czd::StoppingCheck> = dec
        .partition
        .iter()
        .map(|r| czd::stopping_sets(m, f, r, alpha, tree.cfg).map(|fam| czd::check_stopping(m, f, &fam, tree.cfg)))
        .collect::<Result<_>>()?;
    let stopping_ok = stopping.iter().all(czd::StoppingCheck::all_ok);
    let mut csv = String::from("set,mass,l1\n");
    for (e, b) in &dec.bad {
        csv.push_str(&format!("{e},{},{}\n", fmt(&e.mass_unchecked(m)), fmt(&b.l1_norm(m))));
    }
    Ok(Report::new(
        check.all_ok() && stopping_ok,
        json!({
            "alpha": fmt(alpha),
            "partition": dec.partition,
            "bad_sets": dec.bad.iter().map(|(e, _)| *e).collect::<Vec<_>>(),
            "good_sup": fmt(&dec.good.sup_norm()),
            "check": check,
            "stopping_ok": stopping_ok,
        }),
    )
    .with_csv(csv))
}

fn split(tree: &LoadedTree, f: &VertexFunction, lambda: &Q, p: &Q) -> Result<Report> {
    let m = &tree.measure;
    let s = czd::interpolation_split(m, f, lambda, p, tree.cfg)?;
    let p = rational::integer_exponent(p, 2)?;
    let check = czd::check_split(m, f, &s, lambda, p, tree.cfg);
    Ok(Report::new(
        check.all_ok(),
        json!({
            "lambda": fmt(lambda),
            "p": p,
            "sets": s.bad.iter().map(|(r, _)| *r).collect::<Vec<_>>(),
            "good_sup": fmt(&s.good.sup_norm()),
            "h1_bound": fmt(&s.h1_bound),
            "check": check,
        }),
    ))
}

fn bmo(tree: &LoadedTree, f: &VertexFunction, q: &Q) -> Result<Report> {
    let m = &tree.measure;
    let q = rational::integer_exponent(q, 1)?;
    let report = hardy::bmo_norm(m, f, q, tree.cfg)?;
    let one = hardy::bmo_norm(m, f, 1, tree.cfg)?;
    let two = hardy::bmo_norm(m, f, 2, tree.cfg)?;
    let holder = rational::pow(&one.power, 2) <= two.power;
    let sharp = maximal::sharp_maximal(m, f, tree.cfg).max() == one.power;
    Ok(Report::new(
        holder && sharp,
        json!({
            "report": report,
            "norm": report.norm_f64(),
            "bmo1_le_bmo2": holder,
            "sharp_max_equals_bmo1": sharp,
        }),
    ))
}

fn jn(tree: &LoadedTree, funcs: &[VertexFunction], t_max: &Q, t_step: &Q) -> Result<Report> {
    let m = &tree.measure;
    if !t_step.is_positive() {
        return Err(Error::InvalidParams("t-step must be positive".into()));
    }
    let mut grid = Vec::new();
    let mut t = Q::zero();
    while t <= *t_max {
        grid.push(t.clone());
        t += t_step;
    }
    let fit = hardy::jn_fit(m, funcs, &grid, tree.cfg)?;
    let witness = hardy::bmo_norm(m, &funcs[0], 1, tree.cfg)?.witness;
    let dist = hardy::jn_distribution(m, &funcs[0], &witness, &grid, tree.cfg)?;
    let monotone = dist.windows(2).all(|p| p[1].1 <= p[0].1);
    let mut csv = String::from("t,ratio\n");
    for (t, r) in &dist {
        csv.push_str(&format!("{},{}\n", fmt(t), fmt(r)));
    }
    let dominated = fit.dominates_samples();
    Ok(Report::new(
        monotone && dominated,
        json!({
            "fit": fit,
            "samples": fit.samples.len(),
            "witness": witness,
            "monotone": monotone,
            "fit_dominates_samples": dominated,
        }),
    )
    .with_csv(csv))
}

fn atoms(tree: &LoadedTree, a: &Atom, alpha: &Q, rounds: u32, beta_check: Option<u32>) -> Result<Report> {
    let m = &tree.measure;
    let valid = hardy::validate_atom(m, a);
    let mut body = json!({ "support": a.support, "valid": valid });
    let mut ok = valid;
    if a.p.is_some() && valid {
        let dec = hardy::atom_upgrade(m, a, alpha, rounds, tree.cfg)?;
        let atoms_valid = dec.atoms.iter().all(|x| hardy::validate_atom(m, x));
        let exact = dec.reconstruct() == a.values;
        ok &= dec.rounds_ok() && atoms_valid && exact;
        body["upgrade"] = json!({
            "alpha": fmt(alpha),
            "atoms": dec.atoms.len(),
            "coefficient_sum": fmt(&dec.coefficient_sum()),
            "residual_l1": fmt(&dec.residual_l1),
            "rounds": dec.rounds.iter().map(|r| json!({
                "sets": r.sets.len(),
                "residual_l1": fmt(&r.residual_l1),
                "mass_ok": r.mass_ok,
                "coefficients_ok": r.coefficients_ok,
                "residual_ok": r.residual_ok,
                "shrink_ok": r.shrink_ok,
                "reconstruction_ok": r.reconstruction_ok,
            })).collect::<Vec<_>>(),
            "atoms_valid": atoms_valid,
            "reconstruction": exact,
        });
    }
    if let Some(beta) = beta_check {
        let pieces = hardy::atom_rebase(m, a, beta)?;
        let mut total = VertexFunction::zero(a.values.len());
        for (c, p) in &pieces {
            total = &total + &p.values.scale(c);
        }
        let pieces_valid = pieces.iter().all(|(_, p)| hardy::validate_atom(m, p) && p.support.is_admissible(beta));
        let exact = total == a.values;
        ok &= pieces_valid && exact;
        body["rebase"] = json!({
            "beta": beta,
            "pieces": pieces.iter().map(|(c, p)| json!({"coefficient": fmt(c), "support": p.support})).collect::<Vec<_>>(),
            "pieces_valid": pieces_valid,
            "sum_exact": exact,
        });
    }
    Ok(Report::new(ok, body))
}

fn dyadic_cmd(tree: &LoadedTree, start: Option<u64>) -> Result<Report> {
    let fam = family(tree, start)?;
    let check = dyadic::check_dyadic(&tree.measure, &fam, tree.cfg);
    let mut csv = String::from("j,sets\n");
    for (j, sets) in fam.scales() {
        csv.push_str(&format!("{j},{}\n", sets.len()));
    }
    Ok(Report::new(
        check.all_ok(),
        json!({
            "j_min": fam.j_min,
            "j_max": fam.j_max(),
            "exhaustion": fam.exhaustion,
            "check": check,
        }),
    )
    .with_csv(csv))
}

fn goodlambda(tree: &LoadedTree, f: &VertexFunction, lambda: &Q, gamma: &Q, start: Option<u64>) -> Result<Report> {
    let fam = family(tree, start)?;
    let g = dyadic::good_lambda_check(&tree.measure, f, &fam, lambda, gamma, tree.cfg);
    let constant = dyadic::good_lambda_constant(&tree.measure, tree.cfg);
    Ok(Report::new(
        g.ok,
        json!({ "lambda": fmt(lambda), "gamma": fmt(gamma), "constant": fmt(&constant), "result": g }),
    ))
}

fn fs_ratio(tree: &LoadedTree, f: &VertexFunction, p: &Q, start: Option<u64>) -> Result<Report> {
    let fam = family(tree, start)?;
    let p = rational::integer_exponent(p, 1)?;
    let ratio = dyadic::fefferman_stein_ratio(&tree.measure, f, &fam, p, tree.cfg)?;
    Ok(Report::new(true, json!({ "p": p, "ratio": fmt(&ratio), "ratio_f64": rational::to_f64(&ratio) })))
}

fn hormander(tree: &LoadedTree, path: &Path) -> Result<Report> {
    let m = &tree.measure;
    let k = KernelFile::parse(&read(path)?)?.load(tree)?;
    let one = operators::hormander_1star(m, &k, tree.cfg);
    let two = operators::hormander_2star(m, &k, tree.cfg);
    let stars = operators::star_masses(m, tree.cfg);
    let three = rational::q(3);
    let star_ok = stars.iter().all(|(_, s, r)| *s <= &three * r);
    let mut csv = String::from("set,star_mass,mass\n");
    for (r, s, mass) in &stars {
        csv.push_str(&format!("{r},{},{}\n", fmt(s), fmt(mass)));
    }
    Ok(Report::new(
        star_ok,
        json!({ "one_star": one, "two_star": two, "star_sets": stars.len(), "star_mass_le_3": star_ok }),
    )
    .with_csv(csv))
}

fn pair(tree: &LoadedTree, f: &VertexFunction, a: &Atom) -> Result<Report> {
    let m = &tree.measure;
    let valid = a.p.is_none() && hardy::validate_atom(m, a);
    let value = hardy::duality_pairing(m, f, a);
    let bmo = hardy::bmo_norm(m, f, 1, tree.cfg)?.power;
    let bounded = value.abs() <= bmo;
    Ok(Report::new(
        valid && bounded,
        json!({ "pairing": fmt(&value), "bmo1": fmt(&bmo), "atom_valid": valid, "bounded": bounded }),
    ))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen(args) => gen(&args).map(|_| true),
        Command::GenFunc { tree, seed, density, out } => {
            let tree = load_tree(&tree)?;
            let f = generate::random_function(tree.measure.window(), seed, density);
            let text = FunctionSpecFile::from_function(&tree, &f).to_json();
            match out {
                Some(path) => write(&path, &text)?,
                None => say(&text),
            }
            Ok(true)
        }
        Command::Validate(c) => {
            let tree = load_tree(&c.tree)?;
            let w = tree.measure.window();
            let body = json!({
                "vertices": w.len(),
                "top": w.top(),
                "bottom": w.bottom(),
                "beta": tree.cfg.beta,
                "total_mass": fmt(tree.measure.total()),
            });
            emit(&c, Report::new(tree.measure.validate_flow(), body))
        }
        Command::Stats(c) => {
            let tree = load_tree(&c.tree)?;
            emit(&c, stats(&tree))
        }
        Command::Maximal(i) => {
            let tree = load_tree(&i.common.tree)?;
            let f = load_func(&tree, &i.func)?;
            emit(&i.common, maximal_cmd(&tree, &f)?)
        }
        Command::Weak11 { input, lambdas } => {
            let tree = load_tree(&input.common.tree)?;
            let f = load_func(&tree, &input.func)?;
            emit(&input.common, weak11(&tree, &f, &lambdas)?)
        }
        Command::Cz { input, alpha } => {
            let tree = load_tree(&input.common.tree)?;
            let f = load_func(&tree, &input.func)?;
            emit(&input.common, cz(&tree, &f, &positive(&alpha, "alpha")?)?)
        }
        Command::Split { input, lambda, p } => {
            let tree = load_tree(&input.common.tree)?;
            let f = load_func(&tree, &input.func)?;
            emit(&input.common, split(&tree, &f, &positive(&lambda, "lambda")?, &parse_q(&p)?)?)
        }
        Command::Bmo { input, q } => {
            let tree = load_tree(&input.common.tree)?;
            let f = load_func(&tree, &input.func)?;
            emit(&input.common, bmo(&tree, &f, &parse_q(&q)?)?)
        }
        Command::Jn { common, funcs, t_max, t_step } => {
            let tree = load_tree(&common.tree)?;
            let funcs = funcs.iter().map(|p| load_func(&tree, p)).collect::<Result<Vec<_>>>()?;
            emit(&common, jn(&tree, &funcs, &parse_q(&t_max)?, &parse_q(&t_step)?)?)
        }
        Command::Atoms { common, atom, alpha, rounds, beta_check } => {
            let tree = load_tree(&common.tree)?;
            let a = load_atom(&tree, &atom)?;
            emit(&common, atoms(&tree, &a, &parse_q(&alpha)?, rounds, beta_check)?)
        }
        Command::Dyadic { common, start } => {
            let tree = load_tree(&common.tree)?;
            emit(&common, dyadic_cmd(&tree, start)?)
        }
        Command::Goodlambda { input, lambda, gamma, start } => {
            let tree = load_tree(&input.common.tree)?;
            let f = load_func(&tree, &input.func)?;
            let report = goodlambda(&tree, &f, &positive(&lambda, "lambda")?, &positive(&gamma, "gamma")?, start)?;
            emit(&input.common, report)
        }
        Command::FsRatio { input, p, start } => {
            let tree = load_tree(&input.common.tree)?;
            let f = load_func(&tree, &input.func)?;
            emit(&input.common, fs_ratio(&tree, &f, &parse_q(&p)?, start)?)
        }
        Command::Hormander { common, kernel } => {
            let tree = load_tree(&common.tree)?;
            emit(&common, hormander(&tree, &kernel)?)
        }
        Command::Pair { input, atom } => {
            let tree = load_tree(&input.common.tree)?;
            let f = load_func(&tree, &input.func)?;
            let a = load_atom(&tree, &atom)?;
            emit(&input.common, pair(&tree, &f, &a)?)
        }
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("FLOWTREE_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            say(&json!({ "error": e.kind(), "message": e.to_string() }).to_string());
            ExitCode::from(2)
        }
    }
}
