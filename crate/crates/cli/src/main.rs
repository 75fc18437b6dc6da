use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relexp::checker::{check_precise, plot_data, table1_matrix, BoxFamily, Reference, Table1Config};
use relexp::constructors::{concave_encoding, convex_encoding, dp0_precise_convex, dp1_substitute, ibp_monotone, mn_single_layer, parse_signs, step_network};
use relexp::rewrites::{collapse_to_single_layer, to_network_form, verify_replacement};
use relexp::{analyze, parse_rational, Cpwl1D, InputBox, KinkHyperplane, RelaxationId, ReluNetwork};
use serde_json::json;

#[derive(Parser)]
#[command(name = "relexp", version, about = "Exact convex-relaxation analysis of ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Step,
    IbpMonotone,
    Convex,
    Concave,
    Dp0Convex,
    Dp1Subst,
    Mn,
}

#[derive(Clone, Copy, ValueEnum)]
enum Relax {
    Ibp,
    Dp0,
    Dp1,
    Tri,
    Mn,
}

impl From<Relax> for RelaxationId {
    fn from(r: Relax) -> Self {
        match r {
            Relax::Ibp => RelaxationId::Ibp,
            Relax::Dp0 => RelaxationId::Dp0,
            Relax::Dp1 => RelaxationId::Dp1,
            Relax::Tri => RelaxationId::Tri,
            Relax::Mn => RelaxationId::Mn,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a network from a CPWL function (or, for dp1-subst, from a network).
    Construct {
        kind: Kind,
        /// CPWL JSON for the function kinds, network JSON for dp1-subst.
        input: Option<PathBuf>,
        /// Signs at the interior breakpoints, e.g. `++-+`.
        #[arg(long, allow_hyphen_values = true)]
        signs: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
    },
    /// Run one relaxation on a box and print the result JSON.
    Analyze {
        net: PathBuf,
        #[arg(long, value_enum)]
        relax: Relax,
        /// `l,u` per dimension joined by `x`, e.g. `0,1x0,1`.
        #[arg(long = "box", allow_hyphen_values = true)]
        domain: String,
    },
    /// Compare a relaxation against the exact range on a box family.
    /// Exits 0 when every box is precise and 1 otherwise.
    Check {
        net: PathBuf,
        /// CPWL JSON the network should encode; without it the network is
        /// compared against its own exact range over `--box`.
        function: Option<PathBuf>,
        #[arg(long, value_enum)]
        relax: Relax,
        /// Domain for random and grid boxes; defaults to the function's domain.
        #[arg(long = "box", allow_hyphen_values = true)]
        domain: Option<String>,
        /// Skip the breakpoint-span boxes.
        #[arg(long)]
        no_spans: bool,
        /// Number of random sub-boxes.
        #[arg(long, default_value_t = 100)]
        random: usize,
        /// Exhaustive grid resolution for 2D domains.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the per-box CSV instead of the JSON report.
        #[arg(long)]
        csv: bool,
    },
    /// Reproduce the expressivity matrix. Exits 1 if it differs from the expected one.
    Table1 {
        #[arg(long, default_value_t = 50)]
        funcs: usize,
        #[arg(long, default_value_t = 10)]
        max_breakpoints: usize,
        #[arg(long, default_value_t = 100)]
        random_boxes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Collapse a network whose ReLUs kink on one hyperplane to a single ReLU
    /// and check the replacement on random sub-boxes.
    Rewrite {
        net: PathBuf,
        /// Normal of the kink hyperplane, e.g. `1,-1`.
        #[arg(long, allow_hyphen_values = true)]
        kink: String,
        /// Working box; defaults to `[-1,1]^d`.
        #[arg(long = "box", allow_hyphen_values = true)]
        domain: Option<String>,
        #[arg(long, default_value_t = 20)]
        subboxes: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// CSV of `x,h,lower,upper` over a 1D box for plotting relaxation bounds.
    Plotdata {
        net: PathBuf,
        #[arg(long, value_enum)]
        relax: Relax,
        #[arg(long = "box", allow_hyphen_values = true)]
        domain: String,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
}

/// Input problems: unreadable files, bad JSON, invalid arguments.
struct Invalid(String);

impl<E: std::fmt::Display> From<E> for Invalid {
    fn from(e: E) -> Self {
        Invalid(e.to_string())
    }
}

type Outcome = std::result::Result<ExitCode, Invalid>;

fn read(path: &Path) -> std::result::Result<String, Invalid> {
    fs::read_to_string(path).map_err(|e| Invalid(format!("{}: {e}", path.display())))
}

fn read_net(path: &Path) -> std::result::Result<ReluNetwork, Invalid> {
    Ok(ReluNetwork::from_json(&read(path)?)?)
}

fn read_fn(path: &Path) -> std::result::Result<Cpwl1D, Invalid> {
    Ok(Cpwl1D::from_json(&read(path)?)?)
}

fn need<'a>(v: &'a Option<String>, flag: &str) -> std::result::Result<&'a str, Invalid> {
    v.as_deref().ok_or_else(|| Invalid(format!("--{flag} is required")))
}

fn print_net(net: &ReluNetwork) {
    println!("{}", net.to_json());
}

fn construct(kind: Kind, input: Option<&Path>, signs: &Option<String>, x0: &Option<String>, x1: &Option<String>, beta: &Option<String>) -> Outcome {
    let net = match kind {
        Kind::Step => step_network(&parse_rational(need(x0, "x0")?)?, &parse_rational(need(x1, "x1")?)?, &parse_rational(need(beta, "beta")?)?)?,
        Kind::Dp1Subst => dp1_substitute(&read_net(input.ok_or(Invalid("dp1-subst needs a network file".into()))?)?),
        _ => {
            let f = read_fn(input.ok_or(Invalid("this kind needs a CPWL function file".into()))?)?;
            let signs = || -> std::result::Result<_, Invalid> { Ok(parse_signs(need(signs, "signs")?)?) };
            match kind {
                Kind::IbpMonotone => ibp_monotone(&f)?,
                Kind::Convex => convex_encoding(&f, &signs()?)?,
                Kind::Concave => concave_encoding(&f, &signs()?)?,
                Kind::Dp0Convex => dp0_precise_convex(&f)?,
                _ => mn_single_layer(&f),
            }
        }
    };
    print_net(&net);
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn check(net: &Path, function: Option<&Path>, relax: Relax, domain: &Option<String>, no_spans: bool, random: usize, grid: Option<usize>, seed: u64, csv: bool) -> Outcome {
    let net = read_net(net)?;
    let (reference, domain, spans) = match function {
        Some(p) => {
            let f = read_fn(p)?;
            let (lo, hi) = f.domain();
            let d = match domain {
                Some(s) => InputBox::parse(s)?,
                None => InputBox::interval1(lo, hi)?,
            };
            let spans = BoxFamily::for_function(&f);
            (Reference::Function(f), d, Some(spans))
        }
        None => {
            let d = InputBox::parse(need(domain, "box")?)?;
            (Reference::Network(net.clone()), d, None)
        }
    };
    let mut family = BoxFamily::explicit(vec![domain.clone()]);
    if let Some(s) = spans.filter(|_| !no_spans) {
        family = family.union(s);
    }
    if let Some(r) = grid {
        family = family.union(BoxFamily::grid_2d(&domain, r)?);
    }
    family = family.union(BoxFamily::random(&domain, random, seed));
    let report = check_precise(&net, &reference, relax.into(), &family)?;
    if csv {
        print!("{}", report.to_csv());
    } else {
        println!("{}", serde_json::to_string_pretty(&report.to_json())?);
    }
    Ok(if report.all_precise() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn rewrite(net: &Path, kink: &str, domain: &Option<String>, subboxes: usize, samples: usize, seed: u64) -> Outcome {
    let net = read_net(net)?;
    let kink = KinkHyperplane::parse(kink)?;
    let domain = match domain {
        Some(s) => InputBox::parse(s)?,
        None => InputBox::cube(net.input_dim(), &parse_rational("-1")?, &parse_rational("1")?)?,
    };
    let formed = to_network_form(&net, &domain, &kink)?;
    let collapsed = collapse_to_single_layer(&formed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boxes = vec![domain.clone()];
    boxes.extend((0..subboxes).map(|_| domain.sample_subbox(&mut rng, 16)));
    let report = verify_replacement(&net, &collapsed, &boxes, samples, seed)?;
    let out = json!({
        "network": serde_json::from_str::<serde_json::Value>(&collapsed.to_json())?,
        "report": report.to_json(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if report.holds() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Construct { kind, input, signs, x0, x1, beta } => construct(kind, input.as_deref(), &signs, &x0, &x1, &beta),
        Command::Analyze { net, relax, domain } => {
            let r = analyze(&read_net(&net)?, &InputBox::parse(&domain)?, relax.into())?;
            println!("{}", serde_json::to_string_pretty(&r.to_json())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            net,
            function,
            relax,
            domain,
            no_spans,
            random,
            grid,
            seed,
            csv,
        } => check(&net, function.as_deref(), relax, &domain, no_spans, random, grid, seed, csv),
        Command::Table1 {
            funcs,
            max_breakpoints,
            random_boxes,
            seed,
            json,
        } => {
            let t = table1_matrix(&Table1Config {
                funcs_per_class: funcs,
                max_breakpoints,
                random_boxes,
                seed,
            })?;
            if json {
                println!("{}", serde_json::to_string_pretty(&t.to_json())?);
            } else {
                print!("{}", t.render_text());
            }
            Ok(if t.matches_expected() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Rewrite {
            net,
            kink,
            domain,
            subboxes,
            samples,
            seed,
        } => rewrite(&net, &kink, &domain, subboxes, samples, seed),
        Command::Plotdata { net, relax, domain, samples } => {
            print!("{}", plot_data(&read_net(&net)?, &InputBox::parse(&domain)?, relax.into(), samples)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
