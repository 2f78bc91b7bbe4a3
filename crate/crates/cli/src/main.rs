//! Command-line front end: load NFGs and related artifacts from JSON, then
//! evaluate, rewrite, transform, dualize, or reduce them.
//!
//! Exit codes: 0 on success, 1 when a verification ran and its deviation
//! exceeded `--tol`, 2 on input or format errors.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nfg_core::duality::{dualize, verify_code_duality, verify_duality};
use nfg_core::generate::{
    self, group_alphabet_pool, random_assembly, random_assignment, random_nfg, NfgParams,
};
use nfg_core::holo::{holographic_transform, verify_holant, Transformer};
use nfg_core::io::{
    format_complex, nfg_to_json, parse_assembly, parse_assignment, parse_code, parse_gate_map,
    parse_graph, parse_marked, parse_matchgate, parse_nfg, tensor_to_json,
};
use nfg_core::nfg::{EdgeRef, EvalMode, Nfg};
use nfg_core::perfmatch::{
    fkt_perfmatch, holographic_reduce, perfmatch_brute, verify_decomposition,
};
use nfg_core::rewrite::{
    dual_vertex_delete, dual_vertex_insert, equality_delete, equality_insert, vertex_group,
    vertex_split, verify_preserved,
};
use nfg_core::tensor::{for_each_index, LocalFunction};
use nfg_core::Error;

#[derive(Parser)]
#[command(
    name = "nfg",
    about = "Normal factor graphs: evaluation, rewrites, holographic transformations, duality, and matchgate reductions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Brute,
    Eliminate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RewriteOp {
    VertexGroup,
    VertexSplit,
    EqualityInsert,
    EqualityDelete,
    DualInsert,
    DualDelete,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the exterior function of an NFG
    Eval {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "eliminate")]
        mode: Mode,
        /// Print the result as machine-readable JSON
        #[arg(long)]
        json: bool,
        /// Also write the result tensor to a file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a marked factor graph (a sum-of-products form) into an NFG
    Normalize {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply an exterior-function-preserving rewrite and print the new NFG
    Rewrite {
        file: PathBuf,
        #[arg(long, value_enum)]
        op: RewriteOp,
        /// Comma-separated vertex ids (vertex-group)
        #[arg(long)]
        vertices: Option<String>,
        /// Id for the grouped vertex (vertex-group; default "grouped")
        #[arg(long = "as")]
        group_as: Option<String>,
        /// Target vertex (vertex-split, equality-delete)
        #[arg(long)]
        vertex: Option<String>,
        /// Fragment NFG file (vertex-split)
        #[arg(long)]
        fragment: Option<PathBuf>,
        /// Edge site: "int:K" or "ext:LABEL" (insertions)
        #[arg(long)]
        edge: Option<String>,
        /// Pair of vertex ids "v1,v2" (dual-delete)
        #[arg(long)]
        pair: Option<String>,
        /// Kernel for dual-insert: "kappa" or a path to a kernel file
        #[arg(long)]
        kernel: Option<String>,
        /// Recompute both exteriors and report the deviation
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Holographically transform an NFG with a transformer assignment
    Transform {
        nfg: PathBuf,
        assignment: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the transformation identity on an NFG + assignment, or on
    /// seeded random instances with --self-test
    VerifyHolant {
        nfg: Option<PathBuf>,
        assignment: Option<PathBuf>,
        #[arg(long)]
        self_test: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Dualize an NFG (Fourier-transform vertices, splice sign inverters)
    Dualize {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the duality identity on an NFG, or on seeded random instances
    VerifyDuality {
        file: Option<PathBuf>,
        #[arg(long)]
        self_test: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Compute the dual of a group code; with --nfg, verify the code NFG
    /// dualizes to the dual code
    CodeDual {
        code: PathBuf,
        #[arg(long)]
        nfg: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Sum of matching weights of a weighted graph
    Perfmatch {
        graph: PathBuf,
        /// Use the Pfaffian fast path (requires a rotation in the file)
        #[arg(long)]
        fkt: bool,
    },
    /// Signature of a matchgate
    Signature {
        gate: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check the matching sum of an assembled graph against its signature
    /// NFG, or on seeded random assemblies with --self-test
    VerifyDecomposition {
        assembly: Option<PathBuf>,
        #[arg(long)]
        self_test: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Holographic reduction: transform a closed binary NFG, check the gate
    /// signatures, assemble, and compare the matching sum with the exterior
    Reduce {
        nfg: PathBuf,
        assignment: PathBuf,
        gates: PathBuf,
        /// Use FKT on the assembled graph (requires a rotation in the gates
        /// file)
        #[arg(long)]
        fkt: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(Error::from)
}

fn emit_nfg(n: &Nfg, out: Option<&PathBuf>) -> Result<(), Error> {
    let json = nfg_to_json(n);
    match out {
        Some(path) => fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn print_tensor(z: &LocalFunction, labels: &[String], json: bool) {
    if json {
        print!("{}", tensor_to_json(z, labels));
        return;
    }
    if let Some(v) = z.scalar_value() {
        println!("{}", format_complex(v));
        return;
    }
    let sizes = z.sizes();
    for_each_index(&sizes, |idx| {
        let coords: Vec<String> = labels
            .iter()
            .zip(idx)
            .map(|(l, x)| format!("{l}={x}"))
            .collect();
        println!("{}: {}", coords.join(" "), format_complex(z.value_at(idx)));
    });
}

fn parse_edge_ref(n: &Nfg, spec: &str) -> Result<EdgeRef, Error> {
    if let Some(k) = spec.strip_prefix("int:") {
        let k: usize = k
            .parse()
            .map_err(|_| Error::Format(format!("bad internal edge index in `{spec}`")))?;
        if k >= n.internal_edges().len() {
            return Err(Error::NoSuchEdge(k));
        }
        Ok(EdgeRef::Internal(k))
    } else if let Some(label) = spec.strip_prefix("ext:") {
        let k = n
            .dangling()
            .iter()
            .position(|(_, l)| l == label)
            .ok_or_else(|| Error::Format(format!("no dangling edge labelled `{label}`")))?;
        Ok(EdgeRef::Dangling(k))
    } else {
        Err(Error::Format(format!(
            "edge spec `{spec}` must be int:K or ext:LABEL"
        )))
    }
}

fn dual_kernels(
    n: &Nfg,
    edge: EdgeRef,
    kernel: &str,
) -> Result<(LocalFunction, LocalFunction), Error> {
    let alphabet = n.edge_alphabet(edge)?.clone();
    if kernel == "kappa" {
        let group = alphabet
            .group()
            .ok_or_else(|| Error::Format("`kappa` needs a group-structured edge".into()))?
            .clone();
        let phi = Transformer::kappa(&group);
        let phihat = Transformer::kappa_hat(&group);
        return Ok((phi.as_local_function(), phihat.as_local_function()));
    }
    // otherwise a kernel file: {"phi": [[..]], "phihat": optional,
    // "coupling": optional alphabet literal}
    let text = read(Path::new(kernel))?;
    nfg_core::io::parse_kernel_pair(&text, &alphabet)
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Eval { file, mode, json, out } => {
            let n = parse_nfg(&read(&file)?)?;
            let mode = match mode {
                Mode::Brute => EvalMode::Brute,
                Mode::Eliminate => EvalMode::Eliminate(n.default_elimination_order()),
            };
            let z = n.eval_exterior(&mode)?;
            let labels = n.exterior_labels();
            print_tensor(&z, &labels, json);
            if let Some(path) = out {
                fs::write(path, tensor_to_json(&z, &labels))?;
            }
            Ok(0)
        }

        Command::Normalize { file, out } => {
            let m = parse_marked(&read(&file)?)?;
            let n = m.normalize()?;
            emit_nfg(&n, out.as_ref())?;
            Ok(0)
        }

        Command::Rewrite {
            file,
            op,
            vertices,
            group_as,
            vertex,
            fragment,
            edge,
            pair,
            kernel,
            verify,
            tol,
            out,
        } => {
            let n = parse_nfg(&read(&file)?)?;
            let rewritten = match op {
                RewriteOp::VertexGroup => {
                    let list = vertices
                        .ok_or_else(|| Error::Format("--vertices is required".into()))?;
                    let members: BTreeSet<String> =
                        list.split(',').map(|s| s.trim().to_string()).collect();
                    let new_id = group_as.unwrap_or_else(|| "grouped".to_string());
                    vertex_group(&n, &members, &new_id)?
                }
                RewriteOp::VertexSplit => {
                    let v = vertex.ok_or_else(|| Error::Format("--vertex is required".into()))?;
                    let frag_path =
                        fragment.ok_or_else(|| Error::Format("--fragment is required".into()))?;
                    let frag = parse_nfg(&read(&frag_path)?)?;
                    vertex_split(&n, &v, &frag)?.0
                }
                RewriteOp::EqualityInsert => {
                    let spec = edge.ok_or_else(|| Error::Format("--edge is required".into()))?;
                    equality_insert(&n, parse_edge_ref(&n, &spec)?)?.0
                }
                RewriteOp::EqualityDelete => {
                    let v = vertex.ok_or_else(|| Error::Format("--vertex is required".into()))?;
                    equality_delete(&n, &v)?
                }
                RewriteOp::DualInsert => {
                    let spec = edge.ok_or_else(|| Error::Format("--edge is required".into()))?;
                    let site = parse_edge_ref(&n, &spec)?;
                    let kernel =
                        kernel.ok_or_else(|| Error::Format("--kernel is required".into()))?;
                    let (phi, phihat) = dual_kernels(&n, site, &kernel)?;
                    dual_vertex_insert(&n, site, &phi, &phihat)?.0
                }
                RewriteOp::DualDelete => {
                    let pair = pair.ok_or_else(|| Error::Format("--pair is required".into()))?;
                    let (v1, v2) = pair
                        .split_once(',')
                        .ok_or_else(|| Error::Format("--pair must be v1,v2".into()))?;
                    dual_vertex_delete(&n, v1.trim(), v2.trim())?
                }
            };
            emit_nfg(&rewritten, out.as_ref())?;
            if verify {
                let report = verify_preserved(&n, &rewritten)?;
                eprintln!("deviation: {:.3e}", report.max_deviation);
                if report.max_deviation > tol {
                    return Ok(1);
                }
            }
            Ok(0)
        }

        Command::Transform { nfg, assignment, out } => {
            let n = parse_nfg(&read(&nfg)?)?;
            let a = parse_assignment(&read(&assignment)?, &n)?;
            let t = holographic_transform(&n, &a)?;
            emit_nfg(&t, out.as_ref())?;
            Ok(0)
        }

        Command::VerifyHolant {
            nfg,
            assignment,
            self_test,
            seed,
            count,
            tol,
        } => {
            if self_test {
                let mut rng = generate::rng(seed);
                let params = NfgParams::default();
                let mut worst: f64 = 0.0;
                for _ in 0..count {
                    let n = random_nfg(&mut rng, &params);
                    let a = random_assignment(&mut rng, &n, 1e3);
                    let rep = verify_holant(&n, &a)?;
                    worst = worst.max(rep.max_deviation);
                }
                println!("self-test: {count} instances, max deviation {worst:.3e}");
                return Ok(if worst <= tol { 0 } else { 1 });
            }
            let nfg = nfg.ok_or_else(|| Error::Format("an NFG file is required".into()))?;
            let assignment = assignment
                .ok_or_else(|| Error::Format("an assignment file is required".into()))?;
            let n = parse_nfg(&read(&nfg)?)?;
            let a = parse_assignment(&read(&assignment)?, &n)?;
            let report = verify_holant(&n, &a)?;
            println!("deviation: {:.3e}", report.max_deviation);
            Ok(if report.max_deviation <= tol { 0 } else { 1 })
        }

        Command::Dualize { file, out } => {
            let n = parse_nfg(&read(&file)?)?;
            let d = dualize(&n)?;
            emit_nfg(&d, out.as_ref())?;
            Ok(0)
        }

        Command::VerifyDuality {
            file,
            self_test,
            seed,
            count,
            tol,
        } => {
            if self_test {
                let mut rng = generate::rng(seed);
                let params = NfgParams {
                    alphabets: group_alphabet_pool(),
                    ..NfgParams::default()
                };
                let mut worst: f64 = 0.0;
                for _ in 0..count {
                    let n = random_nfg(&mut rng, &params);
                    let rep = verify_duality(&n)?;
                    worst = worst.max(rep.max_deviation);
                }
                println!("self-test: {count} instances, max deviation {worst:.3e}");
                return Ok(if worst <= tol { 0 } else { 1 });
            }
            let file = file.ok_or_else(|| Error::Format("an NFG file is required".into()))?;
            let n = parse_nfg(&read(&file)?)?;
            let report = verify_duality(&n)?;
            println!(
                "scale: {}  deviation: {:.3e}",
                report.scale, report.max_deviation
            );
            Ok(if report.max_deviation <= tol { 0 } else { 1 })
        }

        Command::CodeDual { code, nfg, tol } => {
            let c = parse_code(&read(&code)?)?;
            let dual = c.dual_brute()?;
            println!("|C| = {}  |C_dual| = {}", c.size(), dual.size());
            for w in dual.codewords() {
                let parts: Vec<String> = w.iter().map(usize::to_string).collect();
                println!("{}", parts.join(" "));
            }
            match nfg {
                None => Ok(0),
                Some(path) => {
                    let n = parse_nfg(&read(&path)?)?;
                    let report = verify_code_duality(&n, &c)?;
                    println!(
                        "s = {}  s_dual = {}  deviation: {:.3e}",
                        format_complex(report.primal_scale),
                        format_complex(report.dual_scale),
                        report.max_deviation
                    );
                    Ok(if report.max_deviation <= tol { 0 } else { 1 })
                }
            }
        }

        Command::Perfmatch { graph, fkt } => {
            let (g, emb) = parse_graph(&read(&graph)?)?;
            let value = if fkt {
                let emb = emb.ok_or_else(|| {
                    Error::Format("--fkt needs a rotation system in the graph file".into())
                })?;
                fkt_perfmatch(&g, &emb)?
            } else {
                perfmatch_brute(&g)?
            };
            println!("{}", format_complex(value));
            Ok(0)
        }

        Command::Signature { gate, json } => {
            let (m, _) = parse_matchgate(&read(&gate)?)?;
            let sig = m.signature()?;
            let labels: Vec<String> = (0..sig.arity()).map(|k| format!("e{k}")).collect();
            print_tensor(&sig, &labels, json);
            Ok(0)
        }

        Command::VerifyDecomposition {
            assembly,
            self_test,
            seed,
            count,
            tol,
        } => {
            if self_test {
                let mut rng = generate::rng(seed);
                let mut worst: f64 = 0.0;
                for _ in 0..count {
                    let (gates, connections) = random_assembly(&mut rng, 4, 6, 3);
                    let rep = verify_decomposition(&gates, &connections)?;
                    worst = worst.max(rep.max_deviation);
                }
                println!("self-test: {count} assemblies, max deviation {worst:.3e}");
                return Ok(if worst <= tol { 0 } else { 1 });
            }
            let assembly =
                assembly.ok_or_else(|| Error::Format("an assembly file is required".into()))?;
            let (gates, connections) = parse_assembly(&read(&assembly)?)?;
            let report = verify_decomposition(&gates, &connections)?;
            println!(
                "perfmatch: {}  exterior: {}  deviation: {:.3e}",
                format_complex(report.before.scalar_value().expect("scalar")),
                format_complex(report.after.scalar_value().expect("closed NFG")),
                report.max_deviation
            );
            Ok(if report.max_deviation <= tol { 0 } else { 1 })
        }

        Command::Reduce {
            nfg,
            assignment,
            gates,
            fkt,
            tol,
        } => {
            let n = parse_nfg(&read(&nfg)?)?;
            let a = parse_assignment(&read(&assignment)?, &n)?;
            let (gate_map, embedding) = parse_gate_map(&read(&gates)?)?;
            let emb = if fkt {
                Some(embedding.ok_or_else(|| {
                    Error::Format("--fkt needs a rotation for the assembled graph".into())
                })?)
            } else {
                None
            };
            let report = holographic_reduce(&n, &a, &gate_map, emb.as_ref())?;
            println!(
                "perfmatch: {}  exterior: {}  deviation: {:.3e}",
                format_complex(report.perfmatch),
                format_complex(report.direct),
                report.max_deviation
            );
            Ok(if report.max_deviation <= tol { 0 } else { 1 })
        }
    }
}
