//! Command dispatch and artifact output.

use std::path::Path;

use bundle_lab::classify::{counterexample_probe, douglas_intertwiner, jordan_with, kaplansky, similar, Verdict};
use bundle_lab::frames::{build_frame, gram, gram_bounds, riesz_bounds_with_tol, Normalization};
use bundle_lab::geometry::{index_map, svg, Bounds};
use bundle_lab::monodromy::decompose;
use bundle_lab::weights::{equivalent, growth_classify};
use bundle_lab::{io, verify, BlaschkeProduct, FunctionSpec, LabError, WeightSequence};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

const EXIT_CONFIG: u8 = 64;
const EXIT_COMPUTE: u8 = 70;

enum Failure {
    Config(String),
    Compute(LabError),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Compute(e)
    }
}

struct Outcome {
    summary: String,
    exit: u8,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    result: T,
    version: &'static str,
}

/// Run the resolved configuration and return the process exit status.
pub fn run(cfg: &RunConfig) -> u8 {
    let command = cfg.command.as_deref().expect("resolved config names its command");
    let out = cfg.out.as_deref().expect("resolved config has an output directory");
    eprintln!("bundle-lab: {command} -> {}", out.display());
    match dispatch(command, cfg, out) {
        Ok(o) => {
            println!("{}", o.summary);
            o.exit
        }
        Err(Failure::Config(msg)) => {
            eprintln!("bundle-lab: config error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Compute(e)) => {
            let kind = format!("{e:?}");
            let kind = kind.split(['(', ' ', '{']).next().unwrap_or_default().to_string();
            let diag = Envelope {
                command,
                config: cfg,
                result: json!({ "error": { "kind": kind, "message": e.to_string() } }),
                version: env!("CARGO_PKG_VERSION"),
            };
            match io::to_json(&diag) {
                Ok(text) => {
                    let _ = io::write_text(&out.join("error.json"), &text);
                    eprint!("{text}");
                }
                Err(_) => eprintln!("bundle-lab: {e}"),
            }
            println!("{command}: error: {e}");
            EXIT_COMPUTE
        }
    }
}

fn write_result<T: Serialize>(out: &Path, command: &str, cfg: &RunConfig, result: &T) -> Result<(), Failure> {
    let env = Envelope {
        command,
        config: cfg,
        result,
        version: env!("CARGO_PKG_VERSION"),
    };
    Ok(io::write_json(&out.join("result.json"), &env)?)
}

fn weights(s: &Option<String>) -> Result<WeightSequence, Failure> {
    let s = s.as_deref().unwrap_or("hardy");
    s.parse().map_err(|e: LabError| Failure::Config(format!("weights `{s}`: {e}")))
}

fn function(s: &Option<String>, key: &str) -> Result<FunctionSpec, Failure> {
    let s = s.as_deref().ok_or_else(|| Failure::Config(format!("missing `{key}`")))?;
    s.parse().map_err(|e: LabError| Failure::Config(format!("{key} `{s}`: {e}")))
}

fn blaschke(cfg: &RunConfig) -> Result<BlaschkeProduct, Failure> {
    match function(&cfg.blaschke, "blaschke")? {
        FunctionSpec::Blaschke(b) => Ok(b),
        other => Err(Failure::Config(format!("blaschke: `{other}` is not a Blaschke product"))),
    }
}

fn normalization(s: Option<&str>) -> Result<Normalization, Failure> {
    match s.unwrap_or("beta") {
        "raw" => Ok(Normalization::Raw),
        "beta" => Ok(Normalization::Beta),
        "inverse-beta" => Ok(Normalization::InverseBeta),
        other => Err(Failure::Config(format!("normalization `{other}`: expected raw, beta or inverse-beta"))),
    }
}

fn omega0(cfg: &RunConfig) -> Option<Complex64> {
    cfg.numerics.omega0.map(|[re, im]| Complex64::new(re, im))
}

fn verdict_name(v: &Verdict) -> String {
    match v {
        Verdict::Similar => "similar".into(),
        Verdict::NotSimilar { reason } => format!("not_similar ({reason:?})"),
        Verdict::Inconclusive { diagnostics } => format!("inconclusive ({})", diagnostics.join("; ")),
    }
}

fn dispatch(command: &str, cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let n = &cfg.numerics;
    let csv = cfg.csv.unwrap_or(false);
    let k = n.k.unwrap_or(256);
    let n_max = n.n_max.unwrap_or(40);
    let done = |summary: String| Ok(Outcome { summary, exit: 0 });
    match command {
        "weights-classify" => {
            let w = weights(&cfg.weights)?;
            let probe = n.probe_limit.unwrap_or(10_000);
            let growth = growth_classify(&w, probe)?;
            let eq = match &cfg.weights2 {
                Some(_) => Some(equivalent(&w, &weights(&cfg.weights2)?, probe)?),
                None => None,
            };
            write_result(out, command, cfg, &json!({ "growth": growth, "equivalence": eq }))?;
            let mut s = format!("{}: {:?}, sup {:.6}", w.id(), growth.classification, growth.sup_val);
            if let Some(e) = &eq {
                s.push_str(&format!("; equivalent {} (ratio in [{:.6}, {:.6}])", e.equivalent, e.k1, e.k2));
            }
            done(s)
        }
        "gram" => {
            let w = weights(&cfg.weights)?;
            let frame = build_frame(&blaschke(cfg)?, &w, n_max, k)?.with_normalization(normalization(n.normalization.as_deref())?);
            let (c1, c2, tail) = gram_bounds(&frame)?;
            if csv {
                io::write_text(&out.join("gram.csv"), &io::matrix_to_csv(&gram(&frame)?)?)?;
            }
            let cond = (c2 / c1).sqrt();
            write_result(
                out,
                command,
                cfg,
                &json!({ "c1": c1, "c2": c2, "cond": cond, "tail": tail, "K": k, "n_max": n_max, "m": frame.m(),
                         "normalization": frame.normalization, "conjugation": frame.conjugation }),
            )?;
            done(format!("gram: c1 {c1:.6e}, c2 {c2:.6e}, cond {cond:.6}"))
        }
        "riesz" => {
            let w = weights(&cfg.weights)?;
            let frame = build_frame(&blaschke(cfg)?, &w, n.n_max.unwrap_or(100), n.k.unwrap_or(512))?;
            let report = riesz_bounds_with_tol(&frame, n.tol.unwrap_or(1e-2))?;
            if csv {
                io::write_text(&out.join("gram.csv"), &io::matrix_to_csv(&gram(&frame)?)?)?;
            }
            write_result(out, command, cfg, &report)?;
            done(format!("riesz: c1 {:.6e}, c2 {:.6e}, cond {:.6}, {}", report.c1, report.c2, report.cond, report.verdict))
        }
        "index-map" => {
            let h = function(&cfg.function, "fn")?;
            let [x0, x1, y0, y1] = n.bounds.unwrap_or([-2.0, 2.0, -2.0, 2.0]);
            let bounds = Bounds::new(x0, x1, y0, y1).map_err(|e| Failure::Config(format!("bounds: {e}")))?;
            let map = index_map(&h, bounds, n.resolution.unwrap_or(400))?;
            io::write_text(&out.join("index_map.svg"), &svg::render(&map))?;
            write_result(out, command, cfg, &map)?;
            done(format!(
                "index-map: nonzero indices {:?}, {} regions, {} probes agree",
                map.nonzero_indices(),
                map.regions.len(),
                map.probed
            ))
        }
        "decompose" => {
            let d = decompose(&function(&cfg.function, "fn")?, omega0(cfg))?;
            write_result(out, command, cfg, &d)?;
            done(format!("decompose: m = {}, residual {:.3e}, certificate {}", d.m, d.residual, d.certificate))
        }
        "jordan" => {
            let w = weights(&cfg.weights)?;
            let j = jordan_with(&function(&cfg.function, "fn")?, &w, k, n.n_max, omega0(cfg))?;
            if csv {
                if let Some(x) = &j.certificate.x {
                    io::write_text(&out.join("x.csv"), &io::matrix_to_csv(x)?)?;
                }
            }
            write_result(out, command, cfg, &j)?;
            let exit = if j.certificate.accepted { 0 } else { 2 };
            Ok(Outcome {
                summary: format!(
                    "jordan: m = {}, certificate {} (residual {:.3e}, cond {:.4})",
                    j.m,
                    if j.certificate.accepted { "accepted" } else { "not accepted" },
                    j.certificate.residual,
                    j.certificate.cond
                ),
                exit,
            })
        }
        "similar" => {
            let w = weights(&cfg.weights)?;
            let r = similar(&function(&cfg.f1, "f1")?, &function(&cfg.f2, "f2")?, &w)?;
            write_result(out, command, cfg, &r)?;
            Ok(Outcome {
                summary: format!("similar: {} (m1 {:?}, m2 {:?})", verdict_name(&r.verdict), r.m1, r.m2),
                exit: r.verdict.exit_code() as u8,
            })
        }
        "kaplansky" => {
            let w = weights(&cfg.weights)?;
            let r = kaplansky(&function(&cfg.f1, "f1")?, &function(&cfg.f2, "f2")?, &w)?;
            write_result(out, command, cfg, &r)?;
            let inconclusive = matches!(r.single_verdict, Verdict::Inconclusive { .. }) || matches!(r.double_verdict, Verdict::Inconclusive { .. });
            let exit = if !r.consistent {
                1
            } else if inconclusive {
                2
            } else {
                0
            };
            Ok(Outcome {
                summary: format!(
                    "kaplansky: consistent {}, doubles {}, singles {}",
                    r.consistent,
                    verdict_name(&r.double_verdict),
                    verdict_name(&r.single_verdict)
                ),
                exit,
            })
        }
        "douglas" => {
            let w = weights(&cfg.weights)?;
            let cert = douglas_intertwiner(&blaschke(cfg)?, &w, k, n_max)?;
            if csv {
                if let Some(x) = &cert.x {
                    io::write_text(&out.join("x.csv"), &io::matrix_to_csv(x)?)?;
                }
            }
            write_result(out, command, cfg, &cert)?;
            Ok(Outcome {
                summary: format!(
                    "douglas: residual {:.3e}, cond {:.6}, {}",
                    cert.residual,
                    cert.cond,
                    if cert.accepted { "accepted" } else { "not accepted" }
                ),
                exit: if cert.accepted { 0 } else { 2 },
            })
        }
        "counterexample" => {
            let w = weights(&cfg.weights)?;
            let r = counterexample_probe(n.t.unwrap_or(0.5), &w, n.n_max.unwrap_or(800))?;
            if csv {
                let rows: Vec<Vec<String>> = r.profile.r.iter().enumerate().map(|(i, x)| vec![i.to_string(), format!("{x:e}")]).collect();
                io::write_text(&out.join("profile.csv"), &io::records_to_csv(&["n", "r_n"], &rows)?)?;
            }
            write_result(out, command, cfg, &r)?;
            let last = r.profile.r.last().copied().unwrap_or(f64::NAN);
            done(format!("counterexample: {} on {}, slope {:.4}, r_n_max {last:.6}", r.verdict, r.weights, r.slope))
        }
        "verify" => {
            let report = verify::run_all(|c| {
                eprintln!("  [{}] {}: {} ({}, {:.2}s)", if c.passed { "ok" } else { "FAIL" }, c.module, c.name, c.detail, c.seconds)
            });
            write_result(out, command, cfg, &report)?;
            Ok(Outcome {
                summary: format!("verify: {} passed, {} failed", report.passed, report.failed),
                exit: if report.all_passed() { 0 } else { 1 },
            })
        }
        other => Err(Failure::Config(format!("unknown command `{other}`"))),
    }
}
