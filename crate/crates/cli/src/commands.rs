use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use lowmult_core::arith::{central_binomial_factor_oracle, kummer_valuation, FACTOR_ORACLE_CAP};
use lowmult_core::construction::{self, alpha, alpha_fixed, FracContext};
use lowmult_core::equidist::{self, RatioVector, RelationSystem};
use lowmult_core::fourier::{self, Curve, FourierInstance, LemmaInstance};
use lowmult_core::heuristics::{condition_sum, predicted_count};
use lowmult_core::search::{self, Caps, DigitConstraintProblem, PrunedSearch, SearchCheckpoint};
use lowmult_core::{Error, PrimeSet, Result};
use num_bigint::{BigInt, BigUint};
use num_traits::{Num, Signed, ToPrimitive};
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{Listing, Outcome};

/// Bits used for the construction's certified cross-check by default.
pub const DEFAULT_CHECK_BITS: u32 = 128;

pub struct Context {
    pub seed: u64,
    pub precision_bits: Option<u32>,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports always serialize")
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| invalid(format!("bad {what} entry {s:?}"))))
        .collect()
}

fn parse_biguint(s: &str) -> Result<BigUint> {
    let s = s.trim().replace('_', "");
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => BigUint::from_str_radix(h, 16),
        None => BigUint::from_str_radix(&s, 10),
    };
    parsed.map_err(|_| invalid(format!("not a nonnegative integer: {s:?}")))
}

pub fn dispatch(cmd: &Command, ctx: &Context) -> Result<Outcome> {
    match cmd {
        Command::Kummer(a) => kummer(a),
        Command::Search(a) => search(a),
        Command::Heuristic(a) => heuristic(a),
        Command::Construct(a) => construct(a, ctx),
        Command::Equidist(c) => equidist(c, ctx),
        Command::Fourier(c) => fourier(c, ctx),
        Command::Store(_) => Err(invalid("store commands cannot be nested")),
    }
}

fn kummer(a: &KummerArgs) -> Result<Outcome> {
    let n = parse_biguint(&a.n)?;
    let report = kummer_valuation(&n, a.prime)?;
    let mut value = to_value(&report);
    let mut mismatch = false;
    if a.check {
        let small = n
            .to_u64()
            .filter(|&v| v <= FACTOR_ORACLE_CAP)
            .ok_or_else(|| invalid(format!("--check needs n <= {FACTOR_ORACLE_CAP}")))?;
        let direct = central_binomial_factor_oracle(small, &PrimeSet::new(vec![a.prime])?)?[0];
        mismatch = direct != report.valuation;
        value["direct_valuation"] = json!(direct);
    }
    Ok(Outcome::new(value).violated_if(mismatch, "carry count disagrees with direct factorisation"))
}

fn search(a: &SearchArgs) -> Result<Outcome> {
    let primes = PrimeSet::parse(&a.primes)?;
    let caps = Caps::parse(&a.caps)?;
    let problem = DigitConstraintProblem::new(primes, caps, a.limit, a.relax)?;
    let (found, complete, nodes, mode) = if a.exhaustive {
        (search::enumerate_qualifying(&problem)?, true, None, "exhaustive")
    } else {
        let mut s = match &a.checkpoint {
            Some(path) if path.exists() => {
                let ck = SearchCheckpoint::load(File::open(path)?)?;
                PrunedSearch::resume(&problem, ck)?
            }
            _ => PrunedSearch::new(&problem)?,
        };
        let complete = match a.workers {
            Some(w) if w > 1 && a.budget.is_none() => {
                s.run_parallel(w)?;
                true
            }
            _ => s.run(a.budget),
        };
        if let Some(path) = &a.checkpoint {
            s.checkpoint().save(BufWriter::new(File::create(path)?))?;
        }
        let nodes = s.node_count();
        (s.into_found(), complete, Some(nodes), "pruned")
    };
    let mut value = json!({
        "primes": problem.primes(),
        "caps": problem.caps(),
        "limit": problem.limit(),
        "relax": problem.relax_epsilon(),
        "mode": mode,
        "complete": complete,
        "nodes": nodes,
        "problem_fingerprint": hex::encode(problem.fingerprint()),
        "count": found.len(),
        "found": found,
    });
    if let Some(k) = a.census {
        value["census"] = to_value(&search::census(&problem, k)?);
    }
    let listing = Listing {
        key: "found",
        header: vec!["n".into()],
        rows: found.iter().map(|n| vec![n.to_string()]).collect(),
    };
    Ok(Outcome::new(value).with_listing(listing))
}

fn heuristic(a: &HeuristicArgs) -> Result<Outcome> {
    let primes = PrimeSet::parse(&a.primes)?;
    let report = condition_sum(&primes)?;
    let mut value = to_value(&report);
    if let Some(limit) = a.limit {
        value["limit"] = json!(limit);
        value["predicted_count"] = json!(predicted_count(&primes, &BigUint::from(limit))?);
    }
    Ok(Outcome::new(value))
}

/// Natural log of a possibly huge integer.
fn ln_big(n: &BigUint) -> f64 {
    let shift = n.bits().saturating_sub(64);
    let top = (n >> shift).to_f64().unwrap_or(0.0);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn construct(a: &ConstructArgs, ctx: &Context) -> Result<Outcome> {
    let primes = PrimeSet::parse(&a.primes)?;
    let h = a.h.unwrap_or_else(|| construction::default_h(a.big_n));
    let report = match a.t {
        Some(t) => construction::build_n(&primes, a.big_n, h, t, a.budget)?,
        None => construction::best_t_sweep(&primes, a.big_n, h, a.budget)?.1,
    };

    // Exact 2^e / p^m against the exp/log evaluation at the requested width.
    let bits = ctx.precision_bits.unwrap_or(DEFAULT_CHECK_BITS);
    let top = report.n.bits().max(1);
    let exps: Vec<u64> = (1..=8).chain([top / 2, top]).collect();
    let mut checks = 0u64;
    let mut worst = 0f64;
    let mut disagreements = 0u64;
    for p in primes.iter() {
        let fc = FracContext::new(p, h)?;
        for &e in &exps {
            let exact = alpha(e, &fc)?.to_fixed(bits);
            let approx = alpha_fixed(e, &fc, bits)?;
            let diff = exact.sub(&approx);
            let slack = BigInt::from(diff.rad().clone()) + 2;
            if diff.mid().abs() > slack {
                disagreements += 1;
            }
            worst = worst.max(diff.to_f64().abs());
            checks += 1;
        }
    }

    let mut value = to_value(&report);
    value["alpha_check"] = json!({
        "bits": bits,
        "checks": checks,
        "max_gap": worst,
        "disagreements": disagreements,
    });
    let mut bound_failures = 0u64;
    if let Some(eps) = a.epsilon {
        let ln_n = ln_big(&report.n);
        let rows: Vec<Value> = report
            .per_prime_valuation
            .iter()
            .map(|&(p, nu)| {
                let bound = eps * ln_n / (p as f64).ln();
                let ok = nu as f64 <= bound;
                if !ok {
                    bound_failures += 1;
                }
                json!({"prime": p, "valuation": nu, "bound": bound, "holds": ok})
            })
            .collect();
        value["epsilon_check"] = json!({"epsilon": eps, "per_prime": rows});
    }
    let hex_n = format!("0x{}", report.n.to_str_radix(16));
    if let Some(path) = &a.out {
        std::fs::write(path, format!("{hex_n}\n"))?;
        value["n"] = Value::Null;
        value["n_file"] = json!(path.display().to_string());
        value["n_bits"] = json!(report.n.bits());
    } else if a.hex {
        value["n"] = json!(hex_n);
    }
    let violations =
        report.window_violations + report.locality_violations + disagreements + bound_failures;
    Ok(Outcome::new(value).violated_if(
        violations > 0,
        format!(
            "{} window, {} locality, {disagreements} precision and {bound_failures} valuation-bound violations",
            report.window_violations, report.locality_violations
        ),
    ))
}

fn equidist(c: &EquidistCommand, ctx: &Context) -> Result<Outcome> {
    match c {
        EquidistCommand::Orbit(a) => {
            let primes = PrimeSet::parse(&a.primes)?;
            let sample = equidist::orbit_primes(&primes, a.n)?;
            let shown = a.show.min(sample.len());
            let points: Vec<Vec<f64>> = (1..=shown)
                .map(|n| (0..sample.dim()).map(|j| sample.value_f64(n, j)).collect())
                .collect();
            let mut header = vec!["n".to_string()];
            header.extend(sample.labels().iter().map(|l| format!("p{l}")));
            let rows = points
                .iter()
                .enumerate()
                .map(|(n, p)| {
                    let mut row = vec![(n + 1).to_string()];
                    row.extend(p.iter().map(|x| x.to_string()));
                    row
                })
                .collect();
            let value = json!({
                "primes": primes,
                "n": sample.len(),
                "labels": sample.labels(),
                "points": points,
            });
            Ok(Outcome::new(value).with_listing(Listing { key: "points", header, rows }))
        }
        EquidistCommand::Weyl(a) => {
            let primes = PrimeSet::parse(&a.primes)?;
            let sample = equidist::orbit_primes(&primes, a.n)?;
            let mut sums = Vec::new();
            for k in &a.k {
                let kv: Vec<i64> = parse_list(k, "frequency")?;
                sums.push(json!({"k": kv, "value": equidist::weyl_sum(&sample, &kv)?}));
            }
            let rows = sums
                .iter()
                .map(|s| {
                    let k: Vec<String> = s["k"].as_array().unwrap().iter().map(|x| x.to_string()).collect();
                    vec![k.join(" "), s["value"].to_string()]
                })
                .collect();
            let value = json!({"primes": primes, "n": a.n, "sums": sums});
            Ok(Outcome::new(value).with_listing(Listing {
                key: "sums",
                header: vec!["k".into(), "value".into()],
                rows,
            }))
        }
        EquidistCommand::Boxes(a) => {
            let primes = PrimeSet::parse(&a.primes)?;
            let sample = equidist::orbit_primes(&primes, a.n)?;
            let report = equidist::box_occupancy(&sample, a.modulus, a.relations)?;
            let mut value = to_value(&report);
            value["primes"] = to_value(&primes);
            Ok(Outcome::new(value))
        }
        EquidistCommand::Relations(a) => {
            let primes = PrimeSet::parse(&a.primes)?;
            let all: Vec<u64> = primes.iter().collect();
            let subsets: Vec<Vec<u64>> = if a.all_subsets {
                (1u32..(1 << all.len()))
                    .map(|mask| {
                        all.iter()
                            .enumerate()
                            .filter(|(i, _)| mask >> i & 1 == 1)
                            .map(|(_, &p)| p)
                            .collect()
                    })
                    .collect()
            } else {
                vec![all]
            };
            let mut results = Vec::new();
            let mut total = 0usize;
            let mut rows = Vec::new();
            for sub in subsets {
                let set = PrimeSet::new(sub.clone())?;
                let found = equidist::relation_search_primes(&set, a.height, a.tol)?;
                total += found.len();
                for rel in &found {
                    let c: Vec<String> = rel.coefficients.iter().map(|x| x.to_string()).collect();
                    rows.push(vec![
                        sub.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "),
                        c.join(" "),
                        rel.residual.to_string(),
                    ]);
                }
                results.push(json!({"primes": sub, "relations": found}));
            }
            let value = json!({
                "height": a.height,
                "tol": a.tol,
                "total": total,
                "subsets": results,
            });
            Ok(Outcome::new(value).with_listing(Listing {
                key: "subsets",
                header: vec!["primes".into(), "coefficients".into(), "residual".into()],
                rows,
            }))
        }
        EquidistCommand::Curves(a) => {
            let primes = PrimeSet::parse(&a.primes)?;
            let raw = equidist::parse_matrix(&a.relations)?;
            let sys = if raw.is_empty() {
                RelationSystem::empty(primes.len())
            } else {
                equidist::reduce_relations(&raw, primes.len())?
            };
            let family = equidist::make_curves(&sys, &primes)?;
            equidist::check_distinct_bases(&family)?;
            let ratios = RatioVector::synthetic(&sys, ctx.seed)?;
            let cover = equidist::verify_curve_cover(&family, &ratios, a.verify_n, a.tol)?;
            let misses = cover.misses;
            let value = json!({
                "primes": primes,
                "family": family.summary(),
                "cover": cover,
            });
            Ok(Outcome::new(value)
                .violated_if(misses > 0, format!("{misses} orbit points missed by the curve family")))
        }
    }
}

fn build_instance(a: &InstanceArgs) -> Result<FourierInstance> {
    if let Some(r) = a.alternating {
        let eps = a
            .epsilon
            .ok_or_else(|| invalid("--alternating needs --epsilon"))?;
        return FourierInstance::alternating_intervals(r, a.modulus, eps);
    }
    let primes: Vec<u64> = match &a.primes {
        Some(p) => PrimeSet::parse(p)?.as_slice().to_vec(),
        None => return Err(invalid("give --primes or --alternating")),
    };
    let zeta = match &a.zeta {
        Some(z) => parse_list::<f64>(z, "zeta")?,
        None => primes.iter().map(|&p| 1.0 / p as f64).collect(),
    };
    let theta = match &a.theta {
        Some(t) => parse_list::<f64>(t, "theta")?,
        None => primes.iter().map(|&p| p as f64).collect(),
    };
    FourierInstance::from_digits(&primes, a.modulus, a.h, Curve::new(zeta, theta)?, a.epsilon)
}

fn spectrum_value(spec: &fourier::Spectrum) -> Value {
    json!({
        "threshold": spec.threshold,
        "q_count": spec.q_count,
        "parseval_bound": spec.parseval_bound,
        "epsilon_bound": spec.epsilon_bound,
        "zero_in_q": spec.zero_in_q,
        "box_bound": spec.box_bound,
        "q_prime_size": spec.q_prime.len(),
        "q_prime_nonzero": spec.has_nonzero(),
    })
}

fn exceptional_value(e: &fourier::ExceptionalSet) -> Value {
    json!({
        "tolerance": e.tolerance,
        "f_size": e.f_size,
        "e_size": e.e_size,
        "ratio": e.ratio,
        "median_t_f": e.median_t_f,
        "median_t_e": e.median_t_e,
    })
}

fn e_listing(inst: &FourierInstance, e: &fourier::ExceptionalSet) -> Listing {
    let mut header: Vec<String> = (1..=inst.dim()).map(|j| format!("x{j}")).collect();
    header.push("t".into());
    let rows = e
        .members
        .iter()
        .map(|&i| {
            let cell = &inst.cells()[i];
            let mut row: Vec<String> = cell.x.iter().map(|v| v.to_string()).collect();
            row.push((cell.t + 0.0).to_string());
            row
        })
        .collect();
    Listing { key: "exceptional", header, rows }
}

fn write_listing(path: &Path, l: &Listing) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record(&l.header).map_err(|e| Error::Io(e.into()))?;
    for row in &l.rows {
        w.write_record(row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

fn fourier(c: &FourierCommand, ctx: &Context) -> Result<Outcome> {
    match c {
        FourierCommand::Instance(a) => {
            let inst = build_instance(a)?;
            Ok(Outcome::new(to_value(&inst.report())))
        }
        FourierCommand::Exceptional(a) => {
            let inst = build_instance(&a.instance)?;
            let spec = fourier::spectrum(&inst);
            let e = fourier::exceptional_set(&inst, &spec);
            let listing = e_listing(&inst, &e);
            if let Some(path) = &a.dump_e {
                write_listing(path, &listing)?;
            }
            let value = json!({
                "instance": inst.report(),
                "spectrum": spectrum_value(&spec),
                "exceptional": exceptional_value(&e),
            });
            Ok(Outcome::new(value).with_listing(listing))
        }
        FourierCommand::Verify(a) => {
            let inst = build_instance(&a.instance)?;
            let spec = fourier::spectrum(&inst);
            let e = fourier::exceptional_set(&inst, &spec);
            let conclusion = fourier::verify_conclusion(&inst, &e, a.trials, ctx.seed)?;
            let value = json!({
                "instance": inst.report(),
                "spectrum": spectrum_value(&spec),
                "exceptional": exceptional_value(&e),
                "conclusion": conclusion,
            });
            Ok(Outcome::new(value))
        }
        FourierCommand::Lemma(a) => lemma(a, ctx),
        FourierCommand::Remark(a) => {
            let report = fourier::counterexample_remark(a.r, a.modulus, a.epsilon)?;
            Ok(Outcome::new(to_value(&report)))
        }
    }
}

fn lemma(a: &LemmaArgs, ctx: &Context) -> Result<Outcome> {
    let explicit = a.coefficients.is_some() || a.bases.is_some() || a.grid.is_some();
    let modes = [explicit, a.random.is_some(), a.tightness.is_some()];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(invalid(
            "give exactly one of --coefficients/--bases/--grid, --random or --tightness",
        ));
    }
    if let Some(count) = a.random {
        let sweep = fourier::lemma_sweep(count, a.max_r, ctx.seed)?;
        let bad = sweep.violations;
        return Ok(Outcome::new(to_value(&sweep))
            .violated_if(bad > 0, format!("{bad} random instances break the bound")));
    }
    let inst = match a.tightness {
        Some(r) => LemmaInstance::tightness(r, a.delta)?,
        None => {
            let need = |v: &Option<String>, name: &str| -> Result<Vec<f64>> {
                parse_list(v.as_deref().ok_or_else(|| invalid(format!("missing --{name}")))?, name)
            };
            LemmaInstance::new(
                need(&a.coefficients, "coefficients")?,
                need(&a.bases, "bases")?,
                need(&a.grid, "grid")?,
            )?
        }
    };
    let report = fourier::lemma_lower_bound(&inst);
    let mut value = to_value(&report);
    if report.certified_bound > 0.0 {
        value["ratio"] = json!(report.max_value / report.certified_bound);
    }
    let holds = report.holds;
    Ok(Outcome::new(value).violated_if(!holds, "lower bound fails on this instance"))
}
