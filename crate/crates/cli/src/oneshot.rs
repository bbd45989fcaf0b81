use std::path::Path;

use mgcoop::dispatch::{audit, solve_dispatch_with, DispatchOptions, DispatchProblem};
use mgcoop::grid::{
    build_admittance, bus_injections, solve_power_flow_with, InjectionSet, NetworkModel, PowerFlowOptions,
};
use mgcoop::scenario::{bundled, load_assets, load_network};

use crate::error::CliError;
use crate::output::{cell, ensure_dir, write_file, Csv};
use crate::{Cli, DispatchArgs, PowerflowArgs};

/// Reads `bus,p_kw,q_kvar` rows; buses not listed inject nothing.
fn read_injections(path: &Path, net: &NetworkModel) -> Result<InjectionSet, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize, msg: String| CliError::Validation(format!("{} line {line}: {msg}", path.display()));
    let mut inj = InjectionSet::zeros(net.n_buses());
    let mut header_seen = false;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line.replace(' ', "") != "bus,p_kw,q_kvar" {
                return Err(bad(k + 1, format!("expected header `bus,p_kw,q_kvar`, found `{line}`")));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 3 {
            return Err(bad(k + 1, format!("expected 3 fields, found {}", cells.len())));
        }
        let id: u32 = cells[0].parse().map_err(|_| bad(k + 1, format!("bus `{}` is not an integer", cells[0])))?;
        let i = net.bus_index(id).ok_or_else(|| bad(k + 1, format!("bus {id} is not in {}", net.name)))?;
        let num = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite());
        let p = num(cells[1]).ok_or_else(|| bad(k + 1, format!("p_kw `{}` is not a finite number", cells[1])))?;
        let q = num(cells[2]).ok_or_else(|| bad(k + 1, format!("q_kvar `{}` is not a finite number", cells[2])))?;
        inj.p[i] += net.to_pu(p);
        inj.q[i] += net.to_pu(q);
    }
    if !header_seen {
        return Err(CliError::Validation(format!("{}: no header", path.display())));
    }
    Ok(inj)
}

pub fn powerflow(cli: &Cli, args: &PowerflowArgs) -> Result<(), CliError> {
    let path = args.network.clone().unwrap_or_else(|| bundled("feeder33.toml"));
    let net = load_network(&path)?;
    let inj = match &args.injections {
        Some(p) => read_injections(p, &net)?,
        None => net.nominal_injections(),
    }
    .scaled(args.scale);
    if !(args.tol > 0.0) || args.max_iter == 0 {
        return Err(CliError::Validation("--tol must be positive and --max-iter at least 1".into()));
    }
    let opts = PowerFlowOptions { tol: args.tol, max_iter: args.max_iter };
    let y = build_admittance(&net);
    let sol = solve_power_flow_with(&net, &y, &inj, args.slack_voltage, &opts, None)?;
    let (p, q) = bus_injections(&y, &sol.state);

    let mut csv = Csv::new(&["bus", "v_pu", "angle_deg", "p_kw", "q_kvar"].map(String::from));
    println!("{:>6} {:>10} {:>11} {:>12} {:>12}", "bus", "V (pu)", "angle (°)", "P (kW)", "Q (kvar)");
    for (i, bus) in net.buses.iter().enumerate() {
        let (v, a) = (sol.state.v[i], sol.state.theta[i].to_degrees());
        let (pk, qk) = (net.to_kw(p[i]), net.to_kw(q[i]));
        println!("{:>6} {v:>10.6} {a:>11.5} {pk:>12.3} {qk:>12.3}", bus.id);
        csv.row(&[bus.id.to_string(), cell(v), cell(a), cell(pk), cell(qk)]);
    }
    let losses = net.to_kw(p.iter().sum::<f64>());
    let (vmin, at) =
        sol.state.v.iter().zip(&net.buses).fold((f64::INFINITY, 0), |m, (&v, b)| if v < m.0 { (v, b.id) } else { m });
    println!(
        "slack {:.3} kW {:.3} kvar, losses {losses:.3} kW, V min {vmin:.5} pu at bus {at}, {} iterations",
        net.to_kw(sol.slack_p),
        net.to_kw(sol.slack_q),
        sol.iterations
    );
    if let Some(dir) = &cli.out {
        ensure_dir(dir)?;
        write_file(&dir.join("powerflow.csv"), &csv.finish())?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

/// Expands a single value to `steps` copies; otherwise requires `steps` values.
fn per_step(name: &str, values: &[f64], steps: usize) -> Result<Vec<f64>, CliError> {
    match values.len() {
        1 => Ok(vec![values[0]; steps]),
        n if n == steps => Ok(values.to_vec()),
        n => Err(CliError::Validation(format!("--{name} has {n} values; expected 1 or {steps}"))),
    }
}

pub fn dispatch(cli: &Cli, args: &DispatchArgs) -> Result<(), CliError> {
    let path = args.assets.clone().unwrap_or_else(|| bundled("mg13_assets.toml"));
    let assets = load_assets(&path)?;
    let steps = args.prices.len();
    let mut prob = DispatchProblem::new(
        &assets,
        args.prices.clone(),
        per_step("load-kw", &args.load_kw, steps)?,
        per_step("irradiance", &args.irradiance, steps)?,
        args.dt_h,
    );
    prob.v_pcc = per_step("v-pcc", &args.v_pcc, steps)?;
    prob.terminal_soc = args.terminal_soc;
    let opts = DispatchOptions::default();
    let sol = solve_dispatch_with(&prob, &assets, &opts)?;
    let report = audit(&assets, &prob, &sol, opts.feas_tol);

    let mut header: Vec<String> = ["step", "price", "p_pcc_kw", "q_pcc_kvar"].map(String::from).to_vec();
    for g in 1..=assets.dgs.len() {
        header.extend([format!("p_dg_{g}_kw"), format!("q_dg_{g}_kvar")]);
    }
    for e in 1..=assets.storage.len() {
        header.extend([format!("p_ch_{e}_kw"), format!("p_dis_{e}_kw"), format!("soc_{e}")]);
    }
    let mut csv = Csv::new(&header);
    println!("{}", header.join("  "));
    for t in 0..steps {
        let mut row = vec![t.to_string(), cell(prob.retail_price[t]), cell(sol.p_pcc_kw[t]), cell(sol.q_pcc_kvar[t])];
        for g in 0..assets.dgs.len() {
            row.extend([cell(sol.p_dg_kw[g][t]), cell(sol.q_dg_kvar[g][t])]);
        }
        for e in 0..assets.storage.len() {
            row.extend([cell(sol.p_ch_kw[e][t]), cell(sol.p_dis_kw[e][t]), cell(sol.soc[e][t])]);
        }
        let shown: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { c.clone() } else { format!("{:.4}", c.parse::<f64>().unwrap_or(f64::NAN)) })
            .collect();
        println!("{}", shown.join("  "));
        csv.row(&row);
    }
    println!("operating cost ${:.4} after {} SLP iterations", sol.objective, sol.iterations);
    println!("audit: {} checks, largest excess {:.3e}", report.checked, report.max_excess);
    for f in &report.findings {
        println!("  step {}: {} ({})", f.step, f.family, f.detail);
    }

    if let Some(dir) = &cli.out {
        ensure_dir(dir)?;
        write_file(&dir.join("dispatch.csv"), &csv.finish())?;
        println!("wrote {}", dir.display());
    }
    if !report.passed() {
        return Err(CliError::Numerical(format!("dispatch audit failed with {} findings", report.findings.len())));
    }
    println!("audit passed");
    Ok(())
}
