use std::path::{Path, PathBuf};
use std::time::Instant;

use mgcoop::coordination::{
    centralized_oracle, evaluate_policy, rolling_mean, run_training, shock_metrics, Settings, ShockWindows, System,
    TrainingState,
};
use mgcoop::rl::{load_checkpoint, save_checkpoint, ValueModel};
use mgcoop::scenario::{bundled, load_config, load_episode_log, load_manifest, save_episode_log, ExperimentConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::output::{cell, ensure_dir, mean, write_file, write_manifest, Csv};
use crate::{Cli, EvaluateArgs, OracleArgs, ReportArgs, TrainArgs};

pub fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.clone().unwrap_or_else(|| bundled("default_config.toml"));
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    Ok(load_config(&path, &overrides)?)
}

fn out_dir(cli: &Cli) -> Result<PathBuf, CliError> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    ensure_dir(&dir)?;
    Ok(dir)
}

fn checkpoint_for(path: &Path, system: &System) -> Result<TrainingState, CliError> {
    let (model, rls) = load_checkpoint(path)?;
    if model.n_mgs() != system.n_mgs() {
        return Err(CliError::Validation(format!(
            "{}: checkpoint covers {} microgrids, the scenario has {}",
            path.display(),
            model.n_mgs(),
            system.n_mgs()
        )));
    }
    Ok(TrainingState { model, rls })
}

pub fn train(cli: &Cli, args: &TrainArgs) -> Result<(), CliError> {
    let cfg = load(cli)?;
    let system = System::from_config(&cfg)?;
    let settings = Settings::from_config(&cfg);
    let initial = args.resume.as_deref().map(|p| checkpoint_for(p, &system)).transpose()?;

    let clock = Instant::now();
    let outcome = run_training(&system, &settings, initial)?;
    let elapsed = clock.elapsed().as_secs_f64();

    let dir = out_dir(cli)?;
    save_episode_log(&outcome.log_rows(), system.n_mgs(), dir.join("episodes.csv"))?;
    save_checkpoint(dir.join("checkpoint.toml"), &outcome.agent.model, &outcome.agent.rls)?;
    write_manifest(&dir, &cfg, &["episodes.csv", "checkpoint.toml"])?;

    let recs = &outcome.records;
    let tail = &recs[recs.len().saturating_sub(50)..];
    println!(
        "{} episodes in {elapsed:.1} s{}",
        recs.len(),
        if outcome.converged { " (parameter change below threshold)" } else { "" }
    );
    println!("trailing mean APE {:.4}", mean(&tail.iter().map(|r| r.ape).collect::<Vec<_>>()));
    println!("trailing mean welfare ${:.2}", mean(&tail.iter().map(|r| r.welfare).collect::<Vec<_>>()));
    println!("wrote {}", dir.display());
    Ok(())
}

fn price_columns(n_mgs: usize, steps: usize) -> Vec<String> {
    (1..=n_mgs).flat_map(|k| (1..=steps).map(move |t| format!("price_mg_{k}_t_{t}"))).collect()
}

pub fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<(), CliError> {
    let cfg = load(cli)?;
    let system = System::from_config(&cfg)?;
    let settings = Settings::from_config(&cfg);
    let model = checkpoint_for(&args.checkpoint, &system)?.model;
    if args.windows == 0 {
        return Err(CliError::Validation("--windows must be at least 1".into()));
    }
    let start = args.start.unwrap_or(cfg.oracle.window_start);
    let episode = args.episode.unwrap_or(settings.episodes);
    let (n, steps) = (system.n_mgs(), settings.window_steps);

    let mut header: Vec<String> = ["window_start", "q_hat", "reward", "welfare"].map(String::from).to_vec();
    header.extend(price_columns(n, steps));
    header.extend((1..=n).map(|k| format!("pcc_kw_mg_{k}")));
    header.push("p_w_kw".into());
    let mut csv = Csv::new(&header);

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let horizon = system.profile.steps();
    for k in 0..args.windows {
        let s = (start + k * steps) % horizon;
        let pol = evaluate_policy(&system, &model, s, episode, &settings, &mut rng)?;
        let ev = &pol.evaluation;
        let mut row = vec![s.to_string(), cell(pol.q_hat), cell(ev.reward), cell(ev.welfare)];
        row.extend(pol.action.prices.iter().flatten().map(|&p| cell(p)));
        row.extend(ev.outcome.pcc_kw().iter().map(|p| cell(mean(p))));
        row.push(cell(mean(&ev.outcome.p_w_kw)));
        csv.row(&row);
        println!("window {s:>4}: welfare ${:>10.4}  reward {:>10.4}  Q̂ {:>10.4}", ev.welfare, ev.reward, pol.q_hat);
    }

    let dir = out_dir(cli)?;
    write_file(&dir.join("evaluation.csv"), &csv.finish())?;
    write_manifest(&dir, &cfg, &["evaluation.csv"])?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn oracle(cli: &Cli, args: &OracleArgs) -> Result<(), CliError> {
    let cfg = load(cli)?;
    let system = System::from_config(&cfg)?;
    let settings = Settings::from_config(&cfg);
    let start = args.start.unwrap_or(cfg.oracle.window_start);
    let episode = args.episode.unwrap_or(settings.episodes);

    // the oracle goes first so an oversized grid fails before any training
    let clock = Instant::now();
    let best = centralized_oracle(&system, start, episode, &settings)?;
    let oracle_s = clock.elapsed().as_secs_f64();

    let (model, training_s): (ValueModel, Option<f64>) = match &args.checkpoint {
        Some(p) => (checkpoint_for(p, &system)?.model, None),
        None => {
            let clock = Instant::now();
            let outcome = run_training(&system, &settings, None)?;
            (outcome.agent.model, Some(clock.elapsed().as_secs_f64()))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let clock = Instant::now();
    let rl = evaluate_policy(&system, &model, start, episode, &settings, &mut rng)?;
    let rl_s = clock.elapsed().as_secs_f64();

    let gap_pct = 100.0 * (best.welfare - rl.evaluation.welfare) / best.welfare.abs().max(1e-12);
    let mut header: Vec<String> =
        ["method", "welfare", "gap_pct", "wall_clock_s", "training_wall_clock_s", "evaluations"]
            .map(String::from)
            .to_vec();
    header.extend(price_columns(system.n_mgs(), settings.window_steps));
    let mut csv = Csv::new(&header);
    let mut rl_row = vec![
        "rl".to_string(),
        cell(rl.evaluation.welfare),
        cell(gap_pct),
        cell(rl_s),
        training_s.map(cell).unwrap_or_default(),
        "1".into(),
    ];
    rl_row.extend(rl.action.prices.iter().flatten().map(|&p| cell(p)));
    csv.row(&rl_row);
    let mut oracle_row = vec![
        "oracle".to_string(),
        cell(best.welfare),
        cell(0.0),
        cell(oracle_s),
        String::new(),
        best.evaluations.to_string(),
    ];
    oracle_row.extend(best.action.prices.iter().flatten().map(|&p| cell(p)));
    csv.row(&oracle_row);

    let dir = out_dir(cli)?;
    write_file(&dir.join("oracle.csv"), &csv.finish())?;
    write_manifest(&dir, &cfg, &["oracle.csv"])?;
    println!("oracle  welfare ${:.4} over {} actions in {oracle_s:.2} s", best.welfare, best.evaluations);
    println!("agent   welfare ${:.4} in {rl_s:.3} s (gap {gap_pct:.2}%)", rl.evaluation.welfare);
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn report_data(cli: &Cli, args: &ReportArgs) -> Result<(), CliError> {
    let base = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let path = args.episodes.clone().unwrap_or_else(|| base.join("episodes.csv"));
    let (_, rows) = load_episode_log(&path)?;
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{}: the log has no episodes", path.display())));
    }
    let ape: Vec<f64> = rows.iter().map(|r| r.ape).collect();

    let shock = match args.shock_episode {
        Some(e) => Some(e),
        None => {
            let manifest = path.parent().unwrap_or(Path::new(".")).join("manifest.toml");
            if manifest.exists() {
                load_manifest(&manifest)?.events.iter().map(|e| e.episode).min()
            } else {
                None
            }
        }
    };

    let mut csv = Csv::new(&["episode", "ape", "mape"].map(String::from));
    for (r, m) in rows.iter().zip(rolling_mean(&ape, args.mape_window)) {
        csv.row(&[r.episode.to_string(), cell(r.ape), cell(m)]);
    }
    let dir = out_dir(cli)?;
    write_file(&dir.join("mape.csv"), &csv.finish())?;

    if let Some(episode) = shock {
        let windows = ShockWindows { mape: args.mape_window, ..ShockWindows::default() };
        let m = shock_metrics(&ape, episode, windows)?;
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut csv = Csv::new(&["metric", "value"].map(String::from));
        for (k, v) in [
            ("shock_episode", m.shock_episode.to_string()),
            ("baseline_ape", cell(m.baseline)),
            ("peak_mape", cell(m.peak_mape)),
            ("peak_episode", m.peak_episode.to_string()),
            ("spike_ratio", cell(m.spike_ratio)),
            ("recovery_episode", opt(m.recovery_episode)),
            ("episodes_to_recovery", opt(m.episodes_to_recovery)),
            ("tail_ape_variance", cell(m.tail_variance)),
        ] {
            csv.row(&[k.to_string(), v]);
        }
        write_file(&dir.join("shock.csv"), &csv.finish())?;
        let recovery = match m.episodes_to_recovery {
            Some(n) => format!("recovered after {n} episodes"),
            None => "never recovered".into(),
        };
        println!("shock at {}: MAPE peak {:.2}x baseline, {recovery}", m.shock_episode, m.spike_ratio);
    }
    println!("wrote {}", dir.display());
    Ok(())
}
