//! Success probability against transmit power for each port scenario.

use covertfas::config::Config;
use covertfas::sweep::run_sweep;

fn main() -> covertfas::Result<()> {
    let cfg = Config::load(None, Some("paper-sec4"))?;
    let rows = run_sweep(&cfg, cfg.qmc.seed)?;
    let mut names: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
    names.dedup();
    for name in names {
        let block: Vec<_> = rows.iter().filter(|r| r.scenario == name).collect();
        let best = block.iter().max_by(|a, b| a.metrics.p_suc.total_cmp(&b.metrics.p_suc)).expect("non-empty block");
        println!(
            "{name:<10} peak P_suc {:.4} at {:>4.1} dBm (ends: {:.2e} at 0 dBm, {:.2e} at 40 dBm)",
            best.metrics.p_suc,
            best.value,
            block[0].metrics.p_suc,
            block[block.len() - 1].metrics.p_suc
        );
    }
    Ok(())
}
