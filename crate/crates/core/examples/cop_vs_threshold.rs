//! COP against the detection threshold for FAS and FPA wardens, as CSV on stdout.

use covertfas::config::Config;
use covertfas::sweep::{run_sweep, write_sweep_csv};

fn main() -> covertfas::Result<()> {
    let cfg = Config::load(None, Some("paper-sec4-cop"))?;
    let rows = run_sweep(&cfg, cfg.qmc.seed)?;
    write_sweep_csv(&rows, std::io::stdout().lock())
}
