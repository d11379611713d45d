//! Covert-communication metrics at the reference operating point.

use covertfas::metrics::{evaluate, normalized_rate_threshold, optimal_threshold};
use covertfas::{LinkBudget, NodeFas, QmcSettings};

fn main() -> covertfas::Result<()> {
    let link = LinkBudget::reference();
    let qmc = QmcSettings::default();
    println!("P_a = {} W, sigma_w^2 = {}, sigma_b^2 = {}", link.p_a, link.sigma2_w, link.sigma2_b);
    println!("zeta* = {}, normalised rate threshold = {:.6}\n", optimal_threshold(&link), normalized_rate_threshold(&link));

    let cases = [
        ("FAS Bob, FAS Willie", NodeFas::reference(), NodeFas::reference()),
        ("FAS Bob, FPA Willie", NodeFas::reference(), NodeFas::fpa(40.0)),
        ("FPA Bob, FAS Willie", NodeFas::fpa(40.0), NodeFas::reference()),
    ];
    for (name, bob, willie) in cases {
        println!("{name}");
        for zeta in [0.9, 1.01, 1.2, 2.0] {
            let m = evaluate(&link, &bob, &willie, zeta, &qmc)?;
            println!(
                "  zeta {zeta:<5} P_MD {:.6}  P_FA {}  COP {:.6}  P_out {:.3e}  P_suc {:.6}",
                m.p_md.value, m.p_fa, m.cop.value, m.p_out.value, m.p_suc.value
            );
        }
    }
    Ok(())
}
