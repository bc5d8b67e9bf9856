//! Median gaps of pessimistic search and greedy FQI on a bandit.
//!
//! `cargo run --release --example bandit_study -- 0.7,0.8,0.5 0.9,0.05,0.05`

use offrl::harness::checks::bandit_study;
use offrl::harness::ScenarioParams;
use offrl::Exec;

fn parse(arg: Option<String>) -> Option<Vec<f64>> {
    arg.map(|s| s.split(',').map(|x| x.trim().parse().expect("number")).collect())
}

fn main() -> offrl::Result<()> {
    let mut args = std::env::args().skip(1);
    let params = ScenarioParams { arms: parse(args.next()), behavior: parse(args.next()), ..Default::default() };
    for n in [60, 240, 960] {
        let st = bandit_study(Exec::default(), &params, n, 100, 1)?;
        println!(
            "n={n:4} pess gap {:.3} regret {:.3} | fqi gap {:.3} regret {:.3} | cp width {:.3} | pess picks {:?} fqi picks {:?}",
            st.pess_gap, st.pess_regret, st.fqi_gap, st.fqi_regret, st.cp_width, st.pess_arm_counts, st.fqi_arm_counts
        );
    }
    Ok(())
}
