//! Survival, hazard and cure fraction of the Gompertz law on both sides of
//! `alpha = 0`.
//!
//! cargo run --example gompertz_cure

use jointcure::gompertz::{self, GompertzParams};

fn main() -> jointcure::Result<()> {
    let times = [0.5, 1.0, 2.0, 5.0, 10.0, 50.0];
    for (alpha, mu) in [(-0.65, 0.5), (-1.0, 2.2), (0.0, 0.5), (0.3, 0.5)] {
        let p = GompertzParams::new(alpha, mu)?;
        println!(
            "alpha = {alpha:+.2}, mu = {mu:.2}: defective = {}, cure fraction = {:.4}",
            p.is_defective(),
            gompertz::cure_fraction(&p)
        );
        for t in times {
            println!(
                "  t = {t:>5}: S = {:.5}  h = {:.5}",
                gompertz::survival(t, &p)?,
                gompertz::hazard(t, &p)?
            );
        }
    }
    Ok(())
}
