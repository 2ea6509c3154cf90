//! Scratch scanner for desk-scale default parameters. Not part of the API.

use fldp_core::learning::NoiseMechanism;
use fldp_core::moniteo::{run_moniteo, MoniteoConfig};
use fldp_core::rat::ratio;

fn main() {
    for seed in 0..40u64 {
        let mut cfg = MoniteoConfig::default();
        cfg.seed = seed;
        cfg.mechanism = NoiseMechanism::None;
        let none_inf = match run_moniteo(&cfg) {
            Ok(r) => r.epsilon.epsilon.is_infinite(),
            Err(e) => {
                println!("seed {seed}: error {e}");
                continue;
            }
        };
        if !none_inf {
            println!("seed {seed}: noiseless indistinguishable");
            continue;
        }
        let mut epss = Vec::new();
        let mut ok = true;
        for (num, den) in [(1i64, 2i64), (2, 3), (3, 4)] {
            cfg.mechanism = NoiseMechanism::DiscreteLaplace {
                t: ratio(num, den),
                clamp_steps: 2,
            };
            match run_moniteo(&cfg) {
                Ok(r) => epss.push(r.epsilon.epsilon),
                Err(e) => {
                    println!("seed {seed}: error {e}");
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let monotone = epss.windows(2).all(|w| w[0] >= w[1] - 1e-12);
        println!(
            "seed {seed}: none=inf, eps(ت) = {:?} monotone={monotone}",
            epss
        );
    }
}
