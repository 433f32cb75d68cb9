//! Named configurations for the standard experiments, plus frozen background
//! compositionality constants for the widths those experiments use.

use crate::config::RunConfig;

/// Frozen Monte Carlo baselines for random Bernoulli(0.5) signal tables,
/// computed once from the fixed background stream (seed 0xbac0, child n_l):
/// width 7 from 16e6 samples (stderr 1.8e-5), the rest from 1e6 samples
/// (stderr ~7e-5).
pub const C0_W7: f64 = 0.46569159;
pub const C0_W7_STDERR: f64 = 1.754e-5;
pub const C0_W10: f64 = 0.56795546;
pub const C0_W12: f64 = 0.60735777;
pub const C0_W15: f64 = 0.65112896;

pub fn frozen_c0(n_l: usize) -> Option<f64> {
    match n_l {
        7 => Some(C0_W7),
        10 => Some(C0_W10),
        12 => Some(C0_W12),
        15 => Some(C0_W15),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 6] = ["fig3", "fig4", "fig6a", "fig6b", "fig6c", "fig7"];

/// The named experiment presets:
/// - fig3: width 7, noise 1, 10 x 100 generations
/// - fig4: width 7, noise 1, 10 x 30 generations, loss logging
/// - fig6a: width 7, noise 2
/// - fig6b: width 10, noise 2
/// - fig6c: word encoder 20x18x15, noise 3
/// - fig7: word encoder 16x14x12, noise 3, snapshots for latent dumps
pub fn preset(name: &str) -> Option<RunConfig> {
    let mut cfg = RunConfig::default();
    match name {
        "fig3" => {}
        "fig4" => {
            cfg.generations = 30;
            cfg.log_losses = true;
        }
        "fig6a" => {
            cfg.set("noise", "2").unwrap();
        }
        "fig6b" => {
            cfg.n_l = 10;
            cfg.set("noise", "2").unwrap();
        }
        "fig6c" => {
            cfg.set("ew", "20x18x15").unwrap();
            cfg.set("noise", "3").unwrap();
        }
        "fig7" => {
            cfg.set("ew", "16x14x12").unwrap();
            cfg.set("noise", "3").unwrap();
            cfg.instantiations = 1;
            cfg.generations = 70;
            cfg.snapshots = true;
        }
        _ => return None,
    }
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_named_presets_exist_and_validate() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.sim_config().unwrap();
        }
        assert!(preset("fig5").is_none());
    }

    #[test]
    fn preset_shapes_match_their_experiments() {
        assert_eq!(preset("fig3").unwrap().arch().n_l(), 7);
        assert_eq!(preset("fig3").unwrap().instantiations, 10);
        assert_eq!(preset("fig3").unwrap().generations, 100);
        assert_eq!(preset("fig4").unwrap().generations, 30);
        assert!(preset("fig4").unwrap().log_losses);
        assert_eq!(preset("fig6a").unwrap().noise_level, Some(2));
        assert_eq!(preset("fig6b").unwrap().arch().n_l(), 10);
        assert_eq!(preset("fig6c").unwrap().arch().ew, vec![20, 18, 15]);
        assert_eq!(preset("fig6c").unwrap().noise_level, Some(3));
        let f7 = preset("fig7").unwrap();
        assert_eq!(f7.arch().ew, vec![16, 14, 12]);
        assert!(f7.snapshots);
        assert_eq!(f7.instantiations, 1);
    }

    #[test]
    fn frozen_constants_cover_preset_widths() {
        for name in PRESET_NAMES {
            let n_l = preset(name).unwrap().arch().n_l();
            assert!(frozen_c0(n_l).is_some(), "no frozen c0 for width {n_l}");
        }
    }
}
