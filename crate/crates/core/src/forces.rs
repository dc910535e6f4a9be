//! Military capability state, fighting power and combat attrition.

use serde::{Deserialize, Serialize};

use crate::ladder::TACTICAL_THRESHOLD;

/// Default scale for nuclear fighting power, `k * log10(warheads)`.
pub const DEFAULT_NUCLEAR_FP_SCALE: f64 = 0.146;

/// Warhead floor inside the logarithm so empty arsenals stay finite.
const WARHEAD_LOG_FLOOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceState {
    /// Score in [0, 100]; fixed for the whole game.
    pub conventional_strength: f64,
    /// Fraction in [0, 1], degraded by attrition.
    pub conventional_effectiveness: f64,
    pub nuclear_warheads: u32,
    /// Fraction in [0, 1], degraded by attrition.
    pub nuclear_readiness: f64,
    pub divisions: u32,
    pub doctrine: String,
}

impl ForceState {
    /// State Alpha: nuclear-superior, conventionally smaller.
    pub fn alpha() -> Self {
        ForceState {
            conventional_strength: 85.0,
            conventional_effectiveness: 1.0,
            nuclear_warheads: 1944,
            nuclear_readiness: 1.0,
            divisions: 16,
            doctrine: "Flexible response".into(),
        }
    }

    /// State Beta: conventionally superior, smaller arsenal.
    pub fn beta() -> Self {
        ForceState {
            conventional_strength: 95.0,
            conventional_effectiveness: 1.0,
            nuclear_warheads: 347,
            nuclear_readiness: 1.0,
            divisions: 140,
            doctrine: "Massive retaliation".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FightingPower {
    pub conventional: f64,
    pub nuclear: f64,
}

impl FightingPower {
    pub fn total(&self) -> f64 {
        self.conventional + self.nuclear
    }
}

pub fn fighting_power(f: &ForceState, nuclear_scale: f64) -> FightingPower {
    let warheads = (f.nuclear_warheads as f64).max(WARHEAD_LOG_FLOOR);
    FightingPower {
        conventional: f.conventional_strength / 100.0 * f.conventional_effectiveness,
        nuclear: nuclear_scale * warheads.log10() * f.nuclear_readiness,
    }
}

fn share(own: f64, opp: f64) -> f64 {
    let total = own + opp;
    if total <= 0.0 {
        0.5
    } else {
        own / total
    }
}

/// Own share of combined fighting power per axis, `(conventional, nuclear)`.
/// An axis where both sides are at zero counts as an even split.
pub fn power_shares(own: &FightingPower, opp: &FightingPower) -> (f64, f64) {
    (
        share(own.conventional, opp.conventional),
        share(own.nuclear, opp.nuclear),
    )
}

/// Loss multipliers for one intensity band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandMultipliers {
    pub conventional: f64,
    pub nuclear: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombatBand {
    Conventional,
    Tactical,
    Limited,
    Strategic,
}

impl CombatBand {
    /// Band of the more escalated of the two effective actions.
    pub fn of(max_effective: i32) -> CombatBand {
        match max_effective {
            v if v >= 725 => CombatBand::Strategic,
            v if v >= 575 => CombatBand::Limited,
            v if v >= TACTICAL_THRESHOLD => CombatBand::Tactical,
            _ => CombatBand::Conventional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttritionConfig {
    pub conventional: BandMultipliers,
    pub tactical: BandMultipliers,
    pub limited: BandMultipliers,
    pub strategic: BandMultipliers,
    pub capability_min: f64,
    pub capability_max: f64,
    pub nuclear_fp_scale: f64,
}

impl Default for AttritionConfig {
    fn default() -> Self {
        AttritionConfig {
            conventional: BandMultipliers {
                conventional: 0.25,
                nuclear: 0.0,
            },
            tactical: BandMultipliers {
                conventional: 0.50,
                nuclear: 0.12,
            },
            limited: BandMultipliers {
                conventional: 0.60,
                nuclear: 0.15,
            },
            strategic: BandMultipliers {
                conventional: 0.70,
                nuclear: 0.18,
            },
            capability_min: 0.3,
            capability_max: 2.0,
            nuclear_fp_scale: DEFAULT_NUCLEAR_FP_SCALE,
        }
    }
}

impl AttritionConfig {
    pub fn band(&self, band: CombatBand) -> BandMultipliers {
        match band {
            CombatBand::Conventional => self.conventional,
            CombatBand::Tactical => self.tactical,
            CombatBand::Limited => self.limited,
            CombatBand::Strategic => self.strategic,
        }
    }

    /// Opponent-to-own total power ratio, clamped. Weaker sides suffer more.
    pub fn capability_multiplier(&self, own: &FightingPower, opp: &FightingPower) -> f64 {
        let (own, opp) = (own.total(), opp.total());
        let ratio = if own <= 0.0 {
            if opp <= 0.0 {
                1.0
            } else {
                self.capability_max
            }
        } else {
            opp / own
        };
        ratio.clamp(self.capability_min, self.capability_max)
    }
}

/// Losses suffered by one side in one turn, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideLosses {
    pub capability_multiplier: f64,
    pub conventional_loss: f64,
    pub nuclear_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttritionReport {
    pub combined_intensity: f64,
    pub band: CombatBand,
    pub a: SideLosses,
    pub b: SideLosses,
}

/// Mean of the two non-negative effective actions, normalized by 1000.
pub fn combined_intensity(eff_a: i32, eff_b: i32) -> f64 {
    (eff_a.max(0) as f64 + eff_b.max(0) as f64) / 2.0 / 1000.0
}

fn degrade(value: f64, loss: f64) -> f64 {
    (value * (1.0 - loss)).clamp(0.0, 1.0)
}

/// Applies one turn of combat to both sides. `eff_a`/`eff_b` are the
/// post-gating effective actions.
pub fn apply_attrition(
    a: &ForceState,
    b: &ForceState,
    eff_a: i32,
    eff_b: i32,
    cfg: &AttritionConfig,
) -> (ForceState, ForceState, AttritionReport) {
    let intensity = combined_intensity(eff_a, eff_b);
    let band = CombatBand::of(eff_a.max(eff_b));
    let mult = cfg.band(band);
    let fp_a = fighting_power(a, cfg.nuclear_fp_scale);
    let fp_b = fighting_power(b, cfg.nuclear_fp_scale);

    let losses = |own: &FightingPower, opp: &FightingPower| {
        let cap = cfg.capability_multiplier(own, opp);
        SideLosses {
            capability_multiplier: cap,
            conventional_loss: mult.conventional * intensity * cap,
            nuclear_loss: mult.nuclear * intensity * cap,
        }
    };
    let la = losses(&fp_a, &fp_b);
    let lb = losses(&fp_b, &fp_a);

    let apply = |f: &ForceState, l: &SideLosses| ForceState {
        conventional_effectiveness: degrade(f.conventional_effectiveness, l.conventional_loss),
        nuclear_readiness: degrade(f.nuclear_readiness, l.nuclear_loss),
        ..f.clone()
    };
    (
        apply(a, &la),
        apply(b, &lb),
        AttritionReport {
            combined_intensity: intensity,
            band,
            a: la,
            b: lb,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn nuclear_fighting_power_calibration() {
        let a = fighting_power(&ForceState::alpha(), DEFAULT_NUCLEAR_FP_SCALE);
        let b = fighting_power(&ForceState::beta(), DEFAULT_NUCLEAR_FP_SCALE);
        assert!(close(a.nuclear, 0.48, 0.005), "{}", a.nuclear);
        assert!(close(b.nuclear, 0.37, 0.005), "{}", b.nuclear);
        let (_, nuc_share) = power_shares(&a, &b);
        assert!(close(nuc_share, 0.564, 0.005), "{nuc_share}");
    }

    #[test]
    fn zero_strength_has_no_conventional_power() {
        let f = ForceState {
            conventional_strength: 0.0,
            ..ForceState::alpha()
        };
        assert_eq!(fighting_power(&f, DEFAULT_NUCLEAR_FP_SCALE).conventional, 0.0);
    }

    #[test]
    fn empty_arsenal_uses_log_floor() {
        let f = ForceState {
            nuclear_warheads: 0,
            ..ForceState::alpha()
        };
        let fp = fighting_power(&f, DEFAULT_NUCLEAR_FP_SCALE);
        assert!(close(fp.nuclear, DEFAULT_NUCLEAR_FP_SCALE, 1e-12));
    }

    #[test]
    fn share_examples() {
        let own = FightingPower {
            conventional: 0.57,
            nuclear: 0.48,
        };
        let opp = FightingPower {
            conventional: 0.88,
            nuclear: 0.36,
        };
        let (conv, nuc) = power_shares(&own, &opp);
        assert!(close(conv, 0.393, 0.0005), "{conv}");
        assert!(close(nuc, 0.571, 0.0005), "{nuc}");
        let (c, n) = power_shares(&own, &own);
        assert_eq!((c, n), (0.5, 0.5));
        let zero = FightingPower {
            conventional: 0.0,
            nuclear: 0.0,
        };
        assert_eq!(power_shares(&zero, &zero), (0.5, 0.5));
    }

    #[test]
    fn attrition_anchors() {
        let cfg = AttritionConfig::default();
        let f = ForceState::alpha();
        let (a, b, r) = apply_attrition(&f, &f, 1000, 1000, &cfg);
        assert!(close(r.a.conventional_loss, 0.70, 1e-12));
        assert!(close(r.a.nuclear_loss, 0.18, 1e-12));
        assert!(close(a.conventional_effectiveness, 0.30, 1e-12));
        assert_eq!(a, b);

        let (_, _, r) = apply_attrition(&f, &f, 450, 450, &cfg);
        assert!(close(r.a.conventional_loss, 0.225, 1e-12));
        assert!(close(r.b.nuclear_loss, 0.12 * 0.45, 1e-12));

        let (a, _, r) = apply_attrition(&f, &f, 0, 0, &cfg);
        assert_eq!(r.combined_intensity, 0.0);
        assert_eq!(a, f);
    }

    #[test]
    fn conventional_band_rates() {
        let cfg = AttritionConfig::default();
        let f = ForceState::beta();
        let (_, _, r) = apply_attrition(&f, &f, 100, 100, &cfg);
        assert!(close(r.a.conventional_loss, 0.025, 1e-12));
        assert_eq!(r.a.nuclear_loss, 0.0);
        let (_, _, r) = apply_attrition(&f, &f, 40, 40, &cfg);
        assert!(close(r.a.conventional_loss, 0.01, 1e-12));
    }

    #[test]
    fn negative_actions_add_no_intensity() {
        assert_eq!(combined_intensity(-95, -50), 0.0);
        assert_eq!(combined_intensity(-95, 100), 0.05);
    }

    #[test]
    fn band_boundaries() {
        assert_eq!(CombatBand::of(449), CombatBand::Conventional);
        assert_eq!(CombatBand::of(450), CombatBand::Tactical);
        assert_eq!(CombatBand::of(574), CombatBand::Tactical);
        assert_eq!(CombatBand::of(575), CombatBand::Limited);
        assert_eq!(CombatBand::of(725), CombatBand::Strategic);
    }

    #[test]
    fn capability_multiplier_is_clamped() {
        let cfg = AttritionConfig::default();
        let strong = FightingPower {
            conventional: 1.0,
            nuclear: 1.0,
        };
        let weak = FightingPower {
            conventional: 0.05,
            nuclear: 0.05,
        };
        assert_eq!(cfg.capability_multiplier(&weak, &strong), 2.0);
        assert_eq!(cfg.capability_multiplier(&strong, &weak), 0.3);
    }

    fn arb_force() -> impl Strategy<Value = ForceState> {
        (0.0..=100.0f64, 0.0..=1.0f64, 0u32..3000, 0.0..=1.0f64).prop_map(|(s, e, w, r)| ForceState {
            conventional_strength: s,
            conventional_effectiveness: e,
            nuclear_warheads: w,
            nuclear_readiness: r,
            divisions: 10,
            doctrine: String::new(),
        })
    }

    fn arb_action() -> impl Strategy<Value = i32> {
        let values: Vec<i32> = crate::ladder::Ladder::canonical()
            .rungs()
            .iter()
            .map(|r| r.value)
            .collect();
        proptest::sample::select(values)
    }

    proptest! {
        #[test]
        fn attrition_never_restores_and_stays_in_range(
            a in arb_force(), b in arb_force(), ea in arb_action(), eb in arb_action()
        ) {
            let cfg = AttritionConfig::default();
            let (na, nb, r) = apply_attrition(&a, &b, ea, eb, &cfg);
            for (old, new) in [(&a, &na), (&b, &nb)] {
                prop_assert!(new.conventional_effectiveness <= old.conventional_effectiveness);
                prop_assert!(new.nuclear_readiness <= old.nuclear_readiness);
                prop_assert!((0.0..=1.0).contains(&new.conventional_effectiveness));
                prop_assert!((0.0..=1.0).contains(&new.nuclear_readiness));
                prop_assert_eq!(new.conventional_strength, old.conventional_strength);
                prop_assert_eq!(new.nuclear_warheads, old.nuclear_warheads);
            }
            if ea.max(eb) < 450 {
                prop_assert_eq!(r.a.nuclear_loss, 0.0);
                prop_assert_eq!(r.b.nuclear_loss, 0.0);
            }
        }

        #[test]
        fn attrition_is_symmetric(a in arb_force(), b in arb_force(), ea in arb_action(), eb in arb_action()) {
            let cfg = AttritionConfig::default();
            let (na, nb, _) = apply_attrition(&a, &b, ea, eb, &cfg);
            let (sb, sa, _) = apply_attrition(&b, &a, eb, ea, &cfg);
            prop_assert_eq!(na, sa);
            prop_assert_eq!(nb, sb);
        }

        #[test]
        fn loss_is_monotone_in_effective_values(
            a in arb_force(), b in arb_force(), ea in arb_action(), eb in arb_action(), ea2 in arb_action()
        ) {
            let cfg = AttritionConfig::default();
            let (lo, hi) = (ea.min(ea2), ea.max(ea2));
            let (_, _, r1) = apply_attrition(&a, &b, lo, eb, &cfg);
            let (_, _, r2) = apply_attrition(&a, &b, hi, eb, &cfg);
            prop_assert!(r2.a.conventional_loss >= r1.a.conventional_loss);
            prop_assert!(r2.b.conventional_loss >= r1.b.conventional_loss);
            prop_assert!(r2.a.nuclear_loss >= r1.a.nuclear_loss);
        }

        #[test]
        fn capability_multiplier_in_range(a in arb_force(), b in arb_force()) {
            let cfg = AttritionConfig::default();
            let fa = fighting_power(&a, cfg.nuclear_fp_scale);
            let fb = fighting_power(&b, cfg.nuclear_fp_scale);
            let m = cfg.capability_multiplier(&fa, &fb);
            prop_assert!((0.3..=2.0).contains(&m));
        }
    }
}
