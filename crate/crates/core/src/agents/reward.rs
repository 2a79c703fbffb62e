use crate::model::ServerSpec;
use crate::scalar::Scalar;

/// Profit of one server over a slot: revenue `p * Q` minus the energy cost
/// of idling for the slot and of executing `Q` MIs.
pub fn reward_decentralized<S: Scalar>(price: S, offloaded_mi: S, spec: &ServerSpec, zeta: S, slot: S) -> S {
    reward_hybrid(price, offloaded_mi, 1, spec, zeta, slot)
}

/// Profit of a cluster of `members` identical servers over a slot.
pub fn reward_hybrid<S: Scalar>(
    price: S,
    offloaded_mi: S,
    members: usize,
    spec: &ServerSpec,
    zeta: S,
    slot: S,
) -> S {
    let idle = S::of(spec.idle_power);
    let dynamic = S::of(spec.max_power - spec.idle_power);
    let capacity = S::of(spec.capacity_mips());
    let n = S::of(members as f64);
    price * offloaded_mi - zeta * (n * slot * idle + dynamic * offloaded_mi / capacity)
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z: f64 = 1e-5;

    #[test]
    fn idle_slot_costs_only_idle_power() {
        let r = reward_decentralized(0.3, 0.0, &ServerSpec::HIGH_CAPACITY, Z, 5.0);
        assert!((r + 5.25e-3).abs() < 1e-15);
    }

    #[test]
    fn high_capacity_example() {
        let r = reward_decentralized(0.01, 1e6, &ServerSpec::HIGH_CAPACITY, Z, 5.0);
        let expect = 1e4 - 5.25e-3 - 1e-5 * 80.0 * (1e6 / 300_000.0);
        assert!((r - expect).abs() < 1e-9);
        assert!((r - 9999.992083).abs() < 1e-6);
    }

    #[test]
    fn cluster_example() {
        let r = reward_hybrid(0.02, 5e5, 5, &ServerSpec::LOW_CAPACITY, Z, 5.0);
        // 1e4 - 1e-5 * 1125 - 1e-5 * 50 * 5e5 / 6e4
        assert!((r - 9_999.984_583_333_333).abs() < 1e-9);
        let idle2 = reward_hybrid(0.5, 0.0, 2, &ServerSpec::LOW_CAPACITY, Z, 5.0);
        assert!((idle2 + 2.0 * Z * 5.0 * 45.0).abs() < 1e-15);
    }

    #[test]
    fn single_member_cluster_reduces() {
        for (p, q) in [(0.0, 0.0), (0.4, 12345.0), (1.0, 9e5)] {
            assert_eq!(
                reward_hybrid(p, q, 1, &ServerSpec::HIGH_CAPACITY, Z, 5.0),
                reward_decentralized(p, q, &ServerSpec::HIGH_CAPACITY, Z, 5.0)
            );
        }
    }

    #[test]
    fn single_precision_agrees() {
        let a = reward_decentralized(0.01f32, 1e6, &ServerSpec::HIGH_CAPACITY, 1e-5, 5.0);
        assert!((f64::from(a) - 9999.992083).abs() < 1e-2);
    }
}
