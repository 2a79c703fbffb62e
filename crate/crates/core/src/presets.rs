//! Specifications used in the published evaluation, plus a placeholder cloud.

use crate::envgen::{generate, to_datacenters, GenParams};
use crate::error::Result;
use crate::io::config::Inputs;
use crate::io::properties::{SimulationParameters, Topology};
use crate::io::xml::CloudDatacenter;
use crate::model::{ApplicationProfile, DeviceTypeSpec, Range, ServerSpec};

/// The four device types: two smartphones, a tablet and a laptop.
pub fn device_types() -> Vec<DeviceTypeSpec> {
    // share, speed, pause, mobility, battery Wh, idle, max, cores, mips, ram, storage
    let rows = [
        (30.0, 1.1, (60.0, 300.0), (60.0, 300.0), 19.25, 0.9, 6.2, 6, 6000.0, 6000.0, 128_000.0),
        (40.0, 1.1, (60.0, 300.0), (60.0, 300.0), 15.4, 0.6, 5.5, 4, 4000.0, 4000.0, 64_000.0),
        (20.0, 0.6, (180.0, 600.0), (60.0, 300.0), 25.9, 1.1, 6.5, 4, 3000.0, 2000.0, 32_000.0),
        (10.0, 0.0, (0.0, 0.0), (0.0, 0.0), 56.5, 1.7, 23.6, 6, 7000.0, 8000.0, 256_000.0),
    ];
    rows.into_iter()
        .map(|(share, speed, pause, mob, wh, idle, max, cores, mips, ram, storage)| DeviceTypeSpec {
            share,
            mobile: speed > 0.0,
            speed,
            pause_range: Range::new(pause.0, pause.1),
            mobility_range: Range::new(mob.0, mob.1),
            battery_powered: true,
            battery_capacity: wh,
            initial_battery: 100.0,
            idle_power: idle,
            max_power: max,
            cores,
            mips_per_core: mips,
            ram,
            storage,
            tx_power: DeviceTypeSpec::DEFAULT_TX_POWER,
            rx_power: DeviceTypeSpec::DEFAULT_RX_POWER,
            connectivity: "wifi".into(),
            generates_tasks: true,
            can_orchestrate: false,
        })
        .collect()
}

/// One application used by every device.
pub fn application() -> ApplicationProfile {
    ApplicationProfile {
        name: "default".into(),
        poisson_rate: 1.0,
        latency_constraint: 0.5,
        input_range: Range::new(100.0, 1000.0),
        container_range: Range::new(0.0, 0.0),
        output_ratio_range: Range::new(0.2, 0.8),
        expected_length: 2000.0,
        device_share: 100.0,
    }
}

/// Cloud tier, parsed for completeness and never used under EDGE_ONLY.
pub fn cloud() -> Vec<CloudDatacenter> {
    vec![CloudDatacenter {
        name: "cloud".into(),
        spec: ServerSpec {
            idle_power: 600.0,
            max_power: 1000.0,
            cores: 200,
            mips_per_core: 40_000.0,
            ram: 16_000_000.0,
            storage: 1_000_000_000.0,
        },
    }]
}

/// Complete scenario inputs: a generated MAN plus the preset devices and
/// application.
pub fn scenario(gen: &GenParams, devices: usize, minutes: f64, topology: Topology) -> Result<Inputs> {
    let env = generate(gen)?;
    Ok(Inputs {
        cloud: cloud(),
        datacenters: to_datacenters(&env, &gen.server_spec, gen.man_bandwidth, gen.man_latency),
        devices: device_types(),
        applications: vec![application()],
        params: SimulationParameters {
            simulation_time: minutes,
            man_bandwidth: gen.man_bandwidth,
            man_latency: gen.man_latency,
            topology,
            device_count: devices,
            area_side: gen.side,
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        let d = device_types();
        assert_eq!(d.iter().map(|t| t.share).sum::<f64>(), 100.0);
        assert!(d.iter().all(|t| t.validate().is_ok()));
        assert!(!d[3].mobile && d[..3].iter().all(|t| t.mobile));
        let a = application();
        assert!(a.validate().is_ok() && a.container_follows_input());
    }
}
