#![allow(dead_code)]

use actdet::covariance::Atom;
use actdet::descent::DetectOptions;
use actdet::signal::{
    generate_noise, received_effective, sample_covariance, PilotSet, SampleCovariance, Scene,
    SystemConfig,
};
use actdet::CMatrix;

pub struct Fixture {
    pub config: SystemConfig,
    pub pilots: PilotSet,
    pub scene: Scene,
    pub sample: SampleCovariance,
}

pub fn fixture(config: SystemConfig, seed: u64) -> Fixture {
    let pilots = PilotSet::generate(&config, seed).unwrap();
    let scene = Scene::generate(&config, seed).unwrap();
    let noise = generate_noise(&config, seed);
    let r = received_effective(&scene, &pilots, &config, &noise).unwrap();
    Fixture {
        sample: sample_covariance(&r),
        config,
        pilots,
        scene,
    }
}

pub fn fixed_sweeps(n: usize) -> DetectOptions {
    DetectOptions {
        max_sweeps: n,
        tol: 0.0,
        ..DetectOptions::default()
    }
}

pub fn device_atoms<'a>(pilots: &'a PilotSet, config: &SystemConfig) -> Vec<Atom<'a>> {
    pilots
        .blocks()
        .iter()
        .zip(&config.gains)
        .map(|(block, &gain)| Atom { block, gain })
        .collect()
}

pub fn column_atoms<'a>(columns: &'a [CMatrix], config: &SystemConfig) -> Vec<Atom<'a>> {
    columns
        .iter()
        .enumerate()
        .map(|(i, block)| Atom {
            block,
            gain: config.gains[i / config.taps],
        })
        .collect()
}
