use std::path::{Path, PathBuf};

use crate::agents::{Hyperparams, Mode};
use crate::error::{Error, Result};
use crate::model::{ApplicationProfile, DeviceTypeSpec};

use super::properties::{parse_properties, SimulationParameters, PROPERTIES_FILE};
use super::xml::{
    parse_applications, parse_cloud, parse_datacenters, parse_devices, write_applications, write_cloud,
    write_datacenters, write_devices, write_file, CloudDatacenter, DatacentersFile, APPLICATIONS_FILE, CLOUD_FILE,
    DATACENTERS_FILE, DEVICES_FILE,
};

/// The five input files of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub cloud: Vec<CloudDatacenter>,
    pub datacenters: DatacentersFile,
    pub devices: Vec<DeviceTypeSpec>,
    pub applications: Vec<ApplicationProfile>,
    pub params: SimulationParameters,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folders {
    pub input: PathBuf,
    pub output: PathBuf,
    pub models: PathBuf,
}

/// Everything one episode needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Model sub-folder name; defaults to the input folder's name.
    pub name: String,
    pub inputs: Inputs,
    pub hyper: Hyperparams,
    pub mode: Mode,
    pub seed: u64,
    pub folders: Folders,
}

fn require(folder: &Path, file: &str) -> Result<PathBuf> {
    let p = folder.join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::config(file, folder.display().to_string(), "input file is missing"))
    }
}

/// Reads and validates the five input files in `folder`.
pub fn parse_inputs(folder: &Path) -> Result<Inputs> {
    Ok(Inputs {
        cloud: parse_cloud(&require(folder, CLOUD_FILE)?)?,
        datacenters: parse_datacenters(&require(folder, DATACENTERS_FILE)?)?,
        devices: parse_devices(&require(folder, DEVICES_FILE)?)?,
        applications: parse_applications(&require(folder, APPLICATIONS_FILE)?)?,
        params: parse_properties(&require(folder, PROPERTIES_FILE)?)?,
    })
}

/// Writes the five files in canonical form.
pub fn write_inputs(folder: &Path, inputs: &Inputs) -> Result<()> {
    write_file(&folder.join(CLOUD_FILE), &write_cloud(&inputs.cloud))?;
    write_file(&folder.join(DATACENTERS_FILE), &write_datacenters(&inputs.datacenters))?;
    write_file(&folder.join(DEVICES_FILE), &write_devices(&inputs.devices))?;
    write_file(&folder.join(APPLICATIONS_FILE), &write_applications(&inputs.applications))?;
    write_file(&folder.join(PROPERTIES_FILE), &super::properties::write_properties(&inputs.params))
}

pub fn scenario_name(folder: &Path) -> String {
    folder
        .canonicalize()
        .ok()
        .as_deref()
        .unwrap_or(folder)
        .file_name()
        .map_or_else(|| "scenario".to_owned(), |n| n.to_string_lossy().into_owned())
}

impl ScenarioConfig {
    pub fn load(folders: Folders, hyper: Hyperparams, mode: Mode, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let inputs = parse_inputs(&folders.input)?;
        Ok(Self {
            name: scenario_name(&folders.input),
            inputs,
            hyper,
            mode,
            seed,
            folders,
        })
    }
}
