//! The four XML input files: reading and canonical writing.
//!
//! Writers are canonical (fixed element order, two-space indent, shortest
//! round-trip float formatting), so `write(parse(write(x)))` is
//! byte-identical to `write(x)`.

use std::fmt::Write as _;
use std::path::Path;

use roxmltree::{Document, Node};

use crate::error::{Error, Result};
use crate::model::{ApplicationProfile, DeviceTypeSpec, Location, Range, ServerSpec};

pub const CLOUD_FILE: &str = "cloud.xml";
pub const DATACENTERS_FILE: &str = "edge_datacenters.xml";
pub const DEVICES_FILE: &str = "edge_devices.xml";
pub const APPLICATIONS_FILE: &str = "applications.xml";

#[derive(Debug, Clone, PartialEq)]
pub struct CloudDatacenter {
    pub name: String,
    pub spec: ServerSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatacenterEntry {
    pub name: String,
    pub periphery: bool,
    pub location: Location,
    /// Present for edge servers, absent for access points.
    pub spec: Option<ServerSpec>,
    pub cluster: Option<usize>,
    pub cluster_head: bool,
}

impl DatacenterEntry {
    /// Servers carry `dc` in their name, access points `ap`.
    pub fn is_server(&self) -> bool {
        self.name.contains("dc")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkEntry {
    pub from: String,
    pub to: String,
    pub latency: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatacentersFile {
    pub datacenters: Vec<DatacenterEntry>,
    pub links: Vec<LinkEntry>,
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    file: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, element: impl Into<String>, rule: impl Into<String>) -> Error {
        Error::config(self.file, element, rule)
    }

    fn child<'d>(&self, node: Node<'d, 'd>, name: &str, ctx: &str) -> Result<Node<'d, 'd>> {
        node.children()
            .find(|c| c.has_tag_name(name))
            .ok_or_else(|| self.err(format!("{ctx}/{name}"), "required element is missing"))
    }

    fn opt_text<'d>(&self, node: Node<'d, 'd>, name: &str) -> Option<&'d str> {
        node.children()
            .find(|c| c.has_tag_name(name))
            .map(|c| c.text().unwrap_or("").trim())
    }

    fn text<'d>(&self, node: Node<'d, 'd>, name: &str, ctx: &str) -> Result<&'d str> {
        Ok(self.child(node, name, ctx)?.text().unwrap_or("").trim())
    }

    fn f64(&self, node: Node, name: &str, ctx: &str) -> Result<f64> {
        let t = self.text(node, name, ctx)?;
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(format!("{ctx}/{name}"), format!("'{t}' is not a finite number")))
    }

    fn opt_f64(&self, node: Node, name: &str, ctx: &str) -> Result<Option<f64>> {
        match self.opt_text(node, name) {
            None => Ok(None),
            Some(_) => self.f64(node, name, ctx).map(Some),
        }
    }

    fn u32(&self, node: Node, name: &str, ctx: &str) -> Result<u32> {
        let t = self.text(node, name, ctx)?;
        t.parse::<u32>()
            .map_err(|_| self.err(format!("{ctx}/{name}"), format!("'{t}' is not a non-negative integer")))
    }

    fn bool(&self, node: Node, name: &str, ctx: &str) -> Result<bool> {
        let t = self.text(node, name, ctx)?;
        parse_bool(t).ok_or_else(|| self.err(format!("{ctx}/{name}"), format!("'{t}' is not true/false")))
    }

    fn opt_bool(&self, node: Node, name: &str, ctx: &str) -> Result<Option<bool>> {
        match self.opt_text(node, name) {
            None => Ok(None),
            Some(_) => self.bool(node, name, ctx).map(Some),
        }
    }

    fn server_spec(&self, node: Node, ctx: &str) -> Result<ServerSpec> {
        let spec = ServerSpec {
            idle_power: self.f64(node, "idleConsumption", ctx)?,
            max_power: self.f64(node, "maxConsumption", ctx)?,
            cores: self.u32(node, "cores", ctx)?,
            mips_per_core: self.f64(node, "mips", ctx)?,
            ram: self.f64(node, "ram", ctx)?,
            storage: self.f64(node, "storage", ctx)?,
        };
        spec.validate().map_err(|rule| self.err(ctx, rule))?;
        Ok(spec)
    }
}

pub(crate) fn parse_bool(t: &str) -> Option<bool> {
    match t.to_ascii_lowercase().as_str() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn parse_doc<'a>(path: &Path, text: &'a str) -> Result<Document<'a>> {
    Document::parse(text).map_err(|source| Error::Xml {
        path: path.to_path_buf(),
        source,
    })
}

fn expect_root(r: &Reader, doc: &Document, name: &str) -> Result<()> {
    if doc.root_element().has_tag_name(name) {
        Ok(())
    } else {
        Err(r.err(doc.root_element().tag_name().name(), format!("root element must be <{name}>")))
    }
}

fn name_attr(r: &Reader, node: Node, idx: usize) -> Result<String> {
    node.attribute("name")
        .map(str::to_owned)
        .ok_or_else(|| r.err(format!("datacenter #{idx}"), "missing name attribute"))
}

pub fn parse_cloud(path: &Path) -> Result<Vec<CloudDatacenter>> {
    let text = read_file(path)?;
    parse_cloud_str(path, &text)
}

pub fn parse_cloud_str(path: &Path, text: &str) -> Result<Vec<CloudDatacenter>> {
    let r = Reader { file: CLOUD_FILE };
    let doc = parse_doc(path, text)?;
    expect_root(&r, &doc, "cloud_datacenters")?;
    doc.root_element()
        .children()
        .filter(|c| c.has_tag_name("datacenter"))
        .enumerate()
        .map(|(i, n)| {
            let name = name_attr(&r, n, i)?;
            let spec = r.server_spec(n, &name)?;
            Ok(CloudDatacenter { name, spec })
        })
        .collect()
}

pub fn parse_datacenters(path: &Path) -> Result<DatacentersFile> {
    let text = read_file(path)?;
    parse_datacenters_str(path, &text)
}

pub fn parse_datacenters_str(path: &Path, text: &str) -> Result<DatacentersFile> {
    let r = Reader {
        file: DATACENTERS_FILE,
    };
    let doc = parse_doc(path, text)?;
    expect_root(&r, &doc, "edge_datacenters")?;
    let root = doc.root_element();
    let mut out = DatacentersFile::default();
    for (i, n) in root.children().filter(|c| c.has_tag_name("datacenter")).enumerate() {
        let name = name_attr(&r, n, i)?;
        let is_server = name.contains("dc");
        if !is_server && !name.contains("ap") {
            return Err(r.err(&name, "name must contain 'dc' (server) or 'ap' (access point)"));
        }
        let loc = r.child(n, "location", &name)?;
        let ctx = format!("{name}/location");
        let location = Location::new(r.f64(loc, "x_pos", &ctx)?, r.f64(loc, "y_pos", &ctx)?);
        let spec = if is_server {
            Some(r.server_spec(n, &name)?)
        } else {
            None
        };
        let cluster = match r.opt_text(n, "cluster") {
            None => None,
            Some(t) => Some(
                t.parse::<usize>()
                    .map_err(|_| r.err(format!("{name}/cluster"), "must be a non-negative integer"))?,
            ),
        };
        if !is_server && cluster.is_some() {
            return Err(r.err(format!("{name}/cluster"), "access points cannot join clusters"));
        }
        out.datacenters.push(DatacenterEntry {
            periphery: r.opt_bool(n, "periphery", &name)?.unwrap_or(true),
            location,
            spec,
            cluster,
            cluster_head: r.opt_bool(n, "isClusterHead", &name)?.unwrap_or(false),
            name,
        });
    }
    let mut seen = std::collections::HashSet::new();
    for d in &out.datacenters {
        if !seen.insert(d.name.as_str()) {
            return Err(r.err(&d.name, "duplicate datacenter name"));
        }
    }
    if let Some(links) = root.children().find(|c| c.has_tag_name("network_links")) {
        for (i, l) in links.children().filter(|c| c.has_tag_name("link")).enumerate() {
            let ctx = format!("network_links/link #{i}");
            let entry = LinkEntry {
                from: r.text(l, "from", &ctx)?.to_owned(),
                to: r.text(l, "to", &ctx)?.to_owned(),
                latency: r.f64(l, "latency", &ctx)?,
                bandwidth: r.f64(l, "bandwidth", &ctx)?,
            };
            for end in [&entry.from, &entry.to] {
                if !seen.contains(end.as_str()) {
                    return Err(r.err(&ctx, format!("unknown endpoint '{end}'")));
                }
            }
            if !(entry.bandwidth > 0.0) || entry.latency < 0.0 {
                return Err(r.err(&ctx, "bandwidth must be > 0 and latency >= 0"));
            }
            out.links.push(entry);
        }
    }
    Ok(out)
}

pub fn parse_devices(path: &Path) -> Result<Vec<DeviceTypeSpec>> {
    let text = read_file(path)?;
    parse_devices_str(path, &text)
}

pub fn parse_devices_str(path: &Path, text: &str) -> Result<Vec<DeviceTypeSpec>> {
    let r = Reader { file: DEVICES_FILE };
    let doc = parse_doc(path, text)?;
    expect_root(&r, &doc, "edge_devices")?;
    let mut out = Vec::new();
    for (i, n) in doc.root_element().children().filter(|c| c.has_tag_name("device")).enumerate() {
        let ctx = format!("device #{}", i + 1);
        let battery_powered = r.bool(n, "battery", &ctx)?;
        let spec = DeviceTypeSpec {
            share: r.f64(n, "percentage", &ctx)?,
            mobile: r.bool(n, "mobility", &ctx)?,
            speed: r.f64(n, "speed", &ctx)?,
            pause_range: Range::new(
                r.f64(n, "minPauseDuration", &ctx)?,
                r.f64(n, "maxPauseDuration", &ctx)?,
            ),
            mobility_range: Range::new(
                r.f64(n, "minMobilityDuration", &ctx)?,
                r.f64(n, "maxMobilityDuration", &ctx)?,
            ),
            battery_powered,
            battery_capacity: if battery_powered {
                r.f64(n, "batteryCapacity", &ctx)?
            } else {
                r.opt_f64(n, "batteryCapacity", &ctx)?.unwrap_or(0.0)
            },
            initial_battery: r.opt_f64(n, "initialBatteryLevel", &ctx)?.unwrap_or(100.0),
            idle_power: r.f64(n, "idleConsumption", &ctx)?,
            max_power: r.f64(n, "maxConsumption", &ctx)?,
            cores: r.u32(n, "cores", &ctx)?,
            mips_per_core: r.f64(n, "mips", &ctx)?,
            ram: r.f64(n, "ram", &ctx)?,
            storage: r.f64(n, "storage", &ctx)?,
            tx_power: r
                .opt_f64(n, "transmissionPower", &ctx)?
                .unwrap_or(DeviceTypeSpec::DEFAULT_TX_POWER),
            rx_power: r
                .opt_f64(n, "receptionPower", &ctx)?
                .unwrap_or(DeviceTypeSpec::DEFAULT_RX_POWER),
            connectivity: r.text(n, "connectivity", &ctx)?.to_ascii_lowercase(),
            generates_tasks: r.bool(n, "generateTasks", &ctx)?,
            can_orchestrate: r.opt_bool(n, "isOrchestrator", &ctx)?.unwrap_or(false),
        };
        if !matches!(spec.connectivity.as_str(), "wifi" | "cellular" | "ethernet") {
            return Err(r.err(format!("{ctx}/connectivity"), "must be wifi, cellular or ethernet"));
        }
        spec.validate().map_err(|rule| r.err(&ctx, rule))?;
        out.push(spec);
    }
    if out.is_empty() {
        return Err(r.err("edge_devices", "at least one device type is required"));
    }
    check_shares(&r, out.iter().map(|d| d.share), "percentage")?;
    Ok(out)
}

fn check_shares(r: &Reader, shares: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let total: f64 = shares.sum();
    if (total - 100.0).abs() > 1e-9 {
        return Err(r.err(what, format!("shares must sum to 100, got {total}")));
    }
    Ok(())
}

pub fn parse_applications(path: &Path) -> Result<Vec<ApplicationProfile>> {
    let text = read_file(path)?;
    parse_applications_str(path, &text)
}

pub fn parse_applications_str(path: &Path, text: &str) -> Result<Vec<ApplicationProfile>> {
    let r = Reader {
        file: APPLICATIONS_FILE,
    };
    let doc = parse_doc(path, text)?;
    expect_root(&r, &doc, "applications")?;
    let mut out = Vec::new();
    for (i, n) in doc
        .root_element()
        .children()
        .filter(|c| c.has_tag_name("application"))
        .enumerate()
    {
        let name = n.attribute("name").map_or_else(|| format!("application #{}", i + 1), str::to_owned);
        let ctx = name.as_str();
        let app = ApplicationProfile {
            poisson_rate: r.f64(n, "rate", ctx)?,
            latency_constraint: r.f64(n, "latency", ctx)?,
            input_range: Range::new(r.f64(n, "input_size_min", ctx)?, r.f64(n, "input_size_max", ctx)?),
            container_range: Range::new(
                r.f64(n, "container_size_min", ctx)?,
                r.f64(n, "container_size_max", ctx)?,
            ),
            output_ratio_range: Range::new(
                r.f64(n, "output_ratio_min", ctx)?,
                r.f64(n, "output_ratio_max", ctx)?,
            ),
            expected_length: r.f64(n, "task_length", ctx)?,
            device_share: r.f64(n, "usage_percentage", ctx)?,
            name: name.clone(),
        };
        app.validate().map_err(|rule| r.err(ctx, rule))?;
        out.push(app);
    }
    if out.is_empty() {
        return Err(r.err("applications", "at least one application is required"));
    }
    check_shares(&r, out.iter().map(|a| a.device_share), "usage_percentage")?;
    Ok(out)
}

struct Writer {
    out: String,
    depth: usize,
}

impl Writer {
    fn new() -> Self {
        Self {
            out: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"),
            depth: 0,
        }
    }

    fn indent(&mut self) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
    }

    fn open(&mut self, tag: &str) {
        self.indent();
        let _ = writeln!(self.out, "<{tag}>");
        self.depth += 1;
    }

    fn open_named(&mut self, tag: &str, name: &str) {
        self.indent();
        let _ = writeln!(self.out, "<{tag} name=\"{}\">", escape(name));
        self.depth += 1;
    }

    fn close(&mut self, tag: &str) {
        self.depth -= 1;
        self.indent();
        let _ = writeln!(self.out, "</{tag}>");
    }

    fn leaf(&mut self, tag: &str, value: impl std::fmt::Display) {
        self.indent();
        let v = escape(&value.to_string());
        let _ = writeln!(self.out, "<{tag}>{v}</{tag}>");
    }

    fn spec(&mut self, s: &ServerSpec) {
        self.leaf("idleConsumption", s.idle_power);
        self.leaf("maxConsumption", s.max_power);
        self.leaf("cores", s.cores);
        self.leaf("mips", s.mips_per_core);
        self.leaf("ram", s.ram);
        self.leaf("storage", s.storage);
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn write_cloud(cloud: &[CloudDatacenter]) -> String {
    let mut w = Writer::new();
    w.open("cloud_datacenters");
    for c in cloud {
        w.open_named("datacenter", &c.name);
        w.spec(&c.spec);
        w.close("datacenter");
    }
    w.close("cloud_datacenters");
    w.out
}

pub fn write_datacenters(file: &DatacentersFile) -> String {
    let mut w = Writer::new();
    w.open("edge_datacenters");
    for d in &file.datacenters {
        w.open_named("datacenter", &d.name);
        w.leaf("periphery", d.periphery);
        if let Some(s) = &d.spec {
            w.spec(s);
        }
        w.open("location");
        w.leaf("x_pos", d.location.x);
        w.leaf("y_pos", d.location.y);
        w.close("location");
        if let Some(c) = d.cluster {
            w.leaf("cluster", c);
        }
        if d.spec.is_some() {
            w.leaf("isClusterHead", d.cluster_head);
        }
        w.close("datacenter");
    }
    w.open("network_links");
    for l in &file.links {
        w.open("link");
        w.leaf("from", &l.from);
        w.leaf("to", &l.to);
        w.leaf("latency", l.latency);
        w.leaf("bandwidth", l.bandwidth);
        w.close("link");
    }
    w.close("network_links");
    w.close("edge_datacenters");
    w.out
}

pub fn write_devices(devices: &[DeviceTypeSpec]) -> String {
    let mut w = Writer::new();
    w.open("edge_devices");
    for d in devices {
        w.open("device");
        w.leaf("percentage", d.share);
        w.leaf("mobility", d.mobile);
        w.leaf("speed", d.speed);
        w.leaf("minPauseDuration", d.pause_range.min);
        w.leaf("maxPauseDuration", d.pause_range.max);
        w.leaf("minMobilityDuration", d.mobility_range.min);
        w.leaf("maxMobilityDuration", d.mobility_range.max);
        w.leaf("battery", d.battery_powered);
        w.leaf("batteryCapacity", d.battery_capacity);
        w.leaf("initialBatteryLevel", d.initial_battery);
        w.leaf("idleConsumption", d.idle_power);
        w.leaf("maxConsumption", d.max_power);
        w.leaf("cores", d.cores);
        w.leaf("mips", d.mips_per_core);
        w.leaf("ram", d.ram);
        w.leaf("storage", d.storage);
        w.leaf("transmissionPower", d.tx_power);
        w.leaf("receptionPower", d.rx_power);
        w.leaf("connectivity", &d.connectivity);
        w.leaf("generateTasks", d.generates_tasks);
        w.leaf("isOrchestrator", d.can_orchestrate);
        w.close("device");
    }
    w.close("edge_devices");
    w.out
}

pub fn write_applications(apps: &[ApplicationProfile]) -> String {
    let mut w = Writer::new();
    w.open("applications");
    for a in apps {
        w.open_named("application", &a.name);
        w.leaf("rate", a.poisson_rate);
        w.leaf("usage_percentage", a.device_share);
        w.leaf("latency", a.latency_constraint);
        w.leaf("input_size_min", a.input_range.min);
        w.leaf("input_size_max", a.input_range.max);
        w.leaf("container_size_min", a.container_range.min);
        w.leaf("container_size_max", a.container_range.max);
        w.leaf("output_ratio_min", a.output_ratio_range.min);
        w.leaf("output_ratio_max", a.output_ratio_range.max);
        w.leaf("task_length", a.expected_length);
        w.close("application");
    }
    w.close("applications");
    w.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("test.xml")
    }

    pub(crate) fn device(share: f64) -> DeviceTypeSpec {
        DeviceTypeSpec {
            share,
            mobile: true,
            speed: 1.1,
            pause_range: Range::new(60.0, 300.0),
            mobility_range: Range::new(60.0, 300.0),
            battery_powered: true,
            battery_capacity: 19.25,
            initial_battery: 100.0,
            idle_power: 0.9,
            max_power: 6.2,
            cores: 6,
            mips_per_core: 6000.0,
            ram: 6000.0,
            storage: 128_000.0,
            tx_power: 1.3,
            rx_power: 1.0,
            connectivity: "wifi".into(),
            generates_tasks: true,
            can_orchestrate: false,
        }
    }

    #[test]
    fn device_shares_must_sum_to_100() {
        let ok: Vec<_> = [30.0, 40.0, 20.0, 10.0].into_iter().map(device).collect();
        let text = write_devices(&ok);
        assert_eq!(parse_devices_str(&p(), &text).unwrap(), ok);
        let bad: Vec<_> = [30.0, 40.0, 20.0, 20.0].into_iter().map(device).collect();
        let err = parse_devices_str(&p(), &write_devices(&bad)).unwrap_err();
        assert!(err.to_string().contains("sum to 100"), "{err}");
        assert!(err.to_string().contains(DEVICES_FILE));
    }

    #[test]
    fn radio_powers_default_when_absent() {
        let text = write_devices(&[device(100.0)])
            .replace("    <transmissionPower>1.3</transmissionPower>\n", "")
            .replace("    <receptionPower>1</receptionPower>\n", "");
        let d = &parse_devices_str(&p(), &text).unwrap()[0];
        assert_eq!((d.tx_power, d.rx_power), (1.3, 1.0));
    }

    #[test]
    fn min_above_max_is_rejected() {
        let app = ApplicationProfile {
            name: "a".into(),
            poisson_rate: 1.0,
            latency_constraint: 0.5,
            input_range: Range::new(1000.0, 100.0),
            container_range: Range::new(0.0, 0.0),
            output_ratio_range: Range::new(0.2, 0.8),
            expected_length: 2000.0,
            device_share: 100.0,
        };
        let err = parse_applications_str(&p(), &write_applications(&[app])).unwrap_err();
        assert!(err.to_string().contains("min > max"), "{err}");
    }

    #[test]
    fn datacenter_names_need_a_role_marker() {
        let file = DatacentersFile {
            datacenters: vec![DatacenterEntry {
                name: "node7".into(),
                periphery: true,
                location: Location::new(0.0, 0.0),
                spec: None,
                cluster: None,
                cluster_head: false,
            }],
            links: vec![],
        };
        let err = parse_datacenters_str(&p(), &write_datacenters(&file)).unwrap_err();
        assert!(err.to_string().contains("node7"));
    }

    #[test]
    fn datacenters_round_trip_is_canonical() {
        let file = DatacentersFile {
            datacenters: vec![
                DatacenterEntry {
                    name: "ap0".into(),
                    periphery: true,
                    location: Location::new(0.0, 38.97114317029974),
                    spec: None,
                    cluster: None,
                    cluster_head: false,
                },
                DatacenterEntry {
                    name: "dc0".into(),
                    periphery: true,
                    location: Location::new(0.0, 38.97114317029974),
                    spec: Some(ServerSpec::HIGH_CAPACITY),
                    cluster: Some(0),
                    cluster_head: true,
                },
            ],
            links: vec![LinkEntry {
                from: "dc0".into(),
                to: "ap0".into(),
                latency: 0.0,
                bandwidth: 1000.0,
            }],
        };
        let text = write_datacenters(&file);
        let parsed = parse_datacenters_str(&p(), &text).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(write_datacenters(&parsed), text);
    }

    #[test]
    fn unknown_link_endpoint_is_rejected() {
        let text = "<edge_datacenters><datacenter name=\"ap0\"><location><x_pos>0</x_pos><y_pos>0</y_pos></location></datacenter>\
            <network_links><link><from>ap0</from><to>ap9</to><latency>0</latency><bandwidth>1</bandwidth></link></network_links></edge_datacenters>";
        let err = parse_datacenters_str(&p(), text).unwrap_err();
        assert!(err.to_string().contains("ap9"));
    }
}
