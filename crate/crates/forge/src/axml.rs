//! Binary manifest emission, the write-side inverse of the manifest
//! decoder: one UTF-16 string pool followed by start/end element chunks.

use std::collections::HashMap;

use crate::{ForgeSpec, IconPlan};

const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";
const NO_INDEX: u32 = 0xffff_ffff;

const TYPE_REFERENCE: u8 = 0x01;
const TYPE_STRING: u8 = 0x03;
const TYPE_INT_DEC: u8 = 0x10;

/// Resource id planted for the launcher icon; decoders that do not resolve
/// resource tables render it as `@0x7f030001`.
const ICON_RESOURCE_ID: u32 = 0x7f03_0001;

/// Encode the spec as a binary `AndroidManifest.xml`: manifest element with
/// package/version, one `uses-permission` per entry in given order, an
/// application element carrying the label (and an icon reference when an
/// icon is planted), and a single relative-named activity.
pub fn build_manifest_axml(spec: &ForgeSpec) -> Vec<u8> {
    let mut pool = Pool::default();
    let ns = pool.intern(ANDROID_NS);

    let manifest = pool.intern("manifest");
    let package = pool.intern("package");
    let version_code = pool.intern("versionCode");
    let version_name = pool.intern("versionName");
    let uses_permission = pool.intern("uses-permission");
    let name = pool.intern("name");
    let application = pool.intern("application");
    let label = pool.intern("label");
    let icon = pool.intern("icon");
    let activity = pool.intern("activity");

    let package_value = pool.intern(&spec.package_name);
    let version_value = pool.intern("1.0");
    let label_value = pool.intern(&spec.app_label);
    let permission_values: Vec<u32> = spec
        .permissions
        .iter()
        .map(|p| pool.intern(p))
        .collect();
    let activity_value = pool.intern(".MainActivity");

    let mut chunks = Vec::new();
    chunks.push(start_element(
        manifest,
        &[
            Attr::string(NO_INDEX, package, package_value),
            Attr::int(ns, version_code, 1),
            Attr::string(ns, version_name, version_value),
        ],
    ));
    for value in permission_values {
        chunks.push(start_element(uses_permission, &[Attr::string(ns, name, value)]));
        chunks.push(end_element(uses_permission));
    }
    let mut app_attrs = vec![Attr::string(ns, label, label_value)];
    if spec.icon != IconPlan::None {
        app_attrs.push(Attr::reference(ns, icon, ICON_RESOURCE_ID));
    }
    chunks.push(start_element(application, &app_attrs));
    chunks.push(start_element(activity, &[Attr::string(ns, name, activity_value)]));
    chunks.push(end_element(activity));
    chunks.push(end_element(application));
    chunks.push(end_element(manifest));

    let pool_chunk = pool.into_chunk();
    let total = 8 + pool_chunk.len() + chunks.iter().map(Vec::len).sum::<usize>();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&0x0003u16.to_le_bytes());
    out.extend_from_slice(&8u16.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&pool_chunk);
    for chunk in &chunks {
        out.extend_from_slice(chunk);
    }
    out
}

/// Interning UTF-16 string pool. Duplicate strings share one slot.
#[derive(Default)]
struct Pool {
    strings: Vec<String>,
    slots: HashMap<String, u32>,
}

impl Pool {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&slot) = self.slots.get(s) {
            return slot;
        }
        let slot = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.slots.insert(s.to_string(), slot);
        slot
    }

    fn into_chunk(self) -> Vec<u8> {
        let mut offsets = Vec::with_capacity(self.strings.len());
        let mut data = Vec::new();
        for s in &self.strings {
            offsets.push(data.len() as u32);
            let units: Vec<u16> = s.encode_utf16().collect();
            if units.len() < 0x8000 {
                data.extend_from_slice(&(units.len() as u16).to_le_bytes());
            } else {
                let high = 0x8000 | (units.len() >> 16) as u16;
                data.extend_from_slice(&high.to_le_bytes());
                data.extend_from_slice(&(units.len() as u16).to_le_bytes());
            }
            for unit in units {
                data.extend_from_slice(&unit.to_le_bytes());
            }
            data.extend_from_slice(&0u16.to_le_bytes());
        }
        while data.len() % 4 != 0 {
            data.push(0);
        }

        let count = self.strings.len() as u32;
        let strings_start = 28 + 4 * count;
        let size = strings_start as usize + data.len();
        let mut out = Vec::with_capacity(size);
        out.extend_from_slice(&0x0001u16.to_le_bytes());
        out.extend_from_slice(&28u16.to_le_bytes());
        out.extend_from_slice(&(size as u32).to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&strings_start.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for offset in offsets {
            out.extend_from_slice(&offset.to_le_bytes());
        }
        out.extend_from_slice(&data);
        out
    }
}

struct Attr {
    ns: u32,
    name: u32,
    raw: u32,
    dtype: u8,
    data: u32,
}

impl Attr {
    fn string(ns: u32, name: u32, value: u32) -> Attr {
        Attr { ns, name, raw: value, dtype: TYPE_STRING, data: value }
    }

    fn int(ns: u32, name: u32, value: u32) -> Attr {
        Attr { ns, name, raw: NO_INDEX, dtype: TYPE_INT_DEC, data: value }
    }

    fn reference(ns: u32, name: u32, value: u32) -> Attr {
        Attr { ns, name, raw: NO_INDEX, dtype: TYPE_REFERENCE, data: value }
    }
}

fn start_element(name: u32, attrs: &[Attr]) -> Vec<u8> {
    let size = 16 + 20 + attrs.len() * 20;
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(&0x0102u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(&(size as u32).to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&NO_INDEX.to_le_bytes());
    out.extend_from_slice(&NO_INDEX.to_le_bytes());
    out.extend_from_slice(&name.to_le_bytes());
    out.extend_from_slice(&20u16.to_le_bytes());
    out.extend_from_slice(&20u16.to_le_bytes());
    out.extend_from_slice(&(attrs.len() as u16).to_le_bytes());
    out.extend_from_slice(&[0u8; 6]);
    for attr in attrs {
        out.extend_from_slice(&attr.ns.to_le_bytes());
        out.extend_from_slice(&attr.name.to_le_bytes());
        out.extend_from_slice(&attr.raw.to_le_bytes());
        out.extend_from_slice(&20u16.to_le_bytes());
        out.push(0);
        out.push(attr.dtype);
        out.extend_from_slice(&attr.data.to_le_bytes());
    }
    out
}

fn end_element(name: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(24);
    out.extend_from_slice(&0x0103u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(&24u32.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&NO_INDEX.to_le_bytes());
    out.extend_from_slice(&NO_INDEX.to_le_bytes());
    out.extend_from_slice(&name.to_le_bytes());
    out
}
