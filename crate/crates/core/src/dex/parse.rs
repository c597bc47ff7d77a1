//! Single DEX image to class records.

use crate::model::{ClassRecord, FieldRecord, MethodRecord};

use super::reader::{mutf8, Bytes, Cursor};
use super::{descriptor_to_java, DexError};

const HEADER_SIZE: usize = 0x70;
const NO_INDEX: u32 = 0xffff_ffff;
const ACC_INTERFACE: u32 = 0x0200;

pub const SUPPORTED_VERSIONS: [&str; 5] = ["035", "036", "037", "038", "039"];

#[derive(Clone, Copy)]
struct Table {
    size: u32,
    off: u32,
}

struct Header {
    string_ids: Table,
    type_ids: Table,
    proto_ids: Table,
    field_ids: Table,
    method_ids: Table,
    class_defs: Table,
}

/// Validates magic and version, then reads the id table locations.
fn header(b: &Bytes<'_>) -> Result<Header, DexError> {
    let magic = b.slice(0, 8, "header")?;
    if &magic[..4] != b"dex\n" || magic[7] != 0 || !magic[4..7].iter().all(u8::is_ascii_digit) {
        return Err(DexError::InvalidMagic);
    }
    let version = std::str::from_utf8(&magic[4..7]).expect("ascii digits");
    if !SUPPORTED_VERSIONS.contains(&version) {
        return Err(DexError::UnsupportedVersion(version.to_string()));
    }
    b.slice(0, HEADER_SIZE, "header")?;
    let table = |at: usize| -> Result<Table, DexError> {
        Ok(Table {
            size: b.u32(at, "header")?,
            off: b.u32(at + 4, "header")?,
        })
    };
    Ok(Header {
        string_ids: table(0x38)?,
        type_ids: table(0x40)?,
        proto_ids: table(0x48)?,
        field_ids: table(0x50)?,
        method_ids: table(0x58)?,
        class_defs: table(0x60)?,
    })
}

/// Decoded string table. Reading only this much of an image is enough for
/// marker scanning.
pub(crate) fn strings(data: &[u8]) -> Result<Vec<String>, DexError> {
    let b = Bytes::new(data);
    let h = header(&b)?;
    read_strings(&b, h.string_ids)
}

fn read_strings(b: &Bytes<'_>, t: Table) -> Result<Vec<String>, DexError> {
    b.table(t.off, t.size, 4, "string_ids")?;
    let mut out = Vec::with_capacity(t.size as usize);
    for i in 0..t.size as usize {
        let data_off = b.u32(t.off as usize + 4 * i, "string_ids")? as usize;
        let mut cur = b.cursor(data_off, "string_data");
        let _utf16_len = cur.uleb128()?;
        out.push(mutf8(&mut cur)?);
    }
    Ok(out)
}

struct Proto {
    return_type: u32,
    params: Vec<u32>,
}

struct Dex<'a> {
    b: Bytes<'a>,
    strings: Vec<String>,
    types: Vec<String>,
    protos: Vec<Proto>,
    method_ids: Table,
    field_ids: Table,
}

impl<'a> Dex<'a> {
    fn open(data: &'a [u8]) -> Result<(Self, Table), DexError> {
        let b = Bytes::new(data);
        let h = header(&b)?;
        let strings = read_strings(&b, h.string_ids)?;

        b.table(h.type_ids.off, h.type_ids.size, 4, "type_ids")?;
        let mut types = Vec::with_capacity(h.type_ids.size as usize);
        for i in 0..h.type_ids.size as usize {
            let idx = b.u32(h.type_ids.off as usize + 4 * i, "type_ids")?;
            let desc = strings.get(idx as usize).ok_or_else(|| DexError::Malformed {
                section: "type_ids",
                offset: h.type_ids.off as usize + 4 * i,
                message: format!("string index {idx} out of range"),
            })?;
            types.push(desc.clone());
        }

        b.table(h.proto_ids.off, h.proto_ids.size, 12, "proto_ids")?;
        let mut protos = Vec::with_capacity(h.proto_ids.size as usize);
        for i in 0..h.proto_ids.size as usize {
            let at = h.proto_ids.off as usize + 12 * i;
            let return_type = b.u32(at + 4, "proto_ids")?;
            let params_off = b.u32(at + 8, "proto_ids")?;
            let params = if params_off == 0 {
                Vec::new()
            } else {
                let n = b.u32(params_off as usize, "type_list")?;
                b.table(params_off.saturating_add(4), n, 2, "type_list")?;
                (0..n as usize)
                    .map(|k| b.u16(params_off as usize + 4 + 2 * k, "type_list").map(u32::from))
                    .collect::<Result<_, _>>()?
            };
            protos.push(Proto { return_type, params });
        }

        b.table(h.field_ids.off, h.field_ids.size, 8, "field_ids")?;
        b.table(h.method_ids.off, h.method_ids.size, 8, "method_ids")?;
        b.table(h.class_defs.off, h.class_defs.size, 32, "class_defs")?;
        Ok((
            Dex {
                b,
                strings,
                types,
                protos,
                method_ids: h.method_ids,
                field_ids: h.field_ids,
            },
            h.class_defs,
        ))
    }

    fn string(&self, idx: u32, section: &'static str, offset: usize) -> Result<&str, DexError> {
        self.strings
            .get(idx as usize)
            .map(String::as_str)
            .ok_or_else(|| DexError::Malformed {
                section,
                offset,
                message: format!("string index {idx} out of range"),
            })
    }

    fn java_type(&self, idx: u32, section: &'static str, offset: usize) -> Result<String, DexError> {
        let desc = self.types.get(idx as usize).ok_or_else(|| DexError::Malformed {
            section,
            offset,
            message: format!("type index {idx} out of range"),
        })?;
        descriptor_to_java(desc).ok_or_else(|| DexError::Malformed {
            section,
            offset,
            message: format!("invalid type descriptor {desc:?}"),
        })
    }

    fn field(&self, idx: u32) -> Result<FieldRecord, DexError> {
        if idx >= self.field_ids.size {
            return Err(DexError::Malformed {
                section: "class_data",
                offset: 0,
                message: format!("field index {idx} out of range"),
            });
        }
        let at = self.field_ids.off as usize + 8 * idx as usize;
        let type_idx = self.b.u16(at + 2, "field_ids")?;
        let name_idx = self.b.u32(at + 4, "field_ids")?;
        Ok(FieldRecord {
            name: self.string(name_idx, "field_ids", at)?.to_string(),
            field_type: self.java_type(u32::from(type_idx), "field_ids", at)?,
        })
    }

    fn method(&self, idx: u32, code_off: u32) -> Result<MethodRecord, DexError> {
        if idx >= self.method_ids.size {
            return Err(DexError::Malformed {
                section: "class_data",
                offset: 0,
                message: format!("method index {idx} out of range"),
            });
        }
        let at = self.method_ids.off as usize + 8 * idx as usize;
        let proto_idx = self.b.u16(at + 2, "method_ids")?;
        let name_idx = self.b.u32(at + 4, "method_ids")?;
        let proto = self.protos.get(proto_idx as usize).ok_or_else(|| DexError::Malformed {
            section: "method_ids",
            offset: at,
            message: format!("proto index {proto_idx} out of range"),
        })?;
        let param_types = proto
            .params
            .iter()
            .map(|t| self.java_type(*t, "proto_ids", at))
            .collect::<Result<_, _>>()?;
        Ok(MethodRecord {
            name: self.string(name_idx, "method_ids", at)?.to_string(),
            param_types,
            return_type: self.java_type(proto.return_type, "proto_ids", at)?,
            has_code: code_off != 0,
            has_line_numbers: code_off != 0 && self.emits_line(code_off)?,
        })
    }

    /// Runs the method's debug line program until it emits a position entry
    /// or ends.
    fn emits_line(&self, code_off: u32) -> Result<bool, DexError> {
        let debug_off = self.b.u32(code_off as usize + 8, "code_item")?;
        if debug_off == 0 {
            return Ok(false);
        }
        let mut cur = self.b.cursor(debug_off as usize, "debug_info");
        cur.uleb128()?; // line_start
        let params = cur.uleb128()?;
        if params as usize > cur.remaining() {
            return Err(DexError::Truncated {
                section: "debug_info",
                offset: cur.pos,
            });
        }
        for _ in 0..params {
            cur.uleb128p1()?;
        }
        loop {
            match cur.u8()? {
                0x00 => return Ok(false),
                0x01 => {
                    cur.uleb128()?;
                }
                0x02 => {
                    cur.sleb128()?;
                }
                0x03 => {
                    cur.uleb128()?;
                    cur.uleb128p1()?;
                    cur.uleb128p1()?;
                }
                0x04 => {
                    cur.uleb128()?;
                    cur.uleb128p1()?;
                    cur.uleb128p1()?;
                    cur.uleb128p1()?;
                }
                0x05 | 0x06 => {
                    cur.uleb128()?;
                }
                0x07 | 0x08 => {}
                0x09 => {
                    cur.uleb128p1()?;
                }
                _ => return Ok(true),
            }
        }
    }

    fn class(&self, at: usize) -> Result<ClassRecord, DexError> {
        let b = &self.b;
        let class_idx = b.u32(at, "class_defs")?;
        let access = b.u32(at + 4, "class_defs")?;
        let super_idx = b.u32(at + 8, "class_defs")?;
        let interfaces_off = b.u32(at + 12, "class_defs")?;
        let source_idx = b.u32(at + 16, "class_defs")?;
        let annotations_off = b.u32(at + 20, "class_defs")?;
        let data_off = b.u32(at + 24, "class_defs")?;

        let mut class = ClassRecord::new(self.java_type(class_idx, "class_defs", at)?);
        class.is_interface = access & ACC_INTERFACE != 0;
        class.annotations_present = annotations_off != 0;
        if source_idx != NO_INDEX {
            class.source_file = Some(self.string(source_idx, "class_defs", at)?.to_string());
        }
        if super_idx != NO_INDEX {
            class.supertypes.push(self.java_type(super_idx, "class_defs", at)?);
        }
        if interfaces_off != 0 {
            let n = b.u32(interfaces_off as usize, "type_list")?;
            b.table(interfaces_off.saturating_add(4), n, 2, "type_list")?;
            for k in 0..n as usize {
                let t = b.u16(interfaces_off as usize + 4 + 2 * k, "type_list")?;
                class.supertypes.push(self.java_type(u32::from(t), "type_list", interfaces_off as usize)?);
            }
        }
        if data_off != 0 {
            self.class_data(&mut b.cursor(data_off as usize, "class_data"), &mut class)?;
        }
        Ok(class)
    }

    fn class_data(&self, cur: &mut Cursor<'_>, class: &mut ClassRecord) -> Result<(), DexError> {
        let start = cur.pos;
        let sizes = [cur.uleb128()?, cur.uleb128()?, cur.uleb128()?, cur.uleb128()?];
        // Every encoded member takes at least two bytes.
        let total: u64 = sizes.iter().map(|s| u64::from(*s)).sum();
        if total.saturating_mul(2) > cur.remaining() as u64 {
            return Err(DexError::Truncated {
                section: "class_data",
                offset: start,
            });
        }
        for &n in &sizes[..2] {
            let mut idx: u32 = 0;
            for _ in 0..n {
                idx = idx.wrapping_add(cur.uleb128()?);
                cur.uleb128()?; // access_flags
                class.fields.push(self.field(idx)?);
            }
        }
        for &n in &sizes[2..] {
            let mut idx: u32 = 0;
            for _ in 0..n {
                idx = idx.wrapping_add(cur.uleb128()?);
                cur.uleb128()?; // access_flags
                let code_off = cur.uleb128()?;
                class.methods.push(self.method(idx, code_off)?);
            }
        }
        Ok(())
    }
}

/// Class records of one DEX image, in class_defs order.
pub(crate) fn classes(data: &[u8]) -> Result<Vec<ClassRecord>, DexError> {
    let (dex, defs) = Dex::open(data)?;
    (0..defs.size as usize).map(|i| dex.class(defs.off as usize + 32 * i)).collect()
}
