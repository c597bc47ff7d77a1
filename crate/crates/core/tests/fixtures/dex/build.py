#!/usr/bin/env python3
"""Writes the DEX/APK test fixtures in this directory.

A minimal DEX writer following the published dex-format layout. Outputs are
deterministic; run with `python3 build.py` from this directory. Expected
models are produced separately by `expected.py`, which reads the fixtures
back with androguard.
"""

import hashlib
import struct
import zipfile
import zlib

NO_INDEX = 0xFFFFFFFF
ACC_PUBLIC, ACC_PRIVATE, ACC_STATIC, ACC_FINAL = 0x1, 0x2, 0x8, 0x10
ACC_INTERFACE, ACC_ABSTRACT, ACC_CONSTRUCTOR = 0x200, 0x400, 0x10000

PRIMS = {"void": "V", "boolean": "Z", "byte": "B", "short": "S", "char": "C",
         "int": "I", "long": "J", "float": "F", "double": "D"}


def desc(java):
    dims = 0
    while java.endswith("[]"):
        java, dims = java[:-2], dims + 1
    base = PRIMS.get(java) or "L" + java.replace(".", "/") + ";"
    return "[" * dims + base


def uleb(n):
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def mutf8(s):
    out = bytearray()
    for unit in struct.unpack("<%dH" % (len(s.encode("utf-16-le")) // 2), s.encode("utf-16-le")):
        if 0 < unit < 0x80:
            out.append(unit)
        elif unit < 0x800:
            out += bytes([0xC0 | unit >> 6, 0x80 | unit & 0x3F])
        else:
            out += bytes([0xE0 | unit >> 12, 0x80 | (unit >> 6) & 0x3F, 0x80 | unit & 0x3F])
    return bytes(out), len(s.encode("utf-16-le")) // 2


class Method:
    def __init__(self, name, params, ret, flags=ACC_PUBLIC, code=True):
        self.name, self.params, self.ret, self.flags, self.code = name, params, ret, flags, code

    @property
    def direct(self):
        return bool(self.flags & (ACC_STATIC | ACC_PRIVATE | ACC_CONSTRUCTOR))


class Class:
    def __init__(self, name, superclass="java.lang.Object", interfaces=(), flags=ACC_PUBLIC,
                 source=None, annotation=None, fields=(), methods=()):
        self.name, self.superclass, self.interfaces = name, superclass, list(interfaces)
        self.flags, self.source, self.annotation = flags, source, annotation
        self.fields = list(fields)  # (name, type, flags)
        self.methods = list(methods)


def shorty(ret, params):
    def one(t):
        d = desc(t)
        return "L" if d[0] in "L[" else d
    return one(ret) + "".join(one(p) for p in params)


def build_dex(classes, debug="lines", version=b"035"):
    """debug: "lines" emits one line entry per method, "nolines" a program
    without line entries, "none" no debug_info at all."""
    strings, types, protos, fields, methods = set(), set(), set(), set(), set()

    def add_type(t):
        d = desc(t)
        strings.add(d)
        types.add(d)

    for c in classes:
        add_type(c.name)
        if c.superclass:
            add_type(c.superclass)
        for i in c.interfaces:
            add_type(i)
        if c.source:
            strings.add(c.source)
        if c.annotation:
            add_type(c.annotation)
        for n, t, _ in c.fields:
            add_type(t)
            strings.add(n)
            fields.add((desc(c.name), n, desc(t)))
        for m in c.methods:
            add_type(m.ret)
            for p in m.params:
                add_type(p)
            strings.add(m.name)
            sh = shorty(m.ret, m.params)
            strings.add(sh)
            protos.add((sh, desc(m.ret), tuple(desc(p) for p in m.params)))
            methods.add((desc(c.name), m.name, (desc(m.ret), tuple(desc(p) for p in m.params))))

    string_list = sorted(strings, key=lambda s: s.encode("utf-16-be"))
    sidx = {s: i for i, s in enumerate(string_list)}
    type_list = sorted(types, key=lambda d: sidx[d])
    tidx = {d: i for i, d in enumerate(type_list)}
    proto_list = sorted(protos, key=lambda p: (tidx[p[1]], [tidx[x] for x in p[2]]))
    pidx = {(p[1], p[2]): i for i, p in enumerate(proto_list)}
    field_list = sorted(fields, key=lambda f: (tidx[f[0]], sidx[f[1]], tidx[f[2]]))
    fidx = {f: i for i, f in enumerate(field_list)}
    method_list = sorted(methods, key=lambda m: (tidx[m[0]], sidx[m[1]], pidx[m[2]]))
    midx = {m: i for i, m in enumerate(method_list)}

    header_size = 0x70
    off = header_size
    string_ids_off = off; off += 4 * len(string_list)
    type_ids_off = off; off += 4 * len(type_list)
    proto_ids_off = off; off += 12 * len(proto_list)
    field_ids_off = off; off += 8 * len(field_list)
    method_ids_off = off; off += 8 * len(method_list)
    class_defs_off = off; off += 32 * len(classes)
    data_off = off

    data = bytearray()
    sections = []  # (map type, count, offset)

    def align4():
        while (data_off + len(data)) % 4:
            data.append(0)

    def here():
        return data_off + len(data)

    # type_lists, deduplicated
    tl_offsets = {}

    def type_list_off(ds):
        if not ds:
            return 0
        key = tuple(ds)
        if key not in tl_offsets:
            align4()
            tl_offsets[key] = here()
            data.extend(struct.pack("<I", len(ds)))
            for d in ds:
                data.extend(struct.pack("<H", tidx[d]))
        return tl_offsets[key]

    for p in proto_list:
        type_list_off(list(p[2]))
    for c in classes:
        type_list_off([desc(i) for i in c.interfaces])
    if tl_offsets:
        sections.append((0x1001, len(tl_offsets), min(tl_offsets.values())))

    # annotations
    ann_items, ann_sets, ann_dirs = {}, {}, {}
    annotated = [c for c in classes if c.annotation]
    for c in annotated:
        ann_items[c.name] = here()
        data.append(1)  # VISIBILITY_RUNTIME
        data.extend(uleb(tidx[desc(c.annotation)]) + uleb(0))
    if annotated:
        sections.append((0x2004, len(annotated), ann_items[annotated[0].name]))
        align4()
        first = here()
        for c in annotated:
            ann_sets[c.name] = here()
            data.extend(struct.pack("<II", 1, ann_items[c.name]))
        sections.append((0x1003, len(annotated), first))
        first = here()
        for c in annotated:
            ann_dirs[c.name] = here()
            data.extend(struct.pack("<IIII", ann_sets[c.name], 0, 0, 0))
        sections.append((0x2006, len(annotated), first))

    # code items; debug_info offsets patched once debug data is placed
    code_offs, patches = {}, []
    code_methods = [(c, m) for c in classes for m in c.methods if m.code]
    if code_methods:
        align4()
        first = here()
        for c, m in code_methods:
            align4()
            ins = len(m.params) + (0 if m.flags & ACC_STATIC else 1)
            regs = ins + 1
            if m.ret == "void":
                insns = [0x000E]  # return-void
            else:
                op = 0x11 if desc(m.ret)[0] in "L[" else 0x0F
                insns = [0x0012, op]  # const/4 v0, #0 ; return v0
            code_offs[(c.name, id(m))] = here()
            patches.append((len(data) + 8, c, m))
            data.extend(struct.pack("<HHHHII", regs, ins, 1 if False else 0, 0, 0, len(insns)))
            for u in insns:
                data.extend(struct.pack("<H", u))
        sections.append((0x2001, len(code_methods), first))

    first = here()
    for s in string_list:
        body, units = mutf8(s)
        string_data_off = here()
        data.extend(uleb(units) + body + b"\0")
        sidx[s] = (sidx[s], string_data_off)
    sections.append((0x2002, len(string_list), first))

    if debug != "none" and code_methods:
        first = here()
        for rel, c, m in patches:
            debug_off = here()
            data.extend(uleb(10) + uleb(len(m.params)) + b"".join(uleb(0) for _ in m.params))
            if debug == "lines":
                data.append(0x0E)  # special opcode: emit a position entry
            else:
                data.append(0x07)  # DBG_SET_PROLOGUE_END only
            data.append(0x00)
            struct.pack_into("<I", data, rel, debug_off)
        sections.append((0x2003, len(patches), first))

    class_data_offs = {}
    first = None
    for c in classes:
        if not c.fields and not c.methods:
            continue
        class_data_offs[c.name] = here()
        if first is None:
            first = here()
        sf = sorted((fidx[(desc(c.name), n, desc(t))], fl) for n, t, fl in c.fields if fl & ACC_STATIC)
        inf = sorted((fidx[(desc(c.name), n, desc(t))], fl) for n, t, fl in c.fields if not fl & ACC_STATIC)

        def key(m):
            return midx[(desc(c.name), m.name, (desc(m.ret), tuple(desc(p) for p in m.params)))]
        dm = sorted((key(m), m) for m in c.methods if m.direct)
        vm = sorted((key(m), m) for m in c.methods if not m.direct)
        data.extend(uleb(len(sf)) + uleb(len(inf)) + uleb(len(dm)) + uleb(len(vm)))
        for lst in (sf, inf):
            prev = 0
            for i, fl in lst:
                data.extend(uleb(i - prev) + uleb(fl))
                prev = i
        for lst in (dm, vm):
            prev = 0
            for i, m in lst:
                data.extend(uleb(i - prev) + uleb(m.flags) + uleb(code_offs.get((c.name, id(m)), 0)))
                prev = i
    if first is not None:
        sections.append((0x2000, len(class_data_offs), first))

    align4()
    map_off = here()
    entries = [(0x0000, 1, 0), (0x0001, len(string_list), string_ids_off), (0x0002, len(type_list), type_ids_off)]
    if proto_list:
        entries.append((0x0003, len(proto_list), proto_ids_off))
    if field_list:
        entries.append((0x0004, len(field_list), field_ids_off))
    if method_list:
        entries.append((0x0005, len(method_list), method_ids_off))
    entries.append((0x0006, len(classes), class_defs_off))
    entries += sections
    entries.append((0x1000, 1, map_off))
    entries.sort(key=lambda e: e[2])
    data.extend(struct.pack("<I", len(entries)))
    for t, n, o in entries:
        data.extend(struct.pack("<HHII", t, 0, n, o))

    ids = bytearray()
    for s in string_list:
        ids.extend(struct.pack("<I", sidx[s][1]))
    sid = {s: v[0] for s, v in sidx.items()}
    for d in type_list:
        ids.extend(struct.pack("<I", sid[d]))
    for sh, ret, params in proto_list:
        ids.extend(struct.pack("<III", sid[sh], tidx[ret], type_list_off(list(params))))
    for cls, n, t in field_list:
        ids.extend(struct.pack("<HHI", tidx[cls], tidx[t], sid[n]))
    for cls, n, p in method_list:
        ids.extend(struct.pack("<HHI", tidx[cls], pidx[p], sid[n]))
    for c in classes:
        ids.extend(struct.pack(
            "<IIIIIIII",
            tidx[desc(c.name)],
            c.flags,
            tidx[desc(c.superclass)] if c.superclass else NO_INDEX,
            type_list_off([desc(i) for i in c.interfaces]),
            sid[c.source] if c.source else NO_INDEX,
            ann_dirs.get(c.name, 0),
            class_data_offs.get(c.name, 0),
            0,
        ))
    assert header_size + len(ids) == data_off

    file_size = data_off + len(data)
    header = bytearray(b"dex\n" + version + b"\0")
    header += b"\0" * 24  # checksum + signature, filled below
    header += struct.pack("<IIIII", file_size, header_size, 0x12345678, 0, 0)
    header += struct.pack("<I", map_off)
    for size, o in ((len(string_list), string_ids_off), (len(type_list), type_ids_off),
                    (len(proto_list), proto_ids_off), (len(field_list), field_ids_off),
                    (len(method_list), method_ids_off), (len(classes), class_defs_off),
                    (len(data), data_off)):
        header += struct.pack("<II", size, o if size else 0)
    assert len(header) == header_size
    image = bytearray(header + ids + data)
    image[12:32] = hashlib.sha1(bytes(image[32:])).digest()
    image[8:12] = struct.pack("<I", zlib.adler32(bytes(image[12:])))
    return bytes(image)


def hello_classes():
    init = lambda: Method("<init>", [], "void", ACC_PUBLIC | ACC_CONSTRUCTOR)
    return [
        Class("com.example.hello.Greeter", superclass="java.lang.Object",
              flags=ACC_PUBLIC | ACC_INTERFACE | ACC_ABSTRACT, source="Greeter.java",
              methods=[Method("greet", ["java.lang.String"], "java.lang.String",
                              ACC_PUBLIC | ACC_ABSTRACT, code=False)]),
        Class("com.example.hello.MainActivity", superclass="android.app.Activity",
              interfaces=["com.example.hello.Greeter"], source="MainActivity.java",
              annotation="com.example.hello.Keep",
              fields=[("greeting", "java.lang.String", ACC_PRIVATE),
                      ("counter", "int", ACC_PRIVATE | ACC_STATIC)],
              methods=[init(),
                       Method("onCreate", ["android.os.Bundle"], "void", ACC_PUBLIC),
                       Method("greet", ["java.lang.String"], "java.lang.String", ACC_PUBLIC),
                       Method("count", [], "int", ACC_PRIVATE)]),
        Class("com.example.hello.util.Strings", source="Strings.java",
              fields=[("SEPARATOR", "char", ACC_PUBLIC | ACC_STATIC | ACC_FINAL),
                      ("parts", "java.lang.String[]", ACC_PRIVATE)],
              methods=[init(),
                       Method("join", ["java.lang.String[]", "char"], "java.lang.String", ACC_PUBLIC | ACC_STATIC),
                       Method("isBlank", ["java.lang.CharSequence"], "boolean", ACC_PUBLIC | ACC_STATIC)]),
        Class("a.b.C", source="C.java",
              fields=[("x", "long[][]", ACC_PRIVATE)],
              methods=[Method("m", ["int"], "void", ACC_PUBLIC)]),
        Class("com.example.hello.Empty", source=None),
    ]


def write_apk(path, entries):
    with zipfile.ZipFile(path, "w") as z:
        for name, body in entries:
            info = zipfile.ZipInfo(name, date_time=(2020, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            z.writestr(info, body)


def main():
    hello = build_dex(hello_classes())
    open("hello.dex", "wb").write(hello)
    write_apk("hello.apk", [("AndroidManifest.xml", b"\0" * 16), ("classes.dex", hello)])
    open("hello_nolines.dex", "wb").write(build_dex(hello_classes(), debug="nolines"))
    stripped = build_dex(hello_classes(), debug="none")
    write_apk("hello_stripped.apk", [("AndroidManifest.xml", b"\0" * 16), ("classes.dex", stripped)])
    open("hello_v039.dex", "wb").write(build_dex(hello_classes(), version=b"039"))
    open("hello_v040.dex", "wb").write(build_dex(hello_classes(), version=b"040"))

    second = build_dex([
        Class("com.example.hello.extra.Helper", source="Helper.java",
              methods=[Method("help", [], "void", ACC_PUBLIC)]),
        Class("a.b.C", source="Other.java", methods=[Method("n", [], "void", ACC_PUBLIC)]),
    ])
    third = build_dex([Class("z.Last", source="Last.java")])
    # Stored out of order to check numeric ordering of entries.
    write_apk("multidex.apk", [("classes10.dex", third), ("classes2.dex", second), ("classes.dex", hello),
                               ("assets/classes3.dex", third)])

    protected = build_dex([
        Class("com.dexprotector.annotations.ClassEncryption", source=None,
              flags=ACC_PUBLIC | ACC_INTERFACE | ACC_ABSTRACT | 0x2000),
        Class("com.example.shop.App", source="App.java", methods=[Method("run", [], "void")]),
    ])
    write_apk("dexprotector.apk", [("classes.dex", protected)])
    open("bangcle.dex", "wb").write(build_dex([
        Class("com.secneo.apkwrapper.ApplicationWrapper", superclass="android.app.Application", source=None),
    ]))
    write_apk("nocode.apk", [("AndroidManifest.xml", b"\0" * 16), ("lib/classes.dex", hello)])


if __name__ == "__main__":
    main()
