# Writes the reference triples under samples/corpus: pseudo-C sources, their
# mini-IR builds with line maps, and the unified diff between them.

import difflib, json, os, re

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "samples", "corpus")

def layout(src, pad):
    """src: list of (key, text). Returns full text lines and key -> line number."""
    lines = [""] * pad
    where = {}
    for key, text in src:
        lines.append(text)
        if key:
            where[key] = len(lines)
    return lines, where

def emit_fn(path, header, name, base, body, where, lines_path):
    addr = base
    labels = {}
    rows = []
    for lab, key, text in body:
        if lab:
            labels[lab] = addr
        rows.append((addr, where[key], text))
        addr += 4
    out = [f"; {header}", f"func {name} @{base:x}"]
    for a, _, text in rows:
        text = re.sub(r"@(\w+)", lambda m: "@%x" % labels[m.group(1)], text)
        out.append(f"{a:x}: {text}")
    out.append("endfunc")
    open(path, "w").write("\n".join(out) + "\n")
    role = "patched" if "patched" in lines_path else "vulnerable"
    lm = [f"# {role} build: address line"] + [f"{a:x} {line}" for a, line, _ in rows]
    open(lines_path, "w").write("\n".join(lm) + "\n")

def build(c):
    d = os.path.join(ROOT, c["name"])
    os.makedirs(d, exist_ok=True)
    lv, wv = layout(c["src_v"], c["pad"])
    lp, wp = layout(c["src_p"], c["pad"])
    f = c["file"]
    diff = list(difflib.unified_diff(lv, lp, "a/" + f, "b/" + f, lineterm="", n=3))
    open(os.path.join(d, "fix.diff"), "w").write(f"diff --git a/{f} b/{f}\n" + "\n".join(diff) + "\n")
    emit_fn(os.path.join(d, "vuln.mir"), c["func"] + " before the fix", c["func"], c["base"], c["body_v"], wv,
            os.path.join(d, "vuln.lines"))
    emit_fn(os.path.join(d, "patched.mir"), c["func"] + " after the fix", c["func"], c["base"], c["body_p"], wp,
            os.path.join(d, "patched.lines"))
    open(os.path.join(d, "sidetables.json"), "w").write(json.dumps(c.get("tables", {}), indent=2, sort_keys=True) + "\n")

CASES = []

# Length check added in front of the CRC update.
src = [("head", "png_uint_32 png_read_chunk_header(png_structrp png_ptr)"), ("", "{"),
       ("", "   png_uint_32 length;"), ("", ""),
       ("read", "   png_read_data(png_ptr, png_ptr->chunk_buf, 8);"),
       ("len", "   length = png_get_uint_31(png_ptr, png_ptr->chunk_buf);"), ("", ""),
       ("crc", "   png_reset_crc(png_ptr);"), ("crc2", "   png_calculate_crc(png_ptr, png_ptr->chunk_buf + 4, 4);"),
       ("ret", "   return length;"), ("", "}")]
src_p = src[:6] + [("chk", "   if (length > PNG_UINT_31_MAX - 12)"),
                   ("err", "      png_chunk_error(png_ptr, \"chunk data is too large\");")] + src[6:]
head = [(None, "head", "store [fp + #-40], r0"),
        (None, "read", "load r7, [fp + #-40]"), (None, "read", "add r1, r7, #64"), (None, "read", "mov r0, r7"),
        (None, "read", "mov r2, #8"), (None, "read", "call png_read_data, 3"),
        (None, "len", "load r7, [fp + #-40]"), (None, "len", "add r1, r7, #64"), (None, "len", "mov r0, r7"),
        (None, "len", "call png_get_uint_31, 2"), (None, "len", "store [fp + #-20], r0d")]
tail = [("crc", "crc", "load r0, [fp + #-40]"), (None, "crc", "call png_reset_crc, 1"),
        (None, "crc2", "load r7, [fp + #-40]"), (None, "crc2", "add r1, r7, #68"), (None, "crc2", "mov r0, r7"),
        (None, "crc2", "mov r2, #4"), (None, "crc2", "call png_calculate_crc, 3"),
        (None, "ret", "load r0d, [fp + #-20]"), (None, "ret", "ret")]
chk = [(None, "chk", "load r7d, [fp + #-20]"), (None, "chk", "br ule, r7d, #2147483635, @crc, @err"),
       ("err", "err", "load r0, [fp + #-40]"), (None, "err", "mov r1, #0x9b00"), (None, "err", "call png_chunk_error, 2")]
CASES.append(dict(name="png_chunk_len", file="pngrutil.c", func="png_read_chunk_header", base=0x1400, pad=152,
                  src_v=src, src_p=src_p, body_v=head + tail, body_p=head + chk + tail,
                  tables={"string_addrs": ["0x9b00"], "string_args": [["png_chunk_error", 1]]}))

# Off-by-one in an index check against a field.
def tiff(rel, text):
    src = [("head", "static uint64 TIFFGetEntry(TIFFDirectory* td, int idx)"), ("", "{"),
           ("chk", text), ("get", "\t\treturn td->td_entries[idx];"),
           ("err", "\tTIFFErrorExt(td->td_fd, \"TIFFGetEntry\", \"bad index %d\", idx);"),
           ("zero", "\treturn 0;"), ("", "}")]
    body = [(None, "head", "mov r7, r0"), (None, "head", "mov r8d, r1d"),
            (None, "chk", "load r9d, [r7 + #8]"), (None, "chk", f"br {rel}, r8d, r9d, @get, @err"),
            ("get", "get", "load r10, [r7 + #16]"), (None, "get", "shl r11, r8, #3"), (None, "get", "add r10, r10, r11"),
            (None, "get", "load r0, [r10 + #0]"), (None, "get", "ret"),
            ("err", "err", "load r0d, [r7 + #0]"), (None, "err", "mov r1, #0x9c00"), (None, "err", "mov r2, #0x9c10"),
            (None, "err", "mov r3d, r8d"), (None, "err", "call TIFFErrorExt, 4"),
            (None, "zero", "mov r0, #0"), (None, "zero", "ret")]
    return src, body
sv, bv = tiff("sle", "\tif (idx <= td->td_count)")
sp, bp = tiff("slt", "\tif (idx < td->td_count)")
CASES.append(dict(name="tiff_entry_index", file="libtiff/tif_dir.c", func="TIFFGetEntry", base=0x2200, pad=611,
                  src_v=sv, src_p=sp, body_v=bv, body_p=bp,
                  tables={"string_addrs": ["0x9c00", "0x9c10"], "string_args": [["TIFFErrorExt", 1], ["TIFFErrorExt", 2]]}))

# Negative and overflowing lengths rejected before the size computation.
src = [("head", "int buf_append(struct buf *b, const char *data, int len)"), ("", "{"),
       ("new", "\tint need = b->used + len;"), ("", ""),
       ("grow", "\tif (need > b->cap && buf_grow(b, need) < 0)"), ("fail", "\t\treturn -1;"),
       ("cpy", "\tmemcpy(b->data + b->used, data, len);"), ("upd", "\tb->used = need;"), ("ok", "\treturn 0;"), ("", "}")]
src_p = src[:2] + [("neg", "\tif (len < 0 || len > INT_MAX - b->used)"), ("fail0", "\t\treturn -1;")] + src[2:]
pre = [(None, "head", "mov r7, r0"), (None, "head", "mov r8, r1"), (None, "head", "mov r9d, r2d")]
neg = [(None, "neg", "br slt, r9d, #0, @fail0, @n2"), ("n2", "neg", "load r10d, [r7 + #8]"),
       (None, "neg", "mov r12d, #2147483647"), (None, "neg", "sub r12d, r12d, r10d"),
       (None, "neg", "br sgt, r9d, r12d, @fail0, @new"), ("fail0", "fail0", "mov r0, #-1"), (None, "fail0", "ret")]
rest = [("new", "new", "load r10d, [r7 + #8]"), (None, "new", "add r11d, r10d, r9d"),
        (None, "grow", "load r12d, [r7 + #12]"), (None, "grow", "br sle, r11d, r12d, @cpy, @g2"),
        ("g2", "grow", "mov r0, r7"), (None, "grow", "mov r1d, r11d"), (None, "grow", "call buf_grow, 2"),
        (None, "grow", "br sge, r0d, #0, @cpy, @fail"), ("fail", "fail", "mov r0, #-1"), (None, "fail", "ret"),
        ("cpy", "cpy", "load r10, [r7 + #0]"), (None, "cpy", "load r12d, [r7 + #8]"), (None, "cpy", "add r0, r10, r12"),
        (None, "cpy", "mov r1, r8"), (None, "cpy", "mov r2d, r9d"), (None, "cpy", "call memcpy, 3"),
        (None, "upd", "store [r7 + #8], r11d"), (None, "ok", "mov r0, #0"), (None, "ok", "ret")]
CASES.append(dict(name="buf_append_len", file="src/buf.c", func="buf_append", base=0x3000, pad=77,
                  src_v=src, src_p=src_p, body_v=pre + rest, body_p=pre + neg + rest))

# A debug call leaking key material removed.
src = [("head", "void ssl_session_free(SSL_SESSION *ss)"), ("", "{"),
       ("nul", "    if (ss == NULL)"), ("r0", "        return;"),
       ("log", "    trace_log(ss->trace, ss->master_key, ss->master_key_length);"),
       ("cl", "    OPENSSL_cleanse(ss->master_key, sizeof(ss->master_key));"),
       ("f2", "    OPENSSL_free(ss->ext.tick);"), ("f4", "    OPENSSL_free(ss);"), ("", "}")]
src_p = [s for s in src if s[0] != "log"]
def sess(with_log):
    b = [(None, "head", "mov r7, r0"), (None, "nul", "br eq, r7, #0, @out, @body")]
    if with_log:
        b += [("body", "log", "load r0, [r7 + #120]"), (None, "log", "add r1, r7, #8"), (None, "log", "load r2, [r7 + #56]"),
              (None, "log", "call trace_log, 3"), (None, "cl", "add r0, r7, #8")]
    else:
        b += [("body", "cl", "add r0, r7, #8")]
    b += [(None, "cl", "mov r1, #48"), (None, "cl", "call OPENSSL_cleanse, 2"),
          (None, "f2", "load r0, [r7 + #96]"), (None, "f2", "call OPENSSL_free, 1"),
          (None, "f4", "mov r0, r7"), (None, "f4", "call OPENSSL_free, 1"), ("out", "r0", "ret")]
    return b
CASES.append(dict(name="session_key_trace", file="ssl/ssl_sess.c", func="ssl_session_free", base=0x3800, pad=802,
                  src_v=src, src_p=src_p, body_v=sess(True), body_p=sess(False)))

# Receive buffer zeroed before use.
src = [("head", "static int conn_read(struct conn *c, size_t n)"), ("", "{"),
       ("al", "\tchar *buf = malloc(n);"), ("nul", "\tif (buf == NULL)"), ("rr", "\t\treturn -1;"),
       ("rd", "\tint got = recv(c->fd, buf, n, 0);"), ("st", "\tc->pending = buf;"), ("rt", "\treturn got;"), ("", "}")]
src_p = src[:5] + [("ms", "\tmemset(buf, 0, n);")] + src[5:]
def conn(zero):
    b = [(None, "head", "mov r7, r0"), (None, "head", "mov r8, r1"),
         (None, "al", "mov r0, r8"), (None, "al", "call malloc, 1"), (None, "al", "mov r9, r0"),
         (None, "nul", "br eq, r9, #0, @rr, @next"), ("rr", "rr", "mov r0, #-1"), (None, "rr", "ret")]
    if zero:
        b += [("next", "ms", "mov r0, r9"), (None, "ms", "mov r1, #0"), (None, "ms", "mov r2, r8"), (None, "ms", "call memset, 3"),
              (None, "rd", "load r0d, [r7 + #0]")]
    else:
        b += [("next", "rd", "load r0d, [r7 + #0]")]
    b += [(None, "rd", "mov r1, r9"), (None, "rd", "mov r2, r8"), (None, "rd", "mov r3, #0"), (None, "rd", "call recv, 4"),
          (None, "st", "store [r7 + #8], r9"), (None, "rt", "ret")]
    return b
CASES.append(dict(name="conn_read_zero", file="net/conn.c", func="conn_read", base=0x4400, pad=230,
                  src_v=src, src_p=src_p, body_v=conn(False), body_p=conn(True)))

# Room for the terminator in a hex encoder.
def hexenc(plus):
    src = [("head", "char *hex_encode(const unsigned char *in, size_t len)"), ("", "{"),
           ("al", "    char *out = OPENSSL_malloc(len * 2" + (" + 1);" if plus else ");")),
           ("nul", "    if (out == NULL)"), ("rr", "        return NULL;"),
           ("enc", "    hex_fill(out, in, len);"), ("rt", "    return out;"), ("", "}")]
    b = [(None, "head", "mov r7, r0"), (None, "head", "mov r8, r1"), (None, "al", "add r9, r8, r8")]
    if plus:
        b += [(None, "al", "add r9, r9, #1")]
    b += [(None, "al", "mov r0, r9"), (None, "al", "call OPENSSL_malloc, 1"), (None, "al", "mov r10, r0"),
          (None, "nul", "br eq, r10, #0, @rr, @enc"), ("rr", "rr", "mov r0, #0"), (None, "rr", "ret"),
          ("enc", "enc", "mov r0, r10"), (None, "enc", "mov r1, r7"), (None, "enc", "mov r2, r8"),
          (None, "enc", "call hex_fill, 3"), (None, "rt", "mov r0, r10"), (None, "rt", "ret")]
    return src, b
sv, bv = hexenc(False)
sp, bp = hexenc(True)
CASES.append(dict(name="hex_encode_alloc", file="crypto/o_str.c", func="hex_encode", base=0x4c00, pad=183,
                  src_v=sv, src_p=sp, body_v=bv, body_p=bp))

# Missing NULL check on a search result.
src = [("head", "int hdr_parse(struct req *r, const char *line)"), ("", "{"),
       ("f", "\tchar *colon = strchr(line, ':');"),
       ("n", "\tr->name = strndup(line, colon - line);"), ("v", "\tr->value = strdup(colon + 1);"),
       ("ok", "\treturn 0;"), ("", "}")]
src_p = src[:3] + [("nc", "\tif (colon == NULL)"), ("nr", "\t\treturn -2;")] + src[3:]
def hdr(check):
    b = [(None, "head", "mov r7, r0"), (None, "head", "mov r8, r1"),
         (None, "f", "mov r0, r8"), (None, "f", "mov r1, #58"), (None, "f", "call strchr, 2"), (None, "f", "mov r9, r0")]
    if check:
        b += [(None, "nc", "br ne, r9, #0, @n, @nr"), ("nr", "nr", "mov r0, #-2"), (None, "nr", "ret")]
    b += [("n", "n", "sub r1, r9, r8"), (None, "n", "mov r0, r8"), (None, "n", "call strndup, 2"),
          (None, "n", "store [r7 + #0], r0"), (None, "v", "add r0, r9, #1"), (None, "v", "call strdup, 1"),
          (None, "v", "store [r7 + #8], r0"), (None, "ok", "mov r0, #0"), (None, "ok", "ret")]
    return b
CASES.append(dict(name="hdr_parse_null", file="src/http.c", func="hdr_parse", base=0x5400, pad=341,
                  src_v=src, src_p=src_p, body_v=hdr(False), body_p=hdr(True)))

# Wrong state stored on abort.
def abort(state, name):
    src = [("head", "void conn_abort(struct conn *c, int why)"), ("", "{"),
           ("lg", "\tconn_log(c, why);"), ("st", f"\tc->state = {name};"), ("cl", "\tclose(c->fd);"), ("", "}")]
    b = [(None, "head", "mov r7, r0"), (None, "head", "mov r8d, r1d"),
         (None, "lg", "mov r0, r7"), (None, "lg", "mov r1d, r8d"), (None, "lg", "call conn_log, 2"),
         (None, "st", f"mov r9d, #{state}"), (None, "st", "store [r7 + #4], r9d"),
         (None, "cl", "load r0d, [r7 + #0]"), (None, "cl", "call close, 1"), (None, "cl", "ret")]
    return src, b
sv, bv = abort(3, "CONN_ERROR")
sp, bp = abort(5, "CONN_CLOSED")
CASES.append(dict(name="conn_abort_state", file="net/conn.c", func="conn_abort", base=0x5c00, pad=412,
                  src_v=sv, src_p=sp, body_v=bv, body_p=bp))

# Negative lengths accepted by a bounded copy.
src = [("head", "int copy_name(char *dst, const char *src, int len)"), ("", "{"),
       ("chk", "\tif (len > 64)"), ("rr", "\t\treturn -1;"),
       ("cp", "\tmemcpy(dst, src, len);"), ("term", "\tdst[len] = 0;"), ("ok", "\treturn len;"), ("", "}")]
src_p = src[:2] + [("chk", "\tif (len < 0 || len > 64)")] + src[3:]
def copy(neg):
    b = [(None, "head", "mov r7, r0"), (None, "head", "mov r8, r1"), (None, "head", "mov r9d, r2d")]
    if neg:
        b += [(None, "chk", "br slt, r9d, #0, @rr, @c2"), ("c2", "chk", "br sgt, r9d, #64, @rr, @cp")]
    else:
        b += [(None, "chk", "br sgt, r9d, #64, @rr, @cp")]
    b += [("rr", "rr", "mov r0, #-1"), (None, "rr", "ret"),
          ("cp", "cp", "mov r0, r7"), (None, "cp", "mov r1, r8"), (None, "cp", "mov r2d, r9d"), (None, "cp", "call memcpy, 3"),
          (None, "term", "add r10, r7, r9"), (None, "term", "mov r11d, #0"), (None, "term", "store [r10 + #0], r11d"),
          (None, "ok", "mov r0d, r9d"), (None, "ok", "ret")]
    return b
CASES.append(dict(name="copy_name_sign", file="lib/names.c", func="copy_name", base=0x6400, pad=58,
                  src_v=src, src_p=src_p, body_v=copy(False), body_p=copy(True)))

# Table index bound one too large.
def slot(bound):
    src = [("head", "void set_slot(struct tbl *t, int idx, uint32_t v)"), ("", "{"),
           ("chk", f"\tif (idx < {bound})"), ("put", "\t\tt->slot[idx] = v;"), ("end", "}")]
    b = [(None, "head", "mov r7, r0"), (None, "head", "mov r8d, r1d"), (None, "head", "mov r9d, r2d"),
         (None, "chk", f"br sge, r8d, #{bound}, @out, @put"),
         ("put", "put", "shl r10, r8, #2"), (None, "put", "add r10, r7, r10"), (None, "put", "store [r10 + #16], r9d"),
         ("out", "end", "ret")]
    return src, b
sv, bv = slot(17)
sp, bp = slot(16)
CASES.append(dict(name="set_slot_bound", file="src/table.c", func="set_slot", base=0x6c00, pad=96,
                  src_v=sv, src_p=sp, body_v=bv, body_p=bp))

for c in CASES:
    build(c)
print(len(CASES), "cases")
