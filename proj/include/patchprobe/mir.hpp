#pragma once

// Mini intermediate representation and control-flow graphs.
//
// Text format:
//
//   func <name> @<hex-addr> [ret=<reg>]
//   <hex-addr>: <instruction>      ; comment
//   endfunc
//
// Instructions:
//   mov   rD, src                   src = register | #imm
//   add   rD, rA, src               also sub mul and or xor shl shr sar
//   load  rD, [base + #off]
//   store [base + #off], src
//   br    rel, rA, src, @taken, @fall
//   jmp   @dst
//   call  name, nargs               arguments in r0..r5
//   ret
//
// Registers are r0..r15 (64 bit), r0d..r15d (low 32 bits, zero-extending on
// write), sp and fp.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "patchprobe/error.hpp"
#include "patchprobe/expr.hpp"

namespace patchprobe {

struct Reg {
    static constexpr std::uint8_t kSp = 16;
    static constexpr std::uint8_t kFp = 17;

    std::uint8_t id = 0;
    bool low32 = false;

    static Reg gpr(unsigned i, bool low = false) { return Reg{static_cast<std::uint8_t>(i), low}; }
    static Reg sp() { return Reg{kSp, false}; }
    static Reg fp() { return Reg{kFp, false}; }

    bool is_frame() const { return id == kSp || id == kFp; }
    unsigned width() const { return low32 ? 32 : 64; }
    /// The 64-bit register this one is a view of.
    Reg full() const { return Reg{id, false}; }

    std::string str() const {
        if (id == kSp) return "sp";
        if (id == kFp) return "fp";
        return "r" + std::to_string(id) + (low32 ? "d" : "");
    }

    friend bool operator==(Reg a, Reg b) { return a.id == b.id && a.low32 == b.low32; }
    friend bool operator!=(Reg a, Reg b) { return !(a == b); }
    friend bool operator<(Reg a, Reg b) { return a.id != b.id ? a.id < b.id : a.low32 < b.low32; }
};

inline std::optional<Reg> parse_reg(std::string_view s) {
    if (s == "sp") return Reg::sp();
    if (s == "fp") return Reg::fp();
    if (s.size() < 2 || s[0] != 'r') return std::nullopt;
    bool low = false;
    if (s.back() == 'd') {
        low = true;
        s.remove_suffix(1);
    }
    s.remove_prefix(1);
    if (s.empty() || s.size() > 2 || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        return std::nullopt;
    const unsigned n = static_cast<unsigned>(std::stoul(std::string(s)));
    if (n > 15) return std::nullopt;
    return Reg::gpr(n, low);
}

/// Register or immediate source operand.
struct Operand {
    bool is_imm = false;
    Reg reg{};
    std::int64_t imm = 0;

    static Operand of(Reg r) { return Operand{false, r, 0}; }
    static Operand immediate(std::int64_t v) { return Operand{true, {}, v}; }

    std::string str() const { return is_imm ? "#" + std::to_string(imm) : reg.str(); }

    friend bool operator==(const Operand& a, const Operand& b) {
        return a.is_imm == b.is_imm && (a.is_imm ? a.imm == b.imm : a.reg == b.reg);
    }
};

enum class Opcode : std::uint8_t { Mov, Alu, Load, Store, Br, Jmp, Call, Ret };

struct MirInstr {
    std::uint64_t addr = 0;
    Opcode op = Opcode::Ret;
    BinOpKind alu = BinOpKind::Add;
    Rel rel = Rel::Eq;
    Reg dst{};         // mov, alu, load
    Reg a{};           // alu lhs, br lhs
    Operand src{};     // mov, alu rhs, store value, br rhs
    Reg base{};        // load, store
    std::int64_t offset = 0;
    std::uint64_t taken = 0;  // br taken target, jmp target
    std::uint64_t fall = 0;   // br fall-through target
    std::string callee;
    unsigned nargs = 0;

    static MirInstr mov(std::uint64_t at, Reg d, Operand s) {
        MirInstr i;
        i.addr = at, i.op = Opcode::Mov, i.dst = d, i.src = s;
        return i;
    }
    static MirInstr alu_op(std::uint64_t at, BinOpKind k, Reg d, Reg lhs, Operand rhs) {
        MirInstr i;
        i.addr = at, i.op = Opcode::Alu, i.alu = k, i.dst = d, i.a = lhs, i.src = rhs;
        return i;
    }
    static MirInstr load(std::uint64_t at, Reg d, Reg b, std::int64_t off) {
        MirInstr i;
        i.addr = at, i.op = Opcode::Load, i.dst = d, i.base = b, i.offset = off;
        return i;
    }
    static MirInstr store(std::uint64_t at, Reg b, std::int64_t off, Operand v) {
        MirInstr i;
        i.addr = at, i.op = Opcode::Store, i.base = b, i.offset = off, i.src = v;
        return i;
    }
    static MirInstr br(std::uint64_t at, Rel r, Reg lhs, Operand rhs, std::uint64_t t, std::uint64_t f) {
        MirInstr i;
        i.addr = at, i.op = Opcode::Br, i.rel = r, i.a = lhs, i.src = rhs, i.taken = t, i.fall = f;
        return i;
    }
    static MirInstr jmp(std::uint64_t at, std::uint64_t target) {
        MirInstr i;
        i.addr = at, i.op = Opcode::Jmp, i.taken = target;
        return i;
    }
    static MirInstr call(std::uint64_t at, std::string name, unsigned n) {
        MirInstr i;
        i.addr = at, i.op = Opcode::Call, i.callee = std::move(name), i.nargs = n;
        return i;
    }
    static MirInstr ret(std::uint64_t at) {
        MirInstr i;
        i.addr = at, i.op = Opcode::Ret;
        return i;
    }

    bool is_terminator() const { return op == Opcode::Br || op == Opcode::Jmp || op == Opcode::Ret; }

    friend bool operator==(const MirInstr& x, const MirInstr& y) {
        if (x.addr != y.addr || x.op != y.op) return false;
        switch (x.op) {
        case Opcode::Mov: return x.dst == y.dst && x.src == y.src;
        case Opcode::Alu: return x.alu == y.alu && x.dst == y.dst && x.a == y.a && x.src == y.src;
        case Opcode::Load: return x.dst == y.dst && x.base == y.base && x.offset == y.offset;
        case Opcode::Store: return x.base == y.base && x.offset == y.offset && x.src == y.src;
        case Opcode::Br: return x.rel == y.rel && x.a == y.a && x.src == y.src && x.taken == y.taken && x.fall == y.fall;
        case Opcode::Jmp: return x.taken == y.taken;
        case Opcode::Call: return x.callee == y.callee && x.nargs == y.nargs;
        case Opcode::Ret: return true;
        }
        return false;
    }
};

struct MirFunction {
    std::string name;
    std::uint64_t entry = 0;
    std::vector<MirInstr> instrs;
    /// Register that receives call results and holds the return value.
    Reg return_reg = Reg::gpr(0);

    friend bool operator==(const MirFunction& a, const MirFunction& b) {
        return a.name == b.name && a.entry == b.entry && a.instrs == b.instrs && a.return_reg == b.return_reg;
    }
};

inline std::string render(const MirInstr& i) {
    std::string s = hex(i.addr) + ": ";
    auto mem = [](Reg b, std::int64_t off) { return "[" + b.str() + " + #" + std::to_string(off) + "]"; };
    switch (i.op) {
    case Opcode::Mov: return s + "mov " + i.dst.str() + ", " + i.src.str();
    case Opcode::Alu: return s + to_string(i.alu) + " " + i.dst.str() + ", " + i.a.str() + ", " + i.src.str();
    case Opcode::Load: return s + "load " + i.dst.str() + ", " + mem(i.base, i.offset);
    case Opcode::Store: return s + "store " + mem(i.base, i.offset) + ", " + i.src.str();
    case Opcode::Br:
        return s + "br " + to_string(i.rel) + ", " + i.a.str() + ", " + i.src.str() + ", @" + hex(i.taken) + ", @" + hex(i.fall);
    case Opcode::Jmp: return s + "jmp @" + hex(i.taken);
    case Opcode::Call: return s + "call " + i.callee + ", " + std::to_string(i.nargs);
    case Opcode::Ret: return s + "ret";
    }
    return s;
}

inline std::string render(const MirFunction& f) {
    std::string out = "func " + f.name + " @" + hex(f.entry);
    if (f.return_reg != Reg::gpr(0)) out += " ret=" + f.return_reg.str();
    out += "\n";
    for (const auto& i : f.instrs) out += render(i) + "\n";
    out += "endfunc\n";
    return out;
}

inline std::string render(const std::vector<MirFunction>& fns) {
    std::string out;
    for (const auto& f : fns) out += render(f);
    return out;
}

/// Checks the structural rules every function must satisfy. Text-parsed
/// functions require strictly increasing addresses; lifted functions may
/// carry several instructions per source address.
inline void validate(const MirFunction& f, bool strictly_increasing = true) {
    if (f.instrs.empty()) throw Error("function " + f.name + " has no instructions");
    if (f.entry != f.instrs.front().addr)
        throw Error("function " + f.name + ": entry " + hex(f.entry) + " is not the first instruction");
    std::set<std::uint64_t> addrs;
    for (std::size_t k = 0; k < f.instrs.size(); ++k) {
        const auto& i = f.instrs[k];
        if (strictly_increasing && k > 0 && i.addr <= f.instrs[k - 1].addr)
            throw Error("function " + f.name + ": " +
                        (i.addr == f.instrs[k - 1].addr ? "duplicate address " : "address not increasing at ") + hex(i.addr));
        addrs.insert(i.addr);
    }
    for (const auto& i : f.instrs) {
        auto need = [&](std::uint64_t t) {
            if (!addrs.count(t)) throw Error("function " + f.name + ": dangling branch target " + hex(t) + " at " + hex(i.addr));
        };
        if (i.op == Opcode::Br) {
            need(i.taken);
            need(i.fall);
        }
        if (i.op == Opcode::Jmp) need(i.taken);
        if (i.op == Opcode::Call && i.nargs > 6) throw Error("call at " + hex(i.addr) + " passes more than 6 arguments");
        if (i.op == Opcode::Alu) {
            if (i.a.width() != i.dst.width() || (!i.src.is_imm && i.src.reg.width() != i.dst.width()))
                throw Error("operand width mismatch at " + hex(i.addr));
        }
        if (i.op == Opcode::Br && !i.src.is_imm && i.src.reg.width() != i.a.width())
            throw Error("operand width mismatch at " + hex(i.addr));
    }
    const auto& last = f.instrs.back();
    if (!last.is_terminator()) throw Error("function " + f.name + " falls off its end at " + hex(last.addr));
}

namespace detail {

class LineCursor {
public:
    LineCursor(std::string_view line, std::size_t line_no) : s_(line), line_(line_no) {}

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, pos_ + 1, what); }

    void ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool done() {
        ws();
        return pos_ >= s_.size();
    }
    bool peek(char c) {
        ws();
        return pos_ < s_.size() && s_[pos_] == c;
    }
    void expect(char c) {
        ws();
        if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    std::string_view word() {
        ws();
        const std::size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != ',' &&
               s_[pos_] != '[' && s_[pos_] != ']' && s_[pos_] != ':')
            ++pos_;
        if (start == pos_) fail("expected a word");
        return s_.substr(start, pos_ - start);
    }
    std::uint64_t hex_number() {
        ws();
        const std::size_t start = pos_;
        std::string_view w = word();
        if (w.size() > 2 && w[0] == '0' && (w[1] == 'x' || w[1] == 'X')) w.remove_prefix(2);
        if (w.empty() || !std::all_of(w.begin(), w.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); })) {
            pos_ = start;
            fail("expected a hex address");
        }
        return std::stoull(std::string(w), nullptr, 16);
    }
    std::uint64_t decimal() {
        ws();
        const std::size_t start = pos_;
        const std::string_view w = word();
        if (!std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            pos_ = start;
            fail("expected a decimal number");
        }
        return std::stoull(std::string(w));
    }
    std::uint64_t address_ref() {
        expect('@');
        return hex_number();
    }
    std::int64_t immediate() {
        expect('#');
        ws();
        const std::size_t start = pos_;
        std::string_view w = word();
        bool neg = false;
        if (!w.empty() && (w[0] == '-' || w[0] == '+')) {
            neg = w[0] == '-';
            w.remove_prefix(1);
        }
        int base = 10;
        if (w.size() > 2 && w[0] == '0' && (w[1] == 'x' || w[1] == 'X')) {
            base = 16;
            w.remove_prefix(2);
        }
        const bool ok = !w.empty() && std::all_of(w.begin(), w.end(), [base](char c) {
            return base == 16 ? std::isxdigit(static_cast<unsigned char>(c)) != 0 : std::isdigit(static_cast<unsigned char>(c)) != 0;
        });
        if (!ok) {
            pos_ = start;
            fail("bad immediate");
        }
        const std::uint64_t v = std::stoull(std::string(w), nullptr, base);
        return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
    }
    Reg reg() {
        ws();
        const std::size_t start = pos_;
        auto r = parse_reg(word());
        if (!r) {
            pos_ = start;
            fail("expected a register");
        }
        return *r;
    }
    Operand operand() {
        if (peek('#')) return Operand::immediate(immediate());
        return Operand::of(reg());
    }
    std::pair<Reg, std::int64_t> memory() {
        expect('[');
        Reg b = reg();
        if (b.low32) fail("memory base must be a 64-bit register");
        std::int64_t off = 0;
        if (peek('+')) {
            expect('+');
            off = immediate();
        } else if (peek('-')) {
            expect('-');
            off = -immediate();
        }
        expect(']');
        return {b, off};
    }

private:
    std::string_view s_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

inline std::string_view strip_comment(std::string_view line) {
    const auto c = line.find(';');
    return c == std::string_view::npos ? line : line.substr(0, c);
}

inline MirInstr parse_instruction(LineCursor& cur, std::uint64_t addr) {
    const std::string m(cur.word());
    MirInstr i;
    if (m == "mov") {
        Reg d = cur.reg();
        cur.expect(',');
        i = MirInstr::mov(addr, d, cur.operand());
    } else if (auto alu = binop_from_string(m)) {
        Reg d = cur.reg();
        cur.expect(',');
        Reg a = cur.reg();
        cur.expect(',');
        i = MirInstr::alu_op(addr, *alu, d, a, cur.operand());
    } else if (m == "load") {
        Reg d = cur.reg();
        cur.expect(',');
        auto [b, off] = cur.memory();
        i = MirInstr::load(addr, d, b, off);
    } else if (m == "store") {
        auto [b, off] = cur.memory();
        cur.expect(',');
        i = MirInstr::store(addr, b, off, cur.operand());
    } else if (m == "br") {
        auto rel = rel_from_string(cur.word());
        if (!rel) cur.fail("unknown relation");
        cur.expect(',');
        Reg a = cur.reg();
        cur.expect(',');
        Operand s = cur.operand();
        cur.expect(',');
        std::uint64_t t = cur.address_ref();
        cur.expect(',');
        i = MirInstr::br(addr, *rel, a, s, t, cur.address_ref());
    } else if (m == "jmp") {
        i = MirInstr::jmp(addr, cur.address_ref());
    } else if (m == "call") {
        std::string name(cur.word());
        cur.expect(',');
        const std::int64_t n = std::stoll(std::string(cur.word()));
        if (n < 0 || n > 6) cur.fail("call arity must be in 0..6");
        i = MirInstr::call(addr, name, static_cast<unsigned>(n));
    } else if (m == "ret") {
        i = MirInstr::ret(addr);
    } else {
        cur.fail("unknown instruction '" + m + "'");
    }
    if (!cur.done()) cur.fail("unexpected trailing text");
    return i;
}

} // namespace detail

/// Parses every function in `source`. Errors carry the 1-based line and column.
inline std::vector<MirFunction> parse_mir(std::string_view source) {
    std::vector<MirFunction> out;
    std::optional<MirFunction> cur_fn;
    std::size_t header_line = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
        const std::size_t nl = source.find('\n', pos);
        std::string_view raw = source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? source.size() + 1 : nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        detail::LineCursor cur(detail::strip_comment(raw), line_no);
        if (cur.done()) continue;
        if (cur.peek('f') || cur.peek('e')) {
            // Could be a keyword or a hex address starting with e/f; keywords win.
            detail::LineCursor probe(detail::strip_comment(raw), line_no);
            const std::string_view w = probe.word();
            if (w == "func") {
                if (cur_fn) cur.fail("nested func");
                cur = probe;
                MirFunction f;
                f.name = std::string(cur.word());
                f.entry = cur.address_ref();
                if (!cur.done()) {
                    std::string_view attr = cur.word();
                    if (attr.rfind("ret=", 0) != 0) cur.fail("unknown function attribute");
                    attr.remove_prefix(4);
                    auto r = parse_reg(attr);
                    if (!r || r->low32 || r->is_frame()) cur.fail("bad return register");
                    f.return_reg = *r;
                    if (!cur.done()) cur.fail("unexpected trailing text");
                }
                cur_fn = std::move(f);
                header_line = line_no;
                continue;
            }
            if (w == "endfunc") {
                if (!cur_fn) cur.fail("endfunc without func");
                if (!probe.done()) probe.fail("unexpected trailing text");
                if (cur_fn->instrs.empty()) throw ParseError(header_line, 0, "function " + cur_fn->name + " has no instructions");
                try {
                    validate(*cur_fn, true);
                } catch (const ParseError&) {
                    throw;
                } catch (const Error& e) {
                    throw ParseError(line_no, 0, e.what());
                }
                out.push_back(std::move(*cur_fn));
                cur_fn.reset();
                continue;
            }
        }
        if (!cur_fn) cur.fail("instruction outside of a function");
        const std::uint64_t addr = cur.hex_number();
        cur.expect(':');
        cur_fn->instrs.push_back(detail::parse_instruction(cur, addr));
    }
    if (cur_fn) throw ParseError(header_line, 0, "function " + cur_fn->name + " is missing endfunc");
    return out;
}

// ---------------------------------------------------------------------------
// Control-flow graph

enum class EdgeKind : std::uint8_t { Taken, Fall, Jump, Return };

inline const char* to_string(EdgeKind k) {
    switch (k) {
    case EdgeKind::Taken: return "taken";
    case EdgeKind::Fall: return "fall";
    case EdgeKind::Jump: return "jump";
    case EdgeKind::Return: return "return";
    }
    return "?";
}

struct Edge {
    EdgeKind kind;
    std::size_t target;
    friend bool operator==(const Edge& a, const Edge& b) { return a.kind == b.kind && a.target == b.target; }
};

struct BasicBlock {
    std::size_t id = 0;
    std::uint64_t start = 0;
    std::size_t first = 0;  // index of the first instruction
    std::size_t end = 0;    // one past the last instruction
    std::vector<Edge> successors;
};

struct Cfg {
    MirFunction function;
    std::vector<BasicBlock> blocks;
    std::size_t entry = 0;
    /// Blocks not reachable from the entry (diagnostic only).
    std::vector<std::size_t> unreachable;

    const MirInstr& instr(std::size_t index) const { return function.instrs[index]; }
};

/// Splits `f` into basic blocks. Leaders are the entry, every branch or jump
/// target, and every instruction following a br/jmp/ret. Calls do not end a
/// block.
inline Cfg build_cfg(const MirFunction& f) {
    validate(f, false);
    Cfg g;
    g.function = f;
    const auto& ins = g.function.instrs;

    std::map<std::uint64_t, std::size_t> first_at;
    for (std::size_t k = 0; k < ins.size(); ++k) first_at.emplace(ins[k].addr, k);

    std::set<std::size_t> leaders{0};
    for (std::size_t k = 0; k < ins.size(); ++k) {
        const auto& i = ins[k];
        if (i.op == Opcode::Br) {
            leaders.insert(first_at.at(i.taken));
            leaders.insert(first_at.at(i.fall));
        }
        if (i.op == Opcode::Jmp) leaders.insert(first_at.at(i.taken));
        if (i.is_terminator() && k + 1 < ins.size()) leaders.insert(k + 1);
    }

    std::map<std::size_t, std::size_t> block_of_leader;
    for (std::size_t leader : leaders) {
        BasicBlock b;
        b.id = g.blocks.size();
        b.first = leader;
        b.start = ins[leader].addr;
        block_of_leader[leader] = b.id;
        g.blocks.push_back(b);
    }
    for (std::size_t b = 0; b < g.blocks.size(); ++b)
        g.blocks[b].end = b + 1 < g.blocks.size() ? g.blocks[b + 1].first : ins.size();

    auto block_at = [&](std::uint64_t addr) { return block_of_leader.at(first_at.at(addr)); };
    for (auto& b : g.blocks) {
        const auto& last = ins[b.end - 1];
        auto add = [&](EdgeKind k, std::size_t t) {
            const Edge e{k, t};
            if (std::find(b.successors.begin(), b.successors.end(), e) == b.successors.end()) b.successors.push_back(e);
        };
        switch (last.op) {
        case Opcode::Br:
            add(EdgeKind::Taken, block_at(last.taken));
            add(EdgeKind::Fall, block_at(last.fall));
            break;
        case Opcode::Jmp: add(EdgeKind::Jump, block_at(last.taken)); break;
        case Opcode::Ret: break;
        default: add(EdgeKind::Fall, b.id + 1); break;
        }
    }

    std::vector<bool> seen(g.blocks.size(), false);
    std::vector<std::size_t> work{g.entry};
    seen[g.entry] = true;
    while (!work.empty()) {
        const std::size_t b = work.back();
        work.pop_back();
        for (const auto& e : g.blocks[b].successors)
            if (!seen[e.target]) {
                seen[e.target] = true;
                work.push_back(e.target);
            }
    }
    for (std::size_t b = 0; b < seen.size(); ++b)
        if (!seen[b]) g.unreachable.push_back(b);
    return g;
}

} // namespace patchprobe
