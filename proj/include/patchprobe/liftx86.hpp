#pragma once

// Lifts objdump-style x86-64 AT&T listings into the mini IR.
//
// Accepted line shapes:
//
//   0000000000001130 <name>:
//    1130:\t55                   \tpush   %rbp
//    1134: c7 45 ec 00 00 00 00 movl $0x0,-0x14(%rbp)
//    1134: movl $0x0,-0x14(%rbp)
//
// Flags are not modeled. A cmp or test is fused with the conditional jump
// that consumes it into one `br` carrying the compare's address.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "patchprobe/error.hpp"
#include "patchprobe/mir.hpp"

namespace patchprobe {

struct AsmLine {
    std::uint64_t addr = 0;
    std::string mnemonic;
    std::string operands;  // raw text, trailing `#` comment removed
    std::string comment;   // text after `#`, if any
    std::size_t line = 0;  // 1-based line in the source
};

struct AsmListing {
    std::string name;
    std::uint64_t addr = 0;
    std::vector<AsmLine> lines;
};

namespace x86 {

struct RegMapping {
    const char* name64;
    const char* name32;
    const char* name8;
    std::uint8_t mir;
};

/// Fixed register table. The six SysV argument registers come first so they
/// land on r0..r5; rbp and rsp are the frame registers.
inline const std::vector<RegMapping>& register_table() {
    static const std::vector<RegMapping> table = {
        {"rdi", "edi", "dil", 0},   {"rsi", "esi", "sil", 1},   {"rdx", "edx", "dl", 2},    {"rcx", "ecx", "cl", 3},
        {"r8", "r8d", "r8b", 4},    {"r9", "r9d", "r9b", 5},    {"rax", "eax", "al", 6},    {"rbx", "ebx", "bl", 7},
        {"r10", "r10d", "r10b", 8}, {"r11", "r11d", "r11b", 9}, {"r12", "r12d", "r12b", 10}, {"r13", "r13d", "r13b", 11},
        {"r14", "r14d", "r14b", 12}, {"r15", "r15d", "r15b", 13}, {"rbp", "ebp", "bpl", Reg::kFp}, {"rsp", "esp", "spl", Reg::kSp},
    };
    return table;
}

inline constexpr std::uint8_t kReturnReg = 6;
inline constexpr std::uint8_t kTempFirst = 12;
inline constexpr std::uint8_t kTempLast = 15;

struct JccEntry {
    const char* mnemonic;
    Rel rel;
    /// The relation reads (src, dst) instead of (dst, src), for `cmp src, dst`.
    bool swapped;
};

/// Relation tested by each conditional jump after `cmp src, dst`.
inline const std::vector<JccEntry>& jcc_table() {
    static const std::vector<JccEntry> table = {
        {"je", Rel::Eq, false},   {"jne", Rel::Ne, false},  {"jl", Rel::Slt, false}, {"jle", Rel::Sle, false},
        {"jg", Rel::Sgt, false},  {"jge", Rel::Sge, false}, {"jb", Rel::Ult, false}, {"jbe", Rel::Ule, false},
        {"ja", Rel::Ult, true},   {"jae", Rel::Ule, true},
    };
    return table;
}

inline const std::map<std::string, std::string>& jcc_aliases() {
    static const std::map<std::string, std::string> m = {
        {"jz", "je"}, {"jnz", "jne"}, {"jnge", "jl"}, {"jng", "jle"}, {"jnle", "jg"}, {"jnl", "jge"},
        {"jnae", "jb"}, {"jc", "jb"}, {"jna", "jbe"}, {"jnbe", "ja"}, {"jnb", "jae"}, {"jnc", "jae"},
    };
    return m;
}

inline std::optional<JccEntry> find_jcc(std::string m) {
    if (auto it = jcc_aliases().find(m); it != jcc_aliases().end()) m = it->second;
    for (const auto& e : jcc_table())
        if (m == e.mnemonic) return e;
    return std::nullopt;
}

struct NamedReg {
    Reg reg;
    unsigned bits;  // 8, 32 or 64
};

inline std::optional<NamedReg> lookup_register(std::string_view name) {
    for (const auto& m : register_table()) {
        if (name == m.name64) return NamedReg{Reg{m.mir, false}, 64};
        if (name == m.name32) {
            if (m.mir == Reg::kFp || m.mir == Reg::kSp) return std::nullopt;
            return NamedReg{Reg{m.mir, true}, 32};
        }
        if (name == m.name8) {
            if (m.mir == Reg::kFp || m.mir == Reg::kSp) return std::nullopt;
            return NamedReg{Reg{m.mir, true}, 8};
        }
    }
    return std::nullopt;
}

/// The tables printed by `patchprobe dump-tables`.
inline std::string dump_tables() {
    std::string out = "# register table (x86-64 -> mir)\n";
    for (const auto& m : register_table()) {
        const Reg r{m.mir, false};
        out += std::string(m.name64) + " " + r.str() + "\n";
    }
    out += "# 32-bit views map to the d-suffixed register (eax -> r" + std::to_string(kReturnReg) + "d)\n";
    out += "# return value register r" + std::to_string(kReturnReg) + "\n";
    out += "# temporaries r" + std::to_string(kTempFirst) + "..r" + std::to_string(kTempLast) + " when unused\n";
    out += "# jcc table (after cmp src, dst)\n";
    for (const auto& e : jcc_table())
        out += std::string(e.mnemonic) + " " + to_string(e.rel) + (e.swapped ? " src, dst" : " dst, src") + "\n";
    return out;
}

} // namespace x86

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline bool is_hex_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

inline std::uint64_t parse_hex_u64(std::string_view s) {
    if (s.substr(0, 2) == "0x") s.remove_prefix(2);
    if (!is_hex_digits(s) || s.size() > 16) throw Error("bad hex number '" + std::string(s) + "'");
    return std::stoull(std::string(s), nullptr, 16);
}

/// Signed number with optional 0x prefix, e.g. `-0x14`, `12`.
inline std::int64_t parse_signed(std::string_view s) {
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        neg = s[0] == '-';
        s.remove_prefix(1);
    }
    std::uint64_t v = 0;
    if (s.substr(0, 2) == "0x") {
        v = parse_hex_u64(s);
    } else {
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
            throw Error("bad number '" + std::string(s) + "'");
        v = std::stoull(std::string(s));
    }
    return static_cast<std::int64_t>(neg ? (~v + 1) : v);
}

inline std::vector<std::string_view> split_words(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t b = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (b < i) out.push_back(s.substr(b, i - b));
    }
    return out;
}

inline bool is_byte_token(std::string_view t) { return t.size() == 2 && is_hex_digits(t); }

} // namespace detail

/// Splits a listing into one AsmListing per `<name>:` header.
inline std::vector<AsmListing> parse_listing(std::string_view source) {
    std::vector<AsmListing> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
        const std::size_t nl = source.find('\n', pos);
        std::string_view raw = source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? source.size() + 1 : nl + 1;
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';' || line.rfind("Disassembly of section", 0) == 0 || line.find("file format") != std::string_view::npos)
            continue;

        const std::size_t colon = line.find(':');
        if (colon == std::string_view::npos) throw ParseError(line_no, 1, "expected an address");
        const std::string_view head = detail::trim(line.substr(0, colon));

        // Function header: `<hex> <name>:`
        if (const auto lt = head.find('<'); lt != std::string_view::npos && head.back() == '>') {
            const std::string_view a = detail::trim(head.substr(0, lt));
            if (!detail::is_hex_digits(a)) throw ParseError(line_no, 1, "malformed address '" + std::string(a) + "'");
            AsmListing l;
            l.addr = detail::parse_hex_u64(a);
            l.name = std::string(head.substr(lt + 1, head.size() - lt - 2));
            out.push_back(std::move(l));
            continue;
        }
        if (!detail::is_hex_digits(head) || head.size() > 16)
            throw ParseError(line_no, 1, "malformed address '" + std::string(head) + "'");
        if (out.empty()) throw ParseError(line_no, 1, "instruction outside a function");

        AsmLine al;
        al.addr = detail::parse_hex_u64(head);
        al.line = line_no;
        std::string_view rest = line.substr(colon + 1);
        if (const auto hash = rest.find('#'); hash != std::string_view::npos) {
            al.comment = std::string(detail::trim(rest.substr(hash + 1)));
            rest = rest.substr(0, hash);
        }
        auto words = detail::split_words(rest);
        std::size_t k = 0;
        while (k < words.size() && detail::is_byte_token(words[k])) ++k;
        // Prefixes that do not change what is lifted.
        while (k < words.size() && (words[k] == "bnd" || words[k] == "notrack" || words[k] == "repz" || words[k] == "rep" ||
                                    words[k] == "cs" || words[k] == "ds" || words[k] == "data16"))
            ++k;
        if (k == words.size()) continue;  // continuation line holding only bytes
        al.mnemonic = std::string(words[k]);
        std::transform(al.mnemonic.begin(), al.mnemonic.end(), al.mnemonic.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        const std::size_t op_start = static_cast<std::size_t>(words[k].data() - rest.data()) + words[k].size();
        al.operands = std::string(detail::trim(rest.substr(op_start)));

        auto& fn = out.back();
        if (!fn.lines.empty() && al.addr <= fn.lines.back().addr)
            throw ParseError(line_no, 1, "address " + hex(al.addr) + " is not increasing");
        fn.lines.push_back(std::move(al));
    }
    return out;
}

namespace detail {

struct AsmOperand {
    enum class Kind { Reg, Imm, Mem, Target } kind = Kind::Imm;
    x86::NamedReg reg{};
    std::int64_t imm = 0;
    // Mem: disp(base, index, scale); rip-relative when `rip` is set.
    std::optional<Reg> base;
    std::optional<Reg> index;
    unsigned scale = 1;
    std::int64_t disp = 0;
    bool rip = false;
    // Target: `1150 <name+0x10>`
    std::uint64_t target = 0;
    std::string symbol;
};

inline std::vector<std::string_view> split_operands(std::string_view s) {
    std::vector<std::string_view> out;
    int depth = 0;
    std::size_t b = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '(') ++depth;
        if (s[i] == ')') --depth;
        if (s[i] == ',' && depth == 0) {
            out.push_back(trim(s.substr(b, i - b)));
            b = i + 1;
        }
    }
    if (!trim(s.substr(b)).empty() || !out.empty()) out.push_back(trim(s.substr(b)));
    return out;
}

inline x86::NamedReg need_register(std::string_view name, const AsmLine& l) {
    if (name.empty() || name[0] != '%') throw LiftError("expected a register at " + hex(l.addr) + ", got '" + std::string(name) + "'");
    auto r = x86::lookup_register(name.substr(1));
    if (!r) throw LiftError("unsupported register " + std::string(name) + " at " + hex(l.addr));
    return *r;
}

inline AsmOperand parse_operand(std::string_view s, const AsmLine& l) {
    AsmOperand o;
    if (s.empty()) throw LiftError("missing operand at " + hex(l.addr));
    if (s[0] == '%') {
        o.kind = AsmOperand::Kind::Reg;
        o.reg = need_register(s, l);
        return o;
    }
    if (s[0] == '$') {
        o.kind = AsmOperand::Kind::Imm;
        o.imm = parse_signed(s.substr(1));
        return o;
    }
    if (s[0] == '*') throw LiftError("indirect " + l.mnemonic + " at " + hex(l.addr) + " is not supported");
    const auto paren = s.find('(');
    if (paren == std::string_view::npos) {
        // Branch or call target: `1150 <name>` or a bare address.
        o.kind = AsmOperand::Kind::Target;
        const auto words = split_words(s);
        o.target = parse_hex_u64(words.at(0));
        if (const auto lt = s.find('<'); lt != std::string_view::npos) {
            std::string_view sym = s.substr(lt + 1);
            sym = sym.substr(0, sym.find('>'));
            // `<f+0x10>` names a point inside f, not a callee.
            if (sym.find('+') == std::string_view::npos) o.symbol = std::string(sym.substr(0, sym.find('@')));
        }
        return o;
    }
    o.kind = AsmOperand::Kind::Mem;
    const std::string_view d = trim(s.substr(0, paren));
    if (!d.empty()) o.disp = parse_signed(d);
    const auto close = s.find(')', paren);
    if (close == std::string_view::npos) throw LiftError("malformed memory operand '" + std::string(s) + "' at " + hex(l.addr));
    const auto parts = split_operands(s.substr(paren + 1, close - paren - 1));
    if (parts.empty() || parts.size() > 3) throw LiftError("malformed memory operand '" + std::string(s) + "' at " + hex(l.addr));
    if (!parts[0].empty()) {
        if (parts[0] == "%rip") {
            o.rip = true;
        } else {
            const auto r = need_register(parts[0], l);
            if (r.bits != 64) throw LiftError("non 64-bit base register at " + hex(l.addr));
            o.base = r.reg;
        }
    }
    if (parts.size() >= 2 && !parts[1].empty()) {
        const auto r = need_register(parts[1], l);
        if (r.bits != 64) throw LiftError("non 64-bit index register at " + hex(l.addr));
        o.index = r.reg;
    }
    if (parts.size() == 3) {
        o.scale = static_cast<unsigned>(parse_signed(parts[2]));
        if (o.scale != 1 && o.scale != 2 && o.scale != 4 && o.scale != 8)
            throw LiftError("bad scale at " + hex(l.addr));
    }
    return o;
}

class Lifter {
public:
    Lifter(const AsmListing& listing, const std::map<std::string, unsigned>* arity) : l_(listing), arity_(arity) {
        std::set<std::uint8_t> used;
        for (const auto& line : l_.lines) {
            std::size_t p = 0;
            while ((p = line.operands.find('%', p)) != std::string::npos) {
                std::size_t e = p + 1;
                while (e < line.operands.size() && std::isalnum(static_cast<unsigned char>(line.operands[e]))) ++e;
                if (auto r = x86::lookup_register(std::string_view(line.operands).substr(p + 1, e - p - 1))) used.insert(r->reg.id);
                p = e;
            }
        }
        for (std::uint8_t t = x86::kTempFirst; t <= x86::kTempLast; ++t)
            if (!used.count(t)) free_temps_.push_back(t);
    }

    MirFunction run() {
        if (l_.lines.empty()) throw LiftError("function " + l_.name + " has no instructions");
        first_emitted_.assign(l_.lines.size(), 0);
        for (cur_ = 0; cur_ < l_.lines.size(); ++cur_) {
            first_emitted_[cur_] = out_.size();
            lift_line(l_.lines[cur_]);
        }
        if (pending_) throw LiftError("compare at " + hex(pending_->addr) + " is not followed by a conditional jump");
        if (out_.empty()) throw LiftError("function " + l_.name + " lifts to no instructions");

        // Targets name asm addresses; point each at the first instruction
        // emitted at or after that asm line.
        std::map<std::uint64_t, std::size_t> line_of;
        for (std::size_t k = 0; k < l_.lines.size(); ++k) line_of[l_.lines[k].addr] = k;
        auto resolve = [&](std::uint64_t t, std::uint64_t site) {
            auto it = line_of.find(t);
            if (it == line_of.end()) throw LiftError("branch target " + hex(t) + " at " + hex(site) + " lies outside " + l_.name);
            const std::size_t idx = first_emitted_[it->second];
            if (idx >= out_.size()) throw LiftError("branch target " + hex(t) + " at " + hex(site) + " falls off the function");
            return out_[idx].addr;
        };
        for (auto& i : out_) {
            if (i.op == Opcode::Br) {
                i.taken = resolve(i.taken, i.addr);
                i.fall = resolve(i.fall, i.addr);
            } else if (i.op == Opcode::Jmp) {
                i.taken = resolve(i.taken, i.addr);
            }
        }
        MirFunction f;
        f.name = l_.name;
        f.entry = out_.front().addr;
        f.instrs = std::move(out_);
        f.return_reg = Reg::gpr(x86::kReturnReg);
        validate(f, false);
        return f;
    }

private:
    struct PendingCompare {
        std::uint64_t addr;
        Reg lhs;      // dst of `cmp src, dst`
        Operand rhs;  // src
        std::set<std::uint8_t> reads;
    };

    const AsmListing& l_;
    const std::map<std::string, unsigned>* arity_;
    std::vector<MirInstr> out_;
    std::vector<std::size_t> first_emitted_;
    std::vector<std::uint8_t> free_temps_;
    std::size_t cur_ = 0;
    std::size_t temps_in_use_ = 0;
    std::optional<PendingCompare> pending_;
    std::size_t pending_temps_ = 0;

    [[noreturn]] void unsupported(const AsmLine& l) const {
        throw LiftError("unsupported mnemonic '" + l.mnemonic + "' at " + hex(l.addr));
    }

    Reg temp(unsigned bits, const AsmLine& l) {
        if (temps_in_use_ >= free_temps_.size())
            throw LiftError("no free temporary register for " + l.mnemonic + " at " + hex(l.addr));
        return Reg{free_temps_[temps_in_use_++], bits == 32};
    }

    static std::string base_mnemonic(const std::string& m, char& suffix) {
        static const std::set<std::string> bases = {"mov", "add", "sub", "imul", "and", "or",  "xor", "shl",  "sal", "shr",
                                                    "sar", "cmp", "test", "push", "pop", "lea", "call", "ret", "jmp", "inc",
                                                    "dec", "leave"};
        suffix = 0;
        if (bases.count(m)) return m;
        if (m.size() > 1 && (m.back() == 'l' || m.back() == 'q') && bases.count(m.substr(0, m.size() - 1))) {
            suffix = m.back();
            return m.substr(0, m.size() - 1);
        }
        return m;
    }

    static unsigned width_of(const std::vector<AsmOperand>& ops, char suffix, const AsmLine& l) {
        for (const auto& o : ops)
            if (o.kind == AsmOperand::Kind::Reg) {
                if (o.reg.bits == 8) throw LiftError("8-bit register operand of " + l.mnemonic + " at " + hex(l.addr));
                return o.reg.bits;
            }
        if (suffix == 'l') return 32;
        if (suffix == 'q') return 64;
        throw LiftError("cannot determine operand size of " + l.mnemonic + " at " + hex(l.addr));
    }

    static Reg view(Reg r, unsigned bits) { return Reg{r.id, bits == 32 && !r.is_frame()}; }

    std::uint64_t next_addr() const {
        if (cur_ + 1 >= l_.lines.size()) throw LiftError("instruction at " + hex(l_.lines[cur_].addr) + " needs a successor line");
        return l_.lines[cur_ + 1].addr;
    }

    /// Reduces a memory operand to base + offset, computing scaled indexes into a temporary.
    std::pair<Reg, std::int64_t> address(const AsmOperand& m, const AsmLine& l) {
        if (m.rip) throw LiftError("rip-relative memory access at " + hex(l.addr) + " is only supported in lea");
        if (!m.index) {
            if (!m.base) throw LiftError("absolute memory access at " + hex(l.addr) + " is not supported");
            return {*m.base, m.disp};
        }
        const Reg t = temp(64, l);
        emit_scaled_index(t, m, l);
        if (m.base) out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Add, t, t, Operand::of(*m.base)));
        return {t, m.disp};
    }

    void emit_scaled_index(Reg dst, const AsmOperand& m, const AsmLine& l) {
        unsigned sh = 0;
        while ((1u << sh) < m.scale) ++sh;
        if (sh == 0)
            out_.push_back(MirInstr::mov(l.addr, dst, Operand::of(*m.index)));
        else
            out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Shl, dst, *m.index, Operand::immediate(sh)));
    }

    /// A readable source operand: register, immediate, or memory loaded into a temporary.
    Operand source(const AsmOperand& o, unsigned bits, const AsmLine& l) {
        switch (o.kind) {
        case AsmOperand::Kind::Reg: return Operand::of(view(o.reg.reg, bits));
        case AsmOperand::Kind::Imm: return Operand::immediate(o.imm);
        case AsmOperand::Kind::Mem: {
            const auto [b, off] = address(o, l);
            const Reg t = temp(bits, l);
            out_.push_back(MirInstr::load(l.addr, t, b, off));
            return Operand::of(t);
        }
        case AsmOperand::Kind::Target: break;
        }
        throw LiftError("bad operand for " + l.mnemonic + " at " + hex(l.addr));
    }

    std::vector<AsmOperand> operands(const AsmLine& l, std::size_t lo, std::size_t hi) const {
        std::vector<AsmOperand> ops;
        for (auto s : split_operands(l.operands)) ops.push_back(parse_operand(s, l));
        if (ops.size() < lo || ops.size() > hi)
            throw LiftError("wrong operand count for " + l.mnemonic + " at " + hex(l.addr));
        return ops;
    }

    void lift_line(const AsmLine& l) {
        // Temporaries of a pending compare stay reserved until its jump.
        temps_in_use_ = pending_ ? pending_temps_ : 0;
        const std::string& m = l.mnemonic;
        if (m.rfind("nop", 0) == 0 || m == "endbr64" || (m == "xchg" && l.operands == "%ax,%ax")) return;

        if (pending_) {
            if (auto j = x86::find_jcc(m)) return lift_jcc(l, *j);
            check_pending_mov(l);
        }
        if (x86::find_jcc(m)) throw LiftError(m + " at " + hex(l.addr) + " has no preceding compare");

        if (m == "movzbl" || m == "movzwl") return lift_movz(l, m == "movzbl" ? 255 : 65535);
        if (m == "movslq" || m == "movsxd") return lift_movslq(l);
        if (m == "cltq") return sign_extend_32(l, Reg::gpr(x86::kReturnReg));
        if (m == "movabs") return lift_mov(l, 'q');

        char suffix = 0;
        const std::string b = base_mnemonic(m, suffix);
        if (b == "mov") return lift_mov(l, suffix);
        if (b == "lea") return lift_lea(l);
        if (b == "add") return lift_alu(l, suffix, BinOpKind::Add);
        if (b == "sub") return lift_alu(l, suffix, BinOpKind::Sub);
        if (b == "and") return lift_alu(l, suffix, BinOpKind::And);
        if (b == "or") return lift_alu(l, suffix, BinOpKind::Or);
        if (b == "xor") return lift_alu(l, suffix, BinOpKind::Xor);
        if (b == "imul") return lift_alu(l, suffix, BinOpKind::Mul);
        if (b == "shl" || b == "sal") return lift_alu(l, suffix, BinOpKind::Shl);
        if (b == "shr") return lift_alu(l, suffix, BinOpKind::Shr);
        if (b == "sar") return lift_alu(l, suffix, BinOpKind::Sar);
        if (b == "inc" || b == "dec") return lift_incdec(l, suffix, b == "inc" ? BinOpKind::Add : BinOpKind::Sub);
        if (b == "cmp") return lift_compare(l, suffix, false);
        if (b == "test") return lift_compare(l, suffix, true);
        if (b == "push") return lift_push(l);
        if (b == "pop") return lift_pop(l);
        if (b == "leave") return lift_leave(l);
        if (b == "jmp") return lift_jmp(l);
        if (b == "call") return lift_call(l);
        if (b == "ret") {
            out_.push_back(MirInstr::ret(l.addr));
            return;
        }
        unsupported(l);
    }

    void check_pending_mov(const AsmLine& l) {
        char suffix = 0;
        if (base_mnemonic(l.mnemonic, suffix) != "mov")
            throw LiftError("compare at " + hex(pending_->addr) + " is not followed by a conditional jump");
        const auto ops = operands(l, 2, 2);
        if (ops[1].kind != AsmOperand::Kind::Reg || pending_->reads.count(ops[1].reg.reg.id))
            throw LiftError("compare at " + hex(pending_->addr) + " cannot be fused across " + hex(l.addr));
    }

    void lift_mov(const AsmLine& l, char suffix) {
        const auto ops = operands(l, 2, 2);
        const unsigned w = width_of(ops, suffix, l);
        const auto& src = ops[0];
        const auto& dst = ops[1];
        if (dst.kind == AsmOperand::Kind::Reg) {
            const Reg d = view(dst.reg.reg, w);
            if (src.kind == AsmOperand::Kind::Mem) {
                const auto [b, off] = address(src, l);
                out_.push_back(MirInstr::load(l.addr, d, b, off));
            } else {
                out_.push_back(MirInstr::mov(l.addr, d, source(src, w, l)));
            }
            return;
        }
        if (dst.kind == AsmOperand::Kind::Mem) {
            if (src.kind == AsmOperand::Kind::Mem) throw LiftError("memory to memory mov at " + hex(l.addr));
            const Operand v = source(src, w, l);
            const auto [b, off] = address(dst, l);
            out_.push_back(MirInstr::store(l.addr, b, off, v));
            return;
        }
        throw LiftError("bad destination for " + l.mnemonic + " at " + hex(l.addr));
    }

    void lift_movz(const AsmLine& l, std::int64_t mask) {
        const auto ops = operands(l, 2, 2);
        if (ops[1].kind != AsmOperand::Kind::Reg || ops[1].reg.bits != 32)
            throw LiftError(l.mnemonic + " at " + hex(l.addr) + " needs a 32-bit register destination");
        const Reg d = ops[1].reg.reg;
        if (ops[0].kind == AsmOperand::Kind::Mem) {
            const auto [b, off] = address(ops[0], l);
            out_.push_back(MirInstr::load(l.addr, d, b, off));
        } else if (ops[0].kind == AsmOperand::Kind::Reg) {
            out_.push_back(MirInstr::mov(l.addr, d, Operand::of(view(ops[0].reg.reg, 32))));
        } else {
            throw LiftError("bad source for " + l.mnemonic + " at " + hex(l.addr));
        }
        out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::And, d, d, Operand::immediate(mask)));
    }

    void sign_extend_32(const AsmLine& l, Reg full) {
        out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Shl, full, full, Operand::immediate(32)));
        out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Sar, full, full, Operand::immediate(32)));
    }

    void lift_movslq(const AsmLine& l) {
        const auto ops = operands(l, 2, 2);
        if (ops[1].kind != AsmOperand::Kind::Reg || ops[1].reg.bits != 64)
            throw LiftError(l.mnemonic + " at " + hex(l.addr) + " needs a 64-bit register destination");
        const Reg d = ops[1].reg.reg;
        if (ops[0].kind == AsmOperand::Kind::Mem) {
            const auto [b, off] = address(ops[0], l);
            out_.push_back(MirInstr::load(l.addr, view(d, 32), b, off));
        } else if (ops[0].kind == AsmOperand::Kind::Reg && ops[0].reg.bits == 32) {
            out_.push_back(MirInstr::mov(l.addr, view(d, 32), Operand::of(ops[0].reg.reg)));
        } else {
            throw LiftError("bad source for " + l.mnemonic + " at " + hex(l.addr));
        }
        sign_extend_32(l, d);
    }

    void lift_lea(const AsmLine& l) {
        const auto ops = operands(l, 2, 2);
        if (ops[0].kind != AsmOperand::Kind::Mem || ops[1].kind != AsmOperand::Kind::Reg)
            throw LiftError("bad operands for lea at " + hex(l.addr));
        const auto& m = ops[0];
        const unsigned w = ops[1].reg.bits;
        if (w == 8) throw LiftError("8-bit lea at " + hex(l.addr));
        const Reg d = view(ops[1].reg.reg, w);
        if (m.rip) {
            std::uint64_t abs = next_addr() + static_cast<std::uint64_t>(m.disp);
            if (!l.comment.empty()) {
                const auto words = split_words(l.comment);
                if (is_hex_digits(words.front())) abs = parse_hex_u64(words.front());
            }
            out_.push_back(MirInstr::mov(l.addr, d, Operand::immediate(static_cast<std::int64_t>(abs))));
            return;
        }
        if (!m.index) {
            if (!m.base) throw LiftError("lea without base at " + hex(l.addr));
            out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Add, d, view(*m.base, w), Operand::immediate(m.disp)));
            return;
        }
        const bool alias = m.base && m.base->id == d.id;
        const Reg acc = alias ? temp(64, l) : d.full();
        emit_scaled_index(acc, m, l);
        if (m.base) out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Add, acc, acc, Operand::of(*m.base)));
        if (m.disp != 0 || acc != d.full() || w == 32) {
            out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Add, d, view(acc, w), Operand::immediate(m.disp)));
        }
    }

    void lift_alu(const AsmLine& l, char suffix, BinOpKind k) {
        const bool shift = k == BinOpKind::Shl || k == BinOpKind::Shr || k == BinOpKind::Sar;
        auto ops = operands(l, 1, k == BinOpKind::Mul ? 3 : 2);
        if (ops.size() == 1) {
            if (!shift) throw LiftError("wrong operand count for " + l.mnemonic + " at " + hex(l.addr));
            AsmOperand one;
            one.kind = AsmOperand::Kind::Imm;
            one.imm = 1;
            ops.insert(ops.begin(), one);
        }
        if (shift && ops[0].kind != AsmOperand::Kind::Imm)
            throw LiftError("variable shift count at " + hex(l.addr) + " is not supported");
        if (ops.size() == 3) {
            // imul $imm, src, dst
            if (ops[0].kind != AsmOperand::Kind::Imm || ops[2].kind != AsmOperand::Kind::Reg)
                throw LiftError("bad operands for imul at " + hex(l.addr));
            const unsigned w = width_of({ops[2]}, suffix, l);
            const Operand s = source(ops[1], w, l);
            if (s.is_imm) throw LiftError("bad operands for imul at " + hex(l.addr));
            out_.push_back(MirInstr::alu_op(l.addr, k, view(ops[2].reg.reg, w), s.reg, Operand::immediate(ops[0].imm)));
            return;
        }
        const unsigned w = width_of(ops, suffix, l);
        const auto& dst = ops[1];
        if (dst.kind == AsmOperand::Kind::Reg) {
            const Reg d = view(dst.reg.reg, w);
            const Operand s = source(ops[0], w, l);
            out_.push_back(MirInstr::alu_op(l.addr, k, d, d, s));
            return;
        }
        if (dst.kind != AsmOperand::Kind::Mem) throw LiftError("bad destination for " + l.mnemonic + " at " + hex(l.addr));
        const Operand s = source(ops[0], w, l);
        const auto [b, off] = address(dst, l);
        const Reg t = temp(w, l);
        out_.push_back(MirInstr::load(l.addr, t, b, off));
        out_.push_back(MirInstr::alu_op(l.addr, k, t, t, s));
        out_.push_back(MirInstr::store(l.addr, b, off, Operand::of(t)));
    }

    void lift_incdec(const AsmLine& l, char suffix, BinOpKind k) {
        const auto ops = operands(l, 1, 1);
        const unsigned w = width_of(ops, suffix, l);
        if (ops[0].kind == AsmOperand::Kind::Reg) {
            const Reg d = view(ops[0].reg.reg, w);
            out_.push_back(MirInstr::alu_op(l.addr, k, d, d, Operand::immediate(1)));
            return;
        }
        if (ops[0].kind != AsmOperand::Kind::Mem) throw LiftError("bad operand for " + l.mnemonic + " at " + hex(l.addr));
        const auto [b, off] = address(ops[0], l);
        const Reg t = temp(w, l);
        out_.push_back(MirInstr::load(l.addr, t, b, off));
        out_.push_back(MirInstr::alu_op(l.addr, k, t, t, Operand::immediate(1)));
        out_.push_back(MirInstr::store(l.addr, b, off, Operand::of(t)));
    }

    void lift_compare(const AsmLine& l, char suffix, bool is_test) {
        const auto ops = operands(l, 2, 2);
        const unsigned w = width_of(ops, suffix, l);
        PendingCompare p;
        p.addr = l.addr;
        if (ops[1].kind == AsmOperand::Kind::Imm) throw LiftError("immediate destination for " + l.mnemonic + " at " + hex(l.addr));
        const Operand dst = source(ops[1], w, l);
        if (is_test) {
            const bool same = ops[0].kind == AsmOperand::Kind::Reg && ops[1].kind == AsmOperand::Kind::Reg &&
                              ops[0].reg.reg.id == ops[1].reg.reg.id;
            if (same) {
                p.lhs = dst.reg;
            } else {
                const Operand src = source(ops[0], w, l);
                const Reg t = temp(w, l);
                out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::And, t, dst.reg, src));
                p.lhs = t;
            }
            p.rhs = Operand::immediate(0);
        } else {
            p.lhs = dst.reg;
            p.rhs = source(ops[0], w, l);
        }
        p.reads.insert(p.lhs.id);
        if (!p.rhs.is_imm) p.reads.insert(p.rhs.reg.id);
        // Temporaries stay reserved until the jump is lifted.
        pending_ = p;
        pending_temps_ = temps_in_use_;
    }

    void lift_jcc(const AsmLine& l, const x86::JccEntry& j) {
        const auto ops = operands(l, 1, 1);
        if (ops[0].kind != AsmOperand::Kind::Target) throw LiftError("bad target for " + l.mnemonic + " at " + hex(l.addr));
        const PendingCompare p = *pending_;
        pending_.reset();
        std::uint64_t taken = ops[0].target;
        std::uint64_t fall = next_addr();
        Rel rel = j.rel;
        Reg lhs = p.lhs;
        Operand rhs = p.rhs;
        if (j.swapped) {
            if (rhs.is_imm) {
                // dst >u c  is  not (dst <=u c); dst >=u c  is  not (dst <u c)
                rel = j.rel == Rel::Ult ? Rel::Ule : Rel::Ult;
                std::swap(taken, fall);
            } else {
                const Reg r = rhs.reg;
                rhs = Operand::of(lhs);
                lhs = r;
            }
        }
        out_.push_back(MirInstr::br(p.addr, rel, lhs, rhs, taken, fall));
    }

    void lift_push(const AsmLine& l) {
        const auto ops = operands(l, 1, 1);
        const Operand v = source(ops[0], 64, l);
        out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Sub, Reg::sp(), Reg::sp(), Operand::immediate(8)));
        out_.push_back(MirInstr::store(l.addr, Reg::sp(), 0, v));
    }

    void lift_pop(const AsmLine& l) {
        const auto ops = operands(l, 1, 1);
        if (ops[0].kind != AsmOperand::Kind::Reg || ops[0].reg.bits != 64) throw LiftError("bad operand for pop at " + hex(l.addr));
        out_.push_back(MirInstr::load(l.addr, ops[0].reg.reg, Reg::sp(), 0));
        out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Add, Reg::sp(), Reg::sp(), Operand::immediate(8)));
    }

    void lift_leave(const AsmLine& l) {
        out_.push_back(MirInstr::mov(l.addr, Reg::sp(), Operand::of(Reg::fp())));
        out_.push_back(MirInstr::load(l.addr, Reg::fp(), Reg::sp(), 0));
        out_.push_back(MirInstr::alu_op(l.addr, BinOpKind::Add, Reg::sp(), Reg::sp(), Operand::immediate(8)));
    }

    void lift_jmp(const AsmLine& l) {
        const auto ops = operands(l, 1, 1);
        if (ops[0].kind != AsmOperand::Kind::Target) throw LiftError("bad target for jmp at " + hex(l.addr));
        out_.push_back(MirInstr::jmp(l.addr, ops[0].target));
    }

    void lift_call(const AsmLine& l) {
        const auto ops = operands(l, 1, 1);
        if (ops[0].kind != AsmOperand::Kind::Target) throw LiftError("bad target for call at " + hex(l.addr));
        const std::string name = ops[0].symbol.empty() ? "sub_" + hex(ops[0].target).substr(2) : ops[0].symbol;
        unsigned n = 6;
        if (arity_) {
            if (auto it = arity_->find(name); it != arity_->end()) n = it->second;
        }
        out_.push_back(MirInstr::call(l.addr, name, n));
    }
};

} // namespace detail

/// Lifts one function. `call_arity` supplies argument counts by callee name;
/// callees it does not list take 6 arguments.
inline MirFunction lift(const AsmListing& listing, const std::map<std::string, unsigned>* call_arity = nullptr) {
    return detail::Lifter(listing, call_arity).run();
}

} // namespace patchprobe
