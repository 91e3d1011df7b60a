#pragma once

// Depth-first symbolic emulation over a CFG.
//
// Each basic block is emulated at most once across the whole run (visited
// set keyed by block id), so loops unroll once and a join block belongs to
// the first path that reaches it. A state is dead when it executes `ret` or
// its next block has already been emulated; a dead state's effect trace is
// emitted. The taken successor is pushed before the fall-through one and the
// worklist pops from the back.
//
// Memory model: sp and fp start at the symbolic frame base FP. An address
// that canonicalizes to FP + c is a stack slot keyed by c; any other address
// is a heap cell keyed by its canonical expression. A location read before it
// is written yields a symbol named after it, stable for the whole run.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "patchprobe/effect.hpp"
#include "patchprobe/expr.hpp"
#include "patchprobe/mir.hpp"

namespace patchprobe {

inline const std::string kFrameBase = "FP";

struct EmulationLimits {
    std::size_t max_blocks = 4096;
    std::size_t max_paths = 4096;
};

struct MachineState {
    /// Register contents indexed by Reg::id; a 32-bit value means the register
    /// was last written through its low half.
    std::array<std::optional<Expr>, 18> regs{};
    std::map<std::int64_t, Expr> stack;
    std::vector<std::pair<Expr, Expr>> mem;
    std::vector<Effect> trace;
    std::vector<std::size_t> path;
    std::size_t cursor = 0;
    unsigned ret_counter = 0;
    bool dead = false;
};

struct Trace {
    std::vector<Effect> effects;
    /// Block ids in emulation order. The last entry is the block the path died
    /// in, or the already-visited block it ran into.
    std::vector<std::size_t> blocks;
};

struct EmulationResult {
    std::vector<Trace> traces;
    std::size_t emulated_blocks = 0;
    bool partial = false;
    /// Reachable blocks that were never emulated (non-zero only when partial).
    std::size_t unvisited_blocks = 0;
};

namespace detail {

inline Expr frame_base() { return Expr::symbol(kFrameBase, 64); }

inline Expr fit_width(const Expr& v, unsigned w) {
    if (v.width() == w) return v;
    return canon(Expr::cast(v.width() < w ? CastKind::ZExt : CastKind::Trunc, w, v));
}

/// Offset from the frame base when `addr` is FP or FP + c.
inline std::optional<std::int64_t> stack_offset(const Expr& addr) {
    if (addr.is_sym() && addr.name() == kFrameBase) return 0;
    if (addr.kind() == ExprKind::BinOp && addr.binop_kind() == BinOpKind::Add && addr.lhs().is_sym() &&
        addr.lhs().name() == kFrameBase && addr.rhs().is_const())
        return addr.rhs().signed_value();
    return std::nullopt;
}

} // namespace detail

inline Expr read_reg(const MachineState& s, Reg r) {
    const auto& slot = s.regs[r.id];
    if (r.is_frame()) return slot ? *slot : detail::frame_base();
    if (!slot) return Expr::symbol("R(" + r.str() + ")", r.width());
    return detail::fit_width(*slot, r.width());
}

inline void write_reg(MachineState& s, Reg r, const Expr& v) {
    s.regs[r.id] = detail::fit_width(v, r.width());
}

inline Expr read_operand(const MachineState& s, const Operand& o, unsigned imm_width) {
    return o.is_imm ? Expr::constant(static_cast<std::uint64_t>(o.imm), imm_width) : read_reg(s, o.reg);
}

inline Expr effective_address(const MachineState& s, Reg base, std::int64_t offset) {
    return canon(Expr::binop(BinOpKind::Add, read_reg(s, base), Expr::constant(static_cast<std::uint64_t>(offset), 64)));
}

inline Expr load_memory(MachineState& s, const Expr& addr, unsigned width) {
    if (auto off = detail::stack_offset(addr)) {
        auto it = s.stack.find(*off);
        if (it == s.stack.end()) it = s.stack.emplace(*off, Expr::symbol("M(" + render(addr) + ")", width)).first;
        return detail::fit_width(it->second, width);
    }
    for (const auto& [a, v] : s.mem)
        if (a == addr) return detail::fit_width(v, width);
    Expr fresh = Expr::symbol("M(" + render(addr) + ")", width);
    s.mem.emplace_back(addr, fresh);
    return fresh;
}

inline void store_memory(MachineState& s, const Expr& addr, const Expr& value) {
    if (auto off = detail::stack_offset(addr)) {
        s.stack[*off] = value;
        return;
    }
    for (auto& [a, v] : s.mem)
        if (a == addr) {
            v = value;
            return;
        }
    s.mem.emplace_back(addr, value);
}

/// Entry state for `cfg`: no register or memory content, cursor at the entry block.
inline MachineState initial_state(const Cfg& cfg) {
    MachineState s;
    s.cursor = cfg.entry;
    return s;
}

/// Executes one non-branching instruction in place. Branches, jumps and
/// returns are handled by emulate_block since they decide successors.
inline void step(MachineState& s, const MirInstr& i, Reg return_reg = Reg::gpr(0)) {
    switch (i.op) {
    case Opcode::Mov: {
        Expr v = detail::fit_width(read_operand(s, i.src, i.dst.width()), i.dst.width());
        write_reg(s, i.dst, v);
        if (!i.dst.is_frame()) s.trace.push_back(Effect::reg_write(i.addr, i.dst.str(), v));
        break;
    }
    case Opcode::Alu: {
        const Expr lhs = read_reg(s, i.a);
        const Expr rhs = read_operand(s, i.src, i.a.width());
        const Expr v = canon(Expr::binop(i.alu, lhs, rhs));
        write_reg(s, i.dst, v);
        if (!i.dst.is_frame()) s.trace.push_back(Effect::reg_write(i.addr, i.dst.str(), v));
        break;
    }
    case Opcode::Load: {
        const Expr addr = effective_address(s, i.base, i.offset);
        write_reg(s, i.dst, load_memory(s, addr, i.dst.width()));
        break;
    }
    case Opcode::Store: {
        const Expr addr = effective_address(s, i.base, i.offset);
        const Expr v = read_operand(s, i.src, 64);
        store_memory(s, addr, v);
        s.trace.push_back(Effect::mem_store(i.addr, addr, v));
        break;
    }
    case Opcode::Call: {
        std::vector<Expr> params;
        for (unsigned k = 0; k < i.nargs; ++k) params.push_back(read_reg(s, Reg::gpr(k)));
        s.trace.push_back(Effect::call(i.addr, i.callee, std::move(params)));
        const std::string ret_name = "RET(" + i.callee + "," + std::to_string(s.ret_counter++) + ")";
        write_reg(s, return_reg, Expr::symbol(ret_name, 64));
        break;
    }
    case Opcode::Ret:
        s.trace.push_back(Effect::ret(i.addr, read_reg(s, return_reg)));
        s.dead = true;
        break;
    case Opcode::Br:
    case Opcode::Jmp: break;
    }
}

/// Emulates the block at `s.cursor` and returns the successor states. A state
/// that executed `ret` comes back marked dead.
inline std::vector<MachineState> emulate_block(const Cfg& cfg, MachineState s) {
    const BasicBlock& b = cfg.blocks[s.cursor];
    const Reg rr = cfg.function.return_reg;
    s.path.push_back(b.id);
    for (std::size_t k = b.first; k + 1 < b.end; ++k) step(s, cfg.instr(k), rr);

    const MirInstr& last = cfg.instr(b.end - 1);
    std::vector<MachineState> next;
    auto target = [&](EdgeKind kind) {
        for (const auto& e : b.successors)
            if (e.kind == kind) return e.target;
        throw Error("block " + std::to_string(b.id) + " lacks a " + to_string(kind) + " edge");
    };
    switch (last.op) {
    case Opcode::Br: {
        const Expr c = canon(Expr::cmp(last.rel, read_reg(s, last.a), read_operand(s, last.src, last.a.width())));
        MachineState taken = s;
        taken.trace.push_back(Effect::condition(last.addr, c));
        taken.cursor = target(EdgeKind::Taken);
        s.trace.push_back(Effect::condition(last.addr, canon(Expr::bool_not(c))));
        s.cursor = target(EdgeKind::Fall);
        next.push_back(std::move(taken));
        next.push_back(std::move(s));
        break;
    }
    case Opcode::Jmp:
        s.cursor = target(EdgeKind::Jump);
        next.push_back(std::move(s));
        break;
    case Opcode::Ret:
        step(s, last, rr);
        next.push_back(std::move(s));
        break;
    default:
        step(s, last, rr);
        s.cursor = target(EdgeKind::Fall);
        next.push_back(std::move(s));
        break;
    }
    return next;
}

inline EmulationResult emulate_function(const Cfg& cfg, const EmulationLimits& limits = {}) {
    if (limits.max_blocks < 1 || limits.max_paths < 1) throw Error("emulation limits must be at least 1");
    EmulationResult out;
    std::vector<bool> visited(cfg.blocks.size(), false);
    std::vector<MachineState> work;
    work.push_back(initial_state(cfg));

    auto finish = [&](MachineState&& s) {
        if (!s.dead) s.path.push_back(s.cursor);
        out.traces.push_back(Trace{std::move(s.trace), std::move(s.path)});
    };

    while (!work.empty()) {
        if (out.traces.size() >= limits.max_paths) {
            out.partial = true;
            break;
        }
        MachineState s = std::move(work.back());
        work.pop_back();
        if (visited[s.cursor]) {
            finish(std::move(s));
            continue;
        }
        if (out.emulated_blocks >= limits.max_blocks) {
            out.partial = true;
            finish(std::move(s));
            continue;
        }
        visited[s.cursor] = true;
        ++out.emulated_blocks;
        for (auto& n : emulate_block(cfg, std::move(s))) {
            if (n.dead || visited[n.cursor]) {
                finish(std::move(n));
            } else {
                work.push_back(std::move(n));
            }
        }
    }
    if (out.partial) {
        std::vector<bool> reachable(cfg.blocks.size(), true);
        for (std::size_t b : cfg.unreachable) reachable[b] = false;
        for (std::size_t b = 0; b < visited.size(); ++b)
            if (reachable[b] && !visited[b]) ++out.unvisited_blocks;
    }
    return out;
}

/// One effect per line, prefixed by kind and site.
inline std::string render(const Trace& t) {
    std::string out;
    for (const auto& e : t.effects) out += render(e) + "\n";
    return out;
}

inline std::string render(const EmulationResult& r) {
    std::string out;
    for (std::size_t k = 0; k < r.traces.size(); ++k) {
        out += "# path " + std::to_string(k) + " blocks";
        for (std::size_t b : r.traces[k].blocks) out += " " + std::to_string(b);
        out += "\n" + render(r.traces[k]);
    }
    return out;
}

} // namespace patchprobe
